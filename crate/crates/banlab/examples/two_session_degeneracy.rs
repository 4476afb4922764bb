//! Why this model cannot plan training: the optimal spacing between two
//! sessions is always zero.
//!
//! ```bash
//! cargo run -p banlab --example two_session_degeneracy
//! ```

use banlab::banister::{timing_quantities, two_session_response, BanisterParams};

fn main() {
    let params = BanisterParams::new(2.0, 8.0, 2.0).unwrap();
    let timing = timing_quantities(&params).unwrap();
    let t_star = timing.t_star;

    // scan evaluation time t and session spacing s on a dense grid
    let mut grid: Vec<f64> = (0..=600).map(|k| k as f64 * 3.0 * t_star / 600.0).collect();
    grid.push(t_star);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
    for &t in &grid {
        for &s in grid.iter().filter(|&&s| s <= t) {
            let w = two_session_response(&params, t, s).unwrap();
            if w > best.2 {
                best = (t, s, w);
            }
        }
    }
    println!("grid argmax: evaluate at t = {:.3} d with spacing s = {:.3} d", best.0, best.1);
    println!("peak combined response = {:.4}", best.2);
    println!("single-bout peak time t* = {t_star:.3} d");
    println!();
    println!("best spacing for a few fixed evaluation times:");
    println!("{:>8} {:>10} {:>12}", "t (d)", "best s", "response");
    for &t in &[4.0, t_star, 8.0, 12.0] {
        let mut row = (f64::NAN, f64::NEG_INFINITY);
        for k in 0..=400 {
            let s = t * k as f64 / 400.0;
            let w = two_session_response(&params, t, s).unwrap();
            if w > row.1 {
                row = (s, w);
            }
        }
        println!("{t:>8.2} {:>10.3} {:>12.4}", row.0, row.1);
    }
    println!();
    println!(
        "the maximum always sits at s = 0: the model says to train twice at \
         once, so it describes recovery dynamics but cannot optimise a schedule"
    );
}
