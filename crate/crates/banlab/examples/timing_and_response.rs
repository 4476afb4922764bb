//! Single-bout response curve and its timing quantities.
//!
//! ```bash
//! cargo run -p banlab --example timing_and_response
//! ```

use banlab::banister::{single_bout_response, timing_quantities, BanisterParams};

fn main() {
    // the classic illustration: fatigue twice the size of fitness,
    // decaying four times faster
    let params = BanisterParams::new(2.0, 8.0, 2.0).unwrap();
    let timing = timing_quantities(&params).unwrap();

    println!("k_f = {}, tau_a = {} d, tau_f = {} d", params.k_f, params.tau_a, params.tau_f);
    println!("baseline return t0   = {:.3} days", timing.t_zero);
    println!("peak response  t*    = {:.3} days", timing.t_star);
    println!("half decay     t_1/2 = {:.3} days", timing.t_half.unwrap());
    println!();
    println!("{:>5} {:>10}", "day", "response");
    for day in 0..=30 {
        let w = single_bout_response(1.0, &params, f64::from(day)).unwrap();
        let bar_len = ((w + 1.0) * 30.0).round().max(0.0) as usize;
        println!("{day:>5} {w:>10.4} {}", "#".repeat(bar_len));
    }
    println!();
    println!(
        "a single session hurts for {:.1} days, peaks at {:.1} days, and has \
         faded to half the peak by day {:.1}",
        timing.t_zero,
        timing.t_star,
        timing.t_half.unwrap()
    );
}
