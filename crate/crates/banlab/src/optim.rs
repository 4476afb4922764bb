//! Derivative-free minimisation and numerical differentiation helpers.

use nalgebra::DMatrix;

/// Options for the Nelder-Mead simplex search.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Give up after this many iterations.
    pub max_iter: usize,
    /// Converged when the best-to-worst objective spread over the simplex
    /// falls below this.
    pub f_tol: f64,
    /// Initial simplex step added to each coordinate of the start point.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-10,
            initial_step: 0.25,
        }
    }
}

/// Outcome of a simplex search.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimise `f` from `x0` with the standard Nelder-Mead moves
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
///
/// Non-finite objective values are treated as +inf so the simplex backs
/// away from invalid regions instead of aborting.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim > 0, "cannot optimise a zero-dimensional function");
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut scores: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = scores[worst] - scores[best];
        if spread.is_finite() && spread.abs() < opts.f_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[idx][d];
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = eval(&reflect);

        if f_reflect < scores[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + 2.0 * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = eval(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                scores[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                scores[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < scores[second_worst] {
            simplex[worst] = reflect;
            scores[worst] = f_reflect;
            continue;
        }

        let contract: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + 0.5 * (simplex[worst][d] - centroid[d]))
            .collect();
        let f_contract = eval(&contract);
        if f_contract < scores[worst] {
            simplex[worst] = contract;
            scores[worst] = f_contract;
            continue;
        }

        // Shrink toward the best vertex.
        let best_point = simplex[best].clone();
        for &idx in order.iter().skip(1) {
            for d in 0..dim {
                simplex[idx][d] = best_point[d] + 0.5 * (simplex[idx][d] - best_point[d]);
            }
            scores[idx] = eval(&simplex[idx]);
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        f: scores[best],
        iterations,
        converged,
    }
}

/// Nelder-Mead with restarts: after each converged search the simplex is
/// re-opened around the best point, which breaks the premature collapse
/// the plain method is prone to on anisotropic surfaces. Stops when a
/// restart fails to improve by more than `f_tol`.
pub fn nelder_mead_restarted<F>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
    max_restarts: usize,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = nelder_mead(&mut f, x0, opts);
    let mut total_iterations = best.iterations;
    for _ in 0..max_restarts {
        let previous = best.f;
        let next = nelder_mead(&mut f, &best.x, opts);
        total_iterations += next.iterations;
        if next.f < best.f {
            best = next;
        }
        let improvement = previous - best.f;
        if !improvement.is_finite() || improvement <= opts.f_tol {
            break;
        }
    }
    best.iterations = total_iterations;
    best
}

/// Symmetric numerical Hessian of `f` at `x` by central differences with
/// per-coordinate step `rel_step * max(|x_k|, 1)`.
pub fn numerical_hessian<F>(mut f: F, x: &[f64], rel_step: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| rel_step * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut h = DMatrix::zeros(dim, dim);
    let mut shifted = x.to_vec();

    for k in 0..dim {
        shifted[k] = x[k] + steps[k];
        let plus = f(&shifted);
        shifted[k] = x[k] - steps[k];
        let minus = f(&shifted);
        shifted[k] = x[k];
        h[(k, k)] = (plus - 2.0 * f0 + minus) / (steps[k] * steps[k]);
    }
    for k in 0..dim {
        for l in (k + 1)..dim {
            let mut probe = |sk: f64, sl: f64| {
                shifted[k] = x[k] + sk * steps[k];
                shifted[l] = x[l] + sl * steps[l];
                let v = f(&shifted);
                shifted[k] = x[k];
                shifted[l] = x[l];
                v
            };
            let pp = probe(1.0, 1.0);
            let pm = probe(1.0, -1.0);
            let mp = probe(-1.0, 1.0);
            let mm = probe(-1.0, -1.0);
            let second = (pp - pm - mp + mm) / (4.0 * steps[k] * steps[l]);
            h[(k, l)] = second;
            h[(l, k)] = second;
        }
    }
    h
}
