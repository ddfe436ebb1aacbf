//! Damped least-squares (Levenberg-style) minimization of ½‖r(x)‖² for
//! small dense problems with box projection. Accepted steps never increase
//! the objective.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop when an accepted step reduces the cost by less than this
    /// relative amount.
    pub relative_decrease_tol: f64,
    /// Stop when the accepted step is shorter than this.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 60,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 1.0 / 3.0,
            relative_decrease_tol: 1e-10,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal of JᵀJ at the solution, a per-parameter sensitivity proxy.
    pub jtj_diagonal: Vec<f64>,
}

/// Minimizes ½‖r(x)‖². `eval` fills the residual vector and, when asked,
/// the row-major m×n Jacobian; `project` clamps parameters into bounds.
pub fn solve_lm<E, P>(x0: &[f64], mut eval: E, project: P, opts: &LmOptions) -> LmResult
where
    E: FnMut(&[f64], Option<&mut DMatrix<f64>>) -> DVector<f64>,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);

    let m = eval(&x, None).len();
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut r = eval(&x, Some(&mut jac));
    let mut cost = 0.5 * r.norm_squared();

    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iterations = 0;
    let mut jtj = jac.transpose() * &jac;

    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..24 {
            let mut h = jtj.clone();
            let scale = h.diagonal().max().max(1e-12);
            for i in 0..n {
                h[(i, i)] += lambda * scale;
            }
            let delta = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= opts.lambda_up;
                    continue;
                }
            };
            let mut x_new = x.clone();
            for i in 0..n {
                x_new[i] += delta[i];
            }
            project(&mut x_new);
            let r_new = eval(&x_new, None);
            let cost_new = 0.5 * r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let decrease = (cost - cost_new) / cost.max(1e-300);
                let step: f64 = x_new
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                x = x_new;
                r = eval(&x, Some(&mut jac));
                jtj = jac.transpose() * &jac;
                cost = cost_new;
                lambda = (lambda * opts.lambda_down).max(1e-12);
                accepted = true;
                if decrease < opts.relative_decrease_tol || step < opts.step_tol {
                    converged = true;
                }
                break;
            }
            lambda *= opts.lambda_up;
            if lambda > 1e12 {
                break;
            }
        }
        if !accepted {
            converged = cost.is_finite();
            break;
        }
        if converged {
            break;
        }
    }

    let jtj_diagonal = (0..n).map(|i| jtj[(i, i)]).collect();
    LmResult { params: x, cost, iterations, converged, jtj_diagonal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fits_exponential_curve() {
        // data from y = 2·exp(−1.3 t)
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * (-1.3 * t).exp()).collect();
        let res = solve_lm(
            &[1.0, -0.5],
            |x, mut jac| {
                let mut r = DVector::zeros(ts.len());
                for (i, (&t, &y)) in ts.iter().zip(&ys).enumerate() {
                    let e = (x[1] * t).exp();
                    r[i] = x[0] * e - y;
                    if let Some(j) = jac.as_deref_mut() {
                        j[(i, 0)] = e;
                        j[(i, 1)] = x[0] * t * e;
                    }
                }
                r
            },
            |_| {},
            &LmOptions::default(),
        );
        assert!(res.converged);
        assert_relative_eq!(res.params[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(res.params[1], -1.3, epsilon = 1e-6);
    }

    #[test]
    fn projection_respects_bounds() {
        let res = solve_lm(
            &[0.5],
            |x, mut jac| {
                if let Some(j) = jac.as_deref_mut() {
                    j[(0, 0)] = 1.0;
                }
                DVector::from_vec(vec![x[0] - 5.0])
            },
            |x| x[0] = x[0].clamp(0.0, 1.0),
            &LmOptions::default(),
        );
        assert_relative_eq!(res.params[0], 1.0, epsilon = 1e-12);
    }
}
