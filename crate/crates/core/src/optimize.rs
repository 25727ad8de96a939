//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A stalled line search counts as converged when the gradient is within
/// this factor of the tolerance.
const STALL_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iterations: 500,
            grad_tol: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;
const MAX_EVALUATIONS: usize = 60;

type Point = (Vec<f64>, f64, Vec<f64>);

/// Step along `d` satisfying the strong Wolfe conditions, by expansion then
/// bisection. Falls back to the best sufficient-decrease point found.
fn wolfe_search<F>(f: &mut F, x: &[f64], fx: f64, d: &[f64], slope: f64, step: f64) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval = |a: f64| {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let (fa, ga) = f(&xa);
        let da = dot(&ga, d);
        (xa, fa, ga, da)
    };
    let sufficient = |a: f64, fa: f64| fa.is_finite() && fa <= fx + ARMIJO * a * slope;
    let mut evaluations = 0;

    // bracketing phase
    let (mut lo, mut f_lo, mut best): (f64, f64, Option<Point>) = (0.0, fx, None);
    let mut a = step;
    let mut hi;
    loop {
        let (xa, fa, ga, da) = eval(a);
        evaluations += 1;
        if !sufficient(a, fa) || (lo > 0.0 && fa >= f_lo) {
            hi = a;
            break;
        }
        if da.abs() <= -CURVATURE * slope {
            return Some((xa, fa, ga));
        }
        if da >= 0.0 {
            hi = lo;
            lo = a;
            f_lo = fa;
            best = Some((xa, fa, ga));
            break;
        }
        lo = a;
        f_lo = fa;
        best = Some((xa, fa, ga));
        if evaluations >= MAX_EVALUATIONS {
            return best;
        }
        a *= 2.0;
    }

    // bisection inside the bracket
    while evaluations < MAX_EVALUATIONS {
        a = 0.5 * (lo + hi);
        let (xa, fa, ga, da) = eval(a);
        evaluations += 1;
        if !sufficient(a, fa) || fa >= f_lo {
            hi = a;
            continue;
        }
        if da.abs() <= -CURVATURE * slope {
            return Some((xa, fa, ga));
        }
        if da * (hi - lo) >= 0.0 {
            hi = lo;
        }
        lo = a;
        f_lo = fa;
        best = Some((xa, fa, ga));
    }
    best
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// Fails with [`Error::NonConvergence`] carrying the best point when the
/// gradient tolerance is not met within the iteration budget, and with a
/// numerical error when `f` is not finite at the start.
pub fn lbfgs<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "objective is not finite at the starting point",
        ));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    for iter in 0..opts.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm < opts.grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
            });
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let step = if history.is_empty() {
            (1.0 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };
        let Some((xn, fn_, gn)) = wolfe_search(&mut f, &x, fx, &d, slope, step) else {
            // round-off floor: the line search cannot find descent any more
            return if gnorm < STALL_FACTOR * opts.grad_tol {
                Ok(Minimum {
                    x,
                    value: fx,
                    grad_norm: gnorm,
                    iterations: iter,
                })
            } else {
                Err(Error::NonConvergence {
                    iterations: iter,
                    grad_norm: gnorm,
                    best: x,
                })
            };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let gnorm = inf_norm(&g);
    if gnorm < opts.grad_tol {
        return Ok(Minimum {
            x,
            value: fx,
            grad_norm: gnorm,
            iterations: opts.max_iterations,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        grad_norm: gnorm,
        best: x,
    })
}

/// Newton iterations stop once the predicted decrease `gᵀH⁻¹g / 2` is this
/// small relative to the objective.
const NEWTON_DECREMENT_TOL: f64 = 1e-15;

/// Levenberg-damped Newton iterations with a central-difference Hessian of
/// the analytic gradient. Suited to small stiff problems where a
/// quasi-Newton method stalls just above the tolerance.
pub fn damped_newton<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "objective is not finite at the starting point",
        ));
    }
    let mut damping = 1e-6;
    for iter in 0..opts.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm < opts.grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
            });
        }
        let mut hessian = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let h = 1e-5 * x[i].abs().max(1e-4);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (_, gp) = f(&xp);
            let (_, gm) = f(&xm);
            for j in 0..n {
                hessian[(j, i)] = (gp[j] - gm[j]) / (2.0 * h);
            }
        }
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        let scale = hessian
            .diagonal()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let rhs = DVector::from_iterator(n, g.iter().map(|v| -v));
        let mut accepted = None;
        for _ in 0..40 {
            let damped = &hessian + DMatrix::identity(n, n) * (damping * scale);
            if let Some(chol) = damped.cholesky() {
                let step = chol.solve(&rhs);
                let decrease = -0.5 * dot(&g, step.as_slice());
                if decrease.abs() <= NEWTON_DECREMENT_TOL * fx.abs().max(1.0) {
                    return Ok(Minimum {
                        x,
                        value: fx,
                        grad_norm: gnorm,
                        iterations: iter,
                    });
                }
                let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let (fn_, gn) = f(&xn);
                let round_off = 4.0 * f64::EPSILON * fx.abs();
                if fn_.is_finite() && (fn_ < fx || (fn_ <= fx + round_off && inf_norm(&gn) < gnorm))
                {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            damping *= 10.0;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return if gnorm < STALL_FACTOR * opts.grad_tol {
                Ok(Minimum {
                    x,
                    value: fx,
                    grad_norm: gnorm,
                    iterations: iter,
                })
            } else {
                Err(Error::NonConvergence {
                    iterations: iter,
                    grad_norm: gnorm,
                    best: x,
                })
            };
        };
        damping = (damping * 0.1).max(1e-12);
        x = xn;
        fx = fn_;
        g = gn;
    }
    let gnorm = inf_norm(&g);
    if gnorm < opts.grad_tol {
        return Ok(Minimum {
            x,
            value: fx,
            grad_norm: gnorm,
            iterations: opts.max_iterations,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        grad_norm: gnorm,
        best: x,
    })
}
