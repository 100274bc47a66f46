//! Unconstrained local minimization: BFGS with forward-difference gradients and
//! a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsConfig {
    /// Stop when the max-norm of the gradient is at or below this.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step; the step for `x_i` is `rel_step · (1 + |x_i|)`.
    pub rel_step: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            gradient_tol: 1e-8,
            max_iterations: 500,
            rel_step: f64::EPSILON.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// No step along the steepest-descent direction decreased the objective.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let v = (self.f)(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }

    fn gradient(&mut self, x: &DVector<f64>, fx: f64, rel_step: f64) -> Result<DVector<f64>> {
        let mut xs = x.as_slice().to_vec();
        let mut g = DVector::zeros(x.len());
        for i in 0..x.len() {
            let xi = xs[i];
            let h = rel_step * (1.0 + xi.abs());
            xs[i] = xi + h;
            // the step actually taken after rounding
            let h = xs[i] - xi;
            let f1 = self.eval(&xs)?;
            g[i] = (f1 - fx) / h;
            xs[i] = xi;
        }
        Ok(g)
    }
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0`. Errors from `f` abort the minimization.
///
/// Non-finite objective values are treated as `+∞`, so the line search backs off
/// from them.
pub fn minimize_bfgs<F>(f: F, x0: &[f64], cfg: &BfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut obj = Counted { f, evaluations: 0 };
    let dim = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = obj.eval(x.as_slice())?;
    let mut g = obj.gradient(&x, fx, cfg.rel_step)?;
    let mut h_inv = DMatrix::<f64>::identity(dim, dim);
    let mut fresh = true;
    let mut iterations = 0;

    let stop = loop {
        if max_norm(&g) <= cfg.gradient_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if slope.is_nan() || slope >= 0.0 {
            h_inv.fill_with_identity();
            fresh = true;
            dir = -g.clone();
            slope = g.dot(&dir);
        }

        let Some((alpha, f_new)) = backtrack(&mut obj, &x, fx, &dir, slope)? else {
            if fresh {
                break StopReason::LineSearchStalled;
            }
            h_inv.fill_with_identity();
            fresh = true;
            continue;
        };

        let s = &dir * alpha;
        let x_new = &x + &s;
        let g_new = obj.gradient(&x_new, f_new, cfg.rel_step)?;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                // scale the initial inverse Hessian before the first update
                h_inv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv.ger(-rho, &hy, &s, 1.0);
            h_inv.ger(-rho, &s, &hy, 1.0);
            h_inv.ger(rho * rho * yhy + rho, &s, &s, 1.0);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
    };

    Ok(Minimum {
        gradient_norm: max_norm(&g),
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        evaluations: obj.evaluations,
        stop,
    })
}

fn backtrack<F>(
    obj: &mut Counted<F>,
    x: &DVector<f64>,
    fx: f64,
    dir: &DVector<f64>,
    slope: f64,
) -> Result<Option<(f64, f64)>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    const ARMIJO: f64 = 1e-4;
    let mut alpha = 1.0;
    for _ in 0..60 {
        let trial = x + dir * alpha;
        let ft = obj.eval(trial.as_slice())?;
        if ft <= fx + ARMIJO * alpha * slope && ft < fx {
            return Ok(Some((alpha, ft)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}
