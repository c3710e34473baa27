use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::ParamSample;
use crate::linalg::{axpy, dot, norm};
use crate::objective::{batch_objective, OptState, ProblemData};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop once `‖∇F‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            tol: 1e-8,
            max_iter: 10_000,
            c1: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Limited-memory BFGS with a halving backtracking line search.
///
/// `fg` returns the objective value and gradient. A line search that cannot
/// find an acceptable step yields [`Error::Stalled`] carrying the last iterate.
pub fn lbfgs(mut fg: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>, x0: &[f64], opts: &LbfgsOptions) -> Result<MinimizeOutcome> {
    if !(opts.tol > 0.0) || opts.memory == 0 {
        return Err(Error::InvalidArgument("lbfgs needs tol > 0 and memory > 0".into()));
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    loop {
        let gn = norm(&g);
        if gn <= opts.tol {
            return Ok(MinimizeOutcome {
                x,
                value: f,
                grad_norm: gn,
                iterations,
                stop: StopReason::GradientTolerance,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(MinimizeOutcome {
                x,
                value: f,
                grad_norm: gn,
                iterations,
                stop: StopReason::MaxIterations,
            });
        }
        let mut d = two_loop(&history, &g);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // Lost descent; restart from steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = if history.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut trial = x.clone();
            axpy(step, &d, &mut trial);
            let (ft, gt) = fg(&trial)?;
            // Near the minimizer decreases sink below rounding of f; a step that
            // keeps f within rounding and shrinks the gradient is accepted then.
            let armijo = ft <= f + opts.c1 * step * slope;
            let within_rounding = ft <= f + 4.0 * f64::EPSILON * f.abs() && norm(&gt) < gn;
            if ft.is_finite() && (armijo || within_rounding) {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            return Err(Error::Stalled {
                iterations,
                grad_norm: gn,
                last: x,
            });
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
    }
}

/// `−H_k g` from the stored curvature pairs.
fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub x: OptState,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Minimizes the batch objective `mean f + λ mean g` over `x = (z, θ)` at
/// fixed samples.
pub fn batch_minimize<S: Surrogate + ?Sized>(
    data: &ProblemData,
    sur: &S,
    x0: &OptState,
    samples: &[ParamSample],
    lambda: f64,
    opts: &LbfgsOptions,
) -> Result<BatchSolution> {
    let n = data.n_dof();
    // Validates dimensions and the sample list once up front.
    batch_objective(data, sur, x0, samples, lambda)?;
    let out = lbfgs(
        |flat| {
            let b = batch_objective(data, sur, &OptState::from_flat(n, flat), samples, lambda)?;
            Ok((b.value, b.grad))
        },
        &x0.to_flat(),
        opts,
    )?;
    Ok(BatchSolution {
        x: OptState::from_flat(n, &out.x),
        value: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        stop: out.stop,
    })
}
