//! Line-search descent over a flat parameter vector.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    /// Extra information recorded with each accepted iterate.
    type Info: Clone;

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Self::Info)>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverMode {
    /// Limited-memory quasi-Newton directions.
    #[default]
    Lbfgs,
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Correction pairs kept by L-BFGS.
    pub memory: usize,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub gradient_tol: f64,
    /// Largest coordinate change of a steepest-descent trial step.
    pub initial_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Lbfgs,
            memory: 10,
            armijo_c: 1e-4,
            max_backtracks: 40,
            gradient_tol: 1e-8,
            initial_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    MaxIterations,
    RelativeDecrease,
    SmallGradient,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate<I> {
    pub iteration: usize,
    pub value: f64,
    pub info: I,
    pub gradient_inf_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome<I> {
    pub x: Vec<f64>,
    pub value: f64,
    pub info: I,
    pub initial_value: f64,
    pub initial_info: I,
    pub iterations: usize,
    /// Accepted iterates, starting with the initial point at iteration 0.
    pub history: Vec<Iterate<I>>,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn lbfgs_direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = vec![0.0; pairs.len()];
    for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[k] = a;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for (k, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alphas[k] - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective` from `x0` with backtracking Armijo line search.
///
/// Accepted steps never increase the objective. Stops after `max_iterations`,
/// when the relative decrease of an accepted step drops below `tol`, or when
/// the gradient infinity norm falls below `options.gradient_tol`.
pub fn minimize<O: Objective>(
    objective: &O,
    x0: Vec<f64>,
    max_iterations: usize,
    tol: f64,
    options: &SolverOptions,
) -> Result<MinimizeOutcome<O::Info>> {
    let mut x = x0;
    let (mut f, mut info) = objective.evaluate(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteCost(format!("initial objective value {f}")));
    }
    let initial_value = f;
    let initial_info = info.clone();
    let mut g = objective.gradient(&x)?;
    let mut history = vec![Iterate {
        iteration: 0,
        value: f,
        info: info.clone(),
        gradient_inf_norm: inf_norm(&g),
        step: 0.0,
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let termination = loop {
        let gnorm = inf_norm(&g);
        if gnorm < options.gradient_tol {
            break Termination::SmallGradient;
        }
        if iterations >= max_iterations {
            break Termination::MaxIterations;
        }
        let (mut d, mut quasi_newton) = match options.mode {
            SolverMode::Lbfgs if !pairs.is_empty() => (lbfgs_direction(&g, &pairs), true),
            _ => (g.iter().map(|v| -v).collect::<Vec<_>>(), false),
        };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            quasi_newton = false;
            pairs.clear();
        }
        let mut alpha = if quasi_newton {
            1.0
        } else {
            options.initial_step / inf_norm(&d)
        };
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            match objective.evaluate(&trial) {
                Ok((ft, it)) if ft.is_finite() && ft <= f + options.armijo_c * alpha * slope => {
                    accepted = Some((trial, ft, it));
                    break;
                }
                Ok(_) | Err(Error::NonFiniteCost(_)) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((x_new, f_new, info_new)) = accepted else {
            break Termination::LineSearchFailed;
        };
        iterations += 1;
        let g_new = objective.gradient(&x_new)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) && sy > 0.0 {
            if pairs.len() == options.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let decrease = f - f_new;
        x = x_new;
        g = g_new;
        let f_prev = f;
        f = f_new;
        info = info_new;
        history.push(Iterate {
            iteration: iterations,
            value: f,
            info: info.clone(),
            gradient_inf_norm: inf_norm(&g),
            step: alpha,
        });
        if decrease <= tol * f_prev.abs().max(f64::MIN_POSITIVE) {
            break Termination::RelativeDecrease;
        }
    };
    Ok(MinimizeOutcome {
        x,
        value: f,
        info,
        initial_value,
        initial_info,
        iterations,
        history,
        termination,
    })
}

/// Central-difference gradient of `f` with per-coordinate steps; a one-sided
/// difference is used when a probe is not finite.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], steps: &[f64]) -> Result<Vec<f64>> {
    if steps.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} steps for {} parameters",
            steps.len(),
            x.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut f0 = None;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (xp, xm) = (x[i] + steps[i], x[i] - steps[i]);
        probe[i] = xp;
        let fp = f(&probe);
        probe[i] = xm;
        let fm = f(&probe);
        probe[i] = x[i];
        let g = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (xp - xm),
            (pf, mf) => {
                let base = *f0.get_or_insert_with(|| f(x));
                if pf && base.is_finite() {
                    (fp - base) / (xp - x[i])
                } else if mf && base.is_finite() {
                    (base - fm) / (x[i] - xm)
                } else {
                    return Err(Error::NonFiniteCost(format!("no finite probe for parameter {i}")));
                }
            }
        };
        grad.push(g);
    }
    Ok(grad)
}

/// Steps `relative * max(|x|, floor)` for every coordinate.
pub fn relative_steps(x: &[f64], relative: f64, floor: f64) -> Vec<f64> {
    x.iter().map(|v| relative * v.abs().max(floor)).collect()
}
