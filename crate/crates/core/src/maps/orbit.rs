use serde::{Deserialize, Serialize};

use super::{default_pole_eps, ComplexValue, EvalError, MapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    /// The modulus stayed above `radius` for the whole confirmation window.
    Escaped { radius: f64 },
    /// `points[index]` lies within `pole_eps` of a pole.
    PoleHit { index: usize },
    Overflow,
    /// The running error estimate of `points[index]` exceeded the threshold.
    PrecisionLoss { index: usize },
    /// `points[index]` is outside the range where a truncated series is valid.
    OutsideTruncation { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    pub budget: usize,
    pub escape_radius: f64,
    /// `None` selects `1e-12 (1 + |z|)` at every point.
    pub pole_eps: Option<f64>,
    /// Consecutive points beyond `escape_radius` needed to declare escape.
    pub escape_window: usize,
    /// Relative error bound above which the orbit is abandoned.
    pub precision_threshold: f64,
}

impl IterateOptions {
    pub fn new(budget: usize, escape_radius: f64) -> Self {
        Self {
            budget,
            escape_radius,
            pole_eps: None,
            escape_window: 3,
            precision_threshold: 1e-6,
        }
    }

    pub fn pole_eps(mut self, eps: f64) -> Self {
        self.pole_eps = Some(eps);
        self
    }

    pub fn escape_window(mut self, w: usize) -> Self {
        self.escape_window = w.max(1);
        self
    }

    pub fn precision_threshold(mut self, t: f64) -> Self {
        self.precision_threshold = t;
        self
    }
}

/// A finite forward orbit. `points[k + 1] = f(points[k])` for every stored
/// pair. `n_steps` is the number of map applications until the event that
/// ended the orbit: the budget, the first point of the confirmed escape run,
/// the pole or truncation index, or the last point before overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub points: Vec<ComplexValue>,
    pub termination: Termination,
    pub n_steps: usize,
}

/// Iterates `map` from `z0`. Returns `None` when the options violate
/// `budget >= 1` or `escape_radius > 0`.
pub fn iterate(map: &MapSpec, z0: ComplexValue, opts: &IterateOptions) -> Option<OrbitRecord> {
    if opts.budget == 0 || !(opts.escape_radius > 0.0) {
        return None;
    }
    let unit = f64::EPSILON;
    let mut points = vec![z0];
    let mut run = 0usize;
    let mut err = unit * z0.norm();
    let mut k = 0usize;
    let (termination, n_steps) = loop {
        let z = points[k];
        if z.norm() > opts.escape_radius {
            run += 1;
            if run >= opts.escape_window {
                break (Termination::Escaped { radius: opts.escape_radius }, k + 1 - run);
            }
        } else {
            run = 0;
        }
        if k == opts.budget {
            break (Termination::BudgetExhausted, opts.budget);
        }
        let eps = opts.pole_eps.unwrap_or_else(|| default_pole_eps(z));
        match map.eval_deriv(z, eps) {
            Err(EvalError::Pole { .. }) => break (Termination::PoleHit { index: k }, k),
            Err(EvalError::Overflow) => break (Termination::Overflow, k),
            Err(EvalError::OutsideTruncation { .. }) => {
                break (Termination::OutsideTruncation { index: k }, k)
            }
            Ok((w, dw)) => {
                // First-order error propagation plus a few ulps of fresh rounding.
                err = dw.norm() * err + 4.0 * unit * (w.norm() + z.norm() + 1.0);
                points.push(w);
                k += 1;
                if err > opts.precision_threshold * w.norm().max(1.0) {
                    break (Termination::PrecisionLoss { index: k }, k);
                }
            }
        }
    };
    Some(OrbitRecord { points, termination, n_steps })
}
