//! The surrogate-hyperplane sparse Kaczmarz iteration
//!
//! ```text
//! x*_{k+1} = x*_k + (eta_k^T r_k / ||A^T eta_k||^2) A^T eta_k
//! x_{k+1}  = S_lambda(x*_{k+1})
//! ```
//!
//! with `eta_k` supplied by a [`WeightStrategy`], and the run loop that drives
//! it from `x_0 = x*_0 = 0` until a [`StopCriteria`] fires.

mod history;
pub mod strategy;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bregman::{bregman_distance_unchecked, shrink};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::problems::{rse, Problem};

pub use history::{ConvergenceHistory, IterationRecord, CSV_HEADER};
pub use strategy::{
    averaging_update, epsilon_threshold, greedy_row, index_set_tau, partial_selection, weight_gaussian,
    weight_partial_residual, weight_residual, weight_single_row, Selection, Weight, WeightStrategy,
};

/// Directions with `||A^T eta||^2` at or below this are rejected as degenerate.
pub const STEP_TOL: f64 = 1e-28;

/// Number of incremental residual updates between full recomputations.
pub const RESIDUAL_REFRESH_PERIOD: usize = 32;

/// Redraws allowed for a degenerate Gaussian weight before giving up.
pub const GAUSSIAN_RETRIES: usize = 8;

/// Iterate pair `(x*_k, x_k)` with the cached residual `r_k = b - A x_k`.
#[derive(Clone, Debug)]
pub struct SolverState {
    k: usize,
    x_star: Vec<f64>,
    x: Vec<f64>,
    r: Vec<f64>,
    r_norm_sq: f64,
    since_refresh: usize,
    direction: Vec<f64>,
    changed: Vec<(usize, f64)>,
}

impl SolverState {
    /// The zero start `x_0 = x*_0 = 0`, `r_0 = b`.
    pub fn initial(problem: &Problem) -> Self {
        let r = problem.rhs().to_vec();
        SolverState {
            k: 0,
            x_star: vec![0.0; problem.ncols()],
            x: vec![0.0; problem.ncols()],
            r_norm_sq: norm_sq(&r),
            r,
            since_refresh: 0,
            direction: vec![0.0; problem.ncols()],
            changed: Vec::new(),
        }
    }

    /// A state at an arbitrary dual point, with `x = S_lambda(x*)`.
    pub fn from_dual(problem: &Problem, x_star: Vec<f64>) -> Result<Self> {
        check_len("state: x*", problem.ncols(), x_star.len())?;
        let lambda = problem.lambda().value();
        let x: Vec<f64> = x_star.iter().map(|&v| shrink(v, lambda)).collect();
        let r = problem.matrix().residual(&x, problem.rhs())?;
        Ok(SolverState {
            k: 0,
            r_norm_sq: norm_sq(&r),
            x_star,
            x,
            r,
            since_refresh: 0,
            direction: vec![0.0; problem.ncols()],
            changed: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn residual(&self) -> &[f64] {
        &self.r
    }

    pub fn residual_norm_sq(&self) -> f64 {
        self.r_norm_sq
    }

    pub fn residual_norm(&self) -> f64 {
        self.r_norm_sq.sqrt()
    }

    pub fn into_solution(self) -> Vec<f64> {
        self.x
    }

    /// Recomputes `r = b - A x` from scratch.
    pub fn refresh_residual(&mut self, problem: &Problem) {
        let a = problem.matrix();
        for (i, (ri, bi)) in self.r.iter_mut().zip(problem.rhs()).enumerate() {
            *ri = bi - a.row_dot(i, &self.x);
        }
        self.r_norm_sq = norm_sq(&self.r);
        self.since_refresh = 0;
    }

    /// Applies one step with weight `eta` in place and returns the step term
    /// `(eta^T r)^2 / ||A^T eta||^2`.
    ///
    /// A weight with a single nonzero entry is applied as the row projection
    /// `x* += r_i / ||a_i||^2 * a_i`, which is the same update since the step
    /// does not depend on the scale of `eta`.
    pub fn step(&mut self, problem: &Problem, weight: &Weight) -> Result<f64> {
        let a = problem.matrix();
        let (m, n) = (a.nrows(), a.ncols());
        let lambda = problem.lambda().value();
        self.changed.clear();

        let single = match weight {
            Weight::Row(i) => Some(*i),
            Weight::Sparse { indices, values } if indices.len() == 1 && values[0] != 0.0 => Some(indices[0]),
            _ => None,
        };

        let step_term = if let Some(i) = single {
            if i >= m {
                return Err(Error::DimensionMismatch {
                    context: "step: row index",
                    expected: m,
                    actual: i,
                });
            }
            let nsq = a.row_norm_sq(i);
            if nsq <= STEP_TOL {
                return Err(Error::DegenerateDirection { norm_sq: nsq });
            }
            let ri = self.r[i];
            let alpha = ri / nsq;
            let (x_star, x, changed) = (&mut self.x_star, &mut self.x, &mut self.changed);
            a.for_each_in_row(i, |j, v| {
                if v != 0.0 {
                    x_star[j] += alpha * v;
                    let next = shrink(x_star[j], lambda);
                    if next != x[j] {
                        changed.push((j, next - x[j]));
                        x[j] = next;
                    }
                }
            });
            ri * alpha
        } else {
            let coeff = match weight {
                Weight::Sparse { indices, values } => {
                    check_len("step: sparse weight", indices.len(), values.len())?;
                    self.direction.fill(0.0);
                    let mut c = 0.0;
                    for (&i, &v) in indices.iter().zip(values) {
                        if i >= m {
                            return Err(Error::DimensionMismatch {
                                context: "step: row index",
                                expected: m,
                                actual: i,
                            });
                        }
                        a.add_row_scaled(i, v, &mut self.direction);
                        c += v * self.r[i];
                    }
                    c
                }
                Weight::Dense(eta) => {
                    a.transpose_apply_into(eta, &mut self.direction)?;
                    dot(eta, &self.r)
                }
                Weight::Row(_) => unreachable!(),
            };
            let nsq = norm_sq(&self.direction);
            if nsq <= STEP_TOL {
                return Err(Error::DegenerateDirection { norm_sq: nsq });
            }
            let alpha = coeff / nsq;
            for j in 0..n {
                let d = self.direction[j];
                if d != 0.0 {
                    self.x_star[j] += alpha * d;
                    let next = shrink(self.x_star[j], lambda);
                    if next != self.x[j] {
                        self.changed.push((j, next - self.x[j]));
                        self.x[j] = next;
                    }
                }
            }
            coeff * alpha
        };

        self.k += 1;
        self.since_refresh += 1;
        if self.since_refresh >= RESIDUAL_REFRESH_PERIOD || 4 * self.changed.len() > n {
            self.refresh_residual(problem);
        } else if !self.changed.is_empty() {
            for &(j, dx) in &self.changed {
                a.add_col_scaled(j, -dx, &mut self.r);
            }
            self.r_norm_sq = norm_sq(&self.r);
        }
        Ok(step_term)
    }
}

/// One step with a dense weight vector, returning the new state and the step term.
pub fn shsk_step(problem: &Problem, state: &SolverState, eta: &[f64]) -> Result<(SolverState, f64)> {
    check_len("shsk_step: eta", problem.nrows(), eta.len())?;
    if eta.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateDirection { norm_sq: 0.0 });
    }
    let mut next = state.clone();
    let term = next.step(problem, &Weight::Dense(eta.to_vec()))?;
    Ok((next, term))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_iters: usize,
    /// Applies when the problem carries a reference solution and is noiseless.
    pub rse_tol: f64,
    /// Relative residual `||r|| / ||b||`; applies otherwise.
    pub res_tol: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            max_iters: 100_000,
            rse_tol: 1e-6,
            res_tol: 1e-8,
        }
    }
}

impl StopCriteria {
    pub fn new(max_iters: usize, rse_tol: f64, res_tol: f64) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(rse_tol > 0.0 && res_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(StopCriteria {
            max_iters,
            rse_tol,
            res_tol,
        })
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    RseTol,
    ResTol,
    MaxIters,
    ExactResidual,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::RseTol => "RseTol",
            StopReason::ResTol => "ResTol",
            StopReason::MaxIters => "MaxIters",
            StopReason::ExactResidual => "ExactResidual",
        };
        f.write_str(s)
    }
}

/// What the run loop stores per iteration beyond the always-present fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordOptions {
    /// Bregman distance to the reference, when the problem has one.
    pub bregman: bool,
    /// `(epsilon_k, tau_k)` of partial-residual steps.
    pub selection: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            bregman: true,
            selection: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SolverState,
    pub history: ConvergenceHistory,
    pub stop_reason: StopReason,
    pub elapsed: f64,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.state.k()
    }

    pub fn final_rse(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.rse)
    }
}

pub fn run(problem: &Problem, strategy: WeightStrategy, stop: &StopCriteria) -> Result<RunOutcome> {
    run_with(problem, strategy, stop, RecordOptions::default())
}

pub fn run_with(
    problem: &Problem,
    mut strategy: WeightStrategy,
    stop: &StopCriteria,
    record: RecordOptions,
) -> Result<RunOutcome> {
    if problem.matrix().is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let start = Instant::now();
    let lambda = problem.lambda();
    let reference = problem.reference().filter(|x| x.iter().any(|v| *v != 0.0));
    let use_rse = reference.is_some() && !problem.meta().is_noisy();
    let res_cut = stop.res_tol * problem.rhs_norm();
    let gaussian = matches!(strategy, WeightStrategy::GaussianRow { .. });

    let mut state = SolverState::initial(problem);
    let mut history = ConvergenceHistory::default();

    let stop_reason = loop {
        let residual_norm = state.residual_norm();
        let rse_now = reference.map(|x| rse(state.x(), x)).transpose()?;
        let bregman = match (record.bregman, problem.reference()) {
            (true, Some(x)) => Some(bregman_distance_unchecked(state.x_star(), x, lambda)),
            _ => None,
        };
        history.records.push(IterationRecord {
            k: state.k(),
            residual_norm,
            rse: rse_now,
            bregman,
            step_term: 0.0,
            wall_time: start.elapsed().as_secs_f64(),
            selection: None,
        });

        if residual_norm == 0.0 {
            break StopReason::ExactResidual;
        }
        if use_rse {
            if rse_now.is_some_and(|v| v < stop.rse_tol) {
                break StopReason::RseTol;
            }
        } else if residual_norm <= res_cut {
            break StopReason::ResTol;
        }
        if state.k() >= stop.max_iters {
            break StopReason::MaxIters;
        }

        let mut attempts = 0;
        let outcome = loop {
            let (weight, selection) = strategy.weight(problem, &state)?;
            match state.step(problem, &weight) {
                Ok(term) => break Some((term, selection)),
                Err(Error::DegenerateDirection { .. }) if gaussian && attempts < GAUSSIAN_RETRIES => attempts += 1,
                Err(Error::DegenerateDirection { .. }) if !gaussian => break None,
                Err(e) => return Err(e),
            }
        };
        let Some((term, selection)) = outcome else {
            break StopReason::ExactResidual;
        };
        let last = history.records.last_mut().expect("record pushed above");
        last.step_term = term;
        if record.selection {
            last.selection = selection;
        }
    };

    Ok(RunOutcome {
        state,
        history,
        stop_reason,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
