//! Rules producing the weight vector `eta_k` that combines the rows of `A`
//! into a surrogate hyperplane `eta^T A x = eta^T b`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SolverState;
use crate::error::{Error, Result};
use crate::problems::Problem;

/// A weight vector, stored in the cheapest form that represents it.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    /// `e_i`
    Row(usize),
    /// `sum_k values[k] * e_{indices[k]}`
    Sparse { indices: Vec<usize>, values: Vec<f64> },
    Dense(Vec<f64>),
}

impl Weight {
    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        match self {
            Weight::Row(i) => out[*i] = 1.0,
            Weight::Sparse { indices, values } => {
                for (&i, &v) in indices.iter().zip(values) {
                    out[i] = v;
                }
            }
            Weight::Dense(v) => out.copy_from_slice(v),
        }
        out
    }
}

/// Threshold and selected rows of one partial-residual step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub epsilon: f64,
    pub tau: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum WeightStrategy {
    /// `eta_k = b - A x_k`
    Residual,
    /// `eta_k` is the residual restricted to the adaptive row set `tau_k`.
    PartialResidual { theta: f64 },
    /// `e_i` for the row maximizing `|r_i|^2 / ||a_i||^2`.
    GreedyRow,
    /// `e_i` with `P(i) = ||a_i||^2 / ||A||_F^2`.
    RandomRow {
        rng: ChaCha8Rng,
        sampler: Option<WeightedIndex<f64>>,
    },
    CyclicRow { cursor: usize },
    /// Standard normal `eta_k`.
    GaussianRow { rng: ChaCha8Rng },
}

impl WeightStrategy {
    pub fn residual() -> Self {
        WeightStrategy::Residual
    }

    pub fn partial_residual(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(WeightStrategy::PartialResidual { theta })
    }

    pub fn greedy() -> Self {
        WeightStrategy::GreedyRow
    }

    pub fn random_row(seed: u64) -> Self {
        WeightStrategy::RandomRow {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sampler: None,
        }
    }

    pub fn cyclic() -> Self {
        WeightStrategy::CyclicRow { cursor: 0 }
    }

    pub fn gaussian(seed: u64) -> Self {
        WeightStrategy::GaussianRow {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Builds a strategy from its CLI name.
    pub fn from_name(name: &str, theta: Option<f64>, seed: u64) -> Result<Self> {
        let needs_theta = name == "shskpr";
        match (needs_theta, theta) {
            (true, None) => return Err(Error::InvalidArgument("strategy shskpr requires theta".into())),
            (false, Some(_)) => {
                return Err(Error::InvalidArgument(format!("theta is only valid for shskpr, not {name}")))
            }
            _ => {}
        }
        match name {
            "shskr" => Ok(Self::residual()),
            "shskpr" => Self::partial_residual(theta.unwrap_or_default()),
            "greedy" => Ok(Self::greedy()),
            "rsk" => Ok(Self::random_row(seed)),
            "cyclic" => Ok(Self::cyclic()),
            "gaussian" => Ok(Self::gaussian(seed)),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightStrategy::Residual => "shskr",
            WeightStrategy::PartialResidual { .. } => "shskpr",
            WeightStrategy::GreedyRow => "greedy",
            WeightStrategy::RandomRow { .. } => "rsk",
            WeightStrategy::CyclicRow { .. } => "cyclic",
            WeightStrategy::GaussianRow { .. } => "gaussian",
        }
    }

    /// Human-readable label, e.g. `SHSKPR(theta=0.5)`.
    pub fn label(&self) -> String {
        match self {
            WeightStrategy::Residual => "SHSKR".into(),
            WeightStrategy::PartialResidual { theta } => format!("SHSKPR(theta={theta})"),
            WeightStrategy::GreedyRow => "GreedySK".into(),
            WeightStrategy::RandomRow { .. } => "RSK".into(),
            WeightStrategy::CyclicRow { .. } => "CyclicSK".into(),
            WeightStrategy::GaussianRow { .. } => "GaussianSK".into(),
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, WeightStrategy::RandomRow { .. } | WeightStrategy::GaussianRow { .. })
    }

    /// Produces `eta_k` for the current state. The partial-residual rule also
    /// returns the `(epsilon_k, tau_k)` it used.
    pub fn weight(&mut self, problem: &Problem, state: &SolverState) -> Result<(Weight, Option<Selection>)> {
        match self {
            WeightStrategy::Residual => Ok((Weight::Dense(weight_residual(state)), None)),
            WeightStrategy::PartialResidual { theta } => {
                let selection = partial_selection(problem, state, *theta)?;
                let weight = restrict_residual(state, &selection.tau);
                Ok((weight, Some(selection)))
            }
            WeightStrategy::GreedyRow => Ok((Weight::Row(greedy_row(problem, state)?), None)),
            WeightStrategy::RandomRow { rng, sampler } => {
                if sampler.is_none() {
                    let w = WeightedIndex::new(problem.matrix().row_norms_sq().iter().copied())
                        .map_err(|_| Error::ZeroMatrix)?;
                    *sampler = Some(w);
                }
                let i = sampler.as_ref().map(|s| s.sample(rng)).ok_or(Error::ZeroMatrix)?;
                Ok((Weight::Row(i), None))
            }
            WeightStrategy::CyclicRow { cursor } => {
                let a = problem.matrix();
                let m = a.nrows();
                for _ in 0..m {
                    let i = *cursor % m;
                    *cursor = (i + 1) % m;
                    if a.row_norm_sq(i) > 0.0 {
                        return Ok((Weight::Row(i), None));
                    }
                }
                Err(Error::ZeroMatrix)
            }
            WeightStrategy::GaussianRow { rng } => Ok((Weight::Dense(weight_gaussian(problem.nrows(), rng)), None)),
        }
    }
}

/// `eta_k = r_k`
pub fn weight_residual(state: &SolverState) -> Vec<f64> {
    state.residual().to_vec()
}

/// `m` independent standard normal draws.
pub fn weight_gaussian<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| rng.sample(StandardNormal)).collect()
}

/// Row maximizing `|r_i|^2 / ||a_i||^2` over nonzero rows; ties go to the
/// smallest index.
pub fn greedy_row(problem: &Problem, state: &SolverState) -> Result<usize> {
    let a = problem.matrix();
    let r = state.residual();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..a.nrows() {
        let nsq = a.row_norm_sq(i);
        if nsq == 0.0 {
            continue;
        }
        let ratio = r[i] * r[i] / nsq;
        if best.is_none_or(|(_, b)| ratio > b) {
            best = Some((i, ratio));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::ZeroMatrix)
}

/// `e_i` for a single-row rule (`GreedyRow`, `RandomRow` or `CyclicRow`).
pub fn weight_single_row(problem: &Problem, state: &SolverState, rule: &mut WeightStrategy) -> Result<Vec<f64>> {
    match rule {
        WeightStrategy::GreedyRow | WeightStrategy::RandomRow { .. } | WeightStrategy::CyclicRow { .. } => {
            let (weight, _) = rule.weight(problem, state)?;
            Ok(weight.to_dense(problem.nrows()))
        }
        other => Err(Error::InvalidArgument(format!("{} is not a single-row rule", other.name()))),
    }
}

/// Per-row scores `|r_i|^2 / ||a_i||^2` with zero rows mapped to `None`.
fn row_scores<'a>(problem: &'a Problem, r: &'a [f64]) -> impl Iterator<Item = (usize, Option<f64>)> + 'a {
    let a = problem.matrix();
    (0..a.nrows()).map(move |i| {
        let nsq = a.row_norm_sq(i);
        (i, (nsq > 0.0).then(|| r[i] * r[i] / nsq))
    })
}

/// `epsilon_k = theta / ||r||^2 * max_i |r_i|^2/||a_i||^2 + (1 - theta) / ||A||_F^2`.
pub fn epsilon_threshold(problem: &Problem, state: &SolverState, theta: f64) -> Result<f64> {
    Ok(partial_selection(problem, state, theta)?.epsilon)
}

/// `tau_k = { i : |r_i|^2 >= epsilon * ||r||^2 * ||a_i||^2 }` over nonzero rows.
pub fn index_set_tau(problem: &Problem, state: &SolverState, epsilon: f64) -> Result<Vec<usize>> {
    let r = state.residual();
    let r_norm_sq = state.residual_norm_sq();
    if r_norm_sq == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let cut = epsilon * r_norm_sq;
    let tau: Vec<usize> = row_scores(problem, r)
        .filter_map(|(i, s)| s.filter(|&s| s >= cut).map(|_| i))
        .collect();
    if tau.is_empty() {
        return Err(Error::Internal(format!("empty row set for epsilon = {epsilon:e}")));
    }
    Ok(tau)
}

/// Computes `epsilon_k` and `tau_k` together.
///
/// The test `|r_i|^2/||a_i||^2 >= epsilon_k ||r||^2` is evaluated against
/// `t = theta * max + (1 - theta) * ||r||^2/||A||_F^2`, which equals
/// `epsilon_k ||r||^2` and is clamped to `max` so the argmax row always
/// qualifies under rounding.
pub fn partial_selection(problem: &Problem, state: &SolverState, theta: f64) -> Result<Selection> {
    let r = state.residual();
    let r_norm_sq = state.residual_norm_sq();
    if r_norm_sq == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let max = row_scores(problem, r)
        .filter_map(|(_, s)| s)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or(Error::ZeroMatrix)?;
    let average = r_norm_sq / problem.matrix().fro_norm_sq();
    let cut = (theta * max + (1.0 - theta) * average).min(max);
    let tau: Vec<usize> = row_scores(problem, r)
        .filter_map(|(i, s)| s.filter(|&s| s >= cut).map(|_| i))
        .collect();
    if tau.is_empty() {
        return Err(Error::Internal("partial residual row set is empty".into()));
    }
    Ok(Selection {
        epsilon: cut / r_norm_sq,
        tau,
    })
}

/// `eta_k = sum_{i in tau} r_i e_i`
pub fn weight_partial_residual(problem: &Problem, state: &SolverState, theta: f64) -> Result<Vec<f64>> {
    let selection = partial_selection(problem, state, theta)?;
    Ok(restrict_residual(state, &selection.tau).to_dense(problem.nrows()))
}

fn restrict_residual(state: &SolverState, tau: &[usize]) -> Weight {
    let r = state.residual();
    Weight::Sparse {
        indices: tau.to_vec(),
        values: tau.iter().map(|&i| r[i]).collect(),
    }
}

/// The averaging form of the partial-residual update,
/// `x*_{k+1} = x*_k + t_k * sum_{i in tau} w_i (r_i / ||a_i||^2) a_i` with
/// `t_k = ||eta||^2 ||A_tau||_F^2 / ||A^T eta||^2` and
/// `w_i = ||a_i||^2 / ||A_tau||_F^2`. Returns the new dual iterate.
pub fn averaging_update(problem: &Problem, state: &SolverState, tau: &[usize]) -> Result<Vec<f64>> {
    let a = problem.matrix();
    let r = state.residual();
    let block_fro: f64 = tau.iter().map(|&i| a.row_norm_sq(i)).sum();
    let eta_norm_sq: f64 = tau.iter().map(|&i| r[i] * r[i]).sum();
    let mut at_eta = vec![0.0; a.ncols()];
    for &i in tau {
        a.add_row_scaled(i, r[i], &mut at_eta);
    }
    let at_eta_sq = crate::linalg::norm_sq(&at_eta);
    if at_eta_sq <= super::STEP_TOL {
        return Err(Error::DegenerateDirection { norm_sq: at_eta_sq });
    }
    let t = eta_norm_sq * block_fro / at_eta_sq;
    let mut avg = vec![0.0; a.ncols()];
    for &i in tau {
        let nsq = a.row_norm_sq(i);
        let w = nsq / block_fro;
        a.add_row_scaled(i, w * r[i] / nsq, &mut avg);
    }
    Ok(state
        .x_star()
        .iter()
        .zip(&avg)
        .map(|(xs, v)| xs + t * v)
        .collect())
}
