//! Convergence constants and certificate checks.
//!
//! With `nu = (|x_hat|_min + 2 lambda) / (sigma~_min^2 |x_hat|_min)` the
//! Bregman distance to the solution satisfies `D_k <= nu ||A x_k - b||^2`,
//! which turns the per-step decrease
//! `D_{k+1} <= D_k - 0.5 (eta^T r)^2 / ||A^T eta||^2` into linear rates:
//!
//! * residual weights: `D_{k+1} <= (1 - q) D_k`, `q = 1 / (2 nu sigma_max^2)`
//! * partial residual weights: `D_{k+1} <= (1 - q_k) D_k`,
//!   `q_k = epsilon_k ||A_tau||_F^2 / (2 nu sigma_max(A_tau)^2)`
//! * randomized row selection in expectation: `q_hat = 1 / (2 nu ||A||_F^2)`
//!
//! `sigma~_min` is the smallest nonzero singular value over every column
//! submatrix and is computed by enumeration, so certificates are limited to
//! small `n`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman::RegParam;
use crate::error::{Error, Result};
use crate::linalg::{rank_tolerance, singular_values, RowMatrix, SpectralSummary};
use crate::solvers::ConvergenceHistory;

/// Default cap on `n` for the column-subset enumeration (`2^n - 1` subsets).
pub const DEFAULT_ENUMERATION_LIMIT: usize = 15;

/// Relative slack of the certificate checks, `tol = CERT_REL_TOL * max(1, D_k)`.
pub const CERT_REL_TOL: f64 = 1e-9;

/// `min { sigma_min^+(A_J) : J nonempty, A_J != 0 }` where `sigma_min^+` is the
/// smallest nonzero singular value.
pub fn sigma_tilde_min(a: &RowMatrix, n_limit: usize) -> Result<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > n_limit {
        return Err(Error::EnumerationLimit {
            limit: n_limit,
            actual: n,
        });
    }
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    // For tall A = QR the column blocks A_J and R_J share singular values.
    let dense = a.to_nalgebra();
    let reduced = if m > n { dense.qr().r() } else { dense };

    let best = (1u64..(1u64 << n))
        .into_par_iter()
        .filter_map(|mask| {
            let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            let block = DMatrix::from_fn(reduced.nrows(), cols.len(), |i, c| reduced[(i, cols[c])]);
            if block.iter().all(|v| *v == 0.0) {
                return None;
            }
            let sv = singular_values(&block);
            let tol = rank_tolerance(m, cols.len(), sv[0]);
            sv.into_iter().filter(|&s| s > tol).last()
        })
        .reduce_with(f64::min);
    best.ok_or(Error::ZeroMatrix)
}

/// Smallest magnitude among the nonzero entries.
pub fn x_hat_min_abs(x_hat: &[f64]) -> Result<f64> {
    x_hat
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .reduce(f64::min)
        .ok_or(Error::ZeroVector)
}

pub fn nu_from_parts(sigma_tilde_min: f64, x_hat_min: f64, lambda: RegParam) -> f64 {
    (x_hat_min + 2.0 * lambda.value()) / (sigma_tilde_min * sigma_tilde_min * x_hat_min)
}

pub fn nu(a: &RowMatrix, x_hat: &[f64], lambda: RegParam, n_limit: usize) -> Result<f64> {
    let x_min = x_hat_min_abs(x_hat)?;
    let sigma = sigma_tilde_min(a, n_limit)?;
    Ok(nu_from_parts(sigma, x_min, lambda))
}

/// `q = 1 / (2 nu sigma_max(A)^2)`
pub fn q_from_nu(nu: f64, sigma_max: f64) -> f64 {
    1.0 / (2.0 * nu * sigma_max * sigma_max)
}

pub fn q_residual(a: &RowMatrix, x_hat: &[f64], lambda: RegParam, n_limit: usize) -> Result<f64> {
    let nu = nu(a, x_hat, lambda, n_limit)?;
    Ok(q_from_nu(nu, a.spectral_summary()?.sigma_max))
}

/// Expected contraction of randomized row selection, `1 / (2 nu ||A||_F^2)`.
pub fn q_hat_randomized(nu: f64, fro_norm_sq: f64) -> f64 {
    1.0 / (2.0 * nu * fro_norm_sq)
}

/// `q_k = epsilon_k ||A_tau||_F^2 / (2 nu sigma_max(A_tau)^2)`
pub fn q_partial_step(a: &RowMatrix, tau: &[usize], epsilon: f64, nu: f64) -> Result<f64> {
    if tau.is_empty() {
        return Err(Error::InvalidArgument("row set tau_k is empty".into()));
    }
    if let Some(&bad) = tau.iter().find(|&&i| i >= a.nrows()) {
        return Err(Error::DimensionMismatch {
            context: "q_k: row index",
            expected: a.nrows(),
            actual: bad,
        });
    }
    let block_fro: f64 = tau.iter().map(|&i| a.row_norm_sq(i)).sum();
    if block_fro == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let sigma = a.row_block_sigma_max(tau);
    Ok(epsilon * block_fro / (2.0 * nu * sigma * sigma))
}

/// `q~ = 1 / (2 nu sigma_max^2 kappa^2)` with `kappa = sigma_max / sigma_min`.
pub fn q_tilde(spectral: &SpectralSummary, nu: f64) -> Result<f64> {
    let kappa = spectral.condition_number().ok_or(Error::RankDeficient)?;
    Ok(1.0 / (2.0 * nu * spectral.sigma_max * spectral.sigma_max * kappa * kappa))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub sigma_tilde_min: f64,
    pub x_hat_min: f64,
    pub sigma_max: f64,
    pub nu: f64,
    pub q: f64,
    pub q_hat: f64,
    /// `None` when `A` is rank deficient.
    pub q_tilde: Option<f64>,
    /// `q_k` for each recorded step of a partial-residual run.
    pub per_step_q: Option<Vec<f64>>,
}

impl RateCertificate {
    pub fn compute(a: &RowMatrix, x_hat: &[f64], lambda: RegParam, n_limit: usize) -> Result<Self> {
        let x_hat_min = x_hat_min_abs(x_hat)?;
        let sigma_tilde_min = sigma_tilde_min(a, n_limit)?;
        let spectral = a.spectral_summary()?;
        let nu = nu_from_parts(sigma_tilde_min, x_hat_min, lambda);
        Ok(RateCertificate {
            sigma_tilde_min,
            x_hat_min,
            sigma_max: spectral.sigma_max,
            nu,
            q: q_from_nu(nu, spectral.sigma_max),
            q_hat: q_hat_randomized(nu, a.fro_norm_sq()),
            q_tilde: q_tilde(&spectral, nu).ok(),
            per_step_q: None,
        })
    }

    /// Attaches `q_k` for every step of `history`, which must have been
    /// recorded with partial-residual selections.
    pub fn with_per_step_q(mut self, a: &RowMatrix, history: &ConvergenceHistory) -> Result<Self> {
        let steps = history.records.len().saturating_sub(1);
        let per_step = history.records[..steps]
            .iter()
            .map(|rec| {
                let sel = rec.selection.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("record k = {} has no (epsilon, tau) selection", rec.k))
                })?;
                q_partial_step(a, &sel.tau, sel.epsilon, self.nu)
            })
            .collect::<Result<Vec<_>>>()?;
        self.per_step_q = Some(per_step);
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    /// `D_{k+1}`
    pub observed: f64,
    /// Right-hand side of the inequality, slack included.
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub steps_checked: usize,
    /// `D_{k+1} <= D_k - step_term_k / 2`
    pub decrease: Vec<Violation>,
    /// `D_{k+1} <= (1 - q) D_k`
    pub residual_rate: Vec<Violation>,
    /// `D_{k+1} <= (1 - q_k) D_k`, when per-step rates were supplied.
    pub partial_rate: Option<Vec<Violation>>,
}

impl VerificationReport {
    pub fn partial_rate_violations(&self) -> usize {
        self.partial_rate.as_ref().map_or(0, Vec::len)
    }

    pub fn is_clean(&self) -> bool {
        self.decrease.is_empty() && self.residual_rate.is_empty() && self.partial_rate_violations() == 0
    }
}

/// Steps of `history` that break `D_{k+1} <= D_k - step_term_k / 2`.
/// Needs no constants, so it applies to any strategy and any feasible target.
pub fn decrease_violations(history: &ConvergenceHistory) -> Result<Vec<Violation>> {
    if !history.has_bregman() {
        return Err(Error::MissingBregman);
    }
    let mut out = Vec::new();
    for pair in history.records.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        check_consecutive(cur.k, next.k)?;
        let d = cur.bregman.unwrap_or_default();
        let d_next = next.bregman.unwrap_or_default();
        let bound = d - 0.5 * cur.step_term + CERT_REL_TOL * d.max(1.0);
        if d_next > bound {
            out.push(Violation {
                k: cur.k,
                observed: d_next,
                bound,
            });
        }
    }
    Ok(out)
}

fn check_consecutive(k: usize, next: usize) -> Result<()> {
    if next != k + 1 {
        return Err(Error::InvalidArgument(format!("history skips from k = {k} to k = {next}")));
    }
    Ok(())
}

/// Checks every consecutive pair of records against the decrease inequality
/// and the contraction bounds in `cert`.
pub fn verify_certificates(history: &ConvergenceHistory, cert: &RateCertificate) -> Result<VerificationReport> {
    if !history.has_bregman() {
        return Err(Error::MissingBregman);
    }
    let records = &history.records;
    let steps = records.len() - 1;
    if let Some(q) = &cert.per_step_q {
        if q.len() < steps {
            return Err(Error::DimensionMismatch {
                context: "verify: per-step rates",
                expected: steps,
                actual: q.len(),
            });
        }
    }
    let mut report = VerificationReport {
        steps_checked: steps,
        partial_rate: cert.per_step_q.as_ref().map(|_| Vec::new()),
        ..Default::default()
    };
    for (idx, pair) in records.windows(2).enumerate() {
        let (cur, next) = (&pair[0], &pair[1]);
        check_consecutive(cur.k, next.k)?;
        let d = cur.bregman.unwrap_or_default();
        let d_next = next.bregman.unwrap_or_default();
        let tol = CERT_REL_TOL * d.max(1.0);
        let check = |bound: f64, into: &mut Vec<Violation>| {
            let bound = bound + tol;
            if d_next > bound {
                into.push(Violation {
                    k: cur.k,
                    observed: d_next,
                    bound,
                });
            }
        };
        check(d - 0.5 * cur.step_term, &mut report.decrease);
        check((1.0 - cert.q) * d, &mut report.residual_rate);
        if let (Some(rates), Some(out)) = (&cert.per_step_q, report.partial_rate.as_mut()) {
            check((1.0 - rates[idx]) * d, out);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::IterationRecord;

    fn lam(v: f64) -> RegParam {
        RegParam::new(v).unwrap()
    }

    // Direct enumeration on the original columns, no QR reduction.
    fn sigma_tilde_oracle(a: &RowMatrix) -> f64 {
        let dense = a.to_nalgebra();
        let n = a.ncols();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            let block = DMatrix::from_fn(a.nrows(), cols.len(), |i, c| dense[(i, cols[c])]);
            let sv = singular_values(&block);
            if sv[0] == 0.0 {
                continue;
            }
            let tol = rank_tolerance(a.nrows(), cols.len(), sv[0]);
            if let Some(s) = sv.into_iter().filter(|&s| s > tol).last() {
                best = best.min(s);
            }
        }
        best
    }

    #[test]
    fn sigma_tilde_examples() {
        let eye = RowMatrix::identity(2).unwrap();
        assert!((sigma_tilde_min(&eye, 15).unwrap() - 1.0).abs() < 1e-14);
        let diag = RowMatrix::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
        assert!((sigma_tilde_min(&diag, 15).unwrap() - 1.0).abs() < 1e-14);
        // duplicated column: {1}, {2} give 1, {1,2} gives sqrt(2)
        let dup = RowMatrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!((sigma_tilde_oracle(&dup) - 1.0).abs() < 1e-14);
        assert!((sigma_tilde_min(&dup, 15).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_tilde_errors() {
        let wide = crate::problems::gen_gaussian(3, 16, 1, 0).unwrap();
        assert!(matches!(
            sigma_tilde_min(wide.matrix(), 15),
            Err(Error::EnumerationLimit { limit: 15, actual: 16 })
        ));
        let zero = RowMatrix::from_dense(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(sigma_tilde_min(&zero, 15), Err(Error::ZeroMatrix)));
        // zero columns are skipped rather than forcing the minimum to 0
        let with_zero_col = RowMatrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!((sigma_tilde_min(&with_zero_col, 15).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn qr_reduction_matches_direct_enumeration() {
        for seed in 0..5 {
            let p = crate::problems::gen_gaussian(9, 5, 1, seed).unwrap();
            let a = p.matrix();
            let fast = sigma_tilde_min(a, 15).unwrap();
            let slow = sigma_tilde_oracle(a);
            assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{fast} vs {slow}");
            let full = a.spectral_summary().unwrap();
            assert!(fast <= full.sigma_min_nonzero * (1.0 + 1e-12));
        }
    }

    #[test]
    fn x_hat_min_examples() {
        assert_eq!(x_hat_min_abs(&[2.0, 0.0, -0.5]).unwrap(), 0.5);
        assert_eq!(x_hat_min_abs(&[1.0]).unwrap(), 1.0);
        assert_eq!(x_hat_min_abs(&[-3.0, 3.0]).unwrap(), 3.0);
        assert!(matches!(x_hat_min_abs(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn nu_and_q_examples() {
        let eye = RowMatrix::identity(2).unwrap();
        let x_hat = [2.0, 1.0];
        let v = nu(&eye, &x_hat, lam(1.5), 15).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!((nu(&eye, &x_hat, lam(0.0), 15).unwrap() - 1.0).abs() < 1e-12);
        let scaled = nu(&eye, &[20.0, 10.0], lam(1.5), 15).unwrap();
        assert!(scaled < v);

        let q = q_residual(&eye, &x_hat, lam(1.5), 15).unwrap();
        assert!((q - 0.125).abs() < 1e-12);
        assert!((q_residual(&eye, &x_hat, lam(0.0), 15).unwrap() - 0.5).abs() < 1e-12);
        let cert = RateCertificate::compute(&eye, &x_hat, lam(1.5), 15).unwrap();
        assert!(cert.q >= cert.q_hat);
        assert!((cert.q_hat - 1.0 / (2.0 * 4.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn q_k_examples() {
        let eye = RowMatrix::identity(2).unwrap();
        assert!((q_partial_step(&eye, &[0], 0.5, 4.0).unwrap() - 0.0625).abs() < 1e-15);
        assert!(q_partial_step(&eye, &[], 0.5, 4.0).is_err());

        // all rows and epsilon = 1/||A||_F^2 reproduce q
        let p = crate::problems::gen_gaussian(8, 4, 2, 3).unwrap();
        let a = p.matrix();
        let nu = 2.7;
        let all: Vec<usize> = (0..a.nrows()).collect();
        let qk = q_partial_step(a, &all, 1.0 / a.fro_norm_sq(), nu).unwrap();
        let q = q_from_nu(nu, a.spectral_summary().unwrap().sigma_max);
        assert!((qk - q).abs() <= 1e-12 * q);

        // one row: q_k = epsilon / (2 nu)
        let qk = q_partial_step(a, &[3], 0.01, nu).unwrap();
        assert!((qk - 0.01 / (2.0 * nu)).abs() <= 1e-14);
    }

    #[test]
    fn q_tilde_examples() {
        let eye = RowMatrix::identity(3).unwrap();
        let s = eye.spectral_summary().unwrap();
        assert!((q_tilde(&s, 4.0).unwrap() - q_from_nu(4.0, 1.0)).abs() < 1e-15);

        let d = RowMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let s = d.spectral_summary().unwrap();
        let nu = 3.0;
        let qt = q_tilde(&s, nu).unwrap();
        assert!((qt - q_from_nu(nu, 2.0) / 4.0).abs() < 1e-15);

        let deficient = RowMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let s = deficient.spectral_summary().unwrap();
        assert!(matches!(q_tilde(&s, 1.0), Err(Error::RankDeficient)));
        let cert = RateCertificate::compute(&deficient, &[1.0, 0.0], lam(1.5), 15).unwrap();
        assert_eq!(cert.q_tilde, None);
    }

    #[test]
    fn q_decreases_with_lambda() {
        let p = crate::problems::gen_gaussian(10, 6, 2, 8).unwrap();
        let x = p.reference().unwrap();
        let qs: Vec<f64> = [0.0, 0.5, 1.5, 4.0]
            .iter()
            .map(|&l| q_residual(p.matrix(), x, lam(l), 15).unwrap())
            .collect();
        assert!(qs.windows(2).all(|w| w[1] < w[0]), "{qs:?}");
        assert!(qs[0] <= 0.5);
    }

    fn record(k: usize, d: f64, step: f64) -> IterationRecord {
        IterationRecord {
            k,
            residual_norm: 1.0,
            rse: None,
            bregman: Some(d),
            step_term: step,
            wall_time: 0.0,
            selection: None,
        }
    }

    #[test]
    fn corrupted_history_is_flagged_once() {
        let cert = RateCertificate {
            sigma_tilde_min: 1.0,
            x_hat_min: 1.0,
            sigma_max: 1.0,
            nu: 1.0,
            q: 0.1,
            q_hat: 0.1,
            q_tilde: None,
            per_step_q: None,
        };
        let mut h = ConvergenceHistory {
            records: vec![record(0, 10.0, 2.0), record(1, 8.5, 2.0), record(2, 7.0, 0.0)],
        };
        let report = verify_certificates(&h, &cert).unwrap();
        assert!(report.is_clean(), "{report:?}");
        h.records[2].bregman = Some(9.0);
        let report = verify_certificates(&h, &cert).unwrap();
        assert_eq!(report.decrease.len(), 1);
        assert_eq!(report.decrease[0].k, 1);
        assert_eq!(report.residual_rate.len(), 1);
        assert_eq!(decrease_violations(&h).unwrap(), report.decrease);

        h.records[1].bregman = None;
        assert!(matches!(verify_certificates(&h, &cert), Err(Error::MissingBregman)));
    }
}
