//! Problem instances `min lambda*||x||_1 + 0.5*||x||^2 s.t. Ax = b`,
//! random generators with planted sparse solutions, and evaluation metrics.

mod bundle;
pub mod matrix_market;
mod metrics;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bregman::RegParam;
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, RowMatrix};

pub use bundle::{read_vector, write_vector, MATRIX_FILE, META_FILE, REFERENCE_FILE, RHS_FILE};
pub use metrics::{rse, snr};

/// Default regularization weight used by the generators.
pub const DEFAULT_LAMBDA: f64 = 1.5;

/// Where a problem came from. Serialized as the bundle's `meta.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub label: String,
    pub generator: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise_level: f64,
    /// Number of nonzeros of the planted reference, when one exists.
    #[serde(default)]
    pub planted_nnz: Option<usize>,
}

impl ProblemMeta {
    pub fn is_noisy(&self) -> bool {
        self.noise_level > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    matrix: Arc<RowMatrix>,
    rhs: Vec<f64>,
    rhs_norm: f64,
    lambda: RegParam,
    reference: Option<Vec<f64>>,
    meta: ProblemMeta,
}

impl Problem {
    /// Validates dimensions and rejects zero rows paired with a nonzero
    /// right-hand side entry.
    pub fn new(
        matrix: impl Into<Arc<RowMatrix>>,
        rhs: Vec<f64>,
        lambda: RegParam,
        reference: Option<Vec<f64>>,
        meta: ProblemMeta,
    ) -> Result<Self> {
        let matrix = matrix.into();
        check_len("problem: b", matrix.nrows(), rhs.len())?;
        if let Some(x) = &reference {
            check_len("problem: reference", matrix.ncols(), x.len())?;
        }
        for (i, &bi) in rhs.iter().enumerate() {
            if matrix.row_norm_sq(i) == 0.0 && bi != 0.0 {
                return Err(Error::InconsistentZeroRow { row: i, value: bi });
            }
        }
        let rhs_norm = norm(&rhs);
        Ok(Problem {
            matrix,
            rhs,
            rhs_norm,
            lambda,
            reference,
            meta,
        })
    }

    pub fn matrix(&self) -> &RowMatrix {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> Arc<RowMatrix> {
        Arc::clone(&self.matrix)
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rhs_norm(&self) -> f64 {
        self.rhs_norm
    }

    pub fn lambda(&self) -> RegParam {
        self.lambda
    }

    pub fn reference(&self) -> Option<&[f64]> {
        self.reference.as_deref()
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn with_lambda(mut self, lambda: RegParam) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_reference(mut self, reference: Option<Vec<f64>>) -> Result<Self> {
        if let Some(x) = &reference {
            check_len("problem: reference", self.ncols(), x.len())?;
        }
        self.reference = reference;
        Ok(self)
    }

    /// Replaces `b` by `b + e` with `||e|| = level * ||b||`.
    pub fn with_noise(self, level: f64, seed: u64) -> Result<Self> {
        let noisy = add_noise(&self.rhs, level, seed)?;
        let mut meta = self.meta;
        meta.noise_level = level;
        Problem::new(self.matrix, noisy, self.lambda, self.reference, meta)
    }
}

/// Default planted support size: `max(1, round(0.01 * n))`.
pub fn default_nnz(n: usize) -> usize {
    ((0.01 * n as f64).round() as usize).max(1)
}

/// Standard Gaussian `m x n` matrix with an `nnz`-sparse planted solution
/// whose nonzeros are standard normal, and `b = A x_hat`.
pub fn gen_gaussian(m: usize, n: usize, nnz: usize, seed: u64) -> Result<Problem> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("dimensions must be positive, got {m}x{n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    let matrix = RowMatrix::from_dense(m, n, data)?;
    let x_hat = planted_vector(n, nnz, &mut rng)?;
    let rhs = make_consistent_rhs(&matrix, &x_hat)?;
    let meta = ProblemMeta {
        label: format!("gaussian-{m}x{n}"),
        generator: "gaussian".into(),
        seed: Some(seed),
        noise_level: 0.0,
        planted_nnz: Some(nnz),
    };
    Problem::new(matrix, rhs, RegParam::new(DEFAULT_LAMBDA)?, Some(x_hat), meta)
}

/// Plants an `nnz`-sparse Gaussian solution for a given matrix.
pub fn plant_solution(matrix: impl Into<Arc<RowMatrix>>, nnz: usize, seed: u64, label: &str) -> Result<Problem> {
    let matrix = matrix.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_hat = planted_vector(matrix.ncols(), nnz, &mut rng)?;
    let rhs = make_consistent_rhs(&matrix, &x_hat)?;
    let meta = ProblemMeta {
        label: label.to_string(),
        generator: "planted".into(),
        seed: Some(seed),
        noise_level: 0.0,
        planted_nnz: Some(nnz),
    };
    Problem::new(matrix, rhs, RegParam::new(DEFAULT_LAMBDA)?, Some(x_hat), meta)
}

/// Sparse vector with `nnz` standard normal entries on a uniform random support.
pub fn planted_vector<R: Rng>(n: usize, nnz: usize, rng: &mut R) -> Result<Vec<f64>> {
    if nnz == 0 || nnz > n {
        return Err(Error::InvalidArgument(format!("nnz must lie in 1..={n}, got {nnz}")));
    }
    let mut x = vec![0.0; n];
    let mut support = rand::seq::index::sample(rng, n, nnz).into_vec();
    support.sort_unstable();
    for j in support {
        let mut v: f64 = rng.sample(StandardNormal);
        while v == 0.0 {
            v = rng.sample(StandardNormal);
        }
        x[j] = v;
    }
    Ok(x)
}

/// `b = A x_hat`
pub fn make_consistent_rhs(matrix: &RowMatrix, x_hat: &[f64]) -> Result<Vec<f64>> {
    matrix.apply(x_hat)
}

/// Adds a Gaussian-direction perturbation scaled to `||e|| = level * ||b||`.
pub fn add_noise(b: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {level}")));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if level == 0.0 {
        return Ok(b.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = (0..b.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut e_norm = norm(&e);
    while e_norm == 0.0 {
        e.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        e_norm = norm(&e);
    }
    let scale = level * b_norm / e_norm;
    Ok(b.iter().zip(&e).map(|(bi, ei)| bi + scale * ei).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_shapes_and_consistency() {
        let p = gen_gaussian(40, 20, 3, 11).unwrap();
        assert_eq!((p.nrows(), p.ncols()), (40, 20));
        let x = p.reference().unwrap();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 3);
        let r = p.matrix().residual(x, p.rhs()).unwrap();
        assert!(norm(&r) <= 1e-12 * p.rhs_norm());
        assert_eq!(p.lambda().value(), 1.5);

        let dense = gen_gaussian(5, 4, 4, 1).unwrap();
        assert!(dense.reference().unwrap().iter().all(|v| *v != 0.0));
        assert!(gen_gaussian(5, 4, 5, 1).is_err());
        assert!(gen_gaussian(5, 4, 0, 1).is_err());
        assert!(gen_gaussian(0, 4, 1, 1).is_err());
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = gen_gaussian(30, 50, 2, 99).unwrap();
        let b = gen_gaussian(30, 50, 2, 99).unwrap();
        assert_eq!(a.matrix().triplets(), b.matrix().triplets());
        assert_eq!(a.rhs(), b.rhs());
        assert_eq!(a.reference(), b.reference());
        let c = gen_gaussian(30, 50, 2, 100).unwrap();
        assert_ne!(a.rhs(), c.rhs());
    }

    #[test]
    fn table_shapes() {
        assert_eq!(default_nnz(1000), 10);
        assert_eq!(default_nnz(2000), 20);
        assert_eq!(default_nnz(292), 3);
        assert_eq!(default_nnz(4), 1);
    }

    #[test]
    fn noise_levels() {
        let b = vec![3.0, -4.0, 12.0];
        assert_eq!(add_noise(&b, 0.0, 5).unwrap(), b);
        for level in [0.01, 1.0] {
            let noisy = add_noise(&b, level, 5).unwrap();
            let diff: Vec<f64> = noisy.iter().zip(&b).map(|(x, y)| x - y).collect();
            assert!((norm(&diff) / norm(&b) - level).abs() < 1e-12);
        }
        assert_eq!(add_noise(&b, 0.01, 5).unwrap(), add_noise(&b, 0.01, 5).unwrap());
        assert!(matches!(add_noise(&[0.0, 0.0], 0.01, 1), Err(Error::ZeroVector)));
    }

    #[test]
    fn zero_row_with_nonzero_rhs_is_rejected() {
        let a = RowMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let err = Problem::new(a.clone(), vec![1.0, 2.0], RegParam::default(), None, ProblemMeta::default());
        assert!(matches!(err, Err(Error::InconsistentZeroRow { row: 1, .. })));
        assert!(Problem::new(a, vec![1.0, 0.0], RegParam::default(), None, ProblemMeta::default()).is_ok());
    }

    #[test]
    fn consistent_rhs_delegates_to_apply() {
        let eye = RowMatrix::identity(2).unwrap();
        assert_eq!(make_consistent_rhs(&eye, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let a = RowMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(make_consistent_rhs(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert!(make_consistent_rhs(&a, &[1.0]).is_err());
    }
}
