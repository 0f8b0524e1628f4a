//! On-disk problem bundles: a directory holding `A.mtx`, `b.txt`, an optional
//! `xhat.txt` and `meta.json`. Vectors are one decimal per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix_market::{read_matrix_market, write_matrix_market};
use super::{Problem, ProblemMeta};
use crate::bregman::RegParam;
use crate::error::{check_len, Error, Result};

pub const MATRIX_FILE: &str = "A.mtx";
pub const RHS_FILE: &str = "b.txt";
pub const REFERENCE_FILE: &str = "xhat.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    lambda: RegParam,
    m: usize,
    n: usize,
    #[serde(flatten)]
    meta: ProblemMeta,
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(v.len() * 24);
    for x in v {
        text.push_str(&format!("{x:.16e}\n"));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, i + 1, format!("invalid number `{}`", l.trim())))
        })
        .collect()
}

impl Problem {
    /// Writes the problem as a bundle directory, creating it if needed.
    pub fn save_bundle(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix_market(dir.join(MATRIX_FILE), self.matrix())?;
        write_vector(&dir.join(RHS_FILE), self.rhs())?;
        let reference = dir.join(REFERENCE_FILE);
        match self.reference() {
            Some(x) => write_vector(&reference, x)?,
            None if reference.exists() => fs::remove_file(&reference).map_err(|e| Error::io(&reference, e))?,
            None => {}
        }
        let meta = BundleMeta {
            lambda: self.lambda(),
            m: self.nrows(),
            n: self.ncols(),
            meta: self.meta().clone(),
        };
        let path = dir.join(META_FILE);
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Problem> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: meta_path.clone(),
            source: e,
        })?;
        let matrix = read_matrix_market(dir.join(MATRIX_FILE))?;
        check_len("bundle: rows in meta.json", meta.m, matrix.nrows())?;
        check_len("bundle: columns in meta.json", meta.n, matrix.ncols())?;
        let rhs = read_vector(&dir.join(RHS_FILE))?;
        let ref_path = dir.join(REFERENCE_FILE);
        let reference = if ref_path.exists() {
            Some(read_vector(&ref_path)?)
        } else {
            None
        };
        Problem::new(matrix, rhs, meta.lambda, reference, meta.meta)
    }
}
