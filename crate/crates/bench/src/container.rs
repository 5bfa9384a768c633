//! Instance files: a tagged JSON document with dense data stored row-major.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use pdr_core::prox::{SampledEntries, SparsityBox};
use pdr_core::problems::{CompletionInstance, FeasibilityInstance, SparseLsInstance};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const FORMAT_TAG: &str = "pdr-instance";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub data: InstanceData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InstanceData {
    Lsq {
        m: usize,
        n: usize,
        r: usize,
        bound: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        truth: Option<Vec<f64>>,
        noise_level: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        noise: Option<Vec<f64>>,
    },
    Feas {
        m: usize,
        n: usize,
        r: usize,
        bound: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        truth: Option<Vec<f64>>,
    },
    Complete {
        rows: usize,
        cols: usize,
        r: usize,
        p: f64,
        omega: Vec<(usize, usize)>,
        values: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        truth: Option<Vec<f64>>,
    },
}

/// An instance rebuilt from a file.
#[derive(Debug, Clone)]
pub enum LoadedInstance {
    Lsq(SparseLsInstance),
    Feas(FeasibilityInstance, Option<DVector<f64>>),
    Complete(CompletionInstance),
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    a.transpose().as_slice().to_vec()
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(BenchError::Config(format!("expected {rows}x{cols} = {} entries, found {}", rows * cols, data.len())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

fn vector(len: usize, data: &[f64]) -> Result<DVector<f64>> {
    if data.len() != len {
        return Err(BenchError::Config(format!("expected a vector of length {len}, found {}", data.len())));
    }
    Ok(DVector::from_column_slice(data))
}

impl InstanceFile {
    fn new(seed: u64, data: InstanceData) -> Self {
        InstanceFile { format: FORMAT_TAG.into(), version: FORMAT_VERSION, seed, data }
    }

    pub fn from_sparse_ls(inst: &SparseLsInstance, seed: u64) -> Self {
        let a = inst.data().a();
        InstanceFile::new(
            seed,
            InstanceData::Lsq {
                m: a.nrows(),
                n: a.ncols(),
                r: inst.set().r,
                bound: inst.set().bound,
                a: row_major(a),
                b: inst.data().b().as_slice().to_vec(),
                truth: inst.truth.as_ref().map(|t| t.as_slice().to_vec()),
                noise_level: inst.noise_level,
                noise: inst.noise.as_ref().map(|e| e.as_slice().to_vec()),
            },
        )
    }

    pub fn from_feasibility(inst: &FeasibilityInstance, truth: Option<&DVector<f64>>, seed: u64) -> Self {
        let a = inst.affine().a();
        InstanceFile::new(
            seed,
            InstanceData::Feas {
                m: a.nrows(),
                n: a.ncols(),
                r: inst.set().r,
                bound: inst.set().bound,
                a: row_major(a),
                b: inst.affine().b().as_slice().to_vec(),
                truth: truth.map(|t| t.as_slice().to_vec()),
            },
        )
    }

    pub fn from_completion(inst: &CompletionInstance, seed: u64) -> Self {
        let (rows, cols) = inst.shape();
        InstanceFile::new(
            seed,
            InstanceData::Complete {
                rows,
                cols,
                r: inst.rank(),
                p: inst.sampling_ratio(),
                omega: inst.observed().coords().to_vec(),
                values: inst.observed().values().to_vec(),
                truth: inst.truth.as_ref().map(row_major),
            },
        )
    }

    /// Rebuild the instance, re-running every constructor check.
    pub fn to_instance(&self) -> Result<LoadedInstance> {
        if self.format != FORMAT_TAG || self.version != FORMAT_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported instance format {} v{}",
                self.format, self.version
            )));
        }
        Ok(match &self.data {
            InstanceData::Lsq { m, n, r, bound, a, b, truth, noise_level, noise } => {
                let mut inst = SparseLsInstance::new(matrix(*m, *n, a)?, vector(*m, b)?, SparsityBox::new(*r, *bound)?)?;
                if let Some(t) = truth {
                    inst = inst.with_truth(vector(*n, t)?);
                }
                if let Some(e) = noise {
                    inst = inst.with_noise(*noise_level, vector(*m, e)?);
                }
                LoadedInstance::Lsq(inst)
            }
            InstanceData::Feas { m, n, r, bound, a, b, truth } => {
                let inst = FeasibilityInstance::new(matrix(*m, *n, a)?, vector(*m, b)?, SparsityBox::new(*r, *bound)?)?;
                let truth = truth.as_ref().map(|t| vector(*n, t)).transpose()?;
                LoadedInstance::Feas(inst, truth)
            }
            InstanceData::Complete { rows, cols, r, omega, values, truth, .. } => {
                if omega.len() != values.len() {
                    return Err(BenchError::Config("omega and values differ in length".into()));
                }
                let entries = omega.iter().copied().zip(values.iter().copied()).collect();
                let mut inst = CompletionInstance::new(SampledEntries::new(*rows, *cols, entries)?, *r)?;
                if let Some(t) = truth {
                    inst = inst.with_truth(matrix(*rows, *cols, t)?)?;
                }
                LoadedInstance::Complete(inst)
            }
        })
    }
}

pub fn write_instance(file: &InstanceFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string(file).expect("instance files always serialize");
    fs::write(path, text).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn read_instance(path: &Path) -> Result<InstanceFile> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| BenchError::Format { path: path.to_path_buf(), source })
}
