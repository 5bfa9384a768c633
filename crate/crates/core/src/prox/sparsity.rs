use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PdrError, Result};

/// `{z : ‖z‖₀ ≤ r, ‖z‖_∞ ≤ bound}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityBox {
    pub r: usize,
    pub bound: f64,
}

impl SparsityBox {
    pub const DEFAULT_BOUND: f64 = 1e6;

    pub fn new(r: usize, bound: f64) -> Result<Self> {
        if r == 0 {
            return Err(PdrError::InvalidParameter("sparsity level must be positive".into()));
        }
        if !(bound > 0.0) {
            return Err(PdrError::InvalidParameter(format!(
                "box bound must be positive, got {bound}"
            )));
        }
        Ok(SparsityBox { r, bound })
    }

    pub fn with_default_bound(r: usize) -> Result<Self> {
        Self::new(r, Self::DEFAULT_BOUND)
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        let nnz = z.iter().filter(|&&e| e != 0.0).count();
        nnz <= self.r && z.iter().all(|e| e.abs() <= self.bound)
    }

    /// Indicator: `0` inside the set, `+∞` outside.
    pub fn indicator(&self, z: &DVector<f64>) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Euclidean projection onto a [`SparsityBox`].
///
/// Each coordinate is clipped to the box and scored by how much squared distance keeping
/// it saves, `x_i² − (x_i − c_i)²`. The `r` best scores survive; equal scores prefer the
/// smaller index.
pub fn project_sparsity_box(x: &DVector<f64>, set: &SparsityBox) -> Result<DVector<f64>> {
    let n = x.len();
    if set.r == 0 {
        return Err(PdrError::InvalidParameter("sparsity level must be positive".into()));
    }
    if set.r > n {
        return Err(PdrError::InvalidParameter(format!(
            "sparsity level {} exceeds dimension {n}",
            set.r
        )));
    }
    let clipped: Vec<f64> = x.iter().map(|&e| e.clamp(-set.bound, set.bound)).collect();
    let gains: Vec<f64> = x
        .iter()
        .zip(&clipped)
        .map(|(&xi, &ci)| xi * xi - (xi - ci) * (xi - ci))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    let by_gain = |&i: &usize, &j: &usize| -> Ordering {
        gains[j].total_cmp(&gains[i]).then(i.cmp(&j))
    };
    if set.r < n {
        order.select_nth_unstable_by(set.r - 1, by_gain);
    }
    let mut out = DVector::zeros(n);
    for &i in &order[..set.r] {
        out[i] = clipped[i];
    }
    Ok(out)
}
