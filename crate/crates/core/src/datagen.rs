//! Seeded synthetic instances.
//!
//! Every generator is a pure function of its parameters and [`Seed`]. Each random object
//! (matrix, support, values, noise, factors, sample set) draws from its own ChaCha8
//! stream, so adding an object never perturbs the others. Matrices are filled row-major.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PdrError, Result};
use crate::problems::{CompletionInstance, FeasibilityInstance, SparseLsInstance};
use crate::prox::{SampledEntries, SparsityBox};

/// Noise scale of the least-squares generator.
pub const NOISE_LEVEL: f64 = 0.01;

/// Magnitude range the feasibility signal's nonzeros are clamped into.
pub const SIGNAL_MAGNITUDE: (f64, f64) = (1e-6, 1e6);

const STREAM_MATRIX: u64 = 1;
const STREAM_SUPPORT: u64 = 2;
const STREAM_VALUES: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_LEFT: u64 = 5;
const STREAM_RIGHT: u64 = 6;
const STREAM_SAMPLE: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Generator for one object of an instance.
    pub fn stream(self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// `n`-vector with `r` Gaussian nonzeros at uniformly random positions.
fn sparse_signal(n: usize, r: usize, seed: Seed) -> DVector<f64> {
    let mut support = index::sample(&mut seed.stream(STREAM_SUPPORT), n, r).into_vec();
    support.sort_unstable();
    let mut values = seed.stream(STREAM_VALUES);
    let mut x = DVector::zeros(n);
    for i in support {
        x[i] = StandardNormal.sample(&mut values);
    }
    x
}

fn check_shape(m: usize, n: usize, min_m: usize) -> Result<()> {
    if m < min_m {
        return Err(PdrError::InvalidParameter(format!("need m >= {min_m}, got {m}")));
    }
    if n <= m {
        return Err(PdrError::InvalidParameter(format!("need n > m, got m = {m}, n = {n}")));
    }
    Ok(())
}

/// Sparse least squares with `r = ⌈m/10⌉` and noise level [`NOISE_LEVEL`].
pub fn gen_sparse_ls(m: usize, n: usize, seed: Seed) -> Result<SparseLsInstance> {
    gen_sparse_ls_with_noise(m, n, NOISE_LEVEL, seed)
}

pub fn gen_sparse_ls_with_noise(m: usize, n: usize, noise_level: f64, seed: Seed) -> Result<SparseLsInstance> {
    check_shape(m, n, 10)?;
    if !(noise_level >= 0.0) {
        return Err(PdrError::InvalidParameter(format!("noise level {noise_level} is negative")));
    }
    let r = m.div_ceil(10);
    let a = gaussian_matrix(m, n, &mut seed.stream(STREAM_MATRIX));
    let truth = sparse_signal(n, r, seed);
    let noise = gaussian_vector(m, &mut seed.stream(STREAM_NOISE));
    let b = &a * &truth + &noise * noise_level;
    Ok(SparseLsInstance::new(a, b, SparsityBox::with_default_bound(r)?)?
        .with_truth(truth)
        .with_noise(noise_level, noise))
}

/// Sparse feasibility with `r = ⌈m/5⌉` and `b = A x̃`. Returns the planted `x̃ ∈ C ∩ D`.
pub fn gen_feasibility(m: usize, n: usize, seed: Seed) -> Result<(FeasibilityInstance, DVector<f64>)> {
    check_shape(m, n, 5)?;
    let r = m.div_ceil(5);
    let a = gaussian_matrix(m, n, &mut seed.stream(STREAM_MATRIX));
    let (lo, hi) = SIGNAL_MAGNITUDE;
    let truth = sparse_signal(n, r, seed).map(|z| if z == 0.0 { 0.0 } else { z.signum() * z.abs().clamp(lo, hi) });
    let b = &a * &truth;
    let inst = FeasibilityInstance::new(a, b, SparsityBox::with_default_bound(r)?)?;
    Ok((inst, truth))
}

/// Rank-`r` completion of `M = M_L M_Rᵀ` (both `n × r` Gaussian) from `round(p n²)`
/// entries sampled without replacement. The ground truth is attached.
pub fn gen_completion(n: usize, r: usize, p: f64, seed: Seed) -> Result<CompletionInstance> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(PdrError::InvalidParameter(format!("sampling ratio {p} outside (0, 1]")));
    }
    if r == 0 || r > n {
        return Err(PdrError::InvalidParameter(format!("rank {r} outside 1..={n}")));
    }
    let total = n * n;
    let count = (p * total as f64).round() as usize;
    if count < 1 {
        return Err(PdrError::InvalidParameter(format!("p n² = {} samples no entry", p * total as f64)));
    }
    let left = gaussian_matrix(n, r, &mut seed.stream(STREAM_LEFT));
    let right = gaussian_matrix(n, r, &mut seed.stream(STREAM_RIGHT));
    let truth = &left * right.transpose();
    let mut cells: Vec<usize> = (0..total).collect();
    let (chosen, _) = cells.partial_shuffle(&mut seed.stream(STREAM_SAMPLE), count);
    let entries = chosen
        .iter()
        .map(|&k| {
            let (i, j) = (k / n, k % n);
            ((i, j), truth[(i, j)])
        })
        .collect();
    CompletionInstance::new(SampledEntries::new(n, n, entries)?, r)?.with_truth(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_ls_structure() {
        let inst = gen_sparse_ls(20, 60, Seed(3)).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        assert_eq!(inst.set().r, 2);
        assert_eq!(truth.iter().filter(|z| **z != 0.0).count(), 2);
        let resid = inst.data().b() - inst.data().a() * truth;
        let eps = inst.noise.as_ref().unwrap();
        assert!((resid.norm() - 0.01 * eps.norm()).abs() < 1e-12);
    }

    #[test]
    fn ceiling_sparsity_levels() {
        assert_eq!(gen_sparse_ls(10, 50, Seed(0)).unwrap().set().r, 1);
        assert_eq!(gen_feasibility(100, 800, Seed(0)).unwrap().0.set().r, 20);
        assert!(gen_sparse_ls(9, 50, Seed(0)).is_err());
        assert!(gen_feasibility(4, 50, Seed(0)).is_err());
    }

    #[test]
    fn feasibility_signal_is_planted() {
        let (inst, truth) = gen_feasibility(10, 40, Seed(11)).unwrap();
        assert_eq!(truth.iter().filter(|z| **z != 0.0).count(), 2);
        assert!(inst.set().contains(&truth));
        assert!(inst.objective(&truth) < 1e-20);
    }

    #[test]
    fn completion_sample_count_and_rank() {
        let inst = gen_completion(100, 5, 0.08, Seed(5)).unwrap();
        assert_eq!(inst.observed().len(), 800);
        let (_, s, _) = crate::prox::sorted_svd(inst.truth.as_ref().unwrap()).unwrap();
        assert!(s[5] <= 1e-10 * s[0]);
        assert!(gen_completion(10, 2, 0.001, Seed(5)).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_sparse_ls(20, 50, Seed(9)).unwrap();
        let b = gen_sparse_ls(20, 50, Seed(9)).unwrap();
        assert_eq!(a.data().a(), b.data().a());
        assert_eq!(a.data().b(), b.data().b());
        let c = gen_completion(12, 2, 0.4, Seed(9)).unwrap();
        let d = gen_completion(12, 2, 0.4, Seed(9)).unwrap();
        assert_eq!(c.observed(), d.observed());
        assert_eq!(c.truth, d.truth);
        assert_ne!(gen_sparse_ls(20, 50, Seed(10)).unwrap().data().b(), a.data().b());
    }

    #[test]
    fn gaussian_sampler_moments() {
        let mut rng = Seed(2024).stream(STREAM_NOISE);
        let draws: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }
}
