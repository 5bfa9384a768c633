use std::fmt;
use std::str::FromStr;

use pdr_core::problems::SchemeVariant;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lsq,
    Feas,
    Complete,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Lsq => "lsq",
            Family::Feas => "feas",
            Family::Complete => "complete",
        }
    }

    /// Reference initial-step multiplier `k` per family and variant.
    pub fn reference_k(self, variant: &SchemeVariant) -> f64 {
        match (self, variant) {
            (Family::Complete, SchemeVariant::PdrPlainG { .. }) => 1e6,
            (Family::Lsq, _) => 50.0,
            _ => 150.0,
        }
    }

    pub fn reference_variants(self) -> Vec<VariantKind> {
        use VariantKind::*;
        match self {
            Family::Lsq => vec![Dr, Pr, Pdr],
            Family::Feas => vec![Dr, Pr, Alt, Pdr],
            Family::Complete => vec![Svp, Dr, Pdr, Svt, Pdr2],
        }
    }

    pub fn reference_alphas(self) -> Vec<f64> {
        match self {
            Family::Lsq => vec![1.9, 1.8, 1.7],
            Family::Feas => vec![1.7],
            Family::Complete => vec![1.9, 1.8, 1.7, 1.6],
        }
    }

    /// α list of the plain-`g` completion method.
    pub fn reference_plain_alphas(self) -> Vec<f64> {
        vec![1.9, 1.8, 1.7]
    }

    fn supports(self, kind: VariantKind) -> bool {
        use VariantKind::*;
        match self {
            Family::Lsq => matches!(kind, Dr | Pdr | Pr),
            Family::Feas => matches!(kind, Dr | Pdr | Pr | Alt),
            Family::Complete => matches!(kind, Dr | Pdr | Pdr2 | Svp | Svt),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Method names accepted by `--variants`; the α-methods expand over the α list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Dr,
    Pdr,
    Pdr2,
    Pr,
    Alt,
    Svp,
    Svt,
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "dr" => VariantKind::Dr,
            "pdr" => VariantKind::Pdr,
            "pdr2" => VariantKind::Pdr2,
            "pr" => VariantKind::Pr,
            "alt" => VariantKind::Alt,
            "svp" => VariantKind::Svp,
            "svt" => VariantKind::Svt,
            other => return Err(format!("unknown variant '{other}' (dr, pdr, pdr2, pr, alt, svp, svt)")),
        })
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Sized { m: usize, n: usize },
    Completion { n: usize, rank: usize, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub cells: Vec<Cell>,
    pub variants: Vec<SchemeVariant>,
    pub trials: usize,
    pub base_seed: u64,
    /// `None` picks the family default per variant.
    pub k: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Least-squares noise scale.
    pub noise: f64,
    /// Completion stop tolerance on the relative observed residual.
    pub stop_tol: f64,
    pub literal_v_argument: bool,
    /// Worker threads; `None` reads `PDR_BENCH_WORKERS`, then falls back to all cores.
    pub workers: Option<usize>,
    /// Keep per-run records in the table.
    pub detail: bool,
}

impl ExperimentConfig {
    /// Scaled-down defaults: a single cell, PDR at α = 1.8, `k = 1`.
    pub fn new(family: Family) -> Self {
        let cells = match family {
            Family::Lsq => vec![Cell::Sized { m: 40, n: 200 }],
            Family::Feas => vec![Cell::Sized { m: 60, n: 480 }],
            Family::Complete => vec![Cell::Completion { n: 200, rank: 5, p: 0.3 }],
        };
        ExperimentConfig {
            family,
            cells,
            variants: vec![SchemeVariant::PdrRegularizedG { alpha: 1.8 }],
            trials: 5,
            base_seed: 0,
            k: Some(1.0),
            tol: 1e-8,
            max_iter: 10_000,
            noise: pdr_core::datagen::NOISE_LEVEL,
            stop_tol: pdr_core::problems::COMPLETION_STOP_TOL,
            literal_v_argument: false,
            workers: None,
            detail: false,
        }
    }

    /// `k` a variant starts with.
    pub fn k_for(&self, variant: &SchemeVariant) -> f64 {
        self.k.unwrap_or_else(|| self.family.reference_k(variant))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.cells.is_empty() || self.variants.is_empty() {
            return bad("empty size grid or variant list".into());
        }
        if self.k.is_some_and(|k| !(k >= 1.0)) {
            return bad(format!("k must be >= 1, got {:?}", self.k));
        }
        if !(self.tol > 0.0) || !(self.stop_tol > 0.0) || self.max_iter == 0 {
            return bad("tolerances must be positive and max-iter at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise level must be non-negative, got {}", self.noise));
        }
        for v in &self.variants {
            v.validate().map_err(|e| BenchError::Config(e.to_string()))?;
            if !self.family.supports(kind_of(v)) {
                return bad(format!("variant {v} does not apply to family {}", self.family));
            }
        }
        for cell in &self.cells {
            match (*cell, self.family) {
                (Cell::Sized { m, n }, Family::Lsq | Family::Feas) => {
                    let min_m = if self.family == Family::Lsq { 10 } else { 5 };
                    if m < min_m || n <= m {
                        return bad(format!("{} needs m >= {min_m} and n > m, got m = {m}, n = {n}", self.family));
                    }
                }
                (Cell::Completion { n, rank, p }, Family::Complete) => {
                    if rank == 0 || rank > n || !(p > 0.0 && p <= 1.0) || (p * (n * n) as f64).round() < 1.0 {
                        return bad(format!("completion needs 1 <= rank <= n, 0 < p <= 1 and p n² >= 1; got n = {n}, rank = {rank}, p = {p}"));
                    }
                }
                _ => return bad(format!("grid cell {cell:?} does not match family {}", self.family)),
            }
        }
        Ok(())
    }
}

pub fn kind_of(v: &SchemeVariant) -> VariantKind {
    match v {
        SchemeVariant::PdrRegularizedG { alpha } if *alpha == 2.0 => VariantKind::Dr,
        SchemeVariant::PdrRegularizedG { .. } => VariantKind::Pdr,
        SchemeVariant::PdrPlainG { .. } => VariantKind::Pdr2,
        SchemeVariant::PrShifted { .. } => VariantKind::Pr,
        SchemeVariant::AlternatingProjection => VariantKind::Alt,
        SchemeVariant::Svp => VariantKind::Svp,
        SchemeVariant::Svt { .. } => VariantKind::Svt,
    }
}

/// Expand method names into concrete variants, the α-methods once per α.
/// `plain_alphas` applies to `pdr2`.
pub fn expand_variants(kinds: &[VariantKind], alphas: &[f64], plain_alphas: &[f64], beta: f64) -> Vec<SchemeVariant> {
    let mut out = Vec::new();
    for kind in kinds {
        match kind {
            VariantKind::Dr => out.push(SchemeVariant::dr()),
            VariantKind::Pdr => out.extend(alphas.iter().map(|&alpha| SchemeVariant::PdrRegularizedG { alpha })),
            VariantKind::Pdr2 => out.extend(plain_alphas.iter().map(|&alpha| SchemeVariant::PdrPlainG { alpha })),
            VariantKind::Pr => out.push(SchemeVariant::PrShifted { beta }),
            VariantKind::Alt => out.push(SchemeVariant::AlternatingProjection),
            VariantKind::Svp => out.push(SchemeVariant::Svp),
            VariantKind::Svt => out.push(SchemeVariant::Svt { tau: None, delta: None }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_follows_alpha_list() {
        let v = expand_variants(&[VariantKind::Dr, VariantKind::Pdr], &[1.9, 1.7], &[], 2.2);
        let labels: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(labels, ["DR", "PDR(1.9)", "PDR(1.7)"]);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = ExperimentConfig::new(Family::Feas);
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Family::Lsq);
        cfg.variants = vec![SchemeVariant::Svp];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Family::Lsq);
        cfg.variants = vec![SchemeVariant::PdrRegularizedG { alpha: 1.5 }];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Family::Complete);
        cfg.cells = vec![Cell::Completion { n: 10, rank: 2, p: 0.001 }];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reference_k_per_family() {
        let pdr = SchemeVariant::PdrRegularizedG { alpha: 1.7 };
        assert_eq!(Family::Lsq.reference_k(&pdr), 50.0);
        assert_eq!(Family::Feas.reference_k(&pdr), 150.0);
        assert_eq!(Family::Complete.reference_k(&pdr), 150.0);
        assert_eq!(Family::Complete.reference_k(&SchemeVariant::PdrPlainG { alpha: 1.7 }), 1e6);
    }
}
