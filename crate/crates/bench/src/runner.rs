use std::time::Instant;

use pdr_core::datagen::{gen_completion, gen_feasibility, gen_sparse_ls_with_noise, Seed};
use pdr_core::problems::{solve, Instance, SchemeVariant, SolveOptions};
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig, Family};
use crate::error::{BenchError, Result};
use crate::table::{RowKey, RunRecord, RunTable, TableRow};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PDR_BENCH_WORKERS";

/// Seed of the `trial`-th instance of a sweep.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Run every configured variant on one instance, in variant order.
pub fn run_variants<I: Instance>(inst: &I, cfg: &ExperimentConfig, trial: usize, seed: u64) -> Vec<RunRecord> {
    cfg.variants
        .iter()
        .map(|variant| {
            let opts = SolveOptions {
                k: cfg.k_for(variant),
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                ..SolveOptions::default()
            };
            let started = Instant::now();
            match solve(inst, variant, &opts) {
                Ok(trace) => {
                    let m = inst.evaluate_run(&trace);
                    RunRecord {
                        trial,
                        seed,
                        iterations: Some(m.iterations),
                        fval: Some(m.fval),
                        success: m.success,
                        rel_err: m.rel_err,
                        wall_time: m.wall_time,
                        termination: Some(format!("{:?}", m.termination)),
                        error: None,
                    }
                }
                Err(e) => failed_record(trial, seed, started.elapsed().as_secs_f64(), e.to_string()),
            }
        })
        .collect()
}

fn failed_record(trial: usize, seed: u64, wall_time: f64, error: String) -> RunRecord {
    RunRecord {
        trial,
        seed,
        iterations: None,
        fval: None,
        success: false,
        rel_err: None,
        wall_time,
        termination: None,
        error: Some(error),
    }
}

/// Generate the instance of one (cell, trial) job and run all variants on it.
fn run_job(cfg: &ExperimentConfig, cell: Cell, trial: usize) -> Vec<RunRecord> {
    let seed = trial_seed(cfg.base_seed, trial);
    let generated = match (cfg.family, cell) {
        (Family::Lsq, Cell::Sized { m, n }) => {
            gen_sparse_ls_with_noise(m, n, cfg.noise, Seed(seed)).map(|inst| run_variants(&inst, cfg, trial, seed))
        }
        (Family::Feas, Cell::Sized { m, n }) => {
            gen_feasibility(m, n, Seed(seed)).map(|(inst, _)| run_variants(&inst, cfg, trial, seed))
        }
        (Family::Complete, Cell::Completion { n, rank, p }) => gen_completion(n, rank, p, Seed(seed)).map(|mut inst| {
            inst.stop_tol = cfg.stop_tol;
            inst.literal_v_argument = cfg.literal_v_argument;
            run_variants(&inst, cfg, trial, seed)
        }),
        _ => unreachable!("validated configs pair cells with their family"),
    };
    generated.unwrap_or_else(|e| {
        let msg = format!("instance generation failed: {e}");
        cfg.variants.iter().map(|_| failed_record(trial, seed, 0.0, msg.clone())).collect()
    })
}

fn row_key(cfg: &ExperimentConfig, cell: Cell, variant: &SchemeVariant) -> RowKey {
    let (m, n, rank, p) = match cell {
        Cell::Sized { m, n } => {
            let divisor = if cfg.family == Family::Lsq { 10 } else { 5 };
            (m, n, m.div_ceil(divisor), None)
        }
        Cell::Completion { n, rank, p } => ((p * (n * n) as f64).round() as usize, n, rank, Some(p)),
    };
    RowKey {
        family: cfg.family.name().to_string(),
        m,
        n,
        rank,
        p,
        variant: variant.to_string(),
        alpha: variant.alpha(),
    }
}

/// Worker count from the config, else the environment, else rayon's default.
pub fn resolve_workers(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if let Some(w) = cfg.workers {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(BenchError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{text}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Run the full sweep. Rows are ordered by cell, then variant; runs by trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunTable> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = resolve_workers(cfg)? {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;
    let jobs: Vec<(Cell, usize)> = cfg
        .cells
        .iter()
        .flat_map(|&cell| (0..cfg.trials).map(move |t| (cell, t)))
        .collect();
    // `collect` on an indexed parallel iterator keeps job order, so the
    // aggregation below sees runs in trial order regardless of scheduling.
    let results: Vec<Vec<RunRecord>> = pool.install(|| jobs.par_iter().map(|&(cell, t)| run_job(cfg, cell, t)).collect());

    let mut rows = Vec::with_capacity(cfg.cells.len() * cfg.variants.len());
    for (c, &cell) in cfg.cells.iter().enumerate() {
        let per_trial = &results[c * cfg.trials..(c + 1) * cfg.trials];
        for (v, variant) in cfg.variants.iter().enumerate() {
            let runs: Vec<RunRecord> = per_trial.iter().map(|records| records[v].clone()).collect();
            rows.push(TableRow::aggregate(row_key(cfg, cell, variant), &runs, cfg.detail));
        }
    }
    Ok(RunTable { rows })
}
