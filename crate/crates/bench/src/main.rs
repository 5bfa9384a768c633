use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdr_bench::config::{expand_variants, Cell, ExperimentConfig, Family, VariantKind};
use pdr_bench::container::{write_instance, InstanceFile};
use pdr_bench::error::{BenchError, Result};
use pdr_bench::selftest;
use pdr_bench::table::{emit_table, OutputFormat};
use pdr_bench::run_experiment;
use pdr_core::datagen::{gen_completion, gen_feasibility, gen_sparse_ls_with_noise, Seed};
use pdr_core::problems::DEFAULT_BETA;

#[derive(Debug, Parser)]
#[command(name = "bench", version, about = "Parameterized Douglas-Rachford benchmark sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sparse constrained least squares.
    Lsq(RunArgs),
    /// Sparse affine feasibility.
    Feas(RunArgs),
    /// Low-rank matrix completion.
    Complete(RunArgs),
    /// Run the brute-force oracle suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write one generated instance to a file.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Rows (lsq, feas); comma-separated for a grid.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Columns (lsq, feas) or matrix side (complete); comma-separated for a grid.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Target rank (complete).
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    /// Sampling ratio (complete).
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// α values for the α-methods; repeatable.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Methods: dr, pdr, pdr2, pr, alt, svp, svt.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<VariantKind>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial t uses seed + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial step multiplier, applied to every variant.
    #[arg(long)]
    k: Option<f64>,
    /// Strong-convexity shift for PR.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Relative-change stop tolerance (lsq, feas).
    #[arg(long)]
    tol: Option<f64>,
    /// Relative observed-residual stop tolerance (complete).
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Noise level for lsq instances.
    #[arg(long)]
    noise: Option<f64>,
    /// Use V instead of X inside the completion rank projection.
    #[arg(long)]
    literal_v: bool,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Reference per-family k, variant and α lists.
    #[arg(long = "paper-defaults")]
    reference_defaults: bool,
    /// Worker threads; defaults to PDR_BENCH_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep per-run records (JSON output).
    #[arg(long)]
    detail: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    Lsq,
    Feas,
    Complete,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lsq => Family::Lsq,
            FamilyArg::Feas => Family::Feas,
            FamilyArg::Complete => Family::Complete,
        }
    }
}

fn build_cells(family: Family, grid: &GridArgs, defaults: &[Cell]) -> Result<Vec<Cell>> {
    let pick = |given: &[usize], default: usize| if given.is_empty() { vec![default] } else { given.to_vec() };
    match (family, defaults[0]) {
        (Family::Lsq | Family::Feas, Cell::Sized { m, n }) => {
            if !grid.rank.is_empty() || !grid.p.is_empty() {
                return Err(BenchError::Config(format!("--rank and --p do not apply to {family}")));
            }
            let (ms, ns) = (pick(&grid.m, m), pick(&grid.n, n));
            Ok(ms.iter().flat_map(|&m| ns.iter().map(move |&n| Cell::Sized { m, n })).collect())
        }
        (Family::Complete, Cell::Completion { n, rank, p }) => {
            if !grid.m.is_empty() {
                return Err(BenchError::Config("--m does not apply to complete; use --n".into()));
            }
            let (ns, ranks) = (pick(&grid.n, n), pick(&grid.rank, rank));
            let ps = if grid.p.is_empty() { vec![p] } else { grid.p.clone() };
            let mut cells = Vec::new();
            for &n in &ns {
                for &rank in &ranks {
                    cells.extend(ps.iter().map(|&p| Cell::Completion { n, rank, p }));
                }
            }
            Ok(cells)
        }
        _ => unreachable!("default cells match their family"),
    }
}

fn build_config(family: Family, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(family);
    cfg.cells = build_cells(family, &args.grid, &cfg.cells)?;
    let kinds = match (args.variants.is_empty(), args.reference_defaults) {
        (false, _) => args.variants.clone(),
        (true, true) => family.reference_variants(),
        (true, false) => vec![VariantKind::Pdr],
    };
    let (alphas, plain_alphas) = match (args.alpha.is_empty(), args.reference_defaults) {
        (false, _) => (args.alpha.clone(), args.alpha.clone()),
        (true, true) => (family.reference_alphas(), family.reference_plain_alphas()),
        (true, false) => (vec![1.8], vec![1.8]),
    };
    cfg.variants = expand_variants(&kinds, &alphas, &plain_alphas, args.beta);
    cfg.k = match (args.k, args.reference_defaults) {
        (Some(k), _) => Some(k),
        (None, true) => None,
        (None, false) => Some(1.0),
    };
    cfg.base_seed = args.seed;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(t) = args.stop_tol {
        cfg.stop_tol = t;
    }
    if let Some(it) = args.max_iter {
        cfg.max_iter = it;
    }
    if let Some(noise) = args.noise {
        cfg.noise = noise;
    }
    cfg.literal_v_argument = args.literal_v;
    cfg.workers = args.workers;
    cfg.detail = args.detail;
    cfg.validate()?;
    Ok(cfg)
}

fn run_family(family: Family, args: &RunArgs) -> Result<()> {
    let cfg = build_config(family, args)?;
    let table = run_experiment(&cfg)?;
    emit_table(&table, args.format, args.out.as_deref())
}

fn run_selftest(seed: u64) -> Result<()> {
    let reports = selftest::run_all(seed);
    let mut failed = 0;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} ({} checks, {:.2}s)", r.name, r.cases, r.elapsed);
        for f in &r.failures {
            println!("    {f}");
        }
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(BenchError::Selftest { failed });
    }
    Ok(())
}

fn run_gen(args: &GenArgs) -> Result<()> {
    let family = Family::from(args.family);
    let mut cfg = ExperimentConfig::new(family);
    cfg.cells = build_cells(family, &args.grid, &cfg.cells)?;
    if let Some(noise) = args.noise {
        cfg.noise = noise;
    }
    if cfg.cells.len() != 1 {
        return Err(BenchError::Config("gen writes one instance; pass single values".into()));
    }
    cfg.validate()?;
    let seed = Seed(args.seed);
    let file = match cfg.cells[0] {
        Cell::Sized { m, n } if family == Family::Lsq => {
            InstanceFile::from_sparse_ls(&gen_sparse_ls_with_noise(m, n, cfg.noise, seed)?, args.seed)
        }
        Cell::Sized { m, n } => {
            let (inst, truth) = gen_feasibility(m, n, seed)?;
            InstanceFile::from_feasibility(&inst, Some(&truth), args.seed)
        }
        Cell::Completion { n, rank, p } => InstanceFile::from_completion(&gen_completion(n, rank, p, seed)?, args.seed),
    };
    write_instance(&file, &args.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; every parse failure is a config error.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Lsq(args) => run_family(Family::Lsq, args),
        Command::Feas(args) => run_family(Family::Feas, args),
        Command::Complete(args) => run_family(Family::Complete, args),
        Command::Selftest { seed } => run_selftest(*seed),
        Command::Gen(args) => run_gen(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
