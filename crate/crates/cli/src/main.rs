use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crot::bounds::{bound_report, ReportConfig};
use crot::estimators::{kl_eval_bound, mc_js_sqrt, mc_kl, mc_renyi, mc_tv};
use crot::experiments::{run_figure_sweep, run_table, DataFormat, ExperimentConfig, SweepConfig};
use crot::io::{load_csv, load_idx, load_json, save_json};
use crot::learn::{fit_em, fit_scrot_observed, LearnConfig};
use crot::{crot, Family, GroundKind, GroundSpec, Kde, McConfig, Mixture, SinkhornConfig, Solver};

#[derive(Parser)]
#[command(name = "crot", version, about = "Chain-rule optimal transport distances between mixtures")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport distance between two mixtures.
    Dist(DistArgs),
    /// Every applicable bound on a divergence between two mixtures.
    Bounds(BoundsArgs),
    /// Monte Carlo estimate of a divergence between two mixtures.
    Estimate(EstimateArgs),
    /// Fit a GMM to data with the entropic transport objective.
    Learn(LearnArgs),
    /// Bound table over repeated GMM fits on halves of a dataset.
    Table(TableArgs),
    /// Bounds as one mixture moves away from another.
    Sweep(SweepArgs),
    /// Shape of an IDX file.
    IdxInfo(IdxInfoArgs),
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    mixture_a: PathBuf,
    #[arg(long)]
    mixture_b: PathBuf,
}

impl PairArgs {
    fn load(&self) -> anyhow::Result<(Mixture, Mixture)> {
        Ok((read_mixture(&self.mixture_a)?, read_mixture(&self.mixture_b)?))
    }
}

#[derive(Args)]
struct GroundArgs {
    /// kl, tv, w2, w2sq, renyi:<alpha>, js:<alpha> or w1d:<p>.
    #[arg(long)]
    ground: GroundKind,
    #[arg(long, default_value_t = 5000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    quad_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverName {
    Exact,
    Sinkhorn,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    ground: GroundArgs,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverName,
    /// Sinkhorn strength as `median(M) / level`.
    #[arg(long, conflicts_with = "gamma")]
    lambda_level: Option<f64>,
    /// Absolute Sinkhorn strength.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    stop_tol: f64,
    /// Write the transport plan as JSON.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    ground: GroundKind,
    /// Samples of the Monte Carlo reference estimate.
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    /// Points per side of the empirical W2 bound.
    #[arg(long, default_value_t = 500)]
    empirical_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// kl, tv, renyi:<alpha> or js:<alpha> (square root of JS).
    #[arg(long)]
    kind: GroundKind,
    #[arg(long, default_value_t = 5000)]
    mc_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Training points, one row per point.
    #[arg(long)]
    data: PathBuf,
    /// Held-out points for the per-epoch evaluation.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    components: usize,
    #[arg(long, default_value_t = 0.005)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    bandwidth: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    /// Samples of the per-epoch evaluation.
    #[arg(long, default_value_t = 5000)]
    eval_samples: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatName {
    Csv,
    Idx,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatName,
    #[arg(long)]
    ground: GroundKind,
    #[arg(long)]
    pca_dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    components: usize,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    /// Fit both mixtures on the same points.
    #[arg(long)]
    identical_halves: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepFamily {
    #[value(name = "gaussian_1d")]
    Gaussian1d,
    Gamma,
    Rayleigh,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "gaussian_1d")]
    family: SweepFamily,
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Comma-separated separations; defaults to 0, 0.5, ..., 5.
    #[arg(long, value_delimiter = ',')]
    separations: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdxInfoArgs {
    file: PathBuf,
}

fn read_mixture(path: &Path) -> anyhow::Result<Mixture> {
    load_json(path).with_context(|| format!("reading mixture {}", path.display()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => save_json(path, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn emit_text(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct DistOutput {
    ground: String,
    value: f64,
    iterations: usize,
    residual: f64,
}

fn dist(args: &DistArgs, seed: u64) -> anyhow::Result<()> {
    let (a, b) = args.pair.load()?;
    let spec = GroundSpec::new(args.ground.ground)
        .with_mc_samples(args.ground.mc_samples)
        .with_quad_tol(args.ground.quad_tol)
        .with_seed(seed);
    let solver = match args.solver {
        SolverName::Exact => Solver::Exact,
        SolverName::Sinkhorn => {
            let mut cfg = match args.gamma {
                Some(g) => SinkhornConfig::gamma(g),
                None => SinkhornConfig::lambda_level(args.lambda_level.unwrap_or(10.0)),
            };
            cfg.max_iterations = args.max_iter;
            cfg.stop_threshold = args.stop_tol;
            Solver::Sinkhorn(cfg)
        }
    };
    let result = crot(&a, &b, &spec, &solver)?;
    if let Some(path) = &args.plan_out {
        save_json(path, &result.plan)?;
    }
    emit(
        &DistOutput {
            ground: spec.kind.to_string(),
            value: result.value,
            iterations: result.plan.iterations,
            residual: result.plan.residual,
        },
        None,
    )
}

fn bounds(args: &BoundsArgs, seed: u64) -> anyhow::Result<()> {
    let (a, b) = args.pair.load()?;
    let cfg = ReportConfig {
        mc: McConfig::new(args.mc_samples, seed),
        empirical_n: args.empirical_n,
        ..ReportConfig::new(seed)
    };
    emit(&bound_report(&a, &b, args.ground, &cfg)?, args.out.as_deref())
}

fn estimate(args: &EstimateArgs, seed: u64) -> anyhow::Result<()> {
    let (a, b) = args.pair.load()?;
    let cfg = McConfig::new(args.mc_samples, seed);
    let est = match args.kind {
        GroundKind::Kl => mc_kl(&a, &b, &cfg)?,
        GroundKind::Tv => mc_tv(&a, &b, &cfg)?,
        GroundKind::Renyi(alpha) => mc_renyi(&a, &b, alpha, &cfg)?,
        GroundKind::JsSqrt(alpha) => mc_js_sqrt(&a, &b, alpha, &cfg)?,
        other => bail!(crot::Error::Unsupported(format!("no Monte Carlo estimator for {other}"))),
    };
    emit(&est, args.out.as_deref())
}

fn learn(args: &LearnArgs, seed: u64) -> anyhow::Result<()> {
    let train = load_csv(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let test = match &args.test {
        Some(path) => Some(load_csv(path).with_context(|| format!("reading {}", path.display()))?),
        None => None,
    };
    let cfg = LearnConfig {
        components: args.components,
        lambda: args.lambda,
        bandwidth: args.bandwidth,
        batch_size: args.batch,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed,
        eval: McConfig::new(args.eval_samples, seed),
        ..LearnConfig::default()
    };
    let kde = test.as_ref().map(|t| Kde::build(t, args.bandwidth)).transpose()?;
    let state = fit_scrot_observed(&train, kde.as_ref(), &cfg, |s| {
        if let Some(r) = s.trajectory.last() {
            eprintln!("epoch {} objective {:.6}", r.epoch, r.objective);
        }
    })?;
    save_json(&args.out, &state.gmm)?;
    if let Some(path) = &args.curve {
        let baseline = match &kde {
            Some(kde) => Some(kl_eval_bound(kde, &fit_em(&train, args.components, seed)?, &cfg.eval)?.estimate),
            None => None,
        };
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "scrot_objective", "kl_eval", "kl_eval_em_baseline"])?;
        for r in &state.trajectory {
            w.write_record([r.epoch.to_string(), r.objective.to_string(), cell(r.kl_eval), cell(baseline)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn table(args: &TableArgs, seed: u64) -> anyhow::Result<()> {
    let format = match args.format {
        FormatName::Csv => DataFormat::Csv,
        FormatName::Idx => DataFormat::Idx,
    };
    let mut cfg = ExperimentConfig::new(&args.data, format, args.ground, seed);
    cfg.pca_dim = args.pca_dim;
    cfg.fraction = args.fraction;
    cfg.repeats = args.repeats;
    cfg.components = args.components;
    cfg.identical_halves = args.identical_halves;
    cfg.report.mc = McConfig::new(args.mc_samples, seed);
    let result = run_table(&cfg)?;
    for f in &result.failures {
        eprintln!("repeat {} failed: {}", f.repeat, f.error);
    }
    emit_text(&result.to_csv()?, args.out.as_deref())
}

fn sweep(args: &SweepArgs, seed: u64) -> anyhow::Result<()> {
    let family = match args.family {
        SweepFamily::Gaussian1d => Family::Gaussian1d,
        SweepFamily::Gamma => Family::Gamma,
        SweepFamily::Rayleigh => Family::Rayleigh,
    };
    let mut cfg = SweepConfig::new(family, seed);
    cfg.components = args.components;
    cfg.report.mc = McConfig::new(args.mc_samples, seed);
    if !args.separations.is_empty() {
        cfg.separations = args.separations.clone();
    }
    emit_text(&run_figure_sweep(&cfg)?.to_csv()?, args.out.as_deref())
}

#[derive(Serialize)]
struct IdxInfo {
    dims: Vec<usize>,
    points: usize,
    dim: usize,
    min: u8,
    max: u8,
}

fn idx_info(args: &IdxInfoArgs) -> anyhow::Result<()> {
    let t = load_idx(&args.file)?;
    let points = t.to_points();
    emit(
        &IdxInfo {
            dims: t.dims.clone(),
            points: points.len(),
            dim: points.dim(),
            min: t.data.iter().copied().min().unwrap_or(0),
            max: t.data.iter().copied().max().unwrap_or(0),
        },
        None,
    )
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Dist(a) => dist(a, cli.seed),
        Command::Bounds(a) => bounds(a, cli.seed),
        Command::Estimate(a) => estimate(a, cli.seed),
        Command::Learn(a) => learn(a, cli.seed),
        Command::Table(a) => table(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::IdxInfo(a) => idx_info(a),
    }
}

/// 2 when the numerics failed, 1 for everything the caller can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<crot::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
