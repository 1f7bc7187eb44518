//! The `dogan` command line: train double-oracle GANs, solve finite games,
//! evaluate runs.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dogan_core::data::{
    mode_coverage, write_samples_csv, CoverageReport, CoverageThresholds, GaussianMixture,
    GaussianMixtureConfig, Prng,
};
use dogan_core::do_loop::{self, run_do_finite, RunStatus};
use dogan_core::meta_game::{solve_zero_sum, MixedStrategy, PayoffMatrix};
use dogan_core::neural::NetworkSnapshot;
use dogan_core::oracles::sample_generator_mixture;
use dogan_core::run_dir::{self, RunDir, Summary};
use dogan_core::Scalar;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use config::{Precision, TrainConfig, TrainVariant};

/// Environment variable naming the directory runs are created under.
const OUT_ENV: &str = "DOGAN_OUT";

#[derive(Parser)]
#[command(name = "dogan", version, about = "Double-oracle GAN training and finite-game solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DO-GAN variant or the vanilla GAN baseline on a Gaussian ring.
    Train(TrainArgs),
    /// Solve a matrix game with double oracle and compare against the full LP.
    Finite(FiniteArgs),
    /// Score the equilibrium generator mixture of a finished run.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the configuration recorded in a previous run's manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    /// plain, do-p, do-c or gan.
    #[arg(long)]
    variant: Option<String>,
    /// Number of Gaussian modes on the ring.
    #[arg(long)]
    modes: Option<usize>,
    /// Support capacity of the pruning variant.
    #[arg(long)]
    s: Option<usize>,
    /// Termination threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run directory (default: `$DOGAN_OUT/<variant>-k<modes>-seed<seed>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct FiniteArgs {
    /// Header-less numeric CSV; rows are the maximizing player.
    matrix: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `dogan train`.
    run_dir: PathBuf,
    /// Samples drawn from the generator mixture.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Seed for the evaluation samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Everything needed to repeat a run.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    version: String,
    variant: TrainVariant,
    seed: u64,
    dataset: GaussianMixtureConfig,
    output_dir: PathBuf,
    config: TrainConfig,
}

/// Runs the command line given by `args`, whose first item is the program
/// name, and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Finite(args) => cmd_finite(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn resolve_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &args.from_manifest {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("malformed manifest {}", path.display()))?;
        cfg = manifest.config;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        cfg.apply_text(&text)
            .with_context(|| format!("in {}", path.display()))?;
    }
    let flags = [
        ("variant", args.variant.clone()),
        ("modes", args.modes.map(|v| v.to_string())),
        ("s", args.s.map(|v| v.to_string())),
        ("epsilon", args.epsilon.map(|v| v.to_string())),
        ("max_epochs", args.max_epochs.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            cfg.set(key, &value)?;
        }
    }
    for kv in &args.sets {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_out(cfg: &TrainConfig) -> PathBuf {
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-k{}-seed{}", cfg.variant, cfg.modes, cfg.seed))
}

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let cfg = resolve_config(&args)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&cfg));
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        variant: cfg.variant,
        seed: cfg.seed,
        dataset: cfg.dataset(),
        output_dir: out.clone(),
        config: cfg.clone(),
    };
    let mut dir = RunDir::create(&out, args.force)?;
    dir.samples = cfg.samples;
    dir.samples_every = cfg.samples_every;
    dir.sample_seed = cfg.seed;
    dir.write_manifest(&manifest)?;
    fs::write(dir.root().join("config.txt"), cfg.to_text()?)?;
    let summary = match cfg.precision {
        Precision::F64 => train::<f64>(&cfg, &mut dir)?,
        Precision::F32 => train::<f32>(&cfg, &mut dir)?,
    };
    println!(
        "{} {}: status {}, {} epochs, value {}, modes recovered {}/{}",
        cfg.variant,
        out.display(),
        summary.status,
        summary.epochs,
        summary.value.map_or("n/a".into(), |v| format!("{v:.6}")),
        summary.modes_recovered.unwrap_or(0),
        cfg.modes
    );
    Ok(if summary.status == "max_epochs" { 2 } else { 0 })
}

fn coverage<T: Scalar>(
    generators: &[NetworkSnapshot<T>],
    sigma_g: &MixedStrategy<T>,
    dataset: &GaussianMixtureConfig,
    n: usize,
    seed: u64,
) -> Result<(ndarray::Array2<T>, CoverageReport)> {
    let mut rng = Prng::seed_from_u64(seed);
    let xs = sample_generator_mixture(generators, sigma_g, n, &mut rng)?;
    let th = CoverageThresholds::for_samples(n);
    let report = mode_coverage(xs.view(), dataset, th.assign_radius_mult, th.min_count)?;
    Ok((xs, report))
}

fn to_f64<T: Scalar>(sigma: &MixedStrategy<T>) -> Vec<f64> {
    sigma.probs().iter().map(|p| p.as_f64()).collect()
}

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "converged",
        RunStatus::MaxEpochs => "max_epochs",
    }
}

fn train<T: Scalar>(cfg: &TrainConfig, dir: &mut RunDir) -> Result<Summary> {
    let dataset = cfg.dataset();
    let data = GaussianMixture::new(dataset.clone())?;
    let (generators, sigma_g, mut summary) = if cfg.variant == TrainVariant::Gan {
        let oracle = cfg.oracle()?;
        let rec = do_loop::run_gan_baseline::<T>(&oracle, cfg.gan_loss, cfg.gan_updates, &data, cfg.seed)?;
        do_loop::Observer::<T>::sync_snapshots(
            dir,
            std::slice::from_ref(&rec.generator),
            std::slice::from_ref(&rec.discriminator),
        )?;
        let summary = Summary {
            status: "completed".into(),
            variant: cfg.variant.to_string(),
            epochs: 0,
            generator_updates: rec.generator_updates,
            value: None,
            support_g: vec![rec.generator.id],
            support_d: vec![rec.discriminator.id],
            sigma_g: vec![1.0],
            sigma_d: vec![1.0],
            modes_recovered: None,
            coverage: None,
        };
        (vec![rec.generator], MixedStrategy::pure(1, 0)?, summary)
    } else {
        let run = do_loop::run::<T>(&cfg.do_config()?, &data, dir)?;
        let summary = Summary {
            status: status_name(run.status).into(),
            variant: cfg.variant.to_string(),
            epochs: run.epochs.len(),
            generator_updates: run.generator_updates,
            value: Some(run.solution.value.as_f64()),
            support_g: run.generators.iter().map(|g| g.id).collect(),
            support_d: run.discriminators.iter().map(|d| d.id).collect(),
            sigma_g: to_f64(&run.solution.sigma_g),
            sigma_d: to_f64(&run.solution.sigma_d),
            modes_recovered: None,
            coverage: None,
        };
        (run.generators, run.solution.sigma_g, summary)
    };
    dir.write_samples(summary.epochs, &generators, &sigma_g)?;
    let (_, report) = coverage(&generators, &sigma_g, &dataset, cfg.samples, cfg.seed)?;
    summary.modes_recovered = Some(report.modes_recovered);
    summary.coverage = Some(report);
    dir.write_summary(&summary)?;
    Ok(summary)
}

fn cmd_finite(args: FiniteArgs) -> Result<u8> {
    if args.epsilon.is_nan() || args.epsilon <= 0.0 {
        bail!("--epsilon must be positive");
    }
    let text = fs::read_to_string(&args.matrix)
        .with_context(|| format!("cannot read {}", args.matrix.display()))?;
    let u = PayoffMatrix::<f64>::parse_grid(&text)
        .with_context(|| format!("in {}", args.matrix.display()))?;
    let run = run_do_finite(&u, args.epsilon, args.seed)?;
    let lp = solve_zero_sum(&u)?;
    let diff = (run.solution.value - lp.value).abs();
    let support = |s: &MixedStrategy<f64>| s.probs().iter().filter(|&&p| p > 0.0).count();
    println!("do_value {:.12}", run.solution.value);
    println!("lp_value {:.12}", lp.value);
    println!("difference {diff:.3e}");
    println!("restricted_size {} {}", run.rows.len(), run.cols.len());
    println!(
        "support_size {} {}",
        support(&run.solution.sigma_g),
        support(&run.solution.sigma_d)
    );
    println!("iterations {}", run.iterations());
    Ok(if diff <= args.epsilon { 0 } else { 2 })
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    if args.samples == 0 {
        bail!("--samples must be positive");
    }
    let manifest_path = args.run_dir.join(run_dir::MANIFEST);
    let manifest: RunManifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .with_context(|| format!("cannot read {}", manifest_path.display()))?,
    )
    .with_context(|| format!("malformed {}", manifest_path.display()))?;
    let report = match manifest.config.precision {
        Precision::F64 => eval::<f64>(&args, &manifest.dataset)?,
        Precision::F32 => eval::<f32>(&args, &manifest.dataset)?,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn eval<T: Scalar>(args: &EvalArgs, dataset: &GaussianMixtureConfig) -> Result<CoverageReport> {
    let run = run_dir::load_run::<T>(&args.run_dir)
        .with_context(|| format!("cannot load run {}", args.run_dir.display()))?;
    let (xs, report) = coverage(&run.generators, &run.sigma_g, dataset, args.samples, args.seed)?;
    let path = args.run_dir.join("eval-samples.csv");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    write_samples_csv(&mut w, xs.view(), None)?;
    w.flush()?;
    Ok(report)
}
