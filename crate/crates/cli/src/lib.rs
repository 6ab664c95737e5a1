//! The `nara` command line: `train`, `generate`, `sweep` and `check`.
//!
//! Exit codes: 0 success, 1 failed check or runtime failure, 2 usage,
//! configuration or input error.

use clap::{Parser, Subcommand, ValueEnum};
use nara_core::ar::Sequence;
use nara_core::bundle::ModelBundle;
use nara_core::checks::{run_grad_suite, worst, CheckResult, GRAD_OPS};
use nara_core::config::{RunConfig, SEED_ENV};
use nara_core::engine::{generate_nara, generate_pure_ar, GenerationConfig, GenerationTrace};
use nara_core::sweep::{parse_grid, run_sweep, sweep_cases, to_csv, to_svg};
use nara_core::theory::run_theory_suite;
use nara_core::trainer::train;
use nara_core::{checkpoint, NaraError};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
    #[error(transparent)]
    Core(#[from] NaraError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::CheckFailed(_) | CliError::Io(_) => EXIT_FAILURE,
            CliError::Core(e) => match e {
                NaraError::Diverged(_) | NaraError::Io(_) => EXIT_FAILURE,
                _ => EXIT_USAGE,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "nara", version, about = "Confidence-gated approximate AR generation for 1-D series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckWhat {
    Grad,
    Theory,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the AR model, prior predictor and confidence predictor.
    Train {
        /// key = value config file; defaults are used when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// checkpoint to write
        #[arg(long)]
        out: PathBuf,
        /// per-epoch CSV log [default: <out>.epochs.csv]
        #[arg(long)]
        log: Option<PathBuf>,
        /// overrides both the config file and NARA_SEED
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Continue a context file with H generated values, one per line.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// one value per line, in data units
        #[arg(long)]
        context_file: PathBuf,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// plain sequential sampling instead of chunked drafting
        #[arg(long)]
        pure_ar: bool,
    },
    /// Evaluate acceptance, error and work over a grid of thresholds.
    Sweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "0.0:1.0:0.1")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// horizon [default: H from the checkpoint's config]
        #[arg(long)]
        horizon: Option<usize>,
        /// generation seed [default: seed from the checkpoint's config]
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the gradient and/or theory verification suites.
    Check {
        #[arg(long, value_enum, default_value_t = CheckWhat::All)]
        what: CheckWhat,
        /// seeds per gradient check
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// corrupt the analytic gradient of the named op (exercises the failure path)
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(cli.command, env_seed.as_deref(), out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Train { config, out: ckpt, log, seed } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            cfg.override_seed(env_seed)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let log = log.unwrap_or_else(|| with_suffix(&ckpt, ".epochs.csv"));
            cmd_train(&cfg, &ckpt, &log, err)
        }
        Command::Generate {
            ckpt,
            epsilon,
            context_file,
            horizon,
            seed,
            pure_ar,
        } => {
            let bundle = checkpoint::load(&ckpt)?;
            let context = read_context(&context_file)?;
            let values = cmd_generate(&bundle, &context, epsilon, horizon, seed, pure_ar, err)?;
            for v in values {
                writeln!(out, "{v}")?;
            }
            Ok(())
        }
        Command::Sweep {
            ckpt,
            grid,
            out: csv,
            plot,
            horizon,
            seed,
        } => {
            let bundle = checkpoint::load(&ckpt)?;
            let grid = parse_grid(&grid).map_err(|e| CliError::Usage(e.to_string()))?;
            cmd_sweep(&bundle, &grid, horizon, seed, &csv, plot.as_deref(), err)
        }
        Command::Check {
            what,
            seeds,
            seed,
            inject_fault,
        } => {
            if let Some(op) = &inject_fault {
                if !GRAD_OPS.contains(&op.as_str()) {
                    return Err(CliError::Usage(format!("unknown op {op:?}; known: {}", GRAD_OPS.join(", "))));
                }
            }
            cmd_check(what, seeds, seed, inject_fault.as_deref(), out)
        }
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_train(cfg: &RunConfig, ckpt: &Path, log: &Path, err: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    let data = cfg.dataset()?;
    let mut bundle = cfg.init_bundle()?;
    writeln!(
        err,
        "training: {} train / {} validation sequences, {} epochs",
        data.train.len(),
        data.validation.len(),
        cfg.training.epochs
    )?;
    let log_data = train(&mut bundle, &data, &cfg.training_config())?;
    for r in &log_data.epochs {
        writeln!(err, "{}", r.csv_row())?;
    }
    std::fs::write(log, log_data.to_csv())?;
    checkpoint::save(&bundle, ckpt)?;
    writeln!(err, "wrote {} and {}", ckpt.display(), log.display())?;
    Ok(())
}

/// One value per line; blank lines and `#` comments are skipped.
pub fn read_context(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read context file {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| CliError::Usage(format!("context file line {}: not a number: {t:?}", n + 1)))?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("context file line {}: non-finite value", n + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Usage("context file holds no values".into()));
    }
    Ok(values)
}

fn summary(t: &GenerationTrace) -> String {
    format!(
        "generated {} values: {} sequential rounds, {} draft passes, {} accepted, {} resampled ({:.1}% accepted), {:.3} ms",
        t.len(),
        t.sequential_rounds,
        t.draft_passes,
        t.accepted_total,
        t.resampled_total,
        t.acceptance_pct(),
        t.wall_time.as_secs_f64() * 1e3
    )
}

/// Generates in model units and returns values in data units.
pub fn cmd_generate(
    bundle: &ModelBundle,
    context: &[f64],
    epsilon: f64,
    horizon: usize,
    seed: u64,
    pure_ar: bool,
    err: &mut dyn Write,
) -> CliResult<Vec<f64>> {
    if !bundle.trained.ar {
        return Err(NaraError::Untrained("AR model").into());
    }
    let std = bundle.standardizer;
    let ctx = Sequence::new(std.forward_all(context))?;
    let trace = if pure_ar {
        generate_pure_ar(&bundle.ar, &ctx, horizon, seed)?
    } else {
        let cfg = GenerationConfig::new(epsilon, horizon, seed).map_err(|e| CliError::Usage(e.to_string()))?;
        generate_nara(bundle, &ctx, &cfg)?
    };
    writeln!(err, "{}", summary(&trace))?;
    Ok(std.inverse_all(&trace.generated))
}

/// The run configuration a checkpoint was trained with.
pub fn echoed_config(bundle: &ModelBundle) -> CliResult<RunConfig> {
    if bundle.config_echo.is_empty() {
        return Err(CliError::Usage("checkpoint carries no training config".into()));
    }
    let text: String = bundle.config_echo.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    Ok(RunConfig::parse_text(&text)?)
}

pub fn cmd_sweep(
    bundle: &ModelBundle,
    grid: &[f64],
    horizon: Option<usize>,
    seed: Option<u64>,
    csv: &Path,
    plot: Option<&Path>,
    err: &mut dyn Write,
) -> CliResult<()> {
    if !bundle.trained.confidence {
        return Err(NaraError::Untrained("confidence predictor").into());
    }
    let cfg = echoed_config(bundle)?;
    let horizon = horizon.unwrap_or(cfg.horizon);
    let seed = seed.unwrap_or(cfg.seed);
    let data = cfg.dataset()?;
    let cases = sweep_cases(&data, bundle.context_len(), horizon)?;
    let rows = run_sweep(bundle, &cases, grid, seed)?;
    std::fs::write(csv, to_csv(&rows))?;
    writeln!(err, "wrote {} rows over {} contexts to {}", rows.len(), cases.len(), csv.display())?;
    if let Some(p) = plot {
        // plotting is best effort
        if let Err(e) = std::fs::write(p, to_svg(&rows)) {
            writeln!(err, "warning: could not write plot {}: {e}", p.display())?;
        }
    }
    Ok(())
}

pub fn cmd_check(what: CheckWhat, seeds: u64, seed: u64, fault: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let mut results: Vec<CheckResult> = Vec::new();
    if matches!(what, CheckWhat::Grad | CheckWhat::All) {
        writeln!(out, "gradient suite ({seeds} seeds)")?;
        let r = run_grad_suite(seeds, fault)?;
        for c in &r {
            writeln!(out, "  {c}")?;
        }
        results.extend(r);
    }
    if matches!(what, CheckWhat::Theory | CheckWhat::All) {
        writeln!(out, "theory suite")?;
        let r = run_theory_suite(seed)?;
        for c in &r {
            writeln!(out, "  {c}")?;
        }
        results.extend(r);
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        writeln!(out, "all {} checks passed", results.len())?;
        return Ok(());
    }
    let w = worst(&results).expect("non-empty results");
    Err(CliError::CheckFailed(format!(
        "{failed} of {} checks failed; worst: {} (max residual {:.3e}, tolerance {:.0e})",
        results.len(),
        w.name,
        w.max_residual,
        w.tolerance
    )))
}
