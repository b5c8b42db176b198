//! `lyapunov-lab`: run seeded experiment sweeps and write tables and plot data.
//!
//! Exit status: 0 on success, 1 on a usage, configuration or I/O error, 2 when
//! `verify` completes but at least one oracle fails.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lyapunov_lab::experiment::{
    emit_plot_data, load_report, run, write_report, ExperimentConfig, ExperimentKind, ExperimentReport,
    FrameChoice, OutputFormat,
};
use lyapunov_lab::{EntryDistribution, LabError};

#[derive(Parser, Debug)]
#[command(name = "lyapunov-lab", version, about = "Lyapunov spectra and singular-value experiments for random matrix products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full Lyapunov spectrum, d_KS and centered deviation per trial.
    Spectrum(RunArgs),
    /// d_KS of the rescaled singular values over a grid of (n, N).
    KsSweep(RunArgs),
    /// Supremum-versus-pointwise gap over a grid of (n, N, k).
    GapSweep(RunArgs),
    /// Deviation of (1/N) log ||X U0||_(k) from its N-independent center.
    Concentration(RunArgs),
    /// Run the oracle suite; exits with status 2 if any oracle fails.
    Verify(RunArgs),
    /// Project a saved report onto plot-ready columns.
    PlotData(PlotArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum U0 {
    Canonical,
    Haar,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file (TOML, or JSON if the extension is .json); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Numbers of factors, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    big_n: Option<Vec<usize>>,
    /// Frame dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Entry law: gaussian, uniform, laplace, smoothed-rademacher[:w], rademacher.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed (required here or in the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; without it rows are written to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Zip the n and N lists instead of taking their product.
    #[arg(long)]
    paired: bool,
    /// Allow entry laws without a bounded density (control runs).
    #[arg(long)]
    allow_violation: bool,
    /// Starting frame for gap-sweep and concentration.
    #[arg(long, value_enum)]
    u0: Option<U0>,
    /// Largest q for the exhaustive inequality check (verify).
    #[arg(long)]
    q_max: Option<usize>,
    /// Monte-Carlo trials per oracle (verify).
    #[arg(long)]
    oracle_trials: Option<usize>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Rows CSV or JSON report written by a previous run.
    #[arg(long)]
    input: PathBuf,
    /// median_dks_vs_N, loglog, median_<stat>_vs_N or loglog_<stat>.
    #[arg(long)]
    stat: String,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
    OracleFailed,
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidParameter { .. } | LabError::ConditionViolation(_) | LabError::UnknownStatistic(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
}

fn build_config(kind: ExperimentKind, a: RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let mut c = load_config(p)?;
            c.experiment = kind;
            c
        }
        None => {
            let seed = a
                .seed
                .ok_or_else(|| Failure::Usage("--seed is required (no default seed)".into()))?;
            ExperimentConfig::new(kind, seed)
        }
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.big_n {
        cfg.big_n = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(d) = a.dist {
        cfg.dist = d.parse::<EntryDistribution>()?;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.out {
        cfg.out = Some(v);
    }
    if let Some(f) = a.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    cfg.paired |= a.paired;
    cfg.allow_violation |= a.allow_violation;
    if let Some(u) = a.u0 {
        cfg.u0 = match u {
            U0::Canonical => FrameChoice::Canonical,
            U0::Haar => FrameChoice::Haar,
        };
    }
    if let Some(v) = a.q_max {
        cfg.q_max = v;
    }
    if let Some(v) = a.oracle_trials {
        cfg.oracle_trials = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(report: &ExperimentReport) -> Result<(), Failure> {
    match &report.config.out {
        Some(path) => {
            let written = write_report(report, path, report.config.format)?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let res = match report.config.format {
                OutputFormat::Json => serde_json::to_writer_pretty(&mut stdout, report).map_err(|e| e.to_string()),
                OutputFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut stdout);
                    report
                        .rows
                        .iter()
                        .try_for_each(|r| w.serialize(r))
                        .and_then(|_| w.flush().map_err(csv::Error::from))
                        .map_err(|e| e.to_string())
                }
            };
            res.map_err(Failure::Runtime)?;
            let _ = stdout.flush();
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (kind, args) = match cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::KsSweep(a) => (ExperimentKind::KsSweep, a),
        Command::GapSweep(a) => (ExperimentKind::GapSweep, a),
        Command::Concentration(a) => (ExperimentKind::Concentration, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::PlotData(p) => {
            let report = load_report(&p.input)?;
            emit_plot_data(&report, &p.stat, &p.out)?;
            eprintln!("wrote {}", p.out.display());
            return Ok(());
        }
    };
    let cfg = build_config(kind, args)?;
    let report = run(&cfg)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    emit(&report)?;
    if kind == ExperimentKind::Verify {
        for o in &report.oracles {
            eprintln!("{} {}", if o.pass { "PASS" } else { "FAIL" }, o.name);
        }
        if !report.all_oracles_pass() {
            return Err(Failure::OracleFailed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::OracleFailed) => {
            eprintln!("verify: at least one oracle failed");
            ExitCode::from(2)
        }
    }
}
