//! Seeded experiment sweeps, their tabular reports and the files written
//! from them.
//!
//! Every trial draws its factors from its own generator seeded with
//! `derive_seed(master, [key_of(kind), n, N, k, trial])` (see [`crate::seed`]),
//! so cells and trials may run in any order or concurrently and still give
//! identical rows. Rows are emitted in canonical order: grid values ascending,
//! then trial, then statistic.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_entries, DistKind, EntryDistribution};
use crate::error::{LabError, Result};
use crate::matprod::{
    haar_frame, log_wedge_norm, lyapunov_spectrum, pointwise_log_wedge, sup_pointwise_gap, Frame, ProductStream,
};
use crate::oracles::{self, OracleReport};
use crate::seed::{derive_seed, key_of, rng_from_seed};
use crate::stats::{
    deviation_profile, gaussian_partial_log_mean, ks_to_uniform, quantile_sorted, rescaled_measure,
    theoretical_partial_mean,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    KsSweep,
    GapSweep,
    Concentration,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::KsSweep => "ks-sweep",
            ExperimentKind::GapSweep => "gap-sweep",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::Verify => "verify",
        }
    }

    fn uses_k(self) -> bool {
        matches!(self, ExperimentKind::GapSweep | ExperimentKind::Concentration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Starting frame `U_0` for the frame recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameChoice {
    /// First `k` standard basis vectors.
    #[default]
    Canonical,
    /// A Haar frame drawn per trial from the trial's seed.
    Haar,
}

fn default_trials() -> usize {
    1
}
fn default_q_max() -> usize {
    500
}
fn default_oracle_trials() -> usize {
    100_000
}
fn default_dist() -> EntryDistribution {
    EntryDistribution::gaussian()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(rename = "N", default)]
    pub big_n: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default = "default_dist")]
    pub dist: EntryDistribution,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    /// Zip the `n` and `N` lists into cells instead of taking their product.
    #[serde(default)]
    pub paired: bool,
    /// Run laws outside the entry condition (control runs).
    #[serde(default)]
    pub allow_violation: bool,
    #[serde(default)]
    pub u0: FrameChoice,
    #[serde(default = "default_q_max")]
    pub q_max: usize,
    #[serde(default = "default_oracle_trials")]
    pub oracle_trials: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            n: Vec::new(),
            big_n: Vec::new(),
            k: Vec::new(),
            dist: default_dist(),
            trials: default_trials(),
            seed,
            paired: false,
            allow_violation: false,
            u0: FrameChoice::default(),
            q_max: default_q_max(),
            oracle_trials: default_oracle_trials(),
            out: None,
            format: OutputFormat::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment == ExperimentKind::Verify {
            if self.q_max < 5 {
                return Err(LabError::invalid("q_max", "must be >= 5"));
            }
            if self.oracle_trials < 10_000 {
                return Err(LabError::invalid("oracle_trials", "must be >= 10000"));
            }
            return Ok(());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(LabError::invalid("n", "need a nonempty grid of values >= 1"));
        }
        if self.big_n.is_empty() || self.big_n.contains(&0) {
            return Err(LabError::invalid("N", "need a nonempty grid of values >= 1"));
        }
        if self.trials == 0 {
            return Err(LabError::invalid("trials", "must be >= 1"));
        }
        if self.paired && self.n.len() != self.big_n.len() {
            return Err(LabError::invalid("N", "paired grids need as many N values as n values"));
        }
        if self.experiment.uses_k() {
            if self.k.is_empty() || self.k.contains(&0) {
                return Err(LabError::invalid("k", "need a nonempty grid of values >= 1"));
            }
            let min_n = *self.n.iter().min().expect("nonempty");
            if let Some(k) = self.k.iter().find(|k| **k > min_n) {
                return Err(LabError::invalid("k", format!("k = {k} exceeds n = {min_n}")));
            }
        }
        self.dist.require_condition(self.allow_violation)
    }

    /// `(n, N)` cells in canonical order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells: Vec<(usize, usize)> = if self.paired {
            self.n.iter().copied().zip(self.big_n.iter().copied()).collect()
        } else {
            self.n
                .iter()
                .flat_map(|&n| self.big_n.iter().map(move |&m| (n, m)))
                .collect()
        };
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    fn ks(&self) -> Vec<Option<usize>> {
        if self.experiment.uses_k() {
            let mut k = self.k.clone();
            k.sort_unstable();
            k.dedup();
            k.into_iter().map(Some).collect()
        } else {
            vec![None]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    pub dist: String,
    pub k: Option<usize>,
    pub trial: usize,
    pub stat: String,
    pub value: f64,
}

/// Levels `eps` at which aggregates report `P(value > eps)`.
pub const TAIL_LEVELS: [f64; 4] = [0.01, 0.02, 0.05, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    pub dist: String,
    pub k: Option<usize>,
    pub stat: String,
    /// Number of finite values; failed trials contribute NaN rows.
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
    pub mean: f64,
    #[serde(rename = "p_gt_0.01")]
    pub p_gt_001: f64,
    #[serde(rename = "p_gt_0.02")]
    pub p_gt_002: f64,
    #[serde(rename = "p_gt_0.05")]
    pub p_gt_005: f64,
    #[serde(rename = "p_gt_0.1")]
    pub p_gt_010: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    #[serde(default)]
    pub oracles: Vec<OracleReport>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    /// `false` if any oracle in a verify run failed.
    pub fn all_oracles_pass(&self) -> bool {
        self.oracles.iter().all(|o| o.pass)
    }
}

type GroupKey = (String, Option<usize>, Option<usize>, String, Option<usize>, String);

/// Per-(cell, statistic) summaries; a pure function of the rows.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut groups: Vec<(GroupKey, Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.experiment.clone(), r.n, r.big_n, r.dist.clone(), r.k, r.stat.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.value),
            None => groups.push((key, vec![r.value])),
        }
    }
    groups
        .into_iter()
        .map(|((experiment, n, big_n, dist, k, stat), values)| {
            let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            let count = v.len();
            let q = |p: f64| if count == 0 { f64::NAN } else { quantile_sorted(&v, p) };
            let tail = |e: f64| {
                if count == 0 {
                    f64::NAN
                } else {
                    v.iter().filter(|x| **x > e).count() as f64 / count as f64
                }
            };
            let (q25, q75) = (q(0.25), q(0.75));
            Aggregate {
                experiment,
                n,
                big_n,
                dist,
                k,
                stat,
                count,
                median: q(0.5),
                q25,
                q75,
                iqr: q75 - q25,
                mean: if count == 0 { f64::NAN } else { v.iter().sum::<f64>() / count as f64 },
                p_gt_001: tail(TAIL_LEVELS[0]),
                p_gt_002: tail(TAIL_LEVELS[1]),
                p_gt_005: tail(TAIL_LEVELS[2]),
                p_gt_010: tail(TAIL_LEVELS[3]),
            }
        })
        .collect()
}

/// Seed of one trial.
pub fn trial_seed(master: u64, kind: ExperimentKind, n: usize, big_n: usize, k: Option<usize>, trial: usize) -> u64 {
    derive_seed(
        master,
        &[key_of(kind.name()), n as u64, big_n as u64, k.map_or(0, |k| k as u64), trial as u64],
    )
}

/// Kolmogorov-Smirnov distance of the rescaled singular-value measure of one
/// product to the uniform law.
pub fn ks_trial(dist: EntryDistribution, n: usize, big_n: usize, seed: u64) -> Result<f64> {
    let mut stream = ProductStream::sampled(dist, n, big_n, seed)?;
    let spec = lyapunov_spectrum(&mut stream)?;
    Ok(ks_to_uniform(&rescaled_measure(&spec)))
}

fn start_frame(choice: FrameChoice, n: usize, k: usize, seed: u64) -> Result<Frame> {
    match choice {
        FrameChoice::Canonical => Frame::canonical(n, k),
        FrameChoice::Haar => haar_frame(n, k, &mut rng_from_seed(derive_seed(seed, &[key_of("u0")]))),
    }
}

/// `E log ||W U||_(k)` for one step: exact for Gaussian entries, otherwise a
/// Monte-Carlo estimate over canonical `U` from a seed derived from `seed`.
pub fn per_step_log_mean(dist: EntryDistribution, n: usize, k: usize, seed: u64) -> Result<f64> {
    if dist.kind() == DistKind::Gaussian {
        return gaussian_partial_log_mean(n, k);
    }
    const SAMPLES: usize = 4000;
    let mut rng = rng_from_seed(derive_seed(seed, &[key_of("center"), n as u64, k as u64]));
    let scale = 1.0 / (n as f64).sqrt();
    let mut total = 0.0;
    for _ in 0..SAMPLES {
        let w = sample_entries(&dist, n, k, &mut rng) * faer::Scale(scale);
        total += log_wedge_norm(w.as_ref(), k)?;
    }
    Ok(total / SAMPLES as f64)
}

struct Cell {
    n: usize,
    big_n: usize,
    k: Option<usize>,
    trial: usize,
}

type TrialStats = Vec<(String, f64)>;

fn trial_rows(cfg: &ExperimentConfig, cell: &Cell, center: Option<(f64, f64)>) -> Result<TrialStats> {
    let seed = trial_seed(cfg.seed, cfg.experiment, cell.n, cell.big_n, cell.k, cell.trial);
    let stream = ProductStream::sampled(cfg.dist, cell.n, cell.big_n, seed)?;
    match cfg.experiment {
        ExperimentKind::Spectrum | ExperimentKind::KsSweep => {
            let spec = lyapunov_spectrum(&mut stream.replay())?;
            let d = ks_to_uniform(&rescaled_measure(&spec));
            let mut out = Vec::new();
            if cfg.experiment == ExperimentKind::Spectrum {
                for (i, l) in spec.lambdas().iter().enumerate() {
                    out.push((format!("lambda_{}", i + 1), *l));
                }
            }
            out.push(("d_ks".into(), d));
            out.push(("max_deviation".into(), deviation_profile(&spec).max_deviation));
            Ok(out)
        }
        ExperimentKind::GapSweep => {
            let k = cell.k.expect("gap sweep has k");
            let u0 = start_frame(cfg.u0, cell.n, k, seed)?;
            let g = sup_pointwise_gap(&u0, &stream)?;
            Ok(vec![("gap".into(), g.gap), ("signed_gap".into(), g.signed)])
        }
        ExperimentKind::Concentration => {
            let k = cell.k.expect("concentration has k");
            let (exact, log_mean) = center.expect("center computed per cell");
            let u0 = start_frame(cfg.u0, cell.n, k, seed)?;
            let p = pointwise_log_wedge(&u0, &mut stream.replay())?;
            let n = cell.n as f64;
            Ok(vec![
                ("pointwise".into(), p),
                ("deviation".into(), (p - exact).abs() / n),
                ("deviation_log_mean_center".into(), (p - log_mean).abs() / n),
            ])
        }
        ExperimentKind::Verify => unreachable!("verify has no trials"),
    }
}

fn stat_names(cfg: &ExperimentConfig, n: usize) -> Vec<String> {
    match cfg.experiment {
        ExperimentKind::Spectrum => (1..=n)
            .map(|i| format!("lambda_{i}"))
            .chain(["d_ks".to_string(), "max_deviation".to_string()])
            .collect(),
        ExperimentKind::KsSweep => vec!["d_ks".into(), "max_deviation".into()],
        ExperimentKind::GapSweep => vec!["gap".into(), "signed_gap".into()],
        ExperimentKind::Concentration => {
            vec!["pointwise".into(), "deviation".into(), "deviation_log_mean_center".into()]
        }
        ExperimentKind::Verify => Vec::new(),
    }
}

/// Runs the experiment described by `cfg` and returns its report. Writes no
/// files; see [`write_report`].
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Verify {
        return run_verify(cfg);
    }
    let mut cells = Vec::new();
    for (n, big_n) in cfg.cells() {
        for k in cfg.ks() {
            for trial in 0..cfg.trials {
                cells.push(Cell { n, big_n, k, trial });
            }
        }
    }
    let mut centers = Vec::new();
    if cfg.experiment == ExperimentKind::Concentration {
        for (n, _) in cfg.cells() {
            for k in cfg.ks().into_iter().flatten() {
                let exact = per_step_log_mean(cfg.dist, n, k, cfg.seed)?;
                centers.push(((n, k), (exact, theoretical_partial_mean(n, k)?)));
            }
        }
    }
    let center_of = |n: usize, k: Option<usize>| {
        k.and_then(|k| centers.iter().find(|(key, _)| *key == (n, k)).map(|(_, c)| *c))
    };

    let results: Vec<(usize, Result<TrialStats>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| (i, trial_rows(cfg, c, center_of(c.n, c.k))))
        .collect();

    let dist = cfg.dist.to_string();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (i, res) in results {
        let c = &cells[i];
        let values = match res {
            Ok(v) => v,
            Err(e @ LabError::RankDeficient { .. }) => {
                notes.push(format!("n={} N={} k={:?} trial={}: {e}", c.n, c.big_n, c.k, c.trial));
                stat_names(cfg, c.n).into_iter().map(|s| (s, f64::NAN)).collect()
            }
            Err(e) => return Err(e),
        };
        rows.extend(values.into_iter().map(|(stat, value)| Row {
            experiment: cfg.experiment.name().to_string(),
            n: Some(c.n),
            big_n: Some(c.big_n),
            dist: dist.clone(),
            k: c.k,
            trial: c.trial,
            stat,
            value,
        }));
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        aggregates: aggregate(&rows),
        rows,
        oracles: Vec::new(),
        notes,
    })
}

/// The standard oracle roster, each with its own derived seed.
pub fn verify_suite(seed: u64, q_max: usize, trials: usize) -> Result<Vec<OracleReport>> {
    let g = EntryDistribution::gaussian();
    let u = EntryDistribution::uniform();
    let sr = EntryDistribution::smoothed_rademacher(crate::distributions::DEFAULT_SMOOTHING_WIDTH)?;
    let mut idx = 0u64;
    let mut next_rng = || {
        idx += 1;
        rng_from_seed(derive_seed(seed, &[key_of("verify"), idx]))
    };
    let mut out = Vec::new();
    for (n, k, d) in [(3, 2, g), (4, 4, u), (10, 3, sr)] {
        out.push(oracles::check_expected_wedge(n, k, &d, trials, &mut next_rng())?);
    }
    {
        let mut rng = next_rng();
        let frame = haar_frame(6, 3, &mut rng)?;
        out.push(oracles::check_det_sq_expectation(&frame, &sr, trials, &mut rng)?);
        out.push(oracles::check_det_sq_expectation(&Frame::canonical(5, 2)?, &g, trials, &mut rng)?);
    }
    for d in [g, u] {
        out.push(oracles::check_inverse_moment(&Frame::canonical(5, 1)?, &d, 0.1, trials, false, &mut next_rng())?);
    }
    out.push(oracles::check_inverse_moment_sweep(16, &[1, 2, 4, 8], &g, 0.1, trials / 5, &mut next_rng())?);
    out.push(oracles::check_partial_log_inequalities(q_max)?);
    for d in [g, u] {
        for dim in [1, 2, 3] {
            let mut rng = next_rng();
            let p = haar_frame(10, dim, &mut rng)?;
            out.push(oracles::check_small_ball_projection(&p, &d, 10 * trials, &mut rng)?);
        }
    }
    for k in [2, 4] {
        let m = graded_matrix(20);
        out.push(oracles::check_haar_wedge_ratio(m.as_ref(), k, trials, &mut next_rng())?);
    }
    {
        let mut rng = next_rng();
        let e = Frame::canonical(10, 1)?;
        out.push(oracles::check_det_small_ball(&e, &e, &g, 1.0, trials, &mut rng)?);
        let a = haar_frame(10, 3, &mut rng)?;
        out.push(oracles::check_det_small_ball(&a, &a, &u, 1.0, trials, &mut rng)?);
        let zero = faer::Mat::<f64>::zeros(1, 1);
        out.push(oracles::check_det_shift_small_ball(zero.as_ref(), 10, &g, 1.0, trials, &mut rng)?);
        let x = oracles::gaussian_matrix(3, 3, &mut rng);
        out.push(oracles::check_det_shift_small_ball(x.as_ref(), 10, &sr, 1.0, trials, &mut rng)?);
    }
    Ok(out)
}

/// `diag(1, 10^{-1/2}, 10^{-1}, ...)`: an ill-conditioned fixed matrix for the
/// Haar ratio check (with `M = I` the ratio is identically one).
pub fn graded_matrix(n: usize) -> faer::Mat<f64> {
    faer::Mat::from_fn(n, n, |i, j| if i == j { 10f64.powf(-(i as f64) / 2.0) } else { 0.0 })
}

fn run_verify(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let reports = verify_suite(cfg.seed, cfg.q_max, cfg.oracle_trials)?;
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| Row {
            experiment: "verify".into(),
            n: r.params.get("n").and_then(|v| v.as_u64()).map(|v| v as usize),
            big_n: None,
            dist: r.params.get("dist").and_then(|v| v.as_str()).unwrap_or("").to_string(),
            k: r
                .params
                .get("k")
                .or_else(|| r.params.get("d"))
                .and_then(|v| v.as_u64())
                .map(|v| v as usize),
            trial: i,
            stat: format!("{}_pass", r.name),
            value: if r.pass { 1.0 } else { 0.0 },
        })
        .collect::<Vec<_>>();
    let notes = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("oracle {} failed: {}", r.name, r.notes.join("; ")))
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        aggregates: aggregate(&rows),
        rows,
        oracles: reports,
        notes,
    })
}

/// Paths written for a report whose main output is `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub main: PathBuf,
    pub aggregates: PathBuf,
    pub config: PathBuf,
    pub oracles: PathBuf,
}

impl OutputPaths {
    pub fn for_main(out: &Path) -> Self {
        let sibling = |suffix: &str| {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.with_file_name(format!("{stem}.{suffix}"))
        };
        Self {
            main: out.to_path_buf(),
            aggregates: sibling("aggregates.csv"),
            config: sibling("config.json"),
            oracles: sibling("oracles.json"),
        }
    }
}

fn rows_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["experiment", "n", "N", "dist", "k", "trial", "stat", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

fn aggregates_csv(aggs: &[Aggregate]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in aggs {
        w.serialize(a)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

/// Writes each `(path, bytes)` through a temporary file and a rename. If any
/// write fails, every file written so far is removed.
fn write_all_or_nothing(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut done: Vec<&Path> = Vec::new();
    for (path, bytes) in files {
        let tmp = path.with_extension("partial");
        let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        done.push(path);
    }
    Ok(())
}

/// Writes the report in the configured format. CSV output produces the rows
/// file, `<stem>.aggregates.csv` and `<stem>.config.json` (plus
/// `<stem>.oracles.json` for verify runs); JSON output writes the whole
/// report to one file.
pub fn write_report(report: &ExperimentReport, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let files = match format {
        OutputFormat::Json => vec![(out.to_path_buf(), serde_json::to_vec_pretty(report)?)],
        OutputFormat::Csv => {
            let paths = OutputPaths::for_main(out);
            let mut files = vec![
                (paths.main, rows_csv(&report.rows)?),
                (paths.aggregates, aggregates_csv(&report.aggregates)?),
                (paths.config, serde_json::to_vec_pretty(&report.config)?),
            ];
            if !report.oracles.is_empty() {
                files.push((paths.oracles, serde_json::to_vec_pretty(&report.oracles)?));
            }
            files
        }
    };
    write_all_or_nothing(&files)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

pub fn read_aggregates_csv(path: &Path) -> Result<Vec<Aggregate>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

/// Loads a report from a JSON report file or from a rows CSV (aggregates are
/// recomputed; the config is read from `<stem>.config.json` when present).
pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    if path.extension().is_some_and(|e| e == "json") {
        let bytes = fs::read(path)?;
        return Ok(serde_json::from_slice(&bytes)?);
    }
    let rows = read_rows_csv(path)?;
    let cfg_path = OutputPaths::for_main(path).config;
    let config = if cfg_path.exists() {
        serde_json::from_slice(&fs::read(&cfg_path)?)?
    } else {
        let kind = rows
            .first()
            .and_then(|r| serde_json::from_value(serde_json::Value::String(r.experiment.clone())).ok())
            .unwrap_or(ExperimentKind::KsSweep);
        ExperimentConfig::new(kind, 0)
    };
    Ok(ExperimentReport {
        config,
        aggregates: aggregate(&rows),
        rows,
        oracles: Vec::new(),
        notes: Vec::new(),
    })
}

fn resolve_stat(name: &str) -> String {
    match name {
        "dks" | "d_ks" | "ks" => "d_ks".into(),
        other => other.into(),
    }
}

/// Renders plot data for `which` as whitespace-separated columns with a `#`
/// header line.
///
/// * `median_<stat>_vs_N`: columns `N median q25 q75` (`dks` names `d_ks`),
/// * `loglog` / `loglog_<stat>`: columns `log_N log_median` (default `d_ks`).
pub fn plot_data(report: &ExperimentReport, which: &str) -> Result<String> {
    if report.rows.is_empty() {
        return Err(LabError::EmptyReport);
    }
    let (stat, loglog) = if which == "loglog" {
        ("d_ks".to_string(), true)
    } else if let Some(s) = which.strip_prefix("loglog_") {
        (resolve_stat(s), true)
    } else if let Some(s) = which.strip_prefix("median_").and_then(|s| s.strip_suffix("_vs_N")) {
        (resolve_stat(s), false)
    } else {
        return Err(LabError::UnknownStatistic(which.to_string()));
    };
    let mut aggs: Vec<&Aggregate> = report.aggregates.iter().filter(|a| a.stat == stat).collect();
    if aggs.is_empty() {
        return Err(LabError::UnknownStatistic(which.to_string()));
    }
    aggs.sort_by_key(|a| (a.big_n, a.n, a.k));
    let keys: Vec<_> = aggs.iter().map(|a| a.big_n).collect();
    if keys.windows(2).any(|w| w[0] == w[1]) {
        return Err(LabError::invalid(
            "stat",
            format!("`{which}` is ambiguous: several cells share the same N"),
        ));
    }
    let mut s = String::new();
    if loglog {
        s.push_str("# log_N log_median\n");
        for a in aggs {
            let n = a.big_n.unwrap_or(0) as f64;
            writeln!(s, "{} {}", n.ln(), a.median.ln()).expect("string write");
        }
    } else {
        s.push_str("# N median q25 q75\n");
        for a in aggs {
            writeln!(s, "{} {} {} {}", a.big_n.unwrap_or(0), a.median, a.q25, a.q75).expect("string write");
        }
    }
    Ok(s)
}

/// [`plot_data`] written to `out`; no file is created on error.
pub fn emit_plot_data(report: &ExperimentReport, which: &str, out: &Path) -> Result<()> {
    let text = plot_data(report, which)?;
    write_all_or_nothing(&[(out.to_path_buf(), text.into_bytes())])
}
