//! Scenario presets, Monte-Carlo orchestration and CSV/text output.
//!
//! Every run draws from its own ChaCha stream keyed by `(seed, run_id)`, and
//! results are merged in run order, so outputs do not depend on the number
//! of worker threads.

use std::env;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{sample_cir, ChannelImpulseResponse, ChannelProfile, CirculantChannel};
use crate::error::{Error, Result};
use crate::mi::{mi_split_report, table1_continuation, DeepSplitTable, MiSplitReport, Snr, SplitMode};
use crate::plan::{PolarityPath, SlicePlan};
use crate::spectral::unnormalized_freq_response;
use crate::txrx::{
    capacity_bits, evm, modulate, propagate, random_bits, receive, symbol_errors, transmit, Scheme,
};

/// Environment variable naming the parent directory for default outputs.
pub const OUTPUT_ENV: &str = "PHYSLICE_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// One realization, depth 3: per-slice MI and decode cost.
    Fig4,
    /// First split only; cdf of both children against half the total.
    Fig7,
    /// Split down to unit slices; cdf of the last split's children.
    Fig8,
    /// Short channel, full chain, per-level MI balance.
    Fig9,
    /// Deep continuation of the depth-3 positive slice in both modes.
    Table1,
    /// Transmit, propagate and receive; per-slice EVM.
    Loopback,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Fig4,
        Scenario::Fig7,
        Scenario::Fig8,
        Scenario::Fig9,
        Scenario::Table1,
        Scenario::Loopback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig4 => "fig4",
            Scenario::Fig7 => "fig7",
            Scenario::Fig8 => "fig8",
            Scenario::Fig9 => "fig9",
            Scenario::Table1 => "table1",
            Scenario::Loopback => "loopback",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_fft: usize,
    pub delta_f_hz: f64,
    /// Built-in profile name (`etu`, `epa`, `flat`) or path to a profile file.
    pub profile: String,
    /// `inf` disables noise.
    pub snr_db: f64,
    pub num_runs: usize,
    /// `None` picks the scenario's depth (full chain for fig8/fig9).
    pub depth: Option<usize>,
    /// `None` uses the channel length.
    pub cp_length: Option<usize>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub mode: SplitMode,
    /// 0 lets the thread pool decide.
    pub workers: usize,
    /// Loopback only: slice transmitted with zero symbols.
    pub muted_slice: Option<PolarityPath>,
}

impl ExperimentConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n_fft: 2048,
            delta_f_hz: 15_000.0,
            profile: "etu".into(),
            snr_db: 10.0,
            num_runs: 1,
            depth: None,
            cp_length: None,
            seed: 1,
            output_dir: None,
            mode: SplitMode::ExactFold,
            workers: 0,
            muted_slice: None,
        };
        match scenario {
            Scenario::Fig4 | Scenario::Table1 => base,
            Scenario::Fig7 | Scenario::Fig8 => Self {
                num_runs: 500,
                ..base
            },
            Scenario::Fig9 => Self {
                n_fft: 128,
                delta_f_hz: 240_000.0,
                profile: "epa".into(),
                num_runs: 50,
                ..base
            },
            Scenario::Loopback => Self {
                snr_db: 30.0,
                num_runs: 20,
                ..base
            },
        }
    }

    /// Preset for the scenario, then config-file pairs, then overrides.
    ///
    /// The scenario comes from `scenario` if given, else from a `scenario`
    /// key in the file pairs.
    pub fn resolve(
        scenario: Option<&str>,
        file_pairs: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let from_file = file_pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| v.as_str());
        let name = scenario
            .or(from_file)
            .ok_or_else(|| Error::Config("no scenario given".into()))?;
        let mut cfg = Self::preset(name.parse()?);
        for (k, v) in file_pairs.iter().chain(overrides) {
            if k != "scenario" {
                cfg.apply(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("`{key}`: cannot parse `{value}` as {what}"));
        let auto = value.eq_ignore_ascii_case("auto");
        match key {
            "n_fft" => self.n_fft = value.parse().map_err(|_| bad("an integer"))?,
            "delta_f" | "delta_f_hz" => self.delta_f_hz = value.parse().map_err(|_| bad("a number"))?,
            "profile" => self.profile = value.to_string(),
            "snr_db" => self.snr_db = value.parse().map_err(|_| bad("a number"))?,
            "runs" | "num_runs" => self.num_runs = value.parse().map_err(|_| bad("an integer"))?,
            "depth" => {
                self.depth = if auto {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("an integer"))?)
                }
            }
            "cp" | "cp_length" => {
                self.cp_length = if auto {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("an integer"))?)
                }
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("an integer"))?,
            "out" | "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "mode" => self.mode = value.parse()?,
            "workers" => self.workers = value.parse().map_err(|_| bad("an integer"))?,
            "mute_slice" => {
                self.muted_slice = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(PolarityPath::parse(value)?)
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Settings as `key = value` lines, readable by [`parse_config_text`].
    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |v| v.to_string());
        let mut out = String::new();
        let _ = writeln!(out, "scenario = {}", self.scenario);
        let _ = writeln!(out, "n_fft = {}", self.n_fft);
        let _ = writeln!(out, "delta_f_hz = {}", self.delta_f_hz);
        let _ = writeln!(out, "profile = {}", self.profile);
        let _ = writeln!(out, "snr_db = {}", self.snr_db);
        let _ = writeln!(out, "runs = {}", self.num_runs);
        let _ = writeln!(out, "depth = {}", opt(self.depth));
        let _ = writeln!(out, "cp = {}", opt(self.cp_length));
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "mode = {}", self.mode);
        if let Some(p) = &self.muted_slice {
            let _ = writeln!(out, "mute_slice = {p}");
        }
        out
    }

    /// Checks the configuration and derives the sampling grid, channel
    /// length and slice plan.
    pub fn validate(&self) -> Result<Derived> {
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            return Err(Error::Config(format!("n_fft = {} must be a power of two >= 2", self.n_fft)));
        }
        if !(self.delta_f_hz > 0.0 && self.delta_f_hz.is_finite()) {
            return Err(Error::Config(format!("delta_f = {} must be positive", self.delta_f_hz)));
        }
        if self.num_runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let snr = Snr::from_db(self.snr_db)?;
        let profile = match ChannelProfile::builtin(&self.profile) {
            Some(p) => p,
            None => ChannelProfile::from_file(Path::new(&self.profile))?,
        };
        let sample_period_ns = 1e9 / (self.n_fft as f64 * self.delta_f_hz);
        let channel_length = profile.channel_length(sample_period_ns);
        if channel_length > self.n_fft {
            return Err(Error::TapsTooLong {
                taps: channel_length,
                max: self.n_fft,
            });
        }
        let log_n = self.n_fft.trailing_zeros() as usize;
        let depth = self.depth.unwrap_or(match self.scenario {
            Scenario::Fig7 => 1,
            Scenario::Fig8 | Scenario::Fig9 => log_n,
            Scenario::Fig4 | Scenario::Table1 | Scenario::Loopback => 3.min(log_n),
        });
        if self.scenario == Scenario::Table1 && depth >= log_n {
            return Err(Error::Config(format!(
                "table1 needs depth < log2(n_fft) = {log_n}, got {depth}"
            )));
        }
        let cp_length = self.cp_length.unwrap_or(channel_length);
        let plan = SlicePlan::build(self.n_fft, depth, cp_length, Some(channel_length))?;
        if let Some(p) = &self.muted_slice {
            if !plan.slices().iter().any(|d| &d.path == p) {
                return Err(Error::Config(format!("mute_slice `{p}` is not a slice of the plan")));
            }
        }
        Ok(Derived {
            profile,
            sample_period_ns,
            channel_length,
            plan,
            snr,
        })
    }

    pub fn output_dir_or_default(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("physlice-out"))
                .join(self.scenario.name())
        })
    }
}

/// Flat `key = value` text; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn load_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

/// Quantities fixed by a validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub profile: ChannelProfile,
    pub sample_period_ns: f64,
    pub channel_length: usize,
    pub plan: SlicePlan,
    pub snr: Snr,
}

impl Derived {
    /// Size of the largest slice whose split produces children shorter than
    /// the channel, if the chain reaches one.
    pub fn first_non_uniform_parent(&self) -> Option<usize> {
        let n = self.plan.frame_size();
        (1..=self.plan.depth())
            .map(|level| n >> (level - 1))
            .find(|parent| parent / 2 < self.channel_length)
    }
}

/// Sorted samples with the step cdf `F(x) = #{s <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("cdf sample is NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalCdf { sorted })
}

impl EmpiricalCdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Evaluation grid: the order statistics.
    pub fn grid(&self) -> &[f64] {
        &self.sorted
    }

    /// `k / n` at the k-th order statistic.
    pub fn values(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (1..=self.len()).map(|k| k as f64 / n).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }

    /// Smallest sample with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.len() - 1]
    }

    fn write_csv_rows(&self, curve: &str, out: &mut String) {
        for (x, f) in self.sorted.iter().zip(self.values()) {
            let _ = writeln!(out, "{curve},{x},{f}");
        }
    }
}

/// Largest relative horizontal distance between two cdfs, measured at the
/// quantiles `k / m` with `m` the larger sample count.
pub fn cdf_horizontal_gap(a: &EmpiricalCdf, reference: &EmpiricalCdf) -> f64 {
    let m = a.len().max(reference.len());
    (1..=m)
        .map(|k| {
            let p = k as f64 / m as f64;
            let (x, r) = (a.quantile(p), reference.quantile(p));
            if r == 0.0 {
                (x - r).abs()
            } else {
                ((x - r) / r).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn run_rng(seed: u64, run_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub cir: ChannelImpulseResponse,
    pub report: MiSplitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceLink {
    pub path: PolarityPath,
    pub evm: f64,
    /// `None` for a muted slice.
    pub symbol_errors: Option<usize>,
    /// Mean `|H(l) x_hat|^2` over the slice's bins, i.e. before equalization.
    pub rx_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopbackRecord {
    pub run_id: usize,
    pub slices: Vec<SliceLink>,
    pub erasures: usize,
}

/// Per-level averages over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStat {
    pub level: usize,
    pub child_size: usize,
    pub mean_positive: f64,
    pub mean_negative: f64,
    /// `|mean+ - mean-| / ((mean+ + mean-) / 2)`.
    pub relative_gap: f64,
    pub non_uniform: bool,
    pub max_relative_residual: f64,
}

pub fn level_statistics(runs: &[RunRecord]) -> Vec<LevelStat> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let count = runs.len() as f64;
    first
        .report
        .levels
        .iter()
        .enumerate()
        .map(|(i, l0)| {
            let mean_positive = runs.iter().map(|r| r.report.levels[i].positive.mi_bits).sum::<f64>() / count;
            let mean_negative = runs.iter().map(|r| r.report.levels[i].negative.mi_bits).sum::<f64>() / count;
            let mid = (mean_positive + mean_negative) / 2.0;
            LevelStat {
                level: l0.level,
                child_size: l0.positive.size,
                mean_positive,
                mean_negative,
                relative_gap: if mid == 0.0 {
                    0.0
                } else {
                    (mean_positive - mean_negative).abs() / mid
                },
                non_uniform: runs.iter().any(|r| r.report.level_is_non_uniform(&r.report.levels[i])),
                max_relative_residual: runs
                    .iter()
                    .map(|r| r.report.levels[i].relative_residual())
                    .fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Everything a scenario produced, with file contents kept in memory.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub runs: Vec<RunRecord>,
    pub loopback: Vec<LoopbackRecord>,
    pub table: Option<DeepSplitTable>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn summary(&self) -> &str {
        self.file("summary.txt").unwrap_or("")
    }
}

/// Runs the scenario without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<Outcome> {
    let derived = config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut outcome = Outcome {
        config: config.clone(),
        derived,
        runs: Vec::new(),
        loopback: Vec::new(),
        table: None,
        files: Vec::new(),
    };
    let d = &outcome.derived;
    match config.scenario {
        Scenario::Loopback => {
            outcome.loopback = pool.install(|| {
                (0..config.num_runs)
                    .into_par_iter()
                    .map(|id| loopback_run(config, d, id))
                    .collect::<Result<Vec<_>>>()
            })?;
        }
        Scenario::Table1 => {
            let mut rng = run_rng(config.seed, 0);
            let cir = sample_cir(&d.profile, d.sample_period_ns, &mut rng)?;
            let root = CirculantChannel::build(&cir, d.plan.frame_size())?;
            outcome.table = Some(table1_continuation(&root, d.plan.depth(), d.snr)?);
            outcome.runs = vec![mi_run(config, d, 0)?];
        }
        _ => {
            outcome.runs = pool.install(|| {
                (0..config.num_runs)
                    .into_par_iter()
                    .map(|id| mi_run(config, d, id))
                    .collect::<Result<Vec<_>>>()
            })?;
        }
    }
    outcome.files = render_files(&outcome)?;
    Ok(outcome)
}

/// Output files written by a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub outcome: Outcome,
    pub output_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

/// Runs the scenario and writes its files into the output directory.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ScenarioReport> {
    let outcome = execute(config)?;
    let output_dir = config.output_dir_or_default();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(&output_dir).map_err(io_err(&output_dir))?;
    let mut written = Vec::with_capacity(outcome.files.len());
    for (name, contents) in &outcome.files {
        let path = output_dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(ScenarioReport {
        outcome,
        output_dir,
        written,
    })
}

/// Runs transmit, propagate and receive for every run of a loopback config.
pub fn loopback_demo(config: &ExperimentConfig) -> Result<Vec<LoopbackRecord>> {
    let config = ExperimentConfig {
        scenario: Scenario::Loopback,
        ..config.clone()
    };
    Ok(execute(&config)?.loopback)
}

fn mi_run(config: &ExperimentConfig, d: &Derived, run_id: usize) -> Result<RunRecord> {
    let mut rng = run_rng(config.seed, run_id);
    let cir = sample_cir(&d.profile, d.sample_period_ns, &mut rng)?;
    let report = mi_split_report(&cir, d.plan.frame_size(), d.plan.depth(), d.snr, config.mode)?;
    Ok(RunRecord {
        run_id,
        cir,
        report,
    })
}

fn loopback_run(config: &ExperimentConfig, d: &Derived, run_id: usize) -> Result<LoopbackRecord> {
    let plan = &d.plan;
    let scheme = Scheme::Qpsk;
    let mut rng = run_rng(config.seed, run_id);
    let cir = sample_cir(&d.profile, d.sample_period_ns, &mut rng)?;
    let bits = random_bits(capacity_bits(plan, scheme), &mut rng);
    let mut payload = modulate(&bits, plan, scheme)?;
    let muted = config
        .muted_slice
        .as_ref()
        .and_then(|p| plan.slices().iter().position(|s| &s.path == p));
    if let Some(i) = muted {
        payload.slice_mut(i).fill(Default::default());
    }
    let frame = transmit(&payload, plan)?;
    let y = propagate(&frame, &cir, d.snr, &mut rng)?;
    let rx = receive(&y, plan, &cir)?;
    let response = unnormalized_freq_response(cir.taps(), plan.frame_size())?;
    let slices = plan
        .slices()
        .iter()
        .enumerate()
        .map(|(i, desc)| {
            let (reference, estimate) = (payload.slice(i), rx.payload.slice(i));
            let rx_power = estimate
                .iter()
                .zip(desc.bins())
                .map(|(z, bin)| (z * response[bin]).norm_sqr())
                .sum::<f64>()
                / desc.size as f64;
            SliceLink {
                path: desc.path.clone(),
                evm: evm(reference, estimate),
                symbol_errors: (muted != Some(i)).then(|| symbol_errors(reference, estimate, scheme)),
                rx_power,
            }
        })
        .collect();
    Ok(LoopbackRecord {
        run_id,
        slices,
        erasures: rx.erasures.len(),
    })
}

fn render_files(o: &Outcome) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let plan = &o.derived.plan;
    if !o.runs.is_empty() {
        files.push(("runs.csv".to_string(), runs_csv(&o.runs, plan)));
        files.push(("mi_levels.csv".to_string(), mi_levels_csv(&o.runs)));
    }
    if matches!(o.config.scenario, Scenario::Fig7 | Scenario::Fig8) {
        files.push(("cdf.csv".to_string(), last_split_cdf_csv(&o.runs)?));
    }
    if let Some(table) = &o.table {
        files.push(("table1.csv".to_string(), table.to_csv()));
        files.push(("table1.txt".to_string(), table.render()));
    }
    if !o.loopback.is_empty() {
        files.push(("loopback.csv".to_string(), loopback_csv(&o.loopback)));
    }
    files.push(("plan.csv".to_string(), plan.to_csv()));
    files.push(("summary.txt".to_string(), summary_text(o)?));
    Ok(files)
}

fn runs_csv(runs: &[RunRecord], plan: &SlicePlan) -> String {
    let mut out = String::from("run_id,slice_path,slice_size,mi_bits,decode_ops\n");
    for r in runs {
        for (leaf, desc) in r.report.leaves().iter().zip(plan.slices()) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.run_id, leaf.path, leaf.size, leaf.mi_bits, desc.decode_ops
            );
        }
    }
    out
}

fn mi_levels_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("run_id,level,path,size,mode,mi_bits,parent_residual\n");
    for r in runs {
        let mut rows = String::new();
        r.report.write_csv_rows(&mut rows);
        for line in rows.lines() {
            let _ = writeln!(out, "{},{line}", r.run_id);
        }
    }
    out
}

/// MI of the last split's children and half of its parent, one value per run.
pub struct LastSplitCdfs {
    pub positive: EmpiricalCdf,
    pub negative: EmpiricalCdf,
    pub half_parent: EmpiricalCdf,
}

pub fn last_split_cdfs(runs: &[RunRecord]) -> Result<LastSplitCdfs> {
    let pick = |f: &dyn Fn(&crate::mi::LevelSplit) -> f64| -> Result<EmpiricalCdf> {
        let samples = runs
            .iter()
            .map(|r| {
                r.report
                    .levels
                    .last()
                    .map(f)
                    .ok_or_else(|| Error::Config("cdf needs depth >= 1".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        empirical_cdf(&samples)
    };
    Ok(LastSplitCdfs {
        positive: pick(&|l| l.positive.mi_bits)?,
        negative: pick(&|l| l.negative.mi_bits)?,
        half_parent: pick(&|l| l.parent.mi_bits / 2.0)?,
    })
}

fn last_split_cdf_csv(runs: &[RunRecord]) -> Result<String> {
    let cdfs = last_split_cdfs(runs)?;
    let mut out = String::from("curve,x,cdf\n");
    cdfs.positive.write_csv_rows("mi_pos", &mut out);
    cdfs.negative.write_csv_rows("mi_neg", &mut out);
    cdfs.half_parent.write_csv_rows("half_parent", &mut out);
    Ok(out)
}

fn loopback_csv(records: &[LoopbackRecord]) -> String {
    let mut out = String::from("run_id,slice_path,evm,symbol_errors\n");
    for r in records {
        for s in &r.slices {
            let errors = s.symbol_errors.map_or(String::new(), |e| e.to_string());
            let _ = writeln!(out, "{},{},{},{errors}", r.run_id, s.path, s.evm);
        }
    }
    out
}

fn summary_text(o: &Outcome) -> Result<String> {
    let d = &o.derived;
    let plan = &d.plan;
    let mut out = String::new();
    let _ = writeln!(out, "# {}", o.config.scenario);
    out.push_str(&o.config.to_text());
    let _ = writeln!(out);
    let _ = writeln!(out, "profile: {}", d.profile.name());
    let _ = writeln!(out, "sample period: {:.2} ns", d.sample_period_ns);
    let _ = writeln!(out, "channel length L: {}", d.channel_length);
    let _ = writeln!(out, "cyclic prefix: {}", plan.cp_length());
    let _ = writeln!(out, "depth K: {} (smallest slice {})", plan.depth(), plan.leaf_size());
    match d.first_non_uniform_parent() {
        Some(s) => {
            let _ = writeln!(out, "non-uniform splitting from slice size {s} downward");
        }
        None => {
            let _ = writeln!(out, "uniform splitting at every level");
        }
    }
    let _ = writeln!(out, "total decode ops: {}", plan.total_cost());
    let _ = writeln!(out);

    match o.config.scenario {
        Scenario::Fig4 => {
            if let Some(run) = o.runs.first() {
                let _ = writeln!(out, "{:<12}{:>8}{:>10}{:>12}{:>14}", "slice", "size", "offset", "decode ops", "MI bits");
                for (leaf, desc) in run.report.leaves().iter().zip(plan.slices()) {
                    let _ = writeln!(
                        out,
                        "{:<12}{:>8}{:>10}{:>12}{:>14.3}",
                        leaf.path.to_string(),
                        leaf.size,
                        desc.frame_offset,
                        desc.decode_ops,
                        leaf.mi_bits
                    );
                }
                let _ = writeln!(out, "total MI: {:.3} bits", run.report.total_mi_bits);
            }
        }
        Scenario::Fig7 | Scenario::Fig8 => {
            let imbalance: Vec<f64> = o
                .runs
                .iter()
                .filter_map(|r| r.report.levels.last().map(|l| l.imbalance()))
                .collect();
            let n = imbalance.len() as f64;
            let mean = imbalance.iter().sum::<f64>() / n;
            let within = imbalance.iter().filter(|v| **v < 0.01).count() as f64 / n;
            let cdfs = last_split_cdfs(&o.runs)?;
            let _ = writeln!(out, "runs: {}", o.runs.len());
            let _ = writeln!(out, "mean |MI+ - MI-| / MI parent (last split): {mean:.5}");
            let _ = writeln!(out, "runs with imbalance < 1%: {:.1}%", 100.0 * within);
            let _ = writeln!(
                out,
                "max horizontal gap to half-parent cdf: + {:.5}, - {:.5}",
                cdf_horizontal_gap(&cdfs.positive, &cdfs.half_parent),
                cdf_horizontal_gap(&cdfs.negative, &cdfs.half_parent)
            );
            write_residual(&mut out, &o.runs);
        }
        Scenario::Fig9 => {
            let _ = writeln!(
                out,
                "{:<7}{:>7}{:>12}{:>12}{:>10}{:>13}",
                "level", "size", "mean MI+", "mean MI-", "gap", "non-uniform"
            );
            for s in level_statistics(&o.runs) {
                let _ = writeln!(
                    out,
                    "{:<7}{:>7}{:>12.3}{:>12.3}{:>10.4}{:>13}",
                    s.level, s.child_size, s.mean_positive, s.mean_negative, s.relative_gap, s.non_uniform
                );
            }
            let diag: Vec<f64> = o.runs.iter().filter_map(|r| r.report.uniformity).collect();
            if !diag.is_empty() {
                let mean = diag.iter().sum::<f64>() / diag.len() as f64;
                let _ = writeln!(out, "mean first-split uniformity diagnostic: {mean:.4}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<12}{:>8}{:>12}", "slice", "size", "decode ops");
            for desc in plan.slices() {
                let _ = writeln!(out, "{:<12}{:>8}{:>12}", desc.path.to_string(), desc.size, desc.decode_ops);
            }
            write_residual(&mut out, &o.runs);
        }
        Scenario::Table1 => {
            if let Some(t) = &o.table {
                out.push_str(&t.render());
            }
        }
        Scenario::Loopback => {
            let _ = writeln!(out, "{:<12}{:>14}{:>16}{:>14}", "slice", "mean EVM", "symbol errors", "rx power");
            for (i, desc) in plan.slices().iter().enumerate() {
                let n = o.loopback.len() as f64;
                let mean_evm = o.loopback.iter().map(|r| r.slices[i].evm).sum::<f64>() / n;
                let errors = o
                    .loopback
                    .iter()
                    .map(|r| r.slices[i].symbol_errors)
                    .sum::<Option<usize>>()
                    .map_or("muted".to_string(), |e| e.to_string());
                let power = o.loopback.iter().map(|r| r.slices[i].rx_power).sum::<f64>() / n;
                let _ = writeln!(
                    out,
                    "{:<12}{:>14.3e}{:>16}{:>14.3e}",
                    desc.path.to_string(),
                    mean_evm,
                    errors,
                    power
                );
            }
            let noise = if d.snr.is_noiseless() { 0.0 } else { 1.0 / d.snr.linear() };
            let _ = writeln!(out, "noise floor: {noise:.3e}");
            let erasures: usize = o.loopback.iter().map(|r| r.erasures).sum();
            let _ = writeln!(out, "erased bins: {erasures}");
        }
    }
    Ok(out)
}

fn write_residual(out: &mut String, runs: &[RunRecord]) {
    let worst = runs
        .iter()
        .map(|r| r.report.max_relative_residual())
        .fold(0.0, f64::max);
    let _ = writeln!(out, "max relative conservation residual: {worst:.3e}");
}
