//! Reproducible experiments: TOML configuration, seeded parallel trials,
//! CSV rows, JSON summaries and log-log rate fits.
//!
//! Configuration schema (all keys optional except where a task needs them):
//!
//! ```toml
//! task = "mean"          # mean | regression | stream | hardness | audit
//! seed = 1
//! trials = 20
//! mode = "eff"           # mean/stream/audit: stat | eff; regression: critical | weak | inefficient
//! adversary = "none"     # none | shift | plant | response | gross
//! adversary_scale = 5.0  # δ for shift/plant, location for gross
//! timing = false
//! batches = 8            # stream only
//! degree = 8             # hardness only: low-degree truncation D
//! delta = 4.0            # hardness only: mixture separation (default 21α/η)
//! draws = 100000         # audit only: mechanism draws per dataset
//!
//! [grid]
//! n = [500, 1000]
//! d = [2]
//! eta = [0.0]
//! epsilon = [1.0]        # inf for the non-private estimator
//! beta = [0.05]
//! sigma2 = [1.0]
//! ```
//!
//! Output files are `results.csv` with columns
//! `task,n,d,eta,epsilon,beta,trial,seed,error,runtime_ms` and
//! `summary.json`; stream runs add `stream-<trial>.jsonl`. An empty `error`
//! field marks an infeasible trial.
//!
//! Dataset files: first line `dim,n` as two integers, then one sample per
//! line. Mean data rows are `x_1,…,x_d`; regression rows are
//! `x_1,…,x_d,y`. Either may carry a trailing 0/1 corruption-mask column.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesmean::{private_posterior_mean, run_stream, BatchMode, EpsilonSchedule, StreamRecord, StreamState};
use crate::bayesreg::{private_regression, regression_error_target, regression_radius, robust_posterior, RegMode};
use crate::error::{Error, Result};
use crate::hardness::{advantage, advantage_bound, gen_mixture, mean_distinguisher, Hypothesis, LdlrMode, LdlrQuery};
use crate::model::{
    corrupt, posterior_mean_regression, sample_mean_instance, sample_regression_instance, shrinkage, AdversarySpec,
    MeanDataset, PriorSpec, RegressionDataset,
};
use crate::numerics::{add, distance, Matrix, RngStream};
use crate::privacy::{field_difference, mean_score_field, dp_ratio_audit, MeanMode, RateFunction};
use crate::robustmean::{efficient_rate, effective_dim, C_EFF};

/// Experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mean,
    Regression,
    Stream,
    Hardness,
    Audit,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Mean => "mean",
            Task::Regression => "regression",
            Task::Stream => "stream",
            Task::Hardness => "hardness",
            Task::Audit => "audit",
        }
    }
}

/// Parameter grid; every combination is one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub eta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n: vec![1000], d: vec![2], eta: vec![0.0], epsilon: vec![2.0], beta: vec![0.05], sigma2: vec![1.0] }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub trials: usize,
    pub mode: Option<String>,
    pub adversary: String,
    pub adversary_scale: f64,
    pub timing: bool,
    pub batches: usize,
    pub degree: usize,
    pub delta: Option<f64>,
    pub draws: usize,
    pub grid: Grid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Mean,
            seed: 1,
            trials: 20,
            mode: None,
            adversary: "none".into(),
            adversary_scale: 5.0,
            timing: false,
            batches: 8,
            degree: 8,
            delta: None,
            draws: 100_000,
            grid: Grid::default(),
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Setting {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub sigma2: f64,
}

impl ExperimentConfig {
    /// Defaults suited to each task.
    pub fn for_task(task: Task) -> Self {
        let mut c = ExperimentConfig { task, ..Default::default() };
        match task {
            Task::Mean => {}
            Task::Regression => {
                c.grid.n = vec![2000];
                c.grid.sigma2 = vec![1.0 / 2000.0];
            }
            Task::Stream => {
                c.grid.n = vec![500];
                c.grid.epsilon = vec![4.0];
            }
            Task::Hardness => {
                c.grid.n = vec![400];
                c.grid.d = vec![20];
                c.grid.eta = vec![0.1];
            }
            Task::Audit => {
                c.grid.n = vec![500];
                c.trials = 10;
            }
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        let g = &self.grid;
        let empty = [g.n.is_empty(), g.d.is_empty(), g.eta.is_empty(), g.epsilon.is_empty(), g.beta.is_empty(), g.sigma2.is_empty()];
        if empty.iter().any(|&e| e) {
            return Err(Error::invalid("every grid axis needs at least one value"));
        }
        if g.n.contains(&0) || g.d.contains(&0) {
            return Err(Error::invalid("grid values n and d must be positive"));
        }
        if g.eta.iter().any(|&e| !(0.0..0.5).contains(&e)) {
            return Err(Error::invalid("grid η values must lie in [0, 1/2)"));
        }
        if g.epsilon.iter().chain(&g.sigma2).any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("grid ε and σ² values must be positive"));
        }
        if g.beta.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::invalid("grid β values must lie in (0, 1)"));
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::invalid("δ must be positive"));
        }
        if self.task == Task::Stream && self.batches == 0 {
            return Err(Error::invalid("stream runs need at least one batch"));
        }
        self.mean_mode()?;
        self.reg_mode()?;
        self.adversary_spec(2, 0.1)?;
        Ok(())
    }

    /// All grid points, `n` varying fastest.
    pub fn settings(&self) -> Vec<Setting> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &d in &g.d {
            for &eta in &g.eta {
                for &epsilon in &g.epsilon {
                    for &beta in &g.beta {
                        for &sigma2 in &g.sigma2 {
                            for &n in &g.n {
                                out.push(Setting { n, d, eta, epsilon, beta, sigma2 });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn mean_mode(&self) -> Result<MeanMode> {
        match (self.task, self.mode.as_deref()) {
            (Task::Regression, _) | (_, None) => Ok(MeanMode::Eff),
            (_, Some("eff")) => Ok(MeanMode::Eff),
            (_, Some("stat")) => Ok(MeanMode::Stat),
            (_, Some(m)) => Err(Error::invalid(format!("unknown mean mode {m:?}; expected stat or eff"))),
        }
    }

    fn reg_mode(&self) -> Result<Option<RegMode>> {
        if self.task != Task::Regression {
            return Ok(None);
        }
        match self.mode.as_deref() {
            None | Some("auto") => Ok(None),
            Some("critical") => Ok(Some(RegMode::Critical)),
            Some("weak") => Ok(Some(RegMode::Weak)),
            Some("inefficient") => Ok(Some(RegMode::Inefficient)),
            Some(m) => Err(Error::invalid(format!("unknown regression mode {m:?}"))),
        }
    }

    fn adversary_spec(&self, d: usize, eta: f64) -> Result<Option<AdversarySpec>> {
        let s = self.adversary_scale;
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        Ok(match self.adversary.as_str() {
            "none" => None,
            "shift" => Some(AdversarySpec::Shift { delta: s, direction: e1 }),
            "plant" => Some(AdversarySpec::MixturePlant { delta: s, direction: None }),
            "response" => Some(AdversarySpec::response_replace_for(eta)),
            "gross" => Some(AdversarySpec::Gross { location: s }),
            a => return Err(Error::invalid(format!("unknown adversary {a:?}"))),
        })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub task: Task,
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` for an infeasible trial.
    pub error: Option<f64>,
    pub runtime_ms: u64,
}

pub const CSV_HEADER: &str = "task,n,d,eta,epsilon,beta,trial,seed,error,runtime_ms";

impl TrialRow {
    pub fn csv_line(&self) -> String {
        let err = self.error.map(|e| e.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.task.name(),
            self.n,
            self.d,
            self.eta,
            self.epsilon,
            self.beta,
            self.trial,
            self.seed,
            err,
            self.runtime_ms
        )
    }
}

/// Error quantiles of one grid point against its reference rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
    pub theoretical: f64,
    pub ratio: f64,
    pub infeasible: usize,
    /// Extra task-specific numbers (advantage, audit outcome, …).
    pub extra: serde_json::Value,
}

/// Fitted `log(median error) = intercept + exponent·log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub exponent_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub points: usize,
}

/// A fit over the `n` axis at fixed other parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub d: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub fit: RateFit,
}

/// Summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub settings: Vec<SettingSummary>,
    pub fits: Vec<GroupFit>,
}

impl RateReport {
    pub fn infeasible(&self) -> usize {
        self.settings.iter().map(|s| s.infeasible).sum()
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<TrialRow>,
    pub report: RateReport,
    /// Per-trial stream records (stream task only).
    pub streams: Vec<Vec<StreamRecord>>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    /// Writes `results.csv`, `summary.json` and stream files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.csv())?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.report)? + "\n")?;
        for (t, recs) in self.streams.iter().enumerate() {
            let mut s = String::new();
            for r in recs {
                let _ = writeln!(s, "{}", r.to_json_line()?);
            }
            std::fs::write(dir.join(format!("stream-{t}.jsonl")), s)?;
        }
        Ok(())
    }
}

struct TrialResult {
    error: Option<f64>,
    extra: Option<TrialExtra>,
    stream: Vec<StreamRecord>,
}

enum TrialExtra {
    Verdicts(Hypothesis, Hypothesis),
    Audit { passed: bool, worst_z: f64 },
}

fn feasible(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_infeasible() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs every configuration of the grid; trials fan out in parallel with
/// stream id equal to the trial index and are aggregated in trial order.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut settings = Vec::new();
    let mut streams = Vec::new();
    for s in config.settings() {
        let results = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let start = Instant::now();
                let mut rng = RngStream::new(config.seed, t as u64);
                let r = run_trial(config, &s, t, &mut rng)?;
                let ms = if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
                Ok((r, ms))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut errors = Vec::new();
        let mut infeasible = 0;
        let mut verdicts = (Vec::new(), Vec::new());
        let mut audits = Vec::new();
        for (t, (r, ms)) in results.into_iter().enumerate() {
            rows.push(TrialRow {
                task: config.task,
                n: s.n,
                d: s.d,
                eta: s.eta,
                epsilon: s.epsilon,
                beta: s.beta,
                trial: t,
                seed: config.seed,
                error: r.error,
                runtime_ms: ms,
            });
            match r.error {
                Some(e) => errors.push(e),
                None => infeasible += 1,
            }
            match r.extra {
                Some(TrialExtra::Verdicts(a, b)) => {
                    verdicts.0.push(a);
                    verdicts.1.push(b);
                }
                Some(TrialExtra::Audit { passed, worst_z }) => audits.push((passed, worst_z)),
                None => {}
            }
            if config.task == Task::Stream {
                streams.push(r.stream);
            }
        }
        let extra = match config.task {
            Task::Hardness => {
                let delta = hardness_delta(config, &s);
                let bound = advantage_bound(&LdlrQuery {
                    n: s.n,
                    d: s.d,
                    degree: config.degree,
                    eta: s.eta,
                    mode: LdlrMode::Mean { delta },
                })
                .ok();
                let null_rate = verdicts.0.iter().filter(|&&v| v == Hypothesis::Null).count() as f64 / config.trials as f64;
                serde_json::json!({
                    "delta": delta,
                    "advantage": advantage(&verdicts.0, &verdicts.1),
                    "null_verdict_rate": null_rate,
                    "ldlr_bound": bound,
                })
            }
            Task::Audit => serde_json::json!({
                "ratio_audits_passed": audits.iter().filter(|a| a.0).count(),
                "worst_z": audits.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max),
            }),
            _ => serde_json::Value::Null,
        };
        let theoretical = reference_rate(config, &s);
        let (q50, q90, q95) = (quantile(&errors, 0.5), quantile(&errors, 0.9), quantile(&errors, 0.95));
        settings.push(SettingSummary {
            setting: s,
            q50,
            q90,
            q95,
            theoretical,
            ratio: q50 / theoretical,
            infeasible,
            extra,
        });
    }
    let fits = group_fits(&settings);
    Ok(RunOutput { rows, report: RateReport { config: config.clone(), settings, fits }, streams })
}

fn group_fits(settings: &[SettingSummary]) -> Vec<GroupFit> {
    let mut groups: Vec<(Setting, Vec<(usize, f64)>)> = Vec::new();
    for s in settings {
        let key = s.setting;
        let same = |g: &Setting| g.d == key.d && g.eta == key.eta && g.epsilon == key.epsilon && g.beta == key.beta && g.sigma2 == key.sigma2;
        match groups.iter_mut().find(|(g, _)| same(g)) {
            Some((_, pts)) => pts.push((key.n, s.q50)),
            None => groups.push((key, vec![(key.n, s.q50)])),
        }
    }
    groups
        .into_iter()
        .filter_map(|(g, pts)| {
            rate_fit(&pts).ok().map(|fit| GroupFit { d: g.d, eta: g.eta, epsilon: g.epsilon, beta: g.beta, sigma2: g.sigma2, fit })
        })
        .collect()
}

/// Nearest-rank quantile; `NaN` when empty.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[k]
}

/// OLS of `log(median error)` on `log n` over `(n, error)` pairs.
pub fn rate_fit(rows: &[(usize, f64)]) -> Result<RateFit> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::invalid("rate fit needs at least three distinct n"));
    }
    let mut pts = Vec::new();
    for &n in &ns {
        let errs: Vec<f64> = rows.iter().filter(|r| r.0 == n).map(|r| r.1).collect();
        let med = median(&errs);
        if !(med > 0.0 && med.is_finite()) {
            return Err(Error::invalid("rate fit needs positive finite median errors"));
        }
        pts.push(((n as f64).ln(), med.ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("degenerate design in rate fit"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let s2 = rss / (k - 2.0);
    let exponent_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / k + mx * mx / sxx)).sqrt();
    Ok(RateFit { exponent: slope, exponent_se, intercept, intercept_se, points: pts.len() })
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn hardness_delta(config: &ExperimentConfig, s: &Setting) -> f64 {
    if let Some(delta) = config.delta {
        return delta;
    }
    let alpha = C_EFF * efficient_rate(s.eta, s.d, s.n, s.beta);
    21.0 * alpha / s.eta
}

/// Reference rate printed next to the observed quantiles.
fn reference_rate(config: &ExperimentConfig, s: &Setting) -> f64 {
    let stat = (effective_dim(s.d, s.beta) / s.n as f64).sqrt();
    let private = |kind| {
        if s.epsilon.is_finite() {
            RateFunction::new(kind, s.d, s.n, s.beta).alpha_target(s.epsilon)
        } else {
            0.0
        }
    };
    match config.task {
        Task::Mean => stat + private(config.mean_mode().unwrap_or(MeanMode::Eff).rate_kind()),
        Task::Regression => {
            let kind = config.reg_mode().ok().flatten().unwrap_or(RegMode::Weak).rate_kind();
            stat * s.sigma2.sqrt().min(1.0) + regression_error_target(1.0, s.eta, s.d, s.n, s.beta).sqrt() + private(kind)
        }
        Task::Stream => {
            let k = config.batches;
            let total = s.n * k;
            let eps_k = EpsilonSchedule::new(s.epsilon, k).map(|e| e.epsilon_i(k)).unwrap_or(s.epsilon);
            (effective_dim(s.d, s.beta) / total as f64).sqrt()
                + RateFunction::new(config.mean_mode().unwrap_or(MeanMode::Eff).rate_kind(), s.d, s.n, s.beta).alpha_target(eps_k)
        }
        Task::Hardness | Task::Audit => 1.0,
    }
}

fn run_trial(config: &ExperimentConfig, s: &Setting, _trial: usize, rng: &mut RngStream) -> Result<TrialResult> {
    let plain = |error| TrialResult { error, extra: None, stream: Vec::new() };
    match config.task {
        Task::Mean => {
            let prior = PriorSpec::isotropic(s.d, s.sigma2)?;
            let (mu, clean) = sample_mean_instance(&prior, s.n, rng)?;
            let obs = match config.adversary_spec(s.d, s.eta)? {
                Some(a) => corrupt(&clean, &a, s.eta, rng)?.observed,
                None => clean,
            };
            let mode = config.mean_mode()?;
            let est = if s.epsilon.is_finite() {
                private_posterior_mean(&obs, &prior, s.epsilon, s.beta, mode, rng)
            } else {
                mode.estimator(s.beta).estimate(&obs, s.eta).and_then(|m| shrinkage(&prior, s.n)?.apply(&m))
            };
            Ok(plain(feasible(est.map(|e| distance(&e, &mu)))?))
        }
        Task::Regression => {
            let (_, clean) = sample_regression_instance(s.sigma2, s.n, s.d, rng)?;
            let target = posterior_mean_regression(&clean, s.sigma2)?;
            let obs = match config.adversary_spec(s.d, s.eta)? {
                Some(a) => corrupt(&clean, &a, s.eta, rng)?.observed,
                None => clean,
            };
            let mode = config.reg_mode()?;
            let est = if s.epsilon.is_finite() {
                let mode = mode.unwrap_or(match crate::bayesreg::regime(s.sigma2, s.n) {
                    crate::bayesreg::Regime::Weak => RegMode::Weak,
                    _ => RegMode::Critical,
                });
                private_regression(&obs, s.sigma2, s.epsilon, s.beta, mode, rng)
            } else {
                match mode {
                    Some(m) => m.estimate(&obs, s.sigma2, s.eta, s.beta).map(|e| e.w_hat),
                    None => robust_posterior(&obs, s.sigma2, s.eta, s.beta).map(|e| e.w_hat),
                }
            };
            Ok(plain(feasible(est.map(|w| distance(&w, &target)))?))
        }
        Task::Stream => {
            let prior = PriorSpec::isotropic(s.d, s.sigma2)?;
            let (mu, _) = sample_mean_instance(&prior, 1, rng)?;
            let batches: Vec<MeanDataset> = (0..config.batches)
                .map(|_| MeanDataset::new(Matrix::from_fn(s.n, s.d, |_, j| mu[j] + rng.standard_normal())))
                .collect::<Result<_>>()?;
            let schedule = EpsilonSchedule::new(s.epsilon, config.batches)?;
            let state = StreamState::new(s.d, s.n, schedule)?;
            let mode = if s.epsilon.is_finite() {
                BatchMode::Private { mode: config.mean_mode()?, beta: s.beta, r_ball: regression_radius(s.sigma2 + 1.0 / s.n as f64, s.d, s.beta) }
            } else {
                BatchMode::Exact
            };
            match run_stream(state, &batches, mode, rng) {
                Ok((_, recs)) => {
                    let err = recs.iter().map(|r| distance(&r.estimate, &mu)).fold(0.0, f64::max);
                    Ok(TrialResult { error: Some(err), extra: None, stream: recs })
                }
                Err(e) if e.is_infeasible() => Ok(plain(None)),
                Err(e) => Err(e),
            }
        }
        Task::Hardness => {
            let delta = hardness_delta(config, s);
            let alpha = C_EFF * efficient_rate(s.eta, s.d, s.n, s.beta);
            let est = config.mean_mode()?.estimator(s.beta);
            let null = gen_mixture(s.eta, delta, s.n, s.d, Hypothesis::Null, rng)?;
            let planted = gen_mixture(s.eta, delta, s.n, s.d, Hypothesis::Planted, rng)?;
            let v0 = mean_distinguisher(null.samples(), |x| est.estimate(x, s.eta), alpha);
            let v1 = mean_distinguisher(planted.samples(), |x| est.estimate(x, s.eta), alpha);
            if null.reveal_count() + planted.reveal_count() != 0 {
                return Err(Error::invalid("distinguisher accessed a hidden direction"));
            }
            let wrong = (v0 != Hypothesis::Null) as u8 + (v1 != Hypothesis::Planted) as u8;
            Ok(TrialResult { error: Some(wrong as f64 / 2.0), extra: Some(TrialExtra::Verdicts(v0, v1)), stream: Vec::new() })
        }
        Task::Audit => {
            let mode = config.mean_mode()?;
            let r_ball = 1.0;
            let mu = crate::numerics::scaled(&rng.unit_vector(s.d), 0.5 * r_ball);
            let a = MeanDataset::new(Matrix::from_fn(s.n, s.d, |_, j| mu[j] + rng.standard_normal()))?;
            let i = rng.index(s.n);
            let b = a.with_row(i, &add(&a.mean(), &rng.normal_vec(s.d)))?;
            let fa = mean_score_field(&a, s.epsilon, s.beta, r_ball, mode)?;
            let fb = mean_score_field(&b, s.epsilon, s.beta, r_ball, mode)?;
            let change = field_difference(&fa, &fb)?;
            let audit = dp_ratio_audit(&fa, &fb, s.epsilon, config.draws, rng)?;
            Ok(TrialResult {
                error: Some(change as f64),
                extra: Some(TrialExtra::Audit { passed: audit.passed, worst_z: audit.worst_z }),
                stream: Vec::new(),
            })
        }
    }
}

fn parse_header(line: Option<std::io::Result<String>>) -> Result<(usize, usize)> {
    let line = line.ok_or_else(|| Error::Parse("missing dim,n header".into()))??;
    let f: Vec<&str> = line.trim().split(',').collect();
    if f.len() != 2 {
        return Err(Error::Parse(format!("header must be `dim,n`, got {line:?}")));
    }
    let p = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("header field {s:?}: {e}")));
    Ok((p(f[0])?, p(f[1])?))
}

type ParsedRows = (usize, Vec<Vec<f64>>, Option<Vec<bool>>);

fn parse_rows(reader: impl BufRead, width: usize) -> Result<ParsedRows> {
    let mut lines = reader.lines();
    let (dim, n) = parse_header(lines.next())?;
    let want = dim + width;
    let mut rows = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut has_mask = None;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", k + 2))))
            .collect::<Result<Vec<f64>>>()?;
        let m = match vals.len() {
            l if l == want => false,
            l if l == want + 1 => true,
            l => return Err(Error::Parse(format!("line {}: expected {want} or {} fields, got {l}", k + 2, want + 1))),
        };
        if *has_mask.get_or_insert(m) != m {
            return Err(Error::Parse(format!("line {}: inconsistent mask column", k + 2)));
        }
        if m {
            let flag = vals[want];
            if flag != 0.0 && flag != 1.0 {
                return Err(Error::Parse(format!("line {}: mask must be 0 or 1", k + 2)));
            }
            mask.push(flag == 1.0);
        }
        rows.push(vals[..want].to_vec());
    }
    if rows.len() != n {
        return Err(Error::Parse(format!("header declares n = {n}, found {} rows", rows.len())));
    }
    Ok((dim, rows, has_mask.unwrap_or(false).then_some(mask)))
}

fn write_rows(mut w: impl Write, dim: usize, rows: impl Iterator<Item = Vec<f64>>, n: usize, mask: Option<&[bool]>) -> Result<()> {
    if let Some(m) = mask {
        if m.len() != n {
            return Err(Error::DimensionMismatch { context: "mask", expected: n, found: m.len() });
        }
    }
    writeln!(w, "{dim},{n}")?;
    for (i, r) in rows.enumerate() {
        let mut line = r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        if let Some(m) = mask {
            line.push_str(if m[i] { ",1" } else { ",0" });
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes mean data, optionally with a mask column.
pub fn write_mean_csv(w: impl Write, data: &MeanDataset, mask: Option<&[bool]>) -> Result<()> {
    write_rows(w, data.dim(), (0..data.n()).map(|i| data.sample(i).to_vec()), data.n(), mask)
}

pub fn read_mean_csv(r: impl BufRead) -> Result<(MeanDataset, Option<Vec<bool>>)> {
    let (_, rows, mask) = parse_rows(r, 0)?;
    Ok((MeanDataset::from_rows(&rows)?, mask))
}

/// Writes regression data as `x_1,…,x_d,y` rows.
pub fn write_regression_csv(w: impl Write, data: &RegressionDataset, mask: Option<&[bool]>) -> Result<()> {
    let rows = (0..data.n()).map(|i| {
        let mut r = data.covariate(i);
        r.push(data.y()[i]);
        r
    });
    write_rows(w, data.dim(), rows, data.n(), mask)
}

pub fn read_regression_csv(r: impl BufRead) -> Result<(RegressionDataset, Option<Vec<bool>>)> {
    let (dim, rows, mask) = parse_rows(r, 1)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("regression file has no rows".into()));
    }
    let x = Matrix::from_fn(dim, n, |j, i| rows[i][j]);
    let y = rows.iter().map(|r| r[dim]).collect();
    Ok((RegressionDataset::new(x, y)?, mask))
}
