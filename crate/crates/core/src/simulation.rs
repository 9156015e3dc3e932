//! Seeded Monte Carlo harness: head-to-head mechanism comparisons, the
//! calibration of an equally representative random-sample size, and CSV /
//! JSON emission for the CDF-overlay and KS-comparison figures.
//!
//! Every replicate draws from its own stream keyed by
//! `(master seed, mechanism id, replicate)`, and results are collected in
//! replicate order, so output is identical for any worker count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mechanisms::{play, MechanismConfig, MechanismKind, Player, StrikeStrategy};
use crate::par;
use crate::population::{sample_cdf, population_cdf, Population, Sample};
use crate::rng::{DrawSource, Stream};
use crate::stats::{all_stats, raw_numerator_u128, ExactStat, StatKind};

/// Tool version written into every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationSource {
    /// `n` standard-normal draws from stream `(seed, "population", 0)`.
    StandardNormal,
    /// CSV with `id,value` or `id,level` columns.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismSpec {
    /// Label used in outputs and as the random-stream label.
    pub id: String,
    #[serde(flatten)]
    pub config: MechanismConfig,
    /// Take `k` from the calibrated equivalent sample size.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub calibrated_k: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    /// Absolute tolerance on mean KS.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Replicates per candidate size; defaults to the experiment's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Search bounds; default `[k, n]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<usize>,
}

fn default_tolerance() -> f64 {
    0.002
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            tolerance: default_tolerance(),
            reps: None,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub mechanisms: Vec<MechanismSpec>,
    pub reps: usize,
    pub seed: u64,
    pub population: PopulationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSettings>,
}

/// Default replicate count.
pub const DEFAULT_REPS: usize = 1000;
/// Random-sample size used for the comparison when calibration is off.
pub const DEFAULT_N_STAR: usize = 259;

impl ExperimentConfig {
    /// The KS comparison setup: 972 normal draws, `k = 12`, `m = 40`,
    /// quantile vs random, strike-and-replace and median-sample with three
    /// vetoes per side, plus a larger random sample. With `calibrate` the
    /// larger size is searched for; otherwise it is [`DEFAULT_N_STAR`].
    pub fn figure2(seed: u64, reps: usize, calibrate: bool) -> Self {
        let (n, k, m, c) = (972, 12, 40, 3);
        let spec = |id: &str, config: MechanismConfig| MechanismSpec {
            id: id.to_string(),
            config,
            calibrated_k: false,
        };
        let mut star = spec("random_n_star", MechanismConfig::random(DEFAULT_N_STAR));
        star.calibrated_k = calibrate;
        ExperimentConfig {
            n,
            k,
            m,
            mechanisms: vec![
                spec("quantile", MechanismConfig::quantile(k, m, Player::PlayerI)),
                spec("random", MechanismConfig::random(k)),
                spec(
                    "strike_and_replace",
                    MechanismConfig::strike_and_replace(k, c, StrikeStrategy::Unconditional),
                ),
                spec("median_sample", MechanismConfig::median_sample(k, c)),
                star,
            ],
            reps,
            seed,
            population: PopulationSource::StandardNormal,
            calibration: calibrate.then(CalibrationSettings::default),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::params("replicate count must be at least 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::params("no mechanisms configured"));
        }
        let mut ids: Vec<&str> = self.mechanisms.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::params("mechanism ids must be unique"));
        }
        let has_quantile = self
            .mechanisms
            .iter()
            .any(|s| s.config.kind == MechanismKind::Quantile);
        if has_quantile && (2 * self.m + 1) * self.k != self.n {
            return Err(Error::NotQuantileShaped {
                n: self.n,
                k: self.k,
                m: self.m,
            });
        }
        if self.mechanisms.iter().any(|s| s.calibrated_k) && self.calibration.is_none() {
            return Err(Error::params("calibrated_k needs calibration settings"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        json_sha256(&value)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// SHA-256 of a JSON value's compact encoding (object keys sorted), hex.
pub fn json_sha256(value: &serde_json::Value) -> String {
    hex(&Sha256::digest(value.to_string().as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `n` standard-normal values from stream `(seed, "population", 0)`.
pub fn normal_population(n: usize, seed: u64) -> Result<Population> {
    let mut s = Stream::derive(seed, "population", 0);
    let values: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
    Population::from_values(&values)
}

pub fn build_population(config: &ExperimentConfig) -> Result<Population> {
    let pop = match &config.population {
        PopulationSource::StandardNormal => normal_population(config.n, config.seed)?,
        PopulationSource::File { path } => Population::from_csv_path(path)?,
    };
    if pop.n() != config.n {
        return Err(Error::params(format!(
            "population has {} items, config says n = {}",
            pop.n(),
            config.n
        )));
    }
    Ok(pop)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepRecord {
    pub mechanism: String,
    pub rep: usize,
    pub positions: Vec<usize>,
    pub ks: ExactStat,
    pub l1: ExactStat,
    pub cvm: ExactStat,
}

/// Replays one replicate from its stream key.
pub fn play_replicate(
    pop: &Population,
    spec: &MechanismSpec,
    seed: u64,
    rep: usize,
) -> Result<RepRecord> {
    let mut src = Stream::derive(seed, &spec.id, rep as u64);
    let out = play(pop, &spec.config, &mut src)?;
    record(pop, &spec.id, rep, out.sample)
}

fn record(pop: &Population, id: &str, rep: usize, sample: Sample) -> Result<RepRecord> {
    let st = all_stats(pop, &sample)?;
    Ok(RepRecord {
        mechanism: id.to_string(),
        rep,
        positions: sample.into_positions(),
        ks: st.ks,
        l1: st.l1,
        cvm: st.cvm,
    })
}

/// Plays every mechanism `reps` times on the configured population.
/// Mechanisms with `calibrated_k` must have been resolved first (see
/// [`run_experiment`]).
pub fn run_comparison(config: &ExperimentConfig) -> Result<Vec<RepRecord>> {
    config.validate()?;
    let pop = build_population(config)?;
    run_comparison_on(&pop, config)
}

pub fn run_comparison_on(pop: &Population, config: &ExperimentConfig) -> Result<Vec<RepRecord>> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.mechanisms.len() * config.reps);
    for spec in &config.mechanisms {
        if spec.calibrated_k {
            return Err(Error::params(format!(
                "mechanism `{}` still awaits its calibrated k",
                spec.id
            )));
        }
        spec.config.validate(pop.n())?;
        if spec.config.kind.is_randomized() {
            let reps: Vec<usize> = (0..config.reps).collect();
            let rows = par::map_collect(reps, |r| play_replicate(pop, spec, config.seed, r));
            for row in rows {
                records.push(row?);
            }
        } else {
            let first = play_replicate(pop, spec, config.seed, 0)?;
            for r in 0..config.reps {
                records.push(RepRecord { rep: r, ..first.clone() });
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub size: usize,
    pub mean_ks: ExactStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub target: ExactStat,
    pub tolerance: f64,
    pub reps: usize,
    pub n_star: usize,
    pub mean_ks_at_n_star: ExactStat,
    /// Every size evaluated, in evaluation order.
    pub evaluations: Vec<CalibrationPoint>,
}

/// Exact mean KS of `reps` uniform random samples of size `s`, each from
/// stream `(seed, "calibrate/<s>", rep)`.
pub fn mean_random_ks(pop: &Population, s: usize, reps: usize, seed: u64) -> Result<ExactStat> {
    let n = pop.n();
    if s == 0 || s > n || reps == 0 {
        return Err(Error::params(format!("cannot average {reps} samples of size {s} from {n}")));
    }
    let label = format!("calibrate/{s}");
    let all = pop.all_positions();
    let sums = par::map_collect((0..reps).collect(), |r| {
        let mut src = Stream::derive(seed, &label, r as u64);
        let mut y = src.draw_subset(&all, s);
        y.sort_unstable();
        raw_numerator_u128(StatKind::Ks, pop, &y).expect("KS numerator fits")
    });
    let total: u128 = sums.iter().sum();
    let denom = StatKind::Ks.denominator(n, s) * BigInt::from(reps);
    Ok(ExactStat::new(total, denom))
}

/// Smallest size `s` in `[lower, upper]` whose mean random-sample KS is at
/// most `m/n + tolerance`, assuming mean KS decreases in `s`. A coarse grid
/// brackets the answer, then bisection pins it down.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_equivalent_n(
    pop: &Population,
    k_quantile: usize,
    m: usize,
    reps: usize,
    tolerance: f64,
    seed: u64,
    bounds: Option<(usize, usize)>,
) -> Result<CalibrationReport> {
    let n = pop.n();
    if k_quantile == 0 || k_quantile > n {
        return Err(Error::params(format!("k = {k_quantile} must lie in 1..={n}")));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(Error::params("tolerance must be a non-negative number"));
    }
    let (lo, hi) = bounds.unwrap_or((k_quantile, n));
    if lo == 0 || lo > hi || hi > n {
        return Err(Error::params(format!("bad search bounds [{lo}, {hi}]")));
    }
    let target = ExactStat::new(BigInt::from(m), BigInt::from(n));
    let tol = BigRational::from_float(tolerance).expect("finite tolerance");
    let limit = target.as_rational() + tol;
    let mut evaluations = Vec::new();
    let mut eval = |s: usize| -> Result<bool> {
        let mean = mean_random_ks(pop, s, reps, seed)?;
        let ok = mean.as_rational() <= &limit;
        evaluations.push(CalibrationPoint { size: s, mean_ks: mean });
        Ok(ok)
    };

    // Coarse pass: about 16 evenly spaced sizes, stop at the first success.
    let step = ((hi - lo) / 16).max(1);
    let mut prev_fail = None;
    let mut first_ok = None;
    let mut s = lo;
    loop {
        if eval(s)? {
            first_ok = Some(s);
            break;
        }
        prev_fail = Some(s);
        if s == hi {
            break;
        }
        s = (s + step).min(hi);
    }
    let Some(mut ok) = first_ok else {
        let last = evaluations.last().expect("evaluated at least once");
        return Err(Error::SearchExhausted {
            upper: hi,
            mean_ks: last.mean_ks.to_f64(),
            target: target.to_f64(),
        });
    };
    // Fine pass: bisection on (prev_fail, ok].
    if let Some(mut bad) = prev_fail {
        while ok - bad > 1 {
            let mid = bad + (ok - bad) / 2;
            if eval(mid)? {
                ok = mid;
            } else {
                bad = mid;
            }
        }
    }
    let mean_at = evaluations
        .iter()
        .rev()
        .find(|p| p.size == ok)
        .map(|p| p.mean_ks.clone())
        .expect("n* was evaluated");
    Ok(CalibrationReport {
        target,
        tolerance,
        reps,
        n_star: ok,
        mean_ks_at_n_star: mean_at,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// The config actually run, with calibrated sizes filled in.
    pub config: ExperimentConfig,
    pub calibration: Option<CalibrationReport>,
    pub records: Vec<RepRecord>,
}

/// Calibrates if requested, then runs the comparison.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Population, ExperimentResult)> {
    config.validate()?;
    let pop = build_population(config)?;
    let mut resolved = config.clone();
    let mut calibration = None;
    if let Some(settings) = resolved.mechanisms.iter().any(|s| s.calibrated_k).then(|| config.calibration.clone()).flatten() {
        let bounds = match (settings.lower, settings.upper) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(config.k), hi.unwrap_or(config.n))),
        };
        let report = calibrate_equivalent_n(
            &pop,
            config.k,
            config.m,
            settings.reps.unwrap_or(config.reps),
            settings.tolerance,
            config.seed,
            bounds,
        )?;
        for spec in resolved.mechanisms.iter_mut().filter(|s| s.calibrated_k) {
            spec.config.params.k = Some(report.n_star);
            spec.calibrated_k = false;
        }
        calibration = Some(report);
    }
    let records = run_comparison_on(&pop, &resolved)?;
    Ok((
        pop,
        ExperimentResult {
            config: resolved,
            calibration,
            records,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Population vs quantile-sample CDF.
    Fig1,
    /// KS per mechanism and replicate, plus a per-mechanism summary.
    Fig2,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            _ => Err(Error::params(format!("unknown figure `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KsSummary {
    pub mechanism: String,
    pub reps: usize,
    pub mean: ExactStat,
    pub min: ExactStat,
    pub max: ExactStat,
    pub q05: ExactStat,
    pub q25: ExactStat,
    pub median: ExactStat,
    pub q75: ExactStat,
    pub q95: ExactStat,
}

/// Per-mechanism KS summary in first-appearance order; quantiles use the
/// nearest-rank rule.
pub fn summarize_ks(records: &[RepRecord]) -> Vec<KsSummary> {
    let mut ids: Vec<&str> = Vec::new();
    for r in records {
        if !ids.contains(&r.mechanism.as_str()) {
            ids.push(&r.mechanism);
        }
    }
    ids.into_iter()
        .map(|id| {
            let mut ks: Vec<&ExactStat> = records
                .iter()
                .filter(|r| r.mechanism == id)
                .map(|r| &r.ks)
                .collect();
            ks.sort();
            let len = ks.len();
            let rank = |p: f64| {
                let r = (p * len as f64).ceil() as usize;
                ks[r.clamp(1, len) - 1].clone()
            };
            let sum = ks
                .iter()
                .fold(BigRational::from_integer(BigInt::from(0)), |a, v| a + v.as_rational());
            KsSummary {
                mechanism: id.to_string(),
                reps: len,
                mean: ExactStat::from_rational(sum / BigRational::from_integer(BigInt::from(len))),
                min: ks[0].clone(),
                max: ks[len - 1].clone(),
                q05: rank(0.05),
                q25: rank(0.25),
                median: rank(0.5),
                q75: rank(0.75),
                q95: rank(0.95),
            }
        })
        .collect()
}

/// Significant digits in CSV output.
const DIGITS: usize = 12;

/// Writes the figure's CSV files and returns their paths. `Fig1` uses the
/// first `quantile` record (or the first record if there is none);
/// `Fig2` writes `path` and `<stem>_summary.csv` next to it.
pub fn emit_figure_data(
    pop: &Population,
    records: &[RepRecord],
    which: Figure,
    path: &Path,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::params("no records to emit"));
    }
    match which {
        Figure::Fig1 => {
            let rec = records
                .iter()
                .find(|r| r.mechanism == "quantile")
                .unwrap_or(&records[0]);
            let sample = Sample::new(rec.positions.clone(), pop.n())?;
            let fx = population_cdf(pop);
            let fy = sample_cdf(pop, &sample)?;
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["sorted_value", "F_x", "F_y"])?;
            for pos in 1..=pop.n() {
                let v = match pop.value_at(pos) {
                    Some(x) => format!("{x}"),
                    None => pop.level_at(pos).to_string(),
                };
                let i = pos - 1;
                w.write_record([
                    v,
                    ExactStat::new(fx.counts[i], fx.denominator).to_decimal(DIGITS),
                    ExactStat::new(fy.counts[i], fy.denominator).to_decimal(DIGITS),
                ])?;
            }
            w.flush()?;
            Ok(vec![path.to_path_buf()])
        }
        Figure::Fig2 => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["mechanism", "rep", "ks"])?;
            for r in records {
                w.write_record([r.mechanism.clone(), r.rep.to_string(), r.ks.to_decimal(DIGITS)])?;
            }
            w.flush()?;
            let summary_path = sibling(path, "_summary.csv");
            let mut w = csv::Writer::from_path(&summary_path)?;
            w.write_record([
                "mechanism", "reps", "mean", "min", "max", "q05", "q25", "median", "q75", "q95",
            ])?;
            for s in summarize_ks(records) {
                let mut row = vec![s.mechanism.clone(), s.reps.to_string()];
                for v in [&s.mean, &s.min, &s.max, &s.q05, &s.q25, &s.median, &s.q75, &s.q95] {
                    row.push(v.to_decimal(DIGITS));
                }
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(vec![path.to_path_buf(), summary_path])
        }
    }
}

/// `dir/stem.ext` → `dir/stem<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: Vec<String>, seed: Option<u64>, config: &C, outputs: Vec<String>) -> Result<Self> {
        let value = serde_json::to_value(config)?;
        Ok(RunManifest {
            tool: "advsel".to_string(),
            version: VERSION.to_string(),
            command,
            seed,
            config_sha256: json_sha256(&value),
            config: value,
            outputs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
