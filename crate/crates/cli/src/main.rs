//! `advsel`: play selection mechanisms, compare them by Monte Carlo, run the
//! brute-force verification oracles and emit figure data.
//!
//! Exit codes: 0 success, 1 an oracle found a counterexample, 2 usage or
//! parameter error, 3 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advsel_core::mechanisms::{
    play, MechanismConfig, MechanismKind, MechanismParams, Outcome, Player, StrikeStrategy,
};
use advsel_core::oracle::{
    parse_decimal, random_rationals, verify_theorem1, verify_theorem2, verify_theorem3,
    verify_theorem4,
};
use advsel_core::rng::Stream;
use advsel_core::simulation::{
    emit_figure_data, run_experiment, sibling, ExperimentConfig, Figure, RepRecord, RunManifest,
    DEFAULT_N_STAR, DEFAULT_REPS,
};
use advsel_core::stats::{all_stats, StatTriple};
use advsel_core::{Error, Population};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "advsel", version, about = "Adversarial representative selection: mechanisms, exact statistics and verification oracles")]
struct Cli {
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true, env = "ADVSEL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one mechanism on a population and report the sample and its statistics.
    Select(SelectArgs),
    /// Monte Carlo comparison of several mechanisms (default: the 972/12/40 setup).
    Compare(CompareArgs),
    /// Run a brute-force verification oracle; exit 1 on a counterexample.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
    /// Emit data files for the CDF overlay (fig1) or the KS comparison (fig2).
    Figures(FiguresArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum CutterArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    Ii,
}

impl From<CutterArg> for Player {
    fn from(c: CutterArg) -> Self {
        match c {
            CutterArg::I => Player::PlayerI,
            CutterArg::Ii => Player::PlayerII,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum FigureArg {
    Fig1,
    Fig2,
}

/// Population source shared by several subcommands.
#[derive(Args, Debug, Clone)]
struct PopulationArgs {
    /// CSV with `id,value` or `id,level` columns.
    #[arg(long, conflicts_with = "n")]
    population: Option<PathBuf>,
    /// Use a strict ranking of this many items instead of a file.
    #[arg(long)]
    n: Option<usize>,
}

impl PopulationArgs {
    fn load(&self) -> Result<Population, CliError> {
        match (&self.population, self.n) {
            (Some(p), _) => Population::from_csv_path(p).map_err(CliError::from),
            (None, Some(n)) => Ok(Population::strict(n)?),
            (None, None) => Err(CliError::usage("--population or --n is required")),
        }
    }
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    pop: PopulationArgs,
    /// quantile, cut-and-choose, overlapping-cut-and-choose, random,
    /// strike-and-replace, median-sample, median-shortlist, random-cut-and-choose.
    #[arg(long)]
    mechanism: String,
    /// Sample size.
    #[arg(long)]
    k: Option<usize>,
    /// Quantile half-width; inferred from n = (2m+1)k when omitted.
    #[arg(long)]
    m: Option<usize>,
    /// Vetoes per side.
    #[arg(long)]
    c: Option<usize>,
    /// Which player cuts (cut-and-choose variants).
    #[arg(long, value_enum)]
    cutter: Option<CutterArg>,
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Strike only items beyond the median (strike-and-replace).
    #[arg(long)]
    threshold: bool,
    /// Master seed; required for randomized mechanisms.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (format from --format or the extension); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; defaults to the --out extension, else JSON.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Experiment config (JSON); defaults to the 972/12/40 comparison.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per mechanism.
    #[arg(long)]
    reps: Option<usize>,
    /// Search for the equally representative random-sample size.
    #[arg(long)]
    calibrate: bool,
    /// Output file (format from --format or the extension); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; defaults to the --out extension, else JSON.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct FiguresArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per mechanism.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Search for the equally representative random-sample size instead of
    /// using the default one.
    #[arg(long)]
    calibrate: bool,
    /// Output CSV; a summary and manifest are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum VerifyCommand {
    /// Quantile sample is the unique KS/L1/CvM minimizer up to equivalence.
    Theorem1 {
        #[command(flatten)]
        pop: PopulationArgs,
        /// Sample size.
        #[arg(long)]
        k: usize,
        /// Output file (format from --format or the extension); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Any strictly increasing position vector is implementable.
    Theorem2 {
        /// Random instances to check.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Largest population size to draw.
        #[arg(long, default_value_t = 12)]
        max_n: usize,
        /// Master seed for every random stream.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (format from --format or the extension); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Non-antagonistic preferences: benchmark guarantees for both roles.
    Theorem3 {
        /// Population size.
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        sizes: Vec<usize>,
        /// Random instances to check.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Master seed for every random stream.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (format from --format or the extension); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random cut-and-choose moments over all equal-size partitions.
    Theorem4 {
        /// Exact decimal values, comma separated; otherwise seeded random rationals.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<String>>,
        /// Sample size.
        #[arg(long)]
        k: usize,
        /// Items per block.
        #[arg(long)]
        m: usize,
        /// Master seed for every random stream.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (format from --format or the extension); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    /// An oracle reported a counterexample; the report was already written.
    Counterexample,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Counterexample => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::PopulationFile(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Io(m) => eprintln!("I/O error: {m}"),
                CliError::Counterexample => eprintln!("verification failed: counterexample found"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Select(a) => select(a),
        Command::Compare(a) => compare(a),
        Command::Verify { which } => verify(which),
        Command::Figures(a) => figures(a),
    }
}

fn command_line() -> Vec<String> {
    std::env::args().collect()
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::usage(format!("--seed is required for {what}")))
}

/// Explicit `--format`, else the `--out` extension, else JSON.
fn pick_format(format: Option<Format>, out: Option<&Path>) -> Format {
    format.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    })
}

/// Creates the directory that will hold `out`, if it is missing.
fn create_parent(out: &Path) -> Result<(), CliError> {
    match out.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, ".manifest.json")
}

/// Writes `body` to `out` (or stdout) and the replay manifest next to it
/// (or as one JSON line on stderr).
fn emit<C: Serialize>(body: &str, out: Option<&Path>, seed: Option<u64>, config: &C, mut extra: Vec<String>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            create_parent(path)?;
            fs::write(path, body)?;
            let mut outputs = vec![path.display().to_string()];
            outputs.append(&mut extra);
            RunManifest::new(command_line(), seed, config, outputs)?.write(&manifest_path(path))?;
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            let m = RunManifest::new(command_line(), seed, config, extra)?;
            eprintln!("{}", serde_json::to_string(&m)?);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectedItem {
    position: usize,
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    level: u32,
}

#[derive(Serialize)]
struct SelectReport<'a> {
    mechanism: &'a MechanismConfig,
    n: usize,
    positions: &'a [usize],
    items: Vec<SelectedItem>,
    stats: StatTriple,
    outcome: &'a Outcome,
}

fn select(a: SelectArgs) -> Result<(), CliError> {
    let pop = a.pop.load()?;
    let kind: MechanismKind = a.mechanism.parse().map_err(|e: Error| CliError::usage(format!("--mechanism: {e}")))?;
    let sizes = a.sizes.clone();
    let params = MechanismParams {
        k: a.k,
        m: a.m,
        block_sizes: sizes,
        c: a.c,
        cutter: a.cutter.map(Player::from),
        strike_strategy: a.threshold.then_some(StrikeStrategy::Threshold),
        partition: None,
    };
    let mut config = MechanismConfig::new(kind, params);
    let outcome = if kind.is_randomized() {
        let seed = require_seed(a.seed, kind.name())?;
        config.seed = Some(seed);
        play(&pop, &config, &mut Stream::derive(seed, "select", 0))?
    } else {
        play(&pop, &config, &mut advsel_core::rng::Scripted::default())?
    };
    let items = outcome
        .positions()
        .iter()
        .map(|&p| {
            let it = pop.item_at(p);
            SelectedItem {
                position: p,
                id: it.label.clone(),
                value: it.value,
                level: pop.level_at(p),
            }
        })
        .collect::<Vec<_>>();
    let stats = all_stats(&pop, &outcome.sample)?;
    let format = pick_format(a.format, a.out.as_deref());
    let body = match format {
        Format::Json => {
            let report = SelectReport {
                mechanism: &config,
                n: pop.n(),
                positions: outcome.positions(),
                items,
                stats,
                outcome: &outcome,
            };
            serde_json::to_string_pretty(&report)? + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["position", "id", "value", "level", "ks", "l1", "cvm"]).map_err(Error::from)?;
            for it in &items {
                w.write_record([
                    it.position.to_string(),
                    it.id.clone(),
                    it.value.map(|v| v.to_string()).unwrap_or_default(),
                    it.level.to_string(),
                    stats.ks.to_string(),
                    stats.l1.to_string(),
                    stats.cvm.to_string(),
                ])
                .map_err(Error::from)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).expect("utf-8 csv")
        }
    };
    #[derive(Serialize)]
    struct Replay<'a> {
        population: Option<&'a Path>,
        n: usize,
        mechanism: &'a MechanismConfig,
    }
    let replay = Replay {
        population: a.pop.population.as_deref(),
        n: pop.n(),
        mechanism: &config,
    };
    emit(&body, a.out.as_deref(), config.seed, &replay, vec![])
}

fn records_csv(records: &[RepRecord]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |r: [String; 9]| w.write_record(r).map_err(|e| CliError::Io(e.to_string()));
    row([
        "mechanism", "rep", "positions", "ks", "ks_decimal", "l1", "l1_decimal", "cvm", "cvm_decimal",
    ]
    .map(String::from))?;
    for r in records {
        let pos = r.positions.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
        row([
            r.mechanism.clone(),
            r.rep.to_string(),
            pos,
            r.ks.to_string(),
            r.ks.to_decimal(12),
            r.l1.to_string(),
            r.l1.to_decimal(12),
            r.cvm.to_string(),
            r.cvm.to_decimal(12),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, "compare")?;
    let mut config = match &a.config {
        Some(p) => ExperimentConfig::from_json_path(p)?,
        None => ExperimentConfig::figure2(seed, DEFAULT_REPS, a.calibrate),
    };
    config.seed = seed;
    if let Some(r) = a.reps {
        config.reps = r;
    }
    if a.calibrate && config.calibration.is_none() {
        config.calibration = Some(Default::default());
    }
    let (_, res) = run_experiment(&config)?;
    let body = match pick_format(a.format, a.out.as_deref()) {
        Format::Json => serde_json::to_string_pretty(&res)? + "\n",
        Format::Csv => records_csv(&res.records)?,
    };
    emit(&body, a.out.as_deref(), Some(seed), &config, vec![])
}

fn write_report<R: Serialize>(report: &R, passed: bool, out: Option<&Path>, seed: Option<u64>, config: &serde_json::Value) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(report)? + "\n";
    emit(&body, out, seed, config, vec![])?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Counterexample)
    }
}

fn verify(which: VerifyCommand) -> Result<(), CliError> {
    let args = serde_json::json!({ "command": command_line() });
    match which {
        VerifyCommand::Theorem1 { pop, k, out } => {
            let population = pop.load()?;
            let r = verify_theorem1(&population, k)?;
            write_report(&r, r.passed, out.as_deref(), None, &args)
        }
        VerifyCommand::Theorem2 { trials, max_n, seed, out } => {
            let seed = require_seed(seed, "theorem2")?;
            let r = verify_theorem2(trials, max_n, seed)?;
            write_report(&r, r.passed, out.as_deref(), Some(seed), &args)
        }
        VerifyCommand::Theorem3 { n, sizes, trials, seed, out } => {
            let seed = require_seed(seed, "theorem3")?;
            let r = verify_theorem3(n, &sizes, trials, seed)?;
            write_report(&r, r.passed, out.as_deref(), Some(seed), &args)
        }
        VerifyCommand::Theorem4 { values, k, m, seed, out } => {
            let (vals, seed) = match values {
                Some(v) => (
                    v.iter()
                        .map(|s| parse_decimal(s))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::usage(format!("--values: {e}")))?,
                    None,
                ),
                None => {
                    let s = require_seed(seed, "theorem4 without --values")?;
                    (random_rationals(s, k * m), Some(s))
                }
            };
            let r = verify_theorem4(&vals, k, m)?;
            // The directional claim is reported, never a failure.
            write_report(&r, r.passed, out.as_deref(), seed, &args)
        }
    }
}

fn figures(a: FiguresArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, "figures")?;
    create_parent(&a.out)?;
    let mut config = ExperimentConfig::figure2(seed, a.reps, a.calibrate);
    let which = match a.figure {
        FigureArg::Fig1 => {
            config.mechanisms.retain(|s| s.id == "quantile");
            config.reps = 1;
            config.calibration = None;
            Figure::Fig1
        }
        FigureArg::Fig2 => Figure::Fig2,
    };
    let (pop, res) = run_experiment(&config)?;
    let mut outputs: Vec<String> = emit_figure_data(&pop, &res.records, which, &a.out)?
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    if let Some(cal) = &res.calibration {
        let p = sibling(&a.out, "_calibration.json");
        fs::write(&p, serde_json::to_string_pretty(cal)? + "\n")?;
        outputs.push(p.display().to_string());
    }
    let n_star = res
        .config
        .mechanisms
        .iter()
        .find(|s| s.id == "random_n_star")
        .and_then(|s| s.config.params.k)
        .unwrap_or(DEFAULT_N_STAR);
    if which == Figure::Fig2 {
        eprintln!("n* = {n_star}");
    }
    RunManifest::new(command_line(), Some(seed), &config, outputs)?.write(&manifest_path(&a.out))?;
    Ok(())
}
