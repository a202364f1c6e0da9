//! `qgame` subcommands. Every command is a pure function of its arguments:
//! the seed fixes all randomness and outputs are written in a stable order.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgame_core::circuit::{self, Variant};
use qgame_core::game::{to_f64, ExactProbability};
use qgame_core::mac::{
    self, AllocatorPolicy, CellConfig, Comparison, EnergyModel, SlotCsvWriter, Topology,
};
use qgame_core::qudit::{QuditState, MAX_DENSE_PLAYERS};
use qgame_core::{
    analytic_probabilities, classical_probabilities, AssignmentTuple, GameConfig, Regime,
    StrategyMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;
pub const EXIT_IO: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<qgame_core::Error> for CliError {
    fn from(e: qgame_core::Error) -> Self {
        match e {
            qgame_core::Error::ResourceLimit { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "qgame",
    version,
    about = "Quantum minority game for cognitive-radio channel allocation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic outcome probabilities, classical versus quantum.
    Probs(ProbsArgs),
    /// Prepare, apply strategies and measure repeatedly; writes a histogram.
    Simulate(SimulateArgs),
    /// Compare a circuit preparation against the target entangled state.
    AuditCircuit(CircuitArgs),
    /// Write a preparation circuit as a plain-text gate list.
    ExportCircuit(CircuitArgs),
    /// Run the slotted MAC comparison described by a JSON config file.
    Mac(MacArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// Number of users (= channels).
    #[arg(long)]
    pub n: usize,
    /// Named phase choice: enhance-optimum (p = n(n−1)/2) or avoid-worst (p = 1).
    #[arg(long, default_value = "enhance-optimum")]
    pub regime: String,
    /// Raw phase parameter; overrides --regime.
    #[arg(long)]
    pub p: Option<u64>,
}

impl GameArgs {
    fn regime(&self) -> Result<Regime> {
        self.regime
            .parse()
            .map_err(|e: qgame_core::Error| CliError::Usage(e.to_string()))
    }

    fn phase(&self) -> Result<u64> {
        match self.p {
            Some(p) => Ok(p),
            None => Ok(self.regime()?.phase(self.n)),
        }
    }

    fn config(&self) -> Result<GameConfig> {
        Ok(GameConfig::new(self.n, self.phase()?)?)
    }

    fn label(&self) -> String {
        match self.p {
            Some(_) => "explicit".into(),
            None => self.regime.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbsArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Qudit,
    Circuit,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "qudit")]
    pub engine: Engine,
    /// csv or json.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the nonzero amplitudes of the final state to this file.
    #[arg(long)]
    pub dump_state: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    PaperFigure,
    Corrected,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::PaperFigure => Variant::PaperFigure,
            VariantArg::Corrected => Variant::Corrected,
        }
    }
}

#[derive(Debug, Args)]
pub struct CircuitArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Preparation to use. `audit-circuit` defaults to the drawn figure,
    /// `export-circuit` to the corrected construction.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MacArgs {
    /// JSON config: the cell fields plus a `policies` list.
    pub config: PathBuf,
    /// Output directory for `mac_summary.json` and `mac_slots.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Skip the per-slot CSV.
    #[arg(long)]
    pub no_slots: bool,
}

/// `mac` config file: a cell description plus the policies to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacConfigFile {
    pub n_users: usize,
    pub n_channels: usize,
    pub primary_activity: f64,
    pub slots: u64,
    pub seed: u64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub energy: EnergyModel,
    pub policies: Vec<AllocatorPolicy>,
}

impl MacConfigFile {
    pub fn cell(&self) -> CellConfig {
        CellConfig {
            n_users: self.n_users,
            n_channels: self.n_channels,
            primary_activity: self.primary_activity,
            slots: self.slots,
            seed: self.seed,
            topology: self.topology,
            energy: self.energy,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Probs(args) => cmd_probs(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::AuditCircuit(args) => cmd_audit_circuit(&args),
        Command::ExportCircuit(args) => cmd_export_circuit(&args),
        Command::Mac(args) => cmd_mac(&args),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fraction(p: ExactProbability) -> String {
    format!("{}/{}", p.numer(), p.denom())
}

#[derive(Debug, Serialize)]
struct ProbRow {
    p_all_distinct: f64,
    p_all_distinct_exact: String,
    p_all_same: f64,
    p_all_same_exact: String,
    support_size: String,
    per_outcome_prob: f64,
}

#[derive(Debug, Serialize)]
struct ProbsReport {
    n: usize,
    p: u64,
    regime: String,
    classical: ProbRow,
    quantum: ProbRow,
}

pub fn cmd_probs(args: &ProbsArgs) -> Result<()> {
    let cfg = args.game.config()?;
    let n = cfg.n();
    let classical = classical_probabilities(n)?;
    let quantum = analytic_probabilities(&cfg);
    let total = (n as u128).pow(n as u32);
    let report = ProbsReport {
        n,
        p: cfg.p(),
        regime: args.game.label(),
        classical: ProbRow {
            p_all_distinct: to_f64(classical.p_all_distinct),
            p_all_distinct_exact: fraction(classical.p_all_distinct),
            p_all_same: to_f64(classical.p_all_same),
            p_all_same_exact: fraction(classical.p_all_same),
            support_size: total.to_string(),
            per_outcome_prob: 1.0 / total as f64,
        },
        quantum: ProbRow {
            p_all_distinct: to_f64(quantum.p_all_distinct),
            p_all_distinct_exact: fraction(quantum.p_all_distinct),
            p_all_same: to_f64(quantum.p_all_same),
            p_all_same_exact: fraction(quantum.p_all_same),
            support_size: quantum.support_size.to_string(),
            per_outcome_prob: to_f64(quantum.per_outcome_prob),
        },
    };

    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::other)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(
                out,
                "model,p_all_distinct,p_all_same,support_size,per_outcome_prob"
            )?;
            for (name, row) in [
                ("classical", &report.classical),
                ("quantum", &report.quantum),
            ] {
                writeln!(
                    out,
                    "{name},{:e},{:e},{},{:e}",
                    row.p_all_distinct, row.p_all_same, row.support_size, row.per_outcome_prob
                )?;
            }
        }
        Format::Text => {
            writeln!(
                out,
                "n = {}, p = {} ({})",
                report.n, report.p, report.regime
            )?;
            writeln!(out, "{:<18}{:>16}{:>16}", "", "classical", "quantum")?;
            let rows = [
                (
                    "p_all_distinct",
                    report.classical.p_all_distinct,
                    report.quantum.p_all_distinct,
                ),
                (
                    "p_all_same",
                    report.classical.p_all_same,
                    report.quantum.p_all_same,
                ),
                (
                    "per_outcome_prob",
                    report.classical.per_outcome_prob,
                    report.quantum.per_outcome_prob,
                ),
            ];
            for (name, c, q) in rows {
                writeln!(out, "{name:<18}{c:>16.6e}{q:>16.6e}")?;
            }
            writeln!(
                out,
                "{:<18}{:>16}{:>16}",
                "support_size", report.classical.support_size, report.quantum.support_size
            )?;
            if report.classical.p_all_distinct > 0.0 {
                writeln!(
                    out,
                    "all-distinct gain: {:.4}x",
                    report.quantum.p_all_distinct / report.classical.p_all_distinct
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Runs the protocol with the chosen engine and returns the final state.
pub fn final_state(cfg: &GameConfig, engine: Engine) -> Result<QuditState> {
    let mut state = match engine {
        Engine::Qudit => {
            if cfg.n() > MAX_DENSE_PLAYERS {
                return Err(CliError::Resource(format!(
                    "qudit engine supports n <= {MAX_DENSE_PLAYERS}, got {}",
                    cfg.n()
                )));
            }
            QuditState::prepare_entangled(cfg)?
        }
        Engine::Circuit => {
            if ![2, 4, 8].contains(&cfg.n()) {
                return Err(CliError::Usage(format!(
                    "circuit engine supports n in {{2, 4, 8}}, got {}",
                    cfg.n()
                )));
            }
            circuit::prepare_via_circuit(cfg, Variant::Corrected)?
        }
    };
    state.apply_local_strategy(&StrategyMatrix::fourier(cfg.n())?)?;
    Ok(state)
}

pub type Histogram = BTreeMap<AssignmentTuple, u64>;

pub fn sample_histogram(state: &QuditState, shots: u64, seed: u64) -> Result<Histogram> {
    let mut hist = Histogram::new();
    if shots == 0 {
        return Ok(hist);
    }
    let sampler = state.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..shots {
        *hist.entry(sampler.sample(&mut rng)).or_default() += 1;
    }
    Ok(hist)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistogramReport {
    pub n: usize,
    pub p: u64,
    pub engine: String,
    pub shots: u64,
    pub seed: u64,
    pub all_distinct_fraction: f64,
    pub all_same_fraction: f64,
    pub histogram: BTreeMap<String, u64>,
}

pub fn write_histogram_csv<W: Write>(hist: &Histogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcome", "count"])?;
    for (t, count) in hist {
        w.write_record([t.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv<R: Read>(input: R) -> Result<Histogram> {
    let mut hist = Histogram::new();
    for (i, row) in csv::Reader::from_reader(input).records().enumerate() {
        let row = row?;
        let bad = || CliError::Config(format!("histogram line {}: malformed row", i + 2));
        let outcome: AssignmentTuple = row.get(0).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let count: u64 = row.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        *hist.entry(outcome).or_default() += count;
    }
    Ok(hist)
}

fn fraction_where(hist: &Histogram, shots: u64, pred: impl Fn(&AssignmentTuple) -> bool) -> f64 {
    if shots == 0 {
        return 0.0;
    }
    hist.iter()
        .filter(|(t, _)| pred(t))
        .map(|(_, c)| c)
        .sum::<u64>() as f64
        / shots as f64
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.game.config()?;
    let state = final_state(&cfg, args.engine)?;
    if let Some(path) = &args.dump_state {
        let mut f = BufWriter::new(File::create(path)?);
        state.write_dump(&mut f)?;
        f.flush()?;
    }
    let hist = sample_histogram(&state, args.shots, args.seed)?;

    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_histogram_csv(&hist, &mut out)?,
        Format::Json => {
            let report = HistogramReport {
                n: cfg.n(),
                p: cfg.p(),
                engine: format!("{:?}", args.engine).to_lowercase(),
                shots: args.shots,
                seed: args.seed,
                all_distinct_fraction: fraction_where(
                    &hist,
                    args.shots,
                    AssignmentTuple::is_all_distinct,
                ),
                all_same_fraction: fraction_where(&hist, args.shots, AssignmentTuple::is_all_same),
                histogram: hist.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            };
            serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::other)?;
            writeln!(out)?;
        }
        Format::Text => return Err(CliError::Usage("simulate writes csv or json".into())),
    }
    out.flush()?;
    Ok(())
}

fn circuit_size_check(n: usize) -> Result<()> {
    if ![2, 4, 8].contains(&n) {
        return Err(CliError::Usage(format!(
            "circuit commands support n in {{2, 4, 8}}, got {n}"
        )));
    }
    Ok(())
}

pub fn cmd_audit_circuit(args: &CircuitArgs) -> Result<()> {
    circuit_size_check(args.game.n)?;
    let report = circuit::audit_preparation(
        &args.game.config()?,
        args.variant.unwrap_or(VariantArg::PaperFigure).into(),
    )?;
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::other)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn cmd_export_circuit(args: &CircuitArgs) -> Result<()> {
    let cfg = args.game.config()?;
    let gates = circuit::build_preparation_circuit(
        &cfg,
        args.variant.unwrap_or(VariantArg::Corrected).into(),
    )?;
    let mut out = output(args.out.as_deref())?;
    circuit::write_circuit_text(&gates, circuit::register_width(cfg.n())?, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_mac_config(path: &Path) -> Result<MacConfigFile> {
    let text = fs::read_to_string(path)?;
    let config: MacConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if config.policies.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: field `policies` needs at least two entries",
            path.display()
        )));
    }
    config.cell().validate().map_err(|e| match e {
        qgame_core::Error::ResourceLimit { .. } => CliError::Resource(e.to_string()),
        _ => CliError::Config(format!("{}: {e}", path.display())),
    })?;
    Ok(config)
}

pub fn cmd_mac(args: &MacArgs) -> Result<()> {
    let file = load_mac_config(&args.config)?;
    let cell = file.cell();
    fs::create_dir_all(&args.out)?;

    let mut slots = if args.no_slots {
        None
    } else {
        Some(SlotCsvWriter::new(BufWriter::new(File::create(
            args.out.join("mac_slots.csv"),
        )?))?)
    };
    let mut runs = Vec::with_capacity(file.policies.len());
    let mut write_error = None;
    for &policy in &file.policies {
        let metrics = mac::simulate(&cell, policy, |record| {
            if let (Some(w), None) = (slots.as_mut(), write_error.as_ref()) {
                if let Err(e) = w.write(policy, record) {
                    write_error = Some(e);
                }
            }
        })?;
        runs.push((policy, metrics));
    }
    if let Some(e) = write_error {
        return Err(e.into());
    }
    if let Some(w) = slots {
        w.finish()?.flush()?;
    }

    let comparison = Comparison::from_runs(cell, runs)?;
    let mut summary = BufWriter::new(File::create(args.out.join("mac_summary.json"))?);
    serde_json::to_writer_pretty(&mut summary, &comparison).map_err(io::Error::other)?;
    writeln!(summary)?;
    summary.flush()?;

    for r in &comparison.results {
        let ratio = r
            .all_distinct_ratio
            .map_or("n/a".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:<24} all_distinct_rate {:.6}  all_same_rate {:.6}  ratio vs {}: {ratio}",
            r.policy.name(),
            r.metrics.all_distinct_rate,
            r.metrics.all_same_rate,
            comparison.baseline.name()
        );
    }
    Ok(())
}
