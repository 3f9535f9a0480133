//! Command-line front end for the `tsirelson` library.
//!
//! Subcommands:
//! - `derive` — enumerate the facet inequalities of a constrained classical
//!   polytope and classify them as trivial or Tsirelson-type.
//! - `oscillator` — derive the facets of the sampled-oscillator scenario and
//!   sweep their maximal quantum values against the truncation dimension.
//! - `shellgame-simulate` / `shellgame-analyze` — generate shell-game trial
//!   logs and test them for cheating.
//!
//! Exit codes: 0 success (analyze: no cheating found), 2 invalid input,
//! 3 scenario too large for exact facet enumeration, 10 cheating detected,
//! 1 other failures. `TSIRELSON_THREADS` caps worker threads (0 or unset =
//! automatic).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsirelson::oscillator::{
    violation_sweep, write_sweep_csv, ConstraintMode, OscillatorScenario,
};
use tsirelson::polytope::{facet_enumeration, ClassifiedFacetList, InequalityClass};
use tsirelson::scenario::{
    enumerate_constrained_vertices, parse_pattern_list, ConstrainedScenario, ConstraintSet,
};
use tsirelson::shellgame::{
    cheat_test, estimate, parse_trial_log, simulate, write_trial_log, Chooser, DealerStrategy,
};
use tsirelson::Scenario;

/// Facet enumeration is exact and exponential; reduced dimensions above this
/// are refused rather than left to run unboundedly.
const DIMENSION_CAP: usize = 8;

#[derive(Parser)]
#[command(
    name = "tsirelson",
    version,
    about = "Derive Tsirelson inequalities, compute quantum violations, detect shell-game cheating"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive and classify the facet inequalities of a classical polytope.
    Derive(DeriveArgs),
    /// Sweep maximal quantum values of oscillator facets over truncations.
    Oscillator(OscillatorArgs),
    /// Simulate shell-game rounds and write the trial log as CSV.
    ShellgameSimulate(SimulateArgs),
    /// Run the cheating test on a trial-log CSV.
    ShellgameAnalyze(AnalyzeArgs),
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("source")
        .required(true)
        .args(["scenario", "a", "oscillator"])
))]
struct DeriveArgs {
    /// JSON scenario file: {"A": 2, "X": 3, "forbidden": [[1,1,1]]}.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = ["a", "x", "forbid", "oscillator"]
    )]
    scenario: Option<PathBuf>,

    /// Number of outcomes per setting (with --X).
    #[arg(long = "A", value_name = "INT", requires = "x")]
    a: Option<u32>,

    /// Number of settings (with --A).
    #[arg(long = "X", value_name = "INT", requires = "a")]
    x: Option<u32>,

    /// Comma-separated forbidden outcome patterns, e.g. 111,222 (A <= 9).
    #[arg(long, value_name = "PATTERNS", requires = "a")]
    forbid: Option<String>,

    /// Use the sampled-oscillator scenario with this many probes.
    #[arg(
        long,
        value_name = "X",
        conflicts_with_all = ["a", "x", "forbid"]
    )]
    oscillator: Option<u32>,

    /// Constraint strength for --oscillator.
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,

    /// Write the classified facet list as JSON to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Machine format for --out.
    #[arg(long, value_enum, default_value_t = DeriveFormat::Json)]
    format: DeriveFormat,
}

#[derive(Args)]
struct OscillatorArgs {
    /// Number of probe times (odd, >= 3).
    #[arg(long = "X", value_name = "INT")]
    x: u32,

    /// Constraint strength used when deriving the facets.
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,

    /// Largest truncation dimension N to evaluate.
    #[arg(long = "Nmax", value_name = "INT")]
    n_max: usize,

    /// Restrict output to one facet family.
    #[arg(long, value_enum, default_value_t = IneqArg::All)]
    ineq: IneqArg,

    /// Write the sweep to this file (otherwise print a table).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Machine format for --out.
    #[arg(long, value_enum, default_value_t = SweepFormat::Csv)]
    format: SweepFormat,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dealer behaviour.
    #[arg(long, value_enum)]
    strategy: StrategyArg,

    /// Balls placed per round (honest and mixed strategies).
    #[arg(long, value_name = "INT", default_value_t = 1)]
    balls: u8,

    /// Per-round probability that a mixed dealer removes every ball.
    #[arg(long, value_name = "REAL", required_if_eq("strategy", "mixed"))]
    cheat_prob: Option<f64>,

    /// How the player picks a cup.
    #[arg(long, value_enum, default_value_t = ChooserArg::UniformRandom)]
    chooser: ChooserArg,

    /// Number of rounds to play.
    #[arg(long, value_name = "INT")]
    rounds: u64,

    /// Seed for the deterministic generator.
    #[arg(long, value_name = "INT")]
    seed: u64,

    /// Write the trial log here (otherwise print it).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trial-log CSV to analyze.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,

    /// Confidence level of the cheating certificate, strictly in (0, 1).
    #[arg(long, value_name = "REAL", default_value_t = 0.99)]
    confidence: f64,

    /// Simulation seed to record in the report, if known.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Write the report JSON here (otherwise print it).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Basic,
    Full,
}

impl From<ModeArg> for ConstraintMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Basic => ConstraintMode::Basic,
            ModeArg::Full => ConstraintMode::Full,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DeriveFormat {
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IneqArg {
    #[value(name = "type_t")]
    TypeT,
    #[value(name = "type_1")]
    Type1,
    #[value(name = "type_2")]
    Type2,
    #[value(name = "all")]
    All,
}

impl IneqArg {
    fn family(self) -> Option<&'static str> {
        match self {
            Self::TypeT => Some("type_t"),
            Self::Type1 => Some("type_1"),
            Self::Type2 => Some("type_2"),
            Self::All => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum StrategyArg {
    HonestUniform,
    HonestFixedCounts,
    CheatRemove,
    Mixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ChooserArg {
    UniformRandom,
    RoundRobin,
}

impl From<ChooserArg> for Chooser {
    fn from(c: ChooserArg) -> Self {
        match c {
            ChooserArg::UniformRandom => Chooser::UniformRandom,
            ChooserArg::RoundRobin => Chooser::RoundRobin,
        }
    }
}

/// Failures mapped onto the exit-code contract.
enum CliError {
    /// Invalid input or parameters: exit 2.
    Invalid(String),
    /// Scenario exceeds the exact-enumeration cap: exit 3.
    TooLarge(String),
    /// I/O and other unexpected failures: exit 1.
    Other(String),
}

impl CliError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Self::Invalid(e.to_string())
    }

    fn other(e: impl std::fmt::Display) -> Self {
        Self::Other(e.to_string())
    }

    fn report(self) -> ExitCode {
        let (msg, code) = match self {
            Self::Invalid(m) => (m, 2),
            Self::TooLarge(m) => (m, 3),
            Self::Other(m) => (m, 1),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return e.report();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => e.report(),
    }
}

/// Applies `TSIRELSON_THREADS` to the global worker pool. 0 or unset keeps
/// the automatic thread count.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("TSIRELSON_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Invalid(format!("TSIRELSON_THREADS must be an integer, got '{raw}'")))?;
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(CliError::other)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Derive(args) => cmd_derive(args),
        Command::Oscillator(args) => cmd_oscillator(args),
        Command::ShellgameSimulate(args) => cmd_simulate(args),
        Command::ShellgameAnalyze(args) => cmd_analyze(args),
    }
}

fn cmd_derive(args: DeriveArgs) -> Result<ExitCode, CliError> {
    let (scenario, constraints) = load_scenario(&args)?;
    check_dimension_cap(&scenario)?;

    let vertices =
        enumerate_constrained_vertices(&scenario, &constraints).map_err(CliError::invalid)?;
    let facets = facet_enumeration(&vertices).map_err(CliError::invalid)?;
    let classified = facets.classified(&scenario).map_err(CliError::invalid)?;

    print!("{}", derive_table(&scenario, &constraints, &classified));
    if let Some(path) = &args.out {
        let DeriveFormat::Json = args.format;
        let json = serde_json::to_string_pretty(&classified).map_err(CliError::other)?;
        fs::write(path, json + "\n").map_err(CliError::other)?;
        println!("wrote facet report to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_scenario(args: &DeriveArgs) -> Result<(Scenario, ConstraintSet), CliError> {
    if let Some(path) = &args.scenario {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let parsed = ConstrainedScenario::from_json_str(&text).map_err(CliError::invalid)?;
        return Ok((*parsed.scenario(), parsed.constraints().clone()));
    }
    if let Some(probes) = args.oscillator {
        let scen =
            OscillatorScenario::new(probes, args.mode.into()).map_err(CliError::invalid)?;
        return Ok((scen.scenario(), scen.constraints()));
    }
    let (a, x) = (args.a.unwrap(), args.x.unwrap());
    let scenario = Scenario::new(a, x).map_err(CliError::invalid)?;
    let constraints = match &args.forbid {
        Some(list) => parse_pattern_list(list, &scenario).map_err(CliError::invalid)?,
        None => ConstraintSet::empty(),
    };
    Ok((scenario, constraints))
}

fn check_dimension_cap(scenario: &Scenario) -> Result<(), CliError> {
    let dim = scenario.reduced_dimension();
    if dim > DIMENSION_CAP {
        return Err(CliError::TooLarge(format!(
            "reduced dimension {dim} exceeds the exact-enumeration cap {DIMENSION_CAP}"
        )));
    }
    Ok(())
}

fn derive_table(
    scenario: &Scenario,
    constraints: &ConstraintSet,
    classified: &ClassifiedFacetList,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario: A={} X={}",
        scenario.outcomes(),
        scenario.settings()
    );
    let patterns: Vec<String> = constraints.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(
        out,
        "forbidden patterns: {}",
        if patterns.is_empty() {
            "(none)".to_string()
        } else {
            patterns.join(", ")
        }
    );
    let _ = writeln!(out, "polytope dimension: {}", classified.dimension);
    if classified.equalities.is_empty() {
        let _ = writeln!(out, "affine hull: full-dimensional");
    } else {
        let _ = writeln!(out, "affine hull equalities:");
        for eq in &classified.equalities {
            let _ = writeln!(out, "  {}", eq.render(scenario));
        }
    }
    let tsirelson = classified
        .facets
        .iter()
        .filter(|f| f.class == InequalityClass::Tsirelson)
        .count();
    let _ = writeln!(
        out,
        "facets: {} ({} tsirelson, {} trivial)",
        classified.facets.len(),
        tsirelson,
        classified.facets.len() - tsirelson
    );
    for f in &classified.facets {
        let tag = match f.class {
            InequalityClass::Tsirelson => "tsirelson",
            InequalityClass::Trivial => "trivial",
        };
        let _ = writeln!(out, "  [{tag}] {}", f.inequality.render(scenario));
    }
    out
}

fn cmd_oscillator(args: OscillatorArgs) -> Result<ExitCode, CliError> {
    let scen = OscillatorScenario::new(args.x, args.mode.into()).map_err(CliError::invalid)?;
    check_dimension_cap(&scen.scenario())?;
    let facets = scen.derive_facets().map_err(CliError::invalid)?;
    let nontrivial = facets
        .nontrivial(&scen.scenario())
        .map_err(CliError::invalid)?;
    if nontrivial.is_empty() {
        return Err(CliError::Invalid(
            "the scenario has no nontrivial facets to sweep".into(),
        ));
    }
    let mut rows = violation_sweep(&nontrivial, &scen, args.n_max).map_err(CliError::invalid)?;
    if let Some(family) = args.ineq.family() {
        rows.retain(|r| r.family == family);
        if rows.is_empty() {
            return Err(CliError::Invalid(format!(
                "no facet family named {family} in this scenario"
            )));
        }
    }

    match &args.out {
        Some(path) => {
            let bytes = match args.format {
                SweepFormat::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf).map_err(CliError::other)?;
                    buf
                }
                SweepFormat::Json => {
                    let mut json =
                        serde_json::to_string_pretty(&rows).map_err(CliError::other)?;
                    json.push('\n');
                    json.into_bytes()
                }
            };
            fs::write(path, bytes).map_err(CliError::other)?;
            println!(
                "swept {} facet-family sides to N={}; wrote {} rows to {}",
                rows.len() / args.n_max,
                args.n_max,
                rows.len(),
                path.display()
            );
        }
        None => {
            println!("oscillator scenario: X={} mode={}", scen.probes(), scen.mode());
            println!("{:<5} {:<10} {:<10} {:>15} {}", "N", "type", "bound", "value", "violated");
            for r in &rows {
                println!(
                    "{:<5} {:<10} {:<10} {:>15.9} {}",
                    r.truncation, r.family, r.bound_side, r.value, r.violated
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, CliError> {
    let strategy = match args.strategy {
        StrategyArg::HonestUniform => DealerStrategy::HonestUniform { balls: args.balls },
        StrategyArg::HonestFixedCounts => DealerStrategy::HonestFixedCounts { balls: args.balls },
        StrategyArg::CheatRemove => DealerStrategy::CheatRemove,
        StrategyArg::Mixed => DealerStrategy::Mixed {
            balls: args.balls,
            cheat_prob: args.cheat_prob.expect("required by the flag parser"),
        },
    };
    let log = simulate(&strategy, args.rounds, args.seed, args.chooser.into())
        .map_err(CliError::invalid)?;
    let mut buf = Vec::new();
    write_trial_log(&log, &mut buf).map_err(CliError::other)?;
    match &args.out {
        Some(path) => {
            fs::write(path, &buf).map_err(CliError::other)?;
            println!("wrote {} trials to {}", log.len(), path.display());
        }
        None => {
            print!("{}", String::from_utf8(buf).expect("trial CSV is UTF-8"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode, CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", args.input.display())))?;
    let trials = parse_trial_log(&text).map_err(CliError::invalid)?;
    let est = estimate(&trials).map_err(CliError::invalid)?;
    let mut report = cheat_test(&est, args.confidence).map_err(CliError::invalid)?;
    if let Some(seed) = args.seed {
        report = report.with_seed(seed);
    }
    let mut json = serde_json::to_string_pretty(&report).map_err(CliError::other)?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, json).map_err(CliError::other)?;
            print!("{}", report.certificate);
            println!("wrote report to {}", path.display());
        }
        None => print!("{json}"),
    }
    if report.verdict.is_cheating() {
        Ok(ExitCode::from(10))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
