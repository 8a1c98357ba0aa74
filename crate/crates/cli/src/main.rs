//! `gpobs` — scenario-driven synthesis, simulation, auditing, and
//! accuracy analysis for guaranteed-privacy interval observers.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use gpobs_core::audit::AdjacencyMode;
use gpobs_core::synthesis::GainStructure;

const USAGE: &str = "\
gpobs - guaranteed-privacy interval observer toolkit

USAGE:
  gpobs synth <SCENARIO> [--private|--nonprivate] [OPTIONS]
  gpobs simulate <SCENARIO> [--design REF] [--horizon N] [--seeds N] [OPTIONS]
  gpobs audit <SCENARIO> [--design REF] [--pairs N] [--mode MODE] [OPTIONS]
  gpobs accuracy <SCENARIO> --np-design REF --gp-design REF [--horizon N] [OPTIONS]
  gpobs reproduce-example [--out DIR]

SUBCOMMANDS:
  synth              Synthesize an observer gain (non-private by default)
  simulate           Co-simulate plant and framer, exporting CSV trajectories
  audit              Drive the release mechanism with adjacent pairs and
                     compare against the (epsilon, delta) guarantee
  accuracy           Closed-form accuracy gap between two designs, with a
                     simulation cross-check column
  reproduce-example  End-to-end pipeline on the bundled five-firm market

DESIGN REFERENCES (--design, --np-design, --gp-design):
  paper-gain         The scenario's bundled gain block
  synth-np           Synthesize non-privately first
  synth-gp           Synthesize under the scenario's privacy budget first
  <path>             A gain-block file written by `gpobs synth`

OPTIONS:
  --out DIR          Output directory (default: $GPOBS_OUT_DIR or ./gpobs-out)
  --seed N           Override the scenario's seed
  --horizon N        Override the scenario's horizon
  --iters N          Objective-evaluation budget per search start
  --mask M           Gain structure: none | circulant | plant-pattern
  --pairs N          Adjacent pairs to audit (default 100)
  --mode MODE        boundary | interior | single-agent:<k> (default boundary)
  --sigma-min        Read sigma_m in the budget constraint as sigma_min
  --literal-alpha    Keep the standalone alpha factor in the budget constraint
  --dp-scale S       DP baseline noise support half-width (default 0.5)
  --help             Show this help

EXIT CODES:
  0  success
  2  usage or configuration error
  3  audit found guarantee violations
  4  numerical failure (instability, singularity, cross-check mismatch)
";

/// Print to stdout, ignoring broken pipes so `gpobs ... | head` stays
/// quiet.
#[macro_export]
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// As [`outln!`] without the trailing newline.
#[macro_export]
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

/// Failure carrying the process exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub scenario: PathBuf,
    pub private: bool,
    pub mask: GainStructure,
    pub iters: Option<usize>,
    pub sigma_min: bool,
    pub literal_alpha: bool,
    pub common: CommonOpts,
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    pub design: String,
    pub seeds: usize,
    pub common: CommonOpts,
}

#[derive(Debug, Clone)]
pub struct AuditArgs {
    pub scenario: PathBuf,
    pub design: String,
    pub pairs: usize,
    pub mode: AdjacencyMode,
    pub sigma_min: bool,
    pub literal_alpha: bool,
    pub common: CommonOpts,
}

#[derive(Debug, Clone)]
pub struct AccuracyArgs {
    pub scenario: PathBuf,
    pub np_design: String,
    pub gp_design: String,
    pub common: CommonOpts,
}

#[derive(Debug, Clone)]
pub struct ReproduceArgs {
    pub dp_scale: f64,
    pub common: CommonOpts,
}

enum Command {
    Synth(SynthArgs),
    Simulate(SimulateArgs),
    Audit(AuditArgs),
    Accuracy(AccuracyArgs),
    Reproduce(ReproduceArgs),
}

fn parse_usize(flag: &str, value: Option<String>) -> Result<usize, Failure> {
    value
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Failure::usage(format!("{flag} needs a nonnegative integer")))
}

fn parse_args(args: Vec<String>) -> Result<Option<Command>, Failure> {
    let mut iter = args.into_iter();
    let sub = match iter.next() {
        Some(s) => s,
        None => return Err(Failure::usage("missing subcommand; see --help")),
    };
    if sub == "--help" || sub == "-h" || sub == "help" {
        return Ok(None);
    }

    let mut scenario: Option<PathBuf> = None;
    let mut common = CommonOpts {
        out: None,
        seed: None,
        horizon: None,
    };
    let mut private: Option<bool> = None;
    let mut mask = GainStructure::Full;
    let mut iters = None;
    let mut sigma_min = false;
    let mut literal_alpha = false;
    let mut design = None;
    let mut np_design = None;
    let mut gp_design = None;
    let mut seeds = None;
    let mut pairs = None;
    let mut mode = AdjacencyMode::Boundary;
    let mut dp_scale = 0.5f64;

    while let Some(arg) = iter.next() {
        match arg.as_str() {
            "--help" | "-h" => return Ok(None),
            "--out" => {
                common.out = Some(PathBuf::from(
                    iter.next()
                        .ok_or_else(|| Failure::usage("--out needs a directory"))?,
                ))
            }
            "--seed" => common.seed = Some(parse_usize("--seed", iter.next())? as u64),
            "--horizon" => common.horizon = Some(parse_usize("--horizon", iter.next())?),
            "--private" => private = Some(true),
            "--nonprivate" => private = Some(false),
            "--iters" => iters = Some(parse_usize("--iters", iter.next())?),
            "--mask" => {
                mask = match iter.next().as_deref() {
                    Some("none") | Some("full") => GainStructure::Full,
                    Some("circulant") => GainStructure::Circulant,
                    Some("plant-pattern") => GainStructure::PlantPattern,
                    other => {
                        return Err(Failure::usage(format!(
                            "--mask must be none|circulant|plant-pattern, got {other:?}"
                        )))
                    }
                }
            }
            "--sigma-min" => sigma_min = true,
            "--literal-alpha" => literal_alpha = true,
            "--design" => design = iter.next(),
            "--np-design" => np_design = iter.next(),
            "--gp-design" => gp_design = iter.next(),
            "--seeds" => seeds = Some(parse_usize("--seeds", iter.next())?),
            "--pairs" => pairs = Some(parse_usize("--pairs", iter.next())?),
            "--dp-scale" => {
                dp_scale = iter
                    .next()
                    .and_then(|v| v.parse().ok())
                    .filter(|v: &f64| *v >= 0.0 && v.is_finite())
                    .ok_or_else(|| Failure::usage("--dp-scale needs a nonnegative number"))?
            }
            "--mode" => {
                let value = iter
                    .next()
                    .ok_or_else(|| Failure::usage("--mode needs a value"))?;
                mode = if value == "boundary" {
                    AdjacencyMode::Boundary
                } else if value == "interior" {
                    AdjacencyMode::Interior
                } else if let Some(agent) = value.strip_prefix("single-agent:") {
                    let agent = agent
                        .parse()
                        .map_err(|_| Failure::usage("single-agent mode needs an agent index"))?;
                    AdjacencyMode::SingleAgent(agent)
                } else {
                    return Err(Failure::usage(format!(
                        "--mode must be boundary|interior|single-agent:<k>, got '{value}'"
                    )));
                };
            }
            other if other.starts_with('-') => {
                return Err(Failure::usage(format!("unknown flag '{other}'")))
            }
            other => {
                if scenario.is_some() {
                    return Err(Failure::usage(format!("unexpected argument '{other}'")));
                }
                scenario = Some(PathBuf::from(other));
            }
        }
    }

    let need_scenario = |scenario: Option<PathBuf>| -> Result<PathBuf, Failure> {
        scenario.ok_or_else(|| Failure::usage("missing scenario path"))
    };

    let command = match sub.as_str() {
        "synth" => Command::Synth(SynthArgs {
            scenario: need_scenario(scenario)?,
            private: private.unwrap_or(false),
            mask,
            iters,
            sigma_min,
            literal_alpha,
            common,
        }),
        "simulate" => Command::Simulate(SimulateArgs {
            scenario: need_scenario(scenario)?,
            design: design.unwrap_or_else(|| "paper-gain".into()),
            seeds: seeds.unwrap_or(1),
            common,
        }),
        "audit" => {
            let pairs = pairs.unwrap_or(100);
            if pairs == 0 {
                return Err(Failure::usage("--pairs must be at least 1"));
            }
            Command::Audit(AuditArgs {
                scenario: need_scenario(scenario)?,
                design: design.unwrap_or_else(|| "paper-gain".into()),
                pairs,
                mode,
                sigma_min,
                literal_alpha,
                common,
            })
        }
        "accuracy" => Command::Accuracy(AccuracyArgs {
            scenario: need_scenario(scenario)?,
            np_design: np_design.ok_or_else(|| Failure::usage("--np-design is required"))?,
            gp_design: gp_design.ok_or_else(|| Failure::usage("--gp-design is required"))?,
            common,
        }),
        "reproduce-example" => {
            if scenario.is_some() {
                return Err(Failure::usage(
                    "reproduce-example runs on the bundled scenario",
                ));
            }
            Command::Reproduce(ReproduceArgs { dp_scale, common })
        }
        other => return Err(Failure::usage(format!("unknown subcommand '{other}'"))),
    };
    Ok(Some(command))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = match parse_args(args) {
        Ok(Some(command)) => command,
        Ok(None) => {
            out!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            return ExitCode::from(failure.code);
        }
    };
    let outcome = match command {
        Command::Synth(args) => commands::cmd_synth(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Audit(args) => commands::cmd_audit(&args),
        Command::Accuracy(args) => commands::cmd_accuracy(&args),
        Command::Reproduce(args) => commands::cmd_reproduce(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
