use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pcnf::engine::LpEngine;
use pcnf::json::{parse_network, NetworkFile};
use pcnf::lpio::{self, Format};
use pcnf::pipeline::{self, Hierarchy, RefinePolicy, RunConfig, SolverChoice};
use pcnf_core::Error;

const EXIT_INVALID: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "pcnf", version, about = "Certified lower bounds for physics-constrained network flows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a network file and list every violation.
    Validate { input: PathBuf },
    /// Compute a lower bound and an incumbent assignment.
    Solve(Opts),
    /// Write the belief LP without solving it.
    Export(Opts),
    /// Run the brute-force references on a small instance.
    Oracle(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Lp,
    Tree,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Auto,
    Dense,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Mps,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    Widest,
    Fractional,
}

#[derive(clap::Args)]
struct Opts {
    input: PathBuf,
    /// Cells per coordinate.
    #[arg(long = "t", default_value_t = 8)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    refine_rounds: usize,
    /// Bound-tightening sweeps before discretizing (0 disables).
    #[arg(long, default_value_t = 0)]
    tighten: usize,
    /// `minimal` or `size:K`.
    #[arg(long)]
    hierarchy: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "auto")]
    lp_engine: EngineArg,
    #[arg(long, value_enum, default_value = "mps")]
    export_format: FormatArg,
    #[arg(long, value_enum, default_value = "widest")]
    refine: RefineArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the continuous oracle after every round.
    #[arg(long)]
    oracle_check: bool,
    /// Report or LP file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DiscretizationInfeasible(_) | Error::LocallyInfeasible { .. } | Error::Infeasible => EXIT_INFEASIBLE,
            Error::ResourceCap(_) | Error::IterationCap { .. } => EXIT_CAP,
            _ => EXIT_INVALID,
        };
        let message = match &e {
            Error::InvalidNetwork(v) => format!("input-invalid:\n  {}", v.join("\n  ")),
            Error::InvalidArgument(_) | Error::Unsupported(_) | Error::NonFinite(_) => format!("input-invalid: {e}"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn read(path: &Path) -> Result<NetworkFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    parse_network(&text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_hierarchy(s: Option<&str>) -> Result<Hierarchy, Failure> {
    match s {
        None | Some("off") => Ok(Hierarchy::Off),
        Some("minimal") => Ok(Hierarchy::Minimal),
        Some(x) => x
            .strip_prefix("size:")
            .and_then(|k| k.parse().ok())
            .map(Hierarchy::Size)
            .ok_or_else(|| fail(EXIT_INVALID, format!("input-invalid: --hierarchy {x}: expected off, minimal or size:K"))),
    }
}

fn config(o: &Opts) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig {
        t: o.t,
        refine_rounds: o.refine_rounds,
        tighten_sweeps: o.tighten,
        hierarchy: parse_hierarchy(o.hierarchy.as_deref())?,
        solver: match o.solver {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Lp => SolverChoice::Lp,
            SolverArg::Tree => SolverChoice::Tree,
        },
        engine: match o.lp_engine {
            EngineArg::Auto => LpEngine::Auto,
            EngineArg::Dense => LpEngine::Dense,
            EngineArg::Sparse => LpEngine::Sparse,
        },
        refine: match o.refine {
            RefineArg::Widest => RefinePolicy::Widest,
            RefineArg::Fractional => RefinePolicy::Fractional,
        },
        seed: o.seed,
        oracle: o.oracle_check,
        ..RunConfig::default()
    };
    if let Ok(v) = std::env::var("PCNF_ORACLE_CAP") {
        cfg.oracle_cap = v.parse().map_err(|_| fail(EXIT_INVALID, format!("input-invalid: PCNF_ORACLE_CAP={v} is not a count")))?;
    }
    cfg.check()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Validate { input } => {
            let net = read(&input)?.network();
            let rep = net.validate();
            let body = serde_json::json!({ "ok": rep.is_ok(), "violations": rep.violations, "warnings": rep.warnings });
            println!("{}", serde_json::to_string_pretty(&body).unwrap());
            if rep.is_ok() {
                Ok(())
            } else {
                Err(fail(EXIT_INVALID, format!("input-invalid: {} violation(s)", rep.violations.len())))
            }
        }
        Cmd::Solve(o) => {
            let cfg = config(&o)?;
            let file = read(&o.input)?;
            let rep = pipeline::solve(&file.network(), file.objective.into(), &cfg)?;
            emit(&o.out, &rep.to_json())?;
            eprintln!("{}", rep.summary());
            if !rep.bound_checks.ok() {
                return Err(fail(EXIT_INVALID, "bound ordering violated, see bound_checks in the report"));
            }
            Ok(())
        }
        Cmd::Export(o) => {
            let cfg = config(&o)?;
            let file = read(&o.input)?;
            let lp = pipeline::export_lp(&file.network(), file.objective.into(), &cfg)?;
            let format = match o.export_format {
                FormatArg::Mps => Format::Mps,
                FormatArg::Lp => Format::LpText,
            };
            let text = lpio::write(&lp, format).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
            emit(&o.out, &text)
        }
        Cmd::Oracle(o) => {
            let cfg = config(&o)?;
            let file = read(&o.input)?;
            let rep = pipeline::oracle(&file.network(), file.objective.into(), &cfg)?;
            emit(&o.out, &rep.to_json())?;
            eprintln!("discretized optimum {}, continuous estimate {} (residual {:e})", rep.discretized.value, rep.continuous.value, rep.continuous.residual);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
