//! `martsel`: solve martingale selection problems and check market models
//! for arbitrage, with exact rational reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use martsel::io::{load_certificate, load_model, to_json, write_json, Certificate, Model, ModelKind};
use martsel::markets::cost::{cost_ftap, cost_to_msp};
use martsel::markets::frictionless::{frictionless_ftap, frictionless_to_msp};
use martsel::markets::kabanov::{construct_dominating_model, kabanov_ftap, kabanov_to_msp};
use martsel::markets::FtapOutcome;
use martsel::msp::{build_local_solution, compute_w, MspInstance};
use martsel::oracle::{oracle_all_anchors, oracle_frictionless_arbitrage, oracle_kabanov_arbitrage, OracleCaps};
use martsel::scenario::NodeId;

#[derive(Parser)]
#[command(name = "martsel", version, about = "Exact martingale selection and arbitrage checks on scenario trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the W-recursion on an instance (market models are translated first).
    Solve(RunArgs),
    /// Price systems or an arbitrage certificate for a market model.
    Ftap(RunArgs),
    /// Compare the brute-force oracle with the solver.
    Oracle(RunArgs),
    /// Re-check a certificate written by `--emit-certificate`.
    Verify(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Msp,
    Frictionless,
    Kabanov,
    Cost,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Msp => ModelKind::Msp,
            KindArg::Frictionless => ModelKind::Frictionless,
            KindArg::Kabanov => ModelKind::Kabanov,
            KindArg::Cost => ModelKind::Cost,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model type; required when the file has no "model" field.
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    /// Node to anchor a solution or price system at, as LEVEL:INDEX.
    #[arg(long = "node", value_name = "LEVEL:INDEX")]
    nodes: Vec<NodeId>,
    #[arg(long, value_name = "PATH")]
    emit_certificate: Option<PathBuf>,
    /// Include the per-node W sets in the report.
    #[arg(long)]
    emit_w_tables: bool,
    /// Also run the oracle and report agreement.
    #[arg(long)]
    cross_check: bool,
    /// For a solvable currency market, include a dominating solvable model.
    #[arg(long)]
    dominating: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// A report and whether its verdict is favorable (solvable / no arbitrage).
type Outcome = Result<(Value, bool), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, result) = match &cli.command {
        Command::Solve(a) => (a, solve(a)),
        Command::Ftap(a) => (a, ftap(a)),
        Command::Oracle(a) => (a, oracle(a)),
        Command::Verify(a) => (a, verify(a)),
    };
    let emitted = result.and_then(|(report, ok)| {
        match &args.out {
            Some(p) => write_json(p, &report)?,
            None => print!("{}", to_json(&report)),
        }
        Ok(ok)
    });
    match emitted {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(a: &RunArgs) -> Result<Model, Failure> {
    Ok(load_model(&a.input, a.model.map(Into::into))?)
}

fn instance_of(model: &Model) -> Result<MspInstance, Failure> {
    Ok(match model {
        Model::Msp(i) => i.clone(),
        Model::Frictionless(m) => frictionless_to_msp(m)?,
        Model::Kabanov(m) => kabanov_to_msp(m)?,
        Model::Cost(m) => cost_to_msp(m)?,
    })
}

fn emit(path: &Option<PathBuf>, cert: &Certificate) -> Result<(), Failure> {
    if let Some(p) = path {
        write_json(p, cert)?;
    }
    Ok(())
}

fn oracle_diff(inst: &MspInstance, solvable: bool) -> Result<Value, Failure> {
    let caps = OracleCaps::from_env()?;
    let verdicts = oracle_all_anchors(inst, &caps)?;
    let oracle_solvable = verdicts.values().all(|v| *v);
    let failing: Vec<String> = verdicts.iter().filter(|(_, v)| !**v).map(|(n, _)| n.to_string()).collect();
    Ok(json!({
        "oracle_solvable": oracle_solvable,
        "agree": oracle_solvable == solvable,
        "unsupported_anchors": failing,
    }))
}

fn solve(a: &RunArgs) -> Outcome {
    let model = load(a)?;
    let inst = instance_of(&model)?;
    let table = compute_w(&inst)?;
    let failure = table.failure().map(|(_, n)| n);
    let solvable = failure.is_none();
    let mut solutions = Vec::new();
    if solvable {
        for &n in &a.nodes {
            solutions.push(build_local_solution(&inst, &table, n, None)?);
        }
    }
    let mut report = json!({
        "command": "solve",
        "model": model.kind(),
        "verdict": if solvable { "solvable" } else { "unsolvable" },
        "failure": failure,
        "solutions": solutions,
    });
    if a.emit_w_tables {
        let w: Vec<Value> = table.iter().map(|(n, s)| json!({"node": n, "w": s.w})).collect();
        report["w_tables"] = Value::Array(w);
    }
    if a.cross_check {
        report["cross_check"] = oracle_diff(&inst, solvable)?;
    }
    emit(&a.emit_certificate, &Certificate::Msp { instance: inst, failure, solutions })?;
    Ok((report, solvable))
}

fn ftap(a: &RunArgs) -> Outcome {
    let model = load(a)?;
    let caps = OracleCaps::from_env()?;
    let (cert, extra) = match model {
        Model::Msp(_) => return Err(Failure("ftap needs a market model, not an msp instance".into())),
        Model::Frictionless(m) => {
            let outcome = frictionless_ftap(&m, &a.nodes)?;
            let mut extra = json!({});
            if a.cross_check {
                let found = oracle_frictionless_arbitrage(&m, &caps)?;
                extra["cross_check"] = json!({"oracle_arbitrage": found, "agree": found == outcome.is_arbitrage()});
            }
            (Certificate::Frictionless { market: m, outcome }, extra)
        }
        Model::Kabanov(m) => {
            let outcome = kabanov_ftap(&m, &a.nodes)?;
            let mut extra = json!({});
            if a.cross_check {
                let found = oracle_kabanov_arbitrage(&m, &caps)?;
                extra["cross_check"] = json!({"oracle_arbitrage": found, "agree": found == outcome.is_arbitrage()});
            }
            if a.dominating {
                if let FtapOutcome::NoArbitrage(_) = outcome {
                    extra["dominating_model"] = serde_json::to_value(construct_dominating_model(&m)?)?;
                }
            }
            (Certificate::Kabanov { market: m, outcome }, extra)
        }
        Model::Cost(m) => {
            let outcome = cost_ftap(&m, &a.nodes)?;
            let mut extra = json!({});
            if a.cross_check {
                extra["cross_check"] = oracle_diff(&cost_to_msp(&m)?, !outcome.is_arbitrage())?;
            }
            (Certificate::Cost { market: m, outcome }, extra)
        }
    };
    let ok = cert.favorable();
    let body = serde_json::to_value(&cert)?;
    let mut report = json!({"command": "ftap", "model": body["model"], "verdict": verdict(&cert), "outcome": body["outcome"]});
    if let Value::Object(map) = extra {
        for (k, v) in map {
            report[k] = v;
        }
    }
    emit(&a.emit_certificate, &cert)?;
    Ok((report, ok))
}

fn oracle(a: &RunArgs) -> Outcome {
    let model = load(a)?;
    let caps = OracleCaps::from_env()?;
    match &model {
        Model::Frictionless(m) => {
            let found = oracle_frictionless_arbitrage(m, &caps)?;
            let solver = frictionless_ftap(m, &[])?.is_arbitrage();
            Ok((json!({"command": "oracle", "model": model.kind(), "oracle_arbitrage": found, "solver_arbitrage": solver, "agree": found == solver}), !found))
        }
        Model::Kabanov(m) => {
            let found = oracle_kabanov_arbitrage(m, &caps)?;
            let solver = kabanov_ftap(m, &[])?.is_arbitrage();
            Ok((json!({"command": "oracle", "model": model.kind(), "oracle_arbitrage": found, "solver_arbitrage": solver, "agree": found == solver}), !found))
        }
        _ => {
            let inst = instance_of(&model)?;
            let solvable = compute_w(&inst)?.all_nonempty();
            let mut report = oracle_diff(&inst, solvable)?;
            let found = report["oracle_solvable"].as_bool().unwrap_or(false);
            report["command"] = json!("oracle");
            report["model"] = json!(model.kind());
            report["solver_solvable"] = json!(solvable);
            Ok((report, found))
        }
    }
}

fn verify(a: &RunArgs) -> Outcome {
    let cert = load_certificate(Path::new(&a.input))?;
    cert.check().map_err(|e| Failure(format!("certificate rejected: {e}")))?;
    Ok((json!({"command": "verify", "valid": true, "verdict": verdict(&cert)}), cert.favorable()))
}

fn verdict(c: &Certificate) -> &'static str {
    match (c, c.favorable()) {
        (Certificate::Msp { .. }, true) => "solvable",
        (Certificate::Msp { .. }, false) => "unsolvable",
        (_, true) => "no_arbitrage",
        (_, false) => "arbitrage",
    }
}
