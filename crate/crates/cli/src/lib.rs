//! `camoforge` command implementations.
//!
//! Exit codes: 0 success, 1 usage, 2 input or transform error, 3 attack
//! budget exhausted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use camoforge::attack::{self, AttackStatus, Branching, Limits, SuspicionMode, SuspicionModel};
use camoforge::device::{self, CmpParams, CrosstalkParams, Mechanism, SignalEnv};
use camoforge::gen::{generate, GenConfig};
use camoforge::obfuscate::{Obfuscated, Sites};
use camoforge::simulate::{format_vector, parse_vector, trace_line, Compiled};
use camoforge::{parse_netlist, realize, serialize_netlist, Netlist, Secret};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "camoforge", version, about = "Gate-level obfuscation, device effects and SAT attacks")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "CAMOFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random combinational benchmark.
    Gen(GenArgs),
    /// Apply obfuscation transforms; writes the apparent netlist and secret.
    Obfuscate(ObfuscateArgs),
    /// Recover the secret of an obfuscated netlist through its oracle.
    Attack(AttackArgs),
    /// Evaluate a netlist on input vectors, one per line.
    Simulate(SimulateArgs),
    /// Classify device-parameter records into logic-level effects.
    Physics(PhysicsArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub gates: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub inputs: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub outputs: u64,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    /// Output netlist; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObfuscateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Apparent netlist.
    #[arg(long)]
    pub out: PathBuf,
    /// Secret JSON.
    #[arg(long)]
    pub secret: PathBuf,
    /// Camouflage this many randomly chosen NAND2/NOR2/XOR2 gates.
    #[arg(long, conflicts_with = "camo_sites")]
    pub camo: Option<usize>,
    /// Camouflage exactly these gates (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub camo_sites: Vec<String>,
    /// Replace a gate by a LUT of its arity (repeatable).
    #[arg(long)]
    pub lut: Vec<String>,
    /// Stuck-at fault `net=bit` (repeatable).
    #[arg(long, value_parser = parse_stuck)]
    pub stuck: Vec<(String, bool)>,
    /// Make a flop never latch (repeatable).
    #[arg(long)]
    pub timing: Vec<String>,
    /// Dangling junk gates to add.
    #[arg(long, default_value_t = 0)]
    pub dummy: usize,
    /// Include the secret in the printed report.
    #[arg(long)]
    pub reveal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suspect {
    Declared,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchingArg {
    Vsids,
    First,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Apparent netlist.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Secret that builds the hidden oracle.
    #[arg(long)]
    pub secret: PathBuf,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Suspect::Declared)]
    pub suspect: Suspect,
    #[arg(long, default_value_t = attack::DEFAULT_MAX_QUERIES, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_queries: u64,
    /// Per solver call.
    #[arg(long, default_value_t = attack::DEFAULT_MAX_CONFLICTS, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_conflicts: u64,
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    pub time_limit_s: u64,
    #[arg(long, value_enum, default_value_t = BranchingArg::Vsids)]
    pub branching: BranchingArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Realize the netlist under this secret first.
    #[arg(long)]
    pub secret: Option<PathBuf>,
    /// Vector file: one bit string per line.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Trace CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    /// JSON record or array of records.
    #[arg(long = "in", required_unless_present = "mechanisms")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub v_dd: f64,
    #[arg(long, default_value_t = 0.5)]
    pub v_th: f64,
    /// ps.
    #[arg(long, default_value_t = 50.0)]
    pub slack: f64,
    /// Print the mechanism → effect-class table instead.
    #[arg(long)]
    pub mechanisms: bool,
}

fn parse_stuck(s: &str) -> Result<(String, bool), String> {
    let (net, bit) = s.split_once('=').ok_or_else(|| format!("expected net=bit, got `{s}`"))?;
    let bit = match bit {
        "0" => false,
        "1" => true,
        _ => return Err(format!("stuck value must be 0 or 1, got `{bit}`")),
    };
    Ok((net.to_string(), bit))
}

/// Outcome of a command that completed without an input error.
pub struct Outcome {
    pub code: i32,
}

impl Outcome {
    fn ok() -> Self {
        Outcome { code: EXIT_OK }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed),
        Command::Obfuscate(a) => cmd_obfuscate(a, cli.seed),
        Command::Attack(a) => cmd_attack(a, cli.seed),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Physics(a) => cmd_physics(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_netlist(path: &Path) -> Result<Netlist> {
    parse_netlist(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_secret(path: &Path) -> Result<Secret> {
    Secret::from_json(&read(path)?).with_context(|| format!("parsing secret {}", path.display()))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

pub fn cmd_gen(a: &GenArgs, seed: u64) -> Result<Outcome> {
    let n = generate(&GenConfig {
        gates: a.gates as usize,
        inputs: a.inputs as usize,
        outputs: a.outputs as usize,
        depth: a.depth as usize,
        seed,
    });
    if let Some(v) = n.validate().into_iter().next() {
        bail!("generated netlist is invalid: {v}");
    }
    write_out(a.out.as_deref(), &serialize_netlist(&n))?;
    Ok(Outcome::ok())
}

pub fn cmd_obfuscate(a: &ObfuscateArgs, seed: u64) -> Result<Outcome> {
    let original = read_netlist(&a.input)?;
    let mut ob = Obfuscated::from_plain(&original);
    if let Some(count) = a.camo {
        ob = ob.camouflage(&Sites::Random { count, seed })?;
    } else if !a.camo_sites.is_empty() {
        ob = ob.camouflage(&Sites::Explicit(a.camo_sites.clone()))?;
    }
    for g in &a.lut {
        ob = ob.insert_lut(g)?;
    }
    for (net, bit) in &a.stuck {
        ob = ob.inject_stuck_at(net, *bit)?;
    }
    for f in &a.timing {
        ob = ob.inject_timing_fault(f)?;
    }
    if a.dummy > 0 {
        ob = ob.add_dummy_logic(a.dummy, seed);
    }

    fs::write(&a.out, serialize_netlist(&ob.apparent)).with_context(|| format!("writing {}", a.out.display()))?;
    fs::write(&a.secret, ob.secret.to_json() + "\n").with_context(|| format!("writing {}", a.secret.display()))?;

    let declared = SuspicionModel::new(SuspicionMode::DeclaredOnly, &ob.apparent);
    let before = original.gates.len();
    let after = ob.apparent.gates.len();
    let mut report = json!({
        "gates_before": before,
        "gates_after": after,
        "gate_overhead": after as f64 / before.max(1) as f64 - 1.0,
        "camo_cells": ob.secret.camo.len(),
        "lut_cells": ob.secret.lut.len(),
        "stuck_nets": ob.secret.stuck.len(),
        "timing_faults": ob.secret.timing.len(),
        "key_space": declared.describe_key_space(64),
    });
    if a.reveal {
        report["secret"] = serde_json::to_value(&ob.secret)?;
    }
    write_out(None, &pretty(&report))?;
    Ok(Outcome::ok())
}

pub fn cmd_attack(a: &AttackArgs, seed: u64) -> Result<Outcome> {
    let apparent = read_netlist(&a.input)?;
    let secret = read_secret(&a.secret)?;
    let hidden = realize(&apparent, &secret)?;
    let mut oracle = camoforge::simulate::Oracle::new(&hidden)?;
    let mode = match a.suspect {
        Suspect::Declared => SuspicionMode::DeclaredOnly,
        Suspect::All => SuspicionMode::EveryGateSuspect,
    };
    let model = SuspicionModel::new(mode, &apparent);
    let limits = Limits {
        max_queries: a.max_queries,
        max_conflicts: a.max_conflicts,
        time_limit: Duration::from_secs(a.time_limit_s),
        verify_seed: seed,
        branching: match a.branching {
            BranchingArg::Vsids => Branching::Vsids,
            BranchingArg::First => Branching::FirstUnassigned,
        },
        ..Limits::default()
    };
    let result = attack::deobfuscate(&apparent, &mut oracle, &model, &limits)?;
    write_out(a.out.as_deref(), &pretty(&result.report()))?;
    let code = match result.status {
        AttackStatus::Verified => EXIT_OK,
        s if s.is_budget() => EXIT_BUDGET,
        _ => {
            eprintln!("error: recovered key does not match the oracle; the secret lies outside the suspicion model");
            EXIT_INPUT
        }
    };
    Ok(Outcome { code })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let mut n = read_netlist(&a.input)?;
    if let Some(s) = &a.secret {
        n = realize(&n, &read_secret(s)?)?;
    }
    let c = Compiled::new(&n)?;
    let text = read(&a.vectors)?;
    let mut trace = String::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let x = parse_vector(line).map_err(|e| anyhow!("vector row {row}: {e}"))?;
        let y = c.eval(&x).map_err(|e| anyhow!("vector row {row} (`{}`): {e}", format_vector(&x)))?;
        trace.push_str(&trace_line(&x, &y));
        trace.push('\n');
    }
    write_out(a.out.as_deref(), &trace)?;
    Ok(Outcome::ok())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CmpRecord {
    #[serde(flatten)]
    params: CmpParams,
    via_height: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrosstalkRecord {
    #[serde(flatten)]
    params: CrosstalkParams,
    /// Aggressor swing; defaults to a full-rail transition.
    dv_aggressor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingRecord {
    width_nominal: f64,
    width_thinned: f64,
    nominal_delay: f64,
}

/// Classifies one flat record. The record kind is chosen by its fields.
pub fn physics_record(rec: &Value, env: &SignalEnv) -> Result<Value> {
    let obj = rec.as_object().ok_or_else(|| anyhow!("record is not a JSON object"))?;
    if obj.contains_key("z0") || obj.contains_key("rho0") {
        let r: CmpRecord = serde_json::from_value(rec.clone())?;
        let z = device::ild_thickness(&r.params)?;
        let mut out = json!({"kind": "cmp", "z": z});
        if let Some(h) = r.via_height {
            out["effect"] = serde_json::to_value(device::classify_via(&r.params, h)?)?;
        }
        Ok(out)
    } else if obj.contains_key("c_adj") {
        let r: CrosstalkRecord = serde_json::from_value(rec.clone())?;
        let dv_a = r.dv_aggressor.unwrap_or(env.v_dd);
        Ok(json!({
            "kind": "crosstalk",
            "k": device::crosstalk_ratio_k(&r.params)?,
            "dv_victim": device::crosstalk_delta_v(&r.params, dv_a)?,
            "effect": device::classify_crosstalk(&r.params, dv_a, env)?,
        }))
    } else if obj.contains_key("width_nominal") {
        let r: TimingRecord = serde_json::from_value(rec.clone())?;
        let factor = device::line_delay_factor(r.width_nominal, r.width_thinned)?;
        Ok(json!({
            "kind": "timing",
            "delay_factor": factor,
            "effect": device::classify_timing(r.nominal_delay, factor, env)?,
        }))
    } else {
        bail!("unrecognized record: expects CMP (z0, z1, K, t, rho0), crosstalk (c_adj, ...) or timing (width_nominal, ...) fields")
    }
}

pub fn cmd_physics(a: &PhysicsArgs) -> Result<Outcome> {
    if a.mechanisms {
        let rows: Vec<Value> = Mechanism::ALL
            .iter()
            .map(|m| {
                let (stuck, stealthy, timing) = m.capabilities();
                json!({
                    "mechanism": format!("{m:?}"),
                    "stuck_at": stuck,
                    "stealthy_signal": stealthy,
                    "timing_fault": timing,
                    "effects": m.effect_classes(),
                })
            })
            .collect();
        write_out(a.out.as_deref(), &pretty(&json!({ "mechanisms": rows })))?;
        return Ok(Outcome::ok());
    }
    let env = SignalEnv {
        v_dd: a.v_dd,
        v_th: a.v_th,
        slack: a.slack,
    };
    env.check()?;
    let path = a.input.as_deref().expect("clap requires --in");
    let doc: Value = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let records = match doc {
        Value::Array(v) => v,
        other => vec![other],
    };
    let mut failures = 0;
    let results: Vec<Value> = records
        .iter()
        .enumerate()
        .map(|(i, r)| match physics_record(r, &env) {
            Ok(mut v) => {
                v["index"] = json!(i);
                v
            }
            Err(e) => {
                failures += 1;
                eprintln!("record {i}: {e:#}");
                json!({"index": i, "error": format!("{e:#}")})
            }
        })
        .collect();
    write_out(a.out.as_deref(), &pretty(&json!({ "records": results })))?;
    let code = if !records.is_empty() && failures == records.len() {
        EXIT_INPUT
    } else {
        EXIT_OK
    };
    Ok(Outcome { code })
}
