//! Oracle-guided SAT deobfuscation.
//!
//! [`deobfuscate`] alternates between the miter in [`dip`] and the oracle:
//! each distinguishing input is queried and its answer added as a
//! constraint, until all consistent keys agree everywhere. The surviving key
//! is then checked against the oracle with [`verify_key`].

pub mod dip;
pub mod encode;
pub mod sat;

use std::time::{Duration, Instant};

use serde_json::json;
use thiserror::Error;

pub use dip::{find_distinguishing_input, Dip, DipFinder};
pub use encode::{
    encode_keyed, Candidate, CandidateSet, KeyAssignment, KeyVars, KeyedCircuit, Signal, SuspicionMode,
    SuspicionModel,
};
pub use sat::{export_dimacs, parse_dimacs, sat_solve, Branching, Cnf, Lit, SatResult, Solver, Var};

use crate::exec::{self, Exec};
use crate::netlist::{Netlist, Violation};
use crate::obfuscate::{realize, ObfuscateError, Secret};
use crate::simulate::{self, oracle_equivalent, Equivalence, Oracle, SimError, DEFAULT_EXHAUSTIVE_LIMIT};

pub const DEFAULT_MAX_QUERIES: u64 = 10_000;
pub const DEFAULT_MAX_CONFLICTS: u64 = 1_000_000;
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);
pub const DEFAULT_VERIFY_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("attacks need a combinational netlist; use the scan frame")]
    Sequential,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no key in the suspicion model explains the observations")]
    Inconsistent,
    #[error("solver conflict budget exhausted")]
    ConflictBudget,
    #[error("oracle has {oracle_inputs} inputs / {oracle_outputs} outputs, netlist {inputs} / {outputs}")]
    OracleShape {
        inputs: usize,
        outputs: usize,
        oracle_inputs: usize,
        oracle_outputs: usize,
    },
    #[error("distinguishing input {0:?} failed its witness re-check")]
    MiterUnsound(Vec<bool>),
    #[error(transparent)]
    Invalid(#[from] Violation),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Obfuscate(#[from] ObfuscateError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub max_queries: u64,
    /// Per solver call.
    pub max_conflicts: u64,
    /// Checked between iterations.
    pub time_limit: Duration,
    /// Random verification vectors when the circuit has too many inputs
    /// for an exhaustive check.
    pub verify_samples: usize,
    pub verify_seed: u64,
    pub branching: Branching,
    /// Re-evaluate both witness keys at every distinguishing input.
    pub check_progress: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_queries: DEFAULT_MAX_QUERIES,
            max_conflicts: DEFAULT_MAX_CONFLICTS,
            time_limit: DEFAULT_TIME_LIMIT,
            verify_samples: DEFAULT_VERIFY_SAMPLES,
            verify_seed: 0,
            branching: Branching::Vsids,
            check_progress: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStatus {
    Verified,
    /// The key consistent with all observations disagrees with the oracle:
    /// the hidden circuit lies outside the suspicion model.
    KeyMismatch,
    QueryBudget,
    ConflictBudget,
    TimeLimit,
}

impl AttackStatus {
    pub fn is_budget(self) -> bool {
        matches!(self, AttackStatus::QueryBudget | AttackStatus::ConflictBudget | AttackStatus::TimeLimit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub key: KeyAssignment,
    /// Queries at distinguishing inputs; verification traffic is separate.
    pub oracle_queries: u64,
    pub verify_queries: u64,
    pub solver_calls: u64,
    pub conflicts: u64,
    pub wall_time: f64,
    pub verified: bool,
    pub status: AttackStatus,
}

impl AttackResult {
    /// `{"queries", "solver_calls", "conflicts", "wall_time_s", "verified",
    /// "key"}` with the key in secret format.
    pub fn report(&self) -> serde_json::Value {
        json!({
            "queries": self.oracle_queries,
            "solver_calls": self.solver_calls,
            "conflicts": self.conflicts,
            "wall_time_s": self.wall_time,
            "verified": self.verified,
            "key": serde_json::to_value(self.key.to_secret()).expect("secret serializes"),
        })
    }
}

/// Recovers a key for `apparent` by querying `oracle`.
pub fn deobfuscate(
    apparent: &Netlist,
    oracle: &mut Oracle,
    model: &SuspicionModel,
    limits: &Limits,
) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    if oracle.num_inputs() != apparent.inputs.len() || oracle.num_outputs() != apparent.outputs.len() {
        return Err(AttackError::OracleShape {
            inputs: apparent.inputs.len(),
            outputs: apparent.outputs.len(),
            oracle_inputs: oracle.num_inputs(),
            oracle_outputs: oracle.num_outputs(),
        });
    }
    let mut finder = DipFinder::new(apparent, model, limits.branching, Some(limits.max_conflicts))?;
    finder.set_deadline(start.checked_add(limits.time_limit));
    let out_of_time = || start.elapsed() >= limits.time_limit;
    let mut queries = 0u64;
    let status = loop {
        if start.elapsed() > limits.time_limit {
            break AttackStatus::TimeLimit;
        }
        let dip = match finder.find() {
            Ok(Some(dip)) => dip,
            Ok(None) => break AttackStatus::Verified,
            Err(AttackError::ConflictBudget) if out_of_time() => break AttackStatus::TimeLimit,
            Err(AttackError::ConflictBudget) => break AttackStatus::ConflictBudget,
            Err(e) => return Err(e),
        };
        if queries >= limits.max_queries {
            break AttackStatus::QueryBudget;
        }
        let answer = oracle.query(&dip.input)?;
        queries += 1;
        if limits.check_progress {
            let w0 = simulate::evaluate(&dip.witnesses[0].realize(apparent)?, &dip.input)?;
            let w1 = simulate::evaluate(&dip.witnesses[1].realize(apparent)?, &dip.input)?;
            if w0 == w1 || (w0 == answer && w1 == answer) {
                return Err(AttackError::MiterUnsound(dip.input));
            }
        }
        finder.add_observation(&dip.input, &answer);
    };

    // A timed-out attack still gets a short grace period to report a
    // consistent key.
    finder.set_deadline(Instant::now().checked_add(limits.time_limit / 10));
    let (key, mut status) = match finder.extract_key() {
        Ok(k) => (k, status),
        Err(AttackError::ConflictBudget) => {
            let s = if status.is_budget() {
                status
            } else if out_of_time() {
                AttackStatus::TimeLimit
            } else {
                AttackStatus::ConflictBudget
            };
            (KeyAssignment::default(), s)
        }
        Err(e) => return Err(e),
    };
    let before = oracle.query_count();
    let mut verified = false;
    if status == AttackStatus::Verified {
        verified = check_key(apparent, &key, oracle, limits.verify_samples, limits.verify_seed)?.is_equal();
        if !verified {
            status = AttackStatus::KeyMismatch;
        }
    }
    let stats = finder.stats();
    Ok(AttackResult {
        key,
        oracle_queries: queries,
        verify_queries: oracle.query_count() - before,
        solver_calls: stats.solves,
        conflicts: stats.conflicts,
        wall_time: start.elapsed().as_secs_f64(),
        verified,
        status,
    })
}

/// Compares the circuit realized under `key` with the oracle.
pub fn check_key(
    apparent: &Netlist,
    key: &KeyAssignment,
    oracle: &mut Oracle,
    samples: usize,
    seed: u64,
) -> Result<Equivalence, AttackError> {
    let candidate = key.realize(apparent)?;
    Ok(oracle_equivalent(&candidate, oracle, DEFAULT_EXHAUSTIVE_LIMIT, samples, seed)?)
}

/// True iff the key's realization matches the oracle on every input (at
/// most 16 inputs) or on `samples` seeded random inputs.
pub fn verify_key(apparent: &Netlist, key: &KeyAssignment, oracle: &mut Oracle, samples: usize, seed: u64) -> bool {
    matches!(check_key(apparent, key, oracle, samples, seed), Ok(Equivalence::Equal))
}

/// One attack: an obfuscated circuit and the suspicion mode to attack it in.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub apparent: Netlist,
    pub secret: Secret,
    pub mode: SuspicionMode,
}

impl Experiment {
    pub fn run(&self, limits: &Limits) -> Result<AttackResult, AttackError> {
        let mut oracle = Oracle::new(&realize(&self.apparent, &self.secret)?)?;
        let model = SuspicionModel::new(self.mode, &self.apparent);
        deobfuscate(&self.apparent, &mut oracle, &model, limits)
    }
}

/// Independent attacks, each with its own oracle and solver.
pub fn run_experiments(
    exec: Exec,
    experiments: &[Experiment],
    limits: &Limits,
) -> Vec<Result<AttackResult, AttackError>> {
    exec::par_map(exec, experiments, |e| e.run(limits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use crate::obfuscate::{camouflage, CamoFunction, Obfuscated, Sites};

    fn camo1() -> Netlist {
        parse_netlist(".inputs a b\n.outputs y\n.gate CAMO2 y a b\n.end").unwrap()
    }

    fn oracle_for(apparent: &Netlist, f: CamoFunction) -> Oracle {
        let mut s = Secret::default();
        s.camo.insert("y".into(), f);
        Oracle::new(&realize(apparent, &s).unwrap()).unwrap()
    }

    #[test]
    fn one_camo_nand_in_two_queries() {
        let n = camo1();
        for f in CamoFunction::ALL {
            let mut o = oracle_for(&n, f);
            let m = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
            let r = deobfuscate(&n, &mut o, &m, &Limits::default()).unwrap();
            assert!(r.verified, "{f:?}");
            assert_eq!(r.status, AttackStatus::Verified);
            assert_eq!(r.key.0["y"], Candidate::Camo(f));
            assert!(r.oracle_queries <= 2, "{f:?}: {} queries", r.oracle_queries);
        }
    }

    #[test]
    fn verify_key_catches_flipped_function() {
        let n = camo1();
        let mut o = oracle_for(&n, CamoFunction::Nand);
        let mut key = KeyAssignment::default();
        key.0.insert("y".into(), Candidate::Camo(CamoFunction::Nand));
        assert!(verify_key(&n, &key, &mut o, 0, 0));
        key.0.insert("y".into(), Candidate::Camo(CamoFunction::Nor));
        match check_key(&n, &key, &mut o, 0, 0).unwrap() {
            Equivalence::Counterexample(x) => assert!(x == vec![false, true] || x == vec![true, false]),
            Equivalence::Equal => panic!("NOR accepted for NAND"),
        }
    }

    #[test]
    fn query_budget_gives_partial_result() {
        let base = crate::gen::generate(&crate::gen::GenConfig {
            gates: 60,
            inputs: 10,
            outputs: 4,
            depth: 6,
            seed: 1,
        });
        let (apparent, secret) = camouflage(&base, &Sites::Random { count: 8, seed: 1 }).unwrap();
        let mut o = Oracle::new(&realize(&apparent, &secret).unwrap()).unwrap();
        let m = SuspicionModel::new(SuspicionMode::DeclaredOnly, &apparent);
        let limits = Limits {
            max_queries: 1,
            ..Limits::default()
        };
        let r = deobfuscate(&apparent, &mut o, &m, &limits).unwrap();
        assert_eq!(r.status, AttackStatus::QueryBudget);
        assert!(!r.verified);
        assert_eq!(r.oracle_queries, 1);
    }

    #[test]
    fn every_gate_suspect_recovers_stuck_gate() {
        let n = parse_netlist(".inputs a b c\n.outputs y\n.gate OR2 n1 b c\n.gate AND2 n2 a n1\n.gate NOT y n2\n.end")
            .unwrap();
        let ob = Obfuscated::from_plain(&n).inject_stuck_at("n1", true).unwrap();
        let mut o = Oracle::new(&ob.realize().unwrap()).unwrap();
        let m = SuspicionModel::new(SuspicionMode::EveryGateSuspect, &n);
        let r = deobfuscate(&n, &mut o, &m, &Limits::default()).unwrap();
        assert!(r.verified);
        // Functionally equivalent, though not necessarily the same gate.
        let got = crate::simulate::truth_table(&r.key.realize(&n).unwrap()).unwrap();
        let want = crate::simulate::truth_table(&ob.realize().unwrap()).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn report_has_the_documented_keys() {
        let n = camo1();
        let mut o = oracle_for(&n, CamoFunction::Xor);
        let m = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        let r = deobfuscate(&n, &mut o, &m, &Limits::default()).unwrap();
        let v = r.report();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 6);
        for k in ["queries", "solver_calls", "conflicts", "wall_time_s", "verified", "key"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(v["key"]["camo"]["y"], "XOR");
    }
}
