//! Reference implementations shared by the integration tests. They are
//! written from the format and gate definitions, not from the library's
//! evaluator.

#![allow(dead_code)]

use std::collections::HashMap;

use camoforge::{GateKind, Netlist};
use rand::Rng;

fn gate_value(kind: GateKind, x: &[bool]) -> bool {
    match kind {
        GateKind::Not => !x[0],
        GateKind::Buf => x[0],
        GateKind::And2 => x[0] && x[1],
        GateKind::Or2 => x[0] || x[1],
        GateKind::Nand2 => !(x[0] && x[1]),
        GateKind::Nor2 => !(x[0] || x[1]),
        GateKind::Xor2 => x[0] != x[1],
        GateKind::Xnor2 => x[0] == x[1],
        GateKind::Mux2 => {
            if x[0] {
                x[2]
            } else {
                x[1]
            }
        }
        GateKind::Const0 => false,
        GateKind::Const1 => true,
        other => panic!("reference interpreter cannot evaluate {other}"),
    }
}

/// Demand-driven evaluation by net name. `forced` nets take the given value
/// wherever they are read (and when listed as outputs); flops sit at init.
pub fn interpret(n: &Netlist, input: &[bool], forced: &HashMap<String, bool>) -> Vec<bool> {
    fn net(n: &Netlist, name: &str, env: &mut HashMap<String, bool>, forced: &HashMap<String, bool>) -> bool {
        if let Some(&v) = forced.get(name) {
            return v;
        }
        if let Some(&v) = env.get(name) {
            return v;
        }
        let g = n
            .gates
            .iter()
            .find(|g| g.output == name)
            .unwrap_or_else(|| panic!("undriven net {name}"));
        let ins: Vec<bool> = g.inputs.iter().map(|i| net(n, i, env, forced)).collect();
        let v = gate_value(g.kind, &ins);
        env.insert(name.to_string(), v);
        v
    }
    let mut env: HashMap<String, bool> = n.inputs.iter().cloned().zip(input.iter().copied()).collect();
    for f in &n.flops {
        env.insert(f.q.clone(), f.init);
    }
    n.outputs.iter().map(|o| net(n, o, &mut env, forced)).collect()
}

/// Row `i` of a `k`-input truth table, first input most significant.
pub fn row(i: usize, k: usize) -> Vec<bool> {
    (0..k).map(|j| i >> (k - 1 - j) & 1 == 1).collect()
}

pub fn reference_table(n: &Netlist, forced: &HashMap<String, bool>) -> Vec<Vec<bool>> {
    let k = n.inputs.len();
    (0..1usize << k).map(|i| interpret(n, &row(i, k), forced)).collect()
}

/// Random CNF as DIMACS literal lists.
pub fn random_cnf(rng: &mut impl Rng, vars: u32, clauses: usize, width: usize) -> Vec<Vec<i32>> {
    (0..clauses)
        .map(|_| {
            (0..width)
                .map(|_| {
                    let v = rng.gen_range(1..=vars as i32);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

/// Exhaustive satisfiability over all 2^vars assignments.
pub fn brute_force_sat(vars: u32, clauses: &[Vec<i32>]) -> bool {
    (0u64..1 << vars).any(|m| {
        clauses
            .iter()
            .all(|c| c.iter().any(|&d| (m >> (d.unsigned_abs() - 1) & 1 == 1) == (d > 0)))
    })
}
