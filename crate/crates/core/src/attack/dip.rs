//! Distinguishing-input search over an incremental miter.
//!
//! One solver holds two key copies `k1`, `k2`, a shared symbolic input `x`
//! and the disagreement constraint `out(x, k1) != out(x, k2)`, guarded by an
//! activation literal. Each observation adds a constant-input copy of the
//! circuit for both keys. Solving under `act` yields the next query; solving
//! under `!act` yields any observation-consistent key.

use super::encode::{encode_keyed, KeyAssignment, KeyVars, KeyedCircuit, Signal, SuspicionModel, Tseitin};
use super::sat::{Branching, Lit, SolveStatus, Solver, SolverStats};
use super::AttackError;
use crate::netlist::Netlist;
use crate::simulate::Vector;

/// A distinguishing input and the two consistent keys that disagree on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dip {
    pub input: Vector,
    pub witnesses: [KeyAssignment; 2],
}

pub struct DipFinder {
    circuit: KeyedCircuit,
    solver: Solver,
    keys: [KeyVars; 2],
    act: Lit,
    x: Vec<Lit>,
    observations: Vec<(Vector, Vector)>,
}

impl DipFinder {
    pub fn new(
        apparent: &Netlist,
        model: &SuspicionModel,
        branching: Branching,
        conflict_budget: Option<u64>,
    ) -> Result<Self, AttackError> {
        let mut solver = Solver::new().with_branching(branching);
        solver.set_conflict_budget(conflict_budget);
        // Key variables come first so first-unassigned branching decides
        // keys before internal signals.
        let (circuit, k1) = encode_keyed(apparent, model, &mut solver)?;
        let k2 = circuit.alloc_keys(&mut solver);
        let x: Vec<Lit> = (0..circuit.num_inputs()).map(|_| solver.new_var().pos()).collect();
        let act = solver.new_var().pos();
        let xs: Vec<Signal> = x.iter().map(|&l| l.into()).collect();
        let o1 = circuit.encode(&mut solver, &xs, &k1);
        let o2 = circuit.encode(&mut solver, &xs, &k2);
        let mut enc = Tseitin { sink: &mut solver };
        let diffs: Vec<Signal> = o1.into_iter().zip(o2).map(|(a, b)| enc.xor(a, b)).collect();
        if !diffs.contains(&Signal::Const(true)) {
            let mut clause = vec![!act];
            clause.extend(diffs.iter().filter_map(|d| match d {
                Signal::Lit(l) => Some(*l),
                Signal::Const(_) => None,
            }));
            solver.add_clause(&clause);
        }
        Ok(DipFinder {
            circuit,
            solver,
            keys: [k1, k2],
            act,
            x,
            observations: Vec::new(),
        })
    }

    pub fn circuit(&self) -> &KeyedCircuit {
        &self.circuit
    }

    pub fn observations(&self) -> &[(Vector, Vector)] {
        &self.observations
    }

    /// Solver calls still running at `deadline` give up.
    pub fn set_deadline(&mut self, deadline: Option<std::time::Instant>) {
        self.solver.set_deadline(deadline);
    }

    pub fn stats(&self) -> SolverStats {
        self.solver.stats()
    }

    /// Restricts both key copies to keys that map `input` to `output`.
    pub fn add_observation(&mut self, input: &[bool], output: &[bool]) {
        assert_eq!(input.len(), self.circuit.num_inputs(), "input width");
        assert_eq!(output.len(), self.circuit.num_outputs(), "output width");
        let ins: Vec<Signal> = input.iter().map(|&b| Signal::Const(b)).collect();
        for keys in &self.keys {
            let outs = self.circuit.encode(&mut self.solver, &ins, keys);
            for (o, &y) in outs.into_iter().zip(output) {
                match o {
                    Signal::Lit(l) => self.solver.add_clause(&[if y { l } else { !l }]),
                    Signal::Const(c) if c != y => self.solver.add_clause(&[]),
                    Signal::Const(_) => {}
                }
            }
        }
        self.observations.push((input.to_vec(), output.to_vec()));
    }

    /// Next distinguishing input, or `None` once every consistent key
    /// computes the same function.
    pub fn find(&mut self) -> Result<Option<Dip>, AttackError> {
        if self.circuit.model().suspects.is_empty() {
            return Ok(None);
        }
        match self.solver.solve_with(&[self.act]) {
            SolveStatus::Unsat => Ok(None),
            SolveStatus::Unknown => Err(AttackError::ConflictBudget),
            SolveStatus::Sat => {
                let model = self.solver.model();
                let input = self.x.iter().map(|&l| model[l.var().index()] == l.is_positive()).collect();
                let witnesses = [
                    self.circuit.decode(&self.keys[0], model),
                    self.circuit.decode(&self.keys[1], model),
                ];
                Ok(Some(Dip { input, witnesses }))
            }
        }
    }

    /// Any key consistent with all observations.
    pub fn extract_key(&mut self) -> Result<KeyAssignment, AttackError> {
        match self.solver.solve_with(&[!self.act]) {
            SolveStatus::Sat => Ok(self.circuit.decode(&self.keys[0], self.solver.model())),
            SolveStatus::Unsat => Err(AttackError::Inconsistent),
            SolveStatus::Unknown => Err(AttackError::ConflictBudget),
        }
    }
}

/// One-shot search: a fresh miter constrained by `observations`.
pub fn find_distinguishing_input(
    apparent: &Netlist,
    model: &SuspicionModel,
    observations: &[(Vector, Vector)],
) -> Result<Option<Vector>, AttackError> {
    let mut finder = DipFinder::new(apparent, model, Branching::default(), Some(super::DEFAULT_MAX_CONFLICTS))?;
    for (x, y) in observations {
        finder.add_observation(x, y);
    }
    Ok(finder.find()?.map(|d| d.input))
}
