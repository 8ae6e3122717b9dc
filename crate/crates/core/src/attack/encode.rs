//! Keyed circuit encoding: apparent netlist + suspicion model → CNF.
//!
//! Every suspect gate gets key variables selecting its function among the
//! candidates:
//!
//! * `CAMO2`: two bits `(hi, lo)`, `00` NAND, `01` NOR, `10` XOR; `11` is
//!   forbidden by a blocking clause.
//! * `LUTn`: `2^n` bits, one per table row, multiplexed by the inputs.
//! * plain gate under [`SuspicionMode::EveryGateSuspect`]: two bits, `00`
//!   apparent function, `01` output stuck-at-0, `10` stuck-at-1, `11`
//!   forbidden.
//!
//! Gates are Tseitin-encoded with constant folding, so copies instantiated
//! on known input vectors shrink to the key-dependent cone.

use std::collections::BTreeMap;
use std::ops::Not;

use num_bigint::BigUint;

use super::sat::{ClauseSink, Lit};
use super::AttackError;
use crate::netlist::{Driver, GateKind, Netlist};
use crate::obfuscate::{realize, CamoFunction, LutTable, ObfuscateError, Secret};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Const(bool),
    Lit(Lit),
}

impl Not for Signal {
    type Output = Signal;

    fn not(self) -> Signal {
        match self {
            Signal::Const(b) => Signal::Const(!b),
            Signal::Lit(l) => Signal::Lit(!l),
        }
    }
}

impl From<Lit> for Signal {
    fn from(l: Lit) -> Self {
        Signal::Lit(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SuspicionMode {
    /// Only gates visibly marked as obfuscated are unknown.
    #[default]
    DeclaredOnly,
    /// Any gate may secretly be stuck at 0 or 1.
    EveryGateSuspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSet {
    Camo,
    Lut(u8),
    ApparentOrStuck,
}

impl CandidateSet {
    pub fn key_bits(self) -> usize {
        match self {
            CandidateSet::Camo | CandidateSet::ApparentOrStuck => 2,
            CandidateSet::Lut(n) => 1 << n,
        }
    }

    pub fn size(self) -> BigUint {
        match self {
            CandidateSet::Camo | CandidateSet::ApparentOrStuck => BigUint::from(3u32),
            CandidateSet::Lut(n) => BigUint::from(1u32) << (1usize << n),
        }
    }
}

/// Which gates the attacker treats as unknown and what each might be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuspicionModel {
    pub mode: SuspicionMode,
    /// `(gate index, candidates)` in gate declaration order.
    pub suspects: Vec<(usize, CandidateSet)>,
}

impl SuspicionModel {
    pub fn new(mode: SuspicionMode, apparent: &Netlist) -> Self {
        let suspects = apparent
            .gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| {
                let set = match (g.kind, mode) {
                    (GateKind::Camo2, _) => CandidateSet::Camo,
                    (GateKind::Lut(n), _) => CandidateSet::Lut(n),
                    (_, SuspicionMode::EveryGateSuspect) => CandidateSet::ApparentOrStuck,
                    (_, SuspicionMode::DeclaredOnly) => return None,
                };
                Some((i, set))
            })
            .collect();
        SuspicionModel { mode, suspects }
    }

    /// Number of keys: the product of candidate-set sizes.
    pub fn key_space(&self) -> BigUint {
        self.suspects
            .iter()
            .fold(BigUint::from(1u32), |acc, (_, s)| acc * s.size())
    }

    pub fn key_bits(&self) -> usize {
        self.suspects.iter().map(|(_, s)| s.key_bits()).sum()
    }

    /// `3^16 = 43046721`-style description; the exact value is printed for
    /// at most `exact_limit` suspects.
    pub fn describe_key_space(&self, exact_limit: usize) -> String {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (_, s) in &self.suspects {
            let base = match s {
                CandidateSet::Camo | CandidateSet::ApparentOrStuck => "3".to_string(),
                CandidateSet::Lut(n) => format!("2^{}", 1usize << n),
            };
            *counts.entry(base).or_default() += 1;
        }
        if counts.is_empty() {
            return "1".into();
        }
        // "3" sorts before "2^k" lexically otherwise; keep camo first.
        let mut terms: Vec<(String, usize)> = counts.into_iter().collect();
        terms.sort_by_key(|(b, _)| (b != "3", b.clone()));
        let power = terms
            .iter()
            .map(|(b, c)| {
                if b.contains('^') {
                    format!("({b})^{c}")
                } else {
                    format!("{b}^{c}")
                }
            })
            .collect::<Vec<_>>()
            .join(" * ");
        if self.suspects.len() <= exact_limit {
            format!("{power} = {}", self.key_space())
        } else {
            power
        }
    }
}

/// One chosen function for a suspect gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    Camo(CamoFunction),
    Lut(LutTable),
    Apparent,
    StuckAt(bool),
}

/// Gate id → chosen candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyAssignment(pub BTreeMap<String, Candidate>);

impl KeyAssignment {
    /// The key in secret form: stuck candidates become stuck gate outputs.
    pub fn to_secret(&self) -> Secret {
        let mut s = Secret::default();
        for (id, c) in &self.0 {
            match c {
                Candidate::Camo(f) => {
                    s.camo.insert(id.clone(), *f);
                }
                Candidate::Lut(t) => {
                    s.lut.insert(id.clone(), t.clone());
                }
                Candidate::StuckAt(v) => {
                    s.stuck.insert(id.clone(), *v);
                }
                Candidate::Apparent => {}
            }
        }
        s
    }

    pub fn realize(&self, apparent: &Netlist) -> Result<Netlist, ObfuscateError> {
        realize(apparent, &self.to_secret())
    }
}

/// Per-suspect key literals, parallel to [`SuspicionModel::suspects`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyVars(pub Vec<Vec<Lit>>);

impl KeyVars {
    pub fn all(&self) -> impl Iterator<Item = Lit> + '_ {
        self.0.iter().flatten().copied()
    }
}

/// An apparent netlist prepared for repeated CNF instantiation.
#[derive(Debug, Clone)]
pub struct KeyedCircuit {
    apparent: Netlist,
    model: SuspicionModel,
    order: Vec<usize>,
    /// Slot of each gate input: inputs first, then gates by index.
    gate_inputs: Vec<Vec<usize>>,
    output_slots: Vec<usize>,
    suspect_of: Vec<Option<usize>>,
}

impl KeyedCircuit {
    pub fn new(apparent: &Netlist, model: &SuspicionModel) -> Result<Self, AttackError> {
        if !apparent.is_combinational() {
            return Err(AttackError::Sequential);
        }
        if let Some(v) = apparent.validate().into_iter().next() {
            return Err(v.into());
        }
        let drivers = apparent.drivers();
        let k = apparent.inputs.len();
        let slot = |net: &str| match drivers[net] {
            Driver::Input(i) => i,
            Driver::Gate(i) => k + i,
            Driver::Flop(_) => unreachable!("combinational"),
        };
        let mut suspect_of = vec![None; apparent.gates.len()];
        for (s, &(gi, set)) in model.suspects.iter().enumerate() {
            let kind = apparent.gates[gi].kind;
            let fits = match set {
                CandidateSet::Camo => kind == GateKind::Camo2,
                CandidateSet::Lut(n) => kind == GateKind::Lut(n),
                CandidateSet::ApparentOrStuck => !kind.is_obfuscated(),
            };
            if !fits {
                return Err(AttackError::Unsupported(format!(
                    "candidate set {set:?} does not fit gate `{}` ({kind})",
                    apparent.gates[gi].output
                )));
            }
            suspect_of[gi] = Some(s);
        }
        if let Some(g) = apparent
            .gates
            .iter()
            .enumerate()
            .find(|(i, g)| g.kind.is_obfuscated() && suspect_of[*i].is_none())
        {
            return Err(AttackError::Unsupported(format!(
                "obfuscated gate `{}` is not covered by the suspicion model",
                g.1.output
            )));
        }
        Ok(KeyedCircuit {
            order: apparent.topological_indices()?,
            gate_inputs: apparent
                .gates
                .iter()
                .map(|g| g.inputs.iter().map(|n| slot(n)).collect())
                .collect(),
            output_slots: apparent.outputs.iter().map(|n| slot(n)).collect(),
            suspect_of,
            apparent: apparent.clone(),
            model: model.clone(),
        })
    }

    pub fn apparent(&self) -> &Netlist {
        &self.apparent
    }

    pub fn model(&self) -> &SuspicionModel {
        &self.model
    }

    pub fn num_inputs(&self) -> usize {
        self.apparent.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.apparent.outputs.len()
    }

    /// Fresh key variables plus the clauses forbidding unused code points.
    pub fn alloc_keys(&self, sink: &mut impl ClauseSink) -> KeyVars {
        let vars = self
            .model
            .suspects
            .iter()
            .map(|&(_, set)| {
                let bits: Vec<Lit> = (0..set.key_bits()).map(|_| sink.new_var().pos()).collect();
                if matches!(set, CandidateSet::Camo | CandidateSet::ApparentOrStuck) {
                    sink.add_clause(&[!bits[0], !bits[1]]);
                }
                bits
            })
            .collect();
        KeyVars(vars)
    }

    /// Clauses computing the keyed circuit on `inputs`; returns the output
    /// signals.
    pub fn encode(&self, sink: &mut impl ClauseSink, inputs: &[Signal], keys: &KeyVars) -> Vec<Signal> {
        assert_eq!(inputs.len(), self.num_inputs(), "input width");
        let k = inputs.len();
        let mut slots = vec![Signal::Const(false); k + self.apparent.gates.len()];
        slots[..k].copy_from_slice(inputs);
        let mut enc = Tseitin { sink };
        for &gi in &self.order {
            let gate = &self.apparent.gates[gi];
            let ins: Vec<Signal> = self.gate_inputs[gi].iter().map(|&s| slots[s]).collect();
            let key = self.suspect_of[gi].map(|s| keys.0[s].as_slice());
            let out = match (gate.kind, key) {
                (GateKind::Camo2, Some(kb)) => enc.table(&[kb[0].into(), kb[1].into(), ins[0], ins[1]], |row| {
                    let code = row >> 2;
                    let a = row >> 1 & 1 == 1;
                    let b = row & 1 == 1;
                    CamoFunction::ALL.get(code).map(|f| f.eval(a, b))
                }),
                (GateKind::Lut(_), Some(kb)) => enc.lut(&ins, kb),
                (kind, Some(kb)) => {
                    let g = enc.plain(kind, &ins);
                    enc.table(&[kb[0].into(), kb[1].into(), g], |row| match row >> 1 {
                        0 => Some(row & 1 == 1),
                        1 => Some(false),
                        2 => Some(true),
                        _ => None,
                    })
                }
                (kind, None) => enc.plain(kind, &ins),
            };
            slots[k + gi] = out;
        }
        self.output_slots.iter().map(|&s| slots[s]).collect()
    }

    /// Reads a key back out of a model.
    pub fn decode(&self, keys: &KeyVars, model: &[bool]) -> KeyAssignment {
        let val = |l: Lit| model[l.var().index()] == l.is_positive();
        let mut out = BTreeMap::new();
        for (s, &(gi, set)) in self.model.suspects.iter().enumerate() {
            let bits: Vec<bool> = keys.0[s].iter().map(|&l| val(l)).collect();
            let code = || (bits[0] as usize) << 1 | bits[1] as usize;
            let cand = match set {
                CandidateSet::Camo => Candidate::Camo(CamoFunction::ALL[code().min(2)]),
                CandidateSet::Lut(_) => Candidate::Lut(LutTable(bits.clone())),
                CandidateSet::ApparentOrStuck => match code() {
                    0 => Candidate::Apparent,
                    1 => Candidate::StuckAt(false),
                    _ => Candidate::StuckAt(true),
                },
            };
            out.insert(self.apparent.gates[gi].output.clone(), cand);
        }
        KeyAssignment(out)
    }
}

/// Builds `(circuit, key variables)` with the keys allocated in `sink`.
pub fn encode_keyed(
    apparent: &Netlist,
    model: &SuspicionModel,
    sink: &mut impl ClauseSink,
) -> Result<(KeyedCircuit, KeyVars), AttackError> {
    let circuit = KeyedCircuit::new(apparent, model)?;
    let keys = circuit.alloc_keys(sink);
    Ok((circuit, keys))
}

/// Tseitin encoder with constant folding.
pub struct Tseitin<'a, S: ClauseSink> {
    pub sink: &'a mut S,
}

impl<S: ClauseSink> Tseitin<'_, S> {
    fn fresh(&mut self) -> Lit {
        self.sink.new_var().pos()
    }

    pub fn and(&mut self, a: Signal, b: Signal) -> Signal {
        match (a, b) {
            (Signal::Const(false), _) | (_, Signal::Const(false)) => Signal::Const(false),
            (Signal::Const(true), x) | (x, Signal::Const(true)) => x,
            (Signal::Lit(x), Signal::Lit(y)) if x == y => a,
            (Signal::Lit(x), Signal::Lit(y)) if x == !y => Signal::Const(false),
            (Signal::Lit(x), Signal::Lit(y)) => {
                let g = self.fresh();
                self.sink.add_clause(&[!g, x]);
                self.sink.add_clause(&[!g, y]);
                self.sink.add_clause(&[g, !x, !y]);
                g.into()
            }
        }
    }

    pub fn or(&mut self, a: Signal, b: Signal) -> Signal {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Signal, b: Signal) -> Signal {
        match (a, b) {
            (Signal::Const(c), x) | (x, Signal::Const(c)) => {
                if c {
                    !x
                } else {
                    x
                }
            }
            (Signal::Lit(x), Signal::Lit(y)) if x == y => Signal::Const(false),
            (Signal::Lit(x), Signal::Lit(y)) if x == !y => Signal::Const(true),
            (Signal::Lit(x), Signal::Lit(y)) => {
                let g = self.fresh();
                self.sink.add_clause(&[!g, x, y]);
                self.sink.add_clause(&[!g, !x, !y]);
                self.sink.add_clause(&[g, !x, y]);
                self.sink.add_clause(&[g, x, !y]);
                g.into()
            }
        }
    }

    /// `sel ? b : a`.
    pub fn mux(&mut self, sel: Signal, a: Signal, b: Signal) -> Signal {
        match (sel, a, b) {
            (Signal::Const(s), _, _) => {
                if s {
                    b
                } else {
                    a
                }
            }
            _ if a == b => a,
            (s, Signal::Const(false), b) => self.and(s, b),
            (s, Signal::Const(true), b) => self.or(!s, b),
            (s, a, Signal::Const(false)) => self.and(!s, a),
            (s, a, Signal::Const(true)) => self.or(s, a),
            (Signal::Lit(s), Signal::Lit(x), Signal::Lit(y)) => {
                let g = self.fresh();
                self.sink.add_clause(&[s, !x, g]);
                self.sink.add_clause(&[s, x, !g]);
                self.sink.add_clause(&[!s, !y, g]);
                self.sink.add_clause(&[!s, y, !g]);
                self.sink.add_clause(&[!x, !y, g]);
                self.sink.add_clause(&[x, y, !g]);
                g.into()
            }
        }
    }

    pub fn plain(&mut self, kind: GateKind, ins: &[Signal]) -> Signal {
        match kind {
            GateKind::Not => !ins[0],
            GateKind::Buf => ins[0],
            GateKind::And2 => self.and(ins[0], ins[1]),
            GateKind::Or2 => self.or(ins[0], ins[1]),
            GateKind::Nand2 => !self.and(ins[0], ins[1]),
            GateKind::Nor2 => !self.or(ins[0], ins[1]),
            GateKind::Xor2 => self.xor(ins[0], ins[1]),
            GateKind::Xnor2 => !self.xor(ins[0], ins[1]),
            GateKind::Mux2 => self.mux(ins[0], ins[1], ins[2]),
            GateKind::Const0 => Signal::Const(false),
            GateKind::Const1 => Signal::Const(true),
            GateKind::Camo2 | GateKind::Lut(_) => panic!("obfuscated gate without key"),
        }
    }

    /// Output of an arbitrary table over `selectors` (first selector is the
    /// most significant row bit). `None` rows are don't-cares.
    pub fn table(&mut self, selectors: &[Signal], f: impl Fn(usize) -> Option<bool>) -> Signal {
        let m = selectors.len();
        let consistent = |row: usize| {
            selectors.iter().enumerate().all(|(j, s)| match s {
                Signal::Const(c) => (row >> (m - 1 - j) & 1 == 1) == *c,
                Signal::Lit(_) => true,
            })
        };
        let rows: Vec<(usize, bool)> = (0..1usize << m)
            .filter(|&r| consistent(r))
            .filter_map(|r| f(r).map(|v| (r, v)))
            .collect();
        match rows.first() {
            None => return Signal::Const(false),
            Some(&(_, v0)) if rows.iter().all(|&(_, v)| v == v0) => return Signal::Const(v0),
            _ => {}
        }
        let o = self.fresh();
        let mut clause = Vec::with_capacity(m + 1);
        for (r, v) in rows {
            clause.clear();
            for (j, s) in selectors.iter().enumerate() {
                if let Signal::Lit(l) = s {
                    let bit = r >> (m - 1 - j) & 1 == 1;
                    clause.push(if bit { !*l } else { *l });
                }
            }
            clause.push(if v { o } else { !o });
            self.sink.add_clause(&clause);
        }
        o.into()
    }

    /// Key-programmed LUT: output equals `keys[i]` where `i` is the
    /// big-endian value of `ins`.
    pub fn lut(&mut self, ins: &[Signal], keys: &[Lit]) -> Signal {
        let n = ins.len();
        if let Some(consts) = ins
            .iter()
            .map(|s| match s {
                Signal::Const(c) => Some(*c),
                Signal::Lit(_) => None,
            })
            .collect::<Option<Vec<bool>>>()
        {
            let idx = consts.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
            return keys[idx].into();
        }
        let o = self.fresh();
        let mut cond = Vec::with_capacity(n + 2);
        for (i, &k) in keys.iter().enumerate() {
            cond.clear();
            let mut possible = true;
            for (j, s) in ins.iter().enumerate() {
                let bit = i >> (n - 1 - j) & 1 == 1;
                match s {
                    Signal::Const(c) if *c != bit => possible = false,
                    Signal::Const(_) => {}
                    Signal::Lit(l) => cond.push(if bit { !*l } else { *l }),
                }
            }
            if !possible {
                continue;
            }
            let mut c1 = cond.clone();
            c1.extend([!k, o]);
            self.sink.add_clause(&c1);
            cond.extend([k, !o]);
            self.sink.add_clause(&cond);
        }
        o.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::sat::{Cnf, SolveStatus, Solver};
    use crate::netlist::{parse_netlist, Gate};

    fn camo1() -> Netlist {
        parse_netlist(".inputs a b\n.outputs y\n.gate CAMO2 y a b\n.end").unwrap()
    }

    #[test]
    fn camo_key_bits_and_blocking_clause() {
        let n = camo1();
        let model = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        let mut cnf = Cnf::default();
        let (_, keys) = encode_keyed(&n, &model, &mut cnf).unwrap();
        assert_eq!(keys.0.len(), 1);
        assert_eq!(keys.0[0].len(), 2);
        assert_eq!(cnf.clauses, vec![vec![!keys.0[0][0], !keys.0[0][1]]]);
        assert_eq!(model.describe_key_space(64), "3^1 = 3");
    }

    #[test]
    fn lut2_selects_key_bit() {
        let n = parse_netlist(".inputs a b\n.outputs y\n.gate LUT2 y a b\n.end").unwrap();
        let model = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        let mut s = Solver::new();
        let (c, keys) = encode_keyed(&n, &model, &mut s).unwrap();
        assert_eq!(keys.0[0].len(), 4);
        let out = c.encode(&mut s, &[Signal::Const(true), Signal::Const(false)], &keys);
        assert_eq!(out, vec![Signal::Lit(keys.0[0][2])]);
        // With symbolic inputs the output follows key bit 2 at (1,0).
        let a = s.new_var().pos();
        let b = s.new_var().pos();
        let out = c.encode(&mut s, &[a.into(), b.into()], &keys);
        let Signal::Lit(o) = out[0] else { panic!() };
        assert_eq!(s.solve_with(&[a, !b, keys.0[0][2], !o]), SolveStatus::Unsat);
        assert_eq!(s.solve_with(&[a, !b, !keys.0[0][2], o]), SolveStatus::Unsat);
        assert_eq!(s.solve_with(&[a, !b, keys.0[0][2], o]), SolveStatus::Sat);
    }

    #[test]
    fn every_gate_suspect_key_count() {
        let n = parse_netlist(".inputs a b c\n.outputs y\n.gate OR2 n1 b c\n.gate AND2 n2 a n1\n.gate NOT y n2\n.end").unwrap();
        let model = SuspicionModel::new(SuspicionMode::EveryGateSuspect, &n);
        let mut cnf = Cnf::default();
        let (_, keys) = encode_keyed(&n, &model, &mut cnf).unwrap();
        assert_eq!(keys.all().count(), 6);
        assert_eq!(model.describe_key_space(64), "3^3 = 27");
        assert!(SuspicionModel::new(SuspicionMode::DeclaredOnly, &n).suspects.is_empty());
    }

    #[test]
    fn key_space_descriptions() {
        let mut gates: Vec<Gate> = (0..70).map(|i| Gate::new(GateKind::Camo2, format!("g{i}"), &["a", "b"])).collect();
        let n = Netlist {
            inputs: vec!["a".into(), "b".into()],
            outputs: vec!["g0".into()],
            gates: gates.clone(),
            ..Default::default()
        };
        let m = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        assert_eq!(m.describe_key_space(64), "3^70");
        gates.truncate(16);
        gates.push(Gate::new(GateKind::Lut(2), "l", &["a", "b"]));
        let n = Netlist { gates, ..n };
        let m = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        assert_eq!(m.describe_key_space(64), "3^16 * (2^4)^1 = 688747536");
    }

    #[test]
    fn decode_round_trips_through_secret() {
        let n = camo1();
        let model = SuspicionModel::new(SuspicionMode::DeclaredOnly, &n);
        let mut s = Solver::new();
        let (c, keys) = encode_keyed(&n, &model, &mut s).unwrap();
        // Force NOR: hi=0, lo=1.
        assert_eq!(s.solve_with(&[!keys.0[0][0], keys.0[0][1]]), SolveStatus::Sat);
        let key = c.decode(&keys, s.model());
        assert_eq!(key.0["y"], Candidate::Camo(CamoFunction::Nor));
        assert_eq!(key.to_secret().camo["y"], CamoFunction::Nor);
    }
}
