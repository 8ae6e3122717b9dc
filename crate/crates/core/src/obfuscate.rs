//! Obfuscating transforms and the realization function.
//!
//! Every transform maps an (apparent netlist, secret) pair to a new pair.
//! The apparent netlist is what delayering reveals; the secret holds what it
//! cannot: camouflaged-cell functions, LUT contents, stuck nets, flops that
//! never latch and hidden coupling links. [`realize`] composes the two into
//! the plain netlist the silicon actually computes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::device::{classify_crosstalk, CrosstalkParams, DomainError, EffectClass, SignalEnv};
use crate::netlist::{Gate, GateKind, NameGen, Netlist, Violation, MAX_LUT_INPUTS};
use crate::simulate::{equivalent, Equivalence, SimError, DEFAULT_EXHAUSTIVE_LIMIT};

/// Random vectors used by the soundness post-check beyond the exhaustive
/// limit.
pub const SOUNDNESS_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CamoFunction {
    Nand,
    Nor,
    Xor,
}

impl CamoFunction {
    pub const ALL: [CamoFunction; 3] = [CamoFunction::Nand, CamoFunction::Nor, CamoFunction::Xor];

    pub fn kind(self) -> GateKind {
        match self {
            CamoFunction::Nand => GateKind::Nand2,
            CamoFunction::Nor => GateKind::Nor2,
            CamoFunction::Xor => GateKind::Xor2,
        }
    }

    pub fn from_kind(kind: GateKind) -> Option<Self> {
        match kind {
            GateKind::Nand2 => Some(CamoFunction::Nand),
            GateKind::Nor2 => Some(CamoFunction::Nor),
            GateKind::Xor2 => Some(CamoFunction::Xor),
            _ => None,
        }
    }

    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            CamoFunction::Nand => !(a & b),
            CamoFunction::Nor => !(a | b),
            CamoFunction::Xor => a ^ b,
        }
    }
}

impl fmt::Display for CamoFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CamoFunction::Nand => "NAND",
            CamoFunction::Nor => "NOR",
            CamoFunction::Xor => "XOR",
        })
    }
}

/// LUT contents: bit `i` is the output for the input combination whose
/// big-endian value is `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LutTable(pub Vec<bool>);

impl LutTable {
    pub fn num_inputs(&self) -> Option<u8> {
        let len = self.0.len();
        (len.is_power_of_two() && len >= 2).then(|| len.trailing_zeros() as u8)
    }

    pub fn lookup(&self, inputs: &[bool]) -> bool {
        let idx = inputs.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        self.0[idx]
    }
}

impl fmt::Display for LutTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for LutTable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("LUT table must be a 0/1 string, got `{s}`")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let table = LutTable(bits);
        match table.num_inputs() {
            Some(n) if n <= MAX_LUT_INPUTS => Ok(table),
            _ => Err(format!("LUT table length {} is not 2^n for 1 <= n <= 6", s.len())),
        }
    }
}

impl Serialize for LutTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LutTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimingEffect {
    /// Data always arrives after the capture edge: `q` holds its init bit.
    #[serde(rename = "never_latched")]
    NeverLatched,
}

mod bit_map {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, bool>, s: S) -> Result<S::Ok, S::Error> {
        let ints: BTreeMap<&String, u8> = map.iter().map(|(k, &v)| (k, v as u8)).collect();
        ints.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, bool>, D::Error> {
        BTreeMap::<String, u8>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| match v {
                0 => Ok((k, false)),
                1 => Ok((k, true)),
                _ => Err(D::Error::custom(format!("stuck value for `{k}` must be 0 or 1"))),
            })
            .collect()
    }
}

/// Hidden manipulations applied to an apparent netlist.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Secret {
    pub camo: BTreeMap<String, CamoFunction>,
    pub lut: BTreeMap<String, LutTable>,
    #[serde(with = "bit_map")]
    pub stuck: BTreeMap<String, bool>,
    pub timing: BTreeMap<String, TimingEffect>,
    /// `(aggressor, victim)` pairs, applied in order.
    pub xlinks: Vec<(String, String)>,
}

impl Secret {
    pub fn is_empty(&self) -> bool {
        self.camo.is_empty()
            && self.lut.is_empty()
            && self.stuck.is_empty()
            && self.timing.is_empty()
            && self.xlinks.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("secret serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks that the secret fits `apparent`.
    pub fn check(&self, apparent: &Netlist) -> Result<(), ObfuscateError> {
        for id in self.camo.keys() {
            match apparent.gate(id) {
                Some(g) if g.kind == GateKind::Camo2 => {}
                _ => return Err(ObfuscateError::Inconsistent(format!("camo entry `{id}` is not a CAMO2 gate"))),
            }
        }
        for (id, table) in &self.lut {
            match apparent.gate(id) {
                Some(g) if matches!(g.kind, GateKind::Lut(n) if table.num_inputs() == Some(n)) => {}
                _ => {
                    return Err(ObfuscateError::Inconsistent(format!(
                        "lut entry `{id}` does not match a LUT gate of its width"
                    )))
                }
            }
        }
        for g in &apparent.gates {
            let covered = match g.kind {
                GateKind::Camo2 => self.camo.contains_key(&g.output),
                GateKind::Lut(_) => self.lut.contains_key(&g.output),
                _ => true,
            };
            if !covered {
                return Err(ObfuscateError::MissingSecret(g.output.clone()));
            }
        }
        for net in self.stuck.keys() {
            if !apparent.has_net(net) {
                return Err(ObfuscateError::UnknownNet(net.clone()));
            }
            if self.timing.contains_key(net) {
                return Err(ObfuscateError::StuckOnTimedFlop(net.clone()));
            }
        }
        for flop in self.timing.keys() {
            if apparent.flop(flop).is_none() {
                return Err(ObfuscateError::UnknownFlop(flop.clone()));
            }
        }
        let mut victims = HashSet::new();
        for (a, v) in &self.xlinks {
            for net in [a, v] {
                if !apparent.has_net(net) {
                    return Err(ObfuscateError::UnknownNet(net.clone()));
                }
            }
            if a == v {
                return Err(ObfuscateError::SelfLink(a.clone()));
            }
            if !victims.insert(v.as_str()) {
                return Err(ObfuscateError::DuplicateVictim(v.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObfuscateError {
    #[error("gate `{gate}` ({kind}) cannot be camouflaged; only NAND2, NOR2 and XOR2 can")]
    NotCamouflageable { gate: String, kind: GateKind },
    #[error("site `{0}` selected more than once")]
    DuplicateSite(String),
    #[error("requested {requested} camouflage sites but only {available} gates are eligible")]
    TooFewSites { requested: usize, available: usize },
    #[error("no gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{gate}` has arity {arity}; LUTs take 1 to 6 inputs")]
    LutArity { gate: String, arity: usize },
    #[error("gate `{0}` is already obfuscated")]
    AlreadyObfuscated(String),
    #[error("no net `{0}`")]
    UnknownNet(String),
    #[error("net `{0}` is already stuck")]
    DuplicateStuck(String),
    #[error("net `{0}` is the output of a flop with a timing effect")]
    StuckOnTimedFlop(String),
    #[error("no flop `{0}`")]
    UnknownFlop(String),
    #[error("coupling below threshold: victim swing {dv_victim} V < v_th {v_th} V")]
    CouplingBelowThreshold { dv_victim: f64, v_th: f64 },
    #[error("link {aggressor} -> {victim} would create a combinational cycle")]
    CycleIntroduced { aggressor: String, victim: String },
    #[error("net `{0}` cannot couple into itself")]
    SelfLink(String),
    #[error("net `{0}` is already a crosstalk victim")]
    DuplicateVictim(String),
    #[error("obfuscated gate `{0}` has no secret entry")]
    MissingSecret(String),
    #[error("inconsistent secret: {0}")]
    Inconsistent(String),
    #[error("transform changed the realized function; counterexample {0:?}")]
    Unsound(Vec<bool>),
    #[error(transparent)]
    Device(#[from] DomainError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Invalid(#[from] Violation),
}

/// How camouflage sites are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sites {
    Explicit(Vec<String>),
    /// Seeded uniform draw without replacement over eligible gates.
    Random { count: usize, seed: u64 },
}

/// An apparent netlist paired with the secret that realizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Obfuscated {
    pub apparent: Netlist,
    pub secret: Secret,
}

impl Obfuscated {
    pub fn from_plain(n: &Netlist) -> Self {
        Obfuscated {
            apparent: n.clone(),
            secret: Secret::default(),
        }
    }

    pub fn realize(&self) -> Result<Netlist, ObfuscateError> {
        realize(&self.apparent, &self.secret)
    }

    /// Fails unless `next` realizes the same function as `self`.
    fn ensure_sound(&self, next: Obfuscated) -> Result<Obfuscated, ObfuscateError> {
        let before = self.realize()?;
        let after = next.realize()?;
        match equivalent(&before, &after, DEFAULT_EXHAUSTIVE_LIMIT, SOUNDNESS_SAMPLES, 0)? {
            Equivalence::Equal => Ok(next),
            Equivalence::Counterexample(v) => Err(ObfuscateError::Unsound(v)),
        }
    }

    pub fn camouflage(&self, sites: &Sites) -> Result<Obfuscated, ObfuscateError> {
        let chosen: Vec<usize> = match sites {
            Sites::Explicit(ids) => {
                let mut seen = HashSet::new();
                let mut out = Vec::with_capacity(ids.len());
                for id in ids {
                    if !seen.insert(id.as_str()) {
                        return Err(ObfuscateError::DuplicateSite(id.clone()));
                    }
                    let idx = self
                        .apparent
                        .gate_index(id)
                        .ok_or_else(|| ObfuscateError::UnknownGate(id.clone()))?;
                    let kind = self.apparent.gates[idx].kind;
                    if CamoFunction::from_kind(kind).is_none() {
                        return Err(ObfuscateError::NotCamouflageable { gate: id.clone(), kind });
                    }
                    out.push(idx);
                }
                out
            }
            Sites::Random { count, seed } => {
                let eligible: Vec<usize> = self
                    .apparent
                    .gates
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| CamoFunction::from_kind(g.kind).is_some())
                    .map(|(i, _)| i)
                    .collect();
                if *count > eligible.len() {
                    return Err(ObfuscateError::TooFewSites {
                        requested: *count,
                        available: eligible.len(),
                    });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut picked: Vec<usize> = sample(&mut rng, eligible.len(), *count)
                    .into_iter()
                    .map(|i| eligible[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
        };
        let mut next = self.clone();
        for idx in chosen {
            let gate = &mut next.apparent.gates[idx];
            let func = CamoFunction::from_kind(gate.kind).expect("eligibility checked");
            gate.kind = GateKind::Camo2;
            next.secret.camo.insert(gate.output.clone(), func);
        }
        self.ensure_sound(next)
    }

    pub fn insert_lut(&self, target: &str) -> Result<Obfuscated, ObfuscateError> {
        let idx = self
            .apparent
            .gate_index(target)
            .ok_or_else(|| ObfuscateError::UnknownGate(target.to_string()))?;
        let gate = &self.apparent.gates[idx];
        if gate.kind.is_obfuscated() {
            return Err(ObfuscateError::AlreadyObfuscated(target.to_string()));
        }
        let arity = gate.kind.arity();
        if !(1..=MAX_LUT_INPUTS as usize).contains(&arity) {
            return Err(ObfuscateError::LutArity {
                gate: target.to_string(),
                arity,
            });
        }
        let table = LutTable(
            (0..1usize << arity)
                .map(|i| {
                    let bits: Vec<bool> = (0..arity).map(|j| (i >> (arity - 1 - j)) & 1 == 1).collect();
                    gate.kind.eval(&bits).expect("plain gate")
                })
                .collect(),
        );
        let mut next = self.clone();
        next.apparent.gates[idx].kind = GateKind::Lut(arity as u8);
        next.secret.lut.insert(target.to_string(), table);
        self.ensure_sound(next)
    }

    /// Forces `net` to `value`. The apparent netlist is untouched.
    pub fn inject_stuck_at(&self, net: &str, value: bool) -> Result<Obfuscated, ObfuscateError> {
        if !self.apparent.has_net(net) {
            return Err(ObfuscateError::UnknownNet(net.to_string()));
        }
        if self.secret.stuck.contains_key(net) {
            return Err(ObfuscateError::DuplicateStuck(net.to_string()));
        }
        if self.secret.timing.contains_key(net) {
            return Err(ObfuscateError::StuckOnTimedFlop(net.to_string()));
        }
        let mut next = self.clone();
        next.secret.stuck.insert(net.to_string(), value);
        Ok(next)
    }

    pub fn inject_timing_fault(&self, flop: &str) -> Result<Obfuscated, ObfuscateError> {
        if self.apparent.flop(flop).is_none() {
            return Err(ObfuscateError::UnknownFlop(flop.to_string()));
        }
        if self.secret.stuck.contains_key(flop) {
            return Err(ObfuscateError::StuckOnTimedFlop(flop.to_string()));
        }
        let mut next = self.clone();
        next.secret.timing.insert(flop.to_string(), TimingEffect::NeverLatched);
        Ok(next)
    }

    pub fn add_dummy_logic(&self, count: usize, seed: u64) -> Obfuscated {
        Obfuscated {
            apparent: add_dummy_logic(&self.apparent, count, seed),
            secret: self.secret.clone(),
        }
    }

    /// Hidden coupling from `aggressor` into `victim`, accepted only when the
    /// physics lifts the victim past the threshold.
    pub fn add_crosstalk_link(
        &self,
        aggressor: &str,
        victim: &str,
        p: &CrosstalkParams,
        dv: f64,
        env: &SignalEnv,
    ) -> Result<Obfuscated, ObfuscateError> {
        for net in [aggressor, victim] {
            if !self.apparent.has_net(net) {
                return Err(ObfuscateError::UnknownNet(net.to_string()));
            }
        }
        if aggressor == victim {
            return Err(ObfuscateError::SelfLink(aggressor.to_string()));
        }
        if self.secret.xlinks.iter().any(|(_, v)| v == victim) {
            return Err(ObfuscateError::DuplicateVictim(victim.to_string()));
        }
        if classify_crosstalk(p, dv, env)? != EffectClass::StealthySignal {
            return Err(ObfuscateError::CouplingBelowThreshold {
                dv_victim: crate::device::crosstalk_delta_v(p, dv)?,
                v_th: env.v_th,
            });
        }
        let mut next = self.clone();
        next.secret.xlinks.push((aggressor.to_string(), victim.to_string()));
        match next.realize() {
            Ok(_) => Ok(next),
            Err(ObfuscateError::Invalid(Violation::CombinationalCycle(_))) => Err(ObfuscateError::CycleIntroduced {
                aggressor: aggressor.to_string(),
                victim: victim.to_string(),
            }),
            Err(e) => Err(e),
        }
    }
}

pub fn camouflage(n: &Netlist, sites: &Sites) -> Result<(Netlist, Secret), ObfuscateError> {
    let o = Obfuscated::from_plain(n).camouflage(sites)?;
    Ok((o.apparent, o.secret))
}

pub fn insert_lut(n: &Netlist, target: &str) -> Result<(Netlist, Secret), ObfuscateError> {
    let o = Obfuscated::from_plain(n).insert_lut(target)?;
    Ok((o.apparent, o.secret))
}

fn with_secret(apparent: &Netlist, secret: &Secret) -> Obfuscated {
    Obfuscated {
        apparent: apparent.clone(),
        secret: secret.clone(),
    }
}

pub fn inject_stuck_at(apparent: &Netlist, secret: &Secret, net: &str, value: bool) -> Result<Secret, ObfuscateError> {
    Ok(with_secret(apparent, secret).inject_stuck_at(net, value)?.secret)
}

pub fn inject_timing_fault(apparent: &Netlist, secret: &Secret, flop: &str) -> Result<Secret, ObfuscateError> {
    Ok(with_secret(apparent, secret).inject_timing_fault(flop)?.secret)
}

pub fn add_crosstalk_link(
    apparent: &Netlist,
    secret: &Secret,
    aggressor: &str,
    victim: &str,
    p: &CrosstalkParams,
    dv: f64,
    env: &SignalEnv,
) -> Result<Secret, ObfuscateError> {
    Ok(with_secret(apparent, secret)
        .add_crosstalk_link(aggressor, victim, p, dv, env)?
        .secret)
}

const DUMMY_KINDS: [GateKind; 7] = [
    GateKind::And2,
    GateKind::Or2,
    GateKind::Nand2,
    GateKind::Nor2,
    GateKind::Xor2,
    GateKind::Xnor2,
    GateKind::Not,
];

/// Appends `count` junk gates. They read any existing net but nothing real
/// reads them, so every output keeps its function.
pub fn add_dummy_logic(n: &Netlist, count: usize, seed: u64) -> Netlist {
    let mut out = n.clone();
    if count == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = NameGen::new(n);
    let mut pool: Vec<String> = n.driven_nets().into_iter().map(String::from).collect();
    for i in 0..count {
        let kind = DUMMY_KINDS[rng.gen_range(0..DUMMY_KINDS.len())];
        let output = names.fresh(&format!("dummy{i}"));
        let inputs = if pool.is_empty() {
            Vec::new()
        } else {
            (0..kind.arity()).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
        };
        let gate = if inputs.len() == kind.arity() {
            Gate { kind, output, inputs }
        } else {
            Gate {
                kind: GateKind::Const0,
                output,
                inputs: Vec::new(),
            }
        };
        pool.push(gate.output.clone());
        out.gates.push(gate);
    }
    out
}

/// Points every reader of `from` at `to`, except gate `skip`.
fn redirect_readers(n: &mut Netlist, from: &str, to: &str, skip: Option<usize>) {
    for (i, g) in n.gates.iter_mut().enumerate() {
        if Some(i) == skip {
            continue;
        }
        for net in g.inputs.iter_mut().filter(|net| *net == from) {
            *net = to.to_string();
        }
    }
    for f in &mut n.flops {
        if f.d == from {
            f.d = to.to_string();
        }
    }
    for o in n.outputs.iter_mut().filter(|o| *o == from) {
        *o = to.to_string();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LutNode {
    Const(bool),
    Net(String),
}

/// Plain gates computing `table` over `inputs` as a reduced Shannon mux
/// tree rooted at `output`.
pub(crate) fn lut_to_gates(output: &str, inputs: &[String], table: &LutTable, names: &mut NameGen) -> Vec<Gate> {
    fn build(inputs: &[String], bits: &[bool], output: &str, names: &mut NameGen, gates: &mut Vec<Gate>) -> LutNode {
        if bits.iter().all(|&b| b == bits[0]) {
            return LutNode::Const(bits[0]);
        }
        let sel = &inputs[0];
        if bits.len() == 2 {
            // Not all equal, so the table is either [0,1] or [1,0].
            if bits[1] {
                return LutNode::Net(sel.clone());
            }
            let out = names.fresh(&format!("{output}_lut"));
            gates.push(Gate {
                kind: GateKind::Not,
                output: out.clone(),
                inputs: vec![sel.clone()],
            });
            return LutNode::Net(out);
        }
        let half = bits.len() / 2;
        let lo = build(&inputs[1..], &bits[..half], output, names, gates);
        let hi = build(&inputs[1..], &bits[half..], output, names, gates);
        if lo == hi {
            return lo;
        }
        let mut net_of = |node: LutNode, gates: &mut Vec<Gate>| match node {
            LutNode::Net(n) => n,
            LutNode::Const(v) => {
                let out = names.fresh(&format!("{output}_lut"));
                gates.push(Gate {
                    kind: if v { GateKind::Const1 } else { GateKind::Const0 },
                    output: out.clone(),
                    inputs: Vec::new(),
                });
                out
            }
        };
        let a = net_of(lo, gates);
        let b = net_of(hi, gates);
        let out = names.fresh(&format!("{output}_lut"));
        gates.push(Gate {
            kind: GateKind::Mux2,
            output: out.clone(),
            inputs: vec![sel.clone(), a, b],
        });
        LutNode::Net(out)
    }

    let mut gates = Vec::new();
    let root = build(inputs, &table.0, output, names, &mut gates);
    match root {
        LutNode::Const(v) => gates.push(Gate {
            kind: if v { GateKind::Const1 } else { GateKind::Const0 },
            output: output.to_string(),
            inputs: Vec::new(),
        }),
        LutNode::Net(net) => match gates.last_mut() {
            Some(last) if last.output == net => last.output = output.to_string(),
            _ => gates.push(Gate {
                kind: GateKind::Buf,
                output: output.to_string(),
                inputs: vec![net],
            }),
        },
    }
    gates
}

/// Builds the netlist the silicon computes.
///
/// Camouflaged cells take their secret function and LUTs expand to mux
/// trees in place. Never-latched flops become constants. Each crosstalk
/// link inserts `victim' = OR(victim, aggressor)` in front of the victim's
/// readers, in list order. Stuck nets are applied last: every reader of the
/// net's final value sees a constant instead.
pub fn realize(apparent: &Netlist, secret: &Secret) -> Result<Netlist, ObfuscateError> {
    secret.check(apparent)?;
    let mut names = NameGen::new(apparent);
    let mut out = Netlist {
        name: apparent.name.clone(),
        inputs: apparent.inputs.clone(),
        outputs: apparent.outputs.clone(),
        gates: Vec::with_capacity(apparent.gates.len()),
        flops: Vec::new(),
    };
    for g in &apparent.gates {
        match g.kind {
            GateKind::Camo2 => out.gates.push(Gate {
                kind: secret.camo[&g.output].kind(),
                output: g.output.clone(),
                inputs: g.inputs.clone(),
            }),
            GateKind::Lut(_) => out
                .gates
                .extend(lut_to_gates(&g.output, &g.inputs, &secret.lut[&g.output], &mut names)),
            _ => out.gates.push(g.clone()),
        }
    }
    for f in &apparent.flops {
        match secret.timing.get(&f.q) {
            Some(TimingEffect::NeverLatched) => out.gates.push(Gate {
                kind: if f.init { GateKind::Const1 } else { GateKind::Const0 },
                output: f.q.clone(),
                inputs: Vec::new(),
            }),
            None => out.flops.push(f.clone()),
        }
    }

    // Net whose value readers currently observe for each coupled victim.
    let mut observed: BTreeMap<&str, String> = BTreeMap::new();
    for (aggressor, victim) in &secret.xlinks {
        let coupled = names.fresh(&format!("{victim}_xt"));
        let agg = observed.get(aggressor.as_str()).cloned().unwrap_or_else(|| aggressor.clone());
        let prev = observed.get(victim.as_str()).cloned().unwrap_or_else(|| victim.clone());
        out.gates.push(Gate {
            kind: GateKind::Or2,
            output: coupled.clone(),
            inputs: vec![prev.clone(), agg],
        });
        let skip = out.gates.len() - 1;
        redirect_readers(&mut out, &prev, &coupled, Some(skip));
        observed.insert(victim, coupled);
    }
    for (net, &value) in &secret.stuck {
        let current = observed.get(net.as_str()).cloned().unwrap_or_else(|| net.clone());
        let forced = names.fresh(&format!("{net}_sa{}", value as u8));
        redirect_readers(&mut out, &current, &forced, None);
        out.gates.push(Gate {
            kind: if value { GateKind::Const1 } else { GateKind::Const0 },
            output: forced,
            inputs: Vec::new(),
        });
    }

    if let Some(v) = out.validate().into_iter().next() {
        return Err(v.into());
    }
    Ok(out)
}
