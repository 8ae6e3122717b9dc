//! Two-valued evaluation of plain (or realized) netlists.
//!
//! Netlists are compiled once into a flat op list and evaluated 64 vectors
//! at a time, one vector per bit lane of a `u64`. Truth tables and
//! equivalence checks chunk the input space into such words and fan the
//! chunks out through [`crate::exec`].
//!
//! Flops evaluate in their reset state: `q` holds the init bit unless
//! [`simulate_sequence`] is used to clock them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::netlist::{Driver, GateKind, Netlist, Violation};

/// Input (or output) bits aligned with the netlist's declaration order.
pub type Vector = Vec<bool>;

/// Hard cap on exhaustive enumeration.
pub const TRUTH_TABLE_MAX_INPUTS: usize = 20;
/// Default input count up to which [`equivalent`] enumerates exhaustively.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("vector has {found} bits, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("gate `{0}` is obfuscated and has no realized function")]
    Unrealized(String),
    #[error("{0} inputs exceed the truth-table cap of {TRUTH_TABLE_MAX_INPUTS}")]
    TooManyInputs(usize),
    #[error("netlists differ in arity: {0} vs {1} inputs, {2} vs {3} outputs")]
    ArityMismatch(usize, usize, usize, usize),
    #[error("invalid netlist: {0}")]
    Invalid(#[from] Violation),
    #[error("invalid vector character `{0}`")]
    BadVector(char),
}

#[derive(Debug, Clone, Copy)]
struct Op {
    kind: GateKind,
    out: u32,
    ins: [u32; 3],
}

/// A netlist lowered to slot-indexed ops in topological order.
#[derive(Debug, Clone)]
pub struct Compiled {
    num_slots: usize,
    inputs: Vec<u32>,
    outputs: Vec<u32>,
    flop_q: Vec<u32>,
    flop_d: Vec<u32>,
    flop_init: Vec<bool>,
    ops: Vec<Op>,
}

impl Compiled {
    pub fn new(n: &Netlist) -> Result<Self, SimError> {
        if let Some(g) = n.gates.iter().find(|g| g.kind.is_obfuscated()) {
            return Err(SimError::Unrealized(g.output.clone()));
        }
        if let Some(v) = n.validate().into_iter().next() {
            return Err(v.into());
        }
        let drivers = n.drivers();
        // Slot per driver: inputs, then flops, then gates.
        let slot = |net: &str| -> u32 {
            match drivers[net] {
                Driver::Input(i) => i as u32,
                Driver::Flop(i) => (n.inputs.len() + i) as u32,
                Driver::Gate(i) => (n.inputs.len() + n.flops.len() + i) as u32,
            }
        };
        let order = n.topological_indices()?;
        let ops = order
            .into_iter()
            .map(|i| {
                let g = &n.gates[i];
                let mut ins = [0u32; 3];
                for (k, net) in g.inputs.iter().enumerate() {
                    ins[k] = slot(net);
                }
                Op {
                    kind: g.kind,
                    out: slot(&g.output),
                    ins,
                }
            })
            .collect();
        Ok(Compiled {
            num_slots: n.inputs.len() + n.flops.len() + n.gates.len(),
            inputs: (0..n.inputs.len() as u32).collect(),
            outputs: n.outputs.iter().map(|o| slot(o)).collect(),
            flop_q: n.flops.iter().map(|f| slot(&f.q)).collect(),
            flop_d: n.flops.iter().map(|f| slot(&f.d)).collect(),
            flop_init: n.flops.iter().map(|f| f.init).collect(),
            ops,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    fn run(&self, slots: &mut [u64]) {
        for op in &self.ops {
            let x = |k: usize| slots[op.ins[k] as usize];
            let v = match op.kind {
                GateKind::Not => !x(0),
                GateKind::Buf => x(0),
                GateKind::And2 => x(0) & x(1),
                GateKind::Or2 => x(0) | x(1),
                GateKind::Nand2 => !(x(0) & x(1)),
                GateKind::Nor2 => !(x(0) | x(1)),
                GateKind::Xor2 => x(0) ^ x(1),
                GateKind::Xnor2 => !(x(0) ^ x(1)),
                GateKind::Mux2 => (!x(0) & x(1)) | (x(0) & x(2)),
                GateKind::Const0 => 0,
                GateKind::Const1 => !0,
                GateKind::Camo2 | GateKind::Lut(_) => unreachable!("rejected at compile time"),
            };
            slots[op.out as usize] = v;
        }
    }

    /// Evaluates 64 vectors at once; `inputs[j]` holds input `j` across
    /// lanes. Flops sit at their init value.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        let mut slots = vec![0u64; self.num_slots];
        self.eval_words_into(inputs, &mut slots)
    }

    fn eval_words_into(&self, inputs: &[u64], slots: &mut [u64]) -> Vec<u64> {
        slots[..inputs.len()].copy_from_slice(inputs);
        for (q, &init) in self.flop_q.iter().zip(&self.flop_init) {
            slots[*q as usize] = if init { !0 } else { 0 };
        }
        self.run(slots);
        self.outputs.iter().map(|&o| slots[o as usize]).collect()
    }

    pub fn eval(&self, input: &[bool]) -> Result<Vector, SimError> {
        if input.len() != self.inputs.len() {
            return Err(SimError::LengthMismatch {
                expected: self.inputs.len(),
                found: input.len(),
            });
        }
        let words: Vec<u64> = input.iter().map(|&b| b as u64).collect();
        Ok(self.eval_words(&words).into_iter().map(|w| w & 1 == 1).collect())
    }
}

pub fn evaluate(n: &Netlist, input: &[bool]) -> Result<Vector, SimError> {
    Compiled::new(n)?.eval(input)
}

/// Clocks the netlist once per input vector starting from the flops' init
/// state; returns the outputs seen before each clock edge.
pub fn simulate_sequence(n: &Netlist, inputs: &[Vector]) -> Result<Vec<Vector>, SimError> {
    let c = Compiled::new(n)?;
    let mut state: Vec<bool> = c.flop_init.clone();
    let mut slots = vec![0u64; c.num_slots];
    let mut out = Vec::with_capacity(inputs.len());
    for v in inputs {
        if v.len() != c.inputs.len() {
            return Err(SimError::LengthMismatch {
                expected: c.inputs.len(),
                found: v.len(),
            });
        }
        for (j, &b) in v.iter().enumerate() {
            slots[j] = b as u64;
        }
        for (q, &s) in c.flop_q.iter().zip(&state) {
            slots[*q as usize] = s as u64;
        }
        c.run(&mut slots);
        out.push(c.outputs.iter().map(|&o| slots[o as usize] & 1 == 1).collect());
        state = c.flop_d.iter().map(|&d| slots[d as usize] & 1 == 1).collect();
    }
    Ok(out)
}

const LANE_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Input words for rows `64 * chunk .. 64 * chunk + 63` of a `k`-input
/// table in big-endian row order (input 0 is the most significant bit).
fn exhaustive_words(k: usize, chunk: usize) -> Vec<u64> {
    (0..k)
        .map(|j| {
            let shift = k - 1 - j;
            if shift < 6 {
                LANE_PATTERNS[shift]
            } else if ((chunk << 6) >> shift) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

fn lane_mask(rows: usize, chunk: usize) -> u64 {
    let remaining = rows - chunk * 64;
    if remaining >= 64 {
        !0
    } else {
        (1u64 << remaining) - 1
    }
}

/// Outputs for every input combination, stored column-wise as bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    num_inputs: usize,
    num_outputs: usize,
    /// `columns[o][w]` holds output `o` for rows `64w .. 64w+63`.
    columns: Vec<Vec<u64>>,
}

impl TruthTable {
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_rows(&self) -> usize {
        1 << self.num_inputs
    }

    pub fn get(&self, row: usize, output: usize) -> bool {
        self.columns[output][row / 64] >> (row % 64) & 1 == 1
    }

    pub fn row(&self, row: usize) -> Vector {
        (0..self.num_outputs).map(|o| self.get(row, o)).collect()
    }

    /// Single-output tables as a flat bit list.
    pub fn column(&self, output: usize) -> Vec<bool> {
        (0..self.num_rows()).map(|r| self.get(r, output)).collect()
    }

    /// First row where the two tables disagree.
    pub fn first_difference(&self, other: &TruthTable) -> Option<usize> {
        let words = self.columns.first().map_or(0, Vec::len);
        (0..words).find_map(|w| {
            let diff = self
                .columns
                .iter()
                .zip(&other.columns)
                .fold(0u64, |acc, (a, b)| acc | (a[w] ^ b[w]));
            (diff != 0).then(|| w * 64 + diff.trailing_zeros() as usize)
        })
    }
}

/// Input bits of row `i` for `k` inputs, big-endian.
pub fn row_bits(i: usize, k: usize) -> Vector {
    (0..k).map(|j| (i >> (k - 1 - j)) & 1 == 1).collect()
}

pub fn truth_table(n: &Netlist) -> Result<TruthTable, SimError> {
    truth_table_with(n, Exec::default())
}

pub fn truth_table_with(n: &Netlist, exec: Exec) -> Result<TruthTable, SimError> {
    let k = n.inputs.len();
    if k > TRUTH_TABLE_MAX_INPUTS {
        return Err(SimError::TooManyInputs(k));
    }
    let c = Compiled::new(n)?;
    Ok(compiled_truth_table(&c, exec))
}

pub(crate) fn compiled_truth_table(c: &Compiled, exec: Exec) -> TruthTable {
    let k = c.num_inputs();
    let rows = 1usize << k;
    let chunks = rows.div_ceil(64);
    let words = exec::par_map_range(exec, chunks, |chunk| {
        let mut out = c.eval_words(&exhaustive_words(k, chunk));
        let mask = lane_mask(rows, chunk);
        out.iter_mut().for_each(|w| *w &= mask);
        out
    });
    let columns = (0..c.num_outputs())
        .map(|o| words.iter().map(|w| w[o]).collect())
        .collect();
    TruthTable {
        num_inputs: k,
        num_outputs: c.num_outputs(),
        columns,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    Counterexample(Vector),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        matches!(self, Equivalence::Equal)
    }
}

/// Seeded random input words for `samples` vectors over `k` inputs:
/// ChaCha8 seeded from `seed`, one `u64` per (batch, input) in batch-major
/// order, lane `l` of batch `b` being sample `64b + l`.
pub fn random_input_words(k: usize, samples: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples.div_ceil(64))
        .map(|_| (0..k).map(|_| rng.next_u64()).collect())
        .collect()
}

fn lane_bits(words: &[u64], lane: usize) -> Vector {
    words.iter().map(|w| w >> lane & 1 == 1).collect()
}

pub fn equivalent(
    a: &Netlist,
    b: &Netlist,
    exhaustive_limit: usize,
    samples: usize,
    seed: u64,
) -> Result<Equivalence, SimError> {
    equivalent_with(a, b, exhaustive_limit, samples, seed, Exec::default())
}

/// Exhaustive comparison up to `exhaustive_limit` inputs, seeded random
/// sampling beyond. A returned counterexample is re-checked by scalar
/// evaluation of both netlists.
pub fn equivalent_with(
    a: &Netlist,
    b: &Netlist,
    exhaustive_limit: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<Equivalence, SimError> {
    if a.inputs.len() != b.inputs.len() || a.outputs.len() != b.outputs.len() {
        return Err(SimError::ArityMismatch(
            a.inputs.len(),
            b.inputs.len(),
            a.outputs.len(),
            b.outputs.len(),
        ));
    }
    let ca = Compiled::new(a)?;
    let cb = Compiled::new(b)?;
    let k = a.inputs.len();
    let cex = if k <= exhaustive_limit.min(TRUTH_TABLE_MAX_INPUTS) {
        let rows = 1usize << k;
        let chunks = rows.div_ceil(64);
        exec::find_first(exec, chunks, |chunk| {
            differing_lanes(&ca, &cb, &exhaustive_words(k, chunk)) & lane_mask(rows, chunk) != 0
        })
        .map(|chunk| {
            let diff = differing_lanes(&ca, &cb, &exhaustive_words(k, chunk)) & lane_mask(rows, chunk);
            row_bits(chunk * 64 + diff.trailing_zeros() as usize, k)
        })
    } else {
        let batches = random_input_words(k, samples, seed);
        exec::find_first(exec, batches.len(), |i| {
            differing_lanes(&ca, &cb, &batches[i]) & lane_mask(samples, i) != 0
        })
        .map(|i| {
            let diff = differing_lanes(&ca, &cb, &batches[i]) & lane_mask(samples, i);
            lane_bits(&batches[i], diff.trailing_zeros() as usize)
        })
    };
    match cex {
        None => Ok(Equivalence::Equal),
        Some(v) => {
            assert_ne!(ca.eval(&v)?, cb.eval(&v)?, "counterexample failed re-check");
            Ok(Equivalence::Counterexample(v))
        }
    }
}

fn differing_lanes(a: &Compiled, b: &Compiled, inputs: &[u64]) -> u64 {
    a.eval_words(inputs)
        .iter()
        .zip(b.eval_words(inputs))
        .fold(0, |acc, (x, y)| acc | (x ^ y))
}

/// A working chip: answers input queries, counts them, hides its netlist.
#[derive(Debug)]
pub struct Oracle {
    hidden: Compiled,
    query_count: u64,
}

impl Oracle {
    pub fn new(realized: &Netlist) -> Result<Self, SimError> {
        Ok(Oracle {
            hidden: Compiled::new(realized)?,
            query_count: 0,
        })
    }

    pub fn query(&mut self, input: &[bool]) -> Result<Vector, SimError> {
        let out = self.hidden.eval(input)?;
        self.query_count += 1;
        Ok(out)
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn num_inputs(&self) -> usize {
        self.hidden.num_inputs()
    }

    pub fn num_outputs(&self) -> usize {
        self.hidden.num_outputs()
    }

    /// Answers 64 queries at once (lane layout as in
    /// [`Compiled::eval_words`]); `lanes` of them count as issued.
    pub fn query_words(&mut self, inputs: &[u64], lanes: u32) -> Result<Vec<u64>, SimError> {
        if inputs.len() != self.num_inputs() {
            return Err(SimError::LengthMismatch {
                expected: self.num_inputs(),
                found: inputs.len(),
            });
        }
        self.query_count += u64::from(lanes.min(64));
        Ok(self.hidden.eval_words(inputs))
    }
}

/// Compares `candidate` with the oracle's hidden circuit: exhaustively up
/// to `exhaustive_limit` inputs, else on `samples` seeded random vectors.
/// Every compared vector is charged to the oracle's query counter.
pub fn oracle_equivalent(
    candidate: &Netlist,
    oracle: &mut Oracle,
    exhaustive_limit: usize,
    samples: usize,
    seed: u64,
) -> Result<Equivalence, SimError> {
    let c = Compiled::new(candidate)?;
    if c.num_inputs() != oracle.num_inputs() || c.num_outputs() != oracle.num_outputs() {
        return Err(SimError::ArityMismatch(
            c.num_inputs(),
            oracle.num_inputs(),
            c.num_outputs(),
            oracle.num_outputs(),
        ));
    }
    let k = c.num_inputs();
    let (total, batches): (usize, Box<dyn Iterator<Item = Vec<u64>>>) =
        if k <= exhaustive_limit.min(TRUTH_TABLE_MAX_INPUTS) {
            let rows = 1usize << k;
            (rows, Box::new((0..rows.div_ceil(64)).map(move |chunk| exhaustive_words(k, chunk))))
        } else {
            (samples, Box::new(random_input_words(k, samples, seed).into_iter()))
        };
    for (i, words) in batches.enumerate() {
        let mask = lane_mask(total, i);
        let hidden = oracle.query_words(&words, mask.count_ones())?;
        let diff = c
            .eval_words(&words)
            .iter()
            .zip(hidden)
            .fold(0, |acc, (x, y)| acc | (x ^ y))
            & mask;
        if diff != 0 {
            return Ok(Equivalence::Counterexample(lane_bits(&words, diff.trailing_zeros() as usize)));
        }
    }
    Ok(Equivalence::Equal)
}

pub fn oracle_query(o: &mut Oracle, input: &[bool]) -> Result<Vector, SimError> {
    o.query(input)
}

pub fn parse_vector(s: &str) -> Result<Vector, SimError> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(SimError::BadVector(other)),
        })
        .collect()
}

pub fn format_vector(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// One trace CSV record: `input_bits,output_bits`.
pub fn trace_line(input: &[bool], output: &[bool]) -> String {
    format!("{},{}", format_vector(input), format_vector(output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, Gate};

    fn fig8() -> Netlist {
        parse_netlist(".inputs a b c\n.outputs y\n.gate OR2 n1 b c\n.gate AND2 n2 a n1\n.gate NOT y n2\n.end").unwrap()
    }

    fn single(kind: GateKind) -> Netlist {
        let names = ["a", "b", "c"];
        let ins = &names[..kind.arity()];
        Netlist {
            inputs: ins.iter().map(|s| s.to_string()).collect(),
            outputs: vec!["y".into()],
            gates: vec![Gate::new(kind, "y", ins)],
            ..Default::default()
        }
    }

    #[test]
    fn gate_semantics_match_hand_tables() {
        let cases: [(GateKind, &[bool]); 11] = [
            (GateKind::Not, &[true, false]),
            (GateKind::Buf, &[false, true]),
            (GateKind::And2, &[false, false, false, true]),
            (GateKind::Or2, &[false, true, true, true]),
            (GateKind::Nand2, &[true, true, true, false]),
            (GateKind::Nor2, &[true, false, false, false]),
            (GateKind::Xor2, &[false, true, true, false]),
            (GateKind::Xnor2, &[true, false, false, true]),
            // (sel, a, b): sel=0 → a
            (GateKind::Mux2, &[false, false, true, true, false, true, false, true]),
            (GateKind::Const0, &[false]),
            (GateKind::Const1, &[true]),
        ];
        for (kind, expected) in cases {
            let tt = truth_table(&single(kind)).unwrap();
            assert_eq!(tt.column(0), expected, "{kind}");
        }
    }

    #[test]
    fn fig8_evaluation_and_table() {
        let n = fig8();
        assert_eq!(evaluate(&n, &[true, false, true]).unwrap(), [false]);
        let tt = truth_table(&n).unwrap();
        assert_eq!(tt.column(0), [true, true, true, true, true, false, false, false]);
    }

    #[test]
    fn table_rows_match_scalar_evaluation() {
        let n = fig8();
        let tt = truth_table(&n).unwrap();
        for i in 0..8 {
            assert_eq!(tt.row(i), evaluate(&n, &row_bits(i, 3)).unwrap());
        }
    }

    #[test]
    fn truth_table_cap() {
        let wide = Netlist {
            inputs: (0..21).map(|i| format!("i{i}")).collect(),
            outputs: vec!["i0".into()],
            ..Default::default()
        };
        assert_eq!(truth_table(&wide), Err(SimError::TooManyInputs(21)));
    }

    #[test]
    fn length_mismatch_and_unrealized() {
        let n = fig8();
        assert_eq!(
            evaluate(&n, &[true]),
            Err(SimError::LengthMismatch { expected: 3, found: 1 })
        );
        let camo = single(GateKind::Camo2);
        assert_eq!(evaluate(&camo, &[true, true]), Err(SimError::Unrealized("y".into())));
    }

    #[test]
    fn equivalence_examples() {
        let n = fig8();
        assert_eq!(equivalent(&n, &n, 16, 0, 0).unwrap(), Equivalence::Equal);
        let res = equivalent(&single(GateKind::Nand2), &single(GateKind::Nor2), 16, 0, 0).unwrap();
        match res {
            Equivalence::Counterexample(v) => assert_ne!(v, vec![true, true]),
            Equivalence::Equal => panic!("NAND and NOR are not equivalent"),
        }
        assert!(matches!(
            equivalent(&n, &single(GateKind::Not), 16, 0, 0),
            Err(SimError::ArityMismatch(..))
        ));
    }

    #[test]
    fn sampled_equivalence_finds_rare_difference() {
        // Differ only when all 24 inputs are 1: sampling will not hit it,
        // but a difference on half the space must be found.
        let mut a = Netlist {
            inputs: (0..24).map(|i| format!("i{i}")).collect(),
            outputs: vec!["y".into()],
            gates: vec![Gate::new(GateKind::And2, "y", &["i0", "i1"])],
            ..Default::default()
        };
        let mut b = a.clone();
        b.gates[0].kind = GateKind::Or2;
        let res = equivalent(&a, &b, 16, 1000, 7).unwrap();
        assert!(matches!(res, Equivalence::Counterexample(_)));
        a.gates[0].kind = GateKind::Or2;
        assert_eq!(equivalent(&a, &b, 16, 1000, 7).unwrap(), Equivalence::Equal);
    }

    #[test]
    fn oracle_counts_queries() {
        let mut o = Oracle::new(&single(GateKind::Nand2)).unwrap();
        assert_eq!(o.query(&[false, false]).unwrap(), [true]);
        o.query(&[false, true]).unwrap();
        o.query(&[true, true]).unwrap();
        assert_eq!(o.query_count(), 3);
        assert!(o.query(&[true]).is_err());
        assert_eq!(o.query_count(), 3);
    }

    #[test]
    fn flops_reset_and_clock() {
        let n = parse_netlist(".inputs a\n.outputs q\n.flop q a 1\n.end").unwrap();
        assert_eq!(evaluate(&n, &[false]).unwrap(), [true]);
        let trace = simulate_sequence(&n, &[vec![false], vec![true], vec![false]]).unwrap();
        assert_eq!(trace, vec![vec![true], vec![false], vec![true]]);
    }

    #[test]
    fn vector_text_form() {
        assert_eq!(parse_vector("0110").unwrap(), [false, true, true, false]);
        assert_eq!(format_vector(&[true, false]), "10");
        assert_eq!(parse_vector("01x"), Err(SimError::BadVector('x')));
        assert_eq!(trace_line(&[true, false], &[true]), "10,1");
    }

    #[test]
    fn sequential_and_parallel_tables_agree() {
        let n = fig8();
        assert_eq!(
            truth_table_with(&n, Exec::Sequential).unwrap(),
            truth_table_with(&n, Exec::Parallel).unwrap()
        );
    }
}
