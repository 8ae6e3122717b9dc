//! Seeded random combinational benchmarks.
//!
//! Gates are spread over `depth` levels; each gate takes at least one input
//! from the level directly below it, so the circuit really is `depth` deep,
//! and prefers nets nobody reads yet so little logic ends up dangling.
//! Fanin is bounded by two.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netlist::{Gate, GateKind, Netlist};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub gates: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            gates: 200,
            inputs: 16,
            outputs: 8,
            depth: 12,
            seed: 0,
        }
    }
}

const KINDS: [GateKind; 8] = [
    GateKind::Nand2,
    GateKind::Nor2,
    GateKind::Xor2,
    GateKind::And2,
    GateKind::Or2,
    GateKind::Xnor2,
    GateKind::Nand2,
    GateKind::Not,
];

/// Random valid netlist with exactly `cfg.gates` gates. Inputs are named
/// `i0..`, gates `g0..`; outputs are the last gates nothing else reads,
/// topped up from the end of the gate list.
pub fn generate(cfg: &GenConfig) -> Netlist {
    assert!(cfg.gates >= 1, "need at least one gate");
    assert!(cfg.inputs >= 1, "need at least one input");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let depth = cfg.depth.clamp(1, cfg.gates);
    let inputs: Vec<String> = (0..cfg.inputs).map(|i| format!("i{i}")).collect();

    // levels[0] holds the primary inputs.
    let mut levels: Vec<Vec<String>> = vec![inputs.clone()];
    let mut unread: Vec<String> = inputs.clone();
    let mut gates = Vec::with_capacity(cfg.gates);
    for g in 0..cfg.gates {
        let level = 1 + g * depth / cfg.gates;
        if levels.len() <= level {
            levels.push(Vec::new());
        }
        let kind = KINDS[rng.gen_range(0..KINDS.len())];
        let below = &levels[level - 1];
        let below = if below.is_empty() { &levels[0] } else { below };
        let mut ins = vec![below[rng.gen_range(0..below.len())].clone()];
        while ins.len() < kind.arity() {
            let pick = if !unread.is_empty() && rng.gen_bool(0.5) {
                unread[rng.gen_range(0..unread.len())].clone()
            } else {
                let lvl = rng.gen_range(0..level);
                let pool = &levels[lvl];
                if pool.is_empty() {
                    continue;
                }
                pool[rng.gen_range(0..pool.len())].clone()
            };
            if !ins.contains(&pick) {
                ins.push(pick);
            } else if levels[..level].iter().map(Vec::len).sum::<usize>() < 2 {
                // Only one net exists so far; reuse it.
                ins.push(pick);
            }
        }
        unread.retain(|n| !ins.contains(n));
        let output = format!("g{g}");
        unread.push(output.clone());
        levels[level].push(output.clone());
        gates.push(Gate {
            kind,
            output,
            inputs: ins,
        });
    }

    let want = cfg.outputs.min(cfg.gates).max(1);
    let mut outputs: Vec<String> = unread
        .iter()
        .rev()
        .filter(|n| n.starts_with('g'))
        .take(want)
        .cloned()
        .collect();
    for g in gates.iter().rev() {
        if outputs.len() >= want {
            break;
        }
        if !outputs.contains(&g.output) {
            outputs.push(g.output.clone());
        }
    }
    outputs.sort_by_key(|n| n[1..].parse::<usize>().unwrap_or(0));

    Netlist {
        name: format!("rand{}_{}", cfg.gates, cfg.seed),
        inputs,
        outputs,
        gates,
        flops: Vec::new(),
    }
}
