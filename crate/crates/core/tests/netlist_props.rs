use std::collections::HashMap;

use camoforge::netlist::{Flop, ParseError};
use camoforge::{parse_netlist, serialize_netlist, Gate, GateKind, Netlist};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [GateKind; 13] = [
    GateKind::Not,
    GateKind::Buf,
    GateKind::And2,
    GateKind::Or2,
    GateKind::Nand2,
    GateKind::Nor2,
    GateKind::Xor2,
    GateKind::Xnor2,
    GateKind::Mux2,
    GateKind::Camo2,
    GateKind::Const0,
    GateKind::Const1,
    GateKind::Lut(3),
];

/// Random valid netlist over every gate kind, optionally with flops.
fn random_netlist(seed: u64, inputs: usize, gates: usize, flops: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nets: Vec<String> = (0..inputs).map(|i| format!("in{i}")).collect();
    let qs: Vec<String> = (0..flops).map(|i| format!("q{i}")).collect();
    nets.extend(qs.iter().cloned());
    let mut out = Vec::new();
    for g in 0..gates {
        let kind = match rng.gen_range(0..KINDS.len() + 1) {
            i if i < KINDS.len() => KINDS[i],
            _ => GateKind::Lut(rng.gen_range(1..=6)),
        };
        let ins: Vec<String> = (0..kind.arity()).map(|_| nets[rng.gen_range(0..nets.len())].clone()).collect();
        let name = format!("n{g}");
        out.push(Gate {
            kind,
            output: name.clone(),
            inputs: ins,
        });
        nets.push(name);
    }
    let flops = qs
        .into_iter()
        .map(|q| Flop {
            d: nets[rng.gen_range(0..nets.len())].clone(),
            q,
            init: rng.gen_bool(0.5),
        })
        .collect();
    let outputs = (0..3).map(|_| nets[rng.gen_range(0..nets.len())].clone()).collect::<Vec<_>>();
    let mut outputs_dedup = Vec::new();
    for o in outputs {
        if !outputs_dedup.contains(&o) {
            outputs_dedup.push(o);
        }
    }
    Netlist {
        name: format!("r{seed}"),
        inputs: (0..inputs).map(|i| format!("in{i}")).collect(),
        outputs: outputs_dedup,
        gates: out,
        flops,
    }
}

proptest! {
    #[test]
    fn parse_inverts_serialize(seed in any::<u64>(), inputs in 1usize..8, gates in 0usize..40, flops in 0usize..3) {
        let n = random_netlist(seed, inputs, gates, flops);
        prop_assert!(n.validate().is_empty(), "{:?}", n.validate());
        let text = serialize_netlist(&n);
        let back = parse_netlist(&text).unwrap();
        prop_assert_eq!(&back, &n);
        prop_assert_eq!(serialize_netlist(&back), text);
    }

    #[test]
    fn topological_order_respects_every_edge(seed in any::<u64>(), inputs in 1usize..6, gates in 1usize..60) {
        let n = random_netlist(seed, inputs, gates, 0);
        let order = n.topological_order().unwrap();
        prop_assert_eq!(order.len(), n.gates.len());
        let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        for g in &n.gates {
            for i in &g.inputs {
                if let Some(&p) = pos.get(i.as_str()) {
                    prop_assert!(p < pos[g.output.as_str()], "{} read by {} too late", i, g.output);
                }
            }
        }
    }

    #[test]
    fn parser_never_panics_on_garbage(text in "\\PC{0,200}") {
        let _ = parse_netlist(&text);
    }

    #[test]
    fn parser_never_panics_on_mutated_netlists(seed in any::<u64>(), cut in 0usize..400, junk in "[ .a-zA-Z0-9_#\n]{0,12}") {
        let text = serialize_netlist(&random_netlist(seed, 3, 10, 1));
        let cut = cut.min(text.len());
        let mutated = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
        let _ = parse_netlist(&mutated);
    }
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_netlist(".inputs a\n.outputs y\n.gate FOO y a\n.end\n").unwrap_err();
    match err {
        ParseError::Syntax { line, column, .. } => {
            assert_eq!(line, 3);
            assert!(column >= 1);
        }
        other => panic!("expected a syntax error, got {other:?}"),
    }
}
