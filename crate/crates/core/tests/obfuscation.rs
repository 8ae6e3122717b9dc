mod common;

use std::collections::HashMap;

use camoforge::device::{CrosstalkParams, SignalEnv};
use camoforge::gen::{generate, GenConfig};
use camoforge::netlist::Flop;
use camoforge::obfuscate::{add_dummy_logic, Obfuscated, Sites};
use camoforge::simulate::{random_input_words, truth_table, Compiled};
use camoforge::{parse_netlist, realize, serialize_netlist, Netlist};
use common::reference_table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench(seed: u64, inputs: usize, gates: usize) -> Netlist {
    generate(&GenConfig {
        gates,
        inputs,
        outputs: 4,
        depth: 8,
        seed,
    })
}

fn eligible(n: &Netlist) -> usize {
    n.gates
        .iter()
        .filter(|g| matches!(g.kind.name().as_str(), "NAND2" | "NOR2" | "XOR2"))
        .count()
}

#[test]
fn two_hundred_transforms_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pair in 0..200u64 {
        let inputs = rng.gen_range(2..=16);
        let n = bench(pair, inputs, rng.gen_range(10..120));
        let ob = Obfuscated::from_plain(&n);
        let out = if pair % 2 == 0 {
            let count = rng.gen_range(1..=eligible(&n).clamp(1, 16));
            ob.camouflage(&Sites::Random { count, seed: pair }).unwrap()
        } else {
            let g = &n.gates[rng.gen_range(0..n.gates.len())];
            ob.insert_lut(&g.output).unwrap()
        };
        assert!(out.apparent.has_obfuscated_gates());
        let realized = out.realize().unwrap();
        assert_eq!(truth_table(&realized).unwrap(), truth_table(&n).unwrap(), "pair {pair}");
        if inputs <= 10 {
            assert_eq!(
                reference_table(&realized, &HashMap::new()),
                reference_table(&n, &HashMap::new()),
                "pair {pair}"
            );
        }
    }
}

#[test]
fn dummy_logic_is_neutral_on_random_vectors() {
    for seed in 0..10u64 {
        let n = bench(seed, 24, 150);
        let d = add_dummy_logic(&n, 60, seed);
        assert_eq!(d.gates.len(), n.gates.len() + 60);
        let (a, b) = (Compiled::new(&n).unwrap(), Compiled::new(&d).unwrap());
        for words in random_input_words(24, 10_000, seed) {
            assert_eq!(a.eval_words(&words), b.eval_words(&words), "seed {seed}");
        }
    }
}

/// Forcing a net to `v` in the reference interpreter is the Shannon
/// cofactor; a stuck-at entry must realize exactly that.
#[test]
fn stuck_at_matches_cofactor() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..40u64 {
        let inputs = rng.gen_range(2..=12);
        let n = bench(seed, inputs, rng.gen_range(8..60));
        let mut ob = Obfuscated::from_plain(&n);
        if seed % 3 == 0 && eligible(&n) > 0 {
            ob = ob.camouflage(&Sites::Random { count: 1, seed }).unwrap();
        }
        let base = ob.realize().unwrap();
        let nets: Vec<String> = n.inputs.iter().chain(n.gates.iter().map(|g| &g.output)).cloned().collect();
        for _ in 0..3 {
            let net = nets[rng.gen_range(0..nets.len())].clone();
            let v = rng.gen_bool(0.5);
            let stuck = ob.inject_stuck_at(&net, v).unwrap();
            assert_eq!(serialize_netlist(&stuck.apparent), serialize_netlist(&ob.apparent));
            let forced = HashMap::from([(net.clone(), v)]);
            assert_eq!(
                reference_table(&stuck.realize().unwrap(), &HashMap::new()),
                reference_table(&base, &forced),
                "seed {seed} net {net}={v}"
            );
        }
    }
}

#[test]
fn hidden_transforms_leave_apparent_netlist_unchanged() {
    let mut n = parse_netlist(
        ".inputs clk irq_in a\n.outputs irq y\n.gate BUF irq irq_in\n.gate NOT y q\n.flop q a 0\n.end",
    )
    .unwrap();
    n.flops.push(Flop {
        q: "q2".into(),
        d: "a".into(),
        init: true,
    });
    let ob = Obfuscated::from_plain(&n);
    let text = serialize_netlist(&n);
    let p = CrosstalkParams {
        c_adj: 9.0,
        c_gnd_v: 1.0,
        c_gnd_a: 1.0,
        r_victim: 1.0,
        r_aggressor: 0.01,
    };
    let steps = [
        ob.inject_stuck_at("a", true).unwrap(),
        ob.inject_timing_fault("q").unwrap(),
        ob.add_crosstalk_link("clk", "irq", &p, 1.0, &SignalEnv::default()).unwrap(),
    ];
    for s in &steps {
        assert_eq!(serialize_netlist(&s.apparent), text);
        assert!(!s.secret.is_empty());
    }
    // Wired-OR: the interrupt now rises with the aggressor.
    let realized = steps[2].realize().unwrap();
    let y = camoforge::simulate::evaluate(&realized, &[true, false, false]).unwrap();
    assert!(y[0]);
}

#[test]
fn realize_is_pure() {
    let n = bench(5, 8, 60);
    let ob = Obfuscated::from_plain(&n)
        .camouflage(&Sites::Random { count: 5, seed: 5 })
        .unwrap()
        .insert_lut(&n.gates[3].output)
        .unwrap_or_else(|_| Obfuscated::from_plain(&n));
    let a = realize(&ob.apparent, &ob.secret).unwrap();
    let b = realize(&ob.apparent, &ob.secret).unwrap();
    assert_eq!(serialize_netlist(&a), serialize_netlist(&b));
}
