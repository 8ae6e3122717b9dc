use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use camoforge::attack::{run_experiments, Experiment, Limits, SuspicionMode};
use camoforge::exec::Exec;
use camoforge::gen::{generate, GenConfig};
use camoforge::obfuscate::{camouflage, realize, Sites};
use camoforge::simulate::{equivalent_with, truth_table_with};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn circuit(inputs: usize, seed: u64) -> camoforge::netlist::Netlist {
    generate(&GenConfig { inputs, seed, ..GenConfig::default() })
}

fn bench_truth_table(c: &mut Criterion) {
    let n = circuit(16, 0);
    let mut g = c.benchmark_group("truth_table_16in");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| truth_table_with(black_box(&n), exec).unwrap()));
    }
    g.finish();
}

fn bench_equivalence(c: &mut Criterion) {
    let n = circuit(32, 1);
    let (apparent, secret) = camouflage(&n, &Sites::Random { count: 16, seed: 1 }).unwrap();
    let realized = realize(&apparent, &secret).unwrap();
    let mut g = c.benchmark_group("equivalence_32in_sampled");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| equivalent_with(black_box(&n), &realized, 16, 1 << 16, 7, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_attacks(c: &mut Criterion) {
    let experiments: Vec<Experiment> = (0..4)
        .map(|seed| {
            let (apparent, secret) = camouflage(&circuit(16, seed), &Sites::Random { count: 16, seed }).unwrap();
            Experiment { apparent, secret, mode: SuspicionMode::DeclaredOnly }
        })
        .collect();
    let limits = Limits::default();
    let mut g = c.benchmark_group("attack_batch");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, experiments.len()), &experiments, |b, e| {
            b.iter(|| run_experiments(exec, e, &limits))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_truth_table, bench_equivalence, bench_attacks);
criterion_main!(benches);
