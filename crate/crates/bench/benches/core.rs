use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aimd_core::averaged::p_map;
use aimd_core::chains::{step_longterm_chain, step_window_chain, ChainState};
use aimd_core::generator::generate_random_network;
use aimd_core::kkt::{solve_kkt, solve_p_fixed_point, DEFAULT_TOL};
use aimd_core::matrices::contraction_factor;
use aimd_core::SimplexPoint;

const SIZES: [usize; 3] = [10, 150, 1000];

fn chain_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("chain_step");
    for n in SIZES {
        let net = generate_random_network(n, 100.0, 1.0 / 1300.0, 1).unwrap();
        let params = net.aimd_params().unwrap();
        let x0 = SimplexPoint::uniform(n);
        g.bench_with_input(BenchmarkId::new("longterm", n), &n, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut s = ChainState::new(&x0);
            b.iter(|| step_longterm_chain(&mut s, &mut rng, net.rules(), &params));
        });
        g.bench_with_input(BenchmarkId::new("window500", n), &n, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut s = ChainState::with_window(&x0, 500).unwrap();
            b.iter(|| step_window_chain(&mut s, &mut rng, net.rules(), &params).unwrap());
        });
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    for n in SIZES {
        let net = generate_random_network(n, 100.0, 1.0 / 1300.0, 1).unwrap();
        let costs = net.costs();
        let x = SimplexPoint::uniform(n);
        g.bench_with_input(BenchmarkId::new("kkt", n), &n, |b, _| {
            b.iter(|| solve_kkt(black_box(&costs), 1.0, DEFAULT_TOL).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("p_fixed_point", n), &n, |b, _| {
            b.iter(|| solve_p_fixed_point(black_box(net.rules()), DEFAULT_TOL).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("p_map", n), &n, |b, _| {
            b.iter(|| p_map(net.rules(), black_box(x.as_slice())).unwrap())
        });
        if n <= 150 {
            let params = net.aimd_params().unwrap();
            g.bench_with_input(BenchmarkId::new("contraction_factor", n), &n, |b, _| {
                b.iter(|| contraction_factor(black_box(&params)).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, chain_steps, solvers);
criterion_main!(benches);
