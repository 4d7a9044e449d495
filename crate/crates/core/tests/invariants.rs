use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aimd_core::averaged::{hilbert_distance, p_map, r_eps};
use aimd_core::chains::{step_fixed_chain, ChainState};
use aimd_core::kkt::{consensus_residual, solve_kkt, solve_p_fixed_point, DEFAULT_TOL};
use aimd_core::matrices::{
    contraction_factor, perron_vector, restricted_norm, AimdParams, DropPattern,
};
use aimd_core::problem::{CostFunction, NetworkSpec};
use aimd_core::SimplexPoint;

fn params() -> impl Strategy<Value = AimdParams> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.01f64..0.99, n),
        )
            .prop_map(|(a, b)| AimdParams::new(SimplexPoint::from_weights(a).unwrap(), b).unwrap())
    })
}

fn interior(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
        .prop_map(|w| SimplexPoint::from_weights(w).unwrap().into_vec())
}

fn quadratic_network() -> impl Strategy<Value = NetworkSpec> {
    prop::collection::vec(1.0f64..50.0, 2..8).prop_map(|a| {
        let costs = a
            .into_iter()
            .map(|a| CostFunction::poly2(a).unwrap())
            .collect();
        NetworkSpec::homogeneous(costs, 1.0, 1e-3, 1e-6, 0.01, 0.85).unwrap()
    })
}

proptest! {
    #[test]
    fn pattern_matrices_are_column_stochastic(p in params(), bits in any::<u64>()) {
        let n = p.n();
        let a = p.matrix(&DropPattern::from_bits(n, bits & ((1 << n) - 1))).unwrap();
        for s in a.column_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert!(restricted_norm(a.matrix()).unwrap() <= 1.0 + 1e-12);
        prop_assert!(a.matrix().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn all_drop_matrix_contracts_and_fixes_perron(p in params()) {
        prop_assert!(contraction_factor(&p).unwrap() < 1.0);
        let z = perron_vector(&p).into_vec();
        let mut y = z.clone();
        p.apply_pattern(&vec![true; p.n()], &mut y);
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn matrix_free_step_matches_dense(p in params(), bits in any::<u64>(), seed in any::<u64>()) {
        let n = p.n();
        let pattern = DropPattern::from_bits(n, bits & ((1 << n) - 1));
        let x = SimplexPoint::from_weights((0..n).map(|i| 1.0 + ((seed >> i) & 7) as f64).collect()).unwrap().into_vec();
        let dense = p.matrix(&pattern).unwrap().matrix() * nalgebra::DVector::from_vec(x.clone());
        let mut y = x;
        p.apply_pattern(pattern.drops(), &mut y);
        for (a, b) in y.iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn fixed_chain_stays_on_simplex(p in params(), seed in any::<u64>(), lam in 0.0f64..=1.0) {
        let n = p.n();
        let mut state = ChainState::new(&SimplexPoint::uniform(n));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = vec![lam; n];
        for _ in 0..200 {
            step_fixed_chain(&mut state, &mut rng, &lambda, &p);
        }
        prop_assert!((state.x().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(state.x().iter().all(|v| *v >= 0.0));
        prop_assert!((state.xbar().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn kkt_point_equalizes_marginal_costs(net in quadratic_network()) {
        let sol = solve_kkt(&net.costs(), 1.0, DEFAULT_TOL).unwrap();
        prop_assert!(consensus_residual(&net.costs(), sol.point.as_slice()) <= 1e-8);
        let p = solve_p_fixed_point(net.rules(), DEFAULT_TOL).unwrap();
        prop_assert!(sol.point.linf_distance(p.point.as_slice()) <= 1e-8);
    }

    #[test]
    fn p_map_lands_in_simplex_and_fixes_its_fixed_point(net in quadratic_network(), seed in 0usize..1000) {
        let n = net.n();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + ((seed + 3 * i) % 11) as f64).collect();
        let x = SimplexPoint::from_weights(x).unwrap();
        let y = p_map(net.rules(), x.as_slice()).unwrap();
        prop_assert!((y.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let star = solve_p_fixed_point(net.rules(), DEFAULT_TOL).unwrap().point;
        prop_assert!(star.l1_distance(p_map(net.rules(), star.as_slice()).unwrap().as_slice()) <= 1e-9);
    }

    #[test]
    fn hilbert_distance_is_a_projective_metric(x in interior(4), y in interior(4), z in interior(4), s in 0.1f64..10.0) {
        let dxy = hilbert_distance(&x, &y).d;
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - hilbert_distance(&y, &x).d).abs() <= 1e-12);
        prop_assert!(hilbert_distance(&x, &x).d.abs() <= 1e-12);
        let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
        prop_assert!((hilbert_distance(&scaled, &y).d - dxy).abs() <= 1e-9);
        prop_assert!(dxy <= hilbert_distance(&x, &z).d + hilbert_distance(&z, &y).d + 1e-9);
    }

    #[test]
    fn r_eps_interpolates(net in quadratic_network(), eps in 0.0f64..=1.0) {
        let x = SimplexPoint::uniform(net.n());
        let px = p_map(net.rules(), x.as_slice()).unwrap();
        let r = r_eps(net.rules(), x.as_slice(), eps).unwrap();
        for ((ri, xi), pi) in r.as_slice().iter().zip(x.as_slice()).zip(px.as_slice()) {
            prop_assert!((ri - ((1.0 - eps) * xi + eps * pi)).abs() <= 1e-12);
        }
    }
}
