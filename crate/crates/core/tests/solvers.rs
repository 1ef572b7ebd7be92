mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use sppc_core::solvers::{full_support_residual, l1_zero_threshold, omp_design_traced};
use sppc_core::{
    exhaustive_design, l1_design, omp_design, omp_design_with, synthesize, HorizonData, Matrix, OmpSelection,
    PlantModel, SynthesisParams, SynthesisResult,
};

fn setup(plant: &PlantModel, q: &Matrix, horizon: usize) -> (SynthesisResult, HorizonData) {
    synthesize(
        plant,
        q,
        &SynthesisParams {
            horizon,
            ..SynthesisParams::default()
        },
    )
    .unwrap()
}

fn random_setup(r: &mut impl Rng, max_n: usize, max_horizon: usize) -> (SynthesisResult, HorizonData) {
    let n = r.random_range(1..=max_n);
    let horizon = r.random_range(1..=max_horizon);
    let plant = random_reachable_plant(r, n);
    let q = random_spd(r, n);
    setup(&plant, &q, horizon)
}

fn assert_packet_shape(coeffs: &[f64], support: &[usize]) {
    let nonzero: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
    assert_eq!(nonzero, support);
}

#[test]
fn omp_is_feasible_on_example_plant() {
    let (syn, h) = setup(&example_plant(), &Matrix::identity(4), 10);
    let mut r = rng(31);
    for _ in 0..1000 {
        let x = random_vec(&mut r, 4, 1.0);
        let packet = omp_design(&h, &syn.w, &x).unwrap();
        assert!(packet.residual_sq <= packet.threshold, "{packet:?}");
        assert_packet_shape(&packet.coeffs, &packet.support);
    }
}

#[test]
fn omp_is_feasible_on_random_plants() {
    let mut r = rng(32);
    for _ in 0..10 {
        let (syn, h) = random_setup(&mut r, 6, 12);
        for _ in 0..100 {
            let x = random_vec(&mut r, h.state_dim(), 1.0);
            let packet = omp_design(&h, &syn.w, &x).unwrap();
            assert!(packet.is_feasible(), "{packet:?}");
            let unnormalized = omp_design_with(&h, &syn.w, &x, OmpSelection::Unnormalized).unwrap();
            assert!(unnormalized.is_feasible());
        }
    }
}

#[test]
fn omp_survives_tiny_and_huge_states() {
    let (syn, h) = setup(&example_plant(), &Matrix::identity(4), 10);
    for scale in [1e-300, 1e-160, 1e-20, 1e20, 1e150] {
        let x: Vec<f64> = [0.3, -0.1, 0.7, 0.2].iter().map(|v| v * scale).collect();
        let packet = omp_design(&h, &syn.w, &x).unwrap();
        assert!(packet.is_feasible());
        assert!(packet.sparsity() > 0);
    }
}

#[test]
fn residual_history_is_monotone_and_support_grows_by_one() {
    let mut r = rng(33);
    for _ in 0..20 {
        let (syn, h) = random_setup(&mut r, 5, 12);
        for _ in 0..20 {
            let x = random_vec(&mut r, h.state_dim(), 1.0);
            let (packet, history) = omp_design_traced(&h, &syn.w, &x, OmpSelection::Normalized).unwrap();
            assert_eq!(history.len(), packet.iterations + 1);
            for pair in history.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{history:?}");
            }
            assert_eq!(packet.sparsity(), packet.iterations);
            assert!(packet.sparsity() <= h.horizon());
        }
    }
}

#[test]
fn exhaustive_never_beats_itself_and_bounds_omp() {
    // OMP must be feasible and never sparser than the global optimum.
    let mut r = rng(34);
    let mut attained = 0;
    let total = 200;
    for _ in 0..total {
        let (syn, h) = random_setup(&mut r, 3, 8);
        let x = random_vec(&mut r, h.state_dim(), 1.0);
        let omp = omp_design(&h, &syn.w, &x).unwrap();
        let best = exhaustive_design(&h, &syn.w, &x, 12).unwrap();
        assert!(omp.is_feasible());
        assert!(best.is_feasible());
        assert!(best.sparsity() <= omp.sparsity());
        if best.sparsity() == omp.sparsity() {
            attained += 1;
        }
    }
    assert!(attained * 2 >= total, "OMP attained optimum on {attained}/{total}");
}

#[test]
fn oracle_dominance_up_to_horizon_ten() {
    let mut r = rng(35);
    for _ in 0..40 {
        let (syn, h) = random_setup(&mut r, 4, 10);
        let x = random_vec(&mut r, h.state_dim(), 1.0);
        let omp = omp_design(&h, &syn.w, &x).unwrap();
        let best = exhaustive_design(&h, &syn.w, &x, 10).unwrap();
        assert!(best.sparsity() <= omp.sparsity());
    }
}

#[test]
fn exhaustive_at_origin_is_empty() {
    let (syn, h) = setup(&example_plant(), &Matrix::identity(4), 6);
    let packet = exhaustive_design(&h, &syn.w, &[0.0; 4], 12).unwrap();
    assert!(packet.support.is_empty());
    assert!(packet.coeffs.iter().all(|&v| v == 0.0));
}

#[test]
fn full_support_residual_matches_value_decrease() {
    let (syn, h) = setup(&example_plant(), &Matrix::identity(4), 10);
    let gap = &syn.p - &syn.q;
    let mut r = rng(36);
    for _ in 0..200 {
        let x = random_vec(&mut r, 4, 1.0);
        let lhs = full_support_residual(&h, &x).unwrap();
        let rhs = gap.quad_form(&x);
        assert!((lhs - rhs).abs() <= 1e-8 * rhs);
    }
}

#[test]
fn l1_small_lambda_approaches_least_squares() {
    let mut r = rng(37);
    for (plant, q, horizon) in [
        (scalar_plant(), Matrix::identity(1), 2),
        (example_plant(), Matrix::identity(4), 4),
    ] {
        let (syn, h) = setup(&plant, &q, horizon);
        let gap = &syn.p - &syn.q;
        for _ in 0..5 {
            let x = random_vec(&mut r, plant.dim(), 1.0);
            let lambda = 1e-9 * l1_zero_threshold(&h, &x);
            let packet = l1_design(&h, &x, lambda, 1.0).unwrap();
            let expected = gap.quad_form(&x);
            let scale = h.target(&x).iter().map(|v| v * v).sum::<f64>();
            assert!(
                (packet.residual_sq - expected).abs() <= 1e-4 * scale,
                "{} vs {expected}",
                packet.residual_sq
            );
        }
    }
}

#[test]
fn l1_large_lambda_or_zero_state_gives_zero() {
    let (_, h) = setup(&example_plant(), &Matrix::identity(4), 10);
    let x = [0.5, -0.5, 0.25, 1.0];
    let lambda = l1_zero_threshold(&h, &x) * 1.0001;
    let packet = l1_design(&h, &x, lambda, 2.0).unwrap();
    assert!(packet.coeffs.iter().all(|&v| v == 0.0));
    assert_eq!(packet.threshold, 2.0);

    let packet = l1_design(&h, &[0.0; 4], 0.1, 2.0).unwrap();
    assert!(packet.coeffs.iter().all(|&v| v == 0.0));
    assert_eq!(packet.sparsity(), 0);
}

#[test]
fn l1_packet_satisfies_optimality_conditions() {
    // Subgradient test: G_i^T (Hx - Gu) = lambda sign(u_i) on the support,
    // |G_i^T (Hx - Gu)| <= lambda off it.
    let (_, h) = setup(&example_plant(), &Matrix::identity(4), 10);
    let x = [0.5, -0.5, 0.25, 1.0];
    let lambda = 0.05 * l1_zero_threshold(&h, &x);
    let packet = l1_design(&h, &x, lambda, 1.0).unwrap();
    let gu = h.g.mul_vec(&packet.coeffs);
    let r: Vec<f64> = h.target(&x).iter().zip(&gu).map(|(t, g)| t - g).collect();
    let corr = h.g.tr_mul_vec(&r);
    for (i, &c) in corr.iter().enumerate() {
        let u = packet.coeffs[i];
        if u != 0.0 {
            assert!((c - lambda * u.signum()).abs() <= 1e-3 * lambda, "{i}: {c} vs {lambda}");
        } else {
            assert!(c.abs() <= lambda * (1.0 + 1e-3));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn omp_is_scale_covariant(
        x in prop::collection::vec(-1.0f64..1.0, 4),
        t in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let (syn, h) = setup(&example_plant(), &Matrix::identity(4), 10);
        let base = omp_design(&h, &syn.w, &x).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let scaled = omp_design(&h, &syn.w, &tx).unwrap();
        prop_assert_eq!(&base.support, &scaled.support);
        let peak = base.coeffs.iter().fold(0.0f64, |m, v| m.max((t * v).abs()));
        for (a, b) in base.coeffs.iter().zip(&scaled.coeffs) {
            prop_assert!((t * a - b).abs() <= 1e-9 * peak);
        }
    }
}
