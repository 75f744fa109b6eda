use num_complex::Complex64;
use preq_core::dynamics::{propagate_covariance, propagate_covariance_piecewise, Method, TimeGrid};
use preq_core::expm::expm;
use preq_core::generators::{
    build_affine, build_commutator, build_gksl, build_similarity, coefficient_tensor,
    is_completely_positive, sandwich, unvectorize, vectorize, Generator, OrthonormalBasis, Schedule,
};
use preq_core::operator::{
    hermitian_deviation, max_abs, normalize_trace, trace, CMatrix, HermitianOperator, PositiveOperator,
};
use preq_core::prequantum::sample_gaussian;
use preq_core::random::{random_gksl, random_hermitian, random_matrix, random_psd, random_unitary, seeded};
use preq_core::stochastic::{simulate_linear_sde, Recording, SdeSpec};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = usize> {
    1usize..=4
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vectorization_round_trips_and_sandwich_matches(seed in any::<u64>(), n in dims()) {
        let mut rng = seeded(seed);
        let (a, b, x) = (random_matrix(&mut rng, n), random_matrix(&mut rng, n), random_matrix(&mut rng, n));
        prop_assert_eq!(unvectorize(&vectorize(&x), n), x.clone());
        let via_super = unvectorize(&(sandwich(&a, &b) * vectorize(&x)), n);
        prop_assert!(max_abs(&(via_super - &a * &x * &b)) <= 1e-12 * (1.0 + max_abs(&(&a * &x * &b))));
    }

    #[test]
    fn gksl_semigroups_are_cptp(seed in any::<u64>(), n in 1usize..=3, jumps in 0usize..3) {
        let mut rng = seeded(seed);
        let l = build_gksl(&random_gksl(&mut rng, n, jumps)).unwrap();
        prop_assert!(l.trace_defect() <= 1e-12);
        for t in [0.1, 1.0] {
            let (cp, lambda) = is_completely_positive(&l.exp(t), 1e-10);
            prop_assert!(cp, "min Choi eigenvalue {}", lambda);
        }
    }

    #[test]
    fn coefficient_tensor_contracts_to_generator(seed in any::<u64>(), n in dims(), kind in 0usize..3) {
        let mut rng = seeded(seed);
        let l = match kind {
            0 => build_gksl(&random_gksl(&mut rng, n, 2)).unwrap(),
            1 => build_commutator(&HermitianOperator::new(random_hermitian(&mut rng, n)).unwrap()),
            _ => build_similarity(&random_matrix(&mut rng, n)).unwrap(),
        };
        let basis = OrthonormalBasis::new(random_unitary(&mut rng, n)).unwrap();
        let b = random_psd(&mut rng, n);
        let tensor = coefficient_tensor(&l, &basis).unwrap();
        let predicted = tensor.contract(&basis.coordinates(b.matrix())).unwrap();
        let direct = basis.coordinates(&l.apply(b.matrix()).unwrap());
        prop_assert!(max_abs(&(predicted - &direct)) <= 1e-10 * (1.0 + max_abs(&direct)));
    }

    #[test]
    fn expm_group_law(seed in any::<u64>(), n in dims(), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let a = random_matrix(&mut seeded(seed), n);
        let lhs = expm(&a.scale(s + t));
        let rhs = expm(&a.scale(s)) * expm(&a.scale(t));
        prop_assert!(max_abs(&(&lhs - rhs)) <= 1e-10 * (1.0 + max_abs(&lhs)));
        let inv = expm(&a.scale(t)) * expm(&a.scale(-t));
        prop_assert!(max_abs(&(inv - CMatrix::identity(n, n))) <= 1e-9 * (1.0 + max_abs(&expm(&a.scale(t)))).powi(2));
    }

    #[test]
    fn similarity_flow_stays_psd(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, n);
        let b0 = random_psd(&mut rng, n);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = propagate_covariance(&build_similarity(&a).unwrap().into(), &b0, &grid, Method::Exact).unwrap();
        for b in traj.values() {
            prop_assert!(hermitian_deviation(b) <= 1e-10 * (1.0 + max_abs(b)));
            prop_assert!(PositiveOperator::new(preq_core::operator::hermitian_part(b)).is_ok());
        }
        prop_assert!(traj.warnings().is_empty());
    }

    #[test]
    fn normalization_gives_unit_trace(seed in any::<u64>(), n in dims(), scale in 1e-3f64..1e3) {
        let b = random_psd(&mut seeded(seed), n);
        let scaled = PositiveOperator::new(b.matrix().scale(scale)).unwrap();
        let (rho, tr) = normalize_trace(&scaled).unwrap();
        prop_assert!((trace(rho.matrix()).re - 1.0).abs() <= 1e-12);
        prop_assert!((tr - scale * b.trace()).abs() <= 1e-12 * tr);
    }

    #[test]
    fn ensembles_extend_by_prefix(seed in any::<u64>(), n in 1usize..=3, small in 1usize..40, extra in 0usize..40) {
        let b = random_psd(&mut seeded(seed ^ 0x5eed), n);
        let short = sample_gaussian(&b, small, seed).unwrap();
        let long = sample_gaussian(&b, small + extra, seed).unwrap();
        prop_assert_eq!(short.samples(), &long.samples().columns(0, small).into_owned());
    }

    #[test]
    fn piecewise_schedule_composes(seed in any::<u64>(), split in 1usize..9) {
        let mut rng = seeded(seed);
        let g1: Generator = build_similarity(&random_matrix(&mut rng, 2).scale(0.5)).unwrap().into();
        let g2: Generator = build_affine(
            build_gksl(&random_gksl(&mut rng, 2, 1)).unwrap(),
            HermitianOperator::new(random_hermitian(&mut rng, 2)).unwrap(),
        )
        .unwrap()
        .into();
        let b0 = random_psd(&mut rng, 2);
        let t_split = split as f64 * 0.1;
        let schedule = Schedule::new(vec![(t_split, g1.clone()), (1.0, g2.clone())]).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let whole = propagate_covariance_piecewise(&schedule, &b0, &grid, Method::Exact).unwrap();

        let first = propagate_covariance(&g1, &b0, &TimeGrid::new(0.0, t_split, split).unwrap(), Method::Exact).unwrap();
        let mid = PositiveOperator::new(preq_core::operator::hermitian_part(first.last())).unwrap();
        let second = propagate_covariance(&g2, &mid, &TimeGrid::new(t_split, 1.0, 10 - split).unwrap(), Method::Exact).unwrap();
        prop_assert!(max_abs(&(whole.last() - second.last())) <= 1e-10 * (1.0 + max_abs(second.last())));
    }
}

#[test]
fn path_ensembles_do_not_depend_on_thread_count() {
    let mut rng = seeded(11);
    let a = random_matrix(&mut rng, 2).scale(0.4) - CMatrix::identity(2, 2);
    let spec = SdeSpec::constant_drift(a, random_psd(&mut rng, 2), random_psd(&mut rng, 2)).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_linear_sde(&spec, &grid, 5000, 3, &Recording::Indices(vec![50, 100])).unwrap())
    };
    let one = run(1);
    let three = run(3);
    for k in [50, 100] {
        assert_eq!(one.snapshot(k).unwrap(), three.snapshot(k).unwrap());
    }
}

#[test]
fn sample_ensembles_do_not_depend_on_thread_count() {
    let b = random_psd(&mut seeded(12), 3);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_gaussian(&b, 10_000, 9).unwrap())
    };
    assert_eq!(run(1).samples(), run(4).samples());
}

#[test]
fn commutator_sign_convention() {
    // Guards the sign convention used by commutator generators: −i[H, ·].
    let h = HermitianOperator::from_real_diagonal(&[1.0, -1.0]).unwrap();
    let l = build_commutator(&h);
    let mut x = CMatrix::zeros(2, 2);
    x[(0, 1)] = Complex64::new(1.0, 0.0);
    let y = l.apply(&x).unwrap();
    assert_eq!(y[(0, 1)], Complex64::new(0.0, -2.0));
}
