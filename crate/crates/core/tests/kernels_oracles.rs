use nonmarkov::kernels::*;
use nonmarkov::linalg::{c64, sigma_x, sigma_z};
use nonmarkov::models::{projection_channel, sigma_z_dephasing};
use nonmarkov::propagate::{propagate_local, propagate_nonlocal, MemoryKernel, StepControl};
use nonmarkov::superop::{lindblad_superop, DensityMatrix, LindbladSpec, Superoperator};
use nonmarkov::trajectory::MapTrajectory;
use nonmarkov::Error;
use proptest::prelude::*;

fn projection() -> Superoperator {
    projection_channel(&DensityMatrix::maximally_mixed(2))
}

fn l0() -> Superoperator {
    projection().sub(&Superoperator::identity(2)).unwrap()
}

const GRID: [(f64, f64); 9] = [
    (0.1, 0.5),
    (0.1, 1.0),
    (0.1, 2.0),
    (0.5, 0.5),
    (0.5, 1.0),
    (0.5, 2.0),
    (1.0, 0.5),
    (1.0, 1.0),
    (1.0, 2.0),
];

#[test]
fn alpha_of_exponential_family() {
    for (eps, gamma) in GRID {
        let w = WaitingTimeFunction::exponential(eps, gamma).unwrap();
        let a = alpha_from_f(&w, 10.0).unwrap();
        for tau in [0.0, 0.3, 1.0, 4.0, 9.5] {
            let expected = eps * gamma / ((1.0 - eps) * (gamma * tau).exp() + eps);
            assert!((a.alpha(tau) - expected).abs() <= 1e-12 * expected.max(1.0), "{eps} {gamma} {tau}: {} vs {expected}", a.alpha(tau));
            let survival = (1.0 - eps) + eps * (-gamma * tau).exp();
            assert!((a.cumulative(tau).re + survival.ln()).abs() <= 1e-9);
            assert!((w.cumulative(tau) - (1.0 - survival)).abs() <= 1e-15);
            assert_eq!(a.cumulative(tau).im, 0.0);
        }
        if eps == 1.0 {
            assert!((a.alpha(3.0) - gamma).abs() < 1e-12);
        }
    }
    let zero = alpha_from_f(&WaitingTimeFunction::zero(), 5.0).unwrap();
    assert_eq!((zero.alpha(2.0), zero.cumulative(2.0).re), (0.0, 0.0));
}

#[test]
fn kappa_closed_forms() {
    let k = kappa_from_f_exponential(1.0, 2.0).unwrap();
    assert_eq!(k.delta_coeff, 2.0);
    assert!(k.regular.is_none());

    let k = kappa_from_f_exponential(0.5, 1.0).unwrap();
    assert_eq!(k.delta_coeff, 0.5);
    for t in [0.0, 1.0, 3.0] {
        assert!((k.regular_at(t) + 0.25 * (-t / 2.0).exp()).abs() < 1e-15);
    }
}

#[test]
fn kappa_matches_laplace_definition() {
    // kappa(s) = s f(s) / (1 - f(s)) with f(s) = eps gamma / (s + gamma).
    for (eps, gamma) in GRID {
        let k = kappa_from_f_exponential(eps, gamma).unwrap();
        for s in [0.3, 1.0, 2.5] {
            let fs = eps * gamma / (s + gamma);
            let expected = s * fs / (1.0 - fs);
            // Transform of the regular part by Simpson on [0, 60/s].
            let upper = 60.0 / s;
            let laplace = simpson(&|t: f64| k.regular_at(t) * (-s * t).exp(), 0.0, upper, 1e-13);
            let got = k.delta_coeff + laplace;
            assert!((got - expected).abs() < 1e-9, "eps {eps}, gamma {gamma}, s {s}: {got} vs {expected}");
        }
    }
}

#[test]
fn kappa_f_identity_holds_across_parameters() {
    for (eps, gamma) in GRID {
        let w = WaitingTimeFunction::exponential(eps, gamma).unwrap();
        let k = kappa_from_f_exponential(eps, gamma).unwrap();
        let report = verify_kappa_f_relation(&k, &w, 10.0, 1e-13);
        assert!(report.holds(1e-8), "eps {eps}, gamma {gamma}: {report:?}");
    }
}

#[test]
fn kappa_f_identity_detects_corruption() {
    let w = WaitingTimeFunction::exponential(0.5, 1.0).unwrap();
    let mut k = kappa_from_f_exponential(0.5, 1.0).unwrap();
    k.delta_coeff *= 1.1;
    assert!(verify_kappa_f_relation(&k, &w, 10.0, 1e-13).max_residual > 1e-3);

    let zero = ScalarKernel {
        delta_coeff: 0.0,
        regular: None,
    };
    assert_eq!(verify_kappa_f_relation(&zero, &WaitingTimeFunction::zero(), 5.0, 1e-12).max_residual, 0.0);
}

#[test]
fn waiting_time_validation() {
    let w = WaitingTimeFunction::exponential(0.7, 1.3).unwrap();
    w.validate(20.0).unwrap();
    assert!(w.cumulative_defect(10.0, 1e-13) <= 1e-8);
    // f may change sign as long as F stays in [0, 1].
    let oscillating = WaitingTimeFunction::custom(|t| 0.5 * t.cos(), |t| 0.5 * t.sin() + 0.0);
    assert!(oscillating.validate(10.0).is_err());
    let ok = WaitingTimeFunction::custom(|t| 0.25 * t.sin(), |t| 0.25 * (1.0 - t.cos()));
    ok.validate(10.0).unwrap();
    let bad = WaitingTimeFunction::custom(|_| 0.3, |t| 0.3 * t);
    assert!(bad.validate(5.0).is_err());
}

#[test]
fn semi_markov_map_examples() {
    let w = WaitingTimeFunction::exponential(0.5, 1.0).unwrap();
    let p = projection();
    assert!(semi_markov_map(&w, &p, 0.0).unwrap().distance(&Superoperator::identity(2)) < 1e-15);
    let saturated = WaitingTimeFunction::custom(|_| 0.0, |_| 1.0);
    assert!(semi_markov_map(&saturated, &p, 1.0).unwrap().distance(&p) < 1e-15);
    let m = semi_markov_map(&w, &p, 2f64.ln()).unwrap();
    assert!((m.matrix()[(2, 2)] - c64(0.75, 0.)).norm() < 1e-15);

    let not_idempotent = p.scale_re(0.5).add(&Superoperator::identity(2).scale_re(0.5)).unwrap();
    assert!(matches!(semi_markov_map(&w, &not_idempotent, 1.0), Err(Error::ProjectionInvalid(_))));
    let transpose = Superoperator::from_fn(2, |x| x.transpose()).unwrap();
    assert!(matches!(semi_markov_map(&w, &transpose, 1.0), Err(Error::ProjectionInvalid(_))));
    let not_tp = Superoperator::from_fn(2, |x| nonmarkov::linalg::CMatrix::from_fn(2, 2, |i, j| if (i, j) == (0, 0) { x[(0, 0)] } else { c64(0., 0.) })).unwrap();
    assert!(matches!(semi_markov_map(&w, &not_tp, 1.0), Err(Error::ProjectionInvalid(_))));
}

#[test]
fn markovian_degeneracy_of_all_routes() {
    let gamma = 1.5;
    let w = WaitingTimeFunction::exponential(1.0, gamma).unwrap();
    let semigroup = l0().scale_re(gamma);
    let gen = build_scaled_generator(&alpha_from_f(&w, 8.0).unwrap(), &l0(), 8.0).unwrap();
    assert!(gen.eval(3.3).unwrap().distance(&semigroup) < 1e-12);

    let local = propagate_local(&gen, 0.0, 8.0, &StepControl::default().with_output_step(0.1)).unwrap();
    let kernel = kappa_from_f_exponential(1.0, gamma).unwrap().to_memory_kernel(&l0()).unwrap();
    let nonlocal = propagate_nonlocal(&kernel, 0.0, 8.0, 1e-3).unwrap();
    let exact = MapTrajectory::from_fn(0.0, &local.elapsed(), |t| Ok(semigroup.exp_scaled(t))).unwrap();
    let analytic = MapTrajectory::from_fn(0.0, &local.elapsed(), |t| semi_markov_map(&w, &projection(), t)).unwrap();
    assert!(local.sup_distance(&exact).unwrap() <= 1e-6);
    assert!(nonlocal.sup_distance(&exact).unwrap() <= 1e-6);
    assert!(analytic.sup_distance(&exact).unwrap() <= 1e-6);
}

#[test]
fn local_and_kernel_routes_match_semi_markov_map() {
    for (eps, gamma) in [(0.3, 1.0), (0.5, 2.0)] {
        let w = WaitingTimeFunction::exponential(eps, gamma).unwrap();
        let gen = build_scaled_generator(&alpha_from_f(&w, 6.0).unwrap(), &l0(), 6.0).unwrap();
        let local = propagate_local(&gen, 0.0, 6.0, &StepControl::default().numeric_only().with_output_step(0.05)).unwrap();
        let analytic = MapTrajectory::from_fn(0.0, &local.elapsed(), |t| semi_markov_map(&w, &projection(), t)).unwrap();
        assert!(local.sup_distance(&analytic).unwrap() <= 1e-6);
        let kernel = kappa_from_f_exponential(eps, gamma).unwrap().to_memory_kernel(&l0()).unwrap();
        let nonlocal = propagate_nonlocal(&kernel, 0.0, 6.0, 1e-3).unwrap();
        assert!(nonlocal.sup_distance(&analytic).unwrap() <= 1e-4);
    }
}

#[test]
fn tangent_rate_is_accepted_and_crosses_poles() {
    let half = sigma_z_dephasing().scale_re(0.5);
    let gen = build_scaled_generator(&RateFunction::tangent(10.0), &half, 10.0).unwrap();
    assert_eq!(gen.singularities().len(), 3);
    assert!(gen.has_exact_integral());
}

#[test]
fn commuting_mixture_with_mixed_sign_rates() {
    // Two commuting dephasing generators; the second rate is negative for a while
    // but its cumulative stays nonnegative.
    let z = lindblad_superop(&LindbladSpec::dissipative(2, vec![sigma_z()]).unwrap());
    let z2 = z.scale_re(0.5);
    let a1 = RateFunction::constant(0.4);
    let a2 = RateFunction::new(|t| 0.3 * (1.0 - 2.0 * (2.0 * t).sin()) * 0.5 + 0.3, |t| 0.3 * t + 0.15 * (t + (2.0 * t).cos() - 1.0));
    let gen = build_commuting_mixture(&[a1, a2], &[z.clone(), z2], 6.0).unwrap();
    let traj = propagate_local(&gen, 0.0, 6.0, &StepControl::default().with_output_step(0.05)).unwrap();
    assert!(traj.min_choi_eigenvalue() >= -1e-10);
    let numeric = propagate_local(&gen, 0.0, 6.0, &StepControl::default().numeric_only().with_output_step(0.05)).unwrap();
    assert!(numeric.sup_distance(&traj).unwrap() <= 1e-8);
}

#[test]
fn mixture_validation_errors() {
    let z = lindblad_superop(&LindbladSpec::dissipative(2, vec![sigma_z()]).unwrap());
    // Dephasing along z commutes with x dephasing and with decay, not with precession.
    let x = lindblad_superop(&LindbladSpec::new(sigma_x(), vec![]).unwrap());
    let a = RateFunction::constant(1.0);
    match build_commuting_mixture(&[a.clone(), a.clone()], &[z.clone(), x], 1.0) {
        Err(Error::NonCommuting { first: 0, second: 1, norm }) => assert!(norm > 0.1),
        other => panic!("{other:?}"),
    }
    let dipping = RateFunction::new(|t| -(t.cos()), |t| -(t.sin()));
    match build_commuting_mixture(&[a.clone(), dipping], &[z.clone(), z.clone()], 1.0) {
        Err(Error::NegativeCumulative { index: 1, tau, .. }) => assert!(tau > 0.0 && tau < 0.01),
        other => panic!("{other:?}"),
    }
    let anti = z.scale_re(-1.0);
    assert!(matches!(build_scaled_generator(&a, &anti, 1.0), Err(Error::NotLindblad { index: 0, .. })));
}

#[test]
fn tabulated_waiting_time_drives_the_kernel_check() {
    let xs: Vec<f64> = (0..=2000).map(|k| 0.005 * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|t| 0.5 * (-t).exp()).collect();
    let w = WaitingTimeFunction::tabulated(&xs, &ys).unwrap();
    let k = kappa_from_f_exponential(0.5, 1.0).unwrap();
    let report = verify_kappa_f_relation(&k, &w, 9.0, 1e-12);
    assert!(report.max_residual < 1e-6, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cumulative_identity(eps in 0.01f64..1.0, gamma in 0.1f64..3.0, tau in 0.0f64..10.0) {
        let w = WaitingTimeFunction::exponential(eps, gamma).unwrap();
        let a = alpha_from_f(&w, 10.0).unwrap();
        prop_assert!((a.cumulative(tau).re + (1.0 - w.cumulative(tau)).ln()).abs() <= 1e-9);
        prop_assert!(w.cumulative(tau) >= 0.0 && w.cumulative(tau) <= 1.0);
    }

    #[test]
    fn memory_kernel_uses_full_weight(eps in 0.05f64..1.0, gamma in 0.1f64..3.0) {
        let k = kappa_from_f_exponential(eps, gamma).unwrap();
        let kernel: MemoryKernel = k.to_memory_kernel(&l0()).unwrap();
        prop_assert!(kernel.instantaneous_generator().distance(&l0().scale_re(eps * gamma)) < 1e-15);
    }
}
