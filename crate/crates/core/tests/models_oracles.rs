mod common;

use std::f64::consts::PI;

use common::*;
use nonmarkov::kernels::{alpha_from_f, build_scaled_generator, semi_markov_map, WaitingTimeFunction};
use nonmarkov::linalg::{self, c64, sigma_minus, sigma_x, sigma_z, CMatrix};
use nonmarkov::models::*;
use nonmarkov::propagate::*;
use nonmarkov::superop::*;
use nonmarkov::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn corrected_xstate() -> XState {
    XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.48, 0.)).unwrap()
}

fn through_second(map: &Superoperator, rho: &DensityMatrix) -> DensityMatrix {
    let out = apply(&extend_channel(map, Factor::Second).unwrap(), rho.matrix()).unwrap();
    DensityMatrix::new(out).unwrap()
}

#[test]
fn projection_channels() {
    let p = projection_channel(&DensityMatrix::maximally_mixed(3));
    let rho = random_channel(&mut rng(1), 3, 2);
    let x = apply(&rho, &CMatrix::from_diagonal_element(3, 3, c64(1.0 / 3.0, 0.))).unwrap();
    let out = apply(&p, &x).unwrap();
    assert!((out - linalg::identity(3) * c64(1.0 / 3.0, 0.)).norm() < 1e-15);
    assert!(compose(&p, &p).unwrap().distance(&p) < 1e-15);
    assert!(linalg::min_hermitian_eigenvalue(&choi_of(&p)) >= -1e-15);

    let d = diagonal_projection(4);
    assert!(compose(&d, &d).unwrap().distance(&d) < 1e-15);
    assert!(is_completely_positive(&d, CP_TOL).holds && is_trace_preserving(&d, TP_TOL).holds);
    let x = XState::new([0.1, 0.4, 0.3, 0.2], c64(0.1, 0.05), c64(0.2, -0.1)).unwrap();
    let diag = apply(&d, &x.to_matrix()).unwrap();
    assert_eq!(diag, XState::new([0.1, 0.4, 0.3, 0.2], c64(0., 0.), c64(0., 0.)).unwrap().to_matrix());
}

#[test]
fn xstate_validation() {
    // |rho23| = 1/2 needs rho22 rho33 >= 1/4, impossible once rho11 = rho44 = 0.01.
    assert!(XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.5, 0.)).is_err());
    assert!(XState::new([0.5, 0.5, 0.1, -0.1], c64(0., 0.), c64(0., 0.)).is_err());
    assert!(XState::new([0.3, 0.3, 0.3, 0.3], c64(0., 0.), c64(0., 0.)).is_err());
    let mut m = corrected_xstate().to_matrix();
    assert_eq!(XState::from_matrix(&m).unwrap(), corrected_xstate());
    m[(0, 1)] = c64(1e-6, 0.);
    m[(1, 0)] = c64(1e-6, 0.);
    assert!(XState::from_matrix(&m).is_err());
}

#[test]
fn xstate_closure_under_semi_markov_dephasing() {
    let w = WaitingTimeFunction::exponential(0.3, 1.2).unwrap();
    let p = diagonal_projection(4);
    let x = XState::new([0.1, 0.4, 0.3, 0.2], c64(0.1, 0.05), c64(0.2, -0.1)).unwrap();
    for tau in [0.0, 0.4, 1.7, 6.0] {
        let out = apply(&semi_markov_map(&w, &p, tau).unwrap(), &x.to_matrix()).unwrap();
        assert!(x_pattern_defect(&out) <= X_PATTERN_TOL);
        let back = XState::from_matrix(&out).unwrap();
        assert_eq!(back.populations(), x.populations());
        assert!((back.rho23() - x.rho23() * (1.0 - w.cumulative(tau))).norm() < 1e-15);
        assert!((apply(&xstate_dephasing_map(w.cumulative(tau)), &x.to_matrix()).unwrap() - &out).norm() < 1e-15);
    }
}

#[test]
fn concurrence_examples() {
    assert!((concurrence_x(&XState::phi_plus()) - 1.0).abs() < 1e-15);
    assert_eq!(concurrence_x(&XState::maximally_mixed()), 0.0);
    for c in [0.0, 0.3, -0.7, 1.0] {
        let scaled = XState::phi_plus().with_scaled_coherences(c).unwrap();
        assert!((concurrence_x(&scaled) - f64::abs(c)).abs() < 1e-15);
        // Same through the extended coherence-scaling channel.
        let scale = Superoperator::from_fn(2, |x| CMatrix::from_fn(2, 2, |i, j| if i == j { x[(i, j)] } else { x[(i, j)] * c })).unwrap();
        let out = through_second(&scale, &DensityMatrix::phi_plus());
        assert!((concurrence(&out).unwrap() - f64::abs(c)).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_concurrence_matches_wootters(
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0,
        r14 in 0.0f64..1.0, r23 in 0.0f64..1.0, phase in 0.0f64..6.3,
    ) {
        let total = a + b + c + d + 1e-9;
        let p = [a / total, b / total, c / total, d / total];
        let rho14 = Complex64::from_polar(r14 * (p[0] * p[3]).sqrt(), phase);
        let rho23 = Complex64::from_polar(r23 * (p[1] * p[2]).sqrt(), -phase);
        let renorm = 1.0 - p.iter().sum::<f64>();
        let p = [p[0] + renorm, p[1], p[2], p[3]];
        if let Ok(x) = XState::new(p, rho14, rho23) {
            let wootters = concurrence(&x.to_density_matrix()).unwrap();
            prop_assert!((concurrence_x(&x) - wootters).abs() < 1e-6);
        }
    }
}

#[test]
fn asymptotic_concurrence_examples() {
    let x = corrected_xstate();
    assert!((asymptotic_concurrence(&x, 0.1).unwrap() - 0.844).abs() < 1e-12);
    assert_eq!(asymptotic_concurrence(&x, 1.0).unwrap(), 0.0);
    assert_eq!(asymptotic_concurrence(&XState::phi_plus(), 1.0).unwrap(), 0.0);
    assert!(asymptotic_concurrence(&x, 0.0).is_err());
}

#[test]
fn simulated_long_time_concurrence() {
    let gamma = 1.0;
    let horizon = 20.0 / gamma;
    let x = corrected_xstate();
    let l = diagonal_projection(4).sub(&Superoperator::identity(4)).unwrap();
    for eps in [0.1, 0.5, 1.0] {
        let w = WaitingTimeFunction::exponential(eps, gamma).unwrap();
        let gen = build_scaled_generator(&alpha_from_f(&w, horizon).unwrap(), &l, horizon).unwrap();
        let traj = propagate_local(&gen, 0.0, horizon, &StepControl::default().numeric_only().with_output_step(1.0)).unwrap();
        let out = XState::from_matrix(&apply(traj.last(), &x.to_matrix()).unwrap()).unwrap();
        let simulated = concurrence_x(&out);
        let limit = asymptotic_concurrence(&x, eps).unwrap();
        assert!((simulated - limit).abs() <= 1e-3, "eps {eps}: {simulated} vs {limit}");
        if eps == 1.0 {
            assert!(simulated <= 1e-9);
        }
    }
}

/// c_01 for a qubit reservoir with `Z_n = e_n + w sigma_z + g_n sigma_x` and
/// `w_R = I/2`, from `exp(-i K t) = cos(r t) - i sin(r t) K / r`.
fn two_level_c01(w: f64, g: [f64; 2], e: [f64; 2], t: f64) -> Complex64 {
    let u = |n: usize| {
        let r = (w * w + g[n] * g[n]).sqrt();
        let k = sigma_z() * c64(w, 0.) + sigma_x() * c64(g[n], 0.);
        let core = linalg::identity(2) * c64((r * t).cos(), 0.) - k * c64(0., (r * t).sin() / r);
        core * Complex64::from_polar(1.0, -e[n] * t)
    };
    (u(0) * u(1).adjoint()).trace() * 0.5
}

fn symmetric_model() -> PureDecoherenceModel {
    PureDecoherenceModel::new(
        vec![0.5, -0.5],
        sigma_z(),
        vec![sigma_x() * c64(0.4, 0.), sigma_x() * c64(-0.4, 0.)],
        DensityMatrix::maximally_mixed(2),
    )
    .unwrap()
}

#[test]
fn pure_decoherence_factors() {
    let m = symmetric_model();
    assert!((m.cmn(0.0) - CMatrix::from_element(2, 2, c64(1., 0.))).norm() < 1e-14);
    let golden = [
        (0.7, c64(0.6659832871641944, -0.5609499843610071)),
        (1.3, c64(0.19583430558760584, -0.7054152315532243)),
        (4.0, c64(-0.5012253093414296, 0.5803293304077586)),
    ];
    for (t, value) in golden {
        let c = m.cmn(t);
        assert!((c[(0, 1)] - value).norm() < 1e-12);
        assert!((c[(0, 1)] - two_level_c01(1.0, [0.4, -0.4], [0.5, -0.5], t)).norm() < 1e-12);
        assert!((c[(1, 0)] - value.conj()).norm() < 1e-12);
    }

    let same = PureDecoherenceModel::new(
        vec![0.0, 0.0],
        sigma_z(),
        vec![sigma_x() * c64(0.3, 0.), sigma_x() * c64(0.3, 0.)],
        DensityMatrix::maximally_mixed(2),
    )
    .unwrap();
    assert!((same.cmn(2.7) - CMatrix::from_element(2, 2, c64(1., 0.))).norm() < 1e-12);
}

#[test]
fn pure_decoherence_invariants_on_default_model() {
    let m = PureDecoherenceModel::qubit_default();
    for k in 0..=200 {
        let t = 0.05 * k as f64;
        let c = m.cmn(t);
        for n in 0..2 {
            assert!((c[(n, n)] - c64(1., 0.)).norm() <= 1e-12);
        }
        assert!(linalg::min_hermitian_eigenvalue(&c) >= -1e-10);
        let map = m.map(t);
        assert!(is_completely_positive(&map, CP_TOL).holds);
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(0.3, 0.), c64(0.7, 0.)]));
        assert!((apply(&map, &diag).unwrap() - &diag).norm() < 1e-14);
    }
}

#[test]
fn pure_decoherence_derivative_is_exact() {
    let m = PureDecoherenceModel::qubit_default();
    for t in [0.3, 2.0, 7.1] {
        let (_, dc) = m.cmn_with_derivative(t);
        let h = 1e-5;
        let fd = (m.cmn(t + h) - m.cmn(t - h)) / c64(2.0 * h, 0.);
        assert!((dc - fd).norm() < 1e-8);
    }
}

#[test]
fn pure_decoherence_generator_closure() {
    let m = PureDecoherenceModel::qubit_default();
    let ctrl = StepControl::default().with_output_step(0.05).with_tolerances(1e-11, 1e-14);
    let traj = propagate_local(&m.time_local_generator(), 0.0, 10.0, &ctrl).unwrap();
    let worst = max_over(traj.elapsed().iter().zip(traj.maps()).map(|(t, map)| map.distance(&m.map(*t))));
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn pure_decoherence_generator_is_not_lindblad() {
    let m = PureDecoherenceModel::qubit_default();
    let times: Vec<f64> = (0..=200).map(|k| 0.05 * k as f64).collect();
    let scan = m.lindblad_witness(&times).unwrap();
    assert!(scan.min_gks_eigenvalue < -1e-6, "{scan:?}");
    // Non-monotone coherence is what the witness detects.
    let c: Vec<f64> = times.iter().map(|&t| m.cmn(t)[(0, 1)].norm()).collect();
    assert!(c.windows(2).any(|w| w[1] > w[0] + 1e-6));
}

#[test]
fn coherence_zero_crossing_is_reported() {
    // Z_0 = sigma_z, Z_1 = -sigma_z, w_R = I/2: c_01 = cos 2t.
    let m = PureDecoherenceModel::new(vec![0.0, 0.0], CMatrix::zeros(2, 2), vec![sigma_z(), -sigma_z()], DensityMatrix::maximally_mixed(2)).unwrap();
    assert!((m.cmn(0.3)[(0, 1)] - c64(0.6f64.cos(), 0.)).norm() < 1e-14);
    match m.generator(PI / 4.0) {
        Err(Error::CoherenceZeroCrossing { m: 0, n: 1, modulus, .. }) => assert!(modulus <= COHERENCE_ZERO_TOL),
        other => panic!("{other:?}"),
    }
    assert!(m.generator(0.5).is_ok());
}

#[test]
fn pure_decoherence_rejects_non_hermitian_coupling() {
    let r = PureDecoherenceModel::new(vec![0.0, 1.0], sigma_z(), vec![sigma_minus(), sigma_x()], DensityMatrix::maximally_mixed(2));
    assert!(r.is_err());
}

#[test]
fn tan_model_examples() {
    let model = tan_dephasing_model(3.0 * PI).unwrap();
    for n in 0..3 {
        let pole = (n as f64 + 0.5) * PI;
        assert!(model.analytic_map(pole).matrix()[(2, 2)].norm() < 1e-15);
        assert!((model.analytic_map(n as f64 * PI).matrix()[(2, 2)].norm() - 1.0).abs() < 1e-15);
    }
    for tau in (0..=300).map(|k| 3.0 * PI * k as f64 / 300.0) {
        let out = through_second(&model.analytic_map(tau), &DensityMatrix::phi_plus());
        let x = XState::from_matrix(out.matrix()).unwrap();
        assert!((concurrence_x(&x) - tau.cos().abs()).abs() <= 1e-6);
        assert!((concurrence(&out).unwrap() - tau.cos().abs()).abs() <= 1e-6);
    }
}

#[test]
fn tan_model_entanglement_revival() {
    let model = tan_dephasing_model(3.0 * PI).unwrap();
    let c = |tau: f64| {
        let out = through_second(&model.analytic_map(tau), &DensityMatrix::phi_plus());
        concurrence_x(&XState::from_matrix(out.matrix()).unwrap())
    };
    assert!(c(0.6 * PI) < c(0.95 * PI));
    assert!(c(0.5 * PI) < c(0.95 * PI) - 0.5);
    // Zeros only at the poles.
    for k in 0..=3000 {
        let tau = 3.0 * PI * k as f64 / 3000.0;
        let near_pole = (0..3).any(|n| (tau - (n as f64 + 0.5) * PI).abs() < 2e-3);
        if !near_pole {
            assert!(c(tau) > 1e-3);
        }
    }
}

#[test]
fn tan_model_triple_agreement() {
    let model = tan_dephasing_model(3.0 * PI).unwrap();
    let nonlocal = propagate_nonlocal(&model.kernel, 0.0, 3.0 * PI, 1e-3).unwrap();
    let local = propagate_local_on(&model.generator, 0.0, nonlocal.grid(), &StepControl::default()).unwrap();
    assert_eq!(local.len(), nonlocal.len());
    assert!(local.sup_distance(&nonlocal).unwrap() <= 1e-4);
    for traj in [&local, &nonlocal] {
        let worst = max_over(traj.elapsed().iter().zip(traj.maps()).map(|(t, m)| m.distance(&model.analytic_map(*t))));
        assert!(worst <= 1e-4, "{worst:e}");
        assert!(traj.min_choi_eigenvalue() >= -1e-10);
    }
}

#[test]
fn dilation_reduces_to_cptp_maps() {
    let m = DilationModel::coupled_qubits(1.0, 0.5).unwrap();
    let taus: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let traj = m.trajectory(0.0, &taus).unwrap();
    assert!(traj.min_choi_eigenvalue() >= -1e-9);
    assert!(traj.max_tp_drift() <= 1e-10);
    assert!(traj.maps()[0].distance(&Superoperator::identity(2)) < 1e-12);
}

#[test]
fn dilation_without_coupling_is_the_system_semigroup() {
    let sys = LindbladSpec::new(sigma_x() * c64(0.6, 0.), vec![sigma_minus() * c64(0.5f64.sqrt(), 0.)]).unwrap();
    let id = linalg::identity(2);
    let total = LindbladSpec::new(
        linalg::kron(sys.hamiltonian(), &id),
        vec![linalg::kron(&sys.lindblad_ops()[0], &id), linalg::kron(&id, &sigma_minus())],
    )
    .unwrap();
    let m = DilationModel::new(2, lindblad_superop(&total), DensityMatrix::maximally_mixed(2)).unwrap();
    let l = lindblad_superop(&sys);
    for (t, t0) in [(1.0, 0.0), (3.5, 1.2)] {
        assert!(m.reduce(t, t0).unwrap().distance(&l.exp_scaled(t - t0)) < 1e-12);
    }
}

#[test]
fn coupled_dilation_is_not_divisible_but_homogeneous() {
    let m = DilationModel::coupled_qubits(1.0, 0.5).unwrap();
    let builder = |a: f64, b: f64| m.trajectory(a, &[0.0, b - a]);
    let defect = composition_defect(builder, 2.0, 1.0, 0.0).unwrap();
    assert!(defect > 1e-3, "{defect:e}");
    for (t, t0) in [(1.0, 0.0), (2.5, 0.5)] {
        assert!(m.reduce(t + 0.7, t0 + 0.7).unwrap().distance(&m.reduce(t, t0).unwrap()) <= 1e-8);
    }
    assert!(matches!(m.reduce(0.0, 1.0), Err(Error::InvalidInterval { .. })));
}

#[test]
fn dilation_validation() {
    let not_lindblad = lindblad_superop(&LindbladSpec::new(CMatrix::zeros(4, 4), vec![]).unwrap())
        .sub(&Superoperator::identity(4))
        .unwrap();
    assert!(DilationModel::new(2, not_lindblad, DensityMatrix::maximally_mixed(2)).is_err());
    let l = lindblad_superop(&LindbladSpec::dissipative(4, vec![]).unwrap());
    assert!(DilationModel::new(3, l, DensityMatrix::maximally_mixed(2)).is_err());
}

#[test]
fn model_json_round_trips() {
    let x = corrected_xstate();
    let back: XState = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
    assert_eq!(back, x);
    let bad = r#"{"rho11":0.01,"rho22":0.49,"rho33":0.49,"rho44":0.01,"rho14":[0,0],"rho23":[0.5,0]}"#;
    assert!(serde_json::from_str::<XState>(bad).is_err());

    let m = PureDecoherenceModel::qubit_default();
    let back: PureDecoherenceModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);

    let d = DilationModel::coupled_qubits(0.8, 0.3).unwrap();
    let back: DilationModel = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
    assert_eq!(back, d);
}
