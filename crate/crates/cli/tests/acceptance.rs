//! One line per criterion, tolerances pinned in `Tolerances::default()`.

use nonmarkov_cli::acceptance::{Tolerances, CRITERIA, DEFAULT_SEED};

#[test]
fn acceptance_criteria() {
    let tol = Tolerances::default();
    let mut failed = Vec::new();
    for criterion in &CRITERIA {
        let result = criterion.run(&tol, DEFAULT_SEED);
        println!("{result}");
        if !result.passed() {
            failed.push(result.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn bounds_are_pinned() {
    let t = Tolerances::default();
    assert_eq!(
        (t.local_vs_analytic, t.nonlocal_vs_analytic, t.runtime_seconds, t.delta_kernel),
        (1e-6, 1e-4, 10.0, 1e-6)
    );
    assert_eq!((t.tan_nonlocal_cosine, t.tan_local_vs_analytic, t.min_choi, t.inverse_window), (1e-6, 1e-4, -1e-10, 1e-3));
    assert_eq!((t.concurrence_cosine, t.rate_relative, t.repropagation, t.route_agreement), (1e-6, 1e-5, 1e-4, 1e-5));
    assert_eq!(
        (t.composition_markovian, t.composition_non_markovian, t.homogeneity),
        (1e-8, 1e-2, 1e-6)
    );
    assert_eq!((t.asymptotic_concurrence, t.separable_limit), (1e-3, 1e-9));
    assert_eq!((t.diagonal_coherence, t.coherence_psd, t.generator_closure), (1e-12, -1e-10, 1e-6));
    assert_eq!((t.kernel_identity, t.order_ratio), (1e-8, 3.5));
}
