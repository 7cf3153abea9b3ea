use nonmarkov::linalg::{c64, CMatrix};
use nonmarkov::superop::Superoperator;
use nonmarkov::trajectory::{GeneratorTrajectory, MapTrajectory};
use nonmarkov_cli::output;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
}

fn superop(d: usize) -> impl Strategy<Value = Superoperator> {
    let n = d * d;
    prop::collection::vec((finite(), finite()), n * n).prop_map(move |v| {
        let m = CMatrix::from_fn(n, n, |r, c| {
            let (re, im) = v[r * n + c];
            c64(re, im)
        });
        Superoperator::from_matrix(d, m).unwrap()
    })
}

fn grid(len: usize) -> impl Strategy<Value = (f64, Vec<f64>)> {
    (-10.0..10.0f64, 1e-4..1.0f64).prop_map(move |(t0, h)| (t0, (0..len).map(|k| t0 + k as f64 * h).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_csv_and_json_are_exact(
        ((t0, g), maps) in (1usize..=3, 1usize..6)
            .prop_flat_map(|(d, len)| (grid(len + 1), prop::collection::vec(superop(d), len))),
    ) {
        // The first map of a trajectory is pinned to the identity.
        let maps: Vec<_> = std::iter::once(Superoperator::identity(maps[0].dim())).chain(maps).collect();
        let traj = MapTrajectory::new(t0, g, maps).unwrap();
        let csv = output::map_trajectory_from_csv(&output::map_trajectory_csv(&traj, None)).unwrap();
        prop_assert_eq!(&csv, &traj);
        let json: MapTrajectory = serde_json::from_str(&serde_json::to_string(&traj).unwrap()).unwrap();
        prop_assert_eq!(&json, &traj);
    }

    #[test]
    fn generator_csv_and_json_are_exact(
        gens in prop::collection::vec(prop::option::weighted(0.7, superop(2)), 1..6),
        (_, g) in grid(5),
    ) {
        let g = g[..gens.len()].to_vec();
        let traj = GeneratorTrajectory::new(g, gens).unwrap();
        let csv = output::generator_trajectory_from_csv(&output::generator_trajectory_csv(&traj, 2)).unwrap();
        prop_assert_eq!(&csv, &traj);
        let json: GeneratorTrajectory = serde_json::from_str(&serde_json::to_string(&traj).unwrap()).unwrap();
        prop_assert_eq!(&json, &traj);
    }
}
