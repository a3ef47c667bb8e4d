mod support;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use rolecycle_core::lifecycle::{project_distribution, MatrixKind, TransitionMatrix};
use rolecycle_core::role::{DistributionVector, Role};
use rolecycle_core::steering::{
    apply_all, apply_intervention, distance, recommend, search, whatif, Edit, InterventionSpec, Strategy,
    SteeringError, TargetDistribution,
};
use support::markov::*;

fn random_edit(rng: &mut Pcg32) -> Edit {
    let (from, succ) = ALLOWED[rng.random_range(0..6)];
    Edit {
        from,
        to: succ[rng.random_range(0..succ.len())],
        multiplier: 2f64.powf(rng.random_range(-2.0..2.0)),
    }
}

fn random_catalog(rng: &mut Pcg32, n: usize) -> Vec<InterventionSpec> {
    (0..n)
        .map(|i| InterventionSpec {
            id: format!("i{i}"),
            label: String::new(),
            edits: (0..rng.random_range(1..=3)).map(|_| random_edit(rng)).collect(),
            cost: rng.random_range(0.0..5.0),
        })
        .collect()
}

fn setup(seed: u64) -> (Pcg32, TransitionMatrix, DistributionVector, TargetDistribution) {
    let mut rng = Pcg32::seed_from_u64(seed);
    let m = random_masked(&mut rng, false);
    let d = random_distribution(&mut rng);
    let t = TargetDistribution::new(random_distribution(&mut rng));
    (rng, m, d, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interventions_keep_rows_stochastic_and_masked(seed in any::<u64>()) {
        let (mut rng, m, _, _) = setup(seed);
        for spec in random_catalog(&mut rng, 4) {
            let edited = apply_intervention(&m, &spec).unwrap();
            prop_assert_eq!(edited.kind(), MatrixKind::GraphMasked);
            for from in Role::ALL {
                let s: f64 = Role::ALL.iter().map(|&to| edited.get(from, to)).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                for to in Role::ALL {
                    if !allowed(from, to) || m.get(from, to) == 0.0 {
                        prop_assert_eq!(edited.get(from, to), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn edits_commute(seed in any::<u64>()) {
        let (mut rng, m, _, _) = setup(seed);
        let cat = random_catalog(&mut rng, 3);
        let forward = apply_all(&m, cat.iter()).unwrap();
        let backward = apply_all(&m, cat.iter().rev()).unwrap();
        prop_assert!(forward.max_abs_diff(&backward) <= 1e-12);
    }

    #[test]
    fn greedy_is_within_half_again_of_exhaustive(seed in any::<u64>(), n in 1usize..=4, horizon in 1usize..20) {
        let (mut rng, m, d, t) = setup(seed);
        let cat = random_catalog(&mut rng, n);
        let ex = search(&d, &m, &t, &cat, horizon, n, Strategy::Exhaustive).unwrap();
        let gr = search(&d, &m, &t, &cat, horizon, n, Strategy::Greedy).unwrap();
        prop_assert!(gr.best().residual <= 1.5 * ex.best().residual + 1e-12,
            "greedy {} vs exhaustive {}", gr.best().residual, ex.best().residual);
        prop_assert!(ex.best().residual <= gr.best().residual + 1e-15);
    }

    #[test]
    fn top_plan_is_never_worse_than_doing_nothing(seed in any::<u64>(), n in 1usize..=6, horizon in 1usize..30) {
        let (mut rng, m, d, t) = setup(seed);
        let cat = random_catalog(&mut rng, n);
        let rec = recommend(&d, &m, &t, &cat, horizon, 2).unwrap();
        prop_assert!(rec.best().residual <= rec.baseline().residual);
        let baseline = distance(&project_distribution(&d, &m, horizon).unwrap(), &t.shares);
        prop_assert!((rec.baseline().residual - baseline).abs() <= 1e-15);
        prop_assert!(rec.plans.windows(2).all(|w| w[0].residual <= w[1].residual));
    }

    #[test]
    fn reaching_the_target_ranks_the_empty_plan_first(seed in any::<u64>()) {
        let (mut rng, _, d, _) = setup(seed);
        let cat = random_catalog(&mut rng, 3);
        let rec = recommend(&d, &TransitionMatrix::identity(), &TargetDistribution::new(d), &cat, 5, 2).unwrap();
        prop_assert!(rec.best().interventions.is_empty());
        prop_assert_eq!(rec.best().residual, 0.0);
    }

    #[test]
    fn whatif_without_interventions_is_projection(seed in any::<u64>(), steps in 0usize..50) {
        let (_, m, d, _) = setup(seed);
        let traj = whatif(&d, &m, &[], steps).unwrap();
        prop_assert_eq!(traj.len(), steps + 1);
        prop_assert_eq!(traj[steps], project_distribution(&d, &m, steps).unwrap());
    }
}

#[test]
fn edits_may_not_create_forbidden_transitions() {
    let spec = InterventionSpec {
        id: "x".into(),
        label: String::new(),
        edits: vec![Edit { from: Role::Passive, to: Role::Leader, multiplier: 2.0 }],
        cost: 1.0,
    };
    let err = apply_intervention(&TransitionMatrix::identity(), &spec).unwrap_err();
    assert!(matches!(err, SteeringError::InvalidEdit { .. }));
}

#[test]
fn total_variation_is_half_the_l1_distance() {
    let a = DistributionVector::point(Role::Active);
    let b = DistributionVector::point(Role::Passive);
    assert_eq!(distance(&a, &b), 1.0);
    assert_eq!(distance(&a, &a), 0.0);
}
