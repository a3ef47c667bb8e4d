use proptest::prelude::*;
use rolecycle_core::activity::{ActivityBaseline, ActivityMeasures, LoginRecency, Relative, RelativeMeasures};
use rolecycle_core::classify::{classify, FeatureVector, SnaRelative};
use rolecycle_core::config::ThresholdConfig;
use rolecycle_core::event::{MemberId, Window};
use rolecycle_core::role::Role;
use rolecycle_core::sna::CentralityRow;

const DAY: f64 = 86_400.0;

/// Role the rules should produce, written out directly from their
/// definitions in the README rather than from the classifier's tables.
fn expected_role(f: &FeatureVector, c: &ThresholdConfig) -> Role {
    let login_secs = match f.activity.time_since_last_login {
        LoginRecency::Never => None,
        LoginRecency::Seconds(s) => Some(s),
    };
    let never = login_secs.is_none();
    let signup_days = f.activity.days_since_signup;
    let departed = f.explicit_departure
        || login_secs.is_some_and(|s| s / DAY > c.departed_inactivity_days)
        || (never && signup_days.is_some_and(|d| d > c.departed_inactivity_days));
    if departed {
        return Role::Departed;
    }
    if !f.has_signup {
        return Role::Visitor;
    }
    let bursty = f.activity.burstiness.is_some_and(|b| b >= c.troll_burstiness_min);
    let flagged = f.activity.flags_received as f64 >= c.troll_flags_min as f64;
    let unaccepted = f.centrality.reciprocity <= c.troll_reciprocity_max
        && f.sna_relative.degree_out.percentile.is_some_and(|p| p >= 0.75);
    if bursty && (flagged || unaccepted) {
        return Role::Troll;
    }
    if signup_days.is_some_and(|d| d <= c.novice_max_days) {
        return Role::Novice;
    }
    let degree = f.sna_relative.degree_total.percentile;
    let s = &f.sna_relative;
    let broker = [s.betweenness.percentile, s.closeness.percentile, s.eigenvector.percentile]
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))));
    let posts = f.relative.post_count.percentile;
    if degree.is_some_and(|d| d >= c.leader_degree_percentile_min)
        && broker.is_some_and(|b| b >= c.leader_broker_percentile_min)
        && posts.is_some_and(|p| p >= c.leader_activity_percentile_min)
    {
        return Role::Leader;
    }
    let recency = f.relative.time_since_last_login.ratio_to_mean;
    let gap = f.relative.mean_inter_login_gap.ratio_to_mean;
    if recency.is_some_and(|r| r <= c.active_recency_ratio_max)
        && gap.is_some_and(|g| g <= c.active_gap_ratio_max)
        && degree.is_some_and(|d| (0.25..=0.95).contains(&d))
    {
        return Role::Active;
    }
    Role::Passive
}

fn opt_f64(lo: f64, hi: f64) -> impl Strategy<Value = Option<f64>> {
    prop::option::weighted(0.8, lo..hi)
}

fn relative() -> impl Strategy<Value = Relative> {
    (opt_f64(0.0, 1.0), opt_f64(0.0, 3.0)).prop_map(|(percentile, ratio_to_mean)| Relative { percentile, ratio_to_mean })
}

/// Percentiles on a coarse grid, so rule boundaries are hit exactly.
fn grid_relative() -> impl Strategy<Value = Relative> {
    (prop::option::weighted(0.8, 0u32..=20), prop::option::weighted(0.8, 0u32..=30)).prop_map(|(p, r)| Relative {
        percentile: p.map(|p| p as f64 / 20.0),
        ratio_to_mean: r.map(|r| r as f64 / 10.0),
    })
}

fn any_relative() -> impl Strategy<Value = Relative> {
    prop_oneof![relative(), grid_relative()]
}

prop_compose! {
    fn features()(
        degrees in prop::array::uniform3(0.0f64..20.0),
        central in prop::array::uniform4(0.0f64..1.0),
        sna in prop::array::uniform5(any_relative()),
        rel in prop::array::uniform6(any_relative()),
        signup_days in opt_f64(0.0, 200.0),
        login in prop::option::weighted(0.85, 0.0f64..120.0 * DAY),
        gap in opt_f64(60.0, 10.0 * DAY),
        posts in 0u64..50,
        burst in prop::option::weighted(0.8, prop_oneof![0.0f64..1.0, Just(0.8), Just(1.0)]),
        flags in 0u64..6,
        churn in 0.0f64..1.0,
        has_signup in any::<bool>(),
        departure in prop::bool::weighted(0.1),
    ) -> FeatureVector {
        FeatureVector {
            member: MemberId::new("m").unwrap(),
            snapshot: Window::new(0, 14 * 86_400).unwrap(),
            centrality: CentralityRow {
                degree_in: degrees[0],
                degree_out: degrees[1],
                degree_total: degrees[0] + degrees[1],
                closeness: central[0],
                betweenness: central[1],
                eigenvector: central[2],
                reciprocity: central[3],
            },
            sna_relative: SnaRelative {
                degree_total: sna[0],
                degree_out: sna[1],
                closeness: sna[2],
                betweenness: sna[3],
                eigenvector: sna[4],
            },
            activity: ActivityMeasures {
                days_since_signup: if has_signup { signup_days } else { None },
                time_since_last_login: login.map_or(LoginRecency::Never, LoginRecency::Seconds),
                mean_inter_login_gap: gap,
                post_count: posts,
                burstiness: burst,
                flags_received: flags,
            },
            relative: RelativeMeasures {
                days_since_signup: rel[0],
                time_since_last_login: rel[1],
                mean_inter_login_gap: rel[2],
                post_count: rel[3],
                burstiness: rel[4],
                flags_received: rel[5],
            },
            edge_churn: churn,
            has_signup,
            explicit_departure: departure,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn exactly_one_role_matching_the_rule_oracle(f in features()) {
        let cfg = ThresholdConfig::default();
        let a = classify(&f, &cfg).unwrap();
        prop_assert_eq!(a.role, expected_role(&f, &cfg));
        prop_assert!(a.fired_rules.len() <= 1);
        if a.fired_rules.is_empty() {
            prop_assert_eq!(a.role, Role::Passive);
        } else {
            prop_assert_eq!(a.fired_rules[0].rule.role(), a.role);
        }
    }

    #[test]
    fn classification_is_deterministic(f in features()) {
        let cfg = ThresholdConfig::default();
        prop_assert_eq!(classify(&f, &cfg).unwrap(), classify(&f, &cfg).unwrap());
    }

    #[test]
    fn replaying_fired_rules_reproduces_the_role(f in features()) {
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        prop_assert_eq!(a.replay(&f), Some(a.role));
    }

    #[test]
    fn more_flags_never_leave_troll(f in features(), extra in 1u64..20) {
        let cfg = ThresholdConfig::default();
        if classify(&f, &cfg).unwrap().role == Role::Troll {
            let mut g = f.clone();
            g.activity.flags_received += extra;
            prop_assert_eq!(classify(&g, &cfg).unwrap().role, Role::Troll);
        }
    }
}

prop_compose! {
    fn population()(members in prop::collection::vec((features(), 0u64..40), 2..30)) -> Vec<FeatureVector> {
        members.into_iter().map(|(mut f, posts)| { f.activity.post_count = posts; f }).collect()
    }
}

fn with_post_relatives(pop: &[FeatureVector], scale: u64) -> Vec<FeatureVector> {
    let scaled: Vec<ActivityMeasures> = pop
        .iter()
        .map(|f| ActivityMeasures { post_count: f.activity.post_count * scale, ..f.activity })
        .collect();
    let baseline = ActivityBaseline::new(scaled.iter());
    pop.iter()
        .zip(&scaled)
        .map(|(f, m)| {
            let mut g = f.clone();
            g.activity = *m;
            g.relative.post_count = baseline.relative(m).post_count;
            g
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scaling_post_counts_changes_no_role(pop in population(), c in 1u64..50) {
        let cfg = ThresholdConfig::default();
        let base = with_post_relatives(&pop, 1);
        let scaled = with_post_relatives(&pop, c);
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(classify(a, &cfg).unwrap().role, classify(b, &cfg).unwrap().role);
        }
    }
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = ThresholdConfig { leader_degree_percentile_min: 1.5, ..ThresholdConfig::default() };
    let f = proptest::strategy::ValueTree::current(
        &features().new_tree(&mut proptest::test_runner::TestRunner::deterministic()).unwrap(),
    );
    assert!(classify(&f, &cfg).is_err());
}
