mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use rolecycle_core::event::{parse_events_str, EventKind, EventLog, EventRecord, MemberId, Window};
use rolecycle_core::graph::{graph_from_events, EdgeSemantics, InteractionGraph};
use rolecycle_core::sna::{betweenness_centrality, closeness_centrality, degree_centrality, eigenvector_centrality};
use support::EdgeList;

const SIGNED_UP: usize = 4;
const MEMBERS: usize = 6;

fn id(i: usize) -> MemberId {
    MemberId::new(format!("m{i}")).unwrap()
}

const ANY_KIND: [EventKind; 8] = [
    EventKind::Login,
    EventKind::Post,
    EventKind::Reply,
    EventKind::EdgeAdd,
    EventKind::EdgeRemove,
    EventKind::Reaction,
    EventKind::ModerationFlag,
    EventKind::Departure,
];
const NO_ACCOUNT_KIND: [EventKind; 3] = [EventKind::Reaction, EventKind::ModerationFlag, EventKind::EdgeRemove];

/// Members `0..SIGNED_UP` sign up at t=0; the others act without accounts.
fn records_strategy(max_len: usize) -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec((0..MEMBERS, 0usize..8, 1i64..500, 1..MEMBERS, 0u64..2000), 0..max_len).prop_map(
        |raw| {
            let mut out: Vec<EventRecord> = (0..SIGNED_UP).map(|i| EventRecord::new(id(i), EventKind::Signup, 0)).collect();
            for (m, k, ts, shift, size) in raw {
                let kind = if m < SIGNED_UP { ANY_KIND[k] } else { NO_ACCOUNT_KIND[k % 3] };
                let mut rec = EventRecord::new(id(m), kind, ts);
                if kind.requires_target() {
                    rec = rec.with_target(id((m + shift) % MEMBERS));
                }
                if kind.carries_payload() {
                    rec = rec.with_payload(size);
                }
                out.push(rec);
            }
            out
        },
    )
}

fn weights(g: &InteractionGraph) -> BTreeMap<(MemberId, MemberId), f64> {
    g.edges().map(|(s, t, w)| ((s.clone(), t.clone()), w)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_of_serialize_is_identity(records in records_strategy(60)) {
        let log = EventLog::from_records(records).unwrap();
        let back = parse_events_str(&log.to_jsonl()).unwrap();
        prop_assert_eq!(back, log);
    }

    #[test]
    fn parsing_is_deterministic(records in records_strategy(40)) {
        let text = EventLog::from_records(records).unwrap().to_jsonl();
        prop_assert_eq!(parse_events_str(&text).unwrap(), parse_events_str(&text).unwrap());
    }

    #[test]
    fn nested_windows_compose(records in records_strategy(60), cuts in prop::array::uniform3(0i64..520)) {
        let mut c = cuts;
        c.sort_unstable();
        let [a, b, c] = c;
        let log = EventLog::from_records(records).unwrap();
        let nested = log.window(a, c).unwrap().window(a, b).unwrap();
        prop_assert_eq!(nested, log.window(a, b).unwrap());
    }

    #[test]
    fn graph_of_adjacent_windows_is_the_weight_sum(records in records_strategy(80), cut in 1i64..500) {
        let records: Vec<EventRecord> = records.into_iter().filter(|r| r.kind != EventKind::EdgeRemove).collect();
        let log = EventLog::from_records(records).unwrap();
        let (first, second) = (Window::new(0, cut).unwrap(), Window::new(cut, 600).unwrap());
        let whole = Window::new(0, 600).unwrap();
        let g1 = weights(&graph_from_events(log.events_in(first), first, EdgeSemantics::Interactions));
        let g2 = weights(&graph_from_events(log.events_in(second), second, EdgeSemantics::Interactions));
        let mut summed = g1;
        for (k, w) in g2 {
            *summed.entry(k).or_insert(0.0) += w;
        }
        let all = weights(&graph_from_events(log.events_in(whole), whole, EdgeSemantics::Interactions));
        prop_assert_eq!(all, summed);
    }

    #[test]
    fn graph_ignores_event_order(records in records_strategy(60), seed in any::<u64>()) {
        let window = Window::new(0, 600).unwrap();
        let base = graph_from_events(&records, window, EdgeSemantics::Interactions);
        let mut shuffled = records.clone();
        let mut rng = Pcg32::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let other = graph_from_events(&shuffled, window, EdgeSemantics::Interactions);
        prop_assert_eq!(weights(&base), weights(&other));
        prop_assert_eq!(base.nodes(), other.nodes());
    }

    #[test]
    fn relabeling_permutes_centralities(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = Pcg32::seed_from_u64(seed);
        let g = EdgeList::random(&mut rng, n, 0.35);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let relabeled = EdgeList { n, edges: g.edges.iter().map(|&(s, t, w)| (perm[s], perm[t], w)).collect() };
        let (a, b) = (g.graph(), relabeled.graph());
        let (ca, cb) = (closeness_centrality(&a), closeness_centrality(&b));
        let (ba, bb) = (betweenness_centrality(&a), betweenness_centrality(&b));
        let (da, db) = (degree_centrality(&a), degree_centrality(&b));
        let ea = eigenvector_centrality(&a, 1e-12, 100_000).unwrap();
        let eb = eigenvector_centrality(&b, 1e-12, 100_000).unwrap();
        for v in 0..n {
            let u = perm[v];
            prop_assert!((ca[v] - cb[u]).abs() <= 1e-12);
            prop_assert!((ba[v] - bb[u]).abs() <= 1e-12);
            prop_assert!((da[v].degree_total - db[u].degree_total).abs() <= 1e-12);
            prop_assert!((ea[v] - eb[u]).abs() <= 1e-8);
        }
    }

    #[test]
    fn isolated_node_changes_no_degree_and_no_raw_betweenness(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = Pcg32::seed_from_u64(seed);
        let g = EdgeList::random(&mut rng, n, 0.35);
        let grown = EdgeList { n: n + 1, edges: g.edges.clone() };
        let (a, b) = (g.graph(), grown.graph());
        let (da, db) = (degree_centrality(&a), degree_centrality(&b));
        let (ba, bb) = (betweenness_centrality(&a), betweenness_centrality(&b));
        let raw = |x: f64, n: usize| x * ((n - 1) * (n - 2)) as f64;
        for v in 0..n {
            prop_assert_eq!(da[v], db[v]);
            prop_assert!(raw(bb[v], n + 1) <= raw(ba[v], n) + 1e-9);
        }
        prop_assert_eq!(db[n].degree_total, 0.0);
    }
}

#[test]
fn unknown_fields_and_bad_kinds_are_rejected() {
    assert!(parse_events_str(r#"{"member":"a","kind":"Signup","timestamp":1,"extra":1}"#).is_err());
    assert!(parse_events_str(r#"{"member":"a","kind":"signup","timestamp":1}"#).is_err());
    assert!(parse_events_str(r#"{"member":"a","kind":"Signup","timestamp":1}"#).is_ok());
}
