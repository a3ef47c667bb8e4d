//! Directed, weighted member-interaction graphs built from event windows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use crate::event::{EventKind, EventLog, EventRecord, InvalidWindow, MemberId, Window};

/// Which events count as directed interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSemantics {
    /// EdgeAdd/EdgeRemove plus Reply and Reaction.
    #[default]
    Interactions,
    /// Only explicit EdgeAdd/EdgeRemove.
    ExplicitEdges,
}

impl EdgeSemantics {
    fn contribution(self, kind: EventKind) -> i64 {
        match (self, kind) {
            (_, EventKind::EdgeAdd) => 1,
            (_, EventKind::EdgeRemove) => -1,
            (EdgeSemantics::Interactions, EventKind::Reply | EventKind::Reaction) => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error(transparent)]
    Window(#[from] InvalidWindow),
    #[error("unknown member {0}")]
    UnknownMember(MemberId),
    #[error("window {first:?} does not precede {second:?}")]
    WindowOrder { first: Window, second: Window },
    #[error("invalid edge {0} -> {1}: {2}")]
    InvalidEdge(MemberId, MemberId, &'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoNetwork {
    pub center: MemberId,
    pub neighbors_in: BTreeSet<MemberId>,
    pub neighbors_out: BTreeSet<MemberId>,
}

/// Node indices follow the sorted order of member ids.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    nodes: Vec<MemberId>,
    index: HashMap<MemberId, usize>,
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
    window: Window,
}

impl InteractionGraph {
    /// Builds a graph from explicit nodes and weighted edges. Edge endpoints
    /// are added as nodes; duplicate pairs accumulate.
    pub fn from_edges<I>(
        nodes: impl IntoIterator<Item = MemberId>,
        edges: I,
        window: Window,
    ) -> Result<InteractionGraph, GraphError>
    where
        I: IntoIterator<Item = (MemberId, MemberId, f64)>,
    {
        let mut node_set: BTreeSet<MemberId> = nodes.into_iter().collect();
        let mut weights: BTreeMap<(MemberId, MemberId), f64> = BTreeMap::new();
        for (s, t, w) in edges {
            if s == t {
                return Err(GraphError::InvalidEdge(s, t, "self-loop"));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidEdge(s, t, "weight must be positive"));
            }
            node_set.insert(s.clone());
            node_set.insert(t.clone());
            *weights.entry((s, t)).or_insert(0.0) += w;
        }
        Ok(Self::assemble(node_set, weights, window))
    }

    fn assemble(
        node_set: BTreeSet<MemberId>,
        weights: BTreeMap<(MemberId, MemberId), f64>,
        window: Window,
    ) -> InteractionGraph {
        let nodes: Vec<MemberId> = node_set.into_iter().collect();
        let index: HashMap<MemberId, usize> =
            nodes.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        // BTreeMap iteration keeps adjacency lists sorted by neighbour index.
        for ((s, t), w) in weights {
            let (si, ti) = (index[&s], index[&t]);
            out_adj[si].push((ti, w));
            in_adj[ti].push((si, w));
        }
        for list in &mut in_adj {
            list.sort_by_key(|&(i, _)| i);
        }
        InteractionGraph {
            nodes,
            index,
            out_adj,
            in_adj,
            window,
        }
    }

    pub fn nodes(&self) -> &[MemberId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, id: &MemberId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &MemberId) -> bool {
        self.index.contains_key(id)
    }

    pub fn snapshot_window(&self) -> Window {
        self.window
    }

    /// Outgoing `(target index, weight)` pairs of node `i`, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out_adj[i]
    }

    pub fn in_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.in_adj[i]
    }

    pub fn weight(&self, source: &MemberId, target: &MemberId) -> Option<f64> {
        let (s, t) = (self.index_of(source)?, self.index_of(target)?);
        self.out_adj[s]
            .binary_search_by_key(&t, |&(i, _)| i)
            .ok()
            .map(|k| self.out_adj[s][k].1)
    }

    /// All edges as `(source, target, weight)` in source/target order.
    pub fn edges(&self) -> impl Iterator<Item = (&MemberId, &MemberId, f64)> + '_ {
        self.out_adj.iter().enumerate().flat_map(move |(s, list)| {
            list.iter()
                .map(move |&(t, w)| (&self.nodes[s], &self.nodes[t], w))
        })
    }

    /// Symmetrised adjacency: weight(u,v) + weight(v,u), sorted by neighbour.
    pub fn undirected_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.nodes.len()];
        for (s, list) in self.out_adj.iter().enumerate() {
            for &(t, w) in list {
                *adj[s].entry(t).or_insert(0.0) += w;
                *adj[t].entry(s).or_insert(0.0) += w;
            }
        }
        adj.into_iter().map(|m| m.into_iter().collect()).collect()
    }

    pub fn undirected_neighbors(&self, id: &MemberId) -> BTreeSet<MemberId> {
        let Some(i) = self.index_of(id) else {
            return BTreeSet::new();
        };
        self.out_adj[i]
            .iter()
            .chain(&self.in_adj[i])
            .map(|&(j, _)| self.nodes[j].clone())
            .collect()
    }

    pub fn ego(&self, id: &MemberId) -> Option<EgoNetwork> {
        let i = self.index_of(id)?;
        let names = |list: &[(usize, f64)]| list.iter().map(|&(j, _)| self.nodes[j].clone()).collect();
        Some(EgoNetwork {
            center: id.clone(),
            neighbors_in: names(&self.in_adj[i]),
            neighbors_out: names(&self.out_adj[i]),
        })
    }

    /// Edge list CSV with header `source,target,weight`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "weight"])?;
        for (s, t, weight) in self.edges() {
            w.write_record([s.as_str(), t.as_str(), &weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the graph of `events`, which must all lie inside `window`.
pub fn graph_from_events(
    events: &[EventRecord],
    window: Window,
    semantics: EdgeSemantics,
) -> InteractionGraph {
    let mut node_set = BTreeSet::new();
    let mut counts: BTreeMap<(&MemberId, &MemberId), i64> = BTreeMap::new();
    for e in events {
        node_set.insert(e.member.clone());
        let Some(target) = &e.target else { continue };
        node_set.insert(target.clone());
        let c = semantics.contribution(e.kind);
        if c != 0 && *target != e.member {
            *counts.entry((&e.member, target)).or_insert(0) += c;
        }
    }
    let weights = counts
        .into_iter()
        .filter(|&(_, c)| c > 0)
        .map(|((s, t), c)| ((s.clone(), t.clone()), c as f64))
        .collect();
    InteractionGraph::assemble(node_set, weights, window)
}

/// Interaction graph of the events in `[from, to)`. Nodes are every member
/// acting or targeted in the window.
pub fn build_graph(
    log: &EventLog,
    from: i64,
    to: i64,
    semantics: EdgeSemantics,
) -> Result<InteractionGraph, GraphError> {
    let window = Window::new(from, to)?;
    Ok(graph_from_events(log.events_in(window), window, semantics))
}

/// Jaccard distance of two neighbour sets; 0 when both are empty.
pub fn jaccard_churn(before: &BTreeSet<MemberId>, after: &BTreeSet<MemberId>) -> f64 {
    let union = before.union(after).count();
    if union == 0 {
        return 0.0;
    }
    let inter = before.intersection(after).count();
    1.0 - inter as f64 / union as f64
}

/// Turnover of a member's undirected neighbourhood between two windows.
pub fn edge_churn(
    log: &EventLog,
    member: &MemberId,
    first: Window,
    second: Window,
    semantics: EdgeSemantics,
) -> Result<f64, GraphError> {
    if log.member(member).is_none() {
        return Err(GraphError::UnknownMember(member.clone()));
    }
    if first.to > second.from {
        return Err(GraphError::WindowOrder { first, second });
    }
    let g1 = build_graph(log, first.from, first.to, semantics)?;
    let g2 = build_graph(log, second.from, second.to, semantics)?;
    Ok(jaccard_churn(
        &g1.undirected_neighbors(member),
        &g2.undirected_neighbors(member),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventRecord;

    fn id(s: &str) -> MemberId {
        MemberId::new(s).unwrap()
    }

    fn ev(m: &str, kind: EventKind, t: i64, target: Option<&str>) -> EventRecord {
        let mut r = EventRecord::new(id(m), kind, t);
        r.target = target.map(id);
        r
    }

    fn log(recs: Vec<EventRecord>) -> EventLog {
        EventLog::from_records(recs).unwrap()
    }

    #[test]
    fn edgeless_log() {
        let l = log(vec![
            ev("a", EventKind::Login, 1, None),
            ev("b", EventKind::Post, 2, None),
        ]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::default()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn add_then_remove_cancels() {
        let l = log(vec![
            ev("a", EventKind::EdgeAdd, 1, Some("b")),
            ev("a", EventKind::EdgeRemove, 2, Some("b")),
        ]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::default()).unwrap();
        assert_eq!(g.weight(&id("a"), &id("b")), None);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn contributions_accumulate() {
        let l = log(vec![
            ev("a", EventKind::EdgeAdd, 1, Some("b")),
            ev("a", EventKind::Reply, 2, Some("b")),
            ev("a", EventKind::Reply, 3, Some("b")),
        ]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::Interactions).unwrap();
        assert_eq!(g.weight(&id("a"), &id("b")), Some(3.0));
        assert_eq!(g.weight(&id("b"), &id("a")), None);
        let g = build_graph(&l, 0, 10, EdgeSemantics::ExplicitEdges).unwrap();
        assert_eq!(g.weight(&id("a"), &id("b")), Some(1.0));
    }

    #[test]
    fn self_replies_make_no_loop() {
        let l = log(vec![ev("a", EventKind::Reply, 1, Some("a"))]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::default()).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn ego_network() {
        let l = log(vec![
            ev("a", EventKind::EdgeAdd, 1, Some("b")),
            ev("c", EventKind::Reaction, 2, Some("a")),
        ]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::default()).unwrap();
        let ego = g.ego(&id("a")).unwrap();
        assert_eq!(ego.neighbors_out, BTreeSet::from([id("b")]));
        assert_eq!(ego.neighbors_in, BTreeSet::from([id("c")]));
        assert!(!ego.neighbors_in.contains(&ego.center));
    }

    fn churn_case(first: &[&str], second: &[&str]) -> f64 {
        let mut recs = Vec::new();
        for t in first {
            recs.push(ev("a", EventKind::EdgeAdd, 5, Some(t)));
        }
        for t in second {
            recs.push(ev("a", EventKind::EdgeAdd, 15, Some(t)));
        }
        let l = log(recs);
        edge_churn(
            &l,
            &id("a"),
            Window::new(0, 10).unwrap(),
            Window::new(10, 20).unwrap(),
            EdgeSemantics::default(),
        )
        .unwrap()
    }

    #[test]
    fn churn_examples() {
        assert_eq!(churn_case(&["b", "c"], &["b", "c"]), 0.0);
        assert_eq!(churn_case(&["b"], &["c"]), 1.0);
        assert!((churn_case(&["b", "c"], &["c", "d"]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn churn_empty_and_unknown() {
        let l = log(vec![ev("a", EventKind::Login, 1, None)]);
        let w1 = Window::new(0, 10).unwrap();
        let w2 = Window::new(10, 20).unwrap();
        let sem = EdgeSemantics::default();
        assert_eq!(edge_churn(&l, &id("a"), w1, w2, sem).unwrap(), 0.0);
        assert!(matches!(
            edge_churn(&l, &id("zz"), w1, w2, sem),
            Err(GraphError::UnknownMember(_))
        ));
        assert!(matches!(
            edge_churn(&l, &id("a"), w2, w1, sem),
            Err(GraphError::WindowOrder { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let l = log(vec![
            ev("a", EventKind::EdgeAdd, 1, Some("b")),
            ev("b", EventKind::Reply, 2, Some("a")),
            ev("b", EventKind::Reply, 3, Some("a")),
        ]);
        let g = build_graph(&l, 0, 10, EdgeSemantics::default()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,target,weight\na,b,1\nb,a,2\n"
        );
    }
}
