//! Degree, closeness, betweenness and eigenvector centrality plus reciprocity.
//!
//! Betweenness is computed on the directed unweighted view, closeness and
//! eigenvector centrality on the undirected view. All per-node outputs are
//! indexed like [`InteractionGraph::nodes`].

use std::collections::{BTreeMap, VecDeque};
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::event::MemberId;
use crate::graph::InteractionGraph;

pub const DEFAULT_EIGEN_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 1000;

// Sources per block in the betweenness accumulation. Blocks are reduced in
// index order so results do not depend on the thread count.
const BETWEENNESS_BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SnaError {
    #[error("power iteration did not converge within {max_iter} iterations")]
    NoConvergence {
        max_iter: usize,
        best_effort: Vec<f64>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unknown member {0}")]
    UnknownMember(MemberId),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Degree {
    pub degree_in: f64,
    pub degree_out: f64,
    pub degree_total: f64,
}

pub fn degree_centrality(graph: &InteractionGraph) -> Vec<Degree> {
    (0..graph.node_count())
        .map(|i| {
            let degree_in: f64 = graph.in_edges(i).iter().map(|&(_, w)| w).sum();
            let degree_out: f64 = graph.out_edges(i).iter().map(|&(_, w)| w).sum();
            Degree {
                degree_in,
                degree_out,
                degree_total: degree_in + degree_out,
            }
        })
        .collect()
}

fn bfs_distances(adj: &[Vec<(usize, f64)>], source: usize, dist: &mut [usize]) {
    dist.fill(usize::MAX);
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
}

/// Harmonic closeness on the undirected unweighted view, divided by `n - 1`.
pub fn closeness_centrality(graph: &InteractionGraph) -> Vec<f64> {
    let n = graph.node_count();
    if n < 2 {
        return vec![0.0; n];
    }
    let adj = graph.undirected_adjacency();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![0usize; n],
            |dist, s| {
                bfs_distances(&adj, s, dist);
                let harmonic: f64 = dist
                    .iter()
                    .filter(|&&d| d != 0 && d != usize::MAX)
                    .map(|&d| 1.0 / d as f64)
                    .sum();
                harmonic / (n - 1) as f64
            },
        )
        .collect()
}

struct BrandesScratch {
    stack: Vec<usize>,
    queue: VecDeque<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        BrandesScratch {
            stack: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
        }
    }

    /// Adds the dependencies of source `s` into `acc`.
    fn accumulate(&mut self, graph: &InteractionGraph, s: usize, acc: &mut [f64]) {
        self.stack.clear();
        self.queue.clear();
        for p in &mut self.preds {
            p.clear();
        }
        self.sigma.fill(0.0);
        self.dist.fill(-1);
        self.delta.fill(0.0);

        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.stack.push(v);
            for &(w, _) in graph.out_edges(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push(v);
                }
            }
        }
        while let Some(w) = self.stack.pop() {
            for &v in &self.preds[w] {
                self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Directed unweighted shortest-path betweenness, normalised by
/// `(n - 1)(n - 2)`; zero for graphs with fewer than three nodes.
pub fn betweenness_centrality(graph: &InteractionGraph) -> Vec<f64> {
    let n = graph.node_count();
    if n < 3 {
        return vec![0.0; n];
    }
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BETWEENNESS_BLOCK)
        .map(|block| {
            let mut scratch = BrandesScratch::new(n);
            let mut acc = vec![0.0; n];
            for &s in block {
                scratch.accumulate(graph, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut raw = vec![0.0; n];
    for part in partials {
        for (r, p) in raw.iter_mut().zip(part) {
            *r += p;
        }
    }
    let scale = ((n - 1) * (n - 2)) as f64;
    raw.into_iter().map(|b| b / scale).collect()
}

fn components(adj: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let v = comp[k];
            k += 1;
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

struct ComponentVector {
    nodes: Vec<usize>,
    vector: Vec<f64>,
    eigenvalue: f64,
    converged: bool,
}

// Power iteration on (A + I) restricted to one connected component. The
// shift keeps bipartite components (stars, paths) from oscillating.
fn component_power_iteration(
    adj: &[Vec<(usize, f64)>],
    local: &[usize],
    nodes: Vec<usize>,
    tol: f64,
    max_iter: usize,
) -> ComponentVector {
    let m = nodes.len();
    let mut x = vec![1.0; m];
    let mut next = vec![0.0; m];
    let mut converged = false;
    for _ in 0..max_iter {
        for (k, &v) in nodes.iter().enumerate() {
            let mut s = x[k];
            for &(w, weight) in &adj[v] {
                s += weight * x[local[w]];
            }
            next[k] = s;
        }
        let peak = next.iter().cloned().fold(0.0, f64::max);
        for v in &mut next {
            *v /= peak;
        }
        let diff = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if diff <= tol {
            converged = true;
            break;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &v) in nodes.iter().enumerate() {
        let ax: f64 = adj[v].iter().map(|&(w, weight)| weight * x[local[w]]).sum();
        num += x[k] * ax;
        den += x[k] * x[k];
    }
    ComponentVector {
        nodes,
        vector: x,
        eigenvalue: num / den,
        converged,
    }
}

/// Dominant eigenvector of the undirected weighted adjacency, max-normalised.
///
/// Each connected component is iterated separately; components whose
/// eigenvalue ties the dominant one are combined the way a whole-graph power
/// iteration from the all-ones vector would combine them. An edgeless graph
/// yields all zeros.
pub fn eigenvector_centrality(
    graph: &InteractionGraph,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SnaError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SnaError::InvalidParameter("tol must be positive"));
    }
    if max_iter == 0 {
        return Err(SnaError::InvalidParameter("max_iter must be at least 1"));
    }
    let n = graph.node_count();
    let adj = graph.undirected_adjacency();
    let comps: Vec<Vec<usize>> = components(&adj).into_iter().filter(|c| c.len() > 1).collect();
    // position of each node inside its own component
    let mut local = vec![0; n];
    for c in &comps {
        for (k, &v) in c.iter().enumerate() {
            local[v] = k;
        }
    }
    let parts: Vec<ComponentVector> = comps
        .into_iter()
        .map(|c| component_power_iteration(&adj, &local, c, tol, max_iter))
        .collect();
    let mut result = vec![0.0; n];
    let lambda_max = parts.iter().map(|p| p.eigenvalue).fold(0.0, f64::max);
    if lambda_max <= 0.0 {
        return Ok(result);
    }
    let tie = 1e-9 * lambda_max.max(1.0);
    let mut converged = true;
    for p in parts.iter().filter(|p| lambda_max - p.eigenvalue <= tie) {
        converged &= p.converged;
        let norm = p.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        let weight = p.vector.iter().sum::<f64>() / norm;
        for (&v, &x) in p.nodes.iter().zip(&p.vector) {
            result[v] = weight * x / norm;
        }
    }
    let peak = result.iter().cloned().fold(0.0, f64::max);
    for v in &mut result {
        *v /= peak;
    }
    if converged {
        Ok(result)
    } else {
        Err(SnaError::NoConvergence {
            max_iter,
            best_effort: result,
        })
    }
}

fn reciprocity_at(graph: &InteractionGraph, i: usize) -> f64 {
    let outs = graph.out_edges(i);
    if outs.is_empty() {
        return 1.0;
    }
    let mutual = outs
        .iter()
        .filter(|&&(t, _)| graph.out_edges(t).binary_search_by_key(&i, |&(k, _)| k).is_ok())
        .count();
    mutual as f64 / outs.len() as f64
}

/// Share of the member's out-neighbours that link back; 1.0 with no out-edges.
pub fn reciprocity(graph: &InteractionGraph, member: &MemberId) -> Result<f64, SnaError> {
    let i = graph
        .index_of(member)
        .ok_or_else(|| SnaError::UnknownMember(member.clone()))?;
    Ok(reciprocity_at(graph, i))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CentralityRow {
    pub degree_in: f64,
    pub degree_out: f64,
    pub degree_total: f64,
    pub closeness: f64,
    pub betweenness: f64,
    pub eigenvector: f64,
    pub reciprocity: f64,
}

impl CentralityRow {
    /// Row for a member absent from the graph.
    pub fn isolated() -> Self {
        CentralityRow {
            reciprocity: 1.0,
            ..CentralityRow::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CentralityReport {
    pub rows: BTreeMap<MemberId, CentralityRow>,
    /// False when power iteration hit `max_iter`; the eigenvector column then
    /// holds the best-effort iterate.
    pub eigenvector_converged: bool,
}

impl CentralityReport {
    pub fn compute(graph: &InteractionGraph, tol: f64, max_iter: usize) -> Result<Self, SnaError> {
        let degrees = degree_centrality(graph);
        let closeness = closeness_centrality(graph);
        let betweenness = betweenness_centrality(graph);
        let (eigen, eigenvector_converged) = match eigenvector_centrality(graph, tol, max_iter) {
            Ok(v) => (v, true),
            Err(SnaError::NoConvergence { best_effort, .. }) => (best_effort, false),
            Err(e) => return Err(e),
        };
        let rows = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let d = degrees[i];
                let row = CentralityRow {
                    degree_in: d.degree_in,
                    degree_out: d.degree_out,
                    degree_total: d.degree_total,
                    closeness: closeness[i],
                    betweenness: betweenness[i],
                    eigenvector: eigen[i],
                    reciprocity: reciprocity_at(graph, i),
                };
                (id.clone(), row)
            })
            .collect();
        Ok(CentralityReport {
            rows,
            eigenvector_converged,
        })
    }

    pub fn row(&self, id: &MemberId) -> CentralityRow {
        self.rows.get(id).copied().unwrap_or_else(CentralityRow::isolated)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "member",
            "degree_in",
            "degree_out",
            "degree_total",
            "closeness",
            "betweenness",
            "eigenvector",
            "reciprocity",
        ])?;
        for (id, r) in &self.rows {
            w.write_record([
                id.to_string(),
                r.degree_in.to_string(),
                r.degree_out.to_string(),
                r.degree_total.to_string(),
                r.closeness.to_string(),
                r.betweenness.to_string(),
                r.eigenvector.to_string(),
                r.reciprocity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
