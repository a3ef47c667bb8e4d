//! Independent reference implementations used by integration and acceptance
//! tests. Nothing here calls into the centrality code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngExt;
use rand_pcg::Pcg32;
use rolecycle_core::event::{MemberId, Window};
use rolecycle_core::graph::InteractionGraph;

/// Directed weighted edge list over nodes `0..n`, no self-loops, no duplicates.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

pub fn node_id(i: usize) -> MemberId {
    MemberId::new(format!("n{i:03}")).unwrap()
}

impl EdgeList {
    pub fn random(rng: &mut Pcg32, n: usize, p: f64) -> EdgeList {
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                if s != t && rng.random::<f64>() < p {
                    // mix of integer and fractional weights
                    let w = if rng.random::<bool>() {
                        rng.random_range(1..=4) as f64
                    } else {
                        rng.random_range(0.1..3.0)
                    };
                    edges.push((s, t, w));
                }
            }
        }
        EdgeList { n, edges }
    }

    /// Node `i` of the edge list is graph node `i` because ids sort by index.
    pub fn graph(&self) -> InteractionGraph {
        InteractionGraph::from_edges(
            (0..self.n).map(node_id),
            self.edges.iter().map(|&(s, t, w)| (node_id(s), node_id(t), w)),
            Window::all(),
        )
        .unwrap()
    }

    fn directed_neighbors(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }

    fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(s, t, _)| if s == v { Some(t) } else if t == v { Some(s) } else { None })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Symmetrised weighted adjacency matrix.
    pub fn undirected_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(s, t, w) in &self.edges {
            a[(s, t)] += w;
            a[(t, s)] += w;
        }
        a
    }
}

/// `(in, out, total)` weighted degree per node.
pub fn degree_oracle(g: &EdgeList) -> Vec<(f64, f64, f64)> {
    (0..g.n)
        .map(|v| {
            let din: f64 = g.edges.iter().filter(|e| e.1 == v).map(|e| e.2).sum();
            let dout: f64 = g.edges.iter().filter(|e| e.0 == v).map(|e| e.2).sum();
            (din, dout, din + dout)
        })
        .collect()
}

/// Every simple path from `s` to `t` as a node sequence.
fn simple_paths(s: usize, t: usize, neighbors: &dyn Fn(usize) -> Vec<usize>, n: usize) -> Vec<Vec<usize>> {
    fn walk(
        v: usize,
        t: usize,
        neighbors: &dyn Fn(usize) -> Vec<usize>,
        on_path: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if v == t {
            out.push(path.clone());
            return;
        }
        for w in neighbors(v) {
            if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                walk(w, t, neighbors, on_path, path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    let mut on_path = vec![false; n];
    on_path[s] = true;
    let mut out = Vec::new();
    walk(s, t, neighbors, &mut on_path, &mut vec![s], &mut out);
    out
}

/// Paths of minimum hop count among all simple paths.
fn shortest_paths(s: usize, t: usize, neighbors: &dyn Fn(usize) -> Vec<usize>, n: usize) -> Vec<Vec<usize>> {
    let all = simple_paths(s, t, neighbors, n);
    let Some(min) = all.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    all.into_iter().filter(|p| p.len() == min).collect()
}

/// Harmonic closeness on the undirected unweighted view over `n - 1`.
pub fn closeness_oracle(g: &EdgeList) -> Vec<f64> {
    if g.n < 2 {
        return vec![0.0; g.n];
    }
    let nb = |v| g.undirected_neighbors(v);
    (0..g.n)
        .map(|v| {
            let sum: f64 = (0..g.n)
                .filter(|&u| u != v)
                .filter_map(|u| shortest_paths(v, u, &nb, g.n).first().map(|p| 1.0 / (p.len() - 1) as f64))
                .sum();
            sum / (g.n - 1) as f64
        })
        .collect()
}

/// Directed unweighted betweenness over `(n - 1)(n - 2)`.
pub fn betweenness_oracle(g: &EdgeList) -> Vec<f64> {
    let mut b = vec![0.0; g.n];
    if g.n < 3 {
        return b;
    }
    let nb = |v| g.directed_neighbors(v);
    for s in 0..g.n {
        for t in 0..g.n {
            if s == t {
                continue;
            }
            let paths = shortest_paths(s, t, &nb, g.n);
            if paths.is_empty() {
                continue;
            }
            let share = 1.0 / paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    b[v] += share;
                }
            }
        }
    }
    let scale = ((g.n - 1) * (g.n - 2)) as f64;
    b.into_iter().map(|x| x / scale).collect()
}

/// The limit of power iteration from the all-ones vector: the projection of
/// ones onto the dominant eigenspace, max-normalised. Zeros without edges.
pub fn eigenvector_oracle(g: &EdgeList) -> Vec<f64> {
    let a = g.undirected_matrix();
    let eig = SymmetricEigen::new(a);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lambda_max.is_nan() || lambda_max <= 1e-12 {
        return vec![0.0; g.n];
    }
    let mut x = vec![0.0; g.n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda_max - lambda <= 1e-9 * lambda_max.max(1.0) {
            let v = eig.eigenvectors.column(k);
            let coeff: f64 = v.iter().sum();
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi += coeff * vi;
            }
        }
    }
    let peak = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    x.into_iter().map(|v| v / peak).collect()
}

/// `(‖Ax − λx‖∞, λ)` with λ the Rayleigh quotient of `x`.
pub fn eigen_residual(g: &EdgeList, x: &[f64]) -> (f64, f64) {
    let a = g.undirected_matrix();
    let xv = nalgebra::DVector::from_column_slice(x);
    let ax = &a * &xv;
    let lambda = xv.dot(&ax) / xv.dot(&xv);
    let residual = (ax - lambda * xv).amax();
    (residual, lambda)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub mod markov {
    use rand::RngExt;
    use rand_pcg::Pcg32;
    use rolecycle_core::lifecycle::{MatrixKind, TransitionMatrix};
    use rolecycle_core::role::{DistributionVector, Role};

    /// Successors per role, listed by hand from the life-cycle diagram.
    pub const ALLOWED: [(Role, &[Role]); 7] = {
        use Role::*;
        [
            (Visitor, &[Visitor, Novice, Departed]),
            (Novice, &[Novice, Active, Passive, Troll, Departed]),
            (Active, &[Active, Passive, Leader, Troll, Departed]),
            (Leader, &[Leader, Active, Passive, Troll, Departed]),
            (Passive, &[Passive, Active, Departed]),
            (Troll, &[Troll, Departed]),
            (Departed, &[Departed]),
        ]
    };

    pub fn allowed(from: Role, to: Role) -> bool {
        ALLOWED.iter().any(|(f, succ)| *f == from && succ.contains(&to))
    }

    pub fn random_role(rng: &mut Pcg32) -> Role {
        Role::ALL[rng.random_range(0..Role::COUNT)]
    }

    /// Random row-stochastic matrix supported on allowed cells only. With
    /// `absorbing_reach` every transient row sends mass to Departed.
    pub fn random_masked(rng: &mut Pcg32, absorbing_reach: bool) -> TransitionMatrix {
        let mut rows = [[0.0; Role::COUNT]; Role::COUNT];
        for (from, succ) in ALLOWED {
            let row = &mut rows[from.index()];
            for &to in succ {
                // sparse rows are common: drop some cells entirely
                if rng.random::<f64>() < 0.7 || to == from {
                    row[to.index()] = rng.random_range(0.0..1.0);
                }
            }
            if absorbing_reach && from != Role::Departed {
                row[Role::Departed.index()] = rng.random_range(0.01..0.5);
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                row[from.index()] = 1.0;
            } else {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
        TransitionMatrix::new(rows, MatrixKind::GraphMasked).expect("valid random matrix")
    }

    pub fn random_distribution(rng: &mut Pcg32) -> DistributionVector {
        let mut a = [0.0; Role::COUNT];
        for x in &mut a {
            if rng.random::<f64>() < 0.8 {
                *x = rng.random_range(0.0..1.0);
            }
        }
        if a.iter().sum::<f64>() == 0.0 {
            a[0] = 1.0;
        }
        let s: f64 = a.iter().sum();
        a.iter_mut().for_each(|x| *x /= s);
        DistributionVector::new(a).expect("normalised shares")
    }

    /// Walks along allowed transitions, with a `noise` chance per step of
    /// jumping to any role instead.
    pub fn random_sequences(rng: &mut Pcg32, members: usize, len: usize, noise: f64) -> Vec<Vec<Role>> {
        (0..members)
            .map(|_| {
                let mut cur = random_role(rng);
                let mut seq = vec![cur];
                for _ in 1..len {
                    cur = if rng.random::<f64>() < noise {
                        random_role(rng)
                    } else {
                        let succ = ALLOWED[cur.index()].1;
                        succ[rng.random_range(0..succ.len())]
                    };
                    seq.push(cur);
                }
                seq
            })
            .collect()
    }
}
