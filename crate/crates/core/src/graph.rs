//! Simple undirected graphs with a canonical edge ordering.
//!
//! Every per-edge vector in this crate (couplings, incidence columns, CSV
//! columns) is indexed by the position of the edge in [`Graph::edges`], which
//! is kept strictly sorted lexicographically with `i < j` in every pair.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from an arbitrary list of vertex pairs.
    ///
    /// Pairs are normalized to `(min, max)` and sorted. Self-loops, duplicate
    /// edges and out-of-range endpoints are rejected.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(invalid(format!(
                    "edge ({a}, {b}) out of range for {n_vertices} vertices"
                )));
            }
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(invalid(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_vertices];
        for (k, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        Ok(Self {
            n_vertices,
            edges,
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `v` together with the index of the connecting edge.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n_vertices
    }

    /// Random connected graph: a random spanning tree plus each remaining
    /// pair independently with probability `extra_edge_prob`.
    pub fn random_connected<R: Rng + ?Sized>(
        n_vertices: usize,
        extra_edge_prob: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        let mut edges = BTreeSet::new();
        for v in 1..n_vertices {
            let parent = rng.random_range(0..v);
            edges.insert((parent, v));
        }
        for i in 0..n_vertices {
            for j in (i + 1)..n_vertices {
                if !edges.contains(&(i, j)) && rng.random_bool(extra_edge_prob) {
                    edges.insert((i, j));
                }
            }
        }
        Self::new(n_vertices, edges)
    }

    fn check_weights(&self, edge_weights: &[f64]) -> Result<()> {
        if edge_weights.len() != self.n_edges() {
            return Err(invalid(format!(
                "expected {} edge weights, got {}",
                self.n_edges(),
                edge_weights.len()
            )));
        }
        Ok(())
    }
}

/// The complete graph on `n` vertices.
pub fn complete_graph(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(invalid("complete graph needs n >= 1"));
    }
    Graph::new(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
}

/// Weighted N×E incidence matrix. Column `k` holds `-w_k` at row `i_k` and
/// `+w_k` at row `j_k`.
pub fn incidence_matrix(g: &Graph, edge_weights: &[f64]) -> Result<DMatrix<f64>> {
    g.check_weights(edge_weights)?;
    let mut b = DMatrix::zeros(g.n_vertices(), g.n_edges());
    for (k, (&(i, j), &w)) in g.edges().iter().zip(edge_weights).enumerate() {
        b[(i, k)] = -w;
        b[(j, k)] = w;
    }
    Ok(b)
}

/// Weighted Laplacian `D - W` (positive semidefinite for nonnegative weights).
pub fn laplacian_from_weights(g: &Graph, edge_weights: &[f64]) -> Result<DMatrix<f64>> {
    g.check_weights(edge_weights)?;
    let n = g.n_vertices();
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &w) in g.edges().iter().zip(edge_weights) {
        l[(i, j)] = -w;
        l[(j, i)] = -w;
    }
    for i in 0..n {
        let off: f64 = g.neighbors(i).iter().map(|&(j, _)| l[(i, j)]).sum();
        l[(i, i)] = -off;
    }
    Ok(l)
}

impl fmt::Display for Graph {
    /// Edge-list text format: `n <N>` header then one `i j` pair per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n {}", self.n_vertices)?;
        for (i, j) in &self.edges {
            writeln!(f, "{i} {j}")?;
        }
        Ok(())
    }
}

impl FromStr for Graph {
    type Err = Error;

    /// Parses the edge-list text format. Blank lines and `#` comments are
    /// ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());

        let (_, header) = lines.next().ok_or_else(|| invalid("empty edge list"))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|e| invalid(format!("bad vertex count {count:?}: {e}")))?,
            _ => return Err(invalid(format!("expected header `n <N>`, got {header:?}"))),
        };

        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let parsed: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid(format!("line {}: {e}", lineno + 1)))?;
            match parsed.as_slice() {
                [i, j] => edges.push((*i, *j)),
                _ => {
                    return Err(invalid(format!(
                        "line {}: expected `i j`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Graph::new(n, edges)
    }
}
