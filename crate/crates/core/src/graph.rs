//! Undirected adjacency graphs, breadth-first distances and reverse
//! Cuthill-McKee orderings.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, SparseMatrix};

/// Symmetric adjacency in compressed-row layout, without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Union pattern of `A` and `Aᵀ` with the diagonal removed.
    pub fn from_matrix(a: &SparseMatrix) -> Self {
        let n = a.n_rows().max(a.n_cols());
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j, _) in a.triplets() {
            if i != j {
                lists[i].push(j);
                lists[j].push(i);
            }
        }
        Self::from_lists(lists)
    }

    /// Builds from an edge list; edges are symmetrized and deduplicated.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n {
                return Err(Error::InvalidVertex { vertex: i, n });
            }
            if j >= n {
                return Err(Error::InvalidVertex { vertex: j, n });
            }
            if i != j {
                lists[i].push(j);
                lists[j].push(i);
            }
        }
        Ok(Self::from_lists(lists))
    }

    fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for l in lists.iter_mut() {
            l.sort_unstable();
            l.dedup();
            neighbors.extend_from_slice(l);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }
}

/// Vertices within `max_dist` hops of `source`, with their exact distance, in
/// breadth-first discovery order (so distances are nondecreasing).
pub fn bfs_distances(g: &Graph, source: usize, max_dist: usize) -> Result<Vec<(usize, usize)>> {
    let n = g.n_vertices();
    if source >= n {
        return Err(Error::InvalidVertex { vertex: source, n });
    }
    let mut seen = vec![false; n];
    Ok(bfs_with_marks(g, source, max_dist, &mut seen))
}

/// Same as [`bfs_distances`] but reuses a caller-owned visited buffer, which
/// must be all `false` on entry and is restored to all `false` on exit.
pub(crate) fn bfs_with_marks(g: &Graph, source: usize, max_dist: usize, seen: &mut [bool]) -> Vec<(usize, usize)> {
    let mut out = vec![(source, 0)];
    seen[source] = true;
    let mut head = 0;
    while head < out.len() {
        let (v, d) = out[head];
        head += 1;
        if d == max_dist {
            continue;
        }
        for &w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                out.push((w, d + 1));
            }
        }
    }
    for &(v, _) in &out {
        seen[v] = false;
    }
    out
}

/// A permutation stored with its inverse. `forward[k]` is the old index placed
/// at new position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { forward: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (k, &p) in forward.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(Error::InvalidStructure("not a permutation".into()));
            }
            inverse[p] = k;
        }
        Ok(Self { forward, inverse })
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// y[k] = x[forward[k]]
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&p| x[p]).collect()
    }

    /// Inverse of [`Permutation::apply`].
    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&k| y[k]).collect()
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized graph of `a`. Each
/// connected component is ordered and reversed on its own, starting from its
/// lowest-index vertex of minimum degree.
pub fn rcm_ordering(a: &SparseMatrix) -> Permutation {
    let g = Graph::from_matrix(a);
    let n = g.n_vertices();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs: Vec<usize> = Vec::new();
    let mut in_comp = vec![false; n];
    for first in 0..n {
        if visited[first] {
            continue;
        }
        let comp = bfs_with_marks(&g, first, usize::MAX, &mut in_comp);
        let s = comp.iter().map(|e| e.0).min_by_key(|&v| (g.degree(v), v)).unwrap();
        let base = order.len();
        visited[s] = true;
        order.push(s);
        let mut head = base;
        while head < order.len() {
            let v = order[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(g.neighbors(v).iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (g.degree(w), w));
            for &w in &nbrs {
                visited[w] = true;
                order.push(w);
            }
        }
        order[base..].reverse();
    }
    Permutation::from_forward(order).expect("rcm visits every vertex once")
}
