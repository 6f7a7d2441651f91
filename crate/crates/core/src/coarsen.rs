//! Coarse point selection and grid-transfer sparsity patterns.
//!
//! Pressures are coarsened with a greedy distance-four splitting of the graph
//! of a filtered pressure-Poisson operator. Coarse velocities are the
//! velocities co-located with coarse pressures plus pressure "mid-points"
//! placed near the barycenter of the coarse pressures each fine pressure
//! interpolates from.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::graph::{bfs_with_marks, Graph};
use crate::math::{dist, sqrt};
use crate::{Error, Result, SparseMatrix};

/// How entries removed by the drop rule are folded back into the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lumping {
    /// Dropped entries are added to the diagonal, so row sums are unchanged.
    PreserveRowSums,
    /// The diagonal is shifted so that every filtered row sums to zero.
    ZeroRowSums,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarsenParams {
    pub tau1: f64,
    pub tau2: f64,
    pub omega_g: f64,
    pub omega_o: f64,
    pub extra_h2_threshold: f64,
    pub extra_o_threshold: f64,
    pub lumping: Lumping,
}

impl Default for CoarsenParams {
    fn default() -> Self {
        Self {
            tau1: 0.06,
            tau2: 0.038_729_833_462_074_17,
            omega_g: 0.8,
            omega_o: 0.5,
            extra_h2_threshold: 2.6,
            extra_o_threshold: -0.2,
            lumping: Lumping::PreserveRowSums,
        }
    }
}

/// Filtered scalar velocity and pressure operators used for coarsening.
#[derive(Debug, Clone)]
pub struct AuxBlocks {
    pub a_v: SparseMatrix,
    pub a_p: SparseMatrix,
    pub tau1: f64,
}

/// Drops off-diagonal entries with `|z_ij| <= tau1 * sqrt(|z_ii z_jj|)` and
/// lumps them into the diagonal.
pub fn filter_matrix(z: &SparseMatrix, tau1: f64, lumping: Lumping) -> SparseMatrix {
    let z = z.prune(0.0);
    let diag = z.diagonal();
    let mut warned = false;
    let mut t = Vec::with_capacity(z.nnz());
    for i in 0..z.n_rows() {
        let (cols, vals) = z.row(i);
        let mut dropped = 0.0;
        let mut kept = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if i == j {
                kept += v;
                continue;
            }
            let scale = diag[i] * diag[j];
            if scale == 0.0 {
                if !warned {
                    log::warn!("zero diagonal in drop test at row {i}; keeping the entry");
                    warned = true;
                }
                t.push((i, j, v));
                kept += v;
            } else if v.abs() <= tau1 * sqrt(scale.abs()) {
                dropped += v;
            } else {
                t.push((i, j, v));
                kept += v;
            }
        }
        let d = match lumping {
            Lumping::PreserveRowSums => diag[i] + dropped,
            Lumping::ZeroRowSums => diag[i] - kept,
        };
        t.push((i, i, d));
    }
    SparseMatrix::from_triplets(z.n_rows(), z.n_cols(), &t).expect("indices come from z").prune(0.0)
}

/// Builds `Ã^(v)` from the x-velocity block `a_vv[0..n, 0..n]` and `Ã^(p)`
/// from `Z = B Bᵀ`.
pub fn form_aux_blocks(a_vv: &SparseMatrix, b: &SparseMatrix, params: &CoarsenParams) -> Result<AuxBlocks> {
    let n = a_vv.n_rows() / 2;
    let scalar = a_vv.block(0..n, 0..n);
    let z = b.matmul(&b.transpose())?;
    Ok(AuxBlocks {
        a_v: filter_matrix(&scalar, params.tau1, params.lumping),
        a_p: filter_matrix(&z, params.tau1, params.lumping),
        tau1: params.tau1,
    })
}

/// A C/F classification with coverage sets `S_i` (sorted coarse vertex ids
/// within graph distance three; `S_c = {c}` for coarse vertices).
#[derive(Debug, Clone, PartialEq)]
pub struct CfSplitting {
    pub is_coarse: Vec<bool>,
    /// Coarse vertices in ascending order; position is the coarse index.
    pub c_points: Vec<usize>,
    pub coarse_index: Vec<Option<usize>>,
    pub s: Vec<Vec<usize>>,
    /// Number of coarse points added by the extra distance-three pass.
    pub n_extra: usize,
}

impl CfSplitting {
    pub fn n_coarse(&self) -> usize {
        self.c_points.len()
    }

    pub fn f_points(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.is_coarse.len()).filter(move |&i| !self.is_coarse[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicState {
    /// Running harmonic average of Euclidean distances to nearby C-points.
    pub h1: Vec<f64>,
    /// Running mean of graph distances to the C-points in `S_j`.
    pub h2: Vec<f64>,
}

impl HeuristicState {
    pub fn new(coords: &[[f64; 2]]) -> Self {
        let diameter = diameter(coords);
        let init = if diameter > 0.0 { 1e4 * diameter } else { 1e4 };
        Self { h1: vec![init; coords.len()], h2: vec![0.0; coords.len()] }
    }
}

/// Largest pairwise Euclidean distance.
pub fn diameter(coords: &[[f64; 2]]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[i + 1..] {
            d = d.max(dist(*a, *b));
        }
    }
    d
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Unmarked,
    Coarse,
    Fine,
}

struct Splitter<'a> {
    g: &'a Graph,
    coords: &'a [[f64; 2]],
    mark: Vec<Mark>,
    s: Vec<Vec<usize>>,
    state: HeuristicState,
    seen: Vec<bool>,
}

impl Splitter<'_> {
    /// Marks `k` coarse and its distance-three ball fine, records coverage
    /// and updates the heuristics. Returns the distance-four ball.
    fn make_coarse(&mut self, k: usize) -> Vec<(usize, usize)> {
        let ball = bfs_with_marks(self.g, k, 4, &mut self.seen);
        self.mark[k] = Mark::Coarse;
        self.s[k] = vec![k];
        for &(j, d) in &ball {
            if (1..=3).contains(&d) && self.mark[j] != Mark::Coarse {
                self.mark[j] = Mark::Fine;
                if let Err(pos) = self.s[j].binary_search(&k) {
                    self.s[j].insert(pos, k);
                }
            }
        }
        for &(j, d) in &ball {
            let e = dist(self.coords[j], self.coords[k]);
            let fine_near = (1..=3).contains(&d) && self.mark[j] == Mark::Fine;
            let s_len = if fine_near { self.s[j].len() } else { 0 };
            let (h1, h2) = update_heuristic_values(self.state.h1[j], self.state.h2[j], e, d, s_len);
            self.state.h1[j] = h1;
            self.state.h2[j] = h2;
        }
        ball
    }
}

/// Applies one heuristic update for a new C-point `k` at graph distance `d`
/// and Euclidean distance `e` from vertex `j` with `|S_j| = s_len`.
pub fn update_heuristic_values(h1: f64, h2: f64, e: f64, d: usize, s_len: usize) -> (f64, f64) {
    let h1 = if e == 0.0 { 0.0 } else { 2.0 * h1 * e / (h1 + e) };
    let n = s_len as f64;
    let h2 = if s_len == 0 { h2 } else { (h2 * (n - 1.0) + d as f64) / n };
    (h1, h2)
}

/// Greedy distance-four splitting. With `extra = false` the augmentation
/// pass is skipped, which leaves every pair of C-points at distance ≥ 4.
pub fn split_pressures(
    g: &Graph,
    coords: &[[f64; 2]],
    params: &CoarsenParams,
    extra: bool,
) -> Result<(CfSplitting, HeuristicState)> {
    let n = g.n_vertices();
    if coords.len() != n {
        return Err(Error::DimensionMismatch {
            op: "find_coarse_pressures",
            detail: alloc::format!("{} coordinates for {n} vertices", coords.len()),
        });
    }
    let mut sp = Splitter {
        g,
        coords,
        mark: vec![Mark::Unmarked; n],
        s: vec![Vec::new(); n],
        state: HeuristicState::new(coords),
        seen: vec![false; n],
    };
    let mut heap: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    let mut in_cand = vec![false; n];
    let mut next_unmarked = 0;
    let mut k = if n > 0 { Some(0) } else { None };
    while let Some(seed) = k {
        let ball = sp.make_coarse(seed);
        for &(j, d) in &ball {
            if d == 4 && sp.mark[j] == Mark::Unmarked {
                in_cand[j] = true;
            }
            // h1 changed across the whole ball, so candidates there are re-keyed
            if in_cand[j] && sp.mark[j] == Mark::Unmarked {
                heap.push(Reverse(Key(sp.state.h1[j], j)));
            }
        }
        k = None;
        while let Some(Reverse(Key(h, j))) = heap.pop() {
            if sp.mark[j] == Mark::Unmarked && in_cand[j] && h == sp.state.h1[j] {
                k = Some(j);
                break;
            }
        }
        if k.is_none() {
            while next_unmarked < n && sp.mark[next_unmarked] != Mark::Unmarked {
                next_unmarked += 1;
            }
            if next_unmarked < n {
                k = Some(next_unmarked);
            }
        }
    }
    let mut n_extra = 0;
    if extra {
        n_extra = find_extra_dist3_cpoints(&mut sp, params);
    }
    let Splitter { mark, s, state, .. } = sp;
    let is_coarse: Vec<bool> = mark.iter().map(|&m| m == Mark::Coarse).collect();
    let c_points: Vec<usize> = (0..n).filter(|&i| is_coarse[i]).collect();
    let mut coarse_index = vec![None; n];
    for (q, &c) in c_points.iter().enumerate() {
        coarse_index[c] = Some(q);
    }
    Ok((CfSplitting { is_coarse, c_points, coarse_index, s, n_extra }, state))
}

fn find_extra_dist3_cpoints(sp: &mut Splitter<'_>, params: &CoarsenParams) -> usize {
    let n = sp.mark.len();
    let mut added = 0;
    for t in 1..=2usize {
        let cand: Vec<usize> = (0..n).filter(|&j| sp.mark[j] == Mark::Fine && sp.s[j].len() == t).collect();
        let h1max = cand.iter().map(|&j| sp.state.h1[j]).fold(0.0, f64::max);
        let h2max = cand.iter().map(|&j| sp.state.h2[j]).fold(0.0, f64::max);
        if cand.is_empty() || h1max <= 0.0 || h2max <= 0.0 {
            continue;
        }
        let score = |sp: &Splitter<'_>, j: usize| -> (f64, f64) {
            let h = -(params.omega_g * sp.state.h2[j] / h2max + (1.0 - params.omega_g) * sp.state.h1[j] / h1max);
            if t == 1 {
                (h, 1.0)
            } else {
                let o = cosine_at(sp.coords, j, sp.s[j][0], sp.s[j][1]);
                (-(params.omega_o * o - (1.0 - params.omega_o) * h), o)
            }
        };
        let mut ranked: Vec<(f64, usize)> = cand.iter().map(|&j| (score(sp, j).0, j)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &ranked {
            if sp.mark[j] != Mark::Fine || sp.s[j].len() != t {
                continue;
            }
            let o = if t == 1 { 1.0 } else { cosine_at(sp.coords, j, sp.s[j][0], sp.s[j][1]) };
            if sp.state.h2[j] >= params.extra_h2_threshold && o > params.extra_o_threshold {
                sp.make_coarse(j);
                added += 1;
            }
        }
    }
    added
}

fn cosine_at(coords: &[[f64; 2]], j: usize, a: usize, b: usize) -> f64 {
    let u = [coords[a][0] - coords[j][0], coords[a][1] - coords[j][1]];
    let v = [coords[b][0] - coords[j][0], coords[b][1] - coords[j][1]];
    let den = dist(coords[a], coords[j]) * dist(coords[b], coords[j]);
    if den == 0.0 {
        1.0
    } else {
        (u[0] * v[0] + u[1] * v[1]) / den
    }
}

/// Distance-four splitting of the graph of `a_p`, followed by the extra
/// distance-three C-point pass.
pub fn find_coarse_pressures(
    a_p: &SparseMatrix,
    coords: &[[f64; 2]],
    params: &CoarsenParams,
) -> Result<(CfSplitting, HeuristicState)> {
    if a_p.n_rows() != a_p.n_cols() {
        return Err(Error::DimensionMismatch { op: "find_coarse_pressures", detail: alloc::format!("{:?}", a_p.shape()) });
    }
    split_pressures(&Graph::from_matrix(a_p), coords, params, true)
}

/// Binary `n × |C|` pattern with row `i` covering `S_i`.
pub fn pressure_pattern(split: &CfSplitting) -> Result<SparseMatrix> {
    let n = split.is_coarse.len();
    let mut t = Vec::new();
    for i in 0..n {
        if let Some(q) = split.coarse_index[i] {
            t.push((i, q, 1.0));
            continue;
        }
        if split.s[i].is_empty() {
            return Err(Error::UncoveredVertex(i));
        }
        for &c in &split.s[i] {
            let q = split.coarse_index[c].ok_or(Error::InvalidStructure("S set holds a fine vertex".into()))?;
            t.push((i, q, 1.0));
        }
    }
    SparseMatrix::from_triplets(n, split.n_coarse(), &t)
}

/// Coarse scalar velocity nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoarsening {
    /// Coarse scalar velocity nodes, ascending.
    pub c_nodes: Vec<usize>,
    /// Pressure C-points together with the selected mid-points.
    pub cbar: Vec<usize>,
    pub n_midpoints: usize,
    /// Nodes promoted because they were far from every other coarse node.
    pub n_augmented: usize,
}

/// Selects mid-points between coarse pressures and returns the co-located
/// velocity nodes, then promotes any velocity node farther than three hops
/// (in `vgraph`) from all coarse velocity nodes. `excluded` velocity nodes
/// never become coarse.
pub fn find_velocity_cpoints(
    split: &CfSplitting,
    coords_p: &[[f64; 2]],
    colocation: &[Option<usize>],
    excluded: &[bool],
    vgraph: &Graph,
    params: &CoarsenParams,
) -> Result<VelocityCoarsening> {
    let np = split.is_coarse.len();
    if coords_p.len() != np || colocation.len() != np || excluded.len() != vgraph.n_vertices() {
        return Err(Error::DimensionMismatch { op: "find_velocity_cpoints", detail: "input lengths disagree".into() });
    }
    let mut cover: Vec<Vec<usize>> = vec![Vec::new(); np];
    for j in split.f_points() {
        for &c in &split.s[j] {
            cover[c].push(j);
        }
    }
    let mut in_cbar = split.is_coarse.clone();
    let mut order: Vec<usize> = split.f_points().filter(|&i| !split.s[i].is_empty()).collect();
    order.sort_by(|&a, &b| split.s[b].len().cmp(&split.s[a].len()).then(a.cmp(&b)));
    let mut n_midpoints = 0;
    for &i in &order {
        let si = &split.s[i];
        let mut target = [0.0, 0.0];
        for &c in si {
            target[0] += coords_p[c][0];
            target[1] += coords_p[c][1];
        }
        target[0] /= si.len() as f64;
        target[1] /= si.len() as f64;
        let b_i: Vec<usize> = cover[si[0]].iter().copied().filter(|&j| is_subset(si, &split.s[j])).collect();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &j in &b_i {
            for d in 0..2 {
                lo[d] = lo[d].min(coords_p[j][d]);
                hi[d] = hi[d].max(coords_p[j][d]);
            }
        }
        let t_i = sqrt((hi[0] - lo[0]) + (hi[1] - lo[1]));
        let mut m = b_i[0];
        let mut best = dist(coords_p[m], target);
        for &j in &b_i[1..] {
            let d = dist(coords_p[j], target);
            if d < best {
                best = d;
                m = j;
            }
        }
        let nearest = b_i.iter().filter(|&&j| in_cbar[j]).map(|&j| dist(coords_p[j], coords_p[m])).fold(f64::INFINITY, f64::min);
        if nearest >= params.tau2 * t_i && !in_cbar[m] {
            in_cbar[m] = true;
            n_midpoints += 1;
        }
    }
    let cbar: Vec<usize> = (0..np).filter(|&i| in_cbar[i]).collect();
    let nvs = vgraph.n_vertices();
    let mut is_c = vec![false; nvs];
    for &p in &cbar {
        if let Some(v) = colocation[p] {
            if !excluded[v] {
                is_c[v] = true;
            }
        }
    }
    let mut covered = vec![false; nvs];
    let mut seen = vec![false; nvs];
    for v in 0..nvs {
        if is_c[v] {
            for (w, _) in bfs_with_marks(vgraph, v, 3, &mut seen) {
                covered[w] = true;
            }
        }
    }
    let mut n_augmented = 0;
    for v in 0..nvs {
        if !excluded[v] && !covered[v] {
            is_c[v] = true;
            n_augmented += 1;
            for (w, _) in bfs_with_marks(vgraph, v, 3, &mut seen) {
                covered[w] = true;
            }
        }
    }
    let c_nodes = (0..nvs).filter(|&v| is_c[v]).collect();
    Ok(VelocityCoarsening { c_nodes, cbar, n_midpoints, n_augmented })
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut k = 0;
    for &x in small {
        while k < big.len() && big[k] < x {
            k += 1;
        }
        if k == big.len() || big[k] != x {
            return false;
        }
    }
    true
}

/// Scalar velocity pattern: coarse nodes inject, excluded nodes get empty
/// rows and every other node covers the coarse nodes within distance three.
pub fn velocity_pattern_scalar(vgraph: &Graph, c_nodes: &[usize], excluded: &[bool]) -> Result<SparseMatrix> {
    let n = vgraph.n_vertices();
    if c_nodes.is_empty() {
        return Err(Error::InvalidStructure("no coarse velocity nodes".into()));
    }
    let mut coarse_of = vec![None; n];
    for (q, &c) in c_nodes.iter().enumerate() {
        coarse_of[c] = Some(q);
    }
    let mut t = Vec::new();
    let mut seen = vec![false; n];
    for (q, &c) in c_nodes.iter().enumerate() {
        for (w, _) in bfs_with_marks(vgraph, c, 3, &mut seen) {
            if !excluded[w] && (coarse_of[w].is_none() || w == c) {
                t.push((w, q, 1.0));
            }
        }
    }
    let pat = SparseMatrix::from_triplets(n, c_nodes.len(), &t)?;
    for v in 0..n {
        if !excluded[v] && pat.row_nnz(v) == 0 {
            return Err(Error::EmptyPatternRow(v));
        }
    }
    Ok(pat)
}

/// Expands a scalar pattern to both velocity components (block diagonal).
pub fn velocity_pattern(vgraph: &Graph, c_nodes: &[usize], excluded: &[bool]) -> Result<SparseMatrix> {
    let s = velocity_pattern_scalar(vgraph, c_nodes, excluded)?;
    let (n, nc) = s.shape();
    SparseMatrix::from_blocks(&[n, n], &[nc, nc], &[&[Some(&s), None], &[None, Some(&s)]])
}
