//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use q2q1_amg::coarsen::{form_aux_blocks, split_pressures, CfSplitting, CoarsenParams};
use q2q1_amg::fem::{stokes_problem, ProblemSpec, SaddleSystem};
use q2q1_amg::graph::Graph;
use q2q1_amg::hierarchy::{setup_hierarchy, Hierarchy, HierarchyParams};
use q2q1_amg::SparseMatrix;

pub fn dense(a: &SparseMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; a.n_cols()]; a.n_rows()];
    for (i, j, v) in a.triplets() {
        d[i][j] += v;
    }
    d
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = b.len();
    let n = if k == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| (0..n).map(|j| (0..k).map(|l| row[l] * b[l][j]).sum()).collect())
        .collect()
}

pub fn max_abs_dense(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest entrywise difference between a sparse result and a dense oracle,
/// relative to the largest oracle entry (absolute when the oracle is zero).
pub fn relative_gap(got: &SparseMatrix, want: &[Vec<f64>]) -> f64 {
    let g = dense(got);
    let scale = max_abs_dense(want).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for (gr, wr) in g.iter().zip(want) {
        for (x, y) in gr.iter().zip(wr) {
            worst = worst.max((x - y).abs());
        }
    }
    if max_abs_dense(want) == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Plain queue-based BFS distances from `s` (usize::MAX when unreachable).
pub fn oracle_distances(g: &Graph, s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; g.n_vertices()];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in g.neighbors(v) {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

/// Checks the splitting invariants against BFS distances from every
/// C-point: pairwise C distance at least `min_c_dist`, every F vertex within
/// three hops of a C-point, and (when `exact_s`) `S_i` equal to the C-points
/// within three hops.
pub fn check_splitting(g: &Graph, split: &CfSplitting, min_c_dist: usize, exact_s: bool) -> Result<(), String> {
    let n = g.n_vertices();
    if split.is_coarse.len() != n {
        return Err("splitting size".into());
    }
    let mut near: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &c in &split.c_points {
        if !split.is_coarse[c] {
            return Err(format!("c_points lists F vertex {c}"));
        }
        let d = oracle_distances(g, c);
        for &c2 in &split.c_points {
            if c2 != c && d[c2] < min_c_dist {
                return Err(format!("C-points {c} and {c2} at distance {}", d[c2]));
            }
        }
        for v in 0..n {
            if d[v] <= 3 {
                near[v].push(c);
            }
        }
    }
    if split.c_points.len() != split.is_coarse.iter().filter(|&&c| c).count() {
        return Err("c_points and is_coarse disagree".into());
    }
    for v in 0..n {
        if split.is_coarse[v] {
            continue;
        }
        if near[v].is_empty() {
            return Err(format!("F vertex {v} has no C-point within distance 3"));
        }
        if split.s[v].is_empty() {
            return Err(format!("F vertex {v} has an empty S set"));
        }
        if exact_s {
            let mut want = near[v].clone();
            want.sort_unstable();
            if split.s[v] != want {
                return Err(format!("S_{v} = {:?}, oracle {:?}", split.s[v], want));
            }
        } else if split.s[v].iter().any(|c| !near[v].contains(c)) {
            return Err(format!("S_{v} lists a C-point farther than 3"));
        }
    }
    Ok(())
}

pub fn cavity(m: usize) -> SaddleSystem {
    stokes_problem(&ProblemSpec::lid_cavity(m)).unwrap().1
}

/// Filtered pressure graph and pressure coordinates of a generated problem.
pub fn pressure_graph(spec: &ProblemSpec, params: &CoarsenParams) -> (Graph, Vec<[f64; 2]>) {
    let (mesh, sys) = stokes_problem(spec).unwrap();
    let aux = form_aux_blocks(&sys.a, &sys.b, params).unwrap();
    (Graph::from_matrix(&aux.a_p), mesh.q1_coords.clone())
}

/// Pre-augmentation and final splittings of one pressure graph, both checked.
pub fn verify_pressure_graph(g: &Graph, coords: &[[f64; 2]], params: &CoarsenParams) -> Result<(), String> {
    let (pre, _) = split_pressures(g, coords, params, false).map_err(|e| e.to_string())?;
    check_splitting(g, &pre, 4, true)?;
    let (post, _) = split_pressures(g, coords, params, true).map_err(|e| e.to_string())?;
    check_splitting(g, &post, 3, false)?;
    for &c in &pre.c_points {
        if !post.is_coarse[c] {
            return Err(format!("augmentation dropped C-point {c}"));
        }
    }
    Ok(())
}

pub fn hierarchy(spec: &ProblemSpec, params: &HierarchyParams) -> Hierarchy {
    let (mesh, sys) = stokes_problem(spec).unwrap();
    setup_hierarchy(&sys, &mesh, params).unwrap()
}

/// Largest `|P·1 - 1|` over coupled rows of every transfer, per component
/// (velocity x, velocity y, pressure).
pub fn constraint_defect(h: &Hierarchy) -> f64 {
    let mut worst: f64 = 0.0;
    for level in &h.levels {
        let Some(t) = &level.transfer else { continue };
        let ns = level.n_v / 2;
        let ncv = t.p_v.n_cols();
        let np_c = t.p_p.n_cols();
        let ones = vec![1.0; t.p.n_cols()];
        let mut x_only = vec![0.0; t.p.n_cols()];
        let mut y_only = vec![0.0; t.p.n_cols()];
        let mut p_only = vec![0.0; t.p.n_cols()];
        x_only[..ncv].fill(1.0);
        y_only[ncv..2 * ncv].fill(1.0);
        p_only[2 * ncv..2 * ncv + np_c].fill(1.0);
        let _ = ones;
        for (probe, range) in [(x_only, 0..ns), (y_only, ns..2 * ns), (p_only, level.n_v..level.n_dofs())] {
            let y = t.p.mul_vec(&probe);
            for (i, v) in y.iter().enumerate() {
                let inside = range.contains(&i);
                let coupled = i >= level.n_v || !level.excluded[i % ns];
                let want = if inside && coupled { 1.0 } else { 0.0 };
                worst = worst.max((v - want).abs());
            }
        }
    }
    worst
}
