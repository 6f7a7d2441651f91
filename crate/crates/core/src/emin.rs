//! Energy-minimizing grid transfers.
//!
//! The prolongator is searched over a fixed sparsity pattern subject to
//! reproducing constants (per component), and its columns are driven toward
//! minimal energy with a few steps of projected conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EminNorm {
    /// `χ = A`, which must be SPD on the pattern space.
    ANorm,
    /// `χ = AᵀA`.
    NormalNorm,
}

/// Everything needed to run EMIN on one block.
#[derive(Debug, Clone)]
pub struct EminProblem<'a> {
    pub a: &'a SparseMatrix,
    pub pattern: &'a SparseMatrix,
    /// Component of each coarse column. Constants are reproduced separately
    /// per component. `None` means a single component.
    pub col_component: Option<&'a [usize]>,
    pub norm: EminNorm,
    pub iterations: usize,
}

impl<'a> EminProblem<'a> {
    pub fn new(a: &'a SparseMatrix, pattern: &'a SparseMatrix, norm: EminNorm, iterations: usize) -> Result<Self> {
        if a.n_rows() != a.n_cols() || a.n_cols() != pattern.n_rows() {
            return Err(Error::DimensionMismatch {
                op: "emin",
                detail: alloc::format!("A {:?}, pattern {:?}", a.shape(), pattern.shape()),
            });
        }
        Ok(Self { a, pattern, col_component: None, norm, iterations })
    }

    pub fn with_components(mut self, col_component: &'a [usize]) -> Result<Self> {
        if col_component.len() != self.pattern.n_cols() {
            return Err(Error::DimensionMismatch { op: "emin", detail: "component labels".into() });
        }
        self.col_component = Some(col_component);
        Ok(self)
    }
}

fn component(labels: Option<&[usize]>, col: usize) -> usize {
    labels.map_or(0, |l| l[col])
}

/// Uniform row weights on the pattern. Rows flagged in `excluded` may be
/// empty; any other empty row is an error.
pub fn initial_prolongator(pattern: &SparseMatrix, excluded: Option<&[bool]>) -> Result<SparseMatrix> {
    initial_prolongator_by_component(pattern, excluded, None)
}

/// Like [`initial_prolongator`], with weights normalized separately within
/// each component of the coarse columns.
pub fn initial_prolongator_by_component(
    pattern: &SparseMatrix,
    excluded: Option<&[bool]>,
    col_component: Option<&[usize]>,
) -> Result<SparseMatrix> {
    let mut p = pattern.clone();
    let offsets = p.row_offsets().to_vec();
    let cols = p.col_indices().to_vec();
    let values = p.values_mut();
    for i in 0..pattern.n_rows() {
        let range = offsets[i]..offsets[i + 1];
        if range.is_empty() {
            if excluded.is_some_and(|e| e[i]) {
                continue;
            }
            return Err(Error::EmptyPatternRow(i));
        }
        for k in range.clone() {
            let c = component(col_component, cols[k]);
            let count = range.clone().filter(|&l| component(col_component, cols[l]) == c).count();
            values[k] = 1.0 / count as f64;
        }
    }
    Ok(p)
}

/// Values of `g` at the stored positions of `pattern`.
fn values_on_pattern(pattern: &SparseMatrix, g: &SparseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; pattern.nnz()];
    let mut k = 0;
    for i in 0..pattern.n_rows() {
        let (pc, _) = pattern.row(i);
        let (gc, gv) = g.row(i);
        let mut l = 0;
        for &c in pc {
            while l < gc.len() && gc[l] < c {
                l += 1;
            }
            if l < gc.len() && gc[l] == c {
                out[k] = gv[l];
            }
            k += 1;
        }
    }
    out
}

/// Subtracts, within every row and component, the mean over that row's
/// pattern entries so that updates keep row sums fixed.
fn project(pattern: &SparseMatrix, labels: Option<&[usize]>, v: &mut [f64]) {
    let offsets = pattern.row_offsets();
    let cols = pattern.col_indices();
    let ncomp = labels.map_or(1, |l| l.iter().copied().max().map_or(1, |m| m + 1));
    let mut sum = vec![0.0; ncomp];
    let mut cnt = vec![0usize; ncomp];
    for i in 0..pattern.n_rows() {
        let range = offsets[i]..offsets[i + 1];
        sum.iter_mut().for_each(|s| *s = 0.0);
        cnt.iter_mut().for_each(|c| *c = 0);
        for k in range.clone() {
            let c = component(labels, cols[k]);
            sum[c] += v[k];
            cnt[c] += 1;
        }
        for k in range {
            let c = component(labels, cols[k]);
            v[k] -= sum[c] / cnt[c] as f64;
        }
    }
}

fn with_values(pattern: &SparseMatrix, values: &[f64]) -> SparseMatrix {
    let mut m = pattern.clone();
    m.values_mut().copy_from_slice(values);
    m
}

fn frob(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Chi<'a> {
    a: &'a SparseMatrix,
    at: Option<SparseMatrix>,
    norm: EminNorm,
}

impl Chi<'_> {
    /// Returns `χ X` and `⟨X, χ X⟩_F`.
    fn apply(&self, x: &SparseMatrix) -> Result<(SparseMatrix, f64)> {
        let ax = self.a.matmul(x)?;
        match self.norm {
            EminNorm::ANorm => {
                let e = frob(x.values(), &values_on_pattern(x, &ax));
                Ok((ax, e))
            }
            EminNorm::NormalNorm => {
                let e = ax.values().iter().map(|v| v * v).sum();
                let at = self.at.as_ref().expect("transpose is formed for the normal norm");
                Ok((at.matmul(&ax)?, e))
            }
        }
    }
}

/// `Σ_j ‖P_j‖²_χ`.
pub fn energy(a: &SparseMatrix, p: &SparseMatrix, norm: EminNorm) -> Result<f64> {
    let chi = Chi { a, at: None, norm: EminNorm::ANorm };
    match norm {
        EminNorm::ANorm => Ok(chi.apply(p)?.1),
        EminNorm::NormalNorm => Ok(a.matmul(p)?.values().iter().map(|v| v * v).sum()),
    }
}

/// Runs projected CG from `p0` and returns the iterate along with the
/// energy after each step (the first entry is the energy of `p0`).
pub fn emin_iterate_with_history(problem: &EminProblem<'_>, p0: &SparseMatrix) -> Result<(SparseMatrix, Vec<f64>)> {
    if p0.shape() != problem.pattern.shape() {
        return Err(Error::DimensionMismatch { op: "emin_iterate", detail: "P0 does not match the pattern".into() });
    }
    // P0 is carried on the pattern structure so all iterates share it
    let pattern = &problem.pattern.pattern();
    let mut p = values_on_pattern(pattern, p0);
    let labels = problem.col_component;
    let chi = Chi {
        a: problem.a,
        at: (problem.norm == EminNorm::NormalNorm).then(|| problem.a.transpose()),
        norm: problem.norm,
    };
    let (chi_p, e0) = chi.apply(&with_values(pattern, &p))?;
    let mut history = vec![e0];
    if problem.iterations == 0 {
        return Ok((with_values(pattern, &p), history));
    }
    let mut r: Vec<f64> = values_on_pattern(pattern, &chi_p).iter().map(|v| -v).collect();
    project(pattern, labels, &mut r);
    let mut d = r.clone();
    let mut rr = frob(&r, &r);
    for _ in 0..problem.iterations {
        if rr == 0.0 {
            break;
        }
        let (chi_d, dd) = chi.apply(&with_values(pattern, &d))?;
        if !(dd > 0.0) {
            if problem.norm == EminNorm::ANorm {
                return Err(Error::NotSpdOnPattern);
            }
            break;
        }
        let alpha = frob(&r, &d) / dd;
        let mut q = values_on_pattern(pattern, &chi_d);
        project(pattern, labels, &mut q);
        for k in 0..p.len() {
            p[k] += alpha * d[k];
            r[k] -= alpha * q[k];
        }
        history.push(energy(problem.a, &with_values(pattern, &p), problem.norm)?);
        let rr_new = frob(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..d.len() {
            d[k] = r[k] + beta * d[k];
        }
    }
    Ok((with_values(pattern, &p), history))
}

pub fn emin_iterate(problem: &EminProblem<'_>, p0: &SparseMatrix) -> Result<SparseMatrix> {
    Ok(emin_iterate_with_history(problem, p0)?.0)
}

/// Petrov-Galerkin restriction: EMIN applied to `Rᵀ` in the `AAᵀ` norm,
/// started from the row-normalized pattern of `p`.
pub fn emin_restriction(a: &SparseMatrix, p: &SparseMatrix, iterations: usize, excluded: Option<&[bool]>) -> Result<SparseMatrix> {
    let pattern = p.pattern();
    let at = a.transpose();
    let p0 = initial_prolongator(&pattern, excluded)?;
    let problem = EminProblem::new(&at, &pattern, EminNorm::NormalNorm, iterations)?;
    Ok(emin_iterate(&problem, &p0)?.transpose())
}
