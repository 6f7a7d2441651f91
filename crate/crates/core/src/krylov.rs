//! Right-preconditioned GMRES.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, hypot, norm2};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresParams {
    /// Stop once `‖b - A x‖₂ ≤ rel_tol ‖b‖₂`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Krylov dimension before a restart; `None` keeps the full basis.
    pub restart: Option<usize>,
    /// Record `max |VᵀV - I|` for the final basis.
    pub check_orthogonality: bool,
}

impl Default for GmresParams {
    fn default() -> Self {
        Self { rel_tol: 1e-6, max_iter: 200, restart: None, check_orthogonality: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm estimate after each iteration, starting with `‖r₀‖`.
    pub history: Vec<f64>,
    /// `‖b - A x‖₂ / ‖b‖₂` for the returned iterate.
    pub relative_residual: f64,
    pub orthogonality_defect: Option<f64>,
}

/// Solves `A x = b` with right preconditioning `A M y = b, x = M y` and
/// modified Gram-Schmidt Arnoldi (two passes per step).
pub fn gmres(
    a: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    m: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x0: &[f64],
    params: &GmresParams,
) -> Result<GmresOutcome> {
    let n = b.len();
    assert_eq!(x0.len(), n, "initial guess has wrong length");
    let bnorm = norm2(b);
    let mut x = x0.to_vec();
    let residual = |a: &mut dyn FnMut(&[f64]) -> Vec<f64>, x: &[f64]| -> Vec<f64> {
        let ax = a(x);
        b.iter().zip(ax).map(|(b, ax)| b - ax).collect()
    };
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            history: vec![0.0],
            relative_residual: 0.0,
            orthogonality_defect: None,
        });
    }
    let target = params.rel_tol * bnorm;
    let mut r = residual(a, &x);
    let mut beta = norm2(&r);
    let mut history = vec![beta];
    let mut iterations = 0;
    let mut defect = None;
    let restart = params.restart.unwrap_or(params.max_iter).max(1);
    while beta > target && iterations < params.max_iter {
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && iterations < params.max_iter {
            let z = m(&basis[k])?;
            let mut w = a(&z);
            let mut col = vec![0.0; k + 2];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    col[i] += hij;
                    w.iter_mut().zip(v).for_each(|(w, v)| *w -= hij * v);
                }
            }
            let wn = norm2(&w);
            col[k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = hypot(col[k], col[k + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
            col[k] = d;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] *= c;
            h.push(col);
            iterations += 1;
            k += 1;
            let est = g[k].abs();
            history.push(est);
            let breakdown = wn <= 1e-14 * beta;
            if est <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut u = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            u.iter_mut().zip(v).for_each(|(u, v)| *u += yi * v);
        }
        let du = m(&u)?;
        x.iter_mut().zip(du).for_each(|(x, d)| *x += d);
        if params.check_orthogonality {
            let mut worst = 0.0f64;
            for (i, vi) in basis.iter().enumerate() {
                for (j, vj) in basis.iter().enumerate().skip(i) {
                    let e = dot(vi, vj) - if i == j { 1.0 } else { 0.0 };
                    worst = worst.max(e.abs());
                }
            }
            defect = Some(worst);
        }
        r = residual(a, &x);
        beta = norm2(&r);
        if g[k].abs() <= 1e-14 * bnorm && beta > target {
            // stagnation of the recurrence: nothing more to gain from restarting
            break;
        }
    }
    Ok(GmresOutcome {
        x,
        iterations,
        converged: beta <= target,
        history,
        relative_residual: beta / bnorm,
        orthogonality_defect: defect,
    })
}
