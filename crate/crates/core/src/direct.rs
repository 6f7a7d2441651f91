//! Banded LU with partial pivoting after a reverse Cuthill-McKee reordering.
//! Used as the reference solver for Picard iterations and small coarse grids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{rcm_ordering, Permutation};
use crate::{Error, Result, SparseMatrix};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    piv: Vec<usize>,
    perm: Permutation,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch { op: "banded lu", detail: format!("{:?}", a.shape()) });
        }
        let n = a.n_rows();
        let perm = rcm_ordering(a);
        let pa = a.permute_symmetric(perm.forward());
        let (mut kl, mut ku) = (0, 0);
        for (i, j, _) in pa.triplets() {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for (i, j, v) in pa.triplets() {
            band[i * width + j + kl - i] = v;
        }
        let mut piv = vec![0; n];
        let reach = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[k * width + kl].abs();
            for i in k + 1..=last {
                let v = band[i * width + k + kl - i].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(perm.forward()[k]));
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    band.swap(k * width + j + kl - k, p * width + j + kl - p);
                }
            }
            let pivot = band[k * width + kl];
            for i in k + 1..=last {
                let l = band[i * width + k + kl - i] / pivot;
                band[i * width + k + kl - i] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let u = band[k * width + j + kl - k];
                    band[i * width + j + kl - i] -= l * u;
                }
            }
        }
        Ok(Self { n, kl, ku, width, band, piv, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, kl, w) = (self.n, self.kl, self.width);
        let mut y = self.perm.apply(b);
        for k in 0..n {
            y.swap(k, self.piv[k]);
            let yk = y[k];
            if yk != 0.0 {
                for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    y[i] -= self.band[i * w + k + kl - i] * yk;
                }
            }
        }
        let reach = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= self.band[i * w + j + kl - i] * y[j];
            }
            y[i] = s / self.band[i * w + kl];
        }
        self.perm.apply_inverse(&y)
    }
}
