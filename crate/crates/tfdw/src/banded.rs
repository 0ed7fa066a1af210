//! Minimal symmetric-banded linear algebra: storage, matvec, Cholesky.
//!
//! The radial differentiation stencil has half-width 4 at the closures, so
//! the stiffness form D'WD and the preconditioner alpha*W + c_w*K are
//! symmetric banded with bandwidth 4. That is the entire scope here; a
//! general matrix library would be dead weight.

/// Symmetric banded matrix, lower storage.
///
/// `bands[d][i]` holds `A[i + d, i]` for diagonal offset `d in 0..=bw`;
/// entries past the matrix edge are kept at zero and never read.
#[derive(Debug, Clone)]
pub(crate) struct BandedSym {
    pub n: usize,
    pub bw: usize,
    pub bands: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            bands: vec![vec![0.0; n]; bw + 1],
        }
    }

    /// Adds `v` to `A[i, j]` (and implicitly to `A[j, i]`); callers must
    /// pass `i >= j`.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.bands[i - j][j] += v;
    }

    /// y = A x, using symmetry.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            y[i] = self.bands[0][i] * x[i];
        }
        for d in 1..=self.bw {
            let band = &self.bands[d];
            for j in 0..n.saturating_sub(d) {
                let a = band[j];
                y[j + d] += a * x[j];
                y[j] += a * x[j + d];
            }
        }
    }

    /// In-place scaled addition of another banded matrix: A += s * B.
    pub fn axpy(&mut self, s: f64, other: &BandedSym) {
        debug_assert_eq!(self.n, other.n);
        debug_assert_eq!(self.bw, other.bw);
        for d in 0..=self.bw {
            for j in 0..self.n {
                self.bands[d][j] += s * other.bands[d][j];
            }
        }
    }

    /// Adds `s * diag` to the main diagonal.
    pub fn add_diag(&mut self, s: f64, diag: &[f64]) {
        debug_assert_eq!(diag.len(), self.n);
        for j in 0..self.n {
            self.bands[0][j] += s * diag[j];
        }
    }

    /// Cholesky factorization A = L L'. Returns `None` when a pivot is not
    /// strictly positive (matrix not positive definite at working precision).
    pub fn cholesky(&self) -> Option<BandedChol> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.bands.clone();
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut diag = l[0][j];
            for k in lo..j {
                let v = l[j - k][k];
                diag -= v * v;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return None;
            }
            let dj = diag.sqrt();
            l[0][j] = dj;
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                let mut s = l[i - j][j];
                let lo_i = i.saturating_sub(bw);
                for k in lo_i.max(lo)..j {
                    s -= l[i - k][k] * l[j - k][k];
                }
                l[i - j][j] = s / dj;
            }
        }
        Some(BandedChol { n, bw, l })
    }
}

/// Cholesky factor of a [`BandedSym`], same band layout.
#[derive(Debug, Clone)]
pub(crate) struct BandedChol {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
}

impl BandedChol {
    /// Solves A x = b via the two triangular sweeps, writing into `x`.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        debug_assert_eq!(b.len(), n);
        debug_assert_eq!(x.len(), n);
        // forward: L y = b
        for i in 0..n {
            let mut s = b[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                s -= self.l[i - k][k] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            let hi = (i + bw).min(n - 1);
            for k in (i + 1)..=hi {
                s -= self.l[k - i][i] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
    }
}
