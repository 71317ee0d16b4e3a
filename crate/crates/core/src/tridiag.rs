//! Real symmetric tridiagonal eigenproblems at large size.
//!
//! Eigenvalues come from implicit-shift QL iteration in `O(n²)` without
//! accumulating rotations; eigenvectors are obtained one at a time from a
//! twisted `LDLᵀ/UDUᵀ` factorization of `T − λI`, also `O(n)` each, so that
//! vector moments can be accumulated without ever storing the basis.

use crate::error::{Error, Result};

/// A symmetric tridiagonal matrix: diagonal `diag[0..n]`, off-diagonal
/// `off[0..n-1]` coupling sites `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    /// Diagonal entries.
    pub diag: Vec<f64>,
    /// Off-diagonal entries (length `n − 1`).
    pub off: Vec<f64>,
}

const MAX_QL_ITERATIONS: usize = 60;

impl SymTridiagonal {
    /// Validates lengths and finiteness.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len().saturating_sub(1), found: off.len() });
        }
        if diag.iter().chain(&off).any(|x| !x.is_finite()) {
            return Err(Error::invalid("tridiagonal matrix", "entries must be finite"));
        }
        Ok(Self { diag, off })
    }

    /// Matrix size.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Ascending eigenvalues by implicit-shift QL.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iterations = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iterations += 1;
                if iterations > MAX_QL_ITERATIONS {
                    return Err(Error::EigenNonConvergence { residual: e[l].abs() });
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    // Entries are O(‖T‖), so the unguarded square root cannot
                    // overflow and is much cheaper than `hypot`.
                    r = (f * f + g * g).sqrt();
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Normalized eigenvector for an (accurate) eigenvalue `lambda`, from the
    /// twisted factorization whose twist index minimizes `|γ_k|`.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let mut z: [Vec<f64>; LANES] = Default::default();
        self.twisted_vectors(&[lambda; LANES], &mut TwistBatch::default(), &mut z);
        std::mem::take(&mut z[0])
    }

    /// Eigenvalues together with the moments `Σ_j weight_j v_{n,j}²` of each
    /// eigenvector; vectors are kept only if `keep_vectors`.
    pub fn eigen_moments(&self, weight: &[f64], keep_vectors: bool) -> Result<TridiagonalEigen> {
        if weight.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: weight.len() });
        }
        let values = self.eigenvalues()?;
        let mut moments = Vec::with_capacity(values.len());
        let mut vectors = keep_vectors.then(|| Vec::with_capacity(values.len()));
        let mut batch = TwistBatch::default();
        let mut z: [Vec<f64>; LANES] = Default::default();
        for chunk in values.chunks(LANES) {
            let mut lambdas = [chunk[0]; LANES];
            lambdas[..chunk.len()].copy_from_slice(chunk);
            self.twisted_vectors(&lambdas, &mut batch, &mut z);
            for v in z.iter().take(chunk.len()) {
                moments.push(v.iter().zip(weight).map(|(x, w)| w * x * x).sum());
                if let Some(vs) = vectors.as_mut() {
                    vs.push(v.clone());
                }
            }
        }
        Ok(TridiagonalEigen { values, moments, vectors })
    }

    /// Twisted-factorization eigenvectors for `LANES` shifts at once; the
    /// independent recurrences interleave, hiding the division latency.
    fn twisted_vectors(&self, lambdas: &[f64; LANES], w: &mut TwistBatch, z: &mut [Vec<f64>; LANES]) {
        let n = self.dim();
        if n == 1 {
            for v in z.iter_mut() {
                *v = vec![1.0];
            }
            return;
        }
        let scale = self.diag.iter().chain(&self.off).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;
        let guard = |x: f64| if x.abs() < tiny { tiny.copysign(if x == 0.0 { 1.0 } else { x }) } else { x };
        w.lower.resize(n - 1, [0.0; LANES]);
        w.upper.resize(n - 1, [0.0; LANES]);
        w.dplus.resize(n, [0.0; LANES]);
        let mut dp = [0.0; LANES];
        for (k, d) in dp.iter_mut().enumerate() {
            *d = guard(self.diag[0] - lambdas[k]);
        }
        w.dplus[0] = dp;
        for i in 0..n - 1 {
            let b = self.off[i];
            let a = self.diag[i + 1];
            let mut l = [0.0; LANES];
            for k in 0..LANES {
                l[k] = b / dp[k];
                dp[k] = guard(a - lambdas[k] - l[k] * b);
            }
            w.lower[i] = l;
            w.dplus[i + 1] = dp;
        }
        let mut dm = [0.0; LANES];
        let mut best = [f64::INFINITY; LANES];
        let mut twist = [0usize; LANES];
        for k in 0..LANES {
            dm[k] = guard(self.diag[n - 1] - lambdas[k]);
            best[k] = (w.dplus[n - 1][k] + dm[k] - (self.diag[n - 1] - lambdas[k])).abs();
            twist[k] = n - 1;
        }
        for i in (0..n - 1).rev() {
            let b = self.off[i];
            let a = self.diag[i];
            let mut u = [0.0; LANES];
            for k in 0..LANES {
                u[k] = b / dm[k];
                dm[k] = guard(a - lambdas[k] - u[k] * b);
                let gamma = (w.dplus[i][k] + dm[k] - (a - lambdas[k])).abs();
                if gamma < best[k] {
                    best[k] = gamma;
                    twist[k] = i;
                }
            }
            w.upper[i] = u;
        }
        for (k, v) in z.iter_mut().enumerate() {
            v.clear();
            v.resize(n, 0.0);
            let r = twist[k];
            v[r] = 1.0;
            for i in (0..r).rev() {
                v[i] = -w.lower[i][k] * v[i + 1];
            }
            for i in r..n - 1 {
                v[i + 1] = -w.upper[i][k] * v[i];
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

const LANES: usize = 4;

#[derive(Default)]
struct TwistBatch {
    lower: Vec<[f64; LANES]>,
    upper: Vec<[f64; LANES]>,
    dplus: Vec<[f64; LANES]>,
}

/// Result of [`SymTridiagonal::eigen_moments`].
#[derive(Clone, Debug)]
pub struct TridiagonalEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `Σ_j weight_j v_{n,j}²` per eigenvalue.
    pub moments: Vec<f64>,
    /// Eigenvectors (row `n` belongs to `values[n]`) when requested.
    pub vectors: Option<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_tridiagonal(n: usize, seed: u64) -> SymTridiagonal {
        let mut rng = crate::random::rng_from_seed(seed);
        let diag = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let off = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymTridiagonal::new(diag, off).unwrap()
    }

    fn dense(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if i + 1 == j {
                t.off[i]
            } else if j + 1 == i {
                t.off[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn eigenvalues_match_dense_solver() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (150, 4)] {
            let t = random_tridiagonal(n, seed);
            let mut oracle: Vec<f64> = dense(&t).symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(f64::total_cmp);
            for (a, b) in t.eigenvalues().unwrap().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn two_site_hopping_levels() {
        let t = SymTridiagonal::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let v = t.eigenvalues().unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn open_chain_matches_cosine_band() {
        let n = 400;
        let t = SymTridiagonal::new(vec![0.0; n], vec![1.0; n - 1]).unwrap();
        let vals = t.eigenvalues().unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = -2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn twisted_vectors_are_eigenvectors_with_correct_moments() {
        let n = 200;
        let mut t = random_tridiagonal(n, 9);
        t.diag.iter_mut().enumerate().for_each(|(j, d)| *d += 2.0 * j as f64 / n as f64);
        let weight: Vec<f64> = (1..=n).map(|j| j as f64 / n as f64).collect();
        let eig = t.eigen_moments(&weight, true).unwrap();
        let dense_eig = dense(&t).symmetric_eigen();
        let vectors = eig.vectors.as_ref().unwrap();
        for (k, (&lambda, v)) in eig.values.iter().zip(vectors).enumerate() {
            let tv = t.apply(v);
            let residual: f64 = tv.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            assert!(residual < 1e-10, "residual {residual} at {k}");
            let idx = dense_eig.eigenvalues.iter().position(|&x| (x - lambda).abs() < 1e-10).unwrap();
            let col = dense_eig.eigenvectors.column(idx);
            let oracle: f64 = col.iter().zip(&weight).map(|(c, w)| w * c * c).sum();
            assert!((oracle - eig.moments[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_shapes_are_rejected() {
        assert!(SymTridiagonal::new(vec![0.0; 3], vec![1.0]).is_err());
        assert!(SymTridiagonal::new(vec![f64::NAN], vec![]).is_err());
    }
}
