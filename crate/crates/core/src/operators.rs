//! Dense complex-operator algebra: Hermitian operators, density matrices,
//! eigendecompositions, spectral matrix functions, the Daleckii–Krein
//! derivative of the matrix logarithm, entropies and expectations.
//!
//! Units are dimensionless with ħ = k_B = 1. All logarithms clamp eigenvalues
//! from below at [`EIG_CLAMP`] so that rank-deficient states are admissible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = Complex64;
/// Dense complex matrix used throughout.
pub type CMatrix = DMatrix<C64>;

/// Default lower clamp applied to eigenvalues before taking logarithms.
pub const EIG_CLAMP: f64 = 1e-12;
/// Eigenvalue gap below which divided differences switch to derivatives.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Hermiticity tolerance accepted on input before symmetrization.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance of a valid density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a valid density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Relative reconstruction tolerance of an eigendecomposition.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// The imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Frobenius norm of `m − m†`, relative to `max(1, ‖m‖_F)`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm() / m.norm().max(1.0)
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `{a, b} = ab + ba`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Trace of a square matrix.
pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Re tr(ab)` without forming the product.
pub fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("operator", "dimension must be positive"));
    }
    Ok(m.nrows())
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A Hermitian operator on a finite-dimensional Hilbert space.
///
/// Construction symmetrizes the input, so the stored matrix is exactly
/// self-adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Builds an operator from a square matrix that is Hermitian within
    /// [`HERMITIAN_TOL`] (relative to its norm) and symmetrizes it.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermiticity_defect(&m);
        if !(defect <= HERMITIAN_TOL) {
            return Err(Error::invalid("Hermitian operator", format!("anti-Hermitian defect {defect:.3e}")));
        }
        Ok(Self { m: hermitian_part(&m) })
    }

    /// Builds an operator by taking the Hermitian part of any square matrix.
    pub fn from_hermitian_part(m: &CMatrix) -> Result<Self> {
        check_square(m)?;
        Ok(Self { m: hermitian_part(m) })
    }

    /// Builds an operator from a real symmetric matrix.
    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(c))
    }

    /// Real diagonal operator.
    pub fn diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| c(x)));
        Self { m: CMatrix::from_diagonal(&v) }
    }

    /// The zero operator.
    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    /// The identity operator.
    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Matrix entries.
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Consumes the operator, returning its entries.
    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Real multiple `a·self`.
    pub fn scaled(&self, a: f64) -> Self {
        Self { m: self.m.scale(a) }
    }

    /// Whether every entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// Eigendecomposition with ascending eigenvalues.
    pub fn eig(&self) -> Result<EigenSystem> {
        eig_hermitian(self)
    }

    /// Applies a real function to the spectrum: `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(self.eig()?.reconstruct_with(f))
    }

    /// Matrix exponential `e^{self}` via the spectrum.
    pub fn exp(&self) -> Result<Self> {
        self.map_spectrum(f64::exp)
    }

    /// `tr(self · ρ)`, real by Hermiticity.
    pub fn expect(&self, rho: &DensityMatrix) -> Result<f64> {
        check_dims(self.dim(), rho.dim())?;
        Ok(re_trace_product(&self.m, rho.matrix()))
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scaled(rhs)
    }
}

/// A unit-trace, Hermitian, positive-semidefinite operator.
///
/// States built from a known spectral decomposition (Gibbs states) keep it,
/// so that their logarithm and divided differences use exact eigenvectors
/// instead of ones re-derived from rounded matrix entries (which, for
/// exponentially small populations, are determined only to `ε/Δp`).
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    m: CMatrix,
    spectral: Option<Arc<EigenSystem>>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl DensityMatrix {
    /// Validates a candidate density matrix: Hermitian within 1e-12, unit trace
    /// within 1e-10 and minimum eigenvalue ≥ −1e-10. The stored copy is
    /// symmetrized.
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianOperator::new(m)?;
        let tr = trace(h.matrix()).re;
        if !((tr - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::invalid("density matrix", format!("trace {tr:.15}")));
        }
        let min = eig_hermitian(&h)?.values[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::invalid("density matrix", format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(Self { m: h.into_matrix(), spectral: None })
    }

    /// Symmetrizes and trace-normalizes an unnormalized positive operator.
    pub fn from_unnormalized(m: &CMatrix) -> Result<Self> {
        check_square(m)?;
        let h = hermitian_part(m);
        let tr = trace(&h).re;
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::invalid("density matrix", format!("non-positive trace {tr:.3e}")));
        }
        Self::new(h.unscale(tr))
    }

    /// Nearest state in the positive cone: Hermitian part, negative eigenvalues
    /// set to zero, unit trace. Used to absorb integrator-level rounding.
    pub fn project(m: &CMatrix) -> Result<Self> {
        let h = HermitianOperator::from_hermitian_part(m)?;
        let es = h.eig()?;
        let clipped: Vec<f64> = es.values.iter().map(|&p| p.max(0.0)).collect();
        let tr: f64 = clipped.iter().sum();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::invalid("density matrix", format!("non-positive trace {tr:.3e}")));
        }
        let p: Vec<f64> = clipped.iter().map(|x| x / tr).collect();
        Self::new(es.reconstruct_with_values(&p).into_matrix())
    }

    /// The maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim).unscale(dim as f64), spectral: None }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(p.len(), p.iter().map(|&x| c(x)));
        Self::new(CMatrix::from_diagonal(&v))
    }

    /// Pure state `|ψ⟩⟨ψ|` for a nonzero (not necessarily normalized) vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::invalid("pure state", "zero vector"));
        }
        let v = psi.unscale(n);
        Self::new(&v * v.adjoint())
    }

    /// Gibbs state `e^{−βH}/tr e^{−βH}`, evaluated with max-shifted exponentials.
    pub fn gibbs(h: &HermitianOperator, beta: f64) -> Result<Self> {
        let es = h.eig()?;
        let e0 = es.values[0];
        let w: Vec<f64> = es.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / z).collect();
        let state = Self::new(es.reconstruct_with_values(&p).into_matrix())?;
        // Populations descend with energy; store them ascending.
        let d = p.len();
        let mut vectors = CMatrix::zeros(d, d);
        for j in 0..d {
            vectors.set_column(j, &es.vectors.column(d - 1 - j));
        }
        let values = DVector::from_iterator(d, p.iter().rev().copied());
        Ok(Self { spectral: Some(Arc::new(EigenSystem { values, vectors })), ..state })
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Matrix entries.
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Eigendecomposition of the state (the stored one when available).
    pub fn eig(&self) -> Result<EigenSystem> {
        match &self.spectral {
            Some(es) => Ok(EigenSystem::clone(es)),
            None => eig_hermitian(&self.as_operator()),
        }
    }

    /// The state viewed as a Hermitian operator.
    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator { m: self.m.clone() }
    }

    /// Purity `tr ρ²`.
    pub fn purity(&self) -> f64 {
        re_trace_product(&self.m, &self.m)
    }
}

/// Ascending eigenvalues and orthonormal column eigenvectors of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix,
}

impl EigenSystem {
    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let vals: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.reconstruct_with_values(&vals)
    }

    /// `V diag(values) V†`.
    pub fn reconstruct_with_values(&self, values: &[f64]) -> HermitianOperator {
        let mut scaled = self.vectors.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        HermitianOperator { m: hermitian_part(&(scaled * self.vectors.adjoint())) }
    }

    /// `V† X V`: an operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// `V X V†`: back from the eigenbasis.
    pub fn from_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        &self.vectors * x * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Fails with [`Error::EigenNonConvergence`] if the solver does not converge
/// or the reconstruction `‖M − VΛV†‖_F/‖M‖_F` exceeds 1e-10.
pub fn eig_hermitian(m: &HermitianOperator) -> Result<EigenSystem> {
    let d = m.dim();
    let eig = m
        .m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000 * d.max(1))
        .ok_or(Error::EigenNonConvergence { residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(d, d);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    let es = EigenSystem { values, vectors };
    let recon = es.reconstruct_with(|x| x);
    let residual = (&recon.m - &m.m).norm() / m.m.norm().max(f64::MIN_POSITIVE);
    if !(residual <= EIGEN_RESIDUAL_TOL) && m.m.norm() > 0.0 {
        return Err(Error::EigenNonConvergence { residual });
    }
    Ok(es)
}

/// Matrix logarithm `V ln(max(Λ, clamp)) V†` of a density matrix.
///
/// Exact when every eigenvalue exceeds `clamp`; total otherwise.
pub fn log_psd(rho: &DensityMatrix, clamp: f64) -> Result<HermitianOperator> {
    let clamp = validated_clamp(clamp)?;
    Ok(rho.eig()?.reconstruct_with(|p| p.max(clamp).ln()))
}

fn validated_clamp(clamp: f64) -> Result<f64> {
    if !(clamp > 0.0 && clamp <= 1e-6) {
        return Err(Error::param("clamp", format!("{clamp:e} not in (0, 1e-6]")));
    }
    Ok(clamp)
}

/// Matrix exponential of a general square complex matrix.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Result of [`frechet_dlog`].
#[derive(Clone, Debug)]
pub struct FrechetLog {
    /// The directional derivative `d/dt ln(σ + tX)|_{t=0}`.
    pub value: CMatrix,
    /// Set when some eigenvalue of σ was below the clamp and was raised to it.
    pub clamped: bool,
}

/// Daleckii–Krein divided difference `(ln a − ln b)/(a − b)`, switching to the
/// derivative `1/a` when `|a − b| < 1e-12`. Evaluated via `ln_1p` so that
/// nearby eigenvalues lose no precision.
pub fn log_divided_difference(a: f64, b: f64) -> f64 {
    let delta = a - b;
    if delta.abs() < DEGENERACY_TOL {
        1.0 / a
    } else {
        (delta / b).ln_1p() / delta
    }
}

/// Fréchet derivative of the matrix logarithm at σ in direction `x`.
///
/// `x` may be any square matrix (Hermitian or anti-Hermitian directions alike);
/// the map is complex-linear in `x`.
pub fn frechet_dlog(sigma: &DensityMatrix, x: &CMatrix, clamp: f64) -> Result<FrechetLog> {
    let clamp = validated_clamp(clamp)?;
    check_dims(sigma.dim(), x.nrows())?;
    check_dims(sigma.dim(), x.ncols())?;
    let es = sigma.eig()?;
    let clamped = es.values.iter().any(|&p| p < clamp);
    let p: Vec<f64> = es.values.iter().map(|&v| v.max(clamp)).collect();
    let mut xe = es.to_eigenbasis(x);
    let d = p.len();
    for i in 0..d {
        for j in 0..d {
            xe[(i, j)] *= log_divided_difference(p[i], p[j]);
        }
    }
    Ok(FrechetLog { value: es.from_eigenbasis(&xe), clamped })
}

/// `Δ = dlog_σ(i[H, σ])`, the rate of change of `ln σ` under the unitary flow of `H`.
///
/// Algebraically `Δ = i[H, ln σ]`, so `tr(σΔ) = 0`. The commutator is formed
/// in the eigenbasis of σ, where `[H, σ]ₘₙ = Hₘₙ(pₙ − pₘ)` is exact; forming
/// it first in the original basis would leave rounding noise of order
/// `ε‖H‖` that the divided differences amplify by up to `1/p_min`.
pub fn delta_operator(sigma: &DensityMatrix, h: &HermitianOperator, clamp: f64) -> Result<HermitianOperator> {
    let clamp = validated_clamp(clamp)?;
    check_dims(sigma.dim(), h.dim())?;
    let es = sigma.eig()?;
    let raw = es.values.as_slice();
    let p: Vec<f64> = raw.iter().map(|&v| v.max(clamp)).collect();
    let mut he = es.to_eigenbasis(h.matrix());
    for m in 0..p.len() {
        for n in 0..p.len() {
            he[(m, n)] *= I * (raw[n] - raw[m]) * log_divided_difference(p[m], p[n]);
        }
    }
    HermitianOperator::from_hermitian_part(&es.from_eigenbasis(&he))
}

/// Von Neumann entropy `−Σ p ln p` over eigenvalues `p > EIG_CLAMP` (nats).
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(entropy_of_spectrum(rho.eig()?.values.as_slice()))
}

fn entropy_of_spectrum(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > EIG_CLAMP).map(|&x| x * x.ln()).sum::<f64>()
}

/// Relative entropy `D(ρ‖σ) = tr ρ(ln ρ − ln σ)` with clamped logarithms.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let neg_s = -von_neumann_entropy(rho)?;
    let ln_sigma = log_psd(sigma, EIG_CLAMP)?;
    Ok(neg_s - re_trace_product(rho.matrix(), ln_sigma.matrix()))
}

/// `tr(Aρ)` for any square operator `A`.
pub fn expectation(a: &CMatrix, rho: &DensityMatrix) -> Result<C64> {
    check_dims(rho.dim(), a.nrows())?;
    check_dims(rho.dim(), a.ncols())?;
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * rho.matrix()[(k, i)];
        }
    }
    Ok(acc)
}

/// `ln tr e^{−βH}` evaluated with a max-shifted sum (no overflow at large β).
pub fn log_partition(h: &HermitianOperator, beta: f64) -> Result<f64> {
    let es = h.eig()?;
    Ok(log_partition_of_spectrum(es.values.as_slice(), beta))
}

/// `ln Σ e^{−βe}` over a spectrum, max-shifted.
pub fn log_partition_of_spectrum(levels: &[f64], beta: f64) -> f64 {
    let e0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = levels.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    -beta * e0 + s.ln()
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let diff = HermitianOperator { m: rho.matrix() - sigma.matrix() };
    Ok(0.5 * diff.eig()?.values.iter().map(|v| v.abs()).sum::<f64>())
}

/// Pauli matrices and projectors in the computational basis `|1⟩, |2⟩, …`.
pub mod pauli {
    use super::*;

    /// σx.
    pub fn sigma_x() -> HermitianOperator {
        HermitianOperator { m: CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]) }
    }

    /// σy.
    pub fn sigma_y() -> HermitianOperator {
        HermitianOperator { m: CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]) }
    }

    /// σz.
    pub fn sigma_z() -> HermitianOperator {
        HermitianOperator::diagonal(&[1.0, -1.0])
    }

    /// Projector `|k⟩⟨k|` in dimension `dim` (0-based `k`).
    pub fn projector(dim: usize, k: usize) -> HermitianOperator {
        let mut d = vec![0.0; dim];
        d[k] = 1.0;
        HermitianOperator::diagonal(&d)
    }
}
