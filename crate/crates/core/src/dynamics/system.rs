//! System and bath descriptions.

use crate::error::{Error, Result};
use crate::operators::{pauli, CMatrix, HermitianOperator, I};

/// A non-Hermitian Hamiltonian `H_NH = H + iΓ` with Hermitian `H` and `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonHermitianSystem {
    h: HermitianOperator,
    gamma: HermitianOperator,
}

impl NonHermitianSystem {
    /// Pairs a Hermitian part with a dissipation-strength operator of equal dimension.
    pub fn new(h: HermitianOperator, gamma: HermitianOperator) -> Result<Self> {
        if h.dim() != gamma.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: gamma.dim() });
        }
        Ok(Self { h, gamma })
    }

    /// A Hermitian system (`Γ = 0`).
    pub fn hermitian(h: HermitianOperator) -> Self {
        let gamma = HermitianOperator::zeros(h.dim());
        Self { h, gamma }
    }

    /// The two-level model `σx + iγσy`.
    pub fn two_level(gamma: f64) -> Self {
        Self { h: pauli::sigma_x(), gamma: pauli::sigma_y().scaled(gamma) }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Hermitian part `H`.
    pub fn h(&self) -> &HermitianOperator {
        &self.h
    }

    /// Anti-Hermitian generator `Γ`.
    pub fn gamma(&self) -> &HermitianOperator {
        &self.gamma
    }

    /// Whether the system is Hermitian (`Γ` identically zero).
    pub fn is_hermitian(&self) -> bool {
        self.gamma.is_zero()
    }

    /// The full non-Hermitian Hamiltonian `H + iΓ`.
    pub fn hamiltonian(&self) -> CMatrix {
        self.h.matrix() + self.gamma.matrix() * I
    }
}

/// Effective thermal bath: inverse temperature, overall rate and the
/// system-side coupling operators of the dissipator.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    beta: f64,
    kappa: f64,
    couplings: Vec<HermitianOperator>,
}

/// Default dissipator rate.
pub const DEFAULT_KAPPA: f64 = 0.005;

impl BathSpec {
    /// Validates `β > 0`, `κ ≥ 0`, nonempty equal-dimension couplings when `κ > 0`.
    pub fn new(beta: f64, kappa: f64, couplings: Vec<HermitianOperator>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("{beta} must be positive and finite")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("{kappa} must be non-negative")));
        }
        if kappa > 0.0 && couplings.is_empty() {
            return Err(Error::param("couplings", "at least one coupling operator is required when kappa > 0"));
        }
        if let Some(first) = couplings.first() {
            if let Some(bad) = couplings.iter().find(|a| a.dim() != first.dim()) {
                return Err(Error::DimensionMismatch { expected: first.dim(), found: bad.dim() });
            }
        }
        Ok(Self { beta, kappa, couplings })
    }

    /// Bath at temperature `T` with site-projector couplings `|k⟩⟨k|`.
    pub fn site_projectors(dim: usize, temperature: f64, kappa: f64) -> Result<Self> {
        Self::new(1.0 / temperature, kappa, (0..dim).map(|k| pauli::projector(dim, k)).collect())
    }

    /// Two-level bath with the default couplings `{|1⟩⟨1|, |2⟩⟨2|}`.
    pub fn two_level(temperature: f64, kappa: f64) -> Result<Self> {
        Self::site_projectors(2, temperature, kappa)
    }

    /// Inverse temperature.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Temperature `1/β`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// Overall dissipator rate.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Coupling operators.
    pub fn couplings(&self) -> &[HermitianOperator] {
        &self.couplings
    }

    /// Same bath with one more coupling operator.
    pub fn with_coupling(mut self, a: HermitianOperator) -> Result<Self> {
        self.couplings.push(a);
        Self::new(self.beta, self.kappa, self.couplings)
    }

    /// Same couplings at a different rate.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.beta, kappa, self.couplings.clone())
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.couplings.iter().find(|a| a.dim() != dim) {
            Some(a) => Err(Error::DimensionMismatch { expected: dim, found: a.dim() }),
            None => Ok(()),
        }
    }
}
