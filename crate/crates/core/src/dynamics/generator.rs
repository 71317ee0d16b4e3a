//! The reduced generator `D = D_NH + L_D`: the normalized non-Hermitian part
//! and a Davies dissipator built on the eigenbasis of the Hermitian part.
//!
//! `D` is linear-then-normalize: the unnormalized state obeys the linear
//! equation `dρ̃/dt = 𝓛ρ̃` with `𝓛ρ̃ = −i(H_NH ρ̃ − ρ̃ H_NH†) + L_D ρ̃`, and
//! `ρ = ρ̃ / tr ρ̃` obeys `dρ/dt = 𝓛ρ − tr(𝓛ρ)ρ = Dρ`. Superoperators act on
//! column-stacked vectorizations, `vec(AXB) = (Bᵀ ⊗ A) vec X`.

use crate::dynamics::system::{BathSpec, NonHermitianSystem};
use crate::error::{Error, Result};
use crate::operators::{anticommutator, commutator, hermitian_part, re_trace_product, CMatrix, DensityMatrix, HermitianOperator, C64, I};

/// Relative tolerance used to group Bohr frequencies.
pub const BOHR_TOL: f64 = 1e-9;
/// Jump components with Frobenius norm below this are dropped.
const JUMP_FLOOR: f64 = 1e-14;

/// Bath rate `γ(ω) = κ e^{βω/2}/(2 cosh(βω/2)) = κ/(1 + e^{−βω})`.
///
/// Satisfies the detailed-balance ratio `γ(ω)/γ(−ω) = e^{βω}`; `ω > 0` is
/// energy released to the bath.
pub fn davies_rate(kappa: f64, beta: f64, omega: f64) -> f64 {
    let x = beta * omega;
    if x >= 0.0 {
        kappa / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        kappa * e / (1.0 + e)
    }
}

/// A single Lindblad channel `g (MρM† − ½{M†M, ρ})`.
#[derive(Clone, Debug)]
pub struct Jump {
    /// Bohr frequency of the channel.
    pub omega: f64,
    /// Rate `γ(ω)`.
    pub rate: f64,
    /// Jump operator in the original basis.
    pub op: CMatrix,
    op_dag_op: CMatrix,
}

/// Davies dissipator for a fixed Hermitian part and bath.
#[derive(Clone, Debug)]
pub struct DaviesDissipator {
    dim: usize,
    jumps: Vec<Jump>,
}

impl DaviesDissipator {
    /// Decomposes every coupling into Bohr-frequency components
    /// `A(ω) = Σ_{e_n − e_m = ω} |m⟩⟨m|A|n⟩⟨n|` in the eigenbasis of `h`.
    pub fn new(h: &HermitianOperator, bath: &BathSpec) -> Result<Self> {
        let dim = h.dim();
        bath.check_dim(dim)?;
        if bath.kappa() == 0.0 {
            return Ok(Self { dim, jumps: Vec::new() });
        }
        let es = h.eig()?;
        let e = es.values.as_slice();
        let spread = (e[dim - 1] - e[0]).max(1.0);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                pairs.push((e[n] - e[m], m, n));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<Vec<(f64, usize, usize)>> = Vec::new();
        for p in pairs {
            match groups.last_mut() {
                Some(g) if p.0 - g.last().map_or(p.0, |q| q.0) <= BOHR_TOL * spread => g.push(p),
                _ => groups.push(vec![p]),
            }
        }
        let mut jumps = Vec::new();
        for a in bath.couplings() {
            let ae = es.to_eigenbasis(a.matrix());
            for g in &groups {
                let omega = g.iter().map(|q| q.0).sum::<f64>() / g.len() as f64;
                let mut comp = CMatrix::zeros(dim, dim);
                for &(_, m, n) in g {
                    comp[(m, n)] = ae[(m, n)];
                }
                if comp.norm() < JUMP_FLOOR {
                    continue;
                }
                let op = es.from_eigenbasis(&comp);
                let op_dag_op = op.adjoint() * &op;
                jumps.push(Jump { omega, rate: davies_rate(bath.kappa(), bath.beta(), omega), op, op_dag_op });
            }
        }
        Ok(Self { dim, jumps })
    }

    /// Lindblad channels of the dissipator.
    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// `L_D x` for any square matrix `x`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for j in &self.jumps {
            let sandwich = &j.op * x * j.op.adjoint();
            out += (sandwich - anticommutator(&j.op_dag_op, x).scale(0.5)).scale(j.rate);
        }
        out
    }

    /// Matrix of `L_D` acting on column-stacked vectors.
    pub fn superoperator(&self) -> CMatrix {
        let d = self.dim;
        let id = CMatrix::identity(d, d);
        let mut s = CMatrix::zeros(d * d, d * d);
        for j in &self.jumps {
            let g = C64::new(j.rate, 0.0);
            s += (j.op.conjugate().kronecker(&j.op) - id.kronecker(&j.op_dag_op).scale(0.5)
                - j.op_dag_op.transpose().kronecker(&id).scale(0.5))
                * g;
        }
        s
    }
}

fn check_state(sys: &NonHermitianSystem, rho: &DensityMatrix) -> Result<()> {
    if sys.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: rho.dim() });
    }
    Ok(())
}

/// Non-Hermitian part of `D`, applied to a unit-trace Hermitian matrix.
pub(crate) fn nh_part(sys: &NonHermitianSystem, rho: &CMatrix) -> CMatrix {
    let g = sys.gamma().matrix();
    let mean_gamma = re_trace_product(g, rho);
    commutator(sys.h().matrix(), rho) * (-I) + anticommutator(g, rho) - rho.scale(2.0 * mean_gamma)
}

/// `−i[H, ρ] + {Γ, ρ} − 2⟨Γ⟩ρ`: Hermitian and traceless.
pub fn nh_generator(sys: &NonHermitianSystem, rho: &DensityMatrix) -> Result<HermitianOperator> {
    check_state(sys, rho)?;
    HermitianOperator::from_hermitian_part(&nh_part(sys, rho.matrix()))
}

/// Davies dissipator `L_D ρ` for the Hermitian part of `sys`.
pub fn davies_dissipator(sys: &NonHermitianSystem, bath: &BathSpec, rho: &DensityMatrix) -> Result<HermitianOperator> {
    check_state(sys, rho)?;
    let ld = DaviesDissipator::new(sys.h(), bath)?;
    HermitianOperator::from_hermitian_part(&ld.apply(rho.matrix()))
}

/// The full generator `D = D_NH + L_D` for a frozen system and bath.
#[derive(Clone, Debug)]
pub struct Generator {
    system: NonHermitianSystem,
    dissipator: DaviesDissipator,
}

impl Generator {
    /// Builds the Davies decomposition for `sys.h()` under `bath`.
    pub fn new(sys: &NonHermitianSystem, bath: &BathSpec) -> Result<Self> {
        Ok(Self { system: sys.clone(), dissipator: DaviesDissipator::new(sys.h(), bath)? })
    }

    /// The underlying system.
    pub fn system(&self) -> &NonHermitianSystem {
        &self.system
    }

    /// The dissipator.
    pub fn dissipator(&self) -> &DaviesDissipator {
        &self.dissipator
    }

    /// `Dρ` for a unit-trace Hermitian matrix, returned Hermitian.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        hermitian_part(&(nh_part(&self.system, rho) + self.dissipator.apply(rho)))
    }

    /// `Dρ` for a validated state.
    pub fn rate(&self, rho: &DensityMatrix) -> Result<HermitianOperator> {
        check_state(&self.system, rho)?;
        HermitianOperator::from_hermitian_part(&self.apply(rho.matrix()))
    }

    /// Linear unnormalized generator `𝓛x = −i(H_NH x − x H_NH†) + L_D x`.
    pub fn apply_linear(&self, x: &CMatrix) -> CMatrix {
        let hnh = self.system.hamiltonian();
        (&hnh * x - x * hnh.adjoint()) * (-I) + self.dissipator.apply(x)
    }

    /// Matrix of `𝓛` acting on column-stacked vectors.
    pub fn superoperator(&self) -> CMatrix {
        let d = self.system.dim();
        let id = CMatrix::identity(d, d);
        let hnh = self.system.hamiltonian();
        (id.kronecker(&hnh) - hnh.conjugate().kronecker(&id)) * (-I) + self.dissipator.superoperator()
    }
}

/// Column-stacked vectorization of a square matrix.
pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &nalgebra::DVector<C64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}
