//! Thermodynamic and information-theoretic accounting along non-Hermitian
//! evolutions: internal energy, heat and work rates, entropy production, the
//! thermal Hamiltonian `H_T`, the non-Hermitian potential `V_NH`, the
//! information content `I_NH`, the information flow `J_S`, and the master
//! inequality relating them.

use std::io::Write;

use crate::csv::{write_csv, Field};
use crate::dynamics::{steady_state, steady_state_from, BathSpec, Generator, NonHermitianSystem, Protocol, SteadyStateOptions, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{derivative, fd_weights, stencil, trapezoid_with_error};
use crate::operators::{
    delta_operator, log_partition, log_psd, re_trace_product, trace_distance, von_neumann_entropy, CMatrix, DensityMatrix,
    HermitianOperator, EIG_CLAMP,
};

/// Default tolerance of the first-law and quadrature checks.
pub const ACCOUNTING_TOL: f64 = 1e-6;

/// `U = tr(Hρ)`; independent of `Γ`.
pub fn internal_energy(sys: &NonHermitianSystem, rho: &DensityMatrix) -> Result<f64> {
    sys.h().expect(rho)
}

/// `Ṡ = −tr(ρ̇ ln ρ)` with the clamped logarithm.
pub fn entropy_rate(rho: &DensityMatrix, rho_dot: &CMatrix) -> Result<f64> {
    let ln_rho = log_psd(rho, EIG_CLAMP)?;
    Ok(-re_trace_product(rho_dot, ln_rho.matrix()))
}

/// `Σ̇ = Ṡ − βQ̇` with `Ṡ = −tr(ρ̇ ln ρ)` and `Q̇ = tr(Hρ̇)`.
pub fn entropy_production_rate(beta: f64, rho: &DensityMatrix, rho_dot: &CMatrix, q_rate: f64) -> Result<f64> {
    Ok(entropy_rate(rho, rho_dot)? - beta * q_rate)
}

/// Thermal Hamiltonian and non-Hermitian potential of a steady state.
#[derive(Clone, Debug)]
pub struct ThermalDecomposition {
    /// `H_T = −(1/β)(ln σ + ln tr e^{−βH})`.
    pub h_t: HermitianOperator,
    /// `V_NH = β(H_T − H)`.
    pub v_nh: HermitianOperator,
    /// Inverse temperature used.
    pub beta: f64,
    /// The steady state the decomposition was built from.
    pub sigma: DensityMatrix,
}

impl ThermalDecomposition {
    /// Decomposition of a given steady state `σ` of `sys` at inverse temperature `β`.
    pub fn from_steady_state(sys: &NonHermitianSystem, beta: f64, sigma: DensityMatrix) -> Result<Self> {
        let ln_z = log_partition(sys.h(), beta)?;
        let ln_sigma = log_psd(&sigma, EIG_CLAMP)?;
        let shifted = &ln_sigma + &HermitianOperator::identity(sys.dim()).scaled(ln_z);
        let h_t = shifted.scaled(-1.0 / beta);
        let v_nh = (&h_t - sys.h()).scaled(beta);
        Ok(Self { h_t, v_nh, beta, sigma })
    }

    /// Decomposition of a Hermitian system, whose steady state is the Gibbs state.
    pub fn hermitian(h: &HermitianOperator, beta: f64) -> Result<Self> {
        let sys = NonHermitianSystem::hermitian(h.clone());
        Self::from_steady_state(&sys, beta, DensityMatrix::gibbs(h, beta)?)
    }

    /// `e^{−βH_T}/tr e^{−βH_T}`, which reproduces σ.
    pub fn reconstructed_sigma(&self) -> Result<DensityMatrix> {
        DensityMatrix::gibbs(&self.h_t, self.beta)
    }
}

/// Solves for σ and decomposes it. A Hermitian system relaxes to the Gibbs
/// state exactly, which is used directly so that `V_NH` and `J_S` vanish to
/// rounding rather than to the steady-state solver tolerance.
pub fn thermal_decomposition(sys: &NonHermitianSystem, bath: &BathSpec, opts: &SteadyStateOptions) -> Result<ThermalDecomposition> {
    if sys.is_hermitian() && bath.kappa() > 0.0 {
        return ThermalDecomposition::hermitian(sys.h(), bath.beta());
    }
    let sigma = steady_state(sys, bath, opts)?;
    ThermalDecomposition::from_steady_state(sys, bath.beta(), sigma)
}

/// `I_NH = −tr(V_NH ρ)`.
pub fn nh_information(rho: &DensityMatrix, dec: &ThermalDecomposition) -> Result<f64> {
    Ok(-dec.v_nh.expect(rho)?)
}

/// Operator ordering inside `Re⟨(ln σ − ln ρ)(Γ − ⟨Γ⟩)⟩`.
///
/// For Hermitian `ρ`, `A`, `B` the identity `Re tr(ρAB) = Re tr(ρBA)` makes
/// both orderings agree; the flag exists to demonstrate it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ordering {
    /// `Re tr[ρ (ln σ − ln ρ)(Γ − ⟨Γ⟩)]`.
    #[default]
    Plain,
    /// `Re tr[ρ ½{ln σ − ln ρ, Γ − ⟨Γ⟩}]`.
    Symmetrized,
}

/// Terms of `J_S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InformationFlow {
    /// `tr(V_NH ρ̇)`.
    pub potential: f64,
    /// `Re⟨2(ln σ − ln ρ)(Γ − ⟨Γ⟩)⟩_ρ`.
    pub dissipative: f64,
    /// `⟨Δ⟩_ρ` with `Δ = dlog_σ(i[H, σ])`.
    pub delta: f64,
}

impl InformationFlow {
    /// `J_S` itself.
    pub fn total(&self) -> f64 {
        self.potential + self.dissipative + self.delta
    }

    /// The part of the `I_diss` integrand not involving `V̇_NH`.
    pub fn irreversible(&self) -> f64 {
        self.dissipative + self.delta
    }
}

fn gamma_log_term(sys: &NonHermitianSystem, rho: &DensityMatrix, sigma: &DensityMatrix, ordering: Ordering) -> Result<f64> {
    let ln_diff = &log_psd(sigma, EIG_CLAMP)? - &log_psd(rho, EIG_CLAMP)?;
    let mean_g = sys.gamma().expect(rho)?;
    let centered = sys.gamma() - &HermitianOperator::identity(sys.dim()).scaled(mean_g);
    let a = ln_diff.matrix();
    let b = centered.matrix();
    let prod = match ordering {
        Ordering::Plain => a * b,
        Ordering::Symmetrized => (a * b + b * a).scale(0.5),
    };
    Ok(2.0 * re_trace_product(rho.matrix(), &prod))
}

/// Term-by-term `J_S = tr V_NH ρ̇ + Re⟨2(ln σ − ln ρ)(Γ − ⟨Γ⟩) + Δ⟩_ρ`, with
/// `ρ̇ = Dρ` evaluated for the frozen `sys` and `bath`.
pub fn information_flow_terms(
    sys: &NonHermitianSystem,
    bath: &BathSpec,
    rho: &DensityMatrix,
    dec: &ThermalDecomposition,
    ordering: Ordering,
) -> Result<InformationFlow> {
    let rho_dot = Generator::new(sys, bath)?.apply(rho.matrix());
    information_flow_with_rate(sys, rho, &rho_dot, dec, ordering)
}

fn information_flow_with_rate(
    sys: &NonHermitianSystem,
    rho: &DensityMatrix,
    rho_dot: &CMatrix,
    dec: &ThermalDecomposition,
    ordering: Ordering,
) -> Result<InformationFlow> {
    let potential = re_trace_product(dec.v_nh.matrix(), rho_dot);
    let dissipative = gamma_log_term(sys, rho, &dec.sigma, ordering)?;
    let delta = delta_operator(&dec.sigma, sys.h(), EIG_CLAMP)?.expect(rho)?;
    Ok(InformationFlow { potential, dissipative, delta })
}

/// `J_S` for the frozen `sys` and `bath` (plain ordering).
pub fn information_flow(sys: &NonHermitianSystem, bath: &BathSpec, rho: &DensityMatrix, dec: &ThermalDecomposition) -> Result<f64> {
    Ok(information_flow_terms(sys, bath, rho, dec, Ordering::Plain)?.total())
}

/// Both sides of the master inequality and their difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterInequality {
    /// `tr((ln σ − ln ρ) Dρ)`.
    pub lhs: f64,
    /// `Re⟨2(ln σ − ln ρ)(Γ − ⟨Γ⟩) + Δ⟩_ρ`.
    pub rhs: f64,
    /// `lhs − rhs`; the inequality claims it is non-negative.
    pub slack: f64,
}

/// Evaluates the master inequality at `ρ` given the steady state σ; a
/// violation is reported through a negative slack, never thrown.
pub fn check_master_inequality(
    sys: &NonHermitianSystem,
    bath: &BathSpec,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<MasterInequality> {
    let rho_dot = Generator::new(sys, bath)?.apply(rho.matrix());
    let ln_diff = &log_psd(sigma, EIG_CLAMP)? - &log_psd(rho, EIG_CLAMP)?;
    let lhs = re_trace_product(ln_diff.matrix(), &rho_dot);
    let rhs = gamma_log_term(sys, rho, sigma, Ordering::Plain)? + delta_operator(sigma, sys.h(), EIG_CLAMP)?.expect(rho)?;
    Ok(MasterInequality { lhs, rhs, slack: lhs - rhs })
}

/// `(Q̇, Ẇ) = (tr Hρ̇, tr Ḣρ)` at every sample of a trajectory of `protocol`.
pub fn heat_work_rates(protocol: &dyn Protocol, bath: &BathSpec, traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj.times.len() != traj.states.len() {
        return Err(Error::invalid("trajectory", "times and states differ in length"));
    }
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, rho)| {
            let sys = protocol.system_at(t);
            if sys.dim() != rho.dim() {
                return Err(Error::DimensionMismatch { expected: sys.dim(), found: rho.dim() });
            }
            let rho_dot = Generator::new(&sys, bath)?.apply(rho.matrix());
            let q = re_trace_product(sys.h().matrix(), &rho_dot);
            let w = protocol.hamiltonian_rate(t).expect(rho)?;
            Ok((q, w))
        })
        .collect()
}

/// Largest `|dU/dt − Q̇ − Ẇ|` over a trajectory, with `dU/dt` from
/// fourth-order finite differences of `U(t)` on the sample grid.
pub fn first_law_residual(protocol: &dyn Protocol, bath: &BathSpec, traj: &Trajectory) -> Result<f64> {
    let rates = heat_work_rates(protocol, bath, traj)?;
    let u: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, r)| internal_energy(&protocol.system_at(t), r))
        .collect::<Result<_>>()?;
    let du = derivative(&traj.times, &u);
    Ok(du.iter().zip(&rates).map(|(d, (q, w))| (d - q - w).abs()).fold(0.0, f64::max))
}

/// One row of a [`ThermoLedger`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ThermoSample {
    /// Time.
    pub t: f64,
    /// Internal energy `tr Hρ`.
    pub u: f64,
    /// Von Neumann entropy.
    pub s: f64,
    /// Heat current `tr Hρ̇`.
    pub q_rate: f64,
    /// Power `tr Ḣρ`.
    pub w_rate: f64,
    /// Entropy production rate `Ṡ − βQ̇`.
    pub sigma_rate: f64,
    /// Information flow.
    pub j_s: f64,
    /// Non-Hermitian information content `−tr V_NH ρ`.
    pub i_nh: f64,
    /// `Re⟨2(ln σ − ln ρ)(Γ − ⟨Γ⟩) + Δ⟩_ρ`.
    pub irreversible: f64,
    /// `⟨V̇_NH⟩_ρ` from finite differences of `V_NH` along the grid.
    pub v_dot: f64,
    /// Trace distance between ρ and the instantaneous steady state σ.
    pub lag: f64,
}

/// Time series of thermodynamic quantities along a protocol.
#[derive(Clone, Debug, Default)]
pub struct ThermoLedger {
    /// Samples in time order.
    pub samples: Vec<ThermoSample>,
}

/// CSV columns of [`ThermoLedger::write_csv`].
pub const LEDGER_COLUMNS: [&str; 8] = ["t", "U", "S", "Q_rate", "W_rate", "Sigma_rate", "J_S", "I_NH"];

impl ThermoSample {
    /// Values in [`LEDGER_COLUMNS`] order.
    pub fn fields(&self) -> Vec<Field> {
        [self.t, self.u, self.s, self.q_rate, self.w_rate, self.sigma_rate, self.j_s, self.i_nh]
            .into_iter()
            .map(Field::Num)
            .collect()
    }
}

impl ThermoLedger {
    /// CSV export with [`LEDGER_COLUMNS`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &LEDGER_COLUMNS, self.samples.iter().map(ThermoSample::fields))
    }

    /// Sample times.
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Smallest entropy production rate.
    pub fn min_sigma_rate(&self) -> f64 {
        self.samples.iter().map(|s| s.sigma_rate).fold(f64::INFINITY, f64::min)
    }

    /// Largest ρ–σ trace distance.
    pub fn max_lag(&self) -> f64 {
        self.samples.iter().map(|s| s.lag).fold(0.0, f64::max)
    }
}

/// Builds the ledger of a trajectory of `protocol`, solving for the
/// instantaneous steady state at every sample (warm-started from the previous
/// sample; exact Gibbs state whenever the system is Hermitian).
pub fn thermo_ledger(
    protocol: &dyn Protocol,
    bath: &BathSpec,
    traj: &Trajectory,
    opts: &SteadyStateOptions,
) -> Result<ThermoLedger> {
    let beta = bath.beta();
    let mut samples = Vec::with_capacity(traj.len());
    let mut potentials: Vec<HermitianOperator> = Vec::with_capacity(traj.len());
    let mut prev_sigma: Option<DensityMatrix> = None;
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let sys = protocol.system_at(t);
        let dec = if sys.is_hermitian() {
            ThermalDecomposition::hermitian(sys.h(), beta)?
        } else {
            let sigma = match &prev_sigma {
                Some(g) => steady_state_from(&sys, bath, g, opts)?,
                None => steady_state(&sys, bath, opts)?,
            };
            ThermalDecomposition::from_steady_state(&sys, beta, sigma)?
        };
        let rho_dot = Generator::new(&sys, bath)?.apply(rho.matrix());
        let q_rate = re_trace_product(sys.h().matrix(), &rho_dot);
        let w_rate = protocol.hamiltonian_rate(t).expect(rho)?;
        let flow = information_flow_with_rate(&sys, rho, &rho_dot, &dec, Ordering::Plain)?;
        samples.push(ThermoSample {
            t,
            u: internal_energy(&sys, rho)?,
            s: von_neumann_entropy(rho)?,
            q_rate,
            w_rate,
            sigma_rate: entropy_production_rate(beta, rho, &rho_dot, q_rate)?,
            j_s: flow.total(),
            i_nh: nh_information(rho, &dec)?,
            irreversible: flow.irreversible(),
            v_dot: 0.0,
            lag: trace_distance(rho, &dec.sigma)?,
        });
        potentials.push(dec.v_nh.clone());
        prev_sigma = Some(dec.sigma);
    }
    let ts = traj.times.as_slice();
    let n = ts.len();
    for k in 0..if n >= 2 { n } else { 0 } {
        let r = stencil(k, n);
        let w = fd_weights(ts[k], &ts[r.clone()], 1);
        let mut vdot = CMatrix::zeros(potentials[k].dim(), potentials[k].dim());
        for (wi, v) in w.iter().zip(&potentials[r]) {
            vdot += v.matrix().scale(*wi);
        }
        samples[k].v_dot = re_trace_product(&vdot, traj.states[k].matrix());
    }
    Ok(ThermoLedger { samples })
}

/// The three information integrals over a protocol segment.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct InformationBalance {
    /// `I_S = −∫ J_S dt`.
    pub i_s: f64,
    /// `I_NH(end) − I_NH(start)`.
    pub delta_i_nh: f64,
    /// `∫ (Re⟨2(ln σ − ln ρ)(Γ − ⟨Γ⟩) + Δ⟩ − ⟨V̇_NH⟩) dt`.
    pub i_diss: f64,
    /// `|I_S − (ΔI_NH − I_diss)|`.
    pub residual: f64,
    /// Richardson estimate of the quadrature error.
    pub quadrature_error: f64,
}

/// Integrates the ledger into `(I_S, ΔI_NH, I_diss)`; fails with a resolution
/// error if the quadrature error estimate or the balance residual exceeds `tol`.
pub fn total_information_flow(ledger: &ThermoLedger, tol: f64) -> Result<InformationBalance> {
    let s = &ledger.samples;
    if s.len() < 2 {
        return Err(Error::Resolution("ledger needs at least two samples".into()));
    }
    let ts = ledger.times();
    let neg_js: Vec<f64> = s.iter().map(|x| -x.j_s).collect();
    let diss: Vec<f64> = s.iter().map(|x| x.irreversible - x.v_dot).collect();
    let (i_s, e1) = trapezoid_with_error(&ts, &neg_js);
    let (i_diss, e2) = trapezoid_with_error(&ts, &diss);
    let delta_i_nh = s[s.len() - 1].i_nh - s[0].i_nh;
    let residual = (i_s - (delta_i_nh - i_diss)).abs();
    let quadrature_error = e1.max(e2);
    let out = InformationBalance { i_s, delta_i_nh, i_diss, residual, quadrature_error };
    if quadrature_error > tol || residual > tol {
        return Err(Error::Resolution(format!(
            "information balance: quadrature error {quadrature_error:.3e}, residual {residual:.3e} (tolerance {tol:.1e})"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolveControls, Schedule};
    use crate::operators::pauli::*;
    use crate::operators::{relative_entropy, C64};
    use crate::random::{random_density, random_hermitian, rng_from_seed};

    fn two_level(gamma: f64, t: f64, kappa: f64) -> (NonHermitianSystem, BathSpec) {
        (NonHermitianSystem::two_level(gamma), BathSpec::two_level(t, kappa).unwrap())
    }

    #[test]
    fn internal_energy_examples() {
        let sys = NonHermitianSystem::hermitian(sigma_x());
        assert!(internal_energy(&sys, &DensityMatrix::maximally_mixed(2)).unwrap().abs() < 1e-15);
        let plus = DensityMatrix::pure(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0); 2])).unwrap();
        assert!((internal_energy(&sys, &plus).unwrap() - 1.0).abs() < 1e-14);
        let other = NonHermitianSystem::two_level(0.8);
        assert_eq!(internal_energy(&other, &plus).unwrap(), internal_energy(&sys, &plus).unwrap());
    }

    #[test]
    fn decomposition_invariants_and_information_identity() {
        let (sys, bath) = two_level(0.5, 100.0, 0.005);
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        let recon = dec.reconstructed_sigma().unwrap();
        assert!((recon.matrix() - dec.sigma.matrix()).norm() < 1e-8);
        let v_expected = (&dec.h_t - sys.h()).scaled(dec.beta);
        assert_eq!(v_expected, dec.v_nh);
        let i = nh_information(&dec.sigma, &dec).unwrap();
        let g = DensityMatrix::gibbs(sys.h(), bath.beta()).unwrap();
        assert!((i - relative_entropy(&dec.sigma, &g).unwrap()).abs() < 1e-8);
        assert!((i - 0.1308).abs() < 0.01);

        // V_NH ≈ −artanh(γ)·σz with small off-diagonal part.
        let c = 0.5f64.atanh();
        let v = dec.v_nh.matrix();
        assert!(((v[(0, 0)].re - v[(1, 1)].re) / 2.0 + c).abs() < 0.05 * c);
        assert!(v[(0, 1)].norm() < 0.05 * c);
    }

    #[test]
    fn hermitian_limit_has_no_potential_and_no_flow() {
        let mut rng = rng_from_seed(31);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let sys = NonHermitianSystem::hermitian(h);
        let bath = BathSpec::site_projectors(3, 0.5, 0.02).unwrap();
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        assert!(dec.v_nh.norm() < 1e-8);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 3);
            assert!(information_flow(&sys, &bath, &rho, &dec).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn information_flow_zero_at_steady_state_and_sign_indefinite() {
        let (sys, bath) = two_level(0.5, 100.0, 0.005);
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        assert!(information_flow(&sys, &bath, &dec.sigma, &dec).unwrap().abs() < 1e-9);
        let mut rng = rng_from_seed(77);
        let (mut pos, mut neg) = (false, false);
        for _ in 0..200 {
            let j = information_flow(&sys, &bath, &random_density(&mut rng, 2), &dec).unwrap();
            pos |= j > 0.0;
            neg |= j < 0.0;
        }
        assert!(pos && neg);
    }

    /// Independent dense evaluation of each term at the maximally mixed state.
    #[test]
    fn information_flow_matches_term_by_term_oracle() {
        let (sys, bath) = two_level(0.5, 100.0, 0.005);
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        // ρ̇ for ρ = I/2: −i[H, I/2] = 0, {Γ, I/2} − 2⟨Γ⟩ I/2 = Γ, plus L_D(I/2).
        let ld = crate::dynamics::davies_dissipator(&sys, &bath, &rho).unwrap();
        let rho_dot = sys.gamma().matrix() + ld.matrix();
        let potential = (dec.v_nh.matrix() * &rho_dot).trace().re;
        // ln ρ = −ln2·I and ⟨Γ⟩ = 0, so the term is Re tr(ln σ · Γ) + ln 2 · tr Γ.
        let ln_sigma = dec.sigma.as_operator().map_spectrum(f64::ln).unwrap();
        let dissipative = 2.0 * 0.5 * (ln_sigma.matrix() * sys.gamma().matrix()).trace().re;
        // Δ = i[H, ln σ]; ⟨Δ⟩ at I/2 is half its trace, i.e. zero.
        let delta = 0.0;
        let oracle = potential + dissipative + delta;
        let j = information_flow(&sys, &bath, &rho, &dec).unwrap();
        assert!((j - oracle).abs() < 1e-9, "{j} vs {oracle}");
    }

    #[test]
    fn orderings_coincide() {
        let mut rng = rng_from_seed(12);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let g = random_hermitian(&mut rng, 3, 0.3);
        let sys = NonHermitianSystem::new(h, g).unwrap();
        let bath = BathSpec::site_projectors(3, 1.0, 0.05).unwrap();
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        let rho = random_density(&mut rng, 3);
        let a = information_flow_terms(&sys, &bath, &rho, &dec, Ordering::Plain).unwrap();
        let b = information_flow_terms(&sys, &bath, &rho, &dec, Ordering::Symmetrized).unwrap();
        assert!((a.dissipative - b.dissipative).abs() < 1e-14);
    }

    #[test]
    fn master_inequality_equality_at_sigma_and_spohn_limit() {
        let (sys, bath) = two_level(0.7, 2.0, 0.05);
        let sigma = steady_state(&sys, &bath, &Default::default()).unwrap();
        let m = check_master_inequality(&sys, &bath, &sigma, &sigma).unwrap();
        assert!(m.slack.abs() < 1e-8);

        let mut rng = rng_from_seed(41);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let sys = NonHermitianSystem::hermitian(h);
        let bath = BathSpec::site_projectors(3, 1.0, 0.05).unwrap();
        let sigma = steady_state(&sys, &bath, &Default::default()).unwrap();
        for _ in 0..50 {
            let m = check_master_inequality(&sys, &bath, &random_density(&mut rng, 3), &sigma).unwrap();
            assert!(m.rhs.abs() < 1e-9);
            assert!(m.slack >= -1e-10);
        }
    }

    #[test]
    fn static_rates_and_first_law() {
        let (sys, bath) = two_level(0.4, 1.0, 0.05);
        let traj = evolve(&sys, &bath, &DensityMatrix::maximally_mixed(2), 20.0, &EvolveControls::default()).unwrap();
        let rates = heat_work_rates(&sys, &bath, &traj).unwrap();
        assert!(rates.iter().all(|(_, w)| *w == 0.0));
        assert!(first_law_residual(&sys, &bath, &traj).unwrap() < ACCOUNTING_TOL);

        let unitary = NonHermitianSystem::hermitian(sigma_x());
        let closed = BathSpec::two_level(1.0, 0.0).unwrap();
        let rho0 = DensityMatrix::diagonal(&[0.8, 0.2]).unwrap();
        let traj = evolve(&unitary, &closed, &rho0, 5.0, &EvolveControls::default()).unwrap();
        let rates = heat_work_rates(&unitary, &closed, &traj).unwrap();
        assert!(rates.iter().all(|(q, _)| q.abs() < 1e-12));
    }

    #[test]
    fn driven_first_law() {
        let bath = BathSpec::two_level(1.0, 0.05).unwrap();
        let p = Schedule(|t: f64| NonHermitianSystem::new(&sigma_x() + &sigma_z().scaled(0.3 * t.sin()), sigma_y().scaled(0.2)).unwrap());
        let traj = evolve(&p, &bath, &DensityMatrix::maximally_mixed(2), 10.0, &EvolveControls::default()).unwrap();
        let r = first_law_residual(&p, &bath, &traj).unwrap();
        assert!(r < ACCOUNTING_TOL, "{r}");
    }

    #[test]
    fn steady_state_has_zero_entropy_production() {
        let (sys, bath) = two_level(0.5, 10.0, 0.01);
        let dec = thermal_decomposition(&sys, &bath, &Default::default()).unwrap();
        let rho_dot = Generator::new(&sys, &bath).unwrap().apply(dec.sigma.matrix());
        let q = re_trace_product(sys.h().matrix(), &rho_dot);
        assert!(entropy_production_rate(bath.beta(), &dec.sigma, &rho_dot, q).unwrap().abs() < 1e-8);
    }

    #[test]
    fn hermitian_protocol_has_trivial_information_balance() {
        let bath = BathSpec::two_level(1.0, 0.05).unwrap();
        let p = Schedule(|t: f64| NonHermitianSystem::hermitian(&sigma_x() + &sigma_z().scaled(0.01 * t)));
        let traj = evolve(&p, &bath, &DensityMatrix::maximally_mixed(2), 20.0, &EvolveControls::default()).unwrap();
        let ledger = thermo_ledger(&p, &bath, &traj, &Default::default()).unwrap();
        let b = total_information_flow(&ledger, ACCOUNTING_TOL).unwrap();
        assert!(b.i_s.abs() < 1e-8 && b.delta_i_nh.abs() < 1e-8 && b.i_diss.abs() < 1e-8);
    }

    #[test]
    fn ledger_csv_header() {
        let mut buf = Vec::new();
        ThermoLedger::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,U,S,Q_rate,W_rate,Sigma_rate,J_S,I_NH\n");
    }
}
