//! Adaptive time integration of `dρ/dt = D_t ρ` for static or scheduled systems.
//!
//! Two integrators are offered:
//! * [`Integrator::DormandPrince`]: embedded Runge–Kutta 5(4) on the nonlinear
//!   equation, with symmetrization and trace renormalization per accepted step.
//! * [`Integrator::Magnus4`]: fourth-order commutator-free Magnus exponential
//!   integrator on the linear unnormalized equation, followed by normalization.
//!   Because `D` is linear-then-normalize this is exact for frozen generators
//!   and takes steps far beyond the fastest Bohr period.

use std::io::Write;

use nalgebra::DVector;

use crate::csv::{write_csv, Field};
use crate::dynamics::generator::{unvectorize, vectorize, Generator};
use crate::dynamics::system::{BathSpec, NonHermitianSystem};
use crate::error::{Error, Result};
use crate::operators::{expm, hermitian_part, trace, CMatrix, DensityMatrix, HermitianOperator, C64, TRACE_TOL};

/// A (possibly time-dependent) schedule of non-Hermitian systems.
pub trait Protocol: Sync {
    /// The system at time `t`.
    fn system_at(&self, t: f64) -> NonHermitianSystem;

    /// `dH/dt` at time `t`; the default is a central finite difference.
    fn hamiltonian_rate(&self, t: f64) -> HermitianOperator {
        let h = 1e-6 * t.abs().max(1.0);
        let plus = self.system_at(t + h);
        let minus = self.system_at(t - h);
        (plus.h() - minus.h()).scaled(0.5 / h)
    }

    /// Whether the system is time independent (enables generator caching).
    fn is_static(&self) -> bool {
        false
    }
}

impl Protocol for NonHermitianSystem {
    fn system_at(&self, _t: f64) -> NonHermitianSystem {
        self.clone()
    }

    fn hamiltonian_rate(&self, _t: f64) -> HermitianOperator {
        HermitianOperator::zeros(self.dim())
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// A schedule given by a closure `t ↦ system`.
pub struct Schedule<F>(pub F);

impl<F: Fn(f64) -> NonHermitianSystem + Sync> Protocol for Schedule<F> {
    fn system_at(&self, t: f64) -> NonHermitianSystem {
        (self.0)(t)
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Adaptive Dormand–Prince 5(4).
    DormandPrince,
    /// Adaptive commutator-free Magnus exponential integrator of order 4.
    Magnus4,
}

/// Tolerances and limits of [`evolve`].
#[derive(Clone, Debug)]
pub struct EvolveControls {
    /// Integration scheme.
    pub integrator: Integrator,
    /// Relative local error tolerance.
    pub rtol: f64,
    /// Absolute local error tolerance.
    pub atol: f64,
    /// First trial step; chosen from `‖Dρ₀‖` when absent.
    pub initial_step: Option<f64>,
    /// Largest step allowed.
    pub max_step: f64,
    /// Abort after this many attempted steps.
    pub max_steps: usize,
    /// Most negative eigenvalue tolerated before aborting.
    pub positivity_tol: f64,
    /// Record every n-th accepted step (the final time is always recorded).
    pub record_every: usize,
}

impl Default for EvolveControls {
    fn default() -> Self {
        Self {
            integrator: Integrator::DormandPrince,
            rtol: 1e-9,
            atol: 1e-12,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
            positivity_tol: 1e-6,
            record_every: 1,
        }
    }
}

impl EvolveControls {
    /// Default controls with the Magnus integrator.
    pub fn magnus() -> Self {
        Self { integrator: Integrator::Magnus4, ..Self::default() }
    }
}

/// Sampled solution of an evolution.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    /// Strictly increasing sample times.
    pub times: Vec<f64>,
    /// States at the sample times.
    pub states: Vec<DensityMatrix>,
    /// `‖Dρ‖_F` at each sample.
    pub generator_norms: Vec<f64>,
}

impl Trajectory {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether no sample was recorded.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last recorded state.
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// Last recorded time.
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial sample")
    }

    /// Largest `|tr ρ − 1|` over the samples.
    pub fn max_trace_error(&self) -> f64 {
        self.states.iter().map(|s| (trace(s.matrix()).re - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Appends another trajectory whose first sample duplicates this one's last.
    pub fn append(&mut self, other: Trajectory) {
        let skip = usize::from(!self.is_empty() && other.times.first() == self.times.last());
        self.times.extend(other.times.into_iter().skip(skip));
        self.states.extend(other.states.into_iter().skip(skip));
        self.generator_norms.extend(other.generator_norms.into_iter().skip(skip));
    }

    /// CSV export: `t`, row-major `re_ij, im_ij` entries, `generator_norm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.states.first().map_or(0, DensityMatrix::dim);
        let mut header = vec!["t".to_string()];
        for i in 0..d {
            for j in 0..d {
                header.push(format!("re_{i}{j}"));
                header.push(format!("im_{i}{j}"));
            }
        }
        header.push("generator_norm".to_string());
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self.times.iter().zip(&self.states).zip(&self.generator_norms).map(|((&t, s), &g)| {
            let mut row = vec![Field::Num(t)];
            for i in 0..d {
                for j in 0..d {
                    let z = s.matrix()[(i, j)];
                    row.push(Field::Num(z.re));
                    row.push(Field::Num(z.im));
                }
            }
            row.push(Field::Num(g));
            row
        });
        write_csv(w, &header_refs, rows)
    }
}

/// Evolves `ρ₀` under `protocol` from `t = 0` to `t_final`.
pub fn evolve(
    protocol: &dyn Protocol,
    bath: &BathSpec,
    rho0: &DensityMatrix,
    t_final: f64,
    controls: &EvolveControls,
) -> Result<Trajectory> {
    evolve_span(protocol, bath, rho0, 0.0, t_final, controls)
}

/// Evolves `ρ(t0) = ρ₀` under `protocol` on `[t0, t1]`.
pub fn evolve_span(
    protocol: &dyn Protocol,
    bath: &BathSpec,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    controls: &EvolveControls,
) -> Result<Trajectory> {
    if !(t1 > t0) || !t1.is_finite() {
        return Err(Error::param("t_final", format!("need t_final > t_start, got [{t0}, {t1}]")));
    }
    if !(controls.rtol > 0.0 && controls.atol >= 0.0 && controls.max_step > 0.0 && controls.record_every >= 1) {
        return Err(Error::param("controls", "tolerances and max_step must be positive, record_every ≥ 1"));
    }
    let dim = protocol.system_at(t0).dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho0.dim() });
    }
    bath.check_dim(dim)?;
    let stepper = Stepper::new(protocol, bath)?;
    let mut traj = Trajectory::default();
    let mut rho = rho0.matrix().clone();
    let mut t = t0;
    traj.times.push(t);
    traj.states.push(rho0.clone());
    traj.generator_norms.push(stepper.generator(t)?.apply(&rho).norm());

    let f0 = stepper.generator(t)?.apply(&rho).norm();
    let span = t1 - t0;
    let mut h = controls
        .initial_step
        .unwrap_or_else(|| if f0 > 0.0 { (0.01 / f0).min(0.01 * span) } else { 0.01 * span })
        .min(controls.max_step)
        .min(span);
    let mut accepted = 0usize;
    for _ in 0..controls.max_steps {
        // A remainder much smaller than the step is absorbed into it, so the
        // endpoint is never recorded twice a rounding error apart.
        let last = t + h >= t1 - 1e-3 * h - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        let floor = 1e-14 * t.abs().max(1.0);
        if h < floor {
            return Err(Error::StepUnderflow { t, h });
        }
        let (candidate, err) = match controls.integrator {
            Integrator::DormandPrince => stepper.dopri_step(t, h, &rho, controls)?,
            Integrator::Magnus4 => stepper.magnus_step(t, h, &rho, controls)?,
        };
        if err.is_finite() && err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            let state = finalize_state(&candidate, t_new, controls.positivity_tol)?;
            rho = state.matrix().clone();
            t = t_new;
            accepted += 1;
            if last || accepted % controls.record_every == 0 {
                traj.times.push(t);
                traj.generator_norms.push(stepper.generator(t)?.apply(&rho).norm());
                traj.states.push(state);
            }
            if last {
                return Ok(traj);
            }
            let factor = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
            h = (h * factor).min(controls.max_step).min(stepper.step_cap(t)?);
        } else {
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
            h *= factor;
        }
    }
    Err(Error::NonConvergence { solver: "evolve", iterations: controls.max_steps, residual: t1 - t })
}

fn finalize_state(m: &CMatrix, t: f64, positivity_tol: f64) -> Result<DensityMatrix> {
    let h = hermitian_part(m);
    let tr = trace(&h).re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::PositivityViolation { t, min_eigenvalue: f64::NAN });
    }
    let normalized = h.unscale(tr);
    let op = HermitianOperator::from_hermitian_part(&normalized)?;
    let min = op.eig()?.values[0];
    if min < -positivity_tol {
        return Err(Error::PositivityViolation { t, min_eigenvalue: min });
    }
    let state = match DensityMatrix::new(normalized.clone()) {
        Ok(s) => s,
        Err(_) => DensityMatrix::project(&normalized)?,
    };
    debug_assert!((trace(state.matrix()).re - 1.0).abs() < TRACE_TOL);
    Ok(state)
}

/// Caches generators for static protocols and evaluates them on demand otherwise.
struct Stepper<'a> {
    protocol: &'a dyn Protocol,
    bath: &'a BathSpec,
    cached: Option<(Generator, CMatrix)>,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Scaled local error (≤ 1 accepts the step).
///
/// Dormand–Prince uses the classical per-entry scale
/// `atol + rtol·max(|y₀ᵢ|, |y₁ᵢ|)`, which keeps near-steady states and
/// sample-grid energy balances accurate. The Magnus scheme, used on long
/// strongly oscillating protocols, scales by the size of the whole state
/// instead: density-matrix entries are bounded by one, and per-entry scaling
/// would let vanishing coherences dictate the step size.
fn scaled_error(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, c: &EvolveControls) -> f64 {
    match c.integrator {
        Integrator::DormandPrince => err
            .iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| e.norm() / (c.atol + c.rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max),
        Integrator::Magnus4 => {
            let size = |m: &CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            size(err) / (c.atol + c.rtol * size(y0).max(size(y1)))
        }
    }
}

impl<'a> Stepper<'a> {
    fn new(protocol: &'a dyn Protocol, bath: &'a BathSpec) -> Result<Self> {
        let cached = if protocol.is_static() {
            let g = Generator::new(&protocol.system_at(0.0), bath)?;
            let s = g.superoperator();
            Some((g, s))
        } else {
            None
        };
        Ok(Self { protocol, bath, cached })
    }

    fn generator(&self, t: f64) -> Result<Generator> {
        match &self.cached {
            Some((g, _)) => Ok(g.clone()),
            None => Generator::new(&self.protocol.system_at(t), self.bath),
        }
    }

    fn superoperator(&self, t: f64) -> Result<CMatrix> {
        match &self.cached {
            Some((_, s)) => Ok(s.clone()),
            None => Ok(Generator::new(&self.protocol.system_at(t), self.bath)?.superoperator()),
        }
    }

    /// Largest step for which the unnormalized Magnus propagator cannot overflow.
    fn step_cap(&self, t: f64) -> Result<f64> {
        let sys = self.protocol.system_at(t);
        if sys.is_hermitian() {
            return Ok(f64::INFINITY);
        }
        let es = sys.gamma().eig()?;
        let spread = 2.0 * (es.values[es.values.len() - 1] - es.values[0]);
        Ok(if spread > 0.0 { 300.0 / spread } else { f64::INFINITY })
    }

    fn dopri_step(&self, t: f64, h: f64, y: &CMatrix, c: &EvolveControls) -> Result<(CMatrix, f64)> {
        let mut k: Vec<CMatrix> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[s][j];
                if a != 0.0 {
                    ys += kj.scale(h * a);
                }
            }
            let g = self.generator(t + DP_C[s] * h)?;
            k.push(g.apply(&ys));
        }
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = DP_A[6][j];
            if a != 0.0 {
                y5 += kj.scale(h * a);
            }
        }
        let mut e = CMatrix::zeros(y.nrows(), y.ncols());
        for (j, kj) in k.iter().enumerate() {
            if DP_E[j] != 0.0 {
                e += kj.scale(h * DP_E[j]);
            }
        }
        let err = scaled_error(&e, y, &y5, c);
        Ok((y5, err))
    }

    /// One CF4 step `exp(h(α₁A₁ + α₂A₂)) exp(h(α₂A₁ + α₁A₂))` with the
    /// generator shifted by the current decay rate to avoid overflow.
    fn cf4(&self, t: f64, h: f64, v: &DVector<C64>) -> Result<DVector<C64>> {
        let s3 = 3f64.sqrt();
        let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
        let (a1, a2) = ((3.0 - 2.0 * s3) / 12.0, (3.0 + 2.0 * s3) / 12.0);
        let l1 = self.superoperator(t + c1 * h)?;
        let l2 = self.superoperator(t + c2 * h)?;
        let d = (v.len() as f64).sqrt().round() as usize;
        let x = unvectorize(v, d);
        let shift = trace(&unvectorize(&(&l1 * v), d)).re / trace(&x).re;
        let id = CMatrix::identity(v.len(), v.len());
        let first = expm(&((&l1 * C64::new(a2, 0.0) + &l2 * C64::new(a1, 0.0) - &id * C64::new(shift, 0.0)) * C64::new(h, 0.0)));
        let second = expm(&((&l1 * C64::new(a1, 0.0) + &l2 * C64::new(a2, 0.0) - &id * C64::new(shift, 0.0)) * C64::new(h, 0.0)));
        let out = second * (first * v);
        let tr = trace(&unvectorize(&out, d)).re;
        Ok(out.unscale(tr))
    }

    fn magnus_step(&self, t: f64, h: f64, y: &CMatrix, c: &EvolveControls) -> Result<(CMatrix, f64)> {
        let d = y.nrows();
        let v = vectorize(y);
        let full = self.cf4(t, h, &v)?;
        let half = self.cf4(t, 0.5 * h, &v)?;
        let two_half = self.cf4(t + 0.5 * h, 0.5 * h, &half)?;
        let big = unvectorize(&full, d);
        let fine = unvectorize(&two_half, d);
        let e = (&fine - &big).unscale(15.0);
        let err = scaled_error(&e, y, &fine, c);
        Ok((fine, err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::pauli::*;
    use crate::operators::{von_neumann_entropy, I};
    use crate::random::{random_density, random_hermitian, random_pure, rng_from_seed};

    #[test]
    fn gibbs_state_is_frozen_without_bath() {
        let sys = NonHermitianSystem::hermitian(sigma_x());
        let bath = BathSpec::two_level(1.0, 0.0).unwrap();
        let g = DensityMatrix::gibbs(sys.h(), 1.0).unwrap();
        let traj = evolve(&sys, &bath, &g, 10.0, &EvolveControls::default()).unwrap();
        for s in &traj.states {
            assert!((s.matrix() - g.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn unitary_evolution_conserves_entropy_and_matches_exact_propagator() {
        let mut rng = rng_from_seed(2);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let sys = NonHermitianSystem::hermitian(h.clone());
        let bath = BathSpec::site_projectors(3, 1.0, 0.0).unwrap();
        let rho0 = random_density(&mut rng, 3);
        let s0 = von_neumann_entropy(&rho0).unwrap();
        let tf = 5.0;
        for controls in [EvolveControls::default(), EvolveControls::magnus()] {
            let traj = evolve(&sys, &bath, &rho0, tf, &controls).unwrap();
            for s in &traj.states {
                assert!((von_neumann_entropy(s).unwrap() - s0).abs() < 1e-8);
            }
            let u = expm(&(h.matrix() * (-I * tf)));
            let exact = &u * rho0.matrix() * u.adjoint();
            assert!((traj.final_state().matrix() - exact).norm() < 1e-7);
            assert!(traj.max_trace_error() < 1e-10);
        }
    }

    #[test]
    fn pure_states_stay_pure_without_bath() {
        let mut rng = rng_from_seed(6);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let g = random_hermitian(&mut rng, 3, 0.5);
        let sys = NonHermitianSystem::new(h, g).unwrap();
        let bath = BathSpec::site_projectors(3, 1.0, 0.0).unwrap();
        let rho0 = random_pure(&mut rng, 3);
        let traj = evolve(&sys, &bath, &rho0, 8.0, &EvolveControls::default()).unwrap();
        for s in &traj.states {
            assert!((s.purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn integrators_agree_on_scheduled_protocol() {
        let bath = BathSpec::two_level(2.0, 0.05).unwrap();
        let p = Schedule(|t: f64| NonHermitianSystem::two_level(0.4 * (t / 10.0).min(1.0)));
        let rho0 = DensityMatrix::maximally_mixed(2);
        let a = evolve(&p, &bath, &rho0, 10.0, &EvolveControls::default()).unwrap();
        let b = evolve(&p, &bath, &rho0, 10.0, &EvolveControls::magnus()).unwrap();
        assert!((a.final_state().matrix() - b.final_state().matrix()).norm() < 1e-7);
    }

    /// Global error of one fixed-size CF4 sweep must fall by ≈ 2⁴ per halving.
    #[test]
    fn magnus_is_fourth_order() {
        let bath = BathSpec::two_level(1.0, 0.1).unwrap();
        let p = Schedule(|t: f64| {
            NonHermitianSystem::new(sigma_x(), sigma_y().scaled(0.5 * (0.3 * t).sin())).unwrap()
        });
        let st = Stepper::new(&p, &bath).unwrap();
        let v0 = vectorize(DensityMatrix::maximally_mixed(2).matrix());
        let run = |n: usize| {
            let h = 4.0 / n as f64;
            let mut v = v0.clone();
            for k in 0..n {
                v = st.cf4(k as f64 * h, h, &v).unwrap();
            }
            v
        };
        let reference = run(2048);
        let e1 = (run(16) - &reference).norm();
        let e2 = (run(32) - &reference).norm();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.4, "observed order {order}");
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let sys = NonHermitianSystem::two_level(0.2);
        let bath = BathSpec::two_level(1.0, 0.01).unwrap();
        let traj = evolve(&sys, &bath, &DensityMatrix::maximally_mixed(2), 1.0, &EvolveControls::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,re_00,im_00,re_01,im_01,re_10,im_10,re_11,im_11,generator_norm");
        assert_eq!(text.lines().count(), traj.len() + 1);
    }

    #[test]
    fn rejects_bad_span() {
        let sys = NonHermitianSystem::two_level(0.2);
        let bath = BathSpec::two_level(1.0, 0.01).unwrap();
        assert!(evolve(&sys, &bath, &DensityMatrix::maximally_mixed(2), 0.0, &EvolveControls::default()).is_err());
    }
}
