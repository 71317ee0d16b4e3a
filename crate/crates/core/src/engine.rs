//! The three-stage two-level information engine driven by a single bath.
//!
//! * Stage 1 ramps `H_NH = σx + i s γ σy`, `s: 0 → 1`, keeping the Hermitian
//!   part fixed, so the state follows the non-Hermitian steady state σ.
//! * Stage 2 instantly replaces the Hamiltonian by `H₁ = H_T + E₁`, whose Gibbs
//!   state is σ; `E₁` keeps the energy unchanged.
//! * Stage 3 slowly returns `H₁ → σx` with `Γ = 0`, then holds at `σx` so the
//!   state relaxes back to the initial Gibbs state.
//!
//! In the quasi-static limit the extracted work equals `T·I_NH` of the state
//! at the end of stage 1.

use std::io::Write;

use rayon::prelude::*;

use crate::csv::{write_csv, Field};
use crate::dynamics::{evolve_span, steady_state, BathSpec, EvolveControls, NonHermitianSystem, Protocol, SteadyStateOptions, Trajectory, DEFAULT_KAPPA};
use crate::error::{Error, Result};
use crate::numerics::trapezoid;
use crate::operators::{pauli, DensityMatrix, HermitianOperator};
use crate::thermo::{nh_information, thermo_ledger, total_information_flow, InformationBalance, ThermalDecomposition, ThermoLedger, ThermoSample, LEDGER_COLUMNS};

/// Trace-distance threshold of the quasi-static monitor.
pub const QUASI_STATIC_THRESHOLD: f64 = 0.01;
/// Tolerance of the cycle-closure invariant.
pub const CLOSURE_TOL: f64 = 1e-5;

/// Parameters of one engine cycle.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CycleSpec {
    /// Bath temperature.
    pub temperature: f64,
    /// Target nonreciprocity γ reached at the end of stage 1.
    pub gamma: f64,
    /// Duration of the stage-1 ramp.
    pub ramp_time_1: f64,
    /// Duration of the stage-3 ramp.
    pub ramp_time_3: f64,
    /// Relaxation hold at `σx` appended to stage 3.
    pub hold_time: f64,
    /// Dissipator rate κ.
    pub kappa: f64,
    /// Weight `w` of the transverse coupling `w·σy` added to the site projectors.
    pub transverse_coupling: f64,
}

impl CycleSpec {
    /// Quasi-static defaults: stage-1 ramp `200/κ`, stage-3 ramp `2000/κ`
    /// (the work deficit scales as the inverse stage-3 duration), hold `100/κ`,
    /// transverse coupling `0.4`.
    pub fn new(temperature: f64, gamma: f64) -> Self {
        Self::with_kappa(temperature, gamma, DEFAULT_KAPPA)
    }

    /// Quasi-static defaults scaled to a given κ.
    pub fn with_kappa(temperature: f64, gamma: f64, kappa: f64) -> Self {
        Self {
            temperature,
            gamma,
            ramp_time_1: 200.0 / kappa,
            ramp_time_3: 2000.0 / kappa,
            hold_time: 100.0 / kappa,
            kappa,
            transverse_coupling: 0.4,
        }
    }

    /// Checks the preconditions of [`run_cycle`].
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(key, format!("{v} must be positive and finite")))
            }
        };
        positive("T", self.temperature)?;
        positive("kappa", self.kappa)?;
        positive("ramp-time-1", self.ramp_time_1)?;
        positive("ramp-time-3", self.ramp_time_3)?;
        if !(self.hold_time >= 0.0 && self.hold_time.is_finite()) {
            return Err(Error::param("hold-time", "must be non-negative"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite"));
        }
        if !(self.transverse_coupling.is_finite()) {
            return Err(Error::param("transverse-coupling", "must be finite"));
        }
        Ok(())
    }

    /// The engine bath: site projectors plus the transverse coupling.
    pub fn bath(&self) -> Result<BathSpec> {
        let bath = BathSpec::two_level(self.temperature, self.kappa)?;
        if self.transverse_coupling != 0.0 {
            bath.with_coupling(pauli::sigma_y().scaled(self.transverse_coupling))
        } else {
            Ok(bath)
        }
    }
}

/// Stage 1: `σx + i min(t/τ, 1) γ σy`.
#[derive(Clone, Debug)]
pub struct NonreciprocityRamp {
    /// Target γ.
    pub gamma: f64,
    /// Ramp duration.
    pub duration: f64,
}

impl Protocol for NonreciprocityRamp {
    fn system_at(&self, t: f64) -> NonHermitianSystem {
        NonHermitianSystem::two_level(self.gamma * (t / self.duration).clamp(0.0, 1.0))
    }

    fn hamiltonian_rate(&self, _t: f64) -> HermitianOperator {
        HermitianOperator::zeros(2)
    }
}

/// Linear Hermitian interpolation `(1 − s)H_a + s H_b`, `s = (t − t₀)/τ`.
#[derive(Clone, Debug)]
pub struct HamiltonianRamp {
    /// Start Hamiltonian.
    pub from: HermitianOperator,
    /// End Hamiltonian.
    pub to: HermitianOperator,
    /// Start time.
    pub start: f64,
    /// Ramp duration.
    pub duration: f64,
}

impl Protocol for HamiltonianRamp {
    fn system_at(&self, t: f64) -> NonHermitianSystem {
        let s = ((t - self.start) / self.duration).clamp(0.0, 1.0);
        NonHermitianSystem::hermitian(&self.from.scaled(1.0 - s) + &self.to.scaled(s))
    }

    fn hamiltonian_rate(&self, t: f64) -> HermitianOperator {
        let s = (t - self.start) / self.duration;
        if (0.0..=1.0).contains(&s) {
            (&self.to - &self.from).scaled(1.0 / self.duration)
        } else {
            HermitianOperator::zeros(self.from.dim())
        }
    }
}

/// Energy, heat, work, entropy and information accounting of one stage.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StageSummary {
    /// Stage label (`1`, `2`, `3`).
    pub stage: u8,
    /// `ΔU`.
    pub delta_u: f64,
    /// Heat absorbed from the bath, `ΔU − W` (equal to `∫ Q̇ dt`).
    pub heat: f64,
    /// Work done on the system, `∫ tr(Ḣρ) dt`.
    pub work: f64,
    /// `ΔS`.
    pub delta_s: f64,
    /// `I_S = −∫ J_S dt`.
    pub info_flow: f64,
}

/// Outcome of [`run_cycle`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct CycleReport {
    /// Work extracted over the cycle, `−Σ W_stage`.
    pub w_total: f64,
    /// Per-stage accounting.
    pub stages: Vec<StageSummary>,
    /// `I_NH` of the state at the end of stage 1.
    pub i_nh_end_stage1: f64,
    /// Stage-2 offset `E₁ = tr Hρ − tr H_T ρ`.
    pub e1: f64,
    /// `‖ρ_final − ρ_initial‖_F`.
    pub closure: f64,
    /// Net heat absorbed from the bath.
    pub heat_total: f64,
    /// Smallest entropy production rate during stage 1.
    pub min_sigma_rate_stage1: f64,
    /// Largest ρ–σ trace distance during the ramps.
    pub max_lag: f64,
    /// Information balance of stage 1 (`I_S = ΔI_NH − I_diss`).
    pub balance_stage1: InformationBalance,
    /// Ledger samples tagged with their stage.
    #[serde(skip)]
    pub trace: Vec<(u8, ThermoSample)>,
}

impl CycleReport {
    /// `T·I_NH` at the end of stage 1, the quasi-static prediction for `W_total`.
    pub fn predicted_work(&self, temperature: f64) -> f64 {
        temperature * self.i_nh_end_stage1
    }

    /// cycle_trace.csv: ledger columns plus `stage`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<&str> = LEDGER_COLUMNS.to_vec();
        header.push("stage");
        write_csv(
            w,
            &header,
            self.trace.iter().map(|(stage, s)| {
                let mut row = s.fields();
                row.push(Field::Int(i64::from(*stage)));
                row
            }),
        )
    }
}

fn integrate(ledger: &ThermoLedger, f: impl Fn(&ThermoSample) -> f64) -> f64 {
    let ts = ledger.times();
    let ys: Vec<f64> = ledger.samples.iter().map(f).collect();
    trapezoid(&ts, &ys)
}

fn summarize(stage: u8, ledger: &ThermoLedger) -> StageSummary {
    let first = ledger.samples.first().expect("nonempty ledger");
    let last = ledger.samples.last().expect("nonempty ledger");
    let delta_u = last.u - first.u;
    let work = integrate(ledger, |s| s.w_rate);
    // The heat current carries the fast coherent oscillation of the state, which
    // a thinned ledger aliases; the first law gives the stage heat exactly.
    StageSummary {
        stage,
        delta_u,
        heat: delta_u - work,
        work,
        delta_s: last.s - first.s,
        info_flow: -integrate(ledger, |s| s.j_s),
    }
}

fn monitor(ledger: &ThermoLedger) -> Result<()> {
    match ledger.samples.iter().find(|s| s.lag > QUASI_STATIC_THRESHOLD) {
        Some(s) => Err(Error::Adiabaticity { t: s.t, distance: s.lag, threshold: QUASI_STATIC_THRESHOLD }),
        None => Ok(()),
    }
}

/// Magnus controls for a slow ramp: the drift is adiabatic, so a slightly
/// looser tolerance and a thinned ledger keep long cycles affordable.
fn controls_for(duration: f64) -> EvolveControls {
    EvolveControls { max_step: duration / 2000.0, rtol: 1e-8, atol: 1e-11, record_every: 8, ..EvolveControls::magnus() }
}

/// Runs the three-stage cycle starting from the Gibbs state of `σx`.
pub fn run_cycle(spec: &CycleSpec) -> Result<CycleReport> {
    spec.validate()?;
    let bath = spec.bath()?;
    let beta = bath.beta();
    let opts = SteadyStateOptions::default();
    let h0 = pauli::sigma_x();
    let rho0 = DensityMatrix::gibbs(&h0, beta)?;

    // Stage 1.
    let ramp1 = NonreciprocityRamp { gamma: spec.gamma, duration: spec.ramp_time_1 };
    let t1 = spec.ramp_time_1;
    let traj1 = evolve_span(&ramp1, &bath, &rho0, 0.0, t1, &controls_for(spec.ramp_time_1))?;
    let ledger1 = thermo_ledger(&ramp1, &bath, &traj1, &opts)?;
    monitor(&ledger1)?;
    let rho1 = traj1.final_state().clone();
    let sys1 = ramp1.system_at(t1);
    let dec1 = if sys1.is_hermitian() {
        ThermalDecomposition::hermitian(sys1.h(), beta)?
    } else {
        ThermalDecomposition::from_steady_state(&sys1, beta, steady_state(&sys1, &bath, &opts)?)?
    };
    let i_nh_end_stage1 = nh_information(&rho1, &dec1)?;
    let balance_stage1 = total_information_flow(&ledger1, f64::INFINITY)?;

    // Stage 2: instantaneous Hamiltonian replacement with the state frozen.
    let e1 = h0.expect(&rho1)? - dec1.h_t.expect(&rho1)?;
    let h1 = &dec1.h_t + &HermitianOperator::identity(2).scaled(e1);
    let quench = h1.expect(&rho1)? - h0.expect(&rho1)?;

    // Stage 3: ramp back to σx, then hold.
    let ramp3 = HamiltonianRamp { from: h1.clone(), to: h0.clone(), start: t1, duration: spec.ramp_time_3 };
    let t3 = t1 + spec.ramp_time_3;
    let traj3 = evolve_span(&ramp3, &bath, &rho1, t1, t3, &controls_for(spec.ramp_time_3))?;
    let ledger3 = thermo_ledger(&ramp3, &bath, &traj3, &opts)?;
    monitor(&ledger3)?;
    let mut rho_end = traj3.final_state().clone();
    let mut ledger_hold = ThermoLedger::default();
    if spec.hold_time > 0.0 {
        let hold = NonHermitianSystem::hermitian(h0.clone());
        let traj_h: Trajectory = evolve_span(&hold, &bath, &rho_end, t3, t3 + spec.hold_time, &controls_for(spec.hold_time))?;
        ledger_hold = thermo_ledger(&hold, &bath, &traj_h, &opts)?;
        rho_end = traj_h.final_state().clone();
    }

    let s1 = summarize(1, &ledger1);
    let quench_sample = {
        let mut s = *ledger3.samples.first().expect("nonempty ledger");
        s.q_rate = 0.0;
        s.w_rate = 0.0;
        s
    };
    let s2 = StageSummary { stage: 2, delta_u: quench, heat: 0.0, work: quench, delta_s: 0.0, info_flow: 0.0 };
    let mut s3 = summarize(3, &ledger3);
    if let (Some(first), Some(last)) = (ledger_hold.samples.first(), ledger_hold.samples.last()) {
        s3.delta_u += last.u - first.u;
        s3.delta_s += last.s - first.s;
        s3.heat += last.u - first.u;
        s3.info_flow -= integrate(&ledger_hold, |s| s.j_s);
    }
    let closure = (rho_end.matrix() - rho0.matrix()).norm();
    let du_sum = s1.delta_u + s2.delta_u + s3.delta_u;
    if closure > CLOSURE_TOL || du_sum.abs() > CLOSURE_TOL {
        return Err(Error::InvariantViolation(format!(
            "cycle not closed: ‖ρ_final − ρ_0‖ = {closure:.3e}, ΣΔU = {du_sum:.3e}; increase hold-time"
        )));
    }
    let mut trace: Vec<(u8, ThermoSample)> = ledger1.samples.iter().map(|s| (1, *s)).collect();
    trace.push((2, quench_sample));
    trace.extend(ledger3.samples.iter().map(|s| (3, *s)));
    trace.extend(ledger_hold.samples.iter().skip(1).map(|s| (3, *s)));
    Ok(CycleReport {
        w_total: -(s1.work + s2.work + s3.work),
        heat_total: s1.heat + s2.heat + s3.heat,
        min_sigma_rate_stage1: ledger1.min_sigma_rate(),
        max_lag: ledger1.max_lag().max(ledger3.max_lag()),
        stages: vec![s1, s2, s3],
        i_nh_end_stage1,
        e1,
        closure,
        balance_stage1,
        trace,
    })
}

/// High-temperature information content of the two-level model:
/// `½[(1+γ)ln(1+γ) + (1−γ)ln(1−γ)]` for `|γ| < 1`, `ln 2` otherwise.
pub fn high_t_closed_form(gamma: f64) -> f64 {
    let g = gamma.abs();
    if g >= 1.0 {
        return std::f64::consts::LN_2;
    }
    let tail = if g < 1.0 { (1.0 - g) * (-g).ln_1p() } else { 0.0 };
    0.5 * ((1.0 + g) * g.ln_1p() + tail)
}

/// Steady-state `I_NH` of `σx + iγσy` with the default two-level bath.
pub fn steady_information(temperature: f64, gamma: f64, kappa: f64) -> Result<f64> {
    let sys = NonHermitianSystem::two_level(gamma);
    let bath = BathSpec::two_level(temperature, kappa)?;
    let sigma = steady_state(&sys, &bath, &SteadyStateOptions::default())?;
    let dec = ThermalDecomposition::from_steady_state(&sys, bath.beta(), sigma)?;
    nh_information(&dec.sigma, &dec)
}

/// Location of the curvature maximum of a sampled curve.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KinkEstimate {
    /// Grid point with the largest `|d²I/dγ²|`.
    pub location: f64,
    /// Half-width uncertainty (one grid step).
    pub uncertainty: f64,
    /// `|d²I/dγ²|` at the peak.
    pub peak_curvature: f64,
}

fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 5 {
        return Err(Error::Resolution("grid needs at least five points".into()));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) || grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::Resolution("grid must be uniform and ascending".into()));
    }
    Ok(h)
}

/// Maximum of `|d²y/dγ²|` by central differences on a uniform grid; fails if
/// the maximum sits at the edge of the grid (peak unresolved).
pub fn curvature_peak(grid: &[f64], values: &[f64]) -> Result<KinkEstimate> {
    let h = uniform_step(grid)?;
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    let d2: Vec<f64> = values.windows(3).map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (h * h)).abs()).collect();
    let (k, &peak) = d2
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty curvature");
    if k == 0 || k == d2.len() - 1 {
        return Err(Error::Resolution(format!("curvature peak at grid edge γ = {}", grid[k + 1])));
    }
    Ok(KinkEstimate { location: grid[k + 1], uncertainty: h, peak_curvature: peak })
}

/// Locates the exceptional-point kink of the steady-state `I_NH(γ)` curve.
pub fn ep_kink_scan(temperature: f64, gamma_grid: &[f64], kappa: f64) -> Result<KinkEstimate> {
    let h = uniform_step(gamma_grid)?;
    if h > 0.01 + 1e-12 {
        return Err(Error::Resolution(format!("grid step {h} exceeds 0.01")));
    }
    if gamma_grid[0] > 1e-12 || *gamma_grid.last().expect("nonempty") < 1.5 - 1e-9 {
        return Err(Error::Resolution("grid must span [0, 1.5]".into()));
    }
    let values: Vec<f64> = gamma_grid
        .par_iter()
        .map(|&g| steady_information(temperature, g, kappa))
        .collect::<Result<_>>()?;
    curvature_peak(gamma_grid, &values)
}

/// One row of engine_sweep.csv.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SweepRow {
    /// Target γ.
    pub gamma: f64,
    /// Temperature.
    pub temperature: f64,
    /// Extracted work.
    pub w_total: f64,
    /// `T·I_NH` at the end of stage 1.
    pub t_times_inh: f64,
    /// High-temperature closed form at γ (not multiplied by T).
    pub closed_form: f64,
}

/// Runs one cycle per γ (in parallel), keeping grid order.
pub fn engine_sweep(template: &CycleSpec, gammas: &[f64]) -> Result<Vec<SweepRow>> {
    gammas
        .par_iter()
        .map(|&gamma| {
            let spec = CycleSpec { gamma, ..template.clone() };
            let r = run_cycle(&spec)?;
            Ok(SweepRow {
                gamma,
                temperature: spec.temperature,
                w_total: r.w_total,
                t_times_inh: r.predicted_work(spec.temperature),
                closed_form: high_t_closed_form(gamma),
            })
        })
        .collect()
}

/// engine_sweep.csv: `gamma, T, W_total, T_times_INH, closed_form`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    write_csv(
        w,
        &["gamma", "T", "W_total", "T_times_INH", "closed_form"],
        rows.iter().map(|r| {
            vec![
                Field::Num(r.gamma),
                Field::Num(r.temperature),
                Field::Num(r.w_total),
                Field::Num(r.t_times_inh),
                Field::Num(r.closed_form),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::arange;

    #[test]
    fn closed_form_values() {
        assert_eq!(high_t_closed_form(0.0), 0.0);
        assert!((high_t_closed_form(1.0) - 0.693147).abs() < 1e-6);
        assert!((high_t_closed_form(0.5) - 0.130812).abs() < 1e-6);
        assert_eq!(high_t_closed_form(-0.3), high_t_closed_form(0.3));
        assert!((high_t_closed_form(1.0 - 1e-12) - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn closed_form_curve_kinks_exactly_at_one() {
        let grid = arange(0.0, 1.5, 0.01);
        let vals: Vec<f64> = grid.iter().map(|&g| high_t_closed_form(g)).collect();
        let k = curvature_peak(&grid, &vals).unwrap();
        assert!((k.location - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_or_short_grids_are_rejected() {
        assert!(matches!(ep_kink_scan(100.0, &arange(0.0, 1.5, 0.05), 0.005), Err(Error::Resolution(_))));
        assert!(matches!(ep_kink_scan(100.0, &arange(0.0, 1.2, 0.01), 0.005), Err(Error::Resolution(_))));
        let grid = arange(0.0, 0.9, 0.01);
        let vals: Vec<f64> = grid.iter().map(|&g| high_t_closed_form(g)).collect();
        assert!(matches!(curvature_peak(&grid, &vals), Err(Error::Resolution(_))));
    }

    #[test]
    fn hermitian_cycle_does_nothing() {
        let spec = CycleSpec { ramp_time_1: 2000.0, ramp_time_3: 2000.0, hold_time: 2000.0, ..CycleSpec::new(10.0, 0.0) };
        let r = run_cycle(&spec).unwrap();
        assert!(r.w_total.abs() < 1e-10);
        for s in &r.stages {
            assert!(s.delta_u.abs() < 1e-9 && s.work.abs() < 1e-10 && s.heat.abs() < 1e-9 && s.info_flow.abs() < 1e-9);
        }
    }

    #[test]
    fn stage_one_and_two_do_no_work() {
        let spec = CycleSpec { ramp_time_1: 2.0e4, ramp_time_3: 2.0e5, hold_time: 2.0e4, ..CycleSpec::new(10.0, 0.5) };
        let r = run_cycle(&spec).unwrap();
        assert!(r.stages[0].work.abs() < 1e-8);
        assert!(r.stages[1].delta_u.abs() < 1e-10);
        assert!(r.w_total > 0.0);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let spec = CycleSpec { ramp_time_1: -1.0, ..CycleSpec::new(10.0, 0.5) };
        assert!(matches!(run_cycle(&spec), Err(Error::Parameter { .. })));
    }

    #[test]
    fn fast_ramp_trips_monitor() {
        let spec = CycleSpec { ramp_time_1: 5.0, ..CycleSpec::new(10.0, 1.0) };
        assert!(matches!(run_cycle(&spec), Err(Error::Adiabaticity { .. })));
    }
}
