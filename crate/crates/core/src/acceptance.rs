//! Acceptance suite: one check per headline property of the library, shared
//! by the `selftest` subcommand and the `acceptance` integration test.
//!
//! Each [`Criterion`] returns an [`Outcome`] with a one-line verdict. Costly
//! intermediate results (engine cycles, the large-chain kink scan, critical
//! lines) are cached process-wide so that criteria sharing them, and the
//! artifact writer, compute them once.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{evolve, steady_state, BathSpec, EvolveControls, NonHermitianSystem, SteadyStateOptions, DEFAULT_KAPPA};
use crate::engine::{self, run_cycle, CycleReport, CycleSpec, SweepRow};
use crate::error::{Error, Result};
use crate::hatano_nelson::{self as hn, CriticalLine, HnParams, KinkScan};
use crate::numerics::{arange, linspace};
use crate::dynamics::Generator;
use crate::operators::{
    delta_operator, frechet_dlog, CMatrix, re_trace_product, relative_entropy, trace, DensityMatrix, HermitianOperator, EIG_CLAMP,
};
use crate::random::{log_uniform, random_density, random_hermitian, rng_from_seed, NhRng};
use crate::thermo::{
    check_master_inequality, entropy_production_rate, information_flow, nh_information, thermal_decomposition,
    ThermalDecomposition,
};

/// Verdict of one criterion.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Outcome {
    /// Stable identifier.
    pub id: &'static str,
    /// Human-readable title.
    pub title: &'static str,
    /// Whether every tolerance was met.
    pub passed: bool,
    /// Measured values behind the verdict.
    pub detail: String,
    /// Wall time in seconds.
    pub seconds: f64,
}

impl Outcome {
    /// `PASS|FAIL [id] title: detail (time)`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

/// A named check.
pub struct Criterion {
    /// Stable identifier.
    pub id: &'static str,
    /// Human-readable title.
    pub title: &'static str,
    check: fn() -> Result<(bool, String)>,
}

impl Criterion {
    /// Runs the check; numerical errors count as failures.
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let (passed, detail) = match (self.check)() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome { id: self.id, title: self.title, passed, detail, seconds: start.elapsed().as_secs_f64() }
    }
}

/// Criteria that cannot hold under the library's dissipator, kept to report
/// their statistics (see the master-inequality check).
pub const KNOWN_UNATTAINABLE: &[&str] = &["master-inequality"];

/// All criteria in reporting order.
pub fn criteria() -> &'static [Criterion] {
    &CRITERIA
}

/// Looks up a criterion by identifier.
pub fn criterion(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

static CRITERIA: [Criterion; 12] = [
    Criterion { id: "high-t-closed-form", title: "steady-state I_NH at T = 100 follows the high-temperature closed form", check: high_t_closed_form },
    Criterion { id: "work-information", title: "quasi-static cycle extracts W = T·I_NH", check: work_information },
    Criterion { id: "kelvin-planck", title: "positive work from a single bath with net heat absorbed", check: kelvin_planck },
    Criterion { id: "negative-entropy-production", title: "entropy production turns negative during stage 1", check: negative_entropy_production },
    Criterion { id: "master-inequality", title: "information-flow bound on 1000 random instances", check: master_inequality },
    Criterion { id: "hermitian-limit", title: "Γ = 0 recovers Spohn's inequality along relaxation", check: hermitian_limit },
    Criterion { id: "steady-state-information", title: "I_NH(σ) ≥ 0 and equals D(σ‖Gibbs) at steady state", check: steady_state_information },
    Criterion { id: "ep-kink", title: "curvature peak of I_NH(γ) sits at the exceptional point", check: ep_kink },
    Criterion { id: "hn-low-t", title: "g_c ∝ T at low temperature", check: hn_low_t },
    Criterion { id: "hn-high-t", title: "g_c − ln(T/J) bounded at high temperature", check: hn_high_t },
    Criterion { id: "hn-kink-onset", title: "third-derivative kink meets the condensation onset", check: hn_kink_onset },
    Criterion { id: "numerical-kernels", title: "Fréchet derivative, trace conservation, tr(σΔ) = 0", check: numerical_kernels },
];

/// Runs every criterion in order.
pub fn run_all() -> Vec<Outcome> {
    criteria().iter().map(Criterion::run).collect()
}

// ---------------------------------------------------------------------------
// Shared, lazily computed results.

type Cache<K, V> = OnceLock<Mutex<BTreeMap<K, Arc<Mutex<Option<Arc<V>>>>>>>;

fn cache<K: Ord, V>(cell: &'static Cache<K, V>, key: K, make: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
    let slot = {
        let mut map = cell.get_or_init(|| Mutex::new(BTreeMap::new())).lock().unwrap_or_else(|e| e.into_inner());
        Arc::clone(map.entry(key).or_default())
    };
    // Each entry has its own lock, held while computing: concurrent callers
    // of the same key wait instead of duplicating minutes of work, while
    // distinct keys proceed in parallel.
    let mut value = slot.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(v) = value.as_ref() {
        return Ok(Arc::clone(v));
    }
    let v = Arc::new(make()?);
    *value = Some(Arc::clone(&v));
    Ok(v)
}

/// Default quasi-static cycle at `(T, γ)`, computed once per process.
pub fn cycle(temperature: f64, gamma: f64) -> Result<Arc<CycleReport>> {
    static CELL: Cache<(u64, u64), CycleReport> = OnceLock::new();
    cache(&CELL, (temperature.to_bits(), gamma.to_bits()), || run_cycle(&CycleSpec::new(temperature, gamma)))
}

/// Onset and kink scan of the `L = 5000`, `T = 1` chain.
pub fn large_chain_scan() -> Result<Arc<(f64, KinkScan)>> {
    static CELL: Cache<u8, (f64, KinkScan)> = OnceLock::new();
    cache(&CELL, 0, || {
        let base = HnParams::new(5000, 1.0, 0.0, 1.0);
        let onset = hn::onset_coupling(&base)?;
        Ok((onset, hn::kink_near(&base, onset)?))
    })
}

/// Low-temperature grid of the critical line.
pub fn low_t_grid() -> Vec<f64> {
    linspace(0.05, 0.2, 8)
}

/// High-temperature grid of the critical line (log-spaced).
pub fn high_t_grid() -> Vec<f64> {
    linspace(5f64.ln(), 50f64.ln(), 8).into_iter().map(f64::exp).collect()
}

fn critical(which: u8) -> Result<Arc<CriticalLine>> {
    static CELL: Cache<u8, CriticalLine> = OnceLock::new();
    cache(&CELL, which, || {
        let grid = if which == 0 { low_t_grid() } else { high_t_grid() };
        hn::critical_line(&grid, 2000, 1.0, false)
    })
}

// ---------------------------------------------------------------------------
// Random instances.

/// A random non-Hermitian system of dimension 2–4 with a site-projector bath.
fn random_instance(rng: &mut NhRng) -> Result<(NonHermitianSystem, BathSpec)> {
    let dim = rng.random_range(2..=4);
    let h = random_hermitian(rng, dim, 1.0);
    let strength = log_uniform(rng, 0.05, 0.5);
    let g = random_hermitian(rng, dim, strength);
    let sys = NonHermitianSystem::new(h, g)?;
    let bath = BathSpec::site_projectors(dim, log_uniform(rng, 0.3, 10.0), log_uniform(rng, 0.005, 0.2))?;
    Ok((sys, bath))
}

fn gibbs(sys: &NonHermitianSystem, beta: f64) -> Result<DensityMatrix> {
    DensityMatrix::gibbs(sys.h(), beta)
}

// ---------------------------------------------------------------------------
// Criteria.

fn high_t_closed_form() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [0.1, 0.25, 0.5, 0.75, 1.0, 1.25] {
        let value = engine::steady_information(100.0, gamma, DEFAULT_KAPPA)?;
        let exact = engine::high_t_closed_form(gamma);
        let good = if gamma == 0.1 { (value - exact).abs() < 0.01 } else { ((value - exact) / exact).abs() < 0.05 };
        ok &= good;
        parts.push(format!("γ={gamma}: {value:.4}/{exact:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 60.0, format!("{} in {secs:.1} s", parts.join(", "))))
}

fn work_information() -> Result<(bool, String)> {
    let cases = [(10.0, 0.5), (10.0, 1.0), (100.0, 0.5), (100.0, 1.0)];
    let reports: Vec<Arc<CycleReport>> = cases.par_iter().map(|&(t, gamma)| cycle(t, gamma)).collect::<Result<_>>()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (&(t, gamma), r) in cases.iter().zip(&reports) {
        {
            let gap = ((r.w_total - r.predicted_work(t)) / r.predicted_work(t)).abs();
            ok &= gap < 0.02 && r.closure < 1e-5;
            parts.push(format!("T={t} γ={gamma}: gap {:.2}% closure {:.1e}", 100.0 * gap, r.closure));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn kelvin_planck() -> Result<(bool, String)> {
    let r = cycle(100.0, 1.0)?;
    let detail = format!("W_total = {:.4}, net heat absorbed = {:.4}, W/T = {:.4} (ln 2 = {:.4})", r.w_total, r.heat_total, r.w_total / 100.0, std::f64::consts::LN_2);
    Ok((r.w_total > 0.0 && r.heat_total > 0.0, detail))
}

fn negative_entropy_production() -> Result<(bool, String)> {
    let r = cycle(10.0, 1.0)?;
    Ok((r.min_sigma_rate_stage1 < 0.0, format!("min Σ̇ in stage 1 = {:.3e}", r.min_sigma_rate_stage1)))
}

fn master_inequality() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut rng = rng_from_seed(0x6d61_7374);
    let (mut worst, mut violations, mut equality) = (f64::INFINITY, 0usize, 0.0f64);
    let opts = SteadyStateOptions::default();
    for _ in 0..1000 {
        let (sys, bath) = random_instance(&mut rng)?;
        let sigma = steady_state(&sys, &bath, &opts)?;
        let rho = random_density(&mut rng, sys.dim());
        let m = check_master_inequality(&sys, &bath, &rho, &sigma)?;
        worst = worst.min(m.slack);
        violations += usize::from(m.slack < -1e-8);
        equality = equality.max(check_master_inequality(&sys, &bath, &sigma, &sigma)?.slack.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = violations == 0 && equality < 1e-8 && secs < 300.0;
    Ok((ok, format!("{violations}/1000 instances below −1e-8 (worst slack {worst:.3e}); |slack(σ)| ≤ {equality:.1e}")))
}

fn hermitian_limit() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(0x5370_6f68);
    let (mut js, mut v, mut sigma_min) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let dim = rng.random_range(2..=4);
        let sys = NonHermitianSystem::hermitian(random_hermitian(&mut rng, dim, 1.0));
        let bath = BathSpec::site_projectors(dim, log_uniform(&mut rng, 0.5, 5.0), log_uniform(&mut rng, 0.05, 0.2))?;
        // The generic solver path, not the exact Gibbs shortcut.
        let sigma = steady_state(&sys, &bath, &SteadyStateOptions::default())?;
        let dec = ThermalDecomposition::from_steady_state(&sys, bath.beta(), sigma)?;
        v = v.max(dec.v_nh.norm());
        let rho0 = random_density(&mut rng, dim);
        let traj = evolve(&sys, &bath, &rho0, 3.0 / bath.kappa(), &EvolveControls::default())?;
        let gen = Generator::new(&sys, &bath)?;
        for rho in &traj.states {
            js = js.max(information_flow(&sys, &bath, rho, &dec)?.abs());
            let rho_dot = gen.apply(rho.matrix());
            let q = re_trace_product(sys.h().matrix(), &rho_dot);
            sigma_min = sigma_min.min(entropy_production_rate(bath.beta(), rho, &rho_dot, q)?);
        }
    }
    let ok = js < 1e-10 && v < 1e-8 && sigma_min >= -1e-9;
    Ok((ok, format!("max |J_S| = {js:.1e}, max ‖V_NH‖ = {v:.1e}, min Σ̇ = {sigma_min:.2e}")))
}

fn steady_state_information() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(0x494e_4820);
    let (mut min_i, mut gap) = (f64::INFINITY, 0.0f64);
    for _ in 0..200 {
        let (sys, bath) = random_instance(&mut rng)?;
        let dec = thermal_decomposition(&sys, &bath, &SteadyStateOptions::default())?;
        let i = nh_information(&dec.sigma, &dec)?;
        min_i = min_i.min(i);
        gap = gap.max((i - relative_entropy(&dec.sigma, &gibbs(&sys, bath.beta())?)?).abs());
    }
    Ok((min_i >= -1e-10 && gap < 1e-8, format!("min I_NH(σ) = {min_i:.3e}, max |I_NH − D| = {gap:.1e}")))
}

fn ep_kink() -> Result<(bool, String)> {
    let k = engine::ep_kink_scan(100.0, &arange(0.0, 1.5, 0.01), DEFAULT_KAPPA)?;
    Ok(((k.location - 1.0).abs() <= 0.05, format!("curvature peak at γ = {:.3} ± {:.3}", k.location, k.uncertainty)))
}

fn hn_low_t() -> Result<(bool, String)> {
    let start = Instant::now();
    let line = critical(0)?;
    let fits = line.fits.ok_or_else(|| Error::Resolution("no fit".into()))?;
    let (a, p) = fits.power_law;
    let secs = start.elapsed().as_secs_f64();
    Ok(((p - 1.0).abs() <= 0.1 && secs < 600.0, format!("g_c = {a:.3}·T^{p:.3} over T ∈ [0.05, 0.2], L = 2000")))
}

fn hn_high_t() -> Result<(bool, String)> {
    let line = critical(1)?;
    let fits = line.fits.ok_or_else(|| Error::Resolution("no fit".into()))?;
    Ok((fits.log_residual < 0.1, format!("g_c = {:.3} + ln(T/J), max relative residual {:.2}%", fits.log_offset, 100.0 * fits.log_residual)))
}

fn hn_kink_onset() -> Result<(bool, String)> {
    let start = Instant::now();
    let scan = large_chain_scan()?;
    let secs = start.elapsed().as_secs_f64();
    let (onset, kink) = (scan.0, scan.1.feature.location);
    let rel = ((kink - onset) / onset).abs();
    let p = HnParams::new(200, 1.0, 0.5, 1.0);
    let oracle_gap = (hn::hn_information(&p)? - hn::dense_reference_information(&p)).abs();
    let ok = rel < 0.05 && oracle_gap < 1e-8 && secs < 120.0;
    Ok((ok, format!("kink g* = {kink:.4}, onset g_c = {onset:.4} ({:.2}% apart); L = 200 oracle gap {oracle_gap:.1e}", 100.0 * rel)))
}

fn numerical_kernels() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(0x6b65_726e);
    let mut frechet = 0.0f64;
    for _ in 0..200 {
        let sigma = random_density(&mut rng, 4);
        let x = random_hermitian(&mut rng, 4, 1.0);
        let d = frechet_dlog(&sigma, x.matrix(), EIG_CLAMP)?.value;
        // Five-point central difference with a step well inside the smallest
        // eigenvalue, so the logarithm stays smooth across the stencil.
        let p_min = sigma.eig()?.values.iter().copied().fold(f64::INFINITY, f64::min);
        let h = 1e-2 * p_min / x.norm();
        let ln_at = |s: f64| -> Result<CMatrix> {
            let shifted = HermitianOperator::from_hermitian_part(&(sigma.matrix() + x.matrix().scale(s)))?;
            Ok(shifted.map_spectrum(f64::ln)?.into_matrix())
        };
        let fd = (ln_at(-2.0 * h)? - ln_at(-h)?.scale(8.0) + ln_at(h)?.scale(8.0) - ln_at(2.0 * h)?).unscale(12.0 * h);
        frechet = frechet.max((&d - &fd).norm() / d.norm());
    }
    let mut trace_err = 0.0f64;
    for k in 0..20 {
        let (sys, bath) = random_instance(&mut rng)?;
        let rho0 = random_density(&mut rng, sys.dim());
        let controls = if k % 2 == 0 { EvolveControls::default() } else { EvolveControls::magnus() };
        let traj = evolve(&sys, &bath, &rho0, 2.0 / bath.kappa(), &controls)?;
        trace_err = trace_err.max(traj.max_trace_error());
    }
    let mut commutation = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.random_range(2..=4);
        let sigma = random_density(&mut rng, dim);
        let h = random_hermitian(&mut rng, dim, 1.0);
        let delta = delta_operator(&sigma, &h, EIG_CLAMP)?;
        commutation = commutation.max(trace(&(sigma.matrix() * delta.matrix())).norm());
    }
    let ok = frechet < 1e-6 && trace_err < 1e-10 && commutation < 1e-9;
    Ok((ok, format!("Fréchet rel err {frechet:.1e}, trace drift {trace_err:.1e}, |tr σΔ| {commutation:.1e}")))
}

// ---------------------------------------------------------------------------
// Artifacts.

/// Engine fixture rows at `T = 100`, `γ ∈ {0, 0.5, 1}`.
pub fn engine_fixture() -> Result<Vec<SweepRow>> {
    [0.0, 0.5, 1.0]
        .iter()
        .map(|&gamma| {
            let r = cycle(100.0, gamma)?;
            Ok(SweepRow {
                gamma,
                temperature: 100.0,
                w_total: r.w_total,
                t_times_inh: r.predicted_work(100.0),
                closed_form: engine::high_t_closed_form(gamma),
            })
        })
        .collect()
}

/// Writes the CSVs backing the acceptance checks: engine_sweep.csv,
/// cycle_trace.csv (T = 100, γ = 1), hn_sweep.csv (refined kink scan at
/// L = 5000, T = 1) and hn_critical.csv (both scaling regimes plus the
/// kink row). Returns the paths written.
pub fn write_artifacts(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let path = dir.join(name);
        let f = std::fs::File::create(&path)?;
        written.push(path);
        Ok(std::io::BufWriter::new(f))
    };
    engine::write_sweep_csv(create("engine_sweep.csv")?, &engine_fixture()?)?;
    cycle(100.0, 1.0)?.write_trace_csv(create("cycle_trace.csv")?)?;
    let scan = large_chain_scan()?;
    hn::write_sweep_csv(create("hn_sweep.csv")?, &scan.1.fine)?;
    let mut points = critical(0)?.points.clone();
    points.push(hn::CriticalPoint {
        t: 1.0,
        g_c_kink: Some(scan.1.feature.location),
        g_c_onset: scan.0,
        flagged: ((scan.1.feature.location - scan.0) / scan.0).abs() > hn::AGREEMENT_TOL,
    });
    points.extend(critical(1)?.points.iter().copied());
    hn::write_critical_csv(create("hn_critical.csv")?, &CriticalLine { points, fits: None })?;
    Ok(written)
}
