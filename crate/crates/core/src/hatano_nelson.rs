//! Finite-temperature bosonic Hatano–Nelson chain.
//!
//! The open chain with asymmetric hopping `J e^{±g}` has a thermal Hamiltonian
//! equal to the reciprocal chain plus a linear potential `V j/L`, `V = gT`.
//! Since the bosons are free, everything follows from the `L` single-particle
//! levels of the two tridiagonal matrices, Bose–Einstein occupations in the
//! grand-canonical ensemble at `⟨N⟩ = N_B`, and the position moments
//! `x_n = Σ_j j |⟨j|e_nᵀ⟩|² / L` of the thermal eigenvectors.
//!
//! Chemical potentials are carried as offsets `δ = e₀ − μ > 0` below the
//! lowest level, so that occupations near condensation stay accurate.

use std::io::Write;

use rayon::prelude::*;

use crate::csv::{write_csv, Field};
use crate::error::{Error, Result};
use crate::numerics::{arange, linear_fit};
use crate::tridiag::SymTridiagonal;

/// Onset tolerance: kink and onset estimates disagreeing by more than this
/// relative amount are flagged in [`critical_line`].
pub const AGREEMENT_TOL: f64 = 0.10;
/// Default `g` step of the third-derivative scan.
pub const KINK_STEP: f64 = 0.002;
/// Default half-width of the kink window relative to the onset coupling.
pub const KINK_WINDOW: f64 = 0.10;

/// Parameters of one chain.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HnParams {
    /// Number of sites `L`.
    pub l: usize,
    /// Hopping amplitude `J`.
    pub j: f64,
    /// Skin-effect strength `g`.
    pub g: f64,
    /// Temperature.
    pub t: f64,
    /// Boson number `N_B`.
    pub n_b: usize,
}

impl HnParams {
    /// Chain at unit filling, `N_B = L`.
    pub fn new(l: usize, j: f64, g: f64, t: f64) -> Self {
        Self { l, j, g, t, n_b: l }
    }

    /// Same chain at another coupling.
    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..*self }
    }

    /// Checks `L ≥ 2`, `J > 0`, `T > 0`, `N_B ≥ 1`, finite `g`.
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::param("L", format!("need at least 2 sites, got {}", self.l)));
        }
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::param("J", format!("{} must be positive", self.j)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::param("T", format!("{} must be positive", self.t)));
        }
        if self.n_b == 0 {
            return Err(Error::param("N_B", "need at least one boson"));
        }
        if !self.g.is_finite() {
            return Err(Error::param("g", "must be finite"));
        }
        Ok(())
    }

    /// Inverse temperature.
    pub fn beta(&self) -> f64 {
        1.0 / self.t
    }

    /// Open chain with hopping `J` and on-site potential `V j/L`, `j = 1..L`.
    pub fn chain(&self, potential: f64) -> Result<SymTridiagonal> {
        let l = self.l as f64;
        let diag = (1..=self.l).map(|site| potential * site as f64 / l).collect();
        SymTridiagonal::new(diag, vec![self.j; self.l - 1])
    }

    /// Site weights `j/L` defining the position moments.
    fn weights(&self) -> Vec<f64> {
        let l = self.l as f64;
        (1..=self.l).map(|site| site as f64 / l).collect()
    }
}

/// Bose–Einstein occupation `1/(e^{βx} − 1)` of a level `x = e − μ > 0` above μ.
pub fn occupation(beta: f64, x: f64) -> f64 {
    1.0 / (beta * x).exp_m1()
}

/// `ln(1 − e^{−βx})` for `x > 0`, accurate as `x → 0⁺`.
fn ln_one_minus_boltzmann(beta: f64, x: f64) -> f64 {
    (-(-beta * x).exp_m1()).ln()
}

/// Offset `δ = e₀ − μ > 0` solving `Σ_n 1/(e^{β(e_n − e₀ + δ)} − 1) = N_B`
/// by bisection in `ln δ` on `(0, 50T]`; `levels` must be ascending.
pub fn chemical_offset(levels: &[f64], beta: f64, n_b: f64) -> Result<f64> {
    if levels.is_empty() || !(beta > 0.0) || !(n_b >= 1.0) {
        return Err(Error::invalid("chemical potential", "need levels, β > 0 and N_B ≥ 1"));
    }
    let e0 = levels[0];
    let count = |delta: f64| levels.iter().map(|&e| occupation(beta, e - e0 + delta)).sum::<f64>();
    // The ground state alone holds N_B at δ = T ln(1 + 1/N_B).
    let mut lo = 0.5 * (1.0 / n_b).ln_1p() / beta;
    let mut hi = 50.0 / beta;
    if count(hi) > n_b {
        return Err(Error::Bracket(format!("occupation at μ = e₀ − 50T still exceeds N_B = {n_b}")));
    }
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        let c = count(mid);
        if ((c - n_b) / n_b).abs() < 1e-14 {
            return Ok(mid);
        }
        if c > n_b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Chemical potential `μ < e₀` at which the levels hold `N_B` bosons.
pub fn chemical_potential(levels: &[f64], beta: f64, n_b: f64) -> Result<f64> {
    Ok(levels[0] - chemical_offset(levels, beta, n_b)?)
}

/// Reciprocal (`g = 0`) chain data shared by every `g` at fixed `(L, J, T, N_B)`.
#[derive(Clone, Debug)]
pub struct Reference {
    /// Ascending levels of the reciprocal chain.
    pub levels: Vec<f64>,
    /// `e₀ − μ₀`.
    pub delta: f64,
}

impl Reference {
    /// Diagonalizes the reciprocal chain and solves for μ₀.
    pub fn new(p: &HnParams) -> Result<Self> {
        p.validate()?;
        let levels = p.chain(0.0)?.eigenvalues()?;
        let delta = chemical_offset(&levels, p.beta(), p.n_b as f64)?;
        Ok(Self { levels, delta })
    }

    /// μ₀.
    pub fn mu(&self) -> f64 {
        self.levels[0] - self.delta
    }
}

/// Single-particle data of one chain.
#[derive(Clone, Debug)]
pub struct HnSpectrum {
    /// Ascending levels `e_nᵀ` of the thermal Hamiltonian.
    pub levels_t: Vec<f64>,
    /// Position moments `x_n = Σ_j j |⟨j|e_nᵀ⟩|² / L`.
    pub positions_t: Vec<f64>,
    /// Eigenvectors `⟨j|e_nᵀ⟩`, when requested.
    pub vectors_t: Option<Vec<Vec<f64>>>,
    /// Ascending levels `e_n` of the reciprocal chain.
    pub levels_0: Vec<f64>,
    /// `e₀ᵀ − μ`.
    pub delta: f64,
    /// `e₀ − μ₀`.
    pub delta_0: f64,
}

impl HnSpectrum {
    /// Chemical potential of the thermal Hamiltonian.
    pub fn mu(&self) -> f64 {
        self.levels_t[0] - self.delta
    }

    /// Chemical potential of the reciprocal chain.
    pub fn mu0(&self) -> f64 {
        self.levels_0[0] - self.delta_0
    }

    /// Occupations of the thermal levels.
    pub fn occupations(&self, beta: f64) -> Vec<f64> {
        let e0 = self.levels_t[0];
        self.levels_t.iter().map(|&e| occupation(beta, e - e0 + self.delta)).collect()
    }
}

/// Diagonalizes both chains and solves both chemical potentials.
pub fn build_spectra(p: &HnParams) -> Result<HnSpectrum> {
    build_spectra_with(p, &Reference::new(p)?, false)
}

/// [`build_spectra`] reusing a precomputed reciprocal chain.
pub fn build_spectra_with(p: &HnParams, reference: &Reference, keep_vectors: bool) -> Result<HnSpectrum> {
    p.validate()?;
    if reference.levels.len() != p.l {
        return Err(Error::DimensionMismatch { expected: p.l, found: reference.levels.len() });
    }
    let eig = p.chain(p.g * p.t)?.eigen_moments(&p.weights(), keep_vectors)?;
    let delta = chemical_offset(&eig.values, p.beta(), p.n_b as f64)?;
    Ok(HnSpectrum {
        levels_t: eig.values,
        positions_t: eig.moments,
        vectors_t: eig.vectors,
        levels_0: reference.levels.clone(),
        delta,
        delta_0: reference.delta,
    })
}

/// Condensate order parameter `φ₀ = n₀/N_B`.
pub fn condensate_fraction(s: &HnSpectrum, p: &HnParams) -> f64 {
    occupation(p.beta(), s.delta) / p.n_b as f64
}

/// The three contributions to the chain's non-Hermitian information content.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct InformationTerms {
    /// `−g Σ_n n_n x_n`.
    pub position: f64,
    /// `Σ_n [ln(1 − e^{−β(e_nᵀ−μ)}) − ln(1 − e^{−β(e_n−μ₀)})]`.
    pub logarithmic: f64,
    /// `β N_B (μ − μ₀)`.
    pub chemical: f64,
}

impl InformationTerms {
    /// `I_NH`.
    pub fn total(&self) -> f64 {
        self.position + self.logarithmic + self.chemical
    }

    /// Rounding scale of the sum, `ε · L · max |term|`.
    pub fn noise(&self, l: usize) -> f64 {
        f64::EPSILON * l as f64 * self.position.abs().max(self.logarithmic.abs()).max(self.chemical.abs())
    }
}

/// Term breakdown of `I_NH` from prebuilt spectra.
pub fn information_terms(s: &HnSpectrum, p: &HnParams) -> Result<InformationTerms> {
    if !(s.delta > 0.0 && s.delta_0 > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "chemical potentials must lie below the ground levels (offsets {:.3e}, {:.3e})",
            s.delta, s.delta_0
        )));
    }
    let beta = p.beta();
    let occ = s.occupations(beta);
    let position = -p.g * occ.iter().zip(&s.positions_t).map(|(n, x)| n * x).sum::<f64>();
    let (et0, e00) = (s.levels_t[0], s.levels_0[0]);
    let logarithmic = s
        .levels_t
        .iter()
        .zip(&s.levels_0)
        .map(|(&et, &e)| ln_one_minus_boltzmann(beta, et - et0 + s.delta) - ln_one_minus_boltzmann(beta, e - e00 + s.delta_0))
        .sum();
    let chemical = beta * p.n_b as f64 * ((et0 - e00) - (s.delta - s.delta_0));
    Ok(InformationTerms { position, logarithmic, chemical })
}

/// Non-Hermitian information content of the chain's steady state.
pub fn hn_information(p: &HnParams) -> Result<f64> {
    Ok(information_terms(&build_spectra(p)?, p)?.total())
}

/// One `(T, g)` point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct HnPoint {
    /// Chain parameters.
    pub params: HnParams,
    /// μ.
    pub mu: f64,
    /// μ₀.
    pub mu0: f64,
    /// Condensate fraction.
    pub phi0: f64,
    /// Information terms.
    pub terms: InformationTerms,
}

impl HnPoint {
    /// `I_NH`.
    pub fn i_nh(&self) -> f64 {
        self.terms.total()
    }
}

/// Evaluates one point against a shared reference chain.
pub fn hn_point(p: &HnParams, reference: &Reference) -> Result<HnPoint> {
    let s = build_spectra_with(p, reference, false)?;
    Ok(HnPoint { params: *p, mu: s.mu(), mu0: s.mu0(), phi0: condensate_fraction(&s, p), terms: information_terms(&s, p)? })
}

/// Evaluates `I_NH` and `φ₀` on the product grid `temperatures × gs`,
/// rows ordered by temperature then `g`.
pub fn hn_sweep(l: usize, j: f64, temperatures: &[f64], gs: &[f64]) -> Result<Vec<HnPoint>> {
    let mut out = Vec::with_capacity(temperatures.len() * gs.len());
    for &t in temperatures {
        let base = HnParams::new(l, j, 0.0, t);
        let reference = Reference::new(&base)?;
        let rows: Vec<HnPoint> = gs.par_iter().map(|&g| hn_point(&base.with_g(g), &reference)).collect::<Result<_>>()?;
        out.extend(rows);
    }
    Ok(out)
}

/// hn_sweep.csv: `L, J, T, g, mu, mu0, phi0, I_NH`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[HnPoint]) -> Result<()> {
    write_csv(
        w,
        &["L", "J", "T", "g", "mu", "mu0", "phi0", "I_NH"],
        rows.iter().map(|r| {
            vec![
                Field::from(r.params.l),
                Field::Num(r.params.j),
                Field::Num(r.params.t),
                Field::Num(r.params.g),
                Field::Num(r.mu),
                Field::Num(r.mu0),
                Field::Num(r.phi0),
                Field::Num(r.i_nh()),
            ]
        }),
    )
}

/// Thermal capacity of the excited levels with μ pinned at the ground level,
/// `Σ_{n≥1} 1/(e^{β(e_n − e₀)} − 1)`.
pub fn excited_capacity(p: &HnParams) -> Result<f64> {
    let levels = p.chain(p.g * p.t)?.eigenvalues()?;
    let beta = p.beta();
    Ok(levels[1..].iter().map(|&e| occupation(beta, e - levels[0])).sum())
}

/// Condensation onset: the coupling at which the excited levels can no
/// longer hold all `N_B` bosons, found by Illinois regula falsi in `g`.
/// Returns 0 when the chain already saturates at `g = 0`.
pub fn onset_coupling(base: &HnParams) -> Result<f64> {
    base.validate()?;
    let n_b = base.n_b as f64;
    let f = |g: f64| -> Result<f64> { Ok(excited_capacity(&base.with_g(g))?.ln() - n_b.ln()) };
    let (mut a, mut fa) = (0.0, f(0.0)?);
    if fa <= 0.0 {
        return Ok(0.0);
    }
    let mut b = 1.0;
    let mut fb = f(b)?;
    while fb > 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        if b > 1e4 {
            return Err(Error::Bracket("no condensation onset below g = 1e4".into()));
        }
        fb = f(b)?;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() < 1e-12 * b.abs().max(1.0) {
            return Ok(c);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::NonConvergence { solver: "onset", iterations: 200, residual: (b - a).abs() })
}

/// Five-point central third derivative of uniformly sampled values, at the
/// interior nodes `2..n−2`; returns `(g, d³y/dg³)` pairs.
pub fn third_derivative(grid: &[f64], values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let h = uniform_step(grid)?;
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    Ok((2..grid.len() - 2)
        .map(|i| {
            let d3 = (values[i + 2] - 2.0 * values[i + 1] + 2.0 * values[i - 1] - values[i - 2]) / (2.0 * h * h * h);
            (grid[i], d3)
        })
        .collect())
}

fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 7 {
        return Err(Error::Resolution("third-derivative scan needs at least seven points".into()));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) || grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-3)) {
        return Err(Error::Resolution("g grid must be uniform and ascending".into()));
    }
    Ok(h)
}

/// A localized feature of `d³I/dg³`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KinkFeature {
    /// Location of the largest `|d³I/dg³|` in the window.
    pub location: f64,
    /// `d³I/dg³` at the feature.
    pub peak: f64,
    /// Height of `|d³I/dg³|` above the larger window-edge value, in units of
    /// the rounding-noise floor of the stencil.
    pub prominence: f64,
    /// Grid step used.
    pub step: f64,
}

/// Locates the maximal-magnitude feature of `d³y/dg³` on a uniform grid.
/// `value_noise` is the absolute rounding error of the samples. The maximum
/// must be interior and rise above both window edges by ten times the
/// stencil noise `3·value_noise/h³`; a smooth monotone `|d³y|` has no feature.
pub fn third_derivative_feature(grid: &[f64], values: &[f64], value_noise: f64) -> Result<KinkFeature> {
    let h = uniform_step(grid)?;
    let d3 = third_derivative(grid, values)?;
    let mags: Vec<f64> = d3.iter().map(|x| x.1.abs()).collect();
    let (k, &top) = mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty derivative");
    if k == 0 || k + 1 == mags.len() {
        return Err(Error::Resolution(format!("third-derivative maximum at window edge g = {}", d3[k].0)));
    }
    let floor = 3.0 * value_noise.max(f64::MIN_POSITIVE) / (h * h * h);
    let edge = mags[0].max(mags[mags.len() - 1]);
    let prominence = (top - edge) / floor;
    if prominence < 10.0 {
        return Err(Error::Resolution(format!("no third-derivative feature above noise (prominence {prominence:.2})")));
    }
    Ok(KinkFeature { location: d3[k].0, peak: d3[k].1, prominence, step: h })
}

/// Result of a kink scan: the confirmed feature and the sampled points.
#[derive(Clone, Debug, serde::Serialize)]
pub struct KinkScan {
    /// Feature located on the refined grid.
    pub feature: KinkFeature,
    /// Points of the coarse scan.
    pub coarse: Vec<HnPoint>,
    /// Points of the refined scan around the feature (step `h/2`).
    pub fine: Vec<HnPoint>,
}

fn scan_points(base: &HnParams, reference: &Reference, grid: &[f64]) -> Result<Vec<HnPoint>> {
    grid.par_iter().map(|&g| hn_point(&base.with_g(g), reference)).collect()
}

fn feature_of(base: &HnParams, grid: &[f64], points: &[HnPoint]) -> Result<KinkFeature> {
    let values: Vec<f64> = points.iter().map(HnPoint::i_nh).collect();
    let noise = points.iter().map(|p| p.terms.noise(base.l)).fold(0.0, f64::max);
    third_derivative_feature(grid, &values, noise)
}

/// Third-derivative kink of `I_NH(g)` on `[g_lo, g_hi]` with step `h`,
/// confirmed by re-scanning `±6h` around it at `h/2` (the location must move
/// by less than `2h`).
pub fn third_derivative_kink(base: &HnParams, g_lo: f64, g_hi: f64, h: f64) -> Result<KinkScan> {
    base.validate()?;
    if !(h > 0.0 && h <= KINK_STEP + 1e-15) {
        return Err(Error::param("g-step", format!("{h} must lie in (0, {KINK_STEP}]")));
    }
    let reference = Reference::new(base)?;
    let coarse_grid = arange(g_lo, g_hi, h);
    let coarse = scan_points(base, &reference, &coarse_grid)?;
    let rough = feature_of(base, &coarse_grid, &coarse)?;
    // The refined grid interleaves midpoints with the coarse nodes, which are
    // reused rather than recomputed.
    let centre = coarse_grid.iter().position(|&g| g == rough.location).expect("feature lies on the grid");
    let fine_grid: Vec<f64> = (-12i64..=12)
        .map(|k| {
            let i = centre as i64 + k.div_euclid(2);
            match (k.rem_euclid(2), usize::try_from(i).ok().and_then(|i| coarse_grid.get(i).map(|g| (i, *g)))) {
                (0, Some((_, g))) => g,
                (1, Some((i, g))) if i + 1 < coarse_grid.len() => 0.5 * (g + coarse_grid[i + 1]),
                _ => rough.location + 0.5 * h * k as f64,
            }
        })
        .collect();
    let fresh: Vec<f64> = fine_grid.iter().copied().filter(|g| !coarse_grid.contains(g)).collect();
    let mut computed = scan_points(base, &reference, &fresh)?.into_iter();
    let fine: Vec<HnPoint> = fine_grid
        .iter()
        .map(|g| match coarse_grid.iter().position(|c| c == g) {
            Some(i) => coarse[i],
            None => computed.next().expect("one fresh point per new node"),
        })
        .collect();
    let feature = feature_of(base, &fine_grid, &fine)?;
    if (feature.location - rough.location).abs() >= 2.0 * h {
        return Err(Error::Resolution(format!(
            "kink location unstable under step halving: {} vs {}",
            rough.location, feature.location
        )));
    }
    Ok(KinkScan { feature, coarse, fine })
}

/// Kink search in the window `(1 ± KINK_WINDOW)·g_c` around a given onset.
pub fn kink_near(base: &HnParams, onset: f64) -> Result<KinkScan> {
    if !(onset > 0.0) {
        return Err(Error::Resolution("no positive onset coupling to centre the kink window".into()));
    }
    third_derivative_kink(base, onset * (1.0 - KINK_WINDOW), onset * (1.0 + KINK_WINDOW), KINK_STEP)
}

/// One row of the critical line.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CriticalPoint {
    /// Temperature.
    pub t: f64,
    /// Third-derivative estimate (if computed and resolved).
    pub g_c_kink: Option<f64>,
    /// Condensation-onset estimate.
    pub g_c_onset: f64,
    /// Set when the two estimates disagree by more than [`AGREEMENT_TOL`] or
    /// the kink was requested but unresolved.
    pub flagged: bool,
}

/// Scaling fits of the critical line.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ScalingFits {
    /// `(a, p)` of `g_c = a T^p`.
    pub power_law: (f64, f64),
    /// `b` of `g_c = b + ln(T/J)`.
    pub log_offset: f64,
    /// Largest `|g_c − b − ln(T/J)| / g_c`.
    pub log_residual: f64,
}

/// Critical line with scaling fits (absent for a single temperature).
#[derive(Clone, Debug, serde::Serialize)]
pub struct CriticalLine {
    /// One row per temperature.
    pub points: Vec<CriticalPoint>,
    /// Fits of the onset coupling against `T`.
    pub fits: Option<ScalingFits>,
}

/// Fits `g = a T^p` on log–log axes.
pub fn power_law_fit(ts: &[f64], gs: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let (c, p) = linear_fit(&lx, &ly);
    (c.exp(), p)
}

/// Fits `g = b + ln(T/J)`; returns `b` and the largest relative residual.
pub fn log_offset_fit(ts: &[f64], gs: &[f64], j: f64) -> (f64, f64) {
    let b = ts.iter().zip(gs).map(|(t, g)| g - (t / j).ln()).sum::<f64>() / ts.len() as f64;
    let residual = ts.iter().zip(gs).map(|(t, g)| ((g - b - (t / j).ln()) / g).abs()).fold(0.0, f64::max);
    (b, residual)
}

/// Critical coupling versus temperature from the condensation onset, with
/// the third-derivative estimate alongside when `with_kink`.
pub fn critical_line(temperatures: &[f64], l: usize, j: f64, with_kink: bool) -> Result<CriticalLine> {
    if temperatures.is_empty() {
        return Err(Error::param("T", "need at least one temperature"));
    }
    let points: Vec<CriticalPoint> = temperatures
        .par_iter()
        .map(|&t| {
            let base = HnParams::new(l, j, 0.0, t);
            let onset = onset_coupling(&base)?;
            let kink = if with_kink {
                match kink_near(&base, onset) {
                    Ok(k) => Some(k.feature.location),
                    Err(Error::Resolution(_)) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let flagged = with_kink && kink.is_none_or(|k| ((k - onset) / onset).abs() > AGREEMENT_TOL);
            Ok(CriticalPoint { t, g_c_kink: kink, g_c_onset: onset, flagged })
        })
        .collect::<Result<_>>()?;
    let fits = (points.len() >= 2).then(|| {
        let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
        let gs: Vec<f64> = points.iter().map(|p| p.g_c_onset).collect();
        let (log_offset, log_residual) = log_offset_fit(&ts, &gs, j);
        ScalingFits { power_law: power_law_fit(&ts, &gs), log_offset, log_residual }
    });
    Ok(CriticalLine { points, fits })
}

/// hn_critical.csv: `T, g_c_kink, g_c_onset, flag` (`nan` for a missing kink).
pub fn write_critical_csv<W: Write>(w: W, line: &CriticalLine) -> Result<()> {
    write_csv(
        w,
        &["T", "g_c_kink", "g_c_onset", "flag"],
        line.points.iter().map(|p| {
            vec![
                Field::Num(p.t),
                Field::Num(p.g_c_kink.unwrap_or(f64::NAN)),
                Field::Num(p.g_c_onset),
                Field::Int(i64::from(p.flagged)),
            ]
        }),
    )
}

/// Dense reference for [`hn_information`]: full diagonalization, the
/// single-particle correlation matrix, and
/// `D(σ‖ρ_G) = −S(σ) − tr σ ln ρ_G` for Gaussian bosonic states.
///
/// Shares no code with the tridiagonal route; costs `O(L³)`, so it is meant
/// for validation at a few hundred sites.
pub fn dense_reference_information(p: &HnParams) -> f64 {
    let l = p.l;
    let beta = p.beta();
    let dense = |v: f64| {
        nalgebra::DMatrix::from_fn(l, l, |a, b| {
            if a == b {
                v * (a + 1) as f64 / l as f64
            } else if a.abs_diff(b) == 1 {
                p.j
            } else {
                0.0
            }
        })
    };
    let solve_mu = |levels: &[f64]| {
        let e0 = levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let count = |mu: f64| levels.iter().map(|e| 1.0 / ((beta * (e - mu)).exp() - 1.0)).sum::<f64>();
        let (mut lo, mut hi) = (e0 - 50.0 * p.t, e0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > p.n_b as f64 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let ht = dense(p.g * p.t).symmetric_eigen();
    let h0m = dense(0.0);
    let lv0: Vec<f64> = h0m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    let lvt: Vec<f64> = ht.eigenvalues.iter().copied().collect();
    let (mu, mu0) = (solve_mu(&lvt), solve_mu(&lv0));
    let occ: Vec<f64> = lvt.iter().map(|e| 1.0 / ((beta * (e - mu)).exp() - 1.0)).collect();
    let corr = &ht.eigenvectors * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(occ.clone())) * ht.eigenvectors.transpose();
    let entropy: f64 = occ.iter().map(|n| (1.0 + n) * (1.0 + n).ln() - n * n.ln()).sum();
    let ln_z0: f64 = -lv0.iter().map(|e| (1.0 - (-beta * (e - mu0)).exp()).ln()).sum::<f64>();
    let shifted = h0m - nalgebra::DMatrix::identity(l, l) * mu0;
    let cross = beta * (shifted * corr).trace() + ln_z0;
    cross - entropy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_term_form_matches_dense_relative_entropy() {
        for (g, t) in [(0.5, 1.0), (1.5, 1.0), (0.3, 0.2)] {
            let p = HnParams::new(200, 1.0, g, t);
            let ours = hn_information(&p).unwrap();
            let oracle = dense_reference_information(&p);
            assert!((ours - oracle).abs() < 1e-8, "g={g} T={t}: {ours} vs {oracle}");
        }
    }

    #[test]
    fn reciprocal_chain_has_no_information() {
        let p = HnParams::new(300, 1.0, 0.0, 1.0);
        let s = build_spectra(&p).unwrap();
        assert_eq!(s.levels_t, s.levels_0);
        assert_eq!(s.mu(), s.mu0());
        let terms = information_terms(&s, &p).unwrap();
        assert_eq!((terms.position, terms.logarithmic, terms.chemical), (0.0, 0.0, 0.0));
    }

    #[test]
    fn chemical_potential_cases() {
        let mu = chemical_potential(&[0.7], 2.0, 1.0).unwrap();
        assert!((mu - (0.7 - 0.5 * std::f64::consts::LN_2)).abs() < 1e-13);
        let levels: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let delta = chemical_offset(&levels, 1e3, 50.0).unwrap();
        assert!(occupation(1e3, delta) / 50.0 > 0.999);
    }

    #[test]
    fn chemical_potential_matches_dense_scan() {
        let p = HnParams::new(1000, 1.0, 0.0, 1.0);
        let r = Reference::new(&p).unwrap();
        let count = |mu: f64| r.levels.iter().map(|e| 1.0 / ((e - mu).exp() - 1.0)).sum::<f64>() - 1000.0;
        // Dense scan for a sign change, then bisection on the bracketing cell.
        let e0 = r.levels[0];
        let scan: Vec<f64> = (1..=20000).map(|k| e0 - 50.0 * (k as f64 / 20000.0).powi(6)).collect();
        let cell = scan.windows(2).find(|w| count(w[0]) * count(w[1]) <= 0.0).unwrap();
        let (mut lo, mut hi) = (cell[1], cell[0]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((r.mu() - 0.5 * (lo + hi)).abs() < 1e-8);
        let total: f64 = r.levels.iter().map(|e| occupation(1.0, e - r.mu())).sum();
        assert!((total / 1000.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reciprocal_levels_are_g_independent_and_in_band() {
        let a = Reference::new(&HnParams::new(500, 1.0, 0.0, 1.0)).unwrap();
        for g in [0.5, 2.0] {
            let s = build_spectra(&HnParams::new(500, 1.0, g, 1.0)).unwrap();
            assert_eq!(s.levels_0, a.levels);
        }
        assert!(a.levels.iter().all(|e| e.abs() <= 2.0));
    }

    #[test]
    fn phases_of_eigenvectors_do_not_matter() {
        let p = HnParams::new(120, 1.0, 0.8, 1.0);
        let r = Reference::new(&p).unwrap();
        let s = build_spectra_with(&p, &r, true).unwrap();
        let weights = p.weights();
        let mut rng = crate::random::rng_from_seed(17);
        for (v, x) in s.vectors_t.as_ref().unwrap().iter().zip(&s.positions_t) {
            let phase = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
            let rephased: Vec<num_complex::Complex64> = v.iter().map(|c| num_complex::Complex64::from_polar(*c, phase)).collect();
            let moment: f64 = rephased.iter().zip(&weights).map(|(c, w)| w * c.norm_sqr()).sum();
            assert!((moment - x).abs() < 1e-13);
        }
    }

    #[test]
    fn cold_chains_condense_and_warm_reciprocal_chains_do_not() {
        let cold = HnParams::new(2000, 1.0, 1.0, 0.1);
        assert!(condensate_fraction(&build_spectra(&cold).unwrap(), &cold) > 0.1);
        let warm = HnParams::new(2000, 1.0, 0.0, 1.0);
        assert!(condensate_fraction(&build_spectra(&warm).unwrap(), &warm) < 10.0 / 2000.0);
    }

    #[test]
    fn cubic_has_no_feature() {
        let grid = arange(0.5, 1.5, 0.002);
        let vals: Vec<f64> = grid.iter().map(|g| 3.0 * g * g * g - g + 2.0).collect();
        let noise = 8.0 * f64::EPSILON * 4.0;
        assert!(matches!(third_derivative_feature(&grid, &vals, noise), Err(Error::Resolution(_))));
    }

    #[test]
    fn single_temperature_line_has_no_fit() {
        let line = critical_line(&[1.0], 400, 1.0, false).unwrap();
        assert_eq!(line.points.len(), 1);
        assert!(line.fits.is_none());
        assert!(line.points[0].g_c_onset > 0.0);
    }

    #[test]
    fn information_grows_with_skin_strength() {
        let base = HnParams::new(300, 1.0, 0.0, 1.0);
        let r = Reference::new(&base).unwrap();
        let vals: Vec<f64> = [0.2, 0.6, 1.0, 1.4].iter().map(|&g| hn_point(&base.with_g(g), &r).unwrap().i_nh()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]) && vals[0] > 0.0);
    }
}
