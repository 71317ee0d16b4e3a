//! Steady states `Dσ = 0`.
//!
//! Long-time propagation is done exactly by repeated squaring of the
//! propagator `exp(𝓛Δt)` of the linear unnormalized generator, which projects
//! any seed onto the dominant eigenvector of `𝓛`. Newton iterations on the
//! trace-constrained fixed-point equation then polish the result.

use nalgebra::DVector;

use crate::dynamics::generator::{unvectorize, vectorize, Generator};
use crate::dynamics::system::{BathSpec, NonHermitianSystem};
use crate::error::{Error, Result};
use crate::operators::{expm, hermitian_part, trace, CMatrix, DensityMatrix, C64};
use crate::random::{random_density, rng_from_seed};

/// Options of [`steady_state`].
#[derive(Clone, Debug)]
pub struct SteadyStateOptions {
    /// Required residual `‖Dσ‖_F`.
    pub tol: f64,
    /// Newton iteration budget.
    pub max_newton: usize,
    /// Propagation horizon in units of `1/κ`.
    pub horizon_kappa: f64,
    /// Number of random seeds propagated next to the maximally mixed state.
    pub random_seeds: usize,
    /// Seed of the generator drawing the random initial states.
    pub seed: u64,
    /// Seeds whose fixed points differ by more than this (Frobenius) are ambiguous.
    pub agreement_tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton: 50, horizon_kappa: 1e6, random_seeds: 3, seed: 0x5eed, agreement_tol: 1e-6 }
    }
}

/// `‖Dσ‖_F` for the frozen system and bath.
pub fn generator_residual(sys: &NonHermitianSystem, bath: &BathSpec, sigma: &DensityMatrix) -> Result<f64> {
    Ok(Generator::new(sys, bath)?.rate(sigma)?.norm())
}

/// Steady state of `D` for `κ > 0`, checked for uniqueness across seeds.
pub fn steady_state(sys: &NonHermitianSystem, bath: &BathSpec, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    if !(bath.kappa() > 0.0) {
        return Err(Error::param("kappa", "steady_state needs kappa > 0 to select a unique fixed point"));
    }
    let gen = Generator::new(sys, bath)?;
    let dim = sys.dim();
    let propagator = long_time_propagator(&gen, opts.horizon_kappa / bath.kappa());
    let mut rng = rng_from_seed(opts.seed);
    let mut seeds = vec![DensityMatrix::maximally_mixed(dim)];
    seeds.extend((0..opts.random_seeds).map(|_| random_density(&mut rng, dim)));
    let mut found: Option<DensityMatrix> = None;
    let mut best_err: Option<Error> = None;
    for seed in &seeds {
        let v = &propagator * vectorize(seed.matrix());
        let m = unvectorize(&v, dim);
        let tr = trace(&m).re;
        if !(tr.abs() > 1e-300) || !tr.is_finite() {
            continue;
        }
        let candidate = match DensityMatrix::project(&hermitian_part(&m.unscale(tr))) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let sigma = match newton_refine(&gen, &candidate, opts.tol, opts.max_newton) {
            Ok(s) => s,
            Err(e) => {
                best_err = Some(e);
                continue;
            }
        };
        match &found {
            None => found = Some(sigma),
            Some(first) => {
                let distance = (first.matrix() - sigma.matrix()).norm();
                if distance > opts.agreement_tol {
                    return Err(Error::AmbiguousSteadyState { distance });
                }
            }
        }
    }
    found.ok_or_else(|| {
        best_err.unwrap_or(Error::NonConvergence { solver: "steady_state", iterations: 0, residual: f64::NAN })
    })
}

/// Newton polish from a nearby guess (e.g. the previous node of a protocol),
/// falling back to the full seeded solve if the polish fails.
pub fn steady_state_from(
    sys: &NonHermitianSystem,
    bath: &BathSpec,
    guess: &DensityMatrix,
    opts: &SteadyStateOptions,
) -> Result<DensityMatrix> {
    let gen = Generator::new(sys, bath)?;
    match newton_refine(&gen, guess, opts.tol, opts.max_newton) {
        Ok(s) => Ok(s),
        Err(_) => steady_state(sys, bath, opts),
    }
}

/// `exp(𝓛 T)` up to normalization, by repeated squaring of a short-time step.
fn long_time_propagator(gen: &Generator, horizon: f64) -> CMatrix {
    let l = gen.superoperator();
    let n = l.nrows();
    let scale = l.norm().max(1e-300);
    let dt = 0.5 / scale;
    let mut p = expm(&(&l * C64::new(dt, 0.0)));
    let squarings = (horizon / dt).log2().ceil().max(1.0) as usize;
    for _ in 0..squarings {
        p = &p * &p;
        let m = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(m > 0.0 && m.is_finite()) {
            break;
        }
        p.unscale_mut(m);
    }
    debug_assert_eq!(p.nrows(), n);
    p
}

/// Newton iteration on `F(ρ) = 𝓛ρ − tr(𝓛ρ)ρ = 0` with the constraint `tr ρ = 1`,
/// solving the augmented linear system in the least-squares sense by SVD.
pub fn newton_refine(gen: &Generator, guess: &DensityMatrix, tol: f64, max_iter: usize) -> Result<DensityMatrix> {
    let dim = guess.dim();
    let n = dim * dim;
    let l = gen.superoperator();
    let t_row = vectorize(&CMatrix::identity(dim, dim)).transpose();
    let tl = &t_row * &l;
    let mut x = vectorize(guess.matrix());
    let mut best: Option<(f64, DVector<C64>)> = None;
    let residual_of = |x: &DVector<C64>| -> f64 {
        let m = hermitian_part(&unvectorize(x, dim));
        gen.apply(&m).norm()
    };
    for it in 0..=max_iter {
        let r = residual_of(&x);
        if best.as_ref().map_or(true, |(b, _)| r < *b) {
            best = Some((r, x.clone()));
        }
        if r < 1e-3 * tol || it == max_iter {
            break;
        }
        let lx = &l * &x;
        let growth = (&tl * &x)[0];
        let f = &lx - &x * growth;
        let mut a = CMatrix::zeros(n + 1, n);
        let jac = &l - &x * &tl - CMatrix::identity(n, n) * growth;
        a.view_mut((0, 0), (n, n)).copy_from(&jac);
        a.view_mut((n, 0), (1, n)).copy_from(&t_row);
        let mut b = DVector::<C64>::zeros(n + 1);
        b.rows_mut(0, n).copy_from(&(-f));
        b[n] = C64::new(1.0, 0.0) - (&t_row * &x)[0];
        let svd = a.svd(true, true);
        let dx = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::invalid("Newton system", e.to_string()))?;
        x += dx;
        let m = hermitian_part(&unvectorize(&x, dim));
        let tr = trace(&m).re;
        x = vectorize(&m.unscale(tr));
    }
    let (res, xb) = best.expect("at least one residual evaluated");
    if !(res < tol) {
        return Err(Error::NonConvergence { solver: "steady_state Newton", iterations: max_iter, residual: res });
    }
    let sigma = DensityMatrix::new(hermitian_part(&unvectorize(&xb, dim)))?;
    Ok(sigma)
}
