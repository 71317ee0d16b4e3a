//! Property-based checks of the library's invariants. Random operators are
//! drawn from seeded generators, so proptest explores (and shrinks) seeds,
//! dimensions and physical parameters rather than raw matrix entries.

use nhthermo::dynamics::{
    evolve, steady_state, steady_state_from, BathSpec, EvolveControls, Generator, NonHermitianSystem, Schedule,
    SteadyStateOptions,
};
use nhthermo::engine::high_t_closed_form;
use nhthermo::hatano_nelson::{build_spectra, hn_information, HnParams};
use nhthermo::operators::{
    delta_operator, frechet_dlog, hermiticity_defect, log_psd, relative_entropy, trace, trace_distance, von_neumann_entropy,
    DensityMatrix, HermitianOperator, EIG_CLAMP,
};
use nhthermo::random::{log_uniform, random_density, random_hermitian, random_pure, rng_from_seed, NhRng};
use nhthermo::thermo::{first_law_residual, information_flow, nh_information, thermal_decomposition};
use proptest::prelude::*;
use rand::Rng;

fn nh_instance(rng: &mut NhRng, dim: usize) -> (NonHermitianSystem, BathSpec) {
    let h = random_hermitian(rng, dim, 1.0);
    let scale = log_uniform(rng, 0.05, 0.5);
    let g = random_hermitian(rng, dim, scale);
    let temperature = log_uniform(rng, 0.3, 10.0);
    let kappa = log_uniform(rng, 0.01, 0.2);
    (NonHermitianSystem::new(h, g).unwrap(), BathSpec::site_projectors(dim, temperature, kappa).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn entropy_is_bounded_by_ln_dim(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 3, 4, 8])) {
        let rho = random_density(&mut rng_from_seed(seed), dim);
        let s = von_neumann_entropy(&rho).unwrap();
        prop_assert!((-1e-12..=(dim as f64).ln() + 1e-12).contains(&s), "S = {s}");
    }

    #[test]
    fn relative_entropy_is_non_negative(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 3, 4, 8])) {
        let mut rng = rng_from_seed(seed);
        let (rho, sigma) = (random_density(&mut rng, dim), random_density(&mut rng, dim));
        prop_assert!(relative_entropy(&rho, &sigma).unwrap() >= -1e-10);
    }

    #[test]
    fn sigma_delta_is_traceless(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let sigma = random_density(&mut rng, dim);
        let h = random_hermitian(&mut rng, dim, 1.0);
        let delta = delta_operator(&sigma, &h, EIG_CLAMP).unwrap();
        prop_assert!(trace(&(sigma.matrix() * delta.matrix())).norm() < 1e-9);
    }

    #[test]
    fn frechet_dlog_is_linear(seed in any::<u64>(), dim in 2usize..=4, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = rng_from_seed(seed);
        let sigma = random_density(&mut rng, dim);
        let (x, y) = (random_hermitian(&mut rng, dim, 1.0), random_hermitian(&mut rng, dim, 1.0));
        let combo = x.matrix().scale(a) + y.matrix().scale(b);
        let lhs = frechet_dlog(&sigma, &combo, EIG_CLAMP).unwrap().value;
        let rhs = frechet_dlog(&sigma, x.matrix(), EIG_CLAMP).unwrap().value.scale(a)
            + frechet_dlog(&sigma, y.matrix(), EIG_CLAMP).unwrap().value.scale(b);
        prop_assert!((&lhs - &rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn log_of_exp_is_identity(seed in any::<u64>(), dim in 2usize..=4, radius in 0.1f64..8.0) {
        // A spectral spread of 2r costs about ε·e^{2r} in the smallest
        // eigenvalue of e^A, so r ≤ 8 is where 1e-8 is attainable in f64.
        let mut rng = rng_from_seed(seed);
        let a = random_hermitian(&mut rng, dim, 1.0);
        let peak = a.eig().unwrap().values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let a = a.scaled(radius / peak);
        let rho = DensityMatrix::from_unnormalized(a.exp().unwrap().matrix()).unwrap();
        let ln_z = a.exp().unwrap().matrix().trace().re.ln();
        let back = log_psd(&rho, EIG_CLAMP).unwrap();
        let shifted = &a - &HermitianOperator::identity(dim).scaled(ln_z);
        prop_assert!((back.matrix() - shifted.matrix()).norm() < 1e-8);
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let (sys, bath) = nh_instance(&mut rng, dim);
        let rho = random_density(&mut rng, dim);
        let rate = Generator::new(&sys, &bath).unwrap().apply(rho.matrix());
        prop_assert!(trace(&rate).norm() < 1e-12);
        prop_assert!(hermiticity_defect(&rate) < 1e-12);
    }

    #[test]
    fn information_flow_vanishes_without_nonreciprocity(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let sys = NonHermitianSystem::hermitian(random_hermitian(&mut rng, dim, 1.0));
        let bath = BathSpec::site_projectors(dim, log_uniform(&mut rng, 0.3, 10.0), 0.05).unwrap();
        let dec = thermal_decomposition(&sys, &bath, &SteadyStateOptions::default()).unwrap();
        let rho = random_density(&mut rng, dim);
        let j = information_flow(&sys, &bath, &rho, &dec).unwrap();
        prop_assert!(j.abs() < 1e-10, "J_S = {j}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_steady_state_is_gibbs(seed in any::<u64>(), dim in 2usize..=6, beta in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let mut rng = rng_from_seed(seed);
        let sys = NonHermitianSystem::hermitian(random_hermitian(&mut rng, dim, 1.0));
        let bath = BathSpec::site_projectors(dim, 1.0 / beta, 0.05).unwrap();
        let sigma = steady_state(&sys, &bath, &SteadyStateOptions::default()).unwrap();
        let gibbs = DensityMatrix::gibbs(sys.h(), beta).unwrap();
        prop_assert!((sigma.matrix() - gibbs.matrix()).norm() < 1e-7);
    }

    #[test]
    fn steady_information_is_relative_entropy_to_gibbs(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let (sys, bath) = nh_instance(&mut rng, dim);
        let dec = thermal_decomposition(&sys, &bath, &SteadyStateOptions::default()).unwrap();
        let i = nh_information(&dec.sigma, &dec).unwrap();
        let d = relative_entropy(&dec.sigma, &DensityMatrix::gibbs(sys.h(), bath.beta()).unwrap()).unwrap();
        prop_assert!(i >= -1e-10);
        prop_assert!((i - d).abs() < 1e-8, "{i} vs {d}");
        prop_assert!(nhthermo::dynamics::generator_residual(&sys, &bath, &dec.sigma).unwrap() < 1e-10);
    }

    #[test]
    fn information_is_a_state_function(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let (sys, bath) = nh_instance(&mut rng, dim);
        let opts = SteadyStateOptions::default();
        let from_mixed = thermal_decomposition(&sys, &bath, &opts).unwrap();
        let pure = random_pure(&mut rng, dim);
        let sigma = steady_state_from(&sys, &bath, &pure, &opts).unwrap();
        let i_mixed = nh_information(&from_mixed.sigma, &from_mixed).unwrap();
        let dec = nhthermo::thermo::ThermalDecomposition::from_steady_state(&sys, bath.beta(), sigma).unwrap();
        let i_pure = nh_information(&dec.sigma, &dec).unwrap();
        prop_assert!((i_mixed - i_pure).abs() < 1e-9);
    }

    #[test]
    fn pure_states_stay_pure_without_a_bath(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let (sys, _) = nh_instance(&mut rng, dim);
        let bath = BathSpec::new(1.0, 0.0, vec![]).unwrap();
        let traj = evolve(&sys, &bath, &random_pure(&mut rng, dim), 5.0, &EvolveControls::default()).unwrap();
        for rho in &traj.states {
            prop_assert!((rho.purity() - 1.0).abs() < 1e-8);
        }
        prop_assert!(traj.max_trace_error() < 1e-10);
    }

    #[test]
    fn first_law_holds_along_a_driven_trajectory(seed in any::<u64>(), dim in 2usize..=3) {
        let mut rng = rng_from_seed(seed);
        let (sys, bath) = nh_instance(&mut rng, dim);
        let drive = random_hermitian(&mut rng, dim, 0.5);
        let (h0, g0) = (sys.h().clone(), sys.gamma().clone());
        let protocol = Schedule(move |t: f64| {
            NonHermitianSystem::new(&h0 + &drive.scaled((0.3 * t).sin()), g0.clone()).unwrap()
        });
        let rho0 = random_density(&mut rng, dim);
        // The residual differentiates U on the sample grid, so the grid must
        // resolve the drive.
        let controls = EvolveControls { max_step: 0.01, ..EvolveControls::default() };
        let traj = evolve(&protocol, &bath, &rho0, 10.0, &controls).unwrap();
        let r = first_law_residual(&protocol, &bath, &traj).unwrap();
        prop_assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn relaxation_approaches_the_steady_state(seed in any::<u64>(), dim in 2usize..=3) {
        let mut rng = rng_from_seed(seed);
        let (sys, bath) = nh_instance(&mut rng, dim);
        let sigma = steady_state(&sys, &bath, &SteadyStateOptions::default()).unwrap();
        let rho0 = random_density(&mut rng, dim);
        let controls = EvolveControls { integrator: nhthermo::dynamics::Integrator::Magnus4, ..EvolveControls::default() };
        let traj = evolve(&sys, &bath, &rho0, 60.0 / bath.kappa(), &controls).unwrap();
        let start = trace_distance(&rho0, &sigma).unwrap();
        prop_assert!(trace_distance(traj.final_state(), &sigma).unwrap() < 1e-3 * start.max(1e-3) + 1e-9);
    }

    #[test]
    fn chain_levels_are_ordered_and_fill_the_particle_number(
        l in 20usize..300, g in 0.0f64..2.0, t in 0.05f64..20.0,
    ) {
        let p = HnParams::new(l, 1.0, g, t);
        let s = build_spectra(&p).unwrap();
        prop_assert!(s.mu() < s.levels_t[0] && s.mu0() < s.levels_0[0]);
        let occ = s.occupations(p.beta());
        prop_assert!(occ.iter().all(|&n| n > 0.0));
        let total: f64 = occ.iter().sum();
        prop_assert!(((total - l as f64) / l as f64).abs() < 1e-8);
        prop_assert!(s.levels_t.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(hn_information(&p).unwrap() >= -1e-9);
    }

    #[test]
    fn reciprocal_levels_ignore_g(l in 20usize..300, t in 0.05f64..20.0, g in 0.0f64..3.0) {
        let a = build_spectra(&HnParams::new(l, 1.0, 0.0, t)).unwrap();
        let b = build_spectra(&HnParams::new(l, 1.0, g, t)).unwrap();
        prop_assert_eq!(a.levels_0, b.levels_0);
    }

    #[test]
    fn closed_form_is_even_and_continuous(gamma in 0.0f64..3.0) {
        let f = high_t_closed_form;
        prop_assert_eq!(f(gamma), f(-gamma));
        let h = 1e-9;
        prop_assert!((f(gamma + h) - f(gamma)).abs() < 1e-6);
    }
}

#[test]
fn closed_form_derivative_jumps_only_at_the_exceptional_point() {
    let f = high_t_closed_form;
    let slope = |a: f64, b: f64| (f(b) - f(a)) / (b - a);
    let h = 1e-6;
    let jump_at = |g: f64| (slope(g, g + h) - slope(g - h, g)).abs();
    assert!(jump_at(1.0) > 1e-2, "no slope jump at γ = 1");
    let mut rng = rng_from_seed(3);
    for _ in 0..200 {
        let g: f64 = rng.random_range(0.0..2.5);
        if (g - 1.0).abs() > 1e-3 {
            assert!(jump_at(g) < 1e-2, "slope jump at γ = {g}");
        }
    }
}
