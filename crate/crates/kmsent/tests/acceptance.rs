//! Full-system checks of the library's headline properties, one summary
//! line per check. These run the same public entry points the CLI uses,
//! at the scales and tolerances the library promises.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kmsent::engine::GridSettings;
use kmsent::findim::expansions::{
    dyson_evolution, log_partition_expansion, perturbed_state_expansion, taylor_coefficients,
    taylor_matrix_coefficients,
};
use kmsent::findim::series::SeriesElement;
use kmsent::findim::{self, CMat, FiniteSystem};
use kmsent::functionals::{GaussianProfile, SharedProfileFunctional};
use kmsent::thermal::{self, ThermalParams};
use kmsent::{adiabatic, engine};

fn random_system(rng: &mut ChaCha8Rng, index: usize) -> (FiniteSystem, f64) {
    let dims = [2usize, 3, 4, 6];
    let dim = dims[index % dims.len()];
    let beta = rng.gen_range(0.2..4.0);
    let t = rng.gen_range(-3.0..3.0);
    let seed: u64 = rng.gen();
    (FiniteSystem::random(dim, beta, seed).unwrap(), t)
}

struct FieldConfig {
    params: ThermalParams,
    k1: SharedProfileFunctional,
    k2: SharedProfileFunctional,
    k3: SharedProfileFunctional,
    t: f64,
}

fn random_field(rng: &mut ChaCha8Rng) -> FieldConfig {
    let beta = rng.gen_range(0.5..2.5);
    let mass = rng.gen_range(0.5..2.0);
    let params = ThermalParams::new(beta, mass, 2).unwrap();
    let profile =
        GaussianProfile::new(rng.gen_range(0.5..1.5), rng.gen_range(0.5..2.0)).unwrap();
    let orders = rng.gen_range(1..=3usize);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..orders).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let k1 = SharedProfileFunctional::new(draw(rng), profile).unwrap();
    let k2 = SharedProfileFunctional::new(draw(rng), profile).unwrap();
    let k3 = SharedProfileFunctional::new(draw(rng), profile).unwrap();
    let t = rng.gen_range(-3.0..3.0);
    FieldConfig {
        params,
        k1,
        k2,
        k3,
        t,
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn closed_formula_matches_exact_relative_entropy_on_random_systems() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for index in 0..100 {
        let (sys, t) = random_system(&mut rng, index);
        let formula = findim::relative_entropy_formula(&sys, t);
        let exact = findim::evolved_state_relative_entropy(&sys, t).unwrap();
        let gap = (formula - exact).abs();
        assert!(
            gap <= 1e-9,
            "system {index} (dim {}, beta {:.3}, t {:.3}): |formula - exact| = {gap:.3e}",
            sys.dim(),
            sys.beta(),
            t
        );
        worst = worst.max(gap);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:.2?}");
    println!(
        "PASS closed formula vs exact relative entropy: worst gap {worst:.3e} over 100 systems in {elapsed:.2?}"
    );
}

#[test]
fn relative_entropy_is_nonnegative_and_vanishes_on_matching_states() {
    let start = Instant::now();
    let settings = GridSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut lowest = f64::INFINITY;
    for index in 0..200 {
        let cfg = random_field(&mut rng);
        let total = engine::rel_entropy_total(
            &cfg.k1, &cfg.k2, &cfg.k3, cfg.t, &cfg.params, &settings,
        )
        .unwrap()
        .total;
        assert!(
            total >= -1e-10,
            "config {index}: total = {total:.3e} at t = {:.3}",
            cfg.t
        );
        lowest = lowest.min(total);
    }
    // matching endpoint states at t = 0, arbitrary intermediate dynamics
    let mut worst_zero = 0.0f64;
    for _ in 0..10 {
        let cfg = random_field(&mut rng);
        let total = engine::rel_entropy_total(
            &cfg.k1, &cfg.k2, &cfg.k1, 0.0, &cfg.params, &settings,
        )
        .unwrap()
        .total;
        assert!(total.abs() <= 1e-12, "K1 = K3 at t = 0: total = {total:.3e}");
        worst_zero = worst_zero.max(total.abs());
    }
    // all three functionals equal, arbitrary time
    for _ in 0..10 {
        let cfg = random_field(&mut rng);
        let total = engine::rel_entropy_total(
            &cfg.k1, &cfg.k1, &cfg.k1, cfg.t, &cfg.params, &settings,
        )
        .unwrap()
        .total;
        assert!(
            total.abs() <= 1e-12,
            "K1 = K2 = K3 at t = {:.3}: total = {total:.3e}",
            cfg.t
        );
        worst_zero = worst_zero.max(total.abs());
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:.2?}");
    println!(
        "PASS positivity: lowest total {lowest:.3e} over 200 configs, worst matching-state |total| {worst_zero:.3e}, in {elapsed:.2?}"
    );
}

#[test]
fn relative_entropy_scales_quadratically_in_the_functionals() {
    let settings = GridSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cfg = random_field(&mut rng);
        let base = engine::rel_entropy_total(
            &cfg.k1, &cfg.k2, &cfg.k3, cfg.t, &cfg.params, &settings,
        )
        .unwrap()
        .total;
        for s in [0.5, 2.0, 10.0] {
            let scaled = engine::rel_entropy_total(
                &cfg.k1.scaled(s),
                &cfg.k2.scaled(s),
                &cfg.k3.scaled(s),
                cfg.t,
                &cfg.params,
                &settings,
            )
            .unwrap()
            .total;
            let gap = relative_gap(scaled, s * s * base);
            assert!(gap <= 1e-12, "s = {s}: relative gap {gap:.3e}");
            worst = worst.max(gap);
        }
    }
    println!(
        "PASS quadratic scaling: worst relative gap {worst:.3e} over 20 configs, s in {{0.5, 2, 10}}"
    );
}

#[test]
fn static_part_matches_duhamel_pairing_and_total_matches_quadratic_form() {
    let settings = GridSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_static = 0.0f64;
    let mut worst_total = 0.0f64;
    for index in 0..50 {
        let cfg = random_field(&mut rng);
        let static_part =
            engine::rel_entropy_static(&cfg.k1, &cfg.k3, &cfg.params, &settings).unwrap();
        let diff_coeffs: Vec<f64> = cfg
            .k1
            .coefficients()
            .iter()
            .zip(cfg.k3.coefficients())
            .map(|(a, b)| a - b)
            .collect();
        let diff = SharedProfileFunctional::new(diff_coeffs, *cfg.k1.profile()).unwrap();
        let pairing = engine::duhamel_pairing(&diff, &diff, &cfg.params, &settings).unwrap();
        let beta = cfg.params.beta();
        let via_pairing = beta * beta / 2.0 * pairing;
        let gap = relative_gap(static_part, via_pairing);
        assert!(
            gap <= 1e-8,
            "config {index}: static {static_part:.6e} vs pairing route {via_pairing:.6e}"
        );
        worst_static = worst_static.max(gap);

        let report = engine::rel_entropy_total(
            &cfg.k1, &cfg.k2, &cfg.k3, cfg.t, &cfg.params, &settings,
        )
        .unwrap();
        let quadratic = engine::rel_entropy_quadratic_form(
            &cfg.k1, &cfg.k2, &cfg.k3, cfg.t, &cfg.params, &settings,
        )
        .unwrap();
        let gap = relative_gap(report.total, quadratic);
        assert!(
            gap <= 1e-10,
            "config {index}: total {:.6e} vs quadratic form {quadratic:.6e}",
            report.total
        );
        worst_total = worst_total.max(gap);
    }
    println!(
        "PASS route equivalence: worst static gap {worst_static:.3e}, worst total gap {worst_total:.3e} over 50 configs"
    );
}

#[test]
fn production_rate_integrates_back_to_the_entropy_change() {
    let settings = GridSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_field = 0.0f64;
    for _ in 0..10 {
        let cfg = random_field(&mut rng);
        for t in [0.5, 1.0, 2.0, 5.0] {
            let residual =
                engine::entropy_balance_residual(&cfg.k1, &cfg.k3, t, &cfg.params, &settings)
                    .unwrap();
            assert!(residual <= 1e-6, "t = {t}: field residual {residual:.3e}");
            worst_field = worst_field.max(residual);
        }
    }
    let mut worst_exact = 0.0f64;
    for index in 0..20 {
        let (sys, t) = random_system(&mut rng, index);
        let residual = findim::entropy_balance_residual(&sys, t).unwrap();
        assert!(
            residual <= 1e-9,
            "system {index}: exact residual {residual:.3e} at t = {t:.3}"
        );
        worst_exact = worst_exact.max(residual);
    }
    println!(
        "PASS entropy balance: worst field residual {worst_field:.3e} (40 runs), worst exact residual {worst_exact:.3e} (20 systems)"
    );
}

#[test]
fn finite_volume_densities_converge_to_the_density_mode_value() {
    let start = Instant::now();
    let params = ThermalParams::new(1.0, 40.0, 2).unwrap();
    let profile = GaussianProfile::new(1.0, 400.0).unwrap();
    let k1 = SharedProfileFunctional::new(vec![1.0], profile).unwrap();
    let zero = SharedProfileFunctional::zero_like(&k1);
    let series =
        adiabatic::vanhove_density_series(&k1, &zero, &zero, 0.0, 8, 0.05, &params).unwrap();

    let mode = series.density_mode_value;
    assert!(mode.is_finite() && mode > 0.0);
    let gaps: Vec<f64> = series
        .densities
        .iter()
        .map(|d| {
            assert!(d.is_finite(), "density sequence must stay finite");
            assert!(*d >= -1e-12 * mode, "density sequence must stay nonnegative");
            (d - mode).abs()
        })
        .collect();
    assert!(
        gaps[7] <= 0.01 * mode,
        "gap at n = 8 is {:.3e}, density-mode value {mode:.6e}",
        gaps[7]
    );
    for i in 2..7 {
        assert!(
            gaps[i + 1] < gaps[i],
            "gap must shrink from n = {}: {:.3e} -> {:.3e}",
            i + 1,
            gaps[i],
            gaps[i + 1]
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:.2?}");
    println!(
        "PASS finite-volume convergence: gap at n = 8 is {:.3e} of density-mode value {mode:.6e} ({:.2}%), in {elapsed:.2?}",
        gaps[7],
        100.0 * gaps[7] / mode
    );
}

#[test]
fn late_time_production_density_decays_like_one_over_time() {
    let params = ThermalParams::new(1.0, 1.0, 2).unwrap();
    let profile = GaussianProfile::new(1.0, 1.0).unwrap();
    let k1 = SharedProfileFunctional::new(vec![0.05, 1.0], profile).unwrap();
    let k3 = SharedProfileFunctional::new(vec![0.05, 0.9], profile).unwrap();
    let bound = adiabatic::ness_production_density_bound(&k1, &k3, &params).unwrap();

    let times: Vec<f64> = (0..60)
        .map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 59.0))
        .collect();
    let mut sup = 0.0f64;
    let mut magnitudes = Vec::with_capacity(times.len());
    for &t in &times {
        let e = adiabatic::ness_entropy_production_density(&k1, &k3, t, &params).unwrap();
        sup = sup.max((t * e).abs());
        magnitudes.push(e.abs());
    }
    assert!(sup <= bound, "sup |t*e(t)| = {sup:.4e} vs bound {bound:.4e}");
    let fit = adiabatic::fit_loglog_decay(&times, &magnitudes).unwrap();
    assert!(
        (fit.slope + 1.0).abs() <= 0.15,
        "log-log slope {:.4}",
        fit.slope
    );
    println!(
        "PASS steady-state decay: sup |t*e(t)| = {sup:.3e} within bound {bound:.3e}, slope {:.4}",
        fit.slope
    );
}

#[test]
fn perturbative_coefficients_match_taylor_extraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let h = findim::random_hermitian(3, 1.0, &mut rng);
    let p = findim::random_hermitian(3, 0.35, &mut rng);
    let a = findim::random_hermitian(3, 1.0, &mut rng);
    let t = 0.9;
    let beta = 1.1;

    let evolve = |lambda: f64| -> CMat {
        let full = &h + &p * Complex64::new(lambda, 0.0);
        let u = findim::apply_spectral(&full, |x| Complex64::new(0.0, t * x).exp());
        &u * &a * u.adjoint()
    };

    // evolved-observable expansion against direct Taylor extraction
    let dyson = dyson_evolution(&h, &p, &a, t, 3).unwrap();
    let exact = taylor_matrix_coefficients(&evolve, 3);
    let mut worst = 0.0f64;
    for k in 0..=3 {
        let gap = dyson.coeff(k).add(&exact[k].scale(-1.0)).max_abs();
        assert!(gap <= 1e-7, "evolution coefficient {k}: gap {gap:.3e}");
        worst = worst.max(gap);
    }

    // perturbed-state expansion
    let state_fn = |lambda: f64| -> f64 {
        let full = &h + &p * Complex64::new(lambda, 0.0);
        let rho = findim::gibbs_state(&full, beta).unwrap();
        (&rho * &a).trace().re
    };
    let state = perturbed_state_expansion(&h, &p, beta, &a, 3).unwrap();
    let exact = taylor_coefficients(&state_fn, 3);
    for k in 0..=3 {
        let gap = (state.coeff(k) - exact[k]).abs();
        assert!(gap <= 1e-7, "state coefficient {k}: gap {gap:.3e}");
        worst = worst.max(gap);
    }

    // log-partition expansion
    let log_fn = |lambda: f64| -> f64 {
        let full = &h + &p * Complex64::new(lambda, 0.0);
        findim::log_partition_function(&full, beta).unwrap()
            - findim::log_partition_function(&h, beta).unwrap()
    };
    let logpart = log_partition_expansion(&h, &p, beta, 3).unwrap();
    let exact = taylor_coefficients(&log_fn, 3);
    for k in 0..=3 {
        let gap = (logpart.coeff(k) - exact[k]).abs();
        assert!(gap <= 1e-7, "log-partition coefficient {k}: gap {gap:.3e}");
        worst = worst.max(gap);
    }

    // order-2 truncation errors must scale like lambda^3
    let lambdas: Vec<f64> = (0..6).map(|i| 0.05 * 1.3f64.powi(i)).collect();
    let dyson2 = dyson_evolution(&h, &p, &a, t, 2).unwrap();
    let state2 = perturbed_state_expansion(&h, &p, beta, &a, 2).unwrap();
    let log2 = log_partition_expansion(&h, &p, beta, 2).unwrap();
    let mut slopes = Vec::new();
    for (name, errs) in [
        (
            "evolution",
            lambdas
                .iter()
                .map(|&l| evolve(l).add(&dyson2.eval(l).scale(-1.0)).max_abs())
                .collect::<Vec<f64>>(),
        ),
        (
            "state",
            lambdas
                .iter()
                .map(|&l| (state_fn(l) - state2.eval(l)).abs())
                .collect(),
        ),
        (
            "log-partition",
            lambdas
                .iter()
                .map(|&l| (log_fn(l) - log2.eval(l)).abs())
                .collect(),
        ),
    ] {
        let fit = adiabatic::fit_loglog_decay(&lambdas, &errs).unwrap();
        assert!(
            (fit.slope - 3.0).abs() <= 0.2,
            "{name} truncation error scales with exponent {:.3}",
            fit.slope
        );
        slopes.push(fit.slope);
    }
    println!(
        "PASS expansion fidelity: worst coefficient gap {worst:.3e}; truncation exponents {:.3}, {:.3}, {:.3}",
        slopes[0], slopes[1], slopes[2]
    );
}

#[test]
fn detailed_balance_holds_for_weights_and_matrices() {
    let params = ThermalParams::new(1.3, 0.8, 2).unwrap();
    let beta = params.beta();
    let mass = params.mass();
    let mut rng = ChaCha8Rng::seed_from_u64(909);

    let mut worst_weight = 0.0f64;
    for _ in 0..1000 {
        let magnitude = mass + rng.gen_range(0.0..=12.0 / beta);
        let nu = if rng.gen::<bool>() { magnitude } else { -magnitude };
        let k = (nu * nu - mass * mass).max(0.0).sqrt();
        let residual = thermal::detailed_balance_residual(nu, k, &params).unwrap();
        assert!(residual <= 1e-11, "frequency {nu:.4}: residual {residual:.3e}");
        worst_weight = worst_weight.max(residual);
    }

    let mut worst_matrix = 0.0f64;
    let dims = [2usize, 3, 4, 6];
    for index in 0..50 {
        let dim = dims[index % dims.len()];
        let h = findim::random_hermitian(dim, 1.0, &mut rng);
        let a = findim::random_hermitian(dim, 1.0, &mut rng);
        let b = findim::random_hermitian(dim, 1.0, &mut rng);
        let rho = findim::gibbs_state(&h, beta).unwrap();
        let residual = findim::kms_residual(&rho, &h, beta, &a, &b);
        assert!(residual <= 1e-11, "pair {index}: residual {residual:.3e}");
        worst_matrix = worst_matrix.max(residual);
    }
    println!(
        "PASS detailed balance: worst weight residual {worst_weight:.3e} (1000 frequencies), worst matrix residual {worst_matrix:.3e} (50 pairs)"
    );
}
