//! The eight subcommands, each a thin composition over the library: build
//! inputs from the config, call the library, shape the results into CSV and
//! JSON artifacts. No numerics happen here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use kmsent::engine::GridSettings;
use kmsent::functionals::SharedProfileFunctional;
use kmsent::thermal::ThermalParams;
use kmsent::{adiabatic, engine, findim, thermal};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{num, CsvTable, RunOutput};

/// Residual ceiling for the balance subcommand: S(t) - S(0) must match the
/// integrated production rate to this accuracy or the run exits nonzero.
const BALANCE_TOL: f64 = 1e-6;
/// Per-trial ceilings for the finite-dimensional oracle.
const ORACLE_TOL: f64 = 1e-9;
/// Ceiling for the detailed-balance and KMS residuals, which are exact
/// identities up to roundoff.
const KMS_TOL: f64 = 1e-11;

struct FieldSetup {
    params: ThermalParams,
    grid: GridSettings,
    k1: SharedProfileFunctional,
    k2: SharedProfileFunctional,
    k3: SharedProfileFunctional,
}

fn field_setup(cfg: &RunConfig) -> Result<FieldSetup> {
    let params = cfg.thermal_params()?;
    let (k1, k2, k3) = cfg.functionals()?;
    Ok(FieldSetup {
        params,
        grid: cfg.grid_settings(),
        k1,
        k2,
        k3,
    })
}

fn require_no_k2(cfg: &RunConfig, what: &str) -> Result<()> {
    if !cfg.k2_is_zero() {
        return Err(CliError::Invalid(format!(
            "{what} is defined for free intermediate dynamics; \
             remove the [k2] section or set its coefficients to zero"
        )));
    }
    Ok(())
}

fn setup_meta(setup: &FieldSetup) -> serde_json::Value {
    json!({
        "beta": setup.params.beta(),
        "mass": setup.params.mass(),
        "lambda_order": setup.params.lambda_order(),
        "profile": {
            "amplitude": setup.k1.profile().amplitude(),
            "width": setup.k1.profile().width(),
        },
        "k1": setup.k1.coefficients(),
        "k2": setup.k2.coefficients(),
        "k3": setup.k3.coefficients(),
        "grid": {
            "panels": setup.grid.panels,
            "half_range": setup.grid.half_range,
            "mass_tol": setup.grid.mass_tol,
        },
    })
}

fn report(
    subcommand: &str,
    config: serde_json::Value,
    results: serde_json::Value,
) -> serde_json::Value {
    json!({
        "tool": "kmsent",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "config": config,
        "results": results,
    })
}

pub fn relent(cfg: &RunConfig) -> Result<RunOutput> {
    let setup = field_setup(cfg)?;
    let times = cfg.times()?;
    let mut reports = Vec::with_capacity(times.len());
    for &t in &times {
        reports.push(engine::rel_entropy_total(
            &setup.k1,
            &setup.k2,
            &setup.k3,
            t,
            &setup.params,
            &setup.grid,
        )?);
    }

    let orders = setup.k1.max_order();
    let mut header = vec![
        "t".to_string(),
        "static".to_string(),
        "dynamic".to_string(),
        "total".to_string(),
    ];
    for l in 1..=orders {
        header.push(format!("static_l{l}"));
        header.push(format!("dynamic_l{l}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(&header_refs);

    let mut out = RunOutput::new();
    for rep in &reports {
        let mut row = vec![
            num(rep.time),
            num(rep.static_part),
            num(rep.dynamic_part),
            num(rep.total),
        ];
        for contribution in &rep.per_order {
            row.push(num(contribution.static_part));
            row.push(num(contribution.dynamic_part));
        }
        table.row(&row);
        out.note(format!(
            "t={}: total={} (static {}, dynamic {})",
            num(rep.time),
            num(rep.total),
            num(rep.static_part),
            num(rep.dynamic_part)
        ));
    }
    out.note(format!(
        "relent: {} time points, coefficient orders 1..{orders}",
        times.len()
    ));
    out.push_csv("relent.csv", table);
    out.push_json(
        "relent.json",
        report("relent", setup_meta(&setup), json!({ "reports": reports })),
    );
    Ok(out)
}

pub fn entprod(cfg: &RunConfig) -> Result<RunOutput> {
    require_no_k2(cfg, "the entropy production rate")?;
    let setup = field_setup(cfg)?;
    let times = cfg.times()?;
    let mut table = CsvTable::new(&["t", "production"]);
    let mut values = Vec::with_capacity(times.len());
    let mut out = RunOutput::new();
    for &t in &times {
        let production =
            engine::entropy_production(&setup.k1, &setup.k3, t, &setup.params, &setup.grid)?;
        table.row(&[num(t), num(production)]);
        out.note(format!("t={}: production={}", num(t), num(production)));
        values.push(production);
    }
    out.note(format!("entprod: {} time points", times.len()));
    out.push_csv("entprod.csv", table);
    out.push_json(
        "entprod.json",
        report(
            "entprod",
            setup_meta(&setup),
            json!({ "times": times, "production": values }),
        ),
    );
    Ok(out)
}

pub fn balance(cfg: &RunConfig) -> Result<RunOutput> {
    require_no_k2(cfg, "the balance check")?;
    let setup = field_setup(cfg)?;
    let times = cfg.times()?;
    let total_0 = engine::rel_entropy_total(
        &setup.k1,
        &setup.k2,
        &setup.k3,
        0.0,
        &setup.params,
        &setup.grid,
    )?
    .total;

    let mut table = CsvTable::new(&["t", "total_t", "total_0", "residual", "tolerance", "pass"]);
    let mut rows = Vec::new();
    let mut worst: Option<(f64, f64)> = None; // (residual, t)
    let mut out = RunOutput::new();
    for &t in &times {
        let total_t = engine::rel_entropy_total(
            &setup.k1,
            &setup.k2,
            &setup.k3,
            t,
            &setup.params,
            &setup.grid,
        )?
        .total;
        let residual =
            engine::entropy_balance_residual(&setup.k1, &setup.k3, t, &setup.params, &setup.grid)?;
        let pass = residual <= BALANCE_TOL;
        table.row(&[
            num(t),
            num(total_t),
            num(total_0),
            num(residual),
            num(BALANCE_TOL),
            pass.to_string(),
        ]);
        rows.push(json!({
            "t": t,
            "total_t": total_t,
            "total_0": total_0,
            "residual": residual,
            "pass": pass,
        }));
        out.note(format!(
            "t={}: residual={} ({})",
            num(t),
            num(residual),
            if pass { "pass" } else { "FAIL" }
        ));
        if worst.map_or(true, |(r, _)| residual > r) {
            worst = Some((residual, t));
        }
    }
    let (worst_residual, worst_t) = worst.expect("times is nonempty");
    out.note(format!(
        "balance: worst residual {} at t={}",
        num(worst_residual),
        num(worst_t)
    ));
    out.push_csv("balance.csv", table);
    out.push_json(
        "balance.json",
        report(
            "balance",
            setup_meta(&setup),
            json!({ "tolerance": BALANCE_TOL, "rows": rows }),
        ),
    );
    if worst_residual > BALANCE_TOL {
        return Err(CliError::Tolerance(format!(
            "balance residual {} at t={} exceeds {}",
            num(worst_residual),
            num(worst_t),
            num(BALANCE_TOL)
        )));
    }
    Ok(out)
}

pub fn density(cfg: &RunConfig) -> Result<RunOutput> {
    let setup = field_setup(cfg)?;
    let times = cfg.times()?;
    let mut table = CsvTable::new(&["t", "density"]);
    let mut values = Vec::with_capacity(times.len());
    let mut out = RunOutput::new();
    for &t in &times {
        let density =
            adiabatic::rel_entropy_density(&setup.k1, &setup.k2, &setup.k3, t, &setup.params)?;
        table.row(&[num(t), num(density)]);
        out.note(format!("t={}: density={}", num(t), num(density)));
        values.push(density);
    }
    out.note(format!("density: {} time points", times.len()));
    out.push_csv("density.csv", table);
    out.push_json(
        "density.json",
        report(
            "density",
            setup_meta(&setup),
            json!({ "times": times, "densities": values }),
        ),
    );
    Ok(out)
}

pub fn vanhove(cfg: &RunConfig) -> Result<RunOutput> {
    let setup = field_setup(cfg)?;
    let t = match &cfg.time {
        Some(_) => cfg.times()?[0],
        None => 0.0,
    };
    let (n_max, ramp_width) = cfg.cutoff();
    let series = adiabatic::vanhove_density_series(
        &setup.k1,
        &setup.k2,
        &setup.k3,
        t,
        n_max,
        ramp_width,
        &setup.params,
    )?;

    let mut table = CsvTable::new(&["n", "volume", "density"]);
    for ((&n, &volume), &density) in series
        .n_values
        .iter()
        .zip(&series.volumes)
        .zip(&series.densities)
    {
        table.row(&[n.to_string(), num(volume), num(density)]);
    }
    let mut out = RunOutput::new();
    out.note(format!(
        "vanhove: n=1..{n_max} at t={}, limit estimate {} vs density-mode value {}",
        num(t),
        num(series.limit_estimate),
        num(series.density_mode_value)
    ));
    out.push_csv("vanhove.csv", table);
    out.push_json(
        "vanhove.json",
        report(
            "vanhove",
            setup_meta(&setup),
            json!({
                "t": t,
                "n_max": n_max,
                "ramp_width": ramp_width,
                "series": series,
            }),
        ),
    );
    Ok(out)
}

pub fn ness(cfg: &RunConfig) -> Result<RunOutput> {
    require_no_k2(cfg, "the steady-state production density")?;
    let setup = field_setup(cfg)?;
    let times = cfg.times()?;
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(CliError::Invalid(
            "[time] values must be strictly positive for ness".into(),
        ));
    }
    let bound = adiabatic::ness_production_density_bound(&setup.k1, &setup.k3, &setup.params)?;

    let mut table = CsvTable::new(&["t", "production_density", "t_times_production"]);
    let mut productions = Vec::with_capacity(times.len());
    let mut sup: Option<(f64, f64)> = None; // (|t*e|, t)
    let mut out = RunOutput::new();
    for &t in &times {
        let e = adiabatic::ness_entropy_production_density(&setup.k1, &setup.k3, t, &setup.params)?;
        table.row(&[num(t), num(e), num(t * e)]);
        if sup.map_or(true, |(s, _)| (t * e).abs() > s) {
            sup = Some(((t * e).abs(), t));
        }
        productions.push(e);
    }
    let (sup_te, sup_t) = sup.expect("times is nonempty");
    let fit = if times.len() >= 2 {
        let magnitudes: Vec<f64> = productions.iter().map(|e| e.abs()).collect();
        adiabatic::fit_loglog_decay(&times, &magnitudes).ok()
    } else {
        None
    };

    out.note(format!(
        "ness: sup |t*e(t)| = {} at t={}, bound {}",
        num(sup_te),
        num(sup_t),
        num(bound)
    ));
    if let Some(fit) = &fit {
        out.note(format!(
            "ness: log-log decay slope {:.4} (intercept {:.4})",
            fit.slope, fit.intercept
        ));
    }
    out.push_csv("ness.csv", table);
    out.push_json(
        "ness.json",
        report(
            "ness",
            setup_meta(&setup),
            json!({
                "times": times,
                "production": productions,
                "bound": bound,
                "sup_t_times_production": sup_te,
                "fit": fit,
            }),
        ),
    );
    if sup_te > bound {
        return Err(CliError::Tolerance(format!(
            "ness: |t*e(t)| = {} at t={} exceeds the uniform bound {}",
            num(sup_te),
            num(sup_t),
            num(bound)
        )));
    }
    Ok(out)
}

fn sample_range(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..range[1])
    }
}

pub fn oracle(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<RunOutput> {
    let settings = cfg.oracle_settings(seed_flag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut table = CsvTable::new(&[
        "trial",
        "dim",
        "beta",
        "t",
        "formula_residual",
        "balance_residual",
        "pass",
    ]);
    let mut rows = Vec::new();
    let mut out = RunOutput::new();
    out.note(format!(
        "{:>5}  {:>3}  {:>8}  {:>8}  {:>10}  {:>10}  verdict",
        "trial", "dim", "beta", "t", "formula", "balance"
    ));

    let mut failures = 0u32;
    let mut worst_formula = 0.0f64;
    let mut worst_balance = 0.0f64;
    for trial in 0..settings.trials {
        let dim = settings.dims[trial as usize % settings.dims.len()];
        let beta = sample_range(&mut rng, settings.beta_range);
        let t = sample_range(&mut rng, settings.t_range);
        let system_seed: u64 = rng.gen();
        let system = findim::FiniteSystem::random(dim, beta, system_seed)?;

        let formula = findim::relative_entropy_formula(&system, t);
        let exact = findim::evolved_state_relative_entropy(&system, t)?;
        let formula_residual = (formula - exact).abs();
        let balance_residual = findim::entropy_balance_residual(&system, t)?;
        let pass = formula_residual <= ORACLE_TOL && balance_residual <= ORACLE_TOL;

        if !pass {
            failures += 1;
        }
        worst_formula = worst_formula.max(formula_residual);
        worst_balance = worst_balance.max(balance_residual);

        table.row(&[
            trial.to_string(),
            dim.to_string(),
            num(beta),
            num(t),
            num(formula_residual),
            num(balance_residual),
            pass.to_string(),
        ]);
        rows.push(json!({
            "trial": trial,
            "dim": dim,
            "beta": beta,
            "t": t,
            "seed": system_seed,
            "formula_residual": formula_residual,
            "balance_residual": balance_residual,
            "pass": pass,
        }));
        out.note(format!(
            "{trial:>5}  {dim:>3}  {beta:>8.4}  {t:>8.4}  {formula_residual:>10.3e}  {balance_residual:>10.3e}  {}",
            if pass { "pass" } else { "FAIL" }
        ));
    }
    out.note(format!(
        "oracle: {} trials, {} failures; worst formula residual {}, worst balance residual {}",
        settings.trials,
        failures,
        num(worst_formula),
        num(worst_balance)
    ));
    out.push_csv("oracle.csv", table);
    out.push_json(
        "oracle.json",
        report(
            "oracle",
            json!({
                "seed": settings.seed,
                "trials": settings.trials,
                "dims": settings.dims,
                "beta_range": settings.beta_range,
                "t_range": settings.t_range,
                "tolerance": ORACLE_TOL,
            }),
            json!({
                "failures": failures,
                "worst_formula_residual": worst_formula,
                "worst_balance_residual": worst_balance,
                "trials": rows,
            }),
        ),
    );
    if failures > 0 {
        return Err(CliError::Tolerance(format!(
            "oracle: {failures} of {} trials exceeded {} \
             (worst formula residual {}, worst balance residual {})",
            settings.trials,
            num(ORACLE_TOL),
            num(worst_formula),
            num(worst_balance)
        )));
    }
    Ok(out)
}

pub fn kmscheck(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<RunOutput> {
    let params = cfg.thermal_params()?;
    let settings = cfg.oracle_settings(seed_flag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let beta = params.beta();
    let mass = params.mass();

    let mut table = CsvTable::new(&["check", "index", "residual", "tolerance", "pass"]);
    let mut worst_weight = 0.0f64;
    for index in 0..settings.frequency_samples {
        // frequencies across the thermal window, both signs of the shell
        let magnitude = mass + rng.gen_range(0.0..=12.0 / beta);
        let nu = if rng.gen::<bool>() { magnitude } else { -magnitude };
        let k = (nu * nu - mass * mass).max(0.0).sqrt();
        let residual = thermal::detailed_balance_residual(nu, k, &params)?;
        worst_weight = worst_weight.max(residual);
        table.row(&[
            "fourier_weight".to_string(),
            index.to_string(),
            num(residual),
            num(KMS_TOL),
            (residual <= KMS_TOL).to_string(),
        ]);
    }

    let mut worst_operator = 0.0f64;
    for index in 0..settings.operator_pairs {
        let dim = settings.dims[index as usize % settings.dims.len()];
        let h = findim::random_hermitian(dim, 1.0, &mut rng);
        let a = findim::random_hermitian(dim, 1.0, &mut rng);
        let b = findim::random_hermitian(dim, 1.0, &mut rng);
        let rho = findim::gibbs_state(&h, beta)?;
        let residual = findim::kms_residual(&rho, &h, beta, &a, &b);
        worst_operator = worst_operator.max(residual);
        table.row(&[
            "finite_system".to_string(),
            index.to_string(),
            num(residual),
            num(KMS_TOL),
            (residual <= KMS_TOL).to_string(),
        ]);
    }

    let mut out = RunOutput::new();
    out.note(format!(
        "kmscheck: worst fourier_weight residual {} over {} frequencies",
        num(worst_weight),
        settings.frequency_samples
    ));
    out.note(format!(
        "kmscheck: worst finite_system residual {} over {} operator pairs",
        num(worst_operator),
        settings.operator_pairs
    ));
    out.push_csv("kmscheck.csv", table);
    out.push_json(
        "kmscheck.json",
        report(
            "kmscheck",
            json!({
                "seed": settings.seed,
                "beta": beta,
                "mass": mass,
                "frequency_samples": settings.frequency_samples,
                "operator_pairs": settings.operator_pairs,
                "dims": settings.dims,
                "tolerance": KMS_TOL,
            }),
            json!({
                "worst_fourier_weight_residual": worst_weight,
                "worst_finite_system_residual": worst_operator,
            }),
        ),
    );
    if worst_weight > KMS_TOL {
        return Err(CliError::Tolerance(format!(
            "kmscheck: fourier_weight residual {} exceeds {}",
            num(worst_weight),
            num(KMS_TOL)
        )));
    }
    if worst_operator > KMS_TOL {
        return Err(CliError::Tolerance(format!(
            "kmscheck: finite_system residual {} exceeds {}",
            num(worst_operator),
            num(KMS_TOL)
        )));
    }
    Ok(out)
}
