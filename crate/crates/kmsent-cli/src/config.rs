//! TOML run configuration and its resolution into library types.
//!
//! Every subcommand reads the same file format; sections a subcommand does
//! not need may be omitted. Unknown keys are rejected so a typo cannot
//! silently fall back to a default.

use serde::Deserialize;

use kmsent::adiabatic::DEFAULT_RAMP_WIDTH;
use kmsent::engine::GridSettings;
use kmsent::functionals::{GaussianProfile, SharedProfileFunctional};
use kmsent::thermal::ThermalParams;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub thermal: Option<ThermalSection>,
    pub profile: Option<ProfileSection>,
    pub k1: Option<CoeffSection>,
    pub k2: Option<CoeffSection>,
    pub k3: Option<CoeffSection>,
    pub grid: Option<GridSection>,
    pub time: Option<TimeSection>,
    pub cutoff: Option<CutoffSection>,
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub beta: f64,
    pub mass: f64,
    pub lambda_order: Option<u32>,
}

/// The momentum profile shared by all three functionals. The perturbative
/// formulas only close when K1, K2 and K3 carry the same smearing, so the
/// file has a single [profile] block rather than one per functional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSection {
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub panels: Option<usize>,
    pub half_range: Option<f64>,
    pub mass_tol: Option<f64>,
}

/// Either an explicit list of times or a start/stop/count sweep.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    /// "linear" (default) or "log"; log needs positive endpoints.
    pub spacing: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub n_max: Option<u32>,
    pub ramp_width: Option<f64>,
}

/// Knobs for the randomized checks (oracle, kmscheck).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub trials: Option<u32>,
    pub dims: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub beta_range: Option<[f64; 2]>,
    pub t_range: Option<[f64; 2]>,
    pub frequency_samples: Option<u32>,
    pub operator_pairs: Option<u32>,
}

#[derive(Debug)]
pub struct OracleSettings {
    pub trials: u32,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub beta_range: [f64; 2],
    pub t_range: [f64; 2],
    pub frequency_samples: u32,
    pub operator_pairs: u32,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn thermal_params(&self) -> Result<ThermalParams> {
        let section = self.thermal.as_ref().ok_or_else(|| {
            CliError::Invalid("config needs a [thermal] section with beta and mass".into())
        })?;
        let order = section.lambda_order.unwrap_or(2);
        Ok(ThermalParams::new(section.beta, section.mass, order)?)
    }

    /// The three functionals on the shared profile. A missing [k2] means
    /// free intermediate dynamics (all coefficients zero).
    pub fn functionals(
        &self,
    ) -> Result<(
        SharedProfileFunctional,
        SharedProfileFunctional,
        SharedProfileFunctional,
    )> {
        let section = self.profile.as_ref().ok_or_else(|| {
            CliError::Invalid("config needs a [profile] section with amplitude and width".into())
        })?;
        let profile = GaussianProfile::new(section.amplitude, section.width)?;
        let k1 = SharedProfileFunctional::new(self.coeffs("k1")?.to_vec(), profile)?;
        let k3 = SharedProfileFunctional::new(self.coeffs("k3")?.to_vec(), profile)?;
        let k2 = match &self.k2 {
            Some(sec) => SharedProfileFunctional::new(sec.coefficients.clone(), profile)?,
            None => SharedProfileFunctional::zero_like(&k1),
        };
        for (name, k) in [("k2", &k2), ("k3", &k3)] {
            if k.max_order() != k1.max_order() {
                return Err(CliError::Invalid(format!(
                    "[{name}] lists {} coefficients but [k1] lists {}; pad with zeros to match",
                    k.max_order(),
                    k1.max_order()
                )));
            }
        }
        Ok((k1, k2, k3))
    }

    fn coeffs(&self, which: &str) -> Result<&[f64]> {
        let section = match which {
            "k1" => &self.k1,
            "k3" => &self.k3,
            _ => unreachable!("only the required functionals are fetched by name"),
        };
        section
            .as_ref()
            .map(|s| s.coefficients.as_slice())
            .ok_or_else(|| {
                CliError::Invalid(format!(
                    "config needs a [{which}] section with coefficients = [...]"
                ))
            })
    }

    /// True when [k2] is absent or identically zero.
    pub fn k2_is_zero(&self) -> bool {
        match &self.k2 {
            None => true,
            Some(sec) => sec.coefficients.iter().all(|&c| c == 0.0),
        }
    }

    pub fn grid_settings(&self) -> GridSettings {
        let mut grid = GridSettings::default();
        if let Some(section) = &self.grid {
            if let Some(panels) = section.panels {
                grid.panels = panels;
            }
            if section.half_range.is_some() {
                grid.half_range = section.half_range;
            }
            if let Some(tol) = section.mass_tol {
                grid.mass_tol = tol;
            }
        }
        grid
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let section = self.time.as_ref().ok_or_else(|| {
            CliError::Invalid(
                "config needs a [time] section (values = [...] or start/stop/count)".into(),
            )
        })?;
        section.resolve()
    }

    pub fn cutoff(&self) -> (u32, f64) {
        let n_max = self.cutoff.as_ref().and_then(|c| c.n_max).unwrap_or(8);
        let ramp = self
            .cutoff
            .as_ref()
            .and_then(|c| c.ramp_width)
            .unwrap_or(DEFAULT_RAMP_WIDTH);
        (n_max, ramp)
    }

    /// Randomized-check settings with defaults filled in. A --seed flag
    /// wins over the seed in the file.
    pub fn oracle_settings(&self, seed_flag: Option<u64>) -> Result<OracleSettings> {
        let sec = self.oracle.as_ref();
        let settings = OracleSettings {
            trials: sec.and_then(|s| s.trials).unwrap_or(100),
            dims: sec
                .and_then(|s| s.dims.clone())
                .unwrap_or_else(|| vec![2, 3, 4, 6]),
            seed: seed_flag
                .or_else(|| sec.and_then(|s| s.seed))
                .unwrap_or(0x6b6d73),
            beta_range: sec.and_then(|s| s.beta_range).unwrap_or([0.2, 4.0]),
            t_range: sec.and_then(|s| s.t_range).unwrap_or([-3.0, 3.0]),
            frequency_samples: sec.and_then(|s| s.frequency_samples).unwrap_or(1000),
            operator_pairs: sec.and_then(|s| s.operator_pairs).unwrap_or(50),
        };
        if settings.trials == 0 {
            return Err(CliError::Invalid("oracle trials must be at least 1".into()));
        }
        if settings.dims.is_empty() {
            return Err(CliError::Invalid("oracle dims must not be empty".into()));
        }
        for &dim in &settings.dims {
            if !(2..=16).contains(&dim) {
                return Err(CliError::Invalid(format!(
                    "oracle dims must lie in 2..=16, got {dim}"
                )));
            }
        }
        for (name, range) in [
            ("beta_range", settings.beta_range),
            ("t_range", settings.t_range),
        ] {
            if !(range[0].is_finite() && range[1].is_finite() && range[0] <= range[1]) {
                return Err(CliError::Invalid(format!(
                    "oracle {name} must be an ordered pair of finite numbers"
                )));
            }
        }
        if settings.beta_range[0] <= 0.0 {
            return Err(CliError::Invalid(
                "oracle beta_range must stay positive".into(),
            ));
        }
        Ok(settings)
    }
}

impl TimeSection {
    fn resolve(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(values), None, None, None) => {
                if self.spacing.is_some() {
                    return Err(CliError::Invalid(
                        "[time] spacing only applies to start/stop/count sweeps".into(),
                    ));
                }
                if values.is_empty() {
                    return Err(CliError::Invalid("[time] values must not be empty".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Invalid("[time] values must be finite".into()));
                }
                Ok(values.clone())
            }
            (None, Some(start), Some(stop), Some(count)) => {
                if count == 0 {
                    return Err(CliError::Invalid("[time] count must be at least 1".into()));
                }
                if !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::Invalid("[time] endpoints must be finite".into()));
                }
                let log = match self.spacing.as_deref() {
                    None | Some("linear") => false,
                    Some("log") => true,
                    Some(other) => {
                        return Err(CliError::Invalid(format!(
                            "[time] spacing must be \"linear\" or \"log\", got {other:?}"
                        )))
                    }
                };
                if log && (start <= 0.0 || stop <= 0.0) {
                    return Err(CliError::Invalid(
                        "[time] log spacing needs positive endpoints".into(),
                    ));
                }
                if count == 1 {
                    return Ok(vec![start]);
                }
                let steps = (count - 1) as f64;
                Ok((0..count)
                    .map(|i| {
                        let f = i as f64 / steps;
                        if log {
                            (start.ln() + f * (stop.ln() - start.ln())).exp()
                        } else {
                            start + f * (stop - start)
                        }
                    })
                    .collect())
            }
            _ => Err(CliError::Invalid(
                "[time] must give either values or all of start/stop/count".into(),
            )),
        }
    }
}
