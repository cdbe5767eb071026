//! Run configuration: TOML file, command-line overlay and validation.
//!
//! Every key is optional in the file; which ones are required depends on the
//! subcommand and is checked by [`resolve`]. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qkinetic_core::consts::SODIUM_23_MASS;
use qkinetic_core::regime::GasParameters;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kmc,
    Uu,
    Condensate,
    Regime,
    BasisCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kmc => "kmc",
            Command::Uu => "uu",
            Command::Condensate => "condensate",
            Command::Regime => "regime",
            Command::BasisCheck => "basis-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; 0 or unset uses every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub gas: GasSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub condensate: CondensateSection,
}

/// Physical parameters, SI units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_free_path: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    /// Box side `L` (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    /// Base collision rate (1/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Number of sampling intervals; `samples + 1` time points are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<u64>,
    /// Factor standing for `≫` in the regime report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Local error tolerance of the mean-occupation integrator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Triad energy window in units of `ε0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Also solve the exact stationary distribution of the initial shell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<bool>,
}

/// Initial occupations: `per_mode`, an explicit `occupations` list, or (for
/// `uu`) a Bose-Einstein field with reduced `beta = ε0/kT` and `mu` in units
/// of `ε0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_mode: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondensateSection {
    /// Bath chemical potential in units of `kT`, `≤ 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Initial condensate density (1/m³).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("missing required parameter `{key}` for `{command}`")]
    Missing { key: &'static str, command: Command },
    #[error("invalid {symbol} (`{key}` = {value}): must be {requirement}")]
    Invalid {
        key: &'static str,
        symbol: &'static str,
        value: String,
        requirement: &'static str,
    },
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("RunConfig serializes to TOML")
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Atomic mass (kg).
    #[arg(long)]
    pub mass: Option<f64>,
    /// s-wave scattering length (m).
    #[arg(long)]
    pub scattering_length: Option<f64>,
    /// Temperature (K).
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    /// Number density (1/m³).
    #[arg(long)]
    pub density: Option<f64>,
    /// Cell length (m).
    #[arg(long)]
    pub cell_length: Option<f64>,
    /// Mean free path (m), replacing the hard-sphere estimate.
    #[arg(long)]
    pub mean_free_path: Option<f64>,
    /// Box side (m).
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub z_max: Option<u32>,
    /// Base collision rate (1/s).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Triad energy window (units of ε0).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Solve the exact stationary distribution of the initial shell.
    #[arg(long)]
    pub stationary: bool,
    #[arg(long)]
    pub per_mode: Option<f64>,
    /// Reduced inverse temperature ε0/kT of a Bose-Einstein initial field.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Chemical potential of a Bose-Einstein initial field (units of ε0).
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Bath chemical potential μ/kT.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi_im: Option<f64>,
    /// Keep only the coherent rotation of the amplitude.
    #[arg(long)]
    pub no_dissipation: bool,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut c.seed, &self.seed);
        set(&mut c.threads, &self.threads);
        set(&mut c.out, &self.out);
        set(&mut c.gas.mass, &self.mass);
        set(&mut c.gas.scattering_length, &self.scattering_length);
        set(&mut c.gas.temperature, &self.temperature);
        set(&mut c.gas.density, &self.density);
        set(&mut c.gas.cell_length, &self.cell_length);
        set(&mut c.gas.mean_free_path, &self.mean_free_path);
        set(&mut c.lattice.box_length, &self.box_length);
        set(&mut c.lattice.z_max, &self.z_max);
        set(&mut c.numerics.gamma, &self.gamma);
        set(&mut c.numerics.t_end, &self.t_end);
        set(&mut c.numerics.samples, &self.samples);
        set(&mut c.numerics.trajectories, &self.trajectories);
        set(&mut c.numerics.threshold, &self.threshold);
        set(&mut c.numerics.tolerance, &self.tolerance);
        set(&mut c.numerics.eta, &self.eta);
        if self.stationary {
            c.numerics.stationary = Some(true);
        }
        set(&mut c.initial.per_mode, &self.per_mode);
        set(&mut c.initial.beta, &self.beta);
        set(&mut c.initial.mu, &self.mu);
        set(&mut c.condensate.alpha, &self.alpha);
        set(&mut c.condensate.rho0, &self.rho0);
        set(&mut c.condensate.phi_re, &self.phi_re);
        set(&mut c.condensate.phi_im, &self.phi_im);
        if self.no_dissipation {
            c.condensate.dissipation = Some(false);
        }
    }
}

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_Z_MAX: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub box_length: f64,
    pub mass: f64,
    pub z_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KmcInitial {
    PerMode(u32),
    Occupations(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmcPlan {
    pub lattice: LatticeSpec,
    pub gamma: f64,
    pub t_end: f64,
    pub samples: usize,
    pub trajectories: u64,
    pub initial: KmcInitial,
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UuInitial {
    BoseEinstein { beta: f64, mu: f64 },
    PerMode(f64),
    Occupations(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UuPlan {
    pub lattice: LatticeSpec,
    pub gamma: f64,
    pub t_end: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub initial: UuInitial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensatePlan {
    pub lattice: LatticeSpec,
    pub temperature: f64,
    pub scattering_length: f64,
    pub alpha: f64,
    /// Units of `ε0`.
    pub eta: Option<f64>,
    pub t_end: Option<f64>,
    pub samples: usize,
    pub rho0: f64,
    pub phi0: (f64, f64),
    pub dissipation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimePlan {
    pub params: GasParameters,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPlan {
    pub cell_length: f64,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Kmc(KmcPlan),
    Uu(UuPlan),
    Condensate(CondensatePlan),
    Regime(RegimePlan),
    BasisCheck(BasisPlan),
}

struct Check<'a> {
    command: Command,
    config: &'a RunConfig,
}

impl Check<'_> {
    fn need<T: Copy>(&self, key: &'static str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or(ConfigError::Missing {
            key,
            command: self.command,
        })
    }

    fn positive(
        &self,
        key: &'static str,
        symbol: &'static str,
        v: Option<f64>,
    ) -> Result<f64, ConfigError> {
        positive(key, symbol, self.need(key, v)?)
    }

    fn lattice(&self) -> Result<LatticeSpec, ConfigError> {
        let c = self.config;
        Ok(LatticeSpec {
            box_length: self.positive("lattice.box_length", "L", c.lattice.box_length)?,
            mass: positive("gas.mass", "m", c.gas.mass.unwrap_or(SODIUM_23_MASS))?,
            z_max: c.lattice.z_max.unwrap_or(DEFAULT_Z_MAX),
        })
    }

    fn gamma(&self) -> Result<f64, ConfigError> {
        positive(
            "numerics.gamma",
            "gamma",
            self.config.numerics.gamma.unwrap_or(1.0),
        )
    }

    fn t_end(&self) -> Result<f64, ConfigError> {
        let t = self.need("numerics.t_end", self.config.numerics.t_end)?;
        if t.is_finite() && t >= 0.0 {
            Ok(t)
        } else {
            Err(invalid("numerics.t_end", "t_end", t, "finite and >= 0"))
        }
    }

    fn samples(&self) -> Result<usize, ConfigError> {
        match self.config.numerics.samples.unwrap_or(DEFAULT_SAMPLES) {
            0 => Err(invalid("numerics.samples", "samples", 0, ">= 1")),
            n => Ok(n),
        }
    }
}

fn invalid(
    key: &'static str,
    symbol: &'static str,
    value: impl fmt::Display,
    requirement: &'static str,
) -> ConfigError {
    ConfigError::Invalid {
        key,
        symbol,
        value: value.to_string(),
        requirement,
    }
}

fn positive(key: &'static str, symbol: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, symbol, v, "finite and > 0"))
    }
}

fn occupation_list(values: &[f64]) -> Result<Vec<u32>, ConfigError> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                Err(invalid(
                    "initial.occupations",
                    "n",
                    v,
                    "non-negative integers",
                ))
            }
        })
        .collect()
}

/// Validates `config` for `command` and fills in defaults.
pub fn resolve(config: &RunConfig, command: Command) -> Result<Plan, ConfigError> {
    let ck = Check { command, config };
    let c = config;
    match command {
        Command::Regime => {
            let params = GasParameters {
                mass: positive("gas.mass", "m", c.gas.mass.unwrap_or(SODIUM_23_MASS))?,
                scattering_length: ck.positive(
                    "gas.scattering_length",
                    "a",
                    c.gas.scattering_length,
                )?,
                temperature: ck.positive("gas.temperature", "T", c.gas.temperature)?,
                density: ck.positive("gas.density", "rho", c.gas.density)?,
                cell_length: ck.positive("gas.cell_length", "l_c", c.gas.cell_length)?,
                mean_free_path: c
                    .gas
                    .mean_free_path
                    .map(|v| positive("gas.mean_free_path", "lambda_mfp", v))
                    .transpose()?,
            };
            let threshold = positive(
                "numerics.threshold",
                "threshold",
                c.numerics.threshold.unwrap_or(10.0),
            )?;
            Ok(Plan::Regime(RegimePlan { params, threshold }))
        }
        Command::Kmc => {
            let initial = match (&c.initial.occupations, c.initial.per_mode) {
                (Some(list), None) => KmcInitial::Occupations(occupation_list(list)?),
                (None, per_mode) => {
                    let v = per_mode.unwrap_or(1.0);
                    KmcInitial::PerMode(
                        occupation_list(&[v]).map_err(|_| {
                            invalid("initial.per_mode", "n", v, "a non-negative integer")
                        })?[0],
                    )
                }
                (Some(_), Some(_)) => {
                    return Err(invalid(
                        "initial.per_mode",
                        "n",
                        "set",
                        "absent when initial.occupations is given",
                    ))
                }
            };
            if c.initial.beta.is_some() || c.initial.mu.is_some() {
                return Err(invalid(
                    "initial.beta",
                    "beta",
                    "set",
                    "absent for kmc (integer occupations only)",
                ));
            }
            let trajectories = c.numerics.trajectories.unwrap_or(1);
            if trajectories == 0 {
                return Err(invalid("numerics.trajectories", "trajectories", 0, ">= 1"));
            }
            Ok(Plan::Kmc(KmcPlan {
                lattice: ck.lattice()?,
                gamma: ck.gamma()?,
                t_end: ck.t_end()?,
                samples: ck.samples()?,
                trajectories,
                initial,
                stationary: c.numerics.stationary.unwrap_or(false),
            }))
        }
        Command::Uu => {
            let i = &c.initial;
            let initial = match (i.beta, i.mu, &i.occupations, i.per_mode) {
                (Some(beta), Some(mu), None, None) => UuInitial::BoseEinstein {
                    beta: positive("initial.beta", "beta", beta)?,
                    mu: if mu.is_finite() {
                        mu
                    } else {
                        return Err(invalid("initial.mu", "mu", mu, "finite"));
                    },
                },
                (None, None, Some(list), None) => {
                    if let Some(&v) = list.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                        return Err(invalid("initial.occupations", "n", v, "finite and >= 0"));
                    }
                    UuInitial::Occupations(list.clone())
                }
                (None, None, None, Some(v)) => {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(invalid("initial.per_mode", "n", v, "finite and >= 0"));
                    }
                    UuInitial::PerMode(v)
                }
                (None, None, None, None) => {
                    return Err(ConfigError::Missing {
                        key: "initial",
                        command,
                    })
                }
                (Some(_), None, _, _) => {
                    return Err(ConfigError::Missing {
                        key: "initial.mu",
                        command,
                    })
                }
                (None, Some(_), _, _) => {
                    return Err(ConfigError::Missing {
                        key: "initial.beta",
                        command,
                    })
                }
                _ => {
                    return Err(invalid(
                        "initial",
                        "initial",
                        "several forms",
                        "exactly one of beta+mu, occupations, per_mode",
                    ))
                }
            };
            let tolerance = positive(
                "numerics.tolerance",
                "tolerance",
                c.numerics.tolerance.unwrap_or(1e-10),
            )?;
            Ok(Plan::Uu(UuPlan {
                lattice: ck.lattice()?,
                gamma: ck.gamma()?,
                t_end: ck.t_end()?,
                samples: ck.samples()?,
                tolerance,
                initial,
            }))
        }
        Command::Condensate => {
            let alpha = ck.need("condensate.alpha", c.condensate.alpha)?;
            if !(alpha.is_finite() && alpha <= 0.0) {
                return Err(invalid(
                    "condensate.alpha",
                    "alpha",
                    alpha,
                    "finite and <= 0",
                ));
            }
            let rho0 = c.condensate.rho0.unwrap_or(0.0);
            if !(rho0.is_finite() && rho0 >= 0.0) {
                return Err(invalid("condensate.rho0", "rho0", rho0, "finite and >= 0"));
            }
            let phi0 = (
                c.condensate.phi_re.unwrap_or(1.0),
                c.condensate.phi_im.unwrap_or(0.0),
            );
            if !(phi0.0.is_finite() && phi0.1.is_finite()) {
                return Err(invalid(
                    "condensate.phi_re",
                    "phi",
                    format!("{phi0:?}"),
                    "finite",
                ));
            }
            Ok(Plan::Condensate(CondensatePlan {
                lattice: LatticeSpec {
                    z_max: c.lattice.z_max.unwrap_or(2),
                    ..ck.lattice()?
                },
                temperature: ck.positive("gas.temperature", "T", c.gas.temperature)?,
                scattering_length: ck.positive(
                    "gas.scattering_length",
                    "a",
                    c.gas.scattering_length,
                )?,
                alpha,
                eta: c
                    .numerics
                    .eta
                    .map(|v| positive("numerics.eta", "eta", v))
                    .transpose()?,
                t_end: c.numerics.t_end.map(|_| ck.t_end()).transpose()?,
                samples: ck.samples()?,
                rho0,
                phi0,
                dissipation: c.condensate.dissipation.unwrap_or(true),
            }))
        }
        Command::BasisCheck => Ok(Plan::BasisCheck(BasisPlan {
            cell_length: ck.positive("gas.cell_length", "l_c", c.gas.cell_length)?,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_named() {
        let err = parse_config("[gas]\ntemprature = 1e-6\n").unwrap_err();
        assert!(err.to_string().contains("temprature"), "{err}");
    }

    #[test]
    fn missing_parameter_named() {
        let c = parse_config("[gas]\ntemperature = 1e-6\n").unwrap();
        let err = resolve(&c, Command::Regime).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Missing {
                key: "gas.scattering_length",
                command: Command::Regime
            }
        );
    }

    #[test]
    fn kmc_rejects_fractional_occupation() {
        let c = parse_config(
            "[lattice]\nbox_length = 1.0\n[numerics]\nt_end = 1.0\n[initial]\nper_mode = 1.5\n",
        )
        .unwrap();
        assert!(matches!(
            resolve(&c, Command::Kmc),
            Err(ConfigError::Invalid { .. })
        ));
    }
}
