//! Flat TOML run configuration.
//!
//! ```toml
//! problem = "scalar_linear"   # scalar_linear | cdp | custom
//! kernel = "rl"               # rl | classical
//! alpha = 0.5                 # required for rl
//! T = 1.0
//! N = 512
//! u0 = "constant"             # zero | sin | bump | constant
//! u0_value = 1.0
//! ```
//!
//! Remaining keys and their defaults are the fields of [`RunConfig`].

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::{AbsValue, Quadratic, SharedEnergy, TranslatedQuadratic, ZeroEnergy, ZeroIndicator};
use crate::kernels::{rl_pair, KernelPair};
use crate::plaplace::{CdpConfig, MovingDomain, SpatialGrid};
use crate::stepper::FlowConfig;
use crate::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    ScalarLinear,
    Cdp,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Rl,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    Sin,
    Bump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    /// Closed form when one is known for the configuration, else self-reference.
    #[default]
    Auto,
    MittagLeffler,
    ClosedForm,
    Eigenmode,
    SelfReference,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two() -> f64 {
    2.0
}
fn tight() -> f64 {
    1e-10
}
fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    /// Builtin energy for `problem = "custom"`: quadratic, abs, zero,
    /// zero_indicator, translated_quadratic.
    #[serde(default)]
    pub energy: Option<String>,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub kernel: KernelName,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    /// `φ(u) = (rate/2)|u|²` for scalar_linear and quadratic energies.
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub a0: f64,
    #[serde(default = "one")]
    pub b0: f64,
    #[serde(default, rename = "A")]
    pub amp_a: f64,
    #[serde(default, rename = "B")]
    pub amp_b: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub u0: Profile,
    #[serde(default = "one")]
    pub u0_value: f64,
    #[serde(default)]
    pub f: Profile,
    #[serde(default = "one")]
    pub f_amplitude: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "tight")]
    pub residual_tol: f64,
    #[serde(default = "tight")]
    pub prox_tol: f64,
    /// Allowance of the chain-rule and energy-estimate certificates;
    /// `0.05·256/N` when absent.
    #[serde(default)]
    pub certificate_tol: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Number of evenly spaced snapshot times written by cdp runs.
    #[serde(default = "five")]
    pub snapshots: usize,
    #[serde(default)]
    pub oracle: Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

/// Problem ready to solve.
#[derive(Clone)]
pub enum Built {
    Flow(FlowConfig),
    Cdp(CdpConfig),
}

impl Built {
    pub fn flow_config(&self) -> crate::Result<FlowConfig> {
        match self {
            Built::Flow(f) => Ok(f.clone()),
            Built::Cdp(c) => c.flow_config(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("field"))
                .unwrap_or("")
                .to_string();
            ConfigError { field, message: msg }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.kernel, self.alpha) {
            (KernelName::Rl, None) => return Err(bad("alpha", "required when kernel = \"rl\"")),
            (KernelName::Rl, Some(a)) if !(a > 0.0 && a < 1.0) => {
                return Err(bad("alpha", format!("must lie in (0, 1), got {a}")))
            }
            (KernelName::Classical, Some(_)) => {
                return Err(bad("alpha", "not used by the classical kernel"))
            }
            _ => {}
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(bad("T", "must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(bad("N", "must be at least 1"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(bad("nu", "must be nonnegative"));
        }
        for (name, v) in [("residual_tol", self.residual_tol), ("prox_tol", self.prox_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name, "must be positive"));
            }
        }
        if let Some(tol) = self.certificate_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(bad("certificate_tol", "must be nonnegative"));
            }
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(bad("rate", "must be nonnegative"));
        }
        match self.problem {
            Problem::Cdp => {
                match self.d {
                    None => return Err(bad("d", "required when problem = \"cdp\"")),
                    Some(0) => return Err(bad("d", "must be at least 1")),
                    _ => {}
                }
                if !(self.p >= 2.0 && self.p.is_finite()) {
                    return Err(bad("p", "must be at least 2"));
                }
                self.domain()?;
                if self.energy.is_some() {
                    return Err(bad("energy", "only used with problem = \"custom\""));
                }
            }
            Problem::ScalarLinear | Problem::Custom => {
                for (name, profile) in [("u0", self.u0), ("f", self.f)] {
                    if matches!(profile, Profile::Sin | Profile::Bump) {
                        return Err(bad(name, "spatial profiles need problem = \"cdp\""));
                    }
                }
                if self.d.is_some() {
                    return Err(bad("d", "only used with problem = \"cdp\""));
                }
                if self.problem == Problem::ScalarLinear {
                    if self.energy.is_some() {
                        return Err(bad("energy", "only used with problem = \"custom\""));
                    }
                    if self.dim != 1 {
                        return Err(bad("dim", "scalar_linear is one-dimensional"));
                    }
                } else {
                    if self.dim == 0 {
                        return Err(bad("dim", "must be at least 1"));
                    }
                    self.custom_energy()?;
                }
            }
        }
        Ok(())
    }

    /// Canonical form hashed into every output file (the output directory is excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        crate::io::sha256_hex(serde_json::to_string(&c).expect("config serialises").as_bytes())
    }

    pub fn pair(&self) -> KernelPair {
        match self.kernel {
            KernelName::Classical => KernelPair::classical(),
            KernelName::Rl => rl_pair(self.alpha.expect("validated")).expect("validated"),
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.t_final, self.steps).expect("validated")
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self { steps, ..self.clone() }
    }

    pub fn domain(&self) -> Result<MovingDomain, ConfigError> {
        MovingDomain::new(self.a0, self.b0, self.amp_a, self.amp_b, self.omega, self.phase)
            .map_err(|e| bad("domain", e.to_string()))
    }

    pub fn spatial(&self) -> Option<SpatialGrid> {
        self.d.map(|d| SpatialGrid::new(d).expect("validated"))
    }

    fn custom_energy(&self) -> Result<SharedEnergy, ConfigError> {
        let name = self
            .energy
            .as_deref()
            .ok_or_else(|| bad("energy", "required when problem = \"custom\""))?;
        let e: SharedEnergy = match name {
            "quadratic" => Arc::new(Quadratic::new(self.dim, self.rate)),
            "abs" if self.dim == 1 => Arc::new(AbsValue),
            "abs" => return Err(bad("dim", "abs is one-dimensional")),
            "zero" => Arc::new(ZeroEnergy::new(self.dim)),
            "zero_indicator" => Arc::new(ZeroIndicator::new(self.dim)),
            "translated_quadratic" => {
                Arc::new(TranslatedQuadratic::new(self.dim, self.u0_value, self.omega))
            }
            other => return Err(bad("energy", format!("unknown energy `{other}`"))),
        };
        Ok(e)
    }

    /// Spatial profile on `(a, b)`, zero elsewhere.
    fn profile(kind: Profile, value: f64, a: f64, b: f64, x: f64) -> f64 {
        if !(a < x && x < b) {
            return 0.0;
        }
        let s = (x - a) / (b - a);
        match kind {
            Profile::Zero => 0.0,
            Profile::Constant => value,
            Profile::Sin => value * (PI * s).sin(),
            Profile::Bump => {
                let r = 2.0 * s - 1.0;
                value * (1.0 - 1.0 / (1.0 - r * r)).exp()
            }
        }
    }

    fn scalar_value(kind: Profile, value: f64) -> f64 {
        match kind {
            Profile::Constant => value,
            _ => 0.0,
        }
    }

    pub fn build(&self) -> Result<Built, ConfigError> {
        self.validate()?;
        let pair = self.pair();
        let grid = self.grid();
        match self.problem {
            Problem::ScalarLinear | Problem::Custom => {
                let energy: SharedEnergy = match self.problem {
                    Problem::ScalarLinear => Arc::new(Quadratic::new(1, self.rate)),
                    _ => self.custom_energy()?,
                };
                let u0 = vec![Self::scalar_value(self.u0, self.u0_value); self.dim];
                let fv = Self::scalar_value(self.f, self.f_amplitude);
                let mut cfg = FlowConfig::new(pair, grid, energy, u0)
                    .with_forcing_fn(|_| vec![fv; self.dim])
                    .with_nu(self.nu);
                cfg.tolerances.residual_tol = self.residual_tol;
                cfg.validate().map_err(|e| bad("u0", e.to_string()))?;
                Ok(Built::Flow(cfg))
            }
            Problem::Cdp => {
                let domain = self.domain()?;
                let spatial = self.spatial().expect("validated");
                let x = spatial.nodes();
                let u0: Vec<f64> = x
                    .iter()
                    .map(|&xi| Self::profile(self.u0, self.u0_value, domain.a(0.0), domain.b(0.0), xi))
                    .collect();
                let mut cfg = CdpConfig::new(pair, grid, self.p, domain, spatial, u0);
                cfg.forcing = grid
                    .nodes()
                    .map(|t| {
                        x.iter()
                            .map(|&xi| Self::profile(self.f, self.f_amplitude, domain.a(t), domain.b(t), xi))
                            .collect()
                    })
                    .collect();
                cfg.nu = self.nu;
                cfg.prox_tol = self.prox_tol;
                cfg.residual_tol = self.residual_tol;
                cfg.energy().map_err(|e| bad("p", e.to_string()))?;
                Ok(Built::Cdp(cfg))
            }
        }
    }

    /// Resolved oracle for the convergence study.
    pub fn resolved_oracle(&self) -> Result<Oracle, ConfigError> {
        let closed_scalar = self.problem == Problem::ScalarLinear && self.f == Profile::Zero && self.nu == 0.0;
        let eigen = self.problem == Problem::Cdp
            && self.p == 2.0
            && self.a0 == 0.0
            && self.b0 == 1.0
            && self.u0 == Profile::Sin
            && self.f == Profile::Zero
            && self.nu == 0.0;
        let scalar_kind = match self.kernel {
            KernelName::Rl => Oracle::MittagLeffler,
            KernelName::Classical => Oracle::ClosedForm,
        };
        match self.oracle {
            Oracle::Auto if closed_scalar => Ok(scalar_kind),
            Oracle::Auto if eigen => Ok(Oracle::Eigenmode),
            Oracle::Auto | Oracle::SelfReference => Ok(Oracle::SelfReference),
            Oracle::MittagLeffler | Oracle::ClosedForm if closed_scalar => {
                if self.oracle == scalar_kind {
                    Ok(self.oracle)
                } else {
                    Err(bad("oracle", "does not match the kernel"))
                }
            }
            Oracle::Eigenmode if eigen => Ok(Oracle::Eigenmode),
            other => Err(bad(
                "oracle",
                format!("{other:?} has no closed form for this configuration"),
            )),
        }
    }
}
