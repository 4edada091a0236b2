//! Scenario configuration: TOML schema, validation and the bundled
//! reference scenario.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::control::Gains;
use crate::datagen::RegionSpec;
use crate::dynamics::{MappingConfig, MotorParams, ReferenceConfig};
use crate::error::{Error, Result};
use crate::gp::SEKernel;

/// Aggregation strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Prior mean only: every expert predicts zero.
    None,
    /// Uniform-weight mixture of experts.
    Moe,
    /// Precision-weighted generalized product of experts.
    Gpoe,
    /// Control-aware vertex selection on the posterior means.
    CoaoeMean,
    /// Vertex selection minimizing the uniform error bound.
    CoaoeEta,
    /// Test hook: the controller receives the true torque, re-evaluated
    /// continuously inside the integrator. Not reachable from the CLI.
    #[serde(skip)]
    Perfect,
}

impl Strategy {
    pub const COMPARISON: [Strategy; 5] = [
        Strategy::None,
        Strategy::Moe,
        Strategy::Gpoe,
        Strategy::CoaoeMean,
        Strategy::CoaoeEta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Moe => "moe",
            Strategy::Gpoe => "gpoe",
            Strategy::CoaoeMean => "coaoe-mean",
            Strategy::CoaoeEta => "coaoe-eta",
            Strategy::Perfect => "perfect",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "moe" => Ok(Strategy::Moe),
            "gpoe" => Ok(Strategy::Gpoe),
            "coaoe-mean" => Ok(Strategy::CoaoeMean),
            "coaoe-eta" => Ok(Strategy::CoaoeEta),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected none|moe|gpoe|coaoe-mean|coaoe-eta)"
            ))),
        }
    }
}

/// Error-bound parameters of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub delta: f64,
    pub tau: f64,
    /// Lipschitz constant of the unknown torque field.
    pub l_f: f64,
}

/// Simulation loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Total duration (s).
    pub t_end: f64,
    /// Integrator step (s).
    pub dt_sim: f64,
    /// Controller update interval (s); must be an integer multiple of
    /// `dt_sim`.
    pub dt_ctrl: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

/// Full closed-loop scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub motor: MotorParams,
    pub mapping: MappingConfig,
    pub reference: ReferenceConfig,
    pub gains: Gains,
    /// Symmetric positive definite Lyapunov weighting, row major.
    pub q: [[f64; 2]; 2],
    pub kernel: SEKernel,
    pub bound: BoundConfig,
    pub experts: Vec<RegionSpec>,
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn q_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.q[0][0], self.q[0][1], self.q[1][0], self.q[1][1])
    }

    /// Number of integrator substeps per control tick.
    pub fn substeps(&self) -> usize {
        (self.sim.dt_ctrl / self.sim.dt_sim).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.mapping.validate()?;
        self.reference.validate()?;
        self.kernel.validate()?;
        if self.experts.is_empty() {
            return Err(Error::Config("at least one expert region required".into()));
        }
        for region in &self.experts {
            region.validate()?;
        }
        if !(self.sim.t_end > 0.0) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        if !(self.sim.dt_sim > 0.0 && self.sim.dt_ctrl > 0.0) {
            return Err(Error::Config("time steps must be positive".into()));
        }
        let ratio = self.sim.dt_ctrl / self.sim.dt_sim;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
            return Err(Error::Config(
                "dt_ctrl must be an integer multiple of dt_sim".into(),
            ));
        }
        if !(self.bound.delta > 0.0 && self.bound.delta < 1.0) {
            return Err(Error::Config("bound.delta must lie in (0, 1)".into()));
        }
        if !(self.bound.tau > 0.0) {
            return Err(Error::Config("bound.tau must be positive".into()));
        }
        if !(self.bound.l_f >= 0.0) {
            return Err(Error::Config("bound.l_f must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The bundled validation scenario: 500 rpm trapezoidal reference,
    /// four experts on quarter-turn slices, gains (-5e3, -1e4), Q = I.
    pub fn reference_scenario() -> Self {
        let omega_max = 1000.0 * 2.0 * PI / 60.0; // 1000 rpm
        let sigmas = [0.01, 0.1, 0.1, 0.01];
        let experts = (0..4)
            .map(|i| RegionSpec {
                phi_lo: -PI + i as f64 * PI / 2.0,
                phi_hi: -PI + (i + 1) as f64 * PI / 2.0,
                omega_lo: -1.0,
                omega_hi: 1.0,
                n_phi: 10,
                n_omega: 5,
                noise_std: sigmas[i],
            })
            .collect();
        ScenarioConfig {
            motor: MotorParams {
                inertia: 8e-5,
                pole_pairs: 5,
                damping: 0.1,
                flux_linkage: 0.008,
            },
            mapping: MappingConfig {
                upsilon: 0.1,
                omega_lo: -omega_max,
                omega_hi: omega_max,
            },
            reference: ReferenceConfig {
                alpha: 50.0 * PI / 3.0,
                t_acc: 1.0,
            },
            gains: Gains {
                lambda1: -5e3,
                lambda2: -1e4,
            },
            q: [[1.0, 0.0], [0.0, 1.0]],
            kernel: SEKernel { sigma_f: 1.0, ell: 0.2 },
            bound: BoundConfig {
                delta: 0.01,
                tau: 0.01,
                l_f: 2.0002,
            },
            experts,
            sim: SimConfig {
                t_end: 10.0,
                dt_sim: 1e-5,
                dt_ctrl: 1e-4,
                strategy: Strategy::CoaoeEta,
                seed: 42,
            },
        }
    }
}
