//! Training-data generation: encoder measurements, finite-difference
//! velocity/acceleration, torque reconstruction, noise-variance propagation
//! and offline grid datasets for the experts.
//!
//! The torque observations follow the defining relation of the motion
//! dynamics, `T = -J*omega_dot - B*omega + 1.5*p*psi*I_q`, with the
//! derivative replaced by finite differences of encoder readings. The
//! propagated noise variances quantify how encoder noise is amplified by
//! the differentiation chain.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorParams, INPUT_DOMAIN};
use crate::error::{Error, Result};
use crate::gp::Dataset;

/// Sensor-chain parameters for data generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Encoder noise standard deviation sigma_phi (rad).
    pub sigma_phi: f64,
    /// Sampling interval Delta (s).
    pub delta_t: f64,
    /// Velocity linearization-error standard deviation.
    pub sigma_lin_phi: f64,
    /// Acceleration linearization-error standard deviation.
    pub sigma_lin_omega: f64,
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::Config("delta_t must be positive".into()));
        }
        for (name, v) in [
            ("sigma_phi", self.sigma_phi),
            ("sigma_lin_phi", self.sigma_lin_phi),
            ("sigma_lin_omega", self.sigma_lin_omega),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Input region and grid for one expert's offline dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub n_phi: usize,
    pub n_omega: usize,
    /// Observation noise sigma_T for this expert.
    pub noise_std: f64,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.phi_lo > self.phi_hi || self.omega_lo > self.omega_hi {
            return Err(Error::Config("region bounds must be ordered".into()));
        }
        if self.phi_lo < INPUT_DOMAIN[0].0 - 1e-12
            || self.phi_hi > INPUT_DOMAIN[0].1 + 1e-12
            || self.omega_lo < INPUT_DOMAIN[1].0 - 1e-12
            || self.omega_hi > INPUT_DOMAIN[1].1 + 1e-12
        {
            return Err(Error::Config("region must be nested inside the compact domain".into()));
        }
        if self.n_phi < 1 || self.n_omega < 1 {
            return Err(Error::Config("grid counts must be at least 1".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64; 2]) -> bool {
        x[0] >= self.phi_lo && x[0] <= self.phi_hi && x[1] >= self.omega_lo && x[1] <= self.omega_hi
    }
}

/// One encoder reading: `z = phi_m + eps`, `eps ~ N(0, sigma_phi^2)`.
pub fn encoder_measure(phi_m: f64, cfg: &SensorConfig, rng: &mut ChaCha8Rng) -> f64 {
    if cfg.sigma_phi == 0.0 {
        return phi_m;
    }
    let normal = Normal::new(0.0, cfg.sigma_phi).expect("valid std");
    phi_m + normal.sample(rng)
}

/// Forward-difference velocity estimate `(z_next - z_now) / Delta`.
pub fn finite_diff_velocity(z_next: f64, z_now: f64, delta_t: f64) -> f64 {
    (z_next - z_now) / delta_t
}

/// Second-difference acceleration estimate `(z2 - 2 z1 + z0) / Delta^2`.
pub fn finite_diff_accel(z_2: f64, z_1: f64, z_0: f64, delta_t: f64) -> f64 {
    (z_2 - 2.0 * z_1 + z_0) / (delta_t * delta_t)
}

/// Reconstruct the external torque from two consecutive velocity estimates:
/// `y = -J (omega_next - omega_now)/Delta - B omega_now + 1.5 p psi I_q`.
pub fn reconstruct_torque(
    omega_tilde_next: f64,
    omega_tilde_now: f64,
    i_q: f64,
    delta_t: f64,
    params: &MotorParams,
) -> f64 {
    -params.inertia * (omega_tilde_next - omega_tilde_now) / delta_t
        - params.damping * omega_tilde_now
        + params.torque_constant() * i_q
}

/// Propagated velocity-estimate noise variance:
/// `sigma_omega^2 = 4 Delta^-2 sigma_phi^2 + sigma_lin_phi^2`.
pub fn noise_variance_omega(cfg: &SensorConfig) -> f64 {
    4.0 / (cfg.delta_t * cfg.delta_t) * cfg.sigma_phi * cfg.sigma_phi
        + cfg.sigma_lin_phi * cfg.sigma_lin_phi
}

/// Propagated acceleration-estimate noise variance:
/// `sigma_domega^2 = 4 Delta^-2 sigma_omega^2 + sigma_lin_omega^2`.
pub fn noise_variance_domega(sigma_omega_sq: f64, cfg: &SensorConfig) -> f64 {
    4.0 / (cfg.delta_t * cfg.delta_t) * sigma_omega_sq
        + cfg.sigma_lin_omega * cfg.sigma_lin_omega
}

/// Propagated torque-observation noise variance:
/// `sigma_T^2 = (4 J^2 / Delta^2 + B^2) sigma_omega^2 + J^2 sigma_lin_omega^2`.
pub fn noise_variance_torque(sigma_omega_sq: f64, cfg: &SensorConfig, params: &MotorParams) -> f64 {
    let j = params.inertia;
    let b = params.damping;
    (4.0 * j * j / (cfg.delta_t * cfg.delta_t) + b * b) * sigma_omega_sq
        + j * j * cfg.sigma_lin_omega * cfg.sigma_lin_omega
}

/// Evenly spaced grid over `[lo, hi]` with `n` points; a single point sits
/// at the interval midpoint.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Generate an evenly spaced grid dataset over one expert region, with
/// outputs `y = f(x) + eps`, `eps ~ N(0, noise_std^2)` drawn from the
/// seeded stream. The same seed yields a bitwise-identical dataset.
pub fn generate_grid_dataset(region: &RegionSpec, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    region.validate()?;
    let phis = linspace(region.phi_lo, region.phi_hi, region.n_phi);
    let omegas = linspace(region.omega_lo, region.omega_hi, region.n_omega);
    let mut inputs = Vec::with_capacity(region.n_phi * region.n_omega);
    let mut outputs = Vec::with_capacity(region.n_phi * region.n_omega);
    for &phi_m in &phis {
        for &omega_m in &omegas {
            let xm = crate::dynamics::MappedInput { phi_m, omega_m };
            let mut y = crate::dynamics::true_torque(&xm);
            if region.noise_std > 0.0 {
                let normal = Normal::new(0.0, region.noise_std).expect("valid std");
                y += normal.sample(rng);
            }
            inputs.push([phi_m, omega_m]);
            outputs.push(y);
        }
    }
    Ok(Dataset { inputs, outputs, noise_std: region.noise_std })
}
