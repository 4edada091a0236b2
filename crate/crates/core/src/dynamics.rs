//! PMSM motion model, state-to-GP-input mapping, the simulated external
//! torque field and the tracking reference.
//!
//! The plant is the two-state motion model
//!
//! ```text
//! d/dt [phi, omega] = [omega, (-B*omega + 1.5*p*psi*I_q - T) / J]
//! ```
//!
//! driven by the q-axis current `I_q` and an unknown external torque `T`.
//! The torque is modeled as a function of the mapped input
//! `x_m = [mod(upsilon*phi, 2pi) - pi, omega/omega_max]`, which lives on the
//! compact domain `[-pi, pi) x [-1, 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact GP input domain: `[-pi, pi] x [-1, 1]`.
pub const INPUT_DOMAIN: [(f64, f64); 2] = [(-PI, PI), (-1.0, 1.0)];

/// Physical constants of the motor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Moment of inertia J (kg/m^2).
    pub inertia: f64,
    /// Pole-pair count p.
    pub pole_pairs: u32,
    /// Viscous damping ratio B.
    pub damping: f64,
    /// Flux linkage psi (Wb).
    pub flux_linkage: f64,
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return Err(Error::Config("inertia must be positive".into()));
        }
        if self.pole_pairs < 1 {
            return Err(Error::Config("pole_pairs must be at least 1".into()));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::Config("damping must be nonnegative".into()));
        }
        if !(self.flux_linkage > 0.0 && self.flux_linkage.is_finite()) {
            return Err(Error::Config("flux_linkage must be positive".into()));
        }
        Ok(())
    }

    /// Electromagnetic torque per ampere of q-axis current: `1.5 * p * psi`.
    pub fn torque_constant(&self) -> f64 {
        1.5 * self.pole_pairs as f64 * self.flux_linkage
    }
}

/// Plant state `x = [phi, omega]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    /// Rotation angle (rad).
    pub phi: f64,
    /// Angular velocity (rad/s).
    pub omega: f64,
}

impl State {
    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.omega.is_finite()
    }
}

/// Parameters of the state-to-GP-input mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    /// Gear ratio between motor output and driven mechanism.
    pub upsilon: f64,
    /// Lower angular-velocity bound (rad/s).
    pub omega_lo: f64,
    /// Upper angular-velocity bound (rad/s).
    pub omega_hi: f64,
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return Err(Error::Config("upsilon must be positive".into()));
        }
        if self.omega_max() <= 0.0 || !self.omega_max().is_finite() {
            return Err(Error::Config("omega bounds must give omega_max > 0".into()));
        }
        Ok(())
    }

    /// Maximal absolute angular velocity `max(|omega_lo|, |omega_hi|)`.
    pub fn omega_max(&self) -> f64 {
        self.omega_lo.abs().max(self.omega_hi.abs())
    }
}

/// GP input `x_m = [phi_m, omega_m]` on the compact domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedInput {
    /// Mapped angle in `[-pi, pi)`.
    pub phi_m: f64,
    /// Normalized velocity, `|omega_m| <= 1` for in-bound velocities.
    pub omega_m: f64,
}

impl MappedInput {
    pub fn as_array(&self) -> [f64; 2] {
        [self.phi_m, self.omega_m]
    }
}

/// Map the plant state onto the compact GP input domain.
///
/// The modulo is Euclidean (result in `[0, 2pi)` for all real arguments,
/// negatives included), so `phi_m` always lands in `[-pi, pi)`.
pub fn map_state(state: &State, cfg: &MappingConfig) -> MappedInput {
    let phi_m = (cfg.upsilon * state.phi).rem_euclid(2.0 * PI) - PI;
    MappedInput {
        phi_m,
        omega_m: state.omega / cfg.omega_max(),
    }
}

/// Right-hand side of the motion dynamics.
pub fn dynamics_rhs(state: &State, i_q: f64, torque: f64, params: &MotorParams) -> (f64, f64) {
    let omega_dot = (-params.damping * state.omega + params.torque_constant() * i_q - torque)
        / params.inertia;
    (state.omega, omega_dot)
}

/// Simulated true external torque field over the mapped input.
///
/// `T = 2 sin(phi_m) + 2e-4 cos(phi_m) omega_m^2 + 10`, a constant load plus
/// position- and velocity-dependent components.
pub fn true_torque(xm: &MappedInput) -> f64 {
    2.0 * xm.phi_m.sin() + 2.0e-4 * xm.phi_m.cos() * xm.omega_m * xm.omega_m + 10.0
}

/// Reference trajectory parameters: accelerate at `alpha` for `t_acc`
/// seconds, then cruise at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// Acceleration magnitude (rad/s^2).
    pub alpha: f64,
    /// Acceleration duration (s).
    pub t_acc: f64,
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(self.t_acc > 0.0 && self.t_acc.is_finite()) {
            return Err(Error::Config("t_acc must be positive".into()));
        }
        Ok(())
    }
}

/// Desired angle, velocity and acceleration at one time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub phi_d: f64,
    pub omega_d: f64,
    pub accel_d: f64,
}

/// Evaluate the reference trajectory at time `t >= 0`.
pub fn reference(t: f64, cfg: &ReferenceConfig) -> ReferencePoint {
    if t <= cfg.t_acc {
        ReferencePoint {
            phi_d: 0.5 * cfg.alpha * t * t,
            omega_d: cfg.alpha * t,
            accel_d: cfg.alpha,
        }
    } else {
        ReferencePoint {
            phi_d: cfg.alpha * cfg.t_acc * t - 0.5 * cfg.alpha * cfg.t_acc * cfg.t_acc,
            omega_d: cfg.alpha * cfg.t_acc,
            accel_d: 0.0,
        }
    }
}

/// One classical RK4 step of the motion dynamics with `i_q` held constant
/// over the step (zero-order hold).
///
/// `torque` is re-evaluated at every intermediate state.
pub fn rk4_step<F>(state: &State, dt: f64, i_q: f64, params: &MotorParams, torque: F) -> State
where
    F: Fn(&State) -> f64,
{
    let f = |_t: f64, s: &State| dynamics_rhs(s, i_q, torque(s), params);
    rk4_step_with(state, 0.0, dt, f)
}

/// RK4 step for an arbitrary (possibly time-dependent) right-hand side of
/// the two-state system.
///
/// Used by the closed-loop runner when the control input itself must be
/// re-evaluated at intermediate states (continuous-controller test hook).
pub fn rk4_step_with<F>(state: &State, t: f64, dt: f64, f: F) -> State
where
    F: Fn(f64, &State) -> (f64, f64),
{
    let k1 = f(t, state);
    let s2 = State {
        phi: state.phi + 0.5 * dt * k1.0,
        omega: state.omega + 0.5 * dt * k1.1,
    };
    let k2 = f(t + 0.5 * dt, &s2);
    let s3 = State {
        phi: state.phi + 0.5 * dt * k2.0,
        omega: state.omega + 0.5 * dt * k2.1,
    };
    let k3 = f(t + 0.5 * dt, &s3);
    let s4 = State {
        phi: state.phi + dt * k3.0,
        omega: state.omega + dt * k3.1,
    };
    let k4 = f(t + dt, &s4);
    State {
        phi: state.phi + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        omega: state.omega + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn table_params() -> MotorParams {
        MotorParams {
            inertia: 8e-5,
            pole_pairs: 5,
            damping: 0.1,
            flux_linkage: 0.008,
        }
    }

    fn mapping() -> MappingConfig {
        MappingConfig {
            upsilon: 0.1,
            omega_lo: -1000.0 * 2.0 * PI / 60.0,
            omega_hi: 1000.0 * 2.0 * PI / 60.0,
        }
    }

    #[test]
    fn map_state_at_origin() {
        let xm = map_state(&State { phi: 0.0, omega: 0.0 }, &mapping());
        assert_eq!(xm.phi_m, -PI);
        assert_eq!(xm.omega_m, 0.0);
    }

    #[test]
    fn map_state_half_turn() {
        // upsilon*phi = pi, mod gives pi, minus pi is 0.
        let xm = map_state(&State { phi: 10.0 * PI, omega: 0.0 }, &mapping());
        assert_abs_diff_eq!(xm.phi_m, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn map_state_normalizes_omega_to_one_at_max() {
        // 1000 rpm = 1000 * 2pi / 60 rad/s.
        let omega_max = 1000.0 * 2.0 * PI / 60.0;
        let xm = map_state(&State { phi: 0.0, omega: omega_max }, &mapping());
        assert_relative_eq!(xm.omega_m, 1.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn map_state_range(phi in -1e6f64..1e6f64, omega in -200.0f64..200.0) {
            let xm = map_state(&State { phi, omega }, &mapping());
            prop_assert!(xm.phi_m >= -PI && xm.phi_m < PI);
        }

        #[test]
        fn map_state_periodicity(phi in -1e3f64..1e3f64) {
            let cfg = mapping();
            let period = 2.0 * PI / cfg.upsilon;
            let a = map_state(&State { phi, omega: 0.0 }, &cfg);
            let b = map_state(&State { phi: phi + period, omega: 0.0 }, &cfg);
            prop_assert!((a.phi_m - b.phi_m).abs() < 1e-9);
        }
    }

    #[test]
    fn rhs_hand_values() {
        let p = table_params();
        let (phi_dot, omega_dot) =
            dynamics_rhs(&State { phi: 0.0, omega: 0.0 }, 0.0, 10.0, &p);
        assert_eq!(phi_dot, 0.0);
        assert_relative_eq!(omega_dot, -1.25e5, max_relative = 1e-12);

        let (_, omega_dot) = dynamics_rhs(&State { phi: 0.0, omega: 0.0 }, 0.0, 0.0, &p);
        assert_eq!(omega_dot, 0.0);

        let (_, omega_dot) = dynamics_rhs(&State { phi: 0.0, omega: 1.0 }, 0.0, 0.0, &p);
        assert_relative_eq!(omega_dot, -1250.0, max_relative = 1e-12);
    }

    #[test]
    fn true_torque_hand_values() {
        assert_relative_eq!(
            true_torque(&MappedInput { phi_m: 0.0, omega_m: 0.0 }),
            10.0
        );
        assert_relative_eq!(
            true_torque(&MappedInput { phi_m: PI / 2.0, omega_m: 0.0 }),
            12.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            true_torque(&MappedInput { phi_m: 0.0, omega_m: 1.0 }),
            10.0002,
            max_relative = 1e-12
        );
    }

    fn trapezoid_reference() -> ReferenceConfig {
        ReferenceConfig {
            alpha: 50.0 * PI / 3.0,
            t_acc: 1.0,
        }
    }

    #[test]
    fn reference_hand_values() {
        let cfg = trapezoid_reference();
        let r0 = reference(0.0, &cfg);
        assert_eq!((r0.phi_d, r0.omega_d, r0.accel_d), (0.0, 0.0, cfg.alpha));

        let r1 = reference(1.0, &cfg);
        assert_relative_eq!(r1.phi_d, 25.0 * PI / 3.0, max_relative = 1e-12);
        assert_relative_eq!(r1.omega_d, 50.0 * PI / 3.0, max_relative = 1e-12);
        // Peak velocity equals 500 rpm.
        assert_relative_eq!(r1.omega_d, 500.0 * 2.0 * PI / 60.0, max_relative = 1e-12);
        assert_eq!(r1.accel_d, cfg.alpha);

        let r2 = reference(2.0, &cfg);
        assert_relative_eq!(r2.phi_d, 25.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(r2.omega_d, 50.0 * PI / 3.0, max_relative = 1e-12);
        assert_eq!(r2.accel_d, 0.0);
    }

    #[test]
    fn reference_continuous_at_t_acc() {
        let cfg = trapezoid_reference();
        let eps = 1e-9;
        let left = reference(cfg.t_acc - eps, &cfg);
        let right = reference(cfg.t_acc + eps, &cfg);
        assert_abs_diff_eq!(left.phi_d, right.phi_d, epsilon = 1e-6);
        assert_abs_diff_eq!(left.omega_d, right.omega_d, epsilon = 1e-6);
        // Exact limits agree.
        let at = reference(cfg.t_acc, &cfg);
        let lim = ReferencePoint {
            phi_d: cfg.alpha * cfg.t_acc * cfg.t_acc - 0.5 * cfg.alpha * cfg.t_acc * cfg.t_acc,
            omega_d: cfg.alpha * cfg.t_acc,
            accel_d: 0.0,
        };
        assert_abs_diff_eq!(at.phi_d, lim.phi_d, epsilon = 1e-12);
        assert_abs_diff_eq!(at.omega_d, lim.omega_d, epsilon = 1e-12);
    }

    #[test]
    fn reference_derivatives_by_finite_differences() {
        let cfg = trapezoid_reference();
        let h = 1e-6;
        for &t in &[0.3, 0.7, 1.5, 4.0] {
            let r = reference(t, &cfg);
            let fwd = reference(t + h, &cfg);
            let bwd = reference(t - h, &cfg);
            assert_relative_eq!((fwd.phi_d - bwd.phi_d) / (2.0 * h), r.omega_d, epsilon = 1e-5);
            assert_abs_diff_eq!(
                (fwd.omega_d - bwd.omega_d) / (2.0 * h),
                r.accel_d,
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn rk4_fixed_point() {
        let p = table_params();
        // i_q chosen so 1.5*p*psi*i_q = T at omega = 0.
        let torque = 10.0;
        let i_q = torque / p.torque_constant();
        let s0 = State { phi: 0.0, omega: 0.0 };
        let s1 = rk4_step(&s0, 1e-3, i_q, &p, |_| torque);
        assert_abs_diff_eq!(s1.phi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s1.omega, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rk4_exact_on_constant_derivative() {
        // B = 0, constant torque and current: omega advances linearly and
        // RK4 integrates the constant derivative exactly.
        let p = MotorParams { damping: 0.0, ..table_params() };
        let torque = 4.0;
        let i_q = 10.0;
        let dt = 1e-4;
        let s0 = State { phi: 0.0, omega: 0.0 };
        let s1 = rk4_step(&s0, dt, i_q, &p, |_| torque);
        let omega_dot = (p.torque_constant() * i_q - torque) / p.inertia;
        assert_relative_eq!(s1.omega, omega_dot * dt, max_relative = 1e-12);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // Smooth open-loop scenario: constant current near torque balance,
        // torque re-evaluated from the mapped state.
        let p = table_params();
        let cfg = mapping();
        let i_q = 170.0;
        let torque = |s: &State| true_torque(&map_state(s, &cfg));
        let run = |dt: f64| {
            let mut s = State { phi: 0.0, omega: 50.0 };
            let n = (0.1 / dt).round() as usize;
            for _ in 0..n {
                s = rk4_step(&s, dt, i_q, &p, torque);
            }
            s
        };
        let reference = run(1e-7);
        let err = |dt: f64| {
            let s = run(dt);
            ((s.phi - reference.phi).powi(2) + (s.omega - reference.omega).powi(2)).sqrt()
        };
        let dts = [2e-4, 1e-4, 5e-5];
        let errs: Vec<f64> = dts.iter().map(|&dt| err(dt)).collect();
        // log-log slope over successive halvings must be 4 +/- 0.3,
        // i.e. halving dt reduces the error by ~16x.
        for i in 0..errs.len() - 1 {
            let slope = (errs[i] / errs[i + 1]).log2();
            assert!(
                (slope - 4.0).abs() < 0.3,
                "observed order {slope} between dt={} and dt={}",
                dts[i],
                dts[i + 1]
            );
        }
    }
}
