//! Model-based tracking controller, error dynamics and the Lyapunov
//! certification producing P.
//!
//! With gains making `A = [[0, 1], [lambda1, lambda2]]` Hurwitz and a
//! perfect torque prediction, the controller cancels the plant
//! nonlinearity exactly and the tracking error obeys `e_dot = A e`. The
//! positive definite solution P of `A^T P + P A + Q = 0` certifies the
//! decay and drives the control-aware aggregation.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorParams, ReferencePoint, State};
use crate::error::{Error, Result};

/// Feedback gains of the tracking controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Build the error-dynamics matrix `A = [[0, 1], [lambda1, lambda2]]`,
/// rejecting gains for which it is not Hurwitz.
///
/// For this companion form the Hurwitz property is equivalent to
/// `trace(A) < 0` and `det(A) > 0`, i.e. both gains negative.
pub fn build_a(gains: &Gains) -> Result<Matrix2<f64>> {
    let trace = gains.lambda2;
    let det = -gains.lambda1;
    if !(trace < 0.0 && det > 0.0 && trace.is_finite() && det.is_finite()) {
        return Err(Error::NonHurwitzGains {
            lambda1: gains.lambda1,
            lambda2: gains.lambda2,
        });
    }
    Ok(Matrix2::new(0.0, 1.0, gains.lambda1, gains.lambda2))
}

/// Solve the continuous Lyapunov equation `A^T P + P A + Q = 0` for the
/// 2x2 companion-form A.
///
/// The symmetric unknowns (p11, p12, p22) satisfy a linear system that is
/// solved in closed form; the residual and positive definiteness of P are
/// verified before returning.
pub fn solve_lyapunov(a: &Matrix2<f64>, q: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if (q - q.transpose()).norm() > 1e-12 {
        return Err(Error::LyapunovRejected("Q must be symmetric".into()));
    }
    if !(q[(0, 0)] > 0.0 && q.determinant() > 0.0) {
        return Err(Error::LyapunovRejected("Q must be positive definite".into()));
    }
    let l1 = a[(1, 0)];
    let l2 = a[(1, 1)];
    if !(l1 < 0.0 && l2 < 0.0) {
        return Err(Error::LyapunovRejected("A is not Hurwitz".into()));
    }
    // Entrywise equations of A^T P + P A + Q = 0:
    //   (1,1): 2 l1 p12 + q11 = 0
    //   (1,2): p11 + l2 p12 + l1 p22 + q12 = 0
    //   (2,2): 2 p12 + 2 l2 p22 + q22 = 0
    let p12 = -q[(0, 0)] / (2.0 * l1);
    let p22 = -(2.0 * p12 + q[(1, 1)]) / (2.0 * l2);
    let p11 = -l2 * p12 - l1 * p22 - q[(0, 1)];
    let p = Matrix2::new(p11, p12, p12, p22);

    let residual = (a.transpose() * p + p * a + q).norm();
    if residual > 1e-10 {
        return Err(Error::LyapunovRejected(format!(
            "residual {residual:.3e} exceeds 1e-10"
        )));
    }
    // leading principal minors
    if !(p[(0, 0)] > 0.0 && p.determinant() > 0.0) {
        return Err(Error::LyapunovRejected("P is not positive definite".into()));
    }
    Ok(p)
}

/// Error matrix A, input vector b, scaled input B = b/J and Lyapunov pair
/// (Q, P) for one gain/weighting choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopMatrices {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    /// `J^-1 b`, the disturbance input map of the error dynamics.
    pub b_in: Vector2<f64>,
    pub q: Matrix2<f64>,
    pub p: Matrix2<f64>,
}

impl ClosedLoopMatrices {
    pub fn new(gains: &Gains, q: Matrix2<f64>, params: &MotorParams) -> Result<Self> {
        let a = build_a(gains)?;
        let p = solve_lyapunov(&a, &q)?;
        let b = Vector2::new(0.0, 1.0);
        Ok(ClosedLoopMatrices {
            a,
            b,
            b_in: b / params.inertia,
            q,
            p,
        })
    }

    /// Lyapunov function value `V = e^T P e`.
    pub fn lyapunov_value(&self, e: &Vector2<f64>) -> f64 {
        (e.transpose() * self.p * e)[(0, 0)]
    }
}

/// Concatenated tracking error `e = [phi - phi_d, omega - omega_d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError(pub Vector2<f64>);

pub fn tracking_error(state: &State, reference: &ReferencePoint) -> TrackingError {
    TrackingError(Vector2::new(
        state.phi - reference.phi_d,
        state.omega - reference.omega_d,
    ))
}

/// Model-based tracking control law:
/// `I_q = 2/(3 p psi) (T_hat + J lambda1 e1 + J lambda2 e2 + B omega + J accel_d)`.
pub fn control_law(
    state: &State,
    reference: &ReferencePoint,
    t_hat: f64,
    params: &MotorParams,
    gains: &Gains,
) -> f64 {
    let e1 = state.phi - reference.phi_d;
    let e2 = state.omega - reference.omega_d;
    let j = params.inertia;
    2.0 / (3.0 * params.pole_pairs as f64 * params.flux_linkage)
        * (t_hat
            + j * gains.lambda1 * e1
            + j * gains.lambda2 * e2
            + params.damping * state.omega
            + j * reference.accel_d)
}
