//! Closed-loop scenario runner, Lyapunov diagnostics, metrics and the
//! strategy-comparison harness.
//!
//! One run: from `x0 = [0, 0]` the controller is updated at every control
//! tick (expert queries, fusion, control law) and the plant is integrated
//! with fixed-step RK4 between ticks, the current held constant
//! (zero-order hold). Every control tick appends one log row.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::aggregation::{
    aggregate_mean, coaoe_eta_weights, coaoe_mean_weights, gpoe_aggregate, moe_weights,
    vdot_value,
};
use crate::config::{ScenarioConfig, Strategy};
use crate::control::{control_law, tracking_error, ClosedLoopMatrices};
use crate::dynamics::{map_state, reference, rk4_step, rk4_step_with, true_torque, State};
use crate::error::{Error, Result};
use crate::experts::ExpertBank;

/// One logged control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub phi: f64,
    pub omega: f64,
    pub phi_d: f64,
    pub omega_d: f64,
    pub e1: f64,
    pub e2: f64,
    pub t_true: f64,
    pub t_hat: f64,
    pub i_q: f64,
    pub weights: Vec<f64>,
    pub v: f64,
    /// Transported error bound `sum_i w_i eta_i(x_m)`, kept out of the CSV;
    /// only present for strategies that already query the bounds.
    pub eta_transport: Option<f64>,
}

impl LogRow {
    pub fn e_norm(&self) -> f64 {
        (self.e1 * self.e1 + self.e2 * self.e2).sqrt()
    }
}

/// Time-indexed record of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub strategy: Strategy,
    pub dt_ctrl: f64,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    /// CSV with the fixed column schema
    /// `t,phi,omega,phi_d,omega_d,e1,e2,e_norm,T_true,T_hat,i_q,w1,...,wN,V`.
    pub fn to_csv(&self) -> String {
        let n_experts = self.rows.first().map_or(0, |r| r.weights.len());
        let mut out = String::new();
        out.push_str("t,phi,omega,phi_d,omega_d,e1,e2,e_norm,T_true,T_hat,i_q");
        for i in 1..=n_experts {
            let _ = write!(out, ",w{i}");
        }
        out.push_str(",V\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.phi,
                r.omega,
                r.phi_d,
                r.omega_d,
                r.e1,
                r.e2,
                r.e_norm(),
                r.t_true,
                r.t_hat,
                r.i_q
            );
            for w in &r.weights {
                let _ = write!(out, ",{w}");
            }
            let _ = writeln!(out, ",{}", r.v);
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Run the closed-loop scenario with the configured strategy.
pub fn run_closed_loop(
    cfg: &ScenarioConfig,
    bank: &ExpertBank,
    strategy: Strategy,
) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let matrices = ClosedLoopMatrices::new(&cfg.gains, cfg.q_matrix(), &cfg.motor)?;
    let n_ticks = (cfg.sim.t_end / cfg.sim.dt_ctrl).round() as usize;
    let substeps = cfg.substeps();
    let n_experts = bank.len();

    let mut state = State { phi: 0.0, omega: 0.0 };
    let mut rows = Vec::with_capacity(n_ticks + 1);

    for k in 0..=n_ticks {
        let t = k as f64 * cfg.sim.dt_ctrl;
        let r = reference(t, &cfg.reference);
        let e = tracking_error(&state, &r).0;
        let xm = map_state(&state, &cfg.mapping);
        let t_true = true_torque(&xm);

        let (weights, t_hat, eta_transport) = match strategy {
            Strategy::None => (moe_weights(n_experts), 0.0, None),
            Strategy::Moe => {
                let out = bank.means(&xm);
                let w = moe_weights(n_experts);
                let t_hat = aggregate_mean(&out, &w)?;
                (w, t_hat, None)
            }
            Strategy::Gpoe => {
                let out = bank.means_and_variances(&xm);
                let w = moe_weights(n_experts);
                let (mu, _var) = gpoe_aggregate(&out, &w)?;
                (w, mu, None)
            }
            Strategy::CoaoeMean => {
                let out = bank.means(&xm);
                let w = coaoe_mean_weights(&out, &matrices.p, &matrices.b, &e);
                let t_hat = aggregate_mean(&out, &w)?;
                (w, t_hat, None)
            }
            Strategy::CoaoeEta => {
                let out = bank.full_outputs(&xm);
                let w = coaoe_eta_weights(&out)?;
                let t_hat = aggregate_mean(&out, &w)?;
                let etas = out.etas.as_ref().expect("etas present");
                let transported: f64 =
                    etas.iter().zip(w.as_slice()).map(|(eta, wi)| eta * wi).sum();
                (w, t_hat, Some(transported))
            }
            Strategy::Perfect => (moe_weights(n_experts), t_true, None),
        };

        let i_q = control_law(&state, &r, t_hat, &cfg.motor, &cfg.gains);
        rows.push(LogRow {
            t,
            phi: state.phi,
            omega: state.omega,
            phi_d: r.phi_d,
            omega_d: r.omega_d,
            e1: e[0],
            e2: e[1],
            t_true,
            t_hat,
            i_q,
            weights: weights.as_slice().to_vec(),
            v: matrices.lyapunov_value(&e),
            eta_transport,
        });

        if k == n_ticks {
            break;
        }
        for j in 0..substeps {
            let t_sub = t + j as f64 * cfg.sim.dt_sim;
            state = if strategy == Strategy::Perfect {
                // continuous controller: current and true-torque prediction
                // re-evaluated at every RK4 stage
                rk4_step_with(&state, t_sub, cfg.sim.dt_sim, |tt, s| {
                    let rr = reference(tt, &cfg.reference);
                    let torque = true_torque(&map_state(s, &cfg.mapping));
                    let iq = control_law(s, &rr, torque, &cfg.motor, &cfg.gains);
                    crate::dynamics::dynamics_rhs(s, iq, torque, &cfg.motor)
                })
            } else {
                rk4_step(&state, cfg.sim.dt_sim, i_q, &cfg.motor, |s| {
                    true_torque(&map_state(s, &cfg.mapping))
                })
            };
        }
        if !state.is_finite() {
            return Err(Error::NumericalBlowUp { t: t + cfg.sim.dt_ctrl });
        }
    }

    Ok(TrajectoryLog { strategy, dt_ctrl: cfg.sim.dt_ctrl, rows })
}

/// One Lyapunov diagnostic sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub t: f64,
    pub v: f64,
    /// Central-difference estimate of V_dot; absent at the endpoints.
    pub vdot_central: Option<f64>,
    /// Analytic `-e^T Q e + 2 e^T P B_in (T - T_hat)`.
    pub vdot_analytic: f64,
}

/// Lyapunov value and derivative estimates along a logged trajectory.
pub fn lyapunov_trace(log: &TrajectoryLog, matrices: &ClosedLoopMatrices) -> Vec<LyapunovSample> {
    let n = log.rows.len();
    (0..n)
        .map(|k| {
            let r = &log.rows[k];
            let e = Vector2::new(r.e1, r.e2);
            let v = matrices.lyapunov_value(&e);
            let vdot_central = if k > 0 && k + 1 < n {
                let prev = &log.rows[k - 1];
                let next = &log.rows[k + 1];
                let vp = matrices
                    .lyapunov_value(&Vector2::new(prev.e1, prev.e2));
                let vn = matrices
                    .lyapunov_value(&Vector2::new(next.e1, next.e2));
                Some((vn - vp) / (2.0 * log.dt_ctrl))
            } else {
                None
            };
            let vdot_analytic = vdot_value(
                &e,
                &matrices.p,
                &matrices.q,
                &matrices.b_in,
                r.t_true,
                r.t_hat,
            );
            LyapunovSample { t: r.t, v, vdot_central, vdot_analytic }
        })
        .collect()
}

/// Summary statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Root-mean-square of ||e|| over the whole run.
    pub rmse_e: f64,
    /// Maximum ||e|| over the whole run.
    pub max_e: f64,
    /// Mean ||e|| over the trailing window.
    pub steady_e: f64,
    /// Rows where |T - T_hat| exceeded the transported error bound,
    /// among rows where the bound was recorded.
    pub bound_violations: usize,
}

/// Compute metrics; `window_fraction` is the trailing share of rows used
/// for the steady-state average (0.2 matches "final 20%").
pub fn compute_metrics(log: &TrajectoryLog, window_fraction: f64) -> Metrics {
    let n = log.rows.len();
    assert!(n > 0, "log must be nonempty");
    let norms: Vec<f64> = log.rows.iter().map(LogRow::e_norm).collect();
    let rmse_e = (norms.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let max_e = norms.iter().cloned().fold(0.0f64, f64::max);
    let start = ((1.0 - window_fraction.clamp(0.0, 1.0)) * n as f64).floor() as usize;
    let start = start.min(n - 1);
    let tail = &norms[start..];
    let steady_e = tail.iter().sum::<f64>() / tail.len() as f64;
    let bound_violations = log
        .rows
        .iter()
        .filter(|r| {
            r.eta_transport
                .map(|bound| (r.t_true - r.t_hat).abs() > bound)
                .unwrap_or(false)
        })
        .count();
    Metrics { rmse_e, max_e, steady_e, bound_violations }
}

/// Result of one strategy within a comparison batch.
#[derive(Debug)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub outcome: Result<(TrajectoryLog, Metrics)>,
}

/// Run several strategies on the identical plant, reference and fitted
/// experts. Per-strategy failures are reported without aborting the batch.
pub fn compare(
    cfg: &ScenarioConfig,
    bank: &ExpertBank,
    strategies: &[Strategy],
) -> Vec<StrategyOutcome> {
    strategies
        .par_iter()
        .map(|&strategy| {
            let outcome = run_closed_loop(cfg, bank, strategy)
                .map(|log| {
                    let metrics = compute_metrics(&log, 0.2);
                    (log, metrics)
                });
            StrategyOutcome { strategy, outcome }
        })
        .collect()
}

/// Fit the scenario's expert bank from its region specs and seed.
pub fn fit_bank(cfg: &ScenarioConfig) -> Result<ExpertBank> {
    ExpertBank::from_regions(
        &cfg.experts,
        cfg.kernel,
        cfg.bound.delta,
        cfg.bound.tau,
        cfg.bound.l_f,
        cfg.sim.seed,
    )
}
