//! Learning-based tracking control of a surface-mounted PMSM.
//!
//! The crate provides the plant model and reference trajectory, exact GP
//! regression with uniform error bounds, the data-generation pipeline,
//! the model-based tracking controller with Lyapunov certification, the
//! expert-fusion strategies and the closed-loop simulator.

pub mod aggregation;
pub mod config;
pub mod control;
pub mod datagen;
pub mod dynamics;
pub mod error;
pub mod experts;
pub mod gp;
pub mod sim;

pub use aggregation::{
    aggregate_mean, coaoe_eta_weights, coaoe_mean_weights, gpoe_aggregate, moe_weights,
    ultimate_bound, vdot_value, ExpertOutputs, Weights,
};
pub use config::{BoundConfig, ScenarioConfig, SimConfig, Strategy};
pub use control::{
    build_a, control_law, solve_lyapunov, tracking_error, ClosedLoopMatrices, Gains,
    TrackingError,
};
pub use datagen::{RegionSpec, SensorConfig};
pub use dynamics::{
    map_state, reference, true_torque, MappedInput, MappingConfig, MotorParams, ReferenceConfig,
    ReferencePoint, State, INPUT_DOMAIN,
};
pub use error::{Error, Result};
pub use experts::{generate_region_datasets, ExpertBank};
pub use gp::{BoundParams, Dataset, GPModel, SEKernel};
pub use sim::{
    compare, compute_metrics, fit_bank, lyapunov_trace, run_closed_loop, LogRow, Metrics,
    StrategyOutcome, TrajectoryLog,
};
