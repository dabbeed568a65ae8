//! Closed-form model and trace-derived metrics.

pub mod experiments;
mod metrics;
mod model;

pub use model::{
    c_d, delay_bound, effective_rate, efficiency, rate_for_efficiency, scaling_curve, ModelError, ModelParams,
    ScalingPoint,
};
pub use metrics::{measure, ChainMetrics, LatencySummary, RunMetrics, SettlementStats};
