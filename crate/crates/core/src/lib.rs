//! Safety-assurance toolkit for AI-based perception features.
//!
//! - [`risk_model`]: ASIL determination and the SOTIF residual-risk gate.
//! - [`cause_tree`]: cause tree analysis, minimal cut sets and validation
//!   target allocation.
//! - [`requirements`]: derived safety requirements and traceability closure.
//! - [`odd_monitor`]: deterministic runtime monitor over sensor frames.
//! - [`scenario_sim`]: seeded scenario generation, replay, metrics and
//!   statistical residual-risk verdicts.
//!
//! The numeric parts are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix them to `f64`.

pub mod cause_tree;
pub mod fixtures;
pub mod odd_monitor;
pub mod requirements;
pub mod risk_model;
pub mod scalar;
pub mod scenario_sim;
pub mod stats;

pub use scalar::Scalar;

pub type CauseTree = cause_tree::CauseTree<f64>;
pub type CtaNode = cause_tree::CtaNode<f64>;
pub type ValidationTarget = cause_tree::ValidationTarget<f64>;
pub type MonitorConfig = odd_monitor::MonitorConfig<f64>;
pub type MonitorState = odd_monitor::MonitorState<f64>;
pub type MonitorOutput = odd_monitor::MonitorOutput<f64>;
pub type SensorFrame = odd_monitor::SensorFrame<f64>;
pub type OddMonitor = odd_monitor::OddMonitor<f64>;
