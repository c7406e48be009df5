//! Named validation experiments. Each one drives the simulator against a
//! closed form from [`crate::rate`] or [`crate::mgf`] and produces an
//! [`ExperimentReport`] with one verdict row per comparison, serializable to
//! JSON and CSV with a shared layout.

mod ergodic;
mod laplace;
mod ldp;
mod logmgf;
mod rate_curve;
mod report;

pub use ergodic::ergodic_limits;
pub use laplace::laplace_consistency;
pub use ldp::ldp_tail_decay;
pub use logmgf::log_mgf_limit;
pub use rate_curve::{rate_curve_export, AlphaRow, RateCurves, XRow};
pub use report::{ExperimentReport, ReportRow, VERSION};
