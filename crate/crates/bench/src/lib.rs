//! Evaluation matrix over scenes × methods × color spaces × thermal, with
//! runtime measurement and table-shaped reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plan;
pub mod report;
pub mod runner;
pub mod timing;

pub use plan::{cell_seed, Cell, InputKind, RunPlan, ThermalAxis, TimingProtocol};
pub use report::{emit_report, group_means, read_json_report, EvalRecord, GroupMean, Report, ReportFormat};
pub use runner::{run_matrix, CellFailure, MatrixResult};
pub use timing::{time_median, time_scoring};
