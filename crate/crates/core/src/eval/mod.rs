//! Experiment grid, significance testing and reporting.

mod grid;
mod mcnemar;
mod report;

pub use grid::{
    run_experiment_grid, summarize, GridData, GridResults, GridSettings, Method, PlanSettings,
    RunResult, SummaryRow,
};
pub use mcnemar::{
    exact_binomial_p, from_counts, improvement_percent, mcnemar_test, mcnemar_test_at,
    McNemarResult, DEFAULT_SIGNIFICANCE,
};
pub use report::{emit_report, parse_summary_csv, summary_csv, ReportFormat};
