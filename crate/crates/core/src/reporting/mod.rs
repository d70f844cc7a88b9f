//! Outputs: the annotated directly-follows graph, report JSON with its CSV
//! projections, and the pattern-coverage audit.

pub mod audit;
pub mod dfg;
pub mod report;

pub use audit::{
    literature_matrix, load_literature_matrix, pattern_audit, CapabilityMatrix, CapabilityRow, SupportLevel,
};
pub use dfg::{annotate_dfg, build_dfg, emit_dot, AnnotatedDfg};
pub use report::{build_report, Report};
