//! Sustainability analysis of business processes recorded in object-centric
//! event logs.
//!
//! The pipeline follows the life-cycle assessment phases: flows attached to
//! process components form an [inventory](inventory), characterization
//! factors turn it into [impacts](impact), impacts are kept apart per
//! [scope](scoping), and shared burdens are [allocated](allocation) to the
//! components that caused them. [`reporting`] renders the results as a
//! directly-follows graph, CSV/JSON reports and a pattern-coverage matrix.
//!
//! Flow quantities are exact rationals until characterization; impact math is
//! generic over [`Scalar`] with `f64` aliases exported below.

pub mod allocation;
pub mod annotation;
pub mod error;
pub mod fixtures;
pub mod generator;
pub mod impact;
pub mod inventory;
pub mod model;
pub mod ocel;
pub mod pipeline;
pub mod reporting;
pub mod scalar;
pub mod scoping;
pub mod unitreg;

pub use error::{Error, Result};
pub use model::{resolve_component, validate_log, ComponentKind, ComponentRef, EventLog};
pub use ocel::Mode;
pub use pipeline::{assess, assess_documents, Assessment, PipelineConfig};
pub use scalar::{Amount, Exact, Scalar};
pub use unitreg::{Quantity, UnitRegistry};

/// Inventory in exact decimal arithmetic.
pub type ExactInventory = inventory::Inventory<Exact>;
pub type ImpactVector64 = impact::ImpactVector<f64>;
pub type ImpactVector32 = impact::ImpactVector<f32>;
pub type ScopedImpactVector64 = scoping::ScopedImpactVector<f64>;
pub type ScopedImpactVector32 = scoping::ScopedImpactVector<f32>;
pub type ScopedImpactMap64 = scoping::ScopedImpactMap<f64>;
pub type AllocationLedger64 = allocation::AllocationLedger<f64>;
pub type Assessment64 = pipeline::Assessment<f64>;
pub type Assessment32 = pipeline::Assessment<f32>;
