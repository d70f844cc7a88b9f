//! End-to-end assessment: inventory, characterization, scoping, allocation
//! and optional functional-unit normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::allocation::{apply_allocations, AllocationLedger};
use crate::annotation::{bind_annotations, parse_annotations_with, AnnotatedLog, CategoryInfo, ScopeSet};
use crate::error::Error;
use crate::inventory::{own_inventory, rollup_inventory, rollup_target, FunctionalUnit, Inventory, RollupLevel};
use crate::model::ComponentKind;
use crate::ocel::{log_summary, parse_ocel, LogSummary, Mode};
use crate::scalar::{Exact, Scalar};
use crate::scoping::{characterize_scoped, total_of, ScopedImpactMap, ScopedImpactVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Annotation,
    Inventory,
    Characterization,
    Allocation,
    FunctionalUnit,
    Reporting,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Annotation => "annotation",
            Stage::Inventory => "inventory",
            Stage::Characterization => "characterization",
            Stage::Allocation => "allocation",
            Stage::FunctionalUnit => "functional unit",
            Stage::Reporting => "reporting",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub scopes: Option<ScopeSet>,
    pub functional_unit: Option<FunctionalUnit>,
}

/// Quantities divided down to one functional unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerFunctionalUnit<S = f64> {
    pub unit: FunctionalUnit,
    pub measured_output: Exact,
    /// `reference / measured_output`.
    pub factor: Exact,
    pub inventory: Inventory<Exact>,
    pub process_total: ScopedImpactVector<S>,
    pub activity_totals: BTreeMap<String, ScopedImpactVector<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assessment<S = f64> {
    pub digest: String,
    pub mode: Mode,
    pub scope_set: ScopeSet,
    pub categories: BTreeMap<String, CategoryInfo>,
    pub summary: LogSummary,
    /// Flows on the component they were assigned to.
    pub inventory: Inventory<Exact>,
    pub process_inventory: Inventory<Exact>,
    /// Scoped impacts per component before allocation.
    pub impacts: ScopedImpactMap<S>,
    pub allocated: ScopedImpactMap<S>,
    pub ledger: AllocationLedger<S>,
    pub process_total: ScopedImpactVector<S>,
    /// Post-allocation impacts per activity type (instances rolled up).
    pub activity_totals: BTreeMap<String, ScopedImpactVector<S>>,
    /// Post-allocation impacts left on objects and the process itself.
    pub non_activity: ScopedImpactVector<S>,
    pub per_functional_unit: Option<PerFunctionalUnit<S>>,
    pub uncharacterized: BTreeSet<(String, String)>,
    pub warnings: Vec<String>,
}

fn split_by_activity<S: Scalar>(
    al: &AnnotatedLog,
    impacts: &ScopedImpactMap<S>,
) -> (BTreeMap<String, ScopedImpactVector<S>>, ScopedImpactVector<S>) {
    let mut activities: BTreeMap<String, ScopedImpactVector<S>> = BTreeMap::new();
    let mut rest = ScopedImpactVector::new();
    for (component, v) in impacts {
        let activity = match component.kind {
            ComponentKind::ActivityType | ComponentKind::ActivityInstance => {
                rollup_target(component, RollupLevel::ActivityType, al.log())
            }
            _ => None,
        };
        match activity {
            Some(a) => activities.entry(a.id_str().to_owned()).or_default().merge(v),
            None => rest.merge(v),
        }
    }
    (activities, rest)
}

/// Run every analysis stage on a bound log.
pub fn assess<S: Scalar>(al: &AnnotatedLog, config: &PipelineConfig) -> Result<Assessment<S>, StageError> {
    let mode = config.mode;
    let inventory = own_inventory::<Exact>(al);
    let process_inventory = rollup_inventory::<Exact>(al, RollupLevel::Process);

    let characterized =
        characterize_scoped::<Exact, S>(&inventory, al.table(), al.registry(), mode).at(Stage::Characterization)?;
    let allocated = apply_allocations(al, &characterized.impacts, al.rules(), mode).at(Stage::Allocation)?;

    let process_total = total_of(&allocated.impacts);
    let (activity_totals, non_activity) = split_by_activity(al, &allocated.impacts);

    let per_functional_unit = match &config.functional_unit {
        None => None,
        Some(fu) => {
            let measured_output = fu.measured_output(al.log()).at(Stage::FunctionalUnit)?;
            let factor = fu.scale_factor(al.log()).at(Stage::FunctionalUnit)?;
            let s = S::from_exact(&factor);
            Some(PerFunctionalUnit {
                unit: fu.clone(),
                measured_output,
                inventory: process_inventory.scaled(&factor),
                process_total: process_total.scaled(s),
                activity_totals: activity_totals.iter().map(|(a, v)| (a.clone(), v.scaled(s))).collect(),
                factor,
            })
        }
    };

    let mut warnings = allocated.ledger.warnings.clone();
    warnings.extend(
        characterized
            .uncharacterized
            .iter()
            .map(|(flow, unit)| format!("flow {flow:?} in {unit:?} matched no impact category")),
    );

    Ok(Assessment {
        digest: al.digest().to_owned(),
        mode,
        scope_set: al.scope_set().clone(),
        categories: al.table().categories().clone(),
        summary: log_summary(al.log()),
        inventory,
        process_inventory,
        impacts: characterized.impacts,
        allocated: allocated.impacts,
        ledger: allocated.ledger,
        process_total,
        activity_totals,
        non_activity,
        per_functional_unit,
        uncharacterized: characterized.uncharacterized,
        warnings,
    })
}

/// Parse, validate and bind raw documents, then assess.
///
/// Lenient-mode log violations are prepended to the assessment warnings.
pub fn assess_documents<S: Scalar>(
    log: &[u8],
    annotations: &[u8],
    config: &PipelineConfig,
) -> Result<(AnnotatedLog, Assessment<S>), StageError> {
    let ingested = parse_ocel(log, config.mode).at(Stage::Ingest)?;
    let bundle = parse_annotations_with(annotations, config.scopes.as_ref()).at(Stage::Annotation)?;
    let al = bind_annotations(&ingested.log, &bundle).at(Stage::Annotation)?;
    let mut assessment = assess::<S>(&al, config)?;
    let mut warnings: Vec<String> = ingested.warnings.iter().map(ToString::to_string).collect();
    warnings.append(&mut assessment.warnings);
    assessment.warnings = warnings;
    Ok((al, assessment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rel_close;

    const LOG: &str = r#"{
        "objectTypes": [{"name": "machine"}, {"name": "product"}],
        "eventTypes": [{"name": "produce"}, {"name": "use"}],
        "objects": [{"id": "m1", "type": "machine"}, {"id": "p1", "type": "product"}, {"id": "p2", "type": "product"}],
        "events": [
            {"id": "e1", "type": "produce", "time": "2024-01-01T08:00:00Z", "relationships": [{"objectId": "p1"}]},
            {"id": "e2", "type": "use", "time": "2024-01-01T09:00:00Z", "relationships": [{"objectId": "m1"}, {"objectId": "p2"}]},
            {"id": "e3", "type": "use", "time": "2024-01-01T10:00:00Z", "relationships": [{"objectId": "m1"}]}
        ]
    }"#;

    const BUNDLE: &str = r#"{"schema": "susmine/1",
        "categories": [{"name": "climate_change", "impact_unit": "kg CO2e", "class": "climate"}],
        "factors": [{"flow": "CO2", "unit": "kg", "category": "climate_change", "factor": "1"}],
        "assignments": [
            {"component": {"kind": "activity_instance", "id": "e1"}, "flow": "CO2", "direction": "output", "amount": "5", "unit": "kg", "scope": "scope1"},
            {"component": {"kind": "object_instance", "id": "m1"}, "flow": "CO2", "direction": "output", "amount": "30", "unit": "kg", "scope": "scope3"}
        ],
        "allocations": [{"source": {"kind": "object_instance", "id": "m1"}, "targets": "related_events", "fraction": "0.5"}]}"#;

    fn run(config: &PipelineConfig) -> Assessment {
        assess_documents::<f64>(LOG.as_bytes(), BUNDLE.as_bytes(), config).unwrap().1
    }

    #[test]
    fn totals_split_into_activities_and_rest() {
        let a = run(&PipelineConfig::default());
        assert_eq!(a.process_total.get("climate_change", "scope1"), Some(5.0));
        assert_eq!(a.process_total.get("climate_change", "scope3"), Some(30.0));
        assert_eq!(a.activity_totals["produce"].get("climate_change", "scope1"), Some(5.0));
        assert_eq!(a.activity_totals["use"].get("climate_change", "scope3"), Some(15.0));
        assert_eq!(a.non_activity.get("climate_change", "scope3"), Some(15.0));
        assert_eq!(a.ledger.entries.len(), 2);
    }

    #[test]
    fn functional_unit_divides_by_output() {
        let fu = FunctionalUnit::parse("product:1").unwrap();
        let a = run(&PipelineConfig { functional_unit: Some(fu), ..Default::default() });
        let per = a.per_functional_unit.unwrap();
        assert_eq!(per.measured_output, Exact::from_integer(2.into()));
        let scope3 = per.process_total.get("climate_change", "scope3").unwrap();
        assert!(rel_close(scope3, 15.0, 1e-15));
    }

    #[test]
    fn failures_name_their_stage() {
        let fu = FunctionalUnit::parse("machine:1:mass_kg").unwrap();
        let err = assess_documents::<f64>(
            LOG.as_bytes(),
            BUNDLE.as_bytes(),
            &PipelineConfig { functional_unit: Some(fu), ..Default::default() },
        )
        .unwrap_err();
        assert_eq!(err.stage, Stage::FunctionalUnit);

        let missing_factor =
            BUNDLE.replace(r#""flow": "CO2", "unit": "kg", "category""#, r#""flow": "CH4", "unit": "kg", "category""#);
        let err =
            assess_documents::<f64>(LOG.as_bytes(), missing_factor.as_bytes(), &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Characterization);
        assert!(err.to_string().contains("CO2"), "{err}");

        let err = assess_documents::<f64>(b"{", BUNDLE.as_bytes(), &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        assert!(err.error.is_environmental());
    }

    #[test]
    fn lenient_mode_reports_uncharacterized_flows() {
        let missing_factor =
            BUNDLE.replace(r#""flow": "CO2", "unit": "kg", "category""#, r#""flow": "CH4", "unit": "kg", "category""#);
        let config = PipelineConfig { mode: Mode::Lenient, ..Default::default() };
        let (_, a) = assess_documents::<f64>(LOG.as_bytes(), missing_factor.as_bytes(), &config).unwrap();
        assert!(a.process_total.is_empty());
        assert!(a.warnings.iter().any(|w| w.contains("CO2")));
    }
}
