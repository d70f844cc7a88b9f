//! Sustainability annotation bundles and their binding to a log.
//!
//! A bundle (`"schema": "susmine/1"`) carries the unit registry, the active
//! scope set, impact categories with characterization factors, flow
//! assignments and allocation rules. Binding resolves every component
//! reference against a log and expands per-instance type-level assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::allocation::AllocationRule;
use crate::error::{Error, Result};
use crate::model::{resolve_component, ComponentKind, ComponentRef, EventLog};
use crate::ocel::log_digest;
use crate::scalar::{DecimalText, Exact};
use crate::unitreg::{Quantity, RegistrySpec, UnitRegistry};

pub const SCHEMA_ID: &str = "susmine/1";

/// Reserved bucket for assignments without a scope tag.
pub const UNSCOPED: &str = "unscoped";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Amount applies to each instance of a type-level component.
    PerInstance,
    #[default]
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub component: ComponentRef,
    pub flow: String,
    pub direction: Direction,
    pub quantity: Quantity<Exact>,
    pub scope: Option<String>,
    pub basis: Basis,
    /// On an instance-level assignment: suppress type-level expansions of the
    /// same flow and direction for this instance.
    pub override_type_level: bool,
}

impl FlowAssignment {
    pub fn scope_label(&self) -> &str {
        self.scope.as_deref().unwrap_or(UNSCOPED)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactClass {
    Climate,
    Environmental,
    Social,
}

impl ImpactClass {
    pub const ALL: [ImpactClass; 3] = [ImpactClass::Climate, ImpactClass::Environmental, ImpactClass::Social];

    pub fn as_str(self) -> &'static str {
        match self {
            ImpactClass::Climate => "climate",
            ImpactClass::Environmental => "environmental",
            ImpactClass::Social => "social",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "climate" => Ok(ImpactClass::Climate),
            "environmental" => Ok(ImpactClass::Environmental),
            "social" => Ok(ImpactClass::Social),
            other => Err(Error::Schema(format!("unknown impact class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub impact_unit: String,
    pub class: ImpactClass,
}

/// Characterization factor in impact-unit per flow-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub value: Exact,
    /// Only flows in this direction are characterized by the entry.
    pub direction: Option<Direction>,
}

impl Factor {
    pub fn applies_to(&self, direction: Direction) -> bool {
        self.direction.is_none_or(|d| d == direction)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CharacterizationTable {
    entries: BTreeMap<(String, String), BTreeMap<String, Factor>>,
    categories: BTreeMap<String, CategoryInfo>,
}

impl CharacterizationTable {
    pub fn categories(&self) -> &BTreeMap<String, CategoryInfo> {
        &self.categories
    }

    pub fn category(&self, name: &str) -> Option<&CategoryInfo> {
        self.categories.get(name)
    }

    pub fn entries(&self) -> &BTreeMap<(String, String), BTreeMap<String, Factor>> {
        &self.entries
    }

    pub fn factors(&self, flow: &str, unit: &str) -> Option<&BTreeMap<String, Factor>> {
        self.entries.get(&(flow.to_owned(), unit.to_owned()))
    }

    /// Units the table characterizes `flow` in.
    pub fn units_for<'a>(&'a self, flow: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.keys().filter(move |(f, _)| f == flow).map(|(_, u)| u.as_str())
    }

    pub fn has_flow(&self, flow: &str) -> bool {
        self.units_for(flow).next().is_some()
    }

    pub fn add_category(&mut self, name: &str, info: CategoryInfo) -> Result<()> {
        if name.trim().is_empty() {
            return Err(Error::Schema("empty impact category name".into()));
        }
        match self.categories.get(name) {
            Some(existing) if *existing != info => {
                Err(Error::Schema(format!("impact category {name:?} declared twice with different unit or class")))
            }
            _ => {
                self.categories.insert(name.to_owned(), info);
                Ok(())
            }
        }
    }

    pub fn add_factor(&mut self, flow: &str, unit: &str, category: &str, factor: Factor) -> Result<()> {
        if !self.categories.contains_key(category) {
            return Err(Error::Schema(format!("factor references undeclared impact category {category:?}")));
        }
        let slot = self.entries.entry((flow.to_owned(), unit.to_owned())).or_default();
        if slot.contains_key(category) {
            return Err(Error::Schema(format!("duplicate factor for ({flow}, {unit}) -> {category}")));
        }
        slot.insert(category.to_owned(), factor);
        Ok(())
    }

    pub fn merge(&mut self, other: &CharacterizationTable) -> Result<()> {
        for (name, info) in &other.categories {
            self.add_category(name, info.clone())?;
        }
        for ((flow, unit), factors) in &other.entries {
            for (cat, f) in factors {
                self.add_factor(flow, unit, cat, f.clone())?;
            }
        }
        Ok(())
    }

    fn check(&self, registry: &UnitRegistry, scope_set: &ScopeSet) -> Result<()> {
        for (flow, unit) in self.entries.keys() {
            if !registry.contains(unit) {
                return Err(Error::UnknownUnit(unit.clone()));
            }
            if flow.trim().is_empty() {
                return Err(Error::Schema("factor with empty flow name".into()));
            }
        }
        if scope_set.name == "ghg" {
            for (name, info) in &self.categories {
                if info.class == ImpactClass::Climate && info.impact_unit != "kg CO2e" {
                    return Err(Error::Schema(format!(
                        "climate category {name:?} must be measured in kg CO2e under the ghg scope preset"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Load a table from CSV with header `flow,unit,category,factor,impact_unit,class`
    /// and an optional trailing `direction` column.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            flow: String,
            unit: String,
            category: String,
            factor: String,
            impact_unit: String,
            class: String,
            #[serde(default)]
            direction: Option<String>,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["flow", "unit", "category", "factor", "impact_unit", "class"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Schema(format!("factor CSV lacks column {required:?}")));
            }
        }
        let mut table = CharacterizationTable::default();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            table.add_category(
                &row.category,
                CategoryInfo { impact_unit: row.impact_unit, class: ImpactClass::parse(&row.class)? },
            )?;
            let direction = match row.direction.as_deref().map(str::trim) {
                None | Some("") | Some("any") => None,
                Some("input") => Some(Direction::Input),
                Some("output") => Some(Direction::Output),
                Some(other) => return Err(Error::Schema(format!("unknown direction {other:?}"))),
            };
            let value = crate::scalar::parse_decimal(&row.factor)?;
            table.add_factor(&row.flow, &row.unit, &row.category, Factor { value, direction })?;
        }
        Ok(table)
    }
}

/// Ordered set of disjoint scope buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeSet {
    pub name: String,
    pub scopes: Vec<String>,
}

impl ScopeSet {
    pub fn new(name: &str, scopes: Vec<String>) -> Result<Self> {
        if scopes.is_empty() {
            return Err(Error::Schema(format!("scope set {name:?} is empty")));
        }
        let mut seen = BTreeSet::new();
        for s in &scopes {
            if s.trim().is_empty() || s == UNSCOPED {
                return Err(Error::Schema(format!("invalid scope label {s:?}")));
            }
            if !seen.insert(s) {
                return Err(Error::Schema(format!("scope label {s:?} listed twice")));
            }
        }
        Ok(ScopeSet { name: name.to_owned(), scopes })
    }

    /// GHG Protocol scopes.
    pub fn ghg() -> Self {
        ScopeSet { name: "ghg".into(), scopes: vec!["scope1".into(), "scope2".into(), "scope3".into()] }
    }

    /// In-company versus upstream value chain.
    pub fn lca() -> Self {
        ScopeSet { name: "lca".into(), scopes: vec!["gate_to_gate".into(), "upstream".into()] }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ghg" => Some(Self::ghg()),
            "lca" => Some(Self::lca()),
            _ => None,
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.scopes.iter().any(|s| s == label)
    }

    /// Scope labels plus the reserved `unscoped` bucket.
    pub fn labels_with_unscoped(&self) -> impl Iterator<Item = &str> {
        self.scopes.iter().map(String::as_str).chain(std::iter::once(UNSCOPED))
    }

    pub fn from_json(document: &[u8]) -> Result<Self> {
        let spec: ScopeSpec = serde_json::from_slice(document)?;
        spec.resolve()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScopeSpec {
    Preset(String),
    Custom { name: String, scopes: Vec<String> },
}

impl ScopeSpec {
    pub fn resolve(&self) -> Result<ScopeSet> {
        match self {
            ScopeSpec::Preset(name) => {
                ScopeSet::preset(name).ok_or_else(|| Error::Schema(format!("unknown scope preset {name:?}")))
            }
            ScopeSpec::Custom { name, scopes } => ScopeSet::new(name, scopes.clone()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawCategory {
    name: String,
    impact_unit: String,
    class: ImpactClass,
}

#[derive(Serialize, Deserialize)]
struct RawFactor {
    flow: String,
    unit: String,
    category: String,
    factor: DecimalText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<Direction>,
}

#[derive(Serialize, Deserialize)]
struct RawAssignment {
    component: ComponentRef,
    flow: String,
    direction: Direction,
    amount: DecimalText,
    unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<String>,
    #[serde(default)]
    basis: Basis,
    #[serde(default, rename = "override")]
    override_type_level: bool,
}

#[derive(Serialize, Deserialize)]
struct RawBundle {
    schema: String,
    #[serde(default)]
    units: Option<RegistrySpec>,
    #[serde(default)]
    scopes: Option<ScopeSpec>,
    #[serde(default)]
    categories: Vec<RawCategory>,
    #[serde(default)]
    factors: Vec<RawFactor>,
    #[serde(default)]
    assignments: Vec<RawAssignment>,
    #[serde(default)]
    allocations: Vec<AllocationRule>,
}

/// Parsed, validated (but not yet bound) annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationBundle {
    pub registry: UnitRegistry,
    pub scope_set: ScopeSet,
    pub table: CharacterizationTable,
    pub assignments: Vec<FlowAssignment>,
    pub rules: Vec<AllocationRule>,
}

impl Default for AnnotationBundle {
    fn default() -> Self {
        AnnotationBundle {
            registry: UnitRegistry::default(),
            scope_set: ScopeSet::ghg(),
            table: CharacterizationTable::default(),
            assignments: Vec::new(),
            rules: Vec::new(),
        }
    }
}

pub fn parse_annotations(document: &[u8]) -> Result<AnnotationBundle> {
    parse_annotations_with(document, None)
}

/// Parse a bundle, replacing its scope set with `scope_override` when given.
pub fn parse_annotations_with(document: &[u8], scope_override: Option<&ScopeSet>) -> Result<AnnotationBundle> {
    let value: serde_json::Value = serde_json::from_slice(document)?;
    let raw: RawBundle = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    if raw.schema != SCHEMA_ID {
        return Err(Error::Schema(format!("unsupported schema {:?}, expected {SCHEMA_ID:?}", raw.schema)));
    }
    let registry = UnitRegistry::from_spec(&raw.units.unwrap_or_default())?;
    let scope_set = match (scope_override, raw.scopes) {
        (Some(s), _) => s.clone(),
        (None, Some(spec)) => spec.resolve()?,
        (None, None) => ScopeSet::ghg(),
    };

    let mut table = CharacterizationTable::default();
    for c in raw.categories {
        table.add_category(&c.name, CategoryInfo { impact_unit: c.impact_unit, class: c.class })?;
    }
    for f in raw.factors {
        table.add_factor(&f.flow, &f.unit, &f.category, Factor { value: f.factor.value()?, direction: f.direction })?;
    }
    table.check(&registry, &scope_set)?;

    let assignments = raw
        .assignments
        .into_iter()
        .map(|a| {
            let scope = match a.scope {
                Some(s) if s == UNSCOPED => None,
                Some(s) if !scope_set.contains(&s) => return Err(Error::UnknownScope(s)),
                other => other,
            };
            let assignment = FlowAssignment {
                component: a.component,
                flow: a.flow,
                direction: a.direction,
                quantity: Quantity { amount: a.amount.value()?, unit: a.unit },
                scope,
                basis: a.basis,
                override_type_level: a.override_type_level,
            };
            check_assignment(&assignment, &registry)?;
            Ok(assignment)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AnnotationBundle { registry, scope_set, table, assignments, rules: raw.allocations })
}

fn check_assignment(a: &FlowAssignment, registry: &UnitRegistry) -> Result<()> {
    let kind = a.component.kind;
    if (kind == ComponentKind::Process) != a.component.id.is_none() {
        return Err(Error::Schema(format!("component {} must carry an id unless it is the process", a.component)));
    }
    if a.flow.trim().is_empty() {
        return Err(Error::Schema("assignment with empty flow name".into()));
    }
    if !registry.contains(&a.quantity.unit) {
        return Err(Error::UnknownUnit(a.quantity.unit.clone()));
    }
    if a.basis == Basis::PerInstance && !kind.is_type_level() {
        return Err(Error::Schema(format!("per_instance basis on non-type component {}", a.component)));
    }
    if a.override_type_level && !matches!(kind, ComponentKind::ActivityInstance | ComponentKind::ObjectInstance) {
        return Err(Error::Schema(format!("override flag on non-instance component {}", a.component)));
    }
    Ok(())
}

/// Serialize a bundle back to its JSON form.
pub fn write_annotations(bundle: &AnnotationBundle) -> String {
    let defaults = UnitRegistry::default();
    let units = RegistrySpec {
        units: bundle.registry.units().iter().filter(|u| !defaults.contains(u)).cloned().collect(),
        conversions: bundle
            .registry
            .conversions()
            .iter()
            .filter(|(k, _)| !defaults.conversions().contains_key(*k))
            .map(|((from, to), f)| crate::unitreg::ConversionSpec {
                from: from.clone(),
                to: to.clone(),
                factor: f.into(),
            })
            .collect(),
        extend_defaults: true,
    };
    let raw = RawBundle {
        schema: SCHEMA_ID.into(),
        units: Some(units),
        scopes: Some(ScopeSpec::Custom {
            name: bundle.scope_set.name.clone(),
            scopes: bundle.scope_set.scopes.clone(),
        }),
        categories: bundle
            .table
            .categories()
            .iter()
            .map(|(n, i)| RawCategory { name: n.clone(), impact_unit: i.impact_unit.clone(), class: i.class })
            .collect(),
        factors: bundle
            .table
            .entries()
            .iter()
            .flat_map(|((flow, unit), fs)| {
                fs.iter().map(move |(cat, f)| RawFactor {
                    flow: flow.clone(),
                    unit: unit.clone(),
                    category: cat.clone(),
                    factor: (&f.value).into(),
                    direction: f.direction,
                })
            })
            .collect(),
        assignments: bundle
            .assignments
            .iter()
            .map(|a| RawAssignment {
                component: a.component.clone(),
                flow: a.flow.clone(),
                direction: a.direction,
                amount: (&a.quantity.amount).into(),
                unit: a.quantity.unit.clone(),
                scope: a.scope.clone(),
                basis: a.basis,
                override_type_level: a.override_type_level,
            })
            .collect(),
        allocations: bundle.rules.clone(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("bundle serialization cannot fail");
    text.push('\n');
    text
}

/// An assignment attached to one concrete component.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAssignment {
    pub target: ComponentRef,
    pub flow: String,
    pub direction: Direction,
    pub quantity: Quantity<Exact>,
    /// Scope label, `unscoped` when untagged.
    pub scope: String,
    /// Index of the originating assignment in the bundle.
    pub origin: usize,
}

/// A log bound to its annotations. Immutable once built.
#[derive(Debug, Clone)]
pub struct AnnotatedLog {
    log: EventLog,
    digest: String,
    bundle: AnnotationBundle,
    assignments: Vec<ResolvedAssignment>,
}

impl AnnotatedLog {
    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// SHA-256 of the canonical log serialization.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn bundle(&self) -> &AnnotationBundle {
        &self.bundle
    }

    pub fn assignments(&self) -> &[ResolvedAssignment] {
        &self.assignments
    }

    pub fn table(&self) -> &CharacterizationTable {
        &self.bundle.table
    }

    pub fn scope_set(&self) -> &ScopeSet {
        &self.bundle.scope_set
    }

    pub fn registry(&self) -> &UnitRegistry {
        &self.bundle.registry
    }

    pub fn rules(&self) -> &[AllocationRule] {
        &self.bundle.rules
    }
}

/// Resolve references and expand per-instance type-level assignments.
///
/// Instance-level and expanded type-level assignments coexist additively,
/// unless the instance-level one sets `override`.
pub fn bind_annotations(log: &EventLog, bundle: &AnnotationBundle) -> Result<AnnotatedLog> {
    for a in &bundle.assignments {
        resolve_component(&a.component, log)?;
    }
    for rule in &bundle.rules {
        rule.check_references(log)?;
    }

    let overridden: BTreeSet<(&ComponentRef, &str, Direction)> = bundle
        .assignments
        .iter()
        .filter(|a| a.override_type_level)
        .map(|a| (&a.component, a.flow.as_str(), a.direction))
        .collect();

    let mut resolved = Vec::new();
    for (origin, a) in bundle.assignments.iter().enumerate() {
        let make = |target: ComponentRef| ResolvedAssignment {
            target,
            flow: a.flow.clone(),
            direction: a.direction,
            quantity: a.quantity.clone(),
            scope: a.scope_label().to_owned(),
            origin,
        };
        if a.basis == Basis::Absolute {
            resolved.push(make(a.component.clone()));
            continue;
        }
        let ty = a.component.id_str();
        let instances: Vec<ComponentRef> = match a.component.kind {
            ComponentKind::ActivityType => unique_ids(log.events_of_activity(ty).map(|e| e.id.as_str()))
                .map(ComponentRef::activity_instance)
                .collect(),
            ComponentKind::ObjectType => {
                unique_ids(log.objects_of_type(ty).map(|o| o.id.as_str())).map(ComponentRef::object_instance).collect()
            }
            _ => unreachable!("per_instance basis is rejected on non-type components"),
        };
        for target in instances {
            if !overridden.contains(&(&target, a.flow.as_str(), a.direction)) {
                resolved.push(make(target));
            }
        }
    }

    Ok(AnnotatedLog { digest: log_digest(log), log: log.clone(), bundle: bundle.clone(), assignments: resolved })
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> impl Iterator<Item = &'a str> {
    let mut seen = BTreeSet::new();
    ids.filter(move |id| seen.insert(*id))
}
