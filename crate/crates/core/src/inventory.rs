//! Flow inventories per process component.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotatedLog, Direction, ResolvedAssignment};
use crate::error::{Error, Result};
use crate::model::{resolve_component, ComponentKind, ComponentRef, EventLog};
use crate::scalar::{exact_from_f64, Amount, Exact};
use crate::unitreg::Quantity;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InventoryKey {
    pub component: ComponentRef,
    pub flow: String,
    pub direction: Direction,
    pub scope: String,
    pub unit: String,
}

/// Quantified flows keyed by (component, flow, direction, scope, unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory<A = Exact> {
    entries: BTreeMap<InventoryKey, A>,
}

impl<A: Amount> Default for Inventory<A> {
    fn default() -> Self {
        Inventory { entries: BTreeMap::new() }
    }
}

impl<A: Amount> Inventory<A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: InventoryKey, amount: A) {
        let slot = self.entries.entry(key).or_insert_with(A::zero);
        *slot = slot.clone() + amount;
    }

    pub fn get(&self, key: &InventoryKey) -> Option<&A> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InventoryKey, &A)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn quantity(&self, key: &InventoryKey) -> Option<Quantity<A>> {
        self.entries.get(key).map(|a| Quantity { amount: a.clone(), unit: key.unit.clone() })
    }

    /// Entrywise sum.
    pub fn merge(&mut self, other: &Inventory<A>) {
        for (k, v) in &other.entries {
            self.add(k.clone(), v.clone());
        }
    }

    pub fn scaled(&self, factor: &A) -> Inventory<A> {
        Inventory { entries: self.entries.iter().map(|(k, v)| (k.clone(), v.clone() * factor.clone())).collect() }
    }

    pub fn map_amounts<B: Amount>(&self, f: impl Fn(&A) -> B) -> Inventory<B> {
        Inventory { entries: self.entries.iter().map(|(k, v)| (k.clone(), f(v))).collect() }
    }

    /// Entries with negative amounts (credits / avoided burdens).
    pub fn negative_entries(&self) -> Vec<&InventoryKey> {
        self.entries.iter().filter(|(_, v)| **v < A::zero()).map(|(k, _)| k).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["component_kind", "component_id", "flow", "direction", "scope", "amount", "unit"])
            .expect("in-memory write");
        for (k, v) in &self.entries {
            w.write_record([
                k.component.kind.as_str(),
                k.component.id_str(),
                &k.flow,
                k.direction.as_str(),
                &k.scope,
                &v.render(),
                &k.unit,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn key_for(component: ComponentRef, a: &ResolvedAssignment) -> InventoryKey {
    InventoryKey {
        component,
        flow: a.flow.clone(),
        direction: a.direction,
        scope: a.scope.clone(),
        unit: a.quantity.unit.clone(),
    }
}

/// Every resolved assignment on its own component, without roll-up.
pub fn own_inventory<A: Amount>(al: &AnnotatedLog) -> Inventory<A> {
    let mut inv = Inventory::new();
    for a in al.assignments() {
        inv.add(key_for(a.target.clone(), a), A::from_exact(&a.quantity.amount));
    }
    inv
}

/// Sum of the assignments attached to exactly `component`.
pub fn component_inventory<A: Amount>(al: &AnnotatedLog, component: &ComponentRef) -> Result<Inventory<A>> {
    resolve_component(component, al.log())?;
    let mut inv = Inventory::new();
    for a in al.assignments().iter().filter(|a| a.target == *component) {
        inv.add(key_for(a.target.clone(), a), A::from_exact(&a.quantity.amount));
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollupLevel {
    ActivityType,
    ObjectType,
    Process,
}

/// The type-level component an assignment target rolls up into, if any.
///
/// Roll-up never crosses kinds: object inventories stay out of activity totals.
pub(crate) fn rollup_target(target: &ComponentRef, level: RollupLevel, log: &EventLog) -> Option<ComponentRef> {
    match (level, target.kind) {
        (RollupLevel::Process, _) => Some(ComponentRef::process()),
        (RollupLevel::ActivityType, ComponentKind::ActivityType) => Some(target.clone()),
        (RollupLevel::ActivityType, ComponentKind::ActivityInstance) => {
            log.event(target.id_str()).map(|e| ComponentRef::activity_type(&e.activity))
        }
        (RollupLevel::ObjectType, ComponentKind::ObjectType) => Some(target.clone()),
        (RollupLevel::ObjectType, ComponentKind::ObjectInstance) => {
            log.object(target.id_str()).map(|o| ComponentRef::object_type(&o.object_type))
        }
        _ => None,
    }
}

pub fn rollup_inventory<A: Amount>(al: &AnnotatedLog, level: RollupLevel) -> Inventory<A> {
    let mut inv = Inventory::new();
    for a in al.assignments() {
        if let Some(target) = rollup_target(&a.target, level, al.log()) {
            inv.add(key_for(target, a), A::from_exact(&a.quantity.amount));
        }
    }
    inv
}

/// Reference output all flows are normalized to.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalUnit {
    pub object_type: String,
    pub reference: Quantity<Exact>,
    /// Numeric object attribute measuring output; `None` counts objects.
    pub attribute: Option<String>,
}

impl FunctionalUnit {
    pub fn count(object_type: &str, reference: Exact) -> Result<Self> {
        Self::new(object_type, Quantity::new(reference, "count"), None)
    }

    pub fn new(object_type: &str, reference: Quantity<Exact>, attribute: Option<String>) -> Result<Self> {
        if !reference.amount.is_positive() {
            return Err(Error::Schema(format!("functional unit reference amount must be positive, got {reference}")));
        }
        if attribute.as_deref().is_some_and(|a| a.trim().is_empty()) {
            return Err(Error::Schema("functional unit attribute name is empty".into()));
        }
        Ok(FunctionalUnit { object_type: object_type.to_owned(), reference, attribute })
    }

    /// Parse `<type>:<amount>[:<attribute>]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.splitn(3, ':');
        let ty = parts.next().filter(|s| !s.is_empty());
        let amount = parts.next();
        let (Some(ty), Some(amount)) = (ty, amount) else {
            return Err(Error::Schema(format!("functional unit {spec:?} is not <type>:<amount>")));
        };
        let amount = crate::scalar::parse_decimal(amount)?;
        match parts.next() {
            None => Self::count(ty, amount),
            Some(attr) => Self::new(ty, Quantity::new(amount, attr), Some(attr.to_owned())),
        }
    }

    /// Total measured output of the functional-unit object type in the log.
    pub fn measured_output(&self, log: &EventLog) -> Result<Exact> {
        let mut total = Exact::zero();
        let mut seen = std::collections::BTreeSet::new();
        for o in log.objects_of_type(&self.object_type) {
            if !seen.insert(o.id.as_str()) {
                continue;
            }
            match &self.attribute {
                None => total += Exact::from_integer(1.into()),
                Some(attr) => {
                    let value = o
                        .attributes
                        .get(attr)
                        .and_then(|v| v.as_f64())
                        .and_then(exact_from_f64)
                        .ok_or_else(|| Error::MissingAttribute { target: o.id.clone(), attribute: attr.clone() })?;
                    total += value;
                }
            }
        }
        Ok(total)
    }

    /// Multiplier `reference / measured output`.
    pub fn scale_factor(&self, log: &EventLog) -> Result<Exact> {
        let total = self.measured_output(log)?;
        if total.is_zero() {
            return Err(Error::ZeroOutput(self.object_type.clone()));
        }
        Ok(&self.reference.amount / total)
    }
}

pub fn scale_to_functional_unit<A: Amount>(
    inv: &Inventory<A>,
    fu: &FunctionalUnit,
    al: &AnnotatedLog,
) -> Result<Inventory<A>> {
    let factor = fu.scale_factor(al.log())?;
    Ok(inv.scaled(&A::from_exact(&factor)))
}
