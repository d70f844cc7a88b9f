//! Redistribution of impacts from a source component to target components.
//!
//! Each rule moves `fraction` of the source's scoped impact vector onto its
//! targets in proportion to an allocation key; the source keeps the rest.
//! Category and scope labels are preserved on transfer. Rules are applied in a
//! single pass against the input impacts, so nothing is re-allocated twice.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::annotation::AnnotatedLog;
use crate::error::{Error, Result};
use crate::model::{resolve_component, ComponentKind, ComponentRef, EventLog};
use crate::ocel::Mode;
use crate::scalar::{format_exact, DecimalText, Exact, Scalar};
use crate::scoping::ScopedImpactMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSelector {
    /// Events related to the source object(s) through any (or the listed) qualifier.
    RelatedEvents,
    Explicit(Vec<ComponentRef>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKey {
    Equal,
    /// Proportional to `mass_kg`.
    Mass,
    /// Proportional to `economic_value`.
    EconomicValue,
    Attribute(String),
}

impl AllocationKey {
    pub fn attribute(&self) -> Option<&str> {
        match self {
            AllocationKey::Equal => None,
            AllocationKey::Mass => Some("mass_kg"),
            AllocationKey::EconomicValue => Some("economic_value"),
            AllocationKey::Attribute(a) => Some(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct AllocationRule {
    pub source: ComponentRef,
    pub targets: TargetSelector,
    /// Relation qualifiers accepted by `related_events`; empty accepts all.
    pub qualifiers: Vec<String>,
    pub key: AllocationKey,
    /// Portion of the source impact to move, in `[0, 1]`.
    pub fraction: Exact,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    source: ComponentRef,
    targets: TargetSelector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    qualifiers: Vec<String>,
    #[serde(default = "default_key")]
    key: AllocationKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fraction: Option<DecimalText>,
}

fn default_key() -> AllocationKey {
    AllocationKey::Equal
}

impl TryFrom<RawRule> for AllocationRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        let fraction = match raw.fraction {
            Some(f) => f.value()?,
            None => Exact::one(),
        };
        if fraction.is_negative() || fraction > Exact::one() {
            return Err(Error::Schema(format!("allocation fraction {} outside [0, 1]", format_exact(&fraction))));
        }
        if raw.key.attribute().is_some_and(|a| a.trim().is_empty()) {
            return Err(Error::Schema("allocation key attribute name is empty".into()));
        }
        if (raw.source.kind == ComponentKind::Process) != raw.source.id.is_none() {
            return Err(Error::Schema(format!("malformed allocation source {}", raw.source)));
        }
        if raw.targets == TargetSelector::RelatedEvents
            && !matches!(raw.source.kind, ComponentKind::ObjectInstance | ComponentKind::ObjectType)
        {
            return Err(Error::Schema(format!("related_events needs an object source, got {}", raw.source)));
        }
        Ok(AllocationRule {
            source: raw.source,
            targets: raw.targets,
            qualifiers: raw.qualifiers,
            key: raw.key,
            fraction,
        })
    }
}

impl From<AllocationRule> for RawRule {
    fn from(rule: AllocationRule) -> Self {
        RawRule {
            source: rule.source,
            targets: rule.targets,
            qualifiers: rule.qualifiers,
            key: rule.key,
            fraction: Some((&rule.fraction).into()),
        }
    }
}

impl AllocationRule {
    pub(crate) fn check_references(&self, log: &EventLog) -> Result<()> {
        resolve_component(&self.source, log)?;
        if let TargetSelector::Explicit(targets) = &self.targets {
            for t in targets {
                resolve_component(t, log)?;
            }
        }
        Ok(())
    }

    /// Deduplicated targets in sorted order.
    pub fn select_targets(&self, log: &EventLog) -> Result<Vec<ComponentRef>> {
        let targets: BTreeSet<ComponentRef> = match &self.targets {
            TargetSelector::Explicit(list) => list.iter().cloned().collect(),
            TargetSelector::RelatedEvents => {
                let source_id = self.source.id_str();
                log.relations()
                    .iter()
                    .filter(|r| self.qualifiers.is_empty() || self.qualifiers.contains(&r.qualifier))
                    .filter(|r| match self.source.kind {
                        ComponentKind::ObjectInstance => r.object_id == source_id,
                        _ => log.object(&r.object_id).is_some_and(|o| o.object_type == source_id),
                    })
                    .filter(|r| log.event(&r.event_id).is_some())
                    .map(|r| ComponentRef::activity_instance(&r.event_id))
                    .collect()
            }
        };
        if targets.is_empty() {
            return Err(Error::NoTargets(self.source.clone()));
        }
        Ok(targets.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights<S = f64> {
    pub weights: BTreeMap<ComponentRef, S>,
    pub warnings: Vec<String>,
}

/// Non-negative weights summing to one over the rule's targets.
///
/// A target lacking the key attribute is an error in strict mode and counts
/// as zero in lenient mode. All-zero keys fall back to an equal split.
pub fn allocation_weights<S: Scalar>(rule: &AllocationRule, al: &AnnotatedLog, mode: Mode) -> Result<Weights<S>> {
    let log = al.log();
    resolve_component(&rule.source, log)?;
    let targets = rule.select_targets(log)?;
    let mut warnings = Vec::new();
    let n = S::from_usize(targets.len()).expect("target count fits the scalar");

    let equal = |targets: Vec<ComponentRef>| targets.into_iter().map(|t| (t, S::one() / n)).collect();
    let Some(attribute) = rule.key.attribute() else {
        return Ok(Weights { weights: equal(targets), warnings });
    };

    let mut values = Vec::with_capacity(targets.len());
    for t in &targets {
        let value = resolve_component(t, log)?.attributes().and_then(|a| a.get(attribute)).and_then(|v| v.as_f64());
        let value = match value {
            Some(v) if v < 0.0 => {
                return Err(Error::NegativeKey { target: t.to_string(), attribute: attribute.to_owned() })
            }
            Some(v) => v,
            None if mode == Mode::Lenient => {
                warnings.push(format!("{t} lacks allocation attribute {attribute:?}; counted as 0"));
                0.0
            }
            None => return Err(Error::MissingAttribute { target: t.to_string(), attribute: attribute.to_owned() }),
        };
        values.push(S::from_f64(value).unwrap_or_else(S::nan));
    }
    let total: S = values.iter().copied().sum();
    if total.is_zero() {
        warnings.push(format!("all {attribute:?} values of the targets of {} are zero; split equally", rule.source));
        return Ok(Weights { weights: equal(targets), warnings });
    }
    Ok(Weights { weights: targets.into_iter().zip(values).map(|(t, v)| (t, v / total)).collect(), warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry<S = f64> {
    pub source: ComponentRef,
    pub target: ComponentRef,
    pub category: String,
    pub scope: String,
    pub amount: S,
    pub weight: S,
}

/// What a source kept of one (category, scope) entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<S = f64> {
    pub source: ComponentRef,
    pub category: String,
    pub scope: String,
    pub original: S,
    pub allocated: S,
    pub residual: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationLedger<S = f64> {
    pub entries: Vec<LedgerEntry<S>>,
    pub residuals: Vec<Residual<S>>,
    /// Per rule source, the weights that were applied.
    pub weights: BTreeMap<ComponentRef, BTreeMap<ComponentRef, S>>,
    pub warnings: Vec<String>,
}

impl<S: Scalar> Default for AllocationLedger<S> {
    fn default() -> Self {
        AllocationLedger { entries: Vec::new(), residuals: Vec::new(), weights: BTreeMap::new(), warnings: Vec::new() }
    }
}

fn ledger_order(c: &ComponentRef) -> (&str, ComponentKind) {
    (c.id_str(), c.kind)
}

impl<S: Scalar> AllocationLedger<S> {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "source_kind",
            "source_id",
            "target_kind",
            "target_id",
            "category",
            "scope",
            "amount",
            "weight",
        ])
        .expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.source.kind.as_str(),
                e.source.id_str(),
                e.target.kind.as_str(),
                e.target.id_str(),
                &e.category,
                &e.scope,
                &e.amount.render(),
                &e.weight.render(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Per (source, category, scope): allocated + residual equals the original.
    pub fn is_conserved(&self, rel: f64) -> bool {
        self.residuals
            .iter()
            .all(|r| crate::scalar::rel_close((r.allocated + r.residual).as_f64(), r.original.as_f64(), rel))
            && {
                let mut moved: BTreeMap<(&ComponentRef, &str, &str), f64> = BTreeMap::new();
                for e in &self.entries {
                    *moved.entry((&e.source, &e.category, &e.scope)).or_default() += e.amount.as_f64();
                }
                self.residuals.iter().all(|r| {
                    let m = moved.get(&(&r.source, r.category.as_str(), r.scope.as_str())).copied().unwrap_or(0.0);
                    crate::scalar::rel_close(m, r.allocated.as_f64(), rel)
                })
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocated<S = f64> {
    pub impacts: ScopedImpactMap<S>,
    pub ledger: AllocationLedger<S>,
}

pub fn apply_allocations<S: Scalar>(
    al: &AnnotatedLog,
    impacts: &ScopedImpactMap<S>,
    rules: &[AllocationRule],
    mode: Mode,
) -> Result<Allocated<S>> {
    let mut sources = BTreeSet::new();
    for rule in rules {
        if !sources.insert(&rule.source) {
            return Err(Error::DuplicateSource(rule.source.clone()));
        }
    }

    let mut out = impacts.clone();
    let mut ledger = AllocationLedger::default();
    for rule in rules {
        if rule.fraction.is_zero() {
            continue;
        }
        let weights = allocation_weights::<S>(rule, al, mode)?;
        ledger.warnings.extend(weights.warnings);
        ledger.weights.insert(rule.source.clone(), weights.weights.clone());
        let fraction = S::from_exact(&rule.fraction);
        let Some(source_vec) = impacts.get(&rule.source) else {
            continue;
        };
        for (category, scope, original) in source_vec.iter() {
            let moved = original * fraction;
            let mut allocated = S::zero();
            for (target, w) in &weights.weights {
                let amount = moved * *w;
                allocated += amount;
                out.entry(target.clone()).or_default().add(category, scope, amount);
                ledger.entries.push(LedgerEntry {
                    source: rule.source.clone(),
                    target: target.clone(),
                    category: category.to_owned(),
                    scope: scope.to_owned(),
                    amount,
                    weight: *w,
                });
            }
            let residual = original - allocated;
            out.entry(rule.source.clone()).or_default().add(category, scope, -allocated);
            ledger.residuals.push(Residual {
                source: rule.source.clone(),
                category: category.to_owned(),
                scope: scope.to_owned(),
                original,
                allocated,
                residual,
            });
        }
    }
    ledger.entries.sort_by(|a, b| {
        ledger_order(&a.source)
            .cmp(&ledger_order(&b.source))
            .then_with(|| ledger_order(&a.target).cmp(&ledger_order(&b.target)))
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.scope.cmp(&b.scope))
    });
    ledger.residuals.sort_by(|a, b| {
        ledger_order(&a.source)
            .cmp(&ledger_order(&b.source))
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.scope.cmp(&b.scope))
    });
    Ok(Allocated { impacts: out, ledger })
}
