//! Impacts per scope bucket and cumulative (nested-boundary) views.
//!
//! Scopes are disjoint buckets. Readings such as "gate-to-gate within
//! cradle-to-gate" are prefix sums produced by [`cumulative_view`] and never
//! stored.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{AnnotatedLog, CharacterizationTable, ScopeSet, UNSCOPED};
use crate::error::{Error, Result};
use crate::impact::{characterize_entry, ImpactVector};
use crate::inventory::{own_inventory, Inventory};
use crate::model::ComponentRef;
use crate::ocel::Mode;
use crate::scalar::{Amount, Exact, Scalar};
use crate::unitreg::UnitRegistry;

/// Impact amounts keyed by (category, scope).
#[derive(Debug, Clone, PartialEq)]
pub struct ScopedImpactVector<S = f64> {
    values: BTreeMap<(String, String), S>,
}

impl<S: Scalar> Default for ScopedImpactVector<S> {
    fn default() -> Self {
        ScopedImpactVector { values: BTreeMap::new() }
    }
}

impl<S: Scalar> ScopedImpactVector<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, category: &str, scope: &str, amount: S) {
        *self.values.entry((category.to_owned(), scope.to_owned())).or_insert_with(S::zero) += amount;
    }

    pub fn get(&self, category: &str, scope: &str) -> Option<S> {
        self.values.get(&(category.to_owned(), scope.to_owned())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, S)> {
        self.values.iter().map(|((c, s), v)| (c.as_str(), s.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn merge(&mut self, other: &ScopedImpactVector<S>) {
        for (c, s, v) in other.iter() {
            self.add(c, s, v);
        }
    }

    pub fn scaled(&self, factor: S) -> Self {
        ScopedImpactVector { values: self.values.iter().map(|(k, v)| (k.clone(), *v * factor)).collect() }
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.values.keys().map(|(c, _)| c.as_str()).collect()
    }

    /// Collapse the scope dimension.
    pub fn unpartitioned(&self) -> ImpactVector<S> {
        self.iter().map(|(c, _, v)| (c.to_owned(), v)).collect()
    }

    pub fn category_total(&self, category: &str) -> S {
        self.iter().filter(|(c, _, _)| *c == category).map(|(_, _, v)| v).sum()
    }
}

pub type ScopedImpactMap<S = f64> = BTreeMap<ComponentRef, ScopedImpactVector<S>>;

/// Sum of every component's vector.
pub fn total_of<S: Scalar>(map: &ScopedImpactMap<S>) -> ScopedImpactVector<S> {
    let mut total = ScopedImpactVector::new();
    for v in map.values() {
        total.merge(v);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopedCharacterization<S = f64> {
    pub impacts: ScopedImpactMap<S>,
    pub uncharacterized: BTreeSet<(String, String)>,
}

/// Characterize an inventory bucket by bucket, keeping its scope labels.
pub fn characterize_scoped<A: Amount, S: Scalar>(
    inv: &Inventory<A>,
    table: &CharacterizationTable,
    registry: &UnitRegistry,
    mode: Mode,
) -> Result<ScopedCharacterization<S>> {
    let mut impacts: ScopedImpactMap<S> = BTreeMap::new();
    let mut uncharacterized = BTreeSet::new();
    for (key, amount) in inv.iter() {
        match characterize_entry::<A, S>(table, registry, mode, &key.flow, &key.unit, key.direction, amount)? {
            Some(contributions) => {
                let v = impacts.entry(key.component.clone()).or_default();
                for (cat, x) in contributions {
                    v.add(&cat, &key.scope, x);
                }
            }
            None => {
                uncharacterized.insert((key.flow.clone(), key.unit.clone()));
            }
        }
    }
    Ok(ScopedCharacterization { impacts, uncharacterized })
}

/// Scoped impacts of every annotated component (no roll-up, no allocation).
pub fn scoped_impacts<S: Scalar>(al: &AnnotatedLog, mode: Mode) -> Result<ScopedCharacterization<S>> {
    let inv = own_inventory::<Exact>(al);
    characterize_scoped(&inv, al.table(), al.registry(), mode)
}

/// Prefix sums over an ordering of scope buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeView<S = f64> {
    pub order: Vec<String>,
    /// Per category, `values[i]` is the sum over `order[..=i]`.
    pub values: BTreeMap<String, Vec<S>>,
}

impl<S: Scalar> CumulativeView<S> {
    /// Cumulative amount for `category` up to and including `scope`.
    pub fn through(&self, category: &str, scope: &str) -> Option<S> {
        let i = self.order.iter().position(|s| s == scope)?;
        self.values.get(category).map(|v| v[i])
    }
}

/// `order` must list every scope of `scope_set` exactly once; the reserved
/// `unscoped` bucket may be included anywhere.
pub fn cumulative_view<S: Scalar>(
    sv: &ScopedImpactVector<S>,
    order: &[String],
    scope_set: &ScopeSet,
) -> Result<CumulativeView<S>> {
    let mut seen = BTreeSet::new();
    for label in order {
        if label != UNSCOPED && !scope_set.contains(label) {
            return Err(Error::UnknownScope(label.clone()));
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::Schema(format!("scope {label:?} repeated in cumulative order")));
        }
    }
    if let Some(missing) = scope_set.scopes.iter().find(|s| !seen.contains(s.as_str())) {
        return Err(Error::Schema(format!("cumulative order omits scope {missing:?}")));
    }
    let values = sv
        .categories()
        .into_iter()
        .map(|cat| {
            let mut running = S::zero();
            let prefix = order
                .iter()
                .map(|scope| {
                    running += sv.get(cat, scope).unwrap_or_else(S::zero);
                    running
                })
                .collect();
            (cat.to_owned(), prefix)
        })
        .collect();
    Ok(CumulativeView { order: order.to_vec(), values })
}
