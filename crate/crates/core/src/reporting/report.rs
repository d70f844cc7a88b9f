//! The `susmine-report/1` JSON document and its CSV projections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{CategoryInfo, Direction, ScopeSet};
use crate::inventory::Inventory;
use crate::model::ComponentRef;
use crate::ocel::{LogSummary, Mode};
use crate::pipeline::Assessment;
use crate::scalar::{format_exact, Exact, Scalar};
use crate::scoping::{ScopedImpactMap, ScopedImpactVector};

pub const REPORT_SCHEMA: &str = "susmine-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryRow {
    pub component: ComponentRef,
    pub flow: String,
    pub direction: Direction,
    pub scope: String,
    /// Exact decimal.
    pub amount: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub component: ComponentRef,
    pub category: String,
    pub scope: String,
    pub amount: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalRow {
    pub category: String,
    pub scope: String,
    pub amount: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub process: Vec<TotalRow>,
    pub activities: BTreeMap<String, Vec<TotalRow>>,
    pub non_activity: Vec<TotalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub source: ComponentRef,
    pub target: ComponentRef,
    pub category: String,
    pub scope: String,
    pub amount: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub source: ComponentRef,
    pub category: String,
    pub scope: String,
    pub original: f64,
    pub allocated: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub source: ComponentRef,
    pub target: ComponentRef,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSection {
    pub entries: Vec<LedgerRow>,
    pub residuals: Vec<ResidualRow>,
    pub weights: Vec<WeightRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalUnitSection {
    pub object_type: String,
    pub reference: String,
    pub unit: String,
    pub attribute: Option<String>,
    pub measured_output: String,
    pub factor: String,
    pub inventory: Vec<InventoryRow>,
    pub process: Vec<TotalRow>,
    pub activities: BTreeMap<String, Vec<TotalRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowUnit {
    pub flow: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub log_digest: String,
    pub mode: Mode,
    pub scope_set: ScopeSet,
    pub summary: LogSummary,
    pub categories: BTreeMap<String, CategoryInfo>,
    pub inventory: Vec<InventoryRow>,
    pub process_inventory: Vec<InventoryRow>,
    pub impacts: Vec<ImpactRow>,
    pub allocated_impacts: Vec<ImpactRow>,
    pub totals: Totals,
    pub ledger: LedgerSection,
    pub functional_unit: Option<FunctionalUnitSection>,
    pub uncharacterized: Vec<FlowUnit>,
    pub warnings: Vec<String>,
}

fn inventory_rows(inv: &Inventory<Exact>) -> Vec<InventoryRow> {
    inv.iter()
        .map(|(k, v)| InventoryRow {
            component: k.component.clone(),
            flow: k.flow.clone(),
            direction: k.direction,
            scope: k.scope.clone(),
            amount: format_exact(v),
            unit: k.unit.clone(),
        })
        .collect()
}

struct Units<'a>(&'a BTreeMap<String, CategoryInfo>);

impl Units<'_> {
    fn of(&self, category: &str) -> String {
        self.0.get(category).map(|c| c.impact_unit.clone()).unwrap_or_default()
    }

    fn totals<S: Scalar>(&self, v: &ScopedImpactVector<S>) -> Vec<TotalRow> {
        v.iter()
            .map(|(c, s, x)| TotalRow {
                category: c.to_owned(),
                scope: s.to_owned(),
                amount: x.as_f64(),
                unit: self.of(c),
            })
            .collect()
    }

    fn impacts<S: Scalar>(&self, map: &ScopedImpactMap<S>) -> Vec<ImpactRow> {
        map.iter()
            .flat_map(|(component, v)| {
                v.iter().map(move |(c, s, x)| ImpactRow {
                    component: component.clone(),
                    category: c.to_owned(),
                    scope: s.to_owned(),
                    amount: x.as_f64(),
                    unit: self.of(c),
                })
            })
            .collect()
    }

    fn activities<S: Scalar>(&self, m: &BTreeMap<String, ScopedImpactVector<S>>) -> BTreeMap<String, Vec<TotalRow>> {
        m.iter().map(|(a, v)| (a.clone(), self.totals(v))).collect()
    }
}

pub fn build_report<S: Scalar>(a: &Assessment<S>) -> Report {
    let units = Units(&a.categories);
    let ledger = &a.ledger;
    Report {
        schema: REPORT_SCHEMA.to_owned(),
        log_digest: a.digest.clone(),
        mode: a.mode,
        scope_set: a.scope_set.clone(),
        summary: a.summary.clone(),
        categories: a.categories.clone(),
        inventory: inventory_rows(&a.inventory),
        process_inventory: inventory_rows(&a.process_inventory),
        impacts: units.impacts(&a.impacts),
        allocated_impacts: units.impacts(&a.allocated),
        totals: Totals {
            process: units.totals(&a.process_total),
            activities: units.activities(&a.activity_totals),
            non_activity: units.totals(&a.non_activity),
        },
        ledger: LedgerSection {
            entries: ledger
                .entries
                .iter()
                .map(|e| LedgerRow {
                    source: e.source.clone(),
                    target: e.target.clone(),
                    category: e.category.clone(),
                    scope: e.scope.clone(),
                    amount: e.amount.as_f64(),
                    weight: e.weight.as_f64(),
                })
                .collect(),
            residuals: ledger
                .residuals
                .iter()
                .map(|r| ResidualRow {
                    source: r.source.clone(),
                    category: r.category.clone(),
                    scope: r.scope.clone(),
                    original: r.original.as_f64(),
                    allocated: r.allocated.as_f64(),
                    residual: r.residual.as_f64(),
                })
                .collect(),
            weights: ledger
                .weights
                .iter()
                .flat_map(|(source, ws)| {
                    ws.iter().map(move |(target, w)| WeightRow {
                        source: source.clone(),
                        target: target.clone(),
                        weight: w.as_f64(),
                    })
                })
                .collect(),
            warnings: ledger.warnings.clone(),
        },
        functional_unit: a.per_functional_unit.as_ref().map(|p| FunctionalUnitSection {
            object_type: p.unit.object_type.clone(),
            reference: format_exact(&p.unit.reference.amount),
            unit: p.unit.reference.unit.clone(),
            attribute: p.unit.attribute.clone(),
            measured_output: format_exact(&p.measured_output),
            factor: format_exact(&p.factor),
            inventory: inventory_rows(&p.inventory),
            process: units.totals(&p.process_total),
            activities: units.activities(&p.activity_totals),
        }),
        uncharacterized: a
            .uncharacterized
            .iter()
            .map(|(flow, unit)| FlowUnit { flow: flow.clone(), unit: unit.clone() })
            .collect(),
        warnings: a.warnings.clone(),
    }
}

// Same digits as the JSON document.
fn num(x: f64) -> String {
    serde_json::Number::from_f64(x).map_or_else(|| x.to_string(), |n| n.to_string())
}

fn csv_text<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn inventory_csv(rows: &[InventoryRow]) -> String {
    csv_text(
        ["component_kind", "component_id", "flow", "direction", "scope", "amount", "unit"],
        rows.iter().map(|r| {
            [
                r.component.kind.as_str().to_owned(),
                r.component.id_str().to_owned(),
                r.flow.clone(),
                r.direction.as_str().to_owned(),
                r.scope.clone(),
                r.amount.clone(),
                r.unit.clone(),
            ]
        }),
    )
}

fn impacts_csv(rows: &[ImpactRow]) -> String {
    csv_text(
        ["component_kind", "component_id", "category", "scope", "amount", "unit"],
        rows.iter().map(|r| {
            [
                r.component.kind.as_str().to_owned(),
                r.component.id_str().to_owned(),
                r.category.clone(),
                r.scope.clone(),
                num(r.amount),
                r.unit.clone(),
            ]
        }),
    )
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn inventory_csv(&self) -> String {
        inventory_csv(&self.inventory)
    }

    pub fn impacts_csv(&self) -> String {
        impacts_csv(&self.impacts)
    }

    pub fn allocated_impacts_csv(&self) -> String {
        impacts_csv(&self.allocated_impacts)
    }

    /// Process, per-activity and non-activity totals in one table.
    pub fn totals_csv(&self) -> String {
        let t = &self.totals;
        let row = |level: &str, activity: &str, r: &TotalRow| {
            [level.to_owned(), activity.to_owned(), r.category.clone(), r.scope.clone(), num(r.amount), r.unit.clone()]
        };
        let rows = t
            .process
            .iter()
            .map(|r| row("process", "", r))
            .chain(t.activities.iter().flat_map(|(a, rs)| rs.iter().map(move |r| row("activity", a, r))))
            .chain(t.non_activity.iter().map(|r| row("non_activity", "", r)));
        csv_text(["level", "activity", "category", "scope", "amount", "unit"], rows)
    }

    pub fn ledger_csv(&self) -> String {
        csv_text(
            ["source_kind", "source_id", "target_kind", "target_id", "category", "scope", "amount", "weight"],
            self.ledger.entries.iter().map(|e| {
                [
                    e.source.kind.as_str().to_owned(),
                    e.source.id_str().to_owned(),
                    e.target.kind.as_str().to_owned(),
                    e.target.id_str().to_owned(),
                    e.category.clone(),
                    e.scope.clone(),
                    num(e.amount),
                    num(e.weight),
                ]
            }),
        )
    }

    /// Every CSV projection with its conventional file name.
    pub fn csv_files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("inventory.csv", self.inventory_csv()),
            ("impacts.csv", self.impacts_csv()),
            ("allocated_impacts.csv", self.allocated_impacts_csv()),
            ("totals.csv", self.totals_csv()),
            ("ledger.csv", self.ledger_csv()),
        ]
    }
}
