//! Coverage of the four sustainability analysis patterns.
//!
//! The literature matrix is shipped verbatim as a fixture. The bundle audit
//! is our own operationalization of the criteria on data:
//!
//! * AP1 is full when the bundle has at least one flow assignment.
//! * AP2-X is full when at least one impact of class X was characterized.
//! * AP3-X is full when class-X impacts exist under two or more distinct
//!   scopes other than `unscoped`, and half when under exactly one.
//! * AP4 is full when the allocation ledger has at least one entry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotatedLog, ImpactClass, UNSCOPED};
use crate::error::{Error, Result};
use crate::pipeline::Assessment;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportLevel {
    None,
    Half,
    Full,
}

impl SupportLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            SupportLevel::None => "none",
            SupportLevel::Half => "half",
            SupportLevel::Full => "full",
        }
    }
}

pub const COLUMNS: [&str; 8] =
    ["AP1", "AP2-Climate", "AP2-Env", "AP2-Social", "AP3-Climate", "AP3-Env", "AP3-Social", "AP4"];

fn is_scoping_column(i: usize) -> bool {
    COLUMNS[i].starts_with("AP3")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityRow {
    pub approach: String,
    pub cells: [SupportLevel; 8],
}

impl CapabilityRow {
    pub fn cell(&self, column: &str) -> Option<SupportLevel> {
        COLUMNS.iter().position(|c| *c == column).map(|i| self.cells[i])
    }

    /// True when no cell of `self` is above the same cell of `other`.
    pub fn dominated_by(&self, other: &CapabilityRow) -> bool {
        self.cells.iter().zip(&other.cells).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CapabilityMatrix {
    pub rows: Vec<CapabilityRow>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    columns: Vec<String>,
    rows: Vec<RawRow>,
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    approach: String,
    cells: BTreeMap<String, SupportLevel>,
}

impl TryFrom<RawMatrix> for CapabilityMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        if raw.columns != COLUMNS {
            return Err(Error::Schema(format!("matrix columns must be {COLUMNS:?}, got {:?}", raw.columns)));
        }
        let mut names = BTreeSet::new();
        let rows = raw
            .rows
            .into_iter()
            .map(|r| {
                if r.approach.trim().is_empty() || !names.insert(r.approach.clone()) {
                    return Err(Error::Schema(format!("empty or repeated approach name {:?}", r.approach)));
                }
                if let Some(extra) = r.cells.keys().find(|k| !COLUMNS.contains(&k.as_str())) {
                    return Err(Error::Schema(format!("row {:?} has unknown column {extra:?}", r.approach)));
                }
                let mut cells = [SupportLevel::None; 8];
                for (i, col) in COLUMNS.iter().enumerate() {
                    let level = *r
                        .cells
                        .get(*col)
                        .ok_or_else(|| Error::Schema(format!("row {:?} lacks column {col}", r.approach)))?;
                    if level == SupportLevel::Half && !is_scoping_column(i) {
                        return Err(Error::Schema(format!(
                            "row {:?}: half is only defined for AP3 columns",
                            r.approach
                        )));
                    }
                    cells[i] = level;
                }
                Ok(CapabilityRow { approach: r.approach, cells })
            })
            .collect::<Result<_>>()?;
        Ok(CapabilityMatrix { rows })
    }
}

impl From<CapabilityMatrix> for RawMatrix {
    fn from(m: CapabilityMatrix) -> Self {
        RawMatrix {
            columns: COLUMNS.iter().map(|c| (*c).to_owned()).collect(),
            rows: m
                .rows
                .into_iter()
                .map(|r| RawRow {
                    approach: r.approach,
                    cells: COLUMNS.iter().zip(r.cells).map(|(c, l)| ((*c).to_owned(), l)).collect(),
                })
                .collect(),
        }
    }
}

impl CapabilityMatrix {
    pub fn row(&self, approach: &str) -> Option<&CapabilityRow> {
        self.rows.iter().find(|r| r.approach == approach)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("matrix serialization cannot fail");
        text.push('\n');
        text
    }

    /// Plain-text table, one line per row.
    pub fn render_table(&self) -> String {
        let first = self.rows.iter().map(|r| r.approach.len()).chain(["approach".len()]).max().unwrap_or(8);
        let widths: Vec<usize> = COLUMNS.iter().map(|c| c.len().max(4)).collect();
        let mut out = format!("{:<first$}", "approach");
        for (c, w) in COLUMNS.iter().zip(&widths) {
            let _ = write!(out, "  {c:<w$}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<first$}", r.approach);
            for (l, w) in r.cells.iter().zip(&widths) {
                let _ = write!(out, "  {:<w$}", l.as_str());
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_literature_matrix(document: &[u8]) -> Result<CapabilityMatrix> {
    let value: serde_json::Value = serde_json::from_slice(document)?;
    serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
}

const TABLE1: &str = include_str!("../../../../fixtures/literature/table1.json");

/// The literature review matrix shipped with the crate.
pub fn literature_matrix() -> CapabilityMatrix {
    load_literature_matrix(TABLE1.as_bytes()).expect("embedded matrix is valid")
}

/// Score one annotated log and its assessment against the audit rules.
pub fn pattern_audit<S: Scalar>(approach: &str, al: &AnnotatedLog, results: &Assessment<S>) -> CapabilityRow {
    let full_if = |b: bool| if b { SupportLevel::Full } else { SupportLevel::None };
    let mut scopes: BTreeMap<ImpactClass, BTreeSet<&str>> = BTreeMap::new();
    let mut present: BTreeSet<ImpactClass> = BTreeSet::new();
    for v in results.impacts.values() {
        for (category, scope, _) in v.iter() {
            let Some(info) = results.categories.get(category) else { continue };
            present.insert(info.class);
            if scope != UNSCOPED {
                scopes.entry(info.class).or_default().insert(scope);
            }
        }
    }
    let scoping = |class: ImpactClass| match scopes.get(&class).map_or(0, BTreeSet::len) {
        0 => SupportLevel::None,
        1 => SupportLevel::Half,
        _ => SupportLevel::Full,
    };
    use ImpactClass::*;
    CapabilityRow {
        approach: approach.to_owned(),
        cells: [
            full_if(!al.bundle().assignments.is_empty()),
            full_if(present.contains(&Climate)),
            full_if(present.contains(&Environmental)),
            full_if(present.contains(&Social)),
            scoping(Climate),
            scoping(Environmental),
            scoping(Social),
            full_if(!results.ledger.entries.is_empty()),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SupportLevel::{Full as F, Half as H, None as N};

    #[test]
    fn embedded_matrix_matches_the_review() {
        let m = literature_matrix();
        let expected: [(&str, [SupportLevel; 8]); 6] = [
            ("Houy et al.", [F, N, N, N, N, N, N, N]),
            ("Hoesch-Klohe et al.", [F, F, N, N, H, N, N, F]),
            ("Recker et al.", [F, F, N, N, F, N, N, F]),
            ("Wesumperuma et al.", [F, F, N, N, F, N, N, F]),
            ("Zhu et al.", [F, N, N, N, N, N, N, N]),
            ("Betz", [N, F, F, F, F, F, F, N]),
        ];
        assert_eq!(m.rows.len(), 6);
        for (row, (name, cells)) in m.rows.iter().zip(expected) {
            assert_eq!((row.approach.as_str(), row.cells), (name, cells));
        }
    }

    #[test]
    fn serialization_round_trips() {
        let m = literature_matrix();
        assert_eq!(load_literature_matrix(m.to_json().as_bytes()).unwrap(), m);
    }

    #[test]
    fn half_outside_scoping_is_rejected() {
        let doc = literature_matrix().to_json().replacen("\"AP1\": \"full\"", "\"AP1\": \"half\"", 1);
        assert!(matches!(load_literature_matrix(doc.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_column_is_rejected() {
        let mut m: serde_json::Value = serde_json::from_str(&literature_matrix().to_json()).unwrap();
        m["rows"][0]["cells"].as_object_mut().unwrap().remove("AP4");
        assert!(matches!(load_literature_matrix(m.to_string().as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn table_lists_every_row() {
        let text = literature_matrix().render_table();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(2).unwrap().starts_with("Hoesch-Klohe et al."));
    }

    #[test]
    fn levels_are_ordered() {
        assert!(N < H && H < F);
    }
}
