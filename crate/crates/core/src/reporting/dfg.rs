//! Directly-follows graph with one trace per object.
//!
//! Events related to an object, ordered by (timestamp, event id), form that
//! object's trace. Flattening this way can show spurious successions between
//! activities that merely share an object; see the docs for the caveat.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::annotation::CategoryInfo;
use crate::error::{Error, Result};
use crate::model::EventLog;
use crate::ocel::log_digest;
use crate::pipeline::Assessment;
use crate::scalar::Scalar;
use crate::scoping::ScopedImpactVector;

#[derive(Debug, Clone, PartialEq)]
pub struct DfgNode<S = f64> {
    pub event_count: usize,
    pub impacts: ScopedImpactVector<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDfg<S = f64> {
    pub digest: String,
    pub nodes: BTreeMap<String, DfgNode<S>>,
    /// Number of consecutive event pairs over all object traces.
    pub edges: BTreeMap<(String, String), usize>,
    /// Impact unit per category, used in labels.
    pub units: BTreeMap<String, String>,
}

impl<S: Scalar> AnnotatedDfg<S> {
    pub fn event_count(&self) -> usize {
        self.nodes.values().map(|n| n.event_count).sum()
    }

    pub fn impact_total(&self) -> ScopedImpactVector<S> {
        let mut total = ScopedImpactVector::new();
        for n in self.nodes.values() {
            total.merge(&n.impacts);
        }
        total
    }
}

/// Graph skeleton: event counts and edges, no impacts yet.
pub fn build_dfg<S: Scalar>(log: &EventLog) -> AnnotatedDfg<S> {
    let mut nodes: BTreeMap<String, DfgNode<S>> = log
        .activity_types()
        .iter()
        .map(|a| (a.clone(), DfgNode { event_count: 0, impacts: ScopedImpactVector::new() }))
        .collect();
    for e in log.events() {
        nodes
            .entry(e.activity.clone())
            .or_insert_with(|| DfgNode { event_count: 0, impacts: ScopedImpactVector::new() })
            .event_count += 1;
    }

    let mut traces: BTreeMap<&str, BTreeSet<(chrono::DateTime<chrono::Utc>, &str)>> = BTreeMap::new();
    for r in log.relations() {
        if let Some(e) = log.event(&r.event_id) {
            traces.entry(r.object_id.as_str()).or_default().insert((e.timestamp, e.id.as_str()));
        }
    }
    let mut edges: BTreeMap<(String, String), usize> = BTreeMap::new();
    for trace in traces.values() {
        let activities: Vec<&str> =
            trace.iter().map(|(_, id)| log.event(id).expect("trace holds known events").activity.as_str()).collect();
        for pair in activities.windows(2) {
            *edges.entry((pair[0].to_owned(), pair[1].to_owned())).or_default() += 1;
        }
    }
    AnnotatedDfg { digest: log_digest(log), nodes, edges, units: BTreeMap::new() }
}

/// Attach post-allocation activity-type totals to the nodes.
pub fn annotate_dfg<S: Scalar>(mut dfg: AnnotatedDfg<S>, results: &Assessment<S>) -> Result<AnnotatedDfg<S>> {
    if dfg.digest != results.digest {
        return Err(Error::LogMismatch { expected: dfg.digest, found: results.digest.clone() });
    }
    for (activity, v) in &results.activity_totals {
        dfg.nodes
            .entry(activity.clone())
            .or_insert_with(|| DfgNode { event_count: 0, impacts: ScopedImpactVector::new() })
            .impacts = v.clone();
    }
    dfg.units = results
        .categories
        .iter()
        .map(|(c, CategoryInfo { impact_unit, .. })| (c.clone(), impact_unit.clone()))
        .collect();
    Ok(dfg)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn emit_dot<S: Scalar>(dfg: &AnnotatedDfg<S>) -> String {
    if dfg.nodes.is_empty() {
        return "digraph {}\n".to_owned();
    }
    let mut out = String::from("digraph {\n  rankdir=LR;\n  node [shape=box];\n");
    for (activity, node) in &dfg.nodes {
        let mut label = format!("{activity}\nevents: {}", node.event_count);
        for (category, scope, amount) in node.impacts.iter() {
            let unit = dfg.units.get(category).map(String::as_str).unwrap_or("");
            let _ = write!(label, "\n{category} [{scope}]: {amount} {unit}");
        }
        let _ = writeln!(out, "  {} [label={}];", quote(activity), quote(label.trim_end()));
    }
    for ((a, b), freq) in &dfg.edges {
        let _ = writeln!(out, "  {} -> {} [label=\"{freq}\"];", quote(a), quote(b));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocel::{parse_ocel, Mode};

    fn log(doc: &str) -> EventLog {
        parse_ocel(doc.as_bytes(), Mode::Strict).unwrap().log
    }

    const PACK_SHIP: &str = r#"{"objectTypes": [{"name": "order"}], "eventTypes": [{"name": "pack"}, {"name": "ship"}],
        "objects": [{"id": "o1", "type": "order"}],
        "events": [
            {"id": "e2", "type": "ship", "time": "2024-01-01T09:00:00Z", "relationships": [{"objectId": "o1"}]},
            {"id": "e1", "type": "pack", "time": "2024-01-01T08:00:00Z", "relationships": [{"objectId": "o1"}]}]}"#;

    #[test]
    fn single_trace_gives_one_edge() {
        let g = build_dfg::<f64>(&log(PACK_SHIP));
        assert_eq!(g.edges, BTreeMap::from([(("pack".into(), "ship".into()), 1)]));
        assert_eq!(g.event_count(), 2);
    }

    #[test]
    fn empty_log_gives_empty_graph() {
        let g = build_dfg::<f64>(&EventLog::default());
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert_eq!(emit_dot(&g), "digraph {}\n");
    }

    #[test]
    fn objectless_events_are_isolated_nodes() {
        let doc = PACK_SHIP.replace(r#", "relationships": [{"objectId": "o1"}]"#, "");
        let g = build_dfg::<f64>(&log(&doc));
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes.len(), 2);
    }

    #[test]
    fn dot_labels_carry_amounts() {
        let mut g = build_dfg::<f64>(&log(PACK_SHIP));
        g.nodes.get_mut("pack").unwrap().impacts.add("climate_change", "scope1", 5.0);
        g.units.insert("climate_change".into(), "kg CO2e".into());
        let dot = emit_dot(&g);
        assert!(dot.contains("\"pack\" [label=\"pack\\nevents: 1\\nclimate_change [scope1]: 5 kg CO2e\"]"), "{dot}");
        assert!(dot.contains("\"pack\" -> \"ship\" [label=\"1\"]"));
        assert_eq!(dot, emit_dot(&g));
    }

    #[test]
    fn names_are_escaped() {
        assert_eq!(quote("a\"b\\c"), "\"a\\\"b\\\\c\"");
    }
}
