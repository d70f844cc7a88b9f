//! Reader and writer for the supported OCEL 2.0 JSON subset.
//!
//! Accepted top-level keys are `objectTypes`, `eventTypes`, `objects` and
//! `events`; event-to-object relations are embedded per event as a
//! `relationships` array of `{objectId, qualifier}`. Unknown keys are ignored.
//! See `docs/ocel-subset.md` for the grammar.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_log, AttrValue, Attributes, Event, EventLog, ObjectInstance, Relation, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Serialize, Deserialize)]
struct RawLog {
    #[serde(rename = "objectTypes")]
    object_types: Vec<RawType>,
    #[serde(rename = "eventTypes")]
    event_types: Vec<RawType>,
    objects: Vec<RawObject>,
    events: Vec<RawEvent>,
}

#[derive(Serialize, Deserialize)]
struct RawType {
    name: String,
    #[serde(default)]
    attributes: Vec<RawTypeAttribute>,
}

#[derive(Serialize, Deserialize)]
struct RawTypeAttribute {
    name: String,
    #[serde(rename = "type")]
    value_type: String,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: String,
    #[serde(rename = "type")]
    object_type: String,
    #[serde(default)]
    attributes: Vec<RawAttribute>,
}

#[derive(Serialize, Deserialize)]
struct RawAttribute {
    name: String,
    value: AttrValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEvent {
    id: String,
    #[serde(rename = "type")]
    activity: String,
    time: String,
    #[serde(default)]
    attributes: Vec<RawAttribute>,
    #[serde(default)]
    relationships: Vec<RawRelationship>,
}

#[derive(Serialize, Deserialize)]
struct RawRelationship {
    #[serde(rename = "objectId")]
    object_id: String,
    #[serde(default)]
    qualifier: String,
}

/// Parsed log plus the invariant violations tolerated in lenient mode.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: EventLog,
    pub warnings: Vec<Violation>,
}

pub fn parse_timestamp(text: &str) -> Result<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.with_timezone(&Utc));
    }
    // Offset-less timestamps are read as UTC.
    NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S%.f"))
        .map(|t| t.and_utc())
        .map_err(|_| Error::Schema(format!("unparseable timestamp {text:?}")))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

// Later entries win for repeated attribute names (time-varying object attributes).
fn collect_attributes(raw: Vec<RawAttribute>) -> Attributes {
    raw.into_iter().map(|a| (a.name, a.value)).collect()
}

pub fn parse_ocel(document: &[u8], mode: Mode) -> Result<Ingested> {
    let value: serde_json::Value = serde_json::from_slice(document)?;
    let raw: RawLog = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;

    let activity_types: BTreeSet<String> = raw.event_types.into_iter().map(|t| t.name).collect();
    let object_types: BTreeSet<String> = raw.object_types.into_iter().map(|t| t.name).collect();

    let objects = raw
        .objects
        .into_iter()
        .map(|o| ObjectInstance { id: o.id, object_type: o.object_type, attributes: collect_attributes(o.attributes) })
        .collect();

    let mut events = Vec::with_capacity(raw.events.len());
    let mut relations = Vec::new();
    for e in raw.events {
        let timestamp = parse_timestamp(&e.time)?;
        relations.extend(e.relationships.into_iter().map(|r| Relation {
            event_id: e.id.clone(),
            object_id: r.object_id,
            qualifier: r.qualifier,
        }));
        events.push(Event { id: e.id, activity: e.activity, timestamp, attributes: collect_attributes(e.attributes) });
    }

    let log = EventLog::new(activity_types, object_types, events, objects, relations);
    let report = validate_log(&log);
    if mode == Mode::Strict && !report.is_valid() {
        return Err(Error::Integrity(report.violations.iter().map(ToString::to_string).collect()));
    }
    Ok(Ingested { log, warnings: report.violations })
}

fn raw_attributes(attrs: &Attributes) -> Vec<RawAttribute> {
    attrs.iter().map(|(k, v)| RawAttribute { name: k.clone(), value: v.clone(), time: None }).collect()
}

/// Serialize a log back into the OCEL subset (pretty-printed, deterministic).
pub fn write_ocel(log: &EventLog) -> String {
    let mut by_event: BTreeMap<&str, Vec<RawRelationship>> = BTreeMap::new();
    for r in log.relations() {
        by_event
            .entry(r.event_id.as_str())
            .or_default()
            .push(RawRelationship { object_id: r.object_id.clone(), qualifier: r.qualifier.clone() });
    }
    let raw = RawLog {
        object_types: log.object_types().iter().map(|n| RawType { name: n.clone(), attributes: vec![] }).collect(),
        event_types: log.activity_types().iter().map(|n| RawType { name: n.clone(), attributes: vec![] }).collect(),
        objects: log
            .objects()
            .iter()
            .map(|o| RawObject {
                id: o.id.clone(),
                object_type: o.object_type.clone(),
                attributes: raw_attributes(&o.attributes),
            })
            .collect(),
        events: log
            .events()
            .iter()
            .map(|e| RawEvent {
                id: e.id.clone(),
                activity: e.activity.clone(),
                time: format_timestamp(&e.timestamp),
                attributes: raw_attributes(&e.attributes),
                // Relations of a duplicated event id are emitted once, on its first occurrence.
                relationships: if log.event(&e.id).is_some_and(|first| std::ptr::eq(first, e)) {
                    by_event.remove(e.id.as_str()).unwrap_or_default()
                } else {
                    Vec::new()
                },
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("log serialization cannot fail");
    text.push('\n');
    text
}

/// Hex SHA-256 of the canonical serialization.
pub fn log_digest(log: &EventLog) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(write_ocel(log).as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSummary {
    pub event_count: usize,
    pub object_count: usize,
    pub relation_count: usize,
    pub events_per_activity: BTreeMap<String, usize>,
    pub objects_per_type: BTreeMap<String, usize>,
}

pub fn log_summary(log: &EventLog) -> LogSummary {
    let mut summary = LogSummary {
        event_count: log.events().len(),
        object_count: log.objects().len(),
        relation_count: log.relations().len(),
        ..Default::default()
    };
    for e in log.events() {
        *summary.events_per_activity.entry(e.activity.clone()).or_default() += 1;
    }
    for o in log.objects() {
        *summary.objects_per_type.entry(o.object_type.clone()).or_default() += 1;
    }
    summary
}
