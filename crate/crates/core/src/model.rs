//! Object-centric log data model and reference resolution.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar attribute value on an event or object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl AttrValue {
    /// Numeric view. Text is accepted when it parses as a finite number.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Number(x) if x.is_finite() => Some(*x),
            AttrValue::Text(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
            _ => None,
        }
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

/// An activity instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: String,
    pub object_type: String,
    pub attributes: Attributes,
}

/// Qualified event-to-object relation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Relation {
    pub event_id: String,
    pub object_id: String,
    pub qualifier: String,
}

/// Immutable object-centric event log.
///
/// The log may violate its own invariants (duplicate ids, dangling relations)
/// so that lenient ingest can load dirty data; [`validate_log`] reports them.
/// Lookups resolve to the first entity carrying an id.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    activity_types: BTreeSet<String>,
    object_types: BTreeSet<String>,
    events: Vec<Event>,
    objects: Vec<ObjectInstance>,
    relations: Vec<Relation>,
    event_index: HashMap<String, usize>,
    object_index: HashMap<String, usize>,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.activity_types == other.activity_types
            && self.object_types == other.object_types
            && self.events == other.events
            && self.objects == other.objects
            && self.relations == other.relations
    }
}

impl EventLog {
    pub fn new(
        activity_types: BTreeSet<String>,
        object_types: BTreeSet<String>,
        events: Vec<Event>,
        objects: Vec<ObjectInstance>,
        relations: Vec<Relation>,
    ) -> Self {
        let mut event_index = HashMap::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            event_index.entry(e.id.clone()).or_insert(i);
        }
        let mut object_index = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            object_index.entry(o.id.clone()).or_insert(i);
        }
        EventLog { activity_types, object_types, events, objects, relations, event_index, object_index }
    }

    pub fn activity_types(&self) -> &BTreeSet<String> {
        &self.activity_types
    }

    pub fn object_types(&self) -> &BTreeSet<String> {
        &self.object_types
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.event_index.get(id).map(|&i| &self.events[i])
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.object_index.get(id).map(|&i| &self.objects[i])
    }

    /// Events ordered by `(timestamp, event_id)`.
    pub fn events_sorted(&self) -> Vec<&Event> {
        let mut sorted: Vec<&Event> = self.events.iter().collect();
        sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        sorted
    }

    pub fn events_of_activity<'a>(&'a self, activity: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.activity == activity)
    }

    pub fn objects_of_type<'a>(&'a self, object_type: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.iter().filter(move |o| o.object_type == object_type)
    }

    /// Every component reference this log can resolve, in a deterministic order.
    pub fn components(&self) -> Vec<ComponentRef> {
        let mut out = vec![ComponentRef::process()];
        out.extend(self.activity_types.iter().map(|a| ComponentRef::activity_type(a)));
        let mut events: Vec<&str> = self.event_index.keys().map(String::as_str).collect();
        events.sort_unstable();
        out.extend(events.into_iter().map(ComponentRef::activity_instance));
        out.extend(self.object_types.iter().map(|t| ComponentRef::object_type(t)));
        let mut objects: Vec<&str> = self.object_index.keys().map(String::as_str).collect();
        objects.sort_unstable();
        out.extend(objects.into_iter().map(ComponentRef::object_instance));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Process,
    ActivityType,
    ActivityInstance,
    ObjectType,
    ObjectInstance,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Process => "process",
            ComponentKind::ActivityType => "activity_type",
            ComponentKind::ActivityInstance => "activity_instance",
            ComponentKind::ObjectType => "object_type",
            ComponentKind::ObjectInstance => "object_instance",
        }
    }

    pub fn is_type_level(self) -> bool {
        matches!(self, ComponentKind::ActivityType | ComponentKind::ObjectType)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference to a process component. `id` is absent only for the process.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentRef {
    pub kind: ComponentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ComponentRef {
    pub fn process() -> Self {
        ComponentRef { kind: ComponentKind::Process, id: None }
    }

    fn with(kind: ComponentKind, id: &str) -> Self {
        ComponentRef { kind, id: Some(id.to_owned()) }
    }

    pub fn activity_type(id: &str) -> Self {
        Self::with(ComponentKind::ActivityType, id)
    }

    pub fn activity_instance(id: &str) -> Self {
        Self::with(ComponentKind::ActivityInstance, id)
    }

    pub fn object_type(id: &str) -> Self {
        Self::with(ComponentKind::ObjectType, id)
    }

    pub fn object_instance(id: &str) -> Self {
        Self::with(ComponentKind::ObjectInstance, id)
    }

    pub fn id_str(&self) -> &str {
        self.id.as_deref().unwrap_or("")
    }
}

impl fmt::Display for ComponentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "{}:{}", self.kind, id),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// A resolved component borrowed from its log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component<'a> {
    Process(&'a EventLog),
    ActivityType(&'a str),
    ActivityInstance(&'a Event),
    ObjectType(&'a str),
    ObjectInstance(&'a ObjectInstance),
}

impl Component<'_> {
    pub fn attributes(&self) -> Option<&Attributes> {
        match self {
            Component::ActivityInstance(e) => Some(&e.attributes),
            Component::ObjectInstance(o) => Some(&o.attributes),
            _ => None,
        }
    }
}

pub fn resolve_component<'a>(reference: &ComponentRef, log: &'a EventLog) -> Result<Component<'a>> {
    let unknown = || Error::UnknownComponent(reference.clone());
    if reference.kind == ComponentKind::Process {
        return Ok(Component::Process(log));
    }
    let id = reference.id.as_deref().ok_or_else(unknown)?;
    match reference.kind {
        ComponentKind::Process => unreachable!(),
        ComponentKind::ActivityType => {
            log.activity_types.get(id).map(|s| Component::ActivityType(s.as_str())).ok_or_else(unknown)
        }
        ComponentKind::ActivityInstance => log.event(id).map(Component::ActivityInstance).ok_or_else(unknown),
        ComponentKind::ObjectType => {
            log.object_types.get(id).map(|s| Component::ObjectType(s.as_str())).ok_or_else(unknown)
        }
        ComponentKind::ObjectInstance => log.object(id).map(Component::ObjectInstance).ok_or_else(unknown),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyEventId,
    EmptyObjectId,
    DuplicateEventId,
    DuplicateObjectId,
    UndeclaredActivity,
    UndeclaredObjectType,
    MissingEvent,
    MissingObject,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    /// Id of the offending entity.
    pub location: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_log(log: &EventLog) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |location: &str, kind, message: String| {
        violations.push(Violation { location: location.to_owned(), kind, message });
    };

    let mut seen = HashMap::new();
    for e in &log.events {
        if e.id.is_empty() {
            push("", ViolationKind::EmptyEventId, format!("event of activity {:?} has an empty id", e.activity));
        }
        *seen.entry(e.id.as_str()).or_insert(0usize) += 1;
        if !log.activity_types.contains(&e.activity) {
            push(
                &e.id,
                ViolationKind::UndeclaredActivity,
                format!("event {:?} has undeclared activity {:?}", e.id, e.activity),
            );
        }
    }
    for (id, n) in &seen {
        if *n > 1 && !id.is_empty() {
            push(id, ViolationKind::DuplicateEventId, format!("event id {id:?} occurs {n} times"));
        }
    }

    let mut seen = HashMap::new();
    for o in &log.objects {
        if o.id.is_empty() {
            push("", ViolationKind::EmptyObjectId, format!("object of type {:?} has an empty id", o.object_type));
        }
        *seen.entry(o.id.as_str()).or_insert(0usize) += 1;
        if !log.object_types.contains(&o.object_type) {
            push(
                &o.id,
                ViolationKind::UndeclaredObjectType,
                format!("object {:?} has undeclared type {:?}", o.id, o.object_type),
            );
        }
    }
    for (id, n) in &seen {
        if *n > 1 && !id.is_empty() {
            push(id, ViolationKind::DuplicateObjectId, format!("object id {id:?} occurs {n} times"));
        }
    }

    for r in &log.relations {
        if !log.event_index.contains_key(&r.event_id) {
            push(
                &r.event_id,
                ViolationKind::MissingEvent,
                format!("relation references missing event {:?}", r.event_id),
            );
        }
        if !log.object_index.contains_key(&r.object_id) {
            push(
                &r.object_id,
                ViolationKind::MissingObject,
                format!("relation from event {:?} references missing object {:?}", r.event_id, r.object_id),
            );
        }
    }

    violations.sort();
    violations.dedup();
    ValidationReport { violations }
}
