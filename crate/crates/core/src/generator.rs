//! Seeded synthetic logs and annotation bundles with exact ground truth.
//!
//! The only source of randomness is ChaCha8 seeded through
//! `ChaCha8Rng::seed_from_u64(seed)`, so every output byte is a function of
//! the configuration. Ground truth is summed in exact rationals directly from
//! the generated data, independently of the analysis pipeline.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationKey, AllocationRule, TargetSelector};
use crate::annotation::{
    write_annotations, AnnotationBundle, Basis, CategoryInfo, CharacterizationTable, Direction, Factor, FlowAssignment,
    ImpactClass, ScopeSet, UNSCOPED,
};
use crate::model::{AttrValue, ComponentKind, ComponentRef, Event, EventLog, ObjectInstance, Relation};
use crate::ocel::{log_summary, write_ocel, LogSummary};
use crate::scalar::{format_exact, parse_decimal, Amount, Exact};
use crate::unitreg::Quantity;

pub const TRUTH_SCHEMA: &str = "susmine-truth/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Number of events; 0 yields an empty log and an assignment-free bundle.
    pub size: usize,
    /// Draw allocation fractions from {0, 0.1, ..., 1} instead of always 1.
    pub partial_allocation: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { seed: 1, size: 50, partial_allocation: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFlow {
    pub flow: String,
    pub direction: Direction,
    pub scope: String,
    pub unit: String,
    pub amount: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthImpact {
    pub category: String,
    pub scope: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub seed: u64,
    pub size: usize,
    pub summary: LogSummary,
    /// Process-level inventory.
    pub inventory: Vec<TruthFlow>,
    /// Process totals per (category, scope); unchanged by allocation.
    pub impacts: Vec<TruthImpact>,
    /// Per activity type, after allocation.
    pub activity_impacts: BTreeMap<String, Vec<TruthImpact>>,
    /// Left on objects and the process after allocation; zero entries omitted.
    pub non_activity_impacts: Vec<TruthImpact>,
    /// Amount moved by allocation rules per (category, scope).
    pub allocated: Vec<TruthImpact>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub log: String,
    pub annotations: String,
    pub truth: GroundTruth,
}

impl Generated {
    pub fn truth_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.truth).expect("truth serialization cannot fail");
        text.push('\n');
        text
    }
}

const ACTIVITIES: [&str; 8] = ["receive", "pick", "pack", "ship", "invoice", "inspect", "produce", "repair"];
const OBJECT_TYPES: [&str; 5] = ["order", "item", "machine", "truck", "pallet"];
const QUALIFIERS: [&str; 3] = ["uses", "handles", "creates"];

struct FlowSpec {
    flow: &'static str,
    unit: &'static str,
    /// Alternative unit and its size in `unit`.
    alt: Option<(&'static str, &'static str)>,
    direction: Direction,
    factors: &'static [(&'static str, &'static str)],
}

const FLOWS: [FlowSpec; 8] = [
    FlowSpec {
        flow: "CO2",
        unit: "kg",
        alt: Some(("g", "0.001")),
        direction: Direction::Output,
        factors: &[("climate_change", "1")],
    },
    FlowSpec {
        flow: "CH4",
        unit: "kg",
        alt: Some(("g", "0.001")),
        direction: Direction::Output,
        factors: &[("climate_change", "28")],
    },
    FlowSpec {
        flow: "electricity",
        unit: "kWh",
        alt: Some(("Wh", "0.001")),
        direction: Direction::Input,
        factors: &[("climate_change", "0.4")],
    },
    FlowSpec {
        flow: "diesel",
        unit: "kg",
        alt: None,
        direction: Direction::Input,
        factors: &[("climate_change", "3.17"), ("acidification", "0.012")],
    },
    FlowSpec {
        flow: "CFC-11",
        unit: "kg",
        alt: None,
        direction: Direction::Output,
        factors: &[("ozone_depletion", "1")],
    },
    FlowSpec {
        flow: "R22",
        unit: "kg",
        alt: Some(("g", "0.001")),
        direction: Direction::Output,
        factors: &[("ozone_depletion", "0.034")],
    },
    FlowSpec { flow: "SO2", unit: "kg", alt: None, direction: Direction::Output, factors: &[("acidification", "1")] },
    FlowSpec {
        flow: "accident_exposure",
        unit: "h",
        alt: None,
        direction: Direction::Input,
        factors: &[("work_accidents", "0.0000025")],
    },
];

const CATEGORIES: [(&str, &str, ImpactClass); 4] = [
    ("climate_change", "kg CO2e", ImpactClass::Climate),
    ("ozone_depletion", "kg CFCe", ImpactClass::Environmental),
    ("acidification", "kg SO2e", ImpactClass::Environmental),
    ("work_accidents", "accidents", ImpactClass::Social),
];

fn d(s: &str) -> Exact {
    parse_decimal(s).expect("constant decimal")
}

fn table() -> CharacterizationTable {
    let mut t = CharacterizationTable::default();
    for (name, unit, class) in CATEGORIES {
        t.add_category(name, CategoryInfo { impact_unit: unit.into(), class }).expect("distinct categories");
    }
    for f in &FLOWS {
        for (cat, value) in f.factors {
            t.add_factor(f.flow, f.unit, cat, Factor { value: d(value), direction: None }).expect("declared category");
        }
    }
    t
}

type ScopedExact = BTreeMap<(String, String), Exact>;

fn add_to(map: &mut ScopedExact, category: &str, scope: &str, x: &Exact) {
    *map.entry((category.to_owned(), scope.to_owned())).or_insert_with(Exact::zero) += x;
}

fn to_truth(map: &ScopedExact, keep_zero: bool) -> Vec<TruthImpact> {
    map.iter()
        .filter(|(_, v)| keep_zero || !v.is_zero())
        .map(|((c, s), v)| TruthImpact { category: c.clone(), scope: s.clone(), amount: v.as_f64() })
        .collect()
}

struct LogParts {
    activities: Vec<&'static str>,
    object_types: Vec<&'static str>,
    events: Vec<Event>,
    objects: Vec<ObjectInstance>,
    relations: Vec<Relation>,
}

fn number(x: u32) -> AttrValue {
    AttrValue::Number(f64::from(x))
}

fn generate_log(rng: &mut ChaCha8Rng, size: usize) -> LogParts {
    if size == 0 {
        return LogParts {
            activities: vec![],
            object_types: vec![],
            events: vec![],
            objects: vec![],
            relations: vec![],
        };
    }
    let mut activities = ACTIVITIES.to_vec();
    activities.shuffle(rng);
    activities.truncate(rng.gen_range(1..=ACTIVITIES.len().min(size)));
    activities.sort_unstable();
    let mut object_types = OBJECT_TYPES.to_vec();
    object_types.shuffle(rng);
    object_types.truncate(rng.gen_range(1..=OBJECT_TYPES.len()));
    object_types.sort_unstable();

    let objects: Vec<ObjectInstance> = (0..(size / 2).max(1))
        .map(|i| ObjectInstance {
            id: format!("o{i:04}"),
            object_type: (*object_types.choose(rng).expect("non-empty")).to_owned(),
            attributes: BTreeMap::from([
                ("mass_kg".to_owned(), number(rng.gen_range(0..=40))),
                ("economic_value".to_owned(), number(rng.gen_range(0..=200))),
            ]),
        })
        .collect();

    let base: DateTime<Utc> = DateTime::from_timestamp(1_704_067_200, 0).expect("valid epoch");
    let mut t = base;
    let mut events = Vec::with_capacity(size);
    let mut relations = Vec::new();
    for i in 0..size {
        t += Duration::seconds(rng.gen_range(0..=120));
        let id = format!("e{i:04}");
        let related = rng.gen_range(0..=3usize.min(objects.len()));
        for o in objects.choose_multiple(rng, related) {
            relations.push(Relation {
                event_id: id.clone(),
                object_id: o.id.clone(),
                qualifier: (*QUALIFIERS.choose(rng).expect("non-empty")).to_owned(),
            });
        }
        events.push(Event {
            id,
            activity: (*activities.choose(rng).expect("non-empty")).to_owned(),
            timestamp: t,
            attributes: BTreeMap::from([
                ("mass_kg".to_owned(), number(rng.gen_range(0..=20))),
                ("economic_value".to_owned(), number(rng.gen_range(0..=100))),
            ]),
        });
    }
    // Every object takes part in at least one event.
    let related: BTreeSet<&str> = relations.iter().map(|r| r.object_id.as_str()).collect();
    let lonely: Vec<String> =
        objects.iter().filter(|o| !related.contains(o.id.as_str())).map(|o| o.id.clone()).collect();
    for object_id in lonely {
        let e = events.choose(rng).expect("size > 0");
        relations.push(Relation { event_id: e.id.clone(), object_id, qualifier: QUALIFIERS[0].to_owned() });
    }
    LogParts { activities, object_types, events, objects, relations }
}

fn pick_component(rng: &mut ChaCha8Rng, parts: &LogParts) -> (ComponentRef, Basis) {
    let basis = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { Basis::PerInstance } else { Basis::Absolute };
    match rng.gen_range(0..100) {
        0..=39 => (ComponentRef::activity_instance(&parts.events.choose(rng).expect("non-empty").id), Basis::Absolute),
        40..=54 => (ComponentRef::activity_type(parts.activities.choose(rng).expect("non-empty")), basis(rng)),
        55..=74 => (ComponentRef::object_instance(&parts.objects.choose(rng).expect("non-empty").id), Basis::Absolute),
        75..=89 => {
            // Only types that have instances, so related-event allocation finds targets.
            let ty = &parts.objects.choose(rng).expect("non-empty").object_type;
            (ComponentRef::object_type(ty), basis(rng))
        }
        _ => (ComponentRef::process(), Basis::Absolute),
    }
}

fn generate_bundle(rng: &mut ChaCha8Rng, parts: &LogParts, config: &GeneratorConfig) -> AnnotationBundle {
    let scope_set = if rng.gen_bool(0.75) { ScopeSet::ghg() } else { ScopeSet::lca() };
    let mut assignments = Vec::with_capacity(config.size);
    for _ in 0..config.size {
        let (component, basis) = pick_component(rng, parts);
        let spec = FLOWS.choose(rng).expect("non-empty");
        let unit = match spec.alt {
            Some((alt, _)) if rng.gen_bool(0.25) => alt,
            _ => spec.unit,
        };
        let amount = Exact::new(rng.gen_range(0..=99_999i64).into(), 1000.into());
        let scope = (!rng.gen_bool(0.2)).then(|| scope_set.scopes.choose(rng).expect("non-empty").clone());
        assignments.push(FlowAssignment {
            component,
            flow: spec.flow.to_owned(),
            direction: spec.direction,
            quantity: Quantity::new(amount, unit),
            scope,
            basis,
            override_type_level: false,
        });
    }

    let mut rules = Vec::new();
    let sources: BTreeSet<ComponentRef> = resolve(parts, &assignments)
        .into_iter()
        .map(|(target, _)| target)
        .filter(|t| !matches!(t.kind, ComponentKind::ActivityInstance | ComponentKind::ActivityType))
        .collect();
    for source in sources {
        let targets = if source.kind == ComponentKind::Process {
            let n = rng.gen_range(1..=3usize.min(parts.events.len()));
            TargetSelector::Explicit(
                parts.events.choose_multiple(rng, n).map(|e| ComponentRef::activity_instance(&e.id)).collect(),
            )
        } else {
            TargetSelector::RelatedEvents
        };
        let key = [AllocationKey::Equal, AllocationKey::Mass, AllocationKey::EconomicValue]
            .choose(rng)
            .expect("non-empty")
            .clone();
        let fraction = if config.partial_allocation {
            Exact::new(rng.gen_range(0..=10i64).into(), 10.into())
        } else {
            Exact::one()
        };
        rules.push(AllocationRule { source, targets, qualifiers: vec![], key, fraction });
    }

    AnnotationBundle { scope_set, table: table(), assignments, rules, ..AnnotationBundle::default() }
}

/// Concrete targets of each assignment, per-instance bases expanded.
fn resolve<'a>(parts: &LogParts, assignments: &'a [FlowAssignment]) -> Vec<(ComponentRef, &'a FlowAssignment)> {
    let mut out = Vec::new();
    for a in assignments {
        match (a.basis, a.component.kind) {
            (Basis::PerInstance, ComponentKind::ActivityType) => out.extend(
                parts
                    .events
                    .iter()
                    .filter(|e| e.activity == a.component.id_str())
                    .map(|e| (ComponentRef::activity_instance(&e.id), a)),
            ),
            (Basis::PerInstance, ComponentKind::ObjectType) => out.extend(
                parts
                    .objects
                    .iter()
                    .filter(|o| o.object_type == a.component.id_str())
                    .map(|o| (ComponentRef::object_instance(&o.id), a)),
            ),
            _ => out.push((a.component.clone(), a)),
        }
    }
    out
}

fn conversion(spec: &FlowSpec, unit: &str) -> Exact {
    match spec.alt {
        Some((alt, size)) if alt == unit => d(size),
        _ => Exact::one(),
    }
}

fn allocation_targets(parts: &LogParts, rule: &AllocationRule) -> Vec<ComponentRef> {
    let ids: BTreeSet<&str> = match &rule.targets {
        TargetSelector::Explicit(list) => return list.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
        TargetSelector::RelatedEvents => {
            let objects: BTreeSet<&str> = parts
                .objects
                .iter()
                .filter(|o| match rule.source.kind {
                    ComponentKind::ObjectInstance => o.id == rule.source.id_str(),
                    _ => o.object_type == rule.source.id_str(),
                })
                .map(|o| o.id.as_str())
                .collect();
            parts
                .relations
                .iter()
                .filter(|r| objects.contains(r.object_id.as_str()))
                .map(|r| r.event_id.as_str())
                .collect()
        }
    };
    ids.into_iter().map(ComponentRef::activity_instance).collect()
}

fn exact_weights(parts: &LogParts, rule: &AllocationRule, targets: &[ComponentRef]) -> Vec<Exact> {
    let n = Exact::from_integer((targets.len() as i64).into());
    let equal = vec![Exact::one() / &n; targets.len()];
    let Some(attribute) = rule.key.attribute() else { return equal };
    let values: Vec<Exact> = targets
        .iter()
        .map(|t| {
            let e = parts.events.iter().find(|e| e.id == t.id_str()).expect("target event exists");
            let x = e.attributes[attribute].as_f64().expect("numeric key");
            Exact::from_integer((x as i64).into())
        })
        .collect();
    let total: Exact = values.iter().cloned().sum();
    if total.is_zero() {
        return equal;
    }
    values.into_iter().map(|v| v / &total).collect()
}

fn ground_truth(parts: &LogParts, bundle: &AnnotationBundle, log: &EventLog, config: &GeneratorConfig) -> GroundTruth {
    let resolved = resolve(parts, &bundle.assignments);

    let mut inventory: BTreeMap<(String, Direction, String, String), Exact> = BTreeMap::new();
    let mut by_component: BTreeMap<ComponentRef, ScopedExact> = BTreeMap::new();
    for (target, a) in &resolved {
        let amount = &a.quantity.amount;
        let scope = a.scope.as_deref().unwrap_or(UNSCOPED);
        *inventory
            .entry((a.flow.clone(), a.direction, scope.to_owned(), a.quantity.unit.clone()))
            .or_insert_with(Exact::zero) += amount;
        let spec = FLOWS.iter().find(|f| f.flow == a.flow).expect("generated flow");
        let in_table_unit = amount * conversion(spec, &a.quantity.unit);
        for (cat, factor) in spec.factors {
            add_to(by_component.entry(target.clone()).or_default(), cat, scope, &(&in_table_unit * d(factor)));
        }
    }

    let mut process = ScopedExact::new();
    for v in by_component.values() {
        for ((c, s), x) in v {
            add_to(&mut process, c, s, x);
        }
    }

    let mut after = by_component.clone();
    let mut moved_total = ScopedExact::new();
    for rule in &bundle.rules {
        let Some(source_impacts) = by_component.get(&rule.source) else { continue };
        if rule.fraction.is_zero() {
            continue;
        }
        let targets = allocation_targets(parts, rule);
        let weights = exact_weights(parts, rule, &targets);
        for ((c, s), x) in source_impacts {
            let moved = x * &rule.fraction;
            for (t, w) in targets.iter().zip(&weights) {
                add_to(after.entry(t.clone()).or_default(), c, s, &(&moved * w));
            }
            add_to(after.get_mut(&rule.source).expect("source present"), c, s, &-moved.clone());
            add_to(&mut moved_total, c, s, &moved);
        }
    }

    let mut activities: BTreeMap<String, ScopedExact> = BTreeMap::new();
    let mut rest = ScopedExact::new();
    for (component, v) in &after {
        let activity = match component.kind {
            ComponentKind::ActivityType => Some(component.id_str().to_owned()),
            ComponentKind::ActivityInstance => log.event(component.id_str()).map(|e| e.activity.clone()),
            _ => None,
        };
        let bucket = match activity {
            Some(a) => activities.entry(a).or_default(),
            None => &mut rest,
        };
        for ((c, s), x) in v {
            add_to(bucket, c, s, x);
        }
    }

    GroundTruth {
        schema: TRUTH_SCHEMA.to_owned(),
        seed: config.seed,
        size: config.size,
        summary: log_summary(log),
        inventory: inventory
            .into_iter()
            .map(|((flow, direction, scope, unit), amount)| TruthFlow {
                flow,
                direction,
                scope,
                unit,
                amount: format_exact(&amount),
            })
            .collect(),
        impacts: to_truth(&process, true),
        activity_impacts: activities.iter().map(|(a, v)| (a.clone(), to_truth(v, true))).collect(),
        non_activity_impacts: to_truth(&rest, false),
        allocated: to_truth(&moved_total, true),
    }
}

pub fn generate(config: &GeneratorConfig) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let parts = generate_log(&mut rng, config.size);
    let bundle = generate_bundle(&mut rng, &parts, config);
    let log = EventLog::new(
        parts.activities.iter().map(|a| (*a).to_owned()).collect(),
        parts.object_types.iter().map(|t| (*t).to_owned()).collect(),
        parts.events.clone(),
        parts.objects.clone(),
        parts.relations.clone(),
    );
    let truth = ground_truth(&parts, &bundle, &log, config);
    Generated { log: write_ocel(&log), annotations: write_annotations(&bundle), truth }
}
