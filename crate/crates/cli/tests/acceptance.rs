//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use susmine_core::annotation::{bind_annotations, parse_annotations};
use susmine_core::generator::{generate, GeneratorConfig};
use susmine_core::inventory::FunctionalUnit;
use susmine_core::ocel::parse_ocel;
use susmine_core::pipeline::{assess, assess_documents, PipelineConfig};
use susmine_core::reporting::{annotate_dfg, build_dfg, pattern_audit};
use susmine_core::scoping::{total_of, ScopedImpactVector};
use susmine_core::{Amount, Assessment, Mode};

const WORKED_EXAMPLE_BUDGET: Duration = Duration::from_secs(1);
const TABLE_BUDGET: Duration = Duration::from_secs(1);
const CONSERVATION_BUDGET: Duration = Duration::from_secs(60);
const CONSERVATION_SEEDS: u64 = 200;
const MAX_EVENTS: usize = 200;
const CONSERVATION_REL: f64 = 1e-9;
const WEIGHT_ABS: f64 = 1e-12;
const ORACLE_REL: f64 = 1e-9;
const FU_REL: f64 = 1e-12;
const FU_SCALES: [f64; 3] = [0.5, 2.0, 10.0];
const DFG_REL: f64 = 1e-9;
const AUDIT_PAIRS: u64 = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(path)
}

fn susmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_susmine")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Relative agreement, with the scale floored at `floor` so that values
/// cancelling to zero are compared against the magnitude they came from.
fn rel_ok(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Sizes cycle through 1..=MAX_EVENTS; odd seeds draw fractional allocation.
fn bundle_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig { seed, size: 1 + (seed as usize * 37) % MAX_EVENTS, partial_allocation: seed % 2 == 1 }
}

fn worked_example() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = susmine(&[
        "assess",
        "--log",
        p(&fixture("logs/worked_example.json")),
        "--annotations",
        p(&fixture("annotations/worked_example.json")),
        "--out",
        p(dir.path()),
    ]);
    let elapsed = start.elapsed();
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();

    let mut e1: BTreeMap<(String, String), f64> = BTreeMap::new();
    for row in report["allocated_impacts"].as_array().unwrap() {
        if row["component"]["kind"] == "activity_instance" && row["component"]["id"] == "e1" {
            let key = (row["category"].as_str().unwrap().to_owned(), row["scope"].as_str().unwrap().to_owned());
            e1.insert(key, row["amount"].as_f64().unwrap());
        }
    }
    let expected = [
        ("climate_change", "scope1", 5.0),
        ("climate_change", "scope3", 30.0),
        ("ozone_depletion", "company", 3.0),
        ("work_accidents", "company", 0.00001),
        ("work_accidents", "value_chain", 0.00001),
    ];
    for (cat, scope, value) in expected {
        let got = e1.get(&(cat.to_owned(), scope.to_owned())).copied();
        ensure(got == Some(value), || format!("e1 {cat}/{scope}: expected {value}, got {got:?}"))?;
    }
    ensure(elapsed < WORKED_EXAMPLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("e1 matches all {} values exactly in {elapsed:.0?}", expected.len()))
}

fn table_fidelity() -> Outcome {
    const COLUMNS: [&str; 8] =
        ["AP1", "AP2-Climate", "AP2-Env", "AP2-Social", "AP3-Climate", "AP3-Env", "AP3-Social", "AP4"];
    let expected: [(&str, &str); 6] = [
        ("Houy et al.", "FNNNNNNN"),
        ("Hoesch-Klohe et al.", "FFNNHNNF"),
        ("Recker et al.", "FFNNFNNF"),
        ("Wesumperuma et al.", "FFNNFNNF"),
        ("Zhu et al.", "FNNNNNNN"),
        ("Betz", "NFFFFFFN"),
    ];
    let start = Instant::now();
    let out = susmine(&["audit", "--literature", "--json"]);
    let elapsed = start.elapsed();
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let columns: Vec<&str> = v["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    ensure(columns == COLUMNS, || format!("columns {columns:?}"))?;
    let rows = v["rows"].as_array().unwrap();
    ensure(rows.len() == expected.len(), || format!("{} rows", rows.len()))?;
    for (row, (name, cells)) in rows.iter().zip(expected) {
        ensure(row["approach"] == name, || format!("row {} where {name} expected", row["approach"]))?;
        let got = row["cells"].as_object().unwrap();
        ensure(got.len() == 8, || format!("{name}: {} cells", got.len()))?;
        for (column, code) in COLUMNS.iter().zip(cells.chars()) {
            let want = match code {
                'F' => "full",
                'H' => "half",
                _ => "none",
            };
            ensure(got[*column] == want, || format!("{name} {column}: {} vs {want}", got[*column]))?;
        }
    }
    let table = susmine(&["audit", "--literature"]);
    let text = String::from_utf8_lossy(&table.stdout);
    for (name, _) in expected {
        ensure(text.lines().any(|l| l.starts_with(name)), || format!("text table lacks {name}"))?;
    }
    ensure(elapsed < TABLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("6 x 8 cells match in {elapsed:.0?}"))
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let mut weight_vectors = 0usize;
    for seed in 0..CONSERVATION_SEEDS {
        let g = generate(&bundle_config(seed));
        let (_, a) = assess_documents::<f64>(g.log.as_bytes(), g.annotations.as_bytes(), &PipelineConfig::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let before = total_of(&a.impacts);
        let after = &a.process_total;
        let keys: BTreeSet<(&str, &str)> = before.iter().chain(after.iter()).map(|(c, s, _)| (c, s)).collect();
        for (c, s) in keys {
            let x = before.get(c, s).unwrap_or(0.0);
            let y = after.get(c, s).unwrap_or(0.0);
            ensure(rel_ok(x, y, CONSERVATION_REL, 0.0), || format!("seed {seed} {c}/{s}: {x} before, {y} after"))?;
        }
        for (source, weights) in &a.ledger.weights {
            let sum: f64 = weights.values().sum();
            ensure((sum - 1.0).abs() <= WEIGHT_ABS, || format!("seed {seed} {source}: weights sum to {sum}"))?;
            weight_vectors += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < CONSERVATION_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{CONSERVATION_SEEDS} bundles, {weight_vectors} weight vectors in {elapsed:.1?}"))
}

/// Flat summation over the raw documents, sharing no code with the pipeline.
struct Oracle {
    inventory: BTreeMap<(String, String, String, String), f64>,
    impacts: BTreeMap<(String, String), f64>,
}

fn conversion(bundle: &Value, from: &str, to: &str) -> Option<f64> {
    if from == to {
        return Some(1.0);
    }
    let mut table: Vec<(String, String, f64)> =
        vec![("g".into(), "kg".into(), 0.001), ("Wh".into(), "kWh".into(), 0.001)];
    if let Some(list) = bundle["units"]["conversions"].as_array() {
        for c in list {
            let f = c["factor"].as_str().map_or_else(|| c["factor"].as_f64().unwrap(), |s| s.parse().unwrap());
            table.push((c["from"].as_str().unwrap().into(), c["to"].as_str().unwrap().into(), f));
        }
    }
    table.iter().find_map(|(a, b, f)| {
        if a == from && b == to {
            Some(*f)
        } else if a == to && b == from {
            Some(1.0 / f)
        } else {
            None
        }
    })
}

fn oracle(log: &Value, bundle: &Value) -> Oracle {
    let events: Vec<(&str, &str)> = log["events"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["id"].as_str().unwrap(), e["type"].as_str().unwrap()))
        .collect();
    let objects: Vec<(&str, &str)> = log["objects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["id"].as_str().unwrap(), o["type"].as_str().unwrap()))
        .collect();
    let empty = Vec::new();
    let assignments = bundle["assignments"].as_array().unwrap_or(&empty);
    let factors = bundle["factors"].as_array().unwrap_or(&empty);

    let overridden: BTreeSet<(&str, &str, &str)> = assignments
        .iter()
        .filter(|a| a["override"] == true)
        .map(|a| {
            (a["component"]["id"].as_str().unwrap(), a["flow"].as_str().unwrap(), a["direction"].as_str().unwrap())
        })
        .collect();

    let mut flat: Vec<(&Value, usize)> = Vec::new();
    for a in assignments {
        let kind = a["component"]["kind"].as_str().unwrap();
        let id = a["component"]["id"].as_str().unwrap_or("");
        let flow = a["flow"].as_str().unwrap();
        let direction = a["direction"].as_str().unwrap();
        let copies = if a["basis"] == "per_instance" {
            let instances: Vec<&str> = match kind {
                "activity_type" => events.iter().filter(|e| e.1 == id).map(|e| e.0).collect(),
                "object_type" => objects.iter().filter(|o| o.1 == id).map(|o| o.0).collect(),
                _ => panic!("per_instance on {kind}"),
            };
            instances.into_iter().filter(|i| !overridden.contains(&(*i, flow, direction))).count()
        } else {
            1
        };
        flat.push((a, copies));
    }

    let mut inventory = BTreeMap::new();
    let mut impacts = BTreeMap::new();
    for (a, copies) in flat {
        let amount: f64 = a["amount"].as_str().unwrap().parse::<f64>().unwrap() * copies as f64;
        let flow = a["flow"].as_str().unwrap();
        let direction = a["direction"].as_str().unwrap();
        let unit = a["unit"].as_str().unwrap();
        let scope = a["scope"].as_str().unwrap_or("unscoped");
        *inventory.entry((flow.to_owned(), direction.to_owned(), scope.to_owned(), unit.to_owned())).or_insert(0.0) +=
            amount;

        let applicable: Vec<&Value> = factors
            .iter()
            .filter(|f| f["flow"] == flow && f["direction"].as_str().is_none_or(|d| d == direction))
            .collect();
        let same_unit = applicable.iter().any(|f| f["unit"] == unit);
        for f in applicable {
            let f_unit = f["unit"].as_str().unwrap();
            if same_unit && f_unit != unit {
                continue;
            }
            let Some(conv) = conversion(bundle, unit, f_unit) else { continue };
            let value: f64 = f["factor"].as_str().unwrap().parse().unwrap();
            *impacts.entry((f["category"].as_str().unwrap().to_owned(), scope.to_owned())).or_insert(0.0) +=
                amount * conv * value;
        }
    }
    Oracle { inventory, impacts }
}

fn compare_impacts(
    label: &str,
    oracle: &BTreeMap<(String, String), f64>,
    actual: &ScopedImpactVector<f64>,
) -> Result<(), String> {
    let magnitude = oracle.values().fold(0.0f64, |m, v| m.max(v.abs()));
    let keys: BTreeSet<(String, String)> =
        oracle.keys().cloned().chain(actual.iter().map(|(c, s, _)| (c.to_owned(), s.to_owned()))).collect();
    for (c, s) in keys {
        let want = oracle.get(&(c.clone(), s.clone())).copied().unwrap_or(0.0);
        let got = actual.get(&c, &s).unwrap_or(0.0);
        // Allocation can move an entry to zero; only such cancelled entries use the process scale.
        let floor = if want == 0.0 { magnitude } else { 0.0 };
        ensure(rel_ok(got, want, ORACLE_REL, floor), || format!("{label} {c}/{s}: {got} vs oracle {want}"))?;
    }
    Ok(())
}

fn oracle_case(label: &str, log: &[u8], bundle: &[u8]) -> Result<(), String> {
    let (_, a) =
        assess_documents::<f64>(log, bundle, &PipelineConfig::default()).map_err(|e| format!("{label}: {e}"))?;
    let o = oracle(&serde_json::from_slice(log).unwrap(), &serde_json::from_slice(bundle).unwrap());

    let actual: BTreeMap<(String, String, String, String), f64> = a
        .process_inventory
        .iter()
        .map(|(k, v)| ((k.flow.clone(), k.direction.as_str().to_owned(), k.scope.clone(), k.unit.clone()), v.as_f64()))
        .collect();
    ensure(actual.keys().eq(o.inventory.keys()), || format!("{label}: inventory keys differ"))?;
    for (k, want) in &o.inventory {
        let got = actual[k];
        ensure(rel_ok(got, *want, ORACLE_REL, 0.0), || format!("{label} {k:?}: {got} vs oracle {want}"))?;
    }
    compare_impacts(label, &o.impacts, &total_of(&a.impacts))?;
    compare_impacts(&format!("{label} after allocation"), &o.impacts, &a.process_total)
}

fn oracle_equivalence() -> Outcome {
    for name in ["worked_example", "order_handling"] {
        let log = std::fs::read(fixture(&format!("logs/{name}.json"))).unwrap();
        let bundle = std::fs::read(fixture(&format!("annotations/{name}.json"))).unwrap();
        oracle_case(name, &log, &bundle)?;
    }
    for seed in 0..CONSERVATION_SEEDS {
        let g = generate(&bundle_config(seed));
        oracle_case(&format!("seed {seed}"), g.log.as_bytes(), g.annotations.as_bytes())?;
    }
    Ok(format!("2 fixtures and {CONSERVATION_SEEDS} generated bundles agree"))
}

fn scaled_fu(fu: &str, k: f64) -> String {
    let mut parts: Vec<String> = fu.split(':').map(str::to_owned).collect();
    let reference: f64 = parts[1].parse().unwrap();
    parts[1] = (reference * k).to_string();
    parts.join(":")
}

fn fu_case(label: &str, log: &[u8], bundle: &[u8], fu: &str) -> Result<usize, String> {
    let run = |spec: &str| -> Result<Assessment, String> {
        let config =
            PipelineConfig { functional_unit: Some(FunctionalUnit::parse(spec).unwrap()), ..Default::default() };
        assess_documents::<f64>(log, bundle, &config).map(|(_, a)| a).map_err(|e| format!("{label} {spec}: {e}"))
    };
    let base = run(fu)?.per_functional_unit.unwrap();
    let mut checked = 0;
    for k in FU_SCALES {
        let spec = scaled_fu(fu, k);
        let scaled = run(&spec)?.per_functional_unit.unwrap();
        let mut pairs: Vec<(String, f64, f64)> = Vec::new();
        for (key, v) in base.inventory.iter() {
            let w = scaled.inventory.get(key).map_or(0.0, Amount::as_f64);
            pairs.push((format!("{key:?}"), v.as_f64(), w));
        }
        for (c, s, v) in base.process_total.iter() {
            pairs.push((format!("process {c}/{s}"), v, scaled.process_total.get(c, s).unwrap_or(0.0)));
        }
        for (activity, vector) in &base.activity_totals {
            for (c, s, v) in vector.iter() {
                let w = scaled.activity_totals.get(activity).and_then(|x| x.get(c, s)).unwrap_or(0.0);
                pairs.push((format!("{activity} {c}/{s}"), v, w));
            }
        }
        ensure(scaled.inventory.len() == base.inventory.len(), || format!("{label} k={k}: inventory size"))?;
        for (what, v, w) in pairs {
            ensure(rel_ok(w, v * k, FU_REL, 0.0), || format!("{label} k={k} {what}: {w} vs {}", v * k))?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn fu_linearity() -> Outcome {
    let mut checked = 0;
    let example_log = std::fs::read(fixture("logs/worked_example.json")).unwrap();
    let example_bundle = std::fs::read(fixture("annotations/worked_example.json")).unwrap();
    checked += fu_case("worked example", &example_log, &example_bundle, "product:1")?;
    checked += fu_case("worked example by mass", &example_log, &example_bundle, "product:1:mass_kg")?;
    for seed in 0..20 {
        let g = generate(&GeneratorConfig { seed, size: 40, partial_allocation: seed % 2 == 1 });
        let log: Value = serde_json::from_str(&g.log).unwrap();
        let ty = log["objects"][0]["type"].as_str().unwrap();
        checked += fu_case(&format!("seed {seed}"), g.log.as_bytes(), g.annotations.as_bytes(), &format!("{ty}:3"))?;
    }
    Ok(format!("{checked} per-unit quantities scale by k in {{0.5, 2, 10}}"))
}

fn dfg_conservation() -> Outcome {
    let mut literal = 0;
    let mut with_residual = 0;
    for seed in 0..CONSERVATION_SEEDS {
        let config = bundle_config(seed);
        let g = generate(&config);
        let (al, a) = assess_documents::<f64>(g.log.as_bytes(), g.annotations.as_bytes(), &PipelineConfig::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let dfg = annotate_dfg(build_dfg(al.log()), &a).map_err(|e| e.to_string())?;
        let events = al.log().events().len();
        ensure(dfg.event_count() == events, || {
            format!("seed {seed}: {} node events, {events} events", dfg.event_count())
        })?;

        let nodes = dfg.impact_total();
        let scopes: BTreeSet<&str> = a.process_total.iter().chain(nodes.iter()).map(|(_, s, _)| s).collect();
        let magnitude = a.process_total.category_total("climate_change").abs();
        for scope in scopes.into_iter().chain([""]) {
            let (node, process, rest) = if scope.is_empty() {
                (
                    nodes.category_total("climate_change"),
                    a.process_total.category_total("climate_change"),
                    a.non_activity.category_total("climate_change"),
                )
            } else {
                (
                    nodes.get("climate_change", scope).unwrap_or(0.0),
                    a.process_total.get("climate_change", scope).unwrap_or(0.0),
                    a.non_activity.get("climate_change", scope).unwrap_or(0.0),
                )
            };
            if config.partial_allocation {
                // Fractional rules leave part of the impact on objects and the process.
                ensure(rel_ok(node + rest, process, DFG_REL, magnitude), || {
                    format!("seed {seed} {scope}: nodes {node} + residual {rest} vs process {process}")
                })?;
            } else {
                ensure(rel_ok(node, process, DFG_REL, 0.0), || {
                    format!("seed {seed} {scope}: nodes {node} vs process {process}")
                })?;
            }
        }
        if config.partial_allocation {
            with_residual += 1;
        } else {
            literal += 1;
        }
    }
    Ok(format!(
        "event counts exact; climate nodes = process on {literal} full-allocation bundles, nodes + residual = process on {with_residual} partial ones"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let g = generate(&bundle_config(11));
    std::fs::write(dir.path().join("log.json"), &g.log).unwrap();
    std::fs::write(dir.path().join("annotations.json"), &g.annotations).unwrap();
    let cases = [
        ("worked_example", fixture("logs/worked_example.json"), fixture("annotations/worked_example.json")),
        ("order_handling", fixture("logs/order_handling.json"), fixture("annotations/order_handling.json")),
        ("generated", dir.path().join("log.json"), dir.path().join("annotations.json")),
    ];
    let mut compared = 0;
    for (name, log, bundle) in &cases {
        let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("{name}-{i}"))).collect();
        for out in &outs {
            let r = susmine(&["assess", "--log", p(log), "--annotations", p(bundle), "--out", p(out)]);
            ensure(r.status.success(), || format!("{name}: {}", String::from_utf8_lossy(&r.stderr)))?;
        }
        for file in ["report.json", "ledger.csv", "dfg.dot", "inventory.csv", "impacts.csv", "totals.csv"] {
            let a = std::fs::read(outs[0].join(file)).unwrap();
            let b = std::fs::read(outs[1].join(file)).unwrap();
            ensure(a == b, || format!("{name}/{file} differs between runs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} output files byte-identical across runs"))
}

/// splitmix64, so the subsets do not depend on the generator under test.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn audit_monotonicity() -> Outcome {
    let mut cells = 0;
    for pair in 0..AUDIT_PAIRS {
        let g = generate(&GeneratorConfig {
            seed: 1000 + pair,
            size: 5 + (pair as usize * 13) % 80,
            partial_allocation: pair % 3 == 0,
        });
        let log = parse_ocel(g.log.as_bytes(), Mode::Strict).unwrap().log;
        let full = parse_annotations(g.annotations.as_bytes()).unwrap();
        let mut state = mix(pair);
        let mut keep = || {
            state = mix(state);
            !state.is_multiple_of(3)
        };
        let mut base = full.clone();
        base.assignments.retain(|_| keep());
        base.rules.retain(|_| keep());

        let row = |bundle| {
            let al = bind_annotations(&log, bundle).unwrap();
            let a = assess::<f64>(&al, &PipelineConfig::default()).unwrap();
            pattern_audit("bundle", &al, &a)
        };
        let small = row(&base);
        let big = row(&full);
        ensure(small.dominated_by(&big), || format!("pair {pair}: {:?} exceeds {:?}", small.cells, big.cells))?;
        cells += small.cells.len();
    }
    Ok(format!("{AUDIT_PAIRS} pairs, {cells} cells, none decreased"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("worked example reproduction", worked_example),
        ("literature matrix fidelity", table_fidelity),
        ("allocation conservation", conservation),
        ("brute-force oracle equivalence", oracle_equivalence),
        ("functional-unit linearity", fu_linearity),
        ("DFG conservation", dfg_conservation),
        ("determinism", determinism),
        ("audit monotonicity", audit_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg =
                panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
