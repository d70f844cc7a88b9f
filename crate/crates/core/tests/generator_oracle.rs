//! The generator computes its own truth with exact arithmetic; the pipeline must agree.

use std::collections::BTreeMap;

use susmine_core::generator::{generate, GeneratorConfig, TruthImpact};
use susmine_core::pipeline::{assess_documents, PipelineConfig};
use susmine_core::scalar::{format_exact, rel_close};
use susmine_core::scoping::ScopedImpactVector;

const TOL: f64 = 1e-9;

fn check(label: &str, truth: &[TruthImpact], actual: &ScopedImpactVector<f64>) {
    let expected: BTreeMap<(&str, &str), f64> =
        truth.iter().map(|t| ((t.category.as_str(), t.scope.as_str()), t.amount)).collect();
    for ((cat, scope), amount) in &expected {
        let got = actual.get(cat, scope).unwrap_or(0.0);
        assert!(
            rel_close(got, *amount, TOL) || (got - amount).abs() < 1e-12,
            "{label} {cat}/{scope}: {got} vs {amount}"
        );
    }
    for (cat, scope, got) in actual.iter() {
        if !expected.contains_key(&(cat, scope)) {
            assert!(got.abs() < 1e-9 * (1.0 + got.abs()), "{label} {cat}/{scope}: unexpected {got}");
        }
    }
}

fn run(seed: u64, size: usize, partial: bool) {
    let g = generate(&GeneratorConfig { seed, size, partial_allocation: partial });
    let (_, a) = assess_documents::<f64>(g.log.as_bytes(), g.annotations.as_bytes(), &PipelineConfig::default())
        .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    let label = format!("seed {seed} size {size} partial {partial}");

    assert_eq!(a.summary, g.truth.summary, "{label}");
    let mut inventory: Vec<(String, String, String, String, String)> = a
        .process_inventory
        .iter()
        .map(|(k, v)| {
            (k.flow.clone(), k.direction.as_str().to_owned(), k.scope.clone(), k.unit.clone(), format_exact(v))
        })
        .collect();
    let mut expected: Vec<_> = g
        .truth
        .inventory
        .iter()
        .map(|f| (f.flow.clone(), f.direction.as_str().to_owned(), f.scope.clone(), f.unit.clone(), f.amount.clone()))
        .collect();
    inventory.sort();
    expected.sort();
    assert_eq!(inventory, expected, "{label}");

    check(&label, &g.truth.impacts, &a.process_total);
    check(&label, &g.truth.non_activity_impacts, &a.non_activity);
    for (activity, truth) in &g.truth.activity_impacts {
        let empty = ScopedImpactVector::new();
        check(&format!("{label} {activity}"), truth, a.activity_totals.get(activity).unwrap_or(&empty));
    }
    for activity in a.activity_totals.keys() {
        if !g.truth.activity_impacts.contains_key(activity) {
            check(&format!("{label} {activity}"), &[], &a.activity_totals[activity]);
        }
    }

    let mut moved = ScopedImpactVector::new();
    for e in &a.ledger.entries {
        moved.add(&e.category, &e.scope, e.amount);
    }
    check(&format!("{label} allocated"), &g.truth.allocated, &moved);
    assert!(a.ledger.is_conserved(TOL), "{label}");
}

#[test]
fn pipeline_matches_truth_over_fifty_seeds() {
    for seed in 0..50 {
        run(seed, 10 + (seed as usize * 7) % 150, seed % 2 == 1);
    }
}

#[test]
fn empty_generated_log_assesses_to_nothing() {
    run(3, 0, false);
}
