//! Closed unit registry with linear conversions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{format_exact, parse_decimal, rel_close, Amount, DecimalText, Exact};

/// An amount in a registered unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity<A = Exact> {
    pub amount: A,
    pub unit: String,
}

impl<A: Amount> Quantity<A> {
    pub fn new(amount: A, unit: impl Into<String>) -> Self {
        Quantity { amount, unit: unit.into() }
    }
}

impl fmt::Display for Quantity<Exact> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", format_exact(&self.amount), self.unit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRegistry {
    units: BTreeSet<String>,
    conversions: BTreeMap<(String, String), Exact>,
}

/// Registry section as it appears in an annotation bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrySpec {
    #[serde(default)]
    pub units: Vec<String>,
    #[serde(default)]
    pub conversions: Vec<ConversionSpec>,
    /// Start from the built-in default registry.
    #[serde(default = "default_true")]
    pub extend_defaults: bool,
}

fn default_true() -> bool {
    true
}

impl Default for RegistrySpec {
    fn default() -> Self {
        RegistrySpec { units: Vec::new(), conversions: Vec::new(), extend_defaults: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionSpec {
    pub from: String,
    pub to: String,
    pub factor: DecimalText,
}

impl Default for UnitRegistry {
    /// kg, g, kWh, Wh, MJ, count, h with the obvious mass and energy conversions.
    fn default() -> Self {
        let mut reg = UnitRegistry::empty();
        for u in ["kg", "g", "kWh", "Wh", "MJ", "count", "h"] {
            reg.add_unit(u);
        }
        let parse = |s| parse_decimal(s).expect("literal");
        reg.add_conversion("g", "kg", parse("0.001")).expect("default registry");
        reg.add_conversion("Wh", "kWh", parse("0.001")).expect("default registry");
        reg.add_conversion("kWh", "MJ", parse("3.6")).expect("default registry");
        reg
    }
}

impl UnitRegistry {
    pub fn empty() -> Self {
        UnitRegistry { units: BTreeSet::new(), conversions: BTreeMap::new() }
    }

    pub fn from_spec(spec: &RegistrySpec) -> Result<Self> {
        let mut reg = if spec.extend_defaults { UnitRegistry::default() } else { UnitRegistry::empty() };
        for u in &spec.units {
            if u.trim().is_empty() {
                return Err(Error::Schema("empty unit identifier".into()));
            }
            reg.add_unit(u);
        }
        for c in &spec.conversions {
            reg.add_conversion(&c.from, &c.to, c.factor.value()?)?;
        }
        reg.check_consistency()?;
        Ok(reg)
    }

    pub fn add_unit(&mut self, unit: &str) {
        self.units.insert(unit.to_owned());
    }

    /// Declare `1 from = factor to`.
    pub fn add_conversion(&mut self, from: &str, to: &str, factor: Exact) -> Result<()> {
        for u in [from, to] {
            if !self.units.contains(u) {
                return Err(Error::UnknownUnit(u.to_owned()));
            }
        }
        if !factor.is_positive() {
            return Err(Error::InconsistentRegistry(format!(
                "conversion {from} -> {to} has non-positive factor {}",
                format_exact(&factor)
            )));
        }
        self.conversions.insert((from.to_owned(), to.to_owned()), factor);
        Ok(())
    }

    pub fn contains(&self, unit: &str) -> bool {
        self.units.contains(unit)
    }

    pub fn units(&self) -> &BTreeSet<String> {
        &self.units
    }

    pub fn conversions(&self) -> &BTreeMap<(String, String), Exact> {
        &self.conversions
    }

    fn neighbours(&self) -> BTreeMap<&str, Vec<(&str, Exact)>> {
        let mut adj: BTreeMap<&str, Vec<(&str, Exact)>> = BTreeMap::new();
        for ((a, b), f) in &self.conversions {
            adj.entry(a).or_default().push((b, f.clone()));
            if !self.conversions.contains_key(&(b.clone(), a.clone())) {
                adj.entry(b).or_default().push((a, f.recip()));
            }
        }
        adj
    }

    /// Multiplier taking amounts in `from` to amounts in `to` along the shortest declared path.
    pub fn factor(&self, from: &str, to: &str) -> Result<Exact> {
        for u in [from, to] {
            if !self.units.contains(u) {
                return Err(Error::UnknownUnit(u.to_owned()));
            }
        }
        if from == to {
            return Ok(Exact::one());
        }
        let adj = self.neighbours();
        let mut best: BTreeMap<&str, Exact> = BTreeMap::from([(from, Exact::one())]);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let here = best[u].clone();
            for (v, f) in adj.get(u).into_iter().flatten() {
                if best.contains_key(v) {
                    continue;
                }
                let product = &here * f;
                if *v == to {
                    return Ok(product);
                }
                best.insert(v, product);
                queue.push_back(v);
            }
        }
        Err(Error::NoConversionPath { from: from.to_owned(), to: to.to_owned() })
    }

    pub fn convert<A: Amount>(&self, q: &Quantity<A>, to: &str) -> Result<Quantity<A>> {
        let f = self.factor(&q.unit, to)?;
        Ok(Quantity { amount: q.amount.clone() * A::from_exact(&f), unit: to.to_owned() })
    }

    /// Checks reciprocal pairs (1e-12) and that every cycle's path product is 1 (1e-9).
    pub fn check_consistency(&self) -> Result<()> {
        for ((a, b), f) in &self.conversions {
            if let Some(back) = self.conversions.get(&(b.clone(), a.clone())) {
                let product = (f * back).as_f64();
                if (product - 1.0).abs() > 1e-12 {
                    return Err(Error::InconsistentRegistry(format!(
                        "{a} -> {b} and {b} -> {a} multiply to {product}"
                    )));
                }
            }
        }
        // Potential per unit: 1 root = potential[u] u, grown over a spanning forest.
        let adj = self.neighbours();
        let mut potential: BTreeMap<&str, Exact> = BTreeMap::new();
        for root in adj.keys() {
            if potential.contains_key(root) {
                continue;
            }
            potential.insert(root, Exact::one());
            let mut queue = VecDeque::from([*root]);
            while let Some(u) = queue.pop_front() {
                let here = potential[u].clone();
                for (v, f) in &adj[u] {
                    if !potential.contains_key(v) {
                        potential.insert(v, &here * f);
                        queue.push_back(v);
                    }
                }
            }
        }
        for ((a, b), f) in &self.conversions {
            let implied = &potential[b.as_str()] / &potential[a.as_str()];
            if implied.is_zero() || !rel_close(implied.as_f64(), f.as_f64(), 1e-9) {
                return Err(Error::InconsistentRegistry(format!(
                    "{a} -> {b} declared as {} but other paths give {}",
                    format_exact(f),
                    format_exact(&implied)
                )));
            }
        }
        Ok(())
    }
}
