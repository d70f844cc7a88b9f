//! Characterization of inventories into impact vectors.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{CharacterizationTable, Direction, Factor, ImpactClass};
use crate::error::{Error, Result};
use crate::inventory::Inventory;
use crate::model::ComponentRef;
use crate::ocel::Mode;
use crate::scalar::{Amount, Exact, Scalar};
use crate::unitreg::UnitRegistry;

/// Impact amounts per category, each in the category's impact unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactVector<S = f64> {
    values: BTreeMap<String, S>,
}

impl<S: Scalar> Default for ImpactVector<S> {
    fn default() -> Self {
        ImpactVector { values: BTreeMap::new() }
    }
}

impl<S: Scalar> ImpactVector<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, category: &str, amount: S) {
        *self.values.entry(category.to_owned()).or_insert_with(S::zero) += amount;
    }

    pub fn get(&self, category: &str) -> Option<S> {
        self.values.get(category).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, S)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn merge(&mut self, other: &ImpactVector<S>) {
        for (k, v) in other.iter() {
            self.add(k, v);
        }
    }

    pub fn scaled(&self, factor: S) -> Self {
        ImpactVector { values: self.values.iter().map(|(k, v)| (k.clone(), *v * factor)).collect() }
    }
}

impl<S: Scalar> FromIterator<(String, S)> for ImpactVector<S> {
    fn from_iter<I: IntoIterator<Item = (String, S)>>(iter: I) -> Self {
        let mut v = ImpactVector::new();
        for (k, x) in iter {
            v.add(&k, x);
        }
        v
    }
}

/// Result of looking a flow up in a characterization table.
#[derive(Debug)]
pub(crate) enum Lookup<'t> {
    /// Factors plus the unit conversion multiplier applied before them.
    Found(&'t BTreeMap<String, Factor>, Exact),
    NoEntry,
    NoUnitPath,
}

/// Find the factors for `(flow, unit)`, converting into a unit the table
/// characterizes the flow in when needed (tried in lexicographic unit order).
pub(crate) fn lookup<'t>(
    table: &'t CharacterizationTable,
    registry: &UnitRegistry,
    flow: &str,
    unit: &str,
) -> Lookup<'t> {
    if let Some(f) = table.factors(flow, unit) {
        return Lookup::Found(f, Exact::from_integer(1.into()));
    }
    let mut any = false;
    for table_unit in table.units_for(flow) {
        any = true;
        if let Ok(mult) = registry.factor(unit, table_unit) {
            return Lookup::Found(table.factors(flow, table_unit).expect("unit listed by table"), mult);
        }
    }
    if any {
        Lookup::NoUnitPath
    } else {
        Lookup::NoEntry
    }
}

/// Characterize one inventory entry. `Ok(None)` means the flow matched no
/// category and was tolerated (lenient mode).
pub(crate) fn characterize_entry<A: Amount, S: Scalar>(
    table: &CharacterizationTable,
    registry: &UnitRegistry,
    mode: Mode,
    flow: &str,
    unit: &str,
    direction: Direction,
    amount: &A,
) -> Result<Option<Vec<(String, S)>>> {
    let (factors, mult) = match lookup(table, registry, flow, unit) {
        Lookup::Found(f, m) => (f, m),
        Lookup::NoUnitPath if mode == Mode::Strict => {
            return Err(Error::UnitMismatch { flow: flow.to_owned(), unit: unit.to_owned() })
        }
        Lookup::NoEntry if mode == Mode::Strict => {
            return Err(Error::UncharacterizedFlow { flow: flow.to_owned(), unit: unit.to_owned() })
        }
        _ => return Ok(None),
    };
    let contributions: Vec<(String, S)> = factors
        .iter()
        .filter(|(_, f)| f.applies_to(direction))
        .map(|(cat, f)| (cat.clone(), amount.times::<S>(&(&mult * &f.value))))
        .collect();
    if contributions.is_empty() {
        if mode == Mode::Strict {
            return Err(Error::UncharacterizedFlow { flow: flow.to_owned(), unit: format!("{unit}, {direction}") });
        }
        return Ok(None);
    }
    Ok(Some(contributions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Characterized<S = f64> {
    pub impacts: BTreeMap<ComponentRef, ImpactVector<S>>,
    /// `(flow, unit)` pairs that matched no category (lenient mode only).
    pub uncharacterized: BTreeSet<(String, String)>,
}

/// impact(c, k) = sum over flows f of amount(c, f) * factor(f -> k).
pub fn characterize<A: Amount, S: Scalar>(
    inv: &Inventory<A>,
    table: &CharacterizationTable,
    registry: &UnitRegistry,
    mode: Mode,
) -> Result<Characterized<S>> {
    let mut impacts: BTreeMap<ComponentRef, ImpactVector<S>> = BTreeMap::new();
    let mut uncharacterized = BTreeSet::new();
    for (key, amount) in inv.iter() {
        match characterize_entry::<A, S>(table, registry, mode, &key.flow, &key.unit, key.direction, amount)? {
            Some(contributions) => {
                let v = impacts.entry(key.component.clone()).or_default();
                for (cat, x) in contributions {
                    v.add(&cat, x);
                }
            }
            None => {
                uncharacterized.insert((key.flow.clone(), key.unit.clone()));
            }
        }
    }
    Ok(Characterized { impacts, uncharacterized })
}

/// Partition a vector by impact class. Every class key is present.
///
/// Categories the table does not declare are dropped.
pub fn classify_impacts<S: Scalar>(
    vec: &ImpactVector<S>,
    table: &CharacterizationTable,
) -> BTreeMap<ImpactClass, ImpactVector<S>> {
    let mut out: BTreeMap<ImpactClass, ImpactVector<S>> =
        ImpactClass::ALL.iter().map(|c| (*c, ImpactVector::new())).collect();
    for (cat, x) in vec.iter() {
        if let Some(info) = table.category(cat) {
            out.get_mut(&info.class).expect("all classes present").add(cat, x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{CategoryInfo, UNSCOPED};
    use crate::inventory::InventoryKey;
    use crate::scalar::parse_decimal;

    fn table() -> CharacterizationTable {
        let mut t = CharacterizationTable::default();
        t.add_category("climate_change", CategoryInfo { impact_unit: "kg CO2e".into(), class: ImpactClass::Climate })
            .unwrap();
        t.add_category(
            "ozone_depletion",
            CategoryInfo { impact_unit: "kg CFCe".into(), class: ImpactClass::Environmental },
        )
        .unwrap();
        t.add_category("work_accidents", CategoryInfo { impact_unit: "count".into(), class: ImpactClass::Social })
            .unwrap();
        let f = |s: &str| Factor { value: parse_decimal(s).unwrap(), direction: None };
        t.add_factor("CO2", "kg", "climate_change", f("1")).unwrap();
        t.add_factor("CFC-11", "kg", "ozone_depletion", f("1")).unwrap();
        t.add_factor("CFC-11", "kg", "climate_change", f("4750")).unwrap();
        t.add_factor("labour", "h", "work_accidents", f("0.00001")).unwrap();
        t.add_factor(
            "electricity",
            "kWh",
            "climate_change",
            Factor { value: parse_decimal("0.4").unwrap(), direction: Some(Direction::Input) },
        )
        .unwrap();
        t
    }

    fn entry(component: &str, flow: &str, direction: Direction, unit: &str, amount: &str) -> (InventoryKey, Exact) {
        (
            InventoryKey {
                component: ComponentRef::activity_instance(component),
                flow: flow.into(),
                direction,
                scope: UNSCOPED.into(),
                unit: unit.into(),
            },
            parse_decimal(amount).unwrap(),
        )
    }

    fn inventory(entries: &[(InventoryKey, Exact)]) -> Inventory {
        let mut inv = Inventory::new();
        for (k, v) in entries {
            inv.add(k.clone(), v.clone());
        }
        inv
    }

    fn run(inv: &Inventory, mode: Mode) -> Result<Characterized<f64>> {
        characterize(inv, &table(), &UnitRegistry::default(), mode)
    }

    #[test]
    fn climate_example() {
        let inv = inventory(&[entry("e1", "CO2", Direction::Output, "kg", "5")]);
        let c = run(&inv, Mode::Strict).unwrap();
        assert_eq!(c.impacts[&ComponentRef::activity_instance("e1")].get("climate_change"), Some(5.0));
    }

    #[test]
    fn ozone_example() {
        let mut t = CharacterizationTable::default();
        t.add_category(
            "ozone_depletion",
            CategoryInfo { impact_unit: "kg CFCe".into(), class: ImpactClass::Environmental },
        )
        .unwrap();
        t.add_factor("CFC-11", "kg", "ozone_depletion", Factor { value: parse_decimal("1").unwrap(), direction: None })
            .unwrap();
        let inv = inventory(&[entry("e2", "CFC-11", Direction::Output, "kg", "3")]);
        let c: Characterized<f64> = characterize(&inv, &t, &UnitRegistry::default(), Mode::Strict).unwrap();
        assert_eq!(c.impacts[&ComponentRef::activity_instance("e2")].get("ozone_depletion"), Some(3.0));
    }

    #[test]
    fn empty_inventory() {
        let c = run(&Inventory::new(), Mode::Strict).unwrap();
        assert!(c.impacts.is_empty() && c.uncharacterized.is_empty());
    }

    #[test]
    fn unit_conversion_at_lookup() {
        let inv = inventory(&[entry("e1", "electricity", Direction::Input, "Wh", "2500")]);
        let c = run(&inv, Mode::Strict).unwrap();
        let x = c.impacts[&ComponentRef::activity_instance("e1")].get("climate_change").unwrap();
        assert!((x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strict_and_lenient_gaps() {
        let inv = inventory(&[
            entry("e1", "CO2", Direction::Output, "kg", "5"),
            entry("e1", "water", Direction::Input, "kg", "100"),
        ]);
        assert!(matches!(run(&inv, Mode::Strict), Err(Error::UncharacterizedFlow { flow, .. }) if flow == "water"));
        let c = run(&inv, Mode::Lenient).unwrap();
        assert_eq!(c.impacts[&ComponentRef::activity_instance("e1")].get("climate_change"), Some(5.0));
        assert_eq!(c.uncharacterized, BTreeSet::from([("water".to_string(), "kg".to_string())]));

        // flow known but only in an unconvertible unit
        let inv = inventory(&[entry("e1", "CO2", Direction::Output, "kWh", "1")]);
        assert!(matches!(run(&inv, Mode::Strict), Err(Error::UnitMismatch { .. })));
        assert_eq!(run(&inv, Mode::Lenient).unwrap().uncharacterized.len(), 1);

        // direction filter leaves an output of electricity uncharacterized
        let inv = inventory(&[entry("e1", "electricity", Direction::Output, "kWh", "1")]);
        assert!(run(&inv, Mode::Strict).is_err());
        assert!(run(&inv, Mode::Lenient).unwrap().impacts.is_empty());
    }

    #[test]
    fn classification_partitions() {
        let mut v = ImpactVector::<f64>::new();
        v.add("climate_change", 5.0);
        v.add("work_accidents", 0.00001);
        let classes = classify_impacts(&v, &table());
        assert_eq!(classes[&ImpactClass::Climate].get("climate_change"), Some(5.0));
        assert_eq!(classes[&ImpactClass::Social].get("work_accidents"), Some(0.00001));
        assert!(classes[&ImpactClass::Environmental].is_empty());

        let empty = classify_impacts(&ImpactVector::<f64>::new(), &table());
        assert_eq!(empty.len(), 3);
        assert!(empty.values().all(ImpactVector::is_empty));
    }

    #[test]
    fn works_in_single_precision() {
        let inv = inventory(&[entry("e1", "labour", Direction::Input, "h", "2")]);
        let c: Characterized<f32> = characterize(&inv, &table(), &UnitRegistry::default(), Mode::Strict).unwrap();
        let x = c.impacts[&ComponentRef::activity_instance("e1")].get("work_accidents").unwrap();
        assert!((x - 0.00002f32).abs() < 1e-10);
    }
}
