use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use susmine_core::annotation::{
    bind_annotations, parse_annotations, parse_annotations_with, AnnotatedLog, CharacterizationTable,
};
use susmine_core::generator::{generate, GeneratorConfig};
use susmine_core::inventory::{own_inventory, rollup_inventory, scale_to_functional_unit, Inventory, RollupLevel};
use susmine_core::ocel::{log_summary, parse_ocel};
use susmine_core::pipeline::{assess, PipelineConfig, Stage, StageError};
use susmine_core::reporting::{
    annotate_dfg, build_dfg, build_report, emit_dot, literature_matrix, pattern_audit, CapabilityMatrix,
};
use susmine_core::{Assessment, Error, Exact};

use crate::config::RunConfig;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(Error::Io).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::Io).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(Error::Io).with_context(|| format!("writing {}", path.display()))
}

fn at<T>(stage: Stage, r: susmine_core::Result<T>) -> Result<T> {
    r.map_err(|error| StageError { stage, error }.into())
}

pub fn validate(config: &RunConfig) -> Result<()> {
    let path = config.log_path()?;
    let ingested = at(Stage::Ingest, parse_ocel(&read(path)?, config.mode))?;
    for w in &ingested.warnings {
        println!("warning: {w}");
    }
    let s = log_summary(&ingested.log);
    println!(
        "{}: {} events, {} objects, {} relations, {} violation(s)",
        path.display(),
        s.event_count,
        s.object_count,
        s.relation_count,
        ingested.warnings.len()
    );
    Ok(())
}

struct Loaded {
    al: AnnotatedLog,
    log_warnings: Vec<String>,
}

fn load(config: &RunConfig) -> Result<Loaded> {
    let ingested = at(Stage::Ingest, parse_ocel(&read(config.log_path()?)?, config.mode))?;
    let mut bundle =
        at(Stage::Annotation, parse_annotations_with(&read(config.annotations_path()?)?, config.scopes.as_ref()))?;
    if let Some(path) = &config.factors {
        let extra = at(Stage::Annotation, CharacterizationTable::from_csv(read(path)?.as_slice()))?;
        at(Stage::Annotation, bundle.table.merge(&extra))?;
    }
    let al = at(Stage::Annotation, bind_annotations(&ingested.log, &bundle))?;
    Ok(Loaded { al, log_warnings: ingested.warnings.iter().map(ToString::to_string).collect() })
}

fn run(config: &RunConfig) -> Result<(AnnotatedLog, Assessment)> {
    let loaded = load(config)?;
    let pipeline = PipelineConfig { mode: config.mode, scopes: None, functional_unit: config.fu.clone() };
    let mut a = assess::<f64>(&loaded.al, &pipeline)?;
    let mut warnings = loaded.log_warnings;
    warnings.append(&mut a.warnings);
    a.warnings = warnings;
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    Ok((loaded.al, a))
}

fn print_totals(a: &Assessment) {
    for (category, scope, amount) in a.process_total.iter() {
        let unit = a.categories.get(category).map_or("", |c| c.impact_unit.as_str());
        println!("{category}\t{scope}\t{amount}\t{unit}");
    }
}

pub fn assess_cmd(config: &RunConfig) -> Result<()> {
    let (al, a) = run(config)?;
    let report = build_report(&a);
    let dot = emit_dot(&at(Stage::Reporting, annotate_dfg(build_dfg(al.log()), &a))?);
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    write(&out, "report.json", &report.to_json())?;
    for (name, text) in report.csv_files() {
        write(&out, name, &text)?;
    }
    write(&out, "dfg.dot", &dot)?;
    print_totals(&a);
    Ok(())
}

pub fn inventory_cmd(config: &RunConfig, level: Option<RollupLevel>) -> Result<()> {
    let loaded = load(config)?;
    let al = &loaded.al;
    let inv: Inventory<Exact> = match level {
        None => own_inventory(al),
        Some(level) => rollup_inventory(al, level),
    };
    let inv = match &config.fu {
        None => inv,
        Some(fu) => at(Stage::FunctionalUnit, scale_to_functional_unit(&inv, fu, al))?,
    };
    emit(config, "inventory.csv", &inv.to_csv())
}

pub fn allocate_cmd(config: &RunConfig) -> Result<()> {
    let (_, a) = run(config)?;
    let report = build_report(&a);
    match &config.out {
        Some(dir) => {
            write(dir, "ledger.csv", &report.ledger_csv())?;
            write(dir, "allocated_impacts.csv", &report.allocated_impacts_csv())
        }
        None => {
            print!("{}", report.ledger_csv());
            Ok(())
        }
    }
}

fn emit(config: &RunConfig, name: &str, text: &str) -> Result<()> {
    match &config.out {
        Some(dir) => write(dir, name, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn dfg_cmd(config: &RunConfig) -> Result<()> {
    let dot = if config.annotations.is_some() {
        let (al, a) = run(config)?;
        emit_dot(&at(Stage::Reporting, annotate_dfg(build_dfg(al.log()), &a))?)
    } else {
        let log = at(Stage::Ingest, parse_ocel(&read(config.log_path()?)?, config.mode))?.log;
        emit_dot(&build_dfg::<f64>(&log))
    };
    emit(config, "dfg.dot", &dot)
}

pub fn audit_cmd(config: &RunConfig, literature: bool, name: Option<String>, json: bool) -> Result<()> {
    let matrix = if literature {
        literature_matrix()
    } else {
        let (al, a) = run(config)?;
        let name = name.unwrap_or_else(|| {
            config
                .annotations
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "bundle".to_owned(), |s| s.to_string_lossy().into_owned())
        });
        CapabilityMatrix { rows: vec![pattern_audit(&name, &al, &a)] }
    };
    if json {
        print!("{}", matrix.to_json());
    } else {
        print!("{}", matrix.render_table());
    }
    if let Some(dir) = &config.out {
        write(dir, "audit.json", &matrix.to_json())?;
    }
    Ok(())
}

pub fn generate_cmd(out: &Path, gen: &GeneratorConfig) -> Result<()> {
    let g = generate(gen);
    write(out, "log.json", &g.log)?;
    write(out, "annotations.json", &g.annotations)?;
    write(out, "truth.json", &g.truth_json())?;
    println!(
        "seed {}: {} events, {} objects, {} assignments",
        gen.seed,
        g.truth.summary.event_count,
        g.truth.summary.object_count,
        parse_annotations(g.annotations.as_bytes()).map_or(0, |b| b.assignments.len())
    );
    Ok(())
}

/// Exit status for a failed command: 2 for environment trouble, 1 for data.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<StageError>() {
            return if e.error.is_environmental() { 2 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_environmental() { 2 } else { 1 };
        }
    }
    2
}
