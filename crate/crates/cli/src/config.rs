//! Flags plus the optional `--config` JSON file. Flags win on conflict.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use susmine_core::annotation::ScopeSet;
use susmine_core::inventory::FunctionalUnit;
use susmine_core::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Strict,
    Lenient,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Lenient => Mode::Lenient,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// OCEL 2.0 JSON log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Annotation bundle (susmine/1 JSON).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// `ghg`, `lca`, or a scope-set JSON file; replaces the bundle's scopes.
    #[arg(long)]
    pub scopes: Option<String>,
    /// Functional unit `<object type>:<amount>[:<attribute>]`.
    #[arg(long)]
    pub fu: Option<String>,
    /// Extra characterization factors (CSV) merged into the bundle.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// JSON file supplying any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub log: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mode: Option<ModeArg>,
    pub scopes: Option<String>,
    pub fu: Option<String>,
    pub factors: Option<PathBuf>,
    pub seed: Option<u64>,
    pub size: Option<usize>,
    pub partial: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("config {} is not valid", path.display()))
    }
}

/// Fully resolved settings for an analysis command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub log: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mode: Mode,
    pub scopes: Option<ScopeSet>,
    pub fu: Option<FunctionalUnit>,
    pub factors: Option<PathBuf>,
}

fn non_empty(p: Option<PathBuf>, flag: &str) -> Result<Option<PathBuf>> {
    match p {
        Some(p) if p.as_os_str().is_empty() => bail!("--{flag} must not be empty"),
        other => Ok(other),
    }
}

impl RunConfig {
    pub fn resolve(args: CommonArgs) -> Result<Self> {
        let file = FileConfig::load(args.config.as_deref())?;
        let scopes = match args.scopes.or(file.scopes) {
            None => None,
            Some(s) => Some(match ScopeSet::preset(&s) {
                Some(preset) => preset,
                None => {
                    let bytes = std::fs::read(&s).with_context(|| format!("reading scope set {s}"))?;
                    ScopeSet::from_json(&bytes)?
                }
            }),
        };
        let fu = args.fu.or(file.fu).map(|s| FunctionalUnit::parse(&s)).transpose()?;
        Ok(RunConfig {
            log: non_empty(args.log.or(file.log), "log")?,
            annotations: non_empty(args.annotations.or(file.annotations), "annotations")?,
            out: non_empty(args.out.or(file.out), "out")?,
            mode: args.mode.or(file.mode).unwrap_or(ModeArg::Strict).into(),
            scopes,
            fu,
            factors: args.factors.or(file.factors),
        })
    }

    pub fn log_path(&self) -> Result<&Path> {
        self.log.as_deref().context("--log is required")
    }

    pub fn annotations_path(&self) -> Result<&Path> {
        self.annotations.as_deref().context("--annotations is required")
    }
}
