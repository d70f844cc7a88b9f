//! Digest manifest for the shipped sample corpus.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub files: Vec<FixtureEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureCheck {
    pub path: String,
    pub expected: String,
    pub actual: String,
}

impl FixtureCheck {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl FixtureManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Build a manifest for `files` (relative to `root`).
    pub fn compute(root: &Path, files: &[(&str, &str)]) -> Result<Self> {
        let files = files
            .iter()
            .map(|(path, description)| {
                let bytes = read_fixture(root, path)?;
                Ok(FixtureEntry {
                    path: (*path).to_owned(),
                    sha256: sha256_hex(&bytes),
                    description: (*description).to_owned(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(FixtureManifest { files })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        text.push('\n');
        text
    }
}

fn read_fixture(root: &Path, path: &str) -> Result<Vec<u8>> {
    let full = root.join(path);
    std::fs::read(&full).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFixture(full),
        _ => Error::Io(e),
    })
}

/// Compare every listed file against its recorded digest.
pub fn verify_fixtures(manifest: &FixtureManifest, root: &Path) -> Result<Vec<FixtureCheck>> {
    manifest
        .files
        .iter()
        .map(|f| {
            let actual = sha256_hex(&read_fixture(root, &f.path)?);
            Ok(FixtureCheck { path: f.path.clone(), expected: f.sha256.clone(), actual })
        })
        .collect()
}
