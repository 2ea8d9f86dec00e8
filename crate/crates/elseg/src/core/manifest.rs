//! Dataset manifests: which images exist, which masks label them, what
//! defect kind each annotation covers and which split the pair belongs to.
//!
//! On disk a manifest is a JSON object
//! `{"root": string, "entries": [{"image", "mask", "kind", "split"}]}` with
//! entry paths relative to `root`; a relative `root` is resolved against the
//! manifest file's directory at load time.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Shunt,
    Droplet,
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefectKind::Shunt => write!(f, "shunt"),
            DefectKind::Droplet => write!(f, "droplet"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Final,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
            Split::Final => write!(f, "final"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub mask: Option<String>,
    pub kind: DefectKind,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let manifest = DatasetManifest {
            root: root.into(),
            entries,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Check the manifest invariants: an image appears at most once per
    /// defect kind, and every test/final entry carries a mask.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashSet<(&str, DefectKind)> = HashSet::new();
        for entry in &self.entries {
            if !seen.insert((entry.image.as_str(), entry.kind)) {
                return Err(Error::DuplicateEntry {
                    image: entry.image.clone(),
                    kind: entry.kind.to_string(),
                });
            }
            if entry.mask.is_none() && matches!(entry.split, Split::Test | Split::Final) {
                return Err(Error::MissingMask {
                    image: entry.image.clone(),
                    split: entry.split.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    pub fn mask_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.mask.as_ref().map(|m| self.root.join(m))
    }

    pub fn filter(
        &self,
        kind: Option<DefectKind>,
        split: Option<Split>,
    ) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| {
            kind.is_none_or(|k| e.kind == k) && split.is_none_or(|s| e.split == s)
        })
    }

    pub fn count(&self, kind: Option<DefectKind>, split: Option<Split>) -> usize {
        self.filter(kind, split).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Load and validate a manifest file.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
    if manifest.root.is_relative() {
        if let Some(parent) = path.parent() {
            manifest.root = parent.join(&manifest.root);
        }
    }
    manifest.validate()?;
    Ok(manifest)
}
