use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{BoundingBox, ExtremeClicks};

/// One object instance to annotate or evaluate.
///
/// Relative paths in a manifest file are resolved against the directory
/// holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Defaults to the image file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image: PathBuf,
    pub class: String,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clicks: Option<ExtremeClicks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn new(image: impl Into<PathBuf>, class: impl Into<String>) -> Self {
        Self {
            id: None,
            image: image.into(),
            class: class.into(),
            bbox: None,
            mask: None,
            clicks: None,
            edges: None,
        }
    }

    /// The explicit id, or the image file stem.
    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    fn files(&self) -> impl Iterator<Item = &PathBuf> {
        std::iter::once(&self.image).chain(self.mask.iter()).chain(self.edges.iter())
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.image);
        if let Some(m) = self.mask.as_mut() {
            join(m);
        }
        if let Some(e) = self.edges.as_mut() {
            join(e);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    /// The manifest file stem.
    pub dataset: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a JSON-lines manifest, one entry per non-blank line.
///
/// Fails on the first malformed line, empty class label, duplicate id or
/// missing file, naming the 1-based line number.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ids = HashSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(raw).map_err(|e| EvalError::Parse {
            line,
            message: e.to_string(),
        })?;
        if entry.class.trim().is_empty() {
            return Err(EvalError::EmptyClass { line });
        }
        let id = entry.id();
        if !ids.insert(id.clone()) {
            return Err(EvalError::DuplicateId { line, id });
        }
        entry.resolve(&base);
        if let Some(missing) = entry.files().find(|p| !p.is_file()) {
            return Err(EvalError::MissingFile {
                line,
                path: missing.clone(),
            });
        }
        entries.push(entry);
    }
    let dataset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(DatasetManifest { dataset, entries })
}

/// Writes entries as JSON lines, paths verbatim.
pub fn write_manifest<W: Write>(entries: &[ManifestEntry], mut out: W) -> Result<(), EvalError> {
    for e in entries {
        let line = serde_json::to_string(e).expect("manifest entries serialise");
        writeln!(out, "{line}").map_err(|source| EvalError::Io {
            path: PathBuf::from("<output>"),
            source,
        })?;
    }
    Ok(())
}
