use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureGroup {
    Climate,
    Soil,
    Topography,
    Vegetation,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Climate,
        FeatureGroup::Soil,
        FeatureGroup::Topography,
        FeatureGroup::Vegetation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Climate => "climate",
            FeatureGroup::Soil => "soil",
            FeatureGroup::Topography => "topography",
            FeatureGroup::Vegetation => "vegetation",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "climate" => Ok(FeatureGroup::Climate),
            "soil" => Ok(FeatureGroup::Soil),
            "topography" | "topology" => Ok(FeatureGroup::Topography),
            "vegetation" => Ok(FeatureGroup::Vegetation),
            other => Err(format!(
                "unknown feature group `{other}` (expected climate, soil, topography or vegetation)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureEntry {
    pub name: String,
    pub group: FeatureGroup,
}

impl FeatureEntry {
    pub fn new(name: impl Into<String>, group: FeatureGroup) -> Self {
        Self {
            name: name.into(),
            group,
        }
    }
}

/// Ordered static-feature names with their group tags.
///
/// Entry `k` is static-input index `k` everywhere in the crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureCatalog {
    entries: Vec<FeatureEntry>,
}

impl FeatureCatalog {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.name.trim().is_empty() {
                return Err(Error::Contract("feature names must be non-empty".into()));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Contract(format!(
                    "duplicate feature name `{}`",
                    e.name
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Reads a `name,group` CSV with a header row.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::load(path, None, e.to_string()))?;
        let mut entries = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::load(path, None, e.to_string()))?;
            let line = rec.position().map(|p| p.line() as usize);
            if rec.len() != 2 {
                return Err(Error::load(path, line, "expected `name,group`"));
            }
            let group = rec[1]
                .parse()
                .map_err(|e: String| Error::load(path, line, e))?;
            entries.push(FeatureEntry::new(&rec[0], group));
        }
        Self::new(entries).map_err(|e| Error::load(path, None, e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,group\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.name, e.group));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &FeatureEntry {
        &self.entries[k]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Returns a catalog with `entry` appended.
    pub fn with_entry(&self, entry: FeatureEntry) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries.push(entry);
        Self::new(entries)
    }
}
