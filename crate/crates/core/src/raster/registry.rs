//! Class registry mapping nonzero integer ids to unique display names.

use super::{ClassId, RasterError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const FORMAT_TAG: &str = "class-registry-v1";

/// Registered object classes. Id 0 is background by convention and can never
/// be registered; ids and names are both unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassRegistry {
    names: BTreeMap<ClassId, String>,
}

#[derive(Serialize, Deserialize)]
struct RegistryDoc {
    format: String,
    classes: Vec<ClassEntry>,
}

#[derive(Serialize, Deserialize)]
struct ClassEntry {
    id: ClassId,
    name: String,
}

impl ClassRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: ClassId, name: &str) -> Result<(), RasterError> {
        if id == 0 {
            return Err(RasterError::InvalidRegistry("id 0 is reserved for background".into()));
        }
        if name.is_empty() {
            return Err(RasterError::InvalidRegistry("class name must be non-empty".into()));
        }
        if self.names.contains_key(&id) {
            return Err(RasterError::InvalidRegistry(format!("duplicate id {id}")));
        }
        if self.names.values().any(|n| n == name) {
            return Err(RasterError::InvalidRegistry(format!("duplicate name {name:?}")));
        }
        self.names.insert(id, name.to_string());
        Ok(())
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.names.contains_key(&id)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    /// Registered ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.names.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &str)> + '_ {
        self.names.iter().map(|(&id, name)| (id, name.as_str()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let doc = RegistryDoc {
            format: FORMAT_TAG.to_string(),
            classes: self
                .names
                .iter()
                .map(|(&id, name)| ClassEntry { id, name: name.clone() })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| RasterError::Format(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let text = fs::read_to_string(path)?;
        let doc: RegistryDoc =
            serde_json::from_str(&text).map_err(|e| RasterError::Format(e.to_string()))?;
        if doc.format != FORMAT_TAG {
            return Err(RasterError::Format(format!(
                "expected format {FORMAT_TAG:?}, got {:?}",
                doc.format
            )));
        }
        let mut registry = ClassRegistry::new();
        for entry in doc.classes {
            registry.register(entry.id, &entry.name)?;
        }
        Ok(registry)
    }
}
