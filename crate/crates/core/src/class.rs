//! Class identifiers and the canonical class table.
//!
//! Identifiers run 1..=M in byte order of the normalized class names; 0 is
//! reserved for the raster background, which caps M at 255 so every class
//! keeps a distinct nonzero gray value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CLASSES: u16 = 255;

/// 1-based class identifier; 0 never names a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(u16);

impl ClassId {
    pub fn new(raw: u16) -> Result<Self> {
        if raw == 0 || raw > MAX_CLASSES {
            return Err(Error::ClassTable(format!(
                "class id {raw} out of range 1..={MAX_CLASSES}"
            )));
        }
        Ok(ClassId(raw))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    /// Zero-based index into per-class storage.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Lowercase a name and collapse internal whitespace to single spaces.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Ordered mapping from normalized class name to contiguous id 1..=M.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    names: Vec<String>,
    by_name: BTreeMap<String, ClassId>,
}

impl ClassTable {
    /// Build a table from normalized names, sorted lexicographically
    /// (byte order) and numbered from 1. Input order is irrelevant.
    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Result<Self> {
        let mut distinct: Vec<String> = names
            .into_iter()
            .map(|n| normalize_name(&n))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        distinct.retain(|n| !n.is_empty());
        if distinct.is_empty() {
            return Err(Error::ClassTable("no class names supplied".into()));
        }
        if distinct.len() > usize::from(MAX_CLASSES) {
            return Err(Error::ClassTable(format!(
                "{} classes exceed the maximum of {MAX_CLASSES}",
                distinct.len()
            )));
        }
        let by_name = distinct
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ClassId((i + 1) as u16)))
            .collect();
        Ok(ClassTable {
            names: distinct,
            by_name,
        })
    }

    /// Rebuild from an explicit name -> id mapping, rejecting gaps,
    /// duplicates, and non-lexicographic numbering.
    pub fn from_mapping(mapping: &BTreeMap<String, u16>) -> Result<Self> {
        let table = Self::from_names(mapping.keys().cloned())?;
        for (name, &id) in mapping {
            let expect = table
                .id_of(name)
                .ok_or_else(|| Error::ClassTable(format!("unknown class name {name:?}")))?;
            if expect.get() != id {
                return Err(Error::ClassTable(format!(
                    "class {name:?} carries id {id}, expected {expect} (ids must be \
                     lexicographic over normalized names, starting at 1)"
                )));
            }
        }
        Ok(table)
    }

    /// Number of classes M.
    pub fn len(&self) -> u16 {
        self.names.len() as u16
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(&normalize_name(name)).copied()
    }

    pub fn name_of(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    /// All ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..=self.len()).map(ClassId)
    }

    /// (id, name) pairs in id order.
    pub fn entries(&self) -> impl Iterator<Item = (ClassId, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (ClassId((i + 1) as u16), n.as_str()))
    }

    pub fn to_mapping(&self) -> BTreeMap<String, u16> {
        self.by_name
            .iter()
            .map(|(n, id)| (n.clone(), id.get()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_numbering() {
        let t = ClassTable::from_names(["b", "a", "c"].map(String::from)).unwrap();
        assert_eq!(t.id_of("a").unwrap().get(), 1);
        assert_eq!(t.id_of("b").unwrap().get(), 2);
        assert_eq!(t.id_of("c").unwrap().get(), 3);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn normalization_folds_case_and_spaces() {
        let t = ClassTable::from_names(["Ground  Track   Field".to_string()]).unwrap();
        assert_eq!(t.name_of(ClassId(1)).unwrap(), "ground track field");
        assert!(t.id_of("ground track FIELD").is_some());
    }

    #[test]
    fn duplicate_names_collapse() {
        let t = ClassTable::from_names(["ship", "Ship", " ship "].map(String::from)).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn mapping_must_match_lexicographic_ids() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 2u16);
        m.insert("b".to_string(), 1u16);
        assert!(ClassTable::from_mapping(&m).is_err());
        m.insert("a".to_string(), 1u16);
        m.insert("b".to_string(), 2u16);
        assert!(ClassTable::from_mapping(&m).is_ok());
    }
}
