use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{AdError, Array};

/// Named parameter arrays with insertion-ordered iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Array>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter; names must be unique.
    pub fn insert(&mut self, name: &str, value: Array) -> Result<(), AdError> {
        if self.entries.contains_key(name) {
            return Err(AdError::DuplicateParam(name.to_string()));
        }
        self.entries.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array, AdError> {
        self.entries
            .get(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    /// Replaces the value of an existing parameter; the shape must not change.
    pub fn set(&mut self, name: &str, value: Array) -> Result<(), AdError> {
        let slot = self
            .entries
            .get_mut(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(AdError::Shape(format!(
                "parameter {name}: shape {:?} cannot become {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Number of named entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all entries.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Array::len).sum()
    }

    /// Concatenation of every entry's data in iteration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for a in self.entries.values() {
            out.extend_from_slice(a.data());
        }
        out
    }

    /// Same names and shapes as `self`, filled from `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Self, AdError> {
        if flat.len() != self.num_scalars() {
            return Err(AdError::Shape(format!(
                "flat vector has {} values, store holds {}",
                flat.len(),
                self.num_scalars()
            )));
        }
        let mut offset = 0;
        let mut entries = IndexMap::with_capacity(self.entries.len());
        for (name, a) in &self.entries {
            let chunk = flat[offset..offset + a.len()].to_vec();
            offset += a.len();
            entries.insert(name.clone(), Array::new(a.shape().to_vec(), chunk)?);
        }
        Ok(Self { entries })
    }

    /// The entries whose names satisfy `keep`, in order.
    pub fn subset(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Overwrites the entries named in `other`.
    pub fn update_from(&mut self, other: &ParamStore) -> Result<(), AdError> {
        for (name, a) in other.iter() {
            self.set(name, a.clone())?;
        }
        Ok(())
    }

    /// Euclidean norm over all scalars.
    pub fn norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|a| a.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Serialized form of one parameter: name, shape and row-major data.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamStore {
    pub fn to_named(&self) -> Vec<NamedArray> {
        self.iter()
            .map(|(name, a)| NamedArray {
                name: name.to_string(),
                shape: a.shape().to_vec(),
                data: a.data().to_vec(),
            })
            .collect()
    }

    pub fn from_named(items: Vec<NamedArray>) -> Result<Self, AdError> {
        let mut store = Self::new();
        for item in items {
            store.insert(&item.name, Array::new(item.shape, item.data)?)?;
        }
        Ok(store)
    }
}
