//! Sessions, catalogs and the data-preparation protocol: day sessionization,
//! min-support filtering, prefix augmentation, ratio split, leave-one-out and
//! negative sampling.

mod io;
mod prepare;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_jsonl, write_jsonl};
pub use prepare::{
    augment_prefixes, filter_min_support, leave_one_out, prepare_dataset, sample_candidate_set,
    select_feedback, sessionize, split_dataset, Filtered, PrepareConfig, PreparedData,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub title: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// The item universe. Lookups by id are O(1).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(into = "Vec<Item>", try_from = "Vec<Item>")]
pub struct Catalog {
    items: Vec<Item>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.title.trim().is_empty() {
                return Err(Error::invalid(format!("item `{}` has an empty title", item.item_id)));
            }
            if index.insert(item.item_id.clone(), i).is_some() {
                return Err(Error::DuplicateItem(item.item_id.clone()));
            }
        }
        Ok(Self { items, index })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.index.get(item_id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.index.contains_key(item_id)
    }

    pub fn resolve(&self, item_id: &str) -> Result<&Item> {
        self.get(item_id).ok_or_else(|| Error::UnknownItem(item_id.to_string()))
    }

    pub fn title(&self, item_id: &str) -> Result<&str> {
        self.resolve(item_id).map(|i| i.title.as_str())
    }

    /// Sub-catalog containing only the given ids, in catalog order.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a String>) -> Catalog {
        let keep: std::collections::HashSet<&String> = keep.into_iter().collect();
        let items = self
            .items
            .iter()
            .filter(|i| keep.contains(&i.item_id))
            .cloned()
            .collect();
        Catalog::new(items).expect("subset of a valid catalog is valid")
    }
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl From<Catalog> for Vec<Item> {
    fn from(c: Catalog) -> Self {
        c.items
    }
}

impl TryFrom<Vec<Item>> for Catalog {
    type Error = Error;

    fn try_from(items: Vec<Item>) -> Result<Self> {
        Catalog::new(items)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub items: Vec<String>,
    /// Held-out next item, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, items: Vec<String>) -> Self {
        Self {
            session_id: session_id.into(),
            items,
            target: None,
        }
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn require_target(&self) -> Result<&str> {
        self.target
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("session `{}` has no target", self.session_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Session>,
    pub validation: Vec<Session>,
    pub test: Vec<Session>,
    pub seed: u64,
}

/// The ranked pool shown to the recommender for one session: the target plus
/// sampled negatives, in a seed-shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub session_id: String,
    pub candidates: Vec<String>,
    pub target_index: usize,
}

impl CandidateSet {
    pub fn target(&self) -> &str {
        &self.candidates[self.target_index]
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.candidates.iter().any(|c| c == item_id)
    }
}
