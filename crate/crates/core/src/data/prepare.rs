use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{Catalog, CandidateSet, DatasetSplit, InteractionRecord, Session};
use crate::error::{Error, Result};
use crate::seed::rng_for;

const SECONDS_PER_DAY: i64 = 86_400;
// 9999-12-31T23:59:59Z
const MAX_TIMESTAMP: i64 = 253_402_300_799;

/// Keep only the records counted as positive feedback.
pub fn select_feedback(records: &[InteractionRecord], keep_unrated: bool) -> Vec<InteractionRecord> {
    records
        .iter()
        .filter(|r| keep_unrated || r.rating.is_some())
        .cloned()
        .collect()
}

/// Group each user's records by UTC calendar day; every group becomes one
/// session with items in ascending timestamp order. Output is ordered by
/// `(user_id, day)`.
pub fn sessionize(records: &[InteractionRecord]) -> Result<Vec<Session>> {
    if records.is_empty() {
        return Err(Error::invalid("no interaction records"));
    }
    let mut groups: BTreeMap<(&str, i64), Vec<(i64, usize)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if !(0..=MAX_TIMESTAMP).contains(&r.timestamp) {
            return Err(Error::BadTimestamp {
                index: i,
                user_id: r.user_id.clone(),
                item_id: r.item_id.clone(),
                timestamp: r.timestamp,
            });
        }
        let day = r.timestamp.div_euclid(SECONDS_PER_DAY);
        groups
            .entry((r.user_id.as_str(), day))
            .or_default()
            .push((r.timestamp, i));
    }
    Ok(groups
        .into_iter()
        .map(|((user, day), mut rows)| {
            // stable: equal timestamps keep input order
            rows.sort_by_key(|&(ts, _)| ts);
            let items = rows.iter().map(|&(_, i)| records[i].item_id.clone()).collect();
            Session::new(format!("{user}@{day}"), items)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub sessions: Vec<Session>,
    /// Items that survive, i.e. the induced catalog subset.
    pub items: BTreeSet<String>,
}

/// Drop short sessions and rare items (counted in distinct sessions) until
/// neither rule removes anything.
pub fn filter_min_support(sessions: &[Session], min_support: usize) -> Result<Filtered> {
    if min_support == 0 {
        return Err(Error::invalid("min_support must be >= 1"));
    }
    let mut current: Vec<Session> = sessions.to_vec();
    loop {
        let mut support: HashMap<&str, usize> = HashMap::new();
        for s in &current {
            let distinct: HashSet<&str> = s.items.iter().map(String::as_str).collect();
            for item in distinct {
                *support.entry(item).or_default() += 1;
            }
        }
        let rare: HashSet<String> = support
            .iter()
            .filter(|&(_, &n)| n < min_support)
            .map(|(k, _)| k.to_string())
            .collect();

        let mut changed = false;
        let mut next = Vec::with_capacity(current.len());
        for s in current {
            let items: Vec<String> = if rare.is_empty() {
                s.items
            } else {
                let before = s.items.len();
                let kept: Vec<String> = s.items.into_iter().filter(|i| !rare.contains(i)).collect();
                changed |= kept.len() != before;
                kept
            };
            if items.len() < min_support || items.is_empty() {
                changed = true;
                continue;
            }
            next.push(Session { items, ..s });
        }
        current = next;
        if !changed {
            break;
        }
    }
    if current.is_empty() {
        return Err(Error::EmptyDataset { min_support });
    }
    let items = current.iter().flat_map(|s| s.items.iter().cloned()).collect();
    Ok(Filtered {
        sessions: current,
        items,
    })
}

/// Expand a session of length `l` into `l - 1` next-item samples: sample `k`
/// sees the first `k` items and predicts item `k + 1`.
pub fn augment_prefixes(session: &Session) -> Vec<Session> {
    (1..session.items.len())
        .map(|k| Session {
            session_id: format!("{}#{k}", session.session_id),
            items: session.items[..k].to_vec(),
            target: Some(session.items[k].clone()),
        })
        .collect()
}

/// Hold out the last item as the target. `None` for single-item sessions.
pub fn leave_one_out(session: &Session) -> Option<Session> {
    let (last, head) = session.items.split_last()?;
    if head.is_empty() {
        return None;
    }
    Some(Session {
        session_id: session.session_id.clone(),
        items: head.to_vec(),
        target: Some(last.clone()),
    })
}

/// Seeded shuffle followed by a contiguous partition in the given ratio.
pub fn split_dataset(sessions: &[Session], ratio: (u32, u32, u32), seed: u64) -> Result<DatasetSplit> {
    let (a, b, c) = ratio;
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::invalid("split ratio components must be positive"));
    }
    let total = (a + b + c) as usize;
    if sessions.len() < total {
        return Err(Error::TooFewSessions {
            needed: total,
            got: sessions.len(),
        });
    }
    let mut seen = HashSet::new();
    for s in sessions {
        if !seen.insert(s.session_id.as_str()) {
            return Err(Error::invalid(format!("duplicate session id `{}`", s.session_id)));
        }
    }
    let mut shuffled = sessions.to_vec();
    shuffled.shuffle(&mut rng_for(seed, "split"));
    let n = shuffled.len();
    let n_train = n * a as usize / total;
    let n_val = n * b as usize / total;
    let test = shuffled.split_off(n_train + n_val);
    let validation = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        validation,
        test,
        seed,
    })
}

/// Target plus `size - 1` negatives drawn uniformly without replacement from
/// the catalog minus the target and the session's own items, then shuffled.
pub fn sample_candidate_set(
    session: &Session,
    catalog: &Catalog,
    size: usize,
    seed: u64,
) -> Result<CandidateSet> {
    if size == 0 {
        return Err(Error::invalid("candidate set size must be >= 1"));
    }
    let target = session.require_target()?;
    if !catalog.contains(target) {
        return Err(Error::UnknownItem(target.to_string()));
    }
    let excluded: HashSet<&str> = session
        .items
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(target))
        .collect();
    let eligible: Vec<&str> = catalog
        .items()
        .iter()
        .map(|i| i.item_id.as_str())
        .filter(|id| !excluded.contains(id))
        .collect();
    let needed = size - 1;
    if eligible.len() < needed {
        return Err(Error::CatalogTooSmall {
            needed,
            available: eligible.len(),
        });
    }
    let mut rng = rng_for(seed, &format!("candidates/{}", session.session_id));
    let mut candidates: Vec<String> = index::sample(&mut rng, eligible.len(), needed)
        .into_iter()
        .map(|i| eligible[i].to_string())
        .collect();
    candidates.push(target.to_string());
    candidates.shuffle(&mut rng);
    let target_index = candidates.iter().position(|c| c == target).expect("target inserted");
    Ok(CandidateSet {
        session_id: session.session_id.clone(),
        candidates,
        target_index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub min_support: usize,
    pub ratio: (u32, u32, u32),
    pub seed: u64,
    pub keep_unrated: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            min_support: 3,
            ratio: (7, 1, 2),
            seed: 0,
            keep_unrated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub catalog: Catalog,
    /// Train holds prefix-augmented samples; validation and test hold
    /// leave-one-out sessions.
    pub split: DatasetSplit,
    pub raw_sessions: usize,
}

/// sessionize -> filter -> split -> augment (train) / leave-one-out (val, test).
pub fn prepare_dataset(
    records: &[InteractionRecord],
    catalog: &Catalog,
    config: &PrepareConfig,
) -> Result<PreparedData> {
    for r in records {
        if !catalog.contains(&r.item_id) {
            return Err(Error::UnknownItem(r.item_id.clone()));
        }
    }
    let positives = select_feedback(records, config.keep_unrated);
    let sessions = sessionize(&positives)?;
    let filtered = filter_min_support(&sessions, config.min_support)?;
    let raw = split_dataset(&filtered.sessions, config.ratio, config.seed)?;
    let split = DatasetSplit {
        train: raw.train.iter().flat_map(augment_prefixes).collect(),
        validation: raw.validation.iter().filter_map(leave_one_out).collect(),
        test: raw.test.iter().filter_map(leave_one_out).collect(),
        seed: config.seed,
    };
    Ok(PreparedData {
        catalog: catalog.restrict(&filtered.items),
        split,
        raw_sessions: filtered.sessions.len(),
    })
}
