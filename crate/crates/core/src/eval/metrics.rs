use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::llm::RankedOutput;

/// Leave-one-out ranking metrics with a single relevant item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Hr(usize),
    Ndcg(usize),
}

impl Metric {
    pub const DEFAULT_SET: [Metric; 4] = [Metric::Hr(5), Metric::Hr(10), Metric::Ndcg(5), Metric::Ndcg(10)];

    pub fn score(self, ranked: &RankedOutput, target: &str) -> f64 {
        match self {
            Metric::Hr(k) => hr_at_k(ranked, target, k) as f64,
            Metric::Ndcg(k) => ndcg_at_k(ranked, target, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Hr(k) => write!(f, "HR@{k}"),
            Metric::Ndcg(k) => write!(f, "NDCG@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| Error::invalid(format!("metric `{s}` lacks @k")))?;
        let k: usize = k.parse().map_err(|_| Error::invalid(format!("bad cutoff in `{s}`")))?;
        if k == 0 {
            return Err(Error::invalid("metric cutoff must be >= 1"));
        }
        match name.to_ascii_lowercase().as_str() {
            "hr" => Ok(Metric::Hr(k)),
            "ndcg" => Ok(Metric::Ndcg(k)),
            _ => Err(Error::invalid(format!("unknown metric `{s}`"))),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn rank_within(ranked: &RankedOutput, target: &str, k: usize) -> Option<usize> {
    ranked
        .ranked_item_ids
        .iter()
        .take(k)
        .position(|id| id == target)
        .map(|p| p + 1)
}

pub fn hr_at_k(ranked: &RankedOutput, target: &str, k: usize) -> u8 {
    rank_within(ranked, target, k).is_some() as u8
}

/// `1 / log2(rank + 1)` when the target sits within the first `k`, else 0.
pub fn ndcg_at_k(ranked: &RankedOutput, target: &str, k: usize) -> f64 {
    rank_within(ranked, target, k).map_or(0.0, |r| 1.0 / ((r + 1) as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranked(ids: &[&str]) -> RankedOutput {
        RankedOutput {
            session_id: "s".into(),
            ranked_item_ids: ids.iter().map(|s| s.to_string()).collect(),
            raw_text: String::new(),
            unmatched_lines: vec![],
            parse_warning: false,
        }
    }

    const TEN: [&str; 11] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"];

    #[test]
    fn hit_rate_cases() {
        let r = ranked(&TEN);
        assert_eq!(hr_at_k(&r, "c", 5), 1);
        assert_eq!(hr_at_k(&r, "g", 5), 0);
        assert_eq!(hr_at_k(&r, "zz", 10), 0);
    }

    #[test]
    fn ndcg_cases() {
        let r = ranked(&TEN);
        assert_eq!(ndcg_at_k(&r, "a", 10), 1.0);
        assert!((ndcg_at_k(&r, "c", 10) - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&r, "k", 10), 0.0);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::DEFAULT_SET {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("NDCG".parse::<Metric>().is_err());
        assert!("MRR@3".parse::<Metric>().is_err());
        assert!("HR@0".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn bounds_and_monotonicity(rank in 1usize..30, k in 1usize..20) {
            let ids: Vec<String> = (0..30).map(|i| format!("x{i}")).collect();
            let r = RankedOutput { ranked_item_ids: ids, ..ranked(&[]) };
            let t = format!("x{}", rank - 1);
            let n = ndcg_at_k(&r, &t, k);
            prop_assert!((0.0..=1.0).contains(&n));
            prop_assert!(hr_at_k(&r, &t, k) <= 1);
            let worse = format!("x{}", rank.min(29));
            prop_assert!(ndcg_at_k(&r, &worse, k) <= n);
            prop_assert!(ndcg_at_k(&r, &t, 5) <= ndcg_at_k(&r, &t, 10));
            prop_assert!(hr_at_k(&r, &t, 5) <= hr_at_k(&r, &t, 10));
        }
    }
}
