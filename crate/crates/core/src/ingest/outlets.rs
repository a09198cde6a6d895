use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::Serialize;

use super::ShareEvent;
use crate::{Error, Result};

/// Total number of shares per outlet.
pub fn outlet_share_counts<'a, I>(events: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a ShareEvent>,
{
    let mut counts: HashMap<&'a str, u64> = HashMap::new();
    for e in events {
        *counts.entry(e.outlet_id.as_str()).or_default() += 1;
    }
    counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

/// Ranks outlets by descending share count, ties by outlet id, keeping at
/// most `k` after intersecting with `allowlist`.
pub fn rank_outlets(
    counts: &BTreeMap<String, u64>,
    k: usize,
    allowlist: Option<&HashSet<String>>,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::InvalidInput("outlet count k must be at least 1".into()));
    }
    let mut ranked: Vec<(&String, u64)> = counts
        .iter()
        .filter(|(id, _)| allowlist.is_none_or(|allow| allow.contains(*id)))
        .map(|(id, &n)| (id, n))
        .collect();
    // BTreeMap iteration is already lexicographic, so a stable sort on the
    // count alone keeps ties in id order.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    if ranked.len() < k {
        warn!(
            "requested {k} outlets but only {} are available; keeping all",
            ranked.len()
        );
    }
    Ok(ranked.into_iter().take(k).map(|(id, _)| id.clone()).collect())
}

/// The `k` most shared outlets, optionally restricted to an allowlist.
pub fn select_top_outlets(
    events: &[ShareEvent],
    k: usize,
    allowlist: Option<&HashSet<String>>,
) -> Result<Vec<String>> {
    rank_outlets(&outlet_share_counts(events), k, allowlist)
}

/// How much of the raw activity survives restricting to an outlet set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Retention {
    pub users_before: usize,
    pub users_after: usize,
    pub events_before: usize,
    pub events_after: usize,
}

impl Retention {
    pub fn user_fraction(&self) -> f64 {
        self.users_after as f64 / self.users_before.max(1) as f64
    }

    pub fn event_fraction(&self) -> f64 {
        self.events_after as f64 / self.events_before.max(1) as f64
    }
}

pub fn retention(events: &[ShareEvent], outlets: &[String]) -> Retention {
    let keep: HashSet<&str> = outlets.iter().map(String::as_str).collect();
    let mut users_before = HashSet::new();
    let mut users_after = HashSet::new();
    let mut events_after = 0;
    for e in events {
        users_before.insert(e.user_id.as_str());
        if keep.contains(e.outlet_id.as_str()) {
            users_after.insert(e.user_id.as_str());
            events_after += 1;
        }
    }
    Retention {
        users_before: users_before.len(),
        users_after: users_after.len(),
        events_before: events.len(),
        events_after,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(spec: &[(&str, usize)]) -> Vec<ShareEvent> {
        let mut out = Vec::new();
        for (outlet, n) in spec {
            for i in 0..*n {
                out.push(ShareEvent {
                    user_id: format!("u{i}"),
                    outlet_id: outlet.to_string(),
                    timestamp: i as i64,
                });
            }
        }
        out
    }

    #[test]
    fn descending_counts() {
        let ev = shares(&[("C", 1), ("A", 10), ("B", 5)]);
        assert_eq!(select_top_outlets(&ev, 2, None).unwrap(), vec!["A", "B"]);
    }

    #[test]
    fn lexicographic_tie_break() {
        let ev = shares(&[("B", 5), ("A", 5)]);
        assert_eq!(select_top_outlets(&ev, 1, None).unwrap(), vec!["A"]);
    }

    #[test]
    fn allowlist_then_truncate() {
        let ev = shares(&[("A", 10), ("B", 5), ("C", 1)]);
        let allow: HashSet<String> = ["C", "B"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            select_top_outlets(&ev, 5, Some(&allow)).unwrap(),
            vec!["B", "C"]
        );
    }

    #[test]
    fn fewer_than_k_returns_all() {
        let ev = shares(&[("A", 2), ("B", 1)]);
        assert_eq!(select_top_outlets(&ev, 10, None).unwrap(), vec!["A", "B"]);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(select_top_outlets(&[], 0, None).is_err());
    }

    #[test]
    fn idempotent_on_filtered_events() {
        let ev = shares(&[("A", 7), ("B", 7), ("C", 3), ("D", 9), ("E", 1)]);
        let top = select_top_outlets(&ev, 3, None).unwrap();
        let filtered: Vec<ShareEvent> = ev
            .iter()
            .filter(|e| top.contains(&e.outlet_id))
            .cloned()
            .collect();
        assert_eq!(select_top_outlets(&filtered, 3, None).unwrap(), top);
    }

    #[test]
    fn retention_counts() {
        let ev = shares(&[("A", 3), ("B", 1)]);
        let r = retention(&ev, &["A".to_string()]);
        assert_eq!((r.users_before, r.users_after), (3, 3));
        assert_eq!((r.events_before, r.events_after), (4, 3));
    }
}
