//! Ideology valence: how consistently a user's labeled shares fall under a
//! center-right versus center-left label.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::ingest::{Label, LabelInterval, ShareEvent};
use crate::{Error, Result};

/// Label active at time `t` among one user's intervals.
pub fn label_at(intervals: &[LabelInterval], t: i64) -> Option<Label> {
    intervals.iter().find(|iv| iv.contains(t)).map(|iv| iv.label)
}

/// Per-user label timelines, validated to be non-overlapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTimelines {
    // Sorted by start within each user.
    by_user: HashMap<String, Vec<(i64, i64, Label)>>,
}

impl LabelTimelines {
    pub fn from_intervals<I>(intervals: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Borrow<LabelInterval>,
    {
        let mut by_user: HashMap<String, Vec<(i64, i64, Label)>> = HashMap::new();
        for iv in intervals {
            let iv = iv.borrow();
            if iv.start >= iv.end {
                return Err(Error::InvalidInput(format!(
                    "label interval [{}, {}) for user {} is empty",
                    iv.start, iv.end, iv.user_id
                )));
            }
            by_user
                .entry(iv.user_id.clone())
                .or_default()
                .push((iv.start, iv.end, iv.label));
        }
        for (user, spans) in by_user.iter_mut() {
            spans.sort_unstable();
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(Error::OverlappingLabels {
                        user: user.clone(),
                        first_start: pair[0].0,
                        first_end: pair[0].1,
                        second_start: pair[1].0,
                        second_end: pair[1].1,
                    });
                }
            }
        }
        Ok(LabelTimelines { by_user })
    }

    pub fn is_empty(&self) -> bool {
        self.by_user.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }

    pub fn label_at(&self, user: &str, t: i64) -> Option<Label> {
        let spans = self.by_user.get(user)?;
        // Last interval starting at or before t.
        let idx = spans.partition_point(|&(start, _, _)| start <= t);
        let &(_, end, label) = spans.get(idx.checked_sub(1)?)?;
        (t < end).then_some(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvScore {
    pub user_id: String,
    pub cr_count: u64,
    pub cl_count: u64,
    pub iv: f64,
}

impl IvScore {
    fn new(user_id: String, cr_count: u64, cl_count: u64) -> Self {
        let iv = (cr_count as f64 - cl_count as f64) / (cr_count + cl_count) as f64;
        IvScore {
            user_id,
            cr_count,
            cl_count,
            iv,
        }
    }
}

/// Ideology valence of every user with at least one labeled share, by
/// ascending user id. Shares made while the user carries no label are ignored.
pub fn ideology_valence<'a, I>(shares: I, timelines: &LabelTimelines) -> Vec<IvScore>
where
    I: IntoIterator<Item = &'a ShareEvent>,
{
    let mut tally: BTreeMap<&'a str, (u64, u64)> = BTreeMap::new();
    for share in shares {
        match timelines.label_at(&share.user_id, share.timestamp) {
            Some(Label::CR) => tally.entry(share.user_id.as_str()).or_default().0 += 1,
            Some(Label::CL) => tally.entry(share.user_id.as_str()).or_default().1 += 1,
            None => {}
        }
    }
    tally
        .into_iter()
        .map(|(user, (cr, cl))| IvScore::new(user.to_owned(), cr, cl))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(user: &str, start: i64, end: i64, label: Label) -> LabelInterval {
        LabelInterval {
            user_id: user.into(),
            start,
            end,
            label,
        }
    }

    fn share(user: &str, t: i64) -> ShareEvent {
        ShareEvent {
            user_id: user.into(),
            outlet_id: "A".into(),
            timestamp: t,
        }
    }

    #[test]
    fn containment_is_half_open() {
        let intervals = vec![iv("u", 0, 10, Label::CL)];
        assert_eq!(label_at(&intervals, 5), Some(Label::CL));
        assert_eq!(label_at(&intervals, 10), None);
        assert_eq!(label_at(&[], 5), None);
        let t = LabelTimelines::from_intervals(&intervals).unwrap();
        assert_eq!(t.label_at("u", 0), Some(Label::CL));
        assert_eq!(t.label_at("u", 10), None);
        assert_eq!(t.label_at("u", -1), None);
        assert_eq!(t.label_at("v", 5), None);
    }

    #[test]
    fn switch_instant_belongs_to_new_label() {
        let t = LabelTimelines::from_intervals(vec![
            iv("u", 10, 20, Label::CR),
            iv("u", 0, 10, Label::CL),
        ])
        .unwrap();
        assert_eq!(t.label_at("u", 9), Some(Label::CL));
        assert_eq!(t.label_at("u", 10), Some(Label::CR));
    }

    #[test]
    fn overlap_is_fatal() {
        let err = LabelTimelines::from_intervals(vec![
            iv("u", 0, 10, Label::CL),
            iv("u", 5, 15, Label::CR),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::OverlappingLabels { .. }));
    }

    #[test]
    fn valence_arithmetic() {
        let t = LabelTimelines::from_intervals(vec![
            iv("a", 0, 100, Label::CR),
            iv("a", 100, 200, Label::CL),
            iv("b", 0, 200, Label::CL),
            iv("c", 0, 50, Label::CR),
            iv("c", 50, 100, Label::CL),
        ])
        .unwrap();
        let mut shares = vec![share("a", 1), share("a", 2), share("a", 3), share("a", 150)];
        shares.extend((0..5).map(|k| share("b", k)));
        shares.extend([share("c", 10), share("c", 60), share("c", 500)]);
        shares.push(share("nobody", 1));

        let scores = ideology_valence(&shares, &t);
        let by: HashMap<_, _> = scores.iter().map(|s| (s.user_id.as_str(), s)).collect();
        assert_eq!(scores.len(), 3);
        assert_eq!(by["a"].iv, 0.5);
        assert_eq!((by["a"].cr_count, by["a"].cl_count), (3, 1));
        assert_eq!(by["b"].iv, -1.0);
        assert_eq!(by["c"].iv, 0.0);
    }
}
