use std::collections::HashMap;

use mediashare_core::ideology::{ideology_valence, IvScore, LabelTimelines};
use mediashare_core::ingest::{Label, LabelInterval, ShareEvent};
use proptest::prelude::*;

/// Label windows for up to 5 users: consecutive spans, some left unlabeled.
fn timelines() -> impl Strategy<Value = Vec<LabelInterval>> {
    prop::collection::vec(
        (0usize..5, prop::collection::vec((1i64..50, any::<bool>(), any::<bool>()), 1..6)),
        0..6,
    )
    .prop_map(|users| {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (u, spans) in users {
            if !seen.insert(u) {
                continue;
            }
            let mut t = 0;
            for (len, labeled, cr) in spans {
                if labeled {
                    out.push(LabelInterval {
                        user_id: format!("u{u}"),
                        start: t,
                        end: t + len,
                        label: if cr { Label::CR } else { Label::CL },
                    });
                }
                t += len;
            }
        }
        out
    })
}

fn shares() -> impl Strategy<Value = Vec<ShareEvent>> {
    prop::collection::vec((0usize..6, 0i64..300), 0..60).prop_map(|v| {
        v.into_iter()
            .map(|(u, t)| ShareEvent {
                user_id: format!("u{u}"),
                outlet_id: "o".into(),
                timestamp: t,
            })
            .collect()
    })
}

fn by_user(scores: Vec<IvScore>) -> HashMap<String, IvScore> {
    scores.into_iter().map(|s| (s.user_id.clone(), s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn valence_is_bounded_and_extreme_only_when_pure(labels in timelines(), events in shares()) {
        let t = LabelTimelines::from_intervals(&labels).unwrap();
        for s in ideology_valence(&events, &t) {
            prop_assert!(s.cr_count + s.cl_count >= 1);
            prop_assert!((-1.0..=1.0).contains(&s.iv));
            prop_assert_eq!(s.iv == 1.0, s.cl_count == 0);
            prop_assert_eq!(s.iv == -1.0, s.cr_count == 0);
        }
    }

    #[test]
    fn swapping_labels_negates_valence(labels in timelines(), events in shares()) {
        let swapped: Vec<LabelInterval> = labels
            .iter()
            .map(|l| LabelInterval { label: l.label.flipped(), ..l.clone() })
            .collect();
        let a = by_user(ideology_valence(&events, &LabelTimelines::from_intervals(&labels).unwrap()));
        let b = by_user(ideology_valence(&events, &LabelTimelines::from_intervals(&swapped).unwrap()));
        prop_assert_eq!(a.len(), b.len());
        for (u, s) in &a {
            prop_assert_eq!(b[u].iv, -s.iv);
        }
    }

    #[test]
    fn unlabeled_shares_change_nothing(labels in timelines(), events in shares(), extra in shares()) {
        let t = LabelTimelines::from_intervals(&labels).unwrap();
        let unlabeled: Vec<ShareEvent> = extra
            .into_iter()
            .map(|mut s| { s.timestamp += 10_000; s })
            .collect();
        let mut all = events.clone();
        all.extend(unlabeled);
        prop_assert_eq!(ideology_valence(&events, &t), ideology_valence(&all, &t));
    }
}
