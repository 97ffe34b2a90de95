use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use revkit_core::agents::{AgentKind, ReviewComment};
use revkit_core::blending::{blend_comments, confidence_filter, default_dimensions, overlap_summarize, Thresholds};
use revkit_core::features::SizeClass;
use revkit_core::retrieval::{merge_scores, Hit, ScoredChunkSet, SearchSource};

fn hits(max: usize) -> impl Strategy<Value = Vec<(u8, f64)>> {
    prop::collection::vec((0u8..40, -5.0f64..50.0), 0..max)
}

fn set(source: SearchSource, raw: &[(u8, f64)]) -> ScoredChunkSet {
    ScoredChunkSet::new(
        source,
        raw.iter()
            .map(|&(id, score)| Hit {
                chunk_id: format!("chunk-{id}"),
                score,
            })
            .collect(),
    )
}

fn agent() -> impl Strategy<Value = AgentKind> {
    (0usize..6).prop_map(|i| AgentKind::ALL[i])
}

prop_compose! {
    fn comment()(agent in agent(), file in 0u8..3, line in 1u32..6, conf in 0.0f64..=1.0, tag in 0u16..1000) -> ReviewComment {
        ReviewComment {
            description: format!("finding {tag}"),
            corrective_code: None,
            file_path: format!("src/f{file}.py"),
            line_number: line,
            confidence_score: conf,
            bucket: "general".into(),
            agent,
            file_level: false,
            merged_from: Vec::new(),
        }
    }
}

prop_compose! {
    fn thresholds()(ts in prop::collection::vec(0.0f64..=1.0, 6), default in 0.0f64..=1.0) -> Thresholds {
        Thresholds {
            per_agent: AgentKind::ALL.into_iter().zip(ts).collect(),
            default,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn merge_is_exactly_the_union(a in hits(30), b in hits(30)) {
        let (la, sb) = (set(SearchSource::Lexical, &a), set(SearchSource::Semantic, &b));
        let merged = merge_scores(&la, &sb);
        let ids: Vec<&str> = merged.iter().map(|h| h.chunk_id.as_str()).collect();
        let unique: BTreeSet<&str> = ids.iter().copied().collect();
        prop_assert_eq!(unique.len(), ids.len(), "duplicates in {:?}", ids);

        let union: BTreeSet<String> = a.iter().chain(&b).map(|(id, _)| format!("chunk-{id}")).collect();
        let got: BTreeSet<String> = unique.into_iter().map(String::from).collect();
        prop_assert_eq!(got, union);
        for w in merged.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        prop_assert!(merged.iter().all(|h| (0.0..=1.0).contains(&h.score)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn filter_keeps_exactly_those_at_or_above_threshold(cs in prop::collection::vec(comment(), 0..40), t in thresholds()) {
        let kept = confidence_filter(cs.clone(), &t, &mut Vec::new());
        let want: Vec<ReviewComment> = cs
            .into_iter()
            .filter(|c| c.confidence_score >= t.per_agent[&c.agent])
            .collect();
        prop_assert_eq!(kept, want);
    }

    #[test]
    fn overlap_collapses_groups_with_max_confidence(cs in prop::collection::vec(comment(), 0..40)) {
        let mut groups: BTreeMap<(String, u32), Vec<&ReviewComment>> = BTreeMap::new();
        for c in &cs {
            groups.entry((c.file_path.clone(), c.line_number)).or_default().push(c);
        }
        let out = overlap_summarize(cs.clone(), None, &mut Vec::new());
        prop_assert_eq!(out.len(), groups.len());
        let mut seen = BTreeSet::new();
        for c in &out {
            let key = (c.file_path.clone(), c.line_number);
            prop_assert!(seen.insert(key.clone()), "two comments on {:?}", key);
            let group = &groups[&key];
            let max = group.iter().map(|g| g.confidence_score).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(c.confidence_score, max);
            if group.len() > 1 {
                let agents: BTreeSet<AgentKind> = group.iter().map(|g| g.agent).collect();
                prop_assert_eq!(c.merged_from.iter().copied().collect::<BTreeSet<_>>(), agents);
            } else {
                prop_assert_eq!(c, group[0]);
            }
        }
    }

    #[test]
    fn blend_is_idempotent(cs in prop::collection::vec(comment(), 0..40), t in thresholds()) {
        let dims = default_dimensions();
        let once = blend_comments(cs, &dims, &t, None);
        let twice = blend_comments(once.comments.clone(), &dims, &t, None);
        prop_assert_eq!(&twice.comments, &once.comments);
        prop_assert!(twice.dropped.values().all(|&n| n == 0));
    }
}

#[test]
fn size_class_boundaries() {
    let golden = [
        (1, SizeClass::S),
        (50, SizeClass::S),
        (51, SizeClass::M),
        (100, SizeClass::M),
        (101, SizeClass::L),
        (200, SizeClass::L),
        (201, SizeClass::XL),
        (500, SizeClass::XL),
        (501, SizeClass::XXL),
    ];
    for (loc, want) in golden {
        assert_eq!(SizeClass::from_loc(loc), want, "{loc} LOC");
    }
}
