use std::collections::BTreeMap;
use std::io::Cursor;

use proptest::prelude::*;

use trecdl::baseline_search::{bm25_search, Bm25Params, InvertedIndex};
use trecdl::judging::{SessionConfig, TopicSession};
use trecdl::metrics::{evaluate_run, RelevancePolicy};
use trecdl::rank_analysis::{kendall_tau, SystemRanking};
use trecdl::relevance_model::{select_next, ConstantScorer};
use trecdl::simulation::{build_trace, qrels_from_trace, OracleJudge};
use trecdl::trec_io::{
    read_qrels, read_run, read_topics, write_qrels, write_run, write_topics, Grade, QrelsSet, RunFile, TaskKind,
    TopicId, TopicRecord,
};

fn scored_triples() -> impl Strategy<Value = Vec<(u8, u16, f64)>> {
    prop::collection::btree_map((0u8..5, 0u16..60), -50.0f64..50.0, 1..120)
        .prop_map(|m| m.into_iter().map(|((t, d), s)| (t, d, s)).collect())
}

fn make_run(triples: &[(u8, u16, f64)]) -> RunFile {
    RunFile::from_scored(
        "r",
        triples.iter().map(|&(t, d, s)| (format!("{}", 100 + t as u32), format!("doc{d}"), s)),
    )
    .unwrap()
}

fn make_qrels(entries: &[(u8, u16, u8)]) -> QrelsSet {
    let mut q = QrelsSet::new();
    for &(t, d, g) in entries {
        q.set(format!("{}", 100 + t as u32).into(), format!("doc{d}"), Grade::new(g).unwrap());
    }
    q
}

fn qrels_entries() -> impl Strategy<Value = Vec<(u8, u16, u8)>> {
    prop::collection::vec((0u8..5, 0u16..60, 0u8..=3), 1..150)
}

proptest! {
    #[test]
    fn run_round_trip(triples in scored_triples()) {
        let run = make_run(&triples);
        let mut buf = Vec::new();
        write_run(&run, &mut buf).unwrap();
        let (back, warnings) = read_run(Cursor::new(&buf)).unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(back.len(), run.len());
        for (t, entries) in run.topics() {
            prop_assert_eq!(back.ranked_docs(t), entries.iter().map(|e| e.doc_id.as_str()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn qrels_round_trip(entries in qrels_entries()) {
        let q = make_qrels(&entries);
        let mut buf = Vec::new();
        write_qrels(&q, &mut buf).unwrap();
        let back = read_qrels(Cursor::new(&buf)).unwrap();
        prop_assert_eq!(back.len(), q.len());
        for (t, tq) in q.topics() {
            for (d, g) in tq.iter() {
                prop_assert_eq!(back.grade(t, d), Some(g));
            }
        }
    }

    #[test]
    fn topics_round_trip(texts in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,4}", 1..20)) {
        let topics: Vec<TopicRecord> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| TopicRecord { topic_id: TopicId::from(format!("{}", i * 3 + 1)), text: t.clone() })
            .collect();
        let mut buf = Vec::new();
        write_topics(&topics, &mut buf).unwrap();
        prop_assert_eq!(read_topics(Cursor::new(&buf)).unwrap(), topics);
    }

    #[test]
    fn truncation_is_prefix(triples in scored_triples(), a in 1usize..30, b in 1usize..30) {
        let run = make_run(&triples);
        let (small, large) = (run.truncate(a.min(b)), run.truncate(a.max(b)));
        for (t, entries) in small.topics() {
            prop_assert!(large.topic(t).starts_with(entries));
        }
    }

    #[test]
    fn metrics_are_bounded(triples in scored_triples(), entries in qrels_entries(), passage in any::<bool>()) {
        let run = make_run(&triples);
        let qrels = make_qrels(&entries);
        let policy = RelevancePolicy::for_task(if passage { TaskKind::Passage } else { TaskKind::Document });
        let topics: Vec<TopicId> = qrels.topic_ids().cloned().collect();
        let report = evaluate_run::<f64>(&run, &qrels, None, &policy, &topics).unwrap();
        for m in report.per_topic.values() {
            for v in [m.ndcg_10, m.ncg, m.rr, m.ap, m.p_10] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn metrics_agree_in_f32(triples in scored_triples(), entries in qrels_entries()) {
        let run = make_run(&triples);
        let qrels = make_qrels(&entries);
        let policy = RelevancePolicy::document();
        let topics: Vec<TopicId> = qrels.topic_ids().cloned().collect();
        let a = evaluate_run::<f64>(&run, &qrels, None, &policy, &topics).unwrap();
        let b = evaluate_run::<f32>(&run, &qrels, None, &policy, &topics).unwrap();
        for (t, m) in &a.per_topic {
            prop_assert!((m.ndcg_10 - b.per_topic[t].ndcg_10 as f64).abs() < 1e-5);
            prop_assert!((m.ap - b.per_topic[t].ap as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn tau_is_symmetric_and_bounded(a in prop::collection::vec(0.0f64..1.0, 2..12), seed in any::<u64>()) {
        let n = a.len();
        let first = SystemRanking::from_scores(a.iter().enumerate().map(|(i, &s)| (format!("s{i}"), s))).unwrap();
        let perm = select_next(&(0..n).map(|i| (format!("s{i}"), 0.0)).collect::<Vec<_>>(), seed).unwrap();
        let second = SystemRanking::from_scores(perm.iter().enumerate().map(|(i, s)| (s.clone(), -(i as f64)))).unwrap();
        let ab = kendall_tau(&first, &second).unwrap();
        let ba = kendall_tau(&second, &first).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(kendall_tau(&first, &first).unwrap(), 1.0);
    }

    #[test]
    fn session_counters_track_judgments(
        pool in 1usize..40,
        judgments in prop::collection::vec((0usize..40, 0u8..=3), 0..120),
    ) {
        let mut s = TopicSession::new(
            "7".into(),
            "q",
            (0..pool).map(|i| format!("p{i:02}")),
            RelevancePolicy::passage(),
            SessionConfig::default(),
        )
        .unwrap();
        let mut truth: BTreeMap<String, u8> = BTreeMap::new();
        for (d, g) in judgments {
            let doc = format!("p{:02}", d % pool);
            s.record(&doc, Grade::new(g).unwrap()).unwrap();
            truth.insert(doc, g);
        }
        prop_assert_eq!(s.judged_count(), truth.len());
        prop_assert_eq!(s.relevant(), truth.values().filter(|&&g| g >= 2).count());
        prop_assert_eq!(s.pending().count(), pool - truth.len());
    }

    #[test]
    fn selection_ignores_score_scale(
        scores in prop::collection::vec(-5.0f64..5.0, 1..30),
        scale in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        let a: Vec<(String, f64)> = scores.iter().enumerate().map(|(i, &s)| (format!("d{i}"), s)).collect();
        let b: Vec<(String, f64)> = a.iter().map(|(d, s)| (d.clone(), s * scale)).collect();
        prop_assert_eq!(select_next(&a, seed).unwrap(), select_next(&b, seed).unwrap());
    }

    #[test]
    fn bm25_is_monotone_in_tf(extra in 0usize..6, filler in 2usize..10) {
        let pad = vec!["pad"; filler].join(" ");
        let low = format!("term {pad}");
        let high = format!("{} {pad}", vec!["term"; 2 + extra].join(" "));
        // pad the low-tf document to the same length so only tf differs
        let low = format!("{low} {}", vec!["pad"; 1 + extra].join(" "));
        let idx = InvertedIndex::from_texts(
            TaskKind::Passage,
            [("lo", low.as_str()), ("hi", high.as_str()), ("other", "nothing here at all")],
        )
        .unwrap();
        let hits = bm25_search(&idx, "term", 10, &Bm25Params::<f64>::default());
        prop_assert_eq!(hits[0].0.as_str(), "hi");
        prop_assert!(hits[0].1 > hits[1].1);
    }
}

fn trace_fixture(length: usize, pool_len: usize) -> (trecdl::simulation::TopicTrace, QrelsSet) {
    let topic = TopicId::from("5");
    let mut oracle = QrelsSet::new();
    let universe: Vec<String> = (0..80).map(|i| format!("u{i:02}")).collect();
    for (i, d) in universe.iter().enumerate() {
        oracle.set(topic.clone(), d.clone(), Grade::new((i % 4) as u8).unwrap());
    }
    let pool: Vec<String> = universe.iter().rev().take(pool_len).cloned().collect();
    let trace = build_trace(
        &topic,
        "q",
        pool,
        OracleJudge::new(&oracle),
        &RelevancePolicy::document(),
        &ConstantScorer,
        &universe,
        length,
        11,
    );
    (trace, oracle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_starts_with_pool_and_extends_as_prefix(pool_len in 0usize..20, a in 0usize..80, b in 0usize..80) {
        let (short, _) = trace_fixture(a.min(b), pool_len);
        let (long, oracle) = trace_fixture(a.max(b), pool_len);
        prop_assert_eq!(short.pool(), long.pool());
        prop_assert!(long.docs.starts_with(&short.docs));
        let mut sorted = long.pool().to_vec();
        sorted.sort();
        prop_assert_eq!(long.pool(), sorted.as_slice());

        // qrels built from a smaller size are contained in those from a larger one
        let sizes = |n: usize| BTreeMap::from([(long.topic_id.clone(), n.min(long.docs.len()))]);
        let q_small = qrels_from_trace(std::slice::from_ref(&long), &sizes(a.min(b)), OracleJudge::new(&oracle)).unwrap();
        let q_large = qrels_from_trace(std::slice::from_ref(&long), &sizes(a.max(b)), OracleJudge::new(&oracle)).unwrap();
        for (t, q) in q_small.topics() {
            for (d, g) in q.iter() {
                prop_assert_eq!(q_large.grade(t, d), Some(g));
            }
        }
    }
}
