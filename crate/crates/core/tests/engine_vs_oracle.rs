use proptest::prelude::*;

use jaguar_core::engine::{evaluate, EngineConfig};
use jaguar_core::oracle::{brute_force, brute_force_by_domain, random_instance_for, DEFAULT_BUDGET};
use jaguar_core::query::{catalog, default_stats};
use jaguar_core::ConjunctiveQuery;

const QUERIES: [&str; 6] = [
    catalog::TRIANGLE,
    catalog::FOUR_CYCLE,
    catalog::FOUR_CYCLE_BOOLEAN,
    catalog::TWO_PATH_FULL,
    catalog::TWO_PATH_PROJECTED,
    "Q(A) :- R(A,B), S(B,C), T(C,A), U(A,D).",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_agrees_with_both_oracles(which in 0..QUERIES.len(), seed in 0u64..10_000, eps in 0.2f64..1.2) {
        let q = ConjunctiveQuery::parse(QUERIES[which]).unwrap();
        let db = random_instance_for(&q, seed, 3..=30, 8).unwrap().bind(&q).unwrap();
        let stats = default_stats(&q, &db, db.size(), false).unwrap();
        let expected = brute_force(&q, &db, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(&expected, &brute_force_by_domain(&q, &db, DEFAULT_BUDGET).unwrap());
        let ev = evaluate(&q, &stats, &db, &EngineConfig::with_epsilon(eps)).unwrap();
        prop_assert_eq!(ev.answers.relation(), &expected);
        let bad = ev.trace.check_all(None);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn classic_statistics_give_the_same_answers(which in 0..QUERIES.len(), seed in 0u64..10_000) {
        let q = ConjunctiveQuery::parse(QUERIES[which]).unwrap();
        let db = random_instance_for(&q, seed, 3..=30, 8).unwrap().bind(&q).unwrap();
        let full = default_stats(&q, &db, db.size(), false).unwrap();
        let classic = default_stats(&q, &db, db.size(), true).unwrap();
        let config = EngineConfig::default();
        prop_assert_eq!(
            evaluate(&q, &full, &db, &config).unwrap().answers,
            evaluate(&q, &classic, &db, &config).unwrap().answers
        );
    }
}

#[test]
fn sequential_and_parallel_traces_match() {
    let q = ConjunctiveQuery::parse(catalog::FOUR_CYCLE).unwrap();
    let db = random_instance_for(&q, 7, 20..=40, 10).unwrap().bind(&q).unwrap();
    let stats = default_stats(&q, &db, db.size(), false).unwrap();
    let par = evaluate(&q, &stats, &db, &EngineConfig::default()).unwrap();
    let seq = evaluate(&q, &stats, &db, &EngineConfig { parallel: false, ..EngineConfig::default() }).unwrap();
    assert_eq!(par.answers, seq.answers);
    assert_eq!(par.trace, seq.trace);
    assert_eq!(par.trace.to_json(&q), seq.trace.to_json(&q));
}
