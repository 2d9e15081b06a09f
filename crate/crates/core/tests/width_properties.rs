use proptest::prelude::*;

use jaguar_core::decomposition::{bag_selectors, enumerate_free_connex_tds, DEFAULT_MAX_VARS};
use jaguar_core::polymatroid::{check_polymatroid, satisfies_stats, INF};
use jaguar_core::query::{catalog, classic_stats};
use jaguar_core::width::{solve_selector_lp, subw};
use jaguar_core::{ConjunctiveQuery, StatTerm, Statistics};

const NAMES: [&str; 4] = ["A", "B", "C", "D"];
const LIMIT: usize = 100_000;

/// A full query over up to four variables from a list of binary or ternary
/// atoms, plus a cardinality term per atom and optional degree terms.
#[derive(Debug, Clone)]
struct Case {
    q: ConjunctiveQuery,
    stats: Statistics,
}

fn case() -> impl Strategy<Value = Case> {
    let atom = prop::sample::subsequence(vec![0usize, 1, 2, 3], 2..=3);
    (
        prop::collection::vec(atom, 2..=4),
        prop::collection::vec((0.2f64..1.0, 0.0f64..0.6, any::<bool>()), 4),
    )
        .prop_filter_map("query needs at least two variables", |(atoms, nums)| {
            let body: Vec<String> = atoms
                .iter()
                .enumerate()
                .map(|(i, vs)| format!("R{i}({})", vs.iter().map(|&v| NAMES[v]).collect::<Vec<_>>().join(",")))
                .collect();
            let mut used: Vec<usize> = atoms.iter().flatten().copied().collect();
            used.sort();
            used.dedup();
            let head: Vec<&str> = used.iter().map(|&v| NAMES[v]).collect();
            let q = ConjunctiveQuery::parse(&format!("Q({}) :- {}.", head.join(","), body.join(", "))).ok()?;
            let mut terms = Vec::new();
            for (i, a) in q.atoms().iter().enumerate() {
                let (card, deg, with_deg) = nums[i];
                terms.push(StatTerm {
                    y: a.schema,
                    x: Default::default(),
                    exponent: card,
                    guard: a.name.clone(),
                    guard_schema: a.schema,
                    bound: None,
                });
                if with_deg {
                    let x = jaguar_core::VarSet::singleton(a.schema.iter().next()?);
                    terms.push(StatTerm {
                        y: a.schema.difference(x),
                        x,
                        exponent: deg,
                        guard: a.name.clone(),
                        guard_schema: a.schema,
                        bound: None,
                    });
                }
            }
            Some(Case { q, stats: Statistics::new(terms) })
        })
}

fn min_max_bag(q: &ConjunctiveQuery, h: &jaguar_core::polymatroid::SetFunction) -> f64 {
    enumerate_free_connex_tds(q, DEFAULT_MAX_VARS)
        .unwrap()
        .iter()
        .map(|td| td.bags.iter().map(|&b| h.get(b)).fold(0.0, f64::max))
        .fold(INF, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pruning_matches_every_selector(c in case()) {
        let family = enumerate_free_connex_tds(&c.q, DEFAULT_MAX_VARS).unwrap();
        let w = subw(&c.q, &c.stats, DEFAULT_MAX_VARS, LIMIT).unwrap();
        prop_assert!(!w.incomplete);
        if let Ok(all) = bag_selectors(&family, 4096) {
            let best = all
                .iter()
                .map(|s| solve_selector_lp(c.q.num_vars(), s, &c.stats).unwrap().value)
                .fold(0.0, f64::max);
            prop_assert!((best - w.value).abs() < 1e-6, "pruned {} vs all {}", w.value, best);
        }
    }

    #[test]
    fn certificate_witnesses_the_value(c in case()) {
        let w = subw(&c.q, &c.stats, DEFAULT_MAX_VARS, LIMIT).unwrap();
        prop_assert!(check_polymatroid(&w.certificate).is_ok());
        prop_assert!(satisfies_stats(&w.certificate, &c.stats));
        prop_assert!(min_max_bag(&c.q, &w.certificate) >= w.value - 1e-6);
        let sol = solve_selector_lp(c.q.num_vars(), &w.selector, &c.stats).unwrap();
        let dual: f64 = sol.stat_duals.iter().zip(&c.stats.terms).map(|(d, t)| d * t.exponent).sum();
        prop_assert!(sol.stat_duals.iter().all(|&d| d >= -1e-9));
        prop_assert!((dual - sol.value).abs() < 1e-6, "dual {} vs primal {}", dual, sol.value);
    }

    #[test]
    fn extra_statistics_never_raise_the_width(c in case(), cut in 0.0f64..1.0) {
        let base = subw(&c.q, &c.stats, DEFAULT_MAX_VARS, LIMIT).unwrap().value;
        let mut tighter = c.stats.clone();
        for t in &mut tighter.terms {
            t.exponent *= cut;
        }
        prop_assert!(subw(&c.q, &tighter, DEFAULT_MAX_VARS, LIMIT).unwrap().value <= base + 1e-6);
        let mut more = c.stats.clone();
        let first = c.q.atoms()[0].clone();
        more.terms.push(StatTerm {
            y: first.schema,
            x: Default::default(),
            exponent: cut * 0.5,
            guard: first.name,
            guard_schema: first.schema,
            bound: None,
        });
        prop_assert!(subw(&c.q, &more, DEFAULT_MAX_VARS, LIMIT).unwrap().value <= base + 1e-6);
    }
}

#[test]
fn width_scales_with_uniform_bounds() {
    let q = ConjunctiveQuery::parse(catalog::TRIANGLE).unwrap();
    let mut stats = classic_stats(&q);
    for t in &mut stats.terms {
        t.exponent = 0.5;
    }
    let w = subw(&q, &stats, DEFAULT_MAX_VARS, LIMIT).unwrap();
    assert!((w.value - 0.75).abs() < 1e-6);
}
