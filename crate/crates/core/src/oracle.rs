//! Reference implementations used to check the engine, and instance
//! generators. Nothing here goes through the relational join code.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::polymatroid::{SetFunction, INF};
use crate::query::{ConjunctiveQuery, RawInstance, Statistics};
use crate::relation::{Database, Relation, Value, VarSet};

/// Default cap on nested-loop steps.
pub const DEFAULT_BUDGET: usize = 200_000_000;

fn atom_relations<'a>(q: &ConjunctiveQuery, db: &'a Database) -> Result<Vec<&'a Relation>> {
    q.atoms()
        .iter()
        .map(|a| {
            db.get(a.schema)
                .ok_or_else(|| Error::Schema(format!("no relation for atom {}", a.name)))
        })
        .collect()
}

fn answer(q: &ConjunctiveQuery, rows: BTreeSet<Vec<Value>>) -> Result<Relation> {
    Relation::new(q.free(), rows)
}

/// Left-deep nested-loop evaluation over the atoms in canonical order,
/// projected onto the free variables. `budget` caps the number of
/// (partial assignment, tuple) pairs inspected.
pub fn brute_force(q: &ConjunctiveQuery, db: &Database, budget: usize) -> Result<Relation> {
    let rels = atom_relations(q, db)?;
    if rels.iter().any(|r| r.is_empty()) {
        return Relation::new(q.free(), std::iter::empty());
    }
    let nv = q.num_vars();
    let mut partial: Vec<Vec<Option<Value>>> = vec![vec![None; nv]];
    let mut steps = 0usize;
    for r in rels {
        let vars: Vec<usize> = r.schema().iter().collect();
        let mut next = Vec::new();
        for a in &partial {
            steps += r.len();
            if steps > budget {
                return Err(Error::Limit(format!(
                    "brute-force evaluation exceeded its budget of {budget} steps"
                )));
            }
            'rows: for row in r.iter() {
                for (&v, &val) in vars.iter().zip(row) {
                    if a[v].is_some_and(|b| b != val) {
                        continue 'rows;
                    }
                }
                let mut b = a.clone();
                for (&v, &val) in vars.iter().zip(row) {
                    b[v] = Some(val);
                }
                next.push(b);
            }
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }
    let free: Vec<usize> = q.free().iter().collect();
    let rows = partial
        .into_iter()
        .map(|a| free.iter().map(|&v| a[v].expect("every variable occurs in an atom")).collect())
        .collect();
    answer(q, rows)
}

/// Second, independent semantics: test every assignment over the active
/// domain against every atom.
pub fn brute_force_by_domain(q: &ConjunctiveQuery, db: &Database, budget: usize) -> Result<Relation> {
    let rels = atom_relations(q, db)?;
    let mut dom: BTreeSet<Value> = BTreeSet::new();
    for r in &rels {
        for row in r.iter() {
            dom.extend(row.iter().copied());
        }
    }
    let dom: Vec<Value> = dom.into_iter().collect();
    let nv = q.num_vars();
    let total = (dom.len() as f64).powi(nv as i32);
    if total > budget as f64 {
        return Err(Error::Limit(format!(
            "{} assignments exceed the budget of {budget}",
            total
        )));
    }
    let free: Vec<usize> = q.free().iter().collect();
    let mut rows = BTreeSet::new();
    if dom.is_empty() {
        return answer(q, rows);
    }
    let mut digits = vec![0usize; nv];
    let mut tuple = Vec::new();
    loop {
        let ok = rels.iter().all(|r| {
            tuple.clear();
            tuple.extend(r.schema().iter().map(|v| dom[digits[v]]));
            r.contains(&tuple)
        });
        if ok {
            rows.insert(free.iter().map(|&v| dom[digits[v]]).collect());
        }
        let mut i = 0;
        loop {
            if i == nv {
                return answer(q, rows);
            }
            digits[i] += 1;
            if digits[i] < dom.len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Fixpoint of g(X) ← min(g(X), g(Y)) for X ⊂ Y and
/// g(X∪Y) ← min(g(X∪Y), g(X) + n) per statistics term, by Bellman-Ford
/// relaxation over all pairs, with g(∅) = 0.
pub fn shortest_path_oracle(stats: &Statistics, g: &SetFunction) -> SetFunction {
    let nv = g.num_vars();
    let full = VarSet::full(nv);
    let mut d: Vec<f64> = g.values().to_vec();
    d[0] = 0.0;
    let size = d.len();
    for _ in 0..size {
        let mut changed = false;
        for y in full.subsets() {
            for x in y.subsets() {
                if x != y && d[y.index()] < d[x.index()] {
                    d[x.index()] = d[y.index()];
                    changed = true;
                }
            }
        }
        for t in &stats.terms {
            let cand = d[t.x.index()] + t.exponent;
            let target = t.target().index();
            if cand < d[target] && cand < INF {
                d[target] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    SetFunction::from_fn(nv, |s| d[s.index()])
}

/// R = S = T = U = ([m/2] × {1}) ∪ ({1} × [m/2]) over the four-cycle's
/// schemas R(X,Y), S(Y,Z), T(Z,W), U(W,X).
pub fn gen_square(m: usize) -> Result<RawInstance> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Invalid(format!("m must be even and at least 2, got {m}")));
    }
    let half = m / 2;
    let mut rows: Vec<Vec<String>> = (1..=half).map(|a| vec![a.to_string(), "1".into()]).collect();
    rows.extend((2..=half).map(|b| vec!["1".into(), b.to_string()]));
    let mut inst = RawInstance::new();
    for (name, h) in [("R", ["X", "Y"]), ("S", ["Y", "Z"]), ("T", ["Z", "W"]), ("U", ["W", "X"])] {
        inst.push_table(name, &h, rows.iter().cloned());
    }
    Ok(inst)
}

/// One relation to generate: name, column names, tuple count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomRelation {
    pub name: String,
    pub columns: Vec<String>,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomSpec {
    pub domain: usize,
    pub relations: Vec<RandomRelation>,
}

/// Reads a generator spec: a `domain <n>` line and one `Name(A,B) <size>`
/// line per relation; `#` starts a comment.
pub fn parse_random_spec(text: &str) -> Result<RandomSpec> {
    let mut domain = None;
    let mut relations = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            column: 1,
            message: format!("{msg}: '{line}'"),
        };
        if let Some(rest) = line.strip_prefix("domain") {
            domain = Some(rest.trim().parse::<usize>().map_err(|_| bad("bad domain size"))?);
            continue;
        }
        let (head, size) = line.rsplit_once(')').ok_or_else(|| bad("expected Name(vars) size"))?;
        let (name, cols) = head.split_once('(').ok_or_else(|| bad("expected Name(vars) size"))?;
        let size = size.trim().parse::<usize>().map_err(|_| bad("bad relation size"))?;
        let columns: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).collect();
        if name.trim().is_empty() || columns.iter().any(String::is_empty) {
            return Err(bad("expected Name(vars) size"));
        }
        relations.push(RandomRelation {
            name: name.trim().to_string(),
            columns,
            size,
        });
    }
    let domain = domain.ok_or_else(|| Error::Invalid("generator spec has no 'domain' line".into()))?;
    Ok(RandomSpec { domain, relations })
}

/// Seeded uniform sampling without replacement; values are "1"..="domain".
pub fn gen_random(seed: u64, spec: &RandomSpec) -> Result<RawInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = RawInstance::new();
    for r in &spec.relations {
        let arity = r.columns.len();
        let space = u32::try_from(arity)
            .ok()
            .and_then(|a| spec.domain.checked_pow(a))
            .filter(|&s| s <= u32::MAX as usize)
            .ok_or_else(|| Error::Invalid(format!("{}: domain^arity is too large to sample", r.name)))?;
        if r.size > space {
            return Err(Error::Invalid(format!(
                "{}: cannot draw {} distinct tuples from {} candidates",
                r.name, r.size, space
            )));
        }
        let mut picks = index::sample(&mut rng, space, r.size).into_vec();
        picks.sort_unstable();
        let rows = picks.into_iter().map(|mut code| {
            let mut row = vec![String::new(); arity];
            for cell in row.iter_mut().rev() {
                *cell = (code % spec.domain + 1).to_string();
                code /= spec.domain;
            }
            row
        });
        let cols: Vec<&str> = r.columns.iter().map(String::as_str).collect();
        inst.push_table(&r.name, &cols, rows);
    }
    Ok(inst)
}

/// A random instance for `q`: one relation per relation name, columns named
/// after the first atom using it, size drawn from `sizes`.
pub fn random_instance_for(
    q: &ConjunctiveQuery,
    seed: u64,
    sizes: RangeInclusive<usize>,
    domain: usize,
) -> Result<RawInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut relations: Vec<RandomRelation> = Vec::new();
    for a in q.atoms() {
        if relations.iter().any(|r| r.name == a.name) {
            continue;
        }
        let columns: Vec<String> = a.vars.iter().map(|&v| q.var_name(v).to_string()).collect();
        let space = domain.saturating_pow(columns.len() as u32);
        let size = rng.random_range(sizes.clone()).min(space);
        relations.push(RandomRelation {
            name: a.name.clone(),
            columns,
            size,
        });
    }
    gen_random(seed, &RandomSpec { domain, relations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::catalog;

    fn q(text: &str) -> ConjunctiveQuery {
        ConjunctiveQuery::parse(text).unwrap()
    }

    #[test]
    fn square_instance_shape() {
        let inst = gen_square(4).unwrap();
        let db = inst.bind(&q(catalog::FOUR_CYCLE)).unwrap();
        assert_eq!(db.size(), 12);
        let r = inst.table("R").unwrap();
        let rendered: BTreeSet<Vec<&str>> = r.rows.iter().map(|t| inst.dict.render_tuple(t)).collect();
        let expect: BTreeSet<Vec<&str>> = [vec!["1", "1"], vec!["2", "1"], vec!["1", "2"]].into_iter().collect();
        assert_eq!(rendered, expect);
        assert_eq!(gen_square(2).unwrap().bind(&q(catalog::FOUR_CYCLE)).unwrap().size(), 4);
        assert!(gen_square(5).is_err());
        assert!(gen_square(0).is_err());
    }

    #[test]
    fn square_degree_profile() {
        let inst = gen_square(100).unwrap();
        let db = inst.bind(&q(catalog::FOUR_CYCLE)).unwrap();
        let one = inst.dict.lookup("1").unwrap();
        for r in db.relations() {
            assert_eq!(r.len(), 99);
            let first = VarSet::singleton(r.schema().iter().next().unwrap());
            for (key, deg) in r.degree_by_value(r.schema().difference(first), first).unwrap() {
                assert_eq!(deg, if key[0] == one { 50 } else { 1 });
            }
        }
    }

    #[test]
    fn brute_force_four_cycle_on_square() {
        let inst = gen_square(6).unwrap();
        let full = q(catalog::FOUR_CYCLE);
        let db = inst.bind(&full).unwrap();
        let a = brute_force(&full, &db, DEFAULT_BUDGET).unwrap();
        let b = brute_force_by_domain(&full, &db, DEFAULT_BUDGET).unwrap();
        assert_eq!(a, b);
        // Y = W = 1 with X, Z free gives 9; X = Z = 1 with Y, W free gives 9;
        // all four equal to 1 is counted twice.
        assert_eq!(a.len(), 17);
        let boolean = q(catalog::FOUR_CYCLE_BOOLEAN);
        let db = inst.bind(&boolean).unwrap();
        assert_eq!(brute_force(&boolean, &db, DEFAULT_BUDGET).unwrap(), Relation::unit());
    }

    #[test]
    fn brute_force_budget_and_empty() {
        let inst = gen_square(20).unwrap();
        let full = q(catalog::FOUR_CYCLE);
        let db = inst.bind(&full).unwrap();
        assert!(matches!(brute_force(&full, &db, 100), Err(Error::Limit(_))));
        let mut empty = RawInstance::new();
        empty.push_table("R", &["X", "Y"], Vec::<Vec<String>>::new());
        empty.push_table("S", &["Y", "Z"], vec![vec!["1".to_string(), "2".to_string()]]);
        let path = q(catalog::TWO_PATH_FULL);
        let db = empty.bind(&path).unwrap();
        assert!(brute_force(&path, &db, 10).unwrap().is_empty());
    }

    #[test]
    fn random_generation_is_deterministic() {
        let spec = parse_random_spec("domain 10\nR(A,B) 5 # five rows\n").unwrap();
        let a = gen_random(1, &spec).unwrap();
        let b = gen_random(1, &spec).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.tables[0].rows.len(), 5);
        let full = parse_random_spec("domain 3\nR(A,B) 9").unwrap();
        assert_eq!(gen_random(7, &full).unwrap().tables[0].rows.len(), 9);
        let over = parse_random_spec("domain 3\nR(A,B) 10").unwrap();
        assert!(gen_random(7, &over).is_err());
        assert!(parse_random_spec("R(A,B) 3").is_err());
        assert!(parse_random_spec("domain 3\nR A B 3").is_err());
    }

    #[test]
    fn random_instances_agree_between_oracles() {
        for text in [catalog::TRIANGLE, catalog::TWO_PATH_PROJECTED, catalog::FOUR_CYCLE_BOOLEAN] {
            let query = q(text);
            for seed in 0..5 {
                let db = random_instance_for(&query, seed, 5..=20, 5).unwrap().bind(&query).unwrap();
                assert_eq!(
                    brute_force(&query, &db, DEFAULT_BUDGET).unwrap(),
                    brute_force_by_domain(&query, &db, DEFAULT_BUDGET).unwrap()
                );
            }
        }
    }

    #[test]
    fn shortest_path_oracle_relaxes() {
        use crate::query::StatTerm;
        let g = SetFunction::constant(2, INF).with(VarSet::from_bits(0b01), 0.5);
        let stats = Statistics::new(vec![StatTerm {
            y: VarSet::from_bits(0b10),
            x: VarSet::from_bits(0b01),
            exponent: 0.25,
            guard: "S".into(),
            guard_schema: VarSet::from_bits(0b11),
            bound: None,
        }]);
        let h = shortest_path_oracle(&stats, &g);
        assert_eq!(h.get(VarSet::EMPTY), 0.0);
        assert_eq!(h.get(VarSet::from_bits(0b11)), 0.75);
        assert_eq!(h.get(VarSet::from_bits(0b10)), 0.75);
    }
}
