//! Repairs the monotonicity and statistics invariants of (D, g) as a
//! lowest-value-first shortest-path computation, materializing a witness
//! relation for every lowered entry.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::polymatroid::SetFunction;
use crate::query::Statistics;
use crate::relation::{Database, Origin, Relation, VarSet};

/// Improvements smaller than this are ignored, so floating-point noise never
/// triggers a repair.
const IMPROVE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    /// π_S(R(from)) for a one-larger superset `from`.
    Project(VarSet),
    /// R(X) ⋈ π_{X∪Y}(guard) for the statistics term with this index.
    Stat(usize),
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Clone, Debug)]
pub struct Calibrated {
    pub db: Database,
    pub g: SetFunction,
    /// Tuples materialized by repairs.
    pub work: usize,
    /// Number of entries lowered.
    pub repairs: usize,
}

/// Returns (D′, g′) with g′ ≤ g satisfying the cardinality, monotonicity and
/// statistics invariants w.r.t. D′. Requires g to satisfy the cardinality
/// invariant w.r.t. `db` and `db` to satisfy `stats`.
pub fn calibrate(stats: &Statistics, db: &Database, g: &SetFunction) -> Result<Calibrated> {
    let nv = g.num_vars();
    let size = 1usize << nv;
    let mut dist: Vec<f64> = g.values().to_vec();
    dist[0] = 0.0;
    let mut source: Vec<Option<Source>> = vec![None; size];
    let mut done = vec![false; size];
    let mut by_x: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (k, t) in stats.terms.iter().enumerate() {
        by_x[t.x.index()].push(k);
    }

    let mut out = db.augmented(Relation::unit(), Origin::Derived);
    let mut work = 0usize;
    let mut repairs = 0usize;
    let mut heap: BinaryHeap<Reverse<Entry>> = dist
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(i, &d)| Reverse(Entry(d, i as u32)))
        .collect();

    while let Some(Reverse(Entry(d, bits))) = heap.pop() {
        let s = VarSet::from_bits(bits);
        let i = s.index();
        if done[i] || d != dist[i] {
            continue;
        }
        done[i] = true;
        if let Some(src) = source[i] {
            let rel = materialize(stats, &out, s, src)?;
            work += rel.len();
            repairs += 1;
            out.augment(rel, Origin::Derived);
        }
        for v in s.iter() {
            let sub = s.difference(VarSet::singleton(v));
            if d < dist[sub.index()] - IMPROVE {
                dist[sub.index()] = d;
                source[sub.index()] = Some(Source::Project(s));
                heap.push(Reverse(Entry(d, sub.bits())));
            }
        }
        for &k in &by_x[i] {
            let t = &stats.terms[k];
            let target = t.target();
            let cand = d + t.exponent;
            if cand < dist[target.index()] - IMPROVE {
                dist[target.index()] = cand;
                source[target.index()] = Some(Source::Stat(k));
                heap.push(Reverse(Entry(cand, target.bits())));
            }
        }
    }

    Ok(Calibrated {
        db: out,
        g: SetFunction::from_fn(nv, |s| dist[s.index()]),
        work,
        repairs,
    })
}

fn materialize(stats: &Statistics, db: &Database, s: VarSet, src: Source) -> Result<Relation> {
    let missing = |what: VarSet| {
        Error::Invariant(format!(
            "calibration needs a relation over {what:?} but none is stored"
        ))
    };
    match src {
        Source::Project(from) => db.get(from).ok_or_else(|| missing(from))?.project(s),
        Source::Stat(k) => {
            let t = &stats.terms[k];
            let rx = db.get(t.x).ok_or_else(|| missing(t.x))?;
            let guard = db
                .get(t.guard_schema)
                .ok_or_else(|| missing(t.guard_schema))?;
            Ok(rx.join(&guard.project(s)?))
        }
    }
}
