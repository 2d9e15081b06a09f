//! Set functions over 2^V with ∞, submodularity violations and truncation.

use std::fmt;

use serde_json::{Map, Value as Json};

use crate::error::{Error, Result};
use crate::query::{StatTerm, Statistics};
use crate::relation::{Database, VarSet};

/// Absolute tolerance for every comparison between set-function values.
pub const TOL: f64 = 1e-9;

pub const INF: f64 = f64::INFINITY;

/// A total map 2^V → ℝ₊ ∪ {∞}, stored densely by subset encoding.
#[derive(Clone, PartialEq)]
pub struct SetFunction {
    n: usize,
    values: Vec<f64>,
}

impl SetFunction {
    pub fn constant(n: usize, value: f64) -> Self {
        SetFunction {
            n,
            values: vec![value; 1 << n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(VarSet) -> f64) -> Self {
        SetFunction {
            n,
            values: (0..1u32 << n).map(|b| f(VarSet::from_bits(b))).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn universe(&self) -> VarSet {
        VarSet::full(self.n)
    }

    pub fn get(&self, s: VarSet) -> f64 {
        self.values[s.index()]
    }

    pub fn set(&mut self, s: VarSet, v: f64) {
        self.values[s.index()] = v;
    }

    /// g[S → v].
    pub fn with(&self, s: VarSet, v: f64) -> Self {
        let mut g = self.clone();
        g.set(s, v);
        g
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarSet, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (VarSet::from_bits(i as u32), v))
    }

    /// Pointwise min(self, c).
    pub fn capped(&self, c: f64) -> Self {
        SetFunction {
            n: self.n,
            values: self.values.iter().map(|&v| v.min(c)).collect(),
        }
    }

    /// Pointwise ≤ with tolerance.
    pub fn le(&self, other: &SetFunction) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| a <= b + TOL || a == b)
    }

    pub fn approx_eq(&self, other: &SetFunction, tol: f64) -> bool {
        self.n == other.n
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| a == b || (a - b).abs() <= tol)
    }

    /// JSON object keyed by comma-joined variable names; ∞ is `"inf"`.
    pub fn to_json(&self, names: &[String]) -> Json {
        let mut m = Map::new();
        for (s, v) in self.iter() {
            let key: Vec<&str> = s.iter().map(|i| names[i].as_str()).collect();
            m.insert(key.join(","), number_or_inf(v));
        }
        Json::Object(m)
    }
}

impl fmt::Debug for SetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

/// Serializes ∞ as the string `"inf"`.
pub fn number_or_inf(v: f64) -> Json {
    if v.is_infinite() {
        Json::String("inf".into())
    } else {
        serde_json::Number::from_f64(v).map_or(Json::Null, Json::Number)
    }
}

/// log_N of a relation size; the empty relation maps to 0 (callers never
/// build g over instances with empty relations).
pub fn log_n(size: usize, n: usize) -> f64 {
    if size <= 1 {
        0.0
    } else {
        (size as f64).ln() / (n.max(2) as f64).ln()
    }
}

/// g(X) = log_N |R(X)| for stored relations, ∞ elsewhere.
pub fn init_g(db: &Database, num_vars: usize, n: usize) -> SetFunction {
    let mut g = SetFunction::constant(num_vars, INF);
    for (s, r) in db.iter() {
        g.set(s, log_n(r.relation.len(), n));
    }
    g
}

/// f(X,Y) = g(X) + g(Y) − g(X∩Y); ∞ whenever an operand is ∞.
pub fn f_value(g: &SetFunction, x: VarSet, y: VarSet) -> f64 {
    let (gx, gy, gw) = (g.get(x), g.get(y), g.get(x.intersection(y)));
    if gx.is_infinite() || gy.is_infinite() || gw.is_infinite() {
        INF
    } else {
        gx + gy - gw
    }
}

/// A pair (X,Y) with g(X∪Y) > f(X,Y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub x: VarSet,
    pub y: VarSet,
    pub f: f64,
}

fn violates(g: &SetFunction, x: VarSet, y: VarSet) -> Option<f64> {
    if x.is_subset(y) || y.is_subset(x) {
        return None;
    }
    let f = f_value(g, x, y);
    (f.is_finite() && g.get(x.union(y)) > f + TOL).then_some(f)
}

/// The least violated submodularity value c and its witness. Ties (within
/// tolerance) go to the smallest encoding of X∪Y, then X, then Y. `None`
/// means c = ∞.
pub fn min_violation(g: &SetFunction) -> Option<Violation> {
    let full = g.universe();
    let mut best_f = INF;
    for x in full.subsets() {
        for y in full.subsets() {
            if let Some(f) = violates(g, x, y) {
                best_f = best_f.min(f);
            }
        }
    }
    if best_f.is_infinite() {
        return None;
    }
    let mut best: Option<(u32, u32, u32, Violation)> = None;
    for x in full.subsets() {
        for y in full.subsets() {
            if let Some(f) = violates(g, x, y) {
                if f <= best_f + TOL {
                    let key = (x.union(y).bits(), x.bits(), y.bits());
                    if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                        best = Some((key.0, key.1, key.2, Violation { x, y, f }));
                    }
                }
            }
        }
    }
    best.map(|b| b.3)
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub c: f64,
    pub witness: Option<(VarSet, VarSet)>,
    pub h: SetFunction,
    /// {X : g(X) ≤ c}, in encoding order.
    pub i: Vec<VarSet>,
}

/// {X : g(X) ≤ c}.
pub fn level_set(g: &SetFunction, c: f64) -> Vec<VarSet> {
    g.iter()
        .filter(|&(_, v)| v <= c + TOL || (v.is_infinite() && c.is_infinite()))
        .map(|(s, _)| s)
        .collect()
}

/// c, h = min(g, c) and I = {X : g(X) ≤ c} for a monotone g with g(∅) = 0.
pub fn truncate(g: &SetFunction) -> Result<Truncation> {
    if g.get(VarSet::EMPTY).abs() > TOL {
        return Err(Error::Invariant(format!(
            "truncation needs g(∅) = 0, got {}",
            g.get(VarSet::EMPTY)
        )));
    }
    if let Some((x, y)) = monotonicity_violation(g) {
        return Err(Error::Invariant(format!(
            "truncation needs a monotone g: g({x:?}) > g({y:?})"
        )));
    }
    let v = min_violation(g);
    let c = v.map_or(INF, |v| v.f);
    Ok(Truncation {
        c,
        witness: v.map(|v| (v.x, v.y)),
        h: g.capped(c),
        i: level_set(g, c),
    })
}

/// First (X, X+v) in encoding order with g(X) > g(X+v).
pub fn monotonicity_violation(g: &SetFunction) -> Option<(VarSet, VarSet)> {
    let full = g.universe();
    for x in full.subsets() {
        for v in full.difference(x).iter() {
            let y = x.union(VarSet::singleton(v));
            let (a, b) = (g.get(x), g.get(y));
            if a > b + TOL && !(a.is_infinite() && b.is_infinite()) {
                return Some((x, y));
            }
        }
    }
    None
}

/// Which Shannon inequality failed first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShannonViolation {
    Normalization(f64),
    Monotonicity { x: VarSet, y: VarSet },
    Submodularity { x: VarSet, y: VarSet },
}

/// Exhaustive check of h(∅)=0, monotonicity and submodularity. The
/// submodularity failure reported is the least violation.
pub fn check_polymatroid(h: &SetFunction) -> std::result::Result<(), ShannonViolation> {
    let e = h.get(VarSet::EMPTY);
    if e.abs() > TOL {
        return Err(ShannonViolation::Normalization(e));
    }
    if let Some((x, y)) = monotonicity_violation(h) {
        return Err(ShannonViolation::Monotonicity { x, y });
    }
    match min_violation(h) {
        Some(v) => Err(ShannonViolation::Submodularity { x: v.x, y: v.y }),
        None => Ok(()),
    }
}

/// Does `g` satisfy the term, with ∞ − ∞ read as satisfied.
pub fn satisfies_term(g: &SetFunction, t: &StatTerm) -> bool {
    let (gxy, gx) = (g.get(t.target()), g.get(t.x));
    match (gxy.is_infinite(), gx.is_infinite()) {
        (true, false) => false,
        (_, true) => true,
        (false, false) => gxy - gx <= t.exponent + TOL,
    }
}

pub fn satisfies_stats(g: &SetFunction, stats: &Statistics) -> bool {
    stats.terms.iter().all(|t| satisfies_term(g, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(bits: u32) -> VarSet {
        VarSet::from_bits(bits)
    }

    // X=0, Y=1, Z=2, W=3.
    const XY: u32 = 0b0011;
    const YZ: u32 = 0b0110;
    const ZW: u32 = 0b1100;
    const WX: u32 = 0b1001;

    fn four_cycle_g() -> SetFunction {
        SetFunction::from_fn(4, |s| match s.len() {
            0 => 0.0,
            1 => 1.0,
            2 if [XY, YZ, ZW, WX].contains(&s.bits()) => 1.0,
            _ => INF,
        })
    }

    fn term(y: u32, x: u32, n: f64) -> StatTerm {
        StatTerm {
            y: vs(y),
            x: vs(x),
            exponent: n,
            guard: "S".into(),
            guard_schema: vs(x | y),
            bound: None,
        }
    }

    #[test]
    fn init_g_reads_sizes() {
        use crate::relation::{Origin, Relation, Value};
        let rows = [[1, 1], [2, 1], [1, 2]];
        let r = Relation::new(VarSet::full(2), rows.iter().map(|r| r.iter().map(|&v| Value(v)).collect()))
            .unwrap();
        let mut db = Database::new();
        db.augment(r, Origin::Derived);
        let g = init_g(&db, 2, 3);
        assert!((g.get(vs(0b11)) - 1.0).abs() < 1e-12);
        assert!(g.get(vs(0)).is_infinite() && g.get(vs(1)).is_infinite());
        assert_eq!(log_n(1, 3), 0.0);
    }

    #[test]
    fn f_value_examples() {
        let g = four_cycle_g();
        assert_eq!(f_value(&g, vs(XY), vs(YZ)), 1.0);
        assert_eq!(f_value(&g, vs(XY), vs(XY)), 1.0);
        assert_eq!(f_value(&g, vs(0b0001), vs(0b0100)), 2.0);
        assert!(f_value(&g, vs(0b0111), vs(XY)).is_infinite());
    }

    #[test]
    fn four_cycle_min_violation_is_xy_yz() {
        let v = min_violation(&four_cycle_g()).unwrap();
        assert_eq!(v.f, 1.0);
        assert_eq!((v.x, v.y), (vs(XY), vs(YZ)));
    }

    #[test]
    fn polymatroid_has_no_violation() {
        let g = SetFunction::from_fn(4, |s| (s.len() as f64).min(2.0));
        assert!(min_violation(&g).is_none());
        assert!(check_polymatroid(&g).is_ok());
        let g = SetFunction::from_fn(3, |s| (s.len() as f64).min(1.5));
        assert!(check_polymatroid(&g).is_ok());
        assert!(check_polymatroid(&SetFunction::constant(3, 0.0)).is_ok());
    }

    #[test]
    fn single_relation_violation_is_smallest_extension() {
        // g finite on XY and its subsets (values from a 3-tuple relation on
        // N = 3), ∞ above.
        let g = SetFunction::from_fn(3, |s| {
            if s.is_subset(vs(0b011)) {
                if s.is_empty() { 0.0 } else { 1.0 }
            } else if s == vs(0b100) {
                0.5
            } else {
                INF
            }
        });
        let v = min_violation(&g).unwrap();
        // Smallest f among violating pairs: f(X, Z) = 1 + 0.5 − 0.
        assert!((v.f - 1.5).abs() < 1e-12);
        assert_eq!(v.x.union(v.y), vs(0b101));
        assert_eq!((v.x, v.y), (vs(0b001), vs(0b100)));
    }

    #[test]
    fn truncation_of_four_cycle() {
        let t = truncate(&four_cycle_g()).unwrap();
        assert_eq!(t.c, 1.0);
        let mut want = vec![0u32, 1, 2, 4, 8, XY, YZ, ZW, WX];
        want.sort();
        assert_eq!(t.i, want.into_iter().map(vs).collect::<Vec<_>>());
        assert!(check_polymatroid(&t.h).is_ok());
        assert_eq!(t.h.get(vs(0b1111)), 1.0);
    }

    #[test]
    fn truncation_of_polymatroid_is_identity() {
        let g = SetFunction::from_fn(3, |s| s.len() as f64);
        let t = truncate(&g).unwrap();
        assert!(t.c.is_infinite() && t.witness.is_none());
        assert_eq!(t.h, g);
        assert_eq!(t.i.len(), 8);
        let z = truncate(&SetFunction::constant(3, 0.0)).unwrap();
        assert!(z.c.is_infinite());
        assert_eq!(z.i.len(), 8);
    }

    #[test]
    fn truncate_rejects_contract_violations() {
        assert!(truncate(&SetFunction::constant(2, 1.0)).is_err());
        let g = SetFunction::from_fn(2, |s| if s.bits() == 1 { 2.0 } else if s.is_empty() { 0.0 } else { 1.0 });
        assert!(truncate(&g).is_err());
    }

    #[test]
    fn check_cites_the_least_violation() {
        let err = check_polymatroid(&four_cycle_g()).unwrap_err();
        assert_eq!(err, ShannonViolation::Submodularity { x: vs(XY), y: vs(YZ) });
        let g = SetFunction::from_fn(2, |s| if s.is_empty() { 0.5 } else { 1.0 });
        assert!(matches!(check_polymatroid(&g), Err(ShannonViolation::Normalization(_))));
    }

    #[test]
    fn stats_infinity_conventions() {
        let t = term(0b100, 0b010, 0.0);
        let g = |yz: f64, y: f64| {
            SetFunction::constant(3, 0.0).with(vs(0b110), yz).with(vs(0b010), y)
        };
        assert!(satisfies_term(&g(1.0, 1.0), &t));
        assert!(!satisfies_term(&g(INF, 1.0), &t));
        assert!(satisfies_term(&g(1.0, INF), &t));
        assert!(satisfies_term(&g(INF, INF), &t));
        assert!(!satisfies_term(&g(1.5, 1.0), &t));
    }

    #[test]
    fn json_uses_inf_strings() {
        let g = SetFunction::constant(1, INF).with(VarSet::EMPTY, 0.0);
        let j = g.to_json(&["X".to_string()]);
        assert_eq!(j["X"], "inf");
        assert_eq!(j[""], 0.0);
    }
}
