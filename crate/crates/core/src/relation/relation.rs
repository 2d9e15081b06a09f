use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::fmt;
use std::sync::Arc;

use super::{Value, VarSet};
use crate::error::{Error, Result};

/// Hashable projection of a tuple onto a fixed list of columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Key {
    Packed(u128),
    Wide(Box<[Value]>),
}

/// Extracts [`Key`]s from rows of a fixed schema.
#[derive(Clone, Debug)]
pub(crate) struct KeyExtractor {
    positions: Vec<usize>,
}

impl KeyExtractor {
    /// Key over `vars` for rows of `schema`. `vars` must be a subset of `schema`.
    pub(crate) fn new(schema: VarSet, vars: VarSet) -> Self {
        debug_assert!(vars.is_subset(schema));
        let positions = vars
            .iter()
            .map(|v| schema.position(v).expect("key variable outside schema"))
            .collect();
        KeyExtractor { positions }
    }

    pub(crate) fn key(&self, row: &[Value]) -> Key {
        if self.positions.len() <= 4 {
            let mut k = 0u128;
            for &p in &self.positions {
                k = (k << 32) | row[p].0 as u128;
            }
            Key::Packed(k)
        } else {
            Key::Wide(self.positions.iter().map(|&p| row[p]).collect())
        }
    }

    pub(crate) fn key_of_values(&self, values: &[Value]) -> Key {
        debug_assert_eq!(values.len(), self.positions.len());
        if values.len() <= 4 {
            let mut k = 0u128;
            for v in values {
                k = (k << 32) | v.0 as u128;
            }
            Key::Packed(k)
        } else {
            Key::Wide(values.into())
        }
    }
}

/// A finite set of tuples over a schema.
///
/// Rows are stored flat in canonical (lexicographically sorted, deduplicated)
/// order; values within a row follow the schema's ascending variable order.
/// Relations are immutable and cheap to clone.
#[derive(Clone)]
pub struct Relation {
    schema: VarSet,
    len: usize,
    data: Arc<[Value]>,
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.len == other.len && self.data == other.data
    }
}

impl Eq for Relation {}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Relation")
            .field("schema", &self.schema)
            .field("rows", &self.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .finish()
    }
}

fn canonicalize(arity: usize, data: Vec<Value>, rows: usize) -> (Vec<Value>, usize) {
    if arity == 0 {
        return (Vec::new(), rows.min(1));
    }
    debug_assert_eq!(data.len(), arity * rows);
    if arity <= 4 {
        let mut packed: Vec<u128> = data
            .chunks_exact(arity)
            .map(|r| r.iter().fold(0u128, |k, v| (k << 32) | v.0 as u128))
            .collect();
        packed.sort_unstable();
        packed.dedup();
        let mut out = Vec::with_capacity(packed.len() * arity);
        for k in &packed {
            for i in (0..arity).rev() {
                out.push(Value((k >> (32 * i)) as u32));
            }
        }
        let n = packed.len();
        (out, n)
    } else {
        let mut idx: Vec<usize> = (0..rows).collect();
        let row = |i: usize| &data[i * arity..(i + 1) * arity];
        idx.sort_unstable_by(|&a, &b| row(a).cmp(row(b)));
        idx.dedup_by(|a, b| row(*a) == row(*b));
        let mut out = Vec::with_capacity(idx.len() * arity);
        for &i in &idx {
            out.extend_from_slice(row(i));
        }
        let n = idx.len();
        (out, n)
    }
}

impl Relation {
    /// The empty relation over `schema`.
    pub fn empty(schema: VarSet) -> Self {
        Relation {
            schema,
            len: 0,
            data: Arc::from(Vec::new()),
        }
    }

    /// The nullary relation `{()}`.
    pub fn unit() -> Self {
        Relation {
            schema: VarSet::EMPTY,
            len: 1,
            data: Arc::from(Vec::new()),
        }
    }

    /// Builds a relation from rows given in the schema's variable order.
    pub fn new(schema: VarSet, rows: impl IntoIterator<Item = Vec<Value>>) -> Result<Self> {
        let arity = schema.len();
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            if row.len() != arity {
                return Err(Error::Schema(format!(
                    "row of width {} does not match schema arity {arity}",
                    row.len()
                )));
            }
            data.extend(row);
            n += 1;
        }
        Ok(Self::from_flat(schema, data, n))
    }

    /// Builds a relation from flat row-major data, sorting and deduplicating.
    pub(crate) fn from_flat(schema: VarSet, data: Vec<Value>, rows: usize) -> Self {
        let (data, len) = canonicalize(schema.len(), data, rows);
        Relation {
            schema,
            len,
            data: Arc::from(data),
        }
    }

    /// Builds a relation from data already in canonical order (for instance a
    /// filtered subsequence of another relation's rows).
    pub(crate) fn from_sorted_flat(schema: VarSet, data: Vec<Value>, rows: usize) -> Self {
        let len = if schema.is_empty() { rows.min(1) } else { rows };
        debug_assert!(schema.is_empty() || data.len() == rows * schema.len());
        Relation {
            schema,
            len,
            data: Arc::from(data),
        }
    }

    pub fn schema(&self) -> VarSet {
        self.schema
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, i: usize) -> &[Value] {
        let a = self.arity();
        &self.data[i * a..(i + 1) * a]
    }

    /// Rows in canonical order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[Value]> + '_ {
        let a = self.arity();
        (0..self.len).map(move |i| &self.data[i * a..(i + 1) * a])
    }

    pub fn contains(&self, row: &[Value]) -> bool {
        if row.len() != self.arity() {
            return false;
        }
        if self.arity() == 0 {
            return self.len == 1;
        }
        let a = self.arity();
        let (mut lo, mut hi) = (0, self.len);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.data[mid * a..(mid + 1) * a].cmp(row) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Keeps the rows for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&[Value]) -> bool) -> Relation {
        let mut data = Vec::new();
        let mut n = 0;
        for r in self.iter() {
            if keep(r) {
                data.extend_from_slice(r);
                n += 1;
            }
        }
        Relation::from_sorted_flat(self.schema, data, n)
    }

    /// π_X(R): the distinct projections of this relation's rows onto `vars`.
    pub fn project(&self, vars: VarSet) -> Result<Relation> {
        if !vars.is_subset(self.schema) {
            return Err(Error::Schema(format!(
                "cannot project relation over {:?} onto {:?}",
                self.schema, vars
            )));
        }
        if vars == self.schema {
            return Ok(self.clone());
        }
        let positions: Vec<usize> = vars
            .iter()
            .map(|v| self.schema.position(v).unwrap())
            .collect();
        let mut data = Vec::with_capacity(self.len * positions.len());
        for r in self.iter() {
            data.extend(positions.iter().map(|&p| r[p]));
        }
        Ok(Relation::from_flat(vars, data, self.len))
    }

    /// R ⋉ S: rows of this relation whose projection onto the shared
    /// variables occurs in `other`.
    pub fn semijoin(&self, other: &Relation) -> Relation {
        let common = self.schema.intersection(other.schema);
        if common.is_empty() {
            return if other.is_empty() {
                Relation::empty(self.schema)
            } else {
                self.clone()
            };
        }
        let theirs = KeyExtractor::new(other.schema, common);
        let mine = KeyExtractor::new(self.schema, common);
        if self.len <= other.len {
            // Hash the smaller side: collect our keys, keep those `other` hits.
            let mut hit: HashMap<Key, bool> = self.iter().map(|r| (mine.key(r), false)).collect();
            for r in other.iter() {
                if let Some(h) = hit.get_mut(&theirs.key(r)) {
                    *h = true;
                }
            }
            self.filter(|r| hit[&mine.key(r)])
        } else {
            let keys: HashSet<Key> = other.iter().map(|r| theirs.key(r)).collect();
            self.filter(|r| keys.contains(&mine.key(r)))
        }
    }

    /// Natural join. Hash-based, building on the smaller input.
    pub fn join(&self, other: &Relation) -> Relation {
        if self.len <= other.len {
            HashIndex::build(self, self.schema.intersection(other.schema)).join(other)
        } else {
            HashIndex::build(other, self.schema.intersection(other.schema)).join(self)
        }
    }

    /// Set union of relations over one schema.
    pub fn union_all<'r>(schema: VarSet, rels: impl IntoIterator<Item = &'r Relation>) -> Result<Relation> {
        let mut data = Vec::new();
        let mut n = 0;
        for r in rels {
            if r.schema != schema {
                return Err(Error::Schema(format!(
                    "cannot union a relation over {:?} into {:?}",
                    r.schema, schema
                )));
            }
            data.extend_from_slice(&r.data);
            n += r.len;
        }
        Ok(Relation::from_flat(schema, data, n))
    }

    /// Set intersection with a relation over the same schema.
    pub fn intersect(&self, other: &Relation) -> Result<Relation> {
        if self.schema != other.schema {
            return Err(Error::Schema(format!(
                "cannot intersect relations over {:?} and {:?}",
                self.schema, other.schema
            )));
        }
        if self.arity() == 0 {
            let n = usize::from(self.len == 1 && other.len == 1);
            return Ok(Relation::from_sorted_flat(self.schema, Vec::new(), n));
        }
        let (mut i, mut j) = (0, 0);
        let mut data = Vec::new();
        let mut n = 0;
        while i < self.len && j < other.len {
            match self.row(i).cmp(other.row(j)) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    data.extend_from_slice(self.row(i));
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(Relation::from_sorted_flat(self.schema, data, n))
    }

    fn check_degree_args(&self, y: VarSet, x: VarSet) -> Result<()> {
        if !x.union(y).is_subset(self.schema) {
            return Err(Error::Schema(format!(
                "degree of {:?} given {:?} needs both inside the schema {:?}",
                y, x, self.schema
            )));
        }
        Ok(())
    }

    /// deg_R(Y | X): the largest number of distinct Y-projections sharing one
    /// X-value (0 for an empty relation).
    pub fn degree(&self, y: VarSet, x: VarSet) -> Result<usize> {
        self.check_degree_args(y, x)?;
        Ok(self.degree_groups(y, x)?.into_values().max().unwrap_or(0))
    }

    /// Per X-value degree counts. Keys are X-projections in X's variable order.
    pub fn degree_by_value(&self, y: VarSet, x: VarSet) -> Result<Vec<(Vec<Value>, usize)>> {
        self.check_degree_args(y, x)?;
        let xy = self.project(x.union(y))?;
        let ext = KeyExtractor::new(xy.schema, x);
        let positions: Vec<usize> = x.iter().map(|v| xy.schema.position(v).unwrap()).collect();
        let mut counts: HashMap<Key, (Vec<Value>, usize)> = HashMap::default();
        for r in xy.iter() {
            counts
                .entry(ext.key(r))
                .or_insert_with(|| (positions.iter().map(|&p| r[p]).collect(), 0))
                .1 += 1;
        }
        let mut out: Vec<_> = counts.into_values().collect();
        out.sort();
        Ok(out)
    }

    fn degree_groups(&self, y: VarSet, x: VarSet) -> Result<HashMap<Key, usize>> {
        let xy = self.project(x.union(y))?;
        Ok(xy.group_sizes(x))
    }

    /// deg_R(Y | X = x) for one X-value given in X's variable order.
    pub fn degree_at(&self, y: VarSet, x: VarSet, xval: &[Value]) -> Result<usize> {
        self.check_degree_args(y, x)?;
        if xval.len() != x.len() {
            return Err(Error::Schema(format!(
                "value of width {} given for {:?}",
                xval.len(),
                x
            )));
        }
        let xy = self.project(x.union(y))?;
        let ext = KeyExtractor::new(xy.schema, x);
        let probe = ext.key_of_values(xval);
        Ok(xy.iter().filter(|r| ext.key(r) == probe).count())
    }

    /// Number of rows per W-value (rows are distinct, so this is
    /// deg_R(schema | W = w)).
    pub(crate) fn group_sizes(&self, w: VarSet) -> HashMap<Key, usize> {
        let ext = KeyExtractor::new(self.schema, w);
        let mut counts = HashMap::default();
        for r in self.iter() {
            *counts.entry(ext.key(r)).or_insert(0) += 1;
        }
        counts
    }
}

/// A relation indexed by the values of a subset of its variables, for
/// repeated probing.
pub struct HashIndex<'a> {
    rel: &'a Relation,
    on: VarSet,
    map: HashMap<Key, Vec<u32>>,
}

impl<'a> HashIndex<'a> {
    pub fn build(rel: &'a Relation, on: VarSet) -> Self {
        let ext = KeyExtractor::new(rel.schema, on);
        let mut map: HashMap<Key, Vec<u32>> = HashMap::default();
        for (i, r) in rel.iter().enumerate() {
            map.entry(ext.key(r)).or_default().push(i as u32);
        }
        HashIndex { rel, on, map }
    }

    /// Natural join of the indexed relation with `probe`. The index must be
    /// built on exactly the shared variables.
    pub fn join(&self, probe: &Relation) -> Relation {
        let built = self.rel;
        assert_eq!(
            self.on,
            built.schema.intersection(probe.schema),
            "index not built on the join variables"
        );
        let out_schema = built.schema.union(probe.schema);
        // Source of each output column: (from_built, position).
        let sources: Vec<(bool, usize)> = out_schema
            .iter()
            .map(|v| match built.schema.position(v) {
                Some(p) => (true, p),
                None => (false, probe.schema.position(v).unwrap()),
            })
            .collect();
        let ext = KeyExtractor::new(probe.schema, self.on);
        let mut data = Vec::new();
        let mut n = 0usize;
        for pr in probe.iter() {
            let Some(matches) = self.map.get(&ext.key(pr)) else {
                continue;
            };
            for &bi in matches {
                let br = built.row(bi as usize);
                data.extend(
                    sources
                        .iter()
                        .map(|&(from_built, p)| if from_built { br[p] } else { pr[p] }),
                );
                n += 1;
            }
        }
        Relation::from_flat(out_schema, data, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals(xs: &[u32]) -> Vec<Value> {
        xs.iter().map(|&x| Value(x)).collect()
    }

    fn rel(schema: VarSet, rows: &[&[u32]]) -> Relation {
        Relation::new(schema, rows.iter().map(|r| vals(r))).unwrap()
    }

    const X: usize = 0;
    const Y: usize = 1;
    const Z: usize = 2;

    fn xy() -> VarSet {
        VarSet::from_vars([X, Y])
    }

    fn sample() -> Relation {
        rel(xy(), &[&[1, 1], &[2, 1], &[1, 2]])
    }

    #[test]
    fn project_deduplicates() {
        let p = sample().project(VarSet::singleton(X)).unwrap();
        assert_eq!(p, rel(VarSet::singleton(X), &[&[1], &[2]]));
        assert_eq!(sample().project(xy()).unwrap(), sample());
        let nullary = sample().project(VarSet::EMPTY).unwrap();
        assert_eq!(nullary, Relation::unit());
        assert!(sample().project(VarSet::singleton(Z)).is_err());
    }

    #[test]
    fn semijoin_filters_by_shared_values() {
        let s = rel(VarSet::from_vars([Y, Z]), &[&[2, 5]]);
        assert_eq!(sample().semijoin(&s), rel(xy(), &[&[1, 2]]));
        assert_eq!(sample().semijoin(&sample()), sample());
        let empty = Relation::empty(VarSet::from_vars([Y, Z]));
        assert!(sample().semijoin(&empty).is_empty());
    }

    #[test]
    fn join_matches_nested_loop() {
        let r = sample();
        let s = rel(VarSet::from_vars([Y, Z]), &[&[1, 1], &[2, 1], &[1, 2]]);
        let j = r.join(&s);
        // Nested-loop oracle.
        let mut expected = Vec::new();
        for a in r.iter() {
            for b in s.iter() {
                if a[1] == b[0] {
                    expected.push(vec![a[0], a[1], b[1]]);
                }
            }
        }
        assert_eq!(expected.len(), 5);
        assert_eq!(j, Relation::new(VarSet::from_vars([X, Y, Z]), expected).unwrap());
        assert_eq!(r.join(&Relation::unit()), r);
        assert!(r.join(&Relation::empty(VarSet::singleton(Z))).is_empty());
    }

    #[test]
    fn degree_and_degree_at() {
        let r = sample();
        assert_eq!(r.degree(VarSet::singleton(Y), VarSet::singleton(X)).unwrap(), 2);
        assert_eq!(r.degree(xy(), VarSet::EMPTY).unwrap(), 3);
        assert_eq!(
            r.degree_at(VarSet::singleton(Y), VarSet::singleton(X), &vals(&[2]))
                .unwrap(),
            1
        );
        assert_eq!(Relation::empty(xy()).degree(xy(), VarSet::EMPTY).unwrap(), 0);
        assert!(r.degree(VarSet::singleton(Z), VarSet::EMPTY).is_err());
    }

    #[test]
    fn intersect_and_contains() {
        let a = sample();
        let b = rel(xy(), &[&[1, 1], &[3, 3]]);
        let i = a.intersect(&b).unwrap();
        assert_eq!(i, rel(xy(), &[&[1, 1]]));
        assert!(i.contains(&vals(&[1, 1])));
        assert!(!i.contains(&vals(&[2, 1])));
        assert!(Relation::unit().contains(&[]));
        assert!(a.intersect(&Relation::unit()).is_err());
    }

    #[test]
    fn wide_rows_canonicalize() {
        let s = VarSet::full(6);
        let r = Relation::new(
            s,
            vec![vals(&[2, 0, 0, 0, 0, 0]), vals(&[1, 9, 9, 9, 9, 9]), vals(&[2, 0, 0, 0, 0, 0])],
        )
        .unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.row(0), &vals(&[1, 9, 9, 9, 9, 9])[..]);
        let k = r.project(VarSet::full(5)).unwrap();
        assert_eq!(k.len(), 2);
        let j = r.join(&k);
        assert_eq!(j, r);
    }
}
