use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::relation::{Key, KeyExtractor, Relation, VarSet};

/// Splits R by W-group size: groups larger than `tau` are heavy.
pub fn heavy_light_partition(r: &Relation, w: VarSet, tau: f64) -> Result<(Relation, Relation)> {
    if !w.is_subset(r.schema()) {
        return Err(Error::Schema(format!(
            "partition variables {w:?} are not in {:?}",
            r.schema()
        )));
    }
    let sizes = r.group_sizes(w);
    let ext = KeyExtractor::new(r.schema(), w);
    let heavy = r.filter(|row| sizes[&ext.key(row)] as f64 > tau);
    let light = r.filter(|row| sizes[&ext.key(row)] as f64 <= tau);
    Ok((heavy, light))
}

/// Rows per W-group in one part: ⌊θ⌋, so that joining a part with R(X)
/// stays within N^{g(X)}·θ (θ ≥ 1 whenever g is monotone).
pub fn chunk_size(theta: f64) -> usize {
    (theta.floor() as usize).max(1)
}

/// Parts needed to hold a light group of up to θ·N^ε rows in chunks of
/// ⌊θ⌋. Equals ⌈N^ε⌉ when θ is an integer, and is below 2⌈N^ε⌉ otherwise.
pub fn light_part_count(theta: f64, n_eps: f64) -> usize {
    ((theta * n_eps) / chunk_size(theta) as f64).ceil().max(1.0) as usize
}

/// Splits a light relation into `k` parts: each W-group is cut, in row
/// order, into chunks of [`chunk_size`] and chunk j goes to part j.
pub fn equal_degree_partition(rl: &Relation, w: VarSet, theta: f64, k: usize) -> Result<Vec<Relation>> {
    let chunk = chunk_size(theta);
    let ext = KeyExtractor::new(rl.schema(), w);
    let mut parts: Vec<(Vec<_>, usize)> = vec![(Vec::new(), 0); k];
    let mut seen: HashMap<Key, usize> = HashMap::default();
    for row in rl.iter() {
        let c = seen.entry(ext.key(row)).or_insert(0);
        let j = *c / chunk;
        *c += 1;
        let part = parts.get_mut(j).ok_or_else(|| {
            Error::Invariant(format!(
                "a W-group needs more than {k} chunks of {chunk}; the heavy threshold was not applied"
            ))
        })?;
        part.0.extend_from_slice(row);
        part.1 += 1;
    }
    Ok(parts
        .into_iter()
        .map(|(data, n)| Relation::from_sorted_flat(rl.schema(), data, n))
        .collect())
}
