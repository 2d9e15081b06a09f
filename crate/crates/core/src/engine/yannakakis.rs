use crate::decomposition::TreeDecomposition;
use crate::error::{Error, Result};
use crate::relation::{Database, Relation, VarSet};

/// Evaluates the join of the bag relations of `td` (taken from `db`),
/// projected onto `free`. Every bag is first semijoin-reduced with every
/// relation of `db`, then fully reduced along the tree; the answer is the
/// join of the free-core bags.
pub fn yannakakis(td: &TreeDecomposition, db: &Database, free: VarSet) -> Result<Relation> {
    let mut bags: Vec<Relation> = Vec::with_capacity(td.bags.len());
    for &b in &td.bags {
        let mut r = db
            .get(b)
            .ok_or_else(|| Error::Invariant(format!("decomposition bag {b:?} is not covered")))?
            .clone();
        for other in db.relations() {
            if r.is_empty() {
                break;
            }
            if other.schema() != b {
                r = r.semijoin(other);
            }
        }
        bags.push(r);
    }
    reduce_and_join(td, bags, free)
}

/// Full reducer plus free-core join over already materialized bags.
pub(crate) fn reduce_and_join(td: &TreeDecomposition, mut bags: Vec<Relation>, free: VarSet) -> Result<Relation> {
    let k = bags.len();
    let root = td.free_core.first().copied().unwrap_or(0);
    // Preorder from the root, with parents.
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; k];
    let mut visited = vec![false; k];
    visited[root] = true;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for w in td.neighbours(u) {
            if !visited[w] {
                visited[w] = true;
                parent[w] = u;
                order.push(w);
            }
        }
        i += 1;
    }
    if order.len() != k {
        return Err(Error::Invariant("decomposition is not connected".into()));
    }
    for &u in order.iter().skip(1).rev() {
        let p = parent[u];
        bags[p] = bags[p].semijoin(&bags[u]);
    }
    for &u in order.iter().skip(1) {
        let p = parent[u];
        bags[u] = bags[u].semijoin(&bags[p]);
    }
    if bags.iter().any(Relation::is_empty) {
        return Ok(Relation::empty(free));
    }
    if free.is_empty() {
        return Ok(Relation::unit());
    }
    let core: Vec<usize> = if td.free_core.is_empty() {
        (0..k).collect()
    } else {
        td.free_core.clone()
    };
    let mut acc: Option<Relation> = None;
    for &u in order.iter().filter(|u| core.contains(u)) {
        acc = Some(match acc {
            None => bags[u].clone(),
            Some(a) => a.join(&bags[u]),
        });
    }
    acc.expect("free core is nonempty").project(free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{Origin, Value};

    fn vs(b: u32) -> VarSet {
        VarSet::from_bits(b)
    }

    fn rel(schema: VarSet, rows: &[&[u32]]) -> Relation {
        Relation::new(schema, rows.iter().map(|r| r.iter().map(|&v| Value(v)).collect())).unwrap()
    }

    fn td(bags: &[u32], edges: &[(usize, usize)], core: &[usize]) -> TreeDecomposition {
        TreeDecomposition {
            bags: bags.iter().map(|&b| vs(b)).collect(),
            edges: edges.to_vec(),
            free_core: core.to_vec(),
        }
    }

    #[test]
    fn path_join_through_two_bags() {
        // X=0, Y=1, Z=2.
        let mut db = Database::new();
        db.augment(rel(vs(0b011), &[&[1, 1], &[2, 1], &[3, 9]]), Origin::Derived);
        db.augment(rel(vs(0b110), &[&[1, 7], &[1, 8]]), Origin::Derived);
        let t = td(&[0b011, 0b110], &[(0, 1)], &[0, 1]);
        let out = yannakakis(&t, &db, vs(0b111)).unwrap();
        assert_eq!(out.len(), 4);
        let boolean = yannakakis(&t, &db, VarSet::EMPTY).unwrap();
        assert_eq!(boolean, Relation::unit());
    }

    #[test]
    fn non_bag_relations_filter_the_bags() {
        let mut db = Database::new();
        db.augment(rel(vs(0b011), &[&[1, 1], &[2, 1]]), Origin::Derived);
        db.augment(rel(vs(0b001), &[&[2]]), Origin::Derived);
        let t = td(&[0b011], &[], &[0]);
        let out = yannakakis(&t, &db, vs(0b011)).unwrap();
        assert_eq!(out, rel(vs(0b011), &[&[2, 1]]));
    }

    #[test]
    fn empty_after_reduction() {
        let mut db = Database::new();
        db.augment(rel(vs(0b011), &[&[1, 1]]), Origin::Derived);
        db.augment(rel(vs(0b110), &[&[2, 7]]), Origin::Derived);
        let t = td(&[0b011, 0b110], &[(0, 1)], &[]);
        assert!(yannakakis(&t, &db, VarSet::EMPTY).unwrap().is_empty());
    }

    #[test]
    fn uncovered_bag_is_an_error() {
        let db = Database::new();
        let t = td(&[0b1], &[], &[0]);
        assert!(yannakakis(&t, &db, vs(1)).is_err());
    }
}
