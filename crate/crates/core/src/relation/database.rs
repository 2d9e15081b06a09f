use std::collections::BTreeMap;

use super::{Relation, VarSet};

/// Where a stored relation came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Loaded input data, with the relation names bound to this schema.
    Base(Vec<String>),
    /// Materialized by the engine (projection, guard join, partition join).
    Derived,
}

#[derive(Clone, Debug)]
pub struct StoredRelation {
    pub relation: Relation,
    pub origin: Origin,
}

/// A signature-unique database instance: at most one relation per schema.
#[derive(Clone, Debug, Default)]
pub struct Database {
    relations: BTreeMap<VarSet, StoredRelation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    /// D ⊎ {R}: adds `rel` if its schema is absent, otherwise replaces the
    /// existing relation with the intersection of both.
    pub fn augment(&mut self, rel: Relation, origin: Origin) {
        let schema = rel.schema();
        match self.relations.get_mut(&schema) {
            None => {
                self.relations.insert(
                    schema,
                    StoredRelation {
                        relation: rel,
                        origin,
                    },
                );
            }
            Some(existing) => {
                let merged = existing
                    .relation
                    .intersect(&rel)
                    .expect("schemas are equal by construction");
                if let (Origin::Base(names), Origin::Base(more)) = (&mut existing.origin, origin) {
                    for n in more {
                        if !names.contains(&n) {
                            names.push(n);
                        }
                    }
                }
                existing.relation = merged;
            }
        }
    }

    /// Functional form of [`Database::augment`].
    pub fn augmented(&self, rel: Relation, origin: Origin) -> Database {
        let mut d = self.clone();
        d.augment(rel, origin);
        d
    }

    pub fn get(&self, schema: VarSet) -> Option<&Relation> {
        self.relations.get(&schema).map(|s| &s.relation)
    }

    pub fn entry(&self, schema: VarSet) -> Option<&StoredRelation> {
        self.relations.get(&schema)
    }

    pub fn contains_schema(&self, schema: VarSet) -> bool {
        self.relations.contains_key(&schema)
    }

    /// Schema of the base relation carrying `name`, if any.
    pub fn schema_of(&self, name: &str) -> Option<VarSet> {
        self.relations.iter().find_map(|(s, r)| match &r.origin {
            Origin::Base(names) if names.iter().any(|n| n == name) => Some(*s),
            _ => None,
        })
    }

    pub fn schemas(&self) -> impl Iterator<Item = VarSet> + '_ {
        self.relations.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarSet, &StoredRelation)> + '_ {
        self.relations.iter().map(|(s, r)| (*s, r))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> + '_ {
        self.relations.values().map(|s| &s.relation)
    }

    /// Number of stored relations.
    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    /// Total number of tuples across all relations.
    pub fn size(&self) -> usize {
        self.relations.values().map(|r| r.relation.len()).sum()
    }

    pub fn has_empty_relation(&self) -> bool {
        self.relations.values().any(|r| r.relation.is_empty())
    }
}
