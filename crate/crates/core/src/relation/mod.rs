//! Immutable relational values and the algebra over them.

mod database;
#[allow(clippy::module_inception)]
mod relation;
mod value;
mod varset;

pub use database::{Database, Origin, StoredRelation};
pub use relation::{HashIndex, Relation};
#[allow(unused_imports)]
pub(crate) use relation::{Key, KeyExtractor};
pub use value::{Dictionary, Value};
pub use varset::{VarSet, MAX_VARS};
