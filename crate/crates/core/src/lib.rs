//! Conjunctive-query evaluation guided by submodularity violations, with a
//! width calculator and a brute-force oracle.

pub mod calibrate;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod polymatroid;
pub mod query;
pub mod relation;
pub mod width;

pub use error::{Error, Result};
pub use query::{Atom, ConjunctiveQuery, RawInstance, StatTerm, Statistics};
pub use relation::{Database, Dictionary, Relation, Value, VarSet};
