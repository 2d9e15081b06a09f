//! Conjunctive queries, degree statistics, and relation data files.

mod data;
mod lexer;
mod stats;

use std::fmt;
use std::str::FromStr;

pub use data::{load_instance, write_table, RawInstance, Table};
pub use stats::{classic_stats, default_stats, parse_stats, StatTerm, Statistics};

use crate::error::{Error, Result};
use crate::relation::{VarSet, MAX_VARS};
use lexer::{error_at, tokenize, Cursor, Tok};

/// One body atom `R(X1, .., Xk)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub name: String,
    /// Variables in the order they were written.
    pub vars: Vec<usize>,
    pub schema: VarSet,
}

/// `Q(F) :- R1(X1), .., Rm(Xm).`
///
/// Variables are numbered by first appearance: head variables in written
/// order, then body variables scanning atoms in canonical order. Atoms are
/// kept in canonical order (by relation name, then by variable names).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    head: String,
    var_names: Vec<String>,
    free: VarSet,
    atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn parse(text: &str) -> Result<Self> {
        let toks = tokenize(text)?;
        let end = text
            .lines()
            .enumerate()
            .last()
            .map(|(i, l)| (i + 1, l.chars().count() + 1))
            .unwrap_or((1, 1));
        let mut cur = Cursor::new(&toks, end);

        let (head, _, _) = cur.ident("query name")?;
        cur.expect(Tok::LParen, "'('")?;
        let mut head_vars: Vec<(String, usize, usize)> = Vec::new();
        if !cur.eat(&Tok::RParen) {
            loop {
                head_vars.push(cur.ident("variable")?);
                if cur.eat(&Tok::RParen) {
                    break;
                }
                cur.expect(Tok::Comma, "',' or ')'")?;
            }
        }
        cur.expect(Tok::Turnstile, "':-'")?;
        if matches!(cur.peek(), Some(Tok::Dot) | None) {
            return Err(cur.error("query body is empty"));
        }

        struct RawAtom {
            name: String,
            vars: Vec<String>,
        }
        let mut raw_atoms = Vec::new();
        loop {
            let (name, _, _) = cur.ident("relation name")?;
            cur.expect(Tok::LParen, "'('")?;
            let mut vars: Vec<String> = Vec::new();
            if matches!(cur.peek(), Some(Tok::RParen)) {
                return Err(cur.error(format!("atom {name} has no variables")));
            }
            loop {
                let (v, l, c) = cur.ident("variable")?;
                if vars.contains(&v) {
                    return Err(error_at(
                        l,
                        c,
                        format!("variable {v} repeated in atom {name}"),
                    ));
                }
                vars.push(v);
                if cur.eat(&Tok::RParen) {
                    break;
                }
                cur.expect(Tok::Comma, "',' or ')'")?;
            }
            raw_atoms.push(RawAtom { name, vars });
            if cur.eat(&Tok::Dot) {
                break;
            }
            cur.expect(Tok::Comma, "',' or '.'")?;
        }
        if !cur.at_end() {
            return Err(cur.error("unexpected input after '.'"));
        }

        let mut seen_head = Vec::new();
        for (v, l, c) in &head_vars {
            if seen_head.contains(v) {
                return Err(error_at(*l, *c, format!("free variable {v} repeated")));
            }
            if !raw_atoms.iter().any(|a| a.vars.contains(v)) {
                return Err(error_at(
                    *l,
                    *c,
                    format!("free variable {v} does not occur in the body"),
                ));
            }
            seen_head.push(v.clone());
        }

        // Canonical atom order, then variable numbering by first appearance.
        raw_atoms.sort_by(|a, b| {
            let mut ka = a.vars.clone();
            ka.sort();
            let mut kb = b.vars.clone();
            kb.sort();
            (&a.name, ka).cmp(&(&b.name, kb))
        });
        let mut var_names: Vec<String> = seen_head.clone();
        for a in &raw_atoms {
            for v in &a.vars {
                if !var_names.contains(v) {
                    var_names.push(v.clone());
                }
            }
        }
        if var_names.len() > MAX_VARS {
            return Err(Error::Limit(format!(
                "query has {} variables; at most {MAX_VARS} are supported",
                var_names.len()
            )));
        }
        let index = |v: &str| var_names.iter().position(|n| n == v).unwrap();
        let free = VarSet::from_vars(seen_head.iter().map(|v| index(v)));
        let mut atoms: Vec<Atom> = Vec::new();
        for a in raw_atoms {
            let vars: Vec<usize> = a.vars.iter().map(|v| index(v)).collect();
            let schema = VarSet::from_vars(vars.iter().copied());
            if atoms.iter().any(|b| b.name == a.name && b.schema == schema) {
                continue;
            }
            atoms.push(Atom {
                name: a.name,
                vars,
                schema,
            });
        }
        Ok(ConjunctiveQuery {
            head,
            var_names,
            free,
            atoms,
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    /// The variable universe V.
    pub fn variables(&self) -> VarSet {
        VarSet::full(self.var_names.len())
    }

    pub fn free(&self) -> VarSet {
        self.free
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.free == self.variables()
    }

    pub fn var_name(&self, v: usize) -> &str {
        &self.var_names[v]
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    /// Variable names of `set` in the universe's order.
    pub fn names_of(&self, set: VarSet) -> Vec<String> {
        set.iter().map(|v| self.var_names[v].clone()).collect()
    }

    /// Compact rendering such as `XYZ` (single-letter names) or `X,Y,Z`.
    pub fn label(&self, set: VarSet) -> String {
        let names = self.names_of(set);
        if names.iter().all(|n| n.chars().count() == 1) {
            names.concat()
        } else {
            names.join(",")
        }
    }

    /// Resolves a list of variable names into a set.
    pub fn varset(&self, names: &[&str]) -> Result<VarSet> {
        names.iter().try_fold(VarSet::EMPTY, |acc, n| {
            self.var_index(n)
                .map(|v| acc.union(VarSet::singleton(v)))
                .ok_or_else(|| Error::Invalid(format!("unknown variable {n}")))
        })
    }

    /// Canonical text form; parsing it yields an identical query.
    pub fn render(&self) -> String {
        let head_vars = self.names_of(self.free).join(",");
        let body: Vec<String> = self
            .atoms
            .iter()
            .map(|a| {
                let vs: Vec<&str> = a.vars.iter().map(|&v| self.var_names[v].as_str()).collect();
                format!("{}({})", a.name, vs.join(","))
            })
            .collect();
        format!("{}({}) :- {}.", self.head, head_vars, body.join(", "))
    }
}

impl FromStr for ConjunctiveQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConjunctiveQuery::parse(s)
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Frequently used queries.
pub mod catalog {
    pub const FOUR_CYCLE: &str = "Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).";
    pub const FOUR_CYCLE_BOOLEAN: &str = "Q() :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).";
    pub const TRIANGLE: &str = "Q(X,Y,Z) :- R(X,Y), S(Y,Z), T(X,Z).";
    pub const TWO_PATH_FULL: &str = "Q(X,Y,Z) :- R(X,Y), S(Y,Z).";
    pub const TWO_PATH_PROJECTED: &str = "Q(X,Z) :- R(X,Y), S(Y,Z).";
    pub const FIVE_CYCLE: &str = "Q(A,B,C,D,E) :- R(A,B), S(B,C), T(C,D), U(D,E), P(E,A).";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_four_cycle() {
        let q = ConjunctiveQuery::parse(catalog::FOUR_CYCLE).unwrap();
        assert_eq!(q.var_names(), &["X", "Y", "Z", "W"]);
        assert!(q.is_full());
        assert_eq!(q.atoms().len(), 4);
        assert_eq!(q.atoms()[0].name, "R");
        assert_eq!(q.atoms()[3].schema, q.varset(&["W", "X"]).unwrap());
    }

    #[test]
    fn parses_boolean_variant() {
        let q = ConjunctiveQuery::parse(catalog::FOUR_CYCLE_BOOLEAN).unwrap();
        assert!(q.is_boolean());
        assert_eq!(q.var_names(), &["X", "Y", "Z", "W"]);
    }

    #[test]
    fn rejects_unbound_free_variable() {
        let err = ConjunctiveQuery::parse("Q(A) :- R(X,Y).").unwrap_err();
        match err {
            Error::Parse { line, column, message } => {
                assert_eq!((line, column), (1, 3));
                assert!(message.contains("A"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "Q(X) :- .",
            "Q(X) :- R(X,X).",
            "Q(X) :- R(X, 1).",
            "Q(X) R(X).",
            "Q(X) :- R(X)",
            "Q(X) :- R(X). extra",
            "Q(X,X) :- R(X).",
            "Q(X) :- R().",
        ] {
            assert!(ConjunctiveQuery::parse(bad).is_err(), "{bad} should fail");
        }
        let err = ConjunctiveQuery::parse("Q(X) :- R(X, 1).").unwrap_err();
        assert!(err.to_string().contains("constants"));
    }

    #[test]
    fn merges_duplicate_atoms_and_canonicalizes_order() {
        let q = ConjunctiveQuery::parse("Q() :- S(Y,Z), R(X,Y), S(Z,Y).").unwrap();
        assert_eq!(q.atoms().len(), 2);
        assert_eq!(q.atoms()[0].name, "R");
        assert_eq!(q.var_names(), &["X", "Y", "Z"]);
        assert_eq!(q.render(), "Q() :- R(X,Y), S(Y,Z).");
    }

    #[test]
    fn whitespace_is_insignificant() {
        let q = ConjunctiveQuery::parse("  Q ( X )\n:-\tR( X ,Y )  .").unwrap();
        assert_eq!(q.render(), "Q(X) :- R(X,Y).");
    }
}
