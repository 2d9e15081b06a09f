use std::fmt;

use super::lexer::{error_at, tokenize, Cursor, Tok};
use super::ConjunctiveQuery;
use crate::error::{Error, Result};
use crate::relation::{Database, Dictionary, VarSet};

/// One degree constraint log_N deg_G(Y|X) ≤ n.
#[derive(Clone, Debug, PartialEq)]
pub struct StatTerm {
    pub y: VarSet,
    pub x: VarSet,
    pub exponent: f64,
    pub guard: String,
    pub guard_schema: VarSet,
    /// Absolute bound the exponent was derived from, if any.
    pub bound: Option<f64>,
}

impl StatTerm {
    /// X ∪ Y, the set whose value the term caps.
    pub fn target(&self) -> VarSet {
        self.x.union(self.y)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Statistics {
    pub terms: Vec<StatTerm>,
}

impl Statistics {
    pub fn new(terms: Vec<StatTerm>) -> Self {
        Statistics { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Copy with every exponent replaced by 1 (plain cardinality caps).
    pub fn classic(&self) -> Statistics {
        Statistics {
            terms: self
                .terms
                .iter()
                .map(|t| StatTerm {
                    exponent: 1.0,
                    bound: None,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// Checks every term against the guard relations of `db`.
    pub fn verify(&self, db: &Database, dict: Option<&Dictionary>, q: &ConjunctiveQuery) -> Result<()> {
        for t in &self.terms {
            let guard = db.get(t.guard_schema).ok_or_else(|| {
                Error::Invalid(format!("guard relation {} is missing", t.guard))
            })?;
            let limit = match t.bound {
                Some(b) => b,
                None => continue,
            };
            for (xval, d) in guard.degree_by_value(t.y, t.x)? {
                if d as f64 > limit {
                    let at = if t.x.is_empty() {
                        String::new()
                    } else {
                        let shown: Vec<String> = xval
                            .iter()
                            .map(|v| match dict {
                                Some(dict) => dict.render(*v).to_string(),
                                None => v.0.to_string(),
                            })
                            .collect();
                        format!(" at {}={}", q.names_of(t.x).join(","), shown.join(","))
                    };
                    return Err(Error::StatsViolated(format!(
                        "deg({}; {}|{}) is {d}{at}, above the bound {limit}",
                        t.guard,
                        q.names_of(t.y).join(","),
                        q.names_of(t.x).join(","),
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for StatTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "deg({}; {:?}|{:?}) n={}",
            self.guard, self.y, self.x, self.exponent
        )
    }
}

fn log_base(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// Parses `deg(G; Y|X) <= B` lines. Exponents are ln B / ln N; the bounds
/// are checked against the guards in `db`.
pub fn parse_stats(
    text: &str,
    q: &ConjunctiveQuery,
    db: &Database,
    dict: Option<&Dictionary>,
    n: usize,
) -> Result<Statistics> {
    let mut terms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let toks = tokenize(line).map_err(|e| shift_line(e, lineno + 1))?;
        if toks.is_empty() {
            continue;
        }
        let end = (1, line.chars().count() + 1);
        let term = parse_line(&toks, end, q, db, n).map_err(|e| shift_line(e, lineno + 1))?;
        terms.push(term);
    }
    let stats = Statistics { terms };
    stats.verify(db, dict, q)?;
    Ok(stats)
}

fn shift_line(e: Error, line: usize) -> Error {
    match e {
        Error::Parse {
            column, message, ..
        } => Error::Parse {
            line,
            column,
            message,
        },
        other => other,
    }
}

fn varlist(cur: &mut Cursor<'_>, q: &ConjunctiveQuery, stop: &Tok) -> Result<VarSet> {
    let mut set = VarSet::EMPTY;
    if cur.peek() == Some(stop) {
        return Ok(set);
    }
    loop {
        let (name, l, c) = cur.ident("variable")?;
        let v = q
            .var_index(&name)
            .ok_or_else(|| error_at(l, c, format!("variable {name} does not occur in the query")))?;
        set = set.union(VarSet::singleton(v));
        if cur.peek() == Some(stop) {
            return Ok(set);
        }
        cur.expect(Tok::Comma, "',' or end of variable list")?;
    }
}

fn parse_line(
    toks: &[super::lexer::Spanned],
    end: (usize, usize),
    q: &ConjunctiveQuery,
    db: &Database,
    n: usize,
) -> Result<StatTerm> {
    let mut cur = Cursor::new(toks, end);
    let (kw, l, c) = cur.ident("'deg'")?;
    if kw != "deg" {
        return Err(error_at(l, c, format!("expected 'deg', found {kw}")));
    }
    cur.expect(Tok::LParen, "'('")?;
    let (guard, gl, gc) = cur.ident("guard relation name")?;
    cur.expect(Tok::Semicolon, "';'")?;
    let y = varlist(&mut cur, q, &Tok::Pipe)?;
    cur.expect(Tok::Pipe, "'|'")?;
    let x = varlist(&mut cur, q, &Tok::RParen)?;
    cur.expect(Tok::RParen, "')'")?;
    cur.expect(Tok::Le, "'<='")?;
    let (bl, bc) = cur.here();
    let bound = match cur.next().map(|s| s.tok.clone()) {
        Some(Tok::Number(b)) => b,
        _ => return Err(error_at(bl, bc, "expected a numeric bound")),
    };
    if !cur.at_end() {
        return Err(cur.error("unexpected input after the bound"));
    }
    if y.is_empty() {
        return Err(error_at(gl, gc, "the conditioned variable list is empty"));
    }
    if bound.is_nan() || bound < 1.0 || !bound.is_finite() {
        return Err(error_at(
            bl,
            bc,
            format!("bound {bound} must be a finite number of at least 1"),
        ));
    }
    let guard_schema = db
        .schema_of(&guard)
        .ok_or_else(|| Error::Invalid(format!("guard relation {guard} is not in the instance")))?;
    if !x.union(y).is_subset(guard_schema) {
        return Err(Error::Invalid(format!(
            "guard {guard} over {} does not contain {}",
            q.names_of(guard_schema).join(","),
            q.names_of(x.union(y)).join(",")
        )));
    }
    Ok(StatTerm {
        y,
        x,
        exponent: bound.ln() / log_base(n),
        guard,
        guard_schema,
        bound: Some(bound),
    })
}

/// One cardinality term (X|∅) per atom, with exponent log_N |R|
/// (0 for an empty relation). `classic` forces every exponent to 1.
pub fn default_stats(q: &ConjunctiveQuery, db: &Database, n: usize, classic: bool) -> Result<Statistics> {
    let mut terms = Vec::new();
    for atom in q.atoms() {
        if terms.iter().any(|t: &StatTerm| t.y == atom.schema) {
            continue;
        }
        let rel = db.get(atom.schema).ok_or_else(|| {
            Error::Invalid(format!("relation {} is missing from the instance", atom.name))
        })?;
        let (exponent, bound) = if classic {
            (1.0, None)
        } else if rel.is_empty() {
            (0.0, Some(0.0))
        } else {
            ((rel.len() as f64).ln() / log_base(n), Some(rel.len() as f64))
        };
        terms.push(StatTerm {
            y: atom.schema,
            x: VarSet::EMPTY,
            exponent,
            guard: atom.name.clone(),
            guard_schema: atom.schema,
            bound,
        });
    }
    Ok(Statistics { terms })
}

/// Cardinality-only statistics for a query without data: every atom capped
/// at exponent 1.
pub fn classic_stats(q: &ConjunctiveQuery) -> Statistics {
    let mut terms: Vec<StatTerm> = Vec::new();
    for atom in q.atoms() {
        if terms.iter().any(|t| t.y == atom.schema) {
            continue;
        }
        terms.push(StatTerm {
            y: atom.schema,
            x: VarSet::EMPTY,
            exponent: 1.0,
            guard: atom.name.clone(),
            guard_schema: atom.schema,
            bound: None,
        });
    }
    Statistics { terms }
}
