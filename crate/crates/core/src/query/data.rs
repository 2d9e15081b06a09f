use std::fs;
use std::io::Write;
use std::path::Path;

use super::ConjunctiveQuery;
use crate::error::{Error, Result};
use crate::relation::{Database, Dictionary, Origin, Relation, Value};

/// A named table as read from disk: header names and interned rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Tables plus the dictionary their values were interned into. Binding
/// against a query turns them into a [`Database`].
#[derive(Clone, Debug, Default)]
pub struct RawInstance {
    pub tables: Vec<Table>,
    pub dict: Dictionary,
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_table(name: &str, text: &str, dict: &mut Dictionary, path: &Path) -> Result<Table> {
    let bad = |line: usize, msg: String| Error::Invalid(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').split('\t').map(|s| s.trim().to_string()).collect(),
        None => return Err(bad(1, "missing header".into())),
    };
    for (i, h) in header.iter().enumerate() {
        if !is_ident(h) {
            return Err(bad(1, format!("malformed header: '{h}' is not a variable name")));
        }
        if header[..i].contains(h) {
            return Err(bad(1, format!("malformed header: {h} appears twice")));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(bad(
                i + 1,
                format!("ragged row: {} fields, header has {}", fields.len(), header.len()),
            ));
        }
        rows.push(fields.iter().map(|f| dict.intern(f)).collect());
    }
    Ok(Table {
        name: name.to_string(),
        header,
        rows,
    })
}

/// Reads every `<Name>.tsv` in `dir` (in name order).
pub fn load_instance(dir: impl AsRef<Path>) -> Result<RawInstance> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "tsv") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut inst = RawInstance::default();
    for p in paths {
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let t = parse_table(&name, &text, &mut inst.dict, &p)?;
        inst.tables.push(t);
    }
    Ok(inst)
}

/// Writes one table as TSV.
pub fn write_table(path: impl AsRef<Path>, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join("\t"));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

impl RawInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Adds a table from string rows.
    pub fn push_table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
        let rows = rows
            .into_iter()
            .map(|r| r.iter().map(|v| self.dict.intern(v)).collect())
            .collect();
        self.tables.push(Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        });
    }

    /// Writes every table as `<Name>.tsv` under `dir` (created if needed).
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in &self.tables {
            let mut rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| self.dict.render_tuple(r).into_iter().map(str::to_string).collect())
                .collect();
            rows.sort();
            rows.dedup();
            write_table(dir.join(format!("{}.tsv", t.name)), &t.header, &rows)?;
        }
        Ok(())
    }

    /// Builds the instance for `q`: one relation per atom, columns matched to
    /// variables by header name. A relation used by several atoms with
    /// different variables (a self-join) is matched by position instead.
    /// Tables no atom refers to are ignored; tables landing on the same
    /// schema are intersected.
    pub fn bind(&self, q: &ConjunctiveQuery) -> Result<Database> {
        let mut db = Database::new();
        for atom in q.atoms() {
            let t = self.table(&atom.name).ok_or_else(|| {
                Error::Invalid(format!("relation {} is not in the data directory", atom.name))
            })?;
            let atom_names: Vec<&str> = atom.vars.iter().map(|&v| q.var_name(v)).collect();
            let self_join = q.atoms().iter().filter(|a| a.name == atom.name).count() > 1;
            // Query variable for each header column.
            let cols: Vec<usize> = if t.header.len() == atom_names.len()
                && t.header.iter().all(|h| atom_names.contains(&h.as_str()))
            {
                t.header.iter().map(|h| q.var_index(h).unwrap()).collect()
            } else if self_join && t.header.len() == atom.vars.len() {
                atom.vars.clone()
            } else {
                let unknown: Vec<&String> =
                    t.header.iter().filter(|h| !atom_names.contains(&h.as_str())).collect();
                return Err(Error::Invalid(if unknown.is_empty() {
                    format!(
                        "relation {} has columns {} but the query uses {}({})",
                        atom.name,
                        t.header.join(","),
                        atom.name,
                        atom_names.join(",")
                    )
                } else {
                    format!(
                        "relation {} has unknown variable(s) {} for atom {}({})",
                        atom.name,
                        unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
                        atom.name,
                        atom_names.join(",")
                    )
                }));
            };
            let schema = atom.schema;
            // Column of the file feeding each schema position.
            let order: Vec<usize> = schema
                .iter()
                .map(|v| cols.iter().position(|&c| c == v).unwrap())
                .collect();
            let rel = Relation::new(
                schema,
                t.rows.iter().map(|r| order.iter().map(|&i| r[i]).collect()),
            )?;
            db.augment(rel, Origin::Base(vec![atom.name.clone()]));
        }
        Ok(db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::catalog;
    use crate::relation::VarSet;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn loads_four_cycle_directory() {
        let tmp = tempfile::tempdir().unwrap();
        for (n, h) in [("R", "X\tY"), ("S", "Y\tZ"), ("T", "Z\tW"), ("U", "W\tX")] {
            write(tmp.path(), &format!("{n}.tsv"), &format!("{h}\n1\t1\n2\t1\n1\t2\n1\t2\n"));
        }
        let inst = load_instance(tmp.path()).unwrap();
        let q = ConjunctiveQuery::parse(catalog::FOUR_CYCLE).unwrap();
        let db = inst.bind(&q).unwrap();
        assert_eq!(db.size(), 12);
        assert_eq!(db.relation_count(), 4);
    }

    #[test]
    fn header_only_file_is_empty_relation() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "R.tsv", "X\tY\n");
        let q = ConjunctiveQuery::parse("Q() :- R(X,Y).").unwrap();
        let db = load_instance(tmp.path()).unwrap().bind(&q).unwrap();
        assert!(db.get(VarSet::full(2)).unwrap().is_empty());
    }

    #[test]
    fn same_schema_files_are_intersected() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "R.tsv", "X\tY\n1\t1\n2\t1\n");
        write(tmp.path(), "S.tsv", "Y\tX\n1\t1\n3\t3\n");
        let q = ConjunctiveQuery::parse("Q(X,Y) :- R(X,Y), S(X,Y).").unwrap();
        let inst = load_instance(tmp.path()).unwrap();
        let db = inst.bind(&q).unwrap();
        assert_eq!(db.relation_count(), 1);
        let r = db.get(VarSet::full(2)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(inst.dict.render_tuple(r.row(0)), vec!["1", "1"]);
    }

    #[test]
    fn reports_malformed_files() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "R.tsv", "X\tX\n");
        assert!(load_instance(tmp.path()).is_err());
        write(tmp.path(), "R.tsv", "X\tY\n1\n");
        assert!(load_instance(tmp.path()).is_err());
        write(tmp.path(), "R.tsv", "X\tY\n1\t2\n");
        let q = ConjunctiveQuery::parse("Q(A) :- R(A,B).").unwrap();
        let err = load_instance(tmp.path()).unwrap().bind(&q).unwrap_err();
        assert!(err.to_string().contains("unknown variable"));
        let q = ConjunctiveQuery::parse("Q() :- Missing(X,Y).").unwrap();
        let err = load_instance(tmp.path()).unwrap().bind(&q).unwrap_err();
        assert!(err.to_string().contains("Missing"));
    }

    #[test]
    fn self_join_binds_positionally() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "E.tsv", "A\tB\n1\t2\n2\t3\n");
        let q = ConjunctiveQuery::parse("Q(X,Z) :- E(X,Y), E(Y,Z).").unwrap();
        let db = load_instance(tmp.path()).unwrap().bind(&q).unwrap();
        assert_eq!(db.relation_count(), 2);
        assert_eq!(db.size(), 4);
    }
}
