//! Python bindings: evaluate queries, compute widths, generate instances.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use jaguar_core::decomposition::{enumerate_free_connex_tds, family_json, DEFAULT_MAX_VARS, DEFAULT_SELECTOR_LIMIT};
use jaguar_core::engine::{evaluate as run_engine, AnswerSet, EngineConfig};
use jaguar_core::oracle::{brute_force, gen_random as random_instance, gen_square as square_instance, parse_random_spec, DEFAULT_BUDGET};
use jaguar_core::query::{classic_stats, default_stats, load_instance, parse_stats, RawInstance};
use jaguar_core::width::subw;
use jaguar_core::{ConjunctiveQuery, Error};

fn py_err(e: Error) -> PyErr {
    if e.is_internal() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

type Tables = BTreeMap<String, (Vec<String>, Vec<Vec<String>>)>;

/// An instance from a directory of TSV files or from in-memory tables
/// `{name: (header, rows)}`.
fn instance(data: Option<&str>, tables: Option<Tables>) -> PyResult<RawInstance> {
    match (data, tables) {
        (Some(dir), None) => load_instance(dir).map_err(py_err),
        (None, Some(tables)) => {
            let mut raw = RawInstance::new();
            for (name, (header, rows)) in tables {
                if let Some(bad) = rows.iter().find(|r| r.len() != header.len()) {
                    return Err(PyValueError::new_err(format!(
                        "table {name}: row {bad:?} does not match header {header:?}"
                    )));
                }
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                raw.push_table(&name, &header, rows);
            }
            Ok(raw)
        }
        _ => Err(PyValueError::new_err("pass exactly one of `data` and `tables`")),
    }
}

/// Answers of one evaluation.
#[pyclass(frozen, module = "jaguar")]
struct Evaluation {
    #[pyo3(get)]
    columns: Vec<String>,
    #[pyo3(get)]
    rows: Vec<Vec<String>>,
    /// Tuples produced by light joins and calibration.
    #[pyo3(get)]
    work: usize,
    #[pyo3(get)]
    trace_json: String,
    #[pyo3(get)]
    tsv: String,
}

#[pymethods]
impl Evaluation {
    fn __len__(&self) -> usize {
        self.rows.len()
    }

    fn __repr__(&self) -> String {
        format!("Evaluation(columns={:?}, rows={}, work={})", self.columns, self.rows.len(), self.work)
    }
}

fn answers(q: &ConjunctiveQuery, raw: &RawInstance, set: &AnswerSet) -> (Vec<String>, Vec<Vec<String>>, String) {
    let tsv = set.to_tsv(q, &raw.dict);
    let mut rows: Vec<Vec<String>> = set
        .iter()
        .map(|r| raw.dict.render_tuple(r).into_iter().map(String::from).collect())
        .collect();
    rows.sort();
    (q.names_of(q.free()), rows, tsv)
}

/// Evaluates `query` (Datalog-style text) on an instance.
#[pyfunction]
#[pyo3(signature = (query, data=None, tables=None, epsilon=0.5, stats=None, classic=false))]
fn evaluate(
    py: Python<'_>,
    query: &str,
    data: Option<&str>,
    tables: Option<Tables>,
    epsilon: f64,
    stats: Option<&str>,
    classic: bool,
) -> PyResult<Evaluation> {
    let q = ConjunctiveQuery::parse(query).map_err(py_err)?;
    let raw = instance(data, tables)?;
    py.detach(|| {
        let db = raw.bind(&q)?;
        let n = db.size();
        let st = match stats {
            Some(text) => parse_stats(text, &q, &db, Some(&raw.dict), n)?,
            None => default_stats(&q, &db, n, classic)?,
        };
        let ev = run_engine(&q, &st, &db, &EngineConfig::with_epsilon(epsilon))?;
        let (columns, rows, tsv) = answers(&q, &raw, &ev.answers);
        Ok(Evaluation {
            columns,
            rows,
            work: ev.work,
            trace_json: ev.trace.to_json(&q).to_string(),
            tsv,
        })
    })
    .map_err(py_err)
}

/// Reference answers from the nested-loop evaluator.
#[pyfunction]
#[pyo3(signature = (query, data=None, tables=None))]
fn oracle(query: &str, data: Option<&str>, tables: Option<Tables>) -> PyResult<Evaluation> {
    let q = ConjunctiveQuery::parse(query).map_err(py_err)?;
    let raw = instance(data, tables)?;
    let db = raw.bind(&q).map_err(py_err)?;
    let set = AnswerSet::new(brute_force(&q, &db, DEFAULT_BUDGET).map_err(py_err)?);
    let (columns, rows, tsv) = answers(&q, &raw, &set);
    Ok(Evaluation {
        columns,
        rows,
        work: 0,
        trace_json: "null".into(),
        tsv,
    })
}

/// Submodular width as a JSON document. Without data or with `classic`,
/// every atom is bounded by N.
#[pyfunction]
#[pyo3(signature = (query, data=None, stats=None, classic=false, selector_limit=DEFAULT_SELECTOR_LIMIT))]
fn width(query: &str, data: Option<&str>, stats: Option<&str>, classic: bool, selector_limit: usize) -> PyResult<String> {
    let q = ConjunctiveQuery::parse(query).map_err(py_err)?;
    let st = match data {
        Some(dir) if !classic => {
            let raw = load_instance(dir).map_err(py_err)?;
            let db = raw.bind(&q).map_err(py_err)?;
            match stats {
                Some(text) => parse_stats(text, &q, &db, Some(&raw.dict), db.size()),
                None => default_stats(&q, &db, db.size(), false),
            }
            .map_err(py_err)?
        }
        _ => classic_stats(&q),
    };
    let w = subw(&q, &st, DEFAULT_MAX_VARS, selector_limit).map_err(py_err)?;
    Ok(w.to_json(&q).to_string())
}

/// The canonical free-connex decomposition family as JSON.
#[pyfunction]
fn decompositions(query: &str) -> PyResult<String> {
    let q = ConjunctiveQuery::parse(query).map_err(py_err)?;
    let family = enumerate_free_connex_tds(&q, DEFAULT_MAX_VARS).map_err(py_err)?;
    Ok(family_json(&q, &family).to_string())
}

/// Writes the skewed four-cycle instance with parameter `m` to `out`.
#[pyfunction]
fn gen_square(m: usize, out: &str) -> PyResult<()> {
    square_instance(m).and_then(|raw| raw.write(out)).map_err(py_err)
}

/// Writes a seeded random instance described by `spec` (text) to `out`.
#[pyfunction]
fn gen_random(seed: u64, spec: &str, out: &str) -> PyResult<()> {
    parse_random_spec(spec)
        .and_then(|s| random_instance(seed, &s))
        .and_then(|raw| raw.write(out))
        .map_err(py_err)
}

#[pymodule]
fn jaguar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Evaluation>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(width, m)?)?;
    m.add_function(wrap_pyfunction!(decompositions, m)?)?;
    m.add_function(wrap_pyfunction!(gen_square, m)?)?;
    m.add_function(wrap_pyfunction!(gen_random, m)?)?;
    Ok(())
}
