//! The recursive evaluator: calibrate, stop on a covered decomposition,
//! otherwise split on the smallest submodularity violation.

mod partition;
mod trace;
mod yannakakis;

use rayon::prelude::*;

pub use partition::{chunk_size, equal_degree_partition, heavy_light_partition, light_part_count};
pub use trace::{Edge, Trace, TraceNode};
pub use yannakakis::yannakakis;

use crate::calibrate::calibrate;
use crate::decomposition::{covers, enumerate_free_connex_tds, TreeDecomposition, DEFAULT_MAX_VARS};
use crate::error::{Error, Result};
use crate::oracle::{brute_force, DEFAULT_BUDGET};
use crate::polymatroid::{init_g, log_n, truncate, SetFunction};
use crate::query::{ConjunctiveQuery, Statistics};
use crate::relation::{Database, Dictionary, Origin, Relation, Value, VarSet};

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub epsilon: f64,
    /// Largest |V| accepted.
    pub max_vars: usize,
    /// Recursion depth guard; `None` derives it from |V| and ε.
    pub depth_limit: Option<usize>,
    /// Run sibling light branches on the rayon pool.
    pub parallel: bool,
    /// Keep each node's calibrated g in the trace.
    pub record_g: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            epsilon: 0.5,
            max_vars: DEFAULT_MAX_VARS,
            depth_limit: None,
            parallel: true,
            record_g: false,
        }
    }
}

impl EngineConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        EngineConfig {
            epsilon,
            ..Self::default()
        }
    }
}

/// 2^|V| · (⌈φ_max/ε⌉ + 1) + 8 with φ_max = 2^|V| (|V| + 1): the longest
/// light run times the most heavy edges a path can take, plus slack.
pub fn default_depth_limit(num_vars: usize, epsilon: f64) -> usize {
    let subsets = 1usize << num_vars;
    let phi_max = (subsets * (num_vars + 1)) as f64;
    subsets * ((phi_max / epsilon).ceil() as usize + 1) + 8
}

/// Σ log_N |R| over stored relations plus |V| + 1 for every absent schema.
pub fn potential(db: &Database, n: usize, num_vars: usize) -> f64 {
    let present: f64 = db.relations().map(|r| log_n(r.len(), n)).sum();
    let absent = (1usize << num_vars) - db.relation_count();
    present + (absent * (num_vars + 1)) as f64
}

/// The answers of a query: a deduplicated, sorted set of tuples over the
/// free variables (columns in variable order, which is head order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerSet {
    rel: Relation,
}

impl AnswerSet {
    pub fn new(rel: Relation) -> Self {
        AnswerSet { rel }
    }

    pub fn relation(&self) -> &Relation {
        &self.rel
    }

    pub fn into_relation(self) -> Relation {
        self.rel
    }

    pub fn len(&self) -> usize {
        self.rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rel.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[Value]> + '_ {
        self.rel.iter()
    }

    /// TSV with the head variables as header; rows sorted as strings.
    pub fn to_tsv(&self, q: &ConjunctiveQuery, dict: &Dictionary) -> String {
        let mut rows: Vec<String> = self.rel.iter().map(|r| dict.render_tuple(r).join("\t")).collect();
        rows.sort();
        let mut out = q.names_of(q.free()).join("\t");
        out.push('\n');
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub answers: AnswerSet,
    pub trace: Trace,
    /// Tuples produced by light joins and calibration.
    pub work: usize,
    /// The input was degenerate (N ≤ 1 or an empty relation) and the
    /// nested-loop evaluator answered instead.
    pub brute_force: bool,
}

struct Ctx<'a> {
    q: &'a ConjunctiveQuery,
    stats: &'a Statistics,
    family: Vec<TreeDecomposition>,
    n: usize,
    n_eps: f64,
    depth_limit: usize,
    parallel: bool,
    record_g: bool,
}

/// A finished subtree: answer fragments and trace nodes with ids local to
/// the subtree (node 0 is its root).
struct Sub {
    answers: Vec<Relation>,
    nodes: Vec<TraceNode>,
}

impl Sub {
    fn leaf(node: TraceNode, answer: Option<Relation>) -> Self {
        Sub {
            answers: answer.into_iter().collect(),
            nodes: vec![node],
        }
    }
}

fn check_schema(q: &ConjunctiveQuery, db: &Database) -> Result<()> {
    for a in q.atoms() {
        if !db.contains_schema(a.schema) {
            return Err(Error::Schema(format!("no relation over the variables of atom {}", a.name)));
        }
    }
    for s in db.schemas() {
        if !s.is_subset(q.variables()) {
            return Err(Error::Schema(format!("relation over {s:?} uses variables outside the query")));
        }
    }
    Ok(())
}

/// Evaluates `q` on `db0`, which must satisfy `stats`.
pub fn evaluate(q: &ConjunctiveQuery, stats: &Statistics, db0: &Database, config: &EngineConfig) -> Result<Evaluation> {
    if !(config.epsilon > 0.0 && config.epsilon.is_finite()) {
        return Err(Error::Invalid(format!("epsilon must be positive, got {}", config.epsilon)));
    }
    let nv = q.num_vars();
    if nv > config.max_vars {
        return Err(Error::Limit(format!(
            "the query has {nv} variables; the limit is {}",
            config.max_vars
        )));
    }
    check_schema(q, db0)?;
    let n = db0.size();
    let n_eps = (n as f64).powf(config.epsilon);
    let fanout = n_eps.ceil() as usize;
    let mut trace = Trace {
        nodes: Vec::new(),
        n,
        epsilon: config.epsilon,
        num_vars: nv,
        fanout,
    };

    if n <= 1 || db0.has_empty_relation() {
        let answers = brute_force(q, db0, DEFAULT_BUDGET)?;
        let mut root = TraceNode::new(Edge::Root, 0);
        root.pruned = db0.has_empty_relation();
        trace.nodes.push(root);
        return Ok(Evaluation {
            answers: AnswerSet::new(answers),
            trace,
            work: 0,
            brute_force: true,
        });
    }

    let ctx = Ctx {
        q,
        stats,
        family: enumerate_free_connex_tds(q, config.max_vars)?,
        n,
        n_eps,
        depth_limit: config.depth_limit.unwrap_or_else(|| default_depth_limit(nv, config.epsilon)),
        parallel: config.parallel,
        record_g: config.record_g,
    };
    let sub = run(&ctx, db0.clone(), None, Edge::Root, 0, 0)?;
    trace.nodes = sub.nodes;
    let answers = Relation::union_all(q.free(), &sub.answers)?;
    let work = trace.work();
    Ok(Evaluation {
        answers: AnswerSet::new(answers),
        trace,
        work,
        brute_force: false,
    })
}

fn run(ctx: &Ctx, db: Database, g: Option<SetFunction>, edge: Edge, depth: usize, join_out: usize) -> Result<Sub> {
    if depth > ctx.depth_limit {
        return Err(Error::Invariant(format!(
            "recursion depth {depth} exceeds the guard {}; the light-path or heavy-edge bound failed",
            ctx.depth_limit
        )));
    }
    let nv = ctx.q.num_vars();
    let mut node = TraceNode::new(edge, depth);
    node.join_out = join_out;
    node.work = join_out;
    if db.has_empty_relation() {
        node.pruned = true;
        return Ok(Sub::leaf(node, None));
    }
    let g = match g {
        Some(g) => g,
        None => {
            node.phi = Some(potential(&db, ctx.n, nv));
            init_g(&db, nv, ctx.n)
        }
    };
    let cal = calibrate(ctx.stats, &db, &g)?;
    node.work += cal.work;
    let (db, g) = (cal.db, cal.g);
    if db.has_empty_relation() {
        node.pruned = true;
        return Ok(Sub::leaf(node, None));
    }
    let t = truncate(&g)?;
    node.c = t.c;
    if ctx.record_g {
        node.g = Some(g.clone());
    }
    node.i_size = t.i.len();

    if let Some(k) = ctx.family.iter().position(|td| covers(|s| db.contains_schema(s), td)) {
        node.terminal_td = Some(k);
        let out = yannakakis(&ctx.family[k], &db, ctx.q.free())?;
        return Ok(Sub::leaf(node, Some(out)));
    }

    let (x, y) = t.witness.ok_or_else(|| {
        Error::Invariant("no decomposition is covered, yet g has no submodularity violation".into())
    })?;
    let w = x.intersection(y);
    let theta = (ctx.n as f64).powf(g.get(y) - g.get(w));
    let missing = |s: VarSet| Error::Invariant(format!("witness side {s:?} has finite g but no relation"));
    let rx = db.get(x).ok_or_else(|| missing(x))?.clone();
    let ry = db.get(y).ok_or_else(|| missing(y))?;
    let (heavy, light) = heavy_light_partition(ry, w, theta * ctx.n_eps)?;
    let parts = equal_degree_partition(&light, w, theta, light_part_count(theta, ctx.n_eps))?;
    node.x = x;
    node.y = y;
    node.w = w;
    node.theta = Some(theta);
    node.r_y_size = ry.len();
    node.heavy_size = heavy.len();
    node.light_size = light.len();
    node.part_sizes = parts.iter().map(Relation::len).collect();

    let g_light = g.with(x.union(y), t.c);
    // An empty part would give the child an empty join and return ∅ at once;
    // such calls are skipped and leave no trace node (its size is still in
    // part_sizes).
    let light_child = |(i, part): (usize, &Relation)| {
        let joined = rx.join(part);
        let size = joined.len();
        let child_db = db.augmented(joined, Origin::Derived);
        run(ctx, child_db, Some(g_light.clone()), Edge::Light(i), depth + 1, size)
    };
    let nonempty = |&(_, part): &(usize, &Relation)| !part.is_empty();
    let mut children: Vec<Sub> = if ctx.parallel {
        parts.par_iter().enumerate().filter(nonempty).map(light_child).collect::<Result<_>>()?
    } else {
        parts.iter().enumerate().filter(nonempty).map(light_child).collect::<Result<_>>()?
    };
    let heavy_db = db.augmented(heavy.project(w)?, Origin::Derived);
    drop(db);
    children.push(run(ctx, heavy_db, None, Edge::Heavy, depth + 1, 0)?);

    // Preorder renumbering: this node first, then each child subtree.
    let mut nodes = vec![node];
    let mut answers = Vec::new();
    for child in children {
        let offset = nodes.len();
        for mut m in child.nodes {
            m.id += offset;
            m.parent = Some(m.parent.map_or(0, |p| p + offset));
            nodes.push(m);
        }
        answers.extend(child.answers);
    }
    Ok(Sub { answers, nodes })
}

/// Yannakakis through decomposition `td_index` of the canonical family,
/// each bag materialized by joining the atoms (projected onto the bag) that
/// meet it. Returns the answers and the number of tuples materialized.
pub fn baseline_yannakakis(q: &ConjunctiveQuery, db0: &Database, td_index: usize, max_vars: usize) -> Result<(Relation, usize)> {
    check_schema(q, db0)?;
    let family = enumerate_free_connex_tds(q, max_vars)?;
    let td = family.get(td_index).ok_or_else(|| {
        Error::Invalid(format!("decomposition {td_index} does not exist ({} available)", family.len()))
    })?;
    let mut work = 0usize;
    let mut bags = Vec::with_capacity(td.bags.len());
    for &b in &td.bags {
        let mut pieces: Vec<Relation> = Vec::new();
        for a in q.atoms() {
            let r = db0.get(a.schema).expect("schema checked");
            if a.schema.is_subset(b) {
                pieces.push(r.clone());
            } else if !a.schema.intersection(b).is_empty() {
                pieces.push(r.project(a.schema.intersection(b))?);
            }
        }
        // Whole atoms first, then the narrower projections.
        pieces.sort_by_key(|r| std::cmp::Reverse(r.arity()));
        let mut acc = Relation::unit();
        for p in &pieces {
            acc = acc.join(p);
            work += acc.len();
        }
        bags.push(acc);
    }
    let out = yannakakis::reduce_and_join(td, bags, q.free())?;
    Ok((out, work))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_square, random_instance_for};
    use crate::query::{catalog, default_stats};

    fn setup(text: &str, m: usize) -> (ConjunctiveQuery, Database, Statistics) {
        let q = ConjunctiveQuery::parse(text).unwrap();
        let db = gen_square(m).unwrap().bind(&q).unwrap();
        let stats = default_stats(&q, &db, db.size(), false).unwrap();
        (q, db, stats)
    }

    #[test]
    fn potential_formula() {
        let db = Database::new();
        assert_eq!(potential(&db, 16, 4), 80.0);
        let mut one = Database::new();
        let r = Relation::new(VarSet::from_bits(1), (0..16).map(|v| vec![Value(v)])).unwrap();
        one.augment(r, Origin::Derived);
        assert!((potential(&one, 16, 4) - 76.0).abs() < 1e-12);
        one.augment(Relation::unit(), Origin::Derived);
        assert!((potential(&one, 16, 4) - 71.0).abs() < 1e-12);
    }

    #[test]
    fn four_cycle_on_square_matches_oracle() {
        let (q, db, stats) = setup(catalog::FOUR_CYCLE, 6);
        let ev = evaluate(&q, &stats, &db, &EngineConfig::default()).unwrap();
        assert_eq!(ev.trace.n, 20);
        assert_eq!(ev.answers.relation(), &brute_force(&q, &db, DEFAULT_BUDGET).unwrap());
        let root = &ev.trace.nodes[0];
        assert_eq!(root.edge, Edge::Root);
        // Every relation has 5 tuples and N = 20: the smallest violation is
        // g(XYZ) = ∞ > g(XY) + g(YZ) - g(Y) with all three equal to log_20 5.
        assert!((root.c - log_n(5, 20)).abs() < 1e-9);
        assert_eq!((root.x, root.y), (q.varset(&["X", "Y"]).unwrap(), q.varset(&["Y", "Z"]).unwrap()));
        assert!(ev.trace.check_all(None).is_empty(), "{:?}", ev.trace.check_all(None));
    }

    #[test]
    fn square_root_isolates_the_heavy_value() {
        let (q, db, stats) = setup(catalog::FOUR_CYCLE_BOOLEAN, 64);
        let ev = evaluate(&q, &stats, &db, &EngineConfig::default()).unwrap();
        let root = &ev.trace.nodes[0];
        // Y = 1 has degree 32 in S(Y,Z), above θ·N^ε = √252; every other Y
        // value has degree 1.
        assert_eq!(root.heavy_size, 32);
        assert_eq!(root.light_size, 31);
        let heavy = ev.trace.nodes.iter().find(|n| n.parent == Some(0) && n.edge == Edge::Heavy).unwrap();
        assert!(heavy.phi.unwrap() < root.phi.unwrap() - 0.5);
        assert_eq!(ev.answers.relation(), &Relation::unit());
        assert!(ev.trace.check_all(None).is_empty());
    }

    #[test]
    fn boolean_four_cycle_is_true() {
        let (q, db, stats) = setup(catalog::FOUR_CYCLE_BOOLEAN, 6);
        let ev = evaluate(&q, &stats, &db, &EngineConfig::default()).unwrap();
        assert_eq!(ev.answers.relation(), &Relation::unit());
    }

    #[test]
    fn empty_base_relation_short_circuits() {
        let q = ConjunctiveQuery::parse(catalog::TWO_PATH_FULL).unwrap();
        let mut inst = crate::query::RawInstance::new();
        inst.push_table("R", &["X", "Y"], vec![vec!["1".to_string(), "2".to_string()]]);
        inst.push_table("S", &["Y", "Z"], Vec::<Vec<String>>::new());
        let db = inst.bind(&q).unwrap();
        let ev = evaluate(&q, &Statistics::default(), &db, &EngineConfig::default()).unwrap();
        assert!(ev.answers.is_empty());
        assert!(ev.brute_force);
        assert_eq!(ev.trace.nodes.len(), 1);
    }

    #[test]
    fn deterministic_with_and_without_threads() {
        let q = ConjunctiveQuery::parse(catalog::TRIANGLE).unwrap();
        let db = random_instance_for(&q, 3, 20..=40, 8).unwrap().bind(&q).unwrap();
        let stats = default_stats(&q, &db, db.size(), false).unwrap();
        let par = evaluate(&q, &stats, &db, &EngineConfig::with_epsilon(0.3)).unwrap();
        let seq = evaluate(
            &q,
            &stats,
            &db,
            &EngineConfig {
                parallel: false,
                ..EngineConfig::with_epsilon(0.3)
            },
        )
        .unwrap();
        assert_eq!(par.answers, seq.answers);
        assert_eq!(par.trace, seq.trace);
        assert_eq!(par.answers.relation(), &brute_force(&q, &db, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn baseline_agrees_and_pays_quadratic_bags() {
        let (q, db, _) = setup(catalog::FOUR_CYCLE_BOOLEAN, 20);
        let (out, work) = baseline_yannakakis(&q, &db, 0, DEFAULT_MAX_VARS).unwrap();
        assert_eq!(out, Relation::unit());
        assert!(work >= 100);
    }

    #[test]
    fn rejects_bad_config() {
        let (q, db, stats) = setup(catalog::FOUR_CYCLE, 4);
        assert!(evaluate(&q, &stats, &db, &EngineConfig::with_epsilon(0.0)).is_err());
        let tight = EngineConfig {
            max_vars: 3,
            ..EngineConfig::default()
        };
        assert!(matches!(evaluate(&q, &stats, &db, &tight), Err(Error::Limit(_))));
    }
}
