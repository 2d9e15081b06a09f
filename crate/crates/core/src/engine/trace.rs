use serde_json::{json, Value as Json};

use super::partition::light_part_count;
use crate::polymatroid::{log_n, number_or_inf, SetFunction, TOL};
use crate::query::ConjunctiveQuery;
use crate::relation::VarSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Root,
    Light(usize),
    Heavy,
}

/// One recursive call. Branching fields (`x`, `y`, `w`, `theta`, sizes) are
/// only meaningful when `branched()` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub edge: Edge,
    pub depth: usize,
    /// Truncation level of the calibrated g (∞ when g is a polymatroid).
    pub c: f64,
    pub x: VarSet,
    pub y: VarSet,
    pub w: VarSet,
    pub theta: Option<f64>,
    /// |{Z : g(Z) ≤ c}| for the calibrated g.
    pub i_size: usize,
    /// Size of the join that created this light child.
    pub join_out: usize,
    pub terminal_td: Option<usize>,
    pub r_y_size: usize,
    pub heavy_size: usize,
    pub light_size: usize,
    pub part_sizes: Vec<usize>,
    /// Potential of the input instance, for calls that initialize g.
    pub phi: Option<f64>,
    /// Tuples produced by this call's own join and calibration.
    pub work: usize,
    /// The call saw an empty relation and returned nothing.
    pub pruned: bool,
    /// The calibrated g, when the engine was asked to record it.
    pub g: Option<SetFunction>,
}

impl TraceNode {
    pub(crate) fn new(edge: Edge, depth: usize) -> Self {
        TraceNode {
            id: 0,
            parent: None,
            edge,
            depth,
            c: f64::INFINITY,
            x: VarSet::EMPTY,
            y: VarSet::EMPTY,
            w: VarSet::EMPTY,
            theta: None,
            i_size: 0,
            join_out: 0,
            terminal_td: None,
            r_y_size: 0,
            heavy_size: 0,
            light_size: 0,
            part_sizes: Vec::new(),
            phi: None,
            work: 0,
            pruned: false,
            g: None,
        }
    }

    pub fn branched(&self) -> bool {
        self.theta.is_some()
    }

    pub fn to_json(&self, q: &ConjunctiveQuery) -> Json {
        let (edge, light_index) = match self.edge {
            Edge::Root => ("root", None),
            Edge::Light(i) => ("light", Some(i)),
            Edge::Heavy => ("heavy", None),
        };
        let mut out = json!({
            "id": self.id,
            "parent": self.parent,
            "edge": edge,
            "light_index": light_index,
            "c": number_or_inf(self.c),
            "X": q.names_of(self.x),
            "Y": q.names_of(self.y),
            "W": q.names_of(self.w),
            "theta": self.theta,
            "I_size": self.i_size,
            "join_out": self.join_out,
            "terminal_td": self.terminal_td,
            "depth": self.depth,
            "r_y_size": self.r_y_size,
            "heavy_size": self.heavy_size,
            "light_size": self.light_size,
            "part_sizes": self.part_sizes,
            "phi": self.phi,
            "work": self.work,
            "pruned": self.pruned,
        });
        if let Some(g) = &self.g {
            out["g"] = g.to_json(q.var_names());
        }
        out
    }
}

/// The recursion tree of one evaluation, nodes in preorder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub nodes: Vec<TraceNode>,
    /// |D0|, the logarithm base.
    pub n: usize,
    pub epsilon: f64,
    pub num_vars: usize,
    /// ⌈N^ε⌉: light parts per branching node when θ is an integer, and a
    /// lower bound on them otherwise (see `light_part_count`).
    pub fanout: usize,
}

impl Trace {
    pub fn to_json(&self, q: &ConjunctiveQuery) -> Json {
        json!({
            "N": self.n,
            "epsilon": self.epsilon,
            "nodes": self.nodes.iter().map(|n| n.to_json(q)).collect::<Vec<_>>(),
        })
    }

    pub fn work(&self) -> usize {
        self.nodes.iter().map(|n| n.work).sum()
    }

    fn parent(&self, n: &TraceNode) -> Option<&TraceNode> {
        n.parent.map(|p| &self.nodes[p])
    }

    fn ancestors<'a>(&'a self, n: &'a TraceNode) -> impl Iterator<Item = &'a TraceNode> + 'a {
        std::iter::successors(self.parent(n), move |m| self.parent(m))
    }

    /// Longest run of consecutive light edges on any path.
    pub fn light_run_max(&self) -> usize {
        let mut run = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let (Edge::Light(_), Some(p)) = (n.edge, n.parent) {
                run[n.id] = run[p] + 1;
            }
        }
        run.into_iter().max().unwrap_or(0)
    }

    /// Most heavy edges on any root-to-leaf path.
    pub fn heavy_edges_max(&self) -> usize {
        let mut count = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                count[n.id] = count[p] + usize::from(n.edge == Edge::Heavy);
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    /// Every light join stays within ⌈N^c⌉ · ⌈θ⌉/θ of its parent (checked in
    /// log space).
    pub fn check_join_budget(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for n in &self.nodes {
            let Edge::Light(i) = n.edge else { continue };
            let p = self.parent(n).expect("light node has a parent");
            let theta = p.theta.expect("parent of a light node branched");
            let cap = (self.n as f64).powf(p.c).ceil() * theta.ceil() / theta;
            if log_n(n.join_out, self.n) > cap.ln() / (self.n as f64).ln() + 1e-9 {
                bad.push(format!(
                    "node {}: light join {i} produced {} tuples, above the budget {cap:.3} (c = {}, θ = {theta})",
                    n.id, n.join_out, p.c
                ));
            }
        }
        bad
    }

    /// Light runs are at most 2^|V| long, and along a light edge c never
    /// decreases while the level set I strictly grows.
    pub fn check_light_paths(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let limit = 1usize << self.num_vars;
        if self.light_run_max() > limit {
            bad.push(format!("a light run of {} edges exceeds 2^|V| = {limit}", self.light_run_max()));
        }
        for n in &self.nodes {
            if !matches!(n.edge, Edge::Light(_)) || n.pruned {
                continue;
            }
            let p = self.parent(n).unwrap();
            if n.c < p.c - TOL {
                bad.push(format!("node {}: c dropped from {} to {} along a light edge", n.id, p.c, n.c));
            }
            if n.i_size <= p.i_size {
                bad.push(format!(
                    "node {}: |I| did not grow along a light edge ({} -> {})",
                    n.id, p.i_size, n.i_size
                ));
            }
        }
        bad
    }

    /// Between consecutive calls that initialize g on a path, the potential
    /// drops by at least ε.
    pub fn check_potential(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for n in &self.nodes {
            let Some(phi) = n.phi else { continue };
            let Some(prev) = self.ancestors(n).find_map(|a| a.phi) else { continue };
            if prev - phi < self.epsilon - 1e-9 {
                bad.push(format!(
                    "node {}: potential went from {prev} to {phi}, a drop below ε = {}",
                    n.id, self.epsilon
                ));
            }
        }
        bad
    }

    /// c ≤ subw + 1e-6 at every branching node.
    pub fn check_c_le(&self, subw: f64) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.branched() && n.c > subw + 1e-6)
            .map(|n| format!("node {}: c = {} exceeds subw = {subw}", n.id, n.c))
            .collect()
    }

    /// The heavy part and the light parts partition R(Y), and every
    /// branching node has one light child per non-empty part plus the heavy one.
    pub fn check_partitions(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut children = vec![(0usize, 0usize); self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                match n.edge {
                    Edge::Light(_) => children[p].0 += 1,
                    _ => children[p].1 += 1,
                }
            }
        }
        for n in &self.nodes {
            if !n.branched() {
                if children[n.id] != (0, 0) {
                    bad.push(format!("node {}: a leaf has children", n.id));
                }
                continue;
            }
            let parts: usize = n.part_sizes.iter().sum();
            if n.heavy_size + n.light_size != n.r_y_size || parts != n.light_size {
                bad.push(format!(
                    "node {}: heavy {} + light {} (parts {}) does not partition |R(Y)| = {}",
                    n.id, n.heavy_size, n.light_size, parts, n.r_y_size
                ));
            }
            let k = light_part_count(n.theta.unwrap_or(1.0), (self.n as f64).powf(self.epsilon));
            let live = n.part_sizes.iter().filter(|&&s| s > 0).count();
            if n.part_sizes.len() != k || children[n.id] != (live, 1) {
                bad.push(format!(
                    "node {}: {} parts ({live} non-empty) and {:?} children, expected {k} parts, one light child per non-empty part, and 1 heavy",
                    n.id,
                    n.part_sizes.len(),
                    children[n.id],
                ));
            }
        }
        bad
    }

    /// All structural checks; `subw` enables the c ≤ subw check.
    pub fn check_all(&self, subw: Option<f64>) -> Vec<String> {
        let mut bad = self.check_join_budget();
        bad.extend(self.check_light_paths());
        bad.extend(self.check_potential());
        bad.extend(self.check_partitions());
        if let Some(s) = subw {
            bad.extend(self.check_c_le(s));
        }
        bad
    }
}
