//! Free-connex tree decompositions from vertex elimination orderings.

use std::collections::{HashSet, VecDeque};

use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::query::ConjunctiveQuery;
use crate::relation::VarSet;

/// Default cap on the number of query variables.
pub const DEFAULT_MAX_VARS: usize = 12;

/// Default cap on the number of bag selectors.
pub const DEFAULT_SELECTOR_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    /// Bags in ascending encoding order.
    pub bags: Vec<VarSet>,
    /// Tree edges (i < j), sorted.
    pub edges: Vec<(usize, usize)>,
    /// Bags witnessing free-connexity (empty when F = ∅).
    pub free_core: Vec<usize>,
}

impl TreeDecomposition {
    fn canonical(bags: Vec<VarSet>, edges: Vec<(usize, usize)>, core: Vec<usize>) -> Self {
        let mut idx: Vec<usize> = (0..bags.len()).collect();
        idx.sort_by_key(|&i| bags[i].bits());
        let mut pos = vec![0; bags.len()];
        for (new, &old) in idx.iter().enumerate() {
            pos[old] = new;
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (pos[a], pos[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort();
        let mut free_core: Vec<usize> = core.into_iter().map(|i| pos[i]).collect();
        free_core.sort();
        TreeDecomposition {
            bags: idx.iter().map(|&i| bags[i]).collect(),
            edges,
            free_core,
        }
    }

    /// Bag encodings, the deduplication and ordering key.
    pub fn key(&self) -> Vec<u32> {
        self.bags.iter().map(|b| b.bits()).collect()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn to_json(&self, q: &ConjunctiveQuery) -> Json {
        json!({
            "bags": self.bags.iter().map(|&b| q.names_of(b)).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>(),
            "free_core": self.free_core,
        })
    }

    /// Human-readable bag list such as `{XYZ, XZW}`.
    pub fn label(&self, q: &ConjunctiveQuery) -> String {
        let parts: Vec<String> = self.bags.iter().map(|&b| q.label(b)).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// `{"tds": [...]}` for a whole family.
pub fn family_json(q: &ConjunctiveQuery, family: &[TreeDecomposition]) -> Json {
    json!({ "tds": family.iter().map(|t| t.to_json(q)).collect::<Vec<_>>() })
}

/// Primal-graph neighbourhoods.
fn adjacency(q: &ConjunctiveQuery) -> Vec<VarSet> {
    let mut adj = vec![VarSet::EMPTY; q.num_vars()];
    for a in q.atoms() {
        for v in a.schema.iter() {
            adj[v] = adj[v].union(a.schema.difference(VarSet::singleton(v)));
        }
    }
    adj
}

/// Vertices outside `eliminated ∪ {v}` reachable from v through eliminated
/// vertices only: v's neighbours in the fill-in graph at this point.
fn later_neighbours(adj: &[VarSet], eliminated: VarSet, v: usize) -> VarSet {
    let mut seen = VarSet::singleton(v);
    let mut out = VarSet::EMPTY;
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        for w in adj[u].difference(seen).iter() {
            seen = seen.union(VarSet::singleton(w));
            if eliminated.contains(w) {
                queue.push_back(w);
            } else {
                out = out.union(VarSet::singleton(w));
            }
        }
    }
    out
}

/// Decomposition induced by one elimination order.
fn from_order(q: &ConjunctiveQuery, adj: &[VarSet], order: &[usize], restricted: bool) -> TreeDecomposition {
    let free = q.free();
    let nv = q.num_vars();
    let mut pos = vec![0; nv];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut bags = vec![VarSet::EMPTY; nv];
    let mut parent: Vec<Option<usize>> = vec![None; nv];
    let mut eliminated = VarSet::EMPTY;
    for &v in order {
        let later = later_neighbours(adj, eliminated, v);
        bags[v] = later.union(VarSet::singleton(v));
        parent[v] = later.iter().min_by_key(|&u| pos[u]);
        eliminated = eliminated.union(VarSet::singleton(v));
    }
    let mut edges: Vec<(usize, usize)> = (0..nv)
        .filter_map(|v| parent[v].map(|p| (v, p)))
        .collect();
    let mut roots: Vec<usize> = (0..nv).filter(|&v| parent[v].is_none()).collect();
    roots.sort_by_key(|&r| (!free.contains(r), pos[r]));
    for w in roots.windows(2) {
        edges.push((w[0], w[1]));
    }

    // Contract bags contained in a neighbour; a free bag stays out of
    // non-free bags so the free core survives.
    let is_free_bag = |b: VarSet| b.is_subset(free);
    let mut alive = vec![true; nv];
    loop {
        let mut merged = false;
        for k in 0..edges.len() {
            let (a, b) = edges[k];
            let (small, big) = if bags[a].is_subset(bags[b]) {
                (a, b)
            } else if bags[b].is_subset(bags[a]) {
                (b, a)
            } else {
                continue;
            };
            if restricted && is_free_bag(bags[small]) && !is_free_bag(bags[big]) {
                continue;
            }
            edges.remove(k);
            for e in edges.iter_mut() {
                if e.0 == small {
                    e.0 = big;
                }
                if e.1 == small {
                    e.1 = big;
                }
            }
            alive[small] = false;
            merged = true;
            break;
        }
        if !merged {
            break;
        }
    }
    let keep: Vec<usize> = (0..nv).filter(|&v| alive[v]).collect();
    let mut index = vec![usize::MAX; nv];
    for (i, &v) in keep.iter().enumerate() {
        index[v] = i;
    }
    let new_bags: Vec<VarSet> = keep.iter().map(|&v| bags[v]).collect();
    let new_edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (index[a], index[b])).collect();
    let core: Vec<usize> = if free.is_empty() {
        Vec::new()
    } else {
        (0..new_bags.len()).filter(|&i| is_free_bag(new_bags[i])).collect()
    };
    TreeDecomposition::canonical(new_bags, new_edges, core)
}

fn fallback(q: &ConjunctiveQuery) -> TreeDecomposition {
    let (v, f) = (q.variables(), q.free());
    if f.is_empty() {
        TreeDecomposition::canonical(vec![v], vec![], vec![])
    } else if f == v {
        TreeDecomposition::canonical(vec![v], vec![], vec![0])
    } else {
        TreeDecomposition::canonical(vec![f, v], vec![(0, 1)], vec![0])
    }
}

/// The canonical family: one decomposition per distinct bag set reachable by
/// an elimination ordering (non-free variables first when ∅ ⊂ F ⊂ V), plus
/// the fallback {F, V} (or {V}). Sorted by bag encodings.
pub fn enumerate_free_connex_tds(q: &ConjunctiveQuery, max_vars: usize) -> Result<Vec<TreeDecomposition>> {
    let nv = q.num_vars();
    if nv > max_vars {
        return Err(Error::Limit(format!(
            "query has {nv} variables; the limit is {max_vars}"
        )));
    }
    let free = q.free();
    let restricted = !free.is_empty() && free != q.variables();
    let adj = adjacency(q);

    let mut seen_states: HashSet<(u32, Vec<u32>)> = HashSet::new();
    let mut found: Vec<TreeDecomposition> = Vec::new();
    let mut keys: HashSet<Vec<u32>> = HashSet::new();
    let mut order = Vec::with_capacity(nv);
    let mut bags_so_far: Vec<u32> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        q: &ConjunctiveQuery,
        adj: &[VarSet],
        restricted: bool,
        eliminated: VarSet,
        order: &mut Vec<usize>,
        bags_so_far: &mut Vec<u32>,
        seen_states: &mut HashSet<(u32, Vec<u32>)>,
        found: &mut Vec<TreeDecomposition>,
        keys: &mut HashSet<Vec<u32>>,
    ) {
        let all = q.variables();
        if eliminated == all {
            let td = from_order(q, adj, order, restricted);
            if keys.insert(td.key()) {
                found.push(td);
            }
            return;
        }
        let mut sorted = bags_so_far.clone();
        sorted.sort();
        if !seen_states.insert((eliminated.bits(), sorted)) {
            return;
        }
        let remaining = all.difference(eliminated);
        let bound = remaining.difference(q.free());
        let candidates = if restricted && !bound.is_empty() { bound } else { remaining };
        for v in candidates.iter() {
            let bag = later_neighbours(adj, eliminated, v).union(VarSet::singleton(v));
            order.push(v);
            bags_so_far.push(bag.bits());
            dfs(
                q,
                adj,
                restricted,
                eliminated.union(VarSet::singleton(v)),
                order,
                bags_so_far,
                seen_states,
                found,
                keys,
            );
            bags_so_far.pop();
            order.pop();
        }
    }

    dfs(
        q,
        &adj,
        restricted,
        VarSet::EMPTY,
        &mut order,
        &mut bags_so_far,
        &mut seen_states,
        &mut found,
        &mut keys,
    );
    found.retain(|td| validate(q, td).is_ok());
    let fb = fallback(q);
    if keys.insert(fb.key()) {
        found.push(fb);
    }
    found.sort_by_key(|td| td.key());
    Ok(found)
}

/// Independent structural check: distinct bags, tree shape, atom coverage,
/// running intersection and (for ∅ ⊂ F ⊂ V) the free-core witness.
pub fn validate(q: &ConjunctiveQuery, td: &TreeDecomposition) -> std::result::Result<(), String> {
    let k = td.bags.len();
    if k == 0 {
        return Err("no bags".into());
    }
    let distinct: HashSet<VarSet> = td.bags.iter().copied().collect();
    if distinct.len() != k {
        return Err("bags are not distinct".into());
    }
    if td.edges.len() != k - 1 || !connected(k, &td.edges, &(0..k).collect::<Vec<_>>()) {
        return Err("edges do not form a tree".into());
    }
    for a in q.atoms() {
        if !td.bags.iter().any(|b| a.schema.is_subset(*b)) {
            return Err(format!("atom {} is not inside any bag", a.name));
        }
    }
    for v in q.variables().iter() {
        let nodes: Vec<usize> = (0..k).filter(|&i| td.bags[i].contains(v)).collect();
        if !connected(k, &td.edges, &nodes) {
            return Err(format!("bags holding {} are not connected", q.var_name(v)));
        }
    }
    let free = q.free();
    if !free.is_empty() && free != q.variables() {
        let core = &td.free_core;
        if core.is_empty() {
            return Err("missing free core".into());
        }
        if core.iter().any(|&i| !td.bags[i].is_subset(free)) {
            return Err("free core has a bag with a bound variable".into());
        }
        let union = core.iter().fold(VarSet::EMPTY, |acc, &i| acc.union(td.bags[i]));
        if union != free {
            return Err("free core does not cover the free variables".into());
        }
        if !connected(k, &td.edges, core) {
            return Err("free core is not connected".into());
        }
    }
    Ok(())
}

/// Is the subgraph induced by `nodes` connected (vacuously true if empty)?
fn connected(k: usize, edges: &[(usize, usize)], nodes: &[usize]) -> bool {
    let Some(&start) = nodes.first() else {
        return true;
    };
    let inside: Vec<bool> = (0..k).map(|i| nodes.contains(&i)).collect();
    let mut seen = vec![false; k];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if inside[w] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    nodes.iter().all(|&i| seen[i])
}

/// Is every bag of `td` available?
pub fn covers(available: impl Fn(VarSet) -> bool, td: &TreeDecomposition) -> bool {
    td.bags.iter().all(|&b| available(b))
}

/// Every way of choosing one bag per decomposition, in lexicographic order.
pub fn bag_selectors(family: &[TreeDecomposition], limit: usize) -> Result<Vec<Vec<VarSet>>> {
    assert!(!family.is_empty(), "a family always contains the fallback decomposition");
    let total = family
        .iter()
        .try_fold(1usize, |acc, td| acc.checked_mul(td.bags.len()))
        .filter(|&t| t <= limit)
        .ok_or_else(|| Error::Limit(format!("more than {limit} bag selectors")))?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; family.len()];
    loop {
        out.push(idx.iter().zip(family).map(|(&i, td)| td.bags[i]).collect());
        let mut d = family.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < family[d].bags.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}
