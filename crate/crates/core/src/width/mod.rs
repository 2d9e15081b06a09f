//! Submodular width under degree statistics: the maximum, over bag
//! selectors of the canonical decomposition family, of an LP over
//! polymatroids.

mod lp;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

pub use lp::{lp_solve, Cmp, Constraint, LinearProgram, LpOutcome, LP_TOL};

use crate::decomposition::{enumerate_free_connex_tds, TreeDecomposition};
use crate::error::{Error, Result};
use crate::polymatroid::{number_or_inf, SetFunction, INF};
use crate::query::{ConjunctiveQuery, Statistics};
use crate::relation::VarSet;

/// Largest |V| for which the LP is built.
pub const MAX_LP_VARS: usize = 12;

/// The elemental Shannon inequalities over variables h(S), S indexed by its
/// encoding: h(∅) = 0, h(V − v) ≤ h(V), and
/// h(X+a) + h(X+b) ≥ h(X+a+b) + h(X) for a ≠ b outside X.
pub fn shannon_constraints(num_vars: usize) -> Result<Vec<Constraint>> {
    if num_vars > MAX_LP_VARS {
        return Err(Error::Limit(format!(
            "Shannon constraints for {num_vars} variables exceed the limit of {MAX_LP_VARS}"
        )));
    }
    let full = VarSet::full(num_vars);
    let mut out = vec![Constraint::new(vec![(0, 1.0)], Cmp::Eq, 0.0)];
    for v in full.iter() {
        let rest = full.difference(VarSet::singleton(v));
        out.push(Constraint::new(vec![(rest.index(), 1.0), (full.index(), -1.0)], Cmp::Le, 0.0));
    }
    for a in 0..num_vars {
        for b in a + 1..num_vars {
            let ab = VarSet::from_vars([a, b]);
            for x in full.difference(ab).subsets() {
                let xa = x.union(VarSet::singleton(a));
                let xb = x.union(VarSet::singleton(b));
                out.push(Constraint::new(
                    vec![(xa.index(), 1.0), (xb.index(), 1.0), (x.union(ab).index(), -1.0), (x.index(), -1.0)],
                    Cmp::Ge,
                    0.0,
                ));
            }
        }
    }
    Ok(out)
}

/// max t subject to t ≤ h(Z) for every bag Z, Shannon, and
/// h(X∪Y) − h(X) ≤ n per statistics term. Column 2^|V| is t.
pub fn selector_lp(num_vars: usize, selector: &[VarSet], stats: &Statistics) -> Result<LinearProgram> {
    let t = 1usize << num_vars;
    let mut constraints = shannon_constraints(num_vars)?;
    for term in &stats.terms {
        let target = term.target();
        if target == term.x {
            continue;
        }
        let mut coeffs = vec![(target.index(), 1.0)];
        if !term.x.is_empty() {
            coeffs.push((term.x.index(), -1.0));
        }
        constraints.push(Constraint::new(coeffs, Cmp::Le, term.exponent));
    }
    for z in selector {
        constraints.push(Constraint::new(vec![(t, 1.0), (z.index(), -1.0)], Cmp::Le, 0.0));
    }
    Ok(LinearProgram {
        num_vars: t + 1,
        objective: vec![(t, 1.0)],
        constraints,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectorSolution {
    /// +∞ when the LP is unbounded.
    pub value: f64,
    /// The optimal polymatroid, or the unbounded direction.
    pub h: SetFunction,
    /// LP duals of the statistics rows, in `stats` order (empty when
    /// unbounded). Σ dual·n equals the value.
    pub stat_duals: Vec<f64>,
}

pub fn solve_selector_lp(num_vars: usize, selector: &[VarSet], stats: &Statistics) -> Result<SelectorSolution> {
    let lp = selector_lp(num_vars, selector, stats)?;
    let shannon = shannon_constraints(num_vars)?.len();
    let to_h = |x: &[f64]| SetFunction::from_fn(num_vars, |s| x[s.index()].max(0.0));
    match lp_solve(&lp)? {
        LpOutcome::Optimal { value, x, duals } => {
            let mut stat_duals = Vec::with_capacity(stats.len());
            let mut row = shannon;
            for term in &stats.terms {
                if term.target() == term.x {
                    stat_duals.push(0.0);
                } else {
                    stat_duals.push(duals[row]);
                    row += 1;
                }
            }
            Ok(SelectorSolution {
                value,
                h: to_h(&x),
                stat_duals,
            })
        }
        LpOutcome::Unbounded { ray, .. } => Ok(SelectorSolution {
            value: INF,
            h: to_h(&ray),
            stat_duals: Vec::new(),
        }),
        LpOutcome::Infeasible => Err(Error::Solver(format!("selector LP is infeasible\n{lp}"))),
    }
}

/// Drops bags that contain another bag of the same selector: the minimum
/// is attained on the smaller one.
fn minimal_bags(mut bags: Vec<VarSet>) -> Vec<VarSet> {
    bags.sort();
    bags.dedup();
    let keep: Vec<VarSet> = bags
        .iter()
        .copied()
        .filter(|&b| !bags.iter().any(|&o| o != b && o.is_subset(b)))
        .collect();
    keep
}

/// `a` can be discarded in favour of `b` when every bag of `b` contains a
/// bag of `a`: then min over a ≤ min over b for every monotone h, and the
/// relation survives adding the same bags to both.
fn dominated(a: &[VarSet], b: &[VarSet]) -> bool {
    b.iter().all(|&z| a.iter().any(|&y| y.is_subset(z)))
}

fn prune(selectors: Vec<Vec<VarSet>>) -> Vec<Vec<VarSet>> {
    let mut sel: Vec<Vec<VarSet>> = selectors.into_iter().map(minimal_bags).collect();
    sel.sort();
    sel.dedup();
    let mut keep: Vec<Vec<VarSet>> = Vec::new();
    for (i, s) in sel.iter().enumerate() {
        let beaten = sel.iter().enumerate().any(|(j, o)| {
            j != i && dominated(s, o) && !(dominated(o, s) && j > i)
        });
        if !beaten {
            keep.push(s.clone());
        }
    }
    keep
}

/// Selectors up to dominance, built one decomposition at a time. Returns
/// the selectors and whether the limit cut the enumeration short.
pub fn pruned_selectors(family: &[TreeDecomposition], limit: usize) -> (Vec<Vec<VarSet>>, bool) {
    let mut sel: Vec<Vec<VarSet>> = vec![Vec::new()];
    let mut incomplete = false;
    for td in family {
        let mut next = Vec::with_capacity(sel.len() * td.bags.len());
        'grow: for s in &sel {
            for &b in &td.bags {
                if next.len() >= limit {
                    incomplete = true;
                    break 'grow;
                }
                let mut t = s.clone();
                t.push(b);
                next.push(t);
            }
        }
        sel = prune(next);
    }
    (sel, incomplete)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Width {
    pub value: f64,
    /// The maximizing selector (minimal bags).
    pub selector: Vec<VarSet>,
    pub certificate: SetFunction,
    pub selectors_solved: usize,
    /// The selector limit was reached; `value` is a maximum over a subset.
    pub incomplete: bool,
}

impl Width {
    pub fn to_json(&self, q: &ConjunctiveQuery) -> Json {
        json!({
            "subw": number_or_inf(self.value),
            "selector": self.selector.iter().map(|&b| q.names_of(b)).collect::<Vec<_>>(),
            "certificate": self.certificate.to_json(q.var_names()),
            "selectors_solved": self.selectors_solved,
            "incomplete": self.incomplete,
        })
    }
}

/// subw(Q, Δ, n) over the canonical free-connex family.
pub fn subw(q: &ConjunctiveQuery, stats: &Statistics, max_vars: usize, selector_limit: usize) -> Result<Width> {
    let nv = q.num_vars();
    if nv > MAX_LP_VARS.min(max_vars) {
        return Err(Error::Limit(format!(
            "width needs |V| ≤ {}, the query has {nv}",
            MAX_LP_VARS.min(max_vars)
        )));
    }
    let family = enumerate_free_connex_tds(q, max_vars)?;
    subw_over(nv, &family, stats, selector_limit)
}

pub fn subw_over(nv: usize, family: &[TreeDecomposition], stats: &Statistics, selector_limit: usize) -> Result<Width> {
    let (selectors, incomplete) = pruned_selectors(family, selector_limit);
    let solved: Vec<SelectorSolution> = selectors
        .par_iter()
        .map(|s| solve_selector_lp(nv, s, stats))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in solved.iter().enumerate() {
        if s.value > solved[best].value + LP_TOL {
            best = i;
        }
    }
    Ok(Width {
        value: solved[best].value,
        selector: selectors[best].clone(),
        certificate: solved[best].h.clone(),
        selectors_solved: solved.len(),
        incomplete,
    })
}
