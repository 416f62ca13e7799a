//! Reference semantics used to cross-validate the automaton-based checker.
//!
//! Path formulas are decided by a closure tableau: a node is an LTS state
//! together with a guess of which temporal subformulas hold there. Edges follow
//! the LTS and respect the one-step unfolding of every temporal subformula. A
//! fair path satisfying the formula exists iff some node guessing the formula
//! reaches a nontrivial SCC that is self-fulfilling (every pending eventuality
//! is met inside it) and meets every fairness set. Every positive verdict is
//! re-established by extracting a lasso and evaluating the formula on it with
//! the direct fixpoint semantics of ultimately periodic words.

use std::collections::{BTreeSet, HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Fairness, Lasso};
use crate::error::{Error, Result};
use crate::logic::Expr;
use crate::lts::{Lts, StateId, Universe};

/// Largest tableau the oracle will build.
const MAX_NODES: usize = 1 << 18;

/// Truth of path formula `f` (no path quantifiers) on `labels[0..]` where
/// position `i + 1` follows `i` and the last position loops back to `loop_start`.
pub fn lasso_satisfies(labels: &[&BTreeSet<String>], loop_start: usize, f: &Expr<String>) -> bool {
    assert!(loop_start < labels.len());
    eval_lasso(labels, loop_start, f)[0]
}

fn eval_lasso(labels: &[&BTreeSet<String>], loop_start: usize, f: &Expr<String>) -> Vec<bool> {
    let len = labels.len();
    let next = |i: usize| if i + 1 < len { i + 1 } else { loop_start };
    let un = |a: &Expr<String>| eval_lasso(labels, loop_start, a);
    let bin = |a: &Expr<String>, b: &Expr<String>, op: fn(bool, bool) -> bool| {
        un(a).into_iter().zip(un(b)).map(|(x, y)| op(x, y)).collect()
    };
    // Least fixpoint of v[i] = now[i] || (keep[i] && v[next(i)]).
    let until = |keep: Vec<bool>, now: Vec<bool>| {
        let mut v = now.clone();
        for _ in 0..=len {
            for i in (0..len).rev() {
                v[i] = now[i] || (keep[i] && v[next(i)]);
            }
        }
        v
    };
    match f {
        Expr::True => vec![true; len],
        Expr::False => vec![false; len],
        Expr::Atom(a) => labels.iter().map(|l| l.contains(a)).collect(),
        Expr::Not(a) => un(a).into_iter().map(|x| !x).collect(),
        Expr::And(a, b) => bin(a, b, |x, y| x && y),
        Expr::Or(a, b) => bin(a, b, |x, y| x || y),
        Expr::Implies(a, b) => bin(a, b, |x, y| !x || y),
        Expr::Until(a, b) => until(un(a), un(b)),
        Expr::Eventually(a) => until(vec![true; len], un(a)),
        Expr::Always(a) => {
            let neg: Vec<bool> = un(a).into_iter().map(|x| !x).collect();
            until(vec![true; len], neg).into_iter().map(|x| !x).collect()
        }
        Expr::AllPaths(_) | Expr::SomePath(_) => {
            panic!("lasso semantics needs a formula without path quantifiers")
        }
    }
}

/// `M |= E f` for a path formula `f` without path quantifiers: every initial
/// state has a fair path satisfying `f`.
pub fn oracle_check(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<bool> {
    let sat = oracle_exists_states(lts, f, fair)?;
    Ok(lts.initial().iter().all(|&s| sat.contains(s)))
}

/// States satisfying the state formula `f`, nested path quantifiers included,
/// computed with the tableau for every path quantifier.
pub fn oracle_sat_states(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<FixedBitSet> {
    let n = lts.num_states();
    Ok(match f {
        Expr::True => ones(n),
        Expr::False => FixedBitSet::with_capacity(n),
        Expr::Atom(a) => {
            if !lts.knows_atom(a) {
                return Err(Error::Unknown {
                    kind: "atom",
                    name: a.clone(),
                });
            }
            lts.states_labeled(a)
        }
        Expr::Not(a) => complement(&oracle_sat_states(lts, a, fair)?),
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) => {
            let x = oracle_sat_states(lts, a, fair)?;
            let y = oracle_sat_states(lts, b, fair)?;
            let mut out = FixedBitSet::with_capacity(n);
            for s in 0..n {
                let v = match f {
                    Expr::And(..) => x[s] && y[s],
                    Expr::Or(..) => x[s] || y[s],
                    _ => !x[s] || y[s],
                };
                out.set(s, v);
            }
            out
        }
        Expr::SomePath(p) | Expr::AllPaths(p) => {
            // Replace maximal quantified subformulas by fresh propositions.
            let mut fresh: Vec<(String, FixedBitSet)> = Vec::new();
            let flat = flatten(p, lts, fair, &mut fresh)?;
            let inner = if matches!(f, Expr::AllPaths(_)) {
                Expr::not(flat)
            } else {
                flat
            };
            let relabeled = if fresh.is_empty() {
                lts.clone()
            } else {
                let labels = (0..n)
                    .map(|s| {
                        let mut l = lts.label(s).clone();
                        l.extend(fresh.iter().filter(|(_, set)| set[s]).map(|(k, _)| k.clone()));
                        l
                    })
                    .collect();
                lts.relabeled(labels, Universe::Labels)?
            };
            let exists = tableau_exists(&relabeled, &inner, fair)?;
            if matches!(f, Expr::AllPaths(_)) {
                complement(&exists)
            } else {
                exists
            }
        }
        Expr::Until(..) | Expr::Eventually(_) | Expr::Always(_) => {
            return Err(Error::Semantic(format!(
                "path formula `{f}` used as a state formula"
            )))
        }
    })
}

fn flatten(
    e: &Expr<String>,
    lts: &Lts,
    fair: &Fairness,
    fresh: &mut Vec<(String, FixedBitSet)>,
) -> Result<Expr<String>> {
    Ok(match e {
        Expr::AllPaths(_) | Expr::SomePath(_) => {
            let set = oracle_sat_states(lts, e, fair)?;
            let name = format!("#q{}", fresh.len());
            fresh.push((name.clone(), set));
            Expr::Atom(name)
        }
        Expr::Atom(a) => {
            if !lts.knows_atom(a) {
                return Err(Error::Unknown {
                    kind: "atom",
                    name: a.clone(),
                });
            }
            e.clone()
        }
        Expr::True | Expr::False => e.clone(),
        Expr::Not(a) => Expr::not(flatten(a, lts, fair, fresh)?),
        Expr::And(a, b) => Expr::and(flatten(a, lts, fair, fresh)?, flatten(b, lts, fair, fresh)?),
        Expr::Or(a, b) => Expr::or(flatten(a, lts, fair, fresh)?, flatten(b, lts, fair, fresh)?),
        Expr::Implies(a, b) => {
            Expr::implies(flatten(a, lts, fair, fresh)?, flatten(b, lts, fair, fresh)?)
        }
        Expr::Until(a, b) => Expr::until(flatten(a, lts, fair, fresh)?, flatten(b, lts, fair, fresh)?),
        Expr::Eventually(a) => Expr::eventually(flatten(a, lts, fair, fresh)?),
        Expr::Always(a) => Expr::always(flatten(a, lts, fair, fresh)?),
    })
}

fn ones(n: usize) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(n);
    s.insert_range(..);
    s
}

fn complement(s: &FixedBitSet) -> FixedBitSet {
    let mut c = s.clone();
    c.toggle_range(..);
    c
}

/// Subformula table of a path formula; temporal subformulas get guess bits.
struct Closure<'f> {
    subs: Vec<&'f Expr<String>>,
    index: HashMap<&'f Expr<String>, usize>,
    /// Bit of each temporal subformula, by subformula index.
    bit: Vec<Option<usize>>,
    temporal: Vec<usize>,
}

impl<'f> Closure<'f> {
    fn new(f: &'f Expr<String>) -> Self {
        let mut c = Closure {
            subs: Vec::new(),
            index: HashMap::new(),
            bit: Vec::new(),
            temporal: Vec::new(),
        };
        c.add(f);
        c
    }

    /// Children are added before parents.
    fn add(&mut self, e: &'f Expr<String>) -> usize {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        for ch in e.children() {
            self.add(ch);
        }
        let i = self.subs.len();
        self.subs.push(e);
        self.index.insert(e, i);
        if e.is_temporal() {
            self.bit.push(Some(self.temporal.len()));
            self.temporal.push(i);
        } else {
            self.bit.push(None);
        }
        i
    }

    fn idx(&self, e: &Expr<String>) -> usize {
        self.index[e]
    }

    /// Truth of every subformula at a state with the given guess.
    fn evaluate(&self, label: &BTreeSet<String>, guess: u64) -> Vec<bool> {
        let mut v = vec![false; self.subs.len()];
        for (i, e) in self.subs.iter().enumerate() {
            v[i] = match e {
                Expr::True => true,
                Expr::False => false,
                Expr::Atom(a) => label.contains(a),
                Expr::Not(a) => !v[self.idx(a)],
                Expr::And(a, b) => v[self.idx(a)] && v[self.idx(b)],
                Expr::Or(a, b) => v[self.idx(a)] || v[self.idx(b)],
                Expr::Implies(a, b) => !v[self.idx(a)] || v[self.idx(b)],
                _ => guess >> self.bit[i].expect("temporal") & 1 == 1,
            };
        }
        v
    }

    /// The guess is compatible with the present: `b` forces `a U b`, and
    /// `a U b` needs `a` or `b` now (dually for the other operators).
    fn locally_consistent(&self, v: &[bool]) -> bool {
        self.temporal.iter().all(|&i| match self.subs[i] {
            Expr::Until(a, b) => {
                let (a, b) = (v[self.idx(a)], v[self.idx(b)]);
                (!b || v[i]) && (!v[i] || a || b)
            }
            Expr::Eventually(a) => !v[self.idx(a)] || v[i],
            Expr::Always(a) => !v[i] || v[self.idx(a)],
            _ => unreachable!(),
        })
    }

    /// One-step unfolding between consecutive positions.
    fn step_ok(&self, now: &[bool], next: &[bool]) -> bool {
        self.temporal.iter().all(|&i| match self.subs[i] {
            Expr::Until(a, b) => now[i] == (now[self.idx(b)] || (now[self.idx(a)] && next[i])),
            Expr::Eventually(a) => now[i] == (now[self.idx(a)] || next[i]),
            Expr::Always(a) => now[i] == (now[self.idx(a)] && next[i]),
            _ => unreachable!(),
        })
    }

    /// Per temporal subformula: this position discharges its pending obligation.
    fn fulfils(&self, v: &[bool], t: usize) -> bool {
        let i = self.temporal[t];
        match self.subs[i] {
            Expr::Until(_, b) => !v[i] || v[self.idx(b)],
            Expr::Eventually(a) => !v[i] || v[self.idx(a)],
            Expr::Always(a) => v[i] || !v[self.idx(a)],
            _ => unreachable!(),
        }
    }
}

/// States with a fair path satisfying the path formula `f` (no path quantifiers).
pub fn oracle_exists_states(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<FixedBitSet> {
    if let Some(a) = f.atoms().into_iter().find(|a| !lts.knows_atom(a)) {
        return Err(Error::Unknown {
            kind: "atom",
            name: a.clone(),
        });
    }
    if f.path_depth() > 0 {
        return Err(Error::Semantic(
            "the tableau oracle needs a formula without path quantifiers".into(),
        ));
    }
    tableau_exists(lts, f, fair)
}

/// Tableau decision for a validated, quantifier-free path formula.
fn tableau_exists(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<FixedBitSet> {
    let cl = Closure::new(f);
    let nt = cl.temporal.len();
    let guesses = 1usize.checked_shl(nt as u32).unwrap_or(usize::MAX);
    if nt >= 32 || lts.num_states().saturating_mul(guesses) > MAX_NODES {
        return Err(Error::BoundExceeded(format!(
            "tableau of {} states x 2^{nt} guesses exceeds the oracle bound of {MAX_NODES} nodes; use the main checker",
            lts.num_states()
        )));
    }
    let top = cl.idx(f);

    let mut graph: DiGraph<(StateId, Vec<bool>), ()> = DiGraph::new();
    let mut node_of: HashMap<(StateId, u64), NodeIndex> = HashMap::new();
    for s in 0..lts.num_states() {
        for g in 0..guesses as u64 {
            let v = cl.evaluate(lts.label(s), g);
            if cl.locally_consistent(&v) {
                node_of.insert((s, g), graph.add_node((s, v)));
            }
        }
    }
    let keys: Vec<((StateId, u64), NodeIndex)> = {
        let mut k: Vec<_> = node_of.iter().map(|(&k, &v)| (k, v)).collect();
        k.sort();
        k
    };
    for &((s, _), from) in &keys {
        for &(_, t) in lts.successors(s) {
            for g in 0..guesses as u64 {
                if let Some(&to) = node_of.get(&(t, g)) {
                    if cl.step_ok(&graph[from].1, &graph[to].1) {
                        graph.add_edge(from, to, ());
                    }
                }
            }
        }
    }

    // Accepting SCCs.
    let mut good = vec![false; graph.node_count()];
    let mut accepting_sccs: Vec<Vec<NodeIndex>> = Vec::new();
    for scc in kosaraju_scc(&graph) {
        let nontrivial = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        if !nontrivial {
            continue;
        }
        let fulfilled = (0..nt).all(|t| scc.iter().any(|&x| cl.fulfils(&graph[x].1, t)));
        let is_fair = fair
            .sets()
            .iter()
            .all(|set| scc.iter().any(|&x| set[graph[x].0]));
        if fulfilled && is_fair {
            for &x in &scc {
                good[x.index()] = true;
            }
            accepting_sccs.push(scc);
        }
    }
    // Backward closure.
    let mut stack: Vec<NodeIndex> = graph.node_indices().filter(|x| good[x.index()]).collect();
    while let Some(x) = stack.pop() {
        for y in graph.neighbors_directed(x, petgraph::Direction::Incoming) {
            if !good[y.index()] {
                good[y.index()] = true;
                stack.push(y);
            }
        }
    }
    let mut result = FixedBitSet::with_capacity(lts.num_states());
    for &((s, _), x) in &keys {
        if good[x.index()] && graph[x].1[top] {
            if !result[s] {
                let lasso = extract_lasso(&graph, &cl, fair, &accepting_sccs, x);
                let labels: Vec<&BTreeSet<String>> = lasso.states().map(|q| lts.label(q)).collect();
                assert!(
                    lasso.is_path_of(lts) && lasso_satisfies(&labels, lasso.stem.len(), f),
                    "tableau lasso {lasso:?} does not satisfy {f}"
                );
            }
            result.insert(s);
        }
    }
    Ok(result)
}

fn extract_lasso(
    graph: &DiGraph<(StateId, Vec<bool>), ()>,
    cl: &Closure<'_>,
    fair: &Fairness,
    sccs: &[Vec<NodeIndex>],
    from: NodeIndex,
) -> Lasso {
    let in_scc: HashMap<NodeIndex, usize> = sccs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |&x| (x, i)))
        .collect();
    let path_to = |start: NodeIndex, within: Option<usize>, target: &dyn Fn(NodeIndex) -> bool| {
        let mut parent: HashMap<NodeIndex, NodeIndex> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in graph.neighbors(x) {
                if within.is_some_and(|c| in_scc.get(&y) != Some(&c)) {
                    continue;
                }
                if target(y) {
                    let mut path = vec![y];
                    let mut u = x;
                    while u != start {
                        path.push(u);
                        u = parent[&u];
                    }
                    path.reverse();
                    return path;
                }
                if y != start && !parent.contains_key(&y) {
                    parent.insert(y, x);
                    queue.push_back(y);
                }
            }
        }
        unreachable!("target reachable by construction")
    };
    let (stem, entry) = if in_scc.contains_key(&from) {
        (vec![], from)
    } else {
        let p = path_to(from, None, &|y| in_scc.contains_key(&y));
        let entry = *p.last().unwrap();
        let mut stem = vec![from];
        stem.extend(&p[..p.len() - 1]);
        (stem, entry)
    };
    let c = in_scc[&entry];
    let mut cycle = vec![entry];
    let mut current = entry;
    let mut requirements: Vec<Box<dyn Fn(NodeIndex) -> bool + '_>> = Vec::new();
    for t in 0..cl.temporal.len() {
        requirements.push(Box::new(move |x| cl.fulfils(&graph[x].1, t)));
    }
    for set in fair.sets() {
        requirements.push(Box::new(move |x| set[graph[x].0]));
    }
    for req in &requirements {
        if cycle.iter().any(|&x| req(x)) {
            continue;
        }
        let p = path_to(current, Some(c), &**req);
        current = *p.last().unwrap();
        cycle.extend(p);
    }
    let back = path_to(current, Some(c), &|y| y == entry);
    cycle.extend(&back[..back.len() - 1]);
    let state = |x: &NodeIndex| graph[*x].0;
    Lasso {
        stem: stem.iter().map(state).collect(),
        cycle: cycle.iter().map(state).collect(),
    }
}
