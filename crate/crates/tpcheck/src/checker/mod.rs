//! Explicit-state CTL* (without next-time) model checking with optional
//! fairness.
//!
//! State formulas are evaluated bottom-up. For `E phi`, maximal state
//! subformulas of `phi` below path quantifiers are evaluated first and act as
//! literals; `phi` is then translated into a generalized Büchi automaton and
//! `E phi` holds in the states from which the product with the LTS has a fair
//! accepting run. `A phi` is evaluated as `!E !phi`, so fairness applies at
//! every path quantifier.

mod buchi;
mod indexed;
mod oracle;

use std::collections::{HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::tarjan_scc;
use crate::logic::Expr;
use crate::lts::{Lts, StateId};
use crate::system::SystemLts;

pub use buchi::{ltl_to_buchi, BuchiAutomaton, BuchiEdge};
pub use indexed::{check_indexed, check_indexed_on, IndexedCounterexample, IndexedOutcome};
pub use oracle::{lasso_satisfies, oracle_check, oracle_exists_states, oracle_sat_states};

use buchi::{full_mask, Arena};

/// Which fairness constraint path quantifiers range over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessSpec {
    /// All infinite paths.
    None,
    /// Paths on which every vertex holds the token infinitely often.
    #[default]
    #[value(name = "token")]
    TokenGlobal,
}

impl FairnessSpec {
    pub fn resolve(self, sys: &SystemLts) -> Fairness {
        match self {
            FairnessSpec::None => Fairness::none(),
            FairnessSpec::TokenGlobal => Fairness::token_global(sys),
        }
    }
}

/// Generalized Büchi fairness: a path is fair iff it visits every set
/// infinitely often.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fairness {
    sets: Vec<FixedBitSet>,
}

impl Fairness {
    pub fn none() -> Self {
        Fairness { sets: Vec::new() }
    }

    pub fn new(sets: Vec<FixedBitSet>) -> Self {
        Fairness { sets }
    }

    /// One set per vertex: the states where that vertex holds the token.
    pub fn token_global(sys: &SystemLts) -> Self {
        let n = sys.num_states();
        let sets = sys
            .topology()
            .vertices()
            .map(|v| {
                let mut set = FixedBitSet::with_capacity(n);
                for s in 0..n {
                    if sys.token_at(s) == v {
                        set.insert(s);
                    }
                }
                set
            })
            .collect();
        Fairness { sets }
    }

    pub fn sets(&self) -> &[FixedBitSet] {
        &self.sets
    }

    pub fn is_none(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Ultimately periodic path: `stem` followed by `cycle` repeated forever.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lasso {
    pub stem: Vec<StateId>,
    pub cycle: Vec<StateId>,
}

impl Lasso {
    pub fn len(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycle.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.stem.iter().chain(&self.cycle).copied()
    }

    /// Whether consecutive states (including the wrap-around) are connected in `lts`.
    pub fn is_path_of(&self, lts: &Lts) -> bool {
        let seq: Vec<StateId> = self.states().collect();
        let Some(&first) = self.cycle.first() else {
            return false;
        };
        let step = |a: StateId, b: StateId| lts.successors(a).iter().any(|&(_, t)| t == b);
        seq.windows(2).all(|w| step(w[0], w[1])) && step(*seq.last().unwrap(), first)
    }

    pub fn to_json(&self, name: impl Fn(StateId) -> String) -> serde_json::Value {
        serde_json::json!({
            "stem": self.stem.iter().map(|&s| name(s)).collect::<Vec<_>>(),
            "cycle": self.cycle.iter().map(|&s| name(s)).collect::<Vec<_>>(),
        })
    }
}

/// Result of a top-level check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub holds: bool,
    /// For a failing `A phi` (or `!E phi`): a fair path from a failing initial
    /// state that violates `phi`.
    pub counterexample: Option<Lasso>,
}

/// `M |= f`: every initial state satisfies `f`.
pub fn check(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<bool> {
    let sat = sat_states(lts, f, fair)?;
    Ok(lts.initial().iter().all(|&s| sat.contains(s)))
}

/// Like [`check`], with a counterexample lasso for failing universal formulas.
pub fn check_with_witness(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<CheckOutcome> {
    let mut ck = Checker::new(lts, fair)?;
    let sat = ck.sat(f)?;
    let failing = lts.initial().iter().copied().find(|&s| !sat.contains(s));
    let Some(s0) = failing else {
        return Ok(CheckOutcome {
            holds: true,
            counterexample: None,
        });
    };
    let violated = match f {
        Expr::AllPaths(p) => Some(Expr::not((**p).clone())),
        Expr::Not(inner) => match &**inner {
            Expr::SomePath(p) => Some((**p).clone()),
            _ => None,
        },
        _ => None,
    };
    let counterexample = match violated {
        Some(p) => ck.witness(&p, s0)?,
        None => None,
    };
    Ok(CheckOutcome {
        holds: false,
        counterexample,
    })
}

/// States satisfying the state formula `f`.
pub fn sat_states(lts: &Lts, f: &Expr<String>, fair: &Fairness) -> Result<FixedBitSet> {
    Checker::new(lts, fair)?.sat(f)
}

/// A fair path from `from` satisfying the path formula `path`, if one exists.
pub fn witness(lts: &Lts, path: &Expr<String>, fair: &Fairness, from: StateId) -> Result<Option<Lasso>> {
    Checker::new(lts, fair)?.witness(path, from)
}

struct Checker<'a> {
    lts: &'a Lts,
    fair: &'a Fairness,
    cache: HashMap<Expr<String>, FixedBitSet>,
}

/// Product of the LTS with an automaton, restricted to what is reachable from
/// the chosen start states.
struct Product {
    /// `(lts state, automaton state)` per node.
    nodes: Vec<(StateId, usize)>,
    succ: Vec<Vec<(usize, u128)>>,
    comp: Vec<usize>,
    /// Per SCC: has an internal edge and its internal edges carry every mark.
    accepting: Vec<bool>,
    all_marks: u128,
}

impl<'a> Checker<'a> {
    fn new(lts: &'a Lts, fair: &'a Fairness) -> Result<Self> {
        if let Some(s) = fair.sets.iter().find(|s| s.len() != lts.num_states()) {
            return Err(Error::Invalid(format!(
                "fairness set over {} states for an LTS with {}",
                s.len(),
                lts.num_states()
            )));
        }
        Ok(Checker {
            lts,
            fair,
            cache: HashMap::new(),
        })
    }

    fn all(&self) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.lts.num_states());
        s.insert_range(..);
        s
    }

    fn sat(&mut self, f: &Expr<String>) -> Result<FixedBitSet> {
        if let Some(s) = self.cache.get(f) {
            return Ok(s.clone());
        }
        let n = self.lts.num_states();
        let result = match f {
            Expr::True => self.all(),
            Expr::False => FixedBitSet::with_capacity(n),
            Expr::Atom(a) => {
                if !self.lts.knows_atom(a) {
                    return Err(Error::Unknown {
                        kind: "atom",
                        name: a.clone(),
                    });
                }
                self.lts.states_labeled(a)
            }
            Expr::Not(a) => {
                let mut s = self.sat(a)?;
                s.toggle_range(..);
                s
            }
            Expr::And(a, b) => {
                let mut s = self.sat(a)?;
                s.intersect_with(&self.sat(b)?);
                s
            }
            Expr::Or(a, b) => {
                let mut s = self.sat(a)?;
                s.union_with(&self.sat(b)?);
                s
            }
            Expr::Implies(a, b) => {
                let mut s = self.sat(a)?;
                s.toggle_range(..);
                s.union_with(&self.sat(b)?);
                s
            }
            Expr::SomePath(p) => self.sat_exists(p)?,
            Expr::AllPaths(p) => {
                let mut s = self.sat_exists(&Expr::not((**p).clone()))?;
                s.toggle_range(..);
                s
            }
            Expr::Until(..) | Expr::Eventually(_) | Expr::Always(_) => {
                return Err(Error::Semantic(format!(
                    "path formula `{f}` used as a state formula; wrap it in A or E"
                )))
            }
        };
        self.cache.insert(f.clone(), result.clone());
        Ok(result)
    }

    /// NNF of `path` with literal sets; state subformulas are evaluated first.
    fn automaton(&mut self, path: &Expr<String>) -> Result<(BuchiAutomaton, Vec<FixedBitSet>)> {
        let mut arena = Arena::default();
        let mut keys: Vec<Expr<String>> = Vec::new();
        let mut sets: Vec<FixedBitSet> = Vec::new();
        let mut leaf = |e: &Expr<String>| -> Result<usize> {
            if let Some(i) = keys.iter().position(|k| k == e) {
                return Ok(i);
            }
            let set = self.sat(e)?;
            keys.push(e.clone());
            sets.push(set);
            Ok(keys.len() - 1)
        };
        let root = arena.build(path, false, &mut leaf)?;
        let names = keys.iter().map(ToString::to_string).collect();
        let aut = buchi::translate(&arena, root, names)?;
        Ok((aut, sets))
    }

    fn product(&self, aut: &BuchiAutomaton, sets: &[FixedBitSet], starts: &[StateId]) -> Result<Product> {
        let nu = aut.num_acceptance;
        let nf = self.fair.sets.len();
        if nu + nf > 128 {
            return Err(Error::BoundExceeded(format!(
                "{nu} until-subformulas plus {nf} fairness sets exceed 128 acceptance marks"
            )));
        }
        let fair_marks: Vec<u128> = (0..self.lts.num_states())
            .map(|s| {
                self.fair
                    .sets
                    .iter()
                    .enumerate()
                    .filter(|(_, set)| set.contains(s))
                    .fold(0u128, |m, (j, _)| m | (1u128 << (nu + j)))
            })
            .collect();
        let mut index: HashMap<(StateId, usize), usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut queue = VecDeque::new();
        for &s in starts {
            let key = (s, aut.initial);
            if let std::collections::hash_map::Entry::Vacant(slot) = index.entry(key) {
                slot.insert(nodes.len());
                nodes.push(key);
                queue.push_back(nodes.len() - 1);
            }
        }
        let mut succ: Vec<Vec<(usize, u128)>> = Vec::new();
        while let Some(v) = queue.pop_front() {
            let (s, q) = nodes[v];
            let mut out = Vec::new();
            for e in &aut.edges[q] {
                if !e.guard.iter().all(|&(l, pos)| sets[l].contains(s) == pos) {
                    continue;
                }
                for &(_, t) in self.lts.successors(s) {
                    let key = (t, e.target);
                    let w = match index.get(&key) {
                        Some(&w) => w,
                        None => {
                            nodes.push(key);
                            index.insert(key, nodes.len() - 1);
                            queue.push_back(nodes.len() - 1);
                            nodes.len() - 1
                        }
                    };
                    out.push((w, e.acceptance | fair_marks[s]));
                }
            }
            if succ.len() <= v {
                succ.resize(v + 1, Vec::new());
            }
            succ[v] = out;
        }
        succ.resize(nodes.len(), Vec::new());
        let (comp, ncomp) = tarjan_scc(nodes.len(), |v| succ[v].iter().map(|&(w, _)| w));
        let mut marks = vec![0u128; ncomp];
        let mut nontrivial = vec![false; ncomp];
        for (v, out) in succ.iter().enumerate() {
            for &(w, m) in out {
                if comp[v] == comp[w] {
                    nontrivial[comp[v]] = true;
                    marks[comp[v]] |= m;
                }
            }
        }
        let all_marks = full_mask(nu + nf);
        let accepting = (0..ncomp)
            .map(|c| nontrivial[c] && marks[c] & all_marks == all_marks)
            .collect();
        Ok(Product {
            nodes,
            succ,
            comp,
            accepting,
            all_marks,
        })
    }

    fn sat_exists(&mut self, path: &Expr<String>) -> Result<FixedBitSet> {
        let (aut, sets) = self.automaton(path)?;
        let starts: Vec<StateId> = (0..self.lts.num_states()).collect();
        let prod = self.product(&aut, &sets, &starts)?;
        // Backward closure of accepting SCCs.
        let n = prod.nodes.len();
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, out) in prod.succ.iter().enumerate() {
            for &(w, _) in out {
                pred[w].push(v);
            }
        }
        let mut good = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| prod.accepting[prod.comp[v]]).collect();
        for &v in &stack {
            good[v] = true;
        }
        while let Some(v) = stack.pop() {
            for &u in &pred[v] {
                if !good[u] {
                    good[u] = true;
                    stack.push(u);
                }
            }
        }
        let mut result = FixedBitSet::with_capacity(self.lts.num_states());
        for (v, &(s, q)) in prod.nodes.iter().enumerate() {
            if q == aut.initial && good[v] {
                result.insert(s);
            }
        }
        Ok(result)
    }

    fn witness(&mut self, path: &Expr<String>, from: StateId) -> Result<Option<Lasso>> {
        let (aut, sets) = self.automaton(path)?;
        let prod = self.product(&aut, &sets, &[from])?;
        // Shortest stem to a node of an accepting SCC.
        let n = prod.nodes.len();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut entry = None;
        while let Some(v) = queue.pop_front() {
            if prod.accepting[prod.comp[v]] {
                entry = Some(v);
                break;
            }
            for &(w, _) in &prod.succ[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        let Some(entry) = entry else {
            return Ok(None);
        };
        let mut stem_nodes = vec![entry];
        while let Some(&v) = stem_nodes.last() {
            if v == 0 {
                break;
            }
            stem_nodes.push(parent[v]);
        }
        stem_nodes.reverse();
        stem_nodes.pop();

        // Cycle through the SCC collecting every mark, then back to the entry.
        let scc = prod.comp[entry];
        let mut cycle_nodes = vec![entry];
        let mut current = entry;
        let mut missing = prod.all_marks;
        let mut moved = false;
        loop {
            let comp = &prod.comp;
            let wanted = missing;
            let goal = move |_: usize, w: usize, m: u128| {
                comp[w] == scc && if wanted != 0 { m & wanted != 0 } else { w == entry }
            };
            if missing == 0 && moved && current == entry {
                break;
            }
            let (steps, m) = bfs_edge(&prod, scc, current, goal);
            for &w in &steps {
                cycle_nodes.push(w);
            }
            current = *steps.last().expect("an SCC path has at least one edge");
            missing &= !m;
            moved = true;
        }
        cycle_nodes.pop();
        let state = |v: usize| prod.nodes[v].0;
        Ok(Some(Lasso {
            stem: stem_nodes.into_iter().map(state).collect(),
            cycle: cycle_nodes.into_iter().map(state).collect(),
        }))
    }
}

/// Shortest path inside SCC `scc` from `from` ending with an edge `(v, w, m)`
/// satisfying `goal`; returns the visited nodes after `from` and the marks of
/// the final edge.
fn bfs_edge(
    prod: &Product,
    scc: usize,
    from: usize,
    goal: impl Fn(usize, usize, u128) -> bool,
) -> (Vec<usize>, u128) {
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut visited = std::collections::HashSet::from([from]);
    while let Some(v) = queue.pop_front() {
        for &(w, m) in &prod.succ[v] {
            if prod.comp[w] != scc {
                continue;
            }
            if goal(v, w, m) {
                let mut path = vec![w];
                let mut u = v;
                while u != from {
                    path.push(u);
                    u = parent[&u];
                }
                path.reverse();
                return (path, m);
            }
            if visited.insert(w) {
                parent.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    unreachable!("accepting SCCs are strongly connected and carry every mark")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_closed;
    use crate::system::{build_system, project};
    use crate::template::builtin_template;
    use crate::topology::{make_ring, IndexTuple};
    use std::collections::BTreeSet;

    fn lts(n: usize, edges: &[(usize, usize)], labels: &[&[&str]]) -> Lts {
        Lts::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            vec![0],
            vec!["a".into()],
            edges.iter().map(|&(s, t)| (s, 0, t)).collect(),
            labels
                .iter()
                .map(|l| l.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>())
                .collect(),
        )
        .unwrap()
        .with_universe(crate::lts::Universe::Explicit(
            ["p", "q"].iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn f(text: &str) -> Expr<String> {
        parse_closed(text).unwrap()
    }

    #[test]
    fn basic_ctl_star() {
        // s0(p) -> s1(p) -> s2(q) -> s2, s0 -> s0
        let m = lts(3, &[(0, 1), (1, 2), (2, 2), (0, 0)], &[&["p"], &["p"], &["q"]]);
        let none = Fairness::none();
        assert!(check(&m, &f("E G p"), &none).unwrap());
        assert!(!check(&m, &f("A F q"), &none).unwrap());
        assert!(check(&m, &f("E (p U q)"), &none).unwrap());
        assert!(check(&m, &f("A G (q -> A G q)"), &none).unwrap());
        assert!(check(&m, &f("E F A G q"), &none).unwrap());
        assert!(check(&m, &f("A (G p | F G q)"), &none).unwrap());
        assert!(!check(&m, &f("A (G p | G F p)"), &none).unwrap());
        let sat = sat_states(&m, &f("E G p"), &none).unwrap();
        assert_eq!(sat.ones().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn fairness_restricts_paths() {
        let m = lts(3, &[(0, 1), (1, 2), (2, 2), (0, 0)], &[&["p"], &["p"], &["q"]]);
        let mut visit_q = FixedBitSet::with_capacity(3);
        visit_q.insert(2);
        let fair = Fairness::new(vec![visit_q]);
        assert!(!check(&m, &f("E G p"), &fair).unwrap());
        assert!(check(&m, &f("A F q"), &fair).unwrap());
    }

    #[test]
    fn deadlocks_have_no_paths() {
        let m = lts(2, &[(0, 1)], &[&["p"], &[]]);
        let none = Fairness::none();
        assert!(!check(&m, &f("E true"), &none).unwrap());
        assert!(check(&m, &f("A false"), &none).unwrap());
    }

    #[test]
    fn unknown_atoms_are_rejected() {
        let m = lts(1, &[(0, 0)], &[&["p"]]);
        let err = check(&m, &f("E F r"), &Fairness::none()).unwrap_err();
        assert!(matches!(err, Error::Unknown { kind: "atom", .. }));
    }

    #[test]
    fn shuttle_ring_single_token_and_fairness() {
        let t = builtin_template("shuttle").unwrap();
        let sys = build_system(&t, &make_ring(3).unwrap()).unwrap();
        let fair = Fairness::token_global(&sys);
        let p = project(&sys, &IndexTuple::new(vec![1, 2, 3], sys.topology()).unwrap());
        assert!(check(&p, &f("A G ((tok@1 | tok@2) | tok@3)"), &fair).unwrap());
        assert!(check(&p, &f("A G !(tok@1 & tok@2)"), &fair).unwrap());
        let p1 = project(&sys, &IndexTuple::new(vec![1], sys.topology()).unwrap());
        assert!(!check(&p1, &f("E G !tok@1"), &fair).unwrap());
        assert!(!check(&p1, &f("E G tok@1"), &fair).unwrap());
        // Unknown propositions of a projection hold nowhere.
        assert!(check(&p1, &f("A G !halt@1"), &fair).unwrap());
        assert!(check(&p1, &f("E G !halt@2"), &fair).is_err());
    }

    #[test]
    fn counterexample_lassos_violate_the_formula() {
        let m = lts(3, &[(0, 1), (1, 2), (2, 2), (0, 0)], &[&["p"], &["p"], &["q"]]);
        let out = check_with_witness(&m, &f("A F q"), &Fairness::none()).unwrap();
        assert!(!out.holds);
        let lasso = out.counterexample.unwrap();
        assert!(lasso.is_path_of(&m));
        assert_eq!(lasso.cycle, vec![0]);
        let out = check_with_witness(&m, &f("!E G p"), &Fairness::none()).unwrap();
        assert!(!out.holds);
        assert!(out.counterexample.unwrap().is_path_of(&m));
        let out = check_with_witness(&m, &f("A F p"), &Fairness::none()).unwrap();
        assert!(out.holds && out.counterexample.is_none());
    }

    #[test]
    fn fair_witness_visits_every_set() {
        let t = builtin_template("shuttle").unwrap();
        let sys = build_system(&t, &make_ring(4).unwrap()).unwrap();
        let fair = Fairness::token_global(&sys);
        let lasso = witness(sys.lts(), &Expr::True, &fair, sys.lts().initial()[0])
            .unwrap()
            .unwrap();
        assert!(lasso.is_path_of(sys.lts()));
        let holders: BTreeSet<usize> = lasso.cycle.iter().map(|&s| sys.token_at(s)).collect();
        assert_eq!(holders, (1..=4).collect());
    }
}
