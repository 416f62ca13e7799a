//! Tableau translation of X-free path formulas into generalized Büchi automata
//! with acceptance on transitions.
//!
//! An automaton state is the set of obligations still to be met from the current
//! position on. Expanding it yields alternatives, each a set of literals the
//! current letter must satisfy plus the obligations passed to the next position.
//! For every until-formula `u` there is one acceptance set: the transitions whose
//! successor obligations do not contain `u` (it was not postponed).

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::logic::Expr;

pub(crate) type NodeId = u32;

/// Negation normal form node; `Lit(i, true)` is literal `i`, `Lit(i, false)` its negation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    True,
    False,
    Lit(usize, bool),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Until(NodeId, NodeId),
    Release(NodeId, NodeId),
}

/// Hash-consed NNF nodes.
#[derive(Default)]
pub(crate) struct Arena {
    nodes: Vec<Node>,
    ids: HashMap<Node, NodeId>,
}

impl Arena {
    pub(crate) fn node(&self, id: NodeId) -> Node {
        self.nodes[id as usize]
    }

    fn intern(&mut self, n: Node) -> NodeId {
        let n = match n {
            Node::And(a, b) | Node::Or(a, b) if b < a => match n {
                Node::And(..) => Node::And(b, a),
                _ => Node::Or(b, a),
            },
            n => n,
        };
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n);
        self.ids.insert(n, id);
        id
    }

    fn constant(&mut self, b: bool) -> NodeId {
        self.intern(if b { Node::True } else { Node::False })
    }

    fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.node(a), self.node(b)) {
            (Node::False, _) | (_, Node::False) => self.constant(false),
            (Node::True, _) => b,
            (_, Node::True) => a,
            _ if a == b => a,
            _ => self.intern(Node::And(a, b)),
        }
    }

    fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.node(a), self.node(b)) {
            (Node::True, _) | (_, Node::True) => self.constant(true),
            (Node::False, _) => b,
            (_, Node::False) => a,
            _ if a == b => a,
            _ => self.intern(Node::Or(a, b)),
        }
    }

    fn until(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match self.node(b) {
            Node::True | Node::False => b,
            _ if self.node(a) == Node::False => b,
            _ => self.intern(Node::Until(a, b)),
        }
    }

    fn release(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match self.node(b) {
            Node::True | Node::False => b,
            _ if self.node(a) == Node::True => b,
            _ => self.intern(Node::Release(a, b)),
        }
    }

    /// Converts `e` (negated if `neg`) to NNF. Atoms and path-quantified
    /// subformulas are turned into literal indices by `leaf`.
    pub(crate) fn build(
        &mut self,
        e: &Expr<String>,
        neg: bool,
        leaf: &mut dyn FnMut(&Expr<String>) -> Result<usize>,
    ) -> Result<NodeId> {
        Ok(match e {
            Expr::True => self.constant(!neg),
            Expr::False => self.constant(neg),
            Expr::Atom(_) | Expr::AllPaths(_) | Expr::SomePath(_) => {
                let i = leaf(e)?;
                self.intern(Node::Lit(i, !neg))
            }
            Expr::Not(a) => self.build(a, !neg, leaf)?,
            Expr::And(a, b) | Expr::Or(a, b) => {
                let a = self.build(a, neg, leaf)?;
                let b = self.build(b, neg, leaf)?;
                if matches!(e, Expr::And(..)) != neg {
                    self.and(a, b)
                } else {
                    self.or(a, b)
                }
            }
            Expr::Implies(a, b) => {
                let a = self.build(a, !neg, leaf)?;
                let b = self.build(b, neg, leaf)?;
                if neg {
                    self.and(a, b)
                } else {
                    self.or(a, b)
                }
            }
            Expr::Until(a, b) => {
                let a = self.build(a, neg, leaf)?;
                let b = self.build(b, neg, leaf)?;
                if neg {
                    self.release(a, b)
                } else {
                    self.until(a, b)
                }
            }
            Expr::Eventually(a) => {
                let a = self.build(a, neg, leaf)?;
                if neg {
                    let f = self.constant(false);
                    self.release(f, a)
                } else {
                    let t = self.constant(true);
                    self.until(t, a)
                }
            }
            Expr::Always(a) => {
                let a = self.build(a, neg, leaf)?;
                if neg {
                    let t = self.constant(true);
                    self.until(t, a)
                } else {
                    let f = self.constant(false);
                    self.release(f, a)
                }
            }
        })
    }

    fn show(&self, id: NodeId, names: &[String], out: &mut String) {
        match self.node(id) {
            Node::True => out.push_str("true"),
            Node::False => out.push_str("false"),
            Node::Lit(i, pos) => {
                if !pos {
                    out.push('!');
                }
                out.push_str(names.get(i).map_or("?", String::as_str));
            }
            Node::And(a, b) | Node::Or(a, b) | Node::Until(a, b) | Node::Release(a, b) => {
                let op = match self.node(id) {
                    Node::And(..) => " & ",
                    Node::Or(..) => " | ",
                    Node::Until(..) => " U ",
                    _ => " R ",
                };
                out.push('(');
                self.show(a, names, out);
                out.push_str(op);
                self.show(b, names, out);
                out.push(')');
            }
        }
    }
}

/// One way to meet a set of obligations at the current position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Alternative {
    /// Sorted `(literal, polarity)` constraints on the current letter.
    pub lits: Vec<(usize, bool)>,
    /// Sorted obligations for the next position.
    pub next: Vec<NodeId>,
}

fn expand(arena: &Arena, obligations: &[NodeId]) -> Vec<Alternative> {
    fn go(
        arena: &Arena,
        todo: &mut Vec<NodeId>,
        lits: &mut BTreeSet<(usize, bool)>,
        next: &mut BTreeSet<NodeId>,
        out: &mut BTreeSet<Alternative>,
    ) {
        let Some(f) = todo.pop() else {
            out.insert(Alternative {
                lits: lits.iter().copied().collect(),
                next: next.iter().copied().collect(),
            });
            return;
        };
        let branch = |todo: &mut Vec<NodeId>,
                      lits: &mut BTreeSet<(usize, bool)>,
                      next: &mut BTreeSet<NodeId>,
                      out: &mut BTreeSet<Alternative>,
                      now: &[NodeId],
                      later: Option<NodeId>| {
            let (mut t, mut l, mut n) = (todo.clone(), lits.clone(), next.clone());
            t.extend_from_slice(now);
            if let Some(x) = later {
                n.insert(x);
            }
            go(arena, &mut t, &mut l, &mut n, out);
        };
        match arena.node(f) {
            Node::True => go(arena, todo, lits, next, out),
            Node::False => {}
            Node::Lit(i, pos) => {
                if lits.contains(&(i, !pos)) {
                    return;
                }
                lits.insert((i, pos));
                go(arena, todo, lits, next, out);
            }
            Node::And(a, b) => {
                todo.push(a);
                todo.push(b);
                go(arena, todo, lits, next, out);
            }
            Node::Or(a, b) => {
                branch(todo, lits, next, out, &[a], None);
                branch(todo, lits, next, out, &[b], None);
            }
            Node::Until(a, b) => {
                branch(todo, lits, next, out, &[b], None);
                branch(todo, lits, next, out, &[a], Some(f));
            }
            Node::Release(a, b) => {
                branch(todo, lits, next, out, &[a, b], None);
                branch(todo, lits, next, out, &[b], Some(f));
            }
        }
    }
    let mut out = BTreeSet::new();
    go(
        arena,
        &mut obligations.to_vec(),
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        &mut out,
    );
    out.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuchiEdge {
    /// `(literal, polarity)` constraints on the letter read.
    pub guard: Vec<(usize, bool)>,
    pub target: usize,
    /// Bit `j` set iff the edge belongs to acceptance set `j`.
    pub acceptance: u128,
}

/// Generalized Büchi automaton with transition-based acceptance. A run is
/// accepting iff it uses edges of every acceptance set infinitely often. The
/// automaton is not completed: a letter without an enabled edge rejects.
#[derive(Clone, Debug)]
pub struct BuchiAutomaton {
    /// Literal names; letters are truth assignments to these.
    pub literals: Vec<String>,
    /// Printed obligation set of each state.
    pub states: Vec<String>,
    pub initial: usize,
    pub edges: Vec<Vec<BuchiEdge>>,
    pub num_acceptance: usize,
}

impl BuchiAutomaton {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Whether the ultimately periodic word `stem . cycle^omega` is accepted;
    /// letters list the literals that hold.
    pub fn accepts_lasso(&self, stem: &[BTreeSet<String>], cycle: &[BTreeSet<String>]) -> bool {
        assert!(!cycle.is_empty(), "a lasso needs a non-empty cycle");
        let word: Vec<&BTreeSet<String>> = stem.iter().chain(cycle).collect();
        let len = word.len();
        let succ = |i: usize| if i + 1 < len { i + 1 } else { stem.len() };
        let enabled = |e: &BuchiEdge, i: usize| {
            e.guard
                .iter()
                .all(|&(l, pos)| word[i].contains(&self.literals[l]) == pos)
        };
        // Product of automaton states with word positions.
        let idx = |q: usize, i: usize| q * len + i;
        let n = self.num_states() * len;
        let mut succs: Vec<Vec<(usize, u128)>> = vec![Vec::new(); n];
        for q in 0..self.num_states() {
            for i in 0..len {
                for e in &self.edges[q] {
                    if enabled(e, i) {
                        succs[idx(q, i)].push((idx(e.target, succ(i)), e.acceptance));
                    }
                }
            }
        }
        let all = full_mask(self.num_acceptance);
        let (comp, ncomp) = crate::graph::tarjan_scc(n, |v| succs[v].iter().map(|&(w, _)| w));
        let mut marks = vec![0u128; ncomp];
        let mut nontrivial = vec![false; ncomp];
        for v in 0..n {
            for &(w, m) in &succs[v] {
                if comp[v] == comp[w] {
                    nontrivial[comp[v]] = true;
                    marks[comp[v]] |= m;
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![idx(self.initial, 0)];
        seen[stack[0]] = true;
        while let Some(v) = stack.pop() {
            if nontrivial[comp[v]] && marks[comp[v]] & all == all {
                return true;
            }
            for &(w, _) in &succs[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }
}

impl fmt::Display for BuchiAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, name) in self.states.iter().enumerate() {
            let init = if q == self.initial { " (initial)" } else { "" };
            writeln!(f, "state {q}{init}: {{{name}}}")?;
            for e in &self.edges[q] {
                let guard: Vec<String> = e
                    .guard
                    .iter()
                    .map(|&(l, pos)| format!("{}{}", if pos { "" } else { "!" }, self.literals[l]))
                    .collect();
                writeln!(
                    f,
                    "  [{}] -> {} acc {:b}",
                    guard.join(" & "),
                    e.target,
                    e.acceptance
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn full_mask(bits: usize) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// Until-nodes reachable from `root`, in a fixed order.
fn until_nodes(arena: &Arena, root: NodeId) -> Vec<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        match arena.node(id) {
            Node::And(a, b) | Node::Or(a, b) | Node::Release(a, b) => stack.extend([a, b]),
            Node::Until(a, b) => {
                out.push(id);
                stack.extend([a, b]);
            }
            _ => {}
        }
    }
    out.sort_unstable();
    out
}

/// Builds the automaton for NNF root `root`; literal names are only used for display.
pub(crate) fn translate(arena: &Arena, root: NodeId, literals: Vec<String>) -> Result<BuchiAutomaton> {
    let untils = until_nodes(arena, root);
    if untils.len() > 128 {
        return Err(Error::BoundExceeded(format!(
            "{} until-subformulas; at most 128 acceptance sets are supported",
            untils.len()
        )));
    }
    let mut index: HashMap<Vec<NodeId>, usize> = HashMap::new();
    let mut states: Vec<Vec<NodeId>> = Vec::new();
    let mut edges: Vec<Vec<BuchiEdge>> = Vec::new();
    let start = vec![root];
    index.insert(start.clone(), 0);
    states.push(start);
    let mut i = 0;
    while i < states.len() {
        let mut out = Vec::new();
        for alt in expand(arena, &states[i]) {
            let target = match index.get(&alt.next) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    index.insert(alt.next.clone(), t);
                    states.push(alt.next.clone());
                    t
                }
            };
            let mut acceptance = 0u128;
            for (j, u) in untils.iter().enumerate() {
                if alt.next.binary_search(u).is_err() {
                    acceptance |= 1 << j;
                }
            }
            out.push(BuchiEdge {
                guard: alt.lits,
                target,
                acceptance,
            });
        }
        edges.push(out);
        i += 1;
    }
    let names = states
        .iter()
        .map(|s| {
            let mut text = String::new();
            for (j, &id) in s.iter().enumerate() {
                if j > 0 {
                    text.push_str(", ");
                }
                arena.show(id, &literals, &mut text);
            }
            text
        })
        .collect();
    Ok(BuchiAutomaton {
        literals,
        states: names,
        initial: 0,
        edges,
        num_acceptance: untils.len(),
    })
}

/// Translates a path formula without path quantifiers; its atoms become the literals.
pub fn ltl_to_buchi(f: &Expr<String>) -> Result<BuchiAutomaton> {
    let mut arena = Arena::default();
    let mut literals: Vec<String> = Vec::new();
    let root = arena.build(f, false, &mut |e| match e {
        Expr::Atom(a) => Ok(match literals.iter().position(|l| l == a) {
            Some(i) => i,
            None => {
                literals.push(a.clone());
                literals.len() - 1
            }
        }),
        _ => Err(Error::Semantic(
            "automaton translation needs a formula without path quantifiers".into(),
        )),
    })?;
    translate(&arena, root, literals)
}
