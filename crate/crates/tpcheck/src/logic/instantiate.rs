use std::collections::BTreeSet;

use super::ast::{Expr, Formula, QuantKind};
use crate::topology::Topology;

/// A closed body to be checked on the projection of the system onto `tuple`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leaf {
    /// Vertex bound to each prefix variable, in prefix order; may repeat.
    pub tuple: Vec<usize>,
    pub body: Expr<String>,
}

/// Boolean combination of leaf checks produced by expanding the quantifier prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Plan {
    Const(bool),
    All(Vec<Plan>),
    Any(Vec<Plan>),
    Leaf(Leaf),
}

impl Plan {
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match self {
            Plan::Const(_) => {}
            Plan::All(ps) | Plan::Any(ps) => ps.iter().for_each(|p| p.collect(out)),
            Plan::Leaf(l) => out.push(l),
        }
    }

    /// Distinct leaves, sorted.
    pub fn distinct_leaves(&self) -> BTreeSet<&Leaf> {
        self.leaves().into_iter().collect()
    }

    pub fn evaluate(&self, leaf: &mut impl FnMut(&Leaf) -> bool) -> bool {
        match self {
            Plan::Const(b) => *b,
            Plan::All(ps) => ps.iter().all(|p| p.evaluate(leaf)),
            Plan::Any(ps) => ps.iter().any(|p| p.evaluate(leaf)),
            Plan::Leaf(l) => leaf(l),
        }
    }

    /// A leaf whose falsity makes the whole plan false: the first false branch
    /// under every universal node. `None` if the plan holds, or if it fails only
    /// because an existential has no true branch.
    pub fn refuting_leaf<'a>(&'a self, leaf: &mut impl FnMut(&Leaf) -> bool) -> Option<&'a Leaf> {
        match self {
            Plan::Leaf(l) if !leaf(l) => Some(l),
            Plan::All(ps) => ps
                .iter()
                .find(|p| !p.evaluate(leaf))
                .and_then(|p| p.refuting_leaf(leaf)),
            _ => None,
        }
    }
}

/// Expands the quantifier prefix over the vertices of `g`.
///
/// Empty ranges give `Const(true)` under a universal and `Const(false)` under an
/// existential.
pub fn instantiate(f: &Formula, g: &Topology) -> Plan {
    let mut tuple = Vec::with_capacity(f.arity());
    expand(f, g, &mut tuple)
}

fn expand(f: &Formula, g: &Topology, tuple: &mut Vec<usize>) -> Plan {
    let depth = tuple.len();
    let Some(q) = f.prefix.get(depth) else {
        return Plan::Leaf(Leaf {
            tuple: tuple.clone(),
            body: f.close_body(tuple),
        });
    };
    let range: Vec<usize> = match &q.in_edges_of {
        Some(y) => {
            let src = tuple[f.position_of(y).expect("validated prefix") - 1];
            g.successors(src).collect()
        }
        None => g.vertices().collect(),
    };
    let mut children = Vec::new();
    for v in range {
        if q.distinct && tuple.contains(&v) {
            continue;
        }
        tuple.push(v);
        children.push(expand(f, g, tuple));
        tuple.pop();
    }
    match (q.kind, children.is_empty()) {
        (QuantKind::Forall, true) => Plan::Const(true),
        (QuantKind::Exists, true) => Plan::Const(false),
        (QuantKind::Forall, false) => Plan::All(children),
        (QuantKind::Exists, false) => Plan::Any(children),
    }
}
