//! Vertex markings, the quotient of a topology by equal markings, and
//! equivalence checks between tracked topologies.
//!
//! A depth-0 marking is the set of tuple positions a vertex carries. A
//! depth-`d` marking of a vertex off the tuple is the set of destuttered
//! depth-`(d-1)` marking words along paths that reach a tuple vertex without
//! passing through one earlier; a tuple vertex gets the one-letter word of its
//! own depth-`(d-1)` marking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::tarjan_scc;
use crate::lts::{Lts, StateId, Universe};
use crate::topology::{FamilyKind, IndexTuple, Topology};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marking {
    /// Tuple positions carried by the vertex (empty off the tuple).
    Base(BTreeSet<usize>),
    /// Destuttered words over markings of depth `depth - 1`.
    Words {
        depth: usize,
        words: BTreeSet<Vec<Arc<Marking>>>,
    },
}

impl Marking {
    pub fn depth(&self) -> usize {
        match self {
            Marking::Base(_) => 0,
            Marking::Words { depth, .. } => *depth,
        }
    }

    pub fn words(&self) -> Option<&BTreeSet<Vec<Arc<Marking>>>> {
        match self {
            Marking::Base(_) => None,
            Marking::Words { words, .. } => Some(words),
        }
    }

    /// Depth-tagged, sorted serialization; equal markings serialize identically.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Marking::Base(set) => {
                let items: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                let _ = write!(out, "{{{}}}", items.join(","));
            }
            Marking::Words { depth, words } => {
                let _ = write!(out, "d{depth}[");
                for (i, w) in words.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('<');
                    for (j, letter) in w.iter().enumerate() {
                        if j > 0 {
                            out.push(' ');
                        }
                        letter.write_canonical(out);
                    }
                    out.push('>');
                }
                out.push(']');
            }
        }
    }

    /// The order used by the chain property: at depth 0 a non-empty position
    /// set lies below the empty set; above depth 0 it is [`suffix_leq`].
    pub fn leq(&self, other: &Marking) -> bool {
        match (self, other) {
            (Marking::Base(a), Marking::Base(b)) => a == b || (b.is_empty() && !a.is_empty()),
            (Marking::Words { words: a, depth: da }, Marking::Words { words: b, depth: db }) => {
                da == db && suffix_leq(a, b)
            }
            _ => false,
        }
    }

    /// Every word is a strictly decreasing chain of markings one level down.
    pub fn is_chain_marking(&self) -> bool {
        let Some(words) = self.words() else { return true };
        words.iter().all(|w| {
            !w.is_empty()
                && w.windows(2)
                    .all(|p| p[0] != p[1] && p[1].leq(&p[0]))
        })
    }

    /// A short stable digest for captions.
    pub fn digest(&self) -> String {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.canonical().hash(&mut h);
        format!("{:08x}", h.finish() as u32)
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Serialize for Marking {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

/// Every word of `xs` is a (not necessarily proper) suffix of some word of `ys`.
pub fn suffix_leq<T: PartialEq>(xs: &BTreeSet<Vec<T>>, ys: &BTreeSet<Vec<T>>) -> bool {
    xs.iter().all(|x| ys.iter().any(|y| y.ends_with(x)))
}

/// Interned markings of one depth.
struct Level {
    /// Per-vertex marking id.
    of_vertex: Vec<usize>,
    /// Word sets by id (empty for depth 0).
    words: Vec<BTreeSet<Vec<usize>>>,
    /// Position sets by id (depth 0 only).
    bases: Vec<BTreeSet<usize>>,
}

impl Level {
    fn leq(&self, depth: usize, a: usize, b: usize) -> bool {
        if depth == 0 {
            let (x, y) = (&self.bases[a], &self.bases[b]);
            x == y || (y.is_empty() && !x.is_empty())
        } else {
            suffix_leq(&self.words[a], &self.words[b])
        }
    }
}

/// Per-vertex markings of one depth.
#[derive(Clone, Debug)]
pub struct VertexMarkings {
    depth: usize,
    by_vertex: Vec<Arc<Marking>>,
}

impl VertexMarkings {
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Marking of vertex `v` (1-based).
    pub fn get(&self, v: usize) -> &Arc<Marking> {
        &self.by_vertex[v - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Arc<Marking>)> {
        self.by_vertex.iter().enumerate().map(|(i, m)| (i + 1, m))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, String> =
            self.iter().map(|(v, m)| (v.to_string(), m.canonical())).collect();
        serde_json::json!({ "depth": self.depth, "markings": map })
    }
}

fn compute_levels(g: &Topology, tuple: &[usize], d: usize) -> Vec<Level> {
    let n = g.n();
    let in_tuple: Vec<bool> = (1..=n).map(|v| tuple.contains(&v)).collect();
    let succ: Vec<Vec<usize>> = (1..=n).map(|v| g.successors(v).collect()).collect();

    let mut base_ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut bases = Vec::new();
    let mut of_vertex = Vec::with_capacity(n);
    for v in 1..=n {
        let set: BTreeSet<usize> = tuple
            .iter()
            .enumerate()
            .filter(|&(_, &x)| x == v)
            .map(|(i, _)| i + 1)
            .collect();
        let next_id = bases.len();
        let id = *base_ids.entry(set.clone()).or_insert_with(|| {
            bases.push(set);
            next_id
        });
        of_vertex.push(id);
    }
    let mut levels = vec![Level {
        of_vertex,
        words: vec![BTreeSet::new(); bases.len()],
        bases,
    }];

    for depth in 1..=d {
        let prev = levels.last().expect("depth 0 exists");
        let mut ids: HashMap<BTreeSet<Vec<usize>>, usize> = HashMap::new();
        let mut words_by_id: Vec<BTreeSet<Vec<usize>>> = Vec::new();
        let mut of_vertex = Vec::with_capacity(n);
        for v in 0..n {
            let own = prev.of_vertex[v];
            let mut result: BTreeSet<Vec<usize>> = BTreeSet::new();
            if in_tuple[v] {
                result.insert(vec![own]);
            } else {
                let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
                let mut queue = VecDeque::from([(v, vec![own])]);
                seen.insert((v, vec![own]));
                while let Some((u, word)) = queue.pop_front() {
                    for &w1 in &succ[u] {
                        let w = w1 - 1;
                        let letter = prev.of_vertex[w];
                        let mut next = word.clone();
                        if next.last() != Some(&letter) {
                            assert!(
                                !next.contains(&letter),
                                "marking word repeats a letter: the chain property failed"
                            );
                            next.push(letter);
                        }
                        if in_tuple[w] {
                            result.insert(next);
                        } else if seen.insert((w, next.clone())) {
                            queue.push_back((w, next));
                        }
                    }
                }
            }
            for word in &result {
                for p in word.windows(2) {
                    assert!(
                        p[0] != p[1] && prev.leq(depth - 1, p[1], p[0]),
                        "marking word is not a strictly decreasing chain"
                    );
                }
            }
            let next_id = words_by_id.len();
            let id = *ids.entry(result.clone()).or_insert_with(|| {
                words_by_id.push(result);
                next_id
            });
            of_vertex.push(id);
        }
        levels.push(Level {
            of_vertex,
            words: words_by_id,
            bases: Vec::new(),
        });
    }
    levels
}

fn materialize(levels: &[Level], d: usize) -> VertexMarkings {
    let mut arcs: Vec<Arc<Marking>> = levels[0]
        .bases
        .iter()
        .map(|b| Arc::new(Marking::Base(b.clone())))
        .collect();
    for (depth, level) in levels.iter().enumerate().take(d + 1).skip(1) {
        arcs = level
            .words
            .iter()
            .map(|ws| {
                Arc::new(Marking::Words {
                    depth,
                    words: ws
                        .iter()
                        .map(|w| w.iter().map(|&i| arcs[i].clone()).collect())
                        .collect(),
                })
            })
            .collect();
    }
    VertexMarkings {
        depth: d,
        by_vertex: levels[d].of_vertex.iter().map(|&i| arcs[i].clone()).collect(),
    }
}

/// Markings of depth `d` for every vertex.
///
/// Panics if a computed word is not a strictly decreasing chain, which would
/// indicate a broken invariant rather than bad input.
pub fn mark(g: &Topology, tuple: &IndexTuple, d: usize) -> VertexMarkings {
    mark_positions(g, tuple.as_slice(), d)
}

pub(crate) fn mark_positions(g: &Topology, tuple: &[usize], d: usize) -> VertexMarkings {
    materialize(&compute_levels(g, tuple, d), d)
}

/// Markings of every depth `0..=d`.
pub fn mark_all_depths(g: &Topology, tuple: &IndexTuple, d: usize) -> Vec<VertexMarkings> {
    let levels = compute_levels(g, tuple.as_slice(), d);
    (0..=d).map(|j| materialize(&levels, j)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContractionClass {
    pub marking: Arc<Marking>,
    pub members: Vec<usize>,
    /// Tuple positions carried by the members.
    pub label: BTreeSet<usize>,
}

/// Quotient of a tracked topology by equal markings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Contraction {
    pub depth: usize,
    pub arity: usize,
    /// Classes sorted by marking.
    pub classes: Vec<ContractionClass>,
    /// Class edges; `(c, c)` iff some edge joins two members of `c`.
    pub edges: BTreeSet<(usize, usize)>,
    pub initial: usize,
}

/// Contraction up to the number of steps spent inside a class: every class
/// off the tuple with an outgoing edge gets a self-loop.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ContractionShape {
    pub markings: Vec<Arc<Marking>>,
    pub labels: Vec<BTreeSet<usize>>,
    pub edges: BTreeSet<(usize, usize)>,
    pub initial: usize,
}

impl ContractionShape {
    /// The same shape with the initial class forgotten.
    pub fn without_initial(&self) -> ContractionShape {
        ContractionShape {
            initial: usize::MAX,
            ..self.clone()
        }
    }

    pub fn num_classes(&self) -> usize {
        self.markings.len()
    }
}

impl Contraction {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.members.contains(&v))
            .expect("every vertex has a class")
    }

    pub fn shape(&self) -> ContractionShape {
        let mut edges = self.edges.clone();
        for (i, c) in self.classes.iter().enumerate() {
            let has_out = self.edges.iter().any(|&(a, _)| a == i);
            if c.label.is_empty() && has_out {
                edges.insert((i, i));
            }
        }
        ContractionShape {
            markings: self.classes.iter().map(|c| c.marking.clone()).collect(),
            labels: self.classes.iter().map(|c| c.label.clone()).collect(),
            edges,
            initial: self.initial,
        }
    }

    /// Graph LTS of the quotient: class `c` is state `c`, labels are positions.
    pub fn to_lts(&self) -> Lts {
        Lts::new(
            self.classes
                .iter()
                .map(|c| {
                    let m: Vec<String> = c.members.iter().map(|v| v.to_string()).collect();
                    format!("{{{}}}", m.join(","))
                })
                .collect(),
            vec![self.initial],
            vec!["edge".into()],
            self.edges.iter().map(|&(a, b)| (a, 0, b)).collect(),
            self.classes
                .iter()
                .map(|c| c.label.iter().map(|i| i.to_string()).collect())
                .collect(),
        )
        .expect("contraction is a well-formed LTS")
        .with_universe(Universe::Explicit(
            (1..=self.arity).map(|i| i.to_string()).collect(),
        ))
    }

    /// Non-loop edges form one directed cycle through all classes, and
    /// self-loops sit exactly on classes with at least two members.
    pub fn is_ring_with_hub_loops(&self) -> bool {
        let m = self.num_classes();
        for (i, c) in self.classes.iter().enumerate() {
            if self.edges.contains(&(i, i)) != (c.members.len() >= 2) {
                return false;
            }
        }
        let cross: Vec<(usize, usize)> =
            self.edges.iter().copied().filter(|(a, b)| a != b).collect();
        if m == 1 {
            return cross.is_empty();
        }
        if cross.len() != m {
            return false;
        }
        let mut next = vec![usize::MAX; m];
        for &(a, b) in &cross {
            if next[a] != usize::MAX {
                return false;
            }
            next[a] = b;
        }
        let mut cur = 0;
        for _ in 0..m {
            cur = next[cur];
            if cur == usize::MAX {
                return false;
            }
        }
        cur == 0 && {
            let mut seen = BTreeSet::new();
            let mut c = 0;
            for _ in 0..m {
                seen.insert(c);
                c = next[c];
            }
            seen.len() == m
        }
    }
}

/// Quotient of the graph LTS by equal depth-`d` markings.
pub fn contract(g: &Topology, tuple: &IndexTuple, d: usize) -> Contraction {
    contract_positions(g, tuple.as_slice(), d)
}

pub(crate) fn contract_positions(g: &Topology, tuple: &[usize], d: usize) -> Contraction {
    let marks = mark_positions(g, tuple, d);
    let mut by_marking: BTreeMap<Arc<Marking>, Vec<usize>> = BTreeMap::new();
    for (v, m) in marks.iter() {
        by_marking.entry(m.clone()).or_default().push(v);
    }
    let mut class_of = vec![0usize; g.n() + 1];
    let classes: Vec<ContractionClass> = by_marking
        .into_iter()
        .enumerate()
        .map(|(i, (marking, members))| {
            for &v in &members {
                class_of[v] = i;
            }
            let label = tuple
                .iter()
                .enumerate()
                .filter(|&(_, x)| members.contains(x))
                .map(|(i, _)| i + 1)
                .collect();
            ContractionClass {
                marking,
                members,
                label,
            }
        })
        .collect();
    let edges = g
        .edges()
        .iter()
        .map(|&(a, b)| (class_of[a], class_of[b]))
        .collect();
    Contraction {
        depth: d,
        arity: tuple.len(),
        classes,
        edges,
        initial: class_of[g.initial()],
    }
}

/// Equal contraction shapes, including the marking of the initial class.
pub fn equivalent_graphs(
    g: &Topology,
    tuple: &IndexTuple,
    g2: &Topology,
    tuple2: &IndexTuple,
    d: usize,
) -> Result<bool> {
    if tuple.len() != tuple2.len() {
        return Err(invalid(format!(
            "tuples have different lengths ({} and {})",
            tuple.len(),
            tuple2.len()
        )));
    }
    Ok(contract(g, tuple, d).shape() == contract(g2, tuple2, d).shape())
}

/// All shapes of one family, size by size.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionCensus {
    pub family: FamilyKind,
    pub k: usize,
    pub d: usize,
    pub size_bound: usize,
    pub per_size: BTreeMap<usize, BTreeSet<ContractionShape>>,
    /// Least size from which the shape set stays constant up to `size_bound`.
    pub stable_from: usize,
    /// Smallest `(size, tuple)` realizing each shape.
    pub realizers: BTreeMap<ContractionShape, (usize, Vec<usize>)>,
}

impl ContractionCensus {
    /// True iff the constant run has at least two sizes.
    pub fn stabilized(&self) -> bool {
        self.stable_from < self.size_bound
    }

    /// Shape counts per size with the initial class forgotten.
    pub fn shape_counts_ignoring_initial(&self) -> BTreeMap<usize, usize> {
        self.per_size
            .iter()
            .map(|(&n, set)| {
                let s: BTreeSet<ContractionShape> =
                    set.iter().map(ContractionShape::without_initial).collect();
                (n, s.len())
            })
            .collect()
    }
}

/// All ordered `k`-tuples of distinct vertices of `1..=n`, in lexicographic order.
pub fn distinct_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in 1..=n {
            if !cur.contains(&v) {
                cur.push(v);
                go(n, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Least `n0` such that `sets[n]` is constant for `n0 <= n <= last`.
pub(crate) fn stable_from<T: PartialEq>(sets: &BTreeMap<usize, T>) -> usize {
    let mut iter = sets.iter().rev();
    let Some((&last_n, last)) = iter.next() else { return 0 };
    let mut from = last_n;
    for (&n, s) in iter {
        if s != last {
            break;
        }
        from = n;
    }
    from
}

pub fn enumerate_contractions(
    family: FamilyKind,
    k: usize,
    d: usize,
    size_bound: usize,
) -> Result<ContractionCensus> {
    if size_bound < k {
        return Err(invalid("size bound must be at least k"));
    }
    let mut per_size = BTreeMap::new();
    let mut realizers: BTreeMap<ContractionShape, (usize, Vec<usize>)> = BTreeMap::new();
    for n in family.min_size().max(k)..=size_bound {
        let g = family.make(n)?;
        let mut set = BTreeSet::new();
        for tuple in distinct_tuples(n, k) {
            let shape = contract_positions(&g, &tuple, d).shape();
            realizers.entry(shape.clone()).or_insert((n, tuple));
            set.insert(shape);
        }
        per_size.insert(n, set);
    }
    Ok(ContractionCensus {
        family,
        k,
        d,
        size_bound,
        stable_from: stable_from(&per_size),
        per_size,
        realizers,
    })
}

/// Divergence-sensitive stuttering bisimilarity of the initial states.
///
/// Partition refinement on the disjoint union, starting from equal labels;
/// a block is split by the set of other blocks reachable through a path
/// inside the block, and by whether an infinite path can stay in the block.
pub fn stutter_bisim_equivalent(a: &Lts, b: &Lts) -> bool {
    let na = a.num_states();
    let n = na + b.num_states();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            if s < na {
                a.successors(s).iter().map(|&(_, t)| t).collect()
            } else {
                b.successors(s - na).iter().map(|&(_, t)| t + na).collect()
            }
        })
        .collect();
    let label = |s: usize| if s < na { a.label(s) } else { b.label(s - na) };

    let mut ids: BTreeMap<&BTreeSet<String>, usize> = BTreeMap::new();
    let mut block: Vec<usize> = (0..n)
        .map(|s| {
            let next = ids.len();
            *ids.entry(label(s)).or_insert(next)
        })
        .collect();
    let mut nblocks = ids.len();

    loop {
        let sigs = signatures(&succ, &block);
        let mut renumber: BTreeMap<(usize, &Signature), usize> = BTreeMap::new();
        let mut next_block = vec![0; n];
        for s in 0..n {
            let len = renumber.len();
            next_block[s] = *renumber.entry((block[s], &sigs[s])).or_insert(len);
        }
        let count = renumber.len();
        block = next_block;
        if count == nblocks {
            break;
        }
        nblocks = count;
    }

    let init_a: BTreeSet<usize> = a.initial().iter().map(|&s| block[s]).collect();
    let init_b: BTreeSet<usize> = b.initial().iter().map(|&s| block[s + na]).collect();
    init_a == init_b
}

type Signature = (BTreeSet<usize>, bool);

fn signatures(succ: &[Vec<usize>], block: &[usize]) -> Vec<Signature> {
    let n = succ.len();
    // inert edges stay inside a block
    let inert = |s: usize| succ[s].iter().copied().filter(move |&t| block[t] == block[s]);
    let (comp, ncomp) = tarjan_scc(n, |s| inert(s).collect::<Vec<_>>());
    let mut cyclic = vec![false; ncomp];
    for s in 0..n {
        for t in inert(s) {
            if comp[t] == comp[s] {
                cyclic[comp[s]] = true;
            }
        }
    }
    // components come out in reverse topological order of the inert graph
    let mut members: Vec<Vec<StateId>> = vec![Vec::new(); ncomp];
    for s in 0..n {
        members[comp[s]].push(s);
    }
    let mut exits: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    let mut diverges = cyclic.clone();
    for c in 0..ncomp {
        let mut ex = BTreeSet::new();
        let mut div = diverges[c];
        for &s in &members[c] {
            for &t in &succ[s] {
                if block[t] != block[s] {
                    ex.insert(block[t]);
                } else if comp[t] != c {
                    ex.extend(exits[comp[t]].iter().copied());
                    div |= diverges[comp[t]];
                }
            }
        }
        exits[c] = ex;
        diverges[c] = div;
    }
    (0..n)
        .map(|s| (exits[comp[s]].clone(), diverges[comp[s]]))
        .collect()
}
