//! Topologies (directed graphs with an initial vertex), parameterized
//! families, and the graph LTS that tracks a tuple of distinguished vertices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lts::{Lts, Universe};
use crate::template::{ValidationReport, Violation};

pub type Edge = (usize, usize);

/// Direction labels of an edge as `(send direction, receive direction)` pairs.
/// More than one pair on an edge stands for parallel edges.
pub type DirectionPairs = BTreeSet<(String, String)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<Edge>,
    initial: usize,
    snd_labels: Option<BTreeMap<Edge, String>>,
    rcv_labels: Option<BTreeMap<Edge, String>>,
    extra_pairs: BTreeMap<Edge, DirectionPairs>,
}

/// JSON form of a topology. Vertices are `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub n: usize,
    pub edges: Vec<Edge>,
    #[serde(default = "one")]
    pub initial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snd_labels: Option<Vec<(usize, usize, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcv_labels: Option<Vec<(usize, usize, String)>>,
    /// Additional `(from, to, snd, rcv)` labelings standing for parallel edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parallel_labels: Vec<(usize, usize, String, String)>,
}

fn one() -> usize {
    1
}

impl Topology {
    /// An unlabeled topology; nothing is checked (see [`Topology::validate`]).
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>, initial: usize) -> Self {
        Topology {
            n,
            edges: edges.into_iter().collect(),
            initial,
            snd_labels: None,
            rcv_labels: None,
            extra_pairs: BTreeMap::new(),
        }
    }

    pub fn with_directions(
        mut self,
        snd: BTreeMap<Edge, String>,
        rcv: BTreeMap<Edge, String>,
    ) -> Self {
        self.snd_labels = Some(snd);
        self.rcv_labels = Some(rcv);
        self
    }

    pub fn with_parallel_pair(mut self, e: Edge, snd: &str, rcv: &str) -> Self {
        self.extra_pairs
            .entry(e)
            .or_default()
            .insert((snd.to_string(), rcv.to_string()));
        self
    }

    pub fn with_initial(mut self, initial: usize) -> Self {
        self.initial = initial;
        self
    }

    pub fn from_spec(spec: &TopologySpec) -> Result<Self> {
        let to_map = |xs: &Option<Vec<(usize, usize, String)>>| -> Result<Option<BTreeMap<Edge, String>>> {
            let Some(xs) = xs else { return Ok(None) };
            let mut m = BTreeMap::new();
            for (v, w, d) in xs {
                if m.insert((*v, *w), d.clone()).is_some() {
                    return Err(invalid(format!("edge ({v},{w}) labeled twice")));
                }
            }
            Ok(Some(m))
        };
        let mut t = Topology::new(spec.n, spec.edges.iter().copied(), spec.initial);
        t.snd_labels = to_map(&spec.snd_labels)?;
        t.rcv_labels = to_map(&spec.rcv_labels)?;
        if !spec.parallel_labels.is_empty() && !t.is_direction_labeled() {
            t.snd_labels = Some(BTreeMap::new());
            t.rcv_labels = Some(BTreeMap::new());
        }
        for (v, w, s, r) in &spec.parallel_labels {
            t = t.with_parallel_pair((*v, *w), s, r);
        }
        Ok(t)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TopologySpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> TopologySpec {
        let list = |m: &Option<BTreeMap<Edge, String>>| {
            m.as_ref().map(|m| {
                m.iter()
                    .map(|(&(v, w), d)| (v, w, d.clone()))
                    .collect::<Vec<_>>()
            })
        };
        TopologySpec {
            n: self.n,
            edges: self.edges.iter().copied().collect(),
            initial: self.initial,
            snd_labels: list(&self.snd_labels),
            rcv_labels: list(&self.rcv_labels),
            parallel_labels: self
                .extra_pairs
                .iter()
                .flat_map(|(&(v, w), ps)| ps.iter().map(move |(s, r)| (v, w, s.clone(), r.clone())))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn has_edge(&self, v: usize, w: usize) -> bool {
        self.edges.contains(&(v, w))
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((v, 0)..(v + 1, 0)).map(|&(_, w)| w)
    }

    pub fn is_direction_labeled(&self) -> bool {
        self.snd_labels.is_some() || self.rcv_labels.is_some()
    }

    /// All `(snd, rcv)` direction pairs carried by edge `e`.
    pub fn direction_pairs(&self, e: Edge) -> DirectionPairs {
        let mut pairs = self.extra_pairs.get(&e).cloned().unwrap_or_default();
        let s = self.snd_labels.as_ref().and_then(|m| m.get(&e));
        let r = self.rcv_labels.as_ref().and_then(|m| m.get(&e));
        if let (Some(s), Some(r)) = (s, r) {
            pairs.insert((s.clone(), r.clone()));
        }
        pairs
    }

    pub fn snd_directions_used(&self) -> BTreeSet<String> {
        self.edges
            .iter()
            .flat_map(|&e| self.direction_pairs(e).into_iter().map(|(s, _)| s))
            .collect()
    }

    pub fn rcv_directions_used(&self) -> BTreeSet<String> {
        self.edges
            .iter()
            .flat_map(|&e| self.direction_pairs(e).into_iter().map(|(_, r)| r))
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let mut push = |rule: &str, description: String, witness: Vec<String>| {
            v.push(Violation {
                rule: rule.into(),
                description,
                witness,
            })
        };
        let edge_name = |&(a, b): &Edge| format!("({a},{b})");
        if self.n == 0 {
            push("vertex-count", "a topology needs at least one vertex".into(), vec![]);
        }
        if !(1..=self.n).contains(&self.initial) {
            push(
                "initial",
                format!("initial vertex {} is not in 1..={}", self.initial, self.n),
                vec![self.initial.to_string()],
            );
        }
        for e in &self.edges {
            let (a, b) = *e;
            if !(1..=self.n).contains(&a) || !(1..=self.n).contains(&b) {
                push("range", "edge endpoint out of range".into(), vec![edge_name(e)]);
            }
            if a == b {
                push("self-loop", "self-loops are not allowed".into(), vec![edge_name(e)]);
            }
        }
        if self.is_direction_labeled() {
            let empty = BTreeMap::new();
            let snd = self.snd_labels.as_ref().unwrap_or(&empty);
            let rcv = self.rcv_labels.as_ref().unwrap_or(&empty);
            for e in &self.edges {
                let extra = self.extra_pairs.contains_key(e);
                if !snd.contains_key(e) && !extra {
                    push("snd-label", "edge has no send direction".into(), vec![edge_name(e)]);
                }
                if !rcv.contains_key(e) && !extra {
                    push("rcv-label", "edge has no receive direction".into(), vec![edge_name(e)]);
                }
                if snd.contains_key(e) != rcv.contains_key(e) && extra {
                    push(
                        "partial-label",
                        "edge has only one of its send/receive directions".into(),
                        vec![edge_name(e)],
                    );
                }
            }
            let labeled = snd.keys().chain(rcv.keys()).chain(self.extra_pairs.keys());
            for e in labeled.collect::<BTreeSet<_>>() {
                if !self.edges.contains(e) {
                    push("label-domain", "direction label on a non-edge".into(), vec![edge_name(e)]);
                }
            }
        }
        ValidationReport::from_violations(v)
    }

    /// Vertices reachable from `from` (inclusive).
    pub fn reachable_from(&self, from: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            for w in self.successors(v) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} initial={} edges=", self.n, self.initial)?;
        let edges: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{{{}}}", edges.join(","))
    }
}

/// `k` distinct vertices `g_1, ..., g_k` of a topology.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(entries: Vec<usize>, g: &Topology) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &v in &entries {
            if !(1..=g.n()).contains(&v) {
                return Err(invalid(format!("tuple entry {v} is not a vertex")));
            }
            if !seen.insert(v) {
                return Err(invalid(format!("tuple entry {v} is repeated")));
            }
        }
        Ok(IndexTuple(entries))
    }

    /// Parses `1,5` (empty text is the empty tuple).
    pub fn parse(text: &str, g: &Topology) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return IndexTuple::new(vec![], g);
        }
        let entries = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| invalid(format!("bad tuple entry `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        IndexTuple::new(entries, g)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The graph LTS: states are vertices (state `v - 1` is vertex `v`), the
/// only action is `edge`, and vertex `g_i` carries the label `i`.
pub fn graph_lts(g: &Topology, tuple: &IndexTuple) -> Lts {
    graph_lts_positions(g, tuple.as_slice())
}

/// Like [`graph_lts`] but tolerates repeated entries (a vertex then carries
/// every position at which it occurs).
pub(crate) fn graph_lts_positions(g: &Topology, tuple: &[usize]) -> Lts {
    let mut labels = vec![BTreeSet::new(); g.n()];
    for (i, &v) in tuple.iter().enumerate() {
        labels[v - 1].insert((i + 1).to_string());
    }
    Lts::new(
        g.vertices().map(|v| v.to_string()).collect(),
        vec![g.initial() - 1],
        vec!["edge".into()],
        g.edges().iter().map(|&(v, w)| (v - 1, 0, w - 1)).collect(),
        labels,
    )
    .expect("validated topology yields a well-formed graph LTS")
    .with_universe(Universe::Explicit(
        (1..=tuple.len()).map(|i| i.to_string()).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Ring,
    Biring,
    Clique,
    Star,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::Ring,
        FamilyKind::Biring,
        FamilyKind::Clique,
        FamilyKind::Star,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Ring => "ring",
            FamilyKind::Biring => "biring",
            FamilyKind::Clique => "clique",
            FamilyKind::Star => "star",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "family",
                name: name.to_string(),
            })
    }

    pub fn min_size(self) -> usize {
        2
    }

    pub fn make(self, n: usize) -> Result<Topology> {
        match self {
            FamilyKind::Ring => make_ring(n),
            FamilyKind::Biring => make_biring(n),
            FamilyKind::Clique => make_clique(n),
            FamilyKind::Star => make_star(n),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_size(kind: FamilyKind, n: usize) -> Result<()> {
    if n < kind.min_size() {
        Err(invalid(format!(
            "{kind} needs at least {} vertices, got {n}",
            kind.min_size()
        )))
    } else {
        Ok(())
    }
}

fn next(v: usize, n: usize) -> usize {
    v % n + 1
}

/// Edges `(i, i+1)` and `(n, 1)`.
pub fn make_ring(n: usize) -> Result<Topology> {
    check_size(FamilyKind::Ring, n)?;
    Ok(Topology::new(n, (1..=n).map(|v| (v, next(v, n))), 1))
}

/// Clockwise edges `(i, i+1)` and counter-clockwise edges `(i+1, i)`, each
/// labeled `(cw, cw)` or `(ccw, ccw)`. For `n = 2` both edges carry both pairs.
pub fn make_biring(n: usize) -> Result<Topology> {
    check_size(FamilyKind::Biring, n)?;
    let mut snd = BTreeMap::new();
    let mut rcv = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut extra: Vec<(Edge, &str)> = Vec::new();
    for v in 1..=n {
        let w = next(v, n);
        for (e, dir) in [((v, w), "cw"), ((w, v), "ccw")] {
            edges.insert(e);
            match snd.entry(e) {
                std::collections::btree_map::Entry::Occupied(_) => extra.push((e, dir)),
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(dir.to_string());
                    rcv.insert(e, dir.to_string());
                }
            }
        }
    }
    let mut t = Topology::new(n, edges, 1).with_directions(snd, rcv);
    for (e, dir) in extra {
        t = t.with_parallel_pair(e, dir, dir);
    }
    Ok(t)
}

pub fn make_clique(n: usize) -> Result<Topology> {
    check_size(FamilyKind::Clique, n)?;
    let edges = (1..=n).flat_map(|v| (1..=n).filter(move |&w| w != v).map(move |w| (v, w)));
    Ok(Topology::new(n, edges, 1))
}

/// Hub vertex 1 with edges both ways to every leaf; the hub is initial.
pub fn make_star(n: usize) -> Result<Topology> {
    check_size(FamilyKind::Star, n)?;
    let edges = (2..=n).flat_map(|w| [(1, w), (w, 1)]);
    Ok(Topology::new(n, edges, 1))
}

/// A path `1 -> ... -> tail` leading into a ring of `cycle` vertices.
/// Intended for tests.
pub fn make_lasso(cycle: usize, tail: usize) -> Result<Topology> {
    if cycle < 2 {
        return Err(invalid("lasso cycle needs at least 2 vertices"));
    }
    let n = cycle + tail;
    let mut edges: Vec<Edge> = (1..=tail).map(|v| (v, v + 1)).collect();
    for i in 0..cycle {
        let v = tail + 1 + i;
        let w = tail + 1 + (i + 1) % cycle;
        edges.push((v, w));
    }
    Ok(Topology::new(n, edges, 1))
}

/// Parses `ring:6`, `biring:5`, `clique:4` or `star:4`.
pub fn parse_family_shorthand(text: &str) -> Result<Topology> {
    let (kind, size) = text
        .split_once(':')
        .ok_or_else(|| invalid(format!("expected <family>:<size>, got `{text}`")))?;
    let n: usize = size
        .parse()
        .map_err(|_| invalid(format!("bad family size `{size}`")))?;
    FamilyKind::parse(kind)?.make(n)
}

/// A random simple digraph on `n` vertices; each ordered pair is an edge with
/// probability `density`. With `connected_from_initial`, a random spanning
/// arborescence rooted at vertex 1 is added first.
pub fn random_topology<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
    connected_from_initial: bool,
) -> Topology {
    let mut edges = BTreeSet::new();
    if connected_from_initial {
        for v in 2..=n {
            let parent = rng.gen_range(1..v);
            edges.insert((parent, v));
        }
    }
    for v in 1..=n {
        for w in 1..=n {
            if v != w && rng.gen_bool(density) {
                edges.insert((v, w));
            }
        }
    }
    Topology::new(n, edges, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_example() {
        let r = make_ring(3).unwrap();
        assert_eq!(r.edges(), &BTreeSet::from([(1, 2), (2, 3), (3, 1)]));
        assert_eq!(r.initial(), 1);
    }

    #[test]
    fn clique_example() {
        let c = make_clique(3).unwrap();
        assert_eq!(c.edges().len(), 6);
        assert!(c.edges().iter().all(|(a, b)| a != b));
    }

    #[test]
    fn biring_example() {
        let b = make_biring(3).unwrap();
        assert_eq!(b.edges().len(), 6);
        for &e in b.edges() {
            let pairs = b.direction_pairs(e);
            assert_eq!(pairs.len(), 1);
            let (s, r) = pairs.iter().next().unwrap();
            assert!(s == "cw" || s == "ccw");
            assert_eq!(s, r);
        }
        assert_eq!(b.direction_pairs((1, 2)), BTreeSet::from([("cw".into(), "cw".into())]));
        assert_eq!(b.direction_pairs((1, 3)), BTreeSet::from([("ccw".into(), "ccw".into())]));
        let b2 = make_biring(2).unwrap();
        assert_eq!(b2.edges().len(), 2);
        assert_eq!(b2.direction_pairs((1, 2)).len(), 2);
        assert!(b2.validate().ok);
    }

    #[test]
    fn star_shape() {
        let s = make_star(4).unwrap();
        assert_eq!(s.edges().len(), 6);
        assert!(s.has_edge(1, 3) && s.has_edge(3, 1) && !s.has_edge(2, 3));
    }

    #[test]
    fn families_validate() {
        for kind in FamilyKind::ALL {
            assert!(kind.make(1).is_err());
            for n in 2..=9 {
                let g = kind.make(n).unwrap();
                assert!(g.validate().ok, "{kind} {n}");
            }
        }
    }

    #[test]
    fn validation_flags() {
        let g = Topology::new(3, [(1, 2), (2, 2)], 1);
        let r = g.validate();
        assert!(!r.ok);
        assert!(r.violations.iter().any(|v| v.rule == "self-loop"));
        let g = Topology::new(3, [(1, 4)], 5);
        let rules: Vec<String> = g.validate().violations.into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"range".into()) && rules.contains(&"initial".into()));

        let mut snd = BTreeMap::new();
        let mut rcv = BTreeMap::new();
        snd.insert((1, 2), "cw".to_string());
        rcv.insert((1, 2), "cw".to_string());
        rcv.insert((2, 1), "cw".to_string());
        let g = Topology::new(2, [(1, 2), (2, 1)], 1).with_directions(snd, rcv);
        let r = g.validate();
        assert!(r.violations.iter().any(|v| v.rule == "snd-label"));
    }

    #[test]
    fn graph_lts_labels() {
        let r = make_ring(3).unwrap();
        let l = graph_lts(&r, &IndexTuple::new(vec![1], &r).unwrap());
        assert_eq!(l.label(0), &BTreeSet::from(["1".to_string()]));
        assert!(l.label(1).is_empty() && l.label(2).is_empty());
        let l = graph_lts(&r, &IndexTuple::new(vec![2, 3], &r).unwrap());
        assert_eq!(l.label(1), &BTreeSet::from(["1".to_string()]));
        assert_eq!(l.label(2), &BTreeSet::from(["2".to_string()]));
        let c = make_clique(2).unwrap();
        let l = graph_lts(&c, &IndexTuple::new(vec![], &c).unwrap());
        assert_eq!(l.num_states(), 2);
        assert_eq!(l.transitions().len(), 2);
        assert!(l.labels().iter().all(|x| x.is_empty()));
    }

    #[test]
    fn tuple_validation() {
        let r = make_ring(3).unwrap();
        assert!(IndexTuple::new(vec![1, 1], &r).is_err());
        assert!(IndexTuple::new(vec![4], &r).is_err());
        assert_eq!(IndexTuple::parse("1, 3", &r).unwrap().as_slice(), &[1, 3]);
        assert!(IndexTuple::parse("", &r).unwrap().is_empty());
    }

    #[test]
    fn shorthand_and_json() {
        assert_eq!(parse_family_shorthand("ring:6").unwrap(), make_ring(6).unwrap());
        assert!(parse_family_shorthand("torus:3").is_err());
        assert!(parse_family_shorthand("ring").is_err());
        for kind in FamilyKind::ALL {
            let g = kind.make(4).unwrap();
            let text = serde_json::to_string(&g.to_spec()).unwrap();
            assert_eq!(Topology::from_json(&text).unwrap(), g);
        }
        let b2 = make_biring(2).unwrap();
        let text = serde_json::to_string(&b2.to_spec()).unwrap();
        assert_eq!(Topology::from_json(&text).unwrap(), b2);
    }

    #[test]
    fn lasso_shape() {
        let l = make_lasso(3, 2).unwrap();
        assert_eq!(l.n(), 5);
        assert!(l.validate().ok);
        assert_eq!(l.reachable_from(4), BTreeSet::from([3, 4, 5]));
    }

    #[test]
    fn random_topologies_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..=6);
            let g = random_topology(&mut rng, n, 0.3, true);
            assert!(g.validate().ok);
            assert_eq!(g.reachable_from(1).len(), n);
        }
    }

    /// Label sets of the graph LTS are singletons exactly on tuple entries.
    #[test]
    fn graph_lts_nominal_labels() {
        let g = make_clique(5).unwrap();
        let t = IndexTuple::new(vec![4, 2, 5], &g).unwrap();
        let l = graph_lts(&g, &t);
        for v in g.vertices() {
            let pos = t.as_slice().iter().position(|&x| x == v);
            match pos {
                Some(i) => assert_eq!(l.label(v - 1), &BTreeSet::from([(i + 1).to_string()])),
                None => assert!(l.label(v - 1).is_empty()),
            }
        }
    }
}
