//! Labeled transition systems and destuttering utilities on finite words.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{invalid, Result};

pub type StateId = usize;

/// Which atomic propositions a checker may legitimately ask about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Universe {
    /// Exactly the propositions occurring in some label.
    Labels,
    /// An explicitly declared set (a superset of all labels).
    Explicit(BTreeSet<String>),
    /// Any `name@i` with `1 <= i <= k`; used for projections.
    Positional { k: usize },
}

#[derive(Clone, Debug)]
pub struct Lts {
    state_names: Vec<String>,
    initial: Vec<StateId>,
    actions: Vec<String>,
    /// Sorted, deduplicated `(source, action index, target)` triples.
    transitions: Vec<(StateId, usize, StateId)>,
    labels: Vec<BTreeSet<String>>,
    universe: Universe,
    succ: Vec<Vec<(usize, StateId)>>,
}

impl Lts {
    pub fn new(
        state_names: Vec<String>,
        initial: Vec<StateId>,
        actions: Vec<String>,
        transitions: Vec<(StateId, usize, StateId)>,
        labels: Vec<BTreeSet<String>>,
    ) -> Result<Self> {
        let n = state_names.len();
        if n == 0 {
            return Err(invalid("an LTS needs at least one state"));
        }
        if labels.len() != n {
            return Err(invalid(format!(
                "labeling covers {} states but the LTS has {n}",
                labels.len()
            )));
        }
        if initial.is_empty() {
            return Err(invalid("an LTS needs at least one initial state"));
        }
        if let Some(&s) = initial.iter().find(|&&s| s >= n) {
            return Err(invalid(format!("initial state {s} out of range")));
        }
        for &(s, a, t) in &transitions {
            if s >= n || t >= n || a >= actions.len() {
                return Err(invalid(format!("transition ({s}, {a}, {t}) out of range")));
            }
        }
        let mut transitions = transitions;
        transitions.sort_unstable();
        transitions.dedup();
        let mut initial = initial;
        initial.sort_unstable();
        initial.dedup();
        let mut succ = vec![Vec::new(); n];
        for &(s, a, t) in &transitions {
            succ[s].push((a, t));
        }
        Ok(Lts {
            state_names,
            initial,
            actions,
            transitions,
            labels,
            universe: Universe::Labels,
            succ,
        })
    }

    pub fn with_universe(mut self, universe: Universe) -> Self {
        self.universe = universe;
        self
    }

    /// Same structure with a new labeling and universe.
    pub fn relabeled(&self, labels: Vec<BTreeSet<String>>, universe: Universe) -> Result<Self> {
        if labels.len() != self.num_states() {
            return Err(invalid("relabeling must cover every state"));
        }
        Ok(Lts {
            labels,
            universe,
            ..self.clone()
        })
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn transitions(&self) -> &[(StateId, usize, StateId)] {
        &self.transitions
    }

    /// `(action index, target)` pairs leaving `s`.
    pub fn successors(&self, s: StateId) -> &[(usize, StateId)] {
        &self.succ[s]
    }

    pub fn label(&self, s: StateId) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn labels(&self) -> &[BTreeSet<String>] {
        &self.labels
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn knows_atom(&self, atom: &str) -> bool {
        match &self.universe {
            Universe::Labels => self.labels.iter().any(|l| l.contains(atom)),
            Universe::Explicit(set) => set.contains(atom),
            Universe::Positional { k } => atom
                .rsplit_once('@')
                .and_then(|(p, i)| (!p.is_empty()).then_some(i))
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| (1..=*k).contains(&i)),
        }
    }

    pub fn states_labeled(&self, atom: &str) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.num_states());
        for (s, l) in self.labels.iter().enumerate() {
            if l.contains(atom) {
                set.insert(s);
            }
        }
        set
    }

    /// States reachable from `from` (inclusive) along any transitions.
    pub fn reachable_from(&self, from: &[StateId]) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.num_states());
        let mut stack: Vec<StateId> = Vec::new();
        for &s in from {
            if !seen.put(s) {
                stack.push(s);
            }
        }
        while let Some(s) = stack.pop() {
            for &(_, t) in &self.succ[s] {
                if !seen.put(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// States without outgoing transitions.
    pub fn deadlocks(&self) -> Vec<StateId> {
        (0..self.num_states()).filter(|&s| self.succ[s].is_empty()).collect()
    }
}

/// Removes consecutive repetitions of equal letters.
pub fn destutter<T: PartialEq + Clone>(word: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(word.len());
    for letter in word {
        if out.last() != Some(letter) {
            out.push(letter.clone());
        }
    }
    out
}

/// `result[0] = 0` and `result[i]` is the 1-based index of the last letter of
/// the `i`-th run of equal letters.
pub fn destutter_positions<T: PartialEq>(word: &[T]) -> Vec<usize> {
    let mut out = vec![0];
    for (j, letter) in word.iter().enumerate() {
        if word.get(j + 1) != Some(letter) {
            out.push(j + 1);
        }
    }
    out
}

/// 1-based positions grouped into maximal runs of equal letters.
fn runs<T: PartialEq>(word: &[T]) -> Vec<Vec<usize>> {
    let pos = destutter_positions(word);
    pos.windows(2).map(|w| (w[0] + 1..=w[1]).collect()).collect()
}

/// Block partitions of two words, one list of 1-based position runs each.
pub type BlockPartitions = (Vec<Vec<usize>>, Vec<Vec<usize>>);

/// Aligned block partitions of two words with equal destuttering.
///
/// Block `i` of each partition is a consecutive run of 1-based positions whose
/// letters all equal the `i`-th letter of the common destuttered word.
pub fn destutter_partition_witness<T: PartialEq + Clone>(
    w: &[T],
    w2: &[T],
) -> Option<BlockPartitions> {
    if destutter(w) != destutter(w2) {
        return None;
    }
    Some((runs(w), runs(w2)))
}

/// A cycle using only `allowed` actions among states reachable from `from`.
///
/// The cycle is returned as `s_0, ..., s_{m-1}` with allowed transitions
/// `s_i -> s_{i+1}` and `s_{m-1} -> s_0`.
pub fn find_cycle_within<'a>(
    lts: &Lts,
    allowed: impl IntoIterator<Item = &'a str>,
    from: &[StateId],
) -> Option<Vec<StateId>> {
    let mut allowed_idx = FixedBitSet::with_capacity(lts.actions.len());
    for a in allowed {
        if let Some(i) = lts.action_index(a) {
            allowed_idx.insert(i);
        }
    }
    let region = lts.reachable_from(from);
    let n = lts.num_states();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    for root in region.ones() {
        if color[root] != 0 {
            continue;
        }
        let mut path: Vec<StateId> = vec![root];
        let mut cursor: Vec<usize> = vec![0];
        color[root] = 1;
        while let Some(&s) = path.last() {
            let i = cursor.last_mut().expect("cursor tracks path");
            let edges = lts.successors(s);
            if *i < edges.len() {
                let (a, t) = edges[*i];
                *i += 1;
                if !allowed_idx.contains(a) {
                    continue;
                }
                match color[t] {
                    0 => {
                        color[t] = 1;
                        path.push(t);
                        cursor.push(0);
                    }
                    1 => {
                        let start = path.iter().position(|&p| p == t).expect("on stack");
                        return Some(path[start..].to_vec());
                    }
                    _ => {}
                }
            } else {
                color[s] = 2;
                path.pop();
                cursor.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lts(n: usize, edges: &[(usize, &str, usize)], actions: &[&str]) -> Lts {
        let actions: Vec<String> = actions.iter().map(|s| s.to_string()).collect();
        let tr = edges
            .iter()
            .map(|&(s, a, t)| (s, actions.iter().position(|x| x == a).unwrap(), t))
            .collect();
        Lts::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            vec![0],
            actions,
            tr,
            vec![BTreeSet::new(); n],
        )
        .unwrap()
    }

    #[test]
    fn destutter_examples() {
        let e: BTreeSet<u8> = BTreeSet::new();
        let one: BTreeSet<u8> = [1].into();
        assert_eq!(destutter(&[e.clone(), e.clone(), one.clone()]), vec![e.clone(), one.clone()]);
        assert_eq!(destutter::<u8>(&[]), Vec::<u8>::new());
        let alpha = vec![one.clone()];
        let beta = vec![one.clone(), one.clone(), e.clone()];
        let lhs = destutter(&[alpha.clone(), destutter(&beta)].concat());
        let rhs = destutter(&[alpha, beta].concat());
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, vec![one, e]);
    }

    #[test]
    fn positions_examples() {
        assert_eq!(destutter_positions(&['a', 'a', 'b']), vec![0, 2, 3]);
        assert_eq!(destutter_positions(&['a']), vec![0, 1]);
        assert_eq!(destutter_positions(&['a', 'b', 'b', 'a']), vec![0, 1, 3, 4]);
        assert_eq!(destutter_positions::<char>(&[]), vec![0]);
    }

    #[test]
    fn partition_witness_examples() {
        let (a, b) = destutter_partition_witness(&['a', 'a', 'b'], &['a', 'b', 'b']).unwrap();
        assert_eq!(a, vec![vec![1, 2], vec![3]]);
        assert_eq!(b, vec![vec![1], vec![2, 3]]);
        assert!(destutter_partition_witness(&['a'], &['b']).is_none());
        let (a, b) =
            destutter_partition_witness(&['a', 'b', 'a'], &['a', 'a', 'b', 'a', 'a']).unwrap();
        assert_eq!(a, vec![vec![1], vec![2], vec![3]]);
        assert_eq!(b, vec![vec![1, 2], vec![3], vec![4, 5]]);
    }

    #[test]
    fn cycle_search_examples() {
        let two = lts(2, &[(0, "snd", 1), (1, "rcv", 0)], &["tau", "snd", "rcv"]);
        assert!(find_cycle_within(&two, ["tau"], &[0]).is_none());

        let looped = lts(2, &[(0, "snd", 1), (1, "tau", 1), (1, "rcv", 0)], &["tau", "snd", "rcv"]);
        assert_eq!(find_cycle_within(&looped, ["tau"], &[0]), Some(vec![1]));

        let unreachable = lts(
            4,
            &[(0, "snd", 1), (1, "rcv", 0), (2, "tau", 3), (3, "tau", 2)],
            &["tau", "snd", "rcv"],
        );
        assert!(find_cycle_within(&unreachable, ["tau"], &[0]).is_none());
        assert!(find_cycle_within(&unreachable, ["tau"], &[2]).is_some());
    }

    #[test]
    fn rejects_bad_transitions() {
        let r = Lts::new(
            vec!["a".into()],
            vec![0],
            vec!["x".into()],
            vec![(0, 0, 3)],
            vec![BTreeSet::new()],
        );
        assert!(r.is_err());
    }

    #[test]
    fn positional_universe() {
        let l = lts(1, &[], &["a"]).with_universe(Universe::Positional { k: 2 });
        assert!(l.knows_atom("tok@1"));
        assert!(l.knows_atom("halt@2"));
        assert!(!l.knows_atom("halt@3"));
        assert!(!l.knows_atom("@1"));
        assert!(!l.knows_atom("halt"));
    }

    /// Kahn's algorithm over the restricted reachable subgraph.
    fn restricted_acyclic(l: &Lts, allowed: usize, from: &[usize]) -> bool {
        let region = l.reachable_from(from);
        let mut indeg = vec![0usize; l.num_states()];
        for &(s, a, t) in l.transitions() {
            if a == allowed && region.contains(s) && region.contains(t) {
                indeg[t] += 1;
            }
        }
        let mut queue: Vec<usize> = region.ones().filter(|&s| indeg[s] == 0).collect();
        let mut removed = 0;
        while let Some(s) = queue.pop() {
            removed += 1;
            for &(a, t) in l.successors(s) {
                if a == allowed && region.contains(t) {
                    indeg[t] -= 1;
                    if indeg[t] == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        removed == region.count_ones(..)
    }

    fn word() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..3, 0..12)
    }

    proptest! {
        #[test]
        fn destutter_idempotent(w in word()) {
            prop_assert_eq!(destutter(&destutter(&w)), destutter(&w));
        }

        #[test]
        fn destutter_concat_identity(a in word(), b in word()) {
            let lhs = destutter(&[a.clone(), destutter(&b)].concat());
            let rhs = destutter(&[a, b].concat());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn witness_iff_equal_destutter(a in word(), b in word()) {
            let eq = destutter(&a) == destutter(&b);
            let wit = destutter_partition_witness(&a, &b);
            prop_assert_eq!(eq, wit.is_some());
            if let Some((pa, pb)) = wit {
                prop_assert_eq!(pa.len(), pb.len());
                for (part, w) in [(&pa, &a), (&pb, &b)] {
                    let flat: Vec<usize> = part.iter().flatten().copied().collect();
                    prop_assert_eq!(flat, (1..=w.len()).collect::<Vec<_>>());
                }
                for (ba, bb) in pa.iter().zip(&pb) {
                    let la = a[ba[0] - 1];
                    prop_assert!(ba.iter().all(|&i| a[i - 1] == la));
                    prop_assert!(bb.iter().all(|&i| b[i - 1] == la));
                }
            }
        }

        #[test]
        fn positions_match_definition(w in word()) {
            let d = destutter(&w);
            let pos = destutter_positions(&w);
            prop_assert_eq!(pos.len(), d.len() + 1);
            for i in 1..=d.len() {
                let largest = (0..=w.len())
                    .filter(|&j| destutter(&w[..j]) == d[..i])
                    .max()
                    .unwrap();
                prop_assert_eq!(pos[i], largest);
            }
        }

        #[test]
        fn cycle_search_matches_toposort(
            n in 1usize..7,
            raw in prop::collection::vec((0usize..7, 0usize..2, 0usize..7), 0..16),
        ) {
            let edges: Vec<(usize, usize, usize)> =
                raw.into_iter().map(|(s, a, t)| (s % n, a, t % n)).collect();
            let l = Lts::new(
                (0..n).map(|i| i.to_string()).collect(),
                vec![0],
                vec!["tau".into(), "tok".into()],
                edges,
                vec![BTreeSet::new(); n],
            ).unwrap();
            let cycle = find_cycle_within(&l, ["tau"], &[0]);
            prop_assert_eq!(cycle.is_none(), restricted_acyclic(&l, 0, &[0]));
            if let Some(c) = cycle {
                for i in 0..c.len() {
                    let next = c[(i + 1) % c.len()];
                    prop_assert!(l.successors(c[i]).contains(&(0, next)));
                }
            }
        }
    }
}
