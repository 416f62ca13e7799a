#![allow(dead_code)]

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use rand::Rng;
use tpcheck::checker::Fairness;
use tpcheck::lts::{Lts, Universe};

pub const PROPS: [&str; 2] = ["p", "q"];

/// Random LTS over `PROPS` with `1..=max_states` states; deadlocks are possible.
pub fn random_lts<R: Rng>(rng: &mut R, max_states: usize) -> Lts {
    let n = rng.gen_range(1..=max_states);
    let density = rng.gen_range(0.2..0.7);
    let mut transitions = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if rng.gen_bool(density) {
                transitions.push((s, 0, t));
            }
        }
    }
    let labels = (0..n)
        .map(|_| {
            PROPS
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|p| p.to_string())
                .collect::<BTreeSet<_>>()
        })
        .collect();
    let mut initial = vec![0];
    if n > 1 && rng.gen_bool(0.3) {
        initial.push(rng.gen_range(1..n));
    }
    Lts::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        initial,
        vec!["a".into()],
        transitions,
        labels,
    )
    .unwrap()
    .with_universe(Universe::Explicit(PROPS.iter().map(|p| p.to_string()).collect()))
}

/// Either no fairness or one to three random non-empty state sets.
pub fn random_fairness<R: Rng>(rng: &mut R, lts: &Lts, fair: bool) -> Fairness {
    if !fair {
        return Fairness::none();
    }
    let n = lts.num_states();
    let sets = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut set = FixedBitSet::with_capacity(n);
            set.insert(rng.gen_range(0..n));
            for s in 0..n {
                if rng.gen_bool(0.3) {
                    set.insert(s);
                }
            }
            set
        })
        .collect();
    Fairness::new(sets)
}

/// Replaces every transition leaving `s` by `s -> s'` where the fresh `s'`
/// copies the label and outgoing transitions of `s`.
pub fn stutter_expand(lts: &Lts, fair: &Fairness, s: usize) -> (Lts, Fairness) {
    let n = lts.num_states();
    let copy = n;
    let mut transitions: Vec<(usize, usize, usize)> = lts
        .transitions()
        .iter()
        .filter(|&&(src, _, _)| src != s)
        .copied()
        .collect();
    transitions.push((s, 0, copy));
    for &(a, t) in lts.successors(s) {
        transitions.push((copy, a, t));
    }
    let mut names = lts.state_names().to_vec();
    names.push(format!("{}'", lts.state_name(s)));
    let mut labels = lts.labels().to_vec();
    labels.push(lts.label(s).clone());
    let expanded = Lts::new(names, lts.initial().to_vec(), lts.actions().to_vec(), transitions, labels)
        .unwrap()
        .with_universe(lts.universe().clone());
    let sets = fair
        .sets()
        .iter()
        .map(|set| {
            let mut grown = FixedBitSet::with_capacity(n + 1);
            grown.extend(set.ones());
            grown.set(copy, set[s]);
            grown
        })
        .collect();
    (expanded, Fairness::new(sets))
}

pub fn restrict(set: &FixedBitSet, n: usize) -> Vec<usize> {
    set.ones().filter(|&s| s < n).collect()
}

/// Templates shared by the family-level suites.
pub const SUITE_TEMPLATES: [&str; 3] = ["shuttle", "mutex", "waiter"];

/// Non-alternating formulas with at most two quantifiers.
pub const SUITE_FORMULAS: [&str; 13] = [
    "forall i . A F tok@i",
    "forall i . A G F tok@i",
    "forall i . E F tok@i",
    "exists i . E G !tok@i",
    "exists i . E F crit@i",
    "forall i . A G (wait@i -> F crit@i)",
    "forall i . A G F crit@i",
    "forall i . A G E F tok@i",
    "forall i j distinct . A G !(crit@i & crit@j)",
    "forall i j distinct . A (F tok@i & F tok@j)",
    "exists i j distinct . E F (tok@i & (tok@i U tok@j))",
    "forall i j distinct . E F (tok@i & (tok@i U tok@j))",
    "forall i j . A G ((tok@i & tok@j) -> i = j)",
];
