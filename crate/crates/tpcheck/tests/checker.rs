mod common;

use std::collections::BTreeSet;

use common::{random_fairness, random_lts, restrict, stutter_expand, PROPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpcheck::checker::{
    check, lasso_satisfies, ltl_to_buchi, oracle_exists_states, oracle_sat_states, sat_states,
    Fairness,
};
use tpcheck::logic::{random_closed_formula, random_path_formula, Expr};

#[test]
fn exists_agrees_with_oracle_on_random_ltl() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..600 {
        let lts = random_lts(&mut rng, 5);
        let fair = random_fairness(&mut rng, &lts, case % 2 == 1);
        let f = random_path_formula(&PROPS, rng.gen_range(1..=6), case);
        let fast = sat_states(&lts, &Expr::some_path(f.clone()), &fair).unwrap();
        let slow = oracle_exists_states(&lts, &f, &fair).unwrap();
        assert_eq!(fast, slow, "case {case}: E {f}");
    }
}

#[test]
fn nested_formulas_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..400 {
        let lts = random_lts(&mut rng, 4);
        let fair = random_fairness(&mut rng, &lts, case % 3 == 0);
        let f = random_closed_formula(&PROPS, 3, rng.gen_range(2..=10), case);
        let fast = sat_states(&lts, &f, &fair).unwrap();
        let slow = oracle_sat_states(&lts, &f, &fair).unwrap();
        assert_eq!(fast, slow, "case {case}: {f}");
    }
}

#[test]
fn universal_is_dual_of_existential() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..300 {
        let lts = random_lts(&mut rng, 5);
        let fair = random_fairness(&mut rng, &lts, case % 2 == 0);
        let f = random_path_formula(&PROPS, rng.gen_range(1..=7), case);
        let all = sat_states(&lts, &Expr::all_paths(f.clone()), &fair).unwrap();
        let dual = sat_states(
            &lts,
            &Expr::not(Expr::some_path(Expr::not(f.clone()))),
            &fair,
        )
        .unwrap();
        assert_eq!(all, dual, "case {case}: {f}");
    }
}

#[test]
fn stutter_expansion_preserves_verdicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..300 {
        let lts = random_lts(&mut rng, 5);
        let fair = random_fairness(&mut rng, &lts, case % 2 == 0);
        let f = random_closed_formula(&PROPS, 2, rng.gen_range(2..=9), case);
        let s = rng.gen_range(0..lts.num_states());
        let (big, big_fair) = stutter_expand(&lts, &fair, s);
        let before = sat_states(&lts, &f, &fair).unwrap();
        let after = sat_states(&big, &f, &big_fair).unwrap();
        assert_eq!(
            restrict(&before, lts.num_states()),
            restrict(&after, lts.num_states()),
            "case {case}: {f} stuttering state {s}"
        );
        assert_eq!(check(&lts, &f, &fair).unwrap(), check(&big, &f, &big_fair).unwrap());
    }
}

#[test]
fn fairness_only_removes_existential_witnesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..300 {
        let lts = random_lts(&mut rng, 5);
        let fair = random_fairness(&mut rng, &lts, true);
        let f = Expr::some_path(random_path_formula(&PROPS, rng.gen_range(1..=6), case));
        let with = sat_states(&lts, &f, &fair).unwrap();
        let without = sat_states(&lts, &f, &Fairness::none()).unwrap();
        assert!(with.is_subset(&without), "case {case}: {f}");
    }
}

#[test]
fn automaton_language_matches_lasso_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let letter = |rng: &mut ChaCha8Rng| -> BTreeSet<String> {
        PROPS
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .map(|p| p.to_string())
            .collect()
    };
    for case in 0..300 {
        let f = random_path_formula(&PROPS, rng.gen_range(1..=7), case);
        let aut = ltl_to_buchi(&f).unwrap();
        for _ in 0..10 {
            let stem: Vec<_> = (0..rng.gen_range(0..4)).map(|_| letter(&mut rng)).collect();
            let cycle: Vec<_> = (0..rng.gen_range(1..4)).map(|_| letter(&mut rng)).collect();
            let word: Vec<&BTreeSet<String>> = stem.iter().chain(&cycle).collect();
            assert_eq!(
                aut.accepts_lasso(&stem, &cycle),
                lasso_satisfies(&word, stem.len(), &f),
                "case {case}: {f} on {stem:?} ({cycle:?})^w"
            );
        }
    }
}
