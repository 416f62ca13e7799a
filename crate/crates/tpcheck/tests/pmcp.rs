mod common;

use common::{SUITE_FORMULAS, SUITE_TEMPLATES};
use tpcheck::checker::FairnessSpec;
use tpcheck::contraction::enumerate_contractions;
use tpcheck::logic::parse_formula;
use tpcheck::pmcp::{decompose, solve_pmcp, Answer, Family, Strategy};
use tpcheck::template::builtin_template;
use tpcheck::topology::FamilyKind;

const FAMILIES: [FamilyKind; 3] = [FamilyKind::Ring, FamilyKind::Clique, FamilyKind::Star];

#[test]
fn decomposition_matches_sweep_on_suite() {
    let bound = 6;
    let mut compared = 0;
    for text in SUITE_FORMULAS {
        let f = parse_formula(text).unwrap();
        if f.prefix.iter().skip(1).any(|q| !q.distinct) {
            continue;
        }
        for name in SUITE_TEMPLATES {
            let t = builtin_template(name).unwrap();
            for kind in FAMILIES {
                let fair = FairnessSpec::TokenGlobal;
                let d = tpcheck::logic::profile(&f).d;
                let (_, dec) = decompose(kind, &t, &f, d, bound, fair).unwrap();
                let sweep = solve_pmcp(&Family::Kind(kind), &t, &f, Strategy::Sweep { bound }, fair).unwrap();
                assert_eq!(dec.per_size_verdicts, sweep.per_size_verdicts, "{text} {name} {kind:?}");
                if sweep.answer == Answer::No {
                    assert_eq!(dec.answer, Answer::No);
                }
                compared += 1;
            }
        }
    }
    assert!(compared >= 90);
}

#[test]
fn census_is_constant_past_stabilization() {
    for kind in FAMILIES {
        for k in 1..=2 {
            for d in 1..=2 {
                let census = enumerate_contractions(kind, k, d, 10).unwrap();
                assert!(census.stabilized(), "{kind:?} k={k} d={d}");
                let tail: Vec<_> = census.per_size.range(census.stable_from..).map(|(_, s)| s).collect();
                assert!(tail.windows(2).all(|w| w[0] == w[1]));
                let sizes: Vec<usize> = census.per_size.values().map(|s| s.len()).collect();
                let last = *sizes.last().unwrap();
                assert!(census.realizers.len() >= last);
            }
        }
    }
}

#[test]
fn cutoff_refuses_alternation_and_explicit_lists() {
    let t = builtin_template("shuttle").unwrap();
    let alt = parse_formula("forall i exists j distinct . E F (tok@i & (tok@i U tok@j))").unwrap();
    let fam = Family::Kind(FamilyKind::Ring);
    assert!(solve_pmcp(&fam, &t, &alt, Strategy::Cutoff, FairnessSpec::TokenGlobal).is_err());
    let r = solve_pmcp(&fam, &t, &alt, Strategy::Sweep { bound: 5 }, FairnessSpec::TokenGlobal).unwrap();
    assert_eq!(r.answer, Answer::UnknownUpTo(5));
    let explicit = Family::Explicit(vec![
        tpcheck::topology::make_ring(3).unwrap(),
        tpcheck::topology::make_clique(4).unwrap(),
    ]);
    let f = parse_formula("forall i . A F tok@i").unwrap();
    assert!(solve_pmcp(&explicit, &t, &f, Strategy::Cutoff, FairnessSpec::TokenGlobal).is_err());
    let r = solve_pmcp(&explicit, &t, &f, Strategy::Sweep { bound: 4 }, FairnessSpec::TokenGlobal).unwrap();
    assert_eq!(r.per_size_verdicts.len(), 2);
}
