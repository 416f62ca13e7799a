//! Acceptance suite. Each test prints one `criterion N [PASS|FAIL]` line on
//! standard output (bypassing capture) and then asserts the verdict, including
//! its runtime limit.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_fairness, random_lts, PROPS, SUITE_FORMULAS, SUITE_TEMPLATES};
use tpcheck::checker::{check, check_indexed, oracle_check, oracle_sat_states, sat_states, FairnessSpec};
use tpcheck::cm::{cm_to_biring, example_machines, halts_within_bound};
use tpcheck::contraction::{contract, distinct_tuples, equivalent_graphs, mark_all_depths, ContractionShape};
use tpcheck::logic::{gen_adj_formula, gen_phi_k, parse_formula, random_formula, random_path_formula, Expr};
use tpcheck::lts::destutter;
use tpcheck::pmcp::{cutoff_for, solve_pmcp, Answer, Family, Strategy};
use tpcheck::system::{build_system, every_cycle_passes_token, project};
use tpcheck::template::{builtin_template, ProcessTemplate, BUILTIN_TEMPLATES};
use tpcheck::topology::{
    make_clique, make_ring, make_star, random_topology, FamilyKind, IndexTuple, Topology,
};

fn report(id: u32, name: &str, ok: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let pass = ok && elapsed <= limit;
    let line = format!(
        "criterion {id:>2} [{}] {name}: {detail} ({:.2} s, limit {} s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn first_failures(fails: &[String]) -> String {
    fails.iter().take(3).cloned().collect::<Vec<_>>().join("; ")
}

#[test]
fn criterion_01_adjacency_cover_on_rings() {
    let start = Instant::now();
    let t = builtin_template("shuttle").unwrap();
    let f = gen_adj_formula();
    let six = check_indexed(&t, &make_ring(6).unwrap(), &f, FairnessSpec::TokenGlobal).unwrap().holds;
    let seven = check_indexed(&t, &make_ring(7).unwrap(), &f, FairnessSpec::TokenGlobal).unwrap().holds;
    report(
        1,
        "adjacency cover holds on ring(6), fails on ring(7)",
        six && !seven,
        &format!("ring(6)={six} ring(7)={seven}"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_02_ring_contraction_bound() {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut fails = Vec::new();
    for k in 1..=3 {
        for n in (2 * k)..=12 {
            let g = make_ring(n).unwrap();
            for t in distinct_tuples(n, k) {
                let tuple = IndexTuple::new(t.clone(), &g).unwrap();
                for d in 1..=3 {
                    let c = contract(&g, &tuple, d);
                    checked += 1;
                    if c.num_classes() > 2 * k || !c.is_ring_with_hub_loops() {
                        fails.push(format!("ring({n}) {t:?} d={d}: {} classes", c.num_classes()));
                    }
                }
            }
        }
    }
    report(
        2,
        "ring contractions have at most 2k classes and ring shape",
        fails.is_empty(),
        &format!("{checked} contractions, {} violations {}", fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_03_clique_and_star_contractions() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut star_max: BTreeMap<usize, usize> = BTreeMap::new();
    let mut checked = 0usize;
    for k in 1..=3 {
        for n in (k + 1)..=8 {
            let clique = make_clique(n).unwrap();
            let star = make_star(n).unwrap();
            for t in distinct_tuples(n, k) {
                for d in 1..=3 {
                    checked += 2;
                    let c = contract(&clique, &IndexTuple::new(t.clone(), &clique).unwrap(), d);
                    if c.num_classes() != k + 1 {
                        fails.push(format!("clique({n}) {t:?} d={d}: {}", c.num_classes()));
                    }
                    let s = contract(&star, &IndexTuple::new(t.clone(), &star).unwrap(), d);
                    let m = star_max.entry(k).or_default();
                    *m = (*m).max(s.num_classes());
                    if s.num_classes() > k + 1 {
                        fails.push(format!("star({n}) {t:?} d={d}: {}", s.num_classes()));
                    }
                }
            }
        }
    }
    let star: Vec<String> = star_max.iter().map(|(k, m)| format!("k={k}: max {m}")).collect();
    report(
        3,
        "clique contractions have k+1 classes, star at most k+1",
        fails.is_empty(),
        &format!("{checked} contractions; star {}; {}", star.join(", "), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

/// Random strongly connected topology: a Hamiltonian cycle in random order
/// plus random chords.
fn strongly_connected(rng: &mut ChaCha8Rng, n: usize) -> Topology {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges: BTreeSet<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let density = rng.gen_range(0.0..0.4);
    for v in 1..=n {
        for w in 1..=n {
            if v != w && rng.gen_bool(density) {
                edges.insert((v, w));
            }
        }
    }
    Topology::new(n, edges, 1)
}

type Instance = (Topology, Vec<usize>);

/// Pairs of distinct (topology, tuple) instances with equal depth-`d` contractions.
fn equivalent_pairs(rng: &mut ChaCha8Rng, k: usize, d: usize, want: usize) -> Vec<(Instance, Instance)> {
    let mut buckets: HashMap<ContractionShape, Vec<Instance>> = HashMap::new();
    for _ in 0..600 {
        let n = rng.gen_range(k.max(2)..=6);
        let g = strongly_connected(rng, n);
        let mut vs: Vec<usize> = (1..=n).collect();
        vs.shuffle(rng);
        let t: Vec<usize> = vs[..k].to_vec();
        let shape = contract(&g, &IndexTuple::new(t.clone(), &g).unwrap(), d).shape();
        let bucket = buckets.entry(shape).or_default();
        if !bucket.iter().any(|(h, u)| *h == g && *u == t) {
            bucket.push((g, t));
        }
    }
    let mut pairs = Vec::new();
    let mut keys: Vec<&ContractionShape> = buckets.keys().collect();
    keys.sort();
    'outer: for round in 0.. {
        let mut progressed = false;
        for key in &keys {
            let b = &buckets[*key];
            if b.len() > round + 1 {
                pairs.push((b[round].clone(), b[round + 1].clone()));
                progressed = true;
                if pairs.len() == want {
                    break 'outer;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    pairs
}

#[test]
fn criterion_04_reduction_on_equivalent_pairs() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = Vec::new();
    for (k, d, want) in [(1, 1, 12), (1, 2, 12), (2, 1, 13), (2, 2, 13)] {
        for (a, b) in equivalent_pairs(&mut rng, k, d, want) {
            pairs.push((k, d, a, b));
        }
    }
    let templates: Vec<ProcessTemplate> = ["shuttle", "mutex"].iter().map(|n| builtin_template(n).unwrap()).collect();
    let mut cases = 0usize;
    let mut fails = Vec::new();
    for (i, (k, d, (g, t), (h, u))) in pairs.iter().enumerate() {
        let gt = IndexTuple::new(t.clone(), g).unwrap();
        let hu = IndexTuple::new(u.clone(), h).unwrap();
        assert!(equivalent_graphs(g, &gt, h, &hu, *d).unwrap());
        for tmpl in &templates {
            let sg = build_system(tmpl, g).unwrap();
            let sh = build_system(tmpl, h).unwrap();
            let (pg, ph) = (project(&sg, &gt), project(&sh, &hu));
            let (fg, fh) = (FairnessSpec::TokenGlobal.resolve(&sg), FairnessSpec::TokenGlobal.resolve(&sh));
            for j in 0..30 {
                let seed = (i * 1000 + j) as u64;
                let f = random_formula(*k, *d, rng.gen_range(3..10), seed);
                let vg = check(&pg, &f.close_body(t), &fg).unwrap();
                let vh = check(&ph, &f.close_body(u), &fh).unwrap();
                cases += 1;
                if vg != vh {
                    fails.push(format!("pair {i} formula {f}: {vg} vs {vh}"));
                }
            }
        }
    }
    report(
        4,
        "equivalent contractions give equal verdicts",
        pairs.len() == 50 && fails.is_empty(),
        &format!("{} pairs, {cases} checks, {} disagreements {}", pairs.len(), fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_05_cutoff_matches_sweep() {
    let start = Instant::now();
    let mut runs = 0usize;
    let mut fails = Vec::new();
    let mut yes = 0usize;
    for text in SUITE_FORMULAS {
        let f = parse_formula(text).unwrap();
        for name in SUITE_TEMPLATES {
            let t = builtin_template(name).unwrap();
            for kind in [FamilyKind::Ring, FamilyKind::Clique, FamilyKind::Star] {
                let fam = Family::Kind(kind);
                let fair = FairnessSpec::TokenGlobal;
                let cut = solve_pmcp(&fam, &t, &f, Strategy::Cutoff, fair).unwrap();
                let c = cutoff_for(&fam, f.arity(), false).unwrap().unwrap();
                let sweep = solve_pmcp(&fam, &t, &f, Strategy::Sweep { bound: c + 3 }, fair).unwrap();
                runs += 1;
                yes += usize::from(cut.answer == Answer::Yes);
                let agree = (cut.answer == Answer::Yes) == (sweep.answer != Answer::No)
                    && cut.per_size_verdicts.iter().all(|(n, v)| sweep.per_size_verdicts[n] == *v);
                if !agree {
                    fails.push(format!("{text} / {name} / {kind:?}: {:?} vs {:?}", cut.answer, sweep.answer));
                }
            }
        }
    }
    report(
        5,
        "cutoff verdicts equal sweeps to cutoff+3",
        fails.is_empty() && SUITE_FORMULAS.len() >= 10,
        &format!("{runs} runs ({yes} yes), {} disagreements {}", fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(600),
    );
}

/// Whether some directed cycle visits exactly `m` distinct vertices.
fn has_cycle_of_length(g: &Topology, m: usize) -> bool {
    fn extend(g: &Topology, path: &mut Vec<usize>, m: usize) -> bool {
        let last = *path.last().unwrap();
        if path.len() == m {
            return g.has_edge(last, path[0]);
        }
        for w in g.vertices() {
            if !path.contains(&w) && g.has_edge(last, w) {
                path.push(w);
                if extend(g, path, m) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    g.vertices().any(|v| extend(g, &mut vec![v], m))
}

#[test]
fn criterion_06_cycle_formula_detects_cycles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = builtin_template("shuttle").unwrap();
    let formulas = [(2, gen_phi_k(2).unwrap()), (3, gen_phi_k(3).unwrap())];
    let mut fails = Vec::new();
    let mut positives = 0usize;
    for i in 0..30 {
        let n = rng.gen_range(2..=6);
        let density = rng.gen_range(0.05..0.5);
        let g = random_topology(&mut rng, n, density, true);
        for (m, f) in &formulas {
            let got = check_indexed(&t, &g, f, FairnessSpec::None).unwrap().holds;
            let want = has_cycle_of_length(&g, *m);
            positives += usize::from(want);
            if got != want {
                fails.push(format!("topology {i} ({g}) m={m}: checker {got}, oracle {want}"));
            }
        }
    }
    report(
        6,
        "cycle formulas hold iff a directed m-cycle exists",
        fails.is_empty(),
        &format!("60 checks ({positives} with a cycle), {} disagreements {}", fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_07_checker_matches_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fails = Vec::new();
    let cases = 600;
    for i in 0..cases {
        let lts = random_lts(&mut rng, 5);
        let fair = random_fairness(&mut rng, &lts, i % 2 == 1);
        let phi = random_path_formula(&PROPS, rng.gen_range(1..=6), i as u64);
        let e = Expr::some_path(phi.clone());
        let a = Expr::all_paths(phi.clone());
        let e_ok = check(&lts, &e, &fair).unwrap() == oracle_check(&lts, &phi, &fair).unwrap();
        let a_ok = sat_states(&lts, &a, &fair).unwrap() == oracle_sat_states(&lts, &a, &fair).unwrap();
        if !(e_ok && a_ok) {
            fails.push(format!("case {i}: {phi} (E ok {e_ok}, A ok {a_ok})"));
        }
    }
    report(
        7,
        "checker agrees with the lasso oracle",
        fails.is_empty(),
        &format!("{cases} instances, both fairness modes, {} disagreements {}", fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

/// Vertices reachable from `v` along paths whose vertices before the last
/// avoid the tuple.
fn reach_avoiding(g: &Topology, tuple: &[usize], v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut queue = VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        if tuple.contains(&x) {
            continue;
        }
        for w in g.successors(x) {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen
}

#[test]
fn criterion_08_finiteness_machinery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = Vec::new();
    for _ in 0..1000 {
        let a: Vec<u8> = (0..rng.gen_range(0..12)).map(|_| rng.gen_range(0..3)).collect();
        let b: Vec<u8> = (0..rng.gen_range(0..12)).map(|_| rng.gen_range(0..3)).collect();
        let lhs = destutter(&[a.clone(), destutter(&b)].concat());
        if lhs != destutter(&[a.clone(), b.clone()].concat()) {
            violations.push(format!("destutter {a:?} {b:?}"));
        }
    }
    let (mut pairs, mut markings) = (0usize, 0usize);
    for _ in 0..30 {
        let n = rng.gen_range(2..=7);
        let density = rng.gen_range(0.1..0.5);
        let g = random_topology(&mut rng, n, density, true);
        let k = rng.gen_range(1..=n.min(3));
        let mut vs: Vec<usize> = (1..=n).collect();
        vs.shuffle(&mut rng);
        let t = vs[..k].to_vec();
        let all = mark_all_depths(&g, &IndexTuple::new(t.clone(), &g).unwrap(), 3);
        for d in 0..=3 {
            for (v, m) in all[d].iter() {
                markings += 1;
                if !m.is_chain_marking() {
                    violations.push(format!("chain {g} {t:?} d={d} v={v}"));
                }
            }
            if d >= 1 {
                for v in g.vertices() {
                    for u in reach_avoiding(&g, &t, v) {
                        pairs += 1;
                        if !all[d - 1].get(u).leq(all[d - 1].get(v)) {
                            violations.push(format!("monotonicity {g} {t:?} d={d} u={u} v={v}"));
                        }
                    }
                }
            }
        }
    }
    report(
        8,
        "destutter identity, monotonicity and chain membership",
        violations.is_empty(),
        &format!(
            "1000 word pairs, {pairs} reachable pairs, {markings} markings, {} violations {}",
            violations.len(),
            first_failures(&violations)
        ),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_09_counter_machine_agreement() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut runs = 0usize;
    let machines = example_machines();
    for (name, cm) in &machines {
        for n in 2..=4 {
            let b = cm_to_biring(cm, n).unwrap();
            let never_halts = check_indexed(&b.template, &b.topology, &b.non_halting_formula(), FairnessSpec::TokenGlobal)
                .unwrap()
                .holds;
            let reference = !halts_within_bound(cm, n as u64 - 1).unwrap();
            runs += 1;
            if never_halts != reference {
                fails.push(format!("{name} n={n}: checker {never_halts}, reference {reference}"));
            }
        }
    }
    report(
        9,
        "counter machine simulation agrees with the bounded run",
        fails.is_empty() && machines.len() >= 5,
        &format!("{} machines, {runs} runs, {} disagreements {}", machines.len(), fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_10_single_token_and_token_passing_cycles() {
    let start = Instant::now();
    let mut templates: Vec<(String, ProcessTemplate)> = BUILTIN_TEMPLATES
        .iter()
        .map(|n| (n.to_string(), builtin_template(n).unwrap()))
        .collect();
    for (name, cm) in example_machines() {
        templates.push((format!("cm:{name}"), cm_to_biring(&cm, 3).unwrap().template));
    }
    let mut topologies: Vec<Topology> = Vec::new();
    for kind in [FamilyKind::Ring, FamilyKind::Biring, FamilyKind::Clique, FamilyKind::Star] {
        for n in 2..=5 {
            topologies.push(kind.make(n).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..6 {
        let n = rng.gen_range(2..=5);
        topologies.push(strongly_connected(&mut rng, n));
    }
    let mut fails = Vec::new();
    let (mut systems, mut states) = (0usize, 0usize);
    for (name, t) in &templates {
        if !t.validate().ok {
            continue;
        }
        for g in &topologies {
            let Ok(sys) = build_system(t, g) else { continue };
            systems += 1;
            for s in sys.states() {
                states += 1;
                let holders = g.vertices().filter(|&v| t.has_token(s.local(v))).count();
                if holders != 1 {
                    fails.push(format!("{name} on {g}: {holders} token holders"));
                }
            }
            if !every_cycle_passes_token(&sys) {
                fails.push(format!("{name} on {g}: internal-only cycle"));
            }
        }
    }
    report(
        10,
        "one token holder everywhere and every cycle passes the token",
        fails.is_empty() && systems > 0,
        &format!("{systems} systems, {states} states, {} violations {}", fails.len(), first_failures(&fails)),
        start.elapsed(),
        Duration::from_secs(60),
    );
}
