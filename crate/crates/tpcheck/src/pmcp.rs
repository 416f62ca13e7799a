//! Parameterized model checking over topology families: explicit cutoffs,
//! bounded sweeps, and the decomposition into contraction representatives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::checker::{check, check_indexed_on, FairnessSpec, IndexedOutcome};
use crate::contraction::{contract_positions, distinct_tuples, enumerate_contractions, stable_from, ContractionShape};
use crate::error::{invalid, Error, Result};
use crate::logic::{profile, Formula, QuantKind};
use crate::system::{build_system, project_positions, SystemLts};
use crate::template::ProcessTemplate;
use crate::topology::{FamilyKind, Topology};

/// A parameterized topology.
#[derive(Clone, Debug)]
pub enum Family {
    Kind(FamilyKind),
    /// A finite list of explicit members.
    Explicit(Vec<Topology>),
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Kind(k) => k.name().to_string(),
            Family::Explicit(list) => format!("explicit({})", list.len()),
        }
    }

    /// Members with at most `bound` vertices, by size.
    fn members_up_to(&self, bound: usize) -> Result<Vec<(usize, Topology)>> {
        match self {
            Family::Kind(k) => (k.min_size()..=bound)
                .map(|n| Ok((n, k.make(n)?)))
                .collect(),
            Family::Explicit(list) => Ok(list
                .iter()
                .filter(|g| g.n() <= bound)
                .map(|g| (g.n(), g.clone()))
                .collect()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Size up to which checking decides the whole family for non-alternating
/// prefixes of length `k`: `2k` for rings and birings, `k + 1` for cliques and
/// stars. `None` for alternating prefixes.
pub fn cutoff_for(family: &Family, k: usize, alternating: bool) -> Result<Option<usize>> {
    let kind = match family {
        Family::Kind(kind) => *kind,
        Family::Explicit(_) => {
            return Err(Error::NoCutoff(
                "explicit families have no cutoff; use sweep or decompose".into(),
            ))
        }
    };
    if alternating {
        return Ok(None);
    }
    Ok(Some(match kind {
        FamilyKind::Ring | FamilyKind::Biring => 2 * k,
        FamilyKind::Clique | FamilyKind::Star => k + 1,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cutoff,
    Sweep,
    Decompose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Cutoff,
    Sweep { bound: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "answer", content = "bound", rename_all = "kebab-case")]
pub enum Answer {
    Yes,
    No,
    UnknownUpTo(usize),
}

/// A failing family member.
#[derive(Clone, Debug, Serialize)]
pub struct PmcpCounterexample {
    pub size: usize,
    pub tuple: Vec<usize>,
    pub body: String,
    /// Global states of a violating path, if the failing leaf is universal.
    pub stem: Vec<String>,
    pub cycle: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PmcpReport {
    pub mode: Mode,
    pub family: String,
    pub k: usize,
    pub d: usize,
    pub cutoff_or_bound: usize,
    #[serde(flatten)]
    pub answer: Answer,
    /// Why the answer holds.
    pub justification: String,
    pub per_size_verdicts: BTreeMap<usize, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<PmcpCounterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representatives_digest: Option<String>,
}

fn counterexample(size: usize, sys: &SystemLts, out: &IndexedOutcome) -> Option<PmcpCounterexample> {
    let cex = out.counterexample.as_ref()?;
    let names = |v: &[usize]| v.iter().map(|&s| sys.state_text(s)).collect();
    let (stem, cycle) = match &cex.lasso {
        Some(l) => (names(&l.stem), names(&l.cycle)),
        None => (Vec::new(), Vec::new()),
    };
    Some(PmcpCounterexample {
        size,
        tuple: cex.tuple.clone(),
        body: cex.body.clone(),
        stem,
        cycle,
    })
}

/// Checks every member up to `bound`; per size the verdict and, for the
/// smallest failure, a counterexample.
fn sweep_sizes(
    family: &Family,
    template: &ProcessTemplate,
    f: &Formula,
    bound: usize,
    fair: FairnessSpec,
) -> Result<(BTreeMap<usize, bool>, Option<PmcpCounterexample>)> {
    let members = family.members_up_to(bound)?;
    let results: Vec<Result<(usize, bool, Option<PmcpCounterexample>)>> = members
        .par_iter()
        .map(|(n, g)| {
            let sys = build_system(template, g)?;
            let out = check_indexed_on(&sys, f, fair)?;
            let cex = if out.holds { None } else { counterexample(*n, &sys, &out) };
            Ok((*n, out.holds, cex))
        })
        .collect();
    let mut per_size: BTreeMap<usize, bool> = BTreeMap::new();
    let mut first_failure: Option<(usize, Option<PmcpCounterexample>)> = None;
    for r in results {
        let (n, holds, cex) = r?;
        let entry = per_size.entry(n).or_insert(true);
        *entry &= holds;
        if !holds && first_failure.as_ref().is_none_or(|(m, _)| n < *m) {
            first_failure = Some((n, cex));
        }
    }
    Ok((per_size, first_failure.and_then(|(_, c)| c)))
}

/// Decides the family by cutoff or checks it up to a bound.
pub fn solve_pmcp(
    family: &Family,
    template: &ProcessTemplate,
    f: &Formula,
    strategy: Strategy,
    fair: FairnessSpec,
) -> Result<PmcpReport> {
    let prof = profile(f);
    let (mode, bound) = match strategy {
        Strategy::Cutoff => {
            if template.is_direction_aware() {
                return Err(Error::NoCutoff(
                    "direction-aware templates admit no cutoff; use sweep".into(),
                ));
            }
            let c = cutoff_for(family, prof.k, prof.alternating)?.ok_or_else(|| {
                Error::NoCutoff(format!(
                    "the prefix of `{f}` alternates between forall and exists; use sweep or decompose"
                ))
            })?;
            (Mode::Cutoff, c)
        }
        Strategy::Sweep { bound } => (Mode::Sweep, bound),
    };
    let min = match family {
        Family::Kind(k) => k.min_size(),
        Family::Explicit(_) => 0,
    };
    let effective = bound.max(min);
    let (per_size, cex) = sweep_sizes(family, template, f, effective, fair)?;
    let failing = per_size.iter().find(|(_, &ok)| !ok).map(|(&n, _)| n);
    let (answer, justification) = match (mode, failing) {
        (_, Some(n)) => (Answer::No, format!("fails on the member of size {n}")),
        (Mode::Cutoff, None) => (
            Answer::Yes,
            format!(
                "all members up to the cutoff {bound} pass; for {} with a non-alternating prefix of length {} this size decides every member",
                family, prof.k
            ),
        ),
        (_, None) => (
            Answer::UnknownUpTo(effective),
            format!("all members up to size {effective} pass; no cutoff was applied"),
        ),
    };
    Ok(PmcpReport {
        mode,
        family: family.name(),
        k: prof.k,
        d: prof.d,
        cutoff_or_bound: bound,
        answer,
        justification,
        per_size_verdicts: per_size,
        counterexample: cex,
        representatives_digest: None,
    })
}

/// Quantifier-tree view of all tuples of one size, used to compare sizes:
/// equal signatures give equal truth values for any valuation of the shapes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Signature {
    Leaf(ContractionShape),
    Node(BTreeSet<Signature>),
}

#[derive(Clone, Debug, Serialize)]
pub struct Representative {
    pub size: usize,
    pub tuple: Vec<usize>,
    pub classes: usize,
    /// Truth of the formula body on the projection onto this tuple.
    pub value: bool,
}

/// Contraction representatives with their body valuations and the per-size
/// truth of the quantified Boolean combination over them.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub family: FamilyKind,
    pub k: usize,
    pub d: usize,
    pub size_bound: usize,
    pub representatives: Vec<Representative>,
    /// `flat` (set of shapes) or `nested` (quantifier tree of shape sets).
    pub signature: &'static str,
    /// Least size from which the signature is constant up to the bound.
    pub stable_from: usize,
    /// Truth of the Boolean skeleton per size.
    pub per_size: BTreeMap<usize, bool>,
    pub digest: String,
}

fn shape_text(s: &ContractionShape) -> String {
    let classes: Vec<String> = s
        .markings
        .iter()
        .zip(&s.labels)
        .map(|(m, l)| format!("{}:{l:?}", m.canonical()))
        .collect();
    format!("[{}] {:?} init {}", classes.join(" "), s.edges, s.initial)
}

fn digest(texts: &[String]) -> String {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    texts.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Quantifier tree over distinct tuples of `1..=n`; leaves carry the shape.
fn signature(shapes: &HashMap<Vec<usize>, ContractionShape>, n: usize, k: usize, prefix: &mut Vec<usize>) -> Signature {
    if prefix.len() == k {
        return Signature::Leaf(shapes[prefix].clone());
    }
    let mut children = BTreeSet::new();
    for v in 1..=n {
        if !prefix.contains(&v) {
            prefix.push(v);
            children.insert(signature(shapes, n, k, prefix));
            prefix.pop();
        }
    }
    Signature::Node(children)
}

fn skeleton(
    f: &Formula,
    n: usize,
    value: &dyn Fn(&[usize]) -> bool,
    prefix: &mut Vec<usize>,
) -> bool {
    let Some(q) = f.prefix.get(prefix.len()) else {
        return value(prefix);
    };
    let mut any = false;
    let mut all = true;
    for v in 1..=n {
        if prefix.contains(&v) {
            continue;
        }
        prefix.push(v);
        let b = skeleton(f, n, value, prefix);
        prefix.pop();
        any |= b;
        all &= b;
    }
    match q.kind {
        QuantKind::Forall => all,
        QuantKind::Exists => any,
    }
}

/// Decides `f` over a structural family by evaluating the body once per
/// contraction representative.
///
/// Needs a prefix of pairwise distinct variables without edge constraints.
/// Sizes up to `size_bound` are decided through the Boolean skeleton; the
/// answer is `Yes` only if every size passes and the skeleton signature is
/// constant from some size below the bound on.
pub fn decompose(
    family: FamilyKind,
    template: &ProcessTemplate,
    f: &Formula,
    d: usize,
    size_bound: usize,
    fair: FairnessSpec,
) -> Result<(Decomposition, PmcpReport)> {
    let prof = profile(f);
    let k = prof.k;
    if prof.d > d {
        return Err(invalid(format!(
            "formula has path depth {} but the decomposition uses depth {d}",
            prof.d
        )));
    }
    if f.prefix.iter().enumerate().any(|(i, q)| (i > 0 && !q.distinct) || q.in_edges_of.is_some()) {
        return Err(Error::Semantic(
            "decomposition needs pairwise distinct quantified variables without `in E(..)`".into(),
        ));
    }
    if template.is_direction_aware() {
        return Err(Error::NoCutoff(
            "direction-aware templates are not covered by the contraction argument".into(),
        ));
    }
    let census = enumerate_contractions(family, k, d, size_bound)?;

    // Body valuation per representative, one system per realizer size.
    let reps: Vec<(&ContractionShape, &(usize, Vec<usize>))> = census.realizers.iter().collect();
    let sizes: BTreeSet<usize> = reps.iter().map(|(_, (n, _))| *n).collect();
    let systems: HashMap<usize, SystemLts> = sizes
        .par_iter()
        .map(|&n| Ok((n, build_system(template, &family.make(n)?)?)))
        .collect::<Result<_>>()?;
    let values: Vec<Result<bool>> = reps
        .par_iter()
        .map(|(_, (n, tuple))| {
            let sys = &systems[n];
            let lts = project_positions(sys, tuple);
            check(&lts, &f.close_body(tuple), &fair.resolve(sys))
        })
        .collect();
    let mut value_of: HashMap<&ContractionShape, bool> = HashMap::new();
    let mut representatives = Vec::new();
    for ((shape, (n, tuple)), v) in reps.iter().zip(values) {
        let v = v?;
        value_of.insert(shape, v);
        representatives.push(Representative {
            size: *n,
            tuple: tuple.clone(),
            classes: shape.num_classes(),
            value: v,
        });
    }

    // Skeleton truth and signature per size.
    let mut per_size = BTreeMap::new();
    let mut flat: BTreeMap<usize, BTreeSet<ContractionShape>> = BTreeMap::new();
    let mut nested: BTreeMap<usize, Signature> = BTreeMap::new();
    for n in family.min_size()..=size_bound {
        let g = family.make(n)?;
        let shapes: HashMap<Vec<usize>, ContractionShape> = distinct_tuples(n, k)
            .into_iter()
            .map(|t| {
                let s = contract_positions(&g, &t, d).shape();
                (t, s)
            })
            .collect();
        let value = |t: &[usize]| value_of[&shapes[t]];
        per_size.insert(n, skeleton(f, n, &value, &mut Vec::new()));
        if prof.alternating {
            nested.insert(n, signature(&shapes, n, k, &mut Vec::new()));
        } else {
            flat.insert(n, shapes.into_values().collect());
        }
    }
    let (kind, stable) = if prof.alternating {
        ("nested", stable_from(&nested))
    } else {
        ("flat", stable_from(&flat))
    };
    let texts: Vec<String> = census.realizers.keys().map(shape_text).collect();
    let decomposition = Decomposition {
        family,
        k,
        d,
        size_bound,
        representatives,
        signature: kind,
        stable_from: stable,
        per_size: per_size.clone(),
        digest: digest(&texts),
    };
    let failing = per_size.iter().find(|(_, &ok)| !ok).map(|(&n, _)| n);
    let (answer, justification) = match failing {
        Some(n) => (
            Answer::No,
            format!("the Boolean skeleton over the representatives is false at size {n}"),
        ),
        None if stable < size_bound => (
            Answer::Yes,
            format!(
                "{} representatives; the {kind} signature is constant from size {stable} to {size_bound}",
                decomposition.representatives.len()
            ),
        ),
        None => (
            Answer::UnknownUpTo(size_bound),
            format!("the {kind} signature did not stabilize below size {size_bound}"),
        ),
    };
    let report = PmcpReport {
        mode: Mode::Decompose,
        family: family.name().to_string(),
        k,
        d,
        cutoff_or_bound: size_bound,
        answer,
        justification,
        per_size_verdicts: per_size,
        counterexample: None,
        representatives_digest: Some(decomposition.digest.clone()),
    };
    Ok((decomposition, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{gen_adj_formula, gen_phi_k, parse_formula};
    use crate::template::builtin_template;

    fn ring() -> Family {
        Family::Kind(FamilyKind::Ring)
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_for(&ring(), 2, false).unwrap(), Some(4));
        assert_eq!(cutoff_for(&Family::Kind(FamilyKind::Clique), 3, false).unwrap(), Some(4));
        assert_eq!(cutoff_for(&Family::Kind(FamilyKind::Star), 1, false).unwrap(), Some(2));
        assert_eq!(cutoff_for(&Family::Kind(FamilyKind::Biring), 3, false).unwrap(), Some(6));
        assert_eq!(cutoff_for(&ring(), 3, true).unwrap(), None);
        assert!(cutoff_for(&Family::Explicit(vec![]), 1, false).is_err());
    }

    #[test]
    fn mutex_on_rings_by_cutoff() {
        let t = builtin_template("mutex").unwrap();
        let f = parse_formula("forall i forall j distinct . A G !(crit@i & crit@j)").unwrap();
        let r = solve_pmcp(&ring(), &t, &f, Strategy::Cutoff, FairnessSpec::TokenGlobal).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        assert_eq!(r.cutoff_or_bound, 4);
        assert_eq!(r.per_size_verdicts.keys().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn adjacency_sweep_fails_at_seven() {
        let t = builtin_template("shuttle").unwrap();
        let r = solve_pmcp(
            &ring(),
            &t,
            &gen_adj_formula(),
            Strategy::Sweep { bound: 8 },
            FairnessSpec::TokenGlobal,
        )
        .unwrap();
        assert_eq!(r.answer, Answer::No);
        assert_eq!(r.counterexample.as_ref().map(|c| c.size), None);
        let first_fail = r.per_size_verdicts.iter().find(|(_, &v)| !v).map(|(&n, _)| n);
        assert_eq!(first_fail, Some(7));
        assert!(matches!(
            solve_pmcp(&ring(), &t, &gen_adj_formula(), Strategy::Cutoff, FairnessSpec::TokenGlobal),
            Err(Error::NoCutoff(_))
        ));
    }

    #[test]
    fn clique_eventually_token() {
        let t = builtin_template("shuttle").unwrap();
        let f = parse_formula("forall i . A F tok@i").unwrap();
        let r = solve_pmcp(
            &Family::Kind(FamilyKind::Clique),
            &t,
            &f,
            Strategy::Cutoff,
            FairnessSpec::TokenGlobal,
        )
        .unwrap();
        assert_eq!((r.answer, r.cutoff_or_bound), (Answer::Yes, 2));
    }

    #[test]
    fn sweep_reports_counterexample_for_universal_failure() {
        let t = builtin_template("shuttle").unwrap();
        let f = parse_formula("forall i . A G !tok@i").unwrap();
        let r = solve_pmcp(&ring(), &t, &f, Strategy::Sweep { bound: 4 }, FairnessSpec::TokenGlobal)
            .unwrap();
        assert_eq!(r.answer, Answer::No);
        let cex = r.counterexample.unwrap();
        assert_eq!((cex.size, cex.tuple.clone()), (2, vec![1]));
        assert!(!cex.cycle.is_empty());
    }

    #[test]
    fn direction_aware_templates_have_no_cutoff() {
        let t = builtin_template("bi-shuttle").unwrap();
        let f = parse_formula("forall i . A F tok@i").unwrap();
        let fam = Family::Kind(FamilyKind::Biring);
        assert!(matches!(
            solve_pmcp(&fam, &t, &f, Strategy::Cutoff, FairnessSpec::TokenGlobal),
            Err(Error::NoCutoff(_))
        ));
        let r = solve_pmcp(&fam, &t, &f, Strategy::Sweep { bound: 3 }, FairnessSpec::TokenGlobal)
            .unwrap();
        assert_eq!(r.answer, Answer::UnknownUpTo(3));
    }

    #[test]
    fn decomposition_of_trivial_ring_property() {
        let t = builtin_template("shuttle").unwrap();
        let f = parse_formula("forall i . A G !halt@i").unwrap();
        let (dec, r) = decompose(FamilyKind::Ring, &t, &f, 1, 6, FairnessSpec::TokenGlobal).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        assert!(dec.representatives.len() <= 2);
        assert!(dec.representatives.iter().all(|rep| rep.value));
    }

    #[test]
    fn decomposition_matches_cutoff_for_mutex() {
        let t = builtin_template("mutex").unwrap();
        let f = parse_formula("forall i forall j distinct . A G !(crit@i & crit@j)").unwrap();
        let (dec, r) = decompose(FamilyKind::Ring, &t, &f, 1, 7, FairnessSpec::TokenGlobal).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        assert_eq!(dec.signature, "flat");
        let census = enumerate_contractions(FamilyKind::Ring, 2, 1, 7).unwrap();
        assert_eq!(dec.representatives.len(), census.realizers.len());
    }

    #[test]
    fn decomposition_agrees_with_sweep_on_clique_cycles() {
        let t = builtin_template("shuttle").unwrap();
        let f = gen_phi_k(2).unwrap();
        let (_, dec) = decompose(FamilyKind::Clique, &t, &f, 2, 6, FairnessSpec::None).unwrap();
        let sweep = solve_pmcp(
            &Family::Kind(FamilyKind::Clique),
            &t,
            &f,
            Strategy::Sweep { bound: 6 },
            FairnessSpec::None,
        )
        .unwrap();
        assert_eq!(dec.per_size_verdicts, sweep.per_size_verdicts);
        assert_eq!(dec.answer, Answer::Yes);
    }

    #[test]
    fn decomposition_reproduces_adjacency_cover() {
        let t = builtin_template("shuttle").unwrap();
        let f = parse_formula(
            "exists i j distinct forall k distinct . A ((G (tok@i -> (tok@i U tok@k)) | G (tok@k -> (tok@k U tok@i))) | (G (tok@j -> (tok@j U tok@k)) | G (tok@k -> (tok@k U tok@j))))",
        )
        .unwrap();
        let (dec, r) = decompose(FamilyKind::Ring, &t, &f, 1, 9, FairnessSpec::TokenGlobal).unwrap();
        assert_eq!(dec.signature, "nested");
        assert_eq!(r.answer, Answer::No);
        let sweep = solve_pmcp(&ring(), &t, &f, Strategy::Sweep { bound: 9 }, FairnessSpec::TokenGlobal)
            .unwrap();
        assert_eq!(r.per_size_verdicts, sweep.per_size_verdicts);
    }
}
