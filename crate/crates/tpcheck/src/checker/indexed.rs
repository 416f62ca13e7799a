use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{check, check_with_witness, FairnessSpec, Lasso};
use crate::error::Result;
use crate::logic::{instantiate, Formula, Leaf};
use crate::system::{build_system, project_positions, SystemLts};
use crate::template::ProcessTemplate;
use crate::topology::Topology;

/// A failing assignment of a universal prefix, with a violating path when the
/// leaf body is universal.
#[derive(Clone, Debug, Serialize)]
pub struct IndexedCounterexample {
    pub tuple: Vec<usize>,
    pub body: String,
    pub lasso: Option<Lasso>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexedOutcome {
    pub holds: bool,
    /// Number of distinct leaf checks performed.
    pub leaves_checked: usize,
    pub counterexample: Option<IndexedCounterexample>,
}

/// Builds the system for `template` on `topology` and checks `f` on it.
pub fn check_indexed(
    template: &ProcessTemplate,
    topology: &Topology,
    f: &Formula,
    fair: FairnessSpec,
) -> Result<IndexedOutcome> {
    let sys = build_system(template, topology)?;
    check_indexed_on(&sys, f, fair)
}

/// Checks `f` on an already built system: the prefix is expanded over the
/// topology and each distinct leaf is checked on the projection onto its tuple.
pub fn check_indexed_on(sys: &SystemLts, f: &Formula, fair: FairnessSpec) -> Result<IndexedOutcome> {
    let plan = instantiate(f, sys.topology());
    let fairness = fair.resolve(sys);
    let leaves: Vec<&Leaf> = plan.distinct_leaves().into_iter().collect();
    let verdicts: Vec<Result<bool>> = leaves
        .par_iter()
        .map(|leaf| {
            let lts = project_positions(sys, &leaf.tuple);
            check(&lts, &leaf.body, &fairness)
        })
        .collect();
    let mut table: HashMap<&Leaf, bool> = HashMap::with_capacity(leaves.len());
    for (leaf, v) in leaves.iter().zip(verdicts) {
        table.insert(leaf, v?);
    }
    let mut lookup = |l: &Leaf| table[l];
    let holds = plan.evaluate(&mut lookup);
    let counterexample = if holds {
        None
    } else {
        match plan.refuting_leaf(&mut lookup) {
            Some(leaf) => {
                let lts = project_positions(sys, &leaf.tuple);
                let out = check_with_witness(&lts, &leaf.body, &fairness)?;
                Some(IndexedCounterexample {
                    tuple: leaf.tuple.clone(),
                    body: leaf.body.to_string(),
                    lasso: out.counterexample,
                })
            }
            None => None,
        }
    };
    Ok(IndexedOutcome {
        holds,
        leaves_checked: leaves.len(),
        counterexample,
    })
}
