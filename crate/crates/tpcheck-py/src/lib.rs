//! Python bindings: formula parsing and generation, single-system checks,
//! family-level verdicts, and the command-line front end.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use tpcheck::checker::{check_indexed_on, FairnessSpec};
use tpcheck::logic::{gen_adj_formula, gen_phi_k, parse_formula as parse, profile};
use tpcheck::pmcp::{decompose, solve_pmcp, Family, Strategy};
use tpcheck::system::build_system;
use tpcheck::template::{builtin_template, ProcessTemplate};
use tpcheck::topology::{parse_family_shorthand, FamilyKind, Topology};

create_exception!(tpcheck_py, TpcheckError, PyException);

fn err(e: tpcheck::Error) -> PyErr {
    TpcheckError::new_err(e.to_string())
}

fn fairness(name: &str) -> PyResult<FairnessSpec> {
    match name {
        "token" => Ok(FairnessSpec::TokenGlobal),
        "none" => Ok(FairnessSpec::None),
        other => Err(TpcheckError::new_err(format!("unknown fairness `{other}`; use `token` or `none`"))),
    }
}

fn template(spec: &str) -> PyResult<ProcessTemplate> {
    if spec.trim_start().starts_with('{') {
        ProcessTemplate::from_json(spec).map_err(err)
    } else {
        builtin_template(spec).map_err(err)
    }
}

fn topology(spec: &str) -> PyResult<Topology> {
    if spec.trim_start().starts_with('{') {
        Topology::from_json(spec).map_err(err)
    } else {
        parse_family_shorthand(spec).map_err(err)
    }
}

fn to_python<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

/// Parses a formula and returns its normalized text.
#[pyfunction]
fn parse_formula(text: &str) -> PyResult<String> {
    Ok(parse(text).map_err(err)?.to_string())
}

/// Returns `(k, d, alternating)` of a formula.
#[pyfunction]
fn formula_profile(text: &str) -> PyResult<(usize, usize, bool)> {
    let p = profile(&parse(text).map_err(err)?);
    Ok((p.k, p.d, p.alternating))
}

/// Generates `phi-k` (with `k`) or `adj`.
#[pyfunction]
#[pyo3(signature = (kind, k = 2))]
fn gen_formula(kind: &str, k: usize) -> PyResult<String> {
    match kind {
        "phi-k" => Ok(gen_phi_k(k).map_err(err)?.to_string()),
        "adj" => Ok(gen_adj_formula().to_string()),
        other => Err(TpcheckError::new_err(format!("unknown formula kind `{other}`"))),
    }
}

/// Checks a formula on one system. Templates are builtin names or JSON text;
/// topologies are shorthands such as `ring:6` or JSON text. Returns a dict
/// with `holds`, `states`, `leaves_checked` and `counterexample`.
#[pyfunction]
#[pyo3(signature = (template_spec, topology_spec, formula, fair = "token"))]
fn check<'py>(
    py: Python<'py>,
    template_spec: &str,
    topology_spec: &str,
    formula: &str,
    fair: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let t = template(template_spec)?;
    let g = topology(topology_spec)?;
    let f = parse(formula).map_err(err)?;
    let fair = fairness(fair)?;
    let value = py.detach(|| -> tpcheck::Result<serde_json::Value> {
        let sys = build_system(&t, &g)?;
        let out = check_indexed_on(&sys, &f, fair)?;
        let cex = out.counterexample.as_ref().map(|c| {
            serde_json::json!({
                "tuple": c.tuple,
                "body": c.body,
                "lasso": c.lasso.as_ref().map(|l| l.to_json(|s| sys.state_text(s))),
            })
        });
        Ok(serde_json::json!({
            "holds": out.holds,
            "states": sys.num_states(),
            "leaves_checked": out.leaves_checked,
            "counterexample": cex,
        }))
    });
    to_python(py, &value.map_err(err)?)
}

/// Family-level verdict. `mode` is `cutoff`, `sweep` or `decompose`; returns
/// the report as a dict whose `answer` is `yes`, `no` or `unknown-up-to`.
#[pyfunction]
#[pyo3(signature = (family, template_spec, formula, mode = "cutoff", bound = 8, fair = "token"))]
fn pmcp<'py>(
    py: Python<'py>,
    family: &str,
    template_spec: &str,
    formula: &str,
    mode: &str,
    bound: usize,
    fair: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let t = template(template_spec)?;
    let kind = FamilyKind::parse(family).map_err(err)?;
    let f = parse(formula).map_err(err)?;
    let fair = fairness(fair)?;
    let fam = Family::Kind(kind);
    let report = py.detach(|| match mode {
        "cutoff" => solve_pmcp(&fam, &t, &f, Strategy::Cutoff, fair),
        "sweep" => solve_pmcp(&fam, &t, &f, Strategy::Sweep { bound }, fair),
        "decompose" => decompose(kind, &t, &f, profile(&f).d, bound, fair).map(|(_, r)| r),
        other => Err(tpcheck::Error::Invalid(format!("unknown mode `{other}`"))),
    });
    let value = serde_json::to_value(report.map_err(err)?).map_err(|e| err(e.into()))?;
    to_python(py, &value)
}

/// Runs the command-line front end; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> (i32, String, String) {
    py.detach(|| {
        let mut out = Vec::new();
        let mut errs = Vec::new();
        let argv = std::iter::once("tpcheck".to_string()).chain(args);
        let code = tpcheck::cli::run_with(argv, &mut out, &mut errs);
        (
            code,
            String::from_utf8_lossy(&out).into_owned(),
            String::from_utf8_lossy(&errs).into_owned(),
        )
    })
}

#[pymodule]
fn tpcheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TpcheckError", m.py().get_type::<TpcheckError>())?;
    m.add_function(wrap_pyfunction!(parse_formula, m)?)?;
    m.add_function(wrap_pyfunction!(formula_profile, m)?)?;
    m.add_function(wrap_pyfunction!(gen_formula, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(pmcp, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
