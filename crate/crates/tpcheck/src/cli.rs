//! Command-line front end. Exit codes: 0 yes/true/ok, 1 no/false/violation,
//! 2 usage or input error, 3 unknown.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::checker::{check_indexed_on, FairnessSpec};
use crate::cm::{cm_reference_run, cm_to_biring, example_machines, halts_within_bound, CounterMachine};
use crate::contraction::{contract, equivalent_graphs};
use crate::dot::{contraction_to_dot, lts_to_dot};
use crate::error::{invalid, Error, Result};
use crate::logic::{gen_adj_formula, gen_phi_k, parse_formula, profile, random_formula, Formula};
use crate::pmcp::{decompose, solve_pmcp, Answer, Family, PmcpReport, Strategy};
use crate::system::{build_system, every_cycle_passes_token};
use crate::template::{builtin_template, ProcessTemplate, ValidationMode};
use crate::topology::{parse_family_shorthand, FamilyKind, IndexTuple, Topology};

pub const EXIT_YES: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "tpcheck", version, about = "Parameterized model checking of token-passing systems")]
struct Cli {
    /// Emit reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a process template and/or a topology.
    Validate(ValidateArgs),
    /// Build the composed system and report its size.
    Build(BuildArgs),
    /// Contract a topology with respect to an index tuple.
    Contract(ContractArgs),
    /// Compare the contractions of two topology/tuple pairs.
    Equiv(EquivArgs),
    /// Check an indexed formula on one system.
    Check(CheckArgs),
    /// Decide or bound a formula over a topology family.
    Pmcp(PmcpArgs),
    /// Print a generated formula.
    GenFormula(GenArgs),
    /// Run the two-counter machine simulation demo.
    DemoCm(DemoArgs),
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Builtin template name or JSON file.
    #[arg(long)]
    template: Option<String>,
    /// Family shorthand such as `ring:6`, or a JSON file.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
    mode: ModeArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Strict,
    StrictAll,
    Relaxed,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    template: String,
    #[arg(long)]
    topology: String,
    /// Write the global LTS as DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ContractArgs {
    #[arg(long)]
    topology: String,
    /// Comma-separated vertices, e.g. `1,5`.
    #[arg(long)]
    tuple: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[arg(long)]
    topology: String,
    #[arg(long)]
    tuple: String,
    #[arg(long)]
    other_topology: String,
    #[arg(long)]
    other_tuple: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Args, Debug)]
struct FormulaArgs {
    /// Formula text.
    #[arg(long, conflicts_with = "formula_file")]
    formula: Option<String>,
    /// File holding the formula text.
    #[arg(long)]
    formula_file: Option<PathBuf>,
}

impl FormulaArgs {
    fn load(&self) -> Result<Formula> {
        match (&self.formula, &self.formula_file) {
            (Some(text), None) => parse_formula(text),
            (None, Some(path)) => parse_formula(&std::fs::read_to_string(path)?),
            _ => Err(invalid("give exactly one of --formula and --formula-file")),
        }
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    template: String,
    #[arg(long)]
    topology: String,
    #[command(flatten)]
    formula: FormulaArgs,
    #[arg(long, value_enum, default_value_t = FairnessSpec::TokenGlobal)]
    fair: FairnessSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PmcpMode {
    Cutoff,
    Sweep,
    Decompose,
}

#[derive(Args, Debug)]
struct PmcpArgs {
    /// `ring`, `biring`, `clique`, `star`, or a comma-separated list of
    /// members such as `ring:3,ring:5`.
    #[arg(long)]
    family: String,
    #[arg(long)]
    template: String,
    #[command(flatten)]
    formula: FormulaArgs,
    /// Expected prefix length; checked against the formula.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = PmcpMode::Cutoff)]
    mode: PmcpMode,
    /// Largest size for `sweep` and `decompose`.
    #[arg(long, default_value_t = 8)]
    bound: usize,
    /// Contraction depth for `decompose`; defaults to the formula's path depth.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value_t = FairnessSpec::TokenGlobal)]
    fair: FairnessSpec,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormulaKind {
    PhiK,
    Adj,
    Random,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    kind: FormulaKind,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Counter machine JSON file; defaults to the builtin examples.
    #[arg(long, conflicts_with = "example")]
    machine: Option<PathBuf>,
    /// Name of one builtin example.
    #[arg(long)]
    example: Option<String>,
    /// Ring sizes to simulate.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = FairnessSpec::TokenGlobal)]
    fair: FairnessSpec,
    /// Print the reference run of each machine up to this many steps.
    #[arg(long)]
    trace: Option<usize>,
}

/// Runs the command line `argv` (including the program name) and returns the
/// exit code. Reports go to `out`, diagnostics to `err`.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_YES };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let json = cli.json;
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, json, out),
        Command::Build(a) => cmd_build(a, json, out),
        Command::Contract(a) => cmd_contract(a, json, out),
        Command::Equiv(a) => cmd_equiv(a, json, out),
        Command::Check(a) => cmd_check(a, json, out),
        Command::Pmcp(a) => cmd_pmcp(a, json, out),
        Command::GenFormula(a) => cmd_gen(a, json, out),
        Command::DemoCm(a) => cmd_demo(a, json, out),
    }
}

fn load_template(arg: &str) -> Result<ProcessTemplate> {
    if Path::new(arg).is_file() {
        ProcessTemplate::from_json(&std::fs::read_to_string(arg)?)
    } else {
        builtin_template(arg)
    }
}

fn load_topology(arg: &str) -> Result<Topology> {
    if Path::new(arg).is_file() {
        Topology::from_json(&std::fs::read_to_string(arg)?)
    } else {
        parse_family_shorthand(arg)
    }
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn verdict_code(ok: bool) -> i32 {
    if ok {
        EXIT_YES
    } else {
        EXIT_NO
    }
}

fn cmd_validate(a: &ValidateArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    if a.template.is_none() && a.topology.is_none() {
        return Err(invalid("give --template and/or --topology"));
    }
    let mode = match a.mode {
        ModeArg::Strict => ValidationMode::Strict,
        ModeArg::StrictAll => ValidationMode::StrictAllStates,
        ModeArg::Relaxed => ValidationMode::Relaxed,
    };
    let mut ok = true;
    let mut reports = serde_json::Map::new();
    if let Some(t) = &a.template {
        let r = load_template(t)?.validate_with(mode);
        ok &= r.ok;
        if !json {
            write!(out, "template {t}: {r}")?;
        }
        reports.insert("template".into(), serde_json::to_value(&r)?);
    }
    if let Some(g) = &a.topology {
        let r = load_topology(g)?.validate();
        ok &= r.ok;
        if !json {
            write!(out, "topology {g}: {r}")?;
        }
        reports.insert("topology".into(), serde_json::to_value(&r)?);
    }
    if json {
        reports.insert("ok".into(), ok.into());
        emit_json(out, &reports.into())?;
    }
    Ok(verdict_code(ok))
}

fn cmd_build(a: &BuildArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let template = load_template(&a.template)?;
    let topology = load_topology(&a.topology)?;
    let sys = build_system(&template, &topology)?;
    let lts = sys.lts();
    let stats = json!({
        "template": a.template,
        "topology": a.topology,
        "states": sys.num_states(),
        "transitions": lts.transitions().len(),
        "token_transitions": sys.count_token_transitions(),
        "deadlocks": lts.deadlocks().len(),
        "every_cycle_passes_token": every_cycle_passes_token(&sys),
    });
    if let Some(path) = &a.dot {
        std::fs::write(path, lts_to_dot(lts, &format!("{} on {}", a.template, a.topology)))?;
    }
    if json {
        emit_json(out, &stats)?;
    } else {
        writeln!(out, "system {} on {}", a.template, a.topology)?;
        for key in ["states", "transitions", "token_transitions", "deadlocks", "every_cycle_passes_token"] {
            writeln!(out, "  {key}: {}", stats[key])?;
        }
        if let Some(path) = &a.dot {
            writeln!(out, "  dot: {}", path.display())?;
        }
    }
    Ok(EXIT_YES)
}

fn cmd_contract(a: &ContractArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let g = load_topology(&a.topology)?;
    let tuple = IndexTuple::parse(&a.tuple, &g)?;
    let c = contract(&g, &tuple, a.d);
    if let Some(path) = &a.dot {
        std::fs::write(path, contraction_to_dot(&c, &format!("{} / ({})", a.topology, a.tuple)))?;
    }
    if json {
        emit_json(out, &serde_json::to_value(&c)?)?;
    } else {
        writeln!(out, "contraction of {} for ({}) at depth {}: {} classes", a.topology, a.tuple, a.d, c.num_classes())?;
        for (i, class) in c.classes.iter().enumerate() {
            let members: Vec<String> = class.members.iter().map(|v| v.to_string()).collect();
            let positions: Vec<String> = class.label.iter().map(|p| p.to_string()).collect();
            let init = if i == c.initial { " initial" } else { "" };
            writeln!(
                out,
                "  class {i}{init}: vertices {{{}}} positions {{{}}} marking {}",
                members.join(","),
                positions.join(","),
                class.marking
            )?;
        }
        let edges: Vec<String> = c.edges.iter().map(|(x, y)| format!("{x}->{y}")).collect();
        writeln!(out, "  edges: {}", edges.join(" "))?;
    }
    Ok(EXIT_YES)
}

fn cmd_equiv(a: &EquivArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let g = load_topology(&a.topology)?;
    let h = load_topology(&a.other_topology)?;
    let t = IndexTuple::parse(&a.tuple, &g)?;
    let u = IndexTuple::parse(&a.other_tuple, &h)?;
    let eq = equivalent_graphs(&g, &t, &h, &u, a.d)?;
    if json {
        emit_json(out, &json!({ "equivalent": eq, "d": a.d }))?;
    } else {
        writeln!(out, "{eq}")?;
    }
    Ok(verdict_code(eq))
}

fn cmd_check(a: &CheckArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let template = load_template(&a.template)?;
    let topology = load_topology(&a.topology)?;
    let f = a.formula.load()?;
    let sys = build_system(&template, &topology)?;
    let outcome = check_indexed_on(&sys, &f, a.fair)?;
    let cex = outcome.counterexample.as_ref().map(|c| {
        let lasso = c.lasso.as_ref().map(|l| l.to_json(|s| sys.state_text(s)));
        json!({ "tuple": c.tuple, "body": c.body, "lasso": lasso })
    });
    if json {
        emit_json(
            out,
            &json!({
                "formula": f.to_string(),
                "states": sys.num_states(),
                "fairness": a.fair,
                "holds": outcome.holds,
                "leaves_checked": outcome.leaves_checked,
                "counterexample": cex,
            }),
        )?;
    } else {
        writeln!(out, "formula: {f}")?;
        writeln!(out, "system: {} states", sys.num_states())?;
        writeln!(out, "verdict: {}", if outcome.holds { "holds" } else { "fails" })?;
        if let Some(c) = &outcome.counterexample {
            let tuple: Vec<String> = c.tuple.iter().map(|v| v.to_string()).collect();
            writeln!(out, "refuting tuple: ({}) with body {}", tuple.join(","), c.body)?;
            if let Some(l) = &c.lasso {
                writeln!(out, "counterexample stem:")?;
                for &s in &l.stem {
                    writeln!(out, "  {}", sys.state_text(s))?;
                }
                writeln!(out, "counterexample cycle:")?;
                for &s in &l.cycle {
                    writeln!(out, "  {}", sys.state_text(s))?;
                }
            }
        }
    }
    Ok(verdict_code(outcome.holds))
}

fn parse_family(text: &str) -> Result<Family> {
    if text.contains(':') {
        let members = text.split(',').map(|m| parse_family_shorthand(m.trim())).collect::<Result<_>>()?;
        Ok(Family::Explicit(members))
    } else {
        Ok(Family::Kind(FamilyKind::parse(text)?))
    }
}

fn answer_code(a: Answer) -> i32 {
    match a {
        Answer::Yes => EXIT_YES,
        Answer::No => EXIT_NO,
        Answer::UnknownUpTo(_) => EXIT_UNKNOWN,
    }
}

fn print_report(r: &PmcpReport, out: &mut dyn Write) -> Result<()> {
    let mode = serde_json::to_value(r.mode)?;
    writeln!(
        out,
        "mode: {}  family: {}  k={} d={}",
        mode.as_str().unwrap_or_default(),
        r.family,
        r.k,
        r.d
    )?;
    match r.mode {
        crate::pmcp::Mode::Cutoff => writeln!(out, "cutoff: {}", r.cutoff_or_bound)?,
        _ => writeln!(out, "bound: {}", r.cutoff_or_bound)?,
    }
    for (n, ok) in &r.per_size_verdicts {
        writeln!(out, "  size {n}: {}", if *ok { "holds" } else { "fails" })?;
    }
    let answer = match r.answer {
        Answer::Yes => "yes".to_string(),
        Answer::No => "no".to_string(),
        Answer::UnknownUpTo(b) => format!("unknown (checked up to {b})"),
    };
    writeln!(out, "answer: {answer}")?;
    writeln!(out, "justification: {}", r.justification)?;
    if let Some(c) = &r.counterexample {
        let tuple: Vec<String> = c.tuple.iter().map(|v| v.to_string()).collect();
        writeln!(out, "counterexample at size {} for ({}): {}", c.size, tuple.join(","), c.body)?;
        for s in &c.stem {
            writeln!(out, "  stem  {s}")?;
        }
        for s in &c.cycle {
            writeln!(out, "  cycle {s}")?;
        }
    }
    if let Some(d) = &r.representatives_digest {
        writeln!(out, "representatives digest: {d}")?;
    }
    Ok(())
}

fn cmd_pmcp(a: &PmcpArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(invalid("--jobs must be positive"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| pmcp_report(a))?;
    if json {
        emit_json(out, &serde_json::to_value(&report)?)?;
    } else {
        print_report(&report, out)?;
    }
    Ok(answer_code(report.answer))
}

fn pmcp_report(a: &PmcpArgs) -> Result<PmcpReport> {
    let template = load_template(&a.template)?;
    let f = a.formula.load()?;
    let prof = profile(&f);
    if let Some(k) = a.k {
        if k != prof.k {
            return Err(invalid(format!("--k {k} does not match the formula's prefix length {}", prof.k)));
        }
    }
    let family = parse_family(&a.family)?;
    let report = match a.mode {
        PmcpMode::Cutoff => solve_pmcp(&family, &template, &f, Strategy::Cutoff, a.fair)?,
        PmcpMode::Sweep => solve_pmcp(&family, &template, &f, Strategy::Sweep { bound: a.bound }, a.fair)?,
        PmcpMode::Decompose => {
            let Family::Kind(kind) = family else {
                return Err(invalid("decompose needs a named family"));
            };
            decompose(kind, &template, &f, a.d.unwrap_or(prof.d), a.bound, a.fair)?.1
        }
    };
    Ok(report)
}

fn cmd_gen(a: &GenArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let f = match a.kind {
        FormulaKind::PhiK => gen_phi_k(a.k)?,
        FormulaKind::Adj => gen_adj_formula(),
        FormulaKind::Random => random_formula(a.k, a.d, a.size, a.seed),
    };
    if json {
        emit_json(out, &json!({ "formula": f.to_string(), "profile": profile(&f) }))?;
    } else {
        writeln!(out, "{f}")?;
    }
    Ok(EXIT_YES)
}

fn cmd_demo(a: &DemoArgs, json: bool, out: &mut dyn Write) -> Result<i32> {
    let machines: Vec<(String, CounterMachine)> = match (&a.machine, &a.example) {
        (Some(path), _) => vec![(
            path.display().to_string(),
            CounterMachine::from_json(&std::fs::read_to_string(path)?)?,
        )],
        (None, Some(name)) => {
            let cm = example_machines()
                .into_iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Unknown {
                    kind: "example machine",
                    name: name.clone(),
                })?
                .1;
            vec![(name.clone(), cm)]
        }
        (None, None) => example_machines().into_iter().map(|(n, cm)| (n.to_string(), cm)).collect(),
    };
    let mut rows = Vec::new();
    let mut all_agree = true;
    for (name, cm) in &machines {
        if let Some(steps) = a.trace {
            for &n in &a.n {
                let run = cm_reference_run(cm, n.saturating_sub(1).max(1) as u64, steps)?;
                if !json {
                    writeln!(out, "{name} reference run with counters up to {}:", n.saturating_sub(1))?;
                    for (q, c1, c2) in &run.trace {
                        writeln!(out, "  ({q}, {c1}, {c2})")?;
                    }
                }
            }
        }
        for &n in &a.n {
            let bundle = cm_to_biring(cm, n)?;
            let sys = build_system(&bundle.template, &bundle.topology)?;
            let never_halts = check_indexed_on(&sys, &bundle.non_halting_formula(), a.fair)?.holds;
            let reference_halts = halts_within_bound(cm, n as u64 - 1)?;
            let agree = never_halts != reference_halts;
            all_agree &= agree;
            if !json {
                writeln!(
                    out,
                    "{name:<16} n={n}  states={:<6} checker: {:<11} reference: {:<11} {}",
                    sys.num_states(),
                    if never_halts { "never halts" } else { "halts" },
                    if reference_halts { "halts" } else { "never halts" },
                    if agree { "agree" } else { "DISAGREE" }
                )?;
            }
            rows.push(json!({
                "machine": name,
                "n": n,
                "states": sys.num_states(),
                "checker_never_halts": never_halts,
                "reference_halts": reference_halts,
                "agree": agree,
            }));
        }
    }
    if json {
        emit_json(out, &json!({ "runs": rows, "all_agree": all_agree }))?;
    }
    Ok(verdict_code(all_agree))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("tpcheck").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, out, err) = run(&["bogus"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(out.is_empty() && !err.is_empty());
        let (code, _, err) = run(&["check", "--template", "nope", "--topology", "ring:3", "--formula", "forall i . A F tok@i"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.starts_with("error:"));
        assert_eq!(run(&["--help"]).0, EXIT_YES);
    }

    #[test]
    fn check_exit_codes() {
        let f = "forall i . A F tok@i";
        assert_eq!(run(&["check", "--template", "shuttle", "--topology", "ring:4", "--formula", f]).0, EXIT_YES);
        let (code, out, _) = run(&["check", "--template", "shuttle", "--topology", "ring:3", "--formula", f, "--fair", "none"]);
        assert_eq!(code, EXIT_YES, "{out}");
        let (code, out, _) = run(&["check", "--template", "shuttle", "--topology", "ring:3", "--formula", "forall i . A G !tok@i"]);
        assert_eq!(code, EXIT_NO);
        assert!(out.contains("counterexample cycle"));
    }

    #[test]
    fn pmcp_unknown_exit() {
        let (code, out, _) = run(&[
            "pmcp", "--family", "biring", "--template", "bi-shuttle", "--mode", "sweep", "--bound", "3",
            "--formula", "forall i . A F tok@i", "--jobs", "2",
        ]);
        assert_eq!(code, EXIT_UNKNOWN, "{out}");
    }
}
