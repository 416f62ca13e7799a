//! Process templates: local transition systems with a token/no-token partition.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Direction name used when a template declares no directions.
pub const DEFAULT_DIRECTION: &str = "*";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Internal(String),
    Snd(String),
    Rcv(String),
}

impl Action {
    pub fn is_internal(&self) -> bool {
        matches!(self, Action::Internal(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    SendOnly,
    ReceiveOnly,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValidationMode {
    /// Items i-vi plus: no internal-only cycle reachable from the initial states.
    #[default]
    Strict,
    /// As `Strict`, but internal-only cycles are forbidden everywhere.
    StrictAllStates,
    /// Items i-vi plus: every token state reaches a send and every other state
    /// reaches a receive along internal transitions.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: String,
    pub description: String,
    pub witness: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub(crate) fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            write!(f, "violation [{}]: {}", v.rule, v.description)?;
            if !v.witness.is_empty() {
                write!(f, " (witness: {})", v.witness.join(" -> "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// JSON form of a template. Actions in `transitions` are written as
/// `snd`, `rcv`, `snd:<dir>`, `rcv:<dir>` or an internal action name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub states: Vec<String>,
    pub token_states: Vec<String>,
    pub initial: Vec<String>,
    #[serde(default)]
    pub internal_actions: Vec<String>,
    #[serde(default)]
    pub snd_directions: Vec<String>,
    #[serde(default)]
    pub rcv_directions: Vec<String>,
    pub transitions: Vec<(String, String, String)>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct ProcessTemplate {
    states: Vec<String>,
    index: HashMap<String, usize>,
    token: Vec<bool>,
    initial_token: usize,
    initial_idle: usize,
    internal_actions: BTreeSet<String>,
    snd_directions: BTreeSet<String>,
    rcv_directions: BTreeSet<String>,
    transitions: Vec<(usize, Action, usize)>,
    labels: Vec<BTreeSet<String>>,
    out: Vec<Vec<usize>>,
}

impl ProcessTemplate {
    pub fn from_spec(spec: &TemplateSpec) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, s) in spec.states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(invalid(format!("duplicate state `{s}`")));
            }
        }
        let lookup = |name: &str| -> Result<usize> {
            index.get(name).copied().ok_or_else(|| Error::Unknown {
                kind: "template state",
                name: name.to_string(),
            })
        };
        let mut token = vec![false; spec.states.len()];
        for s in &spec.token_states {
            token[lookup(s)?] = true;
        }
        if spec.initial.len() != 2 {
            return Err(invalid(
                "`initial` must list the token-holding and the idle initial state",
            ));
        }
        let initial_token = lookup(&spec.initial[0])?;
        let initial_idle = lookup(&spec.initial[1])?;

        let dirs = |given: &[String]| -> BTreeSet<String> {
            if given.is_empty() {
                [DEFAULT_DIRECTION.to_string()].into()
            } else {
                given.iter().cloned().collect()
            }
        };
        let snd_directions = dirs(&spec.snd_directions);
        let rcv_directions = dirs(&spec.rcv_directions);
        let internal_actions: BTreeSet<String> = spec.internal_actions.iter().cloned().collect();
        for a in &internal_actions {
            if a == "snd" || a == "rcv" || a.contains(':') {
                return Err(invalid(format!("internal action name `{a}` is reserved")));
            }
        }

        let parse_action = |text: &str| -> Result<Action> {
            let (kind, dir) = match text.split_once(':') {
                Some((k, d)) => (k, Some(d)),
                None => (text, None),
            };
            let pick = |set: &BTreeSet<String>, side: &str| -> Result<String> {
                match dir {
                    Some(d) if set.contains(d) => Ok(d.to_string()),
                    Some(d) => Err(Error::Unknown {
                        kind: if side == "snd" { "send direction" } else { "receive direction" },
                        name: d.to_string(),
                    }),
                    None if set.len() == 1 => Ok(set.iter().next().cloned().unwrap_or_default()),
                    None => Err(invalid(format!(
                        "action `{side}` needs an explicit direction (`{side}:<dir>`)"
                    ))),
                }
            };
            match kind {
                "snd" => Ok(Action::Snd(pick(&snd_directions, "snd")?)),
                "rcv" => Ok(Action::Rcv(pick(&rcv_directions, "rcv")?)),
                _ if dir.is_none() && internal_actions.contains(text) => {
                    Ok(Action::Internal(text.to_string()))
                }
                _ => Err(Error::Unknown {
                    kind: "action",
                    name: text.to_string(),
                }),
            }
        };

        let mut transitions = Vec::new();
        for (from, act, to) in &spec.transitions {
            transitions.push((lookup(from)?, parse_action(act)?, lookup(to)?));
        }
        transitions.sort();
        transitions.dedup();

        let mut labels = vec![BTreeSet::new(); spec.states.len()];
        for (s, props) in &spec.labels {
            let i = lookup(s)?;
            for p in props {
                if p.is_empty() || p.contains('@') || p == "tok" {
                    return Err(invalid(format!("proposition name `{p}` is not allowed")));
                }
                labels[i].insert(p.clone());
            }
        }

        let mut out = vec![Vec::new(); spec.states.len()];
        for (i, (from, _, _)) in transitions.iter().enumerate() {
            out[*from].push(i);
        }
        Ok(ProcessTemplate {
            states: spec.states.clone(),
            index,
            token,
            initial_token,
            initial_idle,
            internal_actions,
            snd_directions,
            rcv_directions,
            transitions,
            labels,
            out,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TemplateSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> TemplateSpec {
        TemplateSpec {
            states: self.states.clone(),
            token_states: (0..self.num_states())
                .filter(|&q| self.token[q])
                .map(|q| self.states[q].clone())
                .collect(),
            initial: vec![
                self.states[self.initial_token].clone(),
                self.states[self.initial_idle].clone(),
            ],
            internal_actions: self.internal_actions.iter().cloned().collect(),
            snd_directions: self.snd_directions.iter().cloned().collect(),
            rcv_directions: self.rcv_directions.iter().cloned().collect(),
            transitions: self
                .transitions
                .iter()
                .map(|(f, a, t)| {
                    (
                        self.states[*f].clone(),
                        self.action_spec(a),
                        self.states[*t].clone(),
                    )
                })
                .collect(),
            labels: (0..self.num_states())
                .filter(|&q| !self.labels[q].is_empty())
                .map(|q| (self.states[q].clone(), self.labels[q].iter().cloned().collect()))
                .collect(),
        }
    }

    fn action_spec(&self, a: &Action) -> String {
        match a {
            Action::Internal(n) => n.clone(),
            Action::Snd(d) => format!("snd:{d}"),
            Action::Rcv(d) => format!("rcv:{d}"),
        }
    }

    /// Human-readable action text; singleton directions are hidden.
    pub fn action_text(&self, a: &Action) -> String {
        match a {
            Action::Internal(n) => n.clone(),
            Action::Snd(_) if self.snd_directions.len() == 1 => "snd".into(),
            Action::Rcv(_) if self.rcv_directions.len() == 1 => "rcv".into(),
            other => self.action_spec(other),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.states[q]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_id(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::Unknown {
            kind: "template state",
            name: name.to_string(),
        })
    }

    pub fn has_token(&self, q: usize) -> bool {
        self.token[q]
    }

    pub fn initial_token(&self) -> usize {
        self.initial_token
    }

    pub fn initial_idle(&self) -> usize {
        self.initial_idle
    }

    pub fn internal_actions(&self) -> &BTreeSet<String> {
        &self.internal_actions
    }

    pub fn snd_directions(&self) -> &BTreeSet<String> {
        &self.snd_directions
    }

    pub fn rcv_directions(&self) -> &BTreeSet<String> {
        &self.rcv_directions
    }

    /// Unaware templates have exactly one send and one receive direction.
    pub fn is_direction_aware(&self) -> bool {
        self.snd_directions.len() != 1 || self.rcv_directions.len() != 1
    }

    pub fn transitions(&self) -> &[(usize, Action, usize)] {
        &self.transitions
    }

    pub fn outgoing(&self, q: usize) -> impl Iterator<Item = (&Action, usize)> + '_ {
        self.out[q].iter().map(move |&i| {
            let (_, a, t) = &self.transitions[i];
            (a, *t)
        })
    }

    pub fn label(&self, q: usize) -> &BTreeSet<String> {
        &self.labels[q]
    }

    /// All propositions used by some state.
    pub fn propositions(&self) -> BTreeSet<String> {
        self.labels.iter().flatten().cloned().collect()
    }

    fn check_state(&self, q: usize) -> Result<()> {
        if q < self.num_states() {
            Ok(())
        } else {
            Err(Error::Unknown {
                kind: "template state",
                name: q.to_string(),
            })
        }
    }

    pub fn classify_state(&self, q: usize) -> Result<Classification> {
        self.check_state(q)?;
        let mut acts = self.outgoing(q).map(|(a, _)| a).peekable();
        if acts.peek().is_none() {
            return Ok(Classification::Neither);
        }
        let acts: Vec<&Action> = acts.collect();
        if acts.iter().all(|a| matches!(a, Action::Snd(_))) {
            Ok(Classification::SendOnly)
        } else if acts.iter().all(|a| matches!(a, Action::Rcv(_))) {
            Ok(Classification::ReceiveOnly)
        } else {
            Ok(Classification::Neither)
        }
    }

    /// Shortest internal path from `q` (inclusive) to a state classified as `goal`.
    pub fn priming_path(&self, q: usize, goal: Classification) -> Result<Option<Vec<usize>>> {
        self.check_state(q)?;
        match goal {
            Classification::SendOnly if !self.token[q] => {
                return Err(invalid(format!(
                    "state `{}` has no token and cannot be primed to send",
                    self.states[q]
                )))
            }
            Classification::ReceiveOnly if self.token[q] => {
                return Err(invalid(format!(
                    "state `{}` holds the token and cannot be primed to receive",
                    self.states[q]
                )))
            }
            Classification::Neither => {
                return Err(invalid("priming goal must be send-only or receive-only"))
            }
            _ => {}
        }
        let mut parent: Vec<Option<usize>> = vec![None; self.num_states()];
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([q]);
        seen[q] = true;
        while let Some(s) = queue.pop_front() {
            if self.classify_state(s)? == goal {
                let mut path = vec![s];
                let mut cur = s;
                while let Some(p) = parent[cur] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Ok(Some(path));
            }
            for (a, t) in self.outgoing(s) {
                if a.is_internal() && !seen[t] {
                    seen[t] = true;
                    parent[t] = Some(s);
                    queue.push_back(t);
                }
            }
        }
        Ok(None)
    }

    fn internal_cycle_from(&self, roots: &[usize]) -> Option<Vec<usize>> {
        let n = self.num_states();
        let mut color = vec![0u8; n];
        for &root in roots {
            if color[root] != 0 {
                continue;
            }
            let mut path = vec![root];
            let mut cursor = vec![0usize];
            color[root] = 1;
            while let Some(&s) = path.last() {
                let i = cursor.last_mut().expect("cursor tracks path");
                if *i < self.out[s].len() {
                    let (_, a, t) = &self.transitions[self.out[s][*i]];
                    *i += 1;
                    if !a.is_internal() {
                        continue;
                    }
                    match color[*t] {
                        0 => {
                            color[*t] = 1;
                            path.push(*t);
                            cursor.push(0);
                        }
                        1 => {
                            let start = path.iter().position(|p| p == t).expect("on stack");
                            let mut cyc = path[start..].to_vec();
                            cyc.push(*t);
                            return Some(cyc);
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

    fn reachable_states(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.initial_token, self.initial_idle];
        seen[self.initial_token] = true;
        seen[self.initial_idle] = true;
        while let Some(s) = stack.pop() {
            for (_, t) in self.outgoing(s) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        (0..self.num_states()).filter(|&s| seen[s]).collect()
    }

    fn reaches_action_internally(&self, q: usize, want_snd: bool) -> bool {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![q];
        seen[q] = true;
        while let Some(s) = stack.pop() {
            for (a, t) in self.outgoing(s) {
                match a {
                    Action::Snd(_) if want_snd => return true,
                    Action::Rcv(_) if !want_snd => return true,
                    Action::Internal(_) if !seen[t] => {
                        seen[t] = true;
                        stack.push(t);
                    }
                    _ => {}
                }
            }
        }
        false
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with(ValidationMode::Strict)
    }

    pub fn validate_with(&self, mode: ValidationMode) -> ValidationReport {
        let name = |q: usize| self.states[q].clone();
        let mut v = Vec::new();
        let mut push = |rule: &str, description: String, witness: Vec<String>| {
            v.push(Violation {
                rule: rule.into(),
                description,
                witness,
            })
        };
        let n_token = self.token.iter().filter(|&&b| b).count();
        if n_token == 0 || n_token == self.num_states() {
            push(
                "i",
                "token and non-token states must both be non-empty".into(),
                vec![],
            );
        }
        if !self.token[self.initial_token] {
            push(
                "ii",
                "initial token state is not a token state".into(),
                vec![name(self.initial_token)],
            );
        }
        if self.token[self.initial_idle] {
            push(
                "ii",
                "initial idle state is a token state".into(),
                vec![name(self.initial_idle)],
            );
        }
        for (f, a, t) in &self.transitions {
            let (f, t) = (*f, *t);
            match a {
                Action::Snd(_) if !(self.token[f] && !self.token[t]) => push(
                    "iii",
                    "send transition must go from a token state to a non-token state".into(),
                    vec![name(f), name(t)],
                ),
                Action::Rcv(_) if !(!self.token[f] && self.token[t]) => push(
                    "iv",
                    "receive transition must go from a non-token state to a token state".into(),
                    vec![name(f), name(t)],
                ),
                Action::Internal(_) if self.token[f] != self.token[t] => push(
                    "v",
                    "internal transition changes token possession".into(),
                    vec![name(f), name(t)],
                ),
                _ => {}
            }
        }
        for q in 0..self.num_states() {
            if self.out[q].is_empty() {
                push("vi", "state has no outgoing transition".into(), vec![name(q)]);
            }
        }
        match mode {
            ValidationMode::Strict | ValidationMode::StrictAllStates => {
                let roots: Vec<usize> = if mode == ValidationMode::Strict {
                    self.reachable_states()
                } else {
                    (0..self.num_states()).collect()
                };
                if let Some(cyc) = self.internal_cycle_from(&roots) {
                    push(
                        "vii",
                        "internal-only cycle: send and receive need not alternate forever".into(),
                        cyc.into_iter().map(name).collect(),
                    );
                }
            }
            ValidationMode::Relaxed => {
                for q in 0..self.num_states() {
                    if !self.reaches_action_internally(q, self.token[q]) {
                        let what = if self.token[q] { "a send" } else { "a receive" };
                        push(
                            "vii-relaxed",
                            format!("no internal path to {what}"),
                            vec![name(q)],
                        );
                    }
                }
            }
        }
        ValidationReport::from_violations(v)
    }
}

/// Names accepted by [`builtin_template`].
pub const BUILTIN_TEMPLATES: &[&str] = &["shuttle", "mutex", "waiter", "cw-shuttle", "bi-shuttle"];

fn spec(
    states: &[&str],
    token: &[&str],
    initial: [&str; 2],
    internal: &[&str],
    dirs: (&[&str], &[&str]),
    transitions: &[(&str, &str, &str)],
    labels: &[(&str, &[&str])],
) -> TemplateSpec {
    let strs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    TemplateSpec {
        states: strs(states),
        token_states: strs(token),
        initial: strs(&initial),
        internal_actions: strs(internal),
        snd_directions: strs(dirs.0),
        rcv_directions: strs(dirs.1),
        transitions: transitions
            .iter()
            .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
            .collect(),
        labels: labels
            .iter()
            .map(|(s, ps)| (s.to_string(), strs(ps)))
            .collect(),
    }
}

/// A two-state direction-aware template: the token state sends along every
/// direction in `snd`, the idle state receives along every direction in `rcv`.
/// Both directions sets are declared as `{cw, ccw}`.
pub fn direction_shell(snd: &[&str], rcv: &[&str]) -> Result<ProcessTemplate> {
    let mut tr = Vec::new();
    let snd_acts: Vec<String> = snd.iter().map(|d| format!("snd:{d}")).collect();
    let rcv_acts: Vec<String> = rcv.iter().map(|d| format!("rcv:{d}")).collect();
    for a in &snd_acts {
        tr.push(("t", a.as_str(), "n"));
    }
    for a in &rcv_acts {
        tr.push(("n", a.as_str(), "t"));
    }
    ProcessTemplate::from_spec(&spec(
        &["t", "n"],
        &["t"],
        ["t", "n"],
        &["tau"],
        (&["cw", "ccw"], &["cw", "ccw"]),
        &tr,
        &[],
    ))
}

pub fn builtin_template(name: &str) -> Result<ProcessTemplate> {
    let unaware: (&[&str], &[&str]) = (&[], &[]);
    match name {
        "shuttle" => ProcessTemplate::from_spec(&spec(
            &["t", "n"],
            &["t"],
            ["t", "n"],
            &["tau"],
            unaware,
            &[("t", "snd", "n"), ("n", "rcv", "t")],
            &[],
        )),
        "mutex" => ProcessTemplate::from_spec(&spec(
            &["n", "t", "c"],
            &["t", "c"],
            ["t", "n"],
            &["enter"],
            unaware,
            &[
                ("n", "rcv", "t"),
                ("t", "enter", "c"),
                ("t", "snd", "n"),
                ("c", "snd", "n"),
            ],
            &[("c", &["crit"])],
        )),
        "waiter" => ProcessTemplate::from_spec(&spec(
            &["hold", "idle", "wait", "crit"],
            &["hold", "crit"],
            ["hold", "idle"],
            &["req", "rel"],
            unaware,
            &[
                ("hold", "snd", "idle"),
                ("idle", "req", "wait"),
                ("idle", "rcv", "hold"),
                ("wait", "rcv", "crit"),
                ("crit", "rel", "hold"),
            ],
            &[("wait", &["wait"]), ("crit", &["crit"])],
        )),
        "cw-shuttle" => direction_shell(&["cw"], &["cw", "ccw"]),
        "bi-shuttle" => direction_shell(&["cw", "ccw"], &["cw", "ccw"]),
        _ => Err(Error::Unknown {
            kind: "builtin template",
            name: name.to_string(),
        }),
    }
}
