//! Composition of a template over a topology into a token-passing system,
//! projections onto tuples of tracked vertices, and executable forms of the
//! fairness and token-pushing arguments.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lts::{find_cycle_within, Lts, StateId, Universe};
use crate::template::{Action, Classification, ProcessTemplate, ValidationMode};
use crate::topology::{IndexTuple, Topology};

/// Name of the action shared by all token-passing transitions.
pub const TOKEN_ACTION: &str = "tok";

/// One template state per vertex; `locals[v - 1]` belongs to vertex `v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GlobalState {
    locals: Vec<usize>,
}

impl GlobalState {
    pub fn new(locals: Vec<usize>) -> Self {
        GlobalState { locals }
    }

    pub fn locals(&self) -> &[usize] {
        &self.locals
    }

    /// Template state of vertex `v` (1-based).
    pub fn local(&self, v: usize) -> usize {
        self.locals[v - 1]
    }

    fn set(&mut self, v: usize, q: usize) {
        self.locals[v - 1] = q;
    }

    /// The unique vertex whose local state holds the token.
    pub fn token_position(&self, t: &ProcessTemplate) -> Result<usize> {
        let mut holders = (1..=self.locals.len()).filter(|&v| t.has_token(self.local(v)));
        match (holders.next(), holders.next()) {
            (Some(v), None) => Ok(v),
            (None, _) => Err(Error::CorruptState("no vertex holds the token".into())),
            (Some(a), Some(b)) => Err(Error::CorruptState(format!(
                "vertices {a} and {b} both hold the token"
            ))),
        }
    }

    pub fn display<'a>(&'a self, t: &'a ProcessTemplate) -> impl fmt::Display + 'a {
        DisplayState { s: self, t }
    }
}

struct DisplayState<'a> {
    s: &'a GlobalState,
    t: &'a ProcessTemplate,
}

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.s.locals.iter().map(|&q| self.t.state_name(q)).collect();
        write!(f, "({})", names.join(","))
    }
}

/// The reachable part of a token-passing system.
#[derive(Clone, Debug)]
pub struct SystemLts {
    template: ProcessTemplate,
    topology: Topology,
    states: Vec<GlobalState>,
    token_pos: Vec<usize>,
    lts: Lts,
    tok_action: usize,
}

impl SystemLts {
    pub fn template(&self) -> &ProcessTemplate {
        &self.template
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn lts(&self) -> &Lts {
        &self.lts
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, s: StateId) -> &GlobalState {
        &self.states[s]
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn state_index(&self, g: &GlobalState) -> Option<StateId> {
        self.states.iter().position(|x| x == g)
    }

    /// Token holder of reachable state `s`.
    pub fn token_at(&self, s: StateId) -> usize {
        self.token_pos[s]
    }

    pub fn token_action(&self) -> usize {
        self.tok_action
    }

    pub fn count_token_transitions(&self) -> usize {
        self.lts
            .transitions()
            .iter()
            .filter(|&&(_, a, _)| a == self.tok_action)
            .count()
    }

    pub fn state_text(&self, s: StateId) -> String {
        self.states[s].display(&self.template).to_string()
    }
}

fn require_valid(t: &ProcessTemplate, g: &Topology) -> Result<()> {
    let report = g.validate();
    if !report.ok {
        return Err(invalid(format!("topology is not valid: {report}")));
    }
    let report = t.validate_with(ValidationMode::Relaxed);
    if !report.ok {
        return Err(invalid(format!("template is not valid: {report}")));
    }
    Ok(())
}

fn check_directions(t: &ProcessTemplate, g: &Topology) -> Result<()> {
    if !t.is_direction_aware() {
        return Ok(());
    }
    if !g.is_direction_labeled() {
        return Err(Error::DirectionMismatch(
            "direction-aware template needs a direction-labeled topology".into(),
        ));
    }
    for d in g.snd_directions_used() {
        if !t.snd_directions().contains(&d) {
            return Err(Error::DirectionMismatch(format!(
                "topology send direction `{d}` is not declared by the template"
            )));
        }
    }
    for d in g.rcv_directions_used() {
        if !t.rcv_directions().contains(&d) {
            return Err(Error::DirectionMismatch(format!(
                "topology receive direction `{d}` is not declared by the template"
            )));
        }
    }
    Ok(())
}

/// Per-template-state transition lists used during composition.
struct LocalMoves {
    internal: Vec<Vec<(usize, usize)>>,
    snd: Vec<Vec<(String, usize)>>,
    rcv: Vec<Vec<(String, usize)>>,
}

impl LocalMoves {
    fn new(t: &ProcessTemplate, action_ids: &HashMap<String, usize>) -> Self {
        let n = t.num_states();
        let mut m = LocalMoves {
            internal: vec![Vec::new(); n],
            snd: vec![Vec::new(); n],
            rcv: vec![Vec::new(); n],
        };
        for (f, a, to) in t.transitions() {
            match a {
                Action::Internal(name) => m.internal[*f].push((action_ids[name], *to)),
                Action::Snd(d) => m.snd[*f].push((d.clone(), *to)),
                Action::Rcv(d) => m.rcv[*f].push((d.clone(), *to)),
            }
        }
        m
    }
}

/// Builds the reachable fragment of the system from its unique initial state.
pub fn build_system(t: &ProcessTemplate, g: &Topology) -> Result<SystemLts> {
    require_valid(t, g)?;
    check_directions(t, g)?;
    let aware = t.is_direction_aware();

    let mut actions: Vec<String> = t.internal_actions().iter().cloned().collect();
    if actions.iter().any(|a| a == TOKEN_ACTION) {
        return Err(invalid(format!("internal action may not be named `{TOKEN_ACTION}`")));
    }
    let tok_action = actions.len();
    actions.push(TOKEN_ACTION.into());
    let action_ids: HashMap<String, usize> =
        actions.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
    let moves = LocalMoves::new(t, &action_ids);

    let edge_pairs: HashMap<(usize, usize), BTreeSet<(String, String)>> = if aware {
        g.edges().iter().map(|&e| (e, g.direction_pairs(e))).collect()
    } else {
        HashMap::new()
    };

    let n = g.n();
    let mut init = vec![t.initial_idle(); n];
    init[g.initial() - 1] = t.initial_token();
    let init = GlobalState::new(init);

    let mut index: HashMap<GlobalState, usize> = HashMap::new();
    let mut states: Vec<GlobalState> = Vec::new();
    let mut token_pos: Vec<usize> = Vec::new();
    let mut transitions: Vec<(usize, usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |s: GlobalState,
                      states: &mut Vec<GlobalState>,
                      token_pos: &mut Vec<usize>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&i) = index.get(&s) {
            return Ok(i);
        }
        let i = states.len();
        token_pos.push(s.token_position(t)?);
        index.insert(s.clone(), i);
        states.push(s);
        queue.push_back(i);
        Ok(i)
    };

    intern(init, &mut states, &mut token_pos, &mut queue)?;
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        for v in 1..=n {
            for &(a, to) in &moves.internal[s.local(v)] {
                let mut next = s.clone();
                next.set(v, to);
                let j = intern(next, &mut states, &mut token_pos, &mut queue)?;
                transitions.push((i, a, j));
            }
        }
        let v = token_pos[i];
        for w in g.successors(v) {
            for (ds, p) in &moves.snd[s.local(v)] {
                for (dr, q) in &moves.rcv[s.local(w)] {
                    if aware && !edge_pairs[&(v, w)].contains(&(ds.clone(), dr.clone())) {
                        continue;
                    }
                    let mut next = s.clone();
                    next.set(v, *p);
                    next.set(w, *q);
                    let j = intern(next, &mut states, &mut token_pos, &mut queue)?;
                    transitions.push((i, tok_action, j));
                }
            }
        }
    }

    let labels: Vec<BTreeSet<String>> = states
        .iter()
        .zip(&token_pos)
        .map(|(s, &holder)| {
            let mut l = BTreeSet::new();
            for v in 1..=n {
                for p in t.label(s.local(v)) {
                    l.insert(format!("{p}_{v}"));
                }
            }
            l.insert(format!("{TOKEN_ACTION}_{holder}"));
            l
        })
        .collect();
    let names = states.iter().map(|s| s.display(t).to_string()).collect();
    let lts = Lts::new(names, vec![0], actions, transitions, labels)?;
    Ok(SystemLts {
        template: t.clone(),
        topology: g.clone(),
        states,
        token_pos,
        lts,
        tok_action,
    })
}

/// Relabels the system so that position `i` of the tuple speaks for vertex `g_i`:
/// `p@i` holds iff `p` labels the local state of `g_i`, and `tok@i` iff `g_i`
/// holds the token.
pub fn project(sys: &SystemLts, tuple: &IndexTuple) -> Lts {
    project_positions(sys, tuple.as_slice())
}

/// Like [`project`] but tolerates repeated entries.
pub(crate) fn project_positions(sys: &SystemLts, tuple: &[usize]) -> Lts {
    let t = &sys.template;
    let labels = sys
        .states
        .iter()
        .zip(&sys.token_pos)
        .map(|(s, &holder)| {
            let mut l = BTreeSet::new();
            for (i, &v) in tuple.iter().enumerate() {
                let pos = i + 1;
                for p in t.label(s.local(v)) {
                    l.insert(format!("{p}@{pos}"));
                }
                if holder == v {
                    l.insert(format!("{TOKEN_ACTION}@{pos}"));
                }
            }
            l
        })
        .collect();
    sys.lts
        .relabeled(labels, Universe::Positional { k: tuple.len() })
        .expect("projection keeps the state count")
}

/// True iff no reachable cycle consists of internal transitions only.
pub fn every_cycle_passes_token(sys: &SystemLts) -> bool {
    let internal: Vec<&str> = sys.template.internal_actions().iter().map(String::as_str).collect();
    find_cycle_within(&sys.lts, internal, sys.lts.initial()).is_none()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathStep {
    pub state: GlobalState,
    /// Action that led here; `None` for the first step.
    pub action: Option<String>,
}

fn hyp(clause: &'static str, detail: impl Into<String>) -> Error {
    Error::Hypothesis {
        clause,
        detail: detail.into(),
    }
}

/// Pushes the token from `path[0]` along the simple path to its last vertex.
///
/// `p` is the state the first sender moves to, `q` the state the last
/// receiver moves to. Vertices off the path never move, the first sender stays
/// in `p`, and the last receiver only moves on the final step.
pub fn token_pushing_path(
    sys: &SystemLts,
    s: &GlobalState,
    path: &[usize],
    p: usize,
    q: usize,
    tuple: &[usize],
) -> Result<Vec<PathStep>> {
    let t = &sys.template;
    let g = &sys.topology;
    if t.is_direction_aware() {
        return Err(hyp("unaware", "token pushing is only defined for direction-unaware templates"));
    }
    if s.locals.len() != g.n() || s.locals.iter().any(|&x| x >= t.num_states()) {
        return Err(invalid("global state does not match the system"));
    }
    if path.len() < 2 {
        return Err(hyp("path", "the path needs at least two vertices"));
    }
    if path.iter().collect::<BTreeSet<_>>().len() != path.len() {
        return Err(hyp("path", "the path is not simple"));
    }
    if let Some(w) = path.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
        return Err(hyp("path", format!("({},{}) is not an edge", w[0], w[1])));
    }
    let first = path[0];
    let last = *path.last().expect("non-empty");
    if s.token_position(t)? != first {
        return Err(hyp("i", format!("the token is not at vertex {first}")));
    }
    let has_move = |from: usize, to: usize, want_snd: bool| {
        t.outgoing(from).any(|(a, x)| {
            x == to
                && match a {
                    Action::Snd(_) => want_snd,
                    Action::Rcv(_) => !want_snd,
                    Action::Internal(_) => false,
                }
        })
    };
    if !has_move(s.local(first), p, true) {
        return Err(hyp("ii", "no send transition from the first vertex to p"));
    }
    if !has_move(s.local(last), q, false) {
        return Err(hyp("iii", "no receive transition from the last vertex to q"));
    }
    for y in g.vertices() {
        if y == first || y == last || tuple.contains(&y) {
            continue;
        }
        if t.classify_state(s.local(y))? != Classification::ReceiveOnly {
            return Err(hyp("iv", format!("vertex {y} is not receive-only")));
        }
    }

    let first_rcv = |state: usize| {
        t.outgoing(state).find_map(|(a, x)| matches!(a, Action::Rcv(_)).then_some(x))
    };
    let first_snd = |state: usize| {
        t.outgoing(state).find_map(|(a, x)| matches!(a, Action::Snd(_)).then_some(x))
    };
    let internal_name = |from: usize, to: usize| {
        t.outgoing(from)
            .find_map(|(a, x)| match a {
                Action::Internal(n) if x == to => Some(n.clone()),
                _ => None,
            })
            .expect("priming path follows internal transitions")
    };

    let mut steps = vec![PathStep {
        state: s.clone(),
        action: None,
    }];
    let mut cur = s.clone();
    let prime = |cur: &mut GlobalState, steps: &mut Vec<PathStep>, v: usize, goal| -> Result<()> {
        let route = t
            .priming_path(cur.local(v), goal)?
            .ok_or_else(|| invalid("template admits no priming path"))?;
        for w in route.windows(2) {
            cur.set(v, w[1]);
            steps.push(PathStep {
                state: cur.clone(),
                action: Some(internal_name(w[0], w[1])),
            });
        }
        Ok(())
    };

    for i in 0..path.len() - 1 {
        let (sender, receiver) = (path[i], path[i + 1]);
        let receiver_to = if receiver == last {
            q
        } else {
            match first_rcv(cur.local(receiver)) {
                Some(x) => x,
                None if i == 0 => {
                    return Err(hyp(
                        "iv",
                        format!("vertex {receiver} cannot receive before the first send"),
                    ))
                }
                None => {
                    prime(&mut cur, &mut steps, receiver, Classification::ReceiveOnly)?;
                    first_rcv(cur.local(receiver)).expect("receive-only state receives")
                }
            }
        };
        let sender_to = if i == 0 {
            p
        } else {
            prime(&mut cur, &mut steps, sender, Classification::SendOnly)?;
            first_snd(cur.local(sender)).expect("send-only state sends")
        };
        cur.set(sender, sender_to);
        cur.set(receiver, receiver_to);
        steps.push(PathStep {
            state: cur.clone(),
            action: Some(TOKEN_ACTION.into()),
        });
    }
    Ok(steps)
}
