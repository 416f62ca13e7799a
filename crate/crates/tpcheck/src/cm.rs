//! Bounded simulation of two-counter machines by a direction-aware template on
//! bidirectional rings.
//!
//! The process at vertex 1 is the controller; every other process is a memory
//! cell holding one bit per counter, so a ring of size `n` stores counter
//! values up to `n - 1`. Commands are numbered `0 inc1, 1 dec1, 2 tz1, 3 inc2,
//! 4 dec2, 5 tz2`. Every process keeps a command register modulo 6, and all
//! registers agree whenever the controller holds the token.
//!
//! Rounds:
//! - rotate: the controller sends `ccw` and the token travels once around the
//!   ring, each memory cell incrementing its register;
//! - execute: the controller sends `cw` and each cell in turn either acts on
//!   its bit and returns the token `ccw` along the cells it came through, or
//!   forwards it `cw`. A token arriving back `cw` means no cell acted; the
//!   controller then unwinds the forwarded cells with a `ccw` pass.
//!
//! An increment acts on a cell whose bit is 0, a decrement or zero test acts
//! on a cell whose bit is 1. A failed increment sends the controller into a
//! non-halting rotate loop. A decrement of zero leaves the counter at zero.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::logic::{parse_formula, Formula};
use crate::template::{ProcessTemplate, TemplateSpec};
use crate::topology::{make_biring, Topology};

/// Atom labeling the controller's halting states.
pub const HALT_ATOM: &str = "HALT";

/// Largest ring size accepted by [`cm_to_biring`].
pub const MAX_SIM_SIZE: usize = 6;

/// One instruction of a two-counter machine. `counter` is 1 or 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Instruction {
    Inc { counter: u8, next: String },
    Dec { counter: u8, next: String },
    Tz { counter: u8, zero: String, nonzero: String },
    Goto { next: String },
}

impl Instruction {
    fn targets(&self) -> Vec<&str> {
        match self {
            Instruction::Inc { next, .. } | Instruction::Dec { next, .. } | Instruction::Goto { next } => {
                vec![next]
            }
            Instruction::Tz { zero, nonzero, .. } => vec![zero, nonzero],
        }
    }

    fn counter(&self) -> Option<u8> {
        match self {
            Instruction::Inc { counter, .. } | Instruction::Dec { counter, .. } | Instruction::Tz { counter, .. } => {
                Some(*counter)
            }
            Instruction::Goto { .. } => None,
        }
    }
}

/// A deterministic two-counter machine with a unique halting state, which has
/// no instruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterMachine {
    pub start: String,
    pub halt: String,
    pub program: BTreeMap<String, Instruction>,
}

impl CounterMachine {
    pub fn new(start: &str, halt: &str, program: impl IntoIterator<Item = (&'static str, Instruction)>) -> Result<Self> {
        let cm = CounterMachine {
            start: start.to_string(),
            halt: halt.to_string(),
            program: program.into_iter().map(|(q, i)| (q.to_string(), i)).collect(),
        };
        cm.validate()?;
        Ok(cm)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cm: CounterMachine = serde_json::from_str(text)?;
        cm.validate()?;
        Ok(cm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.program.contains_key(&self.halt) {
            return Err(invalid(format!("halting state `{}` must not have an instruction", self.halt)));
        }
        let known = |q: &str| q == self.halt || self.program.contains_key(q);
        if !known(&self.start) {
            return Err(Error::Unknown {
                kind: "counter machine state",
                name: self.start.clone(),
            });
        }
        for (q, ins) in &self.program {
            if let Some(c) = ins.counter() {
                if c != 1 && c != 2 {
                    return Err(invalid(format!("state `{q}`: counter must be 1 or 2, got {c}")));
                }
            }
            for t in ins.targets() {
                if !known(t) {
                    return Err(Error::Unknown {
                        kind: "counter machine state",
                        name: t.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of control states including the halting state.
    pub fn num_states(&self) -> usize {
        self.program.len() + 1
    }
}

/// Result of [`cm_reference_run`]: configurations `(state, c1, c2)` starting
/// with the initial one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReferenceRun {
    pub trace: Vec<(String, u64, u64)>,
    pub halted: bool,
    /// An increment exceeded the bound and the run loops in place.
    pub overflowed: bool,
}

/// Runs `cm` directly with both counters bounded by `counter_bound`. An
/// increment past the bound makes the run repeat its configuration forever.
/// The trace has `max_steps` entries unless the halting state is reached.
pub fn cm_reference_run(cm: &CounterMachine, counter_bound: u64, max_steps: usize) -> Result<ReferenceRun> {
    if counter_bound == 0 || max_steps == 0 {
        return Err(invalid("counter bound and step bound must be positive"));
    }
    let mut q = cm.start.clone();
    let mut c = [0u64; 2];
    let mut trace = Vec::new();
    let mut overflowed = false;
    while trace.len() < max_steps {
        trace.push((q.clone(), c[0], c[1]));
        if q == cm.halt {
            return Ok(ReferenceRun {
                trace,
                halted: true,
                overflowed,
            });
        }
        if overflowed {
            continue;
        }
        match &cm.program[&q] {
            Instruction::Inc { counter, next } => {
                let slot = &mut c[*counter as usize - 1];
                if *slot == counter_bound {
                    overflowed = true;
                } else {
                    *slot += 1;
                    q = next.clone();
                }
            }
            Instruction::Dec { counter, next } => {
                let slot = &mut c[*counter as usize - 1];
                *slot = slot.saturating_sub(1);
                q = next.clone();
            }
            Instruction::Tz { counter, zero, nonzero } => {
                q = if c[*counter as usize - 1] == 0 { zero } else { nonzero }.clone();
            }
            Instruction::Goto { next } => q = next.clone(),
        }
    }
    Ok(ReferenceRun {
        trace,
        halted: false,
        overflowed,
    })
}

/// Whether `cm` halts with counters bounded by `counter_bound`. Exact: a run
/// longer than the number of bounded configurations repeats one.
pub fn halts_within_bound(cm: &CounterMachine, counter_bound: u64) -> Result<bool> {
    let configs = cm.num_states() as u64 * (counter_bound + 1).pow(2);
    Ok(cm_reference_run(cm, counter_bound, configs as usize + 1)?.halted)
}

/// A generated simulation instance.
#[derive(Clone, Debug)]
pub struct SimBundle {
    pub template: ProcessTemplate,
    pub topology: Topology,
    pub halt_atom: &'static str,
}

impl SimBundle {
    /// `forall i . A G !HALT@i`, true iff the bounded run never halts.
    pub fn non_halting_formula(&self) -> Formula {
        non_halting_formula()
    }
}

pub fn non_halting_formula() -> Formula {
    parse_formula(&format!("forall i . A G !{HALT_ATOM}@i")).expect("fixed formula parses")
}

/// Builds the template and `biring(n)` simulating `cm` with counters bounded
/// by `n - 1`. Requires `2 <= n <= MAX_SIM_SIZE`.
pub fn cm_to_biring(cm: &CounterMachine, n: usize) -> Result<SimBundle> {
    cm_to_biring_limit(cm, n, MAX_SIM_SIZE)
}

/// As [`cm_to_biring`] with an explicit size limit.
pub fn cm_to_biring_limit(cm: &CounterMachine, n: usize, limit: usize) -> Result<SimBundle> {
    cm.validate()?;
    if n > limit {
        return Err(Error::BoundExceeded(format!(
            "simulation ring size {n} exceeds the limit {limit}"
        )));
    }
    let topology = make_biring(n)?;
    let template = simulation_template(cm)?;
    Ok(SimBundle {
        template,
        topology,
        halt_atom: HALT_ATOM,
    })
}

/// Control position of the controller: a machine state or the overflow loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ctrl {
    State(usize),
    Stuck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CellPhase {
    Idle,
    Rotate,
    Forward,
    Passed,
    Return,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Local {
    /// Token: about to start the next round for `q`.
    Ctl(Ctrl, u8),
    /// No token: waiting for a `ccw` return, then continue with `q`.
    Wait(Ctrl, u8),
    /// No token: execute round for machine state `q` in flight.
    Exec(usize, u8),
    /// Token: start the unwind pass, then continue with `q`.
    Unwind(Ctrl, u8),
    Cell(CellPhase, [bool; 2], u8),
}

struct Compiled<'a> {
    names: Vec<&'a str>,
    halt: usize,
    program: Vec<Option<&'a Instruction>>,
    index: HashMap<&'a str, usize>,
}

impl<'a> Compiled<'a> {
    fn new(cm: &'a CounterMachine) -> Self {
        let mut names: Vec<&str> = cm.program.keys().map(String::as_str).collect();
        names.push(&cm.halt);
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let program = names.iter().map(|q| cm.program.get(*q)).collect();
        Compiled {
            halt: names.len() - 1,
            names,
            program,
            index,
        }
    }

    fn state(&self, q: &str) -> Ctrl {
        Ctrl::State(self.index[q])
    }

    fn name(&self, l: Local) -> String {
        let ctrl = |c: Ctrl| match c {
            Ctrl::State(q) => format!("q={}", self.names[q]),
            Ctrl::Stuck => "stuck".to_string(),
        };
        match l {
            Local::Ctl(c, r) => format!("ctl[{}|r{r}]", ctrl(c)),
            Local::Wait(c, r) => format!("wait[{}|r{r}]", ctrl(c)),
            Local::Exec(q, r) => format!("exec[{}|r{r}]", ctrl(Ctrl::State(q))),
            Local::Unwind(c, r) => format!("unwind[{}|r{r}]", ctrl(c)),
            Local::Cell(p, b, r) => {
                let phase = match p {
                    CellPhase::Idle => "idle",
                    CellPhase::Rotate => "rotate",
                    CellPhase::Forward => "forward",
                    CellPhase::Passed => "passed",
                    CellPhase::Return => "return",
                };
                format!("cell[{phase}|b{}{}|r{r}]", b[0] as u8, b[1] as u8)
            }
        }
    }

    fn has_token(l: Local) -> bool {
        match l {
            Local::Ctl(..) | Local::Unwind(..) => true,
            Local::Wait(..) | Local::Exec(..) => false,
            Local::Cell(p, ..) => matches!(p, CellPhase::Rotate | CellPhase::Forward | CellPhase::Return),
        }
    }

    /// Command number of an instruction, or `None` for `goto`.
    fn command(ins: &Instruction) -> Option<u8> {
        let base = match ins {
            Instruction::Inc { .. } => 0,
            Instruction::Dec { .. } => 1,
            Instruction::Tz { .. } => 2,
            Instruction::Goto { .. } => return None,
        };
        Some(base + 3 * (ins.counter()? - 1))
    }

    fn successors(&self, l: Local) -> Vec<(&'static str, Local)> {
        let next_r = |r: u8| (r + 1) % 6;
        match l {
            Local::Ctl(c, r) => {
                let ins = match c {
                    Ctrl::State(q) => self.program[q],
                    Ctrl::Stuck => None,
                };
                match ins {
                    None => vec![("snd:ccw", Local::Wait(c, next_r(r)))],
                    Some(Instruction::Goto { next }) => {
                        vec![("snd:ccw", Local::Wait(self.state(next), next_r(r)))]
                    }
                    Some(ins) if Self::command(ins) != Some(r) => vec![("snd:ccw", Local::Wait(c, next_r(r)))],
                    Some(_) => {
                        let Ctrl::State(q) = c else { unreachable!("stuck has no instruction") };
                        vec![("snd:cw", Local::Exec(q, r))]
                    }
                }
            }
            Local::Wait(c, r) => vec![("rcv:ccw", Local::Ctl(c, r))],
            Local::Unwind(c, r) => vec![("snd:ccw", Local::Wait(c, r))],
            Local::Exec(q, r) => {
                let (acted, idle) = match self.program[q].expect("exec only for instructions") {
                    Instruction::Inc { next, .. } => (self.state(next), Ctrl::Stuck),
                    Instruction::Dec { next, .. } => (self.state(next), self.state(next)),
                    Instruction::Tz { zero, nonzero, .. } => (self.state(nonzero), self.state(zero)),
                    Instruction::Goto { .. } => unreachable!("goto never executes"),
                };
                vec![("rcv:ccw", Local::Ctl(acted, r)), ("rcv:cw", Local::Unwind(idle, r))]
            }
            Local::Cell(phase, b, r) => match phase {
                CellPhase::Idle => {
                    let slot = (r / 3) as usize;
                    // Increments act on a clear bit; decrements and zero tests on a set one.
                    let acts = (r % 3 == 0) != b[slot];
                    let mut after = b;
                    match r % 3 {
                        0 => after[slot] = true,
                        1 => after[slot] = false,
                        _ => {}
                    }
                    let on_cw = if acts {
                        Local::Cell(CellPhase::Return, after, r)
                    } else {
                        Local::Cell(CellPhase::Forward, b, r)
                    };
                    vec![
                        ("rcv:ccw", Local::Cell(CellPhase::Rotate, b, next_r(r))),
                        ("rcv:cw", on_cw),
                    ]
                }
                CellPhase::Rotate | CellPhase::Return => vec![("snd:ccw", Local::Cell(CellPhase::Idle, b, r))],
                CellPhase::Forward => vec![("snd:cw", Local::Cell(CellPhase::Passed, b, r))],
                CellPhase::Passed => vec![("rcv:ccw", Local::Cell(CellPhase::Return, b, r))],
            },
        }
    }
}

fn simulation_template(cm: &CounterMachine) -> Result<ProcessTemplate> {
    let comp = Compiled::new(cm);
    let init_ctl = Local::Ctl(comp.state(&cm.start), 0);
    let init_cell = Local::Cell(CellPhase::Idle, [false, false], 0);
    let mut order = vec![init_ctl, init_cell];
    let mut seen: HashMap<Local, ()> = order.iter().map(|&l| (l, ())).collect();
    let mut queue: VecDeque<Local> = order.iter().copied().collect();
    let mut transitions = Vec::new();
    while let Some(l) = queue.pop_front() {
        for (act, t) in comp.successors(l) {
            transitions.push((comp.name(l), act.to_string(), comp.name(t)));
            if seen.insert(t, ()).is_none() {
                order.push(t);
                queue.push_back(t);
            }
        }
    }
    let dirs = vec!["cw".to_string(), "ccw".to_string()];
    let halting: Vec<String> = order
        .iter()
        .filter(|l| matches!(l, Local::Ctl(Ctrl::State(q), _) if *q == comp.halt))
        .map(|&l| comp.name(l))
        .collect();
    let spec = TemplateSpec {
        states: order.iter().map(|&l| comp.name(l)).collect(),
        token_states: order
            .iter()
            .filter(|&&l| Compiled::has_token(l))
            .map(|&l| comp.name(l))
            .collect(),
        initial: vec![comp.name(init_ctl), comp.name(init_cell)],
        internal_actions: vec![],
        snd_directions: dirs.clone(),
        rcv_directions: dirs,
        transitions,
        labels: halting.into_iter().map(|s| (s, vec![HALT_ATOM.to_string()])).collect(),
    };
    ProcessTemplate::from_spec(&spec)
}

impl fmt::Display for CounterMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {} halt {}", self.start, self.halt)?;
        for (q, ins) in &self.program {
            match ins {
                Instruction::Inc { counter, next } => writeln!(f, "  {q}: inc{counter} -> {next}")?,
                Instruction::Dec { counter, next } => writeln!(f, "  {q}: dec{counter} -> {next}")?,
                Instruction::Tz { counter, zero, nonzero } => {
                    writeln!(f, "  {q}: tz{counter} zero -> {zero}, nonzero -> {nonzero}")?
                }
                Instruction::Goto { next } => writeln!(f, "  {q}: goto {next}")?,
            }
        }
        Ok(())
    }
}

fn inc(counter: u8, next: &str) -> Instruction {
    Instruction::Inc {
        counter,
        next: next.into(),
    }
}

fn dec(counter: u8, next: &str) -> Instruction {
    Instruction::Dec {
        counter,
        next: next.into(),
    }
}

fn tz(counter: u8, zero: &str, nonzero: &str) -> Instruction {
    Instruction::Tz {
        counter,
        zero: zero.into(),
        nonzero: nonzero.into(),
    }
}

/// Hand-written machines covering looping, overflow, both counters, and
/// halting thresholds 1, 2 and 3.
pub fn example_machines() -> Vec<(&'static str, CounterMachine)> {
    let build = |start, prog: Vec<(&'static str, Instruction)>| {
        CounterMachine::new(start, "h", prog).expect("example machines are well formed")
    };
    vec![
        ("self-loop", build("q0", vec![("q0", Instruction::Goto { next: "q0".into() })])),
        (
            "count-two",
            build(
                "q0",
                vec![
                    ("q0", inc(1, "q1")),
                    ("q1", inc(1, "q2")),
                    ("q2", tz(1, "h", "q3")),
                    ("q3", dec(1, "q2")),
                ],
            ),
        ),
        (
            "transfer-three",
            build(
                "q0",
                vec![
                    ("q0", inc(1, "q1")),
                    ("q1", inc(1, "q2")),
                    ("q2", inc(1, "q3")),
                    ("q3", tz(1, "h", "q4")),
                    ("q4", dec(1, "q5")),
                    ("q5", inc(2, "q3")),
                ],
            ),
        ),
        ("unbounded", build("q0", vec![("q0", inc(2, "q0"))])),
        (
            "ping-pong",
            build(
                "q0",
                vec![
                    ("q0", inc(1, "q1")),
                    ("q1", inc(2, "q2")),
                    ("q2", dec(1, "q3")),
                    ("q3", tz(2, "q0", "q4")),
                    ("q4", dec(2, "q5")),
                    ("q5", tz(1, "h", "q0")),
                ],
            ),
        ),
    ]
}
