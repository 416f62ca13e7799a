//! Graphviz DOT rendering of LTSs, topologies and contractions.

use std::fmt::Write;

use crate::contraction::Contraction;
use crate::lts::Lts;
use crate::topology::Topology;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// States as nodes labeled with their name and propositions; initial states
/// are drawn with a double border.
pub fn lts_to_dot(lts: &Lts, name: &str) -> String {
    let mut out = format!("digraph {} {{\n  node [shape=box];\n", quote(name));
    for s in 0..lts.num_states() {
        let props: Vec<&str> = lts.label(s).iter().map(String::as_str).collect();
        let label = if props.is_empty() {
            lts.state_name(s).to_string()
        } else {
            format!("{}\n{{{}}}", lts.state_name(s), props.join(","))
        };
        let peripheries = if lts.initial().contains(&s) { 2 } else { 1 };
        writeln!(out, "  s{s} [label={}, peripheries={peripheries}];", quote(&label)).unwrap();
    }
    for &(f, a, t) in lts.transitions() {
        writeln!(out, "  s{f} -> s{t} [label={}];", quote(&lts.actions()[a])).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Vertices `1..=n`; edges carry their send/receive directions when labeled.
pub fn topology_to_dot(g: &Topology, name: &str) -> String {
    let mut out = format!("digraph {} {{\n", quote(name));
    for v in g.vertices() {
        let peripheries = if v == g.initial() { 2 } else { 1 };
        writeln!(out, "  v{v} [label=\"{v}\", peripheries={peripheries}];").unwrap();
    }
    for &e in g.edges() {
        if g.is_direction_labeled() {
            let pairs: Vec<String> = g
                .direction_pairs(e)
                .iter()
                .map(|(s, r)| format!("{s}/{r}"))
                .collect();
            writeln!(out, "  v{} -> v{} [label={}];", e.0, e.1, quote(&pairs.join(" "))).unwrap();
        } else {
            writeln!(out, "  v{} -> v{};", e.0, e.1).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

/// Classes as nodes labeled with their members and carried tuple positions.
pub fn contraction_to_dot(c: &Contraction, name: &str) -> String {
    let mut out = format!("digraph {} {{\n  node [shape=ellipse];\n", quote(name));
    for (i, class) in c.classes.iter().enumerate() {
        let members: Vec<String> = class.members.iter().map(|v| v.to_string()).collect();
        let mut label = format!("{{{}}}", members.join(","));
        if !class.label.is_empty() {
            let pos: Vec<String> = class.label.iter().map(|p| format!("x{p}")).collect();
            write!(label, "\n{}", pos.join(",")).unwrap();
        }
        let peripheries = if i == c.initial { 2 } else { 1 };
        writeln!(out, "  c{i} [label={}, peripheries={peripheries}];", quote(&label)).unwrap();
    }
    for &(a, b) in &c.edges {
        writeln!(out, "  c{a} -> c{b};").unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::contract;
    use crate::system::build_system;
    use crate::template::builtin_template;
    use crate::topology::{make_biring, make_ring, IndexTuple};

    fn balanced(s: &str) -> bool {
        s.matches('{').count() == s.matches('}').count() && s.trim_end().ends_with('}')
    }

    #[test]
    fn renders_system() {
        let sys = build_system(&builtin_template("mutex").unwrap(), &make_ring(3).unwrap()).unwrap();
        let dot = lts_to_dot(sys.lts(), "mutex");
        assert!(dot.starts_with("digraph \"mutex\" {"));
        assert_eq!(dot.matches("->").count(), sys.lts().transitions().len());
        assert!(dot.contains("peripheries=2"));
    }

    #[test]
    fn renders_topology_and_contraction() {
        let g = make_biring(3).unwrap();
        let dot = topology_to_dot(&g, "g");
        assert!(dot.contains("cw/cw") && dot.contains("ccw/ccw"));
        let g = make_ring(6).unwrap();
        let c = contract(&g, &IndexTuple::new(vec![1, 4], &g).unwrap(), 1);
        let dot = contraction_to_dot(&c, "c");
        assert_eq!(dot.matches("->").count(), c.edges.len());
        assert!(dot.contains("x1") && dot.contains("x2"));
        assert!(balanced(&dot));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b\\c\nd"), "\"a\\\"b\\\\c\\nd\"");
    }
}
