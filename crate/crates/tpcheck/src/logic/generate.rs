use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{Expr, Formula, IndexedAtom, QuantKind, Quantifier};
use crate::error::{invalid, Result};

fn tok(var: &str) -> Expr<IndexedAtom> {
    Expr::Atom(IndexedAtom::Tok { var: var.into() })
}

/// `exists x1 .. xk distinct . E F (tok@x1 & (tok@x1 U (tok@x2 & (tok@x2 U ... (tok@xk U tok@x1)))))`.
///
/// Some path lets the token visit `x1, .., xk, x1` in order while each holder
/// keeps it until the next one receives it. With a single token moving along
/// edges this forces the edges `x1 -> x2 -> .. -> xk -> x1`.
pub fn gen_phi_k(k: usize) -> Result<Formula> {
    if k < 2 {
        return Err(invalid(format!("the cycle formula needs k >= 2, got {k}")));
    }
    let vars: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let mut chain = tok(&vars[0]);
    for v in vars.iter().rev() {
        chain = Expr::and(tok(v), Expr::until(tok(v), chain));
    }
    let prefix = vars
        .iter()
        .map(|v| Quantifier::new(QuantKind::Exists, v.as_str()).distinct())
        .collect();
    Ok(Formula::new(prefix, Expr::some_path(Expr::eventually(chain))))
}

/// `adj(k, i)`: whenever `i` holds the token it keeps it until `k` gets it, or
/// symmetrically for `k`. On a unidirectional ring this says `k` is `i` or one of
/// its neighbours.
fn adjacency(k: &str, i: &str) -> Expr<IndexedAtom> {
    let hold_until = |a: &str, b: &str| {
        Expr::always(Expr::implies(tok(a), Expr::until(tok(a), tok(b))))
    };
    Expr::or(hold_until(i, k), hold_until(k, i))
}

/// `exists i exists j forall k . A (adj(k, i) | adj(k, j))`: two vertices whose
/// closed neighbourhoods cover the ring. Holds on rings of size at most 6.
pub fn gen_adj_formula() -> Formula {
    let prefix = vec![
        Quantifier::new(QuantKind::Exists, "i"),
        Quantifier::new(QuantKind::Exists, "j"),
        Quantifier::new(QuantKind::Forall, "k"),
    ];
    let body = Expr::all_paths(Expr::or(adjacency("k", "i"), adjacency("k", "j")));
    Formula::new(prefix, body)
}

/// Propositions used by [`random_formula`] besides `tok`.
pub const RANDOM_PROPS: &[&str] = &["crit", "wait"];

/// Seeded random formula with `k` quantifiers and path depth at most `d`.
///
/// Bodies draw atoms `p@x` for `p` in [`RANDOM_PROPS`] plus `tok@x` and index
/// equalities; with `k = 0` the only atoms are `true` and `false`.
pub fn random_formula(k: usize, d: usize, size: usize, seed: u64) -> Formula {
    random_formula_with(RANDOM_PROPS, k, d, size, seed)
}

pub fn random_formula_with(props: &[&str], k: usize, d: usize, size: usize, seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let mut prefix = Vec::with_capacity(k);
    for (i, v) in vars.iter().enumerate() {
        let kind = if rng.gen_bool(0.5) {
            QuantKind::Forall
        } else {
            QuantKind::Exists
        };
        let mut q = Quantifier::new(kind, v.as_str());
        if i > 0 && rng.gen_bool(0.5) {
            q = q.distinct();
        }
        if i > 0 && rng.gen_bool(0.1) {
            q = q.in_edges_of(vars[rng.gen_range(0..i)].as_str());
        }
        prefix.push(q);
    }
    let mut gen = BodyGen {
        rng: &mut rng,
        props,
        vars: &vars,
    };
    let body = gen.state(size.max(1), d);
    Formula::new(prefix, body)
}

/// Seeded random closed formula over the given atoms; a state formula with path
/// depth at most `d`.
pub fn random_closed_formula(atoms: &[&str], d: usize, size: usize, seed: u64) -> Expr<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = [String::from("_")];
    let mut gen = BodyGen {
        rng: &mut rng,
        props: atoms,
        vars: &vars,
    };
    gen.state(size.max(1), d).map_atoms(&mut |a| match a {
        IndexedAtom::Prop { name, .. } => Expr::Atom(name.clone()),
        IndexedAtom::Tok { .. } => Expr::Atom("tok".into()),
        IndexedAtom::Eq(..) => Expr::True,
    })
}

/// Seeded random path formula (no path quantifiers) over the given atoms.
pub fn random_path_formula(atoms: &[&str], size: usize, seed: u64) -> Expr<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = [String::from("_")];
    let mut gen = BodyGen {
        rng: &mut rng,
        props: atoms,
        vars: &vars,
    };
    gen.path(size.max(1), 0).map_atoms(&mut |a| match a {
        IndexedAtom::Prop { name, .. } => Expr::Atom(name.clone()),
        IndexedAtom::Tok { .. } => Expr::Atom("tok".into()),
        IndexedAtom::Eq(..) => Expr::True,
    })
}

struct BodyGen<'a, R: Rng> {
    rng: &'a mut R,
    props: &'a [&'a str],
    vars: &'a [String],
}

impl<R: Rng> BodyGen<'_, R> {
    fn leaf(&mut self) -> Expr<IndexedAtom> {
        if self.vars.is_empty() || (self.props.is_empty() && self.vars[0] == "_") {
            return if self.rng.gen_bool(0.5) { Expr::True } else { Expr::False };
        }
        let var = self.vars[self.rng.gen_range(0..self.vars.len())].clone();
        let closed = var == "_";
        let roll = self.rng.gen_range(0..20);
        match roll {
            0 => Expr::True,
            1 => Expr::False,
            2 if !closed && self.vars.len() > 1 => {
                let other = self.vars[self.rng.gen_range(0..self.vars.len())].clone();
                Expr::Atom(IndexedAtom::Eq(var, other))
            }
            3..=8 if !closed => Expr::Atom(IndexedAtom::Tok { var }),
            _ if self.props.is_empty() => Expr::Atom(IndexedAtom::Tok { var }),
            _ => {
                let name = self.props[self.rng.gen_range(0..self.props.len())].to_string();
                Expr::Atom(IndexedAtom::Prop { name, var })
            }
        }
    }

    fn split(&mut self, size: usize) -> (usize, usize) {
        let rest = size - 1;
        let left = self.rng.gen_range(1..rest);
        (left, rest - left)
    }

    /// State formula of exactly `size` nodes, path depth at most `d`.
    fn state(&mut self, size: usize, d: usize) -> Expr<IndexedAtom> {
        if size == 1 {
            return self.leaf();
        }
        let choices = if size >= 3 { 5 } else { 2 };
        match self.rng.gen_range(0..choices) {
            0 if d > 0 => {
                let inner = self.path(size - 1, d - 1);
                if self.rng.gen_bool(0.5) {
                    Expr::all_paths(inner)
                } else {
                    Expr::some_path(inner)
                }
            }
            0 | 1 => Expr::not(self.state(size - 1, d)),
            op => {
                let (l, r) = self.split(size);
                let a = self.state(l, d);
                let b = self.state(r, d);
                match op {
                    2 => Expr::and(a, b),
                    3 => Expr::or(a, b),
                    _ => Expr::implies(a, b),
                }
            }
        }
    }

    /// Path formula of exactly `size` nodes; nested path quantifiers have depth
    /// at most `d`.
    fn path(&mut self, size: usize, d: usize) -> Expr<IndexedAtom> {
        if size == 1 {
            return self.leaf();
        }
        let choices = if size >= 3 { 8 } else { 4 };
        match self.rng.gen_range(0..choices) {
            0 => Expr::not(self.path(size - 1, d)),
            1 => Expr::eventually(self.path(size - 1, d)),
            2 => Expr::always(self.path(size - 1, d)),
            3 => self.state(size, d),
            op => {
                let (l, r) = self.split(size);
                let a = self.path(l, d);
                let b = self.path(r, d);
                match op {
                    4 | 5 => Expr::until(a, b),
                    6 => Expr::and(a, b),
                    _ => Expr::or(a, b),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_closed, parse_formula, profile};

    #[test]
    fn phi_k_shape_and_profile() {
        let f = gen_phi_k(2).unwrap();
        assert_eq!(
            f.to_string(),
            "exists x1 x2 distinct . E F (tok@x1 & (tok@x1 U (tok@x2 & (tok@x2 U tok@x1))))"
        );
        for k in 2..6 {
            let f = gen_phi_k(k).unwrap();
            let p = profile(&f);
            assert_eq!((p.k, p.d, p.alternating), (k, 1, false));
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        }
        assert!(gen_phi_k(1).is_err());
    }

    #[test]
    fn adjacency_formula_profile() {
        let f = gen_adj_formula();
        let p = profile(&f);
        assert_eq!((p.k, p.d, p.alternating), (3, 1, true));
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn random_formulas_are_deterministic_and_bounded() {
        assert_eq!(random_formula(1, 1, 8, 7), random_formula(1, 1, 8, 7));
        for seed in 0..200 {
            let f = random_formula(2, 2, 12, seed);
            let p = profile(&f);
            assert_eq!(p.k, 2);
            assert!(p.d <= 2);
            assert_eq!(f.body.size(), 12);
        }
        let f = random_formula(0, 1, 6, 3);
        assert!(f.body.atoms().is_empty());
    }

    #[test]
    fn random_closed_formulas_round_trip() {
        for seed in 0..200 {
            let e = random_closed_formula(&["p", "q"], 2, 9, seed);
            assert!(e.is_state_formula());
            assert_eq!(parse_closed(&e.to_string()).unwrap(), e);
            let e = random_path_formula(&["p", "q"], 6, seed);
            assert_eq!(e.path_depth(), 0);
        }
    }
}
