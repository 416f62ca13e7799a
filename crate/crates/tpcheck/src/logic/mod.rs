//! Prenex indexed temporal logic: syntax trees, concrete syntax, instantiation
//! over a topology, and formula generators.

mod ast;
mod generate;
mod instantiate;
mod parser;

pub use ast::{profile, Expr, Formula, FormulaProfile, IndexedAtom, QuantKind, Quantifier};
pub use generate::{
    gen_adj_formula, gen_phi_k, random_closed_formula, random_formula, random_formula_with,
    random_path_formula, RANDOM_PROPS,
};
pub use instantiate::{instantiate, Leaf, Plan};
pub use parser::{parse_closed, parse_formula};
