use std::collections::BTreeSet;
use std::fmt;

/// State/path formula tree, generic over its atoms.
///
/// Path operators (`Until`, `Eventually`, `Always`) are only meaningful below a
/// path quantifier; the parser enforces this for user input.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr<A> {
    True,
    False,
    Atom(A),
    Not(Box<Expr<A>>),
    And(Box<Expr<A>>, Box<Expr<A>>),
    Or(Box<Expr<A>>, Box<Expr<A>>),
    Implies(Box<Expr<A>>, Box<Expr<A>>),
    AllPaths(Box<Expr<A>>),
    SomePath(Box<Expr<A>>),
    Until(Box<Expr<A>>, Box<Expr<A>>),
    Eventually(Box<Expr<A>>),
    Always(Box<Expr<A>>),
}

impl<A> Expr<A> {
    pub fn atom(a: A) -> Self {
        Expr::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Self) -> Self {
        Expr::Not(Box::new(e))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Self, b: Self) -> Self {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn all_paths(e: Self) -> Self {
        Expr::AllPaths(Box::new(e))
    }

    pub fn some_path(e: Self) -> Self {
        Expr::SomePath(Box::new(e))
    }

    pub fn until(a: Self, b: Self) -> Self {
        Expr::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(e: Self) -> Self {
        Expr::Eventually(Box::new(e))
    }

    pub fn always(e: Self) -> Self {
        Expr::Always(Box::new(e))
    }

    /// Rebuilds the tree with every atom replaced by `f(atom)`.
    pub fn map_atoms<B>(&self, f: &mut impl FnMut(&A) -> Expr<B>) -> Expr<B> {
        use Expr::*;
        let mut bx = |e: &Expr<A>| Box::new(e.map_atoms(&mut *f));
        match self {
            True => True,
            False => False,
            Atom(a) => f(a),
            Not(e) => Not(bx(e)),
            And(a, b) => {
                let a = bx(a);
                And(a, bx(b))
            }
            Or(a, b) => {
                let a = bx(a);
                Or(a, bx(b))
            }
            Implies(a, b) => {
                let a = bx(a);
                Implies(a, bx(b))
            }
            AllPaths(e) => AllPaths(bx(e)),
            SomePath(e) => SomePath(bx(e)),
            Until(a, b) => {
                let a = bx(a);
                Until(a, bx(b))
            }
            Eventually(e) => Eventually(bx(e)),
            Always(e) => Always(bx(e)),
        }
    }

    pub fn children(&self) -> Vec<&Expr<A>> {
        use Expr::*;
        match self {
            True | False | Atom(_) => vec![],
            Not(e) | AllPaths(e) | SomePath(e) | Eventually(e) | Always(e) => vec![e],
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) => vec![a, b],
        }
    }

    pub fn atoms(&self) -> Vec<&A> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a A>) {
        if let Expr::Atom(a) = self {
            out.push(a);
        }
        for c in self.children() {
            c.collect_atoms(out);
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    /// Maximal nesting of path quantifiers.
    pub fn path_depth(&self) -> usize {
        let inner = self.children().into_iter().map(Expr::path_depth).max().unwrap_or(0);
        match self {
            Expr::AllPaths(_) | Expr::SomePath(_) => inner + 1,
            _ => inner,
        }
    }

    pub fn is_temporal(&self) -> bool {
        matches!(self, Expr::Until(..) | Expr::Eventually(_) | Expr::Always(_))
    }

    /// True iff no temporal operator occurs outside the scope of a path quantifier.
    pub fn is_state_formula(&self) -> bool {
        match self {
            Expr::AllPaths(_) | Expr::SomePath(_) => true,
            e if e.is_temporal() => false,
            e => e.children().into_iter().all(Expr::is_state_formula),
        }
    }
}

impl<A: fmt::Display> fmt::Display for Expr<A> {
    /// Fully parenthesized binary operators; unary operators are prefixes.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Atom(a) => write!(f, "{a}"),
            Not(e) => write!(f, "!{e}"),
            And(a, b) => write!(f, "({a} & {b})"),
            Or(a, b) => write!(f, "({a} | {b})"),
            Implies(a, b) => write!(f, "({a} -> {b})"),
            AllPaths(e) => write!(f, "A {e}"),
            SomePath(e) => write!(f, "E {e}"),
            Until(a, b) => write!(f, "({a} U {b})"),
            Eventually(e) => write!(f, "F {e}"),
            Always(e) => write!(f, "G {e}"),
        }
    }
}

/// Atom of an indexed formula body.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexedAtom {
    /// Local proposition `name` of the process bound to `var`.
    Prop { name: String, var: String },
    /// The process bound to `var` holds the token.
    Tok { var: String },
    /// Both variables denote the same vertex.
    Eq(String, String),
}

impl IndexedAtom {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            IndexedAtom::Prop { var, .. } | IndexedAtom::Tok { var } => vec![var],
            IndexedAtom::Eq(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for IndexedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexedAtom::Prop { name, var } => write!(f, "{name}@{var}"),
            IndexedAtom::Tok { var } => write!(f, "tok@{var}"),
            IndexedAtom::Eq(a, b) => write!(f, "{a} = {b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
}

impl QuantKind {
    pub fn keyword(self) -> &'static str {
        match self {
            QuantKind::Forall => "forall",
            QuantKind::Exists => "exists",
        }
    }
}

/// One bound index variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Quantifier {
    pub kind: QuantKind,
    pub var: String,
    /// Ranges only over vertices not assigned to any earlier variable.
    pub distinct: bool,
    /// Ranges only over successors of the vertex bound to this earlier variable.
    pub in_edges_of: Option<String>,
}

impl Quantifier {
    pub fn new(kind: QuantKind, var: impl Into<String>) -> Self {
        Quantifier {
            kind,
            var: var.into(),
            distinct: false,
            in_edges_of: None,
        }
    }

    pub fn distinct(mut self) -> Self {
        self.distinct = true;
        self
    }

    pub fn in_edges_of(mut self, var: impl Into<String>) -> Self {
        self.in_edges_of = Some(var.into());
        self
    }

    fn same_block(&self, other: &Quantifier) -> bool {
        self.kind == other.kind
            && self.distinct == other.distinct
            && self.in_edges_of == other.in_edges_of
    }
}

/// Prenex indexed formula: a quantifier prefix over a closed-by-prefix body.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    pub prefix: Vec<Quantifier>,
    pub body: Expr<IndexedAtom>,
}

impl Formula {
    pub fn new(prefix: Vec<Quantifier>, body: Expr<IndexedAtom>) -> Self {
        Formula { prefix, body }
    }

    pub fn arity(&self) -> usize {
        self.prefix.len()
    }

    pub fn variables(&self) -> Vec<&str> {
        self.prefix.iter().map(|q| q.var.as_str()).collect()
    }

    /// Position (1-based) of each variable in the prefix.
    pub fn position_of(&self, var: &str) -> Option<usize> {
        self.prefix.iter().position(|q| q.var == var).map(|i| i + 1)
    }

    pub fn is_alternating(&self) -> bool {
        let kinds: BTreeSet<_> = self
            .prefix
            .iter()
            .map(|q| q.kind == QuantKind::Forall)
            .collect();
        kinds.len() > 1
    }

    /// The body with variable `x_j` read as position `j` of `tuple`:
    /// `p@x_j` becomes `p@j`, and `x = y` is decided by comparing vertices.
    pub fn close_body(&self, tuple: &[usize]) -> Expr<String> {
        debug_assert_eq!(tuple.len(), self.prefix.len());
        let pos = |v: &str| self.position_of(v).expect("body variables are bound");
        self.body.map_atoms(&mut |a| match a {
            IndexedAtom::Prop { name, var } => Expr::Atom(format!("{name}@{}", pos(var))),
            IndexedAtom::Tok { var } => Expr::Atom(format!("tok@{}", pos(var))),
            IndexedAtom::Eq(x, y) => {
                if tuple[pos(x) - 1] == tuple[pos(y) - 1] {
                    Expr::True
                } else {
                    Expr::False
                }
            }
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut i = 0;
        while i < self.prefix.len() {
            let head = &self.prefix[i];
            let mut j = i + 1;
            while j < self.prefix.len() && self.prefix[j].same_block(head) {
                j += 1;
            }
            write!(f, "{}", head.kind.keyword())?;
            for q in &self.prefix[i..j] {
                write!(f, " {}", q.var)?;
            }
            if head.distinct {
                write!(f, " distinct")?;
            }
            if let Some(y) = &head.in_edges_of {
                write!(f, " in E({y})")?;
            }
            write!(f, " ")?;
            i = j;
        }
        if !self.prefix.is_empty() {
            write!(f, ". ")?;
        }
        write!(f, "{}", self.body)
    }
}

/// Prefix length, path-quantifier depth and prefix alternation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct FormulaProfile {
    pub k: usize,
    pub d: usize,
    pub alternating: bool,
}

pub fn profile(f: &Formula) -> FormulaProfile {
    FormulaProfile {
        k: f.arity(),
        d: f.body.path_depth(),
        alternating: f.is_alternating(),
    }
}
