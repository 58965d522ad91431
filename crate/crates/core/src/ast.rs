//! Abstract syntax for the supported ASP fragment.
//!
//! The fragment covers facts, normal and disjunctive rules with negation as
//! failure, comparison builtins over the six relations, binary integer
//! arithmetic and the anonymous term `_`. Aggregates, choice rules and weak
//! constraints are outside the fragment and rejected by the parser.

use std::collections::BTreeSet;
use std::fmt;

/// Binary arithmetic operator. Left-associative, integer-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    /// Binding strength for the printer; `*`/`/` bind tighter than `+`/`-`.
    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

/// Comparison relation of a builtin literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Eq => "=",
            Rel::Ne => "!=",
        }
    }
}

/// A constant: an integer or a symbolic constant (lowercase identifier).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// A term: variable, constant, the anonymous term, or binary arithmetic.
///
/// Anonymous terms carry no name and never unify across occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(Constant),
    Anonymous,
    Arith {
        op: ArithOp,
        left: Box<Term>,
        right: Box<Term>,
    },
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Variable(name.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Constant(Constant::Int(n))
    }

    pub fn sym(name: impl Into<String>) -> Term {
        Term::Constant(Constant::Sym(name.into()))
    }

    /// Collects the named variables of the term; anonymous terms contribute
    /// nothing, arithmetic is descended on both sides.
    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Variable(v) => {
                out.insert(v.as_str());
            }
            Term::Constant(_) | Term::Anonymous => {}
            Term::Arith { left, right, .. } => {
                left.collect_vars(out);
                right.collect_vars(out);
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) | Term::Anonymous => false,
            Term::Constant(_) => true,
            Term::Arith { left, right, .. } => left.is_ground() && right.is_ground(),
        }
    }

    pub fn contains_anonymous(&self) -> bool {
        match self {
            Term::Anonymous => true,
            Term::Variable(_) | Term::Constant(_) => false,
            Term::Arith { left, right, .. } => {
                left.contains_anonymous() || right.contains_anonymous()
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_child: bool) -> fmt::Result {
        match self {
            Term::Variable(v) => write!(f, "{v}"),
            Term::Constant(c) => write!(f, "{c}"),
            Term::Anonymous => write!(f, "_"),
            Term::Arith { op, left, right } => {
                let prec = op.precedence();
                // Left-associative: the right child needs parentheses at equal
                // precedence, the left child only at strictly lower.
                let parens = prec < parent || (prec == parent && right_child);
                if parens {
                    write!(f, "(")?;
                }
                left.fmt_prec(f, prec, false)?;
                write!(f, "{}", op.symbol())?;
                right.fmt_prec(f, prec, true)?;
                if parens {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

/// Predicate signature: name plus arity. Two predicates with the same name
/// but different arities are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredSig {
    pub name: String,
    pub arity: usize,
}

impl PredSig {
    pub fn new(name: impl Into<String>, arity: usize) -> PredSig {
        PredSig {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Display for PredSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A predicate atom `p(t1,...,tn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn sig(&self) -> PredSig {
        PredSig::new(self.predicate.clone(), self.args.len())
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for arg in &self.args {
            arg.collect_vars(&mut out);
        }
        out
    }

    /// Variables that occur as a plain argument of this atom. Only these
    /// occurrences bind a variable; occurrences inside arithmetic do not.
    pub fn binding_vars(&self) -> BTreeSet<&str> {
        self.args
            .iter()
            .filter_map(|t| match t {
                Term::Variable(v) => Some(v.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{arg}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A body literal: a possibly naf-negated atom, or a comparison builtin.
///
/// Builtins and naf literals never bind variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Atom { atom: Atom, naf: bool },
    Builtin { rel: Rel, left: Term, right: Term },
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal::Atom { atom, naf: false }
    }

    pub fn naf(atom: Atom) -> Literal {
        Literal::Atom { atom, naf: true }
    }

    pub fn builtin(rel: Rel, left: Term, right: Term) -> Literal {
        Literal::Builtin { rel, left, right }
    }

    /// The variable set of the literal: union over its terms, anonymous
    /// excluded, arithmetic descended.
    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        match self {
            Literal::Atom { atom, .. } => {
                for arg in &atom.args {
                    arg.collect_vars(&mut out);
                }
            }
            Literal::Builtin { left, right, .. } => {
                left.collect_vars(&mut out);
                right.collect_vars(&mut out);
            }
        }
        out
    }

    /// Variables this literal binds for safety purposes: plain variable
    /// arguments of a positive non-builtin atom, nothing otherwise.
    pub fn binding_vars(&self) -> BTreeSet<&str> {
        match self {
            Literal::Atom { atom, naf: false } => atom.binding_vars(),
            _ => BTreeSet::new(),
        }
    }

    pub fn as_positive_atom(&self) -> Option<&Atom> {
        match self {
            Literal::Atom { atom, naf: false } => Some(atom),
            _ => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom { atom, naf } => {
                if *naf {
                    write!(f, "not ")?;
                }
                write!(f, "{atom}")
            }
            Literal::Builtin { rel, left, right } => {
                write!(f, "{left} {} {right}", rel.symbol())
            }
        }
    }
}

/// Why a rule is rejected as structurally invalid.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleViolation {
    /// A variable with no binding occurrence in a positive non-builtin body
    /// atom; grounding could not instantiate it.
    #[error("unsafe variable {variable} in rule: {rule}")]
    UnsafeVariable { variable: String, rule: String },
    #[error("anonymous term in rule head: {rule}")]
    AnonymousInHead { rule: String },
    #[error("anonymous term inside an arithmetic expression: {rule}")]
    AnonymousInArith { rule: String },
    #[error("anonymous term in a comparison: {rule}")]
    AnonymousInBuiltin { rule: String },
    /// `not q(_)` has no binding occurrence for the hidden variable; the
    /// fragment keeps anonymous terms to positive body atoms.
    #[error("anonymous term under negation: {rule}")]
    AnonymousInNegation { rule: String },
}

/// A rule `h1 | ... | hm :- b1, ..., bn.` with zero or more head atoms.
///
/// Zero head atoms is a constraint, one a normal rule, more a disjunctive
/// rule. A fact is a single ground head atom with an empty body. `line` is
/// the source line for diagnostics and is not part of rule identity.
#[derive(Debug, Clone, Eq)]
pub struct Rule {
    pub head: Vec<Atom>,
    pub body: Vec<Literal>,
    pub line: u32,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl std::hash::Hash for Rule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.head.hash(state);
        self.body.hash(state);
    }
}

impl Rule {
    pub fn new(head: Vec<Atom>, body: Vec<Literal>) -> Rule {
        Rule {
            head,
            body,
            line: 0,
        }
    }

    pub fn fact(atom: Atom) -> Rule {
        Rule::new(vec![atom], Vec::new())
    }

    pub fn at_line(mut self, line: u32) -> Rule {
        self.line = line;
        self
    }

    /// H(r): the atoms in the head.
    pub fn head_atoms(&self) -> &[Atom] {
        &self.head
    }

    /// B(r): the literals in the body.
    pub fn body_literals(&self) -> &[Literal] {
        &self.body
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty() && self.head.len() == 1 && self.head[0].is_ground()
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    /// All named variables of the rule, head and body, arithmetic included.
    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for atom in &self.head {
            for arg in &atom.args {
                arg.collect_vars(&mut out);
            }
        }
        for lit in &self.body {
            out.extend(lit.vars());
        }
        out
    }

    /// Variables with a binding occurrence in some positive non-builtin body
    /// atom.
    pub fn bound_vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for lit in &self.body {
            out.extend(lit.binding_vars());
        }
        out
    }

    /// The number of joins in the body: the sum over unordered pairs of body
    /// literals of the number of variables the pair shares.
    pub fn count_joins(&self) -> usize {
        let var_sets: Vec<BTreeSet<&str>> = self.body.iter().map(Literal::vars).collect();
        let mut total = 0;
        for i in 0..var_sets.len() {
            for j in i + 1..var_sets.len() {
                total += var_sets[i].intersection(&var_sets[j]).count();
            }
        }
        total
    }

    /// Structural validity: anonymous terms only as plain arguments of body
    /// atoms, and every variable bound by a positive non-builtin body atom.
    pub fn validate(&self) -> Result<(), RuleViolation> {
        for atom in &self.head {
            if atom.args.iter().any(Term::contains_anonymous) {
                return Err(RuleViolation::AnonymousInHead {
                    rule: self.to_string(),
                });
            }
        }
        for lit in &self.body {
            match lit {
                Literal::Atom { atom, naf } => {
                    if *naf && atom.args.iter().any(Term::contains_anonymous) {
                        return Err(RuleViolation::AnonymousInNegation {
                            rule: self.to_string(),
                        });
                    }
                    for arg in &atom.args {
                        if let Term::Arith { .. } = arg {
                            if arg.contains_anonymous() {
                                return Err(RuleViolation::AnonymousInArith {
                                    rule: self.to_string(),
                                });
                            }
                        }
                    }
                }
                Literal::Builtin { left, right, .. } => {
                    if left.contains_anonymous() || right.contains_anonymous() {
                        return Err(RuleViolation::AnonymousInBuiltin {
                            rule: self.to_string(),
                        });
                    }
                }
            }
        }
        let bound = self.bound_vars();
        if let Some(var) = self.vars().iter().find(|v| !bound.contains(*v)) {
            return Err(RuleViolation::UnsafeVariable {
                variable: (*var).to_string(),
                rule: self.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.head.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{atom}")?;
        }
        if !self.body.is_empty() || self.head.is_empty() {
            if !self.head.is_empty() {
                write!(f, " ")?;
            }
            write!(f, ":- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{lit}")?;
            }
        }
        write!(f, ".")
    }
}

/// A program: the parsed statements in input order.
///
/// Facts and proper rules are kept in one sequence so printing preserves the
/// input ordering exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub statements: Vec<Rule>,
}

impl Program {
    pub fn new(statements: Vec<Rule>) -> Program {
        Program { statements }
    }

    /// The non-fact statements (proper rules and constraints).
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.statements.iter().filter(|r| !r.is_fact())
    }

    pub fn facts(&self) -> impl Iterator<Item = &Rule> {
        self.statements.iter().filter(|r| r.is_fact())
    }

    /// Facts^I(P): the distinct input fact atoms (multiset-free).
    pub fn distinct_facts(&self) -> BTreeSet<&Atom> {
        self.facts().map(|r| &r.head[0]).collect()
    }

    /// IDB(P): predicates defined by at least one non-fact rule.
    pub fn idb(&self) -> BTreeSet<PredSig> {
        self.rules()
            .flat_map(|r| r.head.iter().map(Atom::sig))
            .collect()
    }

    /// EDB(P): every predicate occurring in the program that is not in
    /// IDB(P), i.e. defined only by facts (or not defined at all).
    pub fn edb(&self) -> BTreeSet<PredSig> {
        let idb = self.idb();
        self.all_predicates()
            .into_iter()
            .filter(|p| !idb.contains(p))
            .collect()
    }

    pub fn all_predicates(&self) -> BTreeSet<PredSig> {
        let mut out = BTreeSet::new();
        for rule in &self.statements {
            for atom in &rule.head {
                out.insert(atom.sig());
            }
            for lit in &rule.body {
                if let Literal::Atom { atom, .. } = lit {
                    out.insert(atom.sig());
                }
            }
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.statements {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
