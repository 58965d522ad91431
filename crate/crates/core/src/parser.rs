//! Parser for the supported ASP fragment.
//!
//! Hand-rolled tokenizer and recursive-descent parser. Statements are rules
//! terminated by `.`; `%` starts a comment running to end of line. Constructs
//! outside the fragment (aggregates, choice rules, weak constraints, strings,
//! intervals) are rejected with an error naming the construct rather than a
//! bare syntax error.

use crate::ast::{ArithOp, Atom, Constant, Literal, Program, Rel, Rule, RuleViolation, Term};

/// Predicate names carrying this prefix are reserved for linking and safety
/// predicates introduced by rule decomposition.
pub const RESERVED_PREDICATE_PREFIX: &str = "fresh_pred_";

/// Parser configuration.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept predicate names using the reserved `fresh_pred_` prefix.
    /// Off by default so fresh names never collide with user input; enabled
    /// when reading back programs this tool itself produced.
    pub allow_reserved_predicates: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: unsupported construct: {construct}")]
    Unsupported {
        line: u32,
        col: u32,
        construct: String,
    },
    #[error("{line}: predicate {predicate} uses the reserved prefix `{RESERVED_PREDICATE_PREFIX}`")]
    ReservedPredicate { line: u32, predicate: String },
    #[error("{line}: {violation}")]
    InvalidRule { line: u32, violation: RuleViolation },
}

/// Parses a program, rejecting reserved predicate names.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    parse_program_with(src, &ParseOptions::default())
}

/// Parses a program under explicit options.
pub fn parse_program_with(src: &str, options: &ParseOptions) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        options,
    };
    let mut statements = Vec::new();
    while !parser.at_end() {
        statements.push(parser.statement()?);
    }
    Ok(Program::new(statements))
}

/// Parses a single rule; the source must contain exactly one statement.
pub fn parse_rule(src: &str) -> Result<Rule, ParseError> {
    let mut program = parse_program(src)?;
    if program.statements.len() != 1 {
        return Err(ParseError::Syntax {
            line: 1,
            col: 1,
            expected: "exactly one statement".into(),
            found: format!("{} statements", program.statements.len()),
        });
    }
    Ok(program.statements.pop().expect("length checked"))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Anon,
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Pipe,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(Rel),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Anon => "`_`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::If => "`:-`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Rel(r) => format!("`{}`", r.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn unsupported(line: u32, col: u32, construct: &str) -> ParseError {
    ParseError::Unsupported {
        line,
        col,
        construct: construct.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! push {
        ($tok:expr, $col:expr) => {
            toks.push(Token {
                tok: $tok,
                line,
                col: $col,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let start_col = col;
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '%' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            'a'..='z' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s), start_col);
            }
            'A'..='Z' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Var(s), start_col);
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if chars.peek() == Some(&'.') {
                    // Distinguish `1..5` (interval) from `p(1).` (end of
                    // statement) by looking one character further.
                    let mut ahead = chars.clone();
                    ahead.next();
                    if ahead.peek() == Some(&'.') {
                        return Err(unsupported(line, start_col, "interval term `..`"));
                    }
                }
                let n: i64 = s.parse().map_err(|_| ParseError::Syntax {
                    line,
                    col: start_col,
                    expected: "integer within i64 range".into(),
                    found: format!("`{s}`"),
                })?;
                push!(Tok::Int(n), start_col);
            }
            '_' => {
                chars.next();
                col += 1;
                if let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        return Err(ParseError::Syntax {
                            line,
                            col: start_col,
                            expected: "standalone `_`".into(),
                            found: format!("`_{c}...`"),
                        });
                    }
                }
                push!(Tok::Anon, start_col);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, start_col);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, start_col);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, start_col);
            }
            '.' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'.') {
                    return Err(unsupported(line, start_col, "interval term `..`"));
                }
                push!(Tok::Dot, start_col);
            }
            '|' => {
                chars.next();
                col += 1;
                push!(Tok::Pipe, start_col);
            }
            '+' => {
                chars.next();
                col += 1;
                push!(Tok::Plus, start_col);
            }
            '-' => {
                chars.next();
                col += 1;
                push!(Tok::Minus, start_col);
            }
            '*' => {
                chars.next();
                col += 1;
                push!(Tok::Star, start_col);
            }
            '/' => {
                chars.next();
                col += 1;
                push!(Tok::Slash, start_col);
            }
            ':' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('-') => {
                        chars.next();
                        col += 1;
                        push!(Tok::If, start_col);
                    }
                    Some('~') => {
                        return Err(unsupported(line, start_col, "weak constraint `:~`"));
                    }
                    other => {
                        return Err(ParseError::Syntax {
                            line,
                            col: start_col,
                            expected: "`:-`".into(),
                            found: other.map_or("end of input".into(), |c| format!("`:{c}`")),
                        });
                    }
                }
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Rel(Rel::Le), start_col);
                } else {
                    push!(Tok::Rel(Rel::Lt), start_col);
                }
            }
            '>' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Rel(Rel::Ge), start_col);
                } else {
                    push!(Tok::Rel(Rel::Gt), start_col);
                }
            }
            '=' => {
                chars.next();
                col += 1;
                push!(Tok::Rel(Rel::Eq), start_col);
            }
            '!' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Rel(Rel::Ne), start_col);
                } else {
                    return Err(ParseError::Syntax {
                        line,
                        col: start_col,
                        expected: "`!=`".into(),
                        found: "`!`".into(),
                    });
                }
            }
            '{' | '}' => return Err(unsupported(line, start_col, "choice rule or aggregate `{}`")),
            '#' => return Err(unsupported(line, start_col, "`#` directive or aggregate")),
            '"' => return Err(unsupported(line, start_col, "string constant")),
            ';' => return Err(unsupported(line, start_col, "`;` separator")),
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col: start_col,
                    expected: "a token".into(),
                    found: format!("`{other}`"),
                });
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    options: &'a ParseOptions,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn at_end(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.into(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn statement(&mut self) -> Result<Rule, ParseError> {
        let line = self.peek().line;
        let mut head = Vec::new();
        if self.peek().tok != Tok::If {
            loop {
                head.push(self.head_atom()?);
                if self.peek().tok == Tok::Pipe {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        let mut body = Vec::new();
        if self.peek().tok == Tok::If {
            self.advance();
            loop {
                body.push(self.literal()?);
                if self.peek().tok == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "`.`")?;
        let rule = Rule::new(head, body).at_line(line);
        self.check_reserved(&rule)?;
        if let Err(violation) = rule.validate() {
            return Err(ParseError::InvalidRule { line, violation });
        }
        Ok(rule)
    }

    fn check_reserved(&self, rule: &Rule) -> Result<(), ParseError> {
        if self.options.allow_reserved_predicates {
            return Ok(());
        }
        let atoms = rule.head.iter().chain(rule.body.iter().filter_map(|l| {
            match l {
                Literal::Atom { atom, .. } => Some(atom),
                Literal::Builtin { .. } => None,
            }
        }));
        for atom in atoms {
            if atom.predicate.starts_with(RESERVED_PREDICATE_PREFIX) {
                return Err(ParseError::ReservedPredicate {
                    line: rule.line,
                    predicate: atom.predicate.clone(),
                });
            }
        }
        Ok(())
    }

    fn head_atom(&mut self) -> Result<Atom, ParseError> {
        match &self.peek().tok {
            Tok::Ident(_) => self.atom(),
            _ => Err(self.error("a head atom")),
        }
    }

    /// A body literal: `not` atom, a plain atom, or a comparison. A bare
    /// identifier followed by a comparison operator is re-read as a symbolic
    /// constant on the left of the comparison.
    fn literal(&mut self) -> Result<Literal, ParseError> {
        if let Tok::Ident(name) = &self.peek().tok {
            if name == "not" {
                self.advance();
                let atom = match &self.peek().tok {
                    Tok::Ident(_) => self.atom()?,
                    _ => return Err(self.error("an atom after `not`")),
                };
                return Ok(Literal::naf(atom));
            }
            let atom = self.atom()?;
            if let Tok::Rel(rel) = self.peek().tok {
                if !atom.args.is_empty() {
                    return Err(self.error("`,` or `.` after an atom"));
                }
                self.advance();
                let right = self.term()?;
                return Ok(Literal::builtin(
                    rel,
                    Term::Constant(Constant::Sym(atom.predicate)),
                    right,
                ));
            }
            return Ok(Literal::pos(atom));
        }
        let left = self.term()?;
        let rel = match self.peek().tok {
            Tok::Rel(rel) => rel,
            _ => return Err(self.error("a comparison operator")),
        };
        self.advance();
        let right = self.term()?;
        Ok(Literal::builtin(rel, left, right))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let name = match self.advance().tok {
            Tok::Ident(s) => s,
            _ => unreachable!("caller checked for an identifier"),
        };
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.advance();
            loop {
                args.push(self.term()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RParen => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.error("`,` or `)`")),
                }
            }
        }
        Ok(Atom::new(name, args))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut left = self.mul_term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => break,
            };
            self.advance();
            let right = self.mul_term()?;
            left = Term::Arith {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn mul_term(&mut self) -> Result<Term, ParseError> {
        let mut left = self.primary_term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => break,
            };
            self.advance();
            let right = self.primary_term()?;
            left = Term::Arith {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn primary_term(&mut self) -> Result<Term, ParseError> {
        match self.peek().tok.clone() {
            Tok::Var(v) => {
                self.advance();
                Ok(Term::var(v))
            }
            Tok::Int(n) => {
                self.advance();
                Ok(Term::int(n))
            }
            Tok::Minus => {
                self.advance();
                match self.peek().tok {
                    Tok::Int(n) => {
                        self.advance();
                        Ok(Term::int(-n))
                    }
                    _ => Err(self.error("an integer after unary `-`")),
                }
            }
            Tok::Ident(s) => {
                self.advance();
                if self.peek().tok == Tok::LParen {
                    return Err(self.error("a plain term (function terms are not supported)"));
                }
                Ok(Term::sym(s))
            }
            Tok::Anon => {
                self.advance();
                Ok(Term::Anonymous)
            }
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.error("a term")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_the_worked_rule() {
        let src = "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), c(D,Y,Z), f(X,P,S-1), P >= D.";
        let rule = parse_rule(src).unwrap();
        assert_eq!(rule.to_string(), src);
        assert_eq!(rule.count_joins(), 7);
    }

    #[test]
    fn parses_facts_rules_and_constraints() {
        let p = parse_program(
            "e(1,2). e(2,3).\n\
             t(X,Y) :- e(X,Y).\n\
             t(X,Z) :- t(X,Y), e(Y,Z).\n\
             :- t(X,X).",
        )
        .unwrap();
        assert_eq!(p.statements.len(), 5);
        assert_eq!(p.facts().count(), 2);
        assert_eq!(p.rules().count(), 3);
        assert!(p.statements[4].is_constraint());
        assert_eq!(p.statements[1].line, 1);
        assert_eq!(p.statements[2].line, 2);
        assert_eq!(p.statements[4].line, 4);
    }

    #[test]
    fn parses_disjunction_naf_and_anonymous() {
        let rule = parse_rule("a(X) | b(X) :- c(X,_), not d(X).").unwrap();
        assert_eq!(rule.head.len(), 2);
        assert_eq!(rule.to_string(), "a(X) | b(X) :- c(X,_), not d(X).");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let p = parse_program("% transitive closure\n\n  a(1). % trailing\n").unwrap();
        assert_eq!(p.statements.len(), 1);
    }

    #[test]
    fn unsafe_variable_names_the_culprit() {
        let err = parse_program("p(X,Y) :- q(X).").unwrap_err();
        match err {
            ParseError::InvalidRule {
                line,
                violation: RuleViolation::UnsafeVariable { variable, .. },
            } => {
                assert_eq!(line, 1);
                assert_eq!(variable, "Y");
            }
            other => panic!("expected unsafe-variable error, got {other:?}"),
        }
    }

    #[test]
    fn naf_does_not_bind() {
        assert!(matches!(
            parse_program("p(X) :- not q(X)."),
            Err(ParseError::InvalidRule {
                violation: RuleViolation::UnsafeVariable { .. },
                ..
            })
        ));
    }

    #[test]
    fn arith_occurrence_does_not_bind() {
        // S occurs only inside a(...,S-1); there is no binding occurrence.
        assert!(matches!(
            parse_program("p(X) :- a(X,S-1)."),
            Err(ParseError::InvalidRule {
                violation: RuleViolation::UnsafeVariable { variable, .. },
                ..
            }) if variable == "S"
        ));
    }

    #[test]
    fn reserved_prefix_rejected_by_default() {
        let err = parse_program("fresh_pred_1(X) :- q(X).").unwrap_err();
        assert!(matches!(err, ParseError::ReservedPredicate { predicate, .. }
            if predicate == "fresh_pred_1"));
        let opts = ParseOptions {
            allow_reserved_predicates: true,
        };
        assert!(parse_program_with("fresh_pred_1(X) :- q(X).", &opts).is_ok());
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for (src, needle) in [
            ("{a}.", "choice rule"),
            ("#show p/1.", "directive"),
            (":~ a(X). [1@1]", "weak constraint"),
            ("p(\"x\").", "string"),
            ("n(1..5).", "interval"),
        ] {
            match parse_program(src) {
                Err(ParseError::Unsupported { construct, .. }) => {
                    assert!(
                        construct.contains(needle),
                        "{src}: construct {construct:?} should mention {needle:?}"
                    );
                }
                other => panic!("{src}: expected unsupported-construct error, got {other:?}"),
            }
        }
    }

    #[test]
    fn anonymous_in_head_rejected() {
        assert!(matches!(
            parse_program("p(_) :- q(X)."),
            Err(ParseError::InvalidRule {
                violation: RuleViolation::AnonymousInHead { .. },
                ..
            })
        ));
    }

    #[test]
    fn symbolic_comparison_left_side() {
        let rule = parse_rule("p(X) :- q(X), X != a.").unwrap();
        assert_eq!(rule.to_string(), "p(X) :- q(X), X != a.");
        let rule = parse_rule("p(X) :- q(X), a != X.").unwrap();
        assert_eq!(rule.to_string(), "p(X) :- q(X), a != X.");
    }

    #[test]
    fn negative_integers_and_precedence() {
        let rule = parse_rule("p(X) :- q(X), X > -3.").unwrap();
        assert_eq!(rule.to_string(), "p(X) :- q(X), X > -3.");
        let rule = parse_rule("p(X) :- q(X), X = (A+1)*2, r(A).").unwrap();
        assert_eq!(rule.to_string(), "p(X) :- q(X), X = (A+1)*2, r(A).");
    }

    #[test]
    fn function_terms_rejected() {
        assert!(matches!(
            parse_program("p(X) :- q(f(X))."),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("p(X) :- q(X)\nr(1).").unwrap_err();
        match err {
            ParseError::Syntax { line, expected, .. } => {
                assert_eq!(line, 2);
                assert_eq!(expected, "`.`");
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn nullary_atoms_parse() {
        let p = parse_program("go. win :- go.").unwrap();
        assert_eq!(p.statements.len(), 2);
        assert_eq!(p.statements[1].to_string(), "win :- go.");
    }
}
