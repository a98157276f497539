//! Symbolic heuristic constraints over the reduced coefficient set.
//!
//! A heuristic ties one reduced coefficient to an expression over the
//! others, e.g. `b(5) = a(2,1)^2`, removing one free parameter from the
//! feasibility problem. Expressions are flat left-to-right chains of terms
//! joined by `+` or `*` with optional integer powers on each term; there
//! are no parentheses, no constants, and no precedence — `b(2) + b(3) *
//! b(4)` evaluates as `(b(2) + b(3)) * b(4)`.
//!
//! The canonical text grammar, used on the command line, in store records,
//! and in tableau provenance:
//!
//! ```text
//! <coef> "=" <term> (("+" | "*") <term>)*
//! <term> := <coef> ("^" int)?
//! <coef> := "a(" int "," int ")" | "b(" int ")"
//! ```
//!
//! Whitespace is insignificant. `a(i,j)` references must sit on the
//! subdiagonal (`j = i-1`); anything else does not exist in the reduced
//! scheme and is rejected.

use crate::eval::Real;
use crate::rng::Stream;
use crate::tableau::{CoefficientRef, ReducedParameters};
use rand::Rng;
use thiserror::Error;

/// Errors from parsing, validating, or applying heuristic expressions.
#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("{what} is out of range for {s} stages")]
    OutOfRange { what: String, s: usize },
    #[error("a({row},{col}) is off the subdiagonal; only a(k,k-1) exists in the reduced scheme")]
    OffSubdiagonal { row: usize, col: usize },
    #[error("power {got} outside the allowed range 1..=6")]
    PowerOutOfRange { got: i64 },
    #[error("expression references its own target")]
    SelfReference,
    #[error("expression has no terms")]
    EmptyTerms,
    #[error("{terms} terms require {} combiners, got {combiners}", terms - 1)]
    ArityMismatch { terms: usize, combiners: usize },
    #[error("duplicate target {target}")]
    DuplicateTarget { target: String },
    #[error("target {target} of one heuristic is used inside {used_in}; chains are not allowed")]
    ChainedDependency { target: String, used_in: String },
    #[error("expression was built for {got} stages, expected {expected}")]
    StageMismatch { expected: usize, got: usize },
}

/// Binary operator joining adjacent terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    Add,
    Multiply,
}

/// One term: a reduced coefficient raised to an integer power in `1..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub coefficient: CoefficientRef,
    pub power: u32,
}

/// Mutation operators over expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// Swap one term's coefficient for another from the reduced set.
    Replace,
    /// Append a new term with a random combiner.
    Addition,
    /// Remove one term.
    Deletion,
    /// Merge two terms into one via a random operator.
    Combined,
}

const MUTATION_KINDS: [MutationKind; 4] = [
    MutationKind::Replace,
    MutationKind::Addition,
    MutationKind::Deletion,
    MutationKind::Combined,
];

/// Maximum exponent anywhere in an expression.
pub const MAX_POWER: u32 = 6;

/// A constraint `target = t_1 op_1 t_2 op_2 ... t_n` over the reduced set.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicExpression {
    s: usize,
    target: CoefficientRef,
    terms: Vec<Term>,
    combiners: Vec<Combiner>,
}

impl HeuristicExpression {
    /// Validating constructor; see the type invariants.
    pub fn new(
        s: usize,
        target: CoefficientRef,
        terms: Vec<Term>,
        combiners: Vec<Combiner>,
    ) -> Result<Self, HeuristicError> {
        if terms.is_empty() {
            return Err(HeuristicError::EmptyTerms);
        }
        if combiners.len() != terms.len() - 1 {
            return Err(HeuristicError::ArityMismatch {
                terms: terms.len(),
                combiners: combiners.len(),
            });
        }
        check_ref(target, s)?;
        for t in &terms {
            check_ref(t.coefficient, s)?;
            if t.coefficient == target {
                return Err(HeuristicError::SelfReference);
            }
            if !(1..=MAX_POWER).contains(&t.power) {
                return Err(HeuristicError::PowerOutOfRange {
                    got: t.power as i64,
                });
            }
        }
        Ok(Self {
            s,
            target,
            terms,
            combiners,
        })
    }

    pub fn stage_count(&self) -> usize {
        self.s
    }

    pub fn target(&self) -> CoefficientRef {
        self.target
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn combiners(&self) -> &[Combiner] {
        &self.combiners
    }

    /// Evaluates the right-hand side over concrete coefficient values.
    pub fn evaluate(&self, params: &ReducedParameters) -> f64 {
        self.evaluate_generic(&|r| params.get(r))
    }

    /// Left-to-right evaluation with a generic scalar, used both for plain
    /// values and for forward-mode derivatives.
    pub(crate) fn evaluate_generic<T: Real>(&self, get: &dyn Fn(CoefficientRef) -> T) -> T {
        let term_value = |t: &Term| get(t.coefficient).powi(t.power);
        let mut acc = term_value(&self.terms[0]);
        for (k, term) in self.terms.iter().enumerate().skip(1) {
            let v = term_value(term);
            acc = match self.combiners[k - 1] {
                Combiner::Add => acc + v,
                Combiner::Multiply => acc * v,
            };
        }
        acc
    }
}

impl std::fmt::Display for HeuristicExpression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = ", self.target)?;
        for (k, term) in self.terms.iter().enumerate() {
            if k > 0 {
                match self.combiners[k - 1] {
                    Combiner::Add => write!(f, " + ")?,
                    Combiner::Multiply => write!(f, " * ")?,
                }
            }
            write!(f, "{}", term.coefficient)?;
            if term.power > 1 {
                write!(f, "^{}", term.power)?;
            }
        }
        Ok(())
    }
}

fn check_ref(r: CoefficientRef, s: usize) -> Result<(), HeuristicError> {
    if !r.in_range(s) {
        return Err(HeuristicError::OutOfRange {
            what: r.to_string(),
            s,
        });
    }
    Ok(())
}

/// Uniform draw from the reduced set, excluding `target`.
fn random_ref_excluding(s: usize, target: CoefficientRef, rng: &mut Stream) -> CoefficientRef {
    let n = 2 * s - 1;
    let target_idx = target.reduced_index(s);
    let mut idx = rng.random_range(0..n - 1);
    if idx >= target_idx {
        idx += 1;
    }
    CoefficientRef::from_reduced_index(s, idx)
}

/// Draws a fresh random expression over the reduced set.
///
/// Draw order: term count, target, term coefficients, combiners, then the
/// power (single-term expressions only). Identical streams produce
/// identical expressions.
pub fn gen_random_expression(s: usize, rng: &mut Stream, max_terms: usize) -> HeuristicExpression {
    assert!(s >= 2, "reduced scheme needs at least two stages");
    assert!(max_terms >= 1);
    let len = rng.random_range(1..=max_terms);
    let target = CoefficientRef::from_reduced_index(s, rng.random_range(0..2 * s - 1));
    let mut terms = Vec::with_capacity(len);
    for _ in 0..len {
        terms.push(Term {
            coefficient: random_ref_excluding(s, target, rng),
            power: 1,
        });
    }
    let mut combiners = Vec::with_capacity(len.saturating_sub(1));
    for _ in 1..len {
        combiners.push(if rng.random::<bool>() {
            Combiner::Add
        } else {
            Combiner::Multiply
        });
    }
    if len == 1 {
        terms[0].power = rng.random_range(1..=MAX_POWER);
    }
    HeuristicExpression::new(s, target, terms, combiners).expect("generated within invariants")
}

/// Applies one random mutation, resampling kinds that cannot apply.
///
/// `Addition` is skipped at `max_terms_after_mutation` terms, `Deletion`
/// at one term, and `Combined` below two terms. `Combined` merges two
/// random terms into one: the merged term keeps the first selected term's
/// coefficient, and exponents combine by operator — `Add` keeps the first
/// exponent, `Multiply` and `Power` add them — clamped to `1..=6`.
pub fn mutate(
    expr: &HeuristicExpression,
    rng: &mut Stream,
    max_terms_after_mutation: usize,
) -> HeuristicExpression {
    let s = expr.s;
    let mut out = expr.clone();
    let kind = loop {
        let k = MUTATION_KINDS[rng.random_range(0..4)];
        let applicable = match k {
            MutationKind::Replace => true,
            MutationKind::Addition => out.terms.len() < max_terms_after_mutation,
            MutationKind::Deletion => out.terms.len() > 1,
            MutationKind::Combined => out.terms.len() >= 2,
        };
        if applicable {
            break k;
        }
    };
    match kind {
        MutationKind::Replace => {
            let pos = rng.random_range(0..out.terms.len());
            out.terms[pos].coefficient = random_ref_excluding(s, out.target, rng);
        }
        MutationKind::Addition => {
            out.terms.push(Term {
                coefficient: random_ref_excluding(s, out.target, rng),
                power: 1,
            });
            out.combiners.push(if rng.random::<bool>() {
                Combiner::Add
            } else {
                Combiner::Multiply
            });
        }
        MutationKind::Deletion => {
            let pos = rng.random_range(0..out.terms.len());
            out.terms.remove(pos);
            out.combiners.remove(pos.saturating_sub(1));
        }
        MutationKind::Combined => {
            let i = rng.random_range(0..out.terms.len());
            let mut j = rng.random_range(0..out.terms.len() - 1);
            if j >= i {
                j += 1;
            }
            let (first, second) = (i.min(j), i.max(j));
            let (pi, pj) = (out.terms[i].power, out.terms[j].power);
            let op = rng.random_range(0..3u8); // 0 add, 1 multiply, 2 power
            let power = match op {
                0 => pi,
                _ => (pi + pj).min(MAX_POWER),
            };
            out.terms[first] = Term {
                coefficient: out.terms[i].coefficient,
                power,
            };
            out.terms.remove(second);
            out.combiners.remove(second - 1);
        }
    }
    debug_assert!(out.terms.iter().all(|t| t.coefficient != out.target));
    out
}

/// Checks that a set of expressions can be applied jointly: one stage
/// count, pairwise-distinct targets, and no target feeding another
/// expression's terms.
pub fn validate_set(s: usize, exprs: &[HeuristicExpression]) -> Result<(), HeuristicError> {
    for e in exprs {
        if e.s != s {
            return Err(HeuristicError::StageMismatch {
                expected: s,
                got: e.s,
            });
        }
    }
    for (i, e) in exprs.iter().enumerate() {
        for other in &exprs[i + 1..] {
            if other.target == e.target {
                return Err(HeuristicError::DuplicateTarget {
                    target: e.target.to_string(),
                });
            }
        }
        for other in exprs {
            if std::ptr::eq(other, e) {
                continue;
            }
            if other.terms.iter().any(|t| t.coefficient == e.target) {
                return Err(HeuristicError::ChainedDependency {
                    target: e.target.to_string(),
                    used_in: other.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Overwrites each target coefficient with its expression's value.
///
/// All right-hand sides read the incoming free values; because chains are
/// rejected, application order cannot matter.
pub fn apply_heuristics(
    params: &ReducedParameters,
    exprs: &[HeuristicExpression],
) -> Result<ReducedParameters, HeuristicError> {
    validate_set(params.s, exprs)?;
    let mut out = params.clone();
    for e in exprs {
        out.set(e.target, e.evaluate(params));
    }
    Ok(out)
}

/// Parses the canonical text grammar; see the module docs.
pub fn parse_expression(text: &str, s: usize) -> Result<HeuristicExpression, HeuristicError> {
    Parser::new(text, s).parse()
}

/// Renders an expression in canonical text form (inverse of
/// [`parse_expression`] up to whitespace).
pub fn format_expression(expr: &HeuristicExpression) -> String {
    expr.to_string()
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    s: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, s: usize) -> Self {
        Self {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            s,
        }
    }

    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T, HeuristicError> {
        Err(HeuristicError::Parse {
            position,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<(), HeuristicError> {
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(
                self.pos,
                format!("expected '{}', found '{}'", ch as char, c as char),
            ),
            None => self.error(
                self.text.len(),
                format!("expected '{}', found end of input", ch as char),
            ),
        }
    }

    fn integer(&mut self) -> Result<usize, HeuristicError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.error(start, "expected an integer");
        }
        self.text[start..self.pos]
            .parse::<usize>()
            .map_err(|_| HeuristicError::Parse {
                position: start,
                message: "integer too large".into(),
            })
    }

    fn coefficient(&mut self) -> Result<CoefficientRef, HeuristicError> {
        let peeked = self.peek();
        let at = self.pos;
        match peeked {
            Some(b'a') => {
                self.pos += 1;
                self.expect(b'(')?;
                let row = self.integer()?;
                self.expect(b',')?;
                let col = self.integer()?;
                self.expect(b')')?;
                if row == 0 || col != row - 1 {
                    return Err(HeuristicError::OffSubdiagonal { row, col });
                }
                let r = CoefficientRef::SubdiagonalA { row };
                check_ref(r, self.s)?;
                Ok(r)
            }
            Some(b'b') => {
                self.pos += 1;
                self.expect(b'(')?;
                let index = self.integer()?;
                self.expect(b')')?;
                let r = CoefficientRef::WeightB { index };
                check_ref(r, self.s)?;
                Ok(r)
            }
            Some(c) => self.error(at, format!("expected 'a(' or 'b(', found '{}'", c as char)),
            None => self.error(
                self.text.len(),
                "expected a coefficient, found end of input",
            ),
        }
    }

    fn term(&mut self) -> Result<Term, HeuristicError> {
        let coefficient = self.coefficient()?;
        let power = if self.peek() == Some(b'^') {
            self.pos += 1;
            let at = self.pos;
            let p = self.integer()?;
            if !(1..=MAX_POWER as usize).contains(&p) {
                let _ = at;
                return Err(HeuristicError::PowerOutOfRange { got: p as i64 });
            }
            p as u32
        } else {
            1
        };
        Ok(Term { coefficient, power })
    }

    fn parse(mut self) -> Result<HeuristicExpression, HeuristicError> {
        let target = self.coefficient()?;
        self.expect(b'=')?;
        let mut terms = vec![self.term()?];
        let mut combiners = Vec::new();
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    combiners.push(Combiner::Add);
                    terms.push(self.term()?);
                }
                Some(b'*') => {
                    self.pos += 1;
                    combiners.push(Combiner::Multiply);
                    terms.push(self.term()?);
                }
                Some(c) => {
                    return self.error(self.pos, format!("unexpected '{}' after term", c as char))
                }
                None => break,
            }
        }
        HeuristicExpression::new(self.s, target, terms, combiners)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(index: usize) -> CoefficientRef {
        CoefficientRef::WeightB { index }
    }
    fn a(row: usize) -> CoefficientRef {
        CoefficientRef::SubdiagonalA { row }
    }

    #[test]
    fn parse_power_term() {
        let e = parse_expression("b(5) = a(2,1)^2", 16).unwrap();
        assert_eq!(e.target(), b(5));
        assert_eq!(
            e.terms(),
            &[Term {
                coefficient: a(2),
                power: 2
            }]
        );
    }

    #[test]
    fn parse_three_term_chain() {
        let e = parse_expression("b(3)=b(4)+a(1,0)+a(15,14)", 16).unwrap();
        assert_eq!(e.terms().len(), 3);
        assert_eq!(e.combiners(), &[Combiner::Add, Combiner::Add]);
        assert_eq!(format_expression(&e), "b(3) = b(4) + a(1,0) + a(15,14)");
    }

    #[test]
    fn off_subdiagonal_reference_is_rejected() {
        assert_eq!(
            parse_expression("a(3,1) = b(0)", 16).unwrap_err(),
            HeuristicError::OffSubdiagonal { row: 3, col: 1 }
        );
    }

    #[test]
    fn out_of_range_reference_is_rejected() {
        assert!(matches!(
            parse_expression("b(16) = b(0)", 16).unwrap_err(),
            HeuristicError::OutOfRange { .. }
        ));
        assert!(matches!(
            parse_expression("a(16,15) = b(0)", 16).unwrap_err(),
            HeuristicError::OutOfRange { .. }
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_expression("b(5) = + b(2)", 16).unwrap_err() {
            HeuristicError::Parse { position, .. } => assert_eq!(position, 7),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn self_reference_is_rejected() {
        assert_eq!(
            parse_expression("b(5) = b(5)", 16).unwrap_err(),
            HeuristicError::SelfReference
        );
    }

    #[test]
    fn format_parse_round_trip_is_identity() {
        let texts = [
            "b(5) = a(2,1)^2",
            "b(3) = b(4) + a(1,0) + a(15,14)",
            "a(5,4) = b(8) + b(13)",
            "b(10) = a(9,8) * b(9)",
            "b(1) = a(7,6) + b(12)",
        ];
        for t in texts {
            let e = parse_expression(t, 16).unwrap();
            let formatted = format_expression(&e);
            assert_eq!(formatted, t);
            assert_eq!(parse_expression(&formatted, 16).unwrap(), e);
        }
    }

    #[test]
    fn power_one_prints_bare() {
        let e = HeuristicExpression::new(
            16,
            b(0),
            vec![Term {
                coefficient: a(1),
                power: 1,
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(format_expression(&e), "b(0) = a(1,0)");
    }

    #[test]
    fn apply_single_power_heuristic() {
        let mut p = ReducedParameters::new(16, vec![0.0; 15], vec![0.0; 16]).unwrap();
        p.set(a(2), 0.3);
        let e = parse_expression("b(5) = a(2,1)^2", 16).unwrap();
        let out = apply_heuristics(&p, &[e]).unwrap();
        assert!((out.get(b(5)) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn apply_sum_heuristic() {
        let mut p = ReducedParameters::new(16, vec![0.0; 15], vec![0.0; 16]).unwrap();
        p.set(b(8), 0.1);
        p.set(b(13), 0.2);
        let e = parse_expression("a(5,4) = b(8) + b(13)", 16).unwrap();
        let out = apply_heuristics(&p, &[e]).unwrap();
        assert!((out.get(a(5)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn apply_joint_pair() {
        let mut p = ReducedParameters::new(16, vec![0.0; 15], vec![0.0; 16]).unwrap();
        p.set(a(2), 0.3);
        p.set(b(8), 0.1);
        p.set(b(13), 0.2);
        let exprs = vec![
            parse_expression("b(5) = a(2,1)^2", 16).unwrap(),
            parse_expression("a(5,4) = b(8) + b(13)", 16).unwrap(),
        ];
        let out = apply_heuristics(&p, &exprs).unwrap();
        assert!((out.get(b(5)) - 0.09).abs() < 1e-15);
        assert!((out.get(a(5)) - 0.3).abs() < 1e-15);
        assert_eq!(crate::tableau::free_parameter_count(16, exprs.len()), 29);
    }

    #[test]
    fn duplicate_targets_are_rejected() {
        let p = ReducedParameters::new(16, vec![0.0; 15], vec![0.0; 16]).unwrap();
        let exprs = vec![
            parse_expression("b(5) = a(2,1)", 16).unwrap(),
            parse_expression("b(5) = b(3)", 16).unwrap(),
        ];
        assert!(matches!(
            apply_heuristics(&p, &exprs).unwrap_err(),
            HeuristicError::DuplicateTarget { .. }
        ));
    }

    #[test]
    fn chained_dependency_is_rejected() {
        let p = ReducedParameters::new(16, vec![0.0; 15], vec![0.0; 16]).unwrap();
        let exprs = vec![
            parse_expression("b(5) = a(2,1)", 16).unwrap(),
            parse_expression("b(3) = b(5) + b(4)", 16).unwrap(),
        ];
        assert!(matches!(
            apply_heuristics(&p, &exprs).unwrap_err(),
            HeuristicError::ChainedDependency { .. }
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_random_expression(16, &mut crate::rng::seeded(99), 3);
        let b = gen_random_expression(16, &mut crate::rng::seeded(99), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_population_stays_closed() {
        let mut rng = crate::rng::seeded(0xF00D);
        for _ in 0..10_000 {
            let e = gen_random_expression(16, &mut rng, 3);
            assert!(e.target().in_range(16));
            assert!(e.terms().len() <= 3);
            for t in e.terms() {
                assert!(t.coefficient.in_range(16));
                assert_ne!(t.coefficient, e.target());
                assert!((1..=MAX_POWER).contains(&t.power));
            }
        }
    }

    #[test]
    fn mutation_respects_bounds_and_closure() {
        let mut rng = crate::rng::seeded(0xBEEF);
        let mut e = gen_random_expression(16, &mut rng, 3);
        for _ in 0..10_000 {
            e = mutate(&e, &mut rng, 4);
            assert!(!e.terms().is_empty() && e.terms().len() <= 4);
            for t in e.terms() {
                assert!(t.coefficient.in_range(16));
                assert_ne!(t.coefficient, e.target());
                assert!((1..=MAX_POWER).contains(&t.power));
            }
        }
    }

    #[test]
    fn deletion_resampled_on_single_term() {
        // With one term, Deletion and Combined cannot apply; whatever
        // mutation lands must keep at least one term.
        let mut rng = crate::rng::seeded(3);
        let e = HeuristicExpression::new(
            16,
            b(0),
            vec![Term {
                coefficient: a(1),
                power: 2,
            }],
            vec![],
        )
        .unwrap();
        for _ in 0..100 {
            let m = mutate(&e, &mut rng, 1);
            assert_eq!(m.terms().len(), 1);
        }
    }

    #[test]
    fn worked_mutation_steps() {
        // Addition appends a term; Replace swaps a coefficient. Mirrors the
        // documented mutation walk on `b(0) = a(1,0) + b(2) + b(3)`.
        let e = parse_expression("b(0) = a(1,0) + b(2) + b(3)", 16).unwrap();
        let mut rng = crate::rng::seeded(0);
        let mut grown = None;
        for _ in 0..1000 {
            let m = mutate(&e, &mut rng, 4);
            if m.terms().len() == 4 && m.terms()[..3] == e.terms()[..] {
                grown = Some(m);
                break;
            }
        }
        let grown = grown.expect("Addition mutation reachable");
        assert_eq!(grown.terms().len(), 4);

        let mut replaced = None;
        for _ in 0..1000 {
            let m = mutate(&grown, &mut rng, 4);
            if m.terms().len() == 4
                && m.terms()
                    .iter()
                    .zip(grown.terms())
                    .filter(|(x, y)| x != y)
                    .count()
                    == 1
            {
                replaced = Some(m);
                break;
            }
        }
        assert!(replaced.is_some(), "Replace mutation reachable");
    }
}
