//! CNF specifications with a forall/exists input-output split.
//!
//! A [`SynthesisProblem`] is a CNF formula over inputs `X` and outputs `Y`,
//! read as `forall X exists Y. F(X, Y)`. Instances are read and written in
//! QDIMACS with a single `a` block followed by a single `e` block.

use std::fmt;
use thiserror::Error;

/// 1-based variable identifier, DIMACS convention.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(u32);

impl VarId {
    /// Panics if `id` is zero; DIMACS reserves 0 as the clause terminator.
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "variable ids are 1-based");
        VarId(id)
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A variable or its negation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Literal {
    pub var: VarId,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: VarId) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: VarId) -> Self {
        Literal { var, negated: true }
    }

    /// Panics if `n` is zero.
    pub fn from_dimacs(n: i64) -> Self {
        assert!(n != 0, "0 is the DIMACS clause terminator, not a literal");
        Literal { var: VarId::new(n.unsigned_abs() as u32), negated: n < 0 }
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var.get() as i64;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Disjunction of literals. Literals are stored sorted and deduplicated;
/// a clause mentioning both polarities of a variable is flagged tautological.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clause {
    literals: Vec<Literal>,
    tautological: bool,
}

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        let mut literals: Vec<Literal> = literals.into_iter().collect();
        literals.sort();
        literals.dedup();
        let tautological =
            literals.windows(2).any(|w| w[0].var == w[1].var && w[0].negated != w[1].negated);
        Clause { literals, tautological }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn is_tautological(&self) -> bool {
        self.tautological
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Distinct variables of the clause, ascending.
    pub fn variables(&self) -> impl Iterator<Item = VarId> + '_ {
        let mut prev = None;
        self.literals.iter().filter_map(move |lit| {
            if prev == Some(lit.var) {
                None
            } else {
                prev = Some(lit.var);
                Some(lit.var)
            }
        })
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for lit in &self.literals {
            write!(f, "{} ", lit)?;
        }
        write!(f, "0")
    }
}

/// Diagnostics recorded while parsing; none of them abort the parse.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ParseWarning {
    /// Variables declared by the header but absent from both quantifier
    /// blocks; they are treated as inputs.
    FreeInputs(Vec<VarId>),
    /// A tautological clause was dropped. The index counts clauses in file
    /// order, before dropping.
    TautologyDropped { file_index: usize },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::FreeInputs(vars) => {
                write!(f, "free variables treated as inputs:")?;
                for v in vars {
                    write!(f, " {}", v)?;
                }
                Ok(())
            }
            ParseWarning::TautologyDropped { file_index } => {
                write!(f, "dropped tautological clause #{}", file_index + 1)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("quantifier order violation: {0}")]
    QuantifierOrderViolation(String),
    #[error("variable {var} exceeds the {declared} variables declared in the header")]
    UndeclaredVariable { var: i64, declared: usize },
    #[error("variable {0} declared more than once in quantifier blocks")]
    DuplicateDeclaration(u32),
    #[error("syntax error: {0}")]
    Syntax(String),
}

/// CNF formula with inputs `X` and outputs `Y`, read as
/// `forall X exists Y. F(X, Y)`.
///
/// Clause indices are stable: planners use them as leaf identities.
#[derive(Clone, Debug)]
pub struct SynthesisProblem {
    inputs: Vec<VarId>,
    outputs: Vec<VarId>,
    clauses: Vec<Clause>,
    warnings: Vec<ParseWarning>,
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("variable {0} listed twice in the same quantifier set")]
    DuplicateVariable(VarId),
    #[error("variable {0} is both an input and an output")]
    OverlappingQuantifiers(VarId),
    #[error("clause {clause} mentions variable {var}, which is neither input nor output")]
    UnboundClauseVariable { clause: usize, var: VarId },
}

impl SynthesisProblem {
    /// `inputs` and `outputs` are ordered sets: duplicates within or across
    /// them are rejected, as is any clause variable outside their union.
    /// Tautological clauses are accepted here; only the parser drops them.
    pub fn new(
        inputs: Vec<VarId>,
        outputs: Vec<VarId>,
        clauses: Vec<Clause>,
    ) -> Result<Self, ProblemError> {
        let mut seen = std::collections::BTreeSet::new();
        for &v in &inputs {
            if !seen.insert(v) {
                return Err(ProblemError::DuplicateVariable(v));
            }
        }
        for &v in &outputs {
            if !seen.insert(v) {
                if inputs.contains(&v) {
                    return Err(ProblemError::OverlappingQuantifiers(v));
                }
                return Err(ProblemError::DuplicateVariable(v));
            }
        }
        for (i, clause) in clauses.iter().enumerate() {
            for v in clause.variables() {
                if !seen.contains(&v) {
                    return Err(ProblemError::UnboundClauseVariable { clause: i, var: v });
                }
            }
        }
        Ok(SynthesisProblem { inputs, outputs, clauses, warnings: Vec::new() })
    }

    pub fn inputs(&self) -> &[VarId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[VarId] {
        &self.outputs
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn warnings(&self) -> &[ParseWarning] {
        &self.warnings
    }

    pub fn is_input(&self, v: VarId) -> bool {
        self.inputs.contains(&v)
    }

    pub fn is_output(&self, v: VarId) -> bool {
        self.outputs.contains(&v)
    }

    /// Indices of clauses whose variables all lie in `X`. The empty clause
    /// qualifies vacuously.
    pub fn pure_x_clauses(&self) -> Vec<usize> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.variables().all(|v| self.is_input(v)))
            .map(|(i, _)| i)
            .collect()
    }

    /// QDIMACS text that [`parse_qdimacs`] reads back to an identical
    /// problem: every input goes into the `a` line, every output into the
    /// `e` line, so no variable is left free.
    pub fn to_qdimacs(&self) -> String {
        use std::fmt::Write;

        let nvars = self.inputs.iter().chain(&self.outputs).map(|v| v.get()).max().unwrap_or(0);
        let mut s = String::new();
        s.push_str("c forall-exists CNF synthesis instance\n");
        writeln!(s, "p cnf {} {}", nvars, self.clauses.len()).unwrap();
        if !self.inputs.is_empty() {
            s.push('a');
            for v in &self.inputs {
                write!(s, " {}", v).unwrap();
            }
            s.push_str(" 0\n");
        }
        if !self.outputs.is_empty() {
            s.push('e');
            for v in &self.outputs {
                write!(s, " {}", v).unwrap();
            }
            s.push_str(" 0\n");
        }
        for clause in &self.clauses {
            writeln!(s, "{}", clause).unwrap();
        }
        s
    }
}

/// Parses QDIMACS text: optional `c` comments, a `p cnf <nvars> <nclauses>`
/// header, at most one `a` line followed by at most one `e` line, then
/// clauses terminated by `0`.
///
/// Header variables missing from both blocks become inputs, with a warning.
/// Tautological clauses are dropped with a warning; duplicate literals are
/// deduplicated silently. An empty clause is kept: it makes the instance
/// nullary realizable, which is a verdict, not a parse error.
pub fn parse_qdimacs(text: &str) -> Result<SynthesisProblem, ParseError> {
    let mut lines = text.lines();

    let header = loop {
        match lines.next() {
            None => return Err(ParseError::MalformedHeader("missing `p cnf` line".into())),
            Some(line) => {
                let line = line.trim();
                if line.is_empty() || line.starts_with('c') {
                    continue;
                }
                break line;
            }
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (nvars, _nclauses) = match fields.as_slice() {
        ["p", "cnf", nv, nc] => {
            let nv = nv
                .parse::<usize>()
                .map_err(|_| ParseError::MalformedHeader(format!("bad variable count `{}`", nv)))?;
            let nc = nc
                .parse::<usize>()
                .map_err(|_| ParseError::MalformedHeader(format!("bad clause count `{}`", nc)))?;
            (nv, nc)
        }
        _ => {
            return Err(ParseError::MalformedHeader(format!(
                "expected `p cnf <nvars> <nclauses>`, found `{}`",
                header
            )))
        }
    };

    let mut a_vars: Vec<VarId> = Vec::new();
    let mut e_vars: Vec<VarId> = Vec::new();
    let mut declared = std::collections::BTreeSet::new();
    let mut blocks_seen: Vec<char> = Vec::new();
    let mut in_clauses = false;

    let mut warnings = Vec::new();
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    let mut file_index = 0usize;

    let finish_clause = |pending: &mut Vec<Literal>,
                         clauses: &mut Vec<Clause>,
                         warnings: &mut Vec<ParseWarning>,
                         file_index: &mut usize| {
        let clause = Clause::new(pending.drain(..));
        if clause.is_tautological() {
            warnings.push(ParseWarning::TautologyDropped { file_index: *file_index });
        } else {
            clauses.push(clause);
        }
        *file_index += 1;
    };

    for line in lines {
        let line = line.trim();
        if line.is_empty() || line == "c" || line.starts_with("c ") || line.starts_with("c\t") {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap();
        if first == "a" || first == "e" {
            if in_clauses {
                return Err(ParseError::QuantifierOrderViolation(format!(
                    "`{}` block after the first clause",
                    first
                )));
            }
            let q = first.chars().next().unwrap();
            let ok_here =
                matches!((q, blocks_seen.as_slice()), ('a', []) | ('e', []) | ('e', ['a']));
            if !ok_here {
                return Err(ParseError::QuantifierOrderViolation(format!(
                    "`{}` block cannot follow blocks {:?}",
                    q, blocks_seen
                )));
            }
            blocks_seen.push(q);
            let mut terminated = false;
            for tok in tokens {
                if terminated {
                    return Err(ParseError::Syntax(format!(
                        "token `{}` after quantifier block terminator",
                        tok
                    )));
                }
                let n = tok
                    .parse::<i64>()
                    .map_err(|_| ParseError::Syntax(format!("bad token `{}`", tok)))?;
                if n == 0 {
                    terminated = true;
                    continue;
                }
                if n < 0 || n as usize > nvars {
                    return Err(ParseError::UndeclaredVariable { var: n, declared: nvars });
                }
                let v = VarId::new(n as u32);
                if !declared.insert(v) {
                    return Err(ParseError::DuplicateDeclaration(v.get()));
                }
                if q == 'a' {
                    a_vars.push(v);
                } else {
                    e_vars.push(v);
                }
            }
        } else {
            in_clauses = true;
            for tok in std::iter::once(first).chain(tokens) {
                let n = tok
                    .parse::<i64>()
                    .map_err(|_| ParseError::Syntax(format!("bad token `{}`", tok)))?;
                if n == 0 {
                    finish_clause(&mut pending, &mut clauses, &mut warnings, &mut file_index);
                } else {
                    if n.unsigned_abs() as usize > nvars {
                        return Err(ParseError::UndeclaredVariable { var: n, declared: nvars });
                    }
                    pending.push(Literal::from_dimacs(n));
                }
            }
        }
    }
    if !pending.is_empty() {
        finish_clause(&mut pending, &mut clauses, &mut warnings, &mut file_index);
    }

    let free: Vec<VarId> =
        (1..=nvars as u32).map(VarId::new).filter(|v| !declared.contains(v)).collect();
    let mut inputs = a_vars;
    if !free.is_empty() {
        warnings.push(ParseWarning::FreeInputs(free.clone()));
        inputs.extend(free);
    }

    let mut problem = SynthesisProblem::new(inputs, e_vars, clauses)
        .expect("parser-checked declarations cannot violate problem invariants");
    problem.warnings = warnings;
    Ok(problem)
}
