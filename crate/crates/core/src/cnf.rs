//! 3-CNF formulas: DIMACS parsing, normalization, evaluation, and a small
//! exhaustive solver used as ground truth.
//!
//! The gadget builders need clauses with exactly three distinct variables.
//! Raw input is allowed to be sloppier (1..=3 literals, repeats), and
//! [`normalize_distinct`] rewrites it into the strict shape while recording
//! every action so satisfying assignments can be mapped back and forth.

use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CnfError {
    #[error("missing DIMACS header `p cnf <n> <m>`")]
    MissingHeader,
    #[error("malformed DIMACS header: {0}")]
    BadHeader(String),
    #[error("bad token {0:?}")]
    BadToken(String),
    #[error("literal {lit} outside variable range 1..={n}")]
    LiteralOutOfRange { lit: i64, n: u32 },
    #[error("clause {index} is empty")]
    EmptyClause { index: usize },
    #[error("clause {index} has more than 3 literals")]
    TooManyLiterals { index: usize },
    #[error("header declares {declared} clauses, found {found}")]
    WrongClauseCount { declared: usize, found: usize },
    #[error("unterminated final clause")]
    UnterminatedClause,
    #[error("clause variables must be 3 distinct values in range, got {0:?}")]
    NotThreeDistinct(Vec<u32>),
    #[error("exhaustive solving capped at {max} variables, formula has {n}")]
    SolveTooLarge { n: u32, max: u32 },
}

/// A literal: 1-based variable index plus complement flag
/// (`negated = true` encodes the DIMACS literal `-var`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn from_dimacs(lit: i64, n: u32) -> Result<Literal, CnfError> {
        let var = lit.unsigned_abs();
        if lit == 0 || var > n as u64 {
            return Err(CnfError::LiteralOutOfRange { lit, n });
        }
        Ok(Literal {
            var: var as u32,
            negated: lit < 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// A literal holds under `u` iff the variable's value differs from its
    /// complement flag.
    pub fn satisfied_by(self, u: &[bool]) -> bool {
        u[(self.var - 1) as usize] != self.negated
    }
}

/// A clause with exactly three distinct variables, stored ascending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    lits: [Literal; 3],
}

impl Clause {
    pub fn new(mut lits: [Literal; 3]) -> Result<Clause, CnfError> {
        lits.sort_by_key(|l| l.var);
        if lits[0].var == lits[1].var || lits[1].var == lits[2].var {
            return Err(CnfError::NotThreeDistinct(lits.map(|l| l.var).to_vec()));
        }
        Ok(Clause { lits })
    }

    pub fn literals(&self) -> &[Literal; 3] {
        &self.lits
    }

    pub fn satisfied_by(&self, u: &[bool]) -> bool {
        self.lits.iter().any(|l| l.satisfied_by(u))
    }

    pub fn all_complemented(&self) -> bool {
        self.lits.iter().all(|l| l.negated)
    }
}

/// Strict 3-CNF: every clause has three distinct in-range variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    n: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(n: u32, clauses: Vec<Clause>) -> Result<CnfFormula, CnfError> {
        for c in &clauses {
            if let Some(l) = c.lits.iter().find(|l| l.var == 0 || l.var > n) {
                return Err(CnfError::LiteralOutOfRange {
                    lit: l.to_dimacs(),
                    n,
                });
            }
        }
        Ok(CnfFormula { n, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn evaluate(&self, u: &[bool]) -> bool {
        assert_eq!(u.len(), self.n as usize, "assignment length");
        self.clauses.iter().all(|c| c.satisfied_by(u))
    }

    /// Lexicographically smallest satisfying assignment (variable 1 is the
    /// most significant bit, false < true), or None if unsatisfiable.
    /// Exhaustive; refuses more than 24 variables.
    pub fn solve_small(&self) -> Result<Option<Vec<bool>>, CnfError> {
        const MAX: u32 = 24;
        if self.n > MAX {
            return Err(CnfError::SolveTooLarge { n: self.n, max: MAX });
        }
        let n = self.n as usize;
        for bits in 0u64..(1u64 << n) {
            let u: Vec<bool> = (0..n).map(|i| bits >> (n - 1 - i) & 1 == 1).collect();
            if self.evaluate(&u) {
                return Ok(Some(u));
            }
        }
        Ok(None)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.n, self.clauses.len());
        for c in &self.clauses {
            let _ = writeln!(
                out,
                "{} {} {} 0",
                c.lits[0].to_dimacs(),
                c.lits[1].to_dimacs(),
                c.lits[2].to_dimacs()
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "m": self.clauses.len(),
            "clauses": self
                .clauses
                .iter()
                .map(|c| c.lits.iter().map(|l| l.to_dimacs()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

/// As-parsed CNF: clauses of 1..=3 literals, repeats and both polarities
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCnf {
    pub n: u32,
    pub clauses: Vec<Vec<Literal>>,
}

/// Parses DIMACS CNF text. Comment lines start with `c`; the `p cnf n m`
/// header must precede all clauses; every clause is `0`-terminated; the
/// clause count must match the header; clauses carry 1..=3 literals.
pub fn parse_dimacs(text: &str) -> Result<RawCnf, CnfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut in_clause = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::BadHeader("duplicate header".into()));
            }
            let mut it = line.split_whitespace();
            let (p, cnf) = (it.next(), it.next());
            if p != Some("p") || cnf != Some("cnf") {
                return Err(CnfError::BadHeader(line.into()));
            }
            let n: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| CnfError::BadHeader(line.into()))?;
            let m: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| CnfError::BadHeader(line.into()))?;
            if it.next().is_some() {
                return Err(CnfError::BadHeader(line.into()));
            }
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or(CnfError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| CnfError::BadToken(tok.to_string()))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(CnfError::EmptyClause {
                        index: clauses.len() + 1,
                    });
                }
                clauses.push(std::mem::take(&mut current));
                in_clause = false;
                continue;
            }
            current.push(Literal::from_dimacs(lit, n)?);
            if current.len() > 3 {
                return Err(CnfError::TooManyLiterals {
                    index: clauses.len() + 1,
                });
            }
            in_clause = true;
        }
    }
    let (n, m) = header.ok_or(CnfError::MissingHeader)?;
    if in_clause {
        return Err(CnfError::UnterminatedClause);
    }
    if clauses.len() != m {
        return Err(CnfError::WrongClauseCount {
            declared: m,
            found: clauses.len(),
        });
    }
    Ok(RawCnf { n, clauses })
}

/// What `normalize_distinct` did to each original clause, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeAction {
    /// Clause already had 3 distinct variables and was kept as-is
    /// (repeated identical literals may have been merged first).
    Kept { original: usize },
    /// Clause contained a variable in both polarities: always true, dropped.
    DroppedTautology { original: usize },
    /// Clause repeated an earlier kept clause verbatim: dropped.
    DroppedDuplicate { original: usize },
    /// Clause had fewer than 3 distinct variables after merging repeats;
    /// expanded over fresh variables into 2^(3-k) clauses.
    Expanded {
        original: usize,
        fresh_vars: Vec<u32>,
        produced: usize,
    },
}

/// Record mapping a raw formula to its strict normalization. Assignments
/// for the normalized formula restrict to assignments of the original by
/// truncating to the first `original_n` variables; conversely any original
/// assignment extends with arbitrary values for the fresh variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizeRecord {
    pub original_n: u32,
    pub normalized_n: u32,
    pub actions: Vec<NormalizeAction>,
}

impl NormalizeRecord {
    pub fn restrict_assignment(&self, u: &[bool]) -> Vec<bool> {
        u[..self.original_n as usize].to_vec()
    }

    pub fn extend_assignment(&self, u: &[bool]) -> Vec<bool> {
        let mut out = u.to_vec();
        out.resize(self.normalized_n as usize, false);
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let actions: Vec<serde_json::Value> = self
            .actions
            .iter()
            .map(|a| match a {
                NormalizeAction::Kept { original } => {
                    serde_json::json!({"action": "kept", "clause": original})
                }
                NormalizeAction::DroppedTautology { original } => {
                    serde_json::json!({"action": "dropped_tautology", "clause": original})
                }
                NormalizeAction::DroppedDuplicate { original } => {
                    serde_json::json!({"action": "dropped_duplicate", "clause": original})
                }
                NormalizeAction::Expanded {
                    original,
                    fresh_vars,
                    produced,
                } => serde_json::json!({
                    "action": "expanded",
                    "clause": original,
                    "fresh_vars": fresh_vars,
                    "produced": produced,
                }),
            })
            .collect();
        serde_json::json!({
            "original_n": self.original_n,
            "normalized_n": self.normalized_n,
            "actions": actions,
        })
    }
}

/// Rewrites a raw formula into strict 3-distinct-variable form.
///
/// Per clause: merge repeated identical literals; drop the clause if some
/// variable occurs in both polarities (tautology) or if it duplicates an
/// earlier kept clause; expand clauses with k < 3 distinct variables over
/// 3-k fresh variables into 2^(3-k) clauses covering every polarity
/// pattern (satisfiable by exactly the assignments whose restriction
/// satisfies the original clause, regardless of the fresh values).
pub fn normalize_distinct(raw: &RawCnf) -> (CnfFormula, NormalizeRecord) {
    let mut next_fresh = raw.n + 1;
    let mut out: Vec<Clause> = Vec::new();
    let mut seen: BTreeSet<Clause> = BTreeSet::new();
    let mut actions = Vec::new();
    for (idx, clause) in raw.clauses.iter().enumerate() {
        let index = idx + 1;
        let mut lits: Vec<Literal> = clause.clone();
        lits.sort();
        lits.dedup();
        let tautology = lits
            .iter()
            .any(|l| lits.contains(&Literal { var: l.var, negated: !l.negated }));
        if tautology {
            actions.push(NormalizeAction::DroppedTautology { original: index });
            continue;
        }
        if lits.len() == 3 {
            let c = Clause::new([lits[0], lits[1], lits[2]]).expect("distinct by construction");
            if seen.insert(c) {
                out.push(c);
                actions.push(NormalizeAction::Kept { original: index });
            } else {
                actions.push(NormalizeAction::DroppedDuplicate { original: index });
            }
            continue;
        }
        let missing = 3 - lits.len();
        let fresh_vars: Vec<u32> = (0..missing).map(|i| next_fresh + i as u32).collect();
        next_fresh += missing as u32;
        let mut produced = 0;
        for pattern in 0..(1u32 << missing) {
            let mut full = lits.clone();
            for (bit, &v) in fresh_vars.iter().enumerate() {
                full.push(Literal {
                    var: v,
                    negated: pattern >> bit & 1 == 1,
                });
            }
            let c = Clause::new([full[0], full[1], full[2]]).expect("fresh vars are distinct");
            if seen.insert(c) {
                out.push(c);
                produced += 1;
            }
        }
        actions.push(NormalizeAction::Expanded {
            original: index,
            fresh_vars,
            produced,
        });
    }
    let normalized_n = next_fresh - 1;
    let formula = CnfFormula::new(normalized_n, out).expect("normalized clauses are in range");
    (
        formula,
        NormalizeRecord {
            original_n: raw.n,
            normalized_n,
            actions,
        },
    )
}

/// Record of the variable flips applied by
/// [`normalize_first_clause_complemented`]: `u` satisfies the original
/// formula iff `u XOR flips` satisfies the flipped one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipRecord {
    pub flipped_vars: Vec<u32>,
}

impl FlipRecord {
    pub fn apply(&self, u: &[bool]) -> Vec<bool> {
        let mut out = u.to_vec();
        for &v in &self.flipped_vars {
            out[(v - 1) as usize] = !out[(v - 1) as usize];
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "flipped_vars": self.flipped_vars })
    }
}

/// Complements variables so the first clause has all literals negated,
/// an equisatisfiable rewrite with an explicit assignment bijection.
/// Identity (empty flip set) if the formula has no clauses or the first
/// clause is already all-complemented.
pub fn normalize_first_clause_complemented(f: &CnfFormula) -> (CnfFormula, FlipRecord) {
    let flips: Vec<u32> = match f.clauses.first() {
        None => Vec::new(),
        Some(c) => c
            .lits
            .iter()
            .filter(|l| !l.negated)
            .map(|l| l.var)
            .collect(),
    };
    let flip_set: BTreeSet<u32> = flips.iter().copied().collect();
    let clauses = f
        .clauses
        .iter()
        .map(|c| {
            let lits = c.lits.map(|l| Literal {
                var: l.var,
                negated: if flip_set.contains(&l.var) {
                    !l.negated
                } else {
                    l.negated
                },
            });
            Clause::new(lits).expect("flipping preserves distinctness")
        })
        .collect();
    let flipped = CnfFormula::new(f.n, clauses).expect("flipping preserves range");
    (
        flipped,
        FlipRecord {
            flipped_vars: flips,
        },
    )
}
