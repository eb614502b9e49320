//! Verdicts and the certificates backing them.

use std::fmt;

use crate::klyachko::SubsetIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// Neither side established: a resolution-limited search or an oracle
    /// budget ran out.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Feasible => "Feasible",
            Verdict::Infeasible => "Infeasible",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRelation {
    Equal,
    AtLeast,
}

/// Why an instance is infeasible.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `lhs` (the dominating side) fails `relation` against `rhs`.
    Trace { relation: TraceRelation, lhs: f64, rhs: f64 },
    /// Violated compatibility inequality `λ⁰[I₀′] ≥ Σ_j λʲ[I_j′]` for the
    /// admissible tuple `(I₀, …, I_m)`; `lhs < rhs`.
    Inequality { subsets: Vec<SubsetIndex>, lhs: f64, rhs: f64 },
    /// Partial sum `k` of the candidate exceeds that of the bound.
    Majorization { k: usize, lhs: f64, rhs: f64 },
    /// A shifted or contractive target has an entry below zero.
    Negativity { block: usize, value: f64 },
    /// The candidate spectrum cannot sit inside the algebra.
    Structure(String),
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Trace { relation, lhs, rhs } => {
                let rel = match relation {
                    TraceRelation::Equal => "=",
                    TraceRelation::AtLeast => ">=",
                };
                write!(f, "trace condition {lhs} {rel} {rhs} fails")
            }
            Certificate::Inequality { subsets, lhs, rhs } => {
                let s: Vec<String> = subsets.iter().map(|s| s.to_string()).collect();
                write!(f, "tuple ({}) violated: {lhs} < {rhs}", s.join(", "))
            }
            Certificate::Majorization { k, lhs, rhs } => {
                write!(f, "partial sum {k}: {lhs} > {rhs}")
            }
            Certificate::Negativity { block, value } => write!(f, "block {block} has entry {value} < 0"),
            Certificate::Structure(msg) => f.write_str(msg),
        }
    }
}

/// A verdict plus, for `Infeasible`, its certificate. `exact` is false when
/// the verdict came from a resolution-limited search.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    pub exact: bool,
}

impl Decision {
    pub fn feasible() -> Self {
        Self { verdict: Verdict::Feasible, certificate: None, exact: true }
    }

    pub fn infeasible(certificate: Certificate) -> Self {
        Self { verdict: Verdict::Infeasible, certificate: Some(certificate), exact: true }
    }

    pub fn inconclusive() -> Self {
        Self { verdict: Verdict::Inconclusive, certificate: None, exact: false }
    }

    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }

    pub fn is_infeasible(&self) -> bool {
        self.verdict == Verdict::Infeasible
    }
}
