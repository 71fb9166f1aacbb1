//! Greedy sensor placement under the shifted A-optimality criterion.
//!
//! For a measurement matrix `Φ` (N×K) and shift `μ > 0`, a sample set `S` is
//! scored by `Tr[(ΦΦᵀ + μI)_S]⁻¹`, the trace of the inverse of the principal
//! submatrix of `Q = ΦΦᵀ + μI` on `S`. For `|S| ≥ K` and full-rank rows this
//! differs from `Tr[(CΦ)ᵀ(CΦ) + μI]⁻¹` by the constant `(|S| − K)/μ`, so both
//! objectives rank sample sets identically.
//!
//! [`fmbs_select`] builds `S` one index at a time, keeping per-candidate
//! warm-start vectors so each step costs `O(N·(t + K))`. The other selectors
//! are reference baselines.

mod baselines;
mod fmbs;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::linalg::{block_inverse_update, dot, trace_inverse, Matrix};

pub use baselines::{direct_greedy_select, exhaustive_select, random_select, EXHAUSTIVE_LIMIT};
pub use fmbs::{
    candidate_refresh, fmbs_select, fmbs_select_with, fresh_candidate, CandidateState, FmbsOptions,
    GreedyState,
};

/// Ordered list of distinct row indices; position `t` holds the index chosen
/// at greedy step `t`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SampleSet(Vec<usize>);

impl SampleSet {
    /// Validates that every index is `< n` and appears once.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::Index { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidSpec(format!("index {i} appears twice")));
            }
        }
        Ok(Self(indices))
    }

    pub(crate) fn push(&mut self, index: usize) {
        debug_assert!(!self.0.contains(&index));
        self.0.push(index);
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl AsRef<[usize]> for SampleSet {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fmbs,
    DirectGreedy,
    Exhaustive,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Fmbs,
        Method::DirectGreedy,
        Method::Exhaustive,
        Method::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fmbs => "fmbs",
            Method::DirectGreedy => "greedy-direct",
            Method::Exhaustive => "exhaustive",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub set: SampleSet,
    /// `objective_trace[t]` is the submatrix objective of the first `t + 1`
    /// selected indices. Empty for [`random_select`], which never sees `Φ`.
    pub objective_trace: Vec<f64>,
    /// Wall time per greedy step. Non-greedy methods record a single entry.
    pub step_times: Vec<Duration>,
    pub method: Method,
}

impl PlacementResult {
    pub fn total_time(&self) -> Duration {
        self.step_times.iter().sum()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "shift mu must be positive, got {mu}"
        )))
    }
}

/// Objective values within this relative distance of the best one count as
/// tied; ties go to the smallest index (or first subset in lexicographic
/// order). Exact ties are common for 0/1 matrices, and without a window the
/// winner among them would depend on rounding.
pub const TIE_RTOL: f64 = 1e-9;

/// Largest objective value still tied with `best`.
pub(crate) fn tie_limit(best: f64) -> f64 {
    best + TIE_RTOL * best.abs()
}

/// Position of the first value tied with the minimum.
pub(crate) fn first_tied_min(values: &[f64]) -> Option<usize> {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = tie_limit(best);
    values.iter().position(|&v| v <= limit)
}

pub(crate) fn check_budget(m: usize, n: usize) -> Result<()> {
    if (1..=n).contains(&m) {
        Ok(())
    } else {
        Err(Error::Budget { budget: m, n })
    }
}

fn check_set(phi: &Matrix, s: &[usize]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidSpec("sample set is empty".into()));
    }
    SampleSet::new(s.to_vec(), phi.rows()).map(|_| ())
}

/// `(ΦΦᵀ + μI)_S`.
pub fn shifted_submatrix(phi: &Matrix, s: &[usize], mu: f64) -> Result<Matrix> {
    if s.is_empty() {
        return Err(Error::InvalidSpec("sample set is empty".into()));
    }
    for &i in s {
        if i >= phi.rows() {
            return Err(Error::Index {
                index: i,
                len: phi.rows(),
            });
        }
    }
    let t = s.len();
    let mut q = Matrix::zeros(t, t);
    for a in 0..t {
        for b in 0..=a {
            let mut v = dot(phi.row(s[a]), phi.row(s[b]));
            if a == b {
                v += mu;
            }
            q.set(a, b, v);
            q.set(b, a, v);
        }
    }
    Ok(q)
}

/// `Tr[(CΦ)ᵀ(CΦ) + μI]⁻¹`, the shifted A-optimality objective.
pub fn shifted_normal_objective(phi: &Matrix, s: &[usize], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_set(phi, s)?;
    let mut normal = phi.gather_rows(s)?.normal_matrix();
    for k in 0..normal.rows() {
        normal.set(k, k, normal.get(k, k) + mu);
    }
    trace_inverse(&normal)
}

/// `Tr[(ΦΦᵀ + μI)_S]⁻¹`, the principal-submatrix objective.
pub fn submatrix_objective(phi: &Matrix, s: &[usize], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_set(phi, s)?;
    trace_inverse(&shifted_submatrix(phi, s, mu)?)
}

/// Submatrix objective of every prefix of `s`, grown with bordered inverses.
pub fn prefix_objectives(phi: &Matrix, s: &[usize], mu: f64) -> Result<Vec<f64>> {
    check_mu(mu)?;
    check_set(phi, s)?;
    let mut out = Vec::with_capacity(s.len());
    let q00 = dot(phi.row(s[0]), phi.row(s[0])) + mu;
    let mut q_inv = Matrix::new(1, 1, vec![1.0 / q00])?;
    out.push(1.0 / q00);
    for t in 1..s.len() {
        let row = phi.row(s[t]);
        let p: Vec<f64> = s[..t].iter().map(|&j| dot(phi.row(j), row)).collect();
        q_inv = block_inverse_update(&q_inv, &p, dot(row, row) + mu).map_err(|e| match e {
            Error::DegenerateSchur { h, threshold, .. } => Error::DegenerateSchur {
                index: Some(s[t]),
                h,
                threshold,
            },
            other => other,
        })?;
        out.push((0..=t).map(|k| q_inv.get(k, k)).sum());
    }
    Ok(out)
}
