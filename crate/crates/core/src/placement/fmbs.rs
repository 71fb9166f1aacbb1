//! Fast MSE-based sampling with warm-started candidate evaluation.
//!
//! After `t` greedy steps every remaining candidate `i` carries
//!
//! * `p = Q[S, i] = Φ_S·φ_i` (the `μ` term vanishes because `i ∉ S`),
//! * `r = Q_S⁻¹·p`,
//! * `h = q_ii − pᵀr`, the Schur complement of bordering `Q_S` with `i`,
//!
//! and the increase of the objective from adding `i` is `(‖r‖² + 1)/h`. When
//! `i*` is accepted with carryover `(h*, r*)`, each candidate is advanced with
//! one new inner product `g = φ_{i*}ᵀφ_i`:
//!
//! ```text
//! α = pᵀr* / h*,  β = g / h*
//! r ← [r + (α − β)·r* ; β − α]
//! p ← [p ; g]
//! ```
//!
//! No `t×t` matrix is ever formed or inverted.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{
    check_budget, check_mu, shifted_submatrix, tie_limit, Method, PlacementResult, SampleSet,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, schur_threshold, Cholesky, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateState {
    pub index: usize,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub h: f64,
    pub cost: f64,
}

impl CandidateState {
    fn initial(index: usize, q_ii: f64) -> Self {
        Self {
            index,
            p: Vec::new(),
            r: Vec::new(),
            h: q_ii,
            cost: 1.0 / q_ii,
        }
    }

    fn set_schur(&mut self, q_ii: f64) -> Result<()> {
        let h = q_ii - dot(&self.p, &self.r);
        let threshold = schur_threshold(q_ii);
        if !(h > threshold) {
            return Err(Error::DegenerateSchur {
                index: Some(self.index),
                h,
                threshold,
            });
        }
        self.h = h;
        self.cost = (dot(&self.r, &self.r) + 1.0) / h;
        Ok(())
    }

    /// Warm-start step against the last accepted index. With an empty
    /// carryover (`t = 1`) this reduces to `p = g`, `r = g / q_{i*i*}`.
    fn advance(&mut self, chosen: &Chosen, g: f64, q_ii: f64) -> Result<()> {
        debug_assert_eq!(self.p.len(), chosen.r.len());
        let alpha = dot(&self.p, &chosen.r) / chosen.h;
        let beta = g / chosen.h;
        let coef = alpha - beta;
        for (ri, &rc) in self.r.iter_mut().zip(&chosen.r) {
            *ri += coef * rc;
        }
        self.r.push(beta - alpha);
        self.p.push(g);
        self.set_schur(q_ii)
    }
}

/// Carryover from the most recently accepted index.
#[derive(Debug, Clone)]
struct Chosen {
    index: usize,
    h: f64,
    r: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FmbsOptions {
    /// Recompute `(p, r, h)` from a fresh factorization whenever the selected
    /// set size is a multiple of this value.
    pub refresh_every: Option<usize>,
    /// Evaluate candidates on the rayon pool. Selection is identical to the
    /// serial path.
    pub parallel: bool,
}

/// Mutable state of one greedy run over a borrowed `Φ`.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    phi: &'a Matrix,
    mu: f64,
    q_diag: Vec<f64>,
    selected: SampleSet,
    // sorted by index; never contains a selected index
    candidates: Vec<CandidateState>,
    chosen: Option<Chosen>,
    objective: f64,
}

impl<'a> GreedyState<'a> {
    pub fn new(phi: &'a Matrix, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let q_diag: Vec<f64> = (0..phi.rows())
            .map(|i| dot(phi.row(i), phi.row(i)) + mu)
            .collect();
        let candidates = q_diag
            .iter()
            .enumerate()
            .map(|(i, &q)| CandidateState::initial(i, q))
            .collect();
        Ok(Self {
            phi,
            mu,
            q_diag,
            selected: SampleSet::default(),
            candidates,
            chosen: None,
            objective: 0.0,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi(&self) -> &Matrix {
        self.phi
    }

    /// `q_ii = ‖φ_i‖² + μ` for every row.
    pub fn q_diag(&self) -> &[f64] {
        &self.q_diag
    }

    pub fn selected(&self) -> &SampleSet {
        &self.selected
    }

    pub fn candidates(&self) -> &[CandidateState] {
        &self.candidates
    }

    pub fn candidate(&self, index: usize) -> Option<&CandidateState> {
        self.candidates
            .binary_search_by_key(&index, |c| c.index)
            .ok()
            .map(|k| &self.candidates[k])
    }

    /// Submatrix objective of the current selection (0 when empty).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Schur complement `h_{i*}` carried over from the last accepted index.
    pub fn chosen_h(&self) -> Option<f64> {
        self.chosen.as_ref().map(|c| c.h)
    }

    pub fn chosen_r(&self) -> Option<&[f64]> {
        self.chosen.as_ref().map(|c| c.r.as_slice())
    }

    pub fn chosen_p(&self) -> Option<&[f64]> {
        self.chosen.as_ref().map(|c| c.p.as_slice())
    }

    /// First greedy step: `argmax_i q_ii`, smallest index on ties.
    pub fn select_first(&mut self) -> usize {
        assert!(self.selected.is_empty(), "first index already selected");
        let mut best = 0;
        for (i, &q) in self.q_diag.iter().enumerate() {
            if q > self.q_diag[best] {
                best = i;
            }
        }
        self.accept(best);
        best
    }

    /// Advances every candidate with the warm-start recursion.
    pub fn refresh_recursive(&mut self, parallel: bool) -> Result<()> {
        let chosen = self.chosen.as_ref().expect("no index accepted yet");
        let phi = self.phi;
        let q_diag = &self.q_diag;
        let chosen_row = phi.row(chosen.index);
        let update = |c: &mut CandidateState| {
            let g = dot(chosen_row, phi.row(c.index));
            c.advance(chosen, g, q_diag[c.index])
        };
        if parallel {
            let results: Vec<Result<()>> = self.candidates.par_iter_mut().map(update).collect();
            results.into_iter().collect()
        } else {
            self.candidates.iter_mut().try_for_each(update)
        }
    }

    /// Recomputes every candidate's `(p, r, h)` from one factorization of
    /// `Q_S`, discarding accumulated rounding drift.
    pub fn refresh_direct(&mut self, parallel: bool) -> Result<()> {
        let s = self.selected.indices();
        let chol = Cholesky::factor(&shifted_submatrix(self.phi, s, self.mu)?)?;
        let phi = self.phi;
        let q_diag = &self.q_diag;
        let update = |c: &mut CandidateState| {
            c.p = s
                .iter()
                .map(|&j| dot(phi.row(j), phi.row(c.index)))
                .collect();
            c.r = chol.solve(&c.p)?;
            c.set_schur(q_diag[c.index])
        };
        if parallel {
            let results: Vec<Result<()>> = self.candidates.par_iter_mut().map(update).collect();
            results.into_iter().collect()
        } else {
            self.candidates.iter_mut().try_for_each(update)
        }
    }

    /// Lowest-index candidate whose resulting objective is tied (within
    /// [`TIE_RTOL`](super::TIE_RTOL)) with the smallest one.
    pub fn best_candidate(&self) -> Option<&CandidateState> {
        let min = self.candidates.iter().map(|c| c.cost).reduce(f64::min)?;
        let limit = tie_limit(self.objective + min) - self.objective;
        self.candidates.iter().find(|c| c.cost <= limit.max(min))
    }

    /// Moves `index` from the candidate pool into the selection and makes its
    /// warm-start vectors the carryover for the next refresh.
    pub fn accept(&mut self, index: usize) {
        let k = self
            .candidates
            .binary_search_by_key(&index, |c| c.index)
            .expect("accepted index is not a candidate");
        let c = self.candidates.remove(k);
        self.objective += c.cost;
        self.selected.push(index);
        self.chosen = Some(Chosen {
            index,
            h: c.h,
            r: c.r,
            p: c.p,
        });
    }

    /// One full greedy step after the first: refresh, then accept the winner.
    pub fn step(&mut self, options: &FmbsOptions) -> Result<usize> {
        let t = self.selected.len();
        match options.refresh_every {
            Some(every) if every > 0 && t.is_multiple_of(every) => {
                self.refresh_direct(options.parallel)?
            }
            _ => self.refresh_recursive(options.parallel)?,
        }
        let winner = self
            .best_candidate()
            .map(|c| c.index)
            .expect("candidate pool exhausted");
        self.accept(winner);
        Ok(winner)
    }
}

/// Warm-start update of candidate `i` against the state's last accepted
/// index, leaving the state untouched.
pub fn candidate_refresh(state: &GreedyState<'_>, i: usize) -> Result<CandidateState> {
    let mut c = state
        .candidate(i)
        .cloned()
        .ok_or_else(|| Error::InvalidSpec(format!("{i} is not a candidate")))?;
    let chosen = state
        .chosen
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("no index has been accepted yet".into()))?;
    let g = dot(state.phi.row(chosen.index), state.phi.row(i));
    c.advance(chosen, g, state.q_diag[i])?;
    Ok(c)
}

/// `(p, r, h, cost)` for bordering `Q_S` with row `i`, computed from scratch.
pub fn fresh_candidate(phi: &Matrix, s: &[usize], i: usize, mu: f64) -> Result<CandidateState> {
    let q_ii = dot(phi.row(i), phi.row(i)) + mu;
    let mut c = CandidateState::initial(i, q_ii);
    if s.is_empty() {
        return Ok(c);
    }
    c.p = s.iter().map(|&j| dot(phi.row(j), phi.row(i))).collect();
    c.r = Cholesky::factor(&shifted_submatrix(phi, s, mu)?)?.solve(&c.p)?;
    c.set_schur(q_ii)?;
    Ok(c)
}

pub fn fmbs_select(phi: &Matrix, m: usize, mu: f64) -> Result<PlacementResult> {
    fmbs_select_with(phi, m, mu, &FmbsOptions::default())
}

pub fn fmbs_select_with(
    phi: &Matrix,
    m: usize,
    mu: f64,
    options: &FmbsOptions,
) -> Result<PlacementResult> {
    check_budget(m, phi.rows())?;
    let mut step_times: Vec<Duration> = Vec::with_capacity(m);
    let mut objective_trace = Vec::with_capacity(m);

    let start = Instant::now();
    let mut state = GreedyState::new(phi, mu)?;
    state.select_first();
    step_times.push(start.elapsed());
    objective_trace.push(state.objective());

    while state.selected().len() < m {
        let start = Instant::now();
        state.step(options)?;
        step_times.push(start.elapsed());
        objective_trace.push(state.objective());
    }

    Ok(PlacementResult {
        set: state.selected,
        objective_trace,
        step_times,
        method: Method::Fmbs,
    })
}
