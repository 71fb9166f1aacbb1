//! Reference selectors used as correctness oracles and weak baselines.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_budget, check_mu, first_tied_min, prefix_objectives, shifted_submatrix, Method,
    PlacementResult, SampleSet,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, trace_inverse, Matrix};

/// Upper bound on the number of subsets [`exhaustive_select`] will score.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Greedy selection that scores every candidate by factoring
/// `Q_{S ∪ {i}}` from scratch. Same tie-breaking as FMBS.
pub fn direct_greedy_select(phi: &Matrix, m: usize, mu: f64) -> Result<PlacementResult> {
    check_budget(m, phi.rows())?;
    check_mu(mu)?;
    let n = phi.rows();
    let mut selected: Vec<usize> = Vec::with_capacity(m);
    let mut in_set = vec![false; n];
    let mut objective_trace = Vec::with_capacity(m);
    let mut step_times = Vec::with_capacity(m);

    while selected.len() < m {
        let start = Instant::now();
        let t = selected.len();
        let pool: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
        let mut scores = Vec::with_capacity(pool.len());
        let mut trial = selected.clone();
        trial.push(0);
        for &i in &pool {
            trial[t] = i;
            scores.push(trace_inverse(&shifted_submatrix(phi, &trial, mu)?)?);
        }
        let k = first_tied_min(&scores).expect("budget exceeds candidate pool");
        let (f, i) = (scores[k], pool[k]);
        selected.push(i);
        in_set[i] = true;
        objective_trace.push(f);
        step_times.push(start.elapsed());
    }

    Ok(PlacementResult {
        set: SampleSet(selected),
        objective_trace,
        step_times,
        method: Method::DirectGreedy,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // exact: acc·(n−j) is divisible by (j+1) at every step
        acc = acc * (n - j) as u128 / (j + 1) as u128;
        if acc > EXHAUSTIVE_LIMIT * 1_000 {
            return acc;
        }
    }
    acc
}

/// Advances to the next `combo.len()`-subset of `0..n` in lexicographic order;
/// false once the last one has been passed.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let m = combo.len();
    let Some(pos) = (0..m).rev().find(|&k| combo[k] < n - m + k) else {
        return false;
    };
    combo[pos] += 1;
    for k in pos + 1..m {
        combo[k] = combo[k - 1] + 1;
    }
    true
}

/// Globally optimal `m`-subset by enumeration in lexicographic order; among
/// tied minimizers the first one wins.
pub fn exhaustive_select(phi: &Matrix, m: usize, mu: f64) -> Result<PlacementResult> {
    check_budget(m, phi.rows())?;
    check_mu(mu)?;
    let n = phi.rows();
    let subsets = binomial(n, m);
    if subsets > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            subsets,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let start = Instant::now();
    // The Gram matrix is shared by every subset.
    let gram = Matrix::from_fn(n, n, |i, j| dot(phi.row(i), phi.row(j)));
    let mut q = Matrix::zeros(m, m);
    let mut combo: Vec<usize> = (0..m).collect();
    let mut scores = Vec::with_capacity(subsets as usize);
    loop {
        for a in 0..m {
            for b in 0..m {
                let mut v = gram.get(combo[a], combo[b]);
                if a == b {
                    v += mu;
                }
                q.set(a, b, v);
            }
        }
        scores.push(trace_inverse(&q)?);
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    let winner = first_tied_min(&scores).expect("at least one subset");
    let mut set: Vec<usize> = (0..m).collect();
    for _ in 0..winner {
        next_combination(&mut set, n);
    }
    let elapsed = start.elapsed();

    let objective_trace = prefix_objectives(phi, &set, mu)?;
    Ok(PlacementResult {
        set: SampleSet(set),
        objective_trace,
        step_times: vec![elapsed],
        method: Method::Exhaustive,
    })
}

/// `m` distinct indices drawn uniformly from `0..n`, in draw order.
///
/// Uses ChaCha8 seeded from `seed`, so the set is reproducible for a given
/// `(n, m, seed)` on every platform this build supports.
pub fn random_select(n: usize, m: usize, seed: u64) -> Result<PlacementResult> {
    check_budget(m, n)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, n, m).into_vec();
    let elapsed: Duration = start.elapsed();
    Ok(PlacementResult {
        set: SampleSet(indices),
        objective_trace: Vec::new(),
        step_times: vec![elapsed],
        method: Method::Random,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::submatrix_objective;

    const MU: f64 = 1e-4;

    fn worked() -> Matrix {
        Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap()
    }

    #[test]
    fn direct_greedy_worked_example() {
        let res = direct_greedy_select(&worked(), 2, MU).unwrap();
        assert_eq!(res.set.indices(), [0, 1]);
        assert!((res.objective_trace[0] - 1.0 / (4.0 + MU)).abs() < 1e-15);
        assert!((res.objective_trace[1] - 1.2499).abs() < 1e-4);
    }

    #[test]
    fn direct_greedy_identity_tie_break() {
        let phi = Matrix::identity(5);
        for k in 1..=5 {
            let res = direct_greedy_select(&phi, k, MU).unwrap();
            assert_eq!(res.set.into_vec(), (0..k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn exhaustive_worked_example() {
        let phi = worked();
        let values: Vec<f64> = [[0, 1], [0, 2], [1, 2]]
            .iter()
            .map(|s| submatrix_objective(&phi, s, MU).unwrap())
            .collect();
        assert!((values[0] - 1.2499).abs() < 1e-4);
        assert!((values[1] - 1.4999).abs() < 1e-4);
        // (3 + 2μ)/(1 + 3μ)
        assert!((values[2] - 3.0).abs() < 1e-3);
        let res = exhaustive_select(&phi, 2, MU).unwrap();
        assert_eq!(res.set.indices(), [0, 1]);
        assert!((res.final_objective().unwrap() - values[0]).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_full_budget_and_ties() {
        let phi = worked();
        assert_eq!(
            exhaustive_select(&phi, 3, MU).unwrap().set.indices(),
            [0, 1, 2]
        );
        // every pair of identity rows scores the same; lexicographic first wins
        let res = exhaustive_select(&Matrix::identity(4), 2, MU).unwrap();
        assert_eq!(res.set.indices(), [0, 1]);
    }

    #[test]
    fn exhaustive_guard() {
        let phi = Matrix::zeros(40, 2);
        let err = exhaustive_select(&phi, 20, MU).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(5, 5), 1);
    }

    #[test]
    fn random_is_a_permutation_at_full_budget() {
        let mut s = random_select(5, 5, 42).unwrap().set.into_vec();
        s.sort_unstable();
        assert_eq!(s, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let a = random_select(100, 10, 7).unwrap();
        let b = random_select(100, 10, 7).unwrap();
        assert_eq!(a.set, b.set);
        assert_ne!(random_select(100, 10, 8).unwrap().set, a.set);
        assert!(matches!(random_select(3, 4, 0), Err(Error::Budget { .. })));
    }

    #[test]
    fn random_index_frequencies_are_uniform() {
        let (n, m, seeds) = (1000usize, 100usize, 1000u64);
        let mut counts = vec![0u32; n];
        for seed in 0..seeds {
            for &i in random_select(n, m, seed).unwrap().set.indices() {
                counts[i] += 1;
            }
        }
        // each count is Binomial(1000, 0.1)
        let p = m as f64 / n as f64;
        let mean = seeds as f64 * p;
        let sd = (seeds as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - mean).abs() <= 5.0 * sd, "index {i}: {c}");
        }
    }
}
