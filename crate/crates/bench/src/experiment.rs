//! Averaged-MSE experiments over generated instances.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fmbs_core::inverse::expected_mse;
use fmbs_core::placement::{
    direct_greedy_select, exhaustive_select, fmbs_select_with, random_select, FmbsOptions,
};
use fmbs_core::{generate, Matrix, Method, Model, ModelSpec, PlacementResult};
use rayon::prelude::*;

use crate::error::{BenchError, Result};

pub const DEFAULT_MU: f64 = 1e-4;
pub const DEFAULT_TRIALS: usize = 10;

/// Parses `A:B:STEP` (A, A+STEP, … up to and including B), a comma list,
/// or a single value.
pub fn parse_budgets(spec: &str) -> Result<Vec<usize>> {
    let bad = |why: &str| BenchError::Usage(format!("invalid budgets `{spec}`: {why}"));
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| bad("expected integers"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let budgets = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 {
                return Err(bad("STEP must be positive"));
            }
            if a > b {
                return Err(bad("A must not exceed B"));
            }
            (a..=b).step_by(step).collect()
        }
        _ => return Err(bad("expected A:B:STEP or a comma list")),
    };
    if budgets.is_empty() {
        return Err(bad("no budgets"));
    }
    Ok(budgets)
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for name in list.split(',') {
        let m = Method::from_str(name.trim()).map_err(|e| BenchError::Usage(e.to_string()))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    Ok(methods)
}

/// SplitMix64 finalizer over `seed` and a pair of coordinates.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n: usize,
    pub k: usize,
    pub budgets: Vec<usize>,
    pub mu: f64,
    pub sigma2: f64,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub refresh_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ModelSpec::new(self.model, self.n, self.k, self.seed)?;
        let usage = |msg: String| Err(BenchError::Usage(msg));
        if let Some(&m) = self.budgets.iter().find(|&&m| m < self.k || m > self.n) {
            return usage(format!(
                "budget {m} outside [k, n] = [{}, {}]",
                self.k, self.n
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return usage(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return usage(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.trials == 0 {
            return usage("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return usage("no methods given".into());
        }
        if self.refresh_every == Some(0) {
            return usage("refresh-every must be positive".into());
        }
        Ok(())
    }

    /// Seed of the measurement matrix for trial `trial`.
    pub fn matrix_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64, 0)
    }

    /// Seed handed to `random` for trial `trial` at budget `m`.
    pub fn selection_seed(&self, trial: usize, m: usize) -> u64 {
        derive_seed(self.seed, trial as u64, m as u64 + 1)
    }
}

/// Dispatches one selection. `seed` is only used by `random`.
pub fn run_method(
    phi: &Matrix,
    method: Method,
    m: usize,
    mu: f64,
    seed: u64,
    refresh_every: Option<usize>,
    parallel: bool,
) -> fmbs_core::Result<PlacementResult> {
    match method {
        Method::Fmbs => fmbs_select_with(
            phi,
            m,
            mu,
            &FmbsOptions {
                refresh_every,
                parallel,
            },
        ),
        Method::DirectGreedy => direct_greedy_select(phi, m, mu),
        Method::Exhaustive => exhaustive_select(phi, m, mu),
        Method::Random => random_select(phi.rows(), m, seed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub m: usize,
    pub trial: usize,
    pub mse: f64,
    pub seconds: f64,
    /// Seed of the trial's measurement matrix.
    pub seed: u64,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub m: usize,
    pub mean_mse: f64,
    pub mean_seconds: f64,
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<BenchRecord>> {
    let seed = config.matrix_seed(trial);
    let phi = generate(&ModelSpec::new(config.model, config.n, config.k, seed)?)?;
    let mut out = Vec::with_capacity(config.methods.len() * config.budgets.len());
    for &method in &config.methods {
        for &m in &config.budgets {
            let result = run_method(
                &phi,
                method,
                m,
                config.mu,
                config.selection_seed(trial, m),
                config.refresh_every,
                false,
            )?;
            let mse = match expected_mse(&phi, result.set.indices(), config.sigma2) {
                // rank-deficient selection: the LS error is unbounded
                Err(fmbs_core::Error::NotPositiveDefinite { .. }) => f64::INFINITY,
                other => other?,
            };
            out.push(BenchRecord {
                method,
                m,
                trial,
                mse,
                seconds: result.total_time().as_secs_f64(),
                seed,
                indices: result.set.into_vec(),
            });
        }
    }
    Ok(out)
}

/// Runs every (trial, method, budget) cell. Trials run on the current rayon
/// pool; rows come back sorted by method (in `config.methods` order), then
/// budget, then trial.
pub fn run_bench(config: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let per_trial: Vec<Vec<BenchRecord>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<_>>()?;
    let rank = |m: Method| config.methods.iter().position(|&x| x == m);
    let mut rows: Vec<BenchRecord> = per_trial.into_iter().flatten().collect();
    rows.sort_by_key(|r| (rank(r.method), r.m, r.trial));
    Ok(rows)
}

/// Means over trials, one row per (method, budget), in record order.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, usize)> = Vec::new();
    for r in records {
        match out
            .iter_mut()
            .find(|(s, _)| s.method == r.method && s.m == r.m)
        {
            Some((s, count)) => {
                s.mean_mse += r.mse;
                s.mean_seconds += r.seconds;
                *count += 1;
            }
            None => out.push((
                SummaryRow {
                    method: r.method,
                    m: r.m,
                    mean_mse: r.mse,
                    mean_seconds: r.seconds,
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, count)| {
            s.mean_mse /= count as f64;
            s.mean_seconds /= count as f64;
            s
        })
        .collect()
}

pub const RECORD_HEADER: &str = "method,m,trial,mse,seconds";
pub const SUMMARY_HEADER: &str = "method,m,mean_mse,mean_seconds";

pub fn records_csv(records: &[BenchRecord]) -> String {
    let mut out = format!("{RECORD_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{:?},{:.9}",
            r.method, r.m, r.trial, r.mse, r.seconds
        )
        .unwrap();
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in rows {
        writeln!(
            out,
            "{},{},{:?},{:.9}",
            s.method, s.m, s.mean_mse, s.mean_seconds
        )
        .unwrap();
    }
    out
}

/// `runs.csv` → `runs_summary.csv`, next to the input.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bench");
    out.with_file_name(format!("{stem}_summary.csv"))
}

pub const INDICES_HEADER: &str = "method,m,trial,indices";

/// One row per record; indices in selection order, space separated.
pub fn indices_csv(records: &[BenchRecord]) -> String {
    let mut out = format!("{INDICES_HEADER}\n");
    for r in records {
        let list: Vec<String> = r.indices.iter().map(usize::to_string).collect();
        writeln!(out, "{},{},{},{}", r.method, r.m, r.trial, list.join(" ")).unwrap();
    }
    out
}

pub fn indices_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bench");
    out.with_file_name(format!("{stem}_indices.csv"))
}

fn audit_error(msg: String) -> BenchError {
    BenchError::Audit(msg)
}

/// Recomputes every `mse` in `records_text` from the matching row of
/// `indices_text`, regenerating each trial's matrix from `config`. Returns the
/// number of rows checked; any relative mismatch above 1e-9 is an error.
pub fn audit(config: &ExperimentConfig, records_text: &str, indices_text: &str) -> Result<usize> {
    let mut records = records_text.lines();
    let mut indices = indices_text.lines();
    if records.next() != Some(RECORD_HEADER) || indices.next() != Some(INDICES_HEADER) {
        return Err(audit_error("unexpected CSV headers".into()));
    }
    let mut matrices: Vec<Option<Matrix>> = vec![None; config.trials];
    let mut checked = 0;
    for (line, sel) in records.by_ref().zip(indices.by_ref()) {
        let fields: Vec<&str> = line.split(',').collect();
        let sel_fields: Vec<&str> = sel.split(',').collect();
        if fields.len() != 5 || sel_fields.len() != 4 || fields[..3] != sel_fields[..3] {
            return Err(audit_error(format!(
                "rows do not line up: `{line}` vs `{sel}`"
            )));
        }
        let trial: usize = fields[2]
            .parse()
            .map_err(|_| audit_error(format!("bad trial in `{line}`")))?;
        let mse: f64 = fields[3]
            .parse()
            .map_err(|_| audit_error(format!("bad mse in `{line}`")))?;
        let s: Vec<usize> = sel_fields[3]
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| audit_error(format!("bad indices in `{sel}`")))?;
        let slot = matrices
            .get_mut(trial)
            .ok_or_else(|| audit_error(format!("trial {trial} out of range")))?;
        if slot.is_none() {
            let spec = ModelSpec::new(config.model, config.n, config.k, config.matrix_seed(trial))?;
            *slot = Some(generate(&spec)?);
        }
        let phi = slot.as_ref().unwrap();
        let recomputed = match expected_mse(phi, &s, config.sigma2) {
            Err(fmbs_core::Error::NotPositiveDefinite { .. }) => f64::INFINITY,
            other => other?,
        };
        let agree = mse == recomputed || (mse - recomputed).abs() <= 1e-9 * recomputed.abs();
        if !agree {
            return Err(audit_error(format!(
                "`{line}`: recomputed mse {recomputed:?}"
            )));
        }
        checked += 1;
    }
    if records.next().is_some() || indices.next().is_some() {
        return Err(audit_error("row counts differ".into()));
    }
    Ok(checked)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| BenchError::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: Vec<Method>) -> ExperimentConfig {
        ExperimentConfig {
            model: Model::Gaussian,
            n: 30,
            k: 4,
            budgets: vec![4, 6, 8],
            mu: DEFAULT_MU,
            sigma2: 1.0,
            trials: 3,
            seed: 11,
            methods,
            refresh_every: None,
        }
    }

    #[test]
    fn budget_syntax() {
        assert_eq!(
            parse_budgets("100:120:5").unwrap(),
            [100, 105, 110, 115, 120]
        );
        assert_eq!(parse_budgets("2:7:2").unwrap(), [2, 4, 6]);
        assert_eq!(parse_budgets("5").unwrap(), [5]);
        assert_eq!(parse_budgets("3,9").unwrap(), [3, 9]);
        for bad in ["", "1:2", "5:1:1", "1:5:0", "a:b:c", "1:2:3:4"] {
            assert!(parse_budgets(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            parse_methods("fmbs, random,fmbs").unwrap(),
            [Method::Fmbs, Method::Random]
        );
        assert!(parse_methods("fmbs,bogus").is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let c = small(vec![Method::Fmbs]);
        let seeds = [
            c.matrix_seed(0),
            c.matrix_seed(1),
            c.selection_seed(0, 4),
            c.selection_seed(1, 4),
            c.selection_seed(0, 5),
        ];
        for i in 0..seeds.len() {
            for j in 0..i {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn validation() {
        let mut c = small(vec![Method::Fmbs]);
        c.budgets = vec![3];
        assert!(matches!(c.validate(), Err(BenchError::Usage(_))));
        c.budgets = vec![31];
        assert!(c.validate().is_err());
        let mut c = small(vec![]);
        assert!(c.validate().is_err());
        c.methods = vec![Method::Fmbs];
        c.trials = 0;
        assert!(c.validate().is_err());
        c.trials = 1;
        c.mu = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let c = small(vec![Method::Random, Method::Fmbs]);
        let rows = run_bench(&c).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 3);
        assert_eq!(rows[0].method, Method::Random);
        assert_eq!((rows[1].m, rows[1].trial), (4, 1));
        assert_eq!((rows[3].m, rows[3].trial), (6, 0));
        assert_eq!(rows[9].method, Method::Fmbs);
        for r in &rows {
            assert_eq!(r.indices.len(), r.m);
            assert!(r.mse > 0.0 && r.seconds >= 0.0);
        }
    }

    #[test]
    fn summary_means() {
        let c = small(vec![Method::Fmbs]);
        let rows = run_bench(&c).unwrap();
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 3);
        let mean = rows[..3].iter().map(|r| r.mse).sum::<f64>() / 3.0;
        assert!((summary[0].mean_mse - mean).abs() <= 1e-12 * mean);
        let text = summary_csv(&summary);
        assert!(text.starts_with("method,m,mean_mse,mean_seconds\nfmbs,4,"));
    }

    #[test]
    fn csv_mse_round_trips() {
        let rows = run_bench(&small(vec![Method::Fmbs])).unwrap();
        let text = records_csv(&rows);
        for (line, r) in text.lines().skip(1).zip(&rows) {
            let mse: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(mse, r.mse);
        }
    }

    #[test]
    fn audit_recomputes_every_row() {
        let c = small(vec![Method::Fmbs, Method::Random]);
        let rows = run_bench(&c).unwrap();
        let (rec, idx) = (records_csv(&rows), indices_csv(&rows));
        assert_eq!(audit(&c, &rec, &idx).unwrap(), rows.len());
        let tampered = rec.replacen(&format!("{:?}", rows[0].mse), "1.5", 1);
        assert!(matches!(
            audit(&c, &tampered, &idx),
            Err(BenchError::Audit(_))
        ));
        let short: String = idx.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(audit(&c, &rec, &short).is_err());
    }

    #[test]
    fn summary_file_name() {
        assert_eq!(
            summary_path(Path::new("/tmp/out/runs.csv")),
            Path::new("/tmp/out/runs_summary.csv")
        );
    }
}
