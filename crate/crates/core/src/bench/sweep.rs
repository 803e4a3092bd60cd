//! Prediction-error sweep over the number of subjects.
//!
//! For every subject count `P` and repetition, a fresh synthetic study with
//! `P` subjects is generated (seed `derive(seed, DATA, P, rep)`), optionally
//! converted for early prediction, split into train and test subjects, and
//! every selected algorithm is fitted on train (seed
//! `derive(data seed, ALGO, algorithm)`) and scored on test. Cells run in
//! parallel; results are collected in `(P, rep, algorithm)` order so reports
//! do not depend on scheduling.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{evaluate_pe, fit_algorithm, AlgoParams, Algorithm};
use crate::data::{generate_synthetic, to_early_prediction, Dataset, SubjectId, SyntheticConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub subject_counts: Vec<usize>,
    pub repetitions: usize,
    pub algorithms: Vec<Algorithm>,
    /// Share of subjects held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
    pub early_prediction: bool,
    pub params: AlgoParams<T>,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        SweepConfig {
            subject_counts: vec![10, 20, 50, 100],
            repetitions: 20,
            algorithms: Algorithm::ALL.to_vec(),
            test_fraction: 0.3,
            seed: 0,
            early_prediction: true,
            params: AlgoParams::default(),
        }
    }
}

impl<T: Scalar> SweepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.subject_counts.is_empty() {
            return Err(Error::usage("sweep needs at least one subject count"));
        }
        if let Some(p) = self.subject_counts.iter().find(|&&p| p < 2) {
            return Err(Error::usage(format!(
                "subject count {p} cannot be split into train and test"
            )));
        }
        if self.repetitions < 2 {
            return Err(Error::usage("sweep needs at least 2 repetitions for a variance"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::usage("sweep needs at least one algorithm"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::usage("test fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Seed of the synthetic study for `(p, rep)`.
    pub fn data_seed(&self, p: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[stream::DATA, p as u64, rep as u64])
    }
}

/// One fitted-and-scored cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PeRecord {
    pub algorithm: Algorithm,
    pub p: usize,
    pub rep: usize,
    /// Data seed of the repetition.
    pub seed: u64,
    pub pe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub p: usize,
    pub mean_pe: f64,
    /// Sample variance (`n - 1` denominator) across repetitions.
    pub var_pe: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub log: Vec<PeRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn row(&self, algorithm: Algorithm, p: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.algorithm == algorithm && r.p == p)
    }
}

/// Splits subjects into `(train, test)` with `round(test_fraction·P)` test
/// subjects, at least one on each side.
pub fn split_by_subject<T: Scalar>(ds: &Dataset<T>, test_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let p = ds.n_subjects();
    if p < 2 {
        return Err(Error::usage(format!("cannot split {p} subject(s) into train and test")));
    }
    let mut subjects: Vec<&SubjectId> = ds.subjects().collect();
    subjects.shuffle(&mut rng_from_seed(seed));
    let n_test = ((test_fraction * p as f64).round() as usize).clamp(1, p - 1);
    let test: HashSet<&SubjectId> = subjects[..n_test].iter().copied().collect();
    let train: HashSet<&SubjectId> = subjects[n_test..].iter().copied().collect();
    Ok((ds.filter_subjects(&train), ds.filter_subjects(&test)))
}

pub fn run_sweep<T: Scalar>(gen: &SyntheticConfig, sweep: &SweepConfig<T>) -> Result<SweepResult> {
    sweep.validate()?;
    gen.validate()?;
    let cells: Vec<(usize, usize)> = sweep
        .subject_counts
        .iter()
        .flat_map(|&p| (0..sweep.repetitions).map(move |rep| (p, rep)))
        .collect();
    let per_cell: Vec<Vec<PeRecord>> = cells
        .par_iter()
        .map(|&(p, rep)| run_cell::<T>(gen, sweep, p, rep))
        .collect::<Result<_>>()?;
    let log: Vec<PeRecord> = per_cell.into_iter().flatten().collect();
    let summary = summarize(&log, &sweep.algorithms, &sweep.subject_counts);
    Ok(SweepResult { log, summary })
}

fn run_cell<T: Scalar>(gen: &SyntheticConfig, sweep: &SweepConfig<T>, p: usize, rep: usize) -> Result<Vec<PeRecord>> {
    let seed = sweep.data_seed(p, rep);
    let cfg = SyntheticConfig {
        n_subjects: p,
        ..gen.clone()
    };
    let mut ds: Dataset<T> = generate_synthetic(&cfg, seed)?;
    if sweep.early_prediction {
        ds = to_early_prediction(&ds);
    }
    let (train, test) = split_by_subject(&ds, sweep.test_fraction, derive_seed(seed, &[stream::FOLDS]))?;
    let mut params = sweep.params.clone();
    // Small studies may hold fewer training subjects than folds.
    params.bags = params.bags.min(train.n_subjects());

    sweep
        .algorithms
        .iter()
        .map(|&algorithm| {
            let model = fit_algorithm(
                algorithm,
                &train,
                &params,
                derive_seed(seed, &[stream::ALGO, algorithm.tag()]),
            )?;
            let pe = evaluate_pe(|x| model.predict(x), &test)?;
            Ok(PeRecord {
                algorithm,
                p,
                rep,
                seed,
                pe: pe.to_f64_lossy(),
            })
        })
        .collect()
}

/// Mean and sample variance of the logged PEs per `(algorithm, P)`, in
/// algorithm-major order.
pub fn summarize(log: &[PeRecord], algorithms: &[Algorithm], counts: &[usize]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &algorithm in algorithms {
        for &p in counts {
            let pes: Vec<f64> = log
                .iter()
                .filter(|r| r.algorithm == algorithm && r.p == p)
                .map(|r| r.pe)
                .collect();
            if pes.is_empty() {
                continue;
            }
            let n = pes.len() as f64;
            let mean = pes.iter().sum::<f64>() / n;
            let var = if pes.len() > 1 {
                pes.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            out.push(SummaryRow {
                algorithm,
                p,
                mean_pe: mean,
                var_pe: var,
                repetitions: pes.len(),
            });
        }
    }
    out
}

/// `algorithm,P,rep,seed,pe`
pub fn write_log_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["algorithm", "P", "rep", "seed", "pe"])?;
    for r in &result.log {
        w.write_record([
            r.algorithm.key().to_owned(),
            r.p.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.pe.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `algorithm,P,mean_pe,var_pe`
pub fn write_summary_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["algorithm", "P", "mean_pe", "var_pe"])?;
    for r in &result.summary {
        w.write_record([
            r.algorithm.key().to_owned(),
            r.p.to_string(),
            r.mean_pe.to_string(),
            r.var_pe.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Text table, one row per algorithm and one column per `P`, each cell
/// `mean (variance)` with both scaled by 100.
pub fn format_table(result: &SweepResult) -> String {
    let mut algorithms: Vec<_> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in &result.summary {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
        if !counts.contains(&r.p) {
            counts.push(r.p);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "Prediction Error (Variance) %");
    let _ = write!(s, "{:<14}", "");
    for p in &counts {
        let _ = write!(s, " {:>14}", format!("P={p}"));
    }
    s.push('\n');
    for a in algorithms {
        let _ = write!(s, "{:<14}", a.label());
        for &p in &counts {
            let cell = result
                .row(a, p)
                .map(|r| format!("{:.1} ({:.2})", 100.0 * r.mean_pe, 100.0 * r.var_pe))
                .unwrap_or_else(|| "-".into());
            let _ = write!(s, " {cell:>14}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sweep() -> (SyntheticConfig, SweepConfig<f64>) {
        let gen = SyntheticConfig {
            n_days: 6,
            ..SyntheticConfig::default()
        };
        let sweep = SweepConfig {
            subject_counts: vec![10],
            repetitions: 2,
            algorithms: vec![Algorithm::Sct],
            ..SweepConfig::default()
        };
        (gen, sweep)
    }

    #[test]
    fn single_algorithm_single_count_gives_one_row() {
        let (gen, sweep) = tiny_sweep();
        let r = run_sweep(&gen, &sweep).unwrap();
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.log.len(), 2);
        let row = &r.summary[0];
        assert!(row.mean_pe.is_finite() && row.var_pe.is_finite() && row.var_pe >= 0.0);
        assert_eq!(r, run_sweep(&gen, &sweep).unwrap());
    }

    #[test]
    fn split_never_shares_subjects() {
        let gen = SyntheticConfig {
            n_subjects: 13,
            n_days: 2,
            ..SyntheticConfig::default()
        };
        let ds: Dataset<f64> = generate_synthetic(&gen, 1).unwrap();
        let (train, test) = split_by_subject(&ds, 0.3, 5).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        assert_eq!(test.n_subjects(), 4);
        assert!(test.subjects().all(|s| train.subject_records(s).is_none()));
    }

    #[test]
    fn summary_is_sample_variance() {
        let log: Vec<PeRecord> = [0.1, 0.2, 0.4]
            .iter()
            .enumerate()
            .map(|(rep, &pe)| PeRecord {
                algorithm: Algorithm::Bbt,
                p: 5,
                rep,
                seed: 0,
                pe,
            })
            .collect();
        let s = summarize(&log, &[Algorithm::Bbt], &[5]);
        let mean = 0.7 / 3.0;
        let var = ((0.1f64 - mean).powi(2) + (0.2f64 - mean).powi(2) + (0.4f64 - mean).powi(2)) / 2.0;
        assert!((s[0].mean_pe - mean).abs() < 1e-15);
        assert!((s[0].var_pe - var).abs() < 1e-15);
    }

    #[test]
    fn invalid_sweeps_rejected() {
        let (gen, sweep) = tiny_sweep();
        for bad in [
            SweepConfig {
                repetitions: 1,
                ..sweep.clone()
            },
            SweepConfig {
                subject_counts: vec![],
                ..sweep.clone()
            },
            SweepConfig {
                algorithms: vec![],
                ..sweep.clone()
            },
            SweepConfig {
                test_fraction: 1.0,
                ..sweep.clone()
            },
        ] {
            assert!(run_sweep(&gen, &bad).is_err());
        }
    }

    #[test]
    fn table_layout() {
        let (gen, sweep) = tiny_sweep();
        let r = run_sweep(&gen, &sweep).unwrap();
        let t = format_table(&r);
        assert!(t.contains("P=10"));
        assert!(t.lines().any(|l| l.starts_with("SCT")));
    }
}
