//! One-parameter sweeps run concurrently on a bounded thread pool.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ExperimentConfig, SweepParameter};
use super::io::write_record;
use crate::analysis::{classify_outcome, estimate_speed, Front, Outcome};
use crate::solver::run;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("config has no [sweep] section")]
    NoAxis,
    #[error("cannot build a pool of {0} threads: {1}")]
    Pool(usize, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Option<Outcome>,
    pub final_width: Option<f64>,
    pub c_hat: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    /// Ordered by value.
    pub rows: Vec<SweepRow>,
    /// For μ and h0: no Vanishing row above a Spreading row. `None` for d.
    pub monotone: Option<bool>,
}

impl SweepReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{},outcome,final_width,c_hat,error\n", self.parameter.name());
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.value,
                r.outcome.map_or("error".to_string(), |o| o.to_string()),
                opt(r.final_width),
                opt(r.c_hat),
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    /// Number of Vanishing→Spreading switches along the ordered rows,
    /// ignoring Undetermined and failed rows.
    pub fn transitions(&self) -> usize {
        let decided: Vec<Outcome> =
            self.rows.iter().filter_map(|r| r.outcome).filter(|o| *o != Outcome::Undetermined).collect();
        decided.windows(2).filter(|w| w[0] == Outcome::Vanishing && w[1] == Outcome::Spreading).count()
    }
}

fn is_monotone(rows: &[SweepRow]) -> bool {
    let first_spreading = rows.iter().position(|r| r.outcome == Some(Outcome::Spreading));
    match first_spreading {
        None => true,
        Some(i) => rows[i..].iter().all(|r| r.outcome != Some(Outcome::Vanishing)),
    }
}

/// Runs the solver and classifier for every value of the sweep axis using at
/// most `jobs` threads. Row `i` writes its outputs to `out/<param>_<i>` when
/// `out` is given. Per-row failures are recorded in the row.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize, out: Option<&Path>) -> Result<SweepReport, SweepError> {
    let axis = cfg.sweep.as_ref().ok_or(SweepError::NoAxis)?;
    let jobs = jobs.max(1);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| SweepError::Pool(jobs, e.to_string()))?;
    let mut values: Vec<(usize, f64)> = axis.values.iter().copied().enumerate().collect();
    values.sort_by(|a, b| a.1.total_cmp(&b.1));

    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .map(|&(index, value)| {
                let run_cfg = axis.parameter.apply(&cfg.run, value);
                let record = match run(&run_cfg) {
                    Ok(r) => r,
                    Err(e) => {
                        return SweepRow {
                            value,
                            outcome: None,
                            final_width: None,
                            c_hat: None,
                            error: Some(e.to_string()),
                        }
                    }
                };
                let mut error = None;
                if let Some(dir) = out {
                    let dir = dir.join(format!("{}_{index}", axis.parameter.name()));
                    if let Err(e) = write_record(&dir, &record, Some(&cfg.source)) {
                        error = Some(e.to_string());
                    }
                }
                let outcome = classify_outcome(&record.series, cfg.analysis.width_threshold, cfg.analysis.decay_tol);
                let last = record.final_row();
                let c_hat = (outcome == Outcome::Spreading)
                    .then(|| estimate_speed(&record.series, Front::Right, cfg.analysis.window_fraction).ok())
                    .flatten()
                    .map(|e| e.slope.c_hat);
                SweepRow { value, outcome: Some(outcome), final_width: Some(last.h - last.g), c_hat, error }
            })
            .collect()
    });
    let monotone = match axis.parameter {
        SweepParameter::Mu | SweepParameter::H0 => Some(is_monotone(&rows)),
        SweepParameter::D => None,
    };
    Ok(SweepReport { parameter: axis.parameter, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, outcome: Outcome) -> SweepRow {
        SweepRow { value, outcome: Some(outcome), final_width: None, c_hat: None, error: None }
    }

    #[test]
    fn monotonicity_and_transitions() {
        use Outcome::*;
        let ok = [row(0.1, Vanishing), row(0.2, Undetermined), row(0.3, Spreading), row(0.4, Spreading)];
        assert!(is_monotone(&ok));
        let bad = [row(0.1, Spreading), row(0.2, Vanishing)];
        assert!(!is_monotone(&bad));
        let report = SweepReport { parameter: SweepParameter::Mu, rows: ok.to_vec(), monotone: Some(true) };
        assert_eq!(report.transitions(), 1);
        assert!(report.to_table().starts_with("mu,outcome"));
    }
}
