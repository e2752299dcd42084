//! Right-censored survival data, Nelson-Aalen hazard estimation, the
//! penalized partial likelihood and concordance metrics.

mod concordance;
mod hazard;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CoxError, Result};

pub use concordance::{harrell_c, rscv_c_index, rscv_predictors};
pub use hazard::{nelson_aalen, nelson_aalen_sorted, penalized_partial_likelihood, StepHazard};

/// Observed times `T`, event indicators `Δ` and the `n x p` design `X`.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    design: Array2<f64>,
    /// subject indices sorted by ascending time
    order: Vec<usize>,
}

impl SurvivalDataset {
    pub fn new(times: Vec<f64>, events: Vec<bool>, design: Array2<f64>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(CoxError::InvalidInput("dataset has no subjects".into()));
        }
        if events.len() != n || design.nrows() != n {
            return Err(CoxError::InvalidInput(format!(
                "length mismatch: {} times, {} events, {} design rows",
                n,
                events.len(),
                design.nrows()
            )));
        }
        if design.ncols() == 0 {
            return Err(CoxError::InvalidInput("design has no columns".into()));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(CoxError::InvalidInput(format!(
                "times must be finite and positive (found {t})"
            )));
        }
        if design.iter().any(|x| !x.is_finite()) {
            return Err(CoxError::InvalidInput("design contains non-finite entries".into()));
        }
        let order = sort_order(&times);
        Ok(Self {
            times,
            events,
            design,
            order,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    /// `p / n`
    pub fn zeta(&self) -> f64 {
        self.p() as f64 / self.n() as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Event indicators as 0/1 reals.
    pub fn deltas(&self) -> Vec<f64> {
        self.events.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn linear_predictor(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        self.design.dot(&beta)
    }

    /// Reads the `time,event,x1,...,xp` CSV layout.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "time" || &headers[1] != "event" {
            return Err(CoxError::InvalidInput("expected header time,event,x1,...,xp".into()));
        }
        let p = headers.len() - 2;
        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut cells = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k].trim().parse::<f64>().map_err(|_| {
                    CoxError::InvalidInput(format!("row {}: cannot parse '{}' as a number", line + 1, &record[k]))
                })
            };
            times.push(parse(0)?);
            events.push(match record[1].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(CoxError::InvalidInput(format!(
                        "row {}: event must be 0 or 1, found '{other}'",
                        line + 1
                    )))
                }
            });
            for k in 0..p {
                cells.push(parse(k + 2)?);
            }
        }
        let n = times.len();
        let design = Array2::from_shape_vec((n, p), cells).map_err(|e| CoxError::InvalidInput(e.to_string()))?;
        Self::new(times, events, design)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend((1..=self.p()).map(|k| format!("x{k}")));
        writer.write_record(&header)?;
        for i in 0..self.n() {
            let mut row = Vec::with_capacity(self.p() + 2);
            row.push(format!("{}", self.times[i]));
            row.push(if self.events[i] { "1" } else { "0" }.to_string());
            row.extend(self.design.row(i).iter().map(|x| format!("{x}")));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub(crate) fn sort_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    order
}
