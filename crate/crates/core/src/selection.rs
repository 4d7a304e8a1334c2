//! Grid search over the model family and smallest-adequate-rank selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::interactions::{InteractionSpec, LogitType, LAMBDA_BOUND};
use crate::rc_model::{dof, fit, FitOptions, ModelSpec};
use crate::table::ContingencyTable;

/// Cartesian grid of ranks, logit types and scaling factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub row_types: Vec<LogitType>,
    pub col_types: Vec<LogitType>,
    pub k_values: Vec<usize>,
}

impl SweepGrid {
    /// Default lambda range `[-2, 2]` in steps of 0.01.
    pub fn new(row_types: Vec<LogitType>, col_types: Vec<LogitType>, k_values: Vec<usize>) -> Self {
        Self { lambda_min: -2.0, lambda_max: 2.0, lambda_step: 0.01, row_types, col_types, k_values }
    }

    pub fn with_lambda(mut self, min: f64, max: f64, step: f64) -> Self {
        self.lambda_min = min;
        self.lambda_max = max;
        self.lambda_step = step;
        self
    }

    /// Lambda values `min + i * step`, rounded to 10 decimals so that grid
    /// points such as -1.21 are hit exactly.
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        let (lo, hi, step) = (self.lambda_min, self.lambda_max, self.lambda_step);
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("lambda step must be positive, got {step}")));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidGrid(format!("empty lambda range {lo}..{hi}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10).collect())
    }

    /// Specs in enumeration order: rank, row type, column type, lambda.
    pub fn specs(&self, rows: usize, cols: usize) -> Result<Vec<ModelSpec>> {
        let lambdas = self.lambdas()?;
        if self.row_types.is_empty() || self.col_types.is_empty() || self.k_values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for &k in &self.k_values {
            dof(rows, cols, k)?;
        }
        let mut out = Vec::new();
        for &k in &self.k_values {
            for &rt in &self.row_types {
                for &ct in &self.col_types {
                    for &lambda in &lambdas {
                        let spec = InteractionSpec::with_bound(rt, ct, lambda, LAMBDA_BOUND)?;
                        out.push(ModelSpec::new(k, spec));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One grid point. Fits that fail are kept with `converged = false` and the
/// error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub spec: ModelSpec,
    pub deviance: Option<f64>,
    pub dof: usize,
    pub converged: bool,
    pub phi: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// Converged record with the smallest deviance.
    pub best: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    pub fit: FitOptions,
    /// Worker thread cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

fn record_for(t: &ContingencyTable, spec: ModelSpec, opts: &FitOptions) -> SweepRecord {
    let d = dof(t.rows(), t.cols(), spec.k).unwrap_or(0);
    match fit(t, &spec, opts) {
        Ok(res) => SweepRecord {
            deviance: Some(res.deviance),
            dof: res.dof,
            converged: res.converged,
            phi: res.params.phi,
            error: None,
            spec,
        },
        Err(e) => {
            SweepRecord { spec, deviance: None, dof: d, converged: false, phi: vec![], error: Some(e.to_string()) }
        }
    }
}

// Strictly better deviance, then smaller |lambda|; earlier grid order wins ties.
fn better(a: &SweepRecord, b: &SweepRecord) -> bool {
    let (da, db) = (a.deviance.unwrap_or(f64::INFINITY), b.deviance.unwrap_or(f64::INFINITY));
    if (da - db).abs() > 1e-12 {
        return da < db;
    }
    a.spec.interaction.lambda.abs() < b.spec.interaction.lambda.abs()
}

fn argbest<'a>(records: impl Iterator<Item = (usize, &'a SweepRecord)>) -> Option<usize> {
    let mut best: Option<(usize, &SweepRecord)> = None;
    for (i, r) in records {
        if !r.converged || r.deviance.is_none() {
            continue;
        }
        if best.is_none_or(|(_, b)| better(r, b)) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

/// Fits every grid point; record order is the grid enumeration order
/// regardless of how many threads run.
pub fn sweep(t: &ContingencyTable, grid: &SweepGrid, opts: &SweepOptions) -> Result<SweepResult> {
    let specs = grid.specs(t.rows(), t.cols())?;
    if specs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let run = || -> Vec<SweepRecord> { specs.into_par_iter().map(|spec| record_for(t, spec, &opts.fit)).collect() };
    let records = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidGrid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let best = argbest(records.iter().enumerate());
    Ok(SweepResult { records, best })
}

/// Level of the chi-square adequacy test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub alpha: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub record: SweepRecord,
    pub p_value: f64,
    /// False when no rank passes the adequacy test; the record is then the
    /// best-fitting one overall.
    pub adequate: bool,
}

/// Upper tail probability of a chi-square variable.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    ChiSquared::new(dof as f64).expect("positive dof").sf(x.max(0.0))
}

/// Picks the smallest rank whose best model is not rejected at `alpha`,
/// then the best record within that rank. Saturated (dof 0) records never
/// count as adequate.
pub fn select_best(s: &SweepResult, policy: &SelectionPolicy) -> Result<Selection> {
    let eligible = |r: &SweepRecord| r.converged && r.deviance.is_some() && r.dof > 0;
    let mut ks: Vec<usize> = s.records.iter().filter(|r| eligible(r)).map(|r| r.spec.k).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::NoAdequateModel { alpha: policy.alpha });
    }
    let pick = |k: Option<usize>| {
        argbest(s.records.iter().enumerate().filter(|(_, r)| eligible(r) && k.is_none_or(|k| r.spec.k == k)))
            .expect("nonempty")
    };
    let selection = |index: usize, adequate: bool| {
        let record = s.records[index].clone();
        let p_value = chi_square_sf(record.deviance.unwrap_or(f64::INFINITY), record.dof);
        Selection { index, record, p_value, adequate }
    };
    for &k in &ks {
        let i = pick(Some(k));
        let rec = &s.records[i];
        if chi_square_sf(rec.deviance.unwrap_or(f64::INFINITY), rec.dof) > policy.alpha {
            return Ok(selection(i, true));
        }
    }
    Ok(selection(pick(None), false))
}

impl SweepResult {
    /// One CSV row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,row_type,col_type,lambda,deviance,dof,converged,phi,error\n");
        for r in &self.records {
            let phi = r.phi.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.spec.k,
                r.spec.interaction.row_type,
                r.spec.interaction.col_type,
                r.spec.interaction.lambda,
                r.deviance.map(|d| d.to_string()).unwrap_or_default(),
                r.dof,
                r.converged,
                phi,
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        out
    }
}
