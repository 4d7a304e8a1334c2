//! JSON report layouts. Every top-level document carries
//! `"schema_version": 1` and a `"kind"` tag; field order is fixed by the
//! struct definitions, so identical inputs give identical bytes.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use rcassoc::interactions::{interaction_matrix, positivity_report, PositivityReport};
use rcassoc::scenario::ScenarioTable;
use rcassoc::selection::{chi_square_sf, Selection, SweepRecord, SweepResult};
use rcassoc::{ContingencyTable, FitResult, InteractionMatrix, InteractionSpec, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Document<T: Serialize> {
    pub schema_version: u32,
    pub kind: &'static str,
    #[serde(flatten)]
    pub body: T,
}

pub fn document<T: Serialize>(kind: &'static str, body: T) -> Document<T> {
    Document { schema_version: SCHEMA_VERSION, kind, body }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct TableReport {
    pub source: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<f64>>,
    pub total: f64,
}

impl TableReport {
    pub fn new(source: &str, t: &ContingencyTable) -> Self {
        Self {
            source: source.to_string(),
            row_labels: t.row_labels().to_vec(),
            col_labels: t.col_labels().to_vec(),
            counts: t.to_rows(),
            total: t.total(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SpecReport {
    pub k: usize,
    pub row_logit: String,
    pub col_logit: String,
    pub lambda: f64,
}

impl From<&ModelSpec> for SpecReport {
    fn from(s: &ModelSpec) -> Self {
        Self {
            k: s.k,
            row_logit: s.interaction.row_type.to_string(),
            col_logit: s.interaction.col_type.to_string(),
            lambda: s.interaction.lambda,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InteractionReport {
    pub row_logit: String,
    pub col_logit: String,
    pub lambda: f64,
    pub row_cuts: Vec<String>,
    pub col_cuts: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub positivity: PositivityReport,
}

fn cuts(labels: &[String]) -> Vec<String> {
    labels.windows(2).map(|w| format!("{}|{}", w[0], w[1])).collect()
}

impl InteractionReport {
    pub fn new(h: &InteractionMatrix, spec: &InteractionSpec, row_labels: &[String], col_labels: &[String]) -> Self {
        Self {
            row_logit: spec.row_type.to_string(),
            col_logit: spec.col_type.to_string(),
            lambda: spec.lambda,
            row_cuts: cuts(row_labels),
            col_cuts: cuts(col_labels),
            values: h.to_rows(),
            positivity: positivity_report(h),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub table: TableReport,
    pub spec: SpecReport,
    pub phi: Vec<f64>,
    /// Row scores, one inner list per row category.
    pub mu: Vec<Vec<f64>>,
    /// Column scores, one inner list per column category.
    pub nu: Vec<Vec<f64>>,
    pub deviance: f64,
    pub dof: usize,
    pub p_value: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub fitted: Vec<Vec<f64>>,
    pub interactions: InteractionReport,
}

impl FitReport {
    pub fn new(source: &str, t: &ContingencyTable, res: &FitResult) -> Self {
        let h = interaction_matrix(&res.fitted, &res.spec.interaction).expect("fitted table is positive");
        Self {
            table: TableReport::new(source, t),
            spec: SpecReport::from(&res.spec),
            phi: res.params.phi.clone(),
            mu: res.params.mu.clone(),
            nu: res.params.nu.clone(),
            deviance: res.deviance,
            dof: res.dof,
            p_value: chi_square_sf(res.deviance, res.dof),
            loglik: res.loglik,
            converged: res.converged,
            iterations: res.iterations,
            grad_norm: res.grad_norm,
            fitted: res.expected_counts.clone(),
            interactions: InteractionReport::new(&h, &res.spec.interaction, t.row_labels(), t.col_labels()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GridReport {
    pub k_values: Vec<usize>,
    pub row_logits: Vec<String>,
    pub col_logits: Vec<String>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
}

#[derive(Debug, Serialize)]
pub struct RecordReport {
    pub k: usize,
    pub row_logit: String,
    pub col_logit: String,
    pub lambda: f64,
    pub deviance: Option<f64>,
    pub dof: usize,
    pub p_value: Option<f64>,
    pub converged: bool,
    pub phi: Vec<f64>,
    pub error: Option<String>,
}

impl From<&SweepRecord> for RecordReport {
    fn from(r: &SweepRecord) -> Self {
        Self {
            k: r.spec.k,
            row_logit: r.spec.interaction.row_type.to_string(),
            col_logit: r.spec.interaction.col_type.to_string(),
            lambda: r.spec.interaction.lambda,
            deviance: r.deviance,
            dof: r.dof,
            p_value: r.deviance.map(|d| chi_square_sf(d, r.dof)),
            converged: r.converged,
            phi: r.phi.clone(),
            error: r.error.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SelectionReport {
    pub index: usize,
    pub p_value: f64,
    pub adequate: bool,
    pub fit: FitReport,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub table: TableReport,
    pub grid: GridReport,
    pub alpha: f64,
    pub best_index: Option<usize>,
    pub selected: SelectionReport,
    pub records: Vec<RecordReport>,
}

impl SweepReport {
    pub fn new(
        table: TableReport,
        grid: GridReport,
        alpha: f64,
        res: &SweepResult,
        sel: &Selection,
        fit: FitReport,
    ) -> Self {
        Self {
            table,
            grid,
            alpha,
            best_index: res.best,
            selected: SelectionReport { index: sel.index, p_value: sel.p_value, adequate: sel.adequate, fit },
            records: res.records.iter().map(RecordReport::from).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ScenarioEntry {
    pub counts: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub row_totals: Vec<f64>,
    pub col_totals: Vec<f64>,
}

impl From<&ScenarioTable> for ScenarioEntry {
    fn from(s: &ScenarioTable) -> Self {
        Self {
            counts: s.counts.to_rows(),
            expected: s.expected.clone(),
            row_totals: s.counts.row_totals(),
            col_totals: s.counts.col_totals(),
        }
    }
}

/// Map serialised in insertion order.
#[derive(Debug)]
pub struct Keyed<T>(pub Vec<(String, T)>);

impl<T: Serialize> Serialize for Keyed<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Serialize)]
pub struct ScenarioReport {
    pub margin_policy: String,
    pub total: f64,
    pub base: FitReport,
    /// Keyed by scale factor.
    pub scenarios: Keyed<ScenarioEntry>,
}

#[derive(Debug, Serialize)]
pub struct AlthamReport {
    pub first: TableReport,
    pub second: TableReport,
    pub distance: f64,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}
