//! The `holonomy` and `build-null-plane` commands.

use crate::chart_ref;
use crate::report::{
    ChartDefinition, CheckKind, CheckRecord, SuiteReport, SCHEMA_VERSION, TOOL_VERSION,
};
use crate::settings::Settings;
use crate::suites::{null_plane_checks, SYSTEM_TOL};
use conelab::holonomy::{ambrose_singer_span, doubled_null_frame, stabilizer_analysis};
use conelab::lie_matrix::{berger_label, invariant_null_line_search};
use conelab::null_plane::{build_metric, null_plane_data_from_toml, solve_eta};
use conelab::pseudo_linear::QuadraticSpace;
use conelab::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-14 {
        0.0
    } else {
        x
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().map(|x| clean(*x)).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StabiliserSummary {
    pub in_stabiliser: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
    pub linear_dim: Option<usize>,
    pub translations_dim: Option<usize>,
    pub decomposable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub chart: String,
    pub label: String,
    pub point: Vec<f64>,
    pub order: usize,
    pub tol: f64,
    pub dim: usize,
    pub dim_by_order: Vec<usize>,
    pub converged: bool,
    pub skew_residual: f64,
    /// entries of the holonomy table matching signature and dimension
    pub berger_candidates: Vec<String>,
    pub basis: Vec<Vec<Vec<f64>>>,
    /// invariant null line of the span, when one exists
    pub null_line: Option<Vec<f64>>,
    /// present for doubled charts, whose `∂_v` is a parallel null vector
    pub stabiliser: Option<StabiliserSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl HolonomyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Basis entries in long form: `element,row,col,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["element", "row", "col", "value"])
            .expect("in-memory write");
        for (k, m) in self.basis.iter().enumerate() {
            for (i, row) in m.iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    w.write_record([
                        k.to_string(),
                        i.to_string(),
                        j.to_string(),
                        format!("{x:e}"),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Curvature-generated holonomy span at `point`, with stabiliser analysis on doubled charts.
pub fn holonomy(
    reference: &str,
    point: &[f64],
    order: usize,
    settings: &Settings,
) -> Result<HolonomyReport> {
    let chart = chart_ref::resolve(reference)?;
    if point.len() != chart.dim() {
        return Err(Error::Config(format!(
            "point has {} coordinates but `{reference}` has dimension {}",
            point.len(),
            chart.dim()
        )));
    }
    let span = ambrose_singer_span(&chart, point, order, settings.tol)?;
    let space = QuadraticSpace::new(span.metric_at_point.clone())?;
    let null_line = invariant_null_line_search(&span.algebra(), &space)
        .map(|l| l.vectors()[0].iter().map(|x| clean(*x)).collect());
    let stabiliser = doubled_null_frame(&span.metric_at_point)
        .ok()
        .map(|(space, frame)| {
            let rep = stabilizer_analysis(&span, &space, &frame);
            StabiliserSummary {
                in_stabiliser: rep.in_stabiliser,
                diagnosis: rep.diagnosis,
                linear_dim: rep.linear_part.map(|a| a.dim()),
                translations_dim: rep.translations.map(|t| t.dim()),
                decomposable: rep.decomposable_witness.is_some(),
            }
        });
    let (t, s) = chart.signature();
    Ok(HolonomyReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        chart: reference.into(),
        label: chart.label().into(),
        point: point.to_vec(),
        order,
        tol: settings.tol,
        dim: span.dim(),
        dim_by_order: span.dim_by_order.clone(),
        converged: span.converged,
        skew_residual: span.skew_residual(),
        berger_candidates: berger_label(t, s, span.dim()),
        basis: span.basis.iter().map(rows).collect(),
        null_line,
        stabiliser,
        timing_ms: None,
    })
}

/// Builds the null-plane metric of a configuration document and checks it.
/// Configuration errors are returned; construction failures end up as
/// failed checks in the report.
pub fn build_null_plane(text: &str, settings: &Settings) -> Result<SuiteReport> {
    let data = null_plane_data_from_toml(text)?;
    let id = format!("null-plane.{}", data.label);
    let built = solve_eta(&data).and_then(|eta| build_metric(&eta, settings.grid, settings.seed));
    let chart = match built {
        Ok(chart) => chart,
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => return Err(e),
        Err(e) => {
            let check = CheckRecord::failed(
                format!("{id}.build"),
                "null-plane data",
                CheckKind::ResidualBelow,
                SYSTEM_TOL,
                e,
            );
            return Ok(SuiteReport::new(
                "build-null-plane",
                settings.echo(),
                vec![check],
            ));
        }
    };
    let mut report = SuiteReport::new(
        "build-null-plane",
        settings.echo(),
        null_plane_checks(&id, text, settings.grid, settings.seed),
    );
    report.chart = Some(ChartDefinition {
        label: chart.label().into(),
        coordinates: chart.coords().to_vec(),
        signature: chart.signature(),
        lower: chart.domain().lower.clone(),
        upper: chart.domain().upper.clone(),
        source: text.into(),
    });
    Ok(report)
}
