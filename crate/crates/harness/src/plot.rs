use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compare::RunRef;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Source-validation and target-test F1 per iteration.
    F1Curve,
    LambdaTrace,
    /// Domain accuracy with λ on a secondary log axis.
    DomainAccuracy,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::F1Curve => "f1_curve",
            PlotKind::LambdaTrace => "lambda_trace",
            PlotKind::DomainAccuracy => "domain_accuracy",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f1_curve" => Ok(PlotKind::F1Curve),
            "lambda_trace" => Ok(PlotKind::LambdaTrace),
            "domain_accuracy" => Ok(PlotKind::DomainAccuracy),
            _ => Err(format!("unknown plot kind {s:?} (f1_curve, lambda_trace, domain_accuracy)")),
        }
    }
}

type Series = Vec<(f64, f64)>;

fn column(run: &RunRef, name: &'static str, get: impl Fn(&hartl_core::trainers::RunRow) -> Option<f64>) -> Result<Series, HarnessError> {
    let rows = &run.record.rows;
    let points: Option<Series> = rows.iter().map(|r| get(r).map(|v| (r.iteration as f64, v))).collect();
    match points {
        Some(p) if !p.is_empty() => Ok(p),
        _ => Err(HarnessError::MissingSeries { run: run.id.clone(), column: name }),
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

/// One SVG per run, `<out_dir>/<run id>-<kind>.svg`. All requested series
/// are checked before anything is drawn.
pub fn plot(runs: &[RunRef], kind: PlotKind, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::Usage("no runs to plot".into()));
    }
    let mut jobs = Vec::new();
    for run in runs {
        let (primary, secondary) = match kind {
            PlotKind::F1Curve => {
                let mut series = Vec::new();
                if run.record.rows.iter().all(|r| r.source_val_f1.is_some()) {
                    series.push(("source-val F1", column(run, "source_val_f1", |r| r.source_val_f1)?));
                }
                series.push(("target-test F1", column(run, "target_test_f1", |r| Some(r.target_test_f1))?));
                (series, None)
            }
            PlotKind::LambdaTrace => (vec![("lambda", column(run, "lambda", |r| r.lambda)?)], None),
            PlotKind::DomainAccuracy => (
                vec![("domain accuracy", column(run, "domain_accuracy", |r| r.domain_accuracy)?)],
                Some(("lambda", column(run, "lambda", |r| r.lambda)?)),
            ),
        };
        jobs.push((run, primary, secondary));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (run, primary, secondary) in jobs {
        let path = out_dir.join(format!("{}-{}.svg", run.id, kind.name()));
        draw(&path, &run.id, kind, &primary, secondary.as_ref())?;
        written.push(path);
    }
    Ok(written)
}

fn draw(
    path: &Path,
    title: &str,
    kind: PlotKind,
    primary: &[(&str, Series)],
    secondary: Option<&(&str, Series)>,
) -> Result<(), HarnessError> {
    let x_max = primary.iter().flat_map(|(_, s)| s.iter().map(|p| p.0)).fold(1.0, f64::max);
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let palette = [BLUE, RED, GREEN];
    let mut builder = ChartBuilder::on(&root);
    builder.caption(title, ("sans-serif", 18)).margin(12).x_label_area_size(40).y_label_area_size(55);
    if kind == PlotKind::LambdaTrace {
        let (lo, hi) = log_range(&primary[0].1);
        let mut chart = builder.build_cartesian_2d(0f64..x_max, (lo..hi).log_scale()).map_err(plot_err)?;
        chart.configure_mesh().x_desc("iteration").y_desc("lambda").draw().map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(primary[0].1.iter().copied(), &BLUE))
            .map_err(plot_err)?
            .label(primary[0].0)
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
        chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(plot_err)?;
    } else {
        builder.right_y_label_area_size(if secondary.is_some() { 55 } else { 0 });
        let y_desc = if kind == PlotKind::F1Curve { "weighted F1" } else { "domain accuracy" };
        let (lo, hi) = secondary.map(|(_, s)| log_range(s)).unwrap_or((0.1, 10.0));
        let mut chart = builder
            .build_cartesian_2d(0f64..x_max, 0f64..1f64)
            .map_err(plot_err)?
            .set_secondary_coord(0f64..x_max, (lo..hi).log_scale());
        chart.configure_mesh().x_desc("iteration").y_desc(y_desc).draw().map_err(plot_err)?;
        for ((name, series), color) in primary.iter().zip(palette) {
            chart
                .draw_series(LineSeries::new(series.iter().copied(), &color))
                .map_err(plot_err)?
                .label(*name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        if let Some((name, series)) = secondary {
            chart.configure_secondary_axes().y_desc("lambda").draw().map_err(plot_err)?;
            chart
                .draw_secondary_series(LineSeries::new(series.iter().copied(), &MAGENTA))
                .map_err(plot_err)?
                .label(*name)
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], MAGENTA));
        }
        chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

fn log_range(s: &Series) -> (f64, f64) {
    let lo = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).max(1e-6);
    let hi = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).max(lo * 10.0);
    (lo / 2.0, hi * 2.0)
}
