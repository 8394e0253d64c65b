//! Evaluation reports: JSON document, flat CSV table and SVG histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Domain, SAMPLER_ID};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, domain_distances, DisparityCell, Embedding, Grouping, QuestionDistance, TTestResult,
    TTestUnit,
};
use crate::pipeline::{load_manifest, load_records, MethodKind, RunManifest, SimulationRecord};

pub const DISPERSION_UNIT: &str =
    "sample standard deviation (n-1) of per-repetition accuracies across run repetitions";

/// One run directory's manifest and records.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<SimulationRecord>,
}

pub fn load_run(dir: impl AsRef<Path>) -> Result<LoadedRun> {
    let dir = dir.as_ref();
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest: load_manifest(dir)?,
        records: load_records(dir)?,
    })
}

/// Fails unless every run was produced from `corpus`.
pub fn check_checksums(runs: &[LoadedRun], corpus: &Corpus) -> Result<()> {
    let expected = corpus.checksum();
    for run in runs {
        if run.manifest.corpus_checksum != expected {
            return Err(Error::ChecksumMismatch(format!(
                "run `{}` was produced from corpus {} but the given corpus is {}",
                run.manifest.run_id, run.manifest.corpus_checksum, expected
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub embedding: Embedding,
    pub embedding_description: String,
    pub dispersion_unit: String,
    pub sampler: String,
    pub corpus_checksum: String,
    /// Caller-supplied configuration echo.
    pub config: serde_json::Value,
    pub runs: Vec<RunManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: MethodKind,
    pub model: String,
    pub domain: Domain,
    pub grouping: Grouping,
    pub mean: f64,
    pub stddev: f64,
    pub n_scored: usize,
    pub n_excluded: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub method: MethodKind,
    pub model: String,
    pub domain: Domain,
    /// Mean over `questions`.
    pub distance: f64,
    pub questions: Vec<QuestionDistance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub header: ReportHeader,
    pub accuracy: Vec<AccuracyRow>,
    pub distances: Vec<DistanceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub domain: Domain,
    pub grouping: Grouping,
    pub unit: TTestUnit,
    #[serde(flatten)]
    pub result: TTestResult,
}

/// Evaluate runs against the corpus. Runs of the same method and model are
/// pooled, each run counting as one repetition.
pub fn evaluate(
    runs: &[LoadedRun],
    corpus: &Corpus,
    embedding: Embedding,
    config: serde_json::Value,
) -> Result<EvaluationReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to evaluate".into()));
    }
    check_checksums(runs, corpus)?;
    let mut groups: BTreeMap<(MethodKind, String), Vec<&LoadedRun>> = BTreeMap::new();
    for run in runs {
        groups
            .entry((run.manifest.method, run.manifest.model.clone()))
            .or_default()
            .push(run);
    }

    let mut accuracy_rows = Vec::new();
    let mut distance_rows = Vec::new();
    for ((method, model), members) in &groups {
        let records: Vec<SimulationRecord> = members
            .iter()
            .flat_map(|r| r.records.iter().cloned())
            .collect();
        for domain in Domain::ALL {
            if corpus.questions_in(domain).next().is_none() {
                continue;
            }
            for grouping in Grouping::ALL {
                match accuracy(&records, corpus, grouping, Some(domain)) {
                    Ok(a) => accuracy_rows.push(AccuracyRow {
                        method: *method,
                        model: model.clone(),
                        domain,
                        grouping,
                        mean: a.mean,
                        stddev: a.stddev,
                        n_scored: a.n_scored,
                        n_excluded: a.n_excluded,
                        repetitions: a.per_repetition.len(),
                    }),
                    Err(Error::NoScoredRecords(m)) => log::warn!("{method}/{model}: {m}"),
                    Err(e) => return Err(e),
                }
            }
            let questions = domain_distances(&records, corpus, domain, embedding)?;
            if !questions.is_empty() {
                let distance =
                    questions.iter().map(|q| q.distance).sum::<f64>() / questions.len() as f64;
                distance_rows.push(DistanceRow {
                    method: *method,
                    model: model.clone(),
                    domain,
                    distance,
                    questions,
                });
            }
        }
    }

    let mut manifests: Vec<RunManifest> = runs.iter().map(|r| r.manifest.clone()).collect();
    manifests.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(EvaluationReport {
        header: ReportHeader {
            tool: format!("surveysim {}", env!("CARGO_PKG_VERSION")),
            embedding,
            embedding_description: embedding.describe().to_string(),
            dispersion_unit: DISPERSION_UNIT.to_string(),
            sampler: SAMPLER_ID.to_string(),
            corpus_checksum: corpus.checksum(),
            config,
            runs: manifests,
        },
        accuracy: accuracy_rows,
        distances: distance_rows,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Long-format table, one row per metric value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("CSV encoding: {e}"));
        w.write_record([
            "section",
            "method",
            "model",
            "domain",
            "grouping",
            "question_id",
            "label",
            "metric",
            "value",
        ])
        .map_err(csv_err)?;
        for a in &self.accuracy {
            for (metric, value) in [
                ("mean", a.mean.to_string()),
                ("stddev", a.stddev.to_string()),
                ("n_scored", a.n_scored.to_string()),
                ("n_excluded", a.n_excluded.to_string()),
                ("repetitions", a.repetitions.to_string()),
            ] {
                w.write_record([
                    "accuracy",
                    a.method.as_str(),
                    &a.model,
                    a.domain.as_str(),
                    a.grouping.as_str(),
                    "",
                    "",
                    metric,
                    &value,
                ])
                .map_err(csv_err)?;
            }
        }
        for d in &self.distances {
            w.write_record([
                "distance",
                d.method.as_str(),
                &d.model,
                d.domain.as_str(),
                "",
                "",
                "",
                "wasserstein_mean",
                &d.distance.to_string(),
            ])
            .map_err(csv_err)?;
            for q in &d.questions {
                w.write_record([
                    "distance",
                    d.method.as_str(),
                    &d.model,
                    d.domain.as_str(),
                    "",
                    &q.question_id,
                    "",
                    "wasserstein",
                    &q.distance.to_string(),
                ])
                .map_err(csv_err)?;
                for (series, dist) in [("predicted_mass", &q.predicted), ("gold_mass", &q.gold)] {
                    for (label, mass) in dist.support.iter().zip(&dist.mass) {
                        w.write_record([
                            "distribution",
                            d.method.as_str(),
                            &d.model,
                            d.domain.as_str(),
                            "",
                            &q.question_id,
                            label,
                            series,
                            &mass.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }
}

pub fn disparity_csv(cells: &[DisparityCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(c)
            .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

pub fn ttest_csv(rows: &[TTestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "domain", "grouping", "unit", "t", "p", "df", "n_a", "n_b", "mean_a", "mean_b",
    ])
    .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
    for r in rows {
        let unit = match r.unit {
            TTestUnit::Question => "question",
            TTestUnit::Respondent => "respondent",
        };
        w.write_record([
            r.domain.as_str(),
            r.grouping.as_str(),
            unit,
            &r.result.t.to_string(),
            &r.result.p.to_string(),
            &r.result.df.to_string(),
            &r.result.n_a.to_string(),
            &r.result.n_b.to_string(),
            &r.result.mean_a.to_string(),
            &r.result.mean_b.to_string(),
        ])
        .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const PLOT_H: f64 = 160.0;

/// One grouped bar chart (predicted vs gold mass per label) per question.
fn render_svg(title: &str, rows: &[&DistanceRow]) -> String {
    let panels: Vec<(&str, &QuestionDistance)> = rows
        .iter()
        .flat_map(|r| r.questions.iter().map(move |q| (r.model.as_str(), q)))
        .collect();
    let cols = panels.len().clamp(1, 3);
    let rows_n = panels.len().div_ceil(cols).max(1);
    let width = PANEL_W * cols as f64;
    let height = 40.0 + PANEL_H * rows_n as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-size="14">{}</text>"#,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="8" width="10" height="10" fill="#4c72b0"/><text x="{}" y="17">predicted</text><rect x="{}" y="8" width="10" height="10" fill="#dd8452"/><text x="{}" y="17">gold</text>"##,
        width - 150.0,
        width - 136.0,
        width - 80.0,
        width - 66.0
    );
    for (i, (model, q)) in panels.iter().enumerate() {
        let x0 = PANEL_W * (i % cols) as f64 + 20.0;
        let y0 = 40.0 + PANEL_H * (i / cols) as f64;
        let base = y0 + 20.0 + PLOT_H;
        let _ = writeln!(
            s,
            r#"<g class="panel" data-question="{}" data-model="{}">"#,
            xml_escape(&q.question_id),
            xml_escape(model)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{}" font-size="11">{} (W = {:.3})</text>"#,
            y0 + 12.0,
            xml_escape(&q.question_id),
            q.distance
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{base}" x2="{}" y2="{base}" stroke="#333"/>"##,
            x0 + PANEL_W - 40.0
        );
        let k = q.predicted.k();
        let slot = (PANEL_W - 40.0) / k as f64;
        let bar = slot * 0.35;
        for (j, label) in q.predicted.support.iter().enumerate() {
            let sx = x0 + slot * j as f64 + slot * 0.15;
            for (series, color, mass, dx) in [
                ("predicted", "#4c72b0", q.predicted.mass[j], 0.0),
                ("gold", "#dd8452", q.gold.mass[j], bar),
            ] {
                let h = mass * PLOT_H;
                let _ = writeln!(
                    s,
                    r#"<rect class="{series}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" data-label="{}" data-mass="{mass:.3}"/>"#,
                    sx + dx,
                    base - h,
                    bar,
                    h,
                    xml_escape(label)
                );
                let _ = writeln!(
                    s,
                    r#"<text class="mass" data-series="{series}" data-label="{}" x="{:.2}" y="{:.2}" font-size="8">{mass:.3}</text>"#,
                    xml_escape(label),
                    sx + dx,
                    base - h - 2.0
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="8">{}</text>"#,
                sx,
                base + 12.0,
                xml_escape(label)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Write one SVG per (domain, method) into `out_dir`; returns the paths.
pub fn write_plots(report: &EvaluationReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if report.distances.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation has no distributions to plot".into(),
        ));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut by_cell: BTreeMap<(Domain, MethodKind), Vec<&DistanceRow>> = BTreeMap::new();
    for row in &report.distances {
        by_cell
            .entry((row.domain, row.method))
            .or_default()
            .push(row);
    }
    let mut paths = Vec::new();
    for ((domain, method), rows) in by_cell {
        let path = out_dir.join(format!("{domain}-{method}.svg"));
        let svg = render_svg(
            &format!("{domain} / {method}: predicted vs gold answer distributions"),
            &rows,
        );
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
