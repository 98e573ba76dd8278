use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ffcm_core::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::{ExperimentReport, RunStatus, SeriesPoint, Stat, Timings};
use crate::spec::Method;

pub const RUNS_CSV: &str = "runs.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const G2_QUANTILES_CSV: &str = "g2_quantiles.csv";
pub const REPORT_JSON: &str = "report.json";
pub const TIMINGS_JSON: &str = "timings.json";
pub const PLOT_DIR: &str = "plot";

pub const SUMMARY_HEADER: &str = "cell,method,runs,failed,wsse_mean,wsse_std,osse_mean,osse_std,\
gap_mean,gap_std,ngap_mean,ngap_std,rounds_mean,rounds_std";
pub const QUANTILES_HEADER: &str = "method,q25,median,q75,min,max";

pub fn runs_header() -> String {
    format!("cell,repetition,seed,method,status,rounds,converged,{}", MetricsReport::CSV_HEADER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    PlotData,
}

impl std::str::FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "plot" | "plot-data" => Ok(Format::PlotData),
            _ => Err(CliError::Spec(format!("unknown format {s:?} (expected csv, json or plot)"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn stat_cols(out: &mut String, s: &Option<Stat>) {
    match s {
        Some(s) => write!(out, ",{},{}", s.mean, s.std).unwrap(),
        None => out.push_str(",,"),
    }
}

pub fn runs_csv(report: &ExperimentReport) -> String {
    let mut out = runs_header();
    out.push('\n');
    for r in &report.runs {
        let status = if r.status == RunStatus::Ok { "ok" } else { "failed" };
        write!(
            out,
            "{},{},{},{},{},{},{},",
            r.cell,
            r.repetition,
            r.seed,
            r.method.name(),
            status,
            r.rounds,
            r.converged
        )
        .unwrap();
        match &r.metrics {
            Some(m) => out.push_str(&m.to_csv_row()),
            None => out.push_str(",,,,,,"),
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &report.summary {
        write!(out, "{},{},{},{}", s.cell, s.method.name(), s.runs, s.failed).unwrap();
        for st in [&s.wsse, &s.osse, &s.gap, &s.ngap, &s.rounds] {
            stat_cols(&mut out, st);
        }
        out.push('\n');
    }
    out
}

pub fn quantiles_csv(report: &ExperimentReport) -> Option<String> {
    let g2 = report.g2.as_ref()?;
    let mut out = format!("{QUANTILES_HEADER}\n");
    for q in &g2.ngap_quantiles {
        writeln!(out, "{},{},{},{},{},{}", q.method.name(), q.q25, q.median, q.q75, q.min, q.max).unwrap();
    }
    Some(out)
}

/// `(file name, contents)` of every plot series: two whitespace-separated columns.
pub fn plot_series(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for r in &report.runs {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    match &report.g2 {
        Some(g2) => {
            for &m in &methods {
                out.push((format!("ngap_vs_sigma_{}.dat", m.name()), series(&g2.ngap_by_sigma, m)));
                out.push((format!("osse_vs_dim_{}.dat", m.name()), series(&g2.osse_by_dim, m)));
            }
        }
        None => {
            for &m in &methods {
                let mut text = String::new();
                for r in report.runs.iter().filter(|r| r.method == m) {
                    if let Some(gap) = r.metrics.as_ref().and_then(|x| x.gap) {
                        writeln!(text, "{} {}", r.repetition, gap).unwrap();
                    }
                }
                out.push((format!("gap_by_repetition_{}.dat", m.name()), text));
            }
        }
    }
    out
}

fn series(points: &[SeriesPoint], m: Method) -> String {
    let mut text = String::new();
    for p in points.iter().filter(|p| p.method == m) {
        writeln!(text, "{} {}", p.x, p.y).unwrap();
    }
    text
}

pub fn to_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_report(report: &ExperimentReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            written.push(write(dir.join(RUNS_CSV), &runs_csv(report))?);
            written.push(write(dir.join(SUMMARY_CSV), &summary_csv(report))?);
            if let Some(q) = quantiles_csv(report) {
                written.push(write(dir.join(G2_QUANTILES_CSV), &q)?);
            }
        }
        Format::Json => written.push(write(dir.join(REPORT_JSON), &to_json(report))?),
        Format::PlotData => {
            for (name, text) in plot_series(report) {
                written.push(write(dir.join(PLOT_DIR).join(name), &text)?);
            }
        }
    }
    Ok(written)
}

pub fn emit_all(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for f in [Format::Csv, Format::Json, Format::PlotData] {
        written.extend(emit_report(report, f, dir)?);
    }
    Ok(written)
}

pub fn write_timings(timings: &Timings, dir: &Path) -> Result<PathBuf> {
    write(dir.join(TIMINGS_JSON), &serde_json::to_string_pretty(timings).expect("timings serialize"))
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::run_experiment;
    use crate::spec::{Case, ExperimentSpec};

    fn report() -> ExperimentReport {
        let mut spec = ExperimentSpec::new(Case::Case1Equal);
        spec.settings.repetitions = 2;
        run_experiment(&spec).unwrap().0
    }

    #[test]
    fn csv_has_fixed_header_and_one_row_per_run() {
        let r = report();
        let csv = runs_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "cell,repetition,seed,method,status,rounds,converged,wsse,osse,gap,ngap,n_points,dim,k"
        );
        assert_eq!(lines.len(), 1 + r.runs.len());
        assert!(lines.iter().all(|l| l.split(',').count() == 14));
        let summary = summary_csv(&r);
        assert!(summary.lines().all(|l| l.split(',').count() == 14));
    }

    #[test]
    fn json_round_trips() {
        let r = report();
        assert_eq!(serde_json::from_str::<ExperimentReport>(&to_json(&r)).unwrap(), r);
    }

    #[test]
    fn plot_rows_match_series_length() {
        let r = report();
        for (name, text) in plot_series(&r) {
            assert_eq!(text.lines().count(), 2, "{name}");
            assert!(text.lines().all(|l| l.split_whitespace().count() == 2));
        }
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_all(&report(), dir.path()).unwrap();
        assert_eq!(files.len(), 2 + 1 + 3);
        assert_eq!(load_report(&dir.path().join(REPORT_JSON)).unwrap(), report());
    }
}
