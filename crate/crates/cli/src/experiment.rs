use std::time::{Duration, Instant};

use ffcm_core::rng::seeded_rng;
use ffcm_core::{fcm_fit, fcm_membership_update, run_federated, AvgMethod, Centers, MetricsReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spec::{Case, ExperimentSpec, G2SuiteSpec, Method, Prepared, Settings};
use crate::stats::{mean, quantile, std_dev};

/// Stream used for the federated initial centers; avg1 and avg2 share it.
const INIT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One method on one repetition of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub cell: String,
    pub repetition: usize,
    pub seed: u64,
    pub method: Method,
    pub status: RunStatus,
    /// FCM iterations for `central`, communication rounds otherwise.
    pub rounds: usize,
    pub converged: bool,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| Stat { mean: mean(xs), std: std_dev(xs) })
    }
}

/// Mean and sample standard deviation over the successful runs of a (cell, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cell: String,
    pub method: Method,
    pub runs: usize,
    pub failed: usize,
    pub wsse: Option<Stat>,
    pub osse: Option<Stat>,
    pub gap: Option<Stat>,
    pub ngap: Option<Stat>,
    pub rounds: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub method: Method,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub method: Method,
    pub x: f64,
    pub y: f64,
}

/// Grid-level views of a G2 run. Gap statistics use ngap so dimensions compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Summary {
    /// Over the per-cell mean ngap.
    pub ngap_quantiles: Vec<Quantiles>,
    /// x = sigma, y = mean ngap over all dims.
    pub ngap_by_sigma: Vec<SeriesPoint>,
    /// x = dim, y = mean OSSE over all sigmas.
    pub osse_by_dim: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRow>,
    pub summary: Vec<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<G2Summary>,
}

impl ExperimentReport {
    pub fn failed_runs(&self) -> impl Iterator<Item = &RunRow> {
        self.runs.iter().filter(|r| r.status == RunStatus::Failed)
    }

    pub fn summary_for(&self, cell: &str, method: Method) -> Option<&Summary> {
        self.summary.iter().find(|s| s.cell == cell && s.method == method)
    }

    /// Successful rows of one (cell, method), in repetition order.
    pub fn rows_for<'a>(&'a self, cell: &'a str, method: Method) -> impl Iterator<Item = &'a RunRow> + 'a {
        self.runs.iter().filter(move |r| r.cell == cell && r.method == method && r.status == RunStatus::Ok)
    }
}

/// Wall-clock data, kept out of the report so report bytes stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    /// (cell, repetition, milliseconds) in report order.
    pub per_repetition: Vec<(String, usize, f64)>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<(ExperimentReport, Timings)> {
    spec.validate()?;
    run_cells(std::slice::from_ref(&spec.case), &spec.settings, false)
}

pub fn run_g2_suite(suite: &G2SuiteSpec) -> Result<(ExperimentReport, Timings)> {
    suite.validate()?;
    run_cells(&suite.cells(), &suite.settings, true)
}

fn run_cells(cells: &[Case], settings: &Settings, g2: bool) -> Result<(ExperimentReport, Timings)> {
    let start = Instant::now();
    let jobs: Vec<(&Case, usize)> =
        cells.iter().flat_map(|c| (0..settings.repetitions).map(move |r| (c, r))).collect();
    // Indexed collect keeps (cell, repetition) order whatever the completion order.
    let done: Vec<(Vec<RunRow>, Duration)> =
        jobs.par_iter().map(|&(case, rep)| run_repetition(case, settings, rep)).collect();
    let mut runs = Vec::new();
    let mut per_repetition = Vec::new();
    for ((case, rep), (rows, took)) in jobs.iter().zip(done) {
        per_repetition.push((case.label(), *rep, took.as_secs_f64() * 1e3));
        runs.extend(rows);
    }
    let methods = dedup(&settings.methods);
    let summary: Vec<Summary> =
        cells.iter().flat_map(|c| methods.iter().map(|&m| summarize(&runs, &c.label(), m))).collect();
    let g2 = g2.then(|| g2_summary(cells, &methods, &summary));
    let report = ExperimentReport { runs, summary, g2 };
    Ok((report, Timings { total_ms: start.elapsed().as_secs_f64() * 1e3, per_repetition }))
}

fn dedup(methods: &[Method]) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::new();
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn run_repetition(case: &Case, settings: &Settings, rep: usize) -> (Vec<RunRow>, Duration) {
    let t0 = Instant::now();
    let seed = settings.seed.wrapping_add(rep as u64);
    let spec = ExperimentSpec { case: case.clone(), settings: settings.clone() };
    let prepared = spec.k().and_then(|k| Ok((k, case.build(settings.seed, seed)?)));
    let rows = dedup(&settings.methods)
        .into_iter()
        .map(|method| {
            let row = RunRow {
                cell: case.label(),
                repetition: rep,
                seed,
                method,
                status: RunStatus::Ok,
                rounds: 0,
                converged: false,
                metrics: None,
                error: None,
            };
            let outcome = match &prepared {
                Ok((k, p)) => run_method(p, *k, spec.m(), settings, seed, method),
                Err(e) => Err(e.to_string()),
            };
            match outcome {
                Ok((metrics, rounds, converged)) => {
                    RunRow { rounds, converged, metrics: Some(metrics), ..row }
                }
                Err(msg) => RunRow { status: RunStatus::Failed, error: Some(msg), ..row },
            }
        })
        .collect();
    (rows, t0.elapsed())
}

fn run_method(
    p: &Prepared,
    k: usize,
    m: f64,
    settings: &Settings,
    seed: u64,
    method: Method,
) -> std::result::Result<(MetricsReport, usize, bool), String> {
    let (centers, rounds, converged) = match method {
        Method::Central => {
            let fit = fcm_fit(&p.gathered, k, &settings.fcm_config(m, seed)).map_err(|e| e.to_string())?;
            (fit.centers, fit.iterations, fit.converged)
        }
        Method::Avg1 | Method::Avg2 => {
            let avg = if method == Method::Avg1 { AvgMethod::Avg1 } else { AvgMethod::Avg2 };
            let cfg = settings.fed_config(k, m, seed, avg);
            let res = run_federated(&p.clients, &cfg, &mut seeded_rng(seed, INIT_STREAM))
                .map_err(|e| e.to_string())?;
            (res.global_centers, res.rounds_used, res.converged)
        }
    };
    let metrics = evaluate(p, &centers, m, settings).map_err(|e| e.to_string())?;
    Ok((metrics, rounds, converged))
}

/// Metrics of final centers on the gathered data, via their FCM memberships.
fn evaluate(
    p: &Prepared,
    centers: &Centers,
    m: f64,
    settings: &Settings,
) -> ffcm_core::Result<MetricsReport> {
    let u = fcm_membership_update(&p.gathered, centers, m, settings.membership_formula)?;
    MetricsReport::evaluate(&p.gathered, &u, centers, p.truth.as_ref(), settings.sse_norm)
}

fn summarize(runs: &[RunRow], cell: &str, method: Method) -> Summary {
    let rows: Vec<&RunRow> = runs.iter().filter(|r| r.cell == cell && r.method == method).collect();
    let ok: Vec<&MetricsReport> = rows.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let col = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let xs: Vec<f64> = ok.iter().filter_map(|m| f(m)).collect();
        // Partial columns would silently mix populations.
        if xs.len() == ok.len() {
            Stat::of(&xs)
        } else {
            None
        }
    };
    let rounds: Vec<f64> =
        rows.iter().filter(|r| r.status == RunStatus::Ok).map(|r| r.rounds as f64).collect();
    Summary {
        cell: cell.to_string(),
        method,
        runs: rows.len(),
        failed: rows.len() - ok.len(),
        wsse: col(&|m| Some(m.wsse)),
        osse: col(&|m| Some(m.osse)),
        gap: col(&|m| m.gap),
        ngap: col(&|m| m.ngap),
        rounds: Stat::of(&rounds),
    }
}

fn g2_summary(cells: &[Case], methods: &[Method], summary: &[Summary]) -> G2Summary {
    let key = |c: &Case| match c {
        Case::G2 { dim, sigma, .. } => (*dim, *sigma),
        _ => unreachable!("g2 suite only builds g2 cells"),
    };
    let mut sigmas: Vec<f64> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    for c in cells {
        let (d, s) = key(c);
        if !sigmas.contains(&s) {
            sigmas.push(s);
        }
        if !dims.contains(&d) {
            dims.push(d);
        }
    }
    let cell_stat = |c: &Case, m: Method, f: fn(&Summary) -> Option<Stat>| {
        summary.iter().find(|s| s.cell == c.label() && s.method == m).and_then(f).map(|s| s.mean)
    };
    let mut out =
        G2Summary { ngap_quantiles: Vec::new(), ngap_by_sigma: Vec::new(), osse_by_dim: Vec::new() };
    for &m in methods {
        let mut per_cell: Vec<f64> = cells.iter().filter_map(|c| cell_stat(c, m, |s| s.ngap)).collect();
        if !per_cell.is_empty() {
            per_cell.sort_by(f64::total_cmp);
            out.ngap_quantiles.push(Quantiles {
                method: m,
                q25: quantile(&per_cell, 0.25),
                median: quantile(&per_cell, 0.5),
                q75: quantile(&per_cell, 0.75),
                min: per_cell[0],
                max: per_cell[per_cell.len() - 1],
            });
        }
        for &s in &sigmas {
            let ys: Vec<f64> =
                cells.iter().filter(|c| key(c).1 == s).filter_map(|c| cell_stat(c, m, |s| s.ngap)).collect();
            if !ys.is_empty() {
                out.ngap_by_sigma.push(SeriesPoint { method: m, x: s, y: mean(&ys) });
            }
        }
        for &d in &dims {
            let ys: Vec<f64> =
                cells.iter().filter(|c| key(c).0 == d).filter_map(|c| cell_stat(c, m, |s| s.osse)).collect();
            if !ys.is_empty() {
                out.osse_by_dim.push(SeriesPoint { method: m, x: d as f64, y: mean(&ys) });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(case: Case, reps: usize) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(case);
        spec.settings.repetitions = reps;
        spec
    }

    #[test]
    fn row_count_is_repetitions_times_methods() {
        let mut spec = small(Case::Case1Equal, 2);
        spec.settings.methods = vec![Method::Avg2, Method::Central, Method::Avg2];
        let (report, timings) = run_experiment(&spec).unwrap();
        assert_eq!(report.runs.len(), 4);
        assert_eq!(report.summary.len(), 2);
        assert_eq!(timings.per_repetition.len(), 2);
        assert_eq!(
            report.runs.iter().map(|r| r.method).collect::<Vec<_>>()[..2],
            [Method::Avg2, Method::Central]
        );
        assert_eq!(report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [0, 0, 1, 1]);
    }

    #[test]
    fn summary_means_match_rows() {
        let mut spec = small(Case::Case1Unequal, 3);
        spec.settings.seed = 11;
        let (report, _) = run_experiment(&spec).unwrap();
        for s in &report.summary {
            let gaps: Vec<f64> = report
                .rows_for(&s.cell, s.method)
                .map(|r| r.metrics.as_ref().unwrap().gap.unwrap())
                .collect();
            assert_eq!(gaps.len(), 3);
            let direct = gaps.iter().sum::<f64>() / 3.0;
            assert!((s.gap.unwrap().mean - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn failures_are_marked_not_fatal() {
        let mut spec = small(Case::Custom { shards: vec!["/nonexistent/shard.txt".into()], truth: None }, 1);
        spec.settings.k = Some(2);
        let (report, _) = run_experiment(&spec).unwrap();
        assert_eq!(report.failed_runs().count(), 3);
        assert!(report.runs.iter().all(|r| r.error.is_some() && r.metrics.is_none()));
        assert_eq!(report.summary[0].failed, 1);
        assert!(report.summary[0].wsse.is_none());
    }

    #[test]
    fn g2_suite_summaries_have_grid_shape() {
        let mut suite = G2SuiteSpec { dims: vec![2, 4], sigmas: vec![10.0, 60.0], ..G2SuiteSpec::full() };
        suite.settings.repetitions = 2;
        let (report, _) = run_g2_suite(&suite).unwrap();
        assert_eq!(report.runs.len(), 2 * 2 * 2 * 3);
        let g2 = report.g2.unwrap();
        assert_eq!(g2.ngap_quantiles.len(), 3);
        assert_eq!(g2.ngap_by_sigma.len(), 6);
        assert_eq!(g2.osse_by_dim.len(), 6);
        assert!(g2
            .ngap_quantiles
            .iter()
            .all(|q| q.min <= q.q25 && q.q25 <= q.median && q.median <= q.q75 && q.q75 <= q.max));
    }
}
