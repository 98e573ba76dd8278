use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ffcm_cli::report::{emit_report, load_report, write_timings};
use ffcm_cli::{
    emit_all, run_experiment, run_g2_suite, Case, ExperimentReport, ExperimentSpec, Format, G2SuiteSpec,
    Method, Settings,
};
use ffcm_core::io::save_dataset;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "ffcm", version, about = "Federated fuzzy c-means experiments")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the client shards and ground truth of a case as text files.
    Gen {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment (central, avg1, avg2 over repetitions).
    Run {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        /// JSON experiment spec; command-line flags override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the G2 grid.
    G2 {
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Shortcut for dims 2..=128.
        #[arg(long, conflicts_with = "dims")]
        reduced: bool,
        #[arg(long)]
        clients: Option<usize>,
        #[command(flatten)]
        settings: SettingsArgs,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit a saved report.json in other formats.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// csv, json or plot; repeatable.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,plot")]
        format: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// case1-equal, case1-unequal, case2, case3, g2 or custom.
    #[arg(long)]
    case: Option<String>,
    /// Case 3 client sizes.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<usize>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of clients for g2.
    #[arg(long)]
    clients: Option<usize>,
    /// Shard files for the custom case.
    #[arg(long, value_delimiter = ',')]
    shards: Vec<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl CaseArgs {
    fn to_case(&self) -> anyhow::Result<Option<Case>> {
        let Some(name) = &self.case else { return Ok(None) };
        Ok(Some(match name.as_str() {
            "case1-equal" => Case::Case1Equal,
            "case1-unequal" => Case::Case1Unequal,
            "case2" => Case::Case2,
            "case3" => {
                let p = self.points.clone().unwrap_or_else(|| vec![1000; 3]);
                if p.len() != 3 {
                    bail!("--points takes three client sizes, got {}", p.len());
                }
                Case::Case3 { points_per_client: [p[0], p[1], p[2]] }
            }
            "g2" => Case::G2 {
                dim: self.dim.unwrap_or(2),
                sigma: self.sigma.unwrap_or(10.0),
                clients: self.clients.unwrap_or(10),
            },
            "custom" => Case::Custom { shards: self.shards.clone(), truth: self.truth.clone() },
            other => bail!("unknown case {other:?}"),
        }))
    }
}

#[derive(Args)]
struct SettingsArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    /// squared-ratio or bezdek.
    #[arg(long)]
    formula: Option<String>,
    /// Methods to run, e.g. `central,avg1,avg2`.
    #[arg(long, value_delimiter = ',')]
    avg: Option<Vec<Method>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    local_epochs: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    round_epsilon: Option<f64>,
    /// bounding-box-uniform or client-sample.
    #[arg(long)]
    init: Option<String>,
    /// kmeans-plus-plus or warm-start.
    #[arg(long)]
    avg2_seeding: Option<String>,
    /// euclidean or squared.
    #[arg(long)]
    sse_norm: Option<String>,
}

fn kebab<T: DeserializeOwned>(flag: &str, s: &str) -> anyhow::Result<T> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .with_context(|| format!("invalid --{flag} {s:?}"))
}

impl SettingsArgs {
    fn apply(&self, s: &mut Settings) -> anyhow::Result<()> {
        if self.k.is_some() {
            s.k = self.k;
        }
        if self.m.is_some() {
            s.m = self.m;
        }
        if let Some(f) = &self.formula {
            s.membership_formula = kebab("formula", f)?;
        }
        if let Some(a) = &self.avg {
            s.methods = a.clone();
        }
        if let Some(r) = self.reps {
            s.repetitions = r;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.local_epochs {
            s.local_epochs = v;
        }
        if let Some(v) = self.epsilon {
            s.epsilon = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.max_rounds {
            s.max_rounds = v;
        }
        if let Some(v) = self.round_epsilon {
            s.round_epsilon = v;
        }
        if let Some(v) = &self.init {
            s.init = kebab("init", v)?;
        }
        if let Some(v) = &self.avg2_seeding {
            s.avg2_seeding = kebab("avg2-seeding", v)?;
        }
        if let Some(v) = &self.sse_norm {
            s.sse_norm = kebab("sse-norm", v)?;
        }
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_summary(report: &ExperimentReport) {
    println!("{:<24} {:<8} {:>10} {:>10} {:>10} {:>10}", "cell", "method", "wsse", "osse", "gap", "ngap");
    let fmt = |s: Option<ffcm_cli::experiment::Stat>| s.map_or("-".to_string(), |s| format!("{:.4}", s.mean));
    for s in &report.summary {
        println!(
            "{:<24} {:<8} {:>10} {:>10} {:>10} {:>10}",
            s.cell,
            s.method.name(),
            fmt(s.wsse),
            fmt(s.osse),
            fmt(s.gap),
            fmt(s.ngap)
        );
    }
    if let Some(g2) = &report.g2 {
        println!("\nngap over cells    q25     median  q75     min     max");
        for q in &g2.ngap_quantiles {
            println!(
                "{:<16} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
                q.method.name(),
                q.q25,
                q.median,
                q.q75,
                q.min,
                q.max
            );
        }
    }
}

/// Writes everything, then reports failed cells through the exit code.
fn finish(report: &ExperimentReport, timings: &ffcm_cli::Timings, out: &Path) -> anyhow::Result<ExitCode> {
    emit_all(report, out)?;
    write_timings(timings, out)?;
    print_summary(report);
    let failed: Vec<_> = report.failed_runs().collect();
    for r in &failed {
        eprintln!(
            "failed: cell={} repetition={} method={}: {}",
            r.cell,
            r.repetition,
            r.method.name(),
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn real_main(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Gen { case, seed, out } => {
            let Some(case) = case.to_case()? else { bail!("--case is required") };
            let p = case.build(seed, seed)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for c in &p.clients {
                save_dataset(&c.data, out.join(format!("client_{}.txt", c.client_id)))?;
            }
            if let Some(t) = &p.truth {
                save_dataset(&ffcm_core::Dataset::new(t.view().to_owned())?, out.join("truth.txt"))?;
            }
            println!("wrote {} shards to {}", p.clients.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { case, settings, spec, out } => {
            let mut exp = match (&spec, case.to_case()?) {
                (Some(path), case) => {
                    let mut exp: ExperimentSpec = read_json(path)?;
                    if let Some(c) = case {
                        exp.case = c;
                    }
                    exp
                }
                (None, Some(c)) => ExperimentSpec::new(c),
                (None, None) => bail!("give --case or --spec"),
            };
            settings.apply(&mut exp.settings)?;
            let (report, timings) = run_experiment(&exp)?;
            finish(&report, &timings, &out)
        }
        Command::G2 { dims, sigmas, reduced, clients, settings, spec, out } => {
            let mut suite = match &spec {
                Some(path) => read_json(path)?,
                None => G2SuiteSpec::full(),
            };
            if reduced {
                suite.dims.retain(|&d| d <= 128);
            }
            if let Some(d) = dims {
                suite.dims = d;
            }
            if let Some(s) = sigmas {
                suite.sigmas = s;
            }
            if let Some(c) = clients {
                suite.clients = c;
            }
            settings.apply(&mut suite.settings)?;
            let (report, timings) = run_g2_suite(&suite)?;
            finish(&report, &timings, &out)
        }
        Command::Report { input, format, out } => {
            let report = load_report(&input)?;
            for f in &format {
                emit_report(&report, f.parse::<Format>()?, &out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
