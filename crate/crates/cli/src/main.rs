use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pbreg_core::config::ExperimentConfig;
use pbreg_core::report::SuiteReport;
use pbreg_core::suites::{run_criterion, suite_criteria};
use pbreg_core::report::CriterionResult;

#[derive(Parser, Debug)]
#[command(name = "pbreg", version, about = "Runs the pbreg experiment suites and writes CSV/JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Sectioned key = value config, or JSON when the file ends in .json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Spatial step, as a decimal or as 1/m.
    #[arg(long, global = true, value_parser = parse_step)]
    resolution: Option<f64>,
    /// Fewer trials and samples.
    #[arg(long, global = true)]
    quick: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Closed-form constants and the seed stability of the empirical ones.
    VerifyConstants,
    /// Ball volumes, Vitali covers, intersection cylinders and slabs.
    Cover,
    /// Contact sets, transport map and the discrete ABP inequality.
    Contact,
    /// Barrier supersolution check and derivative accuracy.
    Barrier,
    /// Solver exactness, convergence and comparison.
    Solve,
    /// Oscillation and measure decay.
    Decay,
    /// Improvement of quadratic approximations.
    Iqa,
    /// Every suite.
    All,
}

impl Command {
    fn suite(self) -> &'static str {
        match self {
            Command::VerifyConstants => "constants",
            Command::Cover => "geometry",
            Command::Contact => "contact",
            Command::Barrier => "barrier",
            Command::Solve => "solver",
            Command::Decay => "decay",
            Command::Iqa => "iqa",
            Command::All => "all",
        }
    }
}

fn parse_step(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v > 0.0 && v <= 0.5 && (1.0 / v).fract() == 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} is not a step 1/m with m ≥ 2"))
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(h) = cli.resolution {
        cfg.grid.h = Some(h);
        cfg.iqa.h = h;
    }
    cfg.quick |= cli.quick;
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.suite = Some(cli.command.suite().to_string());
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_report(dir: &Path, rep: &SuiteReport) -> Result<(), Box<dyn std::error::Error>> {
    for t in &rep.tables {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", t.name)))?;
        w.write_record(&t.columns)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_summary(dir: &Path, cfg: &ExperimentConfig, criteria: &[CriterionResult], extra: &serde_json::Map<String, serde_json::Value>) -> std::io::Result<()> {
    let summary = serde_json::json!({
        "suite": cfg.suite,
        "passed": criteria.iter().all(|c| c.passed),
        "config": cfg,
        "criteria": criteria,
        "extra": extra,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
}

fn run(cli: &Cli) -> Result<bool, String> {
    let cfg = build_config(cli)?;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().map_err(|e| e.to_string())?;
    }
    let suite = cfg.suite.clone().unwrap_or_default();
    let ids = suite_criteria(&suite).ok_or_else(|| format!("unknown suite {suite}"))?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("reports")).join(&suite);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut criteria = Vec::new();
    let mut extra = serde_json::Map::new();
    for &id in ids {
        let started = std::time::Instant::now();
        let result = match run_criterion(id, &cfg) {
            Ok(rep) => {
                write_report(&dir, &rep).map_err(|e| format!("writing reports: {e}"))?;
                extra.extend(rep.extra);
                rep.criteria
            }
            Err(e) => vec![CriterionResult {
                id,
                name: format!("criterion {id}"),
                passed: false,
                detail: format!("error: {e}"),
                seconds: started.elapsed().as_secs_f64(),
                limit_seconds: f64::INFINITY,
            }],
        };
        for c in &result {
            println!("{}", c.line());
        }
        criteria.extend(result);
        write_summary(&dir, &cfg, &criteria, &extra).map_err(|e| format!("writing summary: {e}"))?;
    }
    let passed = criteria.iter().all(|c| c.passed);
    println!("{suite}: {} (reports in {})", if passed { "PASS" } else { "FAIL" }, dir.display());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pbreg: {e}");
            ExitCode::from(2)
        }
    }
}
