use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use encourage::config::Source;
use encourage::io::{read_sample, write_sample};
use encourage::output::{render_bundle, render_regret, write_files, Files, SYNTHETIC_LABEL};
use encourage::pipeline::{fit_propensity, load_sample};
use encourage::{run_montecarlo, run_pipeline, ExperimentConfig};
use encourage_core::model::{oracle_budget, oracle_contrast, WelfareMethod};
use encourage_core::welfare::{build_gains, report, CostKind};
use encourage_core::{CostSpec, PolicySpec};
use serde_json::json;

/// Learn and evaluate encouragement rules from observational data.
#[derive(Parser)]
#[command(name = "encourage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Read the sample from this CSV instead of the configured source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from the configured design and write it as CSV.
    Simulate(Common),
    /// Fit the propensity and MTE; write the fit, MTE grid and contours.
    Fit(Common),
    /// Fit, learn rules for every pair and write welfare tables and policies.
    Learn(Common),
    /// Report welfare and budget of a stored policy.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Policy JSON written by `learn`.
        #[arg(long)]
        policy: PathBuf,
    },
    /// Regret curves over the configured sample sizes.
    Montecarlo(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring threads")?;
    }
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(path) = &common.data {
        cfg.source = Source::Data { path: path.clone() };
        // Monte Carlo settings only make sense for a simulation design.
        cfg.montecarlo = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn done(out: &Path, files: &Files) -> Result<()> {
    write_files(out, files)?;
    for name in files.keys() {
        println!("{}", out.join(name).display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load(&common)?;
            if matches!(cfg.source, Source::Data { .. }) {
                bail!("simulate needs a preset or dgp source");
            }
            let sample = load_sample(&cfg)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("sample.csv");
            write_sample(&path, &sample)?;
            println!("{}", path.display());
        }
        Command::Fit(common) => {
            let cfg = load(&common)?;
            let bundle = run_pipeline(&cfg, &load_sample(&cfg)?)?;
            let files: Files = render_bundle(&bundle)?
                .into_iter()
                .filter(|(k, _)| matches!(k.as_str(), "fit.json" | "mte_grid.csv" | "contours.csv"))
                .collect();
            done(&common.out, &files)?;
        }
        Command::Learn(common) => {
            let cfg = load(&common)?;
            let bundle = run_pipeline(&cfg, &load_sample(&cfg)?)?;
            for w in &bundle.warnings {
                eprintln!("warning: {w}");
            }
            done(&common.out, &render_bundle(&bundle)?)?;
        }
        Command::Evaluate { common, policy } => {
            let cfg = load(&common)?;
            let text = std::fs::read_to_string(&policy).with_context(|| policy.display().to_string())?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let spec: PolicySpec = serde_json::from_value(value.get("policy").cloned().unwrap_or(value))?;
            let sample = match &cfg.source {
                Source::Data { path } => read_sample(path)?,
                _ => load_sample(&cfg)?,
            };
            let p = fit_propensity(&cfg.propensity, &sample)?;
            let mte = cfg.mte.fit(&sample, &p)?;
            let cost = cfg.cost.clone().unwrap_or(CostSpec { kind: CostKind::Constant { c: 0.0 }, kappa: f64::INFINITY });
            let gains = build_gains(&sample, &p, &mte, &spec.pair, &cost, &spec.features)?;
            let labels: Vec<bool> = (0..sample.n()).map(|i| spec.assign(sample.x_row(i), sample.z_row(i))).collect();
            let mut out = json!({
                "config": cfg,
                "policy": spec,
                "empirical": report(&gains, &labels),
                "empirical_budget": gains.budget(&labels),
            });
            if let Some(dgp) = cfg.source.dgp()? {
                out["data"] = json!(SYNTHETIC_LABEL);
                out["oracle_gain"] = json!(oracle_contrast(&dgp, &spec, cfg.evaluation.draws, cfg.seed)?);
                if let Some(c) = &cfg.cost {
                    let b = oracle_budget(&dgp, &spec, c, WelfareMethod::Formula, cfg.evaluation.draws, cfg.seed)?;
                    out["oracle_budget"] = json!(b);
                }
            }
            let mut files = Files::new();
            files.insert("evaluation.json".into(), serde_json::to_string_pretty(&out)? + "\n");
            done(&common.out, &files)?;
        }
        Command::Montecarlo(common) => {
            let cfg = load(&common)?;
            let curve = run_montecarlo(&cfg)?;
            done(&common.out, &render_regret(&cfg, &curve)?)?;
        }
    }
    Ok(())
}
