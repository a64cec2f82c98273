//! Rendering of pipeline and Monte Carlo results to CSV and JSON files.
//! Every file carries the full configuration; rendering is deterministic,
//! so equal configs and seeds give byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Source};
use crate::error::{io_err, Result};
use crate::montecarlo::RegretCurve;
use crate::pipeline::ReportBundle;

pub const SYNTHETIC_LABEL: &str = "implementer-chosen synthetic design";

/// File name to contents.
pub type Files = BTreeMap<String, String>;

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn preamble(config: &ExperimentConfig) -> String {
    let mut s = format!("# config: {}\n", config.echo());
    match &config.source {
        Source::Data { path } => writeln!(s, "# data: {}", path.display()).unwrap(),
        _ => writeln!(s, "# data: {SYNTHETIC_LABEL}").unwrap(),
    }
    s
}

fn table(config: &ExperimentConfig, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = preamble(config);
    s.push_str(&header.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn json_file<T: Serialize>(config: &ExperimentConfig, key: &str, value: &T) -> Result<String> {
    let data = if matches!(config.source, Source::Data { .. }) { "observed" } else { SYNTHETIC_LABEL };
    let v = json!({ "config": config, "data": data, key: value });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn render_bundle(b: &ReportBundle) -> Result<Files> {
    let cfg = &b.config;
    let mut files = Files::new();
    let header = [
        "pair",
        "policy",
        "share_eligible",
        "welfare_gain",
        "avg_takeup_change",
        "prte",
        "budget",
        "oracle_gain",
        "oracle_gain_se",
        "oracle_budget",
        "oracle_budget_se",
    ];
    let rows = b.rows.iter().map(|r| {
        vec![
            r.pair.clone(),
            r.policy.clone(),
            num(r.report.share_eligible),
            num(r.report.welfare_gain),
            num(r.report.avg_takeup_change),
            num(r.report.prte),
            num(r.budget),
            opt(r.oracle_gain.map(|e| e.value)),
            opt(r.oracle_gain.map(|e| e.se)),
            opt(r.oracle_budget.map(|e| e.value)),
            opt(r.oracle_budget.map(|e| e.se)),
        ]
    });
    files.insert("welfare.csv".into(), table(cfg, &header, rows));

    let rows = b.contours.iter().flat_map(|c| {
        c.points.iter().map(|p| {
            vec![c.pair.clone(), num(p.z1), opt(p.z2), num(p.takeup_change), num(p.gain), num(p.prte)]
        })
    });
    let mut contours = table(cfg, &["pair", "z1", "z2", "takeup_change", "gain", "prte"], rows);
    contours.insert_str(0, &format!("# x: {:?}\n", b.x_bar));
    files.insert("contours.csv".into(), contours);

    let rows = b.mte_grid.iter().map(|m| vec![m.x_cell.to_string(), num(m.u), num(m.value), opt(m.oracle)]);
    let mut grid = table(cfg, &["x_cell", "u", "value", "oracle"], rows);
    for (i, x) in b.x_cells.iter().enumerate().rev() {
        grid.insert_str(0, &format!("# x_cell {i}: {x:?}\n"));
    }
    files.insert("mte_grid.csv".into(), grid);

    for p in &b.policies {
        files.insert(format!("policy_{}_{}.json", p.pair, p.learner), json_file(cfg, "policy", &p.spec)?);
    }
    let fit = json!({
        "n": b.n,
        "propensity": b.propensity,
        "mte": b.mte,
        "warnings": b.warnings,
    });
    files.insert("fit.json".into(), json_file(cfg, "fit", &fit)?);
    files.insert("welfare.json".into(), json_file(cfg, "rows", &b.rows)?);
    Ok(files)
}

pub fn render_regret(config: &ExperimentConfig, curve: &RegretCurve) -> Result<Files> {
    let mut files = Files::new();
    let header = [
        "learner",
        "n",
        "replications",
        "failures",
        "mean_regret",
        "regret_se",
        "violation_freq",
        "mean_violation",
        "near_best_share",
        "p_mse",
        "gain_mse",
    ];
    let rows = curve.points.iter().map(|p| {
        vec![
            p.learner.clone(),
            p.n.to_string(),
            p.replications.to_string(),
            p.failures.to_string(),
            num(p.mean_regret),
            num(p.regret_se),
            num(p.violation_freq),
            num(p.mean_violation),
            num(p.near_best_share),
            opt(p.p_mse),
            opt(p.gain_mse),
        ]
    });
    files.insert("regret.csv".into(), table(config, &header, rows));
    files.insert("regret.json".into(), json_file(config, "regret", curve)?);
    Ok(files)
}

/// Writes every file into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &Files) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(())
}
