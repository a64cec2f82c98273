//! Fit the propensity and MTE, learn rules for every manipulation pair and
//! collect report rows, contour grids and the MTE grid.

use encourage_core::model::{oracle_budget, oracle_contrast, WelfareMethod};
use encourage_core::mte::MteModel;
use encourage_core::policy::{solve_bewm, solve_fewm};
use encourage_core::propensity::{cv_bandwidth, fit_local_poly, fit_logit, fit_series, LogitOptions};
use encourage_core::stats::quantile;
use encourage_core::welfare::{build_gains, report, CostKind};
use encourage_core::{
    CostSpec, Estimate, FeatureSpec, MarginalEffect, PolicySpec, Propensity, PropensityModel, Sample,
    StructuralDgp, Var, WelfareReport,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, PropensityConfig, Source};
use crate::error::Result;
use crate::io::read_sample;

const DEFAULT_N: usize = 4000;
const X_CELL_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// One row of the welfare table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRow {
    pub pair: String,
    /// `all` (everyone gets `α1`), `fewm` or `bewm`.
    pub policy: String,
    #[serde(flatten)]
    pub report: WelfareReport,
    pub budget: f64,
    /// True welfare contrast, when the data are synthetic.
    pub oracle_gain: Option<Estimate>,
    pub oracle_budget: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnedPolicy {
    pub pair: String,
    pub learner: String,
    pub spec: PolicySpec,
}

/// Take-up change and conditional PRTE at the covariate medians for one
/// instrument value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub z1: f64,
    pub z2: Option<f64>,
    pub takeup_change: f64,
    pub gain: f64,
    pub prte: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub pair: String,
    pub points: Vec<ContourPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MtePoint {
    pub x_cell: usize,
    pub u: f64,
    pub value: f64,
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub synthetic: bool,
    pub n: usize,
    pub propensity: PropensityModel,
    pub mte: MteModel,
    pub warnings: Vec<String>,
    pub rows: Vec<PolicyRow>,
    pub policies: Vec<LearnedPolicy>,
    /// Covariate values at which contours are drawn.
    pub x_bar: Vec<f64>,
    pub contours: Vec<Contour>,
    /// Covariate vectors of the MTE grid cells.
    pub x_cells: Vec<Vec<f64>>,
    pub mte_grid: Vec<MtePoint>,
}

/// The configured data: simulated from the design or read from disk.
pub fn load_sample(config: &ExperimentConfig) -> Result<Sample> {
    match &config.source {
        Source::Data { path } => read_sample(path),
        src => {
            let dgp = src.dgp()?.expect("synthetic sources carry a design");
            let n = src.sample_size().unwrap_or(DEFAULT_N);
            Ok(dgp.sample(n, config.seed)?.observed())
        }
    }
}

/// Intercept plus every non-constant column.
pub fn default_logit_features(sample: &Sample) -> FeatureSpec {
    let varies = |c: Vec<f64>| c.iter().any(|&v| v != c[0]);
    let mut vars: Vec<Var> = (0..sample.dx()).filter(|&j| varies(sample.x().column(j))).map(Var::X).collect();
    vars.extend((0..sample.dz()).filter(|&k| varies(sample.z().column(k))).map(Var::Z));
    FeatureSpec::linear(&vars)
}

pub fn fit_propensity(config: &PropensityConfig, sample: &Sample) -> Result<PropensityModel> {
    Ok(match config {
        PropensityConfig::Logit { features, trim_eps } => {
            let features = if features.is_empty() { default_logit_features(sample) } else { features.clone() };
            fit_logit(sample, &features, &LogitOptions { trim_eps: *trim_eps, ..LogitOptions::default() })?
        }
        PropensityConfig::LocalPoly { options, cv_grid } => {
            let mut options = options.clone();
            if let Some(grid) = cv_grid {
                options.bandwidth = cv_bandwidth(sample, &options, grid)?.bandwidth;
            }
            fit_local_poly(sample, &options)?
        }
        PropensityConfig::Series { basis, trim_eps } => fit_series(sample, basis, *trim_eps)?,
    })
}

fn no_cost() -> CostSpec {
    CostSpec { kind: CostKind::Constant { c: 0.0 }, kappa: f64::INFINITY }
}

fn column_quantile(m: &encourage_core::linalg::RowMatrix, j: usize, q: f64) -> f64 {
    quantile(&m.column(j), q)
}

pub fn run_pipeline(config: &ExperimentConfig, sample: &Sample) -> Result<ReportBundle> {
    config.validate()?;
    config.policy.features.check_dims(sample.dx(), sample.dz())?;
    let dgp: Option<StructuralDgp> = config.source.dgp()?;
    let p = fit_propensity(&config.propensity, sample)?;
    let mut warnings = p.warnings();
    let mte = config.mte.fit(sample, &p)?;
    let z1 = sample.z().column(0);
    let cost = config.cost.clone().unwrap_or_else(no_cost);

    let mut rows = Vec::new();
    let mut policies = Vec::new();
    for pc in &config.pairs {
        let pair = pc.resolve(&z1)?;
        let gains = build_gains(sample, &p, &mte, &pair, &cost, &config.policy.features)?;
        let mut learned = vec![("all".to_string(), PolicySpec::constant(true, pair))];
        let fewm = solve_fewm(&gains, config.policy.class, config.policy.backend)?;
        learned.push(("fewm".into(), fewm));
        if let Some(c) = &config.cost {
            let bewm = solve_bewm(&gains, config.policy.class, c.kappa, config.policy.backend)?;
            if bewm.is_empty_sentinel() {
                warnings.push(format!("{}: no rule in the class meets the budget", pc.name));
            }
            learned.push(("bewm".into(), bewm));
        }
        for (name, spec) in learned {
            let labels: Vec<bool> =
                (0..sample.n()).map(|i| spec.assign(sample.x_row(i), sample.z_row(i))).collect();
            let (oracle_gain, oracle_b) = match &dgp {
                Some(d) => {
                    let g = oracle_contrast(d, &spec, config.evaluation.draws, config.seed)?;
                    let b = match &config.cost {
                        Some(c) => Some(oracle_budget(
                            d,
                            &spec,
                            c,
                            WelfareMethod::Formula,
                            config.evaluation.draws,
                            config.seed,
                        )?),
                        None => None,
                    };
                    (Some(g), b)
                }
                None => (None, None),
            };
            rows.push(PolicyRow {
                pair: pc.name.clone(),
                policy: name.clone(),
                report: report(&gains, &labels),
                budget: gains.budget(&labels),
                oracle_gain,
                oracle_budget: oracle_b,
            });
            if name != "all" {
                policies.push(LearnedPolicy { pair: pc.name.clone(), learner: name, spec });
            }
        }
    }

    let x_bar: Vec<f64> = (0..sample.dx()).map(|j| column_quantile(sample.x(), j, 0.5)).collect();
    let z_med: Vec<f64> = (0..sample.dz()).map(|k| column_quantile(sample.z(), k, 0.5)).collect();
    let axis = |k: usize| -> Vec<f64> {
        let lo = column_quantile(sample.z(), k, config.grid.lower_quantile);
        let hi = column_quantile(sample.z(), k, config.grid.upper_quantile);
        let m = config.grid.points;
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    };
    let a1 = axis(0);
    let a2 = if sample.dz() >= 2 { axis(1).into_iter().map(Some).collect() } else { vec![None] };
    let mut contours = Vec::new();
    for pc in &config.pairs {
        let pair = pc.resolve(&z1)?;
        let mut points = Vec::with_capacity(a1.len() * a2.len());
        let (mut z, mut za0, mut za1) = (z_med.clone(), z_med.clone(), z_med.clone());
        for &v2 in &a2 {
            for &v1 in &a1 {
                z[0] = v1;
                if let Some(v2) = v2 {
                    z[1] = v2;
                }
                pair.alpha0.apply_into(&z, &mut za0);
                pair.alpha1.apply_into(&z, &mut za1);
                let (p0, p1) = (p.propensity(&x_bar, &za0), p.propensity(&x_bar, &za1));
                let gain = mte.integrate(&x_bar, &z, p0, p1).unwrap_or(f64::NAN);
                let dp = p1 - p0;
                let prte = if dp != 0.0 { gain / dp } else { f64::NAN };
                points.push(ContourPoint { z1: v1, z2: v2, takeup_change: dp, gain, prte });
            }
        }
        contours.push(Contour { pair: pc.name.clone(), points });
    }

    let x_cells: Vec<Vec<f64>> = X_CELL_QUANTILES
        .iter()
        .map(|&q| (0..sample.dx()).map(|j| column_quantile(sample.x(), j, q)).collect())
        .collect();
    let mut mte_grid = Vec::new();
    for (cell, x) in x_cells.iter().enumerate() {
        let (lo, hi) = mte.identified_range(x, &z_med);
        let m = config.grid.u_points;
        for i in 0..m {
            let u = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            let value = mte.eval(u, x, &z_med).unwrap_or(f64::NAN);
            let oracle = dgp.as_ref().map(|d| d.mte(u, x));
            mte_grid.push(MtePoint { x_cell: cell, u, value, oracle });
        }
    }

    Ok(ReportBundle {
        config: config.clone(),
        synthetic: dgp.is_some(),
        n: sample.n(),
        propensity: p,
        mte,
        warnings,
        rows,
        policies,
        x_bar,
        contours,
        x_cells,
        mte_grid,
    })
}
