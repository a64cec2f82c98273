//! Regret of the learners against the best rule in the class, measured on a
//! large evaluation sample drawn from the simulation design.

use encourage_core::linalg::RowMatrix;
use encourage_core::policy::reference::grid_best;
use encourage_core::policy::{solve_bewm, solve_dr_ewm, solve_fewm, Objective};
use encourage_core::rng::{purpose, stream};
use encourage_core::welfare::{
    build_gains, build_gains_xz, dr_scores, CostKind, EstimatedNuisances, GChoice, GainVector, OracleNuisances,
};
use encourage_core::{
    CostSpec, FeatureSpec, MarginalEffect, ManipulationPair, PolicySpec, Propensity, Sample, StructuralDgp,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DensityRatio, ExperimentConfig, Learner, MonteCarloConfig, NuisanceMode, PropensityConfig};
use crate::error::{Error, Result};
use crate::pipeline::{default_logit_features, fit_propensity};

/// Rows of the evaluation sample used for nuisance errors.
const MSE_ROWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretPoint {
    pub learner: String,
    pub n: usize,
    pub replications: usize,
    /// Replications where the learner raised an error; excluded below.
    pub failures: usize,
    pub mean_regret: f64,
    pub regret_se: f64,
    /// Share of replications with true budget above `κ + violation_tol`.
    pub violation_freq: f64,
    /// Mean of `max(B − κ, 0)`.
    pub mean_violation: f64,
    /// Share of replications within `welfare_tol` of the relevant best.
    pub near_best_share: f64,
    /// Mean squared propensity and gain errors of estimated nuisances.
    pub p_mse: Option<f64>,
    pub gain_mse: Option<f64>,
    /// True welfare and budget of every replication (NaN on failure).
    pub welfare: Vec<f64>,
    pub budget: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub pair: String,
    pub eval_draws: usize,
    /// Best welfare in the class without and with the budget.
    pub best: f64,
    pub best_constrained: Option<f64>,
    pub kappa: Option<f64>,
    pub points: Vec<RegretPoint>,
    /// Least-squares slope of log mean regret on log n, per learner.
    pub slopes: Vec<(String, f64)>,
}

impl RegretCurve {
    pub fn point(&self, learner: Learner, n: usize) -> Option<&RegretPoint> {
        self.points.iter().find(|p| p.learner == learner.name() && p.n == n)
    }

    pub fn slope(&self, learner: Learner) -> Option<f64> {
        self.slopes.iter().find(|(l, _)| l == learner.name()).map(|(_, s)| *s)
    }
}

/// True gains, costs and features on the evaluation sample.
struct Evaluation {
    x: RowMatrix,
    z: RowMatrix,
    truth: GainVector,
}

impl Evaluation {
    fn new(
        dgp: &StructuralDgp,
        x: RowMatrix,
        z: RowMatrix,
        pair: &ManipulationPair,
        cost: &CostSpec,
        features: &FeatureSpec,
    ) -> Result<Self> {
        let truth = build_gains_xz(&x, &z, dgp, dgp, pair, cost, features)?;
        Ok(Evaluation { x, z, truth })
    }

    fn labels(&self, spec: &PolicySpec) -> Vec<bool> {
        self.truth.labels(&spec.rule)
    }
}

fn draw_xz(dgp: &StructuralDgp, draws: usize, seed: u64) -> (RowMatrix, RowMatrix) {
    let mut rng = stream(seed, purpose::EVALUATION);
    let (dx, dz) = (dgp.dx(), dgp.dz());
    let mut x = RowMatrix::zeros(draws, dx);
    let mut z = RowMatrix::zeros(draws, dz);
    let mut xs = vec![0.0; dx];
    let mut zs = vec![0.0; dz];
    for i in 0..draws {
        dgp.draw_xz(&mut rng, &mut xs, &mut zs);
        x.row_mut(i).copy_from_slice(&xs);
        z.row_mut(i).copy_from_slice(&zs);
    }
    (x, z)
}

fn replication_seed(seed: u64, index: u64) -> u64 {
    stream(seed, purpose::REPLICATION_BASE + index).next_u64()
}

/// Outcome of one learner in one replication.
#[derive(Debug, Clone, Copy)]
struct Draw {
    welfare: f64,
    budget: f64,
    p_mse: Option<f64>,
    gain_mse: Option<f64>,
}

struct Setup<'a> {
    config: &'a ExperimentConfig,
    mc: &'a MonteCarloConfig,
    dgp: &'a StructuralDgp,
    pair: ManipulationPair,
    cost: CostSpec,
    eval: &'a Evaluation,
}

impl Setup<'_> {
    fn replicate(&self, n: usize, seed: u64) -> Vec<Result<Draw>> {
        let sample = match self.dgp.sample(n, seed) {
            Ok(s) => s.observed(),
            Err(e) => return self.mc.learners.iter().map(|_| Err(e.clone().into())).collect(),
        };
        // Plug-in gains are shared by fewm and bewm.
        let needs_gains = self.mc.learners.iter().any(|l| matches!(l, Learner::Fewm | Learner::Bewm));
        let gains = if needs_gains { Some(self.plug_in(&sample)) } else { None };
        self.mc
            .learners
            .iter()
            .map(|l| {
                let (spec, p_mse, gain_mse) = match l {
                    Learner::Fewm | Learner::Bewm => {
                        let (g, p_mse, gain_mse) = match gains.as_ref().expect("computed above") {
                            Ok(v) => v,
                            Err(e) => return Err(clone_err(e)),
                        };
                        let spec = if *l == Learner::Fewm {
                            solve_fewm(g, self.config.policy.class, self.config.policy.backend)?
                        } else {
                            solve_bewm(g, self.config.policy.class, self.cost.kappa, self.config.policy.backend)?
                        };
                        (spec, *p_mse, *gain_mse)
                    }
                    Learner::DrEwm => (self.dr(&sample, seed)?, None, None),
                };
                let labels = self.eval.labels(&spec);
                Ok(Draw {
                    welfare: self.eval.truth.welfare(&labels),
                    budget: self.eval.truth.budget(&labels),
                    p_mse,
                    gain_mse,
                })
            })
            .collect()
    }

    #[allow(clippy::type_complexity)]
    fn plug_in(&self, sample: &Sample) -> Result<(GainVector, Option<f64>, Option<f64>)> {
        let features = &self.config.policy.features;
        match self.mc.nuisances {
            NuisanceMode::Oracle => {
                Ok((build_gains(sample, self.dgp, self.dgp, &self.pair, &self.cost, features)?, None, None))
            }
            NuisanceMode::Estimated => {
                let p = fit_propensity(&self.config.propensity, sample)?;
                let mte = self.config.mte.fit(sample, &p)?;
                let gains = build_gains(sample, &p, &mte, &self.pair, &self.cost, features)?;
                let (p_mse, gain_mse) = self.nuisance_errors(&p, &mte);
                Ok((gains, Some(p_mse), gain_mse))
            }
        }
    }

    fn nuisance_errors(&self, p: &dyn Propensity, mte: &dyn MarginalEffect) -> (f64, Option<f64>) {
        let Evaluation { x, z, truth } = self.eval;
        let m = truth.n().min(MSE_ROWS);
        let mut p_err = 0.0;
        let mut g_err = 0.0;
        let mut g_ok = true;
        let dz = z.ncols();
        let (mut z0, mut z1) = (vec![0.0; dz], vec![0.0; dz]);
        for i in 0..m {
            let (xi, zi) = (x.row(i), z.row(i));
            p_err += (p.propensity(xi, zi) - self.dgp.propensity(xi, zi)).powi(2);
            self.pair.alpha0.apply_into(zi, &mut z0);
            self.pair.alpha1.apply_into(zi, &mut z1);
            let (a, b) = (p.propensity(xi, &z0), p.propensity(xi, &z1));
            let g_true = truth.g[i];
            match mte.integrate(xi, zi, a, b) {
                Ok(g) => g_err += (g - g_true).powi(2),
                Err(_) => g_ok = false,
            }
        }
        (p_err / m as f64, g_ok.then(|| g_err / m as f64))
    }

    fn dr(&self, sample: &Sample, seed: u64) -> Result<PolicySpec> {
        let dr = &self.mc.dr;
        let scores = match self.mc.nuisances {
            NuisanceMode::Oracle => {
                let o = OracleNuisances::new(self.dgp, self.pair);
                dr_scores(sample, dr.folds, &self.pair, &o, dr.g_max, seed)?
            }
            NuisanceMode::Estimated => {
                let logit_features = match &self.config.propensity {
                    PropensityConfig::Logit { features, .. } if !features.is_empty() => features.clone(),
                    _ => default_logit_features(sample),
                };
                let g = match dr.g {
                    DensityRatio::Oracle => GChoice::Oracle(self.dgp),
                    DensityRatio::KernelRatio => GChoice::KernelRatio { bandwidth: dr.g_bandwidth },
                };
                let est = EstimatedNuisances { pair: self.pair, logit_features, mte: self.config.mte.clone(), g };
                dr_scores(sample, dr.folds, &self.pair, &est, dr.g_max, seed)?
            }
        };
        let features = &self.config.policy.features;
        let mut v = RowMatrix::zeros(sample.n(), features.len());
        for i in 0..sample.n() {
            features.eval_into(sample.x_row(i), sample.z_row(i), v.row_mut(i));
        }
        Ok(solve_dr_ewm(&scores, &v, features, self.pair, self.config.policy.class, self.config.policy.backend)?)
    }
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Core(c) => Error::Core(c.clone()),
        other => Error::Config(other.to_string()),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, (v / n).sqrt())
}

fn log_log_slope(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, r)| *r > 0.0).map(|&(n, r)| ((n as f64).ln(), r.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_montecarlo(config: &ExperimentConfig) -> Result<RegretCurve> {
    config.validate()?;
    let mc = config
        .montecarlo
        .as_ref()
        .ok_or_else(|| Error::Config("no [montecarlo] section".into()))?;
    let dgp = config.source.dgp()?.expect("validated: Monte Carlo runs are synthetic");
    let pc = match &mc.pair {
        Some(name) => config.pairs.iter().find(|p| &p.name == name).expect("validated"),
        None => &config.pairs[0],
    };
    let (x, z) = draw_xz(&dgp, mc.eval_draws, config.seed);
    let pair = pc.resolve(&z.column(0))?;
    let cost = config
        .cost
        .clone()
        .unwrap_or(CostSpec { kind: CostKind::Constant { c: 0.0 }, kappa: f64::INFINITY });
    let eval = Evaluation::new(&dgp, x, z, &pair, &cost, &config.policy.features)?;
    let truth = &eval.truth;
    let obj = Objective::new(&truth.g, &truth.v)?;
    let (_, grid) = grid_best(&obj, config.policy.class, &mc.reference)?;
    let grid_c = match &config.cost {
        Some(c) => {
            let cobj = Objective::new(&truth.g, &truth.v)?.with_budget(&truth.c0, &truth.c1, c.kappa)?;
            Some(grid_best(&cobj, config.policy.class, &mc.reference)?.1)
        }
        None => None,
    };

    let setup = Setup { config, mc, dgp: &dgp, pair, cost, eval: &eval };
    let r = mc.replications;
    // draws[size][replication][learner]
    let mut draws: Vec<Vec<Vec<Result<Draw>>>> = Vec::with_capacity(mc.sizes.len());
    for (s, &n) in mc.sizes.iter().enumerate() {
        let reps: Vec<Vec<Result<Draw>>> = (0..r)
            .into_par_iter()
            .map(|i| setup.replicate(n, replication_seed(config.seed, (s * r + i) as u64)))
            .collect();
        draws.push(reps);
    }

    let ok = |d: &Result<Draw>| d.as_ref().ok().copied();
    let kappa = config.cost.as_ref().map(|c| c.kappa);
    // The grid only approximates the class optimum; learned rules that beat
    // it raise the reference so regret stays non-negative.
    let mut best = grid;
    let mut best_c = grid_c;
    for reps in &draws {
        for rep in reps {
            for d in rep.iter().filter_map(ok) {
                best = best.max(d.welfare);
                if let (Some(k), Some(b)) = (kappa, best_c.as_mut()) {
                    if d.budget <= k {
                        *b = b.max(d.welfare);
                    }
                }
            }
        }
    }

    let mut points = Vec::new();
    for (li, learner) in mc.learners.iter().enumerate() {
        let reference = match learner {
            Learner::Bewm => best_c.unwrap_or(best),
            _ => best,
        };
        for (s, &n) in mc.sizes.iter().enumerate() {
            let col: Vec<Option<Draw>> = draws[s].iter().map(|rep| ok(&rep[li])).collect();
            let good: Vec<Draw> = col.iter().flatten().copied().collect();
            let regrets: Vec<f64> = good.iter().map(|d| reference - d.welfare).collect();
            let (mean_regret, regret_se) = mean_se(&regrets);
            let m = good.len().max(1) as f64;
            let (violation_freq, mean_violation) = match kappa {
                Some(k) => (
                    good.iter().filter(|d| d.budget > k + mc.violation_tol).count() as f64 / m,
                    good.iter().map(|d| (d.budget - k).max(0.0)).sum::<f64>() / m,
                ),
                None => (0.0, 0.0),
            };
            let near = good.iter().filter(|d| d.welfare >= reference - mc.welfare_tol).count() as f64 / m;
            let avg = |f: fn(&Draw) -> Option<f64>| {
                let v: Vec<f64> = good.iter().filter_map(f).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            points.push(RegretPoint {
                learner: learner.name().into(),
                n,
                replications: r,
                failures: r - good.len(),
                mean_regret,
                regret_se,
                violation_freq,
                mean_violation,
                near_best_share: near,
                p_mse: avg(|d| d.p_mse),
                gain_mse: avg(|d| d.gain_mse),
                welfare: col.iter().map(|d| d.map_or(f64::NAN, |d| d.welfare)).collect(),
                budget: col.iter().map(|d| d.map_or(f64::NAN, |d| d.budget)).collect(),
            });
        }
    }
    let slopes = mc
        .learners
        .iter()
        .map(|l| {
            let pts: Vec<(usize, f64)> =
                points.iter().filter(|p| p.learner == l.name()).map(|p| (p.n, p.mean_regret)).collect();
            (l.name().to_string(), log_log_slope(&pts))
        })
        .collect();
    Ok(RegretCurve {
        pair: pc.name.clone(),
        eval_draws: mc.eval_draws,
        best,
        best_constrained: best_c,
        kappa,
        points,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts = [(100, 1.0), (400, 0.5), (1600, 0.25)];
        assert!((log_log_slope(&pts) + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[(10, 1.0)]).is_nan());
    }

    #[test]
    fn replication_seeds_differ() {
        assert_ne!(replication_seed(1, 0), replication_seed(1, 1));
        assert_eq!(replication_seed(1, 5), replication_seed(1, 5));
    }
}
