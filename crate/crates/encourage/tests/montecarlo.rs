use encourage::config::{ExperimentConfig, Learner};
use encourage::run_montecarlo;

fn config(kappa: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
        seed = 17
        [source]
        kind = "preset"
        name = "canonical"
        [policy]
        features = ["x2"]
        [[pairs]]
        name = "a=median"
        alpha1 = {{ kind = "cap_subsidy", a = "median" }}
        [cost]
        kind = {{ kind = "manipulation_gap" }}
        kappa = {kappa}
        [montecarlo]
        sizes = [150, 600]
        replications = 12
        learners = ["fewm", "bewm"]
        eval_draws = 50000
        "#
    ))
    .unwrap()
}

#[test]
fn slack_budget_reproduces_fewm_replication_by_replication() {
    let curve = run_montecarlo(&config("inf")).unwrap();
    for n in [150, 600] {
        let f = curve.point(Learner::Fewm, n).unwrap();
        let b = curve.point(Learner::Bewm, n).unwrap();
        assert_eq!(f.welfare, b.welfare);
        assert_eq!(f.budget, b.budget);
        assert_eq!(f.mean_regret, b.mean_regret);
        assert_eq!(f.failures, 0);
        assert_eq!(b.violation_freq, 0.0);
    }
}

#[test]
fn regret_is_non_negative_and_deterministic() {
    let cfg = config("0.3");
    let curve = run_montecarlo(&cfg).unwrap();
    assert_eq!(curve, run_montecarlo(&cfg).unwrap());
    for p in &curve.points {
        let best = if p.learner == "bewm" { curve.best_constrained.unwrap() } else { curve.best };
        for (w, b) in p.welfare.iter().zip(&p.budget) {
            if p.learner == "fewm" || *b <= 0.3 {
                assert!(*w <= best, "{} n={} welfare {w} above best {best}", p.learner, p.n);
            }
        }
    }
    assert!(curve.point(Learner::Fewm, 150).unwrap().mean_regret >= 0.0);
    assert!(curve.best >= curve.best_constrained.unwrap());
}
