use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
seed = 3
[source]
kind = "preset"
name = "canonical"
n = 800
[propensity]
kind = "logit"
features = ["1", "x2", "z1", "z2"]
[mte]
kind = "polynomial"
j = 2
[policy]
features = ["x2"]
[[pairs]]
name = "a=median"
alpha1 = { kind = "cap_subsidy", a = "median" }
[cost]
kind = { kind = "manipulation_gap" }
kappa = 0.5
[evaluation]
draws = 20000
[grid]
points = 5
u_points = 5
[montecarlo]
sizes = [100, 200]
replications = 4
learners = ["fewm", "bewm"]
eval_draws = 20000
"#;

fn run(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_encourage")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn every_subcommand_runs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let cfg = cfg.to_str().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let s = |p: std::path::PathBuf| p.to_str().unwrap().to_string();

    run(&["simulate", "--config", cfg, "--out", &s(dir("sim"))]);
    let data = s(dir("sim").join("sample.csv"));
    assert!(read(&dir("sim"), "sample.csv").starts_with("y,d,x1,x2,z1,z2\n"));

    let a = s(dir("a"));
    let b = s(dir("b"));
    run(&["learn", "--config", cfg, "--data", &data, "--out", &a, "--threads", "1"]);
    run(&["learn", "--config", cfg, "--data", &data, "--out", &b]);
    for f in ["welfare.csv", "welfare.json", "contours.csv", "mte_grid.csv", "fit.json", "policy_a=median_fewm.json"] {
        assert_eq!(read(&dir("a"), f), read(&dir("b"), f), "{f}");
    }
    assert!(read(&dir("a"), "welfare.csv").contains("# data: "));

    run(&["fit", "--config", cfg, "--out", &s(dir("fit")), "--seed", "11"]);
    assert!(read(&dir("fit"), "fit.json").contains("\"seed\": 11"));
    assert!(!dir("fit").join("welfare.csv").exists());

    let policy = s(dir("a").join("policy_a=median_bewm.json"));
    run(&["evaluate", "--config", cfg, "--policy", &policy, "--out", &s(dir("eval"))]);
    let eval: serde_json::Value = serde_json::from_str(&read(&dir("eval"), "evaluation.json")).unwrap();
    assert!(eval["oracle_gain"]["value"].is_number());
    assert!(eval["empirical"]["welfare_gain"].is_number());

    run(&["montecarlo", "--config", cfg, "--out", &s(dir("mc1"))]);
    run(&["montecarlo", "--config", cfg, "--out", &s(dir("mc2"))]);
    assert_eq!(read(&dir("mc1"), "regret.csv"), read(&dir("mc2"), "regret.csv"));
    assert_eq!(read(&dir("mc1"), "regret.csv").lines().filter(|l| l.starts_with("fewm,")).count(), 2);
}

#[test]
fn bad_configs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, CONFIG.replace("features = [\"x2\"]", "features = [\"x7\"]")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_encourage"))
        .args(["learn", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("x7"));
}
