use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/corpus")
        .join(rel)
}

fn bmfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmfix"))
        .args(args)
        .output()
        .unwrap()
}

fn run(cmd: &str, cfg: &str, extra: &[&str]) -> Output {
    let path = corpus(cfg);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    bmfix(&args)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn valid_corpus_passes_full() {
    for entry in std::fs::read_dir(corpus("valid")).unwrap() {
        let path = entry.unwrap().path();
        let out = bmfix(&["full", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
        let v = json(&out);
        assert_eq!(v["verdict"], "pass");
        assert_eq!(v["first_failure"], serde_json::Value::Null);
    }
}

#[test]
fn full_report_structure() {
    let v = json(&run("full", "valid/pinned_euclidean.toml", &[]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "full");
    let ws = v["witnesses"].as_array().unwrap();
    assert_eq!(ws.len(), 3);
    for w in ws {
        assert_eq!(w["status"], "completed");
        assert_eq!(w["orbit_fingerprint"], ws[0]["orbit_fingerprint"]);
    }
    assert_eq!(ws[1]["witness"]["n_tilde"], 2);
    assert_eq!(ws[1]["witness"]["m_tilde"], 3);
    assert_eq!(ws[1]["witness"]["k0"], 5);
    assert_eq!(ws[1]["witness"]["m0"], 3);
    assert!(v.get("timing").is_none());
    // the echoed config has every default filled in
    assert_eq!(v["config"]["run"]["seed"], 42);
    assert_eq!(v["config"]["run"]["horizon"], 64);
}

#[test]
fn negative_controls_exit_one() {
    for (cmd, cfg, stage) in [
        ("check-map", "negative/expanding_map.toml", "contraction"),
        ("check-space", "negative/snowflake_s_one.toml", "axioms"),
        ("check-phi", "negative/identity_phi.toml", "phi"),
        ("full", "negative/expanding_map.toml", "contraction"),
        ("full", "negative/snowflake_s_one.toml", "axioms"),
        ("full", "negative/identity_phi.toml", "phi"),
    ] {
        let out = run(cmd, cfg, &[]);
        assert_eq!(out.status.code(), Some(1), "{cmd} {cfg}");
        let v = json(&out);
        assert_eq!(v["verdict"], "fail");
        assert_eq!(v["first_failure"], stage, "{cmd} {cfg}");
    }
}

#[test]
fn text_format_names_failing_stage() {
    let out = run(
        "full",
        "negative/snowflake_s_one.toml",
        &["--format", "text"],
    );
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict: fail"), "{text}");
    assert!(text.contains("first failure: axioms"), "{text}");
}

#[test]
fn iteration_budget_is_inconclusive() {
    let out = run("solve", "negative/iteration_budget.toml", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["verdict"], "inconclusive");
}

#[test]
fn invalid_configs_exit_two() {
    for (cfg, needle) in [
        ("invalid/phi_c_one.toml", "phi.c"),
        ("invalid/empty_epsilons.toml", "run.epsilons"),
        ("invalid/syntax_error.toml", "line 5"),
        ("invalid/unknown_key.toml", "gain"),
        ("invalid/key_for_other_kind.toml", "space.q"),
        ("invalid/x0_dimension.toml", "run.x0"),
    ] {
        let out = run("full", cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(out.stdout.is_empty());
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(needle), "{cfg}: {err}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bmfix(&["full"]).status.code(), Some(2));
    assert_eq!(
        bmfix(&["full", "--config", "/nonexistent.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bmfix(&["bogus"]).status.code(), Some(2));
    let out = run("full", "valid/pinned_euclidean.toml", &["--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        "full",
        "valid/pinned_euclidean.toml",
        &["--seed", "18446744073709551615"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_apply() {
    let v = json(&run(
        "witness",
        "valid/pinned_euclidean.toml",
        &["--epsilon", "0.5", "--horizon", "20", "--seed", "9"],
    ));
    assert_eq!(v["config"]["run"]["epsilons"], serde_json::json!([0.5]));
    assert_eq!(v["config"]["run"]["seed"], 9);
    let ws = v["witnesses"].as_array().unwrap();
    assert_eq!(ws.len(), 1);
    assert_eq!(ws[0]["witness"]["window"], 20);
    assert_eq!(ws[0]["witness"]["horizon"], 42);
}

#[test]
fn reruns_byte_identical() {
    let dir = std::env::temp_dir().join(format!("bmfix-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let trace = dir.join(format!("t{i}.csv"));
        let report = dir.join(format!("r{i}.json"));
        let out = run(
            "full",
            "valid/pinned_snowflake.toml",
            &[
                "--trace",
                trace.to_str().unwrap(),
                "--out",
                report.to_str().unwrap(),
            ],
        );
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
        outputs.push((
            std::fs::read(&report).unwrap(),
            std::fs::read(&trace).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].1.clone()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,succ_dist,dist_to_xstar"));
    // x_k = 2 - 2^(1-k); squared gaps on the snowflake
    // x* = x_18 = 2 - 2^-17 and the snowflake distance is the squared gap
    let x_star = 2.0 - 2f64.powi(-17);
    assert_eq!(
        lines.next(),
        Some(format!("0,{:?},{:?}", 1.0f64, x_star * x_star).as_str())
    );
    assert_eq!(lines.count(), 18);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn timing_only_when_requested() {
    let v = json(&run(
        "check-phi",
        "valid/pinned_euclidean.toml",
        &["--timing"],
    ));
    assert!(v["timing"].is_object());
}
