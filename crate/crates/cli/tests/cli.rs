use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ratchet-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ratchet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratchet"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn profile_example() {
    let dir = scratch("profile");
    let out = dir.join("out");
    let o = ratchet(&["profile", "--rho", "0.5", "--kmax", "10", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let body = fs::read_to_string(out.join("profile.csv")).unwrap();
    let rows: Vec<&str> = body.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("0,0.5,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["kmax"], 10);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    // nothing else is written, and no temporary files remain
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "profile.csv", "summary.json"]);
    let entries: Vec<_> = fs::read_dir(&dir).unwrap().collect();
    assert_eq!(entries.len(), 1);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn rerun_gives_same_digest() {
    let dir = scratch("digest");
    let digests: Vec<serde_json::Value> = ["a", "b"]
        .iter()
        .map(|sub| {
            let out = dir.join(sub);
            let o = ratchet(&["yule", "--reps", "500", "--seed", "3", "--out", s(&out)]);
            assert_eq!(code(&o), 0);
            let m: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap())
                    .unwrap();
            m["files"].clone()
        })
        .collect();
    assert_eq!(digests[0], digests[1]);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("c.json");
    fs::write(
        &cfg,
        r#"{"experiment": "gw", "reps": 200, "params": {"mu": 0.25}, "format": "json"}"#,
    )
    .unwrap();
    let out = dir.join("out");
    let o = ratchet(&["gw", "--config", s(&cfg), "--reps", "300", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("gw.json")).unwrap()).unwrap();
    assert_eq!(rows[0]["reps"], 300);
    assert_eq!(rows[0]["extinction_exact"], 0.25);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_1() {
    let dir = scratch("errors");
    let out = dir.join("out");
    assert_eq!(code(&ratchet(&["profile", "--alpah", "1"])), 1);
    assert_eq!(
        code(&ratchet(&["profile", "--mu", "2", "--out", s(&out)])),
        1
    );
    let cfg = dir.join("bad.json");
    fs::write(&cfg, r#"{"experiment": "profile", "colour": "blue"}"#).unwrap();
    assert_eq!(
        code(&ratchet(&[
            "profile",
            "--config",
            s(&cfg),
            "--out",
            s(&out)
        ])),
        1
    );
    let o = ratchet(&["compare", "--input", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least two"));
    // no experiment ran
    assert!(!out.exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runtime_error_exit_2() {
    // a cap at the threshold censors most samples
    let dir = scratch("runtime");
    let cfg = dir.join("c.json");
    fs::write(
        &cfg,
        r#"{"experiment": "yule", "reps": 200, "thresholds": {"yule_cap": 200}}"#,
    )
    .unwrap();
    let o = ratchet(&["yule", "--config", s(&cfg), "--out", s(&dir.join("out"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn compare_thresholds_exit_3() {
    let dir = scratch("compare");
    let strict = dir.join("strict.json");
    fs::write(
        &strict,
        r#"{"experiment": "compare", "reps": 20000, "kmax": 8, "routes": ["recursion", "ode", "yule_mc"],
            "thresholds": {"max_deviation": 1e-6}}"#,
    )
    .unwrap();
    let out = dir.join("strict");
    let o = ratchet(&["compare", "--config", s(&strict), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("k,recursion,ode,yule_mc\n"));
    assert!(report.lines().last().unwrap().starts_with("max_abs_dev,"));

    // the long table written by the first run feeds a file-based comparison
    let loose = dir.join("loose");
    let routes = out.join("routes.csv");
    let body = fs::read_to_string(&routes).unwrap();
    let (rec, rest): (Vec<&str>, Vec<&str>) = body
        .lines()
        .skip(1)
        .partition(|l| l.starts_with("recursion,"));
    fs::write(
        dir.join("a.csv"),
        format!("route,k,value,stderr\n{}\n", rec.join("\n")),
    )
    .unwrap();
    fs::write(
        dir.join("b.csv"),
        format!("route,k,value,stderr\n{}\n", rest.join("\n")),
    )
    .unwrap();
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let o = ratchet(&[
        "compare",
        "--input",
        s(&a),
        "--input",
        s(&b),
        "--out",
        s(&loose),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tests = fs::read_to_string(loose.join("tests.csv")).unwrap();
    assert_eq!(tests.lines().count(), 3);
    fs::remove_dir_all(&dir).unwrap();
}
