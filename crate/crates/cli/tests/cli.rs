use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mspc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mspc"))
        .args(args)
        .env_remove("MSPC_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SPLIT: (usize, usize, usize) = (300, 150, 60);

fn sphere_config(n: usize, shift: Option<(usize, usize, f64)>, extra: &str) -> String {
    let shift = shift
        .map(|(tau, coord, amount)| {
            let delta: Vec<String> = (1..=6).map(|i| if i == coord { amount.to_string() } else { "0".into() }).collect();
            format!(r#""shift": {{"tau": {tau}, "delta": [{}]}},"#, delta.join(","))
        })
        .unwrap_or_default();
    format!(
        r#"{{
            "sphere": {{"d": 2, "ambient_dim": 6, "sigma_x": 0.3, "sigma": 0.1, "n": {n}, "seed": 1}},
            {shift}
            "split": {{"m_fit": {}, "m_ar": {}, "m_chart": {}}},
            "mf": {{"fit": {{"c0": 5, "c1": 3, "c2": 5, "d_hint": 2}}, "ar": {{"fixed": 3}},
                    "chart": {{"replicates": 400}}}},
            "ml": {{"d": 3, "k_neighbors": 10, "ar": {{"fixed": 3}}, "chart": {{"replicates": 400}}}}
            {extra}
        }}"#,
        SPLIT.0, SPLIT.1, SPLIT.2
    )
}

/// Generates `phase1 + phase2` rows and splits them into two CSV files.
fn phases(dir: &TempDir, seed: u64, phase2: usize, shift: Option<(usize, f64)>, extra: &str) -> (PathBuf, PathBuf, PathBuf) {
    let m = SPLIT.0 + SPLIT.1 + SPLIT.2;
    let cfg = write(
        dir,
        &format!("cfg{seed}.json"),
        &sphere_config(m + phase2, shift.map(|(c, a)| (m + 1, c, a)), extra),
    );
    let all = dir.path().join(format!("all{seed}.csv"));
    let out = mspc(&["generate", "--config", s(&cfg), "--out", s(&all), "--seed", &seed.to_string()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&all).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let rows: Vec<&str> = lines.collect();
    let p1 = write(dir, &format!("p1_{seed}.csv"), &format!("{header}\n{}\n", rows[..m].join("\n")));
    let p2 = write(dir, &format!("p2_{seed}.csv"), &format!("{header}\n{}\n", rows[m..].join("\n")));
    (cfg, p1, p2)
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_writes_rows_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &sphere_config(25, None, ""));
    let out = dir.path().join("x.csv");
    assert_eq!(code(&mspc(&["generate", "--config", s(&cfg), "--out", s(&out)])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,x4,x5,x6");
    assert_eq!(lines.len(), 26);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    let meta = read_json(&out.with_extension("json"));
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["n"], 25);
}

#[test]
fn generate_rejects_small_ambient_dim() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"sphere": {"d": 2, "ambient_dim": 2, "sigma_x": 0.3, "sigma": 0.1, "n": 5, "seed": 1}}"#,
    );
    let out = mspc(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ambient_dim"));
}

#[test]
fn generate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &sphere_config(50, Some((30, 4, 1.0)), ""));
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    for (p, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        assert_eq!(code(&mspc(&["generate", "--config", s(&cfg), "--out", s(p), "--seed", seed])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(read_json(&a.with_extension("json"))["tau"], 30);
}

#[test]
fn config_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"sphere": {"d": 2}, "nonsense": true}"#);
    let out = mspc(&["generate", "--config", s(&bad), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&mspc(&["generate", "--config", s(&missing), "--out", "x.csv"])), 3);
    let no_study = write(&dir, "ns.json", "{}");
    assert_eq!(code(&mspc(&["arl", "--config", s(&no_study), "--out", s(&dir.path().join("t.csv"))])), 2);
}

#[test]
fn monitor_detects_off_manifold_shift() {
    let dir = TempDir::new().unwrap();
    let (cfg, p1, p2) = phases(&dir, 3, 100, Some((4, 1.0)), "");
    let trace = dir.path().join("trace.csv");
    let out = mspc(&["monitor", "--config", s(&cfg), "--phase1", s(&p1), "--phase2", s(&p2), "--out", s(&trace)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&trace.with_extension("json"));
    assert_eq!(summary["censored"], false);
    let rl = summary["run_length"].as_u64().unwrap() as usize;
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,statistic,limit,alarm");
    assert_eq!(lines.len(), rl + 1);
    assert!(lines[rl].ends_with(",true"));
    assert!(lines[1..rl].iter().all(|l| l.ends_with(",false")));
    assert!(summary["details"]["sigma_hat"].as_f64().unwrap() > 0.0);

    let svg = dir.path().join("chart.svg");
    assert_eq!(code(&mspc(&["plot", "--trace", s(&trace), "--out", s(&svg)])), 0);
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches(r#"class="alarm""#).count(), 1);
}

#[test]
fn embedding_method_refuses_small_fit_sample() {
    let dir = TempDir::new().unwrap();
    // Fitting sample of 5 points in six dimensions.
    let m = SPLIT.0 + SPLIT.1 + SPLIT.2;
    let (_, p1, p2) = phases(&dir, 4, 20, None, "");
    let cfg = write(
        &dir,
        "small.json",
        &format!(r#"{{"split": {{"m_fit": 5, "m_ar": {}, "m_chart": 60}}, "ml": {{"k_neighbors": 3}}}}"#, m - 65),
    );
    for method in ["pca", "lpp", "npe"] {
        let out = mspc(&[
            "monitor", "--config", s(&cfg), "--phase1", s(&p1), "--phase2", s(&p2),
            "--out", s(&dir.path().join("t.csv")), "--method", method,
        ]);
        assert_eq!(code(&out), 4, "{method}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("\"mf\""));
    }
}

#[test]
fn in_control_alarm_probability_over_fifty_steps() {
    // P(alarm within 50 steps) = 1 − 0.95^50 for a geometric run length.
    let dir = TempDir::new().unwrap();
    let runs = 60;
    let mut alarms = 0;
    for seed in 0..runs {
        let (cfg, p1, p2) = phases(&dir, 100 + seed, 50, None, r#", "horizon": 50"#);
        let trace = dir.path().join(format!("t{seed}.csv"));
        let out = mspc(&[
            "monitor", "--config", s(&cfg), "--phase1", s(&p1), "--phase2", s(&p2),
            "--out", s(&trace), "--seed", &seed.to_string(),
        ]);
        assert_eq!(code(&out), 0);
        if read_json(&trace.with_extension("json"))["censored"] == false {
            alarms += 1;
        }
    }
    let p = 1.0 - 0.95f64.powi(50);
    let rate = alarms as f64 / runs as f64;
    let sd = (p * (1.0 - p) / runs as f64).sqrt();
    assert!((rate - p).abs() <= 4.0 * sd, "rate {rate}, expected {p} ± {}", 4.0 * sd);
}

fn study_config(extra: &str) -> String {
    format!(
        r#"{{
            "study": {{
                "split": {{"m_fit": 300, "m_ar": 150, "m_chart": 60}},
                "horizon": 60,
                "mf": {{"fit": {{"c0": 5, "c1": 3, "c2": 5, "d_hint": 2}}, "ar": {{"fixed": 3}}, "chart": {{"replicates": 300}}}},
                "ml": {{"d": 3, "k_neighbors": 10, "ar": {{"fixed": 3}}, "chart": {{"replicates": 300}}}}
            }}
            {extra}
        }}"#
    )
}

fn table(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn arl_table_shape_and_thread_independence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "arl.json", &study_config(r#", "replications": 2, "seed": 5"#));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&mspc(&["arl", "--config", s(&cfg), "--out", s(&a), "--threads", "1"])), 0);
    assert_eq!(code(&mspc(&["arl", "--config", s(&cfg), "--out", s(&b), "--threads", "4"])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t = table(&a);
    assert_eq!(t.len(), 6);
    assert_eq!(t[0].len(), 2 + 3 * 4);
    assert_eq!(t[0][2], "mf_arl");
    assert!(t.iter().all(|r| r.len() == 14));
}

#[test]
fn single_replication_echoes_run_length() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "arl.json", &study_config(""));
    let out = dir.path().join("one.csv");
    let res = mspc(&["arl", "--config", s(&cfg), "--out", s(&out), "--replications", "1", "--method", "mf"]);
    assert_eq!(code(&res), 0);
    let t = table(&out);
    assert_eq!(t[0], ["coordinate", "delta", "mf_arl", "mf_sdrl", "mf_censored"]);
    for row in &t[1..] {
        let arl: f64 = row[2].parse().unwrap();
        assert_eq!(arl.fract(), 0.0);
        assert!(arl >= 1.0);
        assert_eq!(row[3], "0.0000");
    }
    let meta = read_json(&out.with_extension("json"));
    assert_eq!(meta["replications"], 1);
}

#[test]
fn plot_checks_trace() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty.csv", "n,statistic,limit,alarm\n");
    let svg = dir.path().join("x.svg");
    assert_eq!(code(&mspc(&["plot", "--trace", s(&empty), "--out", s(&svg)])), 2);
    let garbage = write(&dir, "bad.csv", "n,statistic,limit,alarm\n1,abc,1,false\n");
    assert_eq!(code(&mspc(&["plot", "--trace", s(&garbage), "--out", s(&svg)])), 2);

    let mut text = String::from("n,statistic,limit,alarm\n");
    let mut crossings = 0;
    for n in 1..=100 {
        let stat = (n as f64 * 0.7).sin() * 2.0;
        let alarm = stat > 1.5;
        crossings += alarm as usize;
        text += &format!("{n},{stat},1.5,{alarm}\n");
    }
    let trace = write(&dir, "t.csv", &text);
    assert_eq!(code(&mspc(&["plot", "--trace", s(&trace), "--out", s(&svg)])), 0);
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("<circle").count(), crossings);
    assert!(crossings > 0);
}
