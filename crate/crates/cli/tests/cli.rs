use ncstream_core::ScenarioConfig;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ncstream"));
    c.env("RUST_LOG", "warn");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// A short attacked scenario so CLI tests stay quick.
fn quick_scenario(dir: &Path) -> PathBuf {
    let mut cfg = ScenarioConfig::desk_small();
    cfg.nodes = 80;
    cfg.max_neighbors = 10;
    cfg.k = 20;
    cfg.duration = 16.0;
    cfg.attack_start = 4.0;
    cfg.attack_end = 12.0;
    cfg.p_poll = 0.05;
    let path = dir.join("quick.cfg");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn column(csv_text: &str, col: usize) -> Vec<f64> {
    csv_text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn model_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let o = run(&["model", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pgp = column(&read(&out, "pgp_vs_i.csv"), 1);
    assert_eq!(pgp.len(), 20);
    assert!(pgp.windows(2).all(|w| w[1] > w[0]));
    let pmn = column(&read(&out, "pmn.csv"), 1);
    assert!((pmn.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(read(&out, "pclean_vs_k.csv").lines().count(), 6);

    let again = tmp.path().join("b");
    assert_eq!(code(&run(&["model", "--out", again.to_str().unwrap()])), 0);
    for f in ["pgp_vs_i.csv", "pclean_vs_k.csv", "pmn.csv"] {
        assert_eq!(read(&out, f), read(&again, f));
    }

    let clean = tmp.path().join("c");
    assert_eq!(
        code(&run(&[
            "model",
            "--N_m",
            "0",
            "--out",
            clean.to_str().unwrap()
        ])),
        0
    );
    assert!(column(&read(&clean, "pgp_vs_i.csv"), 1)
        .iter()
        .all(|&p| p == 0.0));

    let bad = run(&[
        "model",
        "--N_m",
        "2000",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(code(&bad), 1);
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());
}

#[test]
fn bundled_scenarios_match_presets() {
    let full = ScenarioConfig::load(&scenarios().join("full_scale.cfg")).unwrap();
    assert_eq!(full, ScenarioConfig::full_scale());
    assert_eq!(
        (full.nodes, full.honest(), full.duration),
        (1000, 980, 300.0)
    );
    let desk = ScenarioConfig::load(&scenarios().join("desk_small.cfg")).unwrap();
    assert_eq!(desk, ScenarioConfig::desk_small());
}

#[test]
fn simulate_is_reproducible_from_its_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = quick_scenario(tmp.path());
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--scenario".into(),
            scen.display().to_string(),
            "--seed".into(),
            "5".into(),
            "--set".into(),
            "strategy=AgeBased".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let oa = bin().args(args(&a)).output().unwrap();
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = bin().args(args(&b)).output().unwrap();
    assert_eq!(oa.stdout, ob.stdout);
    let stdout = String::from_utf8(oa.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("ci_attack_window=")));

    let echo = a.join("scenario.toml");
    let oc = run(&[
        "simulate",
        "--scenario",
        echo.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&oc), 0);
    for f in [
        "ci_timeseries.csv",
        "p_tp.csv",
        "overhead.csv",
        "summary.csv",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
        assert_eq!(read(&a, f), read(&c, f), "{f}");
    }
    let manifest: toml::Value = toml::from_str(&read(&a, "manifest.toml")).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(5));
    assert_eq!(
        manifest["scenario"]["strategy"]["kind"].as_str(),
        Some("AgeBased")
    );
    assert!(manifest["version"].as_str().is_some());
    assert_eq!(
        read(&a, "ci_timeseries.csv").lines().next(),
        Some("generation_index,deadline_s,ci")
    );
    assert_eq!(
        read(&a, "p_tp.csv").lines().next(),
        Some("tx_index,probability,strategy,detector")
    );
    assert_eq!(
        read(&a, "overhead.csv").lines().next(),
        Some("k,strategy,eps_c,eps_p,eps_total")
    );
}

#[test]
fn simulate_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = quick_scenario(tmp.path());
    let out = tmp.path().join("o");
    let s = scen.to_str().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(
        code(&run(&[
            "simulate",
            "--scenario",
            "/no/such/file",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "simulate",
            "--scenario",
            s,
            "--set",
            "bogus=1",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "simulate",
            "--scenario",
            s,
            "--set",
            "N_m=500",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "simulate",
            "--scenario",
            s,
            "--set",
            "k",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(code(&run(&["simulate"])), 1);
    assert!(!out.exists());

    let broken = tmp.path().join("broken.cfg");
    std::fs::write(&broken, "N = 200\nN_m = \"four\"\n").unwrap();
    let r = run(&[
        "simulate",
        "--scenario",
        broken.to_str().unwrap(),
        "--out",
        o,
    ]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
}

#[test]
fn desk_scenario_runs_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = scenarios().join("desk_small.cfg");
    let start = Instant::now();
    let o = run(&[
        "simulate",
        "--scenario",
        scen.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(
        start.elapsed() < Duration::from_secs(120),
        "{:?}",
        start.elapsed()
    );
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    read(dir, "sweep.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sweep_cells_match_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = quick_scenario(tmp.path());
    let spec = tmp.path().join("sweep.toml");
    std::fs::write(
        &spec,
        "scenario = \"quick.cfg\"\naxis = \"strategy\"\nvalues = [\"Reference\", \"AgeBased\"]\nseeds = [2, 1]\n\n[set]\nm_r = 2\n",
    )
    .unwrap();
    let out = tmp.path().join("sw");
    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = sweep_rows(&out);
    let keys: Vec<(&str, &str)> = rows
        .iter()
        .map(|r| (r[1].as_str(), r[2].as_str()))
        .collect();
    assert_eq!(
        keys,
        [
            ("Reference", "2"),
            ("Reference", "1"),
            ("AgeBased", "2"),
            ("AgeBased", "1")
        ]
    );

    // Seed order does not change any cell.
    let out2 = tmp.path().join("sw2");
    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--seeds",
        "1,2",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let mut a = rows.clone();
    let mut b = sweep_rows(&out2);
    a.sort();
    b.sort();
    assert_eq!(a, b);

    // A single cell reproduces `simulate`.
    let single = tmp.path().join("single");
    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--values",
        "AgeBased",
        "--seeds",
        "1",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let sim = tmp.path().join("sim");
    let o = run(&[
        "simulate",
        "--scenario",
        scen.to_str().unwrap(),
        "--seed",
        "1",
        "--set",
        "strategy=AgeBased",
        "--set",
        "m_r=2",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let cell = &sweep_rows(&single)[0];
    let summary = read(&sim, "summary.csv");
    let sim_row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&cell[2..], &sim_row[..]);
    assert!(read(&single, "manifest.toml").contains("axis = \"strategy\""));
}

#[test]
fn sweep_reports_failures() {
    let tmp = tempfile::tempdir().unwrap();
    quick_scenario(tmp.path());
    let spec = tmp.path().join("sweep.toml");
    std::fs::write(
        &spec,
        "scenario = \"quick.cfg\"\naxis = \"k\"\nvalues = [0, 10]\nseeds = [1]\n",
    )
    .unwrap();
    let out = tmp.path().join("sw");
    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let rows = sweep_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "10");

    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--axis",
        "B_p",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    std::fs::write(
        &spec,
        "scenario = \"quick.cfg\"\naxis = \"k\"\nvalues = []\nseeds = [1]\n",
    )
    .unwrap();
    let o = run(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}
