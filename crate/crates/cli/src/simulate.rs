use crate::{out_dir, parse_override, runtime, usage, Failure, Override, VERSION};
use clap::Args;
use ncstream_core::metrics::write_summary;
use ncstream_core::{export_csv, MetricsReport, ScenarioConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCENARIO_ECHO: &str = "scenario.toml";
pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML key = value).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "sim_out")]
    out: PathBuf,
    /// Parameter override, e.g. `--set k=25 --set strategy=AgeBased`.
    #[arg(long = "set", value_parser = parse_override)]
    overrides: Vec<Override>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    scenario_source: String,
    /// Re-run with `ncstream simulate --scenario <out>/scenario.toml`.
    scenario_echo: &'a str,
    trace_hash: &'a str,
    scenario: &'a ScenarioConfig,
}

pub fn load_scenario(path: &Path, overrides: &[Override]) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(path).map_err(usage)?;
    for o in overrides {
        cfg.set_param(&o.name, &o.value).map_err(usage)?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "seed",
    "ci_overall",
    "ci_attack_window",
    "ci_pre_attack",
    "eps_c",
    "eps_p",
    "eps_total",
    "trace_hash",
];

pub fn summary_row(seed: u64, r: &MetricsReport) -> Vec<String> {
    vec![
        seed.to_string(),
        format!("{:.6}", r.ci_overall),
        format!("{:.6}", r.ci_attack_window),
        format!("{:.6}", r.ci_pre_attack),
        format!("{:.6}", r.eps_c),
        format!("{:.6}", r.eps_p),
        format!("{:.6}", r.eps_total),
        r.trace_hash.clone(),
    ]
}

pub fn run(a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_scenario(&a.scenario, &a.overrides)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    log::info!(
        "simulating {} (N={}, k={}, {} s, seed {})",
        a.scenario.display(),
        cfg.nodes,
        cfg.k,
        cfg.duration,
        cfg.seed
    );
    let start = Instant::now();
    let report = ncstream_core::run(&cfg).map_err(usage)?;
    log::info!("finished in {:.1?}", start.elapsed());

    out_dir(&a.out)?;
    export_csv(&report, &a.out).map_err(runtime)?;
    let mut w = csv::Writer::from_path(a.out.join(SUMMARY)).map_err(runtime)?;
    w.write_record(SUMMARY_HEADER).map_err(runtime)?;
    w.write_record(summary_row(cfg.seed, &report))
        .map_err(runtime)?;
    w.flush().map_err(runtime)?;
    std::fs::write(a.out.join(SCENARIO_ECHO), cfg.to_toml_string()).map_err(runtime)?;
    let manifest = Manifest {
        tool: "ncstream",
        version: VERSION,
        command: "simulate",
        seed: cfg.seed,
        scenario_source: a.scenario.display().to_string(),
        scenario_echo: SCENARIO_ECHO,
        trace_hash: &report.trace_hash,
        scenario: &cfg,
    };
    let text = toml::to_string(&manifest).map_err(runtime)?;
    std::fs::write(a.out.join(MANIFEST), text).map_err(runtime)?;

    write_summary(&report, std::io::stdout().lock()).map_err(runtime)?;
    Ok(())
}
