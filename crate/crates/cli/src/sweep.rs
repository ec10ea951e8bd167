//! Sweep spec, e.g.
//!
//! ```toml
//! scenario = "desk_small.cfg"   # relative to this file
//! axis = "k"                     # k | p_poll | N_m | alpha | m_r | strategy | detector
//! values = [25, 50]
//! seeds = [1, 2, 3]
//!
//! [set]                          # optional fixed overrides
//! strategy = "AgeBased"
//! ```

use crate::simulate::{load_scenario, summary_row, SUMMARY_HEADER};
use crate::{out_dir, runtime, usage, Failure, Override, VERSION};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const AXES: [&str; 7] = ["k", "p_poll", "N_m", "alpha", "m_r", "strategy", "detector"];
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "sweep_out")]
    out: PathBuf,
    /// Overrides the spec's scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the spec's axis.
    #[arg(long)]
    axis: Option<String>,
    /// Overrides the spec's values (comma separated).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<String>>,
    /// Overrides the spec's seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: PathBuf,
    pub axis: String,
    pub values: Vec<toml::Value>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub set: BTreeMap<String, toml::Value>,
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut spec: SweepSpec =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        if spec.scenario.is_relative() {
            if let Some(dir) = path.parent() {
                spec.scenario = dir.join(&spec.scenario);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !AXES.contains(&self.axis.as_str()) {
            anyhow::bail!("unknown axis `{}`; expected one of {AXES:?}", self.axis);
        }
        if self.values.is_empty() || self.seeds.is_empty() {
            anyhow::bail!("sweep needs non-empty values and seeds");
        }
        Ok(())
    }
}

pub fn run(a: SweepArgs) -> Result<(), Failure> {
    let mut spec = SweepSpec::load(&a.spec).map_err(usage)?;
    if let Some(s) = a.scenario {
        spec.scenario = s;
    }
    if let Some(x) = a.axis {
        spec.axis = x;
    }
    if let Some(v) = a.values {
        spec.values = v.into_iter().map(toml::Value::String).collect();
    }
    if let Some(s) = a.seeds {
        spec.seeds = s;
    }
    spec.validate().map_err(usage)?;
    let fixed: Vec<Override> = spec
        .set
        .iter()
        .map(|(name, v)| Override {
            name: name.clone(),
            value: value_text(v),
        })
        .collect();
    // Fail fast on a broken base scenario; per-cell values are checked per cell.
    load_scenario(&spec.scenario, &fixed)?;

    let cells: Vec<(String, u64)> = spec
        .values
        .iter()
        .flat_map(|v| spec.seeds.iter().map(move |&s| (value_text(v), s)))
        .collect();
    log::info!("sweeping {} over {} cells", spec.axis, cells.len());
    let results: Vec<Result<Vec<String>, String>> = cells
        .par_iter()
        .map(|(value, seed)| {
            let mut overrides = fixed.clone();
            overrides.push(Override {
                name: spec.axis.clone(),
                value: value.clone(),
            });
            let mut cfg = load_scenario(&spec.scenario, &overrides).map_err(|f| match f {
                Failure::Usage(e) | Failure::Runtime(e) => format!("{e:#}"),
            })?;
            cfg.seed = *seed;
            let report = ncstream_core::run(&cfg).map_err(|e| e.to_string())?;
            log::info!("cell {}={value} seed {seed} done", spec.axis);
            Ok(summary_row(*seed, &report))
        })
        .collect();

    out_dir(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join(SWEEP_FILE)).map_err(runtime)?;
    let mut header = vec!["axis", "value"];
    header.extend(SUMMARY_HEADER);
    w.write_record(&header).map_err(runtime)?;
    let mut failed = 0;
    for ((value, seed), res) in cells.iter().zip(&results) {
        match res {
            Ok(row) => {
                let mut rec = vec![spec.axis.clone(), value.clone()];
                rec.extend(row.iter().cloned());
                w.write_record(&rec).map_err(runtime)?;
            }
            Err(e) => {
                failed += 1;
                log::error!("cell {}={value} seed {seed} failed: {e}", spec.axis);
            }
        }
    }
    w.flush().map_err(runtime)?;

    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'a str,
        version: &'a str,
        command: &'a str,
        failed_cells: usize,
        spec: &'a SweepSpec,
    }
    let manifest = Manifest {
        tool: "ncstream",
        version: VERSION,
        command: "sweep",
        failed_cells: failed,
        spec: &spec,
    };
    std::fs::write(
        a.out.join("manifest.toml"),
        toml::to_string(&manifest).map_err(runtime)?,
    )
    .map_err(runtime)?;

    println!(
        "cells={} failed={failed} out={}",
        cells.len(),
        a.out.display()
    );
    if failed > 0 {
        return Err(runtime(anyhow::anyhow!(
            "{failed} of {} cells failed",
            cells.len()
        )));
    }
    Ok(())
}
