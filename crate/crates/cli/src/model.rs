use crate::{out_dir, runtime, usage, Failure};
use clap::Args;
use ncstream_core::model::{p_fclean, p_gp, p_mn, p_rclean};
use ncstream_core::ModelParams;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Total nodes N.
    #[arg(long = "N", default_value_t = 1000)]
    nodes: u64,
    /// Malicious nodes N_m.
    #[arg(long = "N_m", default_value_t = 50)]
    malicious: u64,
    /// Uploaders per node n.
    #[arg(short = 'n', long, default_value_t = 25)]
    uploaders: u64,
    /// Generation size for the p_gp curve.
    #[arg(short, long, default_value_t = 100)]
    k: u64,
    #[arg(long, default_value_t = 0.1)]
    p_poll: f64,
    #[arg(long, default_value_t = 0.5)]
    p_r: f64,
    /// Last round index of the p_gp curve.
    #[arg(long, default_value_t = 20)]
    max_round: u64,
    /// Generation sizes for the clean-probability curves.
    #[arg(long, value_delimiter = ',', default_value = "10,25,50,100,200")]
    ks: Vec<u64>,
    #[arg(long, default_value = "model_out")]
    out: PathBuf,
}

fn write_csv(path: PathBuf, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(runtime)?;
    for r in rows {
        w.write_record(&r).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

pub fn run(a: ModelArgs) -> Result<(), Failure> {
    let params = |k: u64| ModelParams {
        nodes: a.nodes,
        malicious: a.malicious,
        uploaders: a.uploaders,
        k,
        p_poll: a.p_poll,
        p_r: a.p_r,
    };
    let base = params(a.k);
    base.validate().map_err(usage)?;
    if a.max_round < 1 || a.ks.is_empty() {
        return Err(usage(anyhow::anyhow!(
            "need --max-round >= 1 and a non-empty --ks"
        )));
    }
    for &k in &a.ks {
        params(k).validate().map_err(usage)?;
    }

    let pgp = (1..=a.max_round)
        .map(|i| Ok(vec![i.to_string(), p_gp(i, &base)?.to_string()]))
        .collect::<Result<Vec<_>, ncstream_core::ModelError>>()
        .map_err(usage)?;
    let clean =
        a.ks.iter()
            .map(|&k| {
                let p = params(k);
                Ok(vec![
                    k.to_string(),
                    p.rounds().to_string(),
                    p_fclean(&p)?.to_string(),
                    p_rclean(&p)?.to_string(),
                ])
            })
            .collect::<Result<Vec<_>, ncstream_core::ModelError>>()
            .map_err(usage)?;
    let pmn = (0..=a.uploaders)
        .map(|x| {
            Ok(vec![
                x.to_string(),
                p_mn(a.nodes, a.malicious, a.uploaders, x)?.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, ncstream_core::ModelError>>()
        .map_err(usage)?;

    out_dir(&a.out)?;
    write_csv(a.out.join("pgp_vs_i.csv"), &["i", "p_gp"], pgp)?;
    write_csv(
        a.out.join("pclean_vs_k.csv"),
        &["k", "rounds", "p_fclean", "p_rclean"],
        clean,
    )?;
    write_csv(a.out.join("pmn.csv"), &["x", "p_mn"], pmn)?;
    log::info!("model curves written to {}", a.out.display());
    println!("out={}", a.out.display());
    Ok(())
}
