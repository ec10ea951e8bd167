//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ncstream_core::metrics::TxIndexCounts;
use ncstream_core::model::ModelParams;
use ncstream_core::{run, Detector, MetricsReport, ScenarioConfig, StrategyConfig};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

/// Desk-scale scenario: 200 peers, 4 malicious, 60 s, attack over [20, 40) s.
pub fn desk(seed: u64, strategy: StrategyConfig, k: usize, detector: Detector) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk_small();
    cfg.seed = seed;
    cfg.strategy = strategy;
    cfg.k = k;
    cfg.detector = detector;
    cfg
}

/// Runs one configuration per seed in `SEEDS`, in seed order.
pub fn ensemble(make: impl Fn(u64) -> ScenarioConfig + Sync) -> Vec<MetricsReport> {
    let seeds: Vec<u64> = SEEDS.collect();
    seeds
        .par_iter()
        .map(|&s| run(&make(s)).expect("scenario runs"))
        .collect()
}

pub fn pooled(reports: &[MetricsReport]) -> TxIndexCounts {
    let mut acc = TxIndexCounts::default();
    for r in reports {
        acc.merge(&r.p_tp);
    }
    acc
}

/// Round model simulated packet by packet.
///
/// The reference node draws its `n` uploaders without replacement from `N`
/// nodes. In each round every uploader delivers one packet; a malicious
/// uploader's packet is polluted with probability `p_poll`. At round `i` the
/// node recombines its `i*n` packets, keeping each with probability `p_r`.
pub struct RoundModel {
    pub p: ModelParams,
}

impl RoundModel {
    pub fn draw_malicious_uploaders<R: Rng>(&self, rng: &mut R) -> u64 {
        index::sample(rng, self.p.nodes as usize, self.p.uploaders as usize)
            .into_iter()
            .filter(|&v| (v as u64) < self.p.malicious)
            .count() as u64
    }

    /// Polluted flags of the `i*n` packets held after `i` rounds.
    pub fn history<R: Rng>(&self, x: u64, rounds: u64, rng: &mut R) -> Vec<bool> {
        let n = self.p.uploaders;
        let mut out = Vec::with_capacity((rounds * n) as usize);
        for _ in 0..rounds {
            for u in 0..n {
                out.push(u < x && rng.random_bool(self.p.p_poll));
            }
        }
        out
    }

    pub fn recombination_polluted<R: Rng>(&self, held: &[bool], rng: &mut R) -> bool {
        let mut polluted = false;
        for &p in held {
            if rng.random_bool(self.p.p_r) && p {
                polluted = true;
            }
        }
        polluted
    }

    /// One trial of the round-`i` forwarded packet with `x` fixed.
    pub fn trial_rp<R: Rng>(&self, i: u64, x: u64, rng: &mut R) -> bool {
        let held = self.history(x, i, rng);
        self.recombination_polluted(&held, rng)
    }

    /// One trial of the round-`i` forwarded packet with random uploaders.
    pub fn trial_gp<R: Rng>(&self, i: u64, rng: &mut R) -> bool {
        let x = self.draw_malicious_uploaders(rng);
        self.trial_rp(i, x, rng)
    }

    /// Rounds are drawn independently of one another; the trial is clean if
    /// every round's forwarded packet is clean.
    pub fn trial_fclean<R: Rng>(&self, rng: &mut R) -> bool {
        (1..=self.p.rounds()).all(|i| !self.trial_gp(i, rng))
    }

    /// All packets collected over the generation's rounds are clean.
    pub fn trial_rclean<R: Rng>(&self, rng: &mut R) -> bool {
        let x = self.draw_malicious_uploaders(rng);
        !self.history(x, self.p.rounds(), rng).contains(&true)
    }
}

/// Monte-Carlo estimate and its standard error.
pub fn estimate(trials: u64, mut f: impl FnMut() -> bool) -> (f64, f64) {
    let hits = (0..trials).filter(|_| f()).count() as f64;
    let p = hits / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Agreement tolerance: three standard errors, at least 0.005.
pub fn within(analytic: f64, mc: f64, se: f64) -> bool {
    (analytic - mc).abs() <= (3.0 * se).max(0.005)
}
