//! Ground-truth measurement of a simulation run.
//!
//! The recorder is fed by the simulator as events happen and aggregates,
//! over honest peers only:
//!
//! * continuity index per generation: the share of honest peers that reached
//!   full rank before the playout deadline and received no tainted packet of
//!   that generation;
//! * `P_tp(i)`: the share of i-th transmissions (per peer, per generation)
//!   that carried taint, pooled over peers and attacked generations;
//! * code overhead `(k' - k)/k` and pollution overhead `r_p / k`.

use crate::codec::CodedPacket;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// Ground-truth taint of a packet. Only metrics code and trusted verifiers
/// may look at this.
pub fn is_tainted(pkt: &CodedPacket) -> bool {
    pkt.taint
}

/// Timing of generations in simulator ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Timeline {
    pub generations: u64,
    pub generation_ticks: u64,
    pub buffering_ticks: u64,
    pub attack_start: u64,
    pub attack_end: u64,
    pub ticks_per_second: u64,
}

impl Timeline {
    pub fn release(&self, gen: u64) -> u64 {
        gen * self.generation_ticks
    }

    pub fn deadline(&self, gen: u64) -> u64 {
        self.buffering_ticks + gen * self.generation_ticks
    }

    pub fn has_attack(&self) -> bool {
        self.attack_end > self.attack_start
    }

    /// Generation released while the attack was running.
    pub fn in_attack_window(&self, gen: u64) -> bool {
        let r = self.release(gen);
        self.has_attack() && r >= self.attack_start && r < self.attack_end
    }

    /// Generation whose playout deadline precedes the attack.
    pub fn before_attack(&self, gen: u64) -> bool {
        self.deadline(gen) <= self.attack_start
    }

    /// Generations pooled into `P_tp`: the attacked ones, or all of them when
    /// the scenario has no attack.
    pub fn counts_for_ptp(&self, gen: u64) -> bool {
        !self.has_attack() || self.in_attack_window(gen)
    }

    fn seconds(&self, ticks: u64) -> f64 {
        ticks as f64 / self.ticks_per_second as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TxIndexCounts {
    pub sent: Vec<u64>,
    pub tainted: Vec<u64>,
}

impl TxIndexCounts {
    /// 1-based transmission index.
    pub fn add(&mut self, index: usize, tainted: bool) {
        if self.sent.len() < index {
            self.sent.resize(index, 0);
            self.tainted.resize(index, 0);
        }
        self.sent[index - 1] += 1;
        self.tainted[index - 1] += tainted as u64;
    }

    pub fn merge(&mut self, other: &TxIndexCounts) {
        for (i, (&s, &t)) in other.sent.iter().zip(&other.tainted).enumerate() {
            if self.sent.len() <= i {
                self.sent.resize(i + 1, 0);
                self.tainted.resize(i + 1, 0);
            }
            self.sent[i] += s;
            self.tainted[i] += t;
        }
    }

    pub fn probability(&self, index: usize) -> Option<f64> {
        let s = *self.sent.get(index - 1)?;
        (s > 0).then(|| self.tainted[index - 1] as f64 / s as f64)
    }

    /// `(index, probability)` for every index with at least `min_samples` sends.
    pub fn curve(&self, min_samples: u64) -> Vec<(usize, f64)> {
        self.sent
            .iter()
            .zip(&self.tainted)
            .enumerate()
            .filter(|(_, (&s, _))| s >= min_samples && s > 0)
            .map(|(i, (&s, &t))| (i + 1, t as f64 / s as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStat {
    pub generation: u64,
    pub release_s: f64,
    pub deadline_s: f64,
    pub ci: f64,
    pub recovered: usize,
    pub honest: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub server_packets: u64,
    pub peer_packets: u64,
    pub forged: u64,
    pub detections: u64,
    pub deliveries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub k: usize,
    pub strategy: String,
    pub detector: String,
    pub generations: Vec<GenerationStat>,
    pub ci_overall: f64,
    pub ci_attack_window: f64,
    pub ci_pre_attack: f64,
    pub p_tp: TxIndexCounts,
    pub eps_c: f64,
    pub eps_p: f64,
    pub eps_total: f64,
    pub counts: EventCounts,
    pub trace_hash: String,
}

impl MetricsReport {
    pub fn p_tp_curve(&self, min_samples: u64) -> Vec<(usize, f64)> {
        self.p_tp.curve(min_samples)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PairRecord {
    received: u32,
    tainted_received: u32,
    k_prime: Option<u32>,
    transmitted: u32,
    detected: bool,
}

#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    k: usize,
    honest: Vec<bool>,
    timeline: Timeline,
    open: BTreeMap<u64, Vec<PairRecord>>,
    closed: Vec<GenerationStat>,
    p_tp: TxIndexCounts,
    eps_c_sum: f64,
    eps_c_pairs: u64,
    eps_p_sum: f64,
    eps_p_pairs: u64,
    counts: EventCounts,
}

impl MetricsRecorder {
    pub fn new(k: usize, honest: Vec<bool>, timeline: Timeline) -> Self {
        MetricsRecorder {
            k,
            honest,
            timeline,
            open: BTreeMap::new(),
            closed: Vec::new(),
            p_tp: TxIndexCounts::default(),
            eps_c_sum: 0.0,
            eps_c_pairs: 0,
            eps_p_sum: 0.0,
            eps_p_pairs: 0,
            counts: EventCounts::default(),
        }
    }

    fn pair(&mut self, node: usize, gen: u64) -> &mut PairRecord {
        let n = self.honest.len();
        &mut self
            .open
            .entry(gen)
            .or_insert_with(|| vec![PairRecord::default(); n])[node]
    }

    pub fn record_server_tx(&mut self) {
        self.counts.server_packets += 1;
    }

    pub fn record_forged(&mut self) {
        self.counts.forged += 1;
    }

    /// A peer sent `pkt`; returns the 1-based transmission index for honest peers.
    pub fn record_transmit(&mut self, node: usize, pkt: &CodedPacket) -> Option<usize> {
        self.counts.peer_packets += 1;
        if !self.honest[node] {
            return None;
        }
        let gen = pkt.generation_id;
        let rec = self.pair(node, gen);
        rec.transmitted += 1;
        let idx = rec.transmitted as usize;
        if self.timeline.counts_for_ptp(gen) {
            self.p_tp.add(idx, is_tainted(pkt));
        }
        Some(idx)
    }

    /// `node` received `pkt`, whatever it then does with it.
    pub fn record_receive(&mut self, node: usize, pkt: &CodedPacket) {
        self.counts.deliveries += 1;
        if !self.honest[node] {
            return;
        }
        let tainted = is_tainted(pkt);
        let rec = self.pair(node, pkt.generation_id);
        rec.received += 1;
        rec.tainted_received += tainted as u32;
    }

    /// Generation reached full rank after `k_prime` received packets.
    pub fn record_full_rank(&mut self, node: usize, gen: u64, k_prime: usize) {
        if self.honest[node] {
            self.pair(node, gen).k_prime = Some(k_prime as u32);
        }
    }

    pub fn record_detection(&mut self, node: usize, gen: u64) {
        self.counts.detections += 1;
        if self.honest[node] {
            self.pair(node, gen).detected = true;
        }
    }

    /// Scores a generation at its playout deadline.
    pub fn close_generation(&mut self, gen: u64) {
        let records = self
            .open
            .remove(&gen)
            .unwrap_or_else(|| vec![PairRecord::default(); self.honest.len()]);
        let k = self.k as f64;
        let mut honest = 0;
        let mut recovered = 0;
        for (rec, _) in records.iter().zip(&self.honest).filter(|(_, &h)| h) {
            honest += 1;
            if let Some(kp) = rec.k_prime {
                self.eps_c_sum += (kp as f64 - k) / k;
                self.eps_c_pairs += 1;
                if rec.tainted_received == 0 {
                    recovered += 1;
                }
            }
            self.eps_p_sum += rec.tainted_received as f64 / k;
            self.eps_p_pairs += 1;
        }
        let tl = self.timeline;
        self.closed.push(GenerationStat {
            generation: gen,
            release_s: tl.seconds(tl.release(gen)),
            deadline_s: tl.seconds(tl.deadline(gen)),
            ci: if honest == 0 {
                1.0
            } else {
                recovered as f64 / honest as f64
            },
            recovered,
            honest,
        });
    }

    pub fn finalize(
        mut self,
        strategy: String,
        detector: String,
        trace_hash: String,
    ) -> MetricsReport {
        let pending: Vec<u64> = self.open.keys().copied().collect();
        for g in pending {
            self.close_generation(g);
        }
        self.closed.sort_by_key(|g| g.generation);
        let tl = self.timeline;
        let mean = |pred: &dyn Fn(u64) -> bool| -> Option<f64> {
            let sel: Vec<f64> = self
                .closed
                .iter()
                .filter(|g| pred(g.generation))
                .map(|g| g.ci)
                .collect();
            (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
        };
        let ci_overall = mean(&|_| true).unwrap_or(1.0);
        let ci_attack_window = mean(&|g| tl.in_attack_window(g)).unwrap_or(ci_overall);
        let ci_pre_attack = mean(&|g| tl.before_attack(g)).unwrap_or(ci_overall);
        let avg = |sum: f64, n: u64| if n == 0 { 0.0 } else { sum / n as f64 };
        let eps_c = avg(self.eps_c_sum, self.eps_c_pairs);
        let eps_p = avg(self.eps_p_sum, self.eps_p_pairs);
        MetricsReport {
            k: self.k,
            strategy,
            detector,
            generations: self.closed,
            ci_overall,
            ci_attack_window,
            ci_pre_attack,
            p_tp: self.p_tp,
            eps_c,
            eps_p,
            eps_total: eps_c + eps_p,
            counts: self.counts,
            trace_hash,
        }
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub const CI_FILE: &str = "ci_timeseries.csv";
pub const PTP_FILE: &str = "p_tp.csv";
pub const OVERHEAD_FILE: &str = "overhead.csv";

/// Writes `ci_timeseries.csv`, `p_tp.csv` and `overhead.csv` into `dir`.
pub fn export_csv(report: &MetricsReport, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_writer(File::create(dir.join(CI_FILE))?);
    w.write_record(["generation_index", "deadline_s", "ci"])?;
    for g in &report.generations {
        w.write_record([g.generation.to_string(), fmt6(g.deadline_s), fmt6(g.ci)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(dir.join(PTP_FILE))?);
    w.write_record(["tx_index", "probability", "strategy", "detector"])?;
    for (i, p) in report.p_tp.curve(1) {
        w.write_record([
            i.to_string(),
            fmt6(p),
            report.strategy.clone(),
            report.detector.clone(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(dir.join(OVERHEAD_FILE))?);
    w.write_record(["k", "strategy", "eps_c", "eps_p", "eps_total"])?;
    if !report.generations.is_empty() {
        w.write_record([
            report.k.to_string(),
            report.strategy.clone(),
            fmt6(report.eps_c),
            fmt6(report.eps_p),
            fmt6(report.eps_total),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a one-line-per-field summary, used for stdout.
pub fn write_summary<W: Write>(report: &MetricsReport, mut out: W) -> io::Result<()> {
    writeln!(out, "ci_overall={}", fmt6(report.ci_overall))?;
    writeln!(out, "ci_attack_window={}", fmt6(report.ci_attack_window))?;
    writeln!(out, "ci_pre_attack={}", fmt6(report.ci_pre_attack))?;
    writeln!(out, "eps_c={}", fmt6(report.eps_c))?;
    writeln!(out, "eps_p={}", fmt6(report.eps_p))?;
    writeln!(out, "eps_total={}", fmt6(report.eps_total))?;
    writeln!(out, "trace_hash={}", report.trace_hash)
}
