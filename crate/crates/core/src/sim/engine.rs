//! Discrete-event push simulation.
//!
//! Time is integer microseconds. Every peer gets bandwidth-paced transmission
//! opportunities; at each one it pushes a single packet to a random
//! neighbour. The server pushes fresh source packets of the newest generation
//! to random peers. Delivery is instantaneous and lossless.

use super::config::{Detector, ScenarioConfig};
use super::node::{NodeKind, NodeState};
use super::topology::{build_topology, Overlay};
use super::SimError;
use crate::codec::{encode_source, forge_packet, CodedPacket, Generation};
use crate::decoder::InsertOutcome;
use crate::metrics::{is_tainted, MetricsRecorder, MetricsReport, Timeline};
use crate::recombiner::make_transmission;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

/// Same-tick events run in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    GenerationDeadline = 0,
    NeighborRefresh = 1,
    ServerTx = 2,
    PeerTx = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sender {
    Server,
    Peer(usize),
}

/// One entry of the ground-truth event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Delivery {
        time: u64,
        sender: Sender,
        to: usize,
        generation: u64,
        tainted: bool,
        forged: bool,
        /// `None` when the receiver had already abandoned the generation.
        outcome: Option<InsertOutcome>,
        rank_after: usize,
        detected: bool,
    },
    Deadline {
        time: u64,
        generation: u64,
    },
    Refresh {
        time: u64,
        changes: usize,
    },
}

/// Opportunity `n` falls at `offset + floor(n * num / den)`, which keeps the
/// long-run rate exact for any bandwidth.
#[derive(Debug, Clone, Copy)]
struct Pacer {
    offset: u64,
    num: u128,
    den: u128,
    count: u64,
}

impl Pacer {
    fn new<R: Rng + ?Sized>(cfg: &ScenarioConfig, bandwidth: u64, rng: &mut R) -> Self {
        let num = cfg.video_bitrate as u128 * cfg.generation_ticks() as u128;
        let den = cfg.k as u128 * bandwidth as u128;
        let interval = (num / den).max(1) as u64;
        Pacer {
            offset: rng.random_range(0..interval),
            num,
            den,
            count: 0,
        }
    }

    fn time(&self) -> u64 {
        self.offset + (self.count as u128 * self.num / self.den) as u64
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    overlay: Overlay,
    nodes: Vec<NodeState>,
    sources: BTreeMap<u64, Generation>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(u64, EventKind, u64)>>,
    peer_pacers: Vec<Pacer>,
    server_pacer: Pacer,
    metrics: MetricsRecorder,
    timeline: Timeline,
    hasher: Sha256,
    trace: Option<Vec<TraceEvent>>,
    end_time: u64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let overlay = build_topology(cfg.nodes, cfg.max_neighbors, cfg.malicious, &mut rng)?;
        let nodes: Vec<NodeState> = (0..cfg.nodes)
            .map(|v| {
                let kind = if overlay.is_malicious(v) {
                    NodeKind::Malicious
                } else {
                    NodeKind::Honest
                };
                NodeState::new(v, kind, cfg.k, cfg.nodes)
            })
            .collect();
        let timeline = Timeline {
            generations: cfg.generations(),
            generation_ticks: cfg.generation_ticks(),
            buffering_ticks: cfg.buffering_ticks(),
            attack_start: super::config::seconds_to_ticks(cfg.attack_start),
            attack_end: super::config::seconds_to_ticks(cfg.attack_end),
            ticks_per_second: super::config::TICKS_PER_SECOND,
        };
        let honest = (0..cfg.nodes).map(|v| !overlay.is_malicious(v)).collect();
        let metrics = MetricsRecorder::new(cfg.k, honest, timeline);
        let server_pacer = Pacer::new(&cfg, cfg.server_bandwidth, &mut rng);
        let peer_pacers = (0..cfg.nodes)
            .map(|_| Pacer::new(&cfg, cfg.peer_bandwidth, &mut rng))
            .collect();
        let end_time = timeline.deadline(timeline.generations - 1);

        let mut sim = Simulation {
            cfg,
            overlay,
            nodes,
            sources: BTreeMap::new(),
            rng,
            queue: BinaryHeap::new(),
            peer_pacers,
            server_pacer,
            metrics,
            timeline,
            hasher: Sha256::new(),
            trace: None,
            end_time,
        };
        for g in 0..timeline.generations {
            sim.push(timeline.deadline(g), EventKind::GenerationDeadline, g);
        }
        sim.push(sim.server_pacer.time(), EventKind::ServerTx, 0);
        for v in 0..sim.nodes.len() {
            sim.push(sim.peer_pacers[v].time(), EventKind::PeerTx, v as u64);
        }
        if let Some(p) = sim.refresh_ticks() {
            sim.push(p, EventKind::NeighborRefresh, 0);
        }
        Ok(sim)
    }

    /// Keeps a full event log, returned by [`Simulation::run`].
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn overlay(&self) -> &Overlay {
        &self.overlay
    }

    fn refresh_ticks(&self) -> Option<u64> {
        let p = super::config::seconds_to_ticks(self.cfg.neighbor_refresh_period);
        (p > 0).then_some(p)
    }

    fn push(&mut self, time: u64, kind: EventKind, id: u64) {
        if time <= self.end_time {
            self.queue.push(Reverse((time, kind, id)));
        }
    }

    fn mix(&mut self, words: &[u64]) {
        for w in words {
            self.hasher.update(w.to_le_bytes());
        }
    }

    /// Generations released and not yet past their deadline, as `(lo, hi)`;
    /// empty when `lo > hi`.
    fn region(&self, t: u64) -> (u64, u64) {
        let tl = &self.timeline;
        let lo = if t < tl.buffering_ticks {
            0
        } else {
            (t - tl.buffering_ticks) / tl.generation_ticks + 1
        };
        let hi = (t / tl.generation_ticks).min(tl.generations - 1);
        (lo, hi)
    }

    fn attacking(&self, t: u64) -> bool {
        self.timeline.attack_start <= t && t < self.timeline.attack_end
    }

    pub fn run(mut self) -> (MetricsReport, Option<Vec<TraceEvent>>) {
        while let Some(Reverse((t, kind, id))) = self.queue.pop() {
            self.mix(&[t, kind as u64, id]);
            match kind {
                EventKind::GenerationDeadline => self.on_deadline(t, id),
                EventKind::NeighborRefresh => self.on_refresh(t),
                EventKind::ServerTx => self.on_server_tx(t),
                EventKind::PeerTx => self.on_peer_tx(t, id as usize),
            }
        }
        let hash = hex::encode(self.hasher.finalize());
        let report = self.metrics.finalize(
            self.cfg.strategy.label(),
            self.cfg.detector.label().to_string(),
            hash,
        );
        (report, self.trace)
    }

    fn on_deadline(&mut self, t: u64, g: u64) {
        self.metrics.close_generation(g);
        for node in &mut self.nodes {
            node.retire(g);
        }
        self.sources.remove(&g);
        if let Some(tr) = &mut self.trace {
            tr.push(TraceEvent::Deadline {
                time: t,
                generation: g,
            });
        }
    }

    fn on_refresh(&mut self, t: u64) {
        let changes = self.overlay.refresh_neighbors(&mut self.rng);
        for &(v, dropped, added) in &changes {
            self.nodes[v].forget_view(dropped);
            self.nodes[dropped].forget_view(v);
            self.nodes[v].forget_view(added);
            self.nodes[added].forget_view(v);
            self.mix(&[v as u64, dropped as u64, added as u64]);
        }
        if let Some(tr) = &mut self.trace {
            tr.push(TraceEvent::Refresh {
                time: t,
                changes: changes.len(),
            });
        }
        if let Some(p) = self.refresh_ticks() {
            self.push(t + p, EventKind::NeighborRefresh, 0);
        }
    }

    fn on_server_tx(&mut self, t: u64) {
        let g = t / self.timeline.generation_ticks;
        if g >= self.timeline.generations {
            return;
        }
        let (k, bs, seed) = (self.cfg.k, self.cfg.block_size, self.cfg.seed);
        let src = self.sources.entry(g).or_insert_with(|| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(g + 1);
            Generation::random(g, k, bs, &mut r)
        });
        let pkt = encode_source(src, &mut self.rng).expect("k >= 1");
        let to = self.rng.random_range(0..self.nodes.len());
        self.metrics.record_server_tx();
        self.deliver(Sender::Server, to, pkt, false, t);

        self.server_pacer.count += 1;
        let next = self.server_pacer.time();
        self.push(next, EventKind::ServerTx, 0);
    }

    fn on_peer_tx(&mut self, t: u64, v: usize) {
        self.peer_transmit(t, v);
        self.peer_pacers[v].count += 1;
        let next = self.peer_pacers[v].time();
        self.push(next, EventKind::PeerTx, v as u64);
    }

    fn peer_transmit(&mut self, t: u64, v: usize) {
        let (lo, hi) = self.region(t);
        if lo > hi || self.overlay.degree(v) == 0 {
            return;
        }
        let nbrs = self.overlay.neighbors(v);
        let u = nbrs[self.rng.random_range(0..nbrs.len())];

        if self.nodes[v].kind == NodeKind::Malicious
            && self.attacking(t)
            && self.rng.random_bool(self.cfg.p_poll)
        {
            let view = self.nodes[v].view_of(u).copied();
            if let Some(g) = (lo..=hi).find(|&g| view.is_none_or(|m| m.needs(g))) {
                let pkt = forge_packet(g, self.cfg.k, self.cfg.block_size, &mut self.rng)
                    .expect("validated sizes");
                self.metrics.record_forged();
                self.metrics.record_transmit(v, &pkt);
                self.deliver(Sender::Peer(v), u, pkt, true, t);
                return;
            }
        }

        let node = &self.nodes[v];
        let Some(g) = node
            .suitable_generations(node.view_of(u), lo..=hi, self.cfg.strategy.m_r)
            .first()
            .copied()
        else {
            return;
        };
        let st = node.generation(g).expect("suitable generation has state");
        let Some(pkt) =
            make_transmission(&st.buffer, &st.decoder, &self.cfg.strategy, &mut self.rng)
        else {
            return;
        };
        self.metrics.record_transmit(v, &pkt);
        self.deliver(Sender::Peer(v), u, pkt, false, t);
    }

    fn deliver(&mut self, sender: Sender, to: usize, pkt: CodedPacket, forged: bool, t: u64) {
        let (lo, hi) = self.region(t);
        if let Sender::Peer(s) = sender {
            let map = self.nodes[s].decoding_map(lo..=hi);
            self.nodes[to].update_view(s, map);
        }
        let g = pkt.generation_id;
        let k = self.cfg.k;
        let tainted = is_tainted(&pkt);
        let had_full = self.nodes[to].rank(g) == k;
        self.metrics.record_receive(to, &pkt);

        let st = self.nodes[to].generation_mut(g);
        let mut outcome = None;
        let mut detected = false;
        if !st.polluted {
            let out = st
                .decoder
                .insert(&pkt)
                .expect("packet shape matches scenario");
            st.buffer.push(pkt);
            outcome = Some(out);
            let reached = !had_full && st.decoder.is_full_rank();
            detected = match self.cfg.detector {
                Detector::Ofg => out == InsertOutcome::PollutionDetected,
                Detector::Checksum => {
                    reached && {
                        let got = st.decoder.recover(g).expect("full rank");
                        got.blocks() != self.sources[&g].blocks()
                    }
                }
                Detector::None => false,
            };
            if reached {
                let kp = st.decoder.received_at_full_rank().expect("full rank");
                self.metrics.record_full_rank(to, g, kp);
            }
            if detected {
                st.abandon();
                self.metrics.record_detection(to, g);
            }
        }
        let rank_after = self.nodes[to].rank(g);

        let from = match sender {
            Sender::Server => u64::MAX,
            Sender::Peer(s) => s as u64,
        };
        let oc = match outcome {
            None => 0,
            Some(InsertOutcome::Innovative) => 1,
            Some(InsertOutcome::NonInnovative) => 2,
            Some(InsertOutcome::PollutionDetected) => 3,
        };
        self.mix(&[from, to as u64, g, tainted as u64, oc, detected as u64]);
        if let Some(tr) = &mut self.trace {
            tr.push(TraceEvent::Delivery {
                time: t,
                sender,
                to,
                generation: g,
                tainted,
                forged,
                outcome,
                rank_after,
                detected,
            });
        }
    }
}

/// Runs one scenario to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport, SimError> {
    Ok(Simulation::new(cfg)?.run().0)
}

/// Runs one scenario and also returns the full event log.
pub fn run_traced(cfg: &ScenarioConfig) -> Result<(MetricsReport, Vec<TraceEvent>), SimError> {
    let (report, trace) = Simulation::new(cfg)?.with_trace().run();
    Ok((report, trace.unwrap_or_default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recombiner::StrategyConfig;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            nodes: 30,
            malicious: 0,
            max_neighbors: 8,
            k: 10,
            block_size: 16,
            duration: 12.0,
            buffering_time: 4.0,
            server_bandwidth: 5_000_000,
            peer_bandwidth: 1_500_000,
            attack_start: 0.0,
            attack_end: 0.0,
            strategy: StrategyConfig::reference(),
            ..ScenarioConfig::desk_small()
        }
    }

    #[test]
    fn pacer_rate_is_exact() {
        let cfg = tiny();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut p = Pacer::new(&cfg, cfg.peer_bandwidth, &mut r);
        let start = p.time();
        assert!(start < cfg.peer_interval_ticks() as u64);
        p.count = 75_000;
        let expect = (75_000.0 * cfg.peer_interval_ticks()).floor() as u64;
        assert!((p.time() - start).abs_diff(expect) <= 1);
    }

    #[test]
    fn region_bounds() {
        let sim = Simulation::new(&tiny()).unwrap();
        assert_eq!(sim.region(0), (0, 0));
        assert_eq!(sim.region(3_500_000), (0, 3));
        assert_eq!(sim.region(4_000_000), (1, 4));
        assert_eq!(sim.region(14_999_999), (11, 11));
    }

    #[test]
    fn clean_network_recovers_everything() {
        let rep = run(&tiny()).unwrap();
        assert_eq!(rep.generations.len(), 12);
        assert!(
            rep.generations.iter().all(|g| g.ci == 1.0),
            "{:?}",
            rep.generations
        );
        assert_eq!(rep.eps_p, 0.0);
        assert_eq!(rep.counts.forged, 0);
    }

    #[test]
    fn same_seed_same_hash() {
        let mut cfg = tiny();
        cfg.malicious = 3;
        cfg.attack_end = 12.0;
        cfg.p_poll = 0.05;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed += 1;
        assert_ne!(run(&cfg).unwrap().trace_hash, a.trace_hash);
    }
}
