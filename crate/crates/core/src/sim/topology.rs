//! Tracker-driven mesh overlay.
//!
//! Peers join one at a time. The tracker hands each newcomer existing peers
//! in random order; a handshake succeeds while both sides are below `N_s`
//! neighbours. Peers that are already full refuse, so the newcomer ends up
//! linked to a uniform random subset of the non-full peers.

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("need at least 2 peers, got {0}")]
    TooFewNodes(usize),
    #[error("neighbourhood bound N_s must be at least 1")]
    NoNeighbors,
    #[error("N_s=1 cannot connect {0} peers")]
    Disconnected(usize),
    #[error("N_m={malicious} exceeds N={nodes}")]
    TooManyMalicious { nodes: usize, malicious: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlay {
    adj: Vec<Vec<usize>>,
    malicious: Vec<bool>,
    max_degree: usize,
}

impl Overlay {
    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn is_malicious(&self, v: usize) -> bool {
        self.malicious[v]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn malicious_neighbors(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&u| self.malicious[u]).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn link(&mut self, a: usize, b: usize) {
        debug_assert!(a != b && !self.are_adjacent(a, b));
        self.adj[a].push(b);
        self.adj[b].push(a);
    }

    fn unlink(&mut self, a: usize, b: usize) {
        let pa = self.adj[a]
            .iter()
            .position(|&x| x == b)
            .expect("edge exists");
        self.adj[a].swap_remove(pa);
        let pb = self.adj[b]
            .iter()
            .position(|&x| x == a)
            .expect("edge exists");
        self.adj[b].swap_remove(pb);
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        if self.adj.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.adj.len()
    }

    /// Each peer drops one random neighbour and asks the tracker for a fresh
    /// one. Returns the `(peer, dropped, added)` triples that took effect.
    ///
    /// A neighbour whose degree is 1 is never dropped, and a peer keeps its
    /// current neighbour when the tracker has no candidate with a free slot.
    pub fn refresh_neighbors<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Vec<(usize, usize, usize)> {
        let mut changes = Vec::new();
        for v in 0..self.adj.len() {
            let droppable: Vec<usize> = self.adj[v]
                .iter()
                .copied()
                .filter(|&w| self.adj[w].len() > 1)
                .collect();
            let Some(&w) = droppable.choose(rng) else {
                continue;
            };
            let candidates: Vec<usize> = (0..self.adj.len())
                .filter(|&c| {
                    c != v
                        && c != w
                        && self.adj[c].len() < self.max_degree
                        && !self.are_adjacent(v, c)
                })
                .collect();
            let Some(&c) = candidates.choose(rng) else {
                continue;
            };
            self.unlink(v, w);
            self.link(v, c);
            changes.push((v, w, c));
        }
        changes
    }
}

/// Builds the overlay by sequential tracker joins and assigns the malicious
/// role to `malicious` peers chosen uniformly at random.
pub fn build_topology<R: Rng + ?Sized>(
    nodes: usize,
    max_neighbors: usize,
    malicious: usize,
    rng: &mut R,
) -> Result<Overlay, TopologyError> {
    if nodes < 2 {
        return Err(TopologyError::TooFewNodes(nodes));
    }
    if max_neighbors < 1 {
        return Err(TopologyError::NoNeighbors);
    }
    if max_neighbors == 1 && nodes > 2 {
        return Err(TopologyError::Disconnected(nodes));
    }
    if malicious > nodes {
        return Err(TopologyError::TooManyMalicious { nodes, malicious });
    }
    let mut overlay = Overlay {
        adj: vec![Vec::new(); nodes],
        malicious: vec![false; nodes],
        max_degree: max_neighbors,
    };
    // Peers already joined that still have a free slot, with each peer's
    // position in `open` for constant-time removal.
    let mut open: Vec<usize> = vec![0];
    let mut pos: Vec<usize> = vec![usize::MAX; nodes];
    pos[0] = 0;
    let close = |open: &mut Vec<usize>, pos: &mut Vec<usize>, u: usize| {
        let at = pos[u];
        open.swap_remove(at);
        if at < open.len() {
            pos[open[at]] = at;
        }
        pos[u] = usize::MAX;
    };
    for v in 1..nodes {
        let take = open.len().min(max_neighbors);
        let targets: Vec<usize> = index::sample(rng, open.len(), take)
            .into_iter()
            .map(|i| open[i])
            .collect();
        for &u in &targets {
            overlay.link(v, u);
            if overlay.adj[u].len() == max_neighbors {
                close(&mut open, &mut pos, u);
            }
        }
        if targets.is_empty() {
            // Everyone is full: splice v into a random existing edge u-w.
            // Degrees of u and w are unchanged and the graph stays connected.
            let u = rng.random_range(0..v);
            let w = *overlay.adj[u]
                .choose(rng)
                .expect("joined peers have neighbours");
            overlay.unlink(u, w);
            overlay.link(v, u);
            overlay.link(v, w);
        }
        if overlay.adj[v].len() < max_neighbors {
            pos[v] = open.len();
            open.push(v);
        }
    }
    for idx in index::sample(rng, nodes, malicious) {
        overlay.malicious[idx] = true;
    }
    Ok(overlay)
}
