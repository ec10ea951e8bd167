//! Per-peer protocol state: per-generation buffers and decoders, the decoding
//! map advertised to neighbours, and the local pollution vector.

use crate::decoder::DecoderState;
use crate::recombiner::InputBuffer;
use std::collections::BTreeMap;
use std::ops::RangeInclusive;

/// Decoding status of a contiguous run of generations, one bit each.
///
/// A set bit means the peer no longer wants packets for that generation:
/// it has recovered it, or it has abandoned it after detecting pollution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodingMap {
    first: u64,
    len: u8,
    bits: u64,
}

impl DecodingMap {
    pub fn new(first: u64, len: usize) -> Self {
        assert!(len <= 64);
        DecodingMap {
            first,
            len: len as u8,
            bits: 0,
        }
    }

    pub fn first(&self) -> u64 {
        self.first
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, gen: u64) {
        let off = gen - self.first;
        assert!(off < self.len as u64, "generation {gen} outside map");
        self.bits |= 1 << off;
    }

    /// Whether the owner of this map still wants packets of `gen`.
    ///
    /// Generations older than the map have passed their deadline at the owner;
    /// newer ones had not been released when the map was sent.
    pub fn needs(&self, gen: u64) -> bool {
        if gen < self.first {
            return false;
        }
        let off = gen - self.first;
        off >= self.len as u64 || self.bits >> off & 1 == 0
    }
}

/// What a peer knows about one generation in its decoding region.
#[derive(Debug, Clone)]
pub struct GenState {
    pub buffer: InputBuffer,
    pub decoder: DecoderState,
    /// Pollution-vector bit: pollution detected, generation abandoned.
    pub polluted: bool,
}

impl GenState {
    pub fn new(k: usize) -> Self {
        GenState {
            buffer: InputBuffer::new(),
            decoder: DecoderState::new(k),
            polluted: false,
        }
    }

    pub fn done(&self) -> bool {
        self.polluted || self.decoder.is_full_rank()
    }

    /// Drops every buffered packet and stops relaying this generation.
    pub fn abandon(&mut self) {
        self.polluted = true;
        self.buffer.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Honest,
    Malicious,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub kind: NodeKind,
    k: usize,
    gens: BTreeMap<u64, GenState>,
    /// Last decoding map piggybacked by each peer, indexed by peer id.
    views: Vec<Option<DecodingMap>>,
}

impl NodeState {
    pub fn new(id: usize, kind: NodeKind, k: usize, peers: usize) -> Self {
        NodeState {
            id,
            kind,
            k,
            gens: BTreeMap::new(),
            views: vec![None; peers],
        }
    }

    pub fn generation(&self, gen: u64) -> Option<&GenState> {
        self.gens.get(&gen)
    }

    pub fn generation_mut(&mut self, gen: u64) -> &mut GenState {
        let k = self.k;
        self.gens.entry(gen).or_insert_with(|| GenState::new(k))
    }

    pub fn rank(&self, gen: u64) -> usize {
        self.gens.get(&gen).map_or(0, |g| g.decoder.rank())
    }

    pub fn is_polluted(&self, gen: u64) -> bool {
        self.gens.get(&gen).is_some_and(|g| g.polluted)
    }

    /// Forgets a generation once its playout deadline has passed.
    pub fn retire(&mut self, gen: u64) -> Option<GenState> {
        self.gens.remove(&gen)
    }

    pub fn view_of(&self, peer: usize) -> Option<&DecodingMap> {
        self.views[peer].as_ref()
    }

    pub fn update_view(&mut self, peer: usize, map: DecodingMap) {
        self.views[peer] = Some(map);
    }

    pub fn forget_view(&mut self, peer: usize) {
        self.views[peer] = None;
    }

    /// Decoding map over `region`, sent along with every packet.
    pub fn decoding_map(&self, region: RangeInclusive<u64>) -> DecodingMap {
        let (lo, hi) = (*region.start(), *region.end());
        let len = if hi >= lo { (hi - lo + 1) as usize } else { 0 };
        let mut map = DecodingMap::new(lo, len);
        for (&g, st) in self.gens.range(region) {
            if st.done() {
                map.set(g);
            }
        }
        map
    }

    /// Pollution vector over `region`.
    pub fn pollution_vector(&self, region: RangeInclusive<u64>) -> Vec<bool> {
        region.map(|g| self.is_polluted(g)).collect()
    }

    /// Generations this peer can usefully push to a neighbour whose last
    /// known map is `neighbor`, most urgent (earliest deadline) first.
    ///
    /// A generation qualifies when the neighbour still needs it, this peer has
    /// not flagged it polluted, and this peer holds at least `min_rank`
    /// independent packets of it.
    pub fn suitable_generations(
        &self,
        neighbor: Option<&DecodingMap>,
        region: RangeInclusive<u64>,
        min_rank: usize,
    ) -> Vec<u64> {
        self.gens
            .range(region)
            .filter(|(&g, st)| {
                neighbor.is_none_or(|m| m.needs(g))
                    && !st.polluted
                    && st.decoder.rank() >= min_rank
                    && !st.buffer.is_empty()
            })
            .map(|(&g, _)| g)
            .collect()
    }
}
