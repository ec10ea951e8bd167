//! Per-generation on-the-fly Gaussian elimination with pollution detection.
//!
//! Each received packet is reduced against an upper-triangular system
//! `G X = Y` as it arrives. A packet whose encoding vector reduces onto an
//! existing row but whose payload disagrees with that row exposes an
//! inconsistency, i.e. at least one polluted packet has been received.
//! Once `G` reaches full rank, backward substitution yields the source blocks.

use crate::codec::{Block, CodedPacket, EncodingVector, Generation};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("packet has k={got}, decoder expects k={expected}")]
    Incompatible { expected: usize, got: usize },
    #[error("packet block size {got} differs from {expected}")]
    BlockSizeMismatch { expected: usize, got: usize },
    #[error("cannot recover: rank {rank} < k={k}")]
    NotFullRank { rank: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InsertOutcome {
    Innovative,
    NonInnovative,
    PollutionDetected,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: EncodingVector,
    payload: Block,
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    k: usize,
    block_size: Option<usize>,
    rows: Vec<Option<Row>>,
    rank: usize,
    polluted: bool,
    received: usize,
    received_at_full_rank: Option<usize>,
}

impl DecoderState {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "generation size must be at least 1");
        DecoderState {
            k,
            block_size: None,
            rows: vec![None; k],
            rank: 0,
            polluted: false,
            received: 0,
            received_at_full_rank: None,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.k
    }

    /// Sticky: once set, stays set.
    pub fn pollution_detected(&self) -> bool {
        self.polluted
    }

    /// Packets inserted so far, including late and rejected ones.
    pub fn received_count(&self) -> usize {
        self.received
    }

    /// `k'`: packets inserted up to and including the one that completed the rank.
    pub fn received_at_full_rank(&self) -> Option<usize> {
        self.received_at_full_rank
    }

    /// Stored row `s` as (coefficients, payload), if occupied.
    pub fn row(&self, s: usize) -> Option<(&EncodingVector, &Block)> {
        self.rows[s].as_ref().map(|r| (&r.coeffs, &r.payload))
    }

    pub fn insert(&mut self, pkt: &CodedPacket) -> Result<InsertOutcome, DecodeError> {
        if pkt.k() != self.k {
            return Err(DecodeError::Incompatible {
                expected: self.k,
                got: pkt.k(),
            });
        }
        match self.block_size {
            Some(bs) if bs != pkt.block_size() => {
                return Err(DecodeError::BlockSizeMismatch {
                    expected: bs,
                    got: pkt.block_size(),
                })
            }
            None => self.block_size = Some(pkt.block_size()),
            _ => {}
        }
        self.received += 1;

        let mut g = pkt.coeffs.clone();
        let mut y = pkt.payload.clone();
        let outcome = loop {
            let Some(s) = g.leading_one() else {
                // Reduced to 0 = y: consistent only if y is zero too.
                break if y.is_zero() {
                    InsertOutcome::NonInnovative
                } else {
                    InsertOutcome::PollutionDetected
                };
            };
            match &self.rows[s] {
                None => {
                    self.rows[s] = Some(Row {
                        coeffs: g,
                        payload: y,
                    });
                    self.rank += 1;
                    if self.rank == self.k {
                        self.received_at_full_rank = Some(self.received);
                    }
                    break InsertOutcome::Innovative;
                }
                Some(row) if row.coeffs == g => {
                    break if row.payload == y {
                        InsertOutcome::NonInnovative
                    } else {
                        InsertOutcome::PollutionDetected
                    };
                }
                Some(row) => {
                    g.xor_assign(&row.coeffs);
                    y.xor_assign(&row.payload);
                }
            }
        };
        if outcome == InsertOutcome::PollutionDetected {
            self.polluted = true;
        }
        Ok(outcome)
    }

    /// Solves the triangular system by backward substitution.
    pub fn recover(&self, generation_id: u64) -> Result<Generation, DecodeError> {
        if self.rank < self.k {
            return Err(DecodeError::NotFullRank {
                rank: self.rank,
                k: self.k,
            });
        }
        let mut solved: Vec<Option<Block>> = vec![None; self.k];
        for s in (0..self.k).rev() {
            let row = self.rows[s]
                .as_ref()
                .expect("full rank implies every row is set");
            let mut x = row.payload.clone();
            for j in row.coeffs.iter_ones().filter(|&j| j > s) {
                x.xor_assign(solved[j].as_ref().expect("solved bottom-up"));
            }
            solved[s] = Some(x);
        }
        let blocks = solved
            .into_iter()
            .map(|b| b.expect("all rows solved"))
            .collect();
        Ok(Generation::new(generation_id, blocks).expect("rows share one block size"))
    }

    /// Checks the upper-triangular invariant; used by tests.
    pub fn is_upper_triangular(&self) -> bool {
        let occupied = self.rows.iter().filter(|r| r.is_some()).count();
        occupied == self.rank
            && self.rows.iter().enumerate().all(|(s, r)| match r {
                None => true,
                Some(row) => row.coeffs.leading_one() == Some(s),
            })
    }
}
