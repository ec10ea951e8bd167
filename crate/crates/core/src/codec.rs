//! Blocks, encoding vectors and coded packets over GF(2).
//!
//! Addition in GF(2) is XOR, so every linear combination of blocks is a
//! bytewise XOR of the selected blocks and every combination of encoding
//! vectors is a wordwise XOR of their packed bits.

use rand::Rng;
use thiserror::Error;

/// Upper bound on rejection-sampling attempts for a nonzero encoding vector.
const MAX_RESAMPLE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("selection vector has no bit set")]
    EmptySelection,
    #[error("incompatible packets: {0}")]
    Incompatible(String),
    #[error("invalid generation: {0}")]
    InvalidGeneration(String),
    #[error("could not draw a nonzero encoding vector in {MAX_RESAMPLE} attempts")]
    ResampleExhausted,
}

/// A fixed-size symbol, the unit combined by network coding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block(Vec<u8>);

impl Block {
    pub fn new(data: Vec<u8>) -> Self {
        Block(data)
    }

    pub fn zeroed(block_size: usize) -> Self {
        Block(vec![0; block_size])
    }

    pub fn random<R: Rng + ?Sized>(block_size: usize, rng: &mut R) -> Self {
        let mut data = vec![0u8; block_size];
        rng.fill(&mut data[..]);
        Block(data)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// `self ^= other`. Both blocks must have the same length.
    pub fn xor_assign(&mut self, other: &Block) {
        debug_assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= *b;
        }
    }
}

/// GF(2) coefficient vector of length `k`, packed 64 bits per word.
///
/// Bit `j` is the coefficient of source block `j` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingVector {
    words: Vec<u64>,
    k: usize,
}

impl EncodingVector {
    pub fn zero(k: usize) -> Self {
        EncodingVector {
            words: vec![0; k.div_ceil(64)],
            k,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zero(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            if b {
                v.set(j, true);
            }
        }
        v
    }

    /// Unit vector with only bit `j` set.
    pub fn unit(k: usize, j: usize) -> Self {
        let mut v = Self::zero(k);
        v.set(j, true);
        v
    }

    /// Each bit independently 1 with probability 1/2 (all-zero allowed).
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let mut v = Self::zero(k);
        for w in v.words.iter_mut() {
            *w = rng.random();
        }
        v.mask_tail();
        v
    }

    /// Uniform over the `2^k - 1` nonzero vectors, by rejection.
    pub fn random_nonzero<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self, CodecError> {
        for _ in 0..MAX_RESAMPLE {
            let v = Self::random(k, rng);
            if !v.is_zero() {
                return Ok(v);
            }
        }
        Err(CodecError::ResampleExhausted)
    }

    fn mask_tail(&mut self) {
        let rem = self.k % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.k, "bit {j} out of range for k={}", self.k);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.k, "bit {j} out of range for k={}", self.k);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Smallest index with its bit set, if any.
    pub fn leading_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor_assign(&mut self, other: &EncodingVector) {
        debug_assert_eq!(self.k, other.k);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&j| self.get(j))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.k).map(|j| self.get(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OriginKind {
    Source,
    Recombined,
    Forged,
}

/// An encoded packet `(payload, encoding vector)` for one generation.
///
/// The taint bit is simulation ground truth. It is readable only through
/// [`crate::metrics::is_tainted`], so node logic cannot branch on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub generation_id: u64,
    pub payload: Block,
    pub coeffs: EncodingVector,
    pub(crate) taint: bool,
    pub origin: OriginKind,
}

impl CodedPacket {
    /// Packet built from explicit parts, as received from a trusted source.
    pub fn new(generation_id: u64, payload: Block, coeffs: EncodingVector) -> Self {
        CodedPacket {
            generation_id,
            payload,
            coeffs,
            taint: false,
            origin: OriginKind::Source,
        }
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn block_size(&self) -> usize {
        self.payload.len()
    }
}

/// One independently decodable chunk of the stream: `k` equally sized blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub id: u64,
    blocks: Vec<Block>,
}

impl Generation {
    pub fn new(id: u64, blocks: Vec<Block>) -> Result<Self, CodecError> {
        let first = blocks
            .first()
            .ok_or_else(|| CodecError::InvalidGeneration("k must be at least 1".into()))?;
        if first.is_empty() {
            return Err(CodecError::InvalidGeneration(
                "block size must be at least 1".into(),
            ));
        }
        if blocks.iter().any(|b| b.len() != first.len()) {
            return Err(CodecError::InvalidGeneration(
                "blocks differ in size".into(),
            ));
        }
        Ok(Generation { id, blocks })
    }

    pub fn random<R: Rng + ?Sized>(id: u64, k: usize, block_size: usize, rng: &mut R) -> Self {
        assert!(k >= 1 && block_size >= 1);
        let blocks = (0..k).map(|_| Block::random(block_size, rng)).collect();
        Generation { id, blocks }
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Payload for an explicit coefficient vector: XOR of the selected blocks.
    pub fn encode_with(&self, coeffs: EncodingVector) -> Result<CodedPacket, CodecError> {
        if coeffs.len() != self.k() {
            return Err(CodecError::Incompatible(format!(
                "encoding vector has length {}, generation has k={}",
                coeffs.len(),
                self.k()
            )));
        }
        let mut payload = Block::zeroed(self.block_size());
        for j in coeffs.iter_ones() {
            payload.xor_assign(&self.blocks[j]);
        }
        Ok(CodedPacket {
            generation_id: self.id,
            payload,
            coeffs,
            taint: false,
            origin: OriginKind::Source,
        })
    }
}

/// Random source packet: coefficients uniform over nonzero vectors.
pub fn encode_source<R: Rng + ?Sized>(
    gen: &Generation,
    rng: &mut R,
) -> Result<CodedPacket, CodecError> {
    let coeffs = EncodingVector::random_nonzero(gen.k(), rng)?;
    gen.encode_with(coeffs)
}

/// XOR of the packets whose `select` bit is set.
///
/// The result is tainted iff any selected input is. It may be all-zero.
pub fn combine(packets: &[CodedPacket], select: &[bool]) -> Result<CodedPacket, CodecError> {
    if packets.len() != select.len() {
        return Err(CodecError::Incompatible(format!(
            "{} packets but {} selection bits",
            packets.len(),
            select.len()
        )));
    }
    let mut chosen = packets
        .iter()
        .zip(select)
        .filter(|(_, &s)| s)
        .map(|(p, _)| p);
    let first = chosen.next().ok_or(CodecError::EmptySelection)?;
    let mut out = CodedPacket {
        generation_id: first.generation_id,
        payload: first.payload.clone(),
        coeffs: first.coeffs.clone(),
        taint: first.taint,
        origin: OriginKind::Recombined,
    };
    for p in chosen {
        if p.generation_id != out.generation_id
            || p.block_size() != out.block_size()
            || p.k() != out.k()
        {
            return Err(CodecError::Incompatible(format!(
                "generation {} / block size {} / k {} vs generation {} / block size {} / k {}",
                p.generation_id,
                p.block_size(),
                p.k(),
                out.generation_id,
                out.block_size(),
                out.k()
            )));
        }
        out.payload.xor_assign(&p.payload);
        out.coeffs.xor_assign(&p.coeffs);
        out.taint |= p.taint;
    }
    Ok(out)
}

/// Bogus packet as injected by a polluter: random coefficients and payload.
pub fn forge_packet<R: Rng + ?Sized>(
    generation_id: u64,
    k: usize,
    block_size: usize,
    rng: &mut R,
) -> Result<CodedPacket, CodecError> {
    if k == 0 || block_size == 0 {
        return Err(CodecError::InvalidGeneration(
            "k and block size must be at least 1".into(),
        ));
    }
    let coeffs = EncodingVector::random_nonzero(k, rng)?;
    Ok(CodedPacket {
        generation_id,
        payload: Block::random(block_size, rng),
        coeffs,
        taint: true,
        origin: OriginKind::Forged,
    })
}
