//! Packet selection for transmission opportunities.
//!
//! The reference rule draws every buffered packet with the same probability.
//! The age-based rule weights buffer slot `i` (1 = earliest arrival) by
//! `i^alpha / sum_{j<=theta} j^alpha`, with `theta` bound to the current
//! buffer length, and compares a weight with a fresh uniform draw per slot.
//! [`Orientation`] picks which weight each slot is compared with; the
//! default, [`Orientation::AgeRank`], gives the oldest packet the largest
//! weight.

use crate::codec::{combine, CodedPacket};
use crate::decoder::DecoderState;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_REDRAW: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecombineError {
    #[error("input buffer is empty")]
    EmptyBuffer,
    #[error("buffer index {index} outside 1..={theta}")]
    IndexOutOfRange { index: usize, theta: usize },
    #[error("invalid strategy: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    Reference,
    AgeBased,
}

/// How the slot weight is turned into a selection probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `c_i = 1` iff `weight(i) < rho`: slot `i` selected with probability
    /// `1 - weight(i)`, decreasing in `i`.
    Literal,
    /// `c_i = 1` iff `rho < weight(i)`: probability `weight(i)`, increasing in `i`
    /// (favours the newest packets).
    Complement,
    /// `c_i = 1` iff `rho < weight(r + 1 - i)`: probability equal to the weight
    /// of the packet's age rank, so the oldest packet gets the largest share
    /// and about one packet is drawn per transmission.
    AgeRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_m_r")]
    pub m_r: usize,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default = "default_p_uniform")]
    pub p_uniform: f64,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_m_r() -> usize {
    1
}
fn default_orientation() -> Orientation {
    Orientation::AgeRank
}
fn default_p_uniform() -> f64 {
    0.5
}

impl StrategyConfig {
    pub fn reference() -> Self {
        StrategyConfig {
            kind: StrategyKind::Reference,
            alpha: default_alpha(),
            m_r: 1,
            orientation: default_orientation(),
            p_uniform: 0.5,
        }
    }

    pub fn age_based(alpha: f64, m_r: usize) -> Self {
        StrategyConfig {
            kind: StrategyKind::AgeBased,
            alpha,
            m_r,
            orientation: default_orientation(),
            p_uniform: 0.5,
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<(), RecombineError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(RecombineError::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.m_r < 1 {
            return Err(RecombineError::InvalidConfig(
                "m_r must be at least 1".into(),
            ));
        }
        if !(self.p_uniform > 0.0 && self.p_uniform < 1.0) {
            return Err(RecombineError::InvalidConfig(format!(
                "p_uniform must lie in (0, 1), got {}",
                self.p_uniform
            )));
        }
        Ok(())
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Reference => "reference".to_string(),
            StrategyKind::AgeBased => format!("age_a{}_mr{}", self.alpha, self.m_r),
        }
    }
}

/// Arrival-ordered packets of one generation (index 0 = earliest).
#[derive(Debug, Clone, Default)]
pub struct InputBuffer {
    packets: Vec<CodedPacket>,
}

impl InputBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pkt: CodedPacket) {
        self.packets.push(pkt);
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn clear(&mut self) {
        self.packets.clear();
    }

    pub fn packets(&self) -> &[CodedPacket] {
        &self.packets
    }
}

impl FromIterator<CodedPacket> for InputBuffer {
    fn from_iter<T: IntoIterator<Item = CodedPacket>>(iter: T) -> Self {
        InputBuffer {
            packets: iter.into_iter().collect(),
        }
    }
}

/// `i^alpha / sum_{j=1}^{theta} j^alpha` for 1-based `i`.
pub fn selection_weight(i: usize, theta: usize, alpha: f64) -> Result<f64, RecombineError> {
    if i == 0 || i > theta {
        return Err(RecombineError::IndexOutOfRange { index: i, theta });
    }
    Ok((i as f64).powf(alpha) / power_sum(theta, alpha))
}

fn power_sum(theta: usize, alpha: f64) -> f64 {
    (1..=theta).map(|j| (j as f64).powf(alpha)).sum()
}

/// Per-slot probability that the draw selects slot `i` (1-based), before
/// the all-zero redraw. Exposed for tests and analysis.
pub fn slot_probability(
    cfg: &StrategyConfig,
    i: usize,
    theta: usize,
) -> Result<f64, RecombineError> {
    let w = |idx| selection_weight(idx, theta, cfg.alpha);
    Ok(match (cfg.kind, cfg.orientation) {
        (StrategyKind::Reference, _) => {
            if i == 0 || i > theta {
                return Err(RecombineError::IndexOutOfRange { index: i, theta });
            }
            cfg.p_uniform
        }
        (StrategyKind::AgeBased, Orientation::Literal) => 1.0 - w(i)?,
        (StrategyKind::AgeBased, Orientation::Complement) => w(i)?,
        (StrategyKind::AgeBased, Orientation::AgeRank) => {
            if i == 0 || i > theta {
                return Err(RecombineError::IndexOutOfRange { index: i, theta });
            }
            w(theta + 1 - i)?
        }
    })
}

/// Draws the recombination vector for the current buffer.
///
/// An all-zero draw is repeated; after 64 empty draws the earliest packet is
/// forced in so no transmission opportunity is lost.
pub fn draw_coefficients<R: Rng + ?Sized>(
    buffer: &InputBuffer,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<Vec<bool>, RecombineError> {
    let r = buffer.len();
    if r == 0 {
        return Err(RecombineError::EmptyBuffer);
    }
    let mut sel = vec![false; r];
    match cfg.kind {
        StrategyKind::Reference => {
            for _ in 0..MAX_REDRAW {
                for c in sel.iter_mut() {
                    *c = rng.random_bool(cfg.p_uniform);
                }
                if sel.iter().any(|&c| c) {
                    return Ok(sel);
                }
            }
        }
        StrategyKind::AgeBased => {
            let total = power_sum(r, cfg.alpha);
            let weights: Vec<f64> = (1..=r)
                .map(|i| (i as f64).powf(cfg.alpha) / total)
                .collect();
            for _ in 0..MAX_REDRAW {
                for (idx, c) in sel.iter_mut().enumerate() {
                    let rho: f64 = rng.random();
                    *c = match cfg.orientation {
                        Orientation::Literal => weights[idx] < rho,
                        Orientation::Complement => rho < weights[idx],
                        Orientation::AgeRank => rho < weights[r - 1 - idx],
                    };
                }
                if sel.iter().any(|&c| c) {
                    return Ok(sel);
                }
            }
        }
    }
    sel[0] = true;
    Ok(sel)
}

/// A recombined packet for this opportunity, or `None` when the buffer is
/// empty or the generation's rank is still below `m_r`.
pub fn make_transmission<R: Rng + ?Sized>(
    buffer: &InputBuffer,
    decoder: &DecoderState,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Option<CodedPacket> {
    if buffer.is_empty() || decoder.rank() < cfg.m_r {
        return None;
    }
    let sel = draw_coefficients(buffer, cfg, rng).ok()?;
    combine(buffer.packets(), &sel).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_source, forge_packet, Generation};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clean_buffer(n: usize, rng: &mut ChaCha8Rng) -> (InputBuffer, DecoderState) {
        let gen = Generation::random(0, 16, 8, rng);
        let mut dec = DecoderState::new(16);
        let buf: InputBuffer = (0..n)
            .map(|_| {
                let p = encode_source(&gen, rng).unwrap();
                dec.insert(&p).unwrap();
                p
            })
            .collect();
        (buf, dec)
    }

    #[test]
    fn weight_examples() {
        assert_eq!(selection_weight(1, 1, 1.0).unwrap(), 1.0);
        assert_relative_eq!(selection_weight(2, 4, 1.0).unwrap(), 0.2, epsilon = 1e-15);
        let s: f64 = (1..=10)
            .map(|i| selection_weight(i, 10, 0.5).unwrap())
            .sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(selection_weight(0, 3, 1.0).is_err());
        assert!(selection_weight(4, 3, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StrategyConfig::reference().validate().is_ok());
        assert!(StrategyConfig::age_based(0.0, 1).validate().is_err());
        assert!(StrategyConfig::age_based(1.0, 0).validate().is_err());
        let mut c = StrategyConfig::reference();
        c.p_uniform = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_buffer_is_an_error() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            draw_coefficients(&InputBuffer::new(), &StrategyConfig::reference(), &mut r),
            Err(RecombineError::EmptyBuffer)
        );
    }

    #[test]
    fn single_slot_is_always_selected() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let (buf, _) = clean_buffer(1, &mut r);
        for orientation in [
            Orientation::Literal,
            Orientation::Complement,
            Orientation::AgeRank,
        ] {
            let cfg = StrategyConfig::age_based(1.0, 1).with_orientation(orientation);
            for _ in 0..100 {
                assert_eq!(draw_coefficients(&buf, &cfg, &mut r).unwrap(), vec![true]);
            }
        }
    }

    #[test]
    fn reference_rate_is_one_half() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let (buf, _) = clean_buffer(20, &mut r);
        let cfg = StrategyConfig::reference();
        let mut counts = [0u32; 20];
        let draws = 10_000;
        for _ in 0..draws {
            for (c, s) in counts
                .iter_mut()
                .zip(draw_coefficients(&buf, &cfg, &mut r).unwrap())
            {
                *c += s as u32;
            }
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn age_based_literal_matches_closed_form() {
        // r=10, alpha=1: P{c_i=1} = 1 - 2i/(r(r+1)). The all-zero redraw has
        // probability prod_i 2i/110 ~ 1e-12 and is negligible here.
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let (buf, _) = clean_buffer(10, &mut r);
        let cfg = StrategyConfig::age_based(1.0, 1).with_orientation(Orientation::Literal);
        let draws = 100_000;
        let mut counts = [0u32; 10];
        for _ in 0..draws {
            for (c, s) in counts
                .iter_mut()
                .zip(draw_coefficients(&buf, &cfg, &mut r).unwrap())
            {
                *c += s as u32;
            }
        }
        let rate: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
        for (idx, p) in rate.iter().enumerate() {
            let i = (idx + 1) as f64;
            let expected = 1.0 - 2.0 * i / (10.0 * 11.0);
            assert!((p - expected).abs() < 0.02, "slot {i}: {p} vs {expected}");
            assert_relative_eq!(
                slot_probability(&cfg, idx + 1, 10).unwrap(),
                expected,
                epsilon = 1e-12
            );
        }
        assert!(rate.windows(2).all(|w| w[0] > w[1] - 0.005));
        assert!(rate[0] > rate[9]);
    }

    #[test]
    fn age_rank_favours_oldest() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let (buf, _) = clean_buffer(10, &mut r);
        let cfg = StrategyConfig::age_based(1.0, 1).with_orientation(Orientation::AgeRank);
        let draws = 50_000;
        let mut counts = [0u32; 10];
        let mut selected = 0u64;
        for _ in 0..draws {
            let sel = draw_coefficients(&buf, &cfg, &mut r).unwrap();
            selected += sel.iter().filter(|&&s| s).count() as u64;
            for (c, s) in counts.iter_mut().zip(sel) {
                *c += s as u32;
            }
        }
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        // Expected selections before redraw sum to one; the redraw adds a little.
        let mean = selected as f64 / draws as f64;
        assert!(mean > 1.0 && mean < 1.6, "mean selected {mean}");
    }

    #[test]
    fn transmission_gating() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let empty = InputBuffer::new();
        let dec = DecoderState::new(4);
        assert!(make_transmission(&empty, &dec, &StrategyConfig::reference(), &mut r).is_none());

        let (buf, dec) = clean_buffer(1, &mut r);
        assert_eq!(dec.rank(), 1);
        assert!(
            make_transmission(&buf, &dec, &StrategyConfig::age_based(1.0, 2), &mut r).is_none()
        );

        let (buf, dec) = clean_buffer(5, &mut r);
        let out =
            make_transmission(&buf, &dec, &StrategyConfig::age_based(1.0, 2), &mut r).unwrap();
        assert!(!out.taint);
    }

    #[test]
    fn clean_buffers_never_emit_taint() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let cfgs = [
            StrategyConfig::reference(),
            StrategyConfig::age_based(1.0, 1),
            StrategyConfig::age_based(0.5, 2).with_orientation(Orientation::AgeRank),
        ];
        for trial in 0..10_000 {
            let n = 1 + trial % 12;
            let (buf, dec) = clean_buffer(n, &mut r);
            let cfg = &cfgs[trial % cfgs.len()];
            if let Some(p) = make_transmission(&buf, &dec, cfg, &mut r) {
                assert!(!p.taint);
            }
        }
    }

    proptest! {
        #[test]
        fn age_based_probabilities_monotone(alpha in 0.01f64..4.0, r in 1usize..200) {
            for orientation in [Orientation::Literal, Orientation::AgeRank] {
                let cfg = StrategyConfig::age_based(alpha, 1).with_orientation(orientation);
                let probs: Vec<f64> = (1..=r).map(|i| slot_probability(&cfg, i, r).unwrap()).collect();
                for w in probs.windows(2) {
                    prop_assert!(w[0] >= w[1] - 1e-15);
                }
            }
        }

        #[test]
        fn output_is_xor_of_selection(seed in any::<u64>(), n in 1usize..12, poison in 0usize..12) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let gen = Generation::random(0, 10, 6, &mut r);
            let mut pkts: Vec<CodedPacket> = (0..n).map(|_| encode_source(&gen, &mut r).unwrap()).collect();
            if poison < n {
                pkts[poison] = forge_packet(0, 10, 6, &mut r).unwrap();
            }
            let buf: InputBuffer = pkts.iter().cloned().collect();
            for cfg in [StrategyConfig::reference(), StrategyConfig::age_based(1.0, 1)] {
                let sel = draw_coefficients(&buf, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let mut dec = DecoderState::new(10);
                dec.insert(&pkts[0]).unwrap();
                let out = make_transmission(&buf, &dec, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let mut coeffs = crate::codec::EncodingVector::zero(10);
                let mut taint = false;
                for (p, &s) in pkts.iter().zip(&sel) {
                    if s {
                        coeffs.xor_assign(&p.coeffs);
                        taint |= p.taint;
                    }
                }
                prop_assert_eq!(out.coeffs, coeffs);
                prop_assert_eq!(out.taint, taint);
            }
        }
    }
}
