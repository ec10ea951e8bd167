//! Closed-form pollution propagation model for a reference node.
//!
//! A reference node has `n` uploaders, `x` of them malicious. Time advances
//! in rounds; in every round each uploader delivers one packet, so after `i`
//! rounds the node holds `i*n` packets of which `i*x` came from malicious
//! uploaders. The node recombines its buffer once per round, drawing each
//! packet with probability `p_r`, and needs `ceil(k/n) + 1` rounds to
//! collect a generation.

use statrs::function::factorial::ln_binomial;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Total nodes.
    pub nodes: u64,
    /// Malicious nodes.
    pub malicious: u64,
    /// Uploaders per reference node.
    pub uploaders: u64,
    /// Generation size.
    pub k: u64,
    pub p_poll: f64,
    pub p_r: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParam(m));
        if self.malicious > self.nodes {
            return bad(format!("N_m={} exceeds N={}", self.malicious, self.nodes));
        }
        if self.uploaders < 1 || self.uploaders + 1 > self.nodes {
            return bad(format!("n={} must lie in 1..=N-1", self.uploaders));
        }
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        check_probability("p_poll", self.p_poll)?;
        if !(self.p_r > 0.0 && self.p_r < 1.0) {
            return bad(format!("p_r must lie in (0, 1), got {}", self.p_r));
        }
        Ok(())
    }

    /// Rounds needed to collect a generation, `ceil(k/n) + 1`.
    pub fn rounds(&self) -> u64 {
        self.k.div_ceil(self.uploaders) + 1
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::InvalidParam(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

/// Binomial pmf evaluated in the log domain, with exact handling of p in {0, 1}.
fn binomial_pmf(trials: u64, successes: u64, p: f64) -> f64 {
    if successes > trials {
        return 0.0;
    }
    if p == 0.0 {
        return if successes == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if successes == trials { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(trials, successes)
        + successes as f64 * p.ln()
        + (trials - successes) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Probability that `b` of the `i*x` packets from malicious uploaders are polluted.
pub fn p_p(i: u64, x: u64, b: u64, p_poll: f64) -> Result<f64, ModelError> {
    check_probability("p_poll", p_poll)?;
    if i < 1 {
        return Err(ModelError::InvalidParam(
            "round index must be at least 1".into(),
        ));
    }
    Ok(binomial_pmf(i * x, b, p_poll))
}

/// Probability that the packet recombined in round `i` is polluted, given `x`
/// malicious uploaders.
pub fn p_rp(i: u64, x: u64, params: &ModelParams) -> Result<f64, ModelError> {
    params.validate()?;
    if i < 1 {
        return Err(ModelError::InvalidParam(
            "round index must be at least 1".into(),
        ));
    }
    if x > params.uploaders {
        return Err(ModelError::InvalidParam(format!(
            "x={x} exceeds n={}",
            params.uploaders
        )));
    }
    let trials = i * x;
    let keep = 1.0 - params.p_r;
    let clean: f64 = (0..=trials)
        .map(|b| binomial_pmf(trials, b, params.p_poll) * keep.powi(b as i32))
        .sum();
    Ok((1.0 - clean).clamp(0.0, 1.0))
}

/// Hypergeometric probability that `x` of `n` uploaders drawn from `N` nodes
/// are among the `N_m` malicious ones.
pub fn p_mn(nodes: u64, malicious: u64, n: u64, x: u64) -> Result<f64, ModelError> {
    if malicious > nodes || n > nodes {
        return Err(ModelError::InvalidParam(format!(
            "need N_m <= N and n <= N (N={nodes}, N_m={malicious}, n={n})"
        )));
    }
    if x > n || x > malicious || n - x > nodes - malicious {
        return Ok(0.0);
    }
    let ln =
        ln_binomial(malicious, x) + ln_binomial(nodes - malicious, n - x) - ln_binomial(nodes, n);
    Ok(ln.exp())
}

/// Probability that the packet forwarded in round `i` is polluted, averaged
/// over the malicious-uploader count.
pub fn p_gp(i: u64, params: &ModelParams) -> Result<f64, ModelError> {
    params.validate()?;
    let mut sum = 0.0;
    for x in 1..=params.uploaders.min(params.malicious) {
        let w = p_mn(params.nodes, params.malicious, params.uploaders, x)?;
        if w > 0.0 {
            sum += w * p_rp(i, x, params)?;
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Probability of forwarding only clean packets over every round needed to
/// collect the generation: `prod_i (1 - p_gp(i))`.
pub fn p_fclean(params: &ModelParams) -> Result<f64, ModelError> {
    params.validate()?;
    let mut prod = 1.0;
    for i in 1..=params.rounds() {
        prod *= 1.0 - p_gp(i, params)?;
    }
    Ok(prod.clamp(0.0, 1.0))
}

/// Probability of collecting a generation with no polluted packet.
pub fn p_rclean(params: &ModelParams) -> Result<f64, ModelError> {
    params.validate()?;
    let rounds = params.rounds();
    let mut sum = 0.0;
    for x in 0..=params.uploaders.min(params.malicious) {
        let w = p_mn(params.nodes, params.malicious, params.uploaders, x)?;
        sum += w * p_p(rounds, x, 0, params.p_poll)?;
    }
    Ok(sum.clamp(0.0, 1.0))
}
