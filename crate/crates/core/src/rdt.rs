//! Rate-diversity tradeoffs for fixed constellations of `2^M` points under
//! causal and predictive mismatched CSIT.

use crate::model::{singleton_exponent, snapped_ceil, ChannelConfig, ExtReal, ModelError};

/// Rate-dependent quantities shared by both closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdtParams {
    pub rate: f64,
    pub bits: u32,
    /// `1 + floor(B (nt - R/M))`.
    pub d_s: usize,
    /// `floor(d_s / nt)`.
    pub b_hat: usize,
}

impl RdtParams {
    pub fn new(rate: f64, bits: u32, cfg: &ChannelConfig) -> Result<Self, ModelError> {
        let d_s = singleton_exponent(rate, bits, cfg)?;
        Ok(RdtParams { rate, bits, d_s, b_hat: d_s / cfg.nt })
    }
}

fn check_delta(delta: ExtReal) -> Result<(), ModelError> {
    match delta {
        ExtReal::Finite(d) if d.is_nan() || d < 0.0 => Err(ModelError::NegativeDelta(d)),
        _ => Ok(()),
    }
}

/// Power-exponent sequence `a_1..=a_len` of the causal closed form:
/// `a_b = 1` for `b <= u`, then `a_b = a_{b-1} + nt nr min(delta, a_{b-u})`.
pub fn causal_sequence(len: usize, delta: ExtReal, u: usize, cfg: &ChannelConfig) -> Vec<f64> {
    let g = (cfg.nt * cfg.nr) as f64;
    let mut a: Vec<f64> = Vec::with_capacity(len);
    for b in 1..=len {
        let v = if b <= u { 1.0 } else { a[b - 2] + g * delta.min_with(a[b - u - 1]) };
        a.push(v);
    }
    a
}

/// Optimal RDT with causal CSIT delayed by `u >= 1` blocks. Always finite.
pub fn rdt_causal(rate: f64, bits: u32, delta: ExtReal, u: usize, cfg: &ChannelConfig) -> Result<f64, ModelError> {
    if u == 0 {
        return Err(ModelError::DelayOutOfRange { u, blocks: cfg.blocks });
    }
    check_delta(delta)?;
    let p = RdtParams::new(rate, bits, cfg)?;
    let a = causal_sequence(p.b_hat + 1, delta, u, cfg);
    let full: f64 = a[..p.b_hat].iter().sum();
    let tail = (p.d_s - p.b_hat * cfg.nt) as f64 * a[p.b_hat];
    Ok(cfg.nr as f64 * (cfg.nt as f64 * full + tail))
}

/// Quality exponent at and beyond which [`rdt_causal`] stops improving:
/// `a_{ceil(d_S/nt) - u}` computed with perfect CSIT. `None` when CSIT
/// gives no gain at this rate (`d_S <= u nt`).
pub fn causal_delta_threshold(rate: f64, bits: u32, u: usize, cfg: &ChannelConfig) -> Result<Option<f64>, ModelError> {
    let p = RdtParams::new(rate, bits, cfg)?;
    let top = snapped_ceil(p.d_s as f64 / cfg.nt as f64) as usize;
    if top <= u {
        return Ok(None);
    }
    let a = causal_sequence(top - u, ExtReal::Infinite, u, cfg);
    Ok(a.last().copied())
}

/// Whether causal CSIT beats the Singleton bound at this rate, i.e.
/// `d_S(R) > u nt`.
pub fn causal_csit_helps(rate: f64, bits: u32, u: usize, cfg: &ChannelConfig) -> Result<bool, ModelError> {
    Ok(RdtParams::new(rate, bits, cfg)?.d_s > u * cfg.nt)
}

/// Closed-form RDT with predictive CSIT covering `t` future blocks. Perfect
/// CSIT gives unbounded diversity.
///
/// For `t < b_hat` this is the value of one feasible point of the underlying
/// exponent program, which fades the earliest blocks. With `nt > 1` or `t > 0`
/// the program minimum can be lower.
pub fn rdt_predictive(rate: f64, bits: u32, delta: ExtReal, t: usize, cfg: &ChannelConfig) -> Result<ExtReal, ModelError> {
    check_delta(delta)?;
    let p = RdtParams::new(rate, bits, cfg)?;
    let d = match delta {
        ExtReal::Infinite => return Ok(ExtReal::Infinite),
        ExtReal::Finite(d) => d,
    };
    if t >= p.b_hat {
        return Ok(ExtReal::Finite(predictive_saturated(&p, d, cfg)));
    }
    Ok(ExtReal::Finite(predictive_partial(&p, d, t, cfg)))
}

fn predictive_saturated(p: &RdtParams, delta: f64, cfg: &ChannelConfig) -> f64 {
    let (nr, ds) = (cfg.nr as f64, p.d_s as f64);
    nr * ds * (1.0 + nr * ds * delta)
}

fn predictive_partial(p: &RdtParams, delta: f64, t: usize, cfg: &ChannelConfig) -> f64 {
    let (nt, nr, ds) = (cfg.nt as f64, cfg.nr as f64, p.d_s as f64);
    let gap = p.b_hat as f64 - t as f64;
    let tri = gap * (p.b_hat + t + 1) as f64 / 2.0 * nt * nt;
    nr * (ds + nr * delta * (tri + ds * (ds - nt * gap)))
}

/// Rates where `d_S` changes, in increasing order: `R = M (nt - j / B)` for
/// `j = 1..B nt - 1`.
pub fn singleton_breakpoints(bits: u32, cfg: &ChannelConfig) -> Vec<f64> {
    let total = cfg.blocks * cfg.nt;
    (1..total)
        .rev()
        .map(|j| bits as f64 * (cfg.nt as f64 - j as f64 / cfg.blocks as f64))
        .collect()
}
