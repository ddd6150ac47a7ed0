//! Gaussian-input DMT under causal and predictive mismatched CSIT.
//!
//! Both programs are minimized separately on each of the `(m+1)^B` regions
//! indexed by how many CSIT eigenvalue exponents of each block fall below the
//! quality exponent `delta`; the DMT is the smallest regional optimum.

use thiserror::Error;

use crate::lp::{self, AffineExpr, Bounds, LpError, LpProblem, ProbeError, ProbeReport, Relation};
use crate::model::{snapped_floor, ChannelConfig, ExtReal, ModelError};

/// Default open-constraint offsets used by the discontinuity probes.
pub const PROBE_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

const SATURATION_TOL: f64 = 1e-6;
const SATURATION_MAX_DOUBLINGS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmtError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("delta must be finite to build a regional program")]
    InfiniteDelta,
    #[error("region index has length {got}, expected {expected} with entries at most {m}")]
    BadRegion { got: usize, expected: usize, m: usize },
    #[error("no region admits a feasible point")]
    NoFeasibleRegion,
    #[error("causal DMT did not saturate before delta = 2^{0}")]
    NotSaturated(u32),
    #[error("closed form needs a vector channel with r in [0, 1], n >= 1, u >= 1, B >= 1")]
    VectorDomain,
}

/// Per-block count of CSIT eigenvalue exponents below `delta`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionIndex {
    pub k: Vec<usize>,
}

impl RegionIndex {
    /// All `(m+1)^B` region indices in lexicographic order.
    pub fn all(blocks: usize, m: usize) -> impl Iterator<Item = RegionIndex> {
        let total = (m + 1).pow(blocks as u32);
        (0..total).map(move |mut code| {
            let mut k = vec![0; blocks];
            for slot in k.iter_mut().rev() {
                *slot = code % (m + 1);
                code /= m + 1;
            }
            RegionIndex { k }
        })
    }

    fn check(&self, cfg: &ChannelConfig) -> Result<(), DmtError> {
        if self.k.len() != cfg.blocks || self.k.iter().any(|&k| k > cfg.m()) {
            return Err(DmtError::BadRegion { got: self.k.len(), expected: cfg.blocks, m: cfg.m() });
        }
        Ok(())
    }
}

/// Exponents at a regional optimum. Rows are blocks, columns eigenvalue
/// indices in the ordering used by the programs (`i = 1` is the largest
/// exponent, i.e. the weakest eigenvalue).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVars {
    pub alpha_bar: Vec<Vec<f64>>,
    pub alpha_hat: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionalOptimum {
    pub value: f64,
    pub region: RegionIndex,
    pub vars: ExponentVars,
}

fn var(b: usize, i: usize, m: usize) -> usize {
    b * m + i
}

fn check_finite_delta(delta: f64) -> Result<(), DmtError> {
    if !delta.is_finite() {
        return Err(DmtError::InfiniteDelta);
    }
    if delta < 0.0 {
        return Err(ModelError::NegativeDelta(delta).into());
    }
    Ok(())
}

fn check_delay(u: usize, cfg: &ChannelConfig) -> Result<(), DmtError> {
    if u == 0 || u > cfg.blocks {
        return Err(ModelError::DelayOutOfRange { u, blocks: cfg.blocks }.into());
    }
    Ok(())
}

fn check_horizon(t: usize, cfg: &ChannelConfig) -> Result<(), DmtError> {
    if t >= cfg.blocks {
        return Err(ModelError::HorizonOutOfRange { t, max: cfg.blocks - 1 }.into());
    }
    Ok(())
}

/// Power exponent of block `b` (0-based) as an affine function of the
/// regional variables.
fn causal_power(b: usize, k: &RegionIndex, delta: f64, u: usize, cfg: &ChannelConfig) -> AffineExpr {
    let (m, n) = (cfg.m(), cfg.n());
    let known = (b + 1).saturating_sub(u);
    let mut p = AffineExpr::constant(1.0 + (n * m * known) as f64 * delta);
    for bp in 0..known {
        for i in (m - k.k[bp])..m {
            p.add_term(var(bp, i, m), cfg.eigen_weight(i + 1));
        }
    }
    p
}

fn causal_program(k: &RegionIndex, budget: f64, delta: f64, u: usize, cfg: &ChannelConfig) -> LpProblem {
    let (m, n, nb) = (cfg.m(), cfg.n(), cfg.blocks);
    let mut base = LpProblem::new(nb * m);
    base.offset = (nb * n * m) as f64 * delta;
    for b in 0..nb {
        for i in 0..m {
            base.objective[var(b, i, m)] = cfg.eigen_weight(i + 1);
            base.bounds[var(b, i, m)] =
                if i < m - k.k[b] { Bounds::NONNEG } else { Bounds::new(-delta, 0.0) };
        }
        for i in 0..m.saturating_sub(1) {
            let expr = AffineExpr::constant(0.0).term(var(b, i, m), 1.0).term(var(b, i + 1, m), -1.0);
            base.add_affine(&expr, Relation::Ge, 0.0);
        }
    }
    let mut terms = Vec::with_capacity(nb * m);
    for b in 0..nb {
        let p = causal_power(b, k, delta, u, cfg);
        for i in 0..m {
            let mut e = p.clone();
            e.constant -= delta;
            e.add_term(var(b, i, m), -1.0);
            terms.push(e);
        }
    }
    lp::epigraph_transform(&terms, budget, &base)
}

/// Regional program for causal CSIT with delay `u` and finite quality `delta`,
/// with the outage constraint closed at `B r`.
pub fn build_causal_lp(k: &RegionIndex, r: f64, delta: f64, u: usize, cfg: &ChannelConfig) -> Result<LpProblem, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_delay(u, cfg)?;
    k.check(cfg)?;
    Ok(causal_program(k, cfg.blocks as f64 * r, delta, u, cfg))
}

fn causal_vars(k: &RegionIndex, point: &[f64], delta: f64, u: usize, cfg: &ChannelConfig) -> ExponentVars {
    let m = cfg.m();
    let alpha_bar: Vec<Vec<f64>> = (0..cfg.blocks).map(|b| point[b * m..(b + 1) * m].to_vec()).collect();
    let alpha_hat = alpha_bar
        .iter()
        .enumerate()
        .map(|(b, row)| {
            row.iter()
                .enumerate()
                .map(|(i, &a)| if i < m - k.k[b] { delta } else { a + delta })
                .collect()
        })
        .collect();
    let p = (0..cfg.blocks).map(|b| causal_power(b, k, delta, u, cfg).eval(point)).collect();
    ExponentVars { alpha_bar, alpha_hat, p }
}

fn causal_min(budget: f64, delta: f64, u: usize, cfg: &ChannelConfig) -> Result<Option<RegionalOptimum>, DmtError> {
    let mut best: Option<RegionalOptimum> = None;
    for k in RegionIndex::all(cfg.blocks, cfg.m()) {
        let sol = lp::solve_lp(&causal_program(&k, budget, delta, u, cfg))?;
        if let Some(v) = sol.optimal_value() {
            if best.as_ref().map_or(true, |b| v < b.value) {
                let vars = causal_vars(&k, &sol.point, delta, u, cfg);
                best = Some(RegionalOptimum { value: v, region: k, vars });
            }
        }
    }
    Ok(best)
}

/// Smallest regional optimum for finite `delta`, with its region and exponents.
pub fn solve_causal(r: f64, delta: f64, u: usize, cfg: &ChannelConfig) -> Result<RegionalOptimum, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_delay(u, cfg)?;
    causal_min(cfg.blocks as f64 * r, delta, u, cfg)?.ok_or(DmtError::NoFeasibleRegion)
}

/// Result of the doubling search for the causal quality exponent beyond
/// which the DMT no longer changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub delta: f64,
    pub value: f64,
}

/// Doubles `delta` from 1 until two successive doublings change the DMT by
/// less than `1e-6`.
pub fn causal_saturation(r: f64, u: usize, cfg: &ChannelConfig) -> Result<Saturation, DmtError> {
    let mut history: Vec<f64> = Vec::new();
    for j in 0..=SATURATION_MAX_DOUBLINGS {
        let delta = f64::powi(2.0, j as i32);
        let v = solve_causal(r, delta, u, cfg)?.value;
        history.push(v);
        if let [.., a, b, c] = history.as_slice() {
            if (c - b).abs() < SATURATION_TOL && (b - a).abs() < SATURATION_TOL {
                return Ok(Saturation { delta: delta / 4.0, value: *c });
            }
        }
    }
    Err(DmtError::NotSaturated(SATURATION_MAX_DOUBLINGS))
}

/// Achievable DMT with causal CSIT delayed by `u` blocks.
pub fn dmt_causal(r: f64, delta: ExtReal, u: usize, cfg: &ChannelConfig) -> Result<f64, DmtError> {
    match delta {
        ExtReal::Finite(d) => solve_causal(r, d, u, cfg).map(|o| o.value),
        ExtReal::Infinite => causal_saturation(r, u, cfg).map(|s| s.value),
    }
}

/// Compares the causal DMT with the closed constraint against the limit of
/// open constraints `< B r`. At `r = 0` the open program is empty and the
/// probe reports [`ProbeError::Infeasible`].
pub fn probe_causal(r: f64, delta: f64, u: usize, cfg: &ChannelConfig, eps: &[f64]) -> Result<ProbeReport, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_delay(u, cfg)?;
    let report = lp::probe_values(
        |budget| {
            let best = causal_min(budget, delta, u, cfg).map_err(|e| match e {
                DmtError::Lp(l) => ProbeError::Lp(l),
                other => panic!("unexpected error in probe: {other}"),
            })?;
            Ok(best.map(|o| o.value))
        },
        cfg.blocks as f64 * r,
        eps,
    )?;
    Ok(report)
}

/// The `a*` sequence of the vector-channel closed form, `B - floor(B r)`
/// entries long. Empty when `B r >= B`.
pub fn vector_recursion(r: f64, delta: ExtReal, u: usize, n: usize, blocks: usize) -> Vec<f64> {
    let br = blocks as f64 * r;
    let fl = snapped_floor(br);
    let len = blocks.saturating_sub(fl as usize);
    let mut a: Vec<f64> = Vec::with_capacity(len);
    for i in 1..=len {
        let v = if i == 1 {
            1.0 - (br - fl).max(0.0)
        } else if i <= u {
            1.0
        } else {
            1.0 + n as f64 * a[..i - u].iter().map(|&x| delta.min_with(x)).sum::<f64>()
        };
        a.push(v);
    }
    a
}

/// DMT of a vector channel (`m = 1`, `n = max(nt, nr)`) with causal CSIT.
/// The `a*` sequence follows the recursion that agrees with the regional
/// programs; see [`vector_recursion`].
pub fn dmt_causal_vector(r: f64, delta: ExtReal, u: usize, n: usize, blocks: usize) -> Result<f64, DmtError> {
    if !(0.0..=1.0).contains(&r) || n == 0 || u == 0 || blocks == 0 {
        return Err(DmtError::VectorDomain);
    }
    if let ExtReal::Finite(d) = delta {
        if d.is_nan() || d < 0.0 {
            return Err(ModelError::NegativeDelta(d).into());
        }
    }
    let br = blocks as f64 * r;
    if blocks as f64 - u as f64 - br <= 1e-12 {
        return Ok(n as f64 * (blocks as f64 - br));
    }
    let a = vector_recursion(r, delta, u, n, blocks);
    Ok(n as f64 * a.iter().sum::<f64>())
}

/// Quality exponent beyond which the vector-channel causal DMT stops
/// improving: `a*_{B - floor(B r) - u}` evaluated with perfect CSIT. `None`
/// when CSIT gives no gain at this `r`.
pub fn vector_delta_threshold(r: f64, u: usize, n: usize, blocks: usize) -> Option<f64> {
    let a = vector_recursion(r, ExtReal::Infinite, u, n, blocks);
    let idx = a.len().checked_sub(u)?;
    (idx >= 1).then(|| a[idx - 1])
}

fn predictive_power(b: usize, k: &RegionIndex, delta: f64, t: usize, cfg: &ChannelConfig) -> f64 {
    let (m, n) = (cfg.m(), cfg.n());
    let last = (b + 1 + t).min(cfg.blocks);
    1.0 + delta * (0..last).map(|bp| ((n - k.k[bp]) * (m - k.k[bp])) as f64).sum::<f64>()
}

fn predictive_program(k: &RegionIndex, budget: f64, delta: f64, t: usize, cfg: &ChannelConfig) -> LpProblem {
    let (m, n, nb) = (cfg.m(), cfg.n(), cfg.blocks);
    let mut index = Vec::with_capacity(nb);
    let mut count = 0;
    for b in 0..nb {
        index.push(count);
        count += m - k.k[b];
    }
    let mut base = LpProblem::new(count);
    let mut fixed = 0.0;
    let mut rhs = budget;
    let mut terms = Vec::new();
    for b in 0..nb {
        let free = m - k.k[b];
        fixed += delta * ((n - k.k[b]) * free) as f64;
        let p = predictive_power(b, k, delta, t, cfg);
        rhs -= k.k[b] as f64 * p;
        for i in 0..free {
            base.objective[index[b] + i] = cfg.eigen_weight(i + 1);
            terms.push(AffineExpr::constant(p - delta).term(index[b] + i, -1.0));
        }
        for i in 0..free.saturating_sub(1) {
            let expr = AffineExpr::constant(0.0).term(index[b] + i, 1.0).term(index[b] + i + 1, -1.0);
            base.add_affine(&expr, Relation::Ge, 0.0);
        }
    }
    base.offset = fixed;
    lp::epigraph_transform(&terms, rhs, &base)
}

/// Regional program for predictive CSIT with horizon `t` and finite `delta`.
/// Blocks with `k_b = m` contribute no variables; their share of the outage
/// constraint is the constant `k_b p_b(k)`.
pub fn build_predictive_lp(k: &RegionIndex, r: f64, delta: f64, t: usize, cfg: &ChannelConfig) -> Result<LpProblem, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_horizon(t, cfg)?;
    k.check(cfg)?;
    Ok(predictive_program(k, cfg.blocks as f64 * r, delta, t, cfg))
}

fn predictive_min(budget: f64, delta: f64, t: usize, cfg: &ChannelConfig) -> Result<Option<RegionalOptimum>, DmtError> {
    let m = cfg.m();
    let mut best: Option<RegionalOptimum> = None;
    for k in RegionIndex::all(cfg.blocks, m) {
        let sol = lp::solve_lp(&predictive_program(&k, budget, delta, t, cfg))?;
        let Some(v) = sol.optimal_value() else { continue };
        if best.as_ref().map_or(true, |b| v < b.value) {
            let mut alpha_bar = Vec::with_capacity(cfg.blocks);
            let mut alpha_hat = Vec::with_capacity(cfg.blocks);
            let mut at = 0;
            for b in 0..cfg.blocks {
                let free = m - k.k[b];
                let mut row_bar = sol.point[at..at + free].to_vec();
                let mut row_hat = vec![delta; free];
                row_bar.resize(m, -delta);
                row_hat.resize(m, 0.0);
                at += free;
                alpha_bar.push(row_bar);
                alpha_hat.push(row_hat);
            }
            let p = (0..cfg.blocks).map(|b| predictive_power(b, &k, delta, t, cfg)).collect();
            best = Some(RegionalOptimum { value: v, region: k, vars: ExponentVars { alpha_bar, alpha_hat, p } });
        }
    }
    Ok(best)
}

/// Smallest regional optimum for predictive CSIT and finite `delta`.
pub fn solve_predictive(r: f64, delta: f64, t: usize, cfg: &ChannelConfig) -> Result<RegionalOptimum, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_horizon(t, cfg)?;
    predictive_min(cfg.blocks as f64 * r, delta, t, cfg)?.ok_or(DmtError::NoFeasibleRegion)
}

/// Achievable DMT with predictive CSIT covering `t` future blocks. Perfect
/// CSIT (`delta = inf`) gives unbounded diversity for every `r < m`.
pub fn dmt_predictive(r: f64, delta: ExtReal, t: usize, cfg: &ChannelConfig) -> Result<ExtReal, DmtError> {
    match delta {
        ExtReal::Finite(d) => solve_predictive(r, d, t, cfg).map(|o| ExtReal::Finite(o.value)),
        ExtReal::Infinite => {
            cfg.check_multiplexing(r)?;
            check_horizon(t, cfg)?;
            if r >= cfg.m() as f64 - 1e-12 {
                Ok(ExtReal::ZERO)
            } else {
                Ok(ExtReal::Infinite)
            }
        }
    }
}

/// Predictive counterpart of [`probe_causal`].
pub fn probe_predictive(r: f64, delta: f64, t: usize, cfg: &ChannelConfig, eps: &[f64]) -> Result<ProbeReport, DmtError> {
    cfg.check_multiplexing(r)?;
    check_finite_delta(delta)?;
    check_horizon(t, cfg)?;
    let report = lp::probe_values(
        |budget| {
            let best = predictive_min(budget, delta, t, cfg).map_err(|e| match e {
                DmtError::Lp(l) => ProbeError::Lp(l),
                other => panic!("unexpected error in probe: {other}"),
            })?;
            Ok(best.map(|o| o.value))
        },
        cfg.blocks as f64 * r,
        eps,
    )?;
    Ok(report)
}
