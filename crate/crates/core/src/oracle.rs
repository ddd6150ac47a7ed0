//! Brute-force reference values. The exponent programs here are assembled
//! directly from their definitions and share no code with `dmt` or `rdt`, so
//! agreement between the two is meaningful.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ChannelConfig, ModelError};

pub const DEFAULT_CAP: u64 = 100_000_000;

/// Slack used when comparing a grid point's constraint value to the budget,
/// absorbing rounding in sums of grid coordinates.
pub const FEAS_SLACK: f64 = 1e-9;

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: u128, cap: u64 },
    #[error("axis {0} needs step > 0 and hi >= lo")]
    BadAxis(usize),
    #[error("program expects {expected} variables, grid has {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        Axis { lo, hi, step }
    }

    /// Axis from `lo` up to the first grid value at or above `hi`.
    pub fn covering(lo: f64, hi: f64, step: f64) -> Self {
        let n = ((hi - lo) / step - 1e-9).ceil().max(0.0);
        Axis { lo, hi: lo + n * step, step }
    }

    pub fn count(&self) -> u64 {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as u64 + 1
    }

    pub fn value(&self, i: u64) -> f64 {
        self.lo + i as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub budget: f64,
    pub cap: u64,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>, budget: f64) -> Self {
        GridSpec { axes, budget, cap: DEFAULT_CAP }
    }

    pub fn points(&self) -> u128 {
        self.axes.iter().map(|a| a.count() as u128).product()
    }
}

/// A piecewise-linear program `min objective(x)` s.t. `constraint(x) <= budget`.
/// Returning NaN or `+inf` from either marks the point infeasible.
pub trait GridProgram: Sync {
    fn arity(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn constraint(&self, x: &[f64]) -> f64;
}

/// Adapter for closures.
pub struct FnProgram<F, G> {
    pub arity: usize,
    pub objective: F,
    pub constraint: G,
}

impl<F, G> GridProgram for FnProgram<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    fn arity(&self) -> usize {
        self.arity
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }
    fn constraint(&self, x: &[f64]) -> f64 {
        (self.constraint)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome {
    Min { value: f64, argmin: Vec<f64> },
    InfeasibleOnGrid,
}

impl GridOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            GridOutcome::Min { value, .. } => Some(*value),
            GridOutcome::InfeasibleOnGrid => None,
        }
    }
}

/// Exhaustive scan of the grid. Ties go to the lowest flat index (last axis
/// fastest), so the result does not depend on how the scan is partitioned.
pub fn brute_force_min<P: GridProgram>(g: &GridSpec, prog: &P) -> Result<GridOutcome, OracleError> {
    if prog.arity() != g.axes.len() {
        return Err(OracleError::Arity { expected: prog.arity(), got: g.axes.len() });
    }
    for (i, a) in g.axes.iter().enumerate() {
        if !(a.step > 0.0) || !(a.hi >= a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
            return Err(OracleError::BadAxis(i));
        }
    }
    let total = g.points();
    if total > g.cap as u128 {
        return Err(OracleError::GridTooLarge { points: total, cap: g.cap });
    }
    let total = total as u64;
    let lens: Vec<u64> = g.axes.iter().map(Axis::count).collect();
    let limit = g.budget + FEAS_SLACK * (1.0 + g.budget.abs());
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut digits = vec![0u64; lens.len()];
            let mut rem = start;
            for d in (0..lens.len()).rev() {
                digits[d] = rem % lens[d];
                rem /= lens[d];
            }
            let mut x: Vec<f64> = digits.iter().zip(&g.axes).map(|(&i, a)| a.value(i)).collect();
            let mut best: Option<(f64, u64)> = None;
            for idx in start..end {
                let con = prog.constraint(&x);
                if con <= limit {
                    let v = prog.objective(&x);
                    if v.is_finite() && best.map_or(true, |(b, _)| v < b) {
                        best = Some((v, idx));
                    }
                }
                for d in (0..lens.len()).rev() {
                    digits[d] += 1;
                    if digits[d] < lens[d] {
                        x[d] = g.axes[d].value(digits[d]);
                        break;
                    }
                    digits[d] = 0;
                    x[d] = g.axes[d].lo;
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x }),
                (x, None) => x,
                (None, y) => y,
            },
        );
    Ok(match best {
        None => GridOutcome::InfeasibleOnGrid,
        Some((value, mut idx)) => {
            let mut argmin = vec![0.0; lens.len()];
            for d in (0..lens.len()).rev() {
                argmin[d] = g.axes[d].value(idx % lens[d]);
                idx /= lens[d];
            }
            GridOutcome::Min { value, argmin }
        }
    })
}

/// Outage probability of a SISO Rayleigh channel at SNR `p` and rate `rate`.
pub fn exact_outage_rayleigh_siso(p: f64, rate: f64) -> f64 {
    -(-(rate.exp2() - 1.0) / p).exp_m1()
}

fn weight(i: usize, n: usize, m: usize) -> f64 {
    (2 * i + 1 + n - m) as f64
}

/// Causal-CSIT DMT exponent program written over the signed normalized
/// exponents directly: each `x[b m + i]` lies in `[-delta, inf)`, entries of a
/// block are nonincreasing in `i`, and the negative entries of past blocks
/// feed the power exponent. The sign pattern plays the role of the region.
pub struct CausalDmtProgram {
    pub cfg: ChannelConfig,
    pub u: usize,
    pub delta: f64,
}

impl CausalDmtProgram {
    fn power(&self, b: usize, x: &[f64]) -> f64 {
        let (m, n) = (self.cfg.m(), self.cfg.n());
        let mut p = 1.0;
        for bp in 0..(b + 1).saturating_sub(self.u) {
            p += (n * m) as f64 * self.delta;
            for i in 0..m {
                p += weight(i, n, m) * x[bp * m + i].min(0.0);
            }
        }
        p
    }

    /// Per-block grid axes: no exponent benefits from exceeding the largest
    /// power exponent the block can see minus `delta`.
    pub fn axes(&self, step: f64) -> Vec<Axis> {
        let (m, n) = (self.cfg.m(), self.cfg.n());
        let mut axes = Vec::new();
        for b in 0..self.cfg.blocks {
            let known = (b + 1).saturating_sub(self.u);
            let hi = (1.0 + (n * m * known) as f64 * self.delta - self.delta).max(0.0);
            for _ in 0..m {
                axes.push(Axis::covering(-self.delta, hi, step));
            }
        }
        axes
    }
}

impl GridProgram for CausalDmtProgram {
    fn arity(&self) -> usize {
        self.cfg.blocks * self.cfg.m()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (m, n) = (self.cfg.m(), self.cfg.n());
        let mut v = (self.cfg.blocks * n * m) as f64 * self.delta;
        for b in 0..self.cfg.blocks {
            for i in 0..m {
                v += weight(i, n, m) * x[b * m + i];
            }
        }
        v
    }

    fn constraint(&self, x: &[f64]) -> f64 {
        let m = self.cfg.m();
        let mut s = 0.0;
        for b in 0..self.cfg.blocks {
            let row = &x[b * m..(b + 1) * m];
            if row.windows(2).any(|w| w[0] < w[1]) || row.iter().any(|&a| a < -self.delta - 1e-12) {
                return f64::INFINITY;
            }
            let p = self.power(b, x);
            s += row.iter().map(|&a| (p - self.delta - a).max(0.0)).sum::<f64>();
        }
        s
    }
}

/// Predictive-CSIT DMT exponent program for one region `k`. Variables are
/// the nonnegative exponents of each block's `m - k_b` strong directions,
/// stored block after block.
pub struct PredictiveDmtProgram {
    pub cfg: ChannelConfig,
    pub t: usize,
    pub delta: f64,
    pub k: Vec<usize>,
}

impl PredictiveDmtProgram {
    fn power(&self, b: usize) -> f64 {
        let (m, n) = (self.cfg.m(), self.cfg.n());
        let upto = (b + 1 + self.t).min(self.cfg.blocks);
        1.0 + self.delta * self.k[..upto].iter().map(|&k| ((n - k) * (m - k)) as f64).sum::<f64>()
    }

    /// Constant part of the outage constraint contributed by the weak
    /// directions.
    pub fn fixed_load(&self) -> f64 {
        (0..self.cfg.blocks).map(|b| self.k[b] as f64 * self.power(b)).sum()
    }

    pub fn axes(&self, step: f64) -> Vec<Axis> {
        let m = self.cfg.m();
        let mut axes = Vec::new();
        for b in 0..self.cfg.blocks {
            let hi = (self.power(b) - self.delta).max(0.0);
            for _ in 0..m - self.k[b] {
                axes.push(Axis::covering(0.0, hi, step));
            }
        }
        axes
    }
}

impl GridProgram for PredictiveDmtProgram {
    fn arity(&self) -> usize {
        self.k.iter().map(|&k| self.cfg.m() - k).sum()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (m, n) = (self.cfg.m(), self.cfg.n());
        let mut v = 0.0;
        let mut at = 0;
        for b in 0..self.cfg.blocks {
            let free = m - self.k[b];
            v += self.delta * ((n - self.k[b]) * free) as f64;
            for i in 0..free {
                v += weight(i, n, m) * x[at + i];
            }
            at += free;
        }
        v
    }

    fn constraint(&self, x: &[f64]) -> f64 {
        let m = self.cfg.m();
        let mut s = self.fixed_load();
        let mut at = 0;
        for b in 0..self.cfg.blocks {
            let free = m - self.k[b];
            let row = &x[at..at + free];
            if row.windows(2).any(|w| w[0] < w[1]) {
                return f64::INFINITY;
            }
            let p = self.power(b);
            s += row.iter().map(|&a| (p - self.delta - a).max(0.0)).sum::<f64>();
            at += free;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdtCsit {
    Causal { delay: usize },
    Predictive { horizon: usize },
}

/// Fixed-constellation exponent program. One variable per (block, transmit
/// antenna) holds the common exponent of that antenna's `nr` path gains; a
/// transmit stream counts as usable when its exponent is below the block's
/// power exponent. Outage requires fewer than `B R / M` usable streams.
pub struct RdtProgram {
    pub cfg: ChannelConfig,
    pub csit: RdtCsit,
    pub delta: f64,
    /// Largest usable-stream count that is still in outage.
    pub max_usable: usize,
}

impl RdtProgram {
    pub fn new(cfg: ChannelConfig, csit: RdtCsit, delta: f64, rate: f64, bits: u32) -> Result<Self, OracleError> {
        cfg.check_rate(rate, bits)?;
        let need = cfg.blocks as f64 * rate / bits as f64;
        let max_usable = (need - 1e-12).ceil() as usize - 1;
        Ok(RdtProgram { cfg, csit, delta, max_usable })
    }

    fn visible(&self, b: usize) -> usize {
        match self.csit {
            RdtCsit::Causal { delay } => (b + 1).saturating_sub(delay),
            RdtCsit::Predictive { horizon } => (b + 1 + horizon).min(self.cfg.blocks),
        }
    }

    fn power(&self, b: usize, x: &[f64]) -> f64 {
        let nt = self.cfg.nt;
        let seen: f64 = x[..self.visible(b) * nt].iter().map(|&a| a.min(self.delta)).sum();
        1.0 + self.cfg.nr as f64 * seen
    }

    pub fn axes(&self, step: f64) -> Vec<Axis> {
        let g = (self.cfg.nt * self.cfg.nr) as f64;
        (0..self.cfg.blocks)
            .flat_map(|b| {
                let hi = 1.0 + g * self.delta * self.visible(b) as f64;
                std::iter::repeat(Axis::covering(0.0, hi, step)).take(self.cfg.nt)
            })
            .collect()
    }
}

impl GridProgram for RdtProgram {
    fn arity(&self) -> usize {
        self.cfg.blocks * self.cfg.nt
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.cfg.nr as f64 * x.iter().sum::<f64>()
    }

    /// Number of usable streams; compared against `max_usable`.
    fn constraint(&self, x: &[f64]) -> f64 {
        let nt = self.cfg.nt;
        let mut usable = 0usize;
        for b in 0..self.cfg.blocks {
            let p = self.power(b, x);
            usable += x[b * nt..(b + 1) * nt].iter().filter(|&&a| a < p - 1e-9).count();
        }
        usable as f64
    }
}

fn run<P: GridProgram>(prog: &P, axes: Vec<Axis>, budget: f64, cap: u64) -> Result<GridOutcome, OracleError> {
    brute_force_min(&GridSpec { axes, budget, cap }, prog)
}

/// Grid minimum of the causal DMT exponent program.
pub fn causal_dmt_oracle(r: f64, delta: f64, u: usize, cfg: &ChannelConfig, step: f64, cap: u64) -> Result<GridOutcome, OracleError> {
    cfg.check_multiplexing(r)?;
    let prog = CausalDmtProgram { cfg: *cfg, u, delta };
    run(&prog, prog.axes(step), cfg.blocks as f64 * r, cap)
}

/// Grid minimum of the predictive DMT exponent programs over all regions.
pub fn predictive_dmt_oracle(r: f64, delta: f64, t: usize, cfg: &ChannelConfig, step: f64, cap: u64) -> Result<GridOutcome, OracleError> {
    cfg.check_multiplexing(r)?;
    let m = cfg.m();
    let mut best = GridOutcome::InfeasibleOnGrid;
    let regions = (m + 1).pow(cfg.blocks as u32);
    for code in 0..regions {
        let mut k = vec![0; cfg.blocks];
        let mut c = code;
        for slot in k.iter_mut().rev() {
            *slot = c % (m + 1);
            c /= m + 1;
        }
        let prog = PredictiveDmtProgram { cfg: *cfg, t, delta, k };
        let out = run(&prog, prog.axes(step), cfg.blocks as f64 * r, cap)?;
        if let (Some(v), current) = (out.value(), best.value()) {
            if current.map_or(true, |c| v < c) {
                best = out;
            }
        }
    }
    Ok(best)
}

/// Grid minimum of the fixed-constellation exponent program.
pub fn rdt_oracle(rate: f64, bits: u32, delta: f64, csit: RdtCsit, cfg: &ChannelConfig, step: f64, cap: u64) -> Result<GridOutcome, OracleError> {
    let prog = RdtProgram::new(*cfg, csit, delta, rate, bits)?;
    let budget = prog.max_usable as f64;
    run(&prog, prog.axes(step), budget, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nt: usize, nr: usize, b: usize) -> ChannelConfig {
        ChannelConfig::new(nt, nr, b).unwrap()
    }

    #[test]
    fn scalar_program() {
        let prog = FnProgram { arity: 1, objective: |x: &[f64]| x[0], constraint: |x: &[f64]| (1.0 - x[0]).max(0.0) };
        let out = brute_force_min(&GridSpec::new(vec![Axis::new(0.0, 2.0, 0.05)], 0.5), &prog).unwrap();
        let v = out.value().unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_budget_is_infeasible_on_grid() {
        let prog = FnProgram { arity: 1, objective: |x: &[f64]| x[0], constraint: |x: &[f64]| (1.0 - x[0]).max(0.0) };
        let out = brute_force_min(&GridSpec::new(vec![Axis::new(0.0, 2.0, 0.05)], -0.1), &prog).unwrap();
        assert_eq!(out, GridOutcome::InfeasibleOnGrid);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let prog = FnProgram { arity: 2, objective: |x: &[f64]| x[0] + x[1], constraint: |x: &[f64]| 1.0 - x[0] - x[1] };
        let out = brute_force_min(&GridSpec::new(vec![Axis::new(0.0, 1.0, 0.5); 2], 0.0), &prog).unwrap();
        assert_eq!(out, GridOutcome::Min { value: 1.0, argmin: vec![0.0, 1.0] });
    }

    #[test]
    fn cap_and_axis_checks() {
        let prog = FnProgram { arity: 2, objective: |_: &[f64]| 0.0, constraint: |_: &[f64]| 0.0 };
        let mut g = GridSpec::new(vec![Axis::new(0.0, 1.0, 0.001); 2], 0.0);
        g.cap = 1000;
        assert!(matches!(brute_force_min(&g, &prog), Err(OracleError::GridTooLarge { .. })));
        let g = GridSpec::new(vec![Axis::new(0.0, 1.0, 0.0), Axis::new(0.0, 1.0, 0.1)], 0.0);
        assert_eq!(brute_force_min(&g, &prog), Err(OracleError::BadAxis(0)));
        let g = GridSpec::new(vec![Axis::new(0.0, 1.0, 0.1)], 0.0);
        assert!(matches!(brute_force_min(&g, &prog), Err(OracleError::Arity { .. })));
    }

    #[test]
    fn covering_axis_reaches_hi() {
        let a = Axis::covering(-0.5, 1.02, 0.05);
        assert!(a.hi >= 1.02 && a.hi < 1.07);
        assert_eq!(Axis::covering(0.0, 0.0, 0.1).count(), 1);
    }

    #[test]
    fn refining_grid_does_not_overshoot() {
        let c = cfg(1, 1, 2);
        let coarse = causal_dmt_oracle(0.3, 0.5, 1, &c, 0.1, DEFAULT_CAP).unwrap().value().unwrap();
        let fine = causal_dmt_oracle(0.3, 0.5, 1, &c, 0.05, DEFAULT_CAP).unwrap().value().unwrap();
        // Lipschitz constant of the objective is the largest weight sum.
        assert!(fine <= coarse + 2.0 * 0.1 + 1e-9);
    }

    #[test]
    fn causal_siso_known_value() {
        // r = 0, perfect-enough CSIT, one block delay, B = 2: a* = [1, 2] with
        // delta = 1 gives 1 + (1 + min(1, 1)) = 3.
        let c = cfg(1, 1, 2);
        let v = causal_dmt_oracle(0.0, 1.0, 1, &c, 0.05, DEFAULT_CAP).unwrap().value().unwrap();
        assert!((v - 3.0).abs() < 0.1 + 1e-9, "{v}");
    }

    #[test]
    fn rdt_siso_known_value() {
        let c = cfg(1, 1, 2);
        let v = rdt_oracle(1.0, 2, 0.5, RdtCsit::Causal { delay: 1 }, &c, 0.25, DEFAULT_CAP).unwrap().value().unwrap();
        assert!((v - 2.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn siso_outage_formula() {
        assert!((exact_outage_rayleigh_siso(100.0, 1.0) - 0.009950166250831893).abs() < 1e-15);
        assert!(exact_outage_rayleigh_siso(1e12, 1.0) < 1e-11);
        assert!(exact_outage_rayleigh_siso(10.0, 1e-9) < 1e-9);
    }
}
