//! Channel and CSIT descriptors shared by every tradeoff computation, plus the
//! two no-CSIT baselines: the uniform-power DMT and the Singleton bound.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offsets closer than this to an integer are treated as that integer before
/// taking a floor, so representable breakpoints such as `B * r = 3` computed
/// as `2.9999999999999996` land on the intended side.
pub const FLOOR_SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("antenna and block counts must be positive (nt={nt}, nr={nr}, blocks={blocks})")]
    EmptyChannel { nt: usize, nr: usize, blocks: usize },
    #[error("multiplexing gain {r} outside [0, {m}]")]
    MultiplexingOutOfRange { r: f64, m: usize },
    #[error("rate {rate} outside (0, {max}) for M={bits} bits/symbol")]
    RateOutOfRange { rate: f64, bits: u32, max: f64 },
    #[error("bits per symbol must be positive")]
    ZeroBitsPerSymbol,
    #[error("CSIT delay u={u} outside [1, {blocks}]")]
    DelayOutOfRange { u: usize, blocks: usize },
    #[error("predictive horizon t={t} outside [0, {max}]")]
    HorizonOutOfRange { t: usize, max: usize },
    #[error("CSIT quality exponent must be nonnegative, got {0}")]
    NegativeDelta(f64),
}

/// `floor(x)` with [`FLOOR_SNAP`] applied.
pub fn snapped_floor(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() < FLOOR_SNAP {
        nearest
    } else {
        x.floor()
    }
}

/// `ceil(x)` with [`FLOOR_SNAP`] applied.
pub fn snapped_ceil(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() < FLOOR_SNAP {
        nearest
    } else {
        x.ceil()
    }
}

/// Extended nonnegative real used for diversity orders and CSIT quality
/// exponents. `Infinite` is propagated, never replaced by a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// `f64` view, mapping `Infinite` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> ExtReal {
        if v == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(v)
        }
    }

    /// `min(self, x)`; with `Infinite` this is just `x`.
    pub fn min_with(self, x: f64) -> f64 {
        match self {
            ExtReal::Finite(v) => v.min(x),
            ExtReal::Infinite => x,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for ExtReal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(ExtReal::Infinite);
        }
        t.parse::<f64>()
            .map(ExtReal::from_f64)
            .map_err(|e| format!("invalid extended real {t:?}: {e}"))
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtReal::from_f64(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// MIMO block-fading channel dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub nt: usize,
    pub nr: usize,
    pub blocks: usize,
}

impl ChannelConfig {
    pub fn new(nt: usize, nr: usize, blocks: usize) -> Result<Self, ModelError> {
        if nt == 0 || nr == 0 || blocks == 0 {
            return Err(ModelError::EmptyChannel { nt, nr, blocks });
        }
        Ok(ChannelConfig { nt, nr, blocks })
    }

    /// `min(nt, nr)`.
    pub fn m(&self) -> usize {
        self.nt.min(self.nr)
    }

    /// `max(nt, nr)`.
    pub fn n(&self) -> usize {
        self.nt.max(self.nr)
    }

    /// Exponent weight `2i - 1 + n - m` of the i-th ordered eigenvalue (1-based).
    pub fn eigen_weight(&self, i: usize) -> f64 {
        (2 * i - 1 + self.n() - self.m()) as f64
    }

    pub fn check_multiplexing(&self, r: f64) -> Result<(), ModelError> {
        if !(0.0..=self.m() as f64).contains(&r) {
            return Err(ModelError::MultiplexingOutOfRange { r, m: self.m() });
        }
        Ok(())
    }

    pub fn check_rate(&self, rate: f64, bits: u32) -> Result<(), ModelError> {
        if bits == 0 {
            return Err(ModelError::ZeroBitsPerSymbol);
        }
        let max = bits as f64 * self.nt as f64;
        if !(rate > 0.0 && rate < max) {
            return Err(ModelError::RateOutOfRange { rate, bits, max });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CsitMode {
    None,
    /// CSIT of blocks `1..=b-u` is available when block `b` is sent.
    Causal { delay: usize },
    /// CSIT of blocks `1..=min(B, b+t)` is available when block `b` is sent.
    Predictive { horizon: usize },
    Full,
}

/// CSIT availability pattern and quality exponent (noise variance `P^-delta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsitSpec {
    pub mode: CsitMode,
    pub delta: ExtReal,
}

impl CsitSpec {
    pub fn new(mode: CsitMode, delta: ExtReal, cfg: &ChannelConfig) -> Result<Self, ModelError> {
        if let ExtReal::Finite(d) = delta {
            if d.is_nan() || d < 0.0 {
                return Err(ModelError::NegativeDelta(d));
            }
        }
        match mode {
            CsitMode::Causal { delay } if delay == 0 || delay > cfg.blocks => {
                return Err(ModelError::DelayOutOfRange { u: delay, blocks: cfg.blocks });
            }
            CsitMode::Predictive { horizon } if horizon >= cfg.blocks => {
                return Err(ModelError::HorizonOutOfRange { t: horizon, max: cfg.blocks - 1 });
            }
            _ => {}
        }
        Ok(CsitSpec { mode, delta })
    }

    pub fn causal(delay: usize, delta: ExtReal, cfg: &ChannelConfig) -> Result<Self, ModelError> {
        Self::new(CsitMode::Causal { delay }, delta, cfg)
    }

    pub fn predictive(horizon: usize, delta: ExtReal, cfg: &ChannelConfig) -> Result<Self, ModelError> {
        Self::new(CsitMode::Predictive { horizon }, delta, cfg)
    }

    /// Predictive horizon equivalent to this mode, if any (`Full` is `B - 1`).
    pub fn horizon(&self, cfg: &ChannelConfig) -> Option<usize> {
        match self.mode {
            CsitMode::Predictive { horizon } => Some(horizon),
            CsitMode::Full => Some(cfg.blocks - 1),
            _ => None,
        }
    }

    /// Number of blocks whose CSIT is known when block `b` (1-based) is sent.
    pub fn known_blocks(&self, b: usize, cfg: &ChannelConfig) -> usize {
        match self.mode {
            CsitMode::None => 0,
            CsitMode::Causal { delay } => b.saturating_sub(delay),
            CsitMode::Predictive { horizon } => (b + horizon).min(cfg.blocks),
            CsitMode::Full => cfg.blocks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RatePoint {
    /// Rate scales as `r log2 P`.
    Multiplexing { r: f64 },
    /// Fixed rate in bits per channel use with a `2^bits` constellation.
    Rate { rate: f64, bits: u32 },
}

impl RatePoint {
    pub fn validate(&self, cfg: &ChannelConfig) -> Result<(), ModelError> {
        match *self {
            RatePoint::Multiplexing { r } => cfg.check_multiplexing(r),
            RatePoint::Rate { rate, bits } => cfg.check_rate(rate, bits),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    Dmt,
    Rdt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub diversity: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub kind: CurveKind,
    pub channel: ChannelConfig,
    pub csit: Option<CsitSpec>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("x not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("diversity increases at index {0}")]
    DiversityIncreases(usize),
    #[error("negative or NaN diversity at index {0}")]
    BadDiversity(usize),
    #[error("infinite diversity at index {0} requires predictive or full CSIT with delta = inf")]
    UnexpectedInfinity(usize),
}

impl TradeoffCurve {
    /// Checks ordering, monotonicity (tolerance `tol`) and sign of the points.
    pub fn check(&self, tol: f64) -> Result<(), CurveError> {
        let infinite_allowed = matches!(
            self.csit,
            Some(CsitSpec {
                mode: CsitMode::Predictive { .. } | CsitMode::Full,
                delta: ExtReal::Infinite
            })
        );
        for (i, p) in self.points.iter().enumerate() {
            match p.diversity {
                ExtReal::Finite(d) if d.is_nan() || d < -tol => return Err(CurveError::BadDiversity(i)),
                ExtReal::Infinite if !infinite_allowed => return Err(CurveError::UnexpectedInfinity(i)),
                _ => {}
            }
            if i > 0 {
                let prev = &self.points[i - 1];
                if p.x <= prev.x {
                    return Err(CurveError::NotIncreasing(i));
                }
                if p.diversity.to_f64() > prev.diversity.to_f64() + tol {
                    return Err(CurveError::DiversityIncreases(i));
                }
            }
        }
        Ok(())
    }
}

/// Uniform-power DMT: the piecewise-linear curve through
/// `(k, B (nt - k)(nr - k))`, `k = 0..=m`.
pub fn dmt_uniform(r: f64, cfg: &ChannelConfig) -> Result<f64, ModelError> {
    cfg.check_multiplexing(r)?;
    let corner = |k: usize| (cfg.blocks * (cfg.nt - k) * (cfg.nr - k)) as f64;
    let m = cfg.m();
    let k = (snapped_floor(r) as usize).min(m);
    if k == m {
        return Ok(0.0);
    }
    let frac = r - k as f64;
    if frac.abs() < FLOOR_SNAP {
        return Ok(corner(k));
    }
    Ok(corner(k) + frac * (corner(k + 1) - corner(k)))
}

/// `d_S(R) = 1 + floor(B (nt - R/M))` together with the bound `nr d_S(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingletonBound {
    pub d_s: usize,
    pub bound: usize,
}

/// Block-diversity limit of fixed-constellation codes. As a function of `R`
/// it steps down just after each point where `B (nt - R/M)` is an integer and
/// keeps the larger value at the breakpoint itself (left-continuous).
pub fn singleton_bound(rate: f64, bits: u32, cfg: &ChannelConfig) -> Result<SingletonBound, ModelError> {
    let d_s = singleton_exponent(rate, bits, cfg)?;
    Ok(SingletonBound { d_s, bound: cfg.nr * d_s })
}

pub fn singleton_exponent(rate: f64, bits: u32, cfg: &ChannelConfig) -> Result<usize, ModelError> {
    cfg.check_rate(rate, bits)?;
    let arg = cfg.blocks as f64 * (cfg.nt as f64 - rate / bits as f64);
    Ok(1 + snapped_floor(arg).max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(nt: usize, nr: usize, b: usize) -> ChannelConfig {
        ChannelConfig::new(nt, nr, b).unwrap()
    }

    #[test]
    fn uniform_dmt_spot_values() {
        let c = cfg(2, 2, 4);
        assert_eq!(dmt_uniform(0.0, &c).unwrap(), 16.0);
        assert_eq!(dmt_uniform(2.0, &c).unwrap(), 0.0);
        assert_eq!(dmt_uniform(0.5, &c).unwrap(), 10.0);
        assert!(matches!(dmt_uniform(2.01, &c), Err(ModelError::MultiplexingOutOfRange { .. })));
        assert!(dmt_uniform(-0.1, &c).is_err());
    }

    #[test]
    fn singleton_spot_values() {
        let c = cfg(2, 2, 4);
        assert_eq!(singleton_bound(4.0, 4, &c).unwrap(), SingletonBound { d_s: 5, bound: 10 });
        // vanishing positive rate: B nt - tiny floors to B nt - 1
        assert_eq!(singleton_bound(1e-6, 4, &c).unwrap(), SingletonBound { d_s: 8, bound: 16 });
        assert_eq!(singleton_bound(8.0 - 1e-6, 4, &c).unwrap(), SingletonBound { d_s: 1, bound: 2 });
        assert!(singleton_bound(0.0, 4, &c).is_err());
        assert!(singleton_bound(8.0, 4, &c).is_err());
    }

    #[test]
    fn singleton_keeps_left_value_at_breakpoints() {
        let c = cfg(2, 2, 4);
        // B (nt - R/M) = 6 at R = 2
        assert_eq!(singleton_exponent(2.0, 4, &c).unwrap(), 7);
        assert_eq!(singleton_exponent(2.0 - 1e-9, 4, &c).unwrap(), 7);
        assert_eq!(singleton_exponent(2.0 + 1e-9, 4, &c).unwrap(), 6);
    }

    #[test]
    fn singleton_is_not_symmetric_in_antennas() {
        let a = singleton_bound(1.0, 2, &cfg(2, 1, 3)).unwrap();
        let b = singleton_bound(1.0, 2, &cfg(1, 2, 3)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn csit_validation() {
        let c = cfg(2, 2, 4);
        assert!(CsitSpec::causal(0, ExtReal::ZERO, &c).is_err());
        assert!(CsitSpec::causal(5, ExtReal::ZERO, &c).is_err());
        assert!(CsitSpec::predictive(4, ExtReal::ZERO, &c).is_err());
        assert!(CsitSpec::causal(2, ExtReal::Finite(-1.0), &c).is_err());
        let s = CsitSpec::predictive(3, ExtReal::Infinite, &c).unwrap();
        assert_eq!(s.horizon(&c), Some(3));
        assert_eq!(s.known_blocks(1, &c), 4);
        let s = CsitSpec::causal(2, ExtReal::Finite(1.0), &c).unwrap();
        assert_eq!(s.known_blocks(1, &c), 0);
        assert_eq!(s.known_blocks(4, &c), 2);
    }

    #[test]
    fn ext_real_parsing_and_serde() {
        assert_eq!("inf".parse::<ExtReal>().unwrap(), ExtReal::Infinite);
        assert_eq!("0.5".parse::<ExtReal>().unwrap(), ExtReal::Finite(0.5));
        let s = serde_json::to_string(&vec![ExtReal::Finite(1.5), ExtReal::Infinite]).unwrap();
        assert_eq!(s, r#"[1.5,"inf"]"#);
        let back: Vec<ExtReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![ExtReal::Finite(1.5), ExtReal::Infinite]);
        assert!(ExtReal::Infinite > ExtReal::Finite(1e300));
    }

    #[test]
    fn curve_check_flags_violations() {
        let c = cfg(1, 1, 1);
        let mk = |pts: &[(f64, f64)]| TradeoffCurve {
            kind: CurveKind::Dmt,
            channel: c,
            csit: None,
            points: pts.iter().map(|&(x, d)| CurvePoint { x, diversity: ExtReal::Finite(d) }).collect(),
        };
        assert!(mk(&[(0.0, 1.0), (0.5, 0.5)]).check(1e-9).is_ok());
        assert_eq!(mk(&[(0.0, 1.0), (0.0, 0.5)]).check(1e-9), Err(CurveError::NotIncreasing(1)));
        assert_eq!(mk(&[(0.0, 1.0), (0.5, 1.5)]).check(1e-9), Err(CurveError::DiversityIncreases(1)));
        assert_eq!(mk(&[(0.0, -1.0)]).check(1e-9), Err(CurveError::BadDiversity(0)));
    }

    proptest! {
        #[test]
        fn uniform_hits_corners_and_ignores_antenna_swap(nt in 1usize..5, nr in 1usize..5, b in 1usize..6, r01 in 0.0f64..1.0) {
            let c = cfg(nt, nr, b);
            let swapped = cfg(nr, nt, b);
            for k in 0..=c.m() {
                let want = (b * (nt - k) * (nr - k)) as f64;
                prop_assert_eq!(dmt_uniform(k as f64, &c).unwrap(), want);
            }
            let r = r01 * c.m() as f64;
            prop_assert_eq!(dmt_uniform(r, &c).unwrap(), dmt_uniform(r, &swapped).unwrap());
        }

        #[test]
        fn uniform_is_convex(nt in 1usize..4, nr in 1usize..4, b in 1usize..5, r01 in 0.0f64..1.0, h in 0.001f64..0.2) {
            let c = cfg(nt, nr, b);
            let m = c.m() as f64;
            let r = r01 * m;
            prop_assume!(r - h >= 0.0 && r + h <= m);
            let mid = dmt_uniform(r, &c).unwrap();
            let avg = 0.5 * (dmt_uniform(r - h, &c).unwrap() + dmt_uniform(r + h, &c).unwrap());
            prop_assert!(mid <= avg + 1e-9);
        }

        #[test]
        fn singleton_is_nonincreasing_step(nt in 1usize..4, nr in 1usize..4, b in 1usize..6, bits in 1u32..5, a in 0.001f64..0.999, gap in 0.0f64..0.5) {
            let c = cfg(nt, nr, b);
            let max = (bits as usize * nt) as f64;
            let r1 = a * max;
            let r2 = (r1 + gap * max).min(max * 0.9999);
            let lo = singleton_bound(r1, bits, &c).unwrap();
            let hi = singleton_bound(r2, bits, &c).unwrap();
            prop_assert!(hi.bound <= lo.bound);
            prop_assert!(lo.d_s >= 1 && lo.d_s <= b * nt);
        }
    }
}
