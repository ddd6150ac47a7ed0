//! Parameter sweeps producing tradeoff curves, and their CSV/JSON encodings.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmt::{self, DmtError};
use crate::model::{
    dmt_uniform, singleton_bound, ChannelConfig, CsitMode, CsitSpec, CurveKind, CurvePoint, ExtReal, ModelError,
    TradeoffCurve,
};
use crate::rdt;

/// Offset of the samples placed on either side of each rate breakpoint.
pub const BREAKPOINT_OFFSET: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dmt(#[from] DmtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    DmtCausal,
    DmtPredictive,
    DmtVector,
    RdtCausal,
    RdtPredictive,
    /// Uniform-power DMT, or the Singleton bound when a constellation size
    /// is given.
    Baseline,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::DmtCausal => "dmt-causal",
            SweepKind::DmtPredictive => "dmt-predictive",
            SweepKind::DmtVector => "dmt-vector",
            SweepKind::RdtCausal => "rdt-causal",
            SweepKind::RdtPredictive => "rdt-predictive",
            SweepKind::Baseline => "baseline",
        }
    }

    fn is_predictive(self) -> bool {
        matches!(self, SweepKind::DmtPredictive | SweepKind::RdtPredictive)
    }

    fn is_rdt(self, bits: Option<u32>) -> bool {
        match self {
            SweepKind::RdtCausal | SweepKind::RdtPredictive => true,
            SweepKind::Baseline => bits.is_some(),
            _ => false,
        }
    }
}

/// `start:stop:step`, inclusive of `stop` when it lies on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn points(&self) -> Result<Vec<f64>, SweepError> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(SweepError::Usage(format!(
                "empty grid {}:{}:{} (need step > 0 and stop >= start)",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| round12(self.start + i as f64 * self.step)).collect())
    }
}

impl FromStr for GridRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("grid {s:?} must look like start:stop:step"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad grid value {t:?}: {e}"));
        Ok(GridRange { start: num(a)?, stop: num(b)?, step: num(c)? })
    }
}

impl TryFrom<String> for GridRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GridRange> for String {
    fn from(g: GridRange) -> String {
        format!("{}:{}:{}", g.start, g.stop, g.step)
    }
}

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub channel: ChannelConfig,
    /// CSIT delays (causal kinds) or horizons (predictive kinds); one curve
    /// per window and quality exponent.
    pub windows: Vec<usize>,
    pub deltas: Vec<ExtReal>,
    pub grid: Option<GridRange>,
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bits_per_symbol: Option<u32>,
    #[serde(flatten)]
    pub curve: TradeoffCurve,
}

fn dmt_grid(cfg: &SweepConfig) -> Result<Vec<f64>, SweepError> {
    let m = cfg.channel.m() as f64;
    let range = cfg.grid.unwrap_or(GridRange { start: 0.0, stop: m, step: 0.01 });
    let mut xs = range.points()?;
    if let Some(bad) = xs.iter().find(|&&x| x < 0.0 || x > m + 1e-12) {
        return Err(SweepError::Usage(format!("multiplexing gain {bad} outside [0, {m}]")));
    }
    let lo = xs[0];
    let hi = *xs.last().unwrap();
    xs.extend((0..=cfg.channel.m()).map(|k| k as f64).filter(|&k| k >= lo && k <= hi));
    Ok(sorted_unique(xs))
}

fn rdt_grid(cfg: &SweepConfig, bits: u32) -> Result<Vec<f64>, SweepError> {
    let max = bits as f64 * cfg.channel.nt as f64;
    let range = cfg.grid.unwrap_or(GridRange { start: 0.05, stop: max - 0.05, step: 0.05 });
    let xs = range.points()?;
    if let Some(bad) = xs.iter().find(|&&x| x <= 0.0 || x >= max) {
        return Err(SweepError::Usage(format!("rate {bad} outside (0, {max})")));
    }
    let (lo, hi) = (xs[0], *xs.last().unwrap());
    let mut all = xs;
    for bp in rdt::singleton_breakpoints(bits, &cfg.channel) {
        for x in [bp - BREAKPOINT_OFFSET, bp + BREAKPOINT_OFFSET] {
            if x >= lo && x <= hi {
                all.push(round12(x));
            }
        }
    }
    Ok(sorted_unique(all))
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    xs
}

fn csit_for(kind: SweepKind, window: usize, delta: ExtReal, channel: &ChannelConfig) -> Result<CsitSpec, SweepError> {
    let spec = if kind.is_predictive() {
        CsitSpec::predictive(window, delta, channel)
    } else {
        CsitSpec::causal(window, delta, channel)
    };
    spec.map_err(|e| SweepError::Usage(e.to_string()))
}

/// Evaluates one curve per (window, delta) pair, in that nesting order. Points
/// are computed in parallel and assembled in grid order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CurveRecord>, SweepError> {
    let ch = cfg.channel;
    if cfg.kind == SweepKind::Baseline {
        return baseline(cfg).map(|c| vec![c]);
    }
    if cfg.windows.is_empty() || cfg.deltas.is_empty() {
        return Err(SweepError::Usage("need at least one CSIT window and one delta".into()));
    }
    if cfg.kind == SweepKind::DmtVector && ch.m() != 1 {
        return Err(SweepError::Usage(format!("dmt-vector needs min(nt, nr) = 1, got {}", ch.m())));
    }
    let bits = if cfg.kind.is_rdt(cfg.bits) {
        Some(cfg.bits.ok_or_else(|| SweepError::Usage("rate sweeps need --bits-per-symbol".into()))?)
    } else {
        None
    };
    let xs = match bits {
        Some(b) => rdt_grid(cfg, b)?,
        None => dmt_grid(cfg)?,
    };
    let mut out = Vec::new();
    for &w in &cfg.windows {
        for &delta in &cfg.deltas {
            let csit = csit_for(cfg.kind, w, delta, &ch)?;
            let values: Result<Vec<ExtReal>, SweepError> = xs
                .par_iter()
                .map(|&x| -> Result<ExtReal, SweepError> {
                    Ok(match cfg.kind {
                        SweepKind::DmtCausal => ExtReal::Finite(dmt::dmt_causal(x, delta, w, &ch)?),
                        SweepKind::DmtPredictive => dmt::dmt_predictive(x, delta, w, &ch)?,
                        SweepKind::DmtVector => ExtReal::Finite(dmt::dmt_causal_vector(x, delta, w, ch.n(), ch.blocks)?),
                        SweepKind::RdtCausal => ExtReal::Finite(rdt::rdt_causal(x, bits.unwrap(), delta, w, &ch)?),
                        SweepKind::RdtPredictive => rdt::rdt_predictive(x, bits.unwrap(), delta, w, &ch)?,
                        SweepKind::Baseline => unreachable!(),
                    })
                })
                .collect();
            let points = xs
                .iter()
                .zip(values?)
                .map(|(&x, d)| CurvePoint { x, diversity: round_ext(d) })
                .collect();
            let letter = if cfg.kind.is_predictive() { "t" } else { "u" };
            out.push(CurveRecord {
                id: format!("{}/{letter}={w}/delta={delta}", cfg.kind.name()),
                bits_per_symbol: bits,
                curve: TradeoffCurve {
                    kind: if bits.is_some() { CurveKind::Rdt } else { CurveKind::Dmt },
                    channel: ch,
                    csit: Some(csit),
                    points,
                },
            });
        }
    }
    Ok(out)
}

fn round_ext(d: ExtReal) -> ExtReal {
    match d {
        ExtReal::Finite(v) => ExtReal::Finite(round12(v)),
        inf => inf,
    }
}

fn baseline(cfg: &SweepConfig) -> Result<CurveRecord, SweepError> {
    let ch = cfg.channel;
    let none = CsitSpec { mode: CsitMode::None, delta: ExtReal::ZERO };
    match cfg.bits {
        None => {
            let xs = dmt_grid(cfg)?;
            let points = xs
                .iter()
                .map(|&x| Ok(CurvePoint { x, diversity: ExtReal::Finite(round12(dmt_uniform(x, &ch)?)) }))
                .collect::<Result<_, ModelError>>()?;
            Ok(CurveRecord {
                id: "uniform".into(),
                bits_per_symbol: None,
                curve: TradeoffCurve { kind: CurveKind::Dmt, channel: ch, csit: Some(none), points },
            })
        }
        Some(bits) => {
            let xs = rdt_grid(cfg, bits)?;
            let points = xs
                .iter()
                .map(|&x| Ok(CurvePoint { x, diversity: ExtReal::Finite(singleton_bound(x, bits, &ch)?.bound as f64) }))
                .collect::<Result<_, ModelError>>()?;
            Ok(CurveRecord {
                id: "singleton".into(),
                bits_per_symbol: Some(bits),
                curve: TradeoffCurve { kind: CurveKind::Rdt, channel: ch, csit: Some(none), points },
            })
        }
    }
}

/// Fixed-point rendering with up to 12 decimals and no trailing zeros.
pub fn format_number(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        return "inf".into();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn format_ext(d: ExtReal) -> String {
    match d {
        ExtReal::Finite(v) => format_number(v),
        ExtReal::Infinite => "inf".into(),
    }
}

pub fn curves_to_csv(curves: &[CurveRecord]) -> String {
    let mut out = String::from("x,diversity,curve_id\n");
    for c in curves {
        for p in &c.curve.points {
            let _ = writeln!(out, "{},{},{}", format_number(p.x), format_ext(p.diversity), c.id);
        }
    }
    out
}

#[derive(Serialize)]
struct CurveFile<'a> {
    curves: &'a [CurveRecord],
}

pub fn curves_to_json(curves: &[CurveRecord]) -> String {
    let mut s = serde_json::to_string_pretty(&CurveFile { curves }).expect("curves serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: SweepKind) -> SweepConfig {
        SweepConfig {
            kind,
            channel: ChannelConfig::new(2, 2, 4).unwrap(),
            windows: vec![3],
            deltas: vec![ExtReal::ZERO],
            grid: None,
            bits: None,
        }
    }

    #[test]
    fn grid_parsing() {
        let g: GridRange = "0:2:0.5".parse().unwrap();
        assert_eq!(g.points().unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g: GridRange = "0:1:0.1".parse().unwrap();
        assert_eq!(g.points().unwrap()[3], 0.3);
        assert!("0:1".parse::<GridRange>().is_err());
        assert!("1:0:0.1".parse::<GridRange>().unwrap().points().is_err());
        assert!("0:1:0".parse::<GridRange>().unwrap().points().is_err());
    }

    #[test]
    fn baseline_curve() {
        let mut c = config(SweepKind::Baseline);
        c.grid = Some("0:2:0.5".parse().unwrap());
        let curves = run_sweep(&c).unwrap();
        let csv = curves_to_csv(&curves);
        assert_eq!(csv, "x,diversity,curve_id\n0,16,uniform\n0.5,10,uniform\n1,4,uniform\n1.5,2,uniform\n2,0,uniform\n");
    }

    #[test]
    fn dmt_grid_includes_integers() {
        let mut c = config(SweepKind::DmtCausal);
        c.grid = Some("0.3:1.9:0.4".parse().unwrap());
        assert_eq!(dmt_grid(&c).unwrap(), vec![0.3, 0.7, 1.0, 1.1, 1.5, 1.9]);
        c.grid = Some("0:3:1".parse().unwrap());
        assert!(matches!(run_sweep(&c), Err(SweepError::Usage(_))));
    }

    #[test]
    fn rdt_grid_brackets_breakpoints() {
        let mut c = config(SweepKind::RdtCausal);
        c.bits = Some(4);
        let xs = rdt_grid(&c, 4).unwrap();
        assert!(xs.contains(&(4.0 - 1e-9)) && xs.contains(&(4.0 + 1e-9)) && xs.contains(&4.0));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(xs[0] > 0.0 && *xs.last().unwrap() < 8.0);
    }

    #[test]
    fn overlaid_curves_are_ordered_in_delta() {
        let mut c = config(SweepKind::DmtCausal);
        c.deltas = vec![ExtReal::ZERO, ExtReal::Finite(0.5), ExtReal::Finite(1.0), ExtReal::Infinite];
        c.grid = Some("0:2:0.25".parse().unwrap());
        let curves = run_sweep(&c).unwrap();
        assert_eq!(curves.len(), 4);
        for w in curves.windows(2) {
            for (a, b) in w[0].curve.points.iter().zip(&w[1].curve.points) {
                assert!(a.diversity.to_f64() <= b.diversity.to_f64() + 1e-9);
            }
        }
        for c in &curves {
            c.curve.check(1e-9).unwrap();
        }
        assert_eq!(curves[3].id, "dmt-causal/u=3/delta=inf");
    }

    #[test]
    fn predictive_infinite_delta_serializes_as_inf() {
        let mut c = config(SweepKind::DmtPredictive);
        c.windows = vec![0];
        c.deltas = vec![ExtReal::Infinite];
        c.grid = Some("1.5:2:0.5".parse().unwrap());
        let curves = run_sweep(&c).unwrap();
        let csv = curves_to_csv(&curves);
        assert!(csv.contains("1.5,inf,dmt-predictive/t=0/delta=inf"));
        assert!(csv.contains("2,0,"));
        let json = curves_to_json(&curves);
        assert!(json.contains("\"inf\""));
    }

    #[test]
    fn vector_sweep_needs_vector_channel() {
        assert!(matches!(run_sweep(&config(SweepKind::DmtVector)), Err(SweepError::Usage(_))));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(3.999999999), "3.999999999");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }
}
