//! Self-check suites comparing independent computations of the same quantity.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dmt;
use crate::lp::TAU_DISC;
use crate::model::{dmt_uniform, singleton_bound, ChannelConfig, CsitMode, CsitSpec, ExtReal};
use crate::oracle::{self, RdtCsit, DEFAULT_CAP};
use crate::rdt;
use crate::sim::{simulate_outage, InputAlphabet, PowerPolicy, SimulationSetup};

const ORACLE_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ClosedFormVsLp,
    LpVsOracle,
    SimVsExact,
    Thresholds,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::ClosedFormVsLp, Suite::LpVsOracle, Suite::SimVsExact, Suite::Thresholds];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ClosedFormVsLp => "closed-form-vs-lp",
            Suite::LpVsOracle => "lp-vs-oracle",
            Suite::SimVsExact => "sim-vs-exact",
            Suite::Thresholds => "thresholds",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}; expected one of closed-form-vs-lp, lp-vs-oracle, sim-vs-exact, thresholds"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub expected: Option<f64>,
    pub got: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    fn compare(name: String, expected: f64, got: f64, tolerance: f64) -> Self {
        Check { name, passed: (expected - got).abs() <= tolerance, expected: Some(expected), got: Some(got), tolerance, detail: String::new() }
    }

    fn failed(name: String, detail: String) -> Self {
        Check { name, passed: false, expected: None, got: None, tolerance: 0.0, detail }
    }

    fn holds(name: String, passed: bool, detail: String) -> Self {
        Check { name, passed, expected: None, got: None, tolerance: 0.0, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub trials: u64,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { trials: 100_000, seed: 1 }
    }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> SuiteReport {
    let checks = match suite {
        Suite::ClosedFormVsLp => closed_form_vs_lp(),
        Suite::LpVsOracle => lp_vs_oracle(),
        Suite::SimVsExact => sim_vs_exact(opts),
        Suite::Thresholds => thresholds(),
    };
    SuiteReport { suite, passed: checks.iter().all(|c| c.passed), checks }
}

fn ch(nt: usize, nr: usize, blocks: usize) -> ChannelConfig {
    ChannelConfig::new(nt, nr, blocks).expect("valid channel")
}

fn label(c: &ChannelConfig) -> String {
    format!("{}x{} B={}", c.nt, c.nr, c.blocks)
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Vector closed form against the regional programs. A gap above the
/// discontinuity tolerance passes only if the probe flags a jump there and the
/// closed form matches the limit from inside.
fn closed_form_vs_lp() -> Vec<Check> {
    let mut out = Vec::new();
    let deltas = [ExtReal::ZERO, ExtReal::Finite(0.5), ExtReal::Finite(1.0), ExtReal::Finite(2.0), ExtReal::Infinite];
    for c in [ch(1, 1, 2), ch(1, 2, 2), ch(2, 1, 3), ch(1, 1, 3), ch(1, 3, 2)] {
        for u in 1..=c.blocks {
            for delta in deltas {
                let name = format!("{} u={u} delta={delta}", label(&c));
                let mut worst = 0.0f64;
                let mut failure = None;
                for r in grid(0.0, 1.0, 0.1) {
                    let closed = dmt::dmt_causal_vector(r, delta, u, c.n(), c.blocks);
                    let lp = dmt::dmt_causal(r, delta, u, &c);
                    let (closed, lp) = match (closed, lp) {
                        (Ok(a), Ok(b)) => (a, b),
                        (a, b) => {
                            failure = Some(format!("r={r}: {a:?} / {b:?}"));
                            break;
                        }
                    };
                    let gap = (closed - lp).abs();
                    if gap <= TAU_DISC {
                        worst = worst.max(gap);
                        continue;
                    }
                    let explained = match delta {
                        ExtReal::Finite(d) => dmt::probe_causal(r, d, u, &c, &dmt::PROBE_EPS)
                            .map(|p| p.discontinuous && (p.value_open_limit - closed).abs() <= TAU_DISC)
                            .unwrap_or(false),
                        ExtReal::Infinite => false,
                    };
                    if !explained {
                        failure = Some(format!("r={r}: closed form {closed}, program {lp}"));
                        break;
                    }
                }
                out.push(match failure {
                    Some(d) => Check::failed(name, d),
                    None => Check::compare(name, 0.0, worst, TAU_DISC),
                });
            }
        }
    }
    out
}

fn oracle_check(name: String, lp: f64, outcome: Result<oracle::GridOutcome, oracle::OracleError>, vars: usize) -> Check {
    let tol = ORACLE_STEP * vars as f64;
    match outcome {
        Ok(o) => match o.value() {
            Some(v) => Check::compare(name, v, lp, tol),
            None => Check::failed(name, "no feasible grid point".into()),
        },
        Err(e) => Check::failed(name, e.to_string()),
    }
}

/// Regional programs and closed forms against exhaustive grid search on
/// channels small enough to enumerate.
fn lp_vs_oracle() -> Vec<Check> {
    let mut out = Vec::new();
    let causal = [(ch(1, 1, 2), 1), (ch(1, 2, 2), 1), (ch(1, 1, 3), 1), (ch(1, 1, 3), 2)];
    for (c, u) in causal {
        for delta in [0.5, 1.0] {
            for r in [0.25, 0.5, 0.75] {
                let name = format!("dmt-causal {} u={u} delta={delta} r={r}", label(&c));
                let vars = c.blocks * c.m();
                match dmt::dmt_causal(r, ExtReal::Finite(delta), u, &c) {
                    Ok(lp) => out.push(oracle_check(name, lp, oracle::causal_dmt_oracle(r, delta, u, &c, ORACLE_STEP, DEFAULT_CAP), vars)),
                    Err(e) => out.push(Check::failed(name, e.to_string())),
                }
            }
        }
    }
    for (c, t) in [(ch(1, 1, 2), 0), (ch(1, 1, 2), 1), (ch(1, 2, 2), 0), (ch(1, 1, 3), 1)] {
        for r in [0.25, 0.75] {
            let name = format!("dmt-predictive {} t={t} delta=0.5 r={r}", label(&c));
            let vars = c.blocks * c.m();
            match dmt::dmt_predictive(r, ExtReal::Finite(0.5), t, &c) {
                Ok(ExtReal::Finite(lp)) => {
                    out.push(oracle_check(name, lp, oracle::predictive_dmt_oracle(r, 0.5, t, &c, ORACLE_STEP, DEFAULT_CAP), vars))
                }
                other => out.push(Check::failed(name, format!("{other:?}"))),
            }
        }
    }
    let c = ch(1, 1, 2);
    for rate in [0.5, 1.0, 1.5] {
        let name = format!("rdt-causal {} M=2 u=1 delta=0.5 R={rate}", label(&c));
        match rdt::rdt_causal(rate, 2, ExtReal::Finite(0.5), 1, &c) {
            Ok(v) => out.push(oracle_check(
                name,
                v,
                oracle::rdt_oracle(rate, 2, 0.5, RdtCsit::Causal { delay: 1 }, &c, ORACLE_STEP, DEFAULT_CAP),
                c.blocks,
            )),
            Err(e) => out.push(Check::failed(name, e.to_string())),
        }
        for t in [0, 1] {
            let name = format!("rdt-predictive {} M=2 t={t} delta=0.5 R={rate}", label(&c));
            match rdt::rdt_predictive(rate, 2, ExtReal::Finite(0.5), t, &c) {
                Ok(ExtReal::Finite(v)) => out.push(oracle_check(
                    name,
                    v,
                    oracle::rdt_oracle(rate, 2, 0.5, RdtCsit::Predictive { horizon: t }, &c, ORACLE_STEP, DEFAULT_CAP),
                    c.blocks,
                )),
                other => out.push(Check::failed(name, format!("{other:?}"))),
            }
        }
    }
    out
}

/// Simulated SISO Rayleigh outage against its closed form.
fn sim_vs_exact(opts: &ValidateOptions) -> Vec<Check> {
    let setup = SimulationSetup {
        cfg: ch(1, 1, 1),
        csit: CsitSpec { mode: CsitMode::None, delta: ExtReal::ZERO },
        policy: PowerPolicy::Uniform,
        input: InputAlphabet::Gaussian,
    };
    let mut out = Vec::new();
    for snr in [1.0, 10.0, 100.0] {
        for rate in [0.5, 1.0, 2.0] {
            let name = format!("siso P={snr} R={rate}");
            let exact = oracle::exact_outage_rayleigh_siso(snr, rate);
            let sd = (exact * (1.0 - exact) / opts.trials as f64).sqrt();
            match simulate_outage(&setup, snr, rate, opts.trials, opts.seed) {
                Ok(est) => out.push(Check::compare(name, exact, est.p_out, 4.0 * 1.96 * sd.max(est.ci95 / 1.96))),
                Err(e) => out.push(Check::failed(name, e.to_string())),
            }
        }
    }
    out
}

/// Saturation thresholds and the rate region where CSIT helps.
fn thresholds() -> Vec<Check> {
    let mut out = Vec::new();
    let blocks = 4;
    for u in 1..blocks {
        for r in [0.0, 0.3, 0.6] {
            let name = format!("dmt-vector n=1 B={blocks} u={u} r={r} saturates at threshold");
            let Some(thr) = dmt::vector_delta_threshold(r, u, 1, blocks) else {
                let flat = dmt::dmt_causal_vector(r, ExtReal::ZERO, u, 1, blocks)
                    .and_then(|a| dmt::dmt_causal_vector(r, ExtReal::Infinite, u, 1, blocks).map(|b| (a, b)));
                out.push(match flat {
                    Ok((a, b)) => Check::compare(format!("{name} (no gain)"), a, b, 1e-9),
                    Err(e) => Check::failed(name, e.to_string()),
                });
                continue;
            };
            let sat = dmt::dmt_causal_vector(r, ExtReal::Infinite, u, 1, blocks);
            let at = dmt::dmt_causal_vector(r, ExtReal::Finite(thr), u, 1, blocks);
            let below = dmt::dmt_causal_vector(r, ExtReal::Finite(0.9 * thr), u, 1, blocks);
            match (sat, at, below) {
                (Ok(s), Ok(a), Ok(b)) => {
                    out.push(Check::compare(name.clone(), s, a, 1e-9));
                    out.push(Check::holds(format!("{name}, not before"), thr == 0.0 || b < s - 1e-9, format!("threshold {thr}")));
                }
                e => out.push(Check::failed(name, format!("{e:?}"))),
            }
            let lp_name = format!("dmt-causal 1x1 B={blocks} u={u} r={r} unbounded CSIT");
            match (dmt::dmt_causal(r, ExtReal::Infinite, u, &ch(1, 1, blocks)), dmt::dmt_causal_vector(r, ExtReal::Infinite, u, 1, blocks)) {
                (Ok(a), Ok(b)) => out.push(Check::compare(lp_name, b, a, TAU_DISC)),
                e => out.push(Check::failed(lp_name, format!("{e:?}"))),
            }
        }
    }
    let c = ch(2, 2, 4);
    for delta in [ExtReal::Finite(1.0), ExtReal::Infinite] {
        let name = format!("dmt-causal {} u=3 delta={delta} gains only below r=1.25", label(&c));
        let mut gain_below = false;
        let mut failure = None;
        for r in grid(0.0, 2.0, 0.05) {
            match (dmt::dmt_causal(r, delta, 3, &c), dmt_uniform(r, &c)) {
                (Ok(d), Ok(base)) => {
                    if r >= 1.25 - 1e-12 && (d - base).abs() > TAU_DISC {
                        failure = Some(format!("r={r}: {d} vs uniform {base}"));
                        break;
                    }
                    gain_below |= r < 1.25 && d > base + TAU_DISC;
                }
                e => {
                    failure = Some(format!("r={r}: {e:?}"));
                    break;
                }
            }
        }
        out.push(match failure {
            Some(f) => Check::failed(name, f),
            None => Check::holds(name, gain_below, "no gain found below 1.25".into()),
        });
    }
    for (n, blocks) in [(1, 2), (2, 3), (3, 4)] {
        for u in 1..=blocks {
            for r in grid(0.0, 1.0, 0.05) {
                let load = blocks as f64 * (1.0 - r);
                if (u as f64) < load - 1e-12 {
                    continue;
                }
                let name = format!("dmt-vector n={n} B={blocks} u={u} r={r:.2} no CSIT gain");
                match dmt::dmt_causal_vector(r, ExtReal::Infinite, u, n, blocks) {
                    Ok(d) => out.push(Check::compare(name, n as f64 * load, d, 1e-9)),
                    Err(e) => out.push(Check::failed(name, e.to_string())),
                }
            }
        }
    }
    let bits = 4;
    let rates: Vec<f64> = grid(0.25, 7.75, 0.25);
    for u in 1..=3 {
        for &rate in &rates {
            let sb = match singleton_bound(rate, bits, &c) {
                Ok(s) => s.bound as f64,
                Err(e) => {
                    out.push(Check::failed(format!("singleton R={rate}"), e.to_string()));
                    continue;
                }
            };
            let gain = rdt::rdt_causal(rate, bits, ExtReal::Finite(0.5), u, &c).map(|d| d > sb + 1e-12);
            let helps = rdt::causal_csit_helps(rate, bits, u, &c);
            let name = format!("rdt-causal {} M={bits} u={u} R={rate} gain region", label(&c));
            match (gain, helps) {
                (Ok(g), Ok(h)) => out.push(Check::holds(name, g == h, format!("gain {g}, predicted {h}"))),
                e => out.push(Check::failed(name, format!("{e:?}"))),
            }
            if let Ok(Some(thr)) = rdt::causal_delta_threshold(rate, bits, u, &c) {
                let name = format!("rdt-causal {} M={bits} u={u} R={rate} saturates at threshold", label(&c));
                match (
                    rdt::rdt_causal(rate, bits, ExtReal::Finite(thr), u, &c),
                    rdt::rdt_causal(rate, bits, ExtReal::Infinite, u, &c),
                ) {
                    (Ok(a), Ok(s)) => out.push(Check::compare(name, s, a, 1e-9)),
                    e => out.push(Check::failed(name, format!("{e:?}"))),
                }
            }
        }
    }
    out
}
