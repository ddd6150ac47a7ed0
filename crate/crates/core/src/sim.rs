//! Finite-SNR Monte-Carlo outage simulation over Rayleigh block fading with
//! noisy CSIT.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChannelConfig, CsitMode, CsitSpec, ExtReal};

/// Largest number of input vectors enumerated by the discrete-input
/// mutual information.
pub const MAX_INPUT_VECTORS: usize = 1 << 16;
pub const DEFAULT_NOISE_SAMPLES: usize = 512;
const EIGEN_FLOOR: f64 = 1e-300;
const TRIAL_CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite channel entries")]
    NonFinite,
    #[error("{size} input vectors exceed the enumeration cap of {MAX_INPUT_VECTORS}; use fewer bits per symbol or antennas")]
    AlphabetTooLarge { size: u128 },
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} has zero outage probability; raise the trial count or lower the SNR")]
    ZeroOutage(usize),
    #[error("invalid simulation input: {0}")]
    Invalid(String),
}

/// `log2 det(I + S S^H)` via a Cholesky factor of the smaller Gram matrix.
pub fn mutual_info_gaussian(s: &DMatrix<Complex64>) -> Result<f64, SimError> {
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::NonFinite);
    }
    let gram = if s.nrows() <= s.ncols() { s * s.adjoint() } else { s.adjoint() * s };
    let dim = gram.nrows();
    let a = DMatrix::<Complex64>::identity(dim, dim) + gram;
    let chol = nalgebra::Cholesky::new(a).ok_or(SimError::NonFinite)?;
    let l = chol.l_dirty();
    let ln_det: f64 = (0..dim).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    Ok(ln_det / std::f64::consts::LN_2)
}

/// Unit average energy constellation of `2^bits` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub bits: u32,
    pub points: Vec<Complex64>,
}

impl Constellation {
    pub fn bpsk() -> Self {
        Constellation { bits: 1, points: vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)] }
    }

    pub fn qpsk() -> Self {
        Self::qam(2)
    }

    /// Square QAM for even `bits`.
    pub fn qam(bits: u32) -> Self {
        assert!(bits >= 2 && bits % 2 == 0, "square QAM needs an even bit count");
        let side = 1usize << (bits / 2);
        let pam: Vec<f64> = (0..side).map(|i| 2.0 * i as f64 - (side - 1) as f64).collect();
        let points = pam.iter().flat_map(|&re| pam.iter().map(move |&im| Complex64::new(re, im))).collect();
        Constellation { bits, points }.normalized()
    }

    pub fn psk(bits: u32) -> Self {
        let size = 1usize << bits;
        let points = (0..size)
            .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / size as f64))
            .collect();
        Constellation { bits, points }
    }

    /// BPSK for one bit, square QAM for even counts, PSK otherwise.
    pub fn for_bits(bits: u32) -> Self {
        match bits {
            1 => Self::bpsk(),
            b if b % 2 == 0 => Self::qam(b),
            b => Self::psk(b),
        }
    }

    fn normalized(mut self) -> Self {
        let e = self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64;
        let s = e.sqrt();
        self.points.iter_mut().for_each(|p| *p /= s);
        self
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMi {
    pub bits: f64,
    pub stderr: f64,
}

fn cn_sample<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mutual information of `y = S x + z` with `x` uniform over the `nt`-fold
/// product of `constellation` and `z ~ CN(0, I)`. The expectation over `z` is
/// a Monte-Carlo average over `noise_samples` draws taken in antithetic
/// pairs `(z, -z)`.
pub fn mutual_info_discrete<R: Rng>(
    s: &DMatrix<Complex64>,
    constellation: &Constellation,
    noise_samples: usize,
    rng: &mut R,
) -> Result<DiscreteMi, SimError> {
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::NonFinite);
    }
    let (nr, nt) = (s.nrows(), s.ncols());
    let q = constellation.points.len();
    let size = (q as u128).pow(nt as u32);
    if size > MAX_INPUT_VECTORS as u128 {
        return Err(SimError::AlphabetTooLarge { size });
    }
    let size = size as usize;
    let images: Vec<DVector<Complex64>> = (0..size)
        .map(|mut code| {
            let x = DVector::from_fn(nt, |_, _| {
                let p = constellation.points[code % q];
                code /= q;
                p
            });
            s * x
        })
        .collect();
    let pairs = noise_samples.div_ceil(2).max(1);
    let mut scratch = vec![0.0; size];
    let mut pair_means = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let z = DVector::from_fn(nr, |_, _| cn_sample(rng, 1.0));
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let zz = &z * Complex64::new(sign, 0.0);
            let zn = zz.norm_squared();
            let mut total = 0.0;
            for sx in &images {
                for (slot, sxp) in scratch.iter_mut().zip(&images) {
                    let d = sx - sxp + &zz;
                    *slot = -d.norm_squared() + zn;
                }
                total += log_sum_exp(&scratch);
            }
            acc += total / size as f64;
        }
        pair_means.push(acc / 2.0 / std::f64::consts::LN_2);
    }
    let n = pair_means.len() as f64;
    let mean = pair_means.iter().sum::<f64>() / n;
    let var = if pair_means.len() > 1 {
        pair_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let full = constellation.bits as f64 * nt as f64;
    Ok(DiscreteMi { bits: (full - mean).clamp(0.0, full), stderr: (var / n).sqrt() })
}

/// One realization of the true channels, their CSIT estimates and the CSIT
/// errors, all `nr x nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h: Vec<DMatrix<Complex64>>,
    pub h_hat: Vec<DMatrix<Complex64>>,
    pub e: Vec<DMatrix<Complex64>>,
}

/// CSIT noise variance `P^-delta`.
pub fn csit_noise_variance(snr: f64, delta: ExtReal) -> f64 {
    match delta {
        ExtReal::Finite(d) => snr.powf(-d).min(1.0),
        ExtReal::Infinite => 0.0,
    }
}

impl ChannelDraw {
    /// `H = H_hat + E` with `H_hat ~ CN(0, 1 - s2)` and `E ~ CN(0, s2)`
    /// entrywise, so `H` is standard Rayleigh.
    pub fn sample<R: Rng>(cfg: &ChannelConfig, noise_var: f64, rng: &mut R) -> Self {
        let mut draw = ChannelDraw { h: Vec::new(), h_hat: Vec::new(), e: Vec::new() };
        for _ in 0..cfg.blocks {
            let h_hat = DMatrix::from_fn(cfg.nr, cfg.nt, |_, _| cn_sample(rng, 1.0 - noise_var));
            let e = DMatrix::from_fn(cfg.nr, cfg.nt, |_, _| cn_sample(rng, noise_var));
            draw.h.push(&h_hat + &e);
            draw.h_hat.push(h_hat);
            draw.e.push(e);
        }
        draw
    }
}

/// Ascending nonzero eigenvalues of `A A^H` (the smaller Gram matrix).
pub fn gram_eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() { a * a.adjoint() } else { a.adjoint() * a };
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerPolicy {
    Uniform,
    /// Power exponent `p_b = 1 + sum c_i alpha_hat_{b',i}` over the CSIT blocks
    /// visible at block `b`, rescaled per block so the ensemble average of
    /// the block power is `P`.
    ExponentRule,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputAlphabet {
    Gaussian,
    Discrete { constellation: Constellation, noise_samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub snr: f64,
    pub rate: f64,
    pub p_out: f64,
    pub trials: u64,
    pub outages: u64,
    pub ci95: f64,
    /// Ensemble mean of `(1/B) sum_b tr(P_b)`.
    pub mean_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub cfg: ChannelConfig,
    pub csit: CsitSpec,
    pub policy: PowerPolicy,
    pub input: InputAlphabet,
}

impl SimulationSetup {
    fn p_max(&self) -> f64 {
        let (n, m) = (self.cfg.n() as f64, self.cfg.m() as f64);
        let d = self.csit.delta.finite().unwrap_or(0.0);
        1.0 + self.cfg.blocks as f64 * n * m * (1.0 + d)
    }

    /// Clipped power exponents of every block for one draw.
    pub fn power_exponents(&self, draw: &ChannelDraw, snr: f64) -> Vec<f64> {
        let ln_p = snr.ln();
        let p_max = self.p_max();
        let weighted: Vec<f64> = draw
            .h_hat
            .iter()
            .map(|hh| {
                gram_eigenvalues(hh)
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| self.cfg.eigen_weight(i + 1) * (-(l.max(EIGEN_FLOOR)).ln() / ln_p))
                    .sum()
            })
            .collect();
        (0..self.cfg.blocks)
            .map(|b| {
                let seen = self.csit.known_blocks(b + 1, &self.cfg);
                (1.0 + weighted[..seen].iter().sum::<f64>()).clamp(0.0, p_max)
            })
            .collect()
    }

    fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng
    }

    fn average_mi(&self, draw: &ChannelDraw, powers: &[f64], rng: &mut ChaCha8Rng) -> Result<f64, SimError> {
        let nt = self.cfg.nt as f64;
        let mut total = 0.0;
        for (h, &pw) in draw.h.iter().zip(powers) {
            let s = h * Complex64::new((pw / nt).sqrt(), 0.0);
            total += match &self.input {
                InputAlphabet::Gaussian => mutual_info_gaussian(&s)?,
                InputAlphabet::Discrete { constellation, noise_samples } => {
                    mutual_info_discrete(&s, constellation, *noise_samples, rng)?.bits
                }
            };
        }
        Ok(total / self.cfg.blocks as f64)
    }
}

/// Per-block `ln E[P^{p_b}]` over the trial ensemble, reduced in a fixed
/// order so the result does not depend on the thread count.
fn log_mean_power(setup: &SimulationSetup, snr: f64, trials: u64, seed: u64, noise_var: f64) -> Vec<f64> {
    let ln_p = snr.ln();
    let blocks = setup.cfg.blocks;
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let partial: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![(f64::NEG_INFINITY, 0.0); blocks];
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let mut rng = SimulationSetup::trial_rng(seed, trial);
                let draw = ChannelDraw::sample(&setup.cfg, noise_var, &mut rng);
                for (slot, p) in acc.iter_mut().zip(setup.power_exponents(&draw, snr)) {
                    lse_push(slot, p * ln_p);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![(f64::NEG_INFINITY, 0.0); blocks];
    for chunk in partial {
        for (t, (m, s)) in total.iter_mut().zip(chunk) {
            if s > 0.0 {
                lse_push_scaled(t, m, s);
            }
        }
    }
    total.iter().map(|&(m, s)| m + s.ln() - (trials as f64).ln()).collect()
}

/// Running log-sum-exp as `(max, sum exp(x - max))`.
fn lse_push(acc: &mut (f64, f64), x: f64) {
    lse_push_scaled(acc, x, 1.0);
}

fn lse_push_scaled(acc: &mut (f64, f64), m: f64, s: f64) {
    if m > acc.0 {
        acc.1 = acc.1 * (acc.0 - m).exp() + s;
        acc.0 = m;
    } else {
        acc.1 += s * (m - acc.0).exp();
    }
}

/// Estimates `Pr{(1/B) sum_b I_b < rate}` from `trials` independent draws.
/// Trial `i` uses ChaCha8 seeded with `seed` on stream `i`, so results are
/// reproducible and independent of the thread count.
pub fn simulate_outage(setup: &SimulationSetup, snr: f64, rate: f64, trials: u64, seed: u64) -> Result<OutageEstimate, SimError> {
    if trials == 0 {
        return Err(SimError::Invalid("trials must be at least 1".into()));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(SimError::Invalid(format!("snr must be positive and finite, got {snr}")));
    }
    if !(rate >= 0.0) {
        return Err(SimError::Invalid(format!("rate must be nonnegative, got {rate}")));
    }
    if let ExtReal::Finite(d) = setup.csit.delta {
        if !(d >= 0.0) {
            return Err(SimError::Invalid(format!("delta must be nonnegative, got {d}")));
        }
    }
    let noise_var = csit_noise_variance(snr, setup.csit.delta);
    let finish = |outages: u64, mean_power: f64| {
        let p = outages as f64 / trials as f64;
        let ci = (1.96 * (p * (1.0 - p) / trials as f64).sqrt()).clamp(0.0, 1.0);
        OutageEstimate { snr, rate, p_out: p, trials, outages, ci95: ci, mean_power }
    };
    if rate == 0.0 {
        return Ok(finish(0, snr));
    }
    if let InputAlphabet::Discrete { constellation, .. } = &setup.input {
        if rate >= constellation.bits as f64 * setup.cfg.nt as f64 {
            return Ok(finish(trials, snr));
        }
    }
    let adaptive = setup.policy == PowerPolicy::ExponentRule && setup.csit.mode != CsitMode::None;
    let log_mean = adaptive.then(|| log_mean_power(setup, snr, trials, seed, noise_var));
    let ln_p = snr.ln();
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let partial: Vec<Result<(u64, f64), SimError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut outages = 0u64;
            let mut power = 0.0;
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let mut rng = SimulationSetup::trial_rng(seed, trial);
                let draw = ChannelDraw::sample(&setup.cfg, noise_var, &mut rng);
                let powers: Vec<f64> = match &log_mean {
                    Some(lm) => setup
                        .power_exponents(&draw, snr)
                        .iter()
                        .zip(lm)
                        .map(|(p, l)| (p * ln_p - l).exp() * snr)
                        .collect(),
                    None => vec![snr; setup.cfg.blocks],
                };
                power += powers.iter().sum::<f64>() / setup.cfg.blocks as f64;
                if setup.average_mi(&draw, &powers, &mut rng)? < rate {
                    outages += 1;
                }
            }
            Ok((outages, power))
        })
        .collect();
    let mut outages = 0;
    let mut power = 0.0;
    for r in partial {
        let (o, p) = r?;
        outages += o;
        power += p;
    }
    Ok(finish(outages, power / trials as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Least-squares slope of `-ln p_out` against `ln P`. Points are sorted first
/// so the result does not depend on input order.
pub fn estimate_diversity(points: &[(f64, f64)]) -> Result<DiversityFit, SimError> {
    if points.len() < 3 {
        return Err(SimError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|&(_, p)| !(p > 0.0)) {
        return Err(SimError::ZeroOutage(i));
    }
    if points.iter().any(|&(s, p)| !(s > 0.0) || !s.is_finite() || !p.is_finite()) {
        return Err(SimError::Invalid("SNR values must be positive and finite".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(s, p)| (s.ln(), -p.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SimError::Invalid("SNR values must not all be equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Ok(DiversityFit { slope, stderr: (sse / (n - 2.0) / sxx).sqrt() })
}
