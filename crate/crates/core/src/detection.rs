//! Pilot-aided maximum-likelihood index detection and its error rate.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{complex_gaussian, ResponseMap, ResponseVector};
use crate::codebook::{response_distance, Codebook};
use crate::error::{Error, Result};
use crate::seed;

/// Trials per independent random stream in [`simulate_ber`].
pub const TRIAL_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pilot: Complex64,
    noise_n0: f64,
}

impl SignalModel {
    pub fn new(pilot: Complex64, noise_n0: f64) -> Result<Self> {
        if !(noise_n0 > 0.0 && noise_n0.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_n0}")));
        }
        if !(pilot.norm() > 0.0 && pilot.is_finite()) {
            return Err(Error::invalid("pilot symbol must be non-zero"));
        }
        Ok(SignalModel { pilot, noise_n0 })
    }

    /// Unit pilot `1 + 0j`.
    pub fn with_noise(noise_n0: f64) -> Result<Self> {
        Self::new(Complex64::new(1.0, 0.0), noise_n0)
    }

    pub fn pilot(&self) -> Complex64 {
        self.pilot
    }

    pub fn noise_n0(&self) -> f64 {
        self.noise_n0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSample(pub Vec<Complex64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci95_half_width: f64,
}

impl BerEstimate {
    pub fn from_counts(trials: u64, errors: u64) -> Self {
        let p_hat = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        let ci95_half_width = if trials == 0 {
            0.0
        } else {
            1.96 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
        };
        BerEstimate {
            trials,
            errors,
            p_hat,
            ci95_half_width,
        }
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
        }
    }
}

fn nearest(y: &[Complex64], scaled: &[Vec<Complex64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, h) in scaled.iter().enumerate() {
        let d: f64 = y.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Index of the codeword whose pilot-scaled response is nearest to `y`,
/// lowest index on ties.
pub fn detect_index(
    y: &ReceivedSample,
    codebook_responses: &[ResponseVector],
    signal: &SignalModel,
) -> Result<usize> {
    if codebook_responses.is_empty() {
        return Err(Error::invalid("cannot detect against an empty codebook"));
    }
    if let Some(h) = codebook_responses.iter().find(|h| h.len() != y.0.len()) {
        return Err(Error::invalid(format!(
            "received sample has {} antennas but a codeword response has {}",
            y.0.len(),
            h.len()
        )));
    }
    let scaled: Vec<Vec<Complex64>> = codebook_responses
        .iter()
        .map(|h| h.values().iter().map(|v| v * signal.pilot).collect())
        .collect();
    Ok(nearest(&y.0, &scaled))
}

fn codeword_responses<'a>(codebook: &Codebook, map: &'a ResponseMap) -> Result<Vec<&'a ResponseVector>> {
    codebook
        .members
        .iter()
        .map(|&id| {
            map.get(id)
                .ok_or_else(|| Error::invalid(format!("codebook member {id} missing from response map")))
        })
        .collect()
}

/// Monte Carlo index symbol-error rate with matched design and true responses.
pub fn simulate_ber(
    codebook: &Codebook,
    map: &ResponseMap,
    signal: &SignalModel,
    trials: u64,
    seed: u64,
) -> Result<BerEstimate> {
    simulate_ber_mismatched(codebook, map, map, signal, trials, seed)
}

/// Monte Carlo index symbol-error rate where the channel produces
/// `true_map` responses but the detector matches against `design_map`.
///
/// Trials are split into chunks of [`TRIAL_CHUNK`], each with its own stream
/// keyed by chunk index, so the count is independent of the thread count.
pub fn simulate_ber_mismatched(
    codebook: &Codebook,
    true_map: &ResponseMap,
    design_map: &ResponseMap,
    signal: &SignalModel,
    trials: u64,
    seed: u64,
) -> Result<BerEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if codebook.members.is_empty() {
        return Err(Error::invalid("codebook is empty"));
    }
    let truth = codeword_responses(codebook, true_map)?;
    let design = codeword_responses(codebook, design_map)?;
    let rx = truth[0].len();
    if truth.iter().chain(&design).any(|h| h.len() != rx) {
        return Err(Error::invalid("codeword responses have inconsistent antenna counts"));
    }
    let pilot = signal.pilot;
    let tx: Vec<Vec<Complex64>> = truth
        .iter()
        .map(|h| h.values().iter().map(|v| v * pilot).collect())
        .collect();
    let reference: Vec<Vec<Complex64>> = design
        .iter()
        .map(|h| h.values().iter().map(|v| v * pilot).collect())
        .collect();
    let sigma = signal.noise_n0.sqrt();
    let k = tx.len();
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = TRIAL_CHUNK.min(trials - c * TRIAL_CHUNK);
            let mut rng = seed::stream(seed, "trials", c);
            let mut y = vec![Complex64::new(0.0, 0.0); rx];
            let mut errs = 0u64;
            for _ in 0..n {
                let sent = rng.gen_range(0..k);
                for (slot, s) in y.iter_mut().zip(&tx[sent]) {
                    *slot = s + complex_gaussian(&mut rng) * sigma;
                }
                if nearest(&y, &reference) != sent {
                    errs += 1;
                }
            }
            errs
        })
        .sum();
    Ok(BerEstimate::from_counts(trials, errors))
}

/// Gaussian tail probability `0.5 erfc(x / sqrt 2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Binary ML error probability between two responses at squared distance
/// `d` under noise variance `n0` per complex dimension (unit pilot).
pub fn pairwise_error_prob(d: f64, n0: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be non-negative, got {d}")));
    }
    if !(n0 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be positive, got {n0}")));
    }
    Ok(q_function((d / (2.0 * n0)).sqrt()))
}

/// Union bound on the index error probability (unit pilot), clipped at 1.
pub fn union_bound(codebook: &Codebook, map: &ResponseMap, n0: f64) -> Result<f64> {
    let k = codebook.k();
    if k < 2 {
        return Err(Error::invalid("union bound needs at least two codewords"));
    }
    let hs = codeword_responses(codebook, map)?;
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += pairwise_error_prob(response_distance(hs[i], hs[j])?, n0)?;
            }
        }
    }
    Ok((total / k as f64).min(1.0))
}

/// Mean received pilot energy over the codebook, `mean_i |pilot|^2 ||h_i||^2`.
pub fn mean_pilot_energy(codebook: &Codebook, map: &ResponseMap, pilot: Complex64) -> Result<f64> {
    let hs = codeword_responses(codebook, map)?;
    if hs.is_empty() {
        return Err(Error::invalid("codebook is empty"));
    }
    Ok(pilot.norm_sqr() * hs.iter().map(|h| h.energy()).sum::<f64>() / hs.len() as f64)
}

/// SNR in dB: mean received pilot energy over `rx_antennas * n0`.
pub fn snr_db(codebook: &Codebook, map: &ResponseMap, signal: &SignalModel) -> Result<f64> {
    let e = mean_pilot_energy(codebook, map, signal.pilot)?;
    Ok(10.0 * (e / (map.rx_antennas() as f64 * signal.noise_n0)).log10())
}

/// Noise variance that puts the codebook at `snr_db`.
pub fn noise_for_snr(codebook: &Codebook, map: &ResponseMap, pilot: Complex64, snr_db: f64) -> Result<f64> {
    let e = mean_pilot_energy(codebook, map, pilot)?;
    if !(e > 0.0) {
        return Err(Error::invalid("codebook responses carry no energy; SNR is undefined"));
    }
    Ok(e / (map.rx_antennas() as f64 * 10f64.powf(snr_db / 10.0)))
}
