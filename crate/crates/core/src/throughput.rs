//! Overhead-penalized net spatial-index throughput across granularities.
//!
//! `net = (1 - T_oh / T_c) * log2(K_eff) * (1 - P_e)`, with the overhead
//! ratio modeled as pilot symbols per controllable unit plus pilot symbols
//! per codeword, normalized by the reconfiguration interval.

use num_complex::Complex64;

use crate::channel::ChannelParams;
use crate::codebook::{effective_size, SelectionMethod};
use crate::detection::{noise_for_snr, simulate_ber_mismatched, SignalModel};
use crate::error::{Error, Result};
use crate::geometry::{partition, ApertureGrid, GranularityMode, UnitPartition};
use crate::pipeline::{CandidateRule, DesignInstance};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadParams {
    /// Pilot symbols per controllable unit.
    pub alpha_unit: f64,
    /// Pilot symbols per codeword.
    pub beta_codeword: f64,
    /// Symbols per reconfiguration interval.
    pub coherence_symbols: f64,
}

impl Default for OverheadParams {
    fn default() -> Self {
        OverheadParams {
            alpha_unit: 1.0,
            beta_codeword: 2.0,
            coherence_symbols: 256.0,
        }
    }
}

impl OverheadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_unit >= 0.0 && self.beta_codeword >= 0.0) {
            return Err(Error::invalid("overhead costs must be non-negative"));
        }
        if !(self.coherence_symbols > 0.0) {
            return Err(Error::invalid("coherence_symbols must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub mode: GranularityMode,
    pub unit_count: usize,
    pub k: usize,
    /// Effective codebook size, averaged over seeds.
    pub k_eff: f64,
    /// Mean of `log2(K_eff)` over seeds.
    pub raw_bits: f64,
    pub overhead_fraction: f64,
    pub p_e: f64,
    pub net_bits: f64,
}

impl ThroughputReport {
    /// The middle bar: raw bits after the overhead factor only.
    pub fn after_overhead_bits(&self) -> f64 {
        (1.0 - self.overhead_fraction) * self.raw_bits
    }
}

pub fn overhead_fraction(partition: &UnitPartition, k: usize, params: &OverheadParams) -> f64 {
    let symbols = params.alpha_unit * partition.unit_count() as f64 + params.beta_codeword * k as f64;
    (symbols / params.coherence_symbols).clamp(0.0, 1.0)
}

/// Net bits from raw bits, overhead ratio and error probability.
pub fn net_bits(raw_bits: f64, overhead_fraction: f64, p_e: f64) -> f64 {
    (1.0 - overhead_fraction) * raw_bits * (1.0 - p_e)
}

pub fn net_throughput(k_eff: usize, overhead_fraction: f64, p_e: f64) -> Result<f64> {
    if k_eff == 0 {
        return Err(Error::invalid("k_eff must be positive"));
    }
    if !(0.0..=1.0).contains(&overhead_fraction) || !(0.0..=1.0).contains(&p_e) {
        return Err(Error::invalid(format!(
            "overhead fraction and error probability must lie in [0, 1], got {overhead_fraction} and {p_e}"
        )));
    }
    Ok(net_bits((k_eff as f64).log2(), overhead_fraction, p_e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid: ApertureGrid,
    pub modes: Vec<GranularityMode>,
    pub rule: CandidateRule,
    pub k: usize,
    pub channel: ChannelParams,
    pub overhead: OverheadParams,
    pub pilot: Complex64,
    /// Reference SNR at which `P_e` is simulated.
    pub snr_db: f64,
    pub trials: u64,
    pub seeds: Vec<u64>,
    /// `K_eff` pruning threshold as a fraction of the median pairwise distance.
    pub delta_fraction: f64,
}

/// Per-seed quantities for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub k: usize,
    pub k_eff: usize,
    pub p_e: f64,
}

/// Fixed evaluation settings for the response-aware codebook of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub k: usize,
    pub pilot: Complex64,
    pub snr_db: f64,
    pub trials: u64,
    pub delta_fraction: f64,
}

/// Selects the response-aware codebook on `inst`, prunes it to `K_eff` and
/// simulates its index error rate at the reference SNR.
pub fn evaluate_instance(inst: &DesignInstance, eval: &EvalSettings) -> Result<SeedOutcome> {
    let cb = inst.select(SelectionMethod::ResponseMaxminGreedy, eval.k)?;
    let delta = eval.delta_fraction * inst.distances.median_offdiagonal();
    let k_eff = effective_size(&cb, &inst.distances, delta);
    let stage = |e: Error| e.in_stage("evaluation", format!("mode={} seed={}", inst.mode, inst.seed));
    let n0 = noise_for_snr(&cb, &inst.true_map, eval.pilot, eval.snr_db).map_err(stage)?;
    let signal = SignalModel::new(eval.pilot, n0).map_err(stage)?;
    let est = simulate_ber_mismatched(
        &cb,
        &inst.true_map,
        &inst.design_map,
        &signal,
        eval.trials,
        seed::derive(inst.seed, "throughput-ber", 0),
    )
    .map_err(stage)?;
    Ok(SeedOutcome {
        seed: inst.seed,
        k: cb.k(),
        k_eff,
        p_e: est.p_hat,
    })
}

impl SweepConfig {
    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            k: self.k,
            pilot: self.pilot,
            snr_db: self.snr_db,
            trials: self.trials,
            delta_fraction: self.delta_fraction,
        }
    }
}

/// Runs the response-aware design for one mode and one seed.
pub fn evaluate_mode_seed(cfg: &SweepConfig, mode: GranularityMode, seed: u64) -> Result<SeedOutcome> {
    let inst = DesignInstance::build(&cfg.grid, mode, &cfg.rule, &cfg.channel, seed)?;
    evaluate_instance(&inst, &cfg.eval_settings())
}

/// Averages per-seed outcomes into one report.
pub fn summarize(
    mode: GranularityMode,
    part: &UnitPartition,
    outcomes: &[SeedOutcome],
    overhead: &OverheadParams,
) -> Result<ThroughputReport> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no seed outcomes to summarize"));
    }
    let n = outcomes.len() as f64;
    let k = outcomes.iter().map(|o| o.k).max().unwrap_or(0);
    let k_eff = outcomes.iter().map(|o| o.k_eff as f64).sum::<f64>() / n;
    let raw_bits = outcomes.iter().map(|o| (o.k_eff as f64).log2()).sum::<f64>() / n;
    let p_e = outcomes.iter().map(|o| o.p_e).sum::<f64>() / n;
    let oh = overhead_fraction(part, k, overhead);
    Ok(ThroughputReport {
        mode,
        unit_count: part.unit_count(),
        k,
        k_eff,
        raw_bits,
        overhead_fraction: oh,
        p_e,
        net_bits: net_bits(raw_bits, oh, p_e),
    })
}

/// One report (or error) per mode, in input order.
pub fn granularity_sweep(cfg: &SweepConfig) -> Vec<Result<ThroughputReport>> {
    cfg.modes
        .iter()
        .map(|&mode| {
            cfg.overhead.validate()?;
            if cfg.seeds.is_empty() {
                return Err(Error::invalid("sweep needs at least one seed"));
            }
            let part = partition(&cfg.grid, mode).map_err(|e| e.in_stage("granularity", format!("mode={mode}")))?;
            let outcomes = cfg
                .seeds
                .iter()
                .map(|&s| evaluate_mode_seed(cfg, mode, s))
                .collect::<Result<Vec<_>>>()?;
            summarize(mode, &part, &outcomes, &cfg.overhead)
        })
        .collect()
}
