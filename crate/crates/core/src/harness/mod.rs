//! Experiment orchestration.
//!
//! [`run_pipeline`] walks the design flow for every (mode, seed) pair:
//! granularity, candidate generation, response calibration, codebook
//! construction for each method, then BER and net-throughput evaluation.
//! Every random stream is keyed by seed and stage, so a config always
//! reproduces the same bytes regardless of scheduling.

pub mod config;
pub mod selftest;
pub mod table;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::detection::{noise_for_snr, simulate_ber_mismatched, BerEstimate, SignalModel};
use crate::error::{Error, Result};
use crate::geometry::{partition, GranularityMode};
use crate::pipeline::{uses_fixed_patterns, DesignInstance};
use crate::seed;
use crate::throughput::{evaluate_instance, summarize, EvalSettings, SeedOutcome, ThroughputReport};

pub use config::ExperimentConfig;
pub use table::{emit_table, Cell, ResultTable};

pub const BER_COLUMNS: &[&str] = &[
    "method", "K", "n_act", "mode", "snr_db", "trials", "errors", "p_hat", "ci95", "d_min",
];
pub const BER_SEED_COLUMNS: &[&str] = &[
    "method", "K", "n_act", "mode", "seed", "snr_db", "trials", "errors", "p_hat", "ci95", "d_min",
];
pub const THROUGHPUT_COLUMNS: &[&str] = &[
    "mode", "unit_count", "K", "K_eff", "raw_bits", "overhead_fraction", "p_e", "net_bits",
];
pub const SCENARIO_B_COLUMNS: &[&str] = &[
    "mode",
    "unit_count",
    "K",
    "K_eff",
    "raw_bits",
    "overhead_fraction",
    "after_overhead_bits",
    "p_e",
    "net_bits",
];
pub const ERROR_COLUMNS: &[&str] = &["stage", "params", "message"];
pub const DESIGN_COLUMNS: &[&str] = &["mode", "method", "seed", "candidates", "K", "d_min", "bit_width"];

/// One failed (mode, seed) or (mode, method, seed) combination.
#[derive(Debug)]
pub struct Failure {
    pub stage: String,
    pub params: String,
    pub error: Error,
}

impl Failure {
    fn from_error(error: Error) -> Self {
        match error {
            Error::Stage { stage, params, source } => Failure {
                stage: stage.to_string(),
                params,
                error: *source,
            },
            other => Failure {
                stage: "pipeline".into(),
                params: String::new(),
                error: other,
            },
        }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    /// BER aggregated over seeds, one row per (mode, method, SNR).
    pub ber: ResultTable,
    pub ber_per_seed: ResultTable,
    pub throughput: ResultTable,
    pub reports: Vec<ThroughputReport>,
    pub errors: ResultTable,
    pub failures: Vec<Failure>,
}

impl PipelineOutput {
    pub fn tables(&self) -> Vec<&ResultTable> {
        vec![&self.ber, &self.ber_per_seed, &self.throughput, &self.errors]
    }
}

#[derive(Debug, Clone)]
struct SeedBerRow {
    mode: usize,
    method: usize,
    seed: u64,
    snr: usize,
    k: usize,
    d_min: f64,
    est: BerEstimate,
}

#[derive(Debug, Default)]
struct CellWork {
    mode: usize,
    ber: Vec<SeedBerRow>,
    outcome: Option<SeedOutcome>,
    failures: Vec<Failure>,
}

fn text_cell(s: &str) -> Cell {
    Cell::Text(s.replace([',', '\n'], ";"))
}

fn run_cell(cfg: &ExperimentConfig, mode_idx: usize, mode: GranularityMode, seed: u64) -> CellWork {
    let mut work = CellWork {
        mode: mode_idx,
        ..CellWork::default()
    };
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => {
            work.failures.push(Failure::from_error(e));
            return work;
        }
    };
    let channel = cfg.channel();
    let inst = match DesignInstance::build(&grid, mode, &cfg.rule(), &channel, seed) {
        Ok(i) => i,
        Err(e) => {
            work.failures.push(Failure::from_error(e));
            return work;
        }
    };
    let mut fixed = None;
    for (method_idx, &method) in cfg.methods.iter().enumerate() {
        let source = if uses_fixed_patterns(method) {
            if fixed.is_none() {
                match DesignInstance::fixed_benchmark(&grid, cfg.n_act, &channel, seed) {
                    Ok(f) => fixed = Some(f),
                    Err(e) => {
                        work.failures.push(Failure::from_error(e));
                        continue;
                    }
                }
            }
            fixed.as_ref().expect("just built")
        } else {
            &inst
        };
        let cb = match source.select(method, cfg.k) {
            Ok(cb) => cb,
            Err(e) => {
                work.failures.push(Failure::from_error(e));
                continue;
            }
        };
        if cfg.trials == 0 {
            continue;
        }
        for (snr_idx, &snr) in cfg.snr_db.iter().enumerate() {
            let stream = seed::derive(seed, &format!("ber/{method}"), snr_idx as u64);
            let est = noise_for_snr(&cb, &source.true_map, cfg.pilot, snr)
                .and_then(|n0| SignalModel::new(cfg.pilot, n0))
                .and_then(|signal| {
                    simulate_ber_mismatched(&cb, &source.true_map, &source.design_map, &signal, cfg.trials, stream)
                });
            match est {
                Ok(est) => work.ber.push(SeedBerRow {
                    mode: mode_idx,
                    method: method_idx,
                    seed,
                    snr: snr_idx,
                    k: cb.k(),
                    d_min: cb.d_min,
                    est,
                }),
                Err(e) => work.failures.push(Failure::from_error(e.in_stage(
                    "evaluation",
                    format!("method={method} mode={mode} seed={seed} snr_db={snr}"),
                ))),
            }
        }
    }
    if cfg.trials > 0 {
        let eval = EvalSettings {
            k: cfg.k,
            pilot: cfg.pilot,
            snr_db: cfg.throughput_snr_db,
            trials: cfg.trials,
            delta_fraction: cfg.delta_fraction,
        };
        match evaluate_instance(&inst, &eval) {
            Ok(o) => work.outcome = Some(o),
            Err(e) => work.failures.push(Failure::from_error(e)),
        }
    }
    work
}

fn stamp(table: ResultTable, cfg: &ExperimentConfig) -> ResultTable {
    table
        .with_meta("config_hash", cfg.hash())
        .with_meta("seeds", cfg.seeds_label())
        .with_meta("tool_version", env!("CARGO_PKG_VERSION"))
}

/// Runs every (mode, method, seed) combination of a validated config.
///
/// Failures in one combination are collected in the error manifest and the
/// remaining combinations still produce rows.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let cells: Vec<(usize, GranularityMode, u64)> = cfg
        .modes
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| cfg.seeds.iter().map(move |&s| (i, m, s)))
        .collect();
    let work: Vec<CellWork> = cells
        .par_iter()
        .map(|&(i, m, s)| run_cell(cfg, i, m, s))
        .collect();

    let mut ber = stamp(ResultTable::new("ber", BER_COLUMNS), cfg);
    let mut per_seed = stamp(ResultTable::new("ber_per_seed", BER_SEED_COLUMNS), cfg);
    let mut throughput = stamp(ResultTable::new("throughput", THROUGHPUT_COLUMNS), cfg);

    // (mode, method, snr) -> (K, trials, errors, d_min sum, seeds)
    let mut agg: BTreeMap<(usize, usize, usize), (usize, u64, u64, f64, usize)> = BTreeMap::new();
    let mut outcomes: BTreeMap<usize, Vec<SeedOutcome>> = BTreeMap::new();
    let mut failures = Vec::new();
    for w in work {
        for r in &w.ber {
            let mode = cfg.modes[r.mode];
            per_seed.push(vec![
                cfg.methods[r.method].tag().into(),
                r.k.into(),
                cfg.n_act.into(),
                mode.to_string().into(),
                r.seed.into(),
                cfg.snr_db[r.snr].into(),
                r.est.trials.into(),
                r.est.errors.into(),
                r.est.p_hat.into(),
                r.est.ci95_half_width.into(),
                r.d_min.into(),
            ])?;
            let e = agg.entry((r.mode, r.method, r.snr)).or_insert((0, 0, 0, 0.0, 0));
            e.0 = e.0.max(r.k);
            e.1 += r.est.trials;
            e.2 += r.est.errors;
            e.3 += r.d_min;
            e.4 += 1;
        }
        if let Some(o) = w.outcome {
            outcomes.entry(w.mode).or_default().push(o);
        }
        failures.extend(w.failures);
    }
    for (&(mode, method, snr), &(k, trials, errs, dsum, n)) in &agg {
        let est = BerEstimate::from_counts(trials, errs);
        ber.push(vec![
            cfg.methods[method].tag().into(),
            k.into(),
            cfg.n_act.into(),
            cfg.modes[mode].to_string().into(),
            cfg.snr_db[snr].into(),
            trials.into(),
            errs.into(),
            est.p_hat.into(),
            est.ci95_half_width.into(),
            (dsum / n as f64).into(),
        ])?;
    }
    let grid = cfg.grid()?;
    let mut reports = Vec::new();
    for (mode_idx, &mode) in cfg.modes.iter().enumerate() {
        let Some(outs) = outcomes.get(&mode_idx) else { continue };
        let part = partition(&grid, mode)?;
        let r = summarize(mode, &part, outs, &cfg.overhead)?;
        throughput.push(vec![
            mode.to_string().into(),
            r.unit_count.into(),
            r.k.into(),
            r.k_eff.into(),
            r.raw_bits.into(),
            r.overhead_fraction.into(),
            r.p_e.into(),
            r.net_bits.into(),
        ])?;
        reports.push(r);
    }
    let errors = failure_table(cfg, &failures)?;
    Ok(PipelineOutput {
        ber,
        ber_per_seed: per_seed,
        throughput,
        reports,
        errors,
        failures,
    })
}

fn file_label(mode: GranularityMode) -> String {
    mode.to_string().replace(':', "-")
}

/// Scenario A: BER against SNR for each codebook method on the element grid.
pub fn scenario_a_config() -> ExperimentConfig {
    use crate::codebook::SelectionMethod::*;
    ExperimentConfig {
        modes: vec![GranularityMode::Element],
        n_act: 16,
        m_samples: 512,
        methods: vec![FixedRis, Random, LayoutMaxmin, ResponseMaxminGreedy],
        k: 8,
        snr_db: (0..11).map(|i| -5.0 + 2.5 * i as f64).collect(),
        trials: 10_000,
        seeds: (1..=200).collect(),
        output_dir: "scenario_a".into(),
        ..ExperimentConfig::default()
    }
}

/// Scenario B: net throughput per actuation granularity.
pub fn scenario_b_config() -> ExperimentConfig {
    ExperimentConfig {
        modes: vec![
            GranularityMode::Element,
            GranularityMode::Group { rows: 2, cols: 2 },
            GranularityMode::Block { rows: 4, cols: 4 },
        ],
        n_act: 16,
        k: 8,
        snr_db: Vec::new(),
        trials: 4_000,
        seeds: (1..=8).collect(),
        output_dir: "scenario_b".into(),
        ..ExperimentConfig::default()
    }
}

/// Runs the BER part of a config and writes the aggregated table, the
/// per-seed table and the error manifest under `out`.
pub fn reproduce_scenario_a_with(cfg: &ExperimentConfig, out: &Path) -> Result<(ResultTable, PipelineOutput)> {
    let run = run_pipeline(cfg)?;
    emit_table(&run.ber, &out.join("scenario_a_ber.csv"))?;
    emit_table(&run.ber_per_seed, &out.join("scenario_a_ber_per_seed.csv"))?;
    emit_table(&run.errors, &out.join("scenario_a_errors.csv"))?;
    Ok((run.ber.clone(), run))
}

pub fn reproduce_scenario_a(out: &Path) -> Result<ResultTable> {
    reproduce_scenario_a_with(&scenario_a_config(), out).map(|(t, _)| t)
}

/// Three-bar table: raw, after-overhead and net bits for every mode.
pub fn scenario_b_table(cfg: &ExperimentConfig, reports: &[ThroughputReport]) -> Result<ResultTable> {
    let mut t = stamp(ResultTable::new("scenario_b", SCENARIO_B_COLUMNS), cfg);
    for r in reports {
        t.push(vec![
            r.mode.to_string().into(),
            r.unit_count.into(),
            r.k.into(),
            r.k_eff.into(),
            r.raw_bits.into(),
            r.overhead_fraction.into(),
            r.after_overhead_bits().into(),
            r.p_e.into(),
            r.net_bits.into(),
        ])?;
    }
    Ok(t)
}

pub fn reproduce_scenario_b_with(cfg: &ExperimentConfig, out: &Path) -> Result<(ResultTable, PipelineOutput)> {
    let run = run_pipeline(cfg)?;
    let table = scenario_b_table(cfg, &run.reports)?;
    emit_table(&table, &out.join("scenario_b.csv"))?;
    emit_table(&run.errors, &out.join("scenario_b_errors.csv"))?;
    Ok((table, run))
}

pub fn reproduce_scenario_b(out: &Path) -> Result<ResultTable> {
    reproduce_scenario_b_with(&scenario_b_config(), out).map(|(t, _)| t)
}

/// `design`: candidates, responses and one codebook per method for the
/// first seed of every mode.
pub fn design(cfg: &ExperimentConfig, out: &Path) -> Result<(ResultTable, Vec<Failure>)> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let channel = cfg.channel();
    let seed = cfg.seeds[0];
    let mut table = stamp(ResultTable::new("design", DESIGN_COLUMNS), cfg);
    let mut failures = Vec::new();
    let write = |name: String, text: String| -> Result<()> {
        let path = out.join(name);
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    for &mode in &cfg.modes {
        let inst = match DesignInstance::build(&grid, mode, &cfg.rule(), &channel, seed) {
            Ok(i) => i,
            Err(e) => {
                failures.push(Failure::from_error(e));
                continue;
            }
        };
        let label = file_label(mode);
        write(format!("candidates_{label}.txt"), inst.candidates.to_text())?;
        write(format!("responses_{label}.txt"), inst.true_map.to_text())?;
        let mut fixed = None;
        for &method in &cfg.methods {
            let source = if uses_fixed_patterns(method) {
                if fixed.is_none() {
                    match DesignInstance::fixed_benchmark(&grid, cfg.n_act, &channel, seed) {
                        Ok(f) => fixed = Some(f),
                        Err(e) => {
                            failures.push(Failure::from_error(e));
                            continue;
                        }
                    }
                }
                fixed.as_ref().expect("just built")
            } else {
                &inst
            };
            match source.select(method, cfg.k) {
                Ok(cb) => {
                    write(format!("codebook_{label}_{method}.txt"), cb.to_text())?;
                    table.push(vec![
                        mode.to_string().into(),
                        method.tag().into(),
                        seed.into(),
                        source.len().into(),
                        cb.k().into(),
                        cb.d_min.into(),
                        cb.bit_width.into(),
                    ])?;
                }
                Err(e) => failures.push(Failure::from_error(e)),
            }
        }
    }
    emit_table(&table, &out.join("design.csv"))?;
    emit_table(&failure_table(cfg, &failures)?, &out.join("design_errors.csv"))?;
    Ok((table, failures))
}

fn failure_table(cfg: &ExperimentConfig, failures: &[Failure]) -> Result<ResultTable> {
    let mut t = stamp(ResultTable::new("errors", ERROR_COLUMNS), cfg);
    for f in failures {
        t.push(vec![text_cell(&f.stage), text_cell(&f.params), text_cell(&f.error.to_string())])?;
    }
    Ok(t)
}

/// `ber`: aggregated and per-seed BER tables plus the error manifest.
pub fn ber(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineOutput> {
    let run = run_pipeline(cfg)?;
    emit_table(&run.ber, &out.join("ber.csv"))?;
    emit_table(&run.ber_per_seed, &out.join("ber_per_seed.csv"))?;
    emit_table(&run.errors, &out.join("ber_errors.csv"))?;
    Ok(run)
}

/// `sweep`: the granularity throughput table only.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineOutput> {
    let cfg = ExperimentConfig {
        snr_db: Vec::new(),
        ..cfg.clone()
    };
    let run = run_pipeline(&cfg)?;
    emit_table(&run.throughput, &out.join("sweep.csv"))?;
    emit_table(&run.errors, &out.join("sweep_errors.csv"))?;
    Ok(run)
}

/// Process exit code for an error: 2 config/argument, 3 infeasible, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Infeasible { .. } => 3,
        Error::Io { .. } => 4,
        _ => 2,
    }
}
