//! Experiment configuration: a flat `key = value` file with dotted sections.
//!
//! ```text
//! # scenario A
//! grid.rows = 8
//! geometry.modes = element, group:2x2
//! detection.snr_db = -5:2.5:20
//! run.seeds = 1..200
//! ```
//!
//! Unknown keys are errors. Lists are comma separated; `a:step:b` is an
//! inclusive arithmetic range and `a..b` an inclusive integer range.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::channel::{ChannelParams, CouplingKernel, Fading};
use crate::codebook::{SelectionMethod, EXACT_SUBSET_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, enumerate_candidates, partition, ApertureGrid, GranularityMode};
use crate::pipeline::CandidateRule;
use crate::throughput::OverheadParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub grid_spacing: f64,
    pub modes: Vec<GranularityMode>,
    pub n_act: usize,
    pub m_samples: usize,
    /// `None` means the per-mode default.
    pub min_unit_spacing: Option<f64>,
    pub fading: FadingKind,
    pub tx_position: Option<[f64; 3]>,
    pub rx_position: Option<[f64; 3]>,
    pub rx_antennas: usize,
    pub rho: f64,
    pub kernel: CouplingKernel,
    pub estimation_error_var: f64,
    pub methods: Vec<SelectionMethod>,
    pub k: usize,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub pilot: Complex64,
    pub seeds: Vec<u64>,
    pub overhead: OverheadParams,
    pub throughput_snr_db: f64,
    pub delta_fraction: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    Rayleigh,
    Los,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_rows: 8,
            grid_cols: 8,
            grid_spacing: 0.5,
            modes: vec![GranularityMode::Element],
            n_act: 16,
            m_samples: 512,
            min_unit_spacing: None,
            fading: FadingKind::Rayleigh,
            tx_position: None,
            rx_position: None,
            rx_antennas: 4,
            rho: 0.6,
            kernel: CouplingKernel::Sinc,
            estimation_error_var: 0.0,
            methods: vec![SelectionMethod::ResponseMaxminGreedy],
            k: 8,
            snr_db: vec![10.0],
            trials: 10_000,
            pilot: Complex64::new(1.0, 0.0),
            seeds: vec![1],
            overhead: OverheadParams::default(),
            throughput_snr_db: 10.0,
            delta_fraction: 0.1,
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "grid.rows",
    "grid.cols",
    "grid.spacing",
    "geometry.modes",
    "geometry.n_act",
    "candidates.m_samples",
    "candidates.min_unit_spacing",
    "channel.fading",
    "channel.tx_position",
    "channel.rx_position",
    "channel.rx_antennas",
    "channel.rho",
    "channel.kernel",
    "channel.estimation_error_var",
    "codebook.methods",
    "codebook.k",
    "detection.snr_db",
    "detection.trials",
    "detection.pilot",
    "run.seeds",
    "overhead.alpha_unit",
    "overhead.beta_codeword",
    "overhead.coherence_symbols",
    "throughput.snr_db",
    "throughput.delta_fraction",
    "output.dir",
];

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(key: &str, v: &str) -> std::result::Result<f64, String> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| format!("{key}: `{v}` is not a number"))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.trim()
        .parse::<T>()
        .map_err(|_| format!("{key}: `{v}` is not a non-negative integer"))
}

fn parse_point(key: &str, v: &str) -> std::result::Result<[f64; 3], String> {
    let xs = list(v).map(|x| parse_f64(key, x)).collect::<std::result::Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(xs).map_err(|_| format!("{key}: expected three coordinates x, y, z"))
}

/// `a:step:b` (inclusive, step > 0) or a comma list.
fn parse_grid(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (a, step, b) = (parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(format!("{key}: range `{v}` needs step > 0 and end >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    list(v).map(|x| parse_f64(key, x)).collect()
}

/// `a..b` (inclusive) or a comma list.
fn parse_seeds(key: &str, v: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (parse_int(key, a)?, parse_int(key, b)?);
        if b < a {
            return Err(format!("{key}: empty range `{v}`"));
        }
        return Ok((a..=b).collect());
    }
    list(v).map(|x| parse_int(key, x)).collect()
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults. Reports every bad line.
    pub fn parse(text: &str) -> Result<Self> {
        ExperimentConfig::default().overlay(text)
    }

    /// Parses config text on top of `self`, e.g. over a built-in scenario.
    pub fn overlay(self, text: &str) -> Result<Self> {
        let mut cfg = self;
        let mut errors = Vec::new();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                errors.push(format!("line {}: unknown key `{key}`", lineno + 1));
                continue;
            }
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                errors.push(format!("line {}: duplicate key `{key}`", lineno + 1));
                continue;
            }
            if let Err(e) = cfg.set(key, value) {
                errors.push(format!("line {}: {e}", lineno + 1));
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::default().overlay_file(path)
    }

    pub fn overlay_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.overlay(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "grid.rows" => self.grid_rows = parse_int(key, v)?,
            "grid.cols" => self.grid_cols = parse_int(key, v)?,
            "grid.spacing" => self.grid_spacing = parse_f64(key, v)?,
            "geometry.modes" => {
                self.modes = list(v)
                    .map(|m| m.parse().map_err(|e: Error| format!("{key}: {e}")))
                    .collect::<std::result::Result<_, _>>()?
            }
            "geometry.n_act" => self.n_act = parse_int(key, v)?,
            "candidates.m_samples" => self.m_samples = parse_int(key, v)?,
            "candidates.min_unit_spacing" => {
                self.min_unit_spacing = if v == "auto" { None } else { Some(parse_f64(key, v)?) }
            }
            "channel.fading" => {
                self.fading = match v {
                    "rayleigh" => FadingKind::Rayleigh,
                    "los" => FadingKind::Los,
                    _ => return Err(format!("{key}: expected `rayleigh` or `los`, got `{v}`")),
                }
            }
            "channel.tx_position" => self.tx_position = Some(parse_point(key, v)?),
            "channel.rx_position" => self.rx_position = Some(parse_point(key, v)?),
            "channel.rx_antennas" => self.rx_antennas = parse_int(key, v)?,
            "channel.rho" => self.rho = parse_f64(key, v)?,
            "channel.kernel" => self.kernel = v.parse().map_err(|e: Error| format!("{key}: {e}"))?,
            "channel.estimation_error_var" => self.estimation_error_var = parse_f64(key, v)?,
            "codebook.methods" => {
                self.methods = list(v)
                    .map(|m| m.parse().map_err(|e: Error| format!("{key}: {e}")))
                    .collect::<std::result::Result<_, _>>()?
            }
            "codebook.k" => self.k = parse_int(key, v)?,
            "detection.snr_db" => self.snr_db = parse_grid(key, v)?,
            "detection.trials" => self.trials = parse_int(key, v)?,
            "detection.pilot" => {
                let xs = list(v).map(|x| parse_f64(key, x)).collect::<std::result::Result<Vec<_>, _>>()?;
                match xs.as_slice() {
                    [re, im] => self.pilot = Complex64::new(*re, *im),
                    _ => return Err(format!("{key}: expected `re, im`")),
                }
            }
            "run.seeds" => self.seeds = parse_seeds(key, v)?,
            "overhead.alpha_unit" => self.overhead.alpha_unit = parse_f64(key, v)?,
            "overhead.beta_codeword" => self.overhead.beta_codeword = parse_f64(key, v)?,
            "overhead.coherence_symbols" => self.overhead.coherence_symbols = parse_f64(key, v)?,
            "throughput.snr_db" => self.throughput_snr_db = parse_f64(key, v)?,
            "throughput.delta_fraction" => self.delta_fraction = parse_f64(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    /// Canonical `key=value` lines for every setting that affects results,
    /// sorted by key. The output directory is excluded.
    pub fn canonical(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let point = |p: Option<[f64; 3]>| p.map_or("none".to_string(), |p| join(p.iter().map(|x| format!("{x:e}")).collect()));
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("grid.rows", self.grid_rows.to_string());
        kv.insert("grid.cols", self.grid_cols.to_string());
        kv.insert("grid.spacing", format!("{:e}", self.grid_spacing));
        kv.insert("geometry.modes", join(self.modes.iter().map(|m| m.to_string()).collect()));
        kv.insert("geometry.n_act", self.n_act.to_string());
        kv.insert("candidates.m_samples", self.m_samples.to_string());
        kv.insert(
            "candidates.min_unit_spacing",
            self.min_unit_spacing.map_or("auto".into(), |s| format!("{s:e}")),
        );
        kv.insert("channel.fading", format!("{:?}", self.fading).to_lowercase());
        kv.insert("channel.tx_position", point(self.tx_position));
        kv.insert("channel.rx_position", point(self.rx_position));
        kv.insert("channel.rx_antennas", self.rx_antennas.to_string());
        kv.insert("channel.rho", format!("{:e}", self.rho));
        kv.insert("channel.kernel", self.kernel.to_string());
        kv.insert("channel.estimation_error_var", format!("{:e}", self.estimation_error_var));
        kv.insert("codebook.methods", join(self.methods.iter().map(|m| m.to_string()).collect()));
        kv.insert("codebook.k", self.k.to_string());
        kv.insert("detection.snr_db", join(self.snr_db.iter().map(|x| format!("{x:e}")).collect()));
        kv.insert("detection.trials", self.trials.to_string());
        kv.insert("detection.pilot", format!("{:e},{:e}", self.pilot.re, self.pilot.im));
        kv.insert("run.seeds", join(self.seeds.iter().map(|s| s.to_string()).collect()));
        kv.insert("overhead.alpha_unit", format!("{:e}", self.overhead.alpha_unit));
        kv.insert("overhead.beta_codeword", format!("{:e}", self.overhead.beta_codeword));
        kv.insert("overhead.coherence_symbols", format!("{:e}", self.overhead.coherence_symbols));
        kv.insert("throughput.snr_db", format!("{:e}", self.throughput_snr_db));
        kv.insert("throughput.delta_fraction", format!("{:e}", self.delta_fraction));
        kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Compact seed description for table metadata.
    pub fn seeds_label(&self) -> String {
        let contiguous = self.seeds.windows(2).all(|w| w[1] == w[0] + 1);
        match (self.seeds.first(), self.seeds.last()) {
            (Some(a), Some(b)) if contiguous && self.seeds.len() > 2 => format!("{a}..{b}"),
            _ => self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
        }
    }

    pub fn grid(&self) -> Result<ApertureGrid> {
        build_grid(self.grid_rows, self.grid_cols, self.grid_spacing)
    }

    pub fn rule(&self) -> CandidateRule {
        CandidateRule {
            n_act: self.n_act,
            m_samples: self.m_samples,
            min_unit_spacing: self.min_unit_spacing,
        }
    }

    /// Channel parameters; the seed is set per run.
    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            rx_antennas: self.rx_antennas,
            fading: match self.fading {
                FadingKind::Rayleigh => Fading::Rayleigh,
                FadingKind::Los => Fading::Los {
                    tx: self.tx_position.unwrap_or([0.0; 3]),
                    rx: self.rx_position.unwrap_or([0.0; 3]),
                },
            },
            coupling_strength: self.rho,
            kernel: self.kernel,
            estimation_error_var: self.estimation_error_var,
            seed: 0,
        }
    }

    /// Checks every constraint before any computation. Plain violations are
    /// reported together as [`Error::Config`]; when the only problems are
    /// unsatisfiable spacing rules the result is [`Error::Infeasible`].
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut infeasible = Vec::new();
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                bad.push(e.to_string());
                None
            }
        };
        if self.modes.is_empty() {
            bad.push("geometry.modes: at least one mode is required".into());
        }
        if self.n_act == 0 {
            bad.push("geometry.n_act must be positive".into());
        }
        if self.m_samples == 0 {
            bad.push("candidates.m_samples must be positive".into());
        }
        if let Some(s) = self.min_unit_spacing {
            if !(s >= 0.0 && s.is_finite()) {
                bad.push(format!("candidates.min_unit_spacing must be non-negative, got {s}"));
            }
        }
        if let Err(e) = self.channel().validate() {
            bad.push(e.to_string());
        }
        if self.fading == FadingKind::Los && (self.tx_position.is_none() || self.rx_position.is_none()) {
            bad.push("channel.fading = los needs channel.tx_position and channel.rx_position".into());
        }
        if self.methods.is_empty() {
            bad.push("codebook.methods: at least one method is required".into());
        }
        if self.k < 2 {
            bad.push(format!("codebook.k must be at least 2, got {}", self.k));
        }
        if self.methods.contains(&SelectionMethod::ResponseMaxminExact) {
            let m = self.m_samples;
            let k = self.k.min(m);
            let subsets = (0..k.min(m - k)).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
            if subsets > EXACT_SUBSET_LIMIT {
                bad.push(format!(
                    "codebook.methods: response_maxmin_exact over up to {} candidates with k={} may visit {subsets:.3e} subsets (limit {EXACT_SUBSET_LIMIT:e}); lower candidates.m_samples or use the greedy selector",
                    self.m_samples, self.k
                ));
            }
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) || !self.throughput_snr_db.is_finite() {
            bad.push("SNR values must be finite".into());
        }
        if !(self.pilot.norm() > 0.0 && self.pilot.is_finite()) {
            bad.push("detection.pilot must be non-zero".into());
        }
        if self.seeds.is_empty() {
            bad.push("run.seeds: at least one seed is required".into());
        }
        if let Err(e) = self.overhead.validate() {
            bad.push(e.to_string());
        }
        if !(self.delta_fraction >= 0.0 && self.delta_fraction.is_finite()) {
            bad.push("throughput.delta_fraction must be non-negative".into());
        }
        if let Some(grid) = &grid {
            if self.methods.contains(&SelectionMethod::FixedRis) {
                let quadrant = (grid.rows() / 2) * (grid.cols() / 2);
                if grid.rows() % 2 != 0 || grid.cols() % 2 != 0 || self.n_act > quadrant {
                    bad.push(format!(
                        "codebook.methods: fixed_ris needs an even grid and n_act <= {quadrant} (quadrant size)"
                    ));
                }
            }
            for &mode in &self.modes {
                let part = match partition(grid, mode) {
                    Ok(p) => p,
                    Err(e) => {
                        bad.push(format!("geometry.modes: {mode}: {e}"));
                        continue;
                    }
                };
                if self.n_act == 0 || self.m_samples == 0 {
                    continue;
                }
                match enumerate_candidates(&part, self.n_act, 1, self.rule().spacing_for(mode), 0) {
                    Ok(_) => {}
                    Err(e @ Error::Infeasible { .. }) => infeasible.push(format!("{mode}: {e}")),
                    Err(e) => bad.push(format!("{mode}: {e}")),
                }
            }
        }
        if !bad.is_empty() {
            bad.extend(infeasible);
            return Err(Error::Config(bad));
        }
        if !infeasible.is_empty() {
            return Err(Error::Infeasible {
                constraint: "candidates.min_unit_spacing".into(),
                detail: infeasible.join("; "),
            });
        }
        Ok(())
    }
}
