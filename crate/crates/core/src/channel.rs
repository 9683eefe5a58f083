//! Cascaded channel draws, near-field coupling and effective responses.
//!
//! A configuration with activation mask `s` excites the surface with the
//! coupled pattern `u = C s`, and the receiver sees
//! `h_eff[r] = sum_m u[m] * cascaded[m, r]`. Active elements reflect with unit
//! amplitude and zero phase; there is no direct transmitter-receiver path.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ApertureGrid, CandidateSet, Configuration};
use crate::seed;

/// Decay length of the exponential coupling kernel, in wavelengths.
pub const EXP_KERNEL_LENGTH: f64 = 0.25;

/// Spacing between receive antennas in the line-of-sight model, in wavelengths.
pub const RX_ANTENNA_PITCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    Rayleigh,
    /// Pure-phase line of sight. Positions are in wavelengths; the surface
    /// lies in the `z = 0` plane and receive antenna `r` sits at
    /// `rx + (r * RX_ANTENNA_PITCH, 0, 0)`.
    Los { tx: [f64; 3], rx: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingKernel {
    Sinc,
    Exponential,
    None,
}

impl fmt::Display for CouplingKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingKernel::Sinc => "sinc",
            CouplingKernel::Exponential => "exponential",
            CouplingKernel::None => "none",
        })
    }
}

impl FromStr for CouplingKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinc" => Ok(CouplingKernel::Sinc),
            "exponential" => Ok(CouplingKernel::Exponential),
            "none" => Ok(CouplingKernel::None),
            other => Err(Error::Parse(format!("unknown coupling kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub rx_antennas: usize,
    pub fading: Fading,
    pub coupling_strength: f64,
    pub kernel: CouplingKernel,
    pub estimation_error_var: f64,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            rx_antennas: 4,
            fading: Fading::Rayleigh,
            coupling_strength: 0.6,
            kernel: CouplingKernel::Sinc,
            estimation_error_var: 0.0,
            seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.rx_antennas == 0 {
            return Err(Error::invalid("rx_antennas must be at least 1"));
        }
        check_rho(self.coupling_strength)?;
        if !(self.estimation_error_var >= 0.0 && self.estimation_error_var.is_finite()) {
            return Err(Error::invalid(format!(
                "estimation_error_var must be a finite non-negative value, got {}",
                self.estimation_error_var
            )));
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!(
            "coupling strength must lie in [0, 1], got {rho}"
        )));
    }
    Ok(())
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Per-element cascaded gains, `elements x rx_antennas`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    elements: usize,
    rx_antennas: usize,
    cascaded: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let rx = rows.first().map_or(0, Vec::len);
        if rx == 0 || rows.iter().any(|r| r.len() != rx) {
            return Err(Error::invalid("cascaded rows must be non-empty and equal length"));
        }
        if rows.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::invalid("cascaded gains must be finite"));
        }
        Ok(ChannelRealization {
            elements: rows.len(),
            rx_antennas: rx,
            cascaded: rows.into_iter().flatten().collect(),
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    /// Gains from element `m` to every receive antenna.
    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.cascaded[m * self.rx_antennas..(m + 1) * self.rx_antennas]
    }

    pub fn get(&self, m: usize, r: usize) -> Complex64 {
        self.cascaded[m * self.rx_antennas + r]
    }
}

pub fn draw_channel(grid: &ApertureGrid, params: &ChannelParams) -> Result<ChannelRealization> {
    params.validate()?;
    let (n, rx) = (grid.len(), params.rx_antennas);
    let cascaded = match params.fading {
        Fading::Rayleigh => {
            let mut rng = seed::stream(params.seed, "channel", 0);
            let incident: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
            let mut out = Vec::with_capacity(n * rx);
            for g in &incident {
                for _ in 0..rx {
                    out.push(g * complex_gaussian(&mut rng));
                }
            }
            out
        }
        Fading::Los { tx, rx: rx_pos } => {
            let dist = |a: [f64; 3], b: [f64; 3]| {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            };
            let mut out = Vec::with_capacity(n * rx);
            for &(x, y) in grid.positions() {
                let elem = [x, y, 0.0];
                let d_in = dist(tx, elem);
                for r in 0..rx {
                    let ant = [rx_pos[0] + r as f64 * RX_ANTENNA_PITCH, rx_pos[1], rx_pos[2]];
                    out.push(Complex64::from_polar(1.0, -2.0 * PI * (d_in + dist(elem, ant))));
                }
            }
            out
        }
    };
    Ok(ChannelRealization {
        elements: n,
        rx_antennas: rx,
        cascaded,
    })
}

/// Symmetric element-to-element leakage with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    kernel: CouplingKernel,
    rho: f64,
}

impl CouplingMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for m in 0..n {
            entries[m * n + m] = 1.0;
        }
        CouplingMatrix {
            n,
            entries,
            kernel: CouplingKernel::None,
            rho: 0.0,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> CouplingKernel {
        self.kernel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[m * self.n + n]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.entries[m * self.n..(m + 1) * self.n]
    }
}

/// `sin(pi x) / (pi x)` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn kernel_value(kernel: CouplingKernel, rho: f64, d: f64) -> f64 {
    match kernel {
        CouplingKernel::Sinc => {
            // sin(2 pi d) vanishes at half-wavelength multiples; pin those
            // exactly instead of leaving ~1e-17 residue from sin(k pi).
            let twice = 2.0 * d;
            if twice.fract() == 0.0 {
                0.0
            } else {
                rho * sinc(twice)
            }
        }
        CouplingKernel::Exponential => rho * (-d / EXP_KERNEL_LENGTH).exp(),
        CouplingKernel::None => 0.0,
    }
}

pub fn coupling_matrix(grid: &ApertureGrid, rho: f64, kernel: CouplingKernel) -> Result<CouplingMatrix> {
    check_rho(rho)?;
    let n = grid.len();
    let mut entries = vec![0.0; n * n];
    for m in 0..n {
        entries[m * n + m] = 1.0;
        for k in m + 1..n {
            let c = if rho == 0.0 {
                0.0
            } else {
                kernel_value(kernel, rho, grid.distance(m, k))
            };
            entries[m * n + k] = c;
            entries[k * n + m] = c;
        }
    }
    Ok(CouplingMatrix {
        n,
        entries,
        kernel,
        rho,
    })
}

/// Complex receiver response, one entry per receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector(pub Vec<Complex64>);

impl ResponseVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(Complex64::norm_sqr).sum()
    }
}

fn response_from_mask(
    active: &[usize],
    realization: &ChannelRealization,
    coupling: &CouplingMatrix,
) -> Result<ResponseVector> {
    let n = realization.elements();
    if coupling.size() != n {
        return Err(Error::invalid(format!(
            "coupling matrix is {0}x{0} but the channel has {n} elements",
            coupling.size()
        )));
    }
    if let Some(&e) = active.iter().find(|&&e| e >= n) {
        return Err(Error::invalid(format!("active element {e} outside {n}-element channel")));
    }
    let mut h = vec![Complex64::new(0.0, 0.0); realization.rx_antennas()];
    for m in 0..n {
        let row = coupling.row(m);
        let u: f64 = active.iter().map(|&k| row[k]).sum();
        if u == 0.0 {
            continue;
        }
        for (acc, g) in h.iter_mut().zip(realization.row(m)) {
            *acc += g * u;
        }
    }
    Ok(ResponseVector(h))
}

pub fn effective_response(
    config: &Configuration,
    realization: &ChannelRealization,
    coupling: &CouplingMatrix,
) -> Result<ResponseVector> {
    if config.grid_len() != realization.elements() {
        return Err(Error::invalid(format!(
            "configuration is defined on {} elements but the channel has {}",
            config.grid_len(),
            realization.elements()
        )));
    }
    response_from_mask(config.active_elements(), realization, coupling)
}

/// Equivalent response of one controllable unit driven on its own.
pub fn group_equivalent_response(
    unit: &[usize],
    realization: &ChannelRealization,
    coupling: &CouplingMatrix,
) -> Result<ResponseVector> {
    if unit.is_empty() {
        return Err(Error::invalid("unit must contain at least one element"));
    }
    let mut sorted = unit.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    response_from_mask(&sorted, realization, coupling)
}

/// Candidate id to response, with the provenance of the channel it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    entries: Vec<ResponseVector>,
    pub channel_seed: u64,
    pub rho: f64,
    pub kernel: CouplingKernel,
}

impl ResponseMap {
    pub fn new(
        entries: Vec<ResponseVector>,
        channel_seed: u64,
        rho: f64,
        kernel: CouplingKernel,
    ) -> Result<Self> {
        let rx = entries.first().map_or(0, ResponseVector::len);
        if entries.iter().any(|e| e.len() != rx) {
            return Err(Error::invalid("responses must share one antenna count"));
        }
        Ok(ResponseMap {
            entries,
            channel_seed,
            rho,
            kernel,
        })
    }

    /// Builds a map from scalar (single-antenna) responses.
    pub fn from_scalars(values: &[Complex64]) -> Self {
        ResponseMap {
            entries: values.iter().map(|&v| ResponseVector(vec![v])).collect(),
            channel_seed: 0,
            rho: 0.0,
            kernel: CouplingKernel::None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rx_antennas(&self) -> usize {
        self.entries.first().map_or(0, ResponseVector::len)
    }

    pub fn get(&self, id: usize) -> Option<&ResponseVector> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> &[ResponseVector] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fris-response-map v1\n");
        out += &format!("seed={}\n", self.channel_seed);
        out += &format!("rho={:e}\n", self.rho);
        out += &format!("kernel={}\n", self.kernel);
        out += &format!("rx_antennas={}\n", self.rx_antennas());
        out += &format!("count={}\n", self.entries.len());
        for (id, h) in self.entries.iter().enumerate() {
            out += &id.to_string();
            for z in h.values() {
                out += &format!(",{:e},{:e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ResponseMap> {
        let perr = |m: String| Error::Parse(format!("response map: {m}"));
        let mut meta = std::collections::HashMap::new();
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                meta.insert(k.to_string(), v.to_string());
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let id: usize = fields[0].parse().map_err(|_| perr(format!("bad id in `{line}`")))?;
            if id != entries.len() || fields.len() % 2 != 1 {
                return Err(perr(format!("malformed record `{line}`")));
            }
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| perr(format!("bad number `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            entries.push(ResponseVector(
                nums.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            ));
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| perr(format!("missing `{k}`")));
        let map = ResponseMap::new(
            entries,
            get("seed")?.parse().map_err(|_| perr("bad seed".into()))?,
            get("rho")?.parse().map_err(|_| perr("bad rho".into()))?,
            get("kernel")?.parse()?,
        )?;
        let count: usize = get("count")?.parse().map_err(|_| perr("bad count".into()))?;
        let rx: usize = get("rx_antennas")?.parse().map_err(|_| perr("bad rx".into()))?;
        if count != map.len() || (count > 0 && rx != map.rx_antennas()) {
            return Err(perr("header does not match records".into()));
        }
        Ok(map)
    }
}

/// Responses of every candidate. With `estimation_error_var > 0` each entry
/// is perturbed by independent complex Gaussian noise of that variance per
/// antenna, drawn from a stream keyed by candidate id.
pub fn build_response_map(
    candidates: &CandidateSet,
    realization: &ChannelRealization,
    coupling: &CouplingMatrix,
    estimation_error_var: f64,
    seed: u64,
    channel_seed: u64,
) -> Result<ResponseMap> {
    if !(estimation_error_var >= 0.0 && estimation_error_var.is_finite()) {
        return Err(Error::invalid(format!(
            "estimation_error_var must be finite and non-negative, got {estimation_error_var}"
        )));
    }
    let sigma = estimation_error_var.sqrt();
    let entries = candidates
        .configurations
        .par_iter()
        .enumerate()
        .map(|(id, config)| {
            let mut h = effective_response(config, realization, coupling)?;
            if estimation_error_var > 0.0 {
                let mut rng = seed::stream(seed, "calibration", id as u64);
                for z in h.0.iter_mut() {
                    *z += complex_gaussian(&mut rng) * sigma;
                }
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseMap::new(entries, channel_seed, coupling.rho(), coupling.kernel())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, enumerate_candidates, partition, GranularityMode};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rayleigh(seed: u64, rx: usize) -> ChannelParams {
        ChannelParams {
            rx_antennas: rx,
            seed,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn los_integer_wavelengths_give_unit_gains() {
        let grid = build_grid(1, 1, 0.5).unwrap();
        let params = ChannelParams {
            rx_antennas: 1,
            fading: Fading::Los {
                tx: [0.0, 0.0, 3.0],
                rx: [0.0, 0.0, 4.0],
            },
            ..ChannelParams::default()
        };
        let ch = draw_channel(&grid, &params).unwrap();
        let g = ch.get(0, 0);
        assert!((g - c(1.0, 0.0)).norm() < 1e-12, "{g}");

        // off-axis: both hops are 5 wavelengths (3-4-5 triangle)
        let params = ChannelParams {
            rx_antennas: 1,
            fading: Fading::Los {
                tx: [0.0, 0.0, 5.0],
                rx: [3.0, 0.0, 4.0],
            },
            ..ChannelParams::default()
        };
        let ch = draw_channel(&grid, &params).unwrap();
        assert!((ch.get(0, 0) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let grid = build_grid(8, 8, 0.5).unwrap();
        let a = draw_channel(&grid, &rayleigh(5, 4)).unwrap();
        let b = draw_channel(&grid, &rayleigh(5, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_channel(&grid, &rayleigh(6, 4)).unwrap());
        assert_eq!((a.elements(), a.rx_antennas()), (64, 4));
    }

    #[test]
    fn rayleigh_cascaded_second_moment_is_one() {
        // E|g h|^2 = E|g|^2 E|h|^2 = 1; Monte Carlo over 10^4 realizations
        let grid = build_grid(8, 8, 0.5).unwrap();
        let draws = 10_000u64;
        let mut acc = vec![0.0f64; 64 * 4];
        for s in 0..draws {
            let ch = draw_channel(&grid, &rayleigh(s, 4)).unwrap();
            for m in 0..64 {
                for r in 0..4 {
                    acc[m * 4 + r] += ch.get(m, r).norm_sqr();
                }
            }
        }
        let pooled = acc.iter().sum::<f64>() / (draws as f64 * acc.len() as f64);
        assert!((pooled - 1.0).abs() < 0.05, "pooled {pooled}");
        // Var|g h|^2 = E|g|^4 E|h|^4 - 1 = 3, so each entry's mean has
        // standard error sqrt(3 / draws); allow 5 of them across 256 entries
        let se = (3.0 / draws as f64).sqrt();
        for (i, a) in acc.iter().enumerate() {
            let mean = a / draws as f64;
            assert!((mean - 1.0).abs() < 5.0 * se, "entry {i}: {mean}");
        }
    }

    #[test]
    fn coupling_zero_rho_is_identity() {
        let grid = build_grid(4, 4, 0.25).unwrap();
        for k in [CouplingKernel::Sinc, CouplingKernel::Exponential, CouplingKernel::None] {
            let cm = coupling_matrix(&grid, 0.0, k).unwrap();
            assert_eq!(cm.entries, CouplingMatrix::identity(16).entries);
        }
    }

    #[test]
    fn coupling_kernel_values() {
        let grid = build_grid(1, 2, 0.5).unwrap();
        let cm = coupling_matrix(&grid, 0.8, CouplingKernel::Sinc).unwrap();
        assert_eq!(cm.get(0, 1), 0.0);
        let grid = build_grid(1, 2, 0.25).unwrap();
        let cm = coupling_matrix(&grid, 0.8, CouplingKernel::Sinc).unwrap();
        let oracle = 0.8 * (PI / 2.0).sin() / (PI / 2.0);
        assert!((cm.get(0, 1) - oracle).abs() < 1e-15);
        assert!((cm.get(0, 1) - 0.5093).abs() < 1e-4);
        let cm = coupling_matrix(&grid, 0.8, CouplingKernel::Exponential).unwrap();
        assert!((cm.get(1, 0) - 0.8 * (-1.0f64).exp()).abs() < 1e-15);
        let cm = coupling_matrix(&grid, 0.8, CouplingKernel::None).unwrap();
        assert_eq!(cm.get(0, 1), 0.0);
    }

    #[test]
    fn coupling_rejects_rho_out_of_range() {
        let grid = build_grid(2, 2, 0.5).unwrap();
        assert!(matches!(
            coupling_matrix(&grid, 1.5, CouplingKernel::Sinc),
            Err(Error::InvalidArgument(_))
        ));
        assert!(coupling_matrix(&grid, -0.1, CouplingKernel::Sinc).is_err());
    }

    #[test]
    fn coupling_matrix_invariants() {
        let grid = build_grid(8, 8, 0.3).unwrap();
        for k in [CouplingKernel::Sinc, CouplingKernel::Exponential] {
            let cm = coupling_matrix(&grid, 0.7, k).unwrap();
            for m in 0..64 {
                assert_eq!(cm.get(m, m), 1.0);
                for n in 0..64 {
                    assert_eq!(cm.get(m, n), cm.get(n, m));
                    if m != n {
                        assert!(cm.get(m, n).abs() <= 0.7);
                    }
                }
            }
        }
    }

    #[test]
    fn single_element_identity_coupling_returns_row() {
        let grid = build_grid(4, 4, 0.5).unwrap();
        let ch = draw_channel(&grid, &rayleigh(1, 3)).unwrap();
        let p = partition(&grid, GranularityMode::Element).unwrap();
        let cfg = p.configuration(&[7]).unwrap();
        let h = effective_response(&cfg, &ch, &CouplingMatrix::identity(16)).unwrap();
        assert_eq!(h.values(), ch.row(7));
    }

    #[test]
    fn one_element_grid_ignores_rho() {
        let grid = build_grid(1, 1, 0.5).unwrap();
        let ch = draw_channel(&grid, &rayleigh(2, 2)).unwrap();
        let p = partition(&grid, GranularityMode::Element).unwrap();
        let cfg = p.configuration(&[0]).unwrap();
        let a = effective_response(&cfg, &ch, &coupling_matrix(&grid, 0.0, CouplingKernel::Sinc).unwrap())
            .unwrap();
        let b = effective_response(&cfg, &ch, &coupling_matrix(&grid, 0.9, CouplingKernel::Sinc).unwrap())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_element_coupled_response() {
        let grid = build_grid(1, 2, 0.25).unwrap();
        let q1 = vec![c(0.3, -1.2), c(2.0, 0.5)];
        let q2 = vec![c(-0.7, 0.1), c(0.4, 0.9)];
        let ch = ChannelRealization::from_rows(vec![q1.clone(), q2.clone()]).unwrap();
        let cm = coupling_matrix(&grid, 0.8, CouplingKernel::Sinc).unwrap();
        let p = partition(&grid, GranularityMode::Element).unwrap();
        let cfg = p.configuration(&[0, 1]).unwrap();
        let h = effective_response(&cfg, &ch, &cm).unwrap();
        // u = C [1 1]^T = (1 + c12) [1 1]^T
        let c12 = 0.8 * (PI / 2.0).sin() / (PI / 2.0);
        for r in 0..2 {
            let oracle = (q1[r] + q2[r]) * (1.0 + c12);
            assert!((h.values()[r] - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let grid = build_grid(2, 2, 0.5).unwrap();
        let ch = draw_channel(&grid, &rayleigh(1, 1)).unwrap();
        let other = build_grid(3, 3, 0.5).unwrap();
        let p = partition(&other, GranularityMode::Element).unwrap();
        let cfg = p.configuration(&[0]).unwrap();
        assert!(matches!(
            effective_response(&cfg, &ch, &CouplingMatrix::identity(4)),
            Err(Error::InvalidArgument(_))
        ));
        let p = partition(&grid, GranularityMode::Element).unwrap();
        let cfg = p.configuration(&[0]).unwrap();
        assert!(effective_response(&cfg, &ch, &CouplingMatrix::identity(9)).is_err());
    }

    #[test]
    fn group_response_matches_configuration() {
        let grid = build_grid(4, 4, 0.5).unwrap();
        let ch = draw_channel(&grid, &rayleigh(3, 2)).unwrap();
        let groups = partition(&grid, GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let unit = &groups.units()[1];
        let id = CouplingMatrix::identity(16);
        let g = group_equivalent_response(unit, &ch, &id).unwrap();
        for r in 0..2 {
            let sum: Complex64 = unit.iter().map(|&m| ch.get(m, r)).sum();
            assert!((g.values()[r] - sum).norm() < 1e-12);
        }
        let single = group_equivalent_response(&[5], &ch, &id).unwrap();
        assert_eq!(single.values(), ch.row(5));

        let cm = coupling_matrix(&grid, 0.6, CouplingKernel::Sinc).unwrap();
        let g = group_equivalent_response(unit, &ch, &cm).unwrap();
        let cfg = groups.configuration(&[1]).unwrap();
        assert_eq!(g, effective_response(&cfg, &ch, &cm).unwrap());
        assert!(group_equivalent_response(&[], &ch, &cm).is_err());
    }

    fn small_candidates() -> CandidateSet {
        let grid = build_grid(4, 4, 0.5).unwrap();
        let p = partition(&grid, GranularityMode::Block { rows: 2, cols: 2 }).unwrap();
        enumerate_candidates(&p, 4, 10, 0.0, 0).unwrap()
    }

    #[test]
    fn response_map_without_error_matches_effective_response() {
        let cands = small_candidates();
        let ch = draw_channel(cands.grid(), &rayleigh(4, 2)).unwrap();
        let cm = coupling_matrix(cands.grid(), 0.6, CouplingKernel::Sinc).unwrap();
        let map = build_response_map(&cands, &ch, &cm, 0.0, 9, 4).unwrap();
        assert_eq!(map.len(), 4);
        for (id, cfg) in cands.configurations.iter().enumerate() {
            assert_eq!(map.get(id).unwrap(), &effective_response(cfg, &ch, &cm).unwrap());
        }
        let again = build_response_map(&cands, &ch, &cm, 0.0, 9, 4).unwrap();
        assert_eq!(map, again);
    }

    #[test]
    fn response_map_error_variance() {
        let cands = small_candidates();
        let ch = draw_channel(cands.grid(), &rayleigh(4, 2)).unwrap();
        let cm = coupling_matrix(cands.grid(), 0.6, CouplingKernel::Sinc).unwrap();
        let clean = build_response_map(&cands, &ch, &cm, 0.0, 0, 4).unwrap();
        let draws = 5_000;
        let mut total = 0.0;
        for s in 0..draws {
            let noisy = build_response_map(&cands, &ch, &cm, 0.1, s, 4).unwrap();
            for id in 0..4 {
                let a = clean.get(id).unwrap().values();
                let b = noisy.get(id).unwrap().values();
                total += a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
            }
        }
        let msd = total / (draws as f64 * 4.0);
        // expected 0.1 * R = 0.2; per-sample variance of |e|^2 sum is 0.02,
        // so the standard error over 2*10^4 samples is ~1e-3
        assert!((msd - 0.2).abs() < 0.005, "{msd}");
    }

    #[test]
    fn response_map_text_round_trip() {
        let cands = small_candidates();
        let ch = draw_channel(cands.grid(), &rayleigh(8, 3)).unwrap();
        let cm = coupling_matrix(cands.grid(), 0.6, CouplingKernel::Sinc).unwrap();
        let map = build_response_map(&cands, &ch, &cm, 0.05, 1, 8).unwrap();
        assert_eq!(ResponseMap::from_text(&map.to_text()).unwrap(), map);
    }
}
