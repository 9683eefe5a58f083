//! Quick oracle checks runnable from the command line.

use num_complex::Complex64;

use crate::channel::{coupling_matrix, sinc, CouplingKernel};
use crate::codebook::{select_maxmin_exact, select_maxmin_greedy, DistanceMatrix, DomainTag};
use crate::detection::{pairwise_error_prob, q_function, simulate_ber, SignalModel};
use crate::geometry::{build_grid, enumerate_candidates, partition, GranularityMode};
use crate::channel::{ResponseMap, ResponseVector};
use crate::codebook::Codebook;
use crate::seed;
use crate::throughput::net_throughput;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn q_values() -> Check {
    let pts = [(0.0, 0.5), (1.0, 0.158_655_253_931_457_05), (3.0, 0.001_349_898_031_630_094_6)];
    let worst = pts
        .iter()
        .map(|&(x, q)| ((q_function(x) - q) / q).abs())
        .fold(0.0, f64::max);
    check("q_function", worst < 1e-12, format!("max rel err {worst:.2e}"))
}

fn net_anchors() -> Check {
    let a = net_throughput(4, 0.5, 0.0).ok();
    let b = net_throughput(8, 0.2, 1.0).ok();
    let c = net_throughput(8, 1.0, 0.1).ok();
    let ok = a == Some(1.0) && b == Some(0.0) && c == Some(0.0);
    check("net_throughput_anchors", ok, format!("{a:?} {b:?} {c:?}"))
}

fn sinc_zeros() -> Check {
    let grid = match build_grid(4, 4, 0.5) {
        Ok(g) => g,
        Err(e) => return check("sinc_half_wavelength_zeros", false, e.to_string()),
    };
    let c = match coupling_matrix(&grid, 0.6, CouplingKernel::Sinc) {
        Ok(c) => c,
        Err(e) => return check("sinc_half_wavelength_zeros", false, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let two_d = 2.0 * grid.distance(i, j);
            if i != j && (two_d - two_d.round()).abs() < 1e-12 {
                worst = worst.max(c.get(i, j).abs());
            }
        }
    }
    let ok = worst == 0.0 && sinc(0.0) == 1.0;
    check("sinc_half_wavelength_zeros", ok, format!("max |C| {worst:.1e}"))
}

fn candidate_count() -> Check {
    // C(16, 2) element pairs on a 4x4 grid with no spacing rule
    let r = build_grid(4, 4, 0.5)
        .and_then(|g| partition(&g, GranularityMode::Element))
        .and_then(|p| enumerate_candidates(&p, 2, 1000, 0.0, 0));
    match r {
        Ok(c) => check("exhaustive_candidates", c.len() == 120 && c.exhaustive, format!("{} sets", c.len())),
        Err(e) => check("exhaustive_candidates", false, e.to_string()),
    }
}

fn greedy_vs_exact() -> Check {
    use rand::Rng;
    let mut rng = seed::stream(7, "selftest", 0);
    let mut ratio: f64 = f64::INFINITY;
    for _ in 0..20 {
        let m = 10;
        let pts: Vec<(f64, f64)> = (0..m).map(|_| (rng.gen(), rng.gen())).collect();
        let rows: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).collect())
            .collect();
        let d = match DistanceMatrix::from_rows(&rows, DomainTag::Response) {
            Ok(d) => d,
            Err(e) => return check("greedy_vs_exact", false, e.to_string()),
        };
        match (select_maxmin_greedy(&d, 2), select_maxmin_exact(&d, 2)) {
            (Ok(g), Ok(x)) => ratio = ratio.min(g.d_min / x.d_min),
            (Err(e), _) | (_, Err(e)) => return check("greedy_vs_exact", false, e.to_string()),
        }
    }
    check("greedy_vs_exact_k2", ratio == 1.0, format!("min ratio {ratio}"))
}

fn binary_detector() -> Check {
    let h0 = ResponseVector(vec![Complex64::new(1.0, 0.0)]);
    let h1 = ResponseVector(vec![Complex64::new(-1.0, 0.0)]);
    let map = ResponseMap::from_scalars(&[h0.0[0], h1.0[0]]);
    let rows = vec![vec![0.0, 4.0], vec![4.0, 0.0]];
    let r = DistanceMatrix::from_rows(&rows, DomainTag::Response)
        .and_then(|d| select_maxmin_greedy(&d, 2))
        .and_then(|cb: Codebook| {
            let n0 = 0.5;
            let sig = SignalModel::new(Complex64::new(1.0, 0.0), n0)?;
            let est = simulate_ber(&cb, &map, &sig, 200_000, 11)?;
            Ok((est, pairwise_error_prob(4.0, n0)?))
        });
    match r {
        Ok((est, pe)) => {
            let ok = (est.p_hat - pe).abs() <= 3.0 * est.ci95_half_width;
            check("binary_detector", ok, format!("p_hat {:.5} vs Q {:.5}", est.p_hat, pe))
        }
        Err(e) => check("binary_detector", false, e.to_string()),
    }
}

/// Runs every check; the caller reports them.
pub fn selftest() -> Vec<Check> {
    vec![
        q_values(),
        net_anchors(),
        sinc_zeros(),
        candidate_count(),
        greedy_vs_exact(),
        binary_detector(),
    ]
}
