use fris_im::channel::{coupling_matrix, draw_channel, effective_response, ChannelParams, CouplingKernel};
use fris_im::codebook::{
    effective_size, response_distance, select_maxmin_exact, select_maxmin_greedy, Codebook, DistanceMatrix,
    DomainTag,
};
use fris_im::geometry::{build_grid, layout_distance, partition, GranularityMode};
use fris_im::throughput::net_throughput;
use num_complex::Complex64;
use proptest::prelude::*;

fn element_partition() -> fris_im::geometry::UnitPartition {
    partition(&build_grid(4, 4, 0.5).unwrap(), GranularityMode::Element).unwrap()
}

fn active_set() -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((0..16).collect::<Vec<_>>(), 1..=16)
}

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..=max)
}

fn squared_matrix(pts: &[(f64, f64)]) -> DistanceMatrix {
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).collect())
        .collect();
    DistanceMatrix::from_rows(&rows, DomainTag::Response).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_distance_is_a_metric(a in active_set(), b in active_set(), c in active_set()) {
        let p = element_partition();
        let (a, b, c) = (p.configuration(&a).unwrap(), p.configuration(&b).unwrap(), p.configuration(&c).unwrap());
        let d = |x, y| layout_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a.active_elements() == b.active_elements());
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn effective_size_non_increasing_in_delta(pts in points(10), d1 in 0.0..50.0f64, d2 in 0.0..50.0f64) {
        let d = squared_matrix(&pts);
        let cb = select_maxmin_greedy(&d, pts.len()).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(effective_size(&cb, &d, lo) >= effective_size(&cb, &d, hi));
        prop_assert_eq!(effective_size(&cb, &d, 0.0), cb.k());
    }

    #[test]
    fn net_throughput_monotone(k in 1usize..64, oh in 0.0..=1.0f64, pe in 0.0..=1.0f64, step in 0.0..0.5f64) {
        let base = net_throughput(k, oh, pe).unwrap();
        prop_assert!(net_throughput(k + 1, oh, pe).unwrap() >= base);
        prop_assert!(net_throughput(k, (oh + step).min(1.0), pe).unwrap() <= base);
        prop_assert!(net_throughput(k, oh, (pe + step).min(1.0)).unwrap() <= base);
    }

    #[test]
    fn response_is_linear_over_disjoint_masks(a in active_set(), split in 0usize..16, seed in any::<u64>(), rho in 0.0..1.0f64) {
        let grid = build_grid(4, 4, 0.5).unwrap();
        let p = element_partition();
        let (left, right): (Vec<usize>, Vec<usize>) = a.iter().partition(|&&e| e < split);
        prop_assume!(!left.is_empty() && !right.is_empty());
        let ch = draw_channel(&grid, &ChannelParams { seed, ..ChannelParams::default() }).unwrap();
        let c = coupling_matrix(&grid, rho, CouplingKernel::Sinc).unwrap();
        let h = |s: &[usize]| effective_response(&p.configuration(s).unwrap(), &ch, &c).unwrap();
        let (whole, l, r) = (h(&a), h(&left), h(&right));
        for i in 0..whole.len() {
            let sum: Complex64 = l.0[i] + r.0[i];
            prop_assert!((whole.0[i] - sum).norm() <= 1e-12 * (1.0 + whole.0[i].norm()));
        }
    }

    #[test]
    fn zero_coupling_is_uncoupled_sum(a in active_set(), seed in any::<u64>(), kernel in prop_oneof![Just(CouplingKernel::Sinc), Just(CouplingKernel::Exponential)]) {
        let grid = build_grid(4, 4, 0.5).unwrap();
        let ch = draw_channel(&grid, &ChannelParams { seed, ..ChannelParams::default() }).unwrap();
        let c = coupling_matrix(&grid, 0.0, kernel).unwrap();
        let h = effective_response(&element_partition().configuration(&a).unwrap(), &ch, &c).unwrap();
        for r in 0..ch.rx_antennas() {
            let direct: Complex64 = a.iter().map(|&m| ch.get(m, r)).sum();
            prop_assert!((h.0[r] - direct).norm() <= 1e-12 * direct.norm().max(1e-300));
        }
    }

    #[test]
    fn exact_dominates_greedy_and_k2_agrees(pts in points(9), k in 2usize..5) {
        let d = squared_matrix(&pts);
        let k = k.min(pts.len());
        let g = select_maxmin_greedy(&d, k).unwrap();
        let x = select_maxmin_exact(&d, k).unwrap();
        prop_assert!(x.d_min >= g.d_min);
        if k == 2 {
            prop_assert_eq!(x.d_min, g.d_min);
        }
        // metric-domain guarantee: both selections are invariant under sqrt
        prop_assert!(g.d_min.sqrt() >= x.d_min.sqrt() / 2.0 - 1e-12);
    }

    #[test]
    fn stored_d_min_matches_recomputation(pts in points(9), k in 2usize..5) {
        let d = squared_matrix(&pts);
        let cb: Codebook = select_maxmin_greedy(&d, k.min(pts.len())).unwrap();
        let mut m = f64::INFINITY;
        for (i, &a) in cb.members.iter().enumerate() {
            for &b in &cb.members[i + 1..] {
                let (pa, pb) = (pts[a], pts[b]);
                let va = fris_im::channel::ResponseVector(vec![Complex64::new(pa.0, pa.1)]);
                let vb = fris_im::channel::ResponseVector(vec![Complex64::new(pb.0, pb.1)]);
                m = m.min(response_distance(&va, &vb).unwrap());
            }
        }
        prop_assert!((m - cb.d_min).abs() <= 1e-12 * (1.0 + m));
    }
}
