//! Design stages shared by the sweep and the experiment harness: pick a
//! granularity, generate candidates, calibrate responses, measure distances.

use crate::channel::{build_response_map, coupling_matrix, draw_channel, ChannelParams, ResponseMap};
use crate::codebook::{
    layout_distances, pairwise_distances, select_layout_maxmin, select_maxmin_exact, select_maxmin_greedy,
    select_random, Codebook, DistanceMatrix, SelectionMethod,
};
use crate::error::Result;
use crate::geometry::{enumerate_candidates, partition, quadrant_patterns, ApertureGrid, CandidateSet, GranularityMode};

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRule {
    pub n_act: usize,
    pub m_samples: usize,
    /// `None` uses the mode's default spacing rule.
    pub min_unit_spacing: Option<f64>,
}

impl CandidateRule {
    pub fn spacing_for(&self, mode: GranularityMode) -> f64 {
        self.min_unit_spacing
            .unwrap_or_else(|| mode.default_min_unit_spacing())
    }
}

/// Everything derived from one (mode, channel seed) pair.
#[derive(Debug, Clone)]
pub struct DesignInstance {
    pub mode: GranularityMode,
    pub seed: u64,
    pub candidates: CandidateSet,
    /// Responses the channel actually produces.
    pub true_map: ResponseMap,
    /// Responses known at design time (equal to `true_map` with perfect CSI).
    pub design_map: ResponseMap,
    /// Response distances on the design map.
    pub distances: DistanceMatrix,
}

fn calibrate(
    candidates: &CandidateSet,
    grid: &ApertureGrid,
    channel: &ChannelParams,
    seed: u64,
) -> Result<(ResponseMap, ResponseMap)> {
    let params = ChannelParams {
        seed,
        ..channel.clone()
    };
    let realization = draw_channel(grid, &params)?;
    let coupling = coupling_matrix(grid, channel.coupling_strength, channel.kernel)?;
    let true_map = build_response_map(candidates, &realization, &coupling, 0.0, seed, seed)?;
    let design_map = if channel.estimation_error_var > 0.0 {
        build_response_map(candidates, &realization, &coupling, channel.estimation_error_var, seed, seed)?
    } else {
        true_map.clone()
    };
    Ok((true_map, design_map))
}

impl DesignInstance {
    pub fn build(
        grid: &ApertureGrid,
        mode: GranularityMode,
        rule: &CandidateRule,
        channel: &ChannelParams,
        seed: u64,
    ) -> Result<Self> {
        let part = partition(grid, mode).map_err(|e| e.in_stage("granularity", format!("mode={mode}")))?;
        let candidates = enumerate_candidates(&part, rule.n_act, rule.m_samples, rule.spacing_for(mode), seed)
            .map_err(|e| {
                e.in_stage(
                    "candidates",
                    format!("mode={mode} n_act={} seed={seed}", rule.n_act),
                )
            })?;
        let (true_map, design_map) = calibrate(&candidates, grid, channel, seed)
            .map_err(|e| e.in_stage("calibration", format!("mode={mode} seed={seed}")))?;
        let distances = pairwise_distances(&design_map)?;
        Ok(DesignInstance {
            mode,
            seed,
            candidates,
            true_map,
            design_map,
            distances,
        })
    }

    /// The fixed quadrant benchmark on the same channel draw.
    pub fn fixed_benchmark(grid: &ApertureGrid, n_act: usize, channel: &ChannelParams, seed: u64) -> Result<Self> {
        let candidates = quadrant_patterns(grid, n_act)
            .map_err(|e| e.in_stage("candidates", format!("fixed_ris n_act={n_act}")))?;
        let (true_map, design_map) = calibrate(&candidates, grid, channel, seed)
            .map_err(|e| e.in_stage("calibration", format!("fixed_ris seed={seed}")))?;
        let distances = pairwise_distances(&design_map)?;
        Ok(DesignInstance {
            mode: GranularityMode::Element,
            seed,
            candidates,
            true_map,
            design_map,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Builds a codebook of (at most) `k` members with the given method.
    /// `k` is capped at the candidate count.
    pub fn select(&self, method: SelectionMethod, k: usize) -> Result<Codebook> {
        let k = k.min(self.len());
        let params = || format!("method={method} mode={} k={k} seed={}", self.mode, self.seed);
        let cb = match method {
            SelectionMethod::ResponseMaxminGreedy => select_maxmin_greedy(&self.distances, k),
            SelectionMethod::ResponseMaxminExact => select_maxmin_exact(&self.distances, k),
            SelectionMethod::LayoutMaxmin => layout_distances(&self.candidates)
                .and_then(|layout| select_layout_maxmin(&layout, &self.design_map, k)),
            SelectionMethod::Random => {
                select_random(&self.distances, &self.candidates.ids(), k, crate::seed::derive(self.seed, "random", 0))
            }
            SelectionMethod::FixedRis => Codebook::fixed(&self.distances),
        };
        cb.map_err(|e| e.in_stage("codebook", params()))
    }
}

/// Reports whether a method needs its own fixed benchmark instance.
pub fn uses_fixed_patterns(method: SelectionMethod) -> bool {
    method == SelectionMethod::FixedRis
}
