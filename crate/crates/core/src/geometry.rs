//! Aperture geometry, actuation granularity and candidate configurations.
//!
//! The surface is a planar uniform rectangular grid with coordinates in
//! wavelengths. Elements are indexed row-major: element `(r, c)` has index
//! `r * cols + c` and sits at `(c * spacing, r * spacing)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// Tolerance applied when comparing centroid distances against a spacing rule.
const SPACING_TOL: f64 = 1e-9;

/// Unit counts up to this size are enumerated exhaustively when the feasible
/// set fits within the requested sample budget.
pub const EXHAUSTIVE_UNIT_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ApertureGrid {
    rows: usize,
    cols: usize,
    spacing: f64,
    positions: Vec<(f64, f64)>,
}

impl ApertureGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Element pitch in wavelengths.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn position(&self, element: usize) -> (f64, f64) {
        self.positions[element]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.positions[a];
        let (xb, yb) = self.positions[b];
        (xa - xb).hypot(ya - yb)
    }
}

pub fn build_grid(rows: usize, cols: usize, spacing: f64) -> Result<ApertureGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "grid dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!(
            "grid spacing must be positive and finite, got {spacing}"
        )));
    }
    let positions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c as f64 * spacing, r as f64 * spacing)))
        .collect();
    Ok(ApertureGrid {
        rows,
        cols,
        spacing,
        positions,
    })
}

/// The basic controllable unit of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GranularityMode {
    Element,
    Group { rows: usize, cols: usize },
    Block { rows: usize, cols: usize },
}

impl GranularityMode {
    /// Tile shape in elements.
    pub fn tile(&self) -> (usize, usize) {
        match *self {
            GranularityMode::Element => (1, 1),
            GranularityMode::Group { rows, cols } | GranularityMode::Block { rows, cols } => {
                (rows, cols)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GranularityMode::Element => "element",
            GranularityMode::Group { .. } => "group",
            GranularityMode::Block { .. } => "block",
        }
    }

    /// Default centroid spacing rule: half a wavelength between active
    /// groups or blocks, none between single elements.
    pub fn default_min_unit_spacing(&self) -> f64 {
        match self {
            GranularityMode::Element => 0.0,
            _ => 0.5,
        }
    }
}

impl fmt::Display for GranularityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GranularityMode::Element => write!(f, "element"),
            GranularityMode::Group { rows, cols } => write!(f, "group:{rows}x{cols}"),
            GranularityMode::Block { rows, cols } => write!(f, "block:{rows}x{cols}"),
        }
    }
}

impl FromStr for GranularityMode {
    type Err = Error;

    /// Parses `element`, `group:RxC` or `block:RxC`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "element" {
            return Ok(GranularityMode::Element);
        }
        let bad = || Error::Parse(format!("bad granularity mode `{s}`"));
        let (kind, shape) = s.split_once(':').ok_or_else(bad)?;
        let (r, c) = shape.split_once('x').ok_or_else(bad)?;
        let rows: usize = r.trim().parse().map_err(|_| bad())?;
        let cols: usize = c.trim().parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 {
            return Err(bad());
        }
        match kind.trim() {
            "group" => Ok(GranularityMode::Group { rows, cols }),
            "block" => Ok(GranularityMode::Block { rows, cols }),
            _ => Err(bad()),
        }
    }
}

/// Disjoint equal-size tiling of the grid into controllable units.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPartition {
    mode: GranularityMode,
    grid: ApertureGrid,
    units: Vec<Vec<usize>>,
    centroids: Vec<(f64, f64)>,
}

impl UnitPartition {
    pub fn mode(&self) -> GranularityMode {
        self.mode
    }

    pub fn grid(&self) -> &ApertureGrid {
        &self.grid
    }

    pub fn units(&self) -> &[Vec<usize>] {
        &self.units
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Elements per unit (all units have the same cardinality).
    pub fn unit_size(&self) -> usize {
        self.units[0].len()
    }

    pub fn centroid(&self, unit: usize) -> (f64, f64) {
        self.centroids[unit]
    }

    fn centroid_distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.centroids[a];
        let (xb, yb) = self.centroids[b];
        (xa - xb).hypot(ya - yb)
    }

    /// Builds the configuration that activates exactly `active_units`.
    pub fn configuration(&self, active_units: &[usize]) -> Result<Configuration> {
        let mut units = active_units.to_vec();
        units.sort_unstable();
        units.dedup();
        if units.len() != active_units.len() {
            return Err(Error::invalid("duplicate unit index in configuration"));
        }
        if let Some(&u) = units.iter().find(|&&u| u >= self.unit_count()) {
            return Err(Error::invalid(format!(
                "unit {u} out of range for {} units",
                self.unit_count()
            )));
        }
        let mut elements: Vec<usize> = units
            .iter()
            .flat_map(|&u| self.units[u].iter().copied())
            .collect();
        elements.sort_unstable();
        Ok(Configuration {
            n_act: elements.len(),
            active_units: units,
            active_elements: elements,
            mode: self.mode,
            grid_len: self.grid.len(),
        })
    }
}

pub fn partition(grid: &ApertureGrid, mode: GranularityMode) -> Result<UnitPartition> {
    let (tr, tc) = mode.tile();
    if tr == 0 || tc == 0 || grid.rows % tr != 0 || grid.cols % tc != 0 {
        return Err(Error::invalid(format!(
            "tile {tr}x{tc} does not divide grid {}x{}",
            grid.rows, grid.cols
        )));
    }
    let mut units = Vec::with_capacity((grid.rows / tr) * (grid.cols / tc));
    let mut centroids = Vec::with_capacity(units.capacity());
    for tile_r in 0..grid.rows / tr {
        for tile_c in 0..grid.cols / tc {
            let unit: Vec<usize> = (0..tr)
                .flat_map(|dr| {
                    (0..tc).map(move |dc| (tile_r * tr + dr) * grid.cols + tile_c * tc + dc)
                })
                .collect();
            let n = unit.len() as f64;
            let (sx, sy) = unit.iter().fold((0.0, 0.0), |(sx, sy), &e| {
                let (x, y) = grid.positions[e];
                (sx + x, sy + y)
            });
            centroids.push((sx / n, sy / n));
            units.push(unit);
        }
    }
    Ok(UnitPartition {
        mode,
        grid: grid.clone(),
        units,
        centroids,
    })
}

/// One feasible surface state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    active_units: Vec<usize>,
    active_elements: Vec<usize>,
    n_act: usize,
    mode: GranularityMode,
    grid_len: usize,
}

impl Configuration {
    /// Sorted unit indices.
    pub fn active_units(&self) -> &[usize] {
        &self.active_units
    }

    /// Sorted element indices.
    pub fn active_elements(&self) -> &[usize] {
        &self.active_elements
    }

    pub fn n_act(&self) -> usize {
        self.n_act
    }

    pub fn mode(&self) -> GranularityMode {
        self.mode
    }

    /// Number of elements on the grid this configuration belongs to.
    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    /// 0/1 activation mask over all grid elements.
    pub fn mask(&self) -> Vec<f64> {
        let mut mask = vec![0.0; self.grid_len];
        for &e in &self.active_elements {
            mask[e] = 1.0;
        }
        mask
    }
}

/// Feasible configurations for one (partition, cardinality, spacing) setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub partition: UnitPartition,
    pub configurations: Vec<Configuration>,
    pub n_act: usize,
    pub min_unit_spacing: f64,
    pub seed: u64,
    /// True when the set is the complete feasible set in lexicographic order.
    pub exhaustive: bool,
}

impl CandidateSet {
    pub fn grid(&self) -> &ApertureGrid {
        self.partition.grid()
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// Configuration ids are positions in the list.
    pub fn ids(&self) -> Vec<usize> {
        (0..self.configurations.len()).collect()
    }
}

fn spacing_ok(partition: &UnitPartition, units: &[usize], min_spacing: f64) -> bool {
    if min_spacing <= 0.0 {
        return true;
    }
    units.iter().enumerate().all(|(i, &a)| {
        units[i + 1..]
            .iter()
            .all(|&b| partition.centroid_distance(a, b) >= min_spacing - SPACING_TOL)
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lexicographic DFS over spacing-feasible unit subsets. Stops once `limit`
/// subsets have been collected.
fn enumerate_feasible(
    partition: &UnitPartition,
    choose: usize,
    min_spacing: f64,
    limit: usize,
) -> Vec<Vec<usize>> {
    fn dfs(
        partition: &UnitPartition,
        choose: usize,
        min_spacing: f64,
        limit: usize,
        start: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if out.len() >= limit {
            return;
        }
        if current.len() == choose {
            out.push(current.clone());
            return;
        }
        let remaining = choose - current.len();
        for u in start..=partition.unit_count() - remaining {
            let compatible = min_spacing <= 0.0
                || current
                    .iter()
                    .all(|&v| partition.centroid_distance(u, v) >= min_spacing - SPACING_TOL);
            if compatible {
                current.push(u);
                dfs(partition, choose, min_spacing, limit, u + 1, current, out);
                current.pop();
                if out.len() >= limit {
                    return;
                }
            }
        }
    }
    let mut out = Vec::new();
    dfs(
        partition,
        choose,
        min_spacing,
        limit,
        0,
        &mut Vec::with_capacity(choose),
        &mut out,
    );
    out
}

/// Generates up to `m_samples` distinct feasible configurations with exactly
/// `n_act` active elements whose active-unit centroids are pairwise at least
/// `min_unit_spacing` apart.
///
/// Small feasible sets (unit count within [`EXHAUSTIVE_UNIT_LIMIT`] and at
/// most `m_samples` members) are returned in full, in lexicographic order.
/// Otherwise unit subsets are drawn uniformly and rejected when they violate
/// the spacing rule or repeat an earlier draw.
pub fn enumerate_candidates(
    partition: &UnitPartition,
    n_act: usize,
    m_samples: usize,
    min_unit_spacing: f64,
    seed: u64,
) -> Result<CandidateSet> {
    let unit_size = partition.unit_size();
    if n_act == 0 || n_act % unit_size != 0 {
        return Err(Error::invalid(format!(
            "n_act={n_act} is not a positive multiple of unit size {unit_size} ({} mode)",
            partition.mode()
        )));
    }
    let choose = n_act / unit_size;
    if choose > partition.unit_count() {
        return Err(Error::invalid(format!(
            "n_act={n_act} needs {choose} units but {} mode has only {}",
            partition.mode(),
            partition.unit_count()
        )));
    }
    if m_samples == 0 {
        return Err(Error::invalid("m_samples must be positive"));
    }
    if !min_unit_spacing.is_finite() {
        return Err(Error::invalid("min_unit_spacing must be finite"));
    }
    let infeasible = || Error::Infeasible {
        constraint: format!("min_unit_spacing={min_unit_spacing}"),
        detail: format!(
            "no {choose} of the {} units in {} mode have pairwise centroid distance >= {min_unit_spacing} wavelengths",
            partition.unit_count(),
            partition.mode()
        ),
    };

    let finish = |subsets: Vec<Vec<usize>>, exhaustive: bool| -> Result<CandidateSet> {
        let configurations = subsets
            .iter()
            .map(|units| partition.configuration(units))
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateSet {
            partition: partition.clone(),
            configurations,
            n_act,
            min_unit_spacing,
            seed,
            exhaustive,
        })
    };

    if partition.unit_count() <= EXHAUSTIVE_UNIT_LIMIT {
        let subsets = enumerate_feasible(partition, choose, min_unit_spacing, m_samples + 1);
        if subsets.is_empty() {
            return Err(infeasible());
        }
        if subsets.len() <= m_samples {
            return finish(subsets, true);
        }
    }

    let mut rng = seed::stream(seed, "candidates", 0);
    let total = binomial(partition.unit_count(), choose);
    let target = if min_unit_spacing <= 0.0 && total <= m_samples as f64 {
        total as usize
    } else {
        m_samples
    };
    let budget = (200 * m_samples).max(100_000);
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(target);
    let mut subsets = Vec::with_capacity(target);
    for _ in 0..budget {
        if subsets.len() >= target {
            break;
        }
        let mut units = index::sample(&mut rng, partition.unit_count(), choose).into_vec();
        units.sort_unstable();
        if spacing_ok(partition, &units, min_unit_spacing) && seen.insert(units.clone()) {
            subsets.push(units);
        }
    }
    if subsets.is_empty() {
        return Err(infeasible());
    }
    finish(subsets, false)
}

/// Minimum centroid distance between distinct active units, or
/// `f64::INFINITY` when at most one unit is active.
pub fn min_pairwise_spacing(config: &Configuration, partition: &UnitPartition) -> f64 {
    let units = config.active_units();
    let mut best = f64::INFINITY;
    for (i, &a) in units.iter().enumerate() {
        for &b in &units[i + 1..] {
            best = best.min(partition.centroid_distance(a, b));
        }
    }
    best
}

/// Size of the symmetric difference of the two active-element sets.
pub fn layout_distance(a: &Configuration, b: &Configuration) -> Result<usize> {
    if a.mode != b.mode || a.grid_len != b.grid_len {
        return Err(Error::invalid(format!(
            "layout distance between configurations of different partitions ({} on {} elements vs {} on {})",
            a.mode, a.grid_len, b.mode, b.grid_len
        )));
    }
    let (xs, ys) = (a.active_elements(), b.active_elements());
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < xs.len() && j < ys.len() {
        match xs[i].cmp(&ys[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(xs.len() + ys.len() - 2 * shared)
}

/// The fixed-geometry benchmark: the grid is split into four contiguous
/// quadrants and each codeword activates the first `n_act` elements
/// (row-major within the quadrant) of one quadrant. Configurations are
/// expressed on the element-level partition.
pub fn quadrant_patterns(grid: &ApertureGrid, n_act: usize) -> Result<CandidateSet> {
    if grid.rows % 2 != 0 || grid.cols % 2 != 0 {
        return Err(Error::invalid(format!(
            "quadrant patterns need even grid dimensions, got {}x{}",
            grid.rows, grid.cols
        )));
    }
    let (qr, qc) = (grid.rows / 2, grid.cols / 2);
    if n_act == 0 || n_act > qr * qc {
        return Err(Error::invalid(format!(
            "n_act={n_act} does not fit in a {qr}x{qc} quadrant"
        )));
    }
    let elements = partition(grid, GranularityMode::Element)?;
    let quadrants = partition(grid, GranularityMode::Block { rows: qr, cols: qc })?;
    let configurations = quadrants
        .units()
        .iter()
        .map(|quadrant| elements.configuration(&quadrant[..n_act]))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet {
        partition: elements,
        configurations,
        n_act,
        min_unit_spacing: 0.0,
        seed: 0,
        exhaustive: true,
    })
}

impl CandidateSet {
    /// Line-oriented text form: `key=value` metadata, then one
    /// `id: e0 e1 ...` line per configuration with sorted element indices.
    pub fn to_text(&self) -> String {
        let grid = self.grid();
        let mut out = String::from("# fris-candidates v1\n");
        out += &format!("grid.rows={}\n", grid.rows());
        out += &format!("grid.cols={}\n", grid.cols());
        out += &format!("grid.spacing={}\n", grid.spacing());
        out += &format!("mode={}\n", self.partition.mode());
        out += &format!("n_act={}\n", self.n_act);
        out += &format!("min_unit_spacing={}\n", self.min_unit_spacing);
        out += &format!("seed={}\n", self.seed);
        out += &format!("exhaustive={}\n", self.exhaustive);
        out += &format!("count={}\n", self.configurations.len());
        for (id, config) in self.configurations.iter().enumerate() {
            let elems: Vec<String> = config
                .active_elements()
                .iter()
                .map(|e| e.to_string())
                .collect();
            out += &format!("{id}: {}\n", elems.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CandidateSet> {
        let perr = |m: String| Error::Parse(format!("candidate file: {m}"));
        let mut meta = std::collections::HashMap::new();
        let mut lists: Vec<Vec<usize>> = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            } else if let Some((id, elems)) = line.split_once(':') {
                let id: usize = id.trim().parse().map_err(|_| perr(format!("bad id in `{line}`")))?;
                if id != lists.len() {
                    return Err(perr(format!("ids out of order at {id}")));
                }
                let elems = elems
                    .split_whitespace()
                    .map(|e| e.parse::<usize>().map_err(|_| perr(format!("bad element `{e}`"))))
                    .collect::<Result<Vec<_>>>()?;
                lists.push(elems);
            } else {
                return Err(perr(format!("unrecognized line `{line}`")));
            }
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| perr(format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|_| perr(format!("bad `{k}`")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?.parse::<u64>().map_err(|_| perr(format!("bad `{k}`")))
        };
        let grid = build_grid(
            int("grid.rows")? as usize,
            int("grid.cols")? as usize,
            num("grid.spacing")?,
        )?;
        let mode: GranularityMode = get("mode")?.parse()?;
        let part = partition(&grid, mode)?;
        let unit_of: Vec<usize> = {
            let mut v = vec![0; grid.len()];
            for (u, elems) in part.units().iter().enumerate() {
                for &e in elems {
                    v[e] = u;
                }
            }
            v
        };
        let configurations = lists
            .iter()
            .map(|elems| {
                if let Some(&e) = elems.iter().find(|&&e| e >= grid.len()) {
                    return Err(perr(format!("element {e} outside grid")));
                }
                let mut units: Vec<usize> = elems.iter().map(|&e| unit_of[e]).collect();
                units.sort_unstable();
                units.dedup();
                let config = part.configuration(&units)?;
                if config.active_elements() != elems.as_slice() {
                    return Err(perr(format!("element list {elems:?} is not a union of units")));
                }
                Ok(config)
            })
            .collect::<Result<Vec<_>>>()?;
        if configurations.len() as u64 != int("count")? {
            return Err(perr("count does not match configuration lines".into()));
        }
        Ok(CandidateSet {
            partition: part,
            configurations,
            n_act: int("n_act")? as usize,
            min_unit_spacing: num("min_unit_spacing")?,
            seed: int("seed")?,
            exhaustive: get("exhaustive")? == "true",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid88() -> ApertureGrid {
        build_grid(8, 8, 0.5).unwrap()
    }

    #[test]
    fn grid_positions_row_major() {
        let g = build_grid(1, 2, 0.5).unwrap();
        assert_eq!(g.positions(), &[(0.0, 0.0), (0.5, 0.0)]);
        let g = build_grid(8, 8, 0.25).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.position(63), (1.75, 1.75));
        let g = build_grid(3, 4, 0.5).unwrap();
        assert_eq!(g.position(1 * 4 + 2), (1.0, 0.5));
    }

    #[test]
    fn grid_pairwise_distances_2x2() {
        // oracle: explicit coordinates
        let pts = [(0.0f64, 0.0f64), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];
        let mut expected: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                expected.push((pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1));
            }
        }
        let g = build_grid(2, 2, 0.5).unwrap();
        let mut got = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                got.push(g.distance(i, j));
            }
        }
        assert_eq!(got, expected);
        let mut sorted = got.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(&sorted[..4], &[0.5; 4]);
        assert!((sorted[4] - 0.7071).abs() < 1e-4 && (sorted[5] - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(build_grid(0, 2, 0.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(2, 0, 0.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(2, 2, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(2, 2, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn partition_shapes() {
        let g = grid88();
        let p = partition(&g, GranularityMode::Element).unwrap();
        assert_eq!((p.unit_count(), p.unit_size()), (64, 1));
        let p = partition(&g, GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        assert_eq!((p.unit_count(), p.unit_size()), (16, 4));
        assert_eq!(p.units()[0], vec![0, 1, 8, 9]);
        assert_eq!(p.units()[1], vec![2, 3, 10, 11]);
        assert_eq!(p.units()[4], vec![16, 17, 24, 25]);
        assert_eq!(p.centroid(0), (0.25, 0.25));
        let p = partition(&g, GranularityMode::Block { rows: 4, cols: 4 }).unwrap();
        assert_eq!((p.unit_count(), p.unit_size()), (4, 16));

        let mut all: Vec<usize> = p.units().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn partition_rejects_non_dividing_tile() {
        let g = grid88();
        let err = partition(&g, GranularityMode::Group { rows: 3, cols: 2 });
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn block_candidates_are_the_four_blocks() {
        let p = partition(&grid88(), GranularityMode::Block { rows: 4, cols: 4 }).unwrap();
        let c = enumerate_candidates(&p, 16, 512, 0.0, 1).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.exhaustive);
        for (i, cfg) in c.configurations.iter().enumerate() {
            assert_eq!(cfg.active_units(), &[i]);
            assert_eq!(cfg.n_act(), 16);
        }
    }

    #[test]
    fn group_candidates_exhaustive_count() {
        let p = partition(&grid88(), GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let c = enumerate_candidates(&p, 16, 1820, 0.0, 3).unwrap();
        assert_eq!(c.len(), 1820);
        assert!(c.exhaustive);
        let c = enumerate_candidates(&p, 16, 5000, 0.0, 3).unwrap();
        assert_eq!(c.len(), 1820);
        // one fewer than the feasible count forces sampling
        let c = enumerate_candidates(&p, 16, 1819, 0.0, 3).unwrap();
        assert_eq!(c.len(), 1819);
        assert!(!c.exhaustive);
    }

    #[test]
    fn spacing_filter_keeps_diagonals() {
        let g = build_grid(2, 2, 0.5).unwrap();
        let p = partition(&g, GranularityMode::Element).unwrap();
        let c = enumerate_candidates(&p, 2, 100, 0.6, 0).unwrap();
        let sets: Vec<&[usize]> = c.configurations.iter().map(|c| c.active_elements()).collect();
        assert_eq!(sets, vec![&[0, 3][..], &[1, 2][..]]);
    }

    #[test]
    fn infeasible_spacing_names_constraint() {
        let g = build_grid(2, 2, 0.5).unwrap();
        let p = partition(&g, GranularityMode::Element).unwrap();
        match enumerate_candidates(&p, 3, 100, 0.6, 0) {
            Err(Error::Infeasible { constraint, .. }) => {
                assert!(constraint.contains("min_unit_spacing"))
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // large unit counts go through the sampling path
        let p = partition(&grid88(), GranularityMode::Element).unwrap();
        assert!(matches!(
            enumerate_candidates(&p, 16, 10, 5.0, 0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn n_act_must_match_unit_size() {
        let p = partition(&grid88(), GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        assert!(matches!(
            enumerate_candidates(&p, 6, 10, 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            enumerate_candidates(&p, 68, 10, 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sampled_candidates_distinct_and_deterministic() {
        let p = partition(&grid88(), GranularityMode::Element).unwrap();
        let a = enumerate_candidates(&p, 16, 512, 0.0, 42).unwrap();
        let b = enumerate_candidates(&p, 16, 512, 0.0, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 512);
        let distinct: HashSet<_> = a.configurations.iter().map(|c| c.active_elements()).collect();
        assert_eq!(distinct.len(), 512);
        let c = enumerate_candidates(&p, 16, 512, 0.0, 43).unwrap();
        assert_ne!(a.configurations, c.configurations);
    }

    #[test]
    fn sampled_candidates_respect_spacing() {
        let p = partition(&grid88(), GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let c = enumerate_candidates(&p, 16, 200, 1.5, 9).unwrap();
        for cfg in &c.configurations {
            assert!(min_pairwise_spacing(cfg, &p) >= 1.5 - 1e-9);
        }
    }

    #[test]
    fn min_spacing_cases() {
        let g = grid88();
        let blocks = partition(&g, GranularityMode::Block { rows: 4, cols: 4 }).unwrap();
        let cfg = blocks.configuration(&[2]).unwrap();
        assert_eq!(min_pairwise_spacing(&cfg, &blocks), f64::INFINITY);

        let elems = partition(&g, GranularityMode::Element).unwrap();
        let cfg = elems.configuration(&[0, 1]).unwrap();
        assert_eq!(min_pairwise_spacing(&cfg, &elems), 0.5);

        // corner tiles of the 4x4 tile layout; brute force over centroid pairs
        let groups = partition(&g, GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let corners = [0usize, 3, 12, 15];
        let cfg = groups.configuration(&corners).unwrap();
        let centroid = |t: usize| {
            let (tr, tc) = ((t / 4) as f64, (t % 4) as f64);
            (tc * 1.0 + 0.25, tr * 1.0 + 0.25)
        };
        let mut brute = f64::INFINITY;
        for &a in &corners {
            for &b in &corners {
                if a != b {
                    let (pa, pb) = (centroid(a), centroid(b));
                    brute = brute.min((pa.0 - pb.0).hypot(pa.1 - pb.1));
                }
            }
        }
        assert_eq!(brute, 3.0);
        assert!((min_pairwise_spacing(&cfg, &groups) - brute).abs() < 1e-12);
    }

    #[test]
    fn layout_distance_cases() {
        let p = partition(&grid88(), GranularityMode::Element).unwrap();
        let a = p.configuration(&(0..16).collect::<Vec<_>>()).unwrap();
        let b = p.configuration(&(16..32).collect::<Vec<_>>()).unwrap();
        let c = p.configuration(&(4..20).collect::<Vec<_>>()).unwrap();
        assert_eq!(layout_distance(&a, &a).unwrap(), 0);
        assert_eq!(layout_distance(&a, &b).unwrap(), 32);
        // oracle: set arithmetic
        let sa: HashSet<usize> = (0..16).collect();
        let sc: HashSet<usize> = (4..20).collect();
        assert_eq!(sa.intersection(&sc).count(), 12);
        assert_eq!(sa.symmetric_difference(&sc).count(), 8);
        assert_eq!(layout_distance(&a, &c).unwrap(), 8);

        let groups = partition(&grid88(), GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let g = groups.configuration(&[0, 1, 2, 3]).unwrap();
        assert!(matches!(layout_distance(&a, &g), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn quadrants_cover_each_quarter() {
        let q = quadrant_patterns(&grid88(), 16).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.configurations[0].active_elements()[..5], [0, 1, 2, 3, 8]);
        assert_eq!(q.configurations[3].active_elements()[0], 36);
        assert!(quadrant_patterns(&grid88(), 17).is_err());
    }

    #[test]
    fn candidate_text_round_trip() {
        let p = partition(&grid88(), GranularityMode::Group { rows: 2, cols: 2 }).unwrap();
        let c = enumerate_candidates(&p, 8, 20, 0.5, 11).unwrap();
        let back = CandidateSet::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn mode_parse_display() {
        for m in [
            GranularityMode::Element,
            GranularityMode::Group { rows: 2, cols: 2 },
            GranularityMode::Block { rows: 4, cols: 2 },
        ] {
            assert_eq!(m.to_string().parse::<GranularityMode>().unwrap(), m);
        }
        assert!("tile:2x2".parse::<GranularityMode>().is_err());
        assert!("group:0x2".parse::<GranularityMode>().is_err());
    }
}
