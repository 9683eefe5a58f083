//! Response-domain distances and spatial-index codebook selection.
//!
//! Selecting `k` candidates that maximize the minimum pairwise distance is
//! max-min dispersion. [`select_maxmin_greedy`] is the farthest-point
//! heuristic used by default; [`select_maxmin_exact`] is the exhaustive
//! optimum for small instances. All ties resolve toward the lowest
//! candidate id (or the lexicographically smallest member list).

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;

use crate::channel::{ResponseMap, ResponseVector};
use crate::error::{Error, Result};
use crate::geometry::{layout_distance, CandidateSet};
use crate::seed;

/// Upper bound on the number of subsets the exact selector will visit.
pub const EXACT_SUBSET_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    Response,
    Layout,
}

/// Dense symmetric distance matrix over candidate ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    tag: DomainTag,
}

impl DistanceMatrix {
    /// Builds a matrix from a full row-major table, checking symmetry,
    /// zero diagonal and non-negativity.
    pub fn from_rows(rows: &[Vec<f64>], tag: DomainTag) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("distance matrix must be square"));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::invalid(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let d = rows[i][j];
                if !(d >= 0.0 && d.is_finite()) || d != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            n,
            values: rows.concat(),
            tag,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Minimum distance over all pairs of `members`; `+inf` for fewer than two.
    pub fn min_over(&self, members: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                best = best.min(self.get(i, j));
            }
        }
        best
    }

    /// Median of the strictly upper-triangular entries (0 when there are none).
    pub fn median_offdiagonal(&self) -> f64 {
        let mut vals: Vec<f64> = (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        if vals.is_empty() {
            return 0.0;
        }
        vals.sort_by(f64::total_cmp);
        let mid = vals.len() / 2;
        if vals.len() % 2 == 1 {
            vals[mid]
        } else {
            0.5 * (vals[mid - 1] + vals[mid])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMethod {
    ResponseMaxminGreedy,
    ResponseMaxminExact,
    LayoutMaxmin,
    Random,
    FixedRis,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 5] = [
        SelectionMethod::ResponseMaxminGreedy,
        SelectionMethod::ResponseMaxminExact,
        SelectionMethod::LayoutMaxmin,
        SelectionMethod::Random,
        SelectionMethod::FixedRis,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            SelectionMethod::ResponseMaxminGreedy => "response_maxmin_greedy",
            SelectionMethod::ResponseMaxminExact => "response_maxmin_exact",
            SelectionMethod::LayoutMaxmin => "layout_maxmin",
            SelectionMethod::Random => "random",
            SelectionMethod::FixedRis => "fixed_ris",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.tag() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown selection method `{s}`")))
    }
}

/// An ordered set of candidate ids used as spatial-index codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub members: Vec<usize>,
    pub method: SelectionMethod,
    pub seed: Option<u64>,
    /// Minimum pairwise response-domain distance over `members`.
    pub d_min: f64,
    pub bit_width: f64,
}

impl Codebook {
    fn new(members: Vec<usize>, method: SelectionMethod, seed: Option<u64>, d_min: f64) -> Self {
        let bit_width = (members.len() as f64).log2();
        Codebook {
            members,
            method,
            seed,
            d_min,
            bit_width,
        }
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Every candidate of a fixed, non-reselectable pattern set.
    pub fn fixed(distances: &DistanceMatrix) -> Result<Codebook> {
        if distances.len() < 2 {
            return Err(Error::invalid("a fixed codebook needs at least two patterns"));
        }
        let members: Vec<usize> = (0..distances.len()).collect();
        let d_min = distances.min_over(&members);
        Ok(Codebook::new(members, SelectionMethod::FixedRis, None, d_min))
    }

    pub fn to_text(&self) -> String {
        let members: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        format!(
            "# fris-codebook v1\nmethod={}\nseed={}\nmembers={}\nd_min={:e}\nbit_width={:e}\n",
            self.method,
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            members.join(" "),
            self.d_min,
            self.bit_width
        )
    }

    pub fn from_text(text: &str) -> Result<Codebook> {
        let perr = |m: &str| Error::Parse(format!("codebook: {m}"));
        let mut kv = std::collections::HashMap::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| perr("expected key=value"))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| perr("missing field"));
        let seed = match get("seed")? {
            "none" => None,
            s => Some(s.parse().map_err(|_| perr("bad seed"))?),
        };
        let members = get("members")?
            .split_whitespace()
            .map(|m| m.parse().map_err(|_| perr("bad member")))
            .collect::<Result<Vec<usize>>>()?;
        Ok(Codebook {
            members,
            method: get("method")?.parse()?,
            seed,
            d_min: get("d_min")?.parse().map_err(|_| perr("bad d_min"))?,
            bit_width: get("bit_width")?.parse().map_err(|_| perr("bad bit_width"))?,
        })
    }
}

/// Squared Euclidean norm of the complex difference.
pub fn response_distance(a: &ResponseVector, b: &ResponseVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "response lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}

fn symmetric_from_upper(n: usize, f: impl Fn(usize, usize) -> f64 + Sync, tag: DomainTag) -> DistanceMatrix {
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| f(i, j)).collect())
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix { n, values, tag }
}

pub fn pairwise_distances(map: &ResponseMap) -> Result<DistanceMatrix> {
    if map.is_empty() {
        return Err(Error::invalid("response map is empty"));
    }
    // ResponseMap guarantees a single antenna count, so the pairwise
    // distance cannot fail.
    let entries = map.entries();
    Ok(symmetric_from_upper(
        entries.len(),
        |i, j| response_distance(&entries[i], &entries[j]).expect("uniform lengths"),
        DomainTag::Response,
    ))
}

/// Symmetric-difference distances between all candidate layouts.
pub fn layout_distances(candidates: &CandidateSet) -> Result<DistanceMatrix> {
    let configs = &candidates.configurations;
    if configs.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    Ok(symmetric_from_upper(
        configs.len(),
        |i, j| layout_distance(&configs[i], &configs[j]).expect("one partition") as f64,
        DomainTag::Layout,
    ))
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "codebook size must be at least 2, got {k}"
        )));
    }
    if k > m {
        return Err(Error::invalid(format!(
            "codebook size {k} exceeds the {m} available candidates"
        )));
    }
    Ok(())
}

/// Farthest-point selection order on an arbitrary distance matrix.
fn greedy_order(distances: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = distances.len();
    let (mut a, mut b, mut far) = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let d = distances.get(i, j);
            if d > far {
                (a, b, far) = (i, j, d);
            }
        }
    }
    let mut members = vec![a, b];
    let mut selected = vec![false; n];
    selected[a] = true;
    selected[b] = true;
    let mut nearest: Vec<f64> = (0..n)
        .map(|c| distances.get(c, a).min(distances.get(c, b)))
        .collect();
    while members.len() < k {
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for c in 0..n {
            if !selected[c] && nearest[c] > best {
                best = nearest[c];
                pick = Some(c);
            }
        }
        let c = pick.expect("k <= n leaves an unselected candidate");
        selected[c] = true;
        members.push(c);
        for (o, near) in nearest.iter_mut().enumerate() {
            *near = near.min(distances.get(o, c));
        }
    }
    members
}

pub fn select_maxmin_greedy(distances: &DistanceMatrix, k: usize) -> Result<Codebook> {
    check_k(k, distances.len())?;
    let members = greedy_order(distances, k);
    let d_min = distances.min_over(&members);
    Ok(Codebook::new(members, SelectionMethod::ResponseMaxminGreedy, None, d_min))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive max-min search. Subsets are visited in lexicographic order and
/// only a strictly better value replaces the incumbent, so the result is the
/// lexicographically smallest optimal member list.
pub fn select_maxmin_exact(distances: &DistanceMatrix, k: usize) -> Result<Codebook> {
    let n = distances.len();
    check_k(k, n)?;
    let count = binomial(n, k);
    if count > EXACT_SUBSET_LIMIT {
        return Err(Error::TooLarge(format!(
            "C({n}, {k}) = {count:.3e} subsets exceeds the exact-search limit of {EXACT_SUBSET_LIMIT:e}; use the greedy selector"
        )));
    }

    struct Search<'a> {
        d: &'a DistanceMatrix,
        n: usize,
        k: usize,
        current: Vec<usize>,
        best: Vec<usize>,
        best_value: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, start: usize, partial_min: f64) {
            if self.current.len() == self.k {
                if partial_min > self.best_value {
                    self.best_value = partial_min;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            let remaining = self.k - self.current.len();
            for c in start..=self.n - remaining {
                let mut m = partial_min;
                for &s in &self.current {
                    m = m.min(self.d.get(s, c));
                }
                // a completion can only lower the minimum, and ties lose to
                // the lexicographically earlier incumbent
                if m <= self.best_value {
                    continue;
                }
                self.current.push(c);
                self.visit(c + 1, m);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        d: distances,
        n,
        k,
        current: Vec::with_capacity(k),
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
    };
    search.visit(0, f64::INFINITY);
    let members = search.best;
    let d_min = distances.min_over(&members);
    Ok(Codebook::new(members, SelectionMethod::ResponseMaxminExact, None, d_min))
}

/// Uniform `k`-subset of `candidate_ids` (sorted), scored on response distances.
pub fn select_random(
    response_distances: &DistanceMatrix,
    candidate_ids: &[usize],
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    check_k(k, candidate_ids.len())?;
    if let Some(&id) = candidate_ids.iter().find(|&&id| id >= response_distances.len()) {
        return Err(Error::invalid(format!("candidate id {id} outside the distance matrix")));
    }
    let mut rng = seed::stream(seed, "random-codebook", 0);
    let mut members: Vec<usize> = index::sample(&mut rng, candidate_ids.len(), k)
        .into_iter()
        .map(|i| candidate_ids[i])
        .collect();
    members.sort_unstable();
    let d_min = response_distances.min_over(&members);
    Ok(Codebook::new(members, SelectionMethod::Random, Some(seed), d_min))
}

/// Greedy max-min on layout distances; the reported `d_min` is still the
/// response-domain minimum over the chosen members.
pub fn select_layout_maxmin(
    layout: &DistanceMatrix,
    response_map: &ResponseMap,
    k: usize,
) -> Result<Codebook> {
    if layout.tag() != DomainTag::Layout {
        return Err(Error::invalid("layout selection needs a layout-domain distance matrix"));
    }
    if layout.len() != response_map.len() {
        return Err(Error::invalid(format!(
            "layout matrix covers {} candidates but the response map has {}",
            layout.len(),
            response_map.len()
        )));
    }
    check_k(k, layout.len())?;
    let members = greedy_order(layout, k);
    let entries = response_map.entries();
    let mut d_min = f64::INFINITY;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            d_min = d_min.min(response_distance(&entries[i], &entries[j])?);
        }
    }
    Ok(Codebook::new(members, SelectionMethod::LayoutMaxmin, None, d_min))
}

/// Number of members kept by in-order pruning: a member survives when its
/// distance to every previously kept member is at least `delta`.
pub fn effective_size(codebook: &Codebook, distances: &DistanceMatrix, delta: f64) -> usize {
    let mut kept: Vec<usize> = Vec::with_capacity(codebook.k());
    for &m in &codebook.members {
        if kept.iter().all(|&q| distances.get(m, q) >= delta) {
            kept.push(m);
        }
    }
    kept.len()
}
