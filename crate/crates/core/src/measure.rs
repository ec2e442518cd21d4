//! Discretized probability measures on a δ-grid, with Frostman and
//! AD-regularity diagnostics, dyadic weight levels, and the residue-class
//! partition that restores uniform non-concentration.
//!
//! Conventions fixed here and relied on everywhere else:
//! * the grid pitch δ is a power of two and atoms sit on grid indices, so
//!   binning is bit-exact;
//! * an atom represents the half-open cell [origin + iδ, origin + (i+1)δ)
//!   and its position is the left endpoint;
//! * all window scans use closed windows [x-r, x+r] with element-anchored
//!   centers and dyadic radii, and compare mass against (2r)^α, i.e. window
//!   length to the α. Scanning only anchored dyadic windows under-estimates
//!   the true supremum over all intervals by at most a factor 2 in length;
//!   every threshold that consumes these scans carries that slack.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("grid pitch {0} is not a positive power of two")]
    BadPitch(f64),
    #[error("atom weights sum to {0}, not 1")]
    MassNotNormalized(f64),
    #[error("atom indices must be strictly increasing")]
    NonMonotoneIndices,
    #[error("atom at index {index} has negative weight {weight}")]
    NegativeWeight { index: i64, weight: f64 },
    #[error("construction would produce {atoms} atoms, over the 2^24 limit")]
    DepthTooLarge { atoms: u64 },
    #[error("atom at index {index} has weight {weight:.3e} above the level-0 cap {cap:.3e}; measure is not {alpha}-Frostman with this constant")]
    UnassignedAtom { index: i64, weight: f64, cap: f64, alpha: f64 },
    #[error("non-concentration precondition failed: window [{anchor}, {anchor}+{cells}] (grid cells) holds {count} points, bound {bound:.3}")]
    PreconditionFail { anchor: i64, cells: i64, count: usize, bound: f64 },
    #[error("measure file: {0}")]
    Parse(String),
}

/// Probability measure as weighted atoms on the δ-grid of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    delta: f64,
    origin: f64,
    atoms: Vec<(i64, f64)>,
}

/// Header written in front of the `index,weight` rows.
#[derive(Debug, Serialize, Deserialize)]
struct MeasureHeader {
    delta: f64,
    origin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_hint: Option<f64>,
}

fn is_power_of_two(x: f64) -> bool {
    // Normal positive f64 with an all-zero mantissa.
    x.is_finite() && x > 0.0 && x >= f64::MIN_POSITIVE && (x.to_bits() & ((1u64 << 52) - 1)) == 0
}

impl DiscreteMeasure {
    pub fn new(delta: f64, origin: f64, atoms: Vec<(i64, f64)>) -> Result<Self, MeasureError> {
        if !is_power_of_two(delta) {
            return Err(MeasureError::BadPitch(delta));
        }
        for window in atoms.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(MeasureError::NonMonotoneIndices);
            }
        }
        for &(index, weight) in &atoms {
            if !(weight >= 0.0) {
                return Err(MeasureError::NegativeWeight { index, weight });
            }
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::MassNotNormalized(total));
        }
        Ok(DiscreteMeasure { delta, origin, atoms })
    }

    /// Build from unsorted pairs, summing weights that land on one cell.
    pub fn from_raw_atoms(
        delta: f64,
        origin: f64,
        mut pairs: Vec<(i64, f64)>,
    ) -> Result<Self, MeasureError> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => merged.push((i, w)),
            }
        }
        DiscreteMeasure::new(delta, origin, merged)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Left endpoint of the grid cell with the given index.
    pub fn position(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.delta
    }

    pub fn positions(&self) -> Vec<f64> {
        self.atoms.iter().map(|&(i, _)| self.position(i)).collect()
    }

    pub fn index_set(&self) -> Vec<i64> {
        self.atoms.iter().map(|&(i, _)| i).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn support_diameter(&self) -> f64 {
        match (self.atoms.first(), self.atoms.last()) {
            (Some(&(lo, _)), Some(&(hi, _))) => (hi - lo) as f64 * self.delta,
            _ => 0.0,
        }
    }

    /// Mass of the closed interval [lo, hi] (atom positions compared
    /// directly; boundary atoms count).
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(i, w)| {
                let p = self.position(i);
                if p >= lo && p <= hi {
                    w
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Two-branch self-similar measure with contraction ratio r = 2^{-1/α},
    /// left endpoints kept at every stage, uniform leaf weights 2^{-depth}.
    ///
    /// The natural pitch r^depth is a power of two only when depth/α is an
    /// integer; otherwise atoms snap to the finer grid 2^{-ceil(depth/α)}.
    /// For α > 1/2 the two siblings of a cell can land in one grid cell
    /// after snapping, in which case their weights merge.
    pub fn build_cantor(alpha: f64, depth: u32) -> Result<Self, MeasureError> {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        if 1u64 << depth.min(63) > (1 << 24) {
            return Err(MeasureError::DepthTooLarge { atoms: 1u64 << depth.min(63) });
        }
        let ratio = 2f64.powf(-1.0 / alpha);
        let pitch_exp = (depth as f64 / alpha).ceil() as i32;
        let delta = 2f64.powi(-pitch_exp);
        let mut points = vec![0.0f64];
        for level in 0..depth {
            let scale = ratio.powi(level as i32);
            let offset = (1.0 - ratio) * scale;
            let mut next = Vec::with_capacity(points.len() * 2);
            for &p in &points {
                next.push(p);
                next.push(p + offset);
            }
            points = next;
        }
        let weight = 0.5f64.powi(depth as i32);
        let pairs = points
            .into_iter()
            .map(|p| ((p / delta).floor() as i64, weight))
            .collect();
        DiscreteMeasure::from_raw_atoms(delta, 0.0, pairs)
    }

    fn dyadic_radii(&self) -> Vec<f64> {
        let diam = self.support_diameter().max(self.delta);
        let mut radii = Vec::new();
        let mut r = self.delta;
        loop {
            radii.push(r);
            if r >= diam {
                break;
            }
            r *= 2.0;
        }
        radii
    }

    /// Largest ratio μ([x-r, x+r]) / (2r)^α over atom-centered windows and
    /// dyadic radii r from δ up to the support diameter. A 2-approximation
    /// of the true Frostman constant sup over all balls.
    pub fn frostman_constant(&self, alpha: f64) -> f64 {
        self.window_scan(alpha).0
    }

    /// Worst-case constants (upper, lower) for the two-sided AD-regularity
    /// sandwich (2r)^α / C ≤ μ([x-r, x+r]) ≤ C (2r)^α over the same window
    /// family as `frostman_constant`; centers lie in the support, which is
    /// what AD-regularity quantifies over.
    pub fn ad_regular_check(&self, alpha: f64) -> (f64, f64) {
        let (upper, lower) = self.window_scan(alpha);
        (lower, upper)
    }

    fn window_scan(&self, alpha: f64) -> (f64, f64) {
        let positions = self.positions();
        let prefix: Vec<f64> = {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(self.atoms.len() + 1);
            out.push(0.0);
            for &(_, w) in &self.atoms {
                acc += w;
                out.push(acc);
            }
            out
        };
        let mass_between = |lo: f64, hi: f64| -> f64 {
            let from = positions.partition_point(|&p| p < lo);
            let to = positions.partition_point(|&p| p <= hi);
            prefix[to] - prefix[from]
        };
        let mut upper = 0.0f64;
        let mut lower = 0.0f64;
        for &x in &positions {
            for &r in &self.dyadic_radii() {
                let mass = mass_between(x - r, x + r);
                let scale = (2.0 * r).powf(alpha);
                if mass > 0.0 {
                    upper = upper.max(mass / scale);
                    lower = lower.max(scale / mass);
                }
            }
        }
        (upper, lower)
    }

    /// CSV serialization: a `#`-prefixed JSON header line, then the column
    /// header, then one `index,weight` row per atom.
    pub fn to_csv(&self, alpha_hint: Option<f64>) -> String {
        let header = MeasureHeader { delta: self.delta, origin: self.origin, alpha_hint };
        let mut out = String::new();
        let _ = writeln!(out, "# {}", serde_json::to_string(&header).expect("header json"));
        out.push_str("index,weight\n");
        for &(i, w) in &self.atoms {
            let _ = writeln!(out, "{i},{w}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<(Self, Option<f64>), MeasureError> {
        let mut lines = text.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| MeasureError::Parse("empty file".into()))?;
        let json = header_line
            .strip_prefix('#')
            .ok_or_else(|| MeasureError::Parse("first line must be a # json header".into()))?;
        let header: MeasureHeader = serde_json::from_str(json.trim())
            .map_err(|e| MeasureError::Parse(format!("bad header: {e}")))?;
        let columns = lines
            .next()
            .ok_or_else(|| MeasureError::Parse("missing column header".into()))?;
        if columns.trim() != "index,weight" {
            return Err(MeasureError::Parse(format!("unexpected columns {columns:?}")));
        }
        let mut atoms = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (idx, w) = line
                .split_once(',')
                .ok_or_else(|| MeasureError::Parse(format!("row {}: no comma", n + 3)))?;
            let idx: i64 = idx
                .trim()
                .parse()
                .map_err(|e| MeasureError::Parse(format!("row {}: {e}", n + 3)))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|e| MeasureError::Parse(format!("row {}: {e}", n + 3)))?;
            atoms.push((idx, w));
        }
        let measure = DiscreteMeasure::new(header.delta, header.origin, atoms)?;
        Ok((measure, header.alpha_hint))
    }
}

/// Atoms grouped by dyadic weight level: level k holds the cells with
/// 2^{-(k+1)} δ^α < w ≤ c_mu 2^{-k} δ^α.
#[derive(Debug, Clone)]
pub struct LevelDecomposition {
    pub levels: BTreeMap<u32, Vec<i64>>,
    pub c_mu: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl LevelDecomposition {
    pub fn level_of(&self, index: i64) -> Option<u32> {
        self.levels
            .iter()
            .find(|(_, set)| set.contains(&index))
            .map(|(&k, _)| k)
    }
}

/// Assign every positive-weight atom to its dyadic level.
///
/// The level is the smallest k ≥ 0 whose lower bound 2^{-(k+1)} δ^α < w
/// holds; the matching upper bound w ≤ c_mu 2^{-k} δ^α is then automatic
/// for c_mu ≥ 1, and its failure (only possible at that smallest k) means
/// the atom is too heavy for the claimed Frostman constant.
pub fn dyadic_levels(
    mu: &DiscreteMeasure,
    alpha: f64,
    c_mu: f64,
) -> Result<LevelDecomposition, MeasureError> {
    let base = mu.delta().powf(alpha);
    let mut levels: BTreeMap<u32, Vec<i64>> = BTreeMap::new();
    for &(index, weight) in mu.atoms() {
        if weight == 0.0 {
            continue;
        }
        let mut k = 0u32;
        while 0.5f64.powi(k as i32 + 1) * base >= weight {
            k += 1;
            assert!(k < 1100, "weight {weight} too small for level search");
        }
        let cap = c_mu * 0.5f64.powi(k as i32) * base;
        if weight > cap {
            return Err(MeasureError::UnassignedAtom { index, weight, cap, alpha });
        }
        levels.entry(k).or_default().push(index);
    }
    Ok(LevelDecomposition { levels, c_mu, delta: mu.delta(), alpha })
}

/// Outcome of a non-concentration scan.
#[derive(Debug, Clone, PartialEq)]
pub struct NonConcentrationReport {
    pub pass: bool,
    /// Largest observed |M ∩ J| / (|J|^α δ^{-α}) over the scanned windows.
    pub max_ratio: f64,
    /// Violating window as (anchor index, window length in grid cells).
    pub witness: Option<(i64, i64)>,
}

/// Check |M ∩ J| ≤ K |J|^α δ^{-α} over element-anchored closed windows
/// J = [mδ, mδ + 2^t δ] with dyadic cell counts 2^t from 1 to the span.
///
/// Restricting to anchored dyadic windows misses the true supremum by at
/// most a factor 2 in window length; callers budget for that slack. A
/// relative 1e-12 slack absorbs the powf rounding in the threshold.
pub fn nonconcentration_check(
    m: &[i64],
    delta: f64,
    alpha: f64,
    k: f64,
) -> NonConcentrationReport {
    debug_assert!(m.windows(2).all(|w| w[0] < w[1]), "M must be sorted");
    let mut max_ratio = 0.0f64;
    if m.is_empty() {
        return NonConcentrationReport { pass: true, max_ratio, witness: None };
    }
    let span = (m[m.len() - 1] - m[0]).max(1);
    let _ = delta; // window lengths enter only through |J|^α δ^{-α} = cells^α
    for (i, &anchor) in m.iter().enumerate() {
        let mut cells: i64 = 1;
        loop {
            let hi = anchor.saturating_add(cells);
            let count = m[i..].partition_point(|&x| x <= hi);
            let allowed = (cells as f64).powf(alpha);
            max_ratio = max_ratio.max(count as f64 / allowed);
            if count as f64 > k * allowed * (1.0 + 1e-12) {
                return NonConcentrationReport {
                    pass: false,
                    max_ratio,
                    witness: Some((anchor, cells)),
                };
            }
            if cells >= span {
                break;
            }
            cells *= 2;
        }
    }
    NonConcentrationReport { pass: true, max_ratio, witness: None }
}

/// Residue-class partition of a non-concentrated set.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedClassPartition {
    pub classes: Vec<Vec<i64>>,
    pub l: usize,
}

/// Split a sorted δ-separated set satisfying the K-non-concentration bound
/// into L = ceil(2K) + 1 residue classes x_j, j ≡ ℓ (mod L). Inside a
/// window holding m points of M, each class holds at most m/L + 1, which
/// turns the K-bound into the absolute bound 3 |J|^α δ^{-α}.
pub fn partition_nonconcentrated(
    m: &[i64],
    delta: f64,
    alpha: f64,
    k: f64,
) -> Result<SeparatedClassPartition, MeasureError> {
    let report = nonconcentration_check(m, delta, alpha, k);
    if let Some((anchor, cells)) = report.witness {
        let count = m
            .iter()
            .filter(|&&x| x >= anchor && x <= anchor + cells)
            .count();
        return Err(MeasureError::PreconditionFail {
            anchor,
            cells,
            count,
            bound: k * (cells as f64).powf(alpha),
        });
    }
    let l = (2.0 * k).ceil() as usize + 1;
    let mut classes = vec![Vec::new(); l];
    for (j, &x) in m.iter().enumerate() {
        classes[j % l].push(x);
    }
    Ok(SeparatedClassPartition { classes, l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_grid(exp: i32) -> DiscreteMeasure {
        let n = 1i64 << exp;
        let w = 1.0 / n as f64;
        DiscreteMeasure::new(2f64.powi(-exp), 0.0, (0..n).map(|i| (i, w)).collect()).unwrap()
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert_eq!(
            DiscreteMeasure::new(0.3, 0.0, vec![(0, 1.0)]),
            Err(MeasureError::BadPitch(0.3))
        );
        assert_eq!(
            DiscreteMeasure::new(0.5, 0.0, vec![(1, 0.5), (0, 0.5)]),
            Err(MeasureError::NonMonotoneIndices)
        );
        assert!(matches!(
            DiscreteMeasure::new(0.5, 0.0, vec![(0, 0.4), (1, 0.4)]),
            Err(MeasureError::MassNotNormalized(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(0.5, 0.0, vec![(0, -0.5), (1, 1.5)]),
            Err(MeasureError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn cantor_alpha_one_is_uniform() {
        let mu = DiscreteMeasure::build_cantor(1.0, 3).unwrap();
        assert_eq!(mu.delta(), 0.125);
        assert_eq!(mu.len(), 8);
        for (k, &(i, w)) in mu.atoms().iter().enumerate() {
            assert_eq!(i, k as i64);
            assert_eq!(w, 0.125);
        }
    }

    #[test]
    fn cantor_half_depth_two_positions() {
        let mu = DiscreteMeasure::build_cantor(0.5, 2).unwrap();
        assert_eq!(mu.delta(), 1.0 / 16.0);
        // Left endpoints 0, 3/16, 3/4, 15/16 on the 1/16 grid.
        assert_eq!(mu.index_set(), vec![0, 3, 12, 15]);
        assert_eq!(mu.atoms().iter().map(|a| a.1).sum::<f64>(), 1.0);
        let pos = mu.positions();
        for pair in pos.windows(2) {
            assert!(pair[1] - pair[0] >= mu.delta());
        }
    }

    #[test]
    fn cantor_depth_zero_and_budget() {
        let mu = DiscreteMeasure::build_cantor(0.3, 0).unwrap();
        assert_eq!(mu.atoms(), &[(0, 1.0)]);
        assert!(matches!(
            DiscreteMeasure::build_cantor(0.5, 25),
            Err(MeasureError::DepthTooLarge { .. })
        ));
    }

    #[test]
    fn frostman_constant_uniform_and_point_mass() {
        let mu = DiscreteMeasure::build_cantor(1.0, 6).unwrap();
        let c = mu.frostman_constant(1.0);
        assert!((0.5..=2.0).contains(&c), "uniform constant {c}");

        let point = DiscreteMeasure::new(2f64.powi(-50), 0.0, vec![(0, 1.0)]).unwrap();
        assert!(point.frostman_constant(0.5) > 1e6);
    }

    #[test]
    fn ad_regular_constants() {
        let (lower, upper) = DiscreteMeasure::build_cantor(0.5, 6).unwrap().ad_regular_check(0.5);
        assert!(lower <= 8.0, "cantor lower {lower}");
        assert!(upper <= 8.0, "cantor upper {upper}");

        let (lower, upper) = DiscreteMeasure::build_cantor(1.0, 6).unwrap().ad_regular_check(1.0);
        assert!(lower <= 2.0, "uniform lower {lower}");
        assert!(upper <= 2.0, "uniform upper {upper}");
    }

    #[test]
    fn dyadic_levels_uniform_case() {
        // Uniform at δ = 2^-4, α = 1/2: weight 2^-4 against δ^α = 2^-2
        // lands every atom in level 2.
        let mu = uniform_grid(4);
        let decomp = dyadic_levels(&mu, 0.5, 1.0).unwrap();
        assert_eq!(decomp.levels.len(), 1);
        assert_eq!(decomp.levels[&2].len(), 16);
    }

    #[test]
    fn dyadic_levels_mass_and_errors() {
        let mu = DiscreteMeasure::new(0.0625, 0.0, vec![(0, 0.9), (5, 0.1)]).unwrap();
        // 0.9 > c_mu δ^0.5 = 0.25: no admissible level.
        assert!(matches!(
            dyadic_levels(&mu, 0.5, 1.0),
            Err(MeasureError::UnassignedAtom { index: 0, .. })
        ));
        // With a large enough constant both atoms land somewhere and mass
        // is conserved.
        let decomp = dyadic_levels(&mu, 0.5, 4.0).unwrap();
        let covered: usize = decomp.levels.values().map(|v| v.len()).sum();
        assert_eq!(covered, 2);
        let mass: f64 = decomp
            .levels
            .values()
            .flatten()
            .map(|&i| mu.atoms().iter().find(|a| a.0 == i).unwrap().1)
            .sum();
        assert!((mass - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn level_bounds_hold_for_every_assignment() {
        let mu = DiscreteMeasure::build_cantor(0.5, 6).unwrap();
        // Window scans normalize by (2r)^α, so the single-radius cap
        // w ≤ C δ^α needs the 2^α ≤ 2 conversion factor.
        let c_mu = (2.0 * mu.frostman_constant(0.5)).max(1.0);
        let decomp = dyadic_levels(&mu, 0.5, c_mu).unwrap();
        let base = mu.delta().powf(0.5);
        for (&k, set) in &decomp.levels {
            for &i in set {
                let w = mu.atoms().iter().find(|a| a.0 == i).unwrap().1;
                assert!(w > 0.5f64.powi(k as i32 + 1) * base);
                assert!(w <= c_mu * 0.5f64.powi(k as i32) * base);
            }
        }
    }

    #[test]
    fn level_class_counts_stay_dyadically_bounded() {
        // Partition each level set and compare the class count against the
        // packing bound: K_k ≤ 2·3^α c_mu 2^k, so L_k ≤ 4·3^α c_mu 2^k + 2,
        // and trivially L_k ≤ |M_k| + 1.
        let mu = DiscreteMeasure::build_cantor(0.5, 6).unwrap();
        let alpha = 0.5;
        let c_mu = (2.0 * mu.frostman_constant(alpha)).max(1.0);
        let decomp = dyadic_levels(&mu, alpha, c_mu).unwrap();
        for (&k, set) in &decomp.levels {
            let report = nonconcentration_check(set, mu.delta(), alpha, f64::INFINITY);
            let measured_k = report.max_ratio.max(1.0);
            let partition = partition_nonconcentrated(set, mu.delta(), alpha, measured_k).unwrap();
            let cap = 4.0 * 3f64.powf(alpha) * c_mu * 2f64.powi(k as i32) + 2.0;
            assert!(
                (partition.l as f64) <= cap,
                "level {k}: {} classes over cap {cap}",
                partition.l
            );
            assert!(partition.l <= set.len() + 1);
        }
    }

    #[test]
    fn nonconcentration_examples() {
        // Arithmetic progression at pitch δ with α = 1 passes with K = 2.
        let ap: Vec<i64> = (0..64).collect();
        assert!(nonconcentration_check(&ap, 0.015625, 1.0, 2.0).pass);

        // Any clump of ≥ 2 consecutive cells fails K = 1 at α = 1/2.
        let clump: Vec<i64> = vec![10, 11, 12, 13];
        let report = nonconcentration_check(&clump, 0.0625, 0.5, 1.0);
        assert!(!report.pass);
        assert_eq!(report.witness, Some((10, 1)));

        let cantor = DiscreteMeasure::build_cantor(0.5, 6).unwrap();
        assert!(nonconcentration_check(&cantor.index_set(), cantor.delta(), 0.5, 8.0).pass);
    }

    #[test]
    fn partition_full_grid() {
        let m: Vec<i64> = (0..16).collect();
        let partition = partition_nonconcentrated(&m, 1.0 / 16.0, 0.5, 4.0).unwrap();
        assert_eq!(partition.l, 9);
        let rebuilt: Vec<i64> = {
            let mut all: Vec<i64> = partition.classes.iter().flatten().copied().collect();
            all.sort_unstable();
            all
        };
        assert_eq!(rebuilt, m);
        for class in &partition.classes {
            let report = nonconcentration_check(class, 1.0 / 16.0, 0.5, 3.0);
            assert!(report.pass, "class {class:?} ratio {}", report.max_ratio);
        }
    }

    #[test]
    fn partition_tiny_input_and_precondition() {
        let m: Vec<i64> = vec![0, 7];
        let partition = partition_nonconcentrated(&m, 0.125, 0.5, 2.0).unwrap();
        assert_eq!(partition.l, 5);
        assert!(partition.classes.iter().all(|c| c.len() <= 1));

        let clump: Vec<i64> = (0..8).collect();
        assert!(matches!(
            partition_nonconcentrated(&clump, 0.125, 0.5, 1.0),
            Err(MeasureError::PreconditionFail { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mu = DiscreteMeasure::build_cantor(0.5, 3).unwrap();
        let text = mu.to_csv(Some(0.5));
        let (back, hint) = DiscreteMeasure::from_csv(&text).unwrap();
        assert_eq!(back, mu);
        assert_eq!(hint, Some(0.5));
        assert!(DiscreteMeasure::from_csv("index,weight\n0,1\n").is_err());
    }

    proptest! {
        #[test]
        fn levels_cover_every_positive_atom(
            raw in proptest::collection::btree_map(0i64..256, 1u32..1000, 1..40),
        ) {
            let total: f64 = raw.values().map(|&w| w as f64).sum();
            let atoms: Vec<(i64, f64)> = raw.iter().map(|(&i, &w)| (i, w as f64 / total)).collect();
            let mu = DiscreteMeasure::new(2f64.powi(-8), 0.0, atoms).unwrap();
            let c_mu = (2.0 * mu.frostman_constant(0.5)).max(1.0);
            let decomp = dyadic_levels(&mu, 0.5, c_mu).unwrap();
            let mut covered: Vec<i64> = decomp.levels.values().flatten().copied().collect();
            covered.sort_unstable();
            prop_assert_eq!(covered, mu.index_set());
            let mass: f64 = decomp.levels.values().flatten()
                .map(|&i| mu.atoms().iter().find(|a| a.0 == i).unwrap().1)
                .sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn partition_classes_meet_absolute_bound(
            raw in proptest::collection::btree_set(0i64..512, 1..64),
        ) {
            let m: Vec<i64> = raw.into_iter().collect();
            let delta = 2f64.powi(-9);
            // Measure the actual concentration, then partition with exactly
            // that constant; the 3-bound must hold for every class.
            let measured = nonconcentration_check(&m, delta, 0.5, f64::INFINITY).max_ratio;
            let partition = partition_nonconcentrated(&m, delta, 0.5, measured.max(1.0)).unwrap();
            let mut union: Vec<i64> = partition.classes.iter().flatten().copied().collect();
            union.sort_unstable();
            prop_assert_eq!(union, m);
            for class in &partition.classes {
                prop_assert!(nonconcentration_check(class, delta, 0.5, 3.0).pass);
            }
        }
    }
}
