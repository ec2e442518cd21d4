//! Pushforward distributions ν = f(μ, μ, μ), their smoothed L² energy, the
//! near-diagonal coincidence integral with its seven-way gradient split,
//! and the tube / sublevel mass estimators used by the scan harness.
//!
//! Everything here works at bin granularity: values are binned at a probe
//! width and interval conditions like |v - v'| ≤ 2δ become windowed sums
//! over bin offsets, which over-counts by at most one bin at each edge.
//! That slack is part of every contract that consumes these numbers.

use crate::kernel::SmoothingKernel;
use crate::measure::DiscreteMeasure;
use crate::quadpoly::{Quad2, QuadPoly};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Hard cap on enumerated atom triples.
pub const TRIPLE_BUDGET: u64 = 1 << 30;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("{atoms} atoms give {triples} triples, over the budget {budget}")]
    TripleBudgetExceeded { atoms: usize, triples: u64, budget: u64 },
    #[error("quadratic form has |det| = {det:.3e} ≤ {tol:.3e}, not rank 2")]
    DegenerateForm { det: f64, tol: f64 },
    #[error("binned distribution file: {0}")]
    Parse(String),
}

fn check_budget(atoms: usize) -> Result<(), EnergyError> {
    let triples = (atoms as u64).saturating_pow(3);
    if triples > TRIPLE_BUDGET {
        return Err(EnergyError::TripleBudgetExceeded { atoms, triples, budget: TRIPLE_BUDGET });
    }
    Ok(())
}

/// Sparse histogram over the bin lattice {[k·w, (k+1)·w)}. Bins are kept
/// sorted by index; absent bins carry zero mass. The occupied index range
/// of a pushforward can be enormous even when few bins are occupied (an
/// unbounded-support measure maps under x + yz to values of order δ^{-2}),
/// so storage is sparse while the bin lattice itself stays a fixed dense
/// grid anchored at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDistribution {
    bin_width: f64,
    bins: Vec<(i64, f64)>,
}

impl BinnedDistribution {
    pub fn from_pairs(bin_width: f64, mut pairs: Vec<(i64, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut bins: Vec<(i64, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            match bins.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => bins.push((i, w)),
            }
        }
        BinnedDistribution { bin_width, bins }
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bins(&self) -> &[(i64, f64)] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Left edge of the first occupied bin.
    pub fn offset(&self) -> f64 {
        self.bins.first().map_or(0.0, |&(i, _)| i as f64 * self.bin_width)
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|&(_, m)| m).sum()
    }

    pub fn mass_at(&self, index: i64) -> f64 {
        match self.bins.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.bins[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Σ_{|j| ≤ radius} mass[index + j].
    pub fn window_sum(&self, index: i64, radius: i64) -> f64 {
        let lo = match self.bins.binary_search_by_key(&(index - radius), |&(i, _)| i) {
            Ok(p) | Err(p) => p,
        };
        self.bins[lo..]
            .iter()
            .take_while(|&&(i, _)| i <= index + radius)
            .map(|&(_, m)| m)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {{\"bin_width\":{}}}", self.bin_width);
        out.push_str("index,mass\n");
        for &(i, m) in &self.bins {
            let _ = writeln!(out, "{i},{m}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EnergyError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| EnergyError::Parse("missing # header".into()))?;
        let header: serde_json::Value = serde_json::from_str(header.trim())
            .map_err(|e| EnergyError::Parse(format!("bad header: {e}")))?;
        let bin_width = header["bin_width"]
            .as_f64()
            .ok_or_else(|| EnergyError::Parse("header lacks bin_width".into()))?;
        match lines.next().map(str::trim) {
            Some("index,mass") => {}
            other => return Err(EnergyError::Parse(format!("unexpected columns {other:?}"))),
        }
        let mut pairs = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (i, m) = line
                .split_once(',')
                .ok_or_else(|| EnergyError::Parse(format!("bad row {line:?}")))?;
            pairs.push((
                i.trim().parse().map_err(|e| EnergyError::Parse(format!("{e}")))?,
                m.trim().parse().map_err(|e| EnergyError::Parse(format!("{e}")))?,
            ));
        }
        Ok(BinnedDistribution::from_pairs(bin_width, pairs))
    }
}

/// One deterministic parallel pass over all atom triples of μ. Every
/// triple lands in bin floor(f(x,y,z)/width) and contributes its weight
/// product to each of the FLAGS histograms its flag vector selects.
///
/// Determinism: the x-axis is cut into min(64, n) fixed contiguous chunks
/// regardless of worker count, each chunk accumulates privately in index
/// order, and chunks merge in chunk order.
fn scan_triples<const FLAGS: usize>(
    mu: &DiscreteMeasure,
    width: f64,
    value: impl Fn(f64, f64, f64) -> f64 + Sync,
    flags: impl Fn(f64, f64, f64) -> [bool; FLAGS] + Sync,
) -> Result<[BinnedDistribution; FLAGS], EnergyError> {
    check_budget(mu.len())?;
    let pos = mu.positions();
    let weights: Vec<f64> = mu.atoms().iter().map(|a| a.1).collect();
    let n = pos.len();
    let chunk_count = n.min(64).max(1);
    let ranges: Vec<(usize, usize)> = (0..chunk_count)
        .map(|c| (c * n / chunk_count, (c + 1) * n / chunk_count))
        .collect();
    let partials: Vec<[BTreeMap<i64, f64>; FLAGS]> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let mut maps: [BTreeMap<i64, f64>; FLAGS] =
                std::array::from_fn(|_| BTreeMap::new());
            for ix in start..end {
                for iy in 0..n {
                    let wxy = weights[ix] * weights[iy];
                    for iz in 0..n {
                        let (x, y, z) = (pos[ix], pos[iy], pos[iz]);
                        let w = wxy * weights[iz];
                        let bin = (value(x, y, z) / width).floor() as i64;
                        let mask = flags(x, y, z);
                        for (k, hit) in mask.iter().enumerate() {
                            if *hit {
                                *maps[k].entry(bin).or_insert(0.0) += w;
                            }
                        }
                    }
                }
            }
            maps
        })
        .collect();
    let mut merged: [BTreeMap<i64, f64>; FLAGS] = std::array::from_fn(|_| BTreeMap::new());
    for part in partials {
        for (k, map) in part.into_iter().enumerate() {
            for (bin, m) in map {
                *merged[k].entry(bin).or_insert(0.0) += m;
            }
        }
    }
    Ok(merged.map(|map| BinnedDistribution {
        bin_width: width,
        bins: map.into_iter().collect(),
    }))
}

/// ν = f(μ, μ, μ) binned at an arbitrary probe width.
pub fn pushforward_binned(
    f: &QuadPoly,
    mu: &DiscreteMeasure,
    width: f64,
) -> Result<BinnedDistribution, EnergyError> {
    let [nu] = scan_triples(mu, width, |x, y, z| f.evaluate([x, y, z]), |_, _, _| [true])?;
    Ok(nu)
}

/// ν = f(μ, μ, μ) at the measure's own pitch.
pub fn pushforward(f: &QuadPoly, mu: &DiscreteMeasure) -> Result<BinnedDistribution, EnergyError> {
    pushforward_binned(f, mu, mu.delta())
}

/// Windowed correlation Σ_m p_m · Σ_{|j| ≤ radius} q_{m+j} of two sparse
/// histograms on the same lattice.
fn window_join(p: &BinnedDistribution, q: &BinnedDistribution, radius: i64) -> f64 {
    p.bins
        .iter()
        .fold(0.0, |acc, &(m, mass)| acc + mass * q.window_sum(m, radius))
}

/// ‖φ_δ∗ν‖₂² = Σ_{m,m'} mass[m] mass[m'] δ⁻¹ K(m - m'), using that K
/// vanishes outside (-2, 2) so only |m - m'| ≤ 2 contributes.
pub fn smoothed_energy(nu: &BinnedDistribution, delta: f64, kernel: &SmoothingKernel) -> f64 {
    assert_eq!(nu.bin_width(), delta, "probe width must match the bin width");
    let k: Vec<f64> = (0..=2).map(|j| kernel.eval(j as f64)).collect();
    let mut sum = 0.0;
    for &(m, mass) in &nu.bins {
        let mut row = k[0] * mass;
        for j in 1..=2i64 {
            row += k[j as usize] * (nu.mass_at(m + j) + nu.mass_at(m - j));
        }
        sum += mass * row;
    }
    sum / delta
}

/// (μ³ × μ³){|f - f'| ≤ 2δ} at bin granularity: bin f-values at width δ
/// and sum h_m · (h_{m-2} + … + h_{m+2}). Bin distance ≤ 2 captures every
/// pair with |f - f'| ≤ 2δ and admits pairs up to < 3δ apart, the one-bin
/// slack at each edge.
pub fn coincidence_integral(
    f: &QuadPoly,
    mu: &DiscreteMeasure,
    delta: f64,
) -> Result<f64, EnergyError> {
    let nu = pushforward_binned(f, mu, delta)?;
    Ok(window_join(&nu, &nu, 2))
}

/// Seven-way split of the coincidence integral by gradient size.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceSplit {
    /// parts[0]: both triples have |∇f| ≤ δ^κ (Euclidean);
    /// parts[1..=3]: the primed triple has |∂f/∂x|, |∂f/∂y|, |∂f/∂z|
    /// above δ^κ/√3; parts[4..=6]: the same thresholds on the unprimed
    /// triple.
    pub parts: [f64; 7],
    pub total: f64,
    pub kappa: f64,
}

impl CoincidenceSplit {
    /// Union-bound cover: if a pair escapes parts[0], one of its triples
    /// has gradient norm > δ^κ, hence some component > δ^κ/√3.
    pub fn cover_holds(&self) -> bool {
        self.total <= self.parts.iter().sum::<f64>() * (1.0 + 1e-12) + 1e-300
    }
}

pub fn coincidence_split(
    f: &QuadPoly,
    mu: &DiscreteMeasure,
    delta: f64,
    kappa: f64,
) -> Result<CoincidenceSplit, EnergyError> {
    let grad_cut = delta.powf(kappa);
    let comp_cut = grad_cut / 3f64.sqrt();
    let [h, g, ax, ay, az] = scan_triples(
        mu,
        delta,
        |x, y, z| f.evaluate([x, y, z]),
        |x, y, z| {
            let grad = f.gradient([x, y, z]);
            let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
            [
                true,
                norm <= grad_cut,
                grad[0].abs() > comp_cut,
                grad[1].abs() > comp_cut,
                grad[2].abs() > comp_cut,
            ]
        },
    )?;
    // Unprimed triple indexes the first factor, primed the second; the
    // first three component terms restrict the primed side, the last
    // three the unprimed side, mirroring left-right.
    let parts = [
        window_join(&g, &g, 2),
        window_join(&h, &ax, 2),
        window_join(&h, &ay, 2),
        window_join(&h, &az, 2),
        window_join(&ax, &h, 2),
        window_join(&ay, &h, 2),
        window_join(&az, &h, 2),
    ];
    Ok(CoincidenceSplit { parts, total: window_join(&h, &h, 2), kappa })
}

/// Target set for a neighborhood-mass query in the product cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TubeGeometry {
    Point([f64; 3]),
    Line { point: [f64; 3], direction: [f64; 3] },
}

/// (μ×μ×μ) mass of the closed r-neighborhood of a point or line, by
/// enumeration over (x, y) with the admissible z-range solved in closed
/// form, so whole z-fibers are rejected early.
pub fn tube_mass(
    mu: &DiscreteMeasure,
    geometry: TubeGeometry,
    r: f64,
) -> Result<f64, EnergyError> {
    check_budget(mu.len())?;
    let pos = mu.positions();
    let weights: Vec<f64> = mu.atoms().iter().map(|a| a.1).collect();
    let prefix: Vec<f64> = {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(weights.len() + 1);
        out.push(0.0);
        for &w in &weights {
            acc += w;
            out.push(acc);
        }
        out
    };
    // μ-mass of atoms whose position lies in [lo, hi].
    let fiber_mass = |lo: f64, hi: f64| -> f64 {
        let from = pos.partition_point(|&p| p < lo);
        let to = pos.partition_point(|&p| p <= hi);
        prefix[to] - prefix[from]
    };
    let r2 = r * r;
    let mut total = 0.0;
    match geometry {
        TubeGeometry::Point(p) => {
            for (ix, &x) in pos.iter().enumerate() {
                let dx2 = (x - p[0]) * (x - p[0]);
                if dx2 > r2 {
                    continue;
                }
                for (iy, &y) in pos.iter().enumerate() {
                    let dy2 = (y - p[1]) * (y - p[1]);
                    if dx2 + dy2 > r2 {
                        continue;
                    }
                    let s = (r2 - dx2 - dy2).sqrt();
                    total += weights[ix] * weights[iy] * fiber_mass(p[2] - s, p[2] + s);
                }
            }
        }
        TubeGeometry::Line { point, direction } => {
            let norm = (direction[0] * direction[0]
                + direction[1] * direction[1]
                + direction[2] * direction[2])
                .sqrt();
            assert!(norm > 0.0, "line direction must be nonzero");
            let d = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
            for (ix, &x) in pos.iter().enumerate() {
                let ux = x - point[0];
                for (iy, &y) in pos.iter().enumerate() {
                    let uy = y - point[1];
                    // dist² as a quadratic in t = z - point.z:
                    // (1 - d₃²) t² - 2 c d₃ t + (ux² + uy² - c²), c = ux d₁ + uy d₂.
                    let c = ux * d[0] + uy * d[1];
                    let qa = 1.0 - d[2] * d[2];
                    let qb = -2.0 * c * d[2];
                    let qc = ux * ux + uy * uy - c * c - r2;
                    let w = weights[ix] * weights[iy];
                    if qa <= 1e-15 {
                        // Line parallel to the z-axis: membership is
                        // independent of z.
                        if qc <= 0.0 {
                            total += w;
                        }
                        continue;
                    }
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc < 0.0 {
                        continue;
                    }
                    let sq = disc.sqrt();
                    let lo = point[2] + (-qb - sq) / (2.0 * qa);
                    let hi = point[2] + (-qb + sq) / (2.0 * qa);
                    total += w * fiber_mass(lo, hi);
                }
            }
        }
    }
    Ok(total)
}

fn require_rank2(q: &Quad2) -> Result<(), EnergyError> {
    let det = q.q20 * q.q02 - q.q11 * q.q11 / 4.0;
    let scale = q.q20.abs().max(q.q11.abs()).max(q.q02.abs()).max(1.0);
    let tol = 1e-12 * scale * scale;
    if det.abs() <= tol {
        return Err(EnergyError::DegenerateForm { det, tol });
    }
    Ok(())
}

/// Exact (no binning) (μ×μ){|Q(u,v) - t| ≤ δ} for a rank-2 form Q.
pub fn sublevel_mass_at(
    q: &Quad2,
    mu: &DiscreteMeasure,
    delta: f64,
    t: f64,
) -> Result<f64, EnergyError> {
    require_rank2(q)?;
    let pos = mu.positions();
    let mut total = 0.0;
    for (iu, &u) in pos.iter().enumerate() {
        for (iv, &v) in pos.iter().enumerate() {
            if (crate::quadpoly::eval_quad2(q, u, v) - t).abs() <= delta {
                total += mu.atoms()[iu].1 * mu.atoms()[iv].1;
            }
        }
    }
    Ok(total)
}

/// Bin the values Q(u, v) at width δ and report the best two-adjacent-bin
/// mass together with its center t on the δ-grid: the sup over grid t of
/// (μ×μ){|Q - t| ≤ δ} up to one-bin slack at the window edges.
pub fn sublevel_mass_profile(
    q: &Quad2,
    mu: &DiscreteMeasure,
    delta: f64,
) -> Result<(f64, f64), EnergyError> {
    require_rank2(q)?;
    let pos = mu.positions();
    let mut pairs = Vec::with_capacity(pos.len() * pos.len());
    for (iu, &u) in pos.iter().enumerate() {
        for (iv, &v) in pos.iter().enumerate() {
            let value = crate::quadpoly::eval_quad2(q, u, v);
            pairs.push(((value / delta).floor() as i64, mu.atoms()[iu].1 * mu.atoms()[iv].1));
        }
    }
    let binned = BinnedDistribution::from_pairs(delta, pairs);
    let mut best = (0.0f64, 0.0f64);
    for &(m, mass) in binned.bins() {
        // Windows centered at t = (m+1)δ cover bins {m, m+1}.
        let pair = mass + binned.mass_at(m + 1);
        if pair > best.0 {
            best = (pair, (m + 1) as f64 * delta);
        }
    }
    Ok(best)
}

/// Largest 5-bin window mass of the pushforward at probe width δ: the
/// sup over bin centers t of ν({|v - t| ≤ 2δ}) at bin granularity.
pub fn slice_mass_sup(
    f: &QuadPoly,
    mu: &DiscreteMeasure,
    delta: f64,
) -> Result<f64, EnergyError> {
    let nu = pushforward_binned(f, mu, delta)?;
    Ok(nu
        .bins()
        .iter()
        .map(|&(m, _)| nu.window_sum(m, 2))
        .fold(0.0, f64::max))
}
