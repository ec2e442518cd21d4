//! Planar δ-incidence counting between point sets and line families: the
//! angle-and-offset line representation with its metric, lines generated
//! from parameter pairs of a quadratic, the Φ-image point sets, greedy
//! ρ-separation, the |J|-threshold split of the parameter square, the
//! additive energy count, and the collinearity implication checker.

use crate::quadpoly::{QuadPoly, QuadPolyError};
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IncidenceError {
    #[error("slope form vanishes identically (xy and yz coefficients both zero)")]
    AllZeroAxis,
    #[error("{size} pairs exceed the budget {budget}")]
    BudgetExceeded { size: u64, budget: u64 },
    #[error("fiber gap {gap:.3e} below the threshold {threshold:.3e}")]
    FiberTooClose { gap: f64, threshold: f64 },
    #[error("file: {0}")]
    Parse(String),
}

/// Line {t (cos ϑ, sin ϑ) + a (-sin ϑ, cos ϑ) : t ∈ ℝ} in canonical form:
/// a ≥ 0, ϑ ∈ [0, 2π), and ϑ ∈ [0, π) whenever a = 0 (both signs of the
/// direction describe the same line through the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarLine {
    theta: f64,
    a: f64,
}

const TAU: f64 = 2.0 * std::f64::consts::PI;

impl PlanarLine {
    pub fn new(theta: f64, a: f64) -> Self {
        let (mut theta, mut a) = (theta.rem_euclid(TAU), a);
        if a < 0.0 {
            a = -a;
            theta = (theta + std::f64::consts::PI).rem_euclid(TAU);
        }
        if a == 0.0 && theta >= std::f64::consts::PI {
            theta -= std::f64::consts::PI;
        }
        PlanarLine { theta, a }
    }

    /// Line X = slope·Y + intercept in the (X, Y) plane: direction
    /// (m, 1)/√(1+m²), signed offset -k/√(1+m²), then canonicalized.
    pub fn from_slope_intercept(m: f64, k: f64) -> Self {
        let norm = (1.0 + m * m).sqrt();
        PlanarLine::new(f64::atan2(1.0 / norm, m / norm), -k / norm)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn direction(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Unit normal (-sin ϑ, cos ϑ); the foot point of the line is a·normal.
    pub fn normal(&self) -> (f64, f64) {
        (-self.theta.sin(), self.theta.cos())
    }

    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (dx, dy) = self.direction();
        let (nx, ny) = self.normal();
        (t * dx + self.a * nx, t * dy + self.a * ny)
    }

    /// Euclidean distance from (x, y): |⟨p, normal⟩ - a|. Vertical lines
    /// are ordinary members, no special case.
    pub fn point_distance(&self, x: f64, y: f64) -> f64 {
        let (nx, ny) = self.normal();
        (x * nx + y * ny - self.a).abs()
    }
}

/// Direction chord plus foot-point distance:
/// √((cos ϑ - cos ϑ')² + (sin ϑ - sin ϑ')²) + |a·n(ϑ) - a'·n(ϑ')|.
pub fn line_metric(l1: &PlanarLine, l2: &PlanarLine) -> f64 {
    let (c1, s1) = l1.direction();
    let (c2, s2) = l2.direction();
    let chord = ((c1 - c2).powi(2) + (s1 - s2).powi(2)).sqrt();
    let (n1x, n1y) = l1.normal();
    let (n2x, n2y) = l2.normal();
    let fx = l1.a * n1x - l2.a * n2x;
    let fy = l1.a * n1y - l2.a * n2y;
    chord + (fx * fx + fy * fy).sqrt()
}

/// Slope/intercept view of a generated line, kept alongside the canonical
/// form for round-trip checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeIntercept {
    pub slope: f64,
    pub intercept: f64,
}

/// Line cut out by a parameter pair (x, z): X = (ax + cz)·Y + (bxz + dx² +
/// gz² + hx + jz). Errs when the slope form ax + cz vanishes identically;
/// callers then route to the switched-pair variant.
pub fn line_from_pair(
    f: &QuadPoly,
    x: f64,
    z: f64,
) -> Result<(PlanarLine, SlopeIntercept), IncidenceError> {
    if f.a == 0.0 && f.c == 0.0 {
        return Err(IncidenceError::AllZeroAxis);
    }
    let slope = f.a * x + f.c * z;
    let intercept = f.b * x * z + f.d * x * x + f.g * z * z + f.h * x + f.j * z;
    Ok((PlanarLine::from_slope_intercept(slope, intercept), SlopeIntercept { slope, intercept }))
}

/// Switched-variable variant for polynomials with no xy / yz terms: the
/// pair (x, y) cuts out X = (bx)·Z + (dx² + ey² + hx + iy).
pub fn line_from_pair_switched(f: &QuadPoly, x: f64, y: f64) -> (PlanarLine, SlopeIntercept) {
    let slope = f.b * x;
    let intercept = f.d * x * x + f.e * y * y + f.h * x + f.i * y;
    (PlanarLine::from_slope_intercept(slope, intercept), SlopeIntercept { slope, intercept })
}

/// Planar points with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet2D {
    points: Vec<(f64, f64, u64)>,
}

impl PointSet2D {
    /// Merge coincident points (1e-15 component-wise tolerance) into
    /// multiplicities.
    pub fn from_points(mut raw: Vec<(f64, f64)>) -> Self {
        raw.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        let mut points: Vec<(f64, f64, u64)> = Vec::with_capacity(raw.len());
        for (x, y) in raw {
            match points.last_mut() {
                Some(last) if (x - last.0).abs() <= 1e-15 && (y - last.1).abs() <= 1e-15 => {
                    last.2 += 1
                }
                _ => points.push((x, y, 1)),
            }
        }
        PointSet2D { points }
    }

    pub fn from_weighted(points: Vec<(f64, f64, u64)>) -> Self {
        assert!(points.iter().all(|p| p.2 >= 1), "multiplicity must be ≥ 1");
        PointSet2D { points }
    }

    pub fn points(&self) -> &[(f64, f64, u64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.points.iter().map(|p| p.2).sum()
    }

    pub fn max_multiplicity(&self) -> u64 {
        self.points.iter().map(|p| p.2).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,multiplicity\n");
        for &(x, y, m) in &self.points {
            let _ = writeln!(out, "{x},{y},{m}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, IncidenceError> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,y,multiplicity") => {}
            other => return Err(IncidenceError::Parse(format!("unexpected columns {other:?}"))),
        }
        let mut points = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(IncidenceError::Parse(format!("bad row {line:?}")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| IncidenceError::Parse(format!("bad row {line:?}: {e}")))
            };
            let m = fields[2]
                .trim()
                .parse::<u64>()
                .map_err(|e| IncidenceError::Parse(format!("bad row {line:?}: {e}")))?;
            points.push((parse(fields[0])?, parse(fields[1])?, m));
        }
        Ok(PointSet2D::from_weighted(points))
    }
}

/// P = {(F(x, y), y) : x, y ∈ M} with multiplicities merged.
pub fn phi_point_set(f: impl Fn(f64, f64) -> f64, m: &[f64]) -> PointSet2D {
    let mut pts = Vec::with_capacity(m.len() * m.len());
    for &y in m {
        for &x in m {
            pts.push((f(x, y), y));
        }
    }
    PointSet2D::from_points(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEntry {
    pub line: PlanarLine,
    pub multiplicity: u64,
    /// Parameter pair that generated the line, when known.
    pub provenance: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineFamily {
    pub entries: Vec<LineEntry>,
}

impl LineFamily {
    pub fn from_lines(lines: Vec<PlanarLine>) -> Self {
        LineFamily {
            entries: lines
                .into_iter()
                .map(|line| LineEntry { line, multiplicity: 1, provenance: None })
                .collect(),
        }
    }

    /// Generate one line per parameter pair, merging exact duplicates
    /// (1e-15 tolerance in (ϑ, a)) into multiplicities; the first
    /// generating pair is kept as provenance.
    pub fn from_pairs(f: &QuadPoly, pairs: &[(f64, f64)]) -> Result<Self, IncidenceError> {
        let mut entries: Vec<LineEntry> = Vec::new();
        for &(x, z) in pairs {
            let (line, _) = line_from_pair(f, x, z)?;
            match entries.iter_mut().find(|e| {
                (e.line.theta - line.theta).abs() <= 1e-15 && (e.line.a - line.a).abs() <= 1e-15
            }) {
                Some(entry) => entry.multiplicity += 1,
                None => entries.push(LineEntry { line, multiplicity: 1, provenance: Some((x, z)) }),
            }
        }
        Ok(LineFamily { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_multiplicity(&self) -> u64 {
        self.entries.iter().map(|e| e.multiplicity).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,a,multiplicity\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", e.line.theta, e.line.a, e.multiplicity);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, IncidenceError> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("theta,a,multiplicity") => {}
            other => return Err(IncidenceError::Parse(format!("unexpected columns {other:?}"))),
        }
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(IncidenceError::Parse(format!("bad row {line:?}")));
            }
            let theta: f64 = fields[0]
                .trim()
                .parse()
                .map_err(|e| IncidenceError::Parse(format!("{e}")))?;
            let a: f64 = fields[1]
                .trim()
                .parse()
                .map_err(|e| IncidenceError::Parse(format!("{e}")))?;
            let multiplicity: u64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| IncidenceError::Parse(format!("{e}")))?;
            entries.push(LineEntry { line: PlanarLine::new(theta, a), multiplicity, provenance: None });
        }
        Ok(LineFamily { entries })
    }
}

/// Multiplicity-weighted count of pairs (p, ℓ) with dist(p, ℓ) ≤ δ, all
/// pairs tested.
pub fn count_incidences_brute(p: &PointSet2D, l: &LineFamily, delta: f64) -> u64 {
    let mut total = 0u64;
    for entry in &l.entries {
        for &(x, y, m) in p.points() {
            if entry.line.point_distance(x, y) <= delta {
                total += m * entry.multiplicity;
            }
        }
    }
    total
}

/// Grid-accelerated incidence count; equals the brute count exactly. The
/// points are bucketed once into square cells of pitch max(δ, extent/1024)
/// and each line visits only cells whose ⟨p, normal⟩ range can reach
/// [a - δ, a + δ]; candidate points still get the exact distance test, so
/// conservative cell cover never changes the count.
pub fn count_incidences(p: &PointSet2D, l: &LineFamily, delta: f64) -> u64 {
    if p.is_empty() || l.is_empty() {
        return 0;
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y, _) in p.points() {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let extent = (max_x - min_x).max(max_y - min_y);
    let pitch = delta.max(extent / 1024.0).max(f64::MIN_POSITIVE);
    let nx = ((max_x - min_x) / pitch) as i64 + 1;
    let ny = ((max_y - min_y) / pitch) as i64 + 1;
    let cell_of = |x: f64, y: f64| -> (i64, i64) {
        (((x - min_x) / pitch) as i64, ((y - min_y) / pitch) as i64)
    };
    let mut cells: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (idx, &(x, y, _)) in p.points().iter().enumerate() {
        cells.entry(cell_of(x, y)).or_default().push(idx);
    }

    l.entries
        .par_iter()
        .map(|entry| {
            let (nx_hat, ny_hat) = entry.line.normal();
            let a = entry.line.a;
            let mut count = 0u64;
            for gx in 0..nx {
                let xl = min_x + gx as f64 * pitch;
                let xr = xl + pitch;
                let tx = [xl * nx_hat, xr * nx_hat];
                let (tx_min, tx_max) = (tx[0].min(tx[1]), tx[0].max(tx[1]));
                let (gy_lo, gy_hi) = if ny_hat.abs() < 1e-300 {
                    // Normal is horizontal: membership is y-free; take the
                    // whole column when the x-range alone can reach the slab.
                    if tx_min <= a + delta && tx_max >= a - delta {
                        (0, ny - 1)
                    } else {
                        continue;
                    }
                } else {
                    // y-range where y·n̂_y + tx can meet [a - δ, a + δ] for
                    // some tx in the column range.
                    let candidates = [
                        (a - delta - tx_min) / ny_hat,
                        (a - delta - tx_max) / ny_hat,
                        (a + delta - tx_min) / ny_hat,
                        (a + delta - tx_max) / ny_hat,
                    ];
                    let lo = candidates.iter().cloned().fold(f64::MAX, f64::min);
                    let hi = candidates.iter().cloned().fold(f64::MIN, f64::max);
                    let gy_lo = (((lo - min_y) / pitch).floor() as i64 - 1).max(0);
                    let gy_hi = (((hi - min_y) / pitch).floor() as i64 + 1).min(ny - 1);
                    if gy_lo > gy_hi {
                        continue;
                    }
                    (gy_lo, gy_hi)
                };
                for gy in gy_lo..=gy_hi {
                    if let Some(bucket) = cells.get(&(gx, gy)) {
                        for &idx in bucket {
                            let (x, y, m) = p.points()[idx];
                            if entry.line.point_distance(x, y) <= delta {
                                count += m * entry.multiplicity;
                            }
                        }
                    }
                }
            }
            count
        })
        .sum()
}

/// Greedy first-fit partition into classes whose members are pairwise at
/// least rho apart in the line metric. Entries with multiplicity m are m
/// coincident copies and land in m different classes.
pub fn separate_lines(l: &LineFamily, rho: f64) -> Vec<LineFamily> {
    let mut classes: Vec<LineFamily> = Vec::new();
    for entry in &l.entries {
        for _ in 0..entry.multiplicity {
            let copy = LineEntry { multiplicity: 1, ..*entry };
            let slot = classes.iter_mut().find(|class| {
                class
                    .entries
                    .iter()
                    .all(|member| line_metric(&member.line, &copy.line) >= rho)
            });
            match slot {
                Some(class) => class.entries.push(copy),
                None => classes.push(LineFamily { entries: vec![copy] }),
            }
        }
    }
    classes
}

/// Split of the parameter square by the size of the slope-times-intercept
/// Jacobian form J(x, z).
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSplit {
    /// Pairs with |J(x, z)| ≤ δ^γ.
    pub near_critical: Vec<(f64, f64)>,
    /// Pairs with |J(x, z)| > δ^γ.
    pub regular: Vec<(f64, f64)>,
    pub gamma: f64,
    pub delta: f64,
}

impl OmegaSplit {
    /// Reference budget δ^{γα}·|M|² for the near-critical count.
    pub fn near_critical_budget(&self, alpha: f64) -> f64 {
        let m2 = (self.near_critical.len() + self.regular.len()) as f64;
        self.delta.powf(self.gamma * alpha) * m2
    }
}

pub fn tube_split_omega(
    f: &QuadPoly,
    m: &[f64],
    gamma: f64,
    delta: f64,
) -> Result<OmegaSplit, IncidenceError> {
    let form = f.linear_form_j().map_err(|e| match e {
        QuadPolyError::AllZeroAxis => IncidenceError::AllZeroAxis,
        other => IncidenceError::Parse(format!("{other}")),
    })?;
    let cut = delta.powf(gamma);
    let mut near_critical = Vec::new();
    let mut regular = Vec::new();
    for &x in m {
        for &z in m {
            if form.eval(x, z).abs() <= cut {
                near_critical.push((x, z));
            } else {
                regular.push((x, z));
            }
        }
    }
    Ok(OmegaSplit { near_critical, regular, gamma, delta })
}

/// Σ_{c ∈ C} #{(a₁, a₂, b₁, b₂) : |(a₁ + c b₁) - (a₂ + c b₂)| ≤ δ},
/// ordered quadruples, via sort and two-pointer sweep per c.
pub fn sum_energy_count(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    delta: f64,
) -> Result<u64, IncidenceError> {
    const BUDGET: u64 = 10_000_000;
    let size = a.len() as u64 * b.len() as u64;
    if size > BUDGET {
        return Err(IncidenceError::BudgetExceeded { size, budget: BUDGET });
    }
    let mut total = 0u64;
    let mut values = Vec::with_capacity((a.len() * b.len()).max(1));
    for &cc in c {
        values.clear();
        for &av in a {
            for &bv in b {
                values.push(av + cc * bv);
            }
        }
        values.sort_unstable_by(f64::total_cmp);
        let n = values.len();
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 0..n {
            while values[i] - values[lo] > delta {
                lo += 1;
            }
            if hi < i + 1 {
                hi = i + 1;
            }
            while hi < n && values[hi] - values[i] <= delta {
                hi += 1;
            }
            total += (hi - lo) as u64;
        }
    }
    Ok(total)
}

/// Constants of the line-separation lower bound, computed from one
/// polynomial by the closed-form recipe:
/// slope form m(x, z) = ax + cz with gradient u = (a, c); D bounds the
/// direction spread via the largest slope over the unit square; drift_sup
/// is the exact sup over [0,1]² of the intercept's derivative along u
/// (affine, so a corner max); intercept_sup bounds |intercept| by the
/// coefficient sum. split_threshold c₀ balances the two cases and
/// metric_floor c_f is the final constant in
/// metric ≥ c_f · δ^{1+γ} for parameter pairs ≥ δ apart on a region where
/// |J| ≥ δ^γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationConstants {
    pub metric_floor: f64,
    pub split_threshold: f64,
    pub drift_sup: f64,
    pub intercept_sup: f64,
    pub slope_grad_norm: f64,
    pub direction_spread: f64,
}

pub fn separation_constants(f: &QuadPoly) -> Result<SeparationConstants, IncidenceError> {
    let (a, c) = (f.a, f.c);
    if a == 0.0 && c == 0.0 {
        return Err(IncidenceError::AllZeroAxis);
    }
    let u_norm = (a * a + c * c).sqrt();
    let m_max = [0.0, a.abs(), c.abs(), (a + c).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let d = 1.0 + m_max * m_max;
    // ∂k/∂x = bz + 2dx + h, ∂k/∂z = bx + 2gz + j; the derivative of the
    // intercept along u/|u| is affine, so its sup sits at a corner.
    let drift_sup = {
        let mut best = 0.0f64;
        for x in [0.0, 1.0] {
            for z in [0.0, 1.0] {
                let kx = f.b * z + 2.0 * f.d * x + f.h;
                let kz = f.b * x + 2.0 * f.g * z + f.j;
                best = best.max((a * kx + c * kz).abs() / u_norm);
            }
        }
        best
    };
    let intercept_sup = f.b.abs() + f.d.abs() + f.g.abs() + f.h.abs() + f.j.abs();
    let mut c0 = 0.5f64;
    if drift_sup > 0.0 {
        c0 = c0.min(1.0 / (4.0 * drift_sup * u_norm));
    }
    if intercept_sup > 0.0 {
        c0 = c0.min(1.0 / (8.0 * intercept_sup * u_norm * u_norm * d.sqrt()));
    }
    let metric_floor = [
        (2.0 / std::f64::consts::PI) * c0 * u_norm / d,
        2.0 / d.sqrt(),
        1.0 / (8.0 * u_norm * d.sqrt()),
    ]
    .into_iter()
    .fold(f64::MAX, f64::min);
    Ok(SeparationConstants {
        metric_floor,
        split_threshold: c0,
        drift_sup,
        intercept_sup,
        slope_grad_norm: u_norm,
        direction_spread: d,
    })
}

/// Outcome of the three-incidence collinearity implication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollinearityReport {
    /// All three points δ-incident to the line and |v - y₀| ≤ 1.
    pub premises_hold: bool,
    /// |u - ((1-λ) z₀ + λ z₁)| with λ = (v - y₀)/(y₁ - y₀).
    pub combination: f64,
    /// Exact tracked bound e₁ + |1-λ| e₂ + |λ| e₃ from the incidences.
    pub tracked_bound: f64,
    /// Displayed bound 4 δ^{1 - 3ε/α}.
    pub bound: f64,
    pub pass: bool,
}

/// Check that three δ-incidences (z₀, y₀), (z₁, y₁), (u, v) on the line
/// X = mY + k force u close to the matching affine combination of z₀, z₁.
/// The identity u - (1-λ)z₀ - λz₁ = e₁ - (1-λ)e₂ - λe₃ (signed residuals
/// eᵢ = X - mY - k) makes the tracked bound exact; the displayed bound
/// follows from |λ| ≤ δ^{-3ε/α} and |1-λ| ≤ 1 + δ^{-3ε/α}.
#[allow(clippy::too_many_arguments)]
pub fn collinearity_witness(
    u: f64,
    v: f64,
    z0: f64,
    y0: f64,
    z1: f64,
    y1: f64,
    m: f64,
    k: f64,
    delta: f64,
    eps_over_alpha: f64,
) -> Result<CollinearityReport, IncidenceError> {
    let gap = (y1 - y0).abs();
    let threshold = delta.powf(3.0 * eps_over_alpha);
    if gap < threshold {
        return Err(IncidenceError::FiberTooClose { gap, threshold });
    }
    let e1 = u - (m * v + k);
    let e2 = z0 - (m * y0 + k);
    let e3 = z1 - (m * y1 + k);
    let premises_hold =
        e1.abs() <= delta && e2.abs() <= delta && e3.abs() <= delta && (v - y0).abs() <= 1.0;
    let lambda = (v - y0) / (y1 - y0);
    let combination = (u - ((1.0 - lambda) * z0 + lambda * z1)).abs();
    let tracked_bound = e1.abs() + (1.0 - lambda).abs() * e2.abs() + lambda.abs() * e3.abs();
    let bound = 4.0 * delta.powf(1.0 - 3.0 * eps_over_alpha);
    let pass = !premises_hold || combination <= bound;
    Ok(CollinearityReport { premises_hold, combination, tracked_bound, bound, pass })
}

/// Distortion bounds of Φ(x, y) = (F(x, y), y) over pairs of grid points
/// of M×M: min and max of |Φ(p) - Φ(q)| / |p - q|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub lower: f64,
    pub upper: f64,
    /// True when the pair set was too large and a fixed-seed random
    /// sample of 10⁶ pairs was used instead of full enumeration.
    pub sampled: bool,
}

pub fn bilipschitz_distortion(f: impl Fn(f64, f64) -> f64, m: &[f64]) -> Distortion {
    use rand::{Rng, SeedableRng};
    let n = m.len();
    let points: Vec<(f64, f64)> = {
        let mut pts = Vec::with_capacity(n * n);
        for &y in m {
            for &x in m {
                pts.push((x, y));
            }
        }
        pts
    };
    let np = points.len();
    let mut lower = f64::MAX;
    let mut upper = 0.0f64;
    let mut ratio = |p: (f64, f64), q: (f64, f64)| {
        let dist = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
        if dist == 0.0 {
            return;
        }
        let ip = (f(p.0, p.1), p.1);
        let iq = (f(q.0, q.1), q.1);
        let image = ((ip.0 - iq.0).powi(2) + (ip.1 - iq.1).powi(2)).sqrt();
        let r = image / dist;
        lower = lower.min(r);
        upper = upper.max(r);
    };
    let sampled = (np as u64) * (np as u64) > 100_000_000;
    if sampled {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0bd1);
        for _ in 0..1_000_000 {
            let i = rng.gen_range(0..np);
            let j = rng.gen_range(0..np);
            ratio(points[i], points[j]);
        }
    } else {
        for i in 0..np {
            for j in (i + 1)..np {
                ratio(points[i], points[j]);
            }
        }
    }
    if lower > upper {
        lower = 0.0;
    }
    Distortion { lower, upper, sampled }
}
