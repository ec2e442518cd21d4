//! Obstruction measures with known energy scalings: a clump-plus-grid
//! mixture that violates the Frostman bound yet keeps the smoothed energy
//! near δ^{α-1}, a dilated half-Frostman measure with support of diameter
//! δ⁻¹, and the small-α self-similar measure whose energy diverges like
//! δ^{2α-1}. Each builder is a pure function of its parameters.

use crate::harness::{
    assess_rows, cantor_depth_for, scan_row, Direction, HarnessError, ScanReport, ScanRow,
};
use crate::kernel::smoothing_kernel;
use crate::measure::{DiscreteMeasure, MeasureError};
use crate::quadpoly::QuadPoly;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstructionError {
    #[error("delta too large: error budget 8 c1 d^(3/2-a) + 4 d^2 = {lhs:.3e} exceeds the plateau slack {rhs:.3e}")]
    DeltaTooLarge { lhs: f64, rhs: f64 },
    #[error("parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionKind {
    FrostmanNecessity,
    UnboundedSupport,
    DivergentEnergy,
}

impl ConstructionKind {
    /// The polynomial whose pushforward realizes the scaling.
    pub fn polynomial(&self) -> QuadPoly {
        let preset = match self {
            ConstructionKind::FrostmanNecessity => "x+(y+z)^2",
            ConstructionKind::UnboundedSupport => "x+yz",
            ConstructionKind::DivergentEnergy => "x+(y-z)^2",
        };
        QuadPoly::preset(preset).expect("presets are valid")
    }

    /// Exponent of the claimed lower bound energy ≳ δ^claimed.
    pub fn claimed_exponent(&self, alpha: f64) -> f64 {
        match self {
            ConstructionKind::FrostmanNecessity => alpha - 1.0,
            ConstructionKind::UnboundedSupport => -0.5,
            ConstructionKind::DivergentEnergy => 2.0 * alpha - 1.0,
        }
    }
}

impl std::str::FromStr for ConstructionKind {
    type Err = ConstructionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frostman-necessity" => Ok(ConstructionKind::FrostmanNecessity),
            "unbounded-support" => Ok(ConstructionKind::UnboundedSupport),
            "divergent-energy" => Ok(ConstructionKind::DivergentEnergy),
            other => Err(ConstructionError::BadParameter(format!(
                "unknown construction kind {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstructionKind::FrostmanNecessity => "frostman-necessity",
            ConstructionKind::UnboundedSupport => "unbounded-support",
            ConstructionKind::DivergentEnergy => "divergent-energy",
        })
    }
}

/// Mixture knobs: clump width factor c, mixture weights, and the c₁
/// window constant of the error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    pub c: f64,
    pub p_s: f64,
    pub p_a: f64,
    pub c1: f64,
}

impl MixtureParams {
    /// c pinned to the kernel plateau (c = min(η/16, 1/8)), even split,
    /// c₁ at its largest admissible value 1/32.
    pub fn default_for_kernel() -> Self {
        let eta = smoothing_kernel().plateau_radius();
        MixtureParams { c: (eta / 16.0).min(0.125), p_s: 0.5, p_a: 0.5, c1: 1.0 / 32.0 }
    }
}

/// Numeric check of the smallness condition
/// 8 c₁ δ^{3/2-α} + 4 δ² ≤ (η/16) δ that keeps the grid strand of the
/// mixture inside one plateau window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn mixture_admissibility(alpha: f64, delta: f64, c1: f64) -> AdmissibilityReport {
    let eta = smoothing_kernel().plateau_radius();
    let lhs = 8.0 * c1 * delta.powf(1.5 - alpha) + 4.0 * delta * delta;
    let rhs = eta / 16.0 * delta;
    AdmissibilityReport { lhs, rhs, holds: lhs <= rhs }
}

fn even_dyadic_exponent(delta: f64) -> Result<u32, ConstructionError> {
    if !(delta > 0.0 && delta < 1.0) || (delta.to_bits() & ((1u64 << 52) - 1)) != 0 {
        return Err(ConstructionError::BadParameter(format!(
            "delta {delta} is not a dyadic 2^-k"
        )));
    }
    let k = (-delta.log2()).round() as u32;
    if k % 2 != 0 {
        return Err(ConstructionError::BadParameter(format!(
            "delta 2^-{k} has odd exponent; the atom spacing delta^(1/2) must be dyadic"
        )));
    }
    if k > 24 {
        return Err(ConstructionError::BadParameter(format!(
            "delta 2^-{k} below the supported range (k <= 24)"
        )));
    }
    Ok(k)
}

fn validate_mixture(alpha: f64, params: &MixtureParams) -> Result<(), ConstructionError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ConstructionError::BadParameter(format!(
            "alpha {alpha} outside (0, 1/2)"
        )));
    }
    let MixtureParams { c, p_s, p_a, c1 } = *params;
    if !(p_s >= 0.0 && p_a >= 0.0 && (p_s + p_a - 1.0).abs() <= 1e-12) {
        return Err(ConstructionError::BadParameter(format!(
            "mixture weights p_s = {p_s}, p_a = {p_a} must be nonnegative and sum to 1"
        )));
    }
    let eta = smoothing_kernel().plateau_radius();
    if !(c > 0.0 && c < 0.25 && c <= eta / 16.0 * (1.0 + 1e-12)) {
        return Err(ConstructionError::BadParameter(format!(
            "clump factor c = {c} outside (0, 1/4) or above the plateau budget {}",
            eta / 16.0
        )));
    }
    if !(c1 > 0.0 && c1 <= 1.0 / 32.0) {
        return Err(ConstructionError::BadParameter(format!(
            "window constant c1 = {c1} outside (0, 1/32]"
        )));
    }
    Ok(())
}

/// Mixture p_s·(clump at 0) + p_a·(uniform over the δ^{1/2}-grid), on the
/// pitch-δ grid. The clump [0, cδ] sits inside the first cell, so its
/// whole weight lands on atom 0; each grid interval
/// [n δ^{1/2} - δ/2, n δ^{1/2} + δ/2] contributes its length share of the
/// uniform strand to the atom at its center (the n = 0 interval is
/// clipped to half length by the left endpoint of [0, 1]).
///
/// The admissibility of δ is reported, not enforced; the strict variant
/// turns a failed report into an error.
pub fn build_frostman_necessity(
    alpha: f64,
    delta: f64,
    params: &MixtureParams,
) -> Result<(DiscreteMeasure, AdmissibilityReport), ConstructionError> {
    validate_mixture(alpha, params)?;
    let k = even_dyadic_exponent(delta)?;
    let spacing = 1i64 << (k / 2);
    let n_max = delta.powf(-alpha).floor() as i64;
    let norm = n_max as f64 + 0.5;
    let mut atoms = Vec::with_capacity(n_max as usize + 1);
    atoms.push((0, params.p_s + params.p_a * 0.5 / norm));
    for n in 1..=n_max {
        atoms.push((n * spacing, params.p_a / norm));
    }
    let mu = DiscreteMeasure::new(delta, 0.0, atoms)?;
    Ok((mu, mixture_admissibility(alpha, delta, params.c1)))
}

pub fn build_frostman_necessity_strict(
    alpha: f64,
    delta: f64,
    params: &MixtureParams,
) -> Result<DiscreteMeasure, ConstructionError> {
    let (mu, report) = build_frostman_necessity(alpha, delta, params)?;
    if !report.holds {
        return Err(ConstructionError::DeltaTooLarge { lhs: report.lhs, rhs: report.rhs });
    }
    Ok(mu)
}

/// Uniform measure on the δ^{1/2}-grid of [0, 1] together with the
/// reciprocal points {1/(kδ)} up to δ⁻¹, one atom per δ-cell. The
/// reciprocal strand keeps the support diameter at δ⁻¹ while the atom
/// count stays at 2 δ^{-1/2} + 1.
pub fn build_unbounded_support(delta: f64) -> Result<DiscreteMeasure, ConstructionError> {
    let k = even_dyadic_exponent(delta)?;
    let m = k / 2;
    let half_grid = 1i64 << m;
    let weight = 1.0 / (2.0 * half_grid as f64 + 1.0);
    let mut atoms = Vec::with_capacity(2 * half_grid as usize + 1);
    for n in 0..=half_grid {
        atoms.push((n << m, weight));
    }
    let top = (1u64 << (2 * k)) as f64;
    for j in 1..=half_grid {
        atoms.push(((top / j as f64).round() as i64, weight));
    }
    Ok(DiscreteMeasure::from_raw_atoms(delta, 0.0, atoms)?)
}

/// Per-δ interval family of the self-similar measure: one interval of
/// length δ/2 anchored at each leaf atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorIntervalFamily {
    pub count: usize,
    pub mass_min: f64,
    pub mass_max: f64,
    pub length: f64,
}

/// Self-similar measure at the exact pitch δ, with its interval family
/// checked against the target count ~ δ^{-α} and mass ~ δ^α before any
/// energy run.
pub fn build_divergent_energy(
    alpha: f64,
    delta: f64,
) -> Result<(DiscreteMeasure, CantorIntervalFamily), ConstructionError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ConstructionError::BadParameter(format!(
            "alpha {alpha} outside (0, 1/2)"
        )));
    }
    let depth = cantor_depth_for(alpha, delta).ok_or_else(|| {
        ConstructionError::BadParameter(format!(
            "no construction depth lands on pitch {delta} at alpha {alpha}"
        ))
    })?;
    let mu = DiscreteMeasure::build_cantor(alpha, depth)?;
    if mu.delta() != delta {
        return Err(ConstructionError::BadParameter(format!(
            "depth {depth} yields pitch {} instead of {delta}",
            mu.delta()
        )));
    }
    let (mut mass_min, mut mass_max) = (f64::MAX, f64::MIN);
    for &(_, w) in mu.atoms() {
        mass_min = mass_min.min(w);
        mass_max = mass_max.max(w);
    }
    let family = CantorIntervalFamily {
        count: mu.len(),
        mass_min,
        mass_max,
        length: delta / 2.0,
    };
    let target_count = delta.powf(-alpha);
    if !(family.count as f64 >= target_count / 2.0 && family.count as f64 <= 2.0 * target_count) {
        return Err(ConstructionError::BadParameter(format!(
            "interval family count {} not within a factor 2 of {target_count}",
            family.count
        )));
    }
    let target_mass = delta.powf(alpha);
    if !(mass_min >= target_mass / 2.0 && mass_max <= 2.0 * target_mass) {
        return Err(ConstructionError::BadParameter(format!(
            "interval masses [{mass_min}, {mass_max}] not within a factor 2 of {target_mass}"
        )));
    }
    Ok((mu, family))
}

pub fn build_for_scan(
    kind: ConstructionKind,
    alpha: f64,
    delta: f64,
    params: &MixtureParams,
) -> Result<DiscreteMeasure, ConstructionError> {
    match kind {
        ConstructionKind::FrostmanNecessity => {
            Ok(build_frostman_necessity(alpha, delta, params)?.0)
        }
        ConstructionKind::UnboundedSupport => build_unbounded_support(delta),
        ConstructionKind::DivergentEnergy => Ok(build_divergent_energy(alpha, delta)?.0),
    }
}

/// Four-point dyadic ladder on which the construction is exactly
/// realizable.
pub fn default_ladder(kind: ConstructionKind, alpha: f64) -> Vec<f64> {
    match kind {
        ConstructionKind::FrostmanNecessity | ConstructionKind::UnboundedSupport => {
            vec![2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10), 2f64.powi(-12)]
        }
        ConstructionKind::DivergentEnergy => (8..=24)
            .map(|k| 2f64.powi(-k))
            .filter(|&d| cantor_depth_for(alpha, d).is_some())
            .take(4)
            .collect(),
    }
}

/// Build the construction at every ladder point, run the full energy
/// pipeline, and fit the decay exponent against the claimed lower bound.
pub fn verify_lower_bound(
    kind: ConstructionKind,
    alpha: f64,
    ladder: &[f64],
    params: &MixtureParams,
    kappa: f64,
    timings: bool,
) -> Result<ScanReport, HarnessError> {
    if ladder.is_empty() {
        return Err(HarnessError::Config(
            "no realizable ladder points for the construction".into(),
        ));
    }
    let f = kind.polynomial();
    let rows: Result<Vec<ScanRow>, HarnessError> = ladder
        .par_iter()
        .map(|&delta| {
            let mu = build_for_scan(kind, alpha, delta, params)?;
            scan_row(&f, &mu, kappa, timings)
        })
        .collect();
    let rows = rows?;
    let claimed = kind.claimed_exponent(alpha);
    let (fit, verdict, epsilon_hat) = assess_rows(&rows, claimed, Direction::LowerBound);
    Ok(ScanReport {
        rows,
        fit,
        claimed_exponent: claimed,
        direction: Direction::LowerBound,
        verdict,
        epsilon_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mixture_shape_and_blowup() {
        let params = MixtureParams::default_for_kernel();
        let delta = 2f64.powi(-12);
        let (mu, report) = build_frostman_necessity(0.25, delta, &params).unwrap();
        assert!(report.holds);
        // delta^{-1/4} = 8 grid atoms beyond the clump cell.
        assert_eq!(mu.len(), 9);
        assert_relative_eq!(mu.total_mass(), 1.0, max_relative = 1e-12);
        let spacing = (delta.sqrt() / delta) as i64;
        for (n, &(i, _)) in mu.atoms().iter().enumerate() {
            assert_eq!(i, n as i64 * spacing);
        }
        assert_relative_eq!(mu.atoms()[0].1, 0.5 + 0.5 * 0.5 / 8.5, max_relative = 1e-12);

        // The clump forces the Frostman constant up to p_s (2δ)^{-α}, so
        // it blows up along the ladder.
        let mut last = 0.0;
        for k in [8, 10, 12] {
            let d = 2f64.powi(-k);
            let (mu, _) = build_frostman_necessity(0.25, d, &params).unwrap();
            let frostman = mu.frostman_constant(0.25);
            assert!(frostman >= 0.5 / (2.0 * d).powf(0.25));
            assert!(frostman > last);
            last = frostman;
        }
    }

    #[test]
    fn mixture_degenerate_weights() {
        let params = MixtureParams { p_s: 0.0, p_a: 1.0, ..MixtureParams::default_for_kernel() };
        let (mu, _) = build_frostman_necessity(0.25, 2f64.powi(-12), &params).unwrap();
        assert_relative_eq!(mu.total_mass(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(mu.atoms()[0].1, 0.5 / 8.5, max_relative = 1e-12);
        assert_relative_eq!(mu.atoms()[1].1, 1.0 / 8.5, max_relative = 1e-12);
    }

    #[test]
    fn mixture_rejects_bad_parameters() {
        let good = MixtureParams::default_for_kernel();
        let bad = |r: Result<_, ConstructionError>| {
            assert!(matches!(r, Err(ConstructionError::BadParameter(_))))
        };
        bad(build_frostman_necessity(0.25, 2f64.powi(-11), &good));
        bad(build_frostman_necessity(0.25, 0.3, &good));
        bad(build_frostman_necessity(0.6, 2f64.powi(-12), &good));
        bad(build_frostman_necessity(0.25, 2f64.powi(-12), &MixtureParams { c: 0.2, ..good }));
        bad(build_frostman_necessity(0.25, 2f64.powi(-12), &MixtureParams { p_s: 0.6, ..good }));
        bad(build_frostman_necessity(0.25, 2f64.powi(-12), &MixtureParams { c1: 0.04, ..good }));
    }

    #[test]
    fn mixture_admissibility_threshold() {
        let params = MixtureParams::default_for_kernel();
        // 8 c1 δ^{5/4} + 4 δ² crosses (η/16) δ between 2^-10 and 2^-12.
        let (_, worse) = build_frostman_necessity(0.25, 2f64.powi(-6), &params).unwrap();
        assert!(!worse.holds);
        assert!(worse.lhs > worse.rhs);
        assert!(matches!(
            build_frostman_necessity_strict(0.25, 2f64.powi(-6), &params),
            Err(ConstructionError::DeltaTooLarge { .. })
        ));
        assert!(build_frostman_necessity_strict(0.25, 2f64.powi(-12), &params).is_ok());
    }

    #[test]
    fn unbounded_support_shape() {
        let delta = 2f64.powi(-8);
        let mu = build_unbounded_support(delta).unwrap();
        assert_eq!(mu.len(), 33);
        assert_relative_eq!(mu.total_mass(), 1.0, max_relative = 1e-12);
        let max_pos = mu.position(mu.atoms().last().unwrap().0);
        assert!(max_pos >= 1.0 / delta - delta);
        let w = mu.atoms()[0].1;
        assert!(mu.atoms().iter().all(|&(_, wi)| (wi - w).abs() <= 1e-15));
        assert!(build_unbounded_support(2f64.powi(-7)).is_err());
    }

    #[test]
    fn unbounded_support_stays_half_frostman() {
        // Ceiling frozen from a pilot run: the observed maximum over the
        // ladder is 0.5294 at 2^-6, decreasing toward 1/2 as delta shrinks.
        for k in [6, 8, 10, 12] {
            let mu = build_unbounded_support(2f64.powi(-k)).unwrap();
            let c = mu.frostman_constant(0.5);
            assert!(c <= 0.55, "frostman constant {c} at 2^-{k}");
        }
    }

    #[test]
    fn divergent_energy_family() {
        let delta = 2f64.powi(-12);
        let (mu, family) = build_divergent_energy(0.25, delta).unwrap();
        assert_eq!(family.count, 8);
        assert_relative_eq!(family.mass_min, 0.125, max_relative = 1e-12);
        assert_relative_eq!(family.mass_max, 0.125, max_relative = 1e-12);
        assert_eq!(family.length, delta / 2.0);
        assert_eq!(mu.delta(), delta);
        assert!(build_divergent_energy(0.25, 2f64.powi(-10)).is_err());
    }

    #[test]
    fn builders_are_deterministic() {
        let params = MixtureParams::default_for_kernel();
        let a = build_frostman_necessity(0.25, 2f64.powi(-10), &params).unwrap().0;
        let b = build_frostman_necessity(0.25, 2f64.powi(-10), &params).unwrap().0;
        assert_eq!(a.to_csv(Some(0.25)), b.to_csv(Some(0.25)));
        let a = build_unbounded_support(2f64.powi(-10)).unwrap();
        let b = build_unbounded_support(2f64.powi(-10)).unwrap();
        assert_eq!(a.to_csv(Some(0.5)), b.to_csv(Some(0.5)));
    }

    #[test]
    fn divergent_scan_energies_rise() {
        let ladder = default_ladder(ConstructionKind::DivergentEnergy, 0.25);
        assert_eq!(ladder.len(), 4);
        let report = verify_lower_bound(
            ConstructionKind::DivergentEnergy,
            0.25,
            &ladder,
            &MixtureParams::default_for_kernel(),
            0.25,
            false,
        )
        .unwrap();
        for pair in report.rows.windows(2) {
            assert!(
                pair[1].energy > pair[0].energy,
                "energy must rise as delta shrinks: {} -> {}",
                pair[0].energy,
                pair[1].energy
            );
        }
        let fit = report.fit.unwrap();
        assert!(fit.slope <= 2.0 * 0.25 - 1.0 + 0.15, "slope {}", fit.slope);
        assert_eq!(report.verdict, crate::harness::Verdict::Pass);
    }

    #[test]
    fn mixture_scan_tracks_claimed_exponent() {
        let ladder = default_ladder(ConstructionKind::FrostmanNecessity, 0.25);
        let report = verify_lower_bound(
            ConstructionKind::FrostmanNecessity,
            0.25,
            &ladder,
            &MixtureParams::default_for_kernel(),
            0.25,
            false,
        )
        .unwrap();
        let fit = report.fit.unwrap();
        assert!(fit.slope <= 0.25 - 1.0 + 0.15, "slope {}", fit.slope);
        // Floor frozen from a pilot run: ratios over the default ladder are
        // 0.291, 0.234, 0.236, 0.243.
        for (delta, ratio) in report.ratios() {
            assert!(ratio >= 0.2, "ratio {ratio} at delta {delta}");
        }
    }
}
