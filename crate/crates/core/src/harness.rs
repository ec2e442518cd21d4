//! Scan orchestration: dyadic δ ladders, per-δ energy rows, log₂-log₂
//! exponent fits with pass/fail verdicts, and deterministic CSV / SVG
//! report emission.

use crate::constructions::{self, ConstructionError, ConstructionKind, MixtureParams};
use crate::energy::{coincidence_split, pushforward, slice_mass_sup, smoothed_energy, EnergyError};
use crate::kernel::smoothing_kernel;
use crate::measure::{DiscreteMeasure, MeasureError};
use crate::quadpoly::{Class, QuadPoly, QuadPolyError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

/// Slope-unit tolerance on fitted exponents, frozen after pilot
/// calibration against the finite-δ transients of the test ladders.
pub const TOL_FIT: f64 = 0.15;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {need} positive data points, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("data point {index} is not positive ({value}); cannot fit in log scale")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("refusing to scan a {0} polynomial")]
    DegenerateInput(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Poly(#[from] QuadPolyError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of log₂(value) on log₂(delta).
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<FitLine, HarnessError> {
    if pairs.len() < 3 {
        return Err(HarnessError::TooFewPoints { got: pairs.len(), need: 3 });
    }
    for (index, &(d, v)) in pairs.iter().enumerate() {
        if !(d > 0.0) {
            return Err(HarnessError::NonPositiveValue { index, value: d });
        }
        if !(v > 0.0) {
            return Err(HarnessError::NonPositiveValue { index, value: v });
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Config("all deltas equal; slope undefined".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitLine { slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Which side of the claimed exponent counts as success: upper-bound
/// probes want energy ≲ δ^claimed (slope ≥ claimed - tol), lower-bound
/// probes want energy ≳ δ^claimed (slope ≤ claimed + tol).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub delta: f64,
    pub energy: f64,
    /// Coincidence split: [small-gradient pair, 3 primed-transverse
    /// parts, 3 unprimed-transverse parts].
    pub parts: [f64; 7],
    pub coincidence_total: f64,
    pub cover_holds: bool,
    pub slice_sup: f64,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Present when the ladder had ≥ 3 points.
    pub fit: Option<FitLine>,
    pub claimed_exponent: f64,
    pub direction: Direction,
    pub verdict: Verdict,
    /// slope - claimed_exponent: the empirical gain over the baseline.
    pub epsilon_hat: Option<f64>,
}

impl ScanReport {
    /// Per-row energy / δ^claimed, the constant the scaling law predicts
    /// to stay bounded.
    pub fn ratios(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.delta, r.energy / r.delta.powf(self.claimed_exponent)))
            .collect()
    }
}

pub(crate) fn assess_rows(
    rows: &[ScanRow],
    claimed: f64,
    direction: Direction,
) -> (Option<FitLine>, Verdict, Option<f64>) {
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta, r.energy)).collect();
    match fit_exponent(&pairs) {
        Ok(fit) => {
            let epsilon_hat = fit.slope - claimed;
            let verdict = if fit.r_squared < 0.25 {
                Verdict::Inconclusive
            } else {
                let ok = match direction {
                    Direction::UpperBound => fit.slope >= claimed - TOL_FIT,
                    Direction::LowerBound => fit.slope <= claimed + TOL_FIT,
                };
                if ok {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            };
            (Some(fit), verdict, Some(epsilon_hat))
        }
        Err(_) => (None, Verdict::Inconclusive, None),
    }
}

/// One full pipeline pass at the measure's own pitch: pushforward,
/// smoothed energy, gradient-split coincidence parts, slice sup.
pub(crate) fn scan_row(
    f: &QuadPoly,
    mu: &DiscreteMeasure,
    kappa: f64,
    timings: bool,
) -> Result<ScanRow, HarnessError> {
    let start = Instant::now();
    let delta = mu.delta();
    let nu = pushforward(f, mu)?;
    let energy = smoothed_energy(&nu, delta, smoothing_kernel());
    let split = coincidence_split(f, mu, delta, kappa)?;
    let slice_sup = slice_mass_sup(f, mu, delta)?;
    let runtime_ms = if timings { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(ScanRow {
        delta,
        energy,
        parts: split.parts,
        coincidence_total: split.total,
        cover_holds: split.cover_holds(),
        slice_sup,
        runtime_ms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Cantor { alpha: f64 },
    FrostmanNecessity { alpha: f64 },
    UnboundedSupport,
    DivergentEnergy { alpha: f64 },
    File { path: String, alpha: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub poly: String,
    pub measure: MeasureSpec,
    /// Largest δ of the ladder, dyadic text like "2^-6".
    pub delta_max: String,
    /// Smallest δ of the ladder.
    pub delta_min: String,
    pub kappa: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub timings: bool,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// "2^-12" or a literal float that is an exact power of two.
pub fn parse_dyadic(text: &str) -> Result<f64, HarnessError> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("2^") {
        let e: i32 = rest
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad dyadic exponent {rest:?}")))?;
        return Ok(2.0f64.powi(e));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad dyadic value {t:?}")))?;
    if v > 0.0 && v.is_finite() && (v.to_bits() & ((1u64 << 52) - 1)) == 0 {
        Ok(v)
    } else {
        Err(HarnessError::Config(format!("{t} is not a power of two")))
    }
}

/// "2^-6..2^-12" → (larger δ, smaller δ).
pub fn parse_ladder(text: &str) -> Result<(f64, f64), HarnessError> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| HarnessError::Config(format!("ladder {text:?} needs the form a..b")))?;
    let (x, y) = (parse_dyadic(a)?, parse_dyadic(b)?);
    Ok((x.max(y), x.min(y)))
}

fn dyadic_exponent(delta: f64) -> Option<u32> {
    if !(delta > 0.0 && delta <= 1.0) || (delta.to_bits() & ((1u64 << 52) - 1)) != 0 {
        return None;
    }
    Some((-delta.log2()).round() as u32)
}

/// Depth whose self-similar construction lands exactly on the pitch δ,
/// if one exists.
pub fn cantor_depth_for(alpha: f64, delta: f64) -> Option<u32> {
    let k = dyadic_exponent(delta)?;
    let depth = (alpha * k as f64).floor() as u32;
    if depth >= 1 && (depth as f64 / alpha).ceil() as u32 == k {
        Some(depth)
    } else {
        None
    }
}

/// Dyadic δ in [delta_min, delta_max] at which the requested measure is
/// exactly realizable, largest first.
pub fn ladder_for(measure: &MeasureSpec, delta_max: f64, delta_min: f64) -> Vec<f64> {
    let (Some(k_lo), Some(k_hi)) = (dyadic_exponent(delta_max), dyadic_exponent(delta_min))
    else {
        return Vec::new();
    };
    (k_lo..=k_hi)
        .filter_map(|k| {
            let delta = 2.0f64.powi(-(k as i32));
            let ok = match measure {
                MeasureSpec::Cantor { alpha } | MeasureSpec::DivergentEnergy { alpha } => {
                    cantor_depth_for(*alpha, delta).is_some()
                }
                // Atom spacing δ^{1/2} must itself be dyadic.
                MeasureSpec::FrostmanNecessity { .. } | MeasureSpec::UnboundedSupport => {
                    k % 2 == 0
                }
                MeasureSpec::File { .. } => false,
            };
            ok.then_some(delta)
        })
        .collect()
}

pub fn run_scan(cfg: &ScanConfig) -> Result<ScanReport, HarnessError> {
    if !(cfg.kappa > 0.0 && cfg.kappa < 0.5) {
        return Err(HarnessError::Config(format!(
            "kappa {} outside (0, 0.5)",
            cfg.kappa
        )));
    }
    let f = QuadPoly::parse(&cfg.poly)?;
    // Gate before any energy work: the scan semantics assume a
    // non-degenerate polynomial.
    match f.classify()? {
        Class::NonDegenerate => {}
        Class::Degenerate => return Err(HarnessError::DegenerateInput("degenerate".into())),
        Class::MissingVariable => {
            return Err(HarnessError::DegenerateInput("variable-dropping".into()))
        }
    }
    let delta_max = parse_dyadic(&cfg.delta_max)?;
    let delta_min = parse_dyadic(&cfg.delta_min)?;
    if delta_min > delta_max {
        return Err(HarnessError::Config("delta_min exceeds delta_max".into()));
    }

    match &cfg.measure {
        MeasureSpec::Cantor { alpha } => {
            let ladder = ladder_for(&cfg.measure, delta_max, delta_min);
            if ladder.is_empty() {
                return Err(HarnessError::Config(
                    "no realizable ladder points in the requested range".into(),
                ));
            }
            let rows: Result<Vec<ScanRow>, HarnessError> = ladder
                .par_iter()
                .map(|&delta| {
                    let depth = cantor_depth_for(*alpha, delta).expect("ladder is realizable");
                    let mu = DiscreteMeasure::build_cantor(*alpha, depth)?;
                    scan_row(&f, &mu, cfg.kappa, cfg.timings)
                })
                .collect();
            let rows = rows?;
            let claimed = alpha - 1.0;
            let (fit, verdict, epsilon_hat) =
                assess_rows(&rows, claimed, Direction::UpperBound);
            Ok(ScanReport {
                rows,
                fit,
                claimed_exponent: claimed,
                direction: Direction::UpperBound,
                verdict,
                epsilon_hat,
            })
        }
        MeasureSpec::FrostmanNecessity { alpha } => {
            let ladder = ladder_for(&cfg.measure, delta_max, delta_min);
            constructions::verify_lower_bound(
                ConstructionKind::FrostmanNecessity,
                *alpha,
                &ladder,
                &MixtureParams::default_for_kernel(),
                cfg.kappa,
                cfg.timings,
            )
        }
        MeasureSpec::UnboundedSupport => {
            let ladder = ladder_for(&cfg.measure, delta_max, delta_min);
            constructions::verify_lower_bound(
                ConstructionKind::UnboundedSupport,
                0.5,
                &ladder,
                &MixtureParams::default_for_kernel(),
                cfg.kappa,
                cfg.timings,
            )
        }
        MeasureSpec::DivergentEnergy { alpha } => {
            let ladder = ladder_for(&cfg.measure, delta_max, delta_min);
            constructions::verify_lower_bound(
                ConstructionKind::DivergentEnergy,
                *alpha,
                &ladder,
                &MixtureParams::default_for_kernel(),
                cfg.kappa,
                cfg.timings,
            )
        }
        MeasureSpec::File { path, alpha } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Io(format!("{path}: {e}")))?;
            let (mu, hint) = DiscreteMeasure::from_csv(&text)?;
            let rows = vec![scan_row(&f, &mu, cfg.kappa, cfg.timings)?];
            let claimed = alpha.or(hint).map(|a| a - 1.0).unwrap_or(0.0);
            let (fit, verdict, epsilon_hat) =
                assess_rows(&rows, claimed, Direction::UpperBound);
            Ok(ScanReport {
                rows,
                fit,
                claimed_exponent: claimed,
                direction: Direction::UpperBound,
                verdict,
                epsilon_hat,
            })
        }
    }
}

pub fn emit_csv(report: &ScanReport) -> String {
    let mut out = String::from("delta,energy,I0,I1,I2,I3,I4,I5,I6,slice_sup,runtime_ms\n");
    for r in &report.rows {
        let p = r.parts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.delta, r.energy, p[0], p[1], p[2], p[3], p[4], p[5], p[6], r.slice_sup, r.runtime_ms
        );
    }
    out
}

/// Standalone log-log plot. Exactly one <circle> per row plus exactly one
/// <line> (the fitted line, or the claimed-exponent baseline when no fit
/// exists); frame and labels use <rect> and <text> so the point/line
/// element count stays rows + 1.
pub fn emit_svg(report: &ScanReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 24.0;
    const MT: f64 = 44.0;
    const MB: f64 = 52.0;

    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|r| (r.delta.log2(), r.energy.log2()))
        .collect();
    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if pts.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 0.0, -1.0, 0.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(
        s,
        "  <rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - ML - MR,
        H - MT - MB
    );
    let title = match report.fit {
        Some(fit) => format!(
            "slope {:.4} (claimed {:.4}, r2 {:.3}, verdict {})",
            fit.slope, report.claimed_exponent, fit.r_squared, report.verdict
        ),
        None => format!(
            "claimed {:.4}, verdict {}",
            report.claimed_exponent, report.verdict
        ),
    };
    let _ = writeln!(s, "  <text x=\"{ML}\" y=\"28\" font-size=\"14\">{title}</text>");
    let _ = writeln!(
        s,
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\">log2 delta</text>",
        (W - ML - MR) / 2.0 + ML - 30.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        "  <text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\">log2 energy</text>",
        (H - MT - MB) / 2.0 + MT,
        (H - MT - MB) / 2.0 + MT
    );
    let (la, lb) = match report.fit {
        Some(fit) => (fit.slope * x0 + fit.intercept, fit.slope * x1 + fit.intercept),
        None => {
            let mid = (y0 + y1) / 2.0;
            (mid, mid)
        }
    };
    let _ = writeln!(
        s,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#b33\" stroke-width=\"1.5\"/>",
        sx(x0),
        sy(la.clamp(y0 - 1.0, y1 + 1.0)),
        sx(x1),
        sy(lb.clamp(y0 - 1.0, y1 + 1.0))
    );
    for p in &pts {
        let _ = writeln!(
            s,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#269\"/>",
            sx(p.0),
            sy(p.1)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_report(
    report: &ScanReport,
    csv_path: Option<&std::path::Path>,
    svg_path: Option<&std::path::Path>,
) -> Result<(), HarnessError> {
    if let Some(p) = csv_path {
        std::fs::write(p, emit_csv(report))
            .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = svg_path {
        std::fs::write(p, emit_svg(report))
            .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Worker-thread override; the only environment influence on the run.
pub const WORKER_ENV_VAR: &str = "QUADLAB_THREADS";

pub fn init_worker_pool() {
    if let Ok(text) = std::env::var(WORKER_ENV_VAR) {
        if let Ok(n) = text.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_recovers_exact_power_laws() {
        let pairs: Vec<(f64, f64)> = (2..8).map(|k| {
            let d = 2f64.powi(-k);
            (d, d)
        }).collect();
        let fit = fit_exponent(&pairs).unwrap();
        assert_relative_eq!(fit.slope, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);

        for c in [0.1, 1.0, 7.5] {
            let pairs: Vec<(f64, f64)> = (2..8)
                .map(|k| {
                    let d = 2f64.powi(-k);
                    (d, c * d.powf(-0.5))
                })
                .collect();
            let fit = fit_exponent(&pairs).unwrap();
            assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<(f64, f64)> = (2..10)
            .map(|k| (2f64.powi(-k), rng.gen_range(0.5..2.0)))
            .collect();
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(d, v)| (d, 3.7 * v)).collect();
        let f1 = fit_exponent(&pairs).unwrap();
        let f2 = fit_exponent(&scaled).unwrap();
        assert!((f1.slope - f2.slope).abs() <= 1e-12);
        assert!((f2.intercept - f1.intercept - 3.7f64.log2()).abs() <= 1e-9);
    }

    #[test]
    fn fit_recovers_noisy_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pairs: Vec<(f64, f64)> = (2..12)
            .map(|k| {
                let d = 2f64.powi(-k);
                let noise = 1.0 + rng.gen_range(-0.01..0.01);
                (d, 2.0 * d.powf(0.3) * noise)
            })
            .collect();
        let fit = fit_exponent(&pairs).unwrap();
        assert!((fit.slope - 0.3).abs() <= 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(
            fit_exponent(&[(0.5, 1.0), (0.25, 1.0)]),
            Err(HarnessError::TooFewPoints { got: 2, need: 3 })
        ));
        assert!(matches!(
            fit_exponent(&[(0.5, 1.0), (0.25, -2.0), (0.125, 1.0)]),
            Err(HarnessError::NonPositiveValue { index: 1, .. })
        ));
    }

    #[test]
    fn dyadic_parsing() {
        assert_eq!(parse_dyadic("2^-12").unwrap(), 2f64.powi(-12));
        assert_eq!(parse_dyadic("0.25").unwrap(), 0.25);
        assert!(parse_dyadic("0.3").is_err());
        assert_eq!(parse_ladder("2^-6..2^-12").unwrap(), (2f64.powi(-6), 2f64.powi(-12)));
        assert_eq!(parse_ladder("2^-12..2^-6").unwrap(), (2f64.powi(-6), 2f64.powi(-12)));
    }

    #[test]
    fn ladders_keep_only_realizable_pitches() {
        let spec = MeasureSpec::Cantor { alpha: 0.5 };
        let ladder = ladder_for(&spec, 2f64.powi(-6), 2f64.powi(-12));
        assert_eq!(
            ladder,
            vec![2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10), 2f64.powi(-12)]
        );
        let spec = MeasureSpec::DivergentEnergy { alpha: 0.25 };
        let ladder = ladder_for(&spec, 2f64.powi(-6), 2f64.powi(-16));
        assert_eq!(ladder, vec![2f64.powi(-8), 2f64.powi(-12), 2f64.powi(-16)]);
        assert_eq!(cantor_depth_for(0.5, 2f64.powi(-10)), Some(5));
        assert_eq!(cantor_depth_for(0.5, 2f64.powi(-9)), None);
    }

    #[test]
    fn scan_refuses_degenerate_polynomials() {
        let cfg = ScanConfig {
            poly: "sum-of-squares".into(),
            measure: MeasureSpec::Cantor { alpha: 0.5 },
            delta_max: "2^-4".into(),
            delta_min: "2^-8".into(),
            kappa: 0.25,
            seed: 0,
            timings: false,
        };
        assert!(matches!(run_scan(&cfg), Err(HarnessError::DegenerateInput(_))));
    }

    #[test]
    fn scan_is_deterministic_and_well_formed() {
        let cfg = ScanConfig {
            poly: "x+yz".into(),
            measure: MeasureSpec::Cantor { alpha: 0.5 },
            delta_max: "2^-4".into(),
            delta_min: "2^-8".into(),
            kappa: 0.25,
            seed: 7,
            timings: false,
        };
        let r1 = run_scan(&cfg).unwrap();
        let r2 = run_scan(&cfg).unwrap();
        assert_eq!(emit_csv(&r1), emit_csv(&r2));
        assert_eq!(r1.rows.len(), 3);
        assert!(r1.fit.is_some());
        for row in &r1.rows {
            assert!(row.cover_holds);
            assert!(row.runtime_ms == 0);
            for part in row.parts {
                assert!(part <= row.coincidence_total * (1.0 + 1e-12));
            }
        }
        let csv = emit_csv(&r1);
        assert!(csv.starts_with("delta,energy,I0,I1,I2,I3,I4,I5,I6,slice_sup,runtime_ms\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn empty_report_yields_header_only_csv() {
        let report = ScanReport {
            rows: vec![],
            fit: None,
            claimed_exponent: -0.5,
            direction: Direction::UpperBound,
            verdict: Verdict::Inconclusive,
            epsilon_hat: None,
        };
        assert_eq!(emit_csv(&report), "delta,energy,I0,I1,I2,I3,I4,I5,I6,slice_sup,runtime_ms\n");
        let svg = emit_svg(&report);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn svg_has_one_element_per_row_plus_fit() {
        let cfg = ScanConfig {
            poly: "x+yz".into(),
            measure: MeasureSpec::Cantor { alpha: 0.5 },
            delta_max: "2^-4".into(),
            delta_min: "2^-8".into(),
            kappa: 0.25,
            seed: 7,
            timings: false,
        };
        let report = run_scan(&cfg).unwrap();
        let svg = emit_svg(&report);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), report.rows.len());
        assert_eq!(svg.matches("<line").count(), 1);
        // Every opened angle bracket closes before the next opens.
        let mut depth = 0i32;
        for ch in svg.chars() {
            match ch {
                '<' => {
                    depth += 1;
                    assert_eq!(depth, 1, "nested '<'");
                }
                '>' => {
                    depth -= 1;
                    assert_eq!(depth, 0, "unbalanced '>'");
                }
                _ => {}
            }
        }
        assert_eq!(depth, 0);
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{
            "poly": "x+yz",
            "measure": {"kind": "cantor", "alpha": 0.5},
            "delta_max": "2^-6",
            "delta_min": "2^-12",
            "kappa": 0.25,
            "seed": 11,
            "timings": false
        }"#;
        let cfg = ScanConfig::from_json(text).unwrap();
        assert_eq!(cfg.measure, MeasureSpec::Cantor { alpha: 0.5 });
        assert_eq!(cfg.seed, 11);
        let back = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScanConfig::from_json(&back).unwrap(), cfg);
        let cons = r#"{
            "poly": "x+(y+z)^2",
            "measure": {"kind": "frostman-necessity", "alpha": 0.25},
            "delta_max": "2^-6",
            "delta_min": "2^-12",
            "kappa": 0.25
        }"#;
        let cfg = ScanConfig::from_json(cons).unwrap();
        assert_eq!(cfg.measure, MeasureSpec::FrostmanNecessity { alpha: 0.25 });
        assert!(!cfg.timings);
    }

    #[test]
    fn kappa_gate() {
        let cfg = ScanConfig {
            poly: "x+yz".into(),
            measure: MeasureSpec::Cantor { alpha: 0.5 },
            delta_max: "2^-4".into(),
            delta_min: "2^-8".into(),
            kappa: 0.7,
            seed: 0,
            timings: false,
        };
        assert!(matches!(run_scan(&cfg), Err(HarnessError::Config(_))));
    }
}
