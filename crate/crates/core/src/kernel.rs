//! Smooth compactly supported kernel used by the smoothed-energy chain:
//! the normalized C^∞ bump on (-1, 1) and its autocorrelation K on [-2, 2],
//! tabulated on a 1/512 lattice with composite Simpson quadrature.
//!
//! K is even, nonnegative, has unit integral, peaks at K(0), and stays
//! above the half height c0 = K(0)/2 on a plateau [-η, η]; those three
//! constants feed the energy comparison and the heavy-atom construction.

use std::sync::OnceLock;

/// Lattice step for the tabulated autocorrelation.
pub const LATTICE_STEP: f64 = 1.0 / 512.0;

/// exp(-1/(1-t^2)) on (-1, 1), zero outside.
pub fn bump_unnormalized(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Composite Simpson rule with n (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n % 2 == 0 && n >= 2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Mass of the unnormalized bump, computed once.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| simpson(bump_unnormalized, -1.0, 1.0, 1 << 14))
}

/// Unit-mass bump.
pub fn bump(t: f64) -> f64 {
    bump_unnormalized(t) / bump_mass()
}

/// Autocorrelation K(x) = ∫ bump(t) bump(t - x) dt, tabulated for x ≥ 0
/// and extended by evenness.
#[derive(Debug)]
pub struct SmoothingKernel {
    values: Vec<f64>,
}

impl SmoothingKernel {
    fn build() -> Self {
        let n_points = (2.0 / LATTICE_STEP) as usize + 1;
        let values = (0..n_points)
            .map(|j| {
                let x = j as f64 * LATTICE_STEP;
                let lo = (x - 1.0).max(-1.0);
                let hi = 1.0f64.min(x + 1.0);
                if lo >= hi {
                    0.0
                } else {
                    simpson(|t| bump(t) * bump(t - x), lo, hi, 1 << 10)
                }
            })
            .collect();
        SmoothingKernel { values }
    }

    /// K at the lattice point |j|/512 (zero past the support).
    pub fn lattice(&self, j: i64) -> f64 {
        let j = j.unsigned_abs() as usize;
        if j < self.values.len() {
            self.values[j]
        } else {
            0.0
        }
    }

    /// K(t) by even reflection and linear interpolation between lattice
    /// points; exactly zero for |t| ≥ 2.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= 2.0 {
            return 0.0;
        }
        let u = t / LATTICE_STEP;
        let j = u.floor() as usize;
        let frac = u - j as f64;
        let a = self.values[j];
        let b = if j + 1 < self.values.len() { self.values[j + 1] } else { 0.0 };
        a + frac * (b - a)
    }

    /// Peak value K(0).
    pub fn k0(&self) -> f64 {
        self.values[0]
    }

    /// Half height c0 = K(0)/2.
    pub fn half_height(&self) -> f64 {
        self.k0() / 2.0
    }

    /// Largest lattice point η with K(η) ≥ c0; K ≥ c0 on all of [-η, η]
    /// because K is even and unimodal.
    pub fn plateau_radius(&self) -> f64 {
        let c0 = self.half_height();
        let mut eta = 0.0;
        for (j, &v) in self.values.iter().enumerate() {
            if v >= c0 {
                eta = j as f64 * LATTICE_STEP;
            }
        }
        eta
    }
}

/// Shared tabulated kernel.
pub fn smoothing_kernel() -> &'static SmoothingKernel {
    static KERNEL: OnceLock<SmoothingKernel> = OnceLock::new();
    KERNEL.get_or_init(SmoothingKernel::build)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_shape_and_mass() {
        assert_eq!(bump_unnormalized(1.0), 0.0);
        assert_eq!(bump_unnormalized(-1.0), 0.0);
        assert_eq!(bump_unnormalized(3.0), 0.0);
        assert_eq!(bump_unnormalized(0.25), bump_unnormalized(-0.25));
        assert_relative_eq!(bump_unnormalized(0.0), (-1.0f64).exp(), max_relative = 1e-15);
        // Reference mass from an independent quadrature of the same
        // integrand.
        assert_relative_eq!(bump_mass(), 0.4439938161680834, max_relative = 1e-9);
        let unit = simpson(bump, -1.0, 1.0, 1 << 14);
        assert_relative_eq!(unit, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn kernel_frozen_values() {
        let k = smoothing_kernel();
        assert_relative_eq!(k.k0(), 0.6751168130096835, max_relative = 1e-6);
        assert_relative_eq!(k.eval(1.0), 0.17180378790788262, max_relative = 1e-6);
        assert_eq!(k.eval(2.0), 0.0);
        assert_eq!(k.eval(-2.0), 0.0);
        assert_eq!(k.eval(5.0), 0.0);
        assert_eq!(k.plateau_radius(), 369.0 / 512.0);
    }

    #[test]
    fn kernel_even_nonnegative_unimodal() {
        let k = smoothing_kernel();
        for j in 0..1025 {
            let t = j as f64 * LATTICE_STEP;
            assert!(k.lattice(j) >= 0.0);
            assert_eq!(k.eval(t), k.eval(-t));
            if j > 0 {
                assert!(
                    k.lattice(j) <= k.lattice(j - 1) + 1e-12,
                    "not unimodal at lattice {j}"
                );
            }
        }
    }

    #[test]
    fn kernel_unit_integral() {
        let k = smoothing_kernel();
        let half = simpson(|t| k.eval(t), 0.0, 2.0, 1 << 10);
        assert_relative_eq!(2.0 * half, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn plateau_is_genuinely_half_height() {
        let k = smoothing_kernel();
        let c0 = k.half_height();
        let eta = k.plateau_radius();
        let steps = (eta / LATTICE_STEP).round() as i64;
        for j in 0..=steps {
            assert!(k.lattice(j) >= c0, "below half height inside plateau at {j}");
        }
        assert!(k.lattice(steps + 1) < c0);
    }

    #[test]
    fn eval_interpolates_between_lattice_points() {
        let k = smoothing_kernel();
        for j in [0i64, 17, 255, 511, 800, 1023] {
            let a = k.lattice(j);
            let b = k.lattice(j + 1);
            let mid = k.eval((j as f64 + 0.5) * LATTICE_STEP);
            assert_relative_eq!(mid, (a + b) / 2.0, max_relative = 1e-12);
            assert_eq!(k.eval(j as f64 * LATTICE_STEP), a);
        }
    }
}
