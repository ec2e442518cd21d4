//! Quadratic polynomials in three variables with exact-coefficient
//! classification and critical-set geometry.
//!
//! A polynomial is stored as the nine coefficients of
//!
//! ```text
//! f(x,y,z) = a·xy + b·xz + c·yz + d·x² + e·y² + g·z² + h·x + i·y + j·z
//! ```
//!
//! Everything downstream (pushforward energies, incidence counts, line
//! separation) keys off two exact symbolic facts about f: whether the three
//! mixed Jacobian determinants vanish identically, and the rank of the
//! Hessian. Both are decided by exact floating-point coefficient arithmetic,
//! never by sampling.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadPolyError {
    #[error("coefficient {name} is not finite: {value}")]
    NonFiniteCoefficient { name: char, value: f64 },
    #[error("hessian rank {rank} <= 1 for a polynomial classified {class:?}; critical set is not a point or line")]
    RankDeficient { rank: usize, class: Class },
    #[error("degeneracy tests disagree: jacobian says {jacobian}, structural says {structural}")]
    StructuralMismatch { jacobian: bool, structural: bool },
    #[error("quadratic part is singular: |det A| = {det:.3e} <= tol {tol:.3e}")]
    DegenerateForm { det: f64, tol: f64 },
    #[error("xy and yz coefficients both vanish; the separation form needs the variables switched")]
    AllZeroAxis,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// Outcome of the symbolic degeneracy test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Class {
    /// Some mixed Jacobian determinant is not identically zero.
    NonDegenerate,
    /// All three Jacobian determinants vanish identically; f is a function
    /// of a sum of single-variable polynomials.
    Degenerate,
    /// Some partial derivative vanishes identically; f ignores a variable.
    MissingVariable,
}

/// f(x,y,z) = a·xy + b·xz + c·yz + d·x² + e·y² + g·z² + h·x + i·y + j·z.
///
/// Field names follow that fixed monomial order. There is deliberately no
/// `f` coefficient: the letter is reserved for the polynomial itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadPoly {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub g: f64,
    pub h: f64,
    pub i: f64,
    pub j: f64,
}

/// Critical set K = { u : ∇f(u) = 0 } of a quadratic polynomial.
///
/// Since the gradient is affine, K is empty, a single point, or an affine
/// line; which one is decided by the Hessian rank and the consistency of
/// H·u = -b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalSet {
    Empty,
    Point([f64; 3]),
    Line {
        point: [f64; 3],
        /// Unit vector spanning ker H, sign-normalized so the first nonzero
        /// component is positive.
        direction: [f64; 3],
    },
}

/// One mixed Jacobian determinant, expanded symbolically.
///
/// Each determinant has a constant second row, so the expansion is affine in
/// (x,y,z). The coefficient on the differentiated variable is a difference
/// of commuted products and cancels exactly in floating point; it is kept in
/// `coeff` rather than silently dropped so the zero can be checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianForm {
    /// Coefficients of x, y, z.
    pub coeff: [f64; 3],
    pub constant: f64,
}

impl JacobianForm {
    /// Identically-zero test, exact on coefficients.
    pub fn is_zero(&self) -> bool {
        self.coeff == [0.0; 3] && self.constant == 0.0
    }

    pub fn eval(&self, u: [f64; 3]) -> f64 {
        self.coeff[0] * u[0] + self.coeff[1] * u[1] + self.coeff[2] * u[2] + self.constant
    }
}

/// The separation form J(x,z) = A·x + B·z + C attached to f.
///
/// Its coefficients are the exact products (ab-2cd, 2ag-cb, aj-ch); when J
/// is far from zero on a box, lines generated by distinct parameter pairs
/// stay apart in the line metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFormJ {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LinearFormJ {
    pub fn eval(&self, x: f64, z: f64) -> f64 {
        self.a * x + self.b * z + self.c
    }
}

/// Canonical reduction Q(x) = λ·Q_can(B(x - x₀)) + c′ of a rank-2 binary
/// quadratic, with Q_can one of st, s²+t², s²-t².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalKind {
    ProductUV,
    SumSquares,
    DiffSquares,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalReduction {
    pub kind: CanonicalKind,
    /// Invertible linear map applied after the shift.
    pub b_map: [[f64; 2]; 2],
    pub shift: [f64; 2],
    pub scale: f64,
    pub offset: f64,
}

impl CanonicalReduction {
    fn canonical_value(&self, s: f64, t: f64) -> f64 {
        match self.kind {
            CanonicalKind::ProductUV => s * t,
            CanonicalKind::SumSquares => s * s + t * t,
            CanonicalKind::DiffSquares => s * s - t * t,
        }
    }

    /// λ·Q_can(B(x - x₀)) + c′, for checking the reduction identity.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let y = [x[0] - self.shift[0], x[1] - self.shift[1]];
        let s = self.b_map[0][0] * y[0] + self.b_map[0][1] * y[1];
        let t = self.b_map[1][0] * y[0] + self.b_map[1][1] * y[1];
        self.scale * self.canonical_value(s, t) + self.offset
    }
}

/// Binary quadratic q20·u² + q11·uv + q02·v² + q10·u + q01·v + q00.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad2 {
    pub q20: f64,
    pub q11: f64,
    pub q02: f64,
    pub q10: f64,
    pub q01: f64,
    pub q00: f64,
}

impl QuadPoly {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        e: f64,
        g: f64,
        h: f64,
        i: f64,
        j: f64,
    ) -> Result<Self, QuadPolyError> {
        let poly = QuadPoly { a, b, c, d, e, g, h, i, j };
        for (name, value) in poly.named_coefficients() {
            if !value.is_finite() {
                return Err(QuadPolyError::NonFiniteCoefficient { name, value });
            }
        }
        Ok(poly)
    }

    fn named_coefficients(&self) -> [(char, f64); 9] {
        [
            ('a', self.a),
            ('b', self.b),
            ('c', self.c),
            ('d', self.d),
            ('e', self.e),
            ('g', self.g),
            ('h', self.h),
            ('i', self.i),
            ('j', self.j),
        ]
    }

    /// Named example polynomials accepted by the CLI.
    pub fn preset(name: &str) -> Result<Self, QuadPolyError> {
        let coeffs = match name {
            "x+yz" => [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            "x+(y+z)^2" => [0.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            "x+(y-z)^2" => [0.0, 0.0, -2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            "sum-of-squares" => [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            other => return Err(QuadPolyError::UnknownPreset(other.to_string())),
        };
        let [a, b, c, d, e, g, h, i, j] = coeffs;
        QuadPoly::new(a, b, c, d, e, g, h, i, j)
    }

    /// Parse either a preset name or a 9-field JSON object.
    pub fn parse(text: &str) -> Result<Self, QuadPolyError> {
        if text.trim_start().starts_with('{') {
            let poly: QuadPoly = serde_json::from_str(text)
                .map_err(|e| QuadPolyError::UnknownPreset(format!("bad polynomial json: {e}")))?;
            QuadPoly::new(
                poly.a, poly.b, poly.c, poly.d, poly.e, poly.g, poly.h, poly.i, poly.j,
            )
        } else {
            QuadPoly::preset(text.trim())
        }
    }

    pub fn evaluate(&self, u: [f64; 3]) -> f64 {
        let [x, y, z] = u;
        self.a * x * y
            + self.b * x * z
            + self.c * y * z
            + self.d * x * x
            + self.e * y * y
            + self.g * z * z
            + self.h * x
            + self.i * y
            + self.j * z
    }

    /// Hessian of f; constant since f is quadratic.
    pub fn hessian(&self) -> Matrix3<f64> {
        Matrix3::new(
            2.0 * self.d,
            self.a,
            self.b,
            self.a,
            2.0 * self.e,
            self.c,
            self.b,
            self.c,
            2.0 * self.g,
        )
    }

    /// Coefficient vector of the linear part, so ∇f(u) = H·u + linear_part.
    pub fn linear_part(&self) -> Vector3<f64> {
        Vector3::new(self.h, self.i, self.j)
    }

    pub fn gradient(&self, u: [f64; 3]) -> [f64; 3] {
        let grad = self.hessian() * Vector3::new(u[0], u[1], u[2]) + self.linear_part();
        [grad.x, grad.y, grad.z]
    }

    /// True when the partial derivative in the given axis (0=x, 1=y, 2=z) is
    /// identically zero, i.e. f does not depend on that variable.
    fn ignores_axis(&self, axis: usize) -> bool {
        match axis {
            0 => self.d == 0.0 && self.a == 0.0 && self.b == 0.0 && self.h == 0.0,
            1 => self.a == 0.0 && self.e == 0.0 && self.c == 0.0 && self.i == 0.0,
            2 => self.b == 0.0 && self.c == 0.0 && self.g == 0.0 && self.j == 0.0,
            _ => unreachable!("axis index"),
        }
    }

    /// The three determinants det(∂_v f, ∂_w f; ∂_{uv} f, ∂_{uw} f) for
    /// u = x, y, z, expanded symbolically.
    ///
    /// Each second row is constant, so the determinant is affine. The
    /// coefficient on u itself is a commuted-product difference (e.g. ba-ab)
    /// and is exactly zero; it is computed and stored anyway.
    pub fn jacobian_polynomials(&self) -> [JacobianForm; 3] {
        let QuadPoly { a, b, c, d, e, g, h, i, j } = *self;
        // J_x = b·(∂_y f) - a·(∂_z f)
        let jx = JacobianForm {
            coeff: [b * a - a * b, b * (2.0 * e) - a * c, b * c - a * (2.0 * g)],
            constant: b * i - a * j,
        };
        // J_y = c·(∂_x f) - a·(∂_z f)
        let jy = JacobianForm {
            coeff: [c * (2.0 * d) - a * b, c * a - a * c, c * b - a * (2.0 * g)],
            constant: c * h - a * j,
        };
        // J_z = c·(∂_x f) - b·(∂_y f)
        let jz = JacobianForm {
            coeff: [c * (2.0 * d) - b * a, c * a - b * (2.0 * e), c * b - b * c],
            constant: c * h - b * i,
        };
        [jx, jy, jz]
    }

    /// Degeneracy via the structural route: f is a function of a sum of
    /// single-variable polynomials exactly when either there are no cross
    /// terms at all, or the quadratic part has rank one and the linear part
    /// is parallel to its direction.
    fn degenerate_structural(&self) -> bool {
        if self.a == 0.0 && self.b == 0.0 && self.c == 0.0 {
            return true;
        }
        let h = self.hessian();
        // All 2x2 minors of the symmetric Hessian must vanish exactly.
        for r0 in 0..3 {
            for r1 in (r0 + 1)..3 {
                for c0 in 0..3 {
                    for c1 in (c0 + 1)..3 {
                        let minor = h[(r0, c0)] * h[(r1, c1)] - h[(r0, c1)] * h[(r1, c0)];
                        if minor != 0.0 {
                            return false;
                        }
                    }
                }
            }
        }
        // Rank <= 1 with a cross term present, so some row is nonzero; the
        // linear part must be a multiple of that row.
        let lin = [self.h, self.i, self.j];
        for r in 0..3 {
            let row = [h[(r, 0)], h[(r, 1)], h[(r, 2)]];
            if row == [0.0; 3] {
                continue;
            }
            let cross = [
                lin[1] * row[2] - lin[2] * row[1],
                lin[2] * row[0] - lin[0] * row[2],
                lin[0] * row[1] - lin[1] * row[0],
            ];
            return cross == [0.0; 3];
        }
        // Quadratic part entirely zero, but a cross term was nonzero above:
        // unreachable; treat as additive.
        true
    }

    /// Classify f as missing a variable, degenerate, or non-degenerate.
    ///
    /// Degeneracy is decided by the symbolic vanishing of all three mixed
    /// Jacobian determinants, cross-checked against the structural shape
    /// test; disagreement is an error, not a coin flip.
    pub fn classify(&self) -> Result<Class, QuadPolyError> {
        if (0..3).any(|axis| self.ignores_axis(axis)) {
            return Ok(Class::MissingVariable);
        }
        let jacobian_zero = self.jacobian_polynomials().iter().all(|j| j.is_zero());
        let structural = self.degenerate_structural();
        if jacobian_zero != structural {
            return Err(QuadPolyError::StructuralMismatch {
                jacobian: jacobian_zero,
                structural,
            });
        }
        if jacobian_zero {
            Ok(Class::Degenerate)
        } else {
            Ok(Class::NonDegenerate)
        }
    }

    /// Default linear-system tolerance, scale-free in the linear part.
    pub fn default_tol_lin(&self) -> f64 {
        1e-9 * (1.0 + self.linear_part().norm())
    }

    /// Solve ∇f = 0. The critical set of a quadratic is empty, a point
    /// (Hessian rank 3) or an affine line (rank 2); rank below 2 is reported
    /// as an error together with the classification, since a non-degenerate
    /// polynomial always has rank ≥ 2.
    pub fn critical_set(&self, tol_lin: Option<f64>) -> Result<CriticalSet, QuadPolyError> {
        let tol_lin = tol_lin.unwrap_or_else(|| self.default_tol_lin());
        let h = self.hessian();
        let b = self.linear_part();
        let svd = h.svd(true, true);
        let sigma_max = svd.singular_values.max();
        let rank_tol = 1e-9 * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > rank_tol).count();
        if rank <= 1 {
            let class = self.classify().unwrap_or(Class::Degenerate);
            return Err(QuadPolyError::RankDeficient { rank, class });
        }
        // Minimal-norm least-squares solution of H·u = -b, plus one
        // refinement pass: for nearly singular full-rank systems the raw
        // residual scales with the condition number, and refinement brings
        // it back to the backward-stable level ~ eps·|H||u|.
        let mut sol = svd
            .solve(&(-b), rank_tol)
            .expect("svd computed with both factor sets");
        sol -= svd
            .solve(&(h * sol + b), rank_tol)
            .expect("svd computed with both factor sets");
        let residual = (h * sol + b).norm();
        if rank == 3 {
            debug_assert!(
                residual <= 1e-12 * (1.0 + h.norm() * sol.norm() + b.norm()),
                "rank-3 solve residual {residual}"
            );
            return Ok(CriticalSet::Point([sol.x, sol.y, sol.z]));
        }
        if residual > tol_lin {
            return Ok(CriticalSet::Empty);
        }
        // Kernel direction: right singular vector for the smallest singular value.
        let v_t = svd.v_t.expect("svd computed with both factor sets");
        let mut dir = v_t.row(2).transpose();
        dir /= dir.norm();
        if let Some(&lead) = dir.iter().find(|x| x.abs() > 0.0) {
            if lead < 0.0 {
                dir = -dir;
            }
        }
        Ok(CriticalSet::Line {
            point: [sol.x, sol.y, sol.z],
            direction: [dir.x, dir.y, dir.z],
        })
    }

    /// The separation form J(x,z) = (ab-2cd)·x + (2ag-cb)·z + (aj-ch).
    ///
    /// Defined only when (a,c) ≠ (0,0); otherwise the y-fiber geometry is
    /// trivial and the caller must switch variables first.
    pub fn linear_form_j(&self) -> Result<LinearFormJ, QuadPolyError> {
        if self.a == 0.0 && self.c == 0.0 {
            return Err(QuadPolyError::AllZeroAxis);
        }
        Ok(LinearFormJ {
            a: self.a * self.b - 2.0 * self.c * self.d,
            b: 2.0 * self.a * self.g - self.c * self.b,
            c: self.a * self.j - self.c * self.h,
        })
    }
}

/// Reduce a binary quadratic with invertible quadratic part to one of the
/// three canonical shapes st, s²+t², s²-t².
///
/// The shift x₀ = -½A⁻¹ℓ removes the linear part; the map B is assembled
/// from a symmetric eigendecomposition of A, scaled so both canonical
/// coefficients have magnitude one. ProductUV is returned only when the
/// input is already a multiple of uv (both square coefficients exactly
/// zero); every other indefinite form reduces to DiffSquares, and definite
/// forms to SumSquares with the sign carried by λ.
pub fn reduce_rank2(q: &Quad2, tol: f64) -> Result<CanonicalReduction, QuadPolyError> {
    let a_mat = Matrix2::new(q.q20, q.q11 / 2.0, q.q11 / 2.0, q.q02);
    let det = a_mat[(0, 0)] * a_mat[(1, 1)] - a_mat[(0, 1)] * a_mat[(1, 0)];
    if det.abs() <= tol {
        return Err(QuadPolyError::DegenerateForm { det, tol });
    }
    let ell = Vector2::new(q.q10, q.q01);
    let shift = -0.5 * (a_mat.try_inverse().expect("checked det") * ell);
    let offset = eval_quad2(q, shift.x, shift.y);

    if q.q20 == 0.0 && q.q02 == 0.0 {
        return Ok(CanonicalReduction {
            kind: CanonicalKind::ProductUV,
            b_map: [[1.0, 0.0], [0.0, 1.0]],
            shift: [shift.x, shift.y],
            scale: q.q11,
            offset,
        });
    }

    let eig = nalgebra::SymmetricEigen::new(a_mat);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    // Pivot on the eigenvalue of largest magnitude; on a tie prefer the
    // positive one so the overall scale is positive for indefinite input.
    let pivot_first = match l0.abs().partial_cmp(&l1.abs()).expect("finite eigenvalues") {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => l0 >= l1,
    };
    let (lam, lam_other, v_pivot, v_other) = if pivot_first {
        (l0, l1, eig.eigenvectors.column(0).into_owned(), eig.eigenvectors.column(1).into_owned())
    } else {
        (l1, l0, eig.eigenvectors.column(1).into_owned(), eig.eigenvectors.column(0).into_owned())
    };
    let ratio = lam_other / lam;
    let kind = if ratio > 0.0 {
        CanonicalKind::SumSquares
    } else {
        CanonicalKind::DiffSquares
    };
    // Rows of B: pivot direction unscaled, the other scaled by sqrt|ratio|,
    // so λ·Q_can(B·y) reproduces λ_p·(v_p·y)² + λ_o·(v_o·y)².
    let s = ratio.abs().sqrt();
    let b_map = [
        [v_pivot.x, v_pivot.y],
        [s * v_other.x, s * v_other.y],
    ];
    Ok(CanonicalReduction {
        kind,
        b_map,
        shift: [shift.x, shift.y],
        scale: lam,
        offset,
    })
}

pub fn eval_quad2(q: &Quad2, u: f64, v: f64) -> f64 {
    q.q20 * u * u + q.q11 * u * v + q.q02 * v * v + q.q10 * u + q.q01 * v + q.q00
}
