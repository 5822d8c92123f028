//! Coefficient matrices `sigma(x)`, lower-order fields `b(x)`, ellipticity
//! checks and the complex dilatations of the associated Beltrami equation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// A real 2x2 matrix, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);
    /// Counterclockwise quarter rotation.
    pub const ROTATION: Matrix2 = Matrix2::new(0.0, -1.0, 1.0, 0.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Matrix2::new(d1, 0.0, 0.0, d2)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Self {
        Matrix2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn sym(&self) -> Self {
        let s = 0.5 * (self.a12 + self.a21);
        Matrix2::new(self.a11, s, s, self.a22)
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Matrix2::new(
            self.a22 / d,
            -self.a12 / d,
            -self.a21 / d,
            self.a11 / d,
        ))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn mul(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn add(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }

    pub fn scale(&self, s: f64) -> Matrix2 {
        Matrix2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    /// Least eigenvalue of the symmetric part, i.e. `min sigma xi . xi` over unit `xi`.
    pub fn min_sym_eig(&self) -> f64 {
        let s = 0.5 * (self.a12 + self.a21);
        let m = 0.5 * (self.a11 + self.a22);
        let d = 0.5 * (self.a11 - self.a22);
        m - d.hypot(s)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn max_abs_diff(&self, o: &Matrix2) -> f64 {
        (self.a11 - o.a11)
            .abs()
            .max((self.a12 - o.a12).abs())
            .max((self.a21 - o.a21).abs())
            .max((self.a22 - o.a22).abs())
    }
}

type MatrixFn = dyn Fn(Point2) -> Result<Matrix2> + Send + Sync;
type VectorFn = dyn Fn(Point2) -> Result<[f64; 2]> + Send + Sync;

/// A matrix-valued coefficient `x -> sigma(x)`.
#[derive(Clone)]
pub struct CoefficientField {
    eval: Arc<MatrixFn>,
    symmetric: bool,
    descriptor: String,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("descriptor", &self.descriptor)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        descriptor: impl Into<String>,
        symmetric: bool,
        eval: impl Fn(Point2) -> Result<Matrix2> + Send + Sync + 'static,
    ) -> Self {
        CoefficientField {
            eval: Arc::new(eval),
            symmetric,
            descriptor: descriptor.into(),
        }
    }

    /// Evaluates `sigma(p)`, checking finiteness and (when claimed) symmetry.
    pub fn eval(&self, p: Point2) -> Result<Matrix2> {
        let m = (self.eval)(p)?;
        if !m.is_finite() {
            return Err(Error::Evaluation {
                point: p,
                detail: format!("non-finite coefficient in {}", self.descriptor),
            });
        }
        if self.symmetric {
            let scale = m.a11.abs().max(m.a22.abs()).max(1.0);
            if (m.a12 - m.a21).abs() > 1e-12 * scale {
                return Err(Error::Evaluation {
                    point: p,
                    detail: format!("{} claims symmetry but a12 != a21", self.descriptor),
                });
            }
        }
        Ok(m)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn identity() -> Self {
        Self::constant("identity", Matrix2::IDENTITY)
    }

    pub fn constant(descriptor: impl Into<String>, m: Matrix2) -> Self {
        let symmetric = m.a12 == m.a21;
        CoefficientField::new(descriptor, symmetric, move |_| Ok(m))
    }

    /// `R(theta) diag(l1, l2) R(theta)^T`.
    pub fn anisotropic(l1: f64, l2: f64, theta: f64) -> Self {
        let r = Matrix2::rotation(theta);
        let mut m = r.mul(&Matrix2::diag(l1, l2)).mul(&r.transpose());
        let s = 0.5 * (m.a12 + m.a21);
        m.a12 = s;
        m.a21 = s;
        Self::constant(format!("aniso:l1={l1},l2={l2},theta={theta}"), m)
    }

    /// Smooth symmetric field `I + eps * bump(x) * a a^T` with `a = (cos phi, sin phi)`
    /// and a Gaussian bump centred at `center` with width `width`.
    pub fn smooth(params: SmoothParams) -> Self {
        let descriptor = format!(
            "smooth:eps={},phi={},cx={},cy={},w={}",
            params.eps, params.phi, params.center.x1, params.center.x2, params.width
        );
        CoefficientField::new(descriptor, true, move |p| Ok(params.matrix(p)))
    }

    /// Non-symmetric field `S(x) + tau(x) J`, where `S` is a smooth field and
    /// `tau(x) = tau * (1 - vary + vary * bump(x))`.
    pub fn nonsymmetric(base: SmoothParams, tau: f64, vary: f64) -> Self {
        let descriptor = format!(
            "nonsym:tau={tau},vary={vary},eps={},phi={},cx={},cy={},w={}",
            base.eps, base.phi, base.center.x1, base.center.x2, base.width
        );
        CoefficientField::new(descriptor, false, move |p| {
            let t = tau * (1.0 - vary + vary * base.bump(p));
            Ok(base.matrix(p).add(&Matrix2::ROTATION.scale(t)))
        })
    }

    /// Radial coefficient with eigenvalue `alpha^{-1}` in the radial direction
    /// and `alpha` in the angular direction; discontinuous at the origin.
    pub fn meyers(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(CoefficientField::new(
            format!("meyers:alpha={alpha}"),
            true,
            move |p| meyers_matrix(alpha, p),
        ))
    }

    /// Random smooth symmetric field for property suites.
    pub fn random_smooth<R: Rng>(rng: &mut R) -> Self {
        Self::smooth(SmoothParams::random(rng))
    }

    /// Random non-symmetric field with `|tau| <= tau_max` and a varying skew part.
    pub fn random_nonsymmetric<R: Rng>(rng: &mut R, tau_max: f64) -> Self {
        let base = SmoothParams::random(rng);
        let tau =
            rng.gen_range(0.3 * tau_max..=tau_max) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        Self::nonsymmetric(base, tau, 1.0)
    }
}

/// Entries of the Meyers coefficient at `p`.
pub fn meyers_matrix(alpha: f64, p: Point2) -> Result<Matrix2> {
    let r2 = p.norm_sq();
    if r2 == 0.0 {
        return Err(Error::Evaluation {
            point: p,
            detail: "Meyers coefficient is discontinuous at the origin".into(),
        });
    }
    let (x1, x2) = (p.x1, p.x2);
    let inv = 1.0 / alpha;
    let off = (inv - alpha) * x1 * x2 / r2;
    Ok(Matrix2::new(
        (inv * x1 * x1 + alpha * x2 * x2) / r2,
        off,
        off,
        (alpha * x1 * x1 + inv * x2 * x2) / r2,
    ))
}

/// Parameters of the smooth rank-one bump field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothParams {
    pub eps: f64,
    pub phi: f64,
    pub center: Point2,
    pub width: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        SmoothParams {
            eps: 0.0,
            phi: 0.0,
            center: Point2::ORIGIN,
            width: 0.5,
        }
    }
}

impl SmoothParams {
    pub fn bump(&self, p: Point2) -> f64 {
        (-(p - self.center).norm_sq() / (self.width * self.width)).exp()
    }

    pub fn matrix(&self, p: Point2) -> Matrix2 {
        let s = self.eps * self.bump(p);
        let (sn, cs) = self.phi.sin_cos();
        let off = s * cs * sn;
        Matrix2::new(1.0 + s * cs * cs, off, off, 1.0 + s * sn * sn)
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        SmoothParams {
            eps: rng.gen_range(0.3..1.5),
            phi: rng.gen_range(0.0..PI),
            center: Point2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            width: rng.gen_range(0.3..0.8),
        }
    }
}

/// A vector field `x -> b(x)`.
#[derive(Clone)]
pub struct VectorField2 {
    eval: Arc<VectorFn>,
    descriptor: String,
}

impl fmt::Debug for VectorField2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField2")
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl VectorField2 {
    pub fn new(
        descriptor: impl Into<String>,
        eval: impl Fn(Point2) -> Result<[f64; 2]> + Send + Sync + 'static,
    ) -> Self {
        VectorField2 {
            eval: Arc::new(eval),
            descriptor: descriptor.into(),
        }
    }

    pub fn zero() -> Self {
        VectorField2::new("zero", |_| Ok([0.0, 0.0]))
    }

    pub fn eval(&self, p: Point2) -> Result<[f64; 2]> {
        let v = (self.eval)(p)?;
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::Evaluation {
                point: p,
                detail: format!("non-finite value of {}", self.descriptor),
            });
        }
        Ok(v)
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

/// Sampled ellipticity data of a coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    #[serde(rename = "K_estimate")]
    pub k_estimate: f64,
    pub min_sym_eig: f64,
    pub min_inv_sym_eig: f64,
    pub sample_count: usize,
    pub worst_point: Point2,
}

impl EllipticityReport {
    pub fn is_elliptic(&self) -> bool {
        self.min_sym_eig > 0.0 && self.min_inv_sym_eig > 0.0
    }
}

/// Estimates the ellipticity constant `K` over the sample points. A report is
/// returned even for non-elliptic fields; use [`require_elliptic`] to reject them.
pub fn ellipticity_report(
    field: &CoefficientField,
    samples: &[Point2],
) -> Result<EllipticityReport> {
    if samples.is_empty() {
        return Err(Error::invalid(
            "ellipticity check needs at least one sample point",
        ));
    }
    let mut min_sym = f64::INFINITY;
    let mut min_inv = f64::INFINITY;
    let mut worst = (f64::INFINITY, samples[0]);
    for &p in samples {
        let m = field.eval(p)?;
        if m.det().abs() <= 1e-12 {
            return Err(Error::NotElliptic {
                point: p,
                detail: format!("{} is singular (det = {:e})", field.descriptor(), m.det()),
            });
        }
        let inv = m.inverse().expect("determinant checked above");
        let (e, ei) = (m.min_sym_eig(), inv.min_sym_eig());
        min_sym = min_sym.min(e);
        min_inv = min_inv.min(ei);
        if e.min(ei) < worst.0 {
            worst = (e.min(ei), p);
        }
    }
    Ok(EllipticityReport {
        k_estimate: 1.0 / min_sym.min(min_inv),
        min_sym_eig: min_sym,
        min_inv_sym_eig: min_inv,
        sample_count: samples.len(),
        worst_point: worst.1,
    })
}

pub fn require_elliptic(field: &CoefficientField, samples: &[Point2]) -> Result<EllipticityReport> {
    let report = ellipticity_report(field, samples)?;
    if !report.is_elliptic() {
        return Err(Error::NotElliptic {
            point: report.worst_point,
            detail: format!(
                "{}: least eigenvalues {:.6e} (sym part) and {:.6e} (inverse sym part)",
                field.descriptor(),
                report.min_sym_eig,
                report.min_inv_sym_eig
            ),
        });
    }
    Ok(report)
}

/// Complex dilatations `(mu, nu)` of the Beltrami equation `f_zbar = mu f_z + nu conj(f_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilatationPair {
    pub mu: Complex64,
    pub nu: Complex64,
}

impl DilatationPair {
    pub fn modulus_sum(&self) -> f64 {
        self.mu.norm() + self.nu.norm()
    }
}

pub fn dilatations(m: &Matrix2) -> Result<DilatationPair> {
    let den = 1.0 + m.trace() + m.det();
    if den.abs() <= 1e-14 || !den.is_finite() {
        return Err(Error::NotElliptic {
            point: Point2::ORIGIN,
            detail: format!("1 + tr + det vanishes for {m:?}"),
        });
    }
    let mu = Complex64::new(m.a22 - m.a11, -(m.a12 + m.a21)) / den;
    let nu = Complex64::new(1.0 - m.det(), m.a12 - m.a21) / den;
    Ok(DilatationPair { mu, nu })
}

/// `k = max |mu| + |nu|` over the samples; errors if `k >= 1`.
pub fn dilatation_bound(field: &CoefficientField, samples: &[Point2]) -> Result<f64> {
    let mut k: f64 = 0.0;
    for &p in samples {
        let d = dilatations(&field.eval(p)?).map_err(|e| match e {
            Error::NotElliptic { detail, .. } => Error::NotElliptic { point: p, detail },
            other => other,
        })?;
        let s = d.modulus_sum();
        if s >= 1.0 {
            return Err(Error::NotElliptic {
                point: p,
                detail: format!("|mu| + |nu| = {s} is not below 1"),
            });
        }
        k = k.max(s);
    }
    Ok(k)
}

/// Central-difference approximation of the column divergence
/// `(d1 s11 + d2 s21, d1 s12 + d2 s22)`.
pub fn divergence_of_sigma(field: &CoefficientField, p: Point2, step: f64) -> Result<[f64; 2]> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let e = field.eval(p + Point2::new(step, 0.0))?;
    let w = field.eval(p - Point2::new(step, 0.0))?;
    let n = field.eval(p + Point2::new(0.0, step))?;
    let s = field.eval(p - Point2::new(0.0, step))?;
    let inv = 0.5 / step;
    Ok([
        (e.a11 - w.a11) * inv + (n.a21 - s.a21) * inv,
        (e.a12 - w.a12) * inv + (n.a22 - s.a22) * inv,
    ])
}
