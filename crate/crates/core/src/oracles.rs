//! Closed-form reference maps and a brute-force injectivity checker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::MappingField;
use crate::mesh::{Point2, PointLocator};

/// Maximum number of lattice samples [`brute_force_injectivity`] accepts.
pub const BRUTE_FORCE_SAMPLE_CAP: usize = 50_000;

/// A pair-valued analytic map `x -> (u1(x), u2(x))` with exact gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticSolution {
    /// `u^i(x) = |x|^{alpha-1} x_i`.
    Meyers { alpha: f64 },
    /// `(Re z^m, Im z^m)`.
    Holomorphic { m: u32 },
}

impl AnalyticSolution {
    pub fn descriptor(&self) -> String {
        match self {
            AnalyticSolution::Meyers { alpha } => format!("meyers:alpha={alpha}"),
            AnalyticSolution::Holomorphic { m } => format!("holo:m={m}"),
        }
    }

    pub fn value(&self, p: Point2) -> Result<[f64; 2]> {
        match *self {
            AnalyticSolution::Meyers { alpha } => {
                let r = p.norm();
                if r == 0.0 {
                    return Err(origin_error(
                        p,
                        "Meyers map is evaluated away from the origin",
                    ));
                }
                let s = r.powf(alpha - 1.0);
                Ok([s * p.x1, s * p.x2])
            }
            AnalyticSolution::Holomorphic { m } => {
                let (re, im) = complex_pow(p.x1, p.x2, m);
                Ok([re, im])
            }
        }
    }

    /// Rows are the gradients of the two components.
    pub fn gradient(&self, p: Point2) -> Result<[[f64; 2]; 2]> {
        match *self {
            AnalyticSolution::Meyers { alpha } => {
                let r2 = p.norm_sq();
                if r2 == 0.0 {
                    return Err(origin_error(p, "Meyers gradient is singular at the origin"));
                }
                let s = r2.sqrt().powf(alpha - 1.0);
                let c = (alpha - 1.0) / r2;
                let (x1, x2) = (p.x1, p.x2);
                Ok([
                    [s * (1.0 + c * x1 * x1), s * c * x1 * x2],
                    [s * c * x1 * x2, s * (1.0 + c * x2 * x2)],
                ])
            }
            AnalyticSolution::Holomorphic { m } => {
                // f' = m z^{m-1} = a + ib; u_x = a, u_y = -b, v_x = b, v_y = a
                let (re, im) = complex_pow(p.x1, p.x2, m - 1);
                let (a, b) = (m as f64 * re, m as f64 * im);
                Ok([[a, -b], [b, a]])
            }
        }
    }

    pub fn component(&self, index: usize, p: Point2) -> Result<f64> {
        Ok(self.value(p)?[index])
    }

    pub fn jacobian(&self, p: Point2) -> Result<f64> {
        let g = self.gradient(p)?;
        Ok(g[0][0] * g[1][1] - g[0][1] * g[1][0])
    }
}

fn origin_error(p: Point2, detail: &str) -> Error {
    Error::Evaluation {
        point: p,
        detail: detail.into(),
    }
}

fn complex_pow(x: f64, y: f64, m: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

pub fn meyers_solution(alpha: f64) -> Result<AnalyticSolution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(AnalyticSolution::Meyers { alpha })
}

pub fn holomorphic_oracle(m: u32) -> Result<AnalyticSolution> {
    if m == 0 {
        return Err(Error::invalid("holomorphic oracle needs m >= 1"));
    }
    Ok(AnalyticSolution::Holomorphic { m })
}

/// `det DU = alpha |x|^{2(alpha-1)}` for the Meyers map.
pub fn meyers_jacobian(alpha: f64, p: Point2) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let r2 = p.norm_sq();
    if r2 == 0.0 {
        return match alpha {
            a if a < 1.0 => Err(origin_error(
                p,
                "Meyers Jacobian diverges at the origin for alpha < 1",
            )),
            1.0 => Ok(1.0),
            _ => Ok(0.0),
        };
    }
    Ok(alpha * r2.powf(alpha - 1.0))
}

/// Samples the piecewise-linear map on a lattice of spacing `sample_step`
/// (anchored at the centre of the mesh bounding box) and compares all pairs
/// of images. Returns false if two distinct samples map within `1e-9`.
pub fn brute_force_injectivity(map: &MappingField, sample_step: f64) -> Result<bool> {
    if !(sample_step.is_finite() && sample_step > 0.0) {
        return Err(Error::invalid("sample step must be positive"));
    }
    let mesh = map.mesh();
    let (mut lo, mut hi) = (
        Point2::new(f64::INFINITY, f64::INFINITY),
        Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in mesh.vertices() {
        lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
        hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
    }
    let center = lo.lerp(hi, 0.5);
    let ni = ((hi.x1 - center.x1) / sample_step).floor() as i64;
    let nj = ((hi.x2 - center.x2) / sample_step).floor() as i64;
    let lattice = ((2 * ni + 1) * (2 * nj + 1)) as usize;
    if lattice > 4 * BRUTE_FORCE_SAMPLE_CAP {
        return Err(Error::ResourceLimit {
            what: "injectivity samples",
            requested: lattice,
            cap: BRUTE_FORCE_SAMPLE_CAP,
        });
    }

    let locator = PointLocator::new(mesh);
    let mut images = Vec::new();
    for j in -nj..=nj {
        for i in -ni..=ni {
            let p = center + Point2::new(i as f64 * sample_step, j as f64 * sample_step);
            if let Some((t, bary)) = locator.locate(p) {
                images.push(map.interpolate_in(t, bary));
            }
        }
    }
    if images.len() > BRUTE_FORCE_SAMPLE_CAP {
        return Err(Error::ResourceLimit {
            what: "injectivity samples",
            requested: images.len(),
            cap: BRUTE_FORCE_SAMPLE_CAP,
        });
    }
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            if images[a].dist(images[b]) <= 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = rng.gen_range(0.1..1.5);
                Point2::from_polar(Point2::ORIGIN, r, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect()
    }

    #[test]
    fn meyers_alpha_one_is_identity() {
        let s = meyers_solution(1.0).unwrap();
        for p in random_points(10, 1) {
            let v = s.value(p).unwrap();
            assert!((v[0] - p.x1).abs() < 1e-15 && (v[1] - p.x2).abs() < 1e-15);
        }
    }

    #[test]
    fn meyers_values() {
        let s = meyers_solution(2.0).unwrap();
        assert_eq!(s.value(Point2::new(1.0, 0.0)).unwrap(), [1.0, 0.0]);
        assert_eq!(s.value(Point2::new(0.5, 0.0)).unwrap(), [0.25, 0.0]);
        assert!(s.value(Point2::ORIGIN).is_err());
        assert!(s.gradient(Point2::ORIGIN).is_err());
    }

    #[test]
    fn meyers_gradient_matches_central_differences() {
        let step = 1e-5;
        for alpha in [0.5, 2.0, 3.0] {
            let s = meyers_solution(alpha).unwrap();
            for p in random_points(20, 7) {
                let g = s.gradient(p).unwrap();
                for (c, gc) in g.iter().enumerate() {
                    let dx = (s.component(c, p + Point2::new(step, 0.0)).unwrap()
                        - s.component(c, p - Point2::new(step, 0.0)).unwrap())
                        / (2.0 * step);
                    let dy = (s.component(c, p + Point2::new(0.0, step)).unwrap()
                        - s.component(c, p - Point2::new(0.0, step)).unwrap())
                        / (2.0 * step);
                    assert!((dx - gc[0]).abs() < 1e-7 && (dy - gc[1]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn meyers_jacobian_formula() {
        assert!((meyers_jacobian(2.0, Point2::new(0.6, 0.8)).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(meyers_jacobian(1.0, Point2::new(0.3, 0.1)).unwrap(), 1.0);
        assert_eq!(meyers_jacobian(2.0, Point2::ORIGIN).unwrap(), 0.0);
        assert!(meyers_jacobian(0.5, Point2::ORIGIN).is_err());
    }

    #[test]
    fn meyers_jacobian_matches_gradient_determinant() {
        for alpha in [0.5, 2.0, 3.5] {
            let s = meyers_solution(alpha).unwrap();
            for p in random_points(50, 11) {
                let a = meyers_jacobian(alpha, p).unwrap();
                let b = s.jacobian(p).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn meyers_is_radial_power() {
        let s = meyers_solution(2.5).unwrap();
        for p in random_points(20, 3) {
            let v = s.value(p).unwrap();
            let r = v[0].hypot(v[1]);
            assert!((r - p.norm().powf(2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn holomorphic_examples() {
        let h1 = holomorphic_oracle(1).unwrap();
        assert_eq!(h1.value(Point2::new(0.3, -0.4)).unwrap(), [0.3, -0.4]);
        let h2 = holomorphic_oracle(2).unwrap();
        assert_eq!(h2.value(Point2::new(1.0, 1.0)).unwrap(), [0.0, 2.0]);
        assert!(holomorphic_oracle(0).is_err());
    }

    #[test]
    fn holomorphic_jacobian_is_modulus_of_derivative_squared() {
        for m in 1..5u32 {
            let h = holomorphic_oracle(m).unwrap();
            for p in random_points(10, m as u64) {
                // |m z^{m-1}|^2 = m^2 |z|^{2(m-1)}
                let expect = (m * m) as f64 * p.norm_sq().powi(m as i32 - 1);
                assert!((h.jacobian(p).unwrap() - expect).abs() < 1e-10 * expect.max(1.0));
            }
        }
    }
}
