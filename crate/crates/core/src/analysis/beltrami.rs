//! Stream functions, complex derivatives of `f = u + i v` and the
//! Beltrami residual.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{dilatations, require_elliptic, CoefficientField, Matrix2};
use crate::error::{Error, Result};
use crate::fem::{
    basis_gradients, centroid_coefficients, centroids, gradient_field, same_mesh, ScalarField,
};
use crate::mesh::Mesh;
use crate::sparse::SparseBuilder;

/// Relative flux through a hole above which no single-valued stream function exists.
pub const HOLE_FLUX_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub field: ScalarField,
    /// `||grad v - J sigma grad u||_L2 / ||sigma grad u||_L2`
    pub residual: f64,
}

/// `J a` for the counterclockwise quarter rotation `J`.
fn rotate(a: [f64; 2]) -> [f64; 2] {
    [-a[1], a[0]]
}

/// Flux of `sigma grad u` through each inner boundary loop, relative to the
/// total absolute flux across that loop.
pub fn hole_fluxes(u: &ScalarField, sigma: &CoefficientField) -> Result<Vec<f64>> {
    let mesh = u.mesh();
    let grads = gradient_field(u);
    let mut edge_tri = std::collections::HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            edge_tri.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut out = Vec::new();
    for lp in mesh.boundary_loops().iter().skip(1) {
        let (mut flux, mut total) = (0.0, 0.0);
        for i in 0..lp.len() {
            let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
            let t = edge_tri[&(a, b)];
            let flow = sigma.eval(mesh.centroid(t))?.apply(grads.gradients()[t]);
            let e = mesh.vertices()[b] - mesh.vertices()[a];
            // outward normal times length for a loop traversed with the domain on the left
            let n = [e.x2, -e.x1];
            let f = flow[0] * n[0] + flow[1] * n[1];
            flux += f;
            total += f.abs();
        }
        out.push(if total > 0.0 { flux.abs() / total } else { 0.0 });
    }
    Ok(out)
}

/// Least-squares piecewise-linear `v` with `grad v ~ J sigma grad u`,
/// anchored by `v = 0` at vertex 0.
///
/// Multiply connected meshes are accepted only when the flux of
/// `sigma grad u` through every hole vanishes (within [`HOLE_FLUX_TOLERANCE`]),
/// since otherwise `v` is multivalued.
pub fn stream_function(u: &ScalarField, sigma: &CoefficientField) -> Result<StreamFunction> {
    let mesh = u.mesh().clone();
    let cents = centroids(&mesh);
    require_elliptic(sigma, &cents)?;
    if mesh.boundary_loops().len() > 1 {
        let fluxes = hole_fluxes(u, sigma)?;
        if let Some(f) = fluxes.iter().find(|&&f| f > HOLE_FLUX_TOLERANCE) {
            return Err(Error::Hypothesis(format!(
                "domain is not simply connected and sigma grad u has relative flux {f:.3e} through a hole"
            )));
        }
    }
    let grads = gradient_field(u);
    let sig = centroid_coefficients(&mesh, sigma)?;
    let flows: Vec<[f64; 2]> = sig
        .iter()
        .zip(grads.gradients())
        .map(|(s, g)| s.apply(*g))
        .collect();
    let targets: Vec<[f64; 2]> = flows.iter().map(|&f| rotate(f)).collect();

    let flow_norm: f64 = flows
        .iter()
        .enumerate()
        .map(|(t, f)| (f[0] * f[0] + f[1] * f[1]) * mesh.area(t))
        .sum::<f64>()
        .sqrt();
    if flow_norm == 0.0 {
        return Ok(StreamFunction {
            field: ScalarField::constant(mesh, 0.0),
            residual: 0.0,
        });
    }

    let n = mesh.num_vertices() - 1;
    let mut builder = SparseBuilder::with_capacity(n, 9 * mesh.num_triangles());
    let mut rhs = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (g, area) = basis_gradients(mesh.corners(t));
        for i in 0..3 {
            if tri[i] == 0 {
                continue;
            }
            let row = tri[i] - 1;
            rhs[row] += area * (targets[t][0] * g[i][0] + targets[t][1] * g[i][1]);
            for j in 0..3 {
                if tri[j] != 0 {
                    builder.add(
                        row,
                        tri[j] - 1,
                        area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]),
                    );
                }
            }
        }
    }
    let sol = builder.solve(&rhs)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    values.extend(sol.x);
    let field = ScalarField::new(mesh.clone(), values)?;

    let vg = gradient_field(&field);
    let misfit: f64 = vg
        .gradients()
        .iter()
        .zip(&targets)
        .enumerate()
        .map(|(t, (a, b))| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) * mesh.area(t))
        .sum::<f64>()
        .sqrt();
    Ok(StreamFunction {
        field,
        residual: misfit / flow_norm,
    })
}

/// Per-triangle `f_z` and `f_zbar` of `f = u + i v`.
#[derive(Debug, Clone)]
pub struct ComplexDerivativeField {
    mesh: Arc<Mesh>,
    pub fz: Vec<Complex64>,
    pub fzbar: Vec<Complex64>,
}

impl ComplexDerivativeField {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `|f_z|^2 - |f_zbar|^2` per triangle, the Jacobian of `f`.
    pub fn jacobians(&self) -> Vec<f64> {
        self.fz
            .iter()
            .zip(&self.fzbar)
            .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
            .collect()
    }
}

/// `f_z = (f_x1 - i f_x2) / 2`, `f_zbar = (f_x1 + i f_x2) / 2`, exactly from
/// the piecewise-linear gradients of `u` and `v`.
pub fn complex_derivatives(u: &ScalarField, v: &ScalarField) -> Result<ComplexDerivativeField> {
    same_mesh(u.mesh(), v.mesh())?;
    let (gu, gv) = (gradient_field(u), gradient_field(v));
    let (fz, fzbar) = gu
        .gradients()
        .iter()
        .zip(gv.gradients())
        .map(|(a, b)| {
            let fx = Complex64::new(a[0], b[0]);
            let fy = Complex64::new(a[1], b[1]);
            let i = Complex64::i();
            (0.5 * (fx - i * fy), 0.5 * (fx + i * fy))
        })
        .unzip();
    Ok(ComplexDerivativeField {
        mesh: u.mesh().clone(),
        fz,
        fzbar,
    })
}

/// `||f_zbar - mu f_z - nu conj(f_z)||_L2 / ||f_z||_L2` with `(mu, nu)` from
/// `sigma` at triangle centroids.
pub fn beltrami_residual(cd: &ComplexDerivativeField, sigma: &CoefficientField) -> Result<f64> {
    let mesh = &cd.mesh;
    let sig: Vec<Matrix2> = centroid_coefficients(mesh, sigma)?;
    let parts: Vec<(f64, f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let d = dilatations(&sig[t])?;
            let (fz, fzb) = (cd.fz[t], cd.fzbar[t]);
            let r = fzb - d.mu * fz - d.nu * fz.conj();
            let a = mesh.area(t);
            Ok((r.norm_sqr() * a, fz.norm_sqr() * a))
        })
        .collect::<Result<_>>()?;
    let (num, den) = parts
        .iter()
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
    if den == 0.0 {
        return Err(Error::invalid("f_z vanishes identically (constant f)"));
    }
    Ok((num / den).sqrt())
}

/// Distortion data of `f` over triangles inset from the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiconformalDefect {
    /// `max |f_zbar| / |f_z|`; `None` when some `f_z` vanishes.
    pub sup_ratio: Option<f64>,
    /// `min |f_z|^2 - |f_zbar|^2`.
    pub min_jacobian_f: f64,
    /// `min_jacobian_f` fell below [`NEAR_DEGENERATE`].
    pub near_degenerate: bool,
    pub triangles: usize,
}

pub const NEAR_DEGENERATE: f64 = 1e-3;

pub fn quasiconformal_defect(
    cd: &ComplexDerivativeField,
    margin: f64,
) -> Result<QuasiconformalDefect> {
    if !(margin >= 0.0) {
        return Err(Error::invalid("margin must be nonnegative"));
    }
    let inset = cd.mesh.inset_triangles(margin);
    if inset.is_empty() {
        return Err(Error::invalid(format!(
            "no triangle lies at distance {margin} from the boundary"
        )));
    }
    let mut sup: Option<f64> = Some(0.0);
    let mut min_j = f64::INFINITY;
    for &t in &inset {
        let (a, b) = (cd.fz[t].norm(), cd.fzbar[t].norm());
        sup = match sup {
            Some(s) if a > 0.0 => Some(s.max(b / a)),
            _ => None,
        };
        min_j = min_j.min(a * a - b * b);
    }
    Ok(QuasiconformalDefect {
        sup_ratio: sup,
        min_jacobian_f: min_j,
        near_degenerate: min_j < NEAR_DEGENERATE,
        triangles: inset.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{solve_dirichlet, DirichletProblem};
    use crate::mesh::{generate_annulus, generate_disk, Point2};

    fn disk(h: f64) -> Arc<Mesh> {
        Arc::new(generate_disk(Point2::ORIGIN, 1.0, h).unwrap())
    }

    #[test]
    fn stream_of_x1_is_x2() {
        let mesh = disk(0.1);
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        let s = stream_function(&u, &CoefficientField::identity()).unwrap();
        let x0 = mesh.vertices()[0].x2;
        for (p, v) in mesh.vertices().iter().zip(s.field.values()) {
            assert!((v - (p.x2 - x0)).abs() < 1e-10);
        }
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn stream_with_constant_anisotropy() {
        let mesh = disk(0.1);
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        let s = stream_function(
            &u,
            &CoefficientField::constant("d", Matrix2::diag(2.0, 0.5)),
        )
        .unwrap();
        for (p, v) in mesh.vertices().iter().zip(s.field.values()) {
            assert!((v - 2.0 * (p.x2 - mesh.vertices()[0].x2)).abs() < 1e-10);
        }
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn stream_of_zero_is_zero() {
        let mesh = disk(0.2);
        let s = stream_function(
            &ScalarField::constant(mesh, 0.0),
            &CoefficientField::identity(),
        )
        .unwrap();
        assert!(s.field.values().iter().all(|&v| v == 0.0));
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn stream_of_saddle_is_harmonic_conjugate() {
        let sigma = CoefficientField::identity();
        let g = |p: Point2| Ok(p.x1 * p.x1 - p.x2 * p.x2);
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let mesh = disk(h);
            let u = solve_dirichlet(&DirichletProblem {
                mesh: mesh.clone(),
                sigma: &sigma,
                boundary_data: &g,
            })
            .unwrap();
            let s = stream_function(&u.field, &sigma).unwrap();
            // v = 2 x1 x2 exactly vanishes at the centre vertex
            let err = crate::fem::l2_error(&s.field, |p| Ok(2.0 * p.x1 * p.x2)).unwrap();
            errs.push(err.l2);
        }
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn annulus_with_nonzero_flux_is_rejected() {
        let mesh = Arc::new(generate_annulus(Point2::ORIGIN, 0.3, 1.0, 0.1).unwrap());
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.norm().ln())).unwrap();
        let err = stream_function(&u, &CoefficientField::identity()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let u = ScalarField::interpolate(mesh, |p| Ok(p.x1)).unwrap();
        assert!(
            stream_function(&u, &CoefficientField::identity())
                .unwrap()
                .residual
                < 1e-10
        );
    }

    #[test]
    fn complex_derivative_examples() {
        let mesh = disk(0.2);
        let x1 = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        let x2 = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x2)).unwrap();
        let mx2 = ScalarField::interpolate(mesh.clone(), |p| Ok(-p.x2)).unwrap();
        let z = complex_derivatives(&x1, &x2).unwrap();
        assert!(z.fz.iter().all(|c| (c - 1.0).norm() < 1e-12));
        assert!(z.fzbar.iter().all(|c| c.norm() < 1e-12));
        let zb = complex_derivatives(&x1, &mx2).unwrap();
        assert!(zb.fz.iter().all(|c| c.norm() < 1e-12));
        assert!(zb.fzbar.iter().all(|c| (c - 1.0).norm() < 1e-12));
        assert!(beltrami_residual(&z, &CoefficientField::identity()).unwrap() < 1e-12);
    }

    #[test]
    fn complex_derivative_of_square() {
        let mesh = disk(0.05);
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1 * p.x1 - p.x2 * p.x2)).unwrap();
        let v = ScalarField::interpolate(mesh.clone(), |p| Ok(2.0 * p.x1 * p.x2)).unwrap();
        let cd = complex_derivatives(&u, &v).unwrap();
        let mut err: f64 = 0.0;
        for t in 0..mesh.num_triangles() {
            let c = mesh.centroid(t);
            err = err.max((cd.fz[t] - 2.0 * Complex64::new(c.x1, c.x2)).norm());
            err = err.max(cd.fzbar[t].norm());
        }
        assert!(err < 2.0 * mesh.h(), "max error {err}");
    }

    #[test]
    fn constant_f_is_degenerate() {
        let mesh = disk(0.2);
        let c = ScalarField::constant(mesh, 1.0);
        let cd = complex_derivatives(&c, &c).unwrap();
        assert!(beltrami_residual(&cd, &CoefficientField::identity()).is_err());
    }

    #[test]
    fn defect_examples() {
        let mesh = disk(0.1);
        let x1 = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        let x2 = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x2)).unwrap();
        let d = quasiconformal_defect(&complex_derivatives(&x1, &x2).unwrap(), 0.1).unwrap();
        assert!(d.sup_ratio.unwrap() < 1e-12);
        assert!((d.min_jacobian_f - 1.0).abs() < 1e-12);
        assert!(quasiconformal_defect(&complex_derivatives(&x1, &x2).unwrap(), 2.0).is_err());

        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1 * p.x1 - p.x2 * p.x2)).unwrap();
        let v = ScalarField::interpolate(mesh.clone(), |p| Ok(2.0 * p.x1 * p.x2)).unwrap();
        let d = quasiconformal_defect(&complex_derivatives(&u, &v).unwrap(), 0.1).unwrap();
        let nearest = (0..mesh.num_triangles())
            .map(|t| mesh.centroid(t).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(d.min_jacobian_f > 0.0);
        assert!((d.min_jacobian_f - 4.0 * nearest * nearest).abs() < 0.5 * 4.0 * nearest * nearest);
    }

    #[test]
    fn residual_is_invariant_under_constant_shift_and_linear_in_scale() {
        let mesh = disk(0.1);
        let sigma = CoefficientField::anisotropic(2.0, 0.7, 0.4);
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok((p.x1 * 2.0).sin() + p.x2)).unwrap();
        let base = stream_function(&u, &sigma).unwrap();
        let shifted = stream_function(
            &ScalarField::interpolate(mesh.clone(), |p| Ok((p.x1 * 2.0).sin() + p.x2 + 3.0))
                .unwrap(),
            &sigma,
        )
        .unwrap();
        assert!((base.residual - shifted.residual).abs() < 1e-10);
        let scaled = stream_function(&u.combine(5.0, &u, 0.0).unwrap(), &sigma).unwrap();
        assert!((base.residual - scaled.residual).abs() < 1e-10);
        for (a, b) in base.field.values().iter().zip(scaled.field.values()) {
            assert!((5.0 * a - b).abs() < 1e-9);
        }
    }
}
