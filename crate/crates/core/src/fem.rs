//! Piecewise-linear finite elements for `div(sigma grad u) = 0` with
//! Dirichlet data, plus the nodal field types shared by the analysis code.

use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficients::{require_elliptic, CoefficientField, EllipticityReport, Matrix2};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};
use crate::oracles::AnalyticSolution;
use crate::sparse::{SparseBuilder, SparseLu};

/// A continuous piecewise-linear function given by its vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::invalid(format!(
                "field has {} values but the mesh has {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "field value at vertex {i} is not finite"
            )));
        }
        Ok(ScalarField { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point2) -> Result<f64>) -> Result<Self> {
        let values = mesh
            .vertices()
            .iter()
            .map(|&p| f(p))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::new(mesh, values)
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_vertices();
        ScalarField {
            mesh,
            values: vec![c; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolate_in(&self, t: usize, bary: [f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.triangles()[t];
        bary[0] * self.values[a] + bary[1] * self.values[b] + bary[2] * self.values[c]
    }

    /// `a * self + b * other` on the same mesh.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        same_mesh(&self.mesh, &other.mesh)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        ScalarField::new(self.mesh.clone(), values)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::invalid("fields live on different meshes"))
    }
}

/// An ordered pair of scalar fields on one mesh, `U = (u1, u2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl MappingField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        same_mesh(&u1.mesh, &u2.mesh)?;
        Ok(MappingField { u1, u2 })
    }

    pub fn from_analytic(mesh: Arc<Mesh>, oracle: &AnalyticSolution) -> Result<Self> {
        let u1 = ScalarField::interpolate(mesh.clone(), |p| oracle.component(0, p))?;
        let u2 = ScalarField::interpolate(mesh, |p| oracle.component(1, p))?;
        Ok(MappingField { u1, u2 })
    }

    pub fn identity(mesh: Arc<Mesh>) -> Self {
        let u1 = mesh.vertices().iter().map(|p| p.x1).collect();
        let u2 = mesh.vertices().iter().map(|p| p.x2).collect();
        MappingField {
            u1: ScalarField {
                mesh: mesh.clone(),
                values: u1,
            },
            u2: ScalarField { mesh, values: u2 },
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.u1.mesh
    }

    /// Image of vertex `v`.
    pub fn image(&self, v: usize) -> Point2 {
        Point2::new(self.u1.values[v], self.u2.values[v])
    }

    pub fn interpolate_in(&self, t: usize, bary: [f64; 3]) -> Point2 {
        Point2::new(
            self.u1.interpolate_in(t, bary),
            self.u2.interpolate_in(t, bary),
        )
    }

    /// `xi1 u1 + xi2 u2`.
    pub fn directional(&self, xi: [f64; 2]) -> ScalarField {
        let values = self
            .u1
            .values
            .iter()
            .zip(&self.u2.values)
            .map(|(a, b)| xi[0] * a + xi[1] * b)
            .collect();
        ScalarField {
            mesh: self.u1.mesh.clone(),
            values,
        }
    }
}

/// Exact gradients of a piecewise-linear field, one per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGradientField {
    mesh: Arc<Mesh>,
    grads: Vec<[f64; 2]>,
}

impl TriangleGradientField {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.grads
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.grads.iter().map(|g| g[0].hypot(g[1])).collect()
    }
}

/// Gradients of the three hat functions of a triangle, and its area.
pub fn basis_gradients(corners: [Point2; 3]) -> ([[f64; 2]; 3], f64) {
    let [p0, p1, p2] = corners;
    let two_a = (p1 - p0).cross(p2 - p0);
    let g = [
        [(p1.x2 - p2.x2) / two_a, (p2.x1 - p1.x1) / two_a],
        [(p2.x2 - p0.x2) / two_a, (p0.x1 - p2.x1) / two_a],
        [(p0.x2 - p1.x2) / two_a, (p1.x1 - p0.x1) / two_a],
    ];
    (g, 0.5 * two_a)
}

fn triangle_gradient(mesh: &Mesh, values: &[f64], t: usize) -> [f64; 2] {
    let (g, _) = basis_gradients(mesh.corners(t));
    let [a, b, c] = mesh.triangles()[t];
    // differences make constants exactly gradient free
    let (db, dc) = (values[b] - values[a], values[c] - values[a]);
    [db * g[1][0] + dc * g[2][0], db * g[1][1] + dc * g[2][1]]
}

pub fn gradient_field(u: &ScalarField) -> TriangleGradientField {
    let mesh = &u.mesh;
    let grads = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| triangle_gradient(mesh, &u.values, t))
        .collect();
    TriangleGradientField {
        mesh: mesh.clone(),
        grads,
    }
}

/// Coefficient values at every triangle centroid.
pub fn centroid_coefficients(mesh: &Mesh, sigma: &CoefficientField) -> Result<Vec<Matrix2>> {
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| sigma.eval(mesh.centroid(t)))
        .collect()
}

pub fn centroids(mesh: &Mesh) -> Vec<Point2> {
    (0..mesh.num_triangles())
        .map(|t| mesh.centroid(t))
        .collect()
}

/// Discrete Dirichlet energy `sum_T (sigma(c_T) grad u) . grad u |T|`.
pub fn energy(u: &ScalarField, sigma: &CoefficientField) -> Result<f64> {
    let grads = gradient_field(u);
    let sig = centroid_coefficients(&u.mesh, sigma)?;
    Ok(grads
        .grads
        .iter()
        .zip(&sig)
        .enumerate()
        .map(|(t, (g, s))| {
            let sg = s.apply(*g);
            (sg[0] * g[0] + sg[1] * g[1]) * u.mesh.area(t)
        })
        .sum())
}

/// The Dirichlet problem `div(sigma grad u) = 0` in the mesh domain,
/// `u = g` on every boundary loop.
pub struct DirichletProblem<'a> {
    pub mesh: Arc<Mesh>,
    pub sigma: &'a CoefficientField,
    pub boundary_data: &'a (dyn Fn(Point2) -> Result<f64> + Sync),
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub field: ScalarField,
    pub relative_residual: f64,
    pub ellipticity: EllipticityReport,
}

/// Stiffness matrix of one mesh and coefficient, factorized once and reused
/// for any number of boundary data.
pub struct StiffnessSystem {
    mesh: Arc<Mesh>,
    /// interior unknown index per vertex
    unknown: Vec<Option<usize>>,
    /// coupling of interior rows to boundary vertices: (row, vertex, value)
    coupling: Vec<(usize, usize, f64)>,
    lu: SparseLu,
    ellipticity: EllipticityReport,
}

impl StiffnessSystem {
    /// Assembles `K_ij = |T| (sigma(c_T) grad phi_j) . grad phi_i` over all
    /// triangles and factorizes the interior block.
    pub fn assemble(mesh: Arc<Mesh>, sigma: &CoefficientField) -> Result<Self> {
        let ellipticity = require_elliptic(sigma, &centroids(&mesh))?;
        let on_boundary = mesh.boundary_flags();
        let mut unknown = vec![None; mesh.num_vertices()];
        let mut n = 0;
        for (v, &b) in on_boundary.iter().enumerate() {
            if !b {
                unknown[v] = Some(n);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("mesh has no interior vertices"));
        }
        let sig = centroid_coefficients(&mesh, sigma)?;
        let elements: Vec<[[f64; 3]; 3]> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let (g, area) = basis_gradients(mesh.corners(t));
                let mut k = [[0.0; 3]; 3];
                for j in 0..3 {
                    let sg = sig[t].apply(g[j]);
                    for i in 0..3 {
                        k[i][j] = area * (sg[0] * g[i][0] + sg[1] * g[i][1]);
                    }
                }
                k
            })
            .collect();

        let mut builder = SparseBuilder::with_capacity(n, 9 * mesh.num_triangles());
        let mut coupling = Vec::new();
        for (tri, k) in mesh.triangles().iter().zip(&elements) {
            for i in 0..3 {
                let Some(row) = unknown[tri[i]] else { continue };
                for j in 0..3 {
                    match unknown[tri[j]] {
                        Some(col) => builder.add(row, col, k[i][j]),
                        None => coupling.push((row, tri[j], k[i][j])),
                    }
                }
            }
        }
        let lu = builder.factorize()?;
        Ok(StiffnessSystem {
            mesh,
            unknown,
            coupling,
            lu,
            ellipticity,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn num_unknowns(&self) -> usize {
        self.lu.dim()
    }

    pub fn ellipticity(&self) -> &EllipticityReport {
        &self.ellipticity
    }

    /// Solves with boundary values interpolated from `g`.
    pub fn solve(&self, g: &(dyn Fn(Point2) -> Result<f64> + Sync)) -> Result<DirichletSolution> {
        let mut values = vec![0.0; self.mesh.num_vertices()];
        for (v, slot) in self.unknown.iter().enumerate() {
            if slot.is_none() {
                values[v] = g(self.mesh.vertices()[v])?;
            }
        }
        let mut rhs = vec![0.0; self.lu.dim()];
        for &(row, v, k) in &self.coupling {
            rhs[row] -= k * values[v];
        }
        let sol = self.lu.solve(&rhs)?;
        for (v, slot) in self.unknown.iter().enumerate() {
            if let Some(k) = slot {
                values[v] = sol.x[*k];
            }
        }
        Ok(DirichletSolution {
            field: ScalarField::new(self.mesh.clone(), values)?,
            relative_residual: sol.relative_residual,
            ellipticity: self.ellipticity.clone(),
        })
    }
}

pub fn solve_dirichlet(problem: &DirichletProblem<'_>) -> Result<DirichletSolution> {
    StiffnessSystem::assemble(problem.mesh.clone(), problem.sigma)?.solve(problem.boundary_data)
}

/// Solves both components of a sigma-harmonic map with one factorization.
pub fn solve_map(
    mesh: Arc<Mesh>,
    sigma: &CoefficientField,
    g1: &(dyn Fn(Point2) -> Result<f64> + Sync),
    g2: &(dyn Fn(Point2) -> Result<f64> + Sync),
) -> Result<(MappingField, f64)> {
    let system = StiffnessSystem::assemble(mesh, sigma)?;
    let a = system.solve(g1)?;
    let b = system.solve(g2)?;
    let residual = a.relative_residual.max(b.relative_residual);
    Ok((MappingField::new(a.field, b.field)?, residual))
}

/// Quadrature over triangles with the three edge midpoints (exact for quadratics).
fn midpoint_rule(
    mesh: &Mesh,
    mut f: impl FnMut(usize, [f64; 3], Point2) -> Result<f64>,
) -> Result<f64> {
    const BARY: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let mut acc = 0.0;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.corners(t);
        let w = mesh.area(t) / 3.0;
        for l in BARY {
            let p = a * l[0] + b * l[1] + c * l[2];
            acc += w * f(t, l, p)?;
        }
    }
    Ok(acc)
}

/// Norms of `u_h - u` for an analytic `u`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub l2_reference: f64,
    pub relative_l2: f64,
}

pub fn l2_error(u: &ScalarField, exact: impl Fn(Point2) -> Result<f64>) -> Result<ErrorNorms> {
    let mut reference = 0.0;
    let err = midpoint_rule(&u.mesh, |t, l, p| {
        let e = exact(p)?;
        reference += u.mesh.area(t) / 3.0 * e * e;
        let d = u.interpolate_in(t, l) - e;
        Ok(d * d)
    })?;
    let (l2, l2_reference) = (err.sqrt(), reference.sqrt());
    Ok(ErrorNorms {
        l2,
        l2_reference,
        relative_l2: if l2_reference > 0.0 {
            l2 / l2_reference
        } else {
            l2
        },
    })
}

/// `|u_h - u|_{H^1}` using the exact gradient of `u`.
pub fn h1_seminorm_error(
    u: &ScalarField,
    exact_grad: impl Fn(Point2) -> Result<[f64; 2]>,
) -> Result<f64> {
    let grads = gradient_field(u);
    let err = midpoint_rule(&u.mesh, |t, _, p| {
        let g = exact_grad(p)?;
        let gh = grads.grads[t];
        Ok((gh[0] - g[0]).powi(2) + (gh[1] - g[1]).powi(2))
    })?;
    Ok(err.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, generate_disk};

    fn disk(h: f64) -> Arc<Mesh> {
        Arc::new(generate_disk(Point2::ORIGIN, 1.0, h).unwrap())
    }

    #[test]
    fn affine_data_is_reproduced() {
        let mesh = disk(0.1);
        let sigma = CoefficientField::identity();
        let g = |p: Point2| Ok(p.x1);
        let sol = solve_dirichlet(&DirichletProblem {
            mesh: mesh.clone(),
            sigma: &sigma,
            boundary_data: &g,
        })
        .unwrap();
        for (p, u) in mesh.vertices().iter().zip(sol.field.values()) {
            assert!((u - p.x1).abs() < 1e-12);
        }
        assert!(sol.relative_residual <= 1e-10);
    }

    #[test]
    fn harmonic_quadratic_converges_at_second_order() {
        let sigma = CoefficientField::identity();
        let exact = |p: Point2| Ok(p.x1 * p.x1 - p.x2 * p.x2);
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let sol = solve_dirichlet(&DirichletProblem {
                mesh: disk(h),
                sigma: &sigma,
                boundary_data: &exact,
            })
            .unwrap();
            errs.push(l2_error(&sol.field, exact).unwrap().relative_l2);
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.0..=5.0).contains(&ratio),
            "ratio {ratio}, errors {errs:?}"
        );
    }

    #[test]
    fn gradient_examples() {
        let mesh = disk(0.2);
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        for g in gradient_field(&u).gradients() {
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        let c = ScalarField::constant(mesh, 3.0);
        assert!(gradient_field(&c)
            .gradients()
            .iter()
            .all(|g| g[0].abs() < 1e-14 && g[1].abs() < 1e-14));
    }

    #[test]
    fn meyers_gradient_is_first_order() {
        let oracle = AnalyticSolution::Meyers { alpha: 2.0 };
        let mut errs = Vec::new();
        for h in [0.04, 0.02] {
            let mesh = Arc::new(generate_annulus(Point2::ORIGIN, 0.2, 1.0, h).unwrap());
            let u = ScalarField::interpolate(mesh.clone(), |p| oracle.component(0, p)).unwrap();
            let grads = gradient_field(&u);
            let mut err: f64 = 0.0;
            for t in 0..mesh.num_triangles() {
                let c = mesh.centroid(t);
                if c.norm() < 0.3 {
                    continue;
                }
                let g = oracle.gradient(c).unwrap()[0];
                let gh = grads.gradients()[t];
                err = err.max((gh[0] - g[0]).hypot(gh[1] - g[1]));
            }
            errs.push(err);
        }
        assert!(errs[0] < 0.2 && errs[1] < 0.6 * errs[0], "{errs:?}");
    }

    #[test]
    fn energy_examples() {
        let mesh = disk(0.05);
        let sigma = CoefficientField::identity();
        assert_eq!(
            energy(&ScalarField::constant(mesh.clone(), 2.0), &sigma).unwrap(),
            0.0
        );
        let u = ScalarField::interpolate(mesh.clone(), |p| Ok(p.x1)).unwrap();
        assert!((energy(&u, &sigma).unwrap() - mesh.total_area()).abs() < 1e-10);
    }

    #[test]
    fn solution_minimizes_energy() {
        let mesh = disk(0.1);
        let sigma = CoefficientField::anisotropic(2.0, 0.5, 0.3);
        let g = |p: Point2| Ok((3.0 * p.x1).sin() + p.x2 * p.x2);
        let sol = solve_dirichlet(&DirichletProblem {
            mesh: mesh.clone(),
            sigma: &sigma,
            boundary_data: &g,
        })
        .unwrap();
        let e0 = energy(&sol.field, &sigma).unwrap();
        let flags = mesh.boundary_flags();
        for k in 1..=5 {
            let bump: Vec<f64> = mesh
                .vertices()
                .iter()
                .zip(&flags)
                .map(|(p, &b)| {
                    if b {
                        0.0
                    } else {
                        0.01 * k as f64 * (k as f64 * p.x1 + p.x2).cos()
                    }
                })
                .collect();
            let other = ScalarField::new(mesh.clone(), bump)
                .unwrap()
                .combine(1.0, &sol.field, 1.0)
                .unwrap();
            assert!(energy(&other, &sigma).unwrap() > e0);
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        let mesh = disk(0.1);
        let sigma = CoefficientField::identity();
        let g = |p: Point2| Ok((p.x1 * 4.0).cos() * p.x2);
        let sol = solve_dirichlet(&DirichletProblem {
            mesh: mesh.clone(),
            sigma: &sigma,
            boundary_data: &g,
        })
        .unwrap();
        let flags = mesh.boundary_flags();
        let bvals: Vec<f64> = (0..mesh.num_vertices())
            .filter(|&v| flags[v])
            .map(|v| sol.field.values()[v])
            .collect();
        let lo = bvals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = bvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &u in sol.field.values() {
            assert!(u >= lo - 1e-12 && u <= hi + 1e-12);
        }
    }

    #[test]
    fn solve_is_linear_in_data() {
        let mesh = disk(0.1);
        let sigma = CoefficientField::anisotropic(3.0, 1.0, 1.1);
        let g1 = |p: Point2| Ok(p.x1 * p.x2 + 0.5);
        let g2 = |p: Point2| Ok((2.0 * p.x2).exp());
        let lam = -1.7;
        let g3 = |p: Point2| Ok(g1(p)? + lam * g2(p)?);
        let sys = StiffnessSystem::assemble(mesh, &sigma).unwrap();
        let (a, b, c) = (
            sys.solve(&g1).unwrap(),
            sys.solve(&g2).unwrap(),
            sys.solve(&g3).unwrap(),
        );
        let combo = a.field.combine(1.0, &b.field, lam).unwrap();
        let scale = c.field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in combo.values().iter().zip(c.field.values()) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn skew_part_with_constant_tau_does_not_change_solution() {
        let mesh = disk(0.08);
        let g = |p: Point2| Ok(p.x1 * p.x1 * p.x2 + p.x2);
        let plain = CoefficientField::identity();
        let skew = CoefficientField::nonsymmetric(Default::default(), 0.25, 0.0);
        let a = solve_dirichlet(&DirichletProblem {
            mesh: mesh.clone(),
            sigma: &plain,
            boundary_data: &g,
        })
        .unwrap();
        let b = solve_dirichlet(&DirichletProblem {
            mesh,
            sigma: &skew,
            boundary_data: &g,
        })
        .unwrap();
        let scale = a.field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.field.values().iter().zip(b.field.values()) {
            assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn rejects_non_elliptic_sigma() {
        let mesh = disk(0.2);
        let sigma = CoefficientField::anisotropic(-1.0, 1.0, 0.0);
        let g = |p: Point2| Ok(p.x1);
        let err = solve_dirichlet(&DirichletProblem {
            mesh,
            sigma: &sigma,
            boundary_data: &g,
        })
        .unwrap_err();
        assert!(matches!(err, Error::NotElliptic { .. }));
    }

    #[test]
    fn rejects_mesh_without_interior() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let mesh = Arc::new(Mesh::new(v, vec![[0, 1, 2]], vec![vec![0, 1, 2]], 1.0).unwrap());
        let sigma = CoefficientField::identity();
        let g = |p: Point2| Ok(p.x1);
        assert!(solve_dirichlet(&DirichletProblem {
            mesh,
            sigma: &sigma,
            boundary_data: &g
        })
        .is_err());
    }
}
