//! Central finite differences for `tr(sigma D^2 u) + b . grad u = 0` on
//! masked uniform grids, and the conversion of divergence-form coefficients
//! to that form.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    divergence_of_sigma, require_elliptic, CoefficientField, Matrix2, VectorField2,
};
use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::sparse::SparseBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Exterior,
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn code(self) -> u8 {
        match self {
            NodeKind::Exterior => 0,
            NodeKind::Interior => 1,
            NodeKind::Boundary => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(NodeKind::Exterior),
            1 => Some(NodeKind::Interior),
            2 => Some(NodeKind::Boundary),
            _ => None,
        }
    }
}

const NEIGHBOURS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

/// A uniform grid with each node flagged exterior, interior or boundary.
/// Interior nodes have all eight neighbours inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    origin: Point2,
    spacing: f64,
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
}

impl GridDomain {
    /// Node flags from explicit kinds, validating the neighbour invariant.
    pub fn from_kinds(
        origin: Point2,
        spacing: f64,
        nx: usize,
        ny: usize,
        kinds: Vec<NodeKind>,
    ) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if nx < 3 || ny < 3 || kinds.len() != nx * ny {
            return Err(Error::invalid(
                "grid needs at least 3x3 nodes and one flag per node",
            ));
        }
        let grid = GridDomain {
            origin,
            spacing,
            nx,
            ny,
            kinds,
        };
        for j in 0..ny {
            for i in 0..nx {
                if grid.kind(i, j) != NodeKind::Interior {
                    continue;
                }
                for (di, dj) in NEIGHBOURS {
                    match grid.neighbour(i, j, di, dj) {
                        Some(k) if grid.kinds[k] != NodeKind::Exterior => {}
                        _ => {
                            return Err(Error::invalid(format!(
                                "interior node ({i}, {j}) has a neighbour outside the domain"
                            )))
                        }
                    }
                }
            }
        }
        if !grid.kinds.contains(&NodeKind::Interior) {
            return Err(Error::invalid("grid has no interior nodes"));
        }
        Ok(grid)
    }

    /// Flags nodes by a region predicate: nodes inside with all eight
    /// neighbours inside are interior, the remaining inside nodes boundary.
    pub fn from_region(
        origin: Point2,
        spacing: f64,
        nx: usize,
        ny: usize,
        inside: impl Fn(Point2) -> bool,
    ) -> Result<Self> {
        if nx.saturating_mul(ny) > crate::mesh::DEFAULT_VERTEX_CAP {
            return Err(Error::ResourceLimit {
                what: "grid nodes",
                requested: nx.saturating_mul(ny),
                cap: crate::mesh::DEFAULT_VERTEX_CAP,
            });
        }
        let point = |i: usize, j: usize| {
            Point2::new(
                origin.x1 + i as f64 * spacing,
                origin.x2 + j as f64 * spacing,
            )
        };
        let ins: Vec<bool> = (0..nx * ny)
            .map(|k| inside(point(k % nx, k / nx)))
            .collect();
        let mut kinds = vec![NodeKind::Exterior; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if !ins[k] {
                    continue;
                }
                let all = NEIGHBOURS.iter().all(|&(di, dj)| {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    a >= 0
                        && b >= 0
                        && (a as usize) < nx
                        && (b as usize) < ny
                        && ins[b as usize * nx + a as usize]
                });
                kinds[k] = if all {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                };
            }
        }
        GridDomain::from_kinds(origin, spacing, nx, ny, kinds)
    }

    pub fn rectangle(min: Point2, max: Point2, spacing: f64) -> Result<Self> {
        let nx = ((max.x1 - min.x1) / spacing).round() as usize + 1;
        let ny = ((max.x2 - min.x2) / spacing).round() as usize + 1;
        let tol = 1e-9 * spacing;
        GridDomain::from_region(min, spacing, nx, ny, |p| {
            p.x1 >= min.x1 - tol
                && p.x1 <= max.x1 + tol
                && p.x2 >= min.x2 - tol
                && p.x2 <= max.x2 + tol
        })
    }

    /// Grid symmetric about `center` masking `r_in <= |x - center| <= r_out`.
    pub fn annulus(center: Point2, r_in: f64, r_out: f64, spacing: f64) -> Result<Self> {
        if !(0.0 <= r_in && r_in < r_out) {
            return Err(Error::invalid("need 0 <= r_in < r_out"));
        }
        let n = (r_out / spacing).ceil() as usize + 1;
        let origin = center - Point2::new(n as f64 * spacing, n as f64 * spacing);
        let tol = 1e-12;
        GridDomain::from_region(origin, spacing, 2 * n + 1, 2 * n + 1, |p| {
            let r = p.dist(center);
            r >= r_in - tol && r <= r_out + tol
        })
    }

    pub fn disk(center: Point2, radius: f64, spacing: f64) -> Result<Self> {
        let n = (radius / spacing).ceil() as usize + 1;
        let origin = center - Point2::new(n as f64 * spacing, n as f64 * spacing);
        GridDomain::from_region(origin, spacing, 2 * n + 1, 2 * n + 1, |p| {
            p.dist(center) <= radius + 1e-12
        })
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        self.kinds[j * self.nx + i]
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x1 + i as f64 * self.spacing,
            self.origin.x2 + j as f64 * self.spacing,
        )
    }

    pub fn node_point(&self, k: usize) -> Point2 {
        self.point(k % self.nx, k / self.nx)
    }

    fn neighbour(&self, i: usize, j: usize, di: i64, dj: i64) -> Option<usize> {
        let (a, b) = (i as i64 + di, j as i64 + dj);
        if a < 0 || b < 0 || a as usize >= self.nx || b as usize >= self.ny {
            return None;
        }
        Some(b as usize * self.nx + a as usize)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }
}

/// Node values on a grid; exterior nodes hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.kinds.len() {
            return Err(Error::invalid("grid field length does not match the grid"));
        }
        for (k, (&v, &kind)) in values.iter().zip(&grid.kinds).enumerate() {
            if kind != NodeKind::Exterior && !v.is_finite() {
                return Err(Error::invalid(format!(
                    "grid value at node {k} is not finite"
                )));
            }
        }
        Ok(GridField { grid, values })
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Discrete relative L2 error over interior and boundary nodes.
    pub fn relative_l2_error(&self, exact: impl Fn(Point2) -> Result<f64>) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &kind) in self.grid.kinds.iter().enumerate() {
            if kind == NodeKind::Exterior {
                continue;
            }
            let e = exact(self.grid.node_point(k))?;
            num += (self.values[k] - e).powi(2);
            den += e * e;
        }
        Ok(if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        })
    }
}

#[derive(Debug, Clone)]
pub struct NondivergenceSolution {
    pub field: GridField,
    pub relative_residual: f64,
    /// Smallest of `sigma_ii - |s|` and `2 sigma_ii - |b_i| spacing` over interior nodes.
    pub dominance_margin: f64,
}

/// Stencil admissibility at one node: `sigma_ii >= |(sigma_12 + sigma_21) / 2|`
/// and `|b_i| spacing <= 2 sigma_ii`. Returns the smallest slack.
pub fn dominance_margin(m: &Matrix2, b: [f64; 2], spacing: f64) -> f64 {
    let s = 0.5 * (m.a12 + m.a21).abs();
    (m.a11 - s)
        .min(m.a22 - s)
        .min(2.0 * m.a11 - b[0].abs() * spacing)
        .min(2.0 * m.a22 - b[1].abs() * spacing)
}

/// Solves `sigma11 dxx u + (sigma12 + sigma21) dxy u + sigma22 dyy u + b1 dx u + b2 dy u = 0`
/// at interior nodes with `u = g` at boundary nodes.
pub fn solve_nondivergence(
    grid: Arc<GridDomain>,
    sigma: &CoefficientField,
    b: &VectorField2,
    g: &(dyn Fn(Point2) -> Result<f64> + Sync),
) -> Result<NondivergenceSolution> {
    let (nx, h) = (grid.nx, grid.spacing);
    let interior: Vec<usize> = (0..grid.kinds.len())
        .filter(|&k| grid.kinds[k] == NodeKind::Interior)
        .collect();
    let points: Vec<Point2> = interior.iter().map(|&k| grid.node_point(k)).collect();
    require_elliptic(sigma, &points)?;

    let coeffs: Vec<(Matrix2, [f64; 2])> = points
        .par_iter()
        .map(|&p| Ok((sigma.eval(p)?, b.eval(p)?)))
        .collect::<Result<_>>()?;

    let mut worst = (f64::INFINITY, 0usize);
    for (n, (m, bv)) in coeffs.iter().enumerate() {
        let d = dominance_margin(m, *bv, h);
        if d < worst.0 {
            worst = (d, n);
        }
    }
    if worst.0 < 0.0 {
        let p = points[worst.1];
        return Err(Error::Numerical(format!(
            "stencil not admissible at node ({:.6}, {:.6}) (margin {:.3e}); off-diagonal coefficient \
             too large or |b| spacing too large; try a smaller spacing",
            p.x1, p.x2, worst.0
        )));
    }

    let mut unknown = vec![usize::MAX; grid.kinds.len()];
    for (n, &k) in interior.iter().enumerate() {
        unknown[k] = n;
    }
    let mut values = vec![0.0; grid.kinds.len()];
    for (k, &kind) in grid.kinds.iter().enumerate() {
        if kind == NodeKind::Boundary {
            values[k] = g(grid.node_point(k))?;
        }
    }

    let h2 = h * h;
    let mut builder = SparseBuilder::with_capacity(interior.len(), 9 * interior.len());
    let mut rhs = vec![0.0; interior.len()];
    for (row, &k) in interior.iter().enumerate() {
        let (m, bv) = coeffs[row];
        let cross = (m.a12 + m.a21) / (4.0 * h2);
        let stencil = [
            ((1, 0), m.a11 / h2 + bv[0] / (2.0 * h)),
            ((-1, 0), m.a11 / h2 - bv[0] / (2.0 * h)),
            ((0, 1), m.a22 / h2 + bv[1] / (2.0 * h)),
            ((0, -1), m.a22 / h2 - bv[1] / (2.0 * h)),
            ((1, 1), cross),
            ((-1, -1), cross),
            ((-1, 1), -cross),
            ((1, -1), -cross),
        ];
        builder.add(row, row, -2.0 * (m.a11 + m.a22) / h2);
        let (i, j) = (k % nx, k / nx);
        for ((di, dj), c) in stencil {
            if c == 0.0 {
                continue;
            }
            let nb = grid
                .neighbour(i, j, di, dj)
                .expect("interior nodes have all neighbours");
            match grid.kinds[nb] {
                NodeKind::Interior => builder.add(row, unknown[nb], c),
                _ => rhs[row] -= c * values[nb],
            }
        }
    }
    let sol = builder.solve(&rhs)?;
    for (n, &k) in interior.iter().enumerate() {
        values[k] = sol.x[n];
    }
    Ok(NondivergenceSolution {
        field: GridField::new(grid, values)?,
        relative_residual: sol.relative_residual,
        dominance_margin: worst.0,
    })
}

/// `(sigma, b)` with `b = div sigma` by central differences, so that
/// `div(sigma grad u) = tr(sigma D^2 u) + b . grad u`.
pub fn to_nondivergence(
    sigma: &CoefficientField,
    step: f64,
) -> Result<(CoefficientField, VectorField2)> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let s = sigma.clone();
    let b = VectorField2::new(format!("div({})", sigma.descriptor()), move |p| {
        divergence_of_sigma(&s, p, step)
    });
    Ok((sigma.clone(), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::AnalyticSolution;

    fn square(spacing: f64) -> Arc<GridDomain> {
        Arc::new(
            GridDomain::rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), spacing).unwrap(),
        )
    }

    #[test]
    fn affine_and_bilinear_are_exact() {
        let sigma = CoefficientField::identity();
        let b = VectorField2::zero();
        let g = |p: Point2| Ok(p.x1);
        let sol = solve_nondivergence(square(0.1), &sigma, &b, &g).unwrap();
        assert!(sol.field.relative_l2_error(g).unwrap() < 1e-12);
        let g = |p: Point2| Ok(p.x1 * p.x2);
        let sol = solve_nondivergence(square(0.1), &sigma, &b, &g).unwrap();
        for (k, v) in sol.field.values().iter().enumerate() {
            let p = sol.field.grid().node_point(k);
            assert!((v - p.x1 * p.x2).abs() < 1e-9);
        }
    }

    #[test]
    fn affine_exact_with_constant_anisotropy() {
        let sigma = CoefficientField::anisotropic(2.0, 1.0, 0.3);
        let g = |p: Point2| Ok(0.3 - 2.0 * p.x1 + 0.7 * p.x2);
        let sol = solve_nondivergence(square(0.05), &sigma, &VectorField2::zero(), &g).unwrap();
        for (k, v) in sol.field.values().iter().enumerate() {
            if sol.field.grid().kinds()[k] != NodeKind::Exterior {
                assert!((v - g(sol.field.grid().node_point(k)).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn masks_satisfy_neighbour_invariant() {
        let g = GridDomain::annulus(Point2::ORIGIN, 0.25, 0.95, 0.05).unwrap();
        assert!(g.count(NodeKind::Interior) > 0 && g.count(NodeKind::Boundary) > 0);
        let p = g.point(g.nx() / 2, g.ny() / 2);
        assert!(p.norm() < 1e-12);
        assert_eq!(g.kind(g.nx() / 2, g.ny() / 2), NodeKind::Exterior);
    }

    #[test]
    fn dominance_failure_names_node() {
        let sigma = CoefficientField::constant("skewed", Matrix2::new(1.0, 1.5, 1.5, 3.0));
        let err = solve_nondivergence(square(0.1), &sigma, &VectorField2::zero(), &|p| Ok(p.x1))
            .unwrap_err();
        assert!(err.to_string().contains("smaller spacing"), "{err}");
    }

    #[test]
    fn refinement_reduces_error() {
        // div(sigma grad u) = 0 for sigma = diag(1 + x1, 1) has no simple closed form;
        // use the Meyers oracle instead.
        let oracle = AnalyticSolution::Meyers { alpha: 1.5 };
        let sigma = CoefficientField::meyers(1.5).unwrap();
        let (s, b) = to_nondivergence(&sigma, 1e-5).unwrap();
        let g = |p: Point2| oracle.component(0, p);
        let mut errs = Vec::new();
        for h in [0.05, 0.025] {
            let grid = Arc::new(GridDomain::annulus(Point2::ORIGIN, 0.3, 0.95, h).unwrap());
            errs.push(
                solve_nondivergence(grid, &s, &b, &g)
                    .unwrap()
                    .field
                    .relative_l2_error(g)
                    .unwrap(),
            );
        }
        assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
    }

    #[test]
    fn conversion_examples() {
        let (_, b) = to_nondivergence(&CoefficientField::anisotropic(2.0, 3.0, 0.1), 1e-4).unwrap();
        let v = b.eval(Point2::new(0.3, 0.2)).unwrap();
        assert!(v[0].abs() < 1e-10 && v[1].abs() < 1e-10);
        let lin = CoefficientField::new("1+x1", true, |p| Ok(Matrix2::diag(1.0 + p.x1, 1.0)));
        let (_, b) = to_nondivergence(&lin, 1e-4).unwrap();
        let v = b.eval(Point2::new(0.3, 0.2)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-8 && v[1].abs() < 1e-8);
        let m = CoefficientField::meyers(2.0).unwrap();
        let (_, coarse) = to_nondivergence(&m, 1e-3).unwrap();
        let (_, fine) = to_nondivergence(&m, 1e-4).unwrap();
        let (a, c) = (
            coarse.eval(Point2::new(0.5, 0.5)).unwrap(),
            fine.eval(Point2::new(0.5, 0.5)).unwrap(),
        );
        assert!((a[0] - c[0]).abs() < 1e-4 && (a[1] - c[1]).abs() < 1e-4);
    }
}
