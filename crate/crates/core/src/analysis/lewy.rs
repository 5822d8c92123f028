//! End-to-end check that `det DU` stays away from zero for an injective
//! sigma-harmonic map, together with the unimodality of `U . xi` on pullbacks.

use std::f64::consts::PI;

use serde::Serialize;

use super::mapping::{injectivity_check, jacobian_field};
use super::pullback::pullback_subdomain;
use super::unimodal::{unimodality_check, UnimodalityVerdict, DEFAULT_TIE_TOLERANCE};
use crate::coefficients::{require_elliptic, CoefficientField};
use crate::error::{Error, Result};
use crate::fem::{centroids, gradient_field, MappingField};
use crate::mesh::{Mesh, Point2, PointLocator};

pub const DEFAULT_DIRECTIONS: usize = 8;
pub const DEFAULT_PROBE_COUNT: usize = 5;
/// Default probe radius as a fraction of the distance from `U(z0)` to the boundary image.
pub const DEFAULT_PROBE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LewyOptions {
    pub directions: usize,
    pub margin: f64,
    /// `None` selects [`default_probe_points`].
    pub probe_points: Option<Vec<Point2>>,
    /// `None` picks [`DEFAULT_PROBE_FRACTION`] of the boundary-image distance per probe.
    pub probe_radius: Option<f64>,
    pub tie_tolerance: f64,
}

impl Default for LewyOptions {
    fn default() -> Self {
        LewyOptions {
            directions: DEFAULT_DIRECTIONS,
            margin: 0.1,
            probe_points: None,
            probe_radius: None,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub z0: Point2,
    pub w0: Point2,
    pub r: f64,
    pub submesh_triangles: usize,
    pub contour_points: usize,
    /// One verdict per tested direction.
    pub verdicts: Vec<UnimodalityVerdict>,
    pub all_unimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LewyReport {
    pub directions_tested: usize,
    pub directions: Vec<[f64; 2]>,
    pub margin: f64,
    pub inset_triangles: usize,
    pub min_abs_det: f64,
    pub min_abs_grad: Vec<f64>,
    pub probes: Vec<ProbeReport>,
    pub injective: bool,
    pub all_unimodal: bool,
    pub passes: bool,
}

/// `n` unit vectors at angles `pi k / n`, `k = 0..n`.
pub fn half_circle_directions(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let t = PI * k as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect()
}

/// Up to five points of a 7x7 lattice over the bounding box that lie in the
/// mesh at distance at least `max(margin, 2h)` from the boundary, spread
/// along the lattice order.
pub fn default_probe_points(mesh: &Mesh, margin: f64) -> Vec<Point2> {
    let (mut lo, mut hi) = (mesh.vertices()[0], mesh.vertices()[0]);
    for p in mesh.vertices() {
        lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
        hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
    }
    let locator = PointLocator::new(mesh);
    let clearance = margin.max(2.0 * mesh.h());
    let mut cands = Vec::new();
    for j in 1..8 {
        for i in 1..8 {
            let p = Point2::new(
                lo.x1 + (hi.x1 - lo.x1) * i as f64 / 8.0,
                lo.x2 + (hi.x2 - lo.x2) * j as f64 / 8.0,
            );
            if locator.locate(p).is_some() && mesh.boundary_distance(p) >= clearance {
                cands.push(p);
            }
        }
    }
    if cands.len() <= DEFAULT_PROBE_COUNT {
        return cands;
    }
    let m = cands.len() - 1;
    (0..DEFAULT_PROBE_COUNT)
        .map(|k| cands[(k * m + (DEFAULT_PROBE_COUNT - 1) / 2) / (DEFAULT_PROBE_COUNT - 1)])
        .collect()
}

pub fn lewy_verify(
    map: &MappingField,
    sigma: &CoefficientField,
    options: &LewyOptions,
) -> Result<LewyReport> {
    if options.directions == 0 {
        return Err(Error::invalid("at least one direction is required"));
    }
    lewy_verify_directions(
        map,
        sigma,
        &half_circle_directions(options.directions),
        options,
    )
}

/// As [`lewy_verify`] with explicit unit directions; `options.directions` is ignored.
pub fn lewy_verify_directions(
    map: &MappingField,
    sigma: &CoefficientField,
    directions: &[[f64; 2]],
    options: &LewyOptions,
) -> Result<LewyReport> {
    if directions.is_empty() {
        return Err(Error::invalid("at least one direction is required"));
    }
    if !(options.margin >= 0.0) {
        return Err(Error::invalid("margin must be nonnegative"));
    }
    let mesh = map.mesh();
    require_elliptic(sigma, &centroids(mesh))?;
    let verdict = injectivity_check(map);
    if !verdict.injective {
        return Err(Error::Hypothesis(format!(
            "U is not injective ({} violations{})",
            verdict.violation_count,
            verdict
                .violations
                .first()
                .map_or(String::new(), |v| format!(", first: {v:?}"))
        )));
    }
    let inset = mesh.inset_triangles(options.margin);
    if inset.is_empty() {
        return Err(Error::invalid(format!(
            "no triangle lies at distance {} from the boundary",
            options.margin
        )));
    }

    let jac = jacobian_field(map);
    let min_abs_det = inset
        .iter()
        .map(|&t| jac[t].abs())
        .fold(f64::INFINITY, f64::min);
    let min_abs_grad: Vec<f64> = directions
        .iter()
        .map(|&xi| {
            let g = gradient_field(&map.directional(xi)).magnitudes();
            inset.iter().map(|&t| g[t]).fold(f64::INFINITY, f64::min)
        })
        .collect();

    let probe_points = match &options.probe_points {
        Some(p) => p.clone(),
        None => default_probe_points(mesh, options.margin),
    };
    let locator = PointLocator::new(mesh);
    let mut probes = Vec::with_capacity(probe_points.len());
    for &z0 in &probe_points {
        let r = match options.probe_radius {
            Some(r) => r,
            None => {
                let (t, bary) = locator.locate(z0).ok_or_else(|| {
                    Error::invalid(format!(
                        "probe point ({}, {}) is outside the mesh",
                        z0.x1, z0.x2
                    ))
                })?;
                let w0 = map.interpolate_in(t, bary);
                let d = mesh
                    .boundary_loops()
                    .iter()
                    .flatten()
                    .map(|&v| map.image(v).dist(w0))
                    .fold(f64::INFINITY, f64::min);
                DEFAULT_PROBE_FRACTION * d
            }
        };
        let pb = pullback_subdomain(map, z0, r)?;
        let verdicts = directions
            .iter()
            .map(|xi| {
                let trace: Vec<f64> = pb
                    .contour
                    .iter()
                    .map(|c| xi[0] * c.image.x1 + xi[1] * c.image.x2)
                    .collect();
                unimodality_check(&trace, options.tie_tolerance)
            })
            .collect::<Result<Vec<_>>>()?;
        probes.push(ProbeReport {
            z0,
            w0: pb.w0,
            r,
            submesh_triangles: pb.mesh.num_triangles(),
            contour_points: pb.contour.len(),
            all_unimodal: verdicts.iter().all(|v| v.unimodal),
            verdicts,
        });
    }

    let passes = min_abs_det > 0.0 && min_abs_grad.iter().all(|&g| g > 0.0);
    Ok(LewyReport {
        directions_tested: directions.len(),
        directions: directions.to_vec(),
        margin: options.margin,
        inset_triangles: inset.len(),
        min_abs_det,
        min_abs_grad,
        all_unimodal: probes.iter().all(|p| p.all_unimodal),
        probes,
        injective: true,
        passes,
    })
}
