//! Structured triangulations of disks, annuli and rectangles.
//!
//! Meshes are built from concentric rings (disk, annulus) or split squares
//! (rectangle). Every constructor goes through [`Mesh::new`], which checks
//! orientation, conformity and the boundary loops, so a `Mesh` value always
//! satisfies those invariants.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of vertices a generator may create.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

/// Triangles whose area falls below this multiple of `h^2` are rejected.
const DEGENERATE_AREA_FACTOR: f64 = 1e-14;

/// A point of the plane, also read as the complex number `x1 + i x2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }

    pub fn from_polar(center: Point2, r: f64, theta: f64) -> Self {
        Point2::new(center.x1 + r * theta.cos(), center.x2 + r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn norm_sq(self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x1 * rhs, self.x2 * rhs)
    }
}

/// Signed area of the triangle `(a, b, c)`; positive when counterclockwise.
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Signed area of a closed polygon (shoelace formula).
pub fn polygon_area(points: &[Point2]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += points[i].cross(points[(i + 1) % n]);
    }
    0.5 * acc
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// The analytic domain a mesh was generated from. Used to project new
/// boundary vertices back onto curved boundaries during refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Disk {
        center: Point2,
        radius: f64,
    },
    Annulus {
        center: Point2,
        r_in: f64,
        r_out: f64,
    },
    Rectangle {
        min: Point2,
        max: Point2,
    },
}

impl Shape {
    fn loop_circle(&self, loop_index: usize) -> Option<(Point2, f64)> {
        match (*self, loop_index) {
            (Shape::Disk { center, radius }, 0) => Some((center, radius)),
            (Shape::Annulus { center, r_out, .. }, 0) => Some((center, r_out)),
            (Shape::Annulus { center, r_in, .. }, 1) => Some((center, r_in)),
            _ => None,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Shape::Disk { center, radius } => p.dist(center) <= radius,
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = p.dist(center);
                r >= r_in && r <= r_out
            }
            Shape::Rectangle { min, max } => {
                p.x1 >= min.x1 && p.x1 <= max.x1 && p.x2 >= min.x2 && p.x2 <= max.x2
            }
        }
    }
}

/// A conforming, counterclockwise-oriented triangulation with ordered
/// boundary loops (outer loop counterclockwise, holes clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<Vec<usize>>,
    h: f64,
    shape: Option<Shape>,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<Vec<usize>>,
        h: f64,
    ) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            triangles,
            boundary,
            h,
            shape: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.corners(t);
        Point2::new((a.x1 + b.x1 + c.x1) / 3.0, (a.x2 + b.x2 + c.x2) / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn min_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Undirected edges, each listed once with sorted endpoints, in order of
    /// first appearance.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    /// `V - E + T`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Interior vertices are those not on any boundary loop.
    pub fn boundary_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for lp in &self.boundary {
            for &v in lp {
                flags[v] = true;
            }
        }
        flags
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| self.vertices[a].dist(self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Ordered trace of one boundary loop, in loop orientation.
    pub fn boundary_trace(&self, loop_index: usize) -> Result<Vec<(usize, Point2)>> {
        let lp = self.boundary.get(loop_index).ok_or_else(|| {
            Error::invalid(format!(
                "boundary loop {loop_index} out of range (mesh has {})",
                self.boundary.len()
            ))
        })?;
        Ok(lp.iter().map(|&v| (v, self.vertices[v])).collect())
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        let mut best = f64::INFINITY;
        for lp in &self.boundary {
            let n = lp.len();
            for i in 0..n {
                let a = self.vertices[lp[i]];
                let b = self.vertices[lp[(i + 1) % n]];
                best = best.min(segment_distance(p, a, b));
            }
        }
        best
    }

    /// Triangles whose centroid lies at distance at least `margin` from the boundary.
    pub fn inset_triangles(&self, margin: f64) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.boundary_distance(self.centroid(t)) >= margin)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid("mesh size h must be positive and finite"));
        }
        let nv = self.vertices.len();
        if let Some(i) = self.vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("vertex {i} is not finite")));
        }
        if self.triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        let min_area = DEGENERATE_AREA_FACTOR * self.h * self.h;
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::invalid(format!(
                    "triangle {t} has an out-of-range vertex"
                )));
            }
            let area = self.area(t);
            if !(area > min_area) {
                return Err(Error::invalid(format!(
                    "triangle {t} is degenerate or inverted (signed area {area:e})"
                )));
            }
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::invalid(format!(
                        "edge ({}, {}) is used twice with the same orientation",
                        e.0, e.1
                    )));
                }
            }
        }
        // A directed edge without its reverse lies on exactly one triangle.
        let mut boundary_edges: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut count = 0usize;
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                boundary_edges.entry(a).or_default().push(b);
                count += 1;
            }
        }
        let mut covered = 0usize;
        for (l, lp) in self.boundary.iter().enumerate() {
            if lp.len() < 3 {
                return Err(Error::invalid(format!(
                    "boundary loop {l} has fewer than 3 vertices"
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for i in 0..lp.len() {
                let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
                if a >= nv || !seen.insert(a) {
                    return Err(Error::invalid(format!("boundary loop {l} is not simple")));
                }
                let ok = boundary_edges.get(&a).is_some_and(|next| next.contains(&b));
                if !ok {
                    return Err(Error::invalid(format!(
                        "boundary loop {l}: ({a}, {b}) is not a boundary edge in loop orientation"
                    )));
                }
            }
            covered += lp.len();
        }
        if covered != count {
            return Err(Error::invalid(format!(
                "boundary loops cover {covered} edges but the triangulation has {count}"
            )));
        }
        Ok(())
    }
}

fn check_cap(requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        return Err(Error::ResourceLimit {
            what: "mesh vertices",
            requested,
            cap,
        });
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Connects two concentric rings of `na` and `nb` vertices (both starting at
/// angle 0) with `na + nb` triangles. Integer comparisons keep the pattern
/// exactly periodic.
fn zip_rings(a0: usize, na: usize, b0: usize, nb: usize, out: &mut Vec<[usize; 3]>) {
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let advance_a = if i == na {
            false
        } else if j == nb {
            true
        } else {
            (i + 1) * nb < (j + 1) * na
        };
        let ai = a0 + i % na;
        let bj = b0 + j % nb;
        if advance_a {
            out.push([ai, bj, a0 + (i + 1) % na]);
            i += 1;
        } else {
            out.push([ai, bj, b0 + (j + 1) % nb]);
            j += 1;
        }
    }
}

fn ring(center: Point2, r: f64, n: usize, out: &mut Vec<Point2>) {
    for i in 0..n {
        out.push(Point2::from_polar(
            center,
            r,
            2.0 * PI * i as f64 / n as f64,
        ));
    }
}

pub fn generate_disk(center: Point2, radius: f64, h: f64) -> Result<Mesh> {
    generate_disk_capped(center, radius, h, DEFAULT_VERTEX_CAP)
}

/// Hexagonal ring mesh: ring `k` of `n = ceil(radius / h)` carries `6k` vertices.
pub fn generate_disk_capped(center: Point2, radius: f64, h: f64, cap: usize) -> Result<Mesh> {
    check_positive("radius", radius)?;
    check_positive("h", h)?;
    if h >= radius {
        return Err(Error::invalid(format!(
            "h = {h} must be smaller than the radius {radius}"
        )));
    }
    let n = (radius / h).ceil() as usize;
    check_cap(1 + 3 * n * (n + 1), cap)?;

    let mut vertices = vec![center];
    let mut triangles = Vec::with_capacity(6 * n * n);
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    ring(center, radius / n as f64, 6, &mut vertices);
    let mut prev_start = 1;
    for k in 2..=n {
        let start = vertices.len();
        let r = if k == n {
            radius
        } else {
            radius * k as f64 / n as f64
        };
        ring(center, r, 6 * k, &mut vertices);
        zip_rings(prev_start, 6 * (k - 1), start, 6 * k, &mut triangles);
        prev_start = start;
    }
    let outer: Vec<usize> = (prev_start..vertices.len()).collect();
    Ok(Mesh::new(vertices, triangles, vec![outer], h)?.with_shape(Shape::Disk { center, radius }))
}

pub fn generate_annulus(center: Point2, r_in: f64, r_out: f64, h: f64) -> Result<Mesh> {
    generate_annulus_capped(center, r_in, r_out, h, DEFAULT_VERTEX_CAP)
}

/// Concentric rings between `r_in` and `r_out`, each with about `2 pi r / h` vertices.
pub fn generate_annulus_capped(
    center: Point2,
    r_in: f64,
    r_out: f64,
    h: f64,
    cap: usize,
) -> Result<Mesh> {
    check_positive("r_in", r_in)?;
    check_positive("r_out", r_out)?;
    check_positive("h", h)?;
    if r_in >= r_out {
        return Err(Error::invalid(format!(
            "need r_in < r_out, got {r_in} >= {r_out}"
        )));
    }
    if h >= r_out - r_in {
        return Err(Error::invalid(format!(
            "h = {h} must be smaller than the annulus width {}",
            r_out - r_in
        )));
    }
    let nr = ((r_out - r_in) / h).ceil() as usize;
    let radii: Vec<f64> = (0..=nr)
        .map(|k| match k {
            0 => r_in,
            k if k == nr => r_out,
            k => r_in + (r_out - r_in) * k as f64 / nr as f64,
        })
        .collect();
    let counts: Vec<usize> = radii
        .iter()
        .map(|r| ((2.0 * PI * r / h).ceil() as usize).max(6))
        .collect();
    check_cap(counts.iter().sum(), cap)?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut starts = Vec::with_capacity(radii.len());
    for (k, (&r, &m)) in radii.iter().zip(&counts).enumerate() {
        let start = vertices.len();
        ring(center, r, m, &mut vertices);
        if k > 0 {
            zip_rings(starts[k - 1], counts[k - 1], start, m, &mut triangles);
        }
        starts.push(start);
    }
    let outer: Vec<usize> = (starts[nr]..vertices.len()).collect();
    let inner: Vec<usize> = (0..counts[0]).rev().collect();
    Ok(
        Mesh::new(vertices, triangles, vec![outer, inner], h)?.with_shape(Shape::Annulus {
            center,
            r_in,
            r_out,
        }),
    )
}

pub fn generate_rectangle(min: Point2, max: Point2, h: f64) -> Result<Mesh> {
    generate_rectangle_capped(min, max, h, DEFAULT_VERTEX_CAP)
}

/// Squares split along their south-west to north-east diagonal.
pub fn generate_rectangle_capped(min: Point2, max: Point2, h: f64, cap: usize) -> Result<Mesh> {
    check_positive("h", h)?;
    let (w, ht) = (max.x1 - min.x1, max.x2 - min.x2);
    check_positive("rectangle width", w)?;
    check_positive("rectangle height", ht)?;
    if h >= w.min(ht) {
        return Err(Error::invalid(
            "h must be smaller than both rectangle sides",
        ));
    }
    let nx = (w / h).ceil() as usize;
    let ny = (ht / h).ceil() as usize;
    check_cap((nx + 1) * (ny + 1), cap)?;
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx {
                max.x1
            } else {
                min.x1 + w * i as f64 / nx as f64
            };
            let y = if j == ny {
                max.x2
            } else {
                min.x2 + ht * j as f64 / ny as f64
            };
            vertices.push(Point2::new(x, y));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut outer = Vec::with_capacity(2 * (nx + ny));
    outer.extend((0..nx).map(|i| idx(i, 0)));
    outer.extend((0..ny).map(|j| idx(nx, j)));
    outer.extend((1..=nx).rev().map(|i| idx(i, ny)));
    outer.extend((1..=ny).rev().map(|j| idx(0, j)));
    Ok(Mesh::new(vertices, triangles, vec![outer], h)?.with_shape(Shape::Rectangle { min, max }))
}

pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    refine_capped(mesh, DEFAULT_VERTEX_CAP)
}

/// Splits every triangle into four through its edge midpoints. Midpoints of
/// boundary edges on a curved generator boundary are projected onto it.
pub fn refine_capped(mesh: &Mesh, cap: usize) -> Result<Mesh> {
    let edges = mesh.edges();
    check_cap(mesh.vertices.len() + edges.len(), cap)?;

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
    for &(a, b) in &edges {
        midpoint.insert((a, b), vertices.len());
        vertices.push(vertices[a].lerp(vertices[b], 0.5));
    }
    let mid = |a: usize, b: usize| midpoint[&(a.min(b), a.max(b))];

    let mut boundary = Vec::with_capacity(mesh.boundary.len());
    for (l, lp) in mesh.boundary.iter().enumerate() {
        let circle = mesh.shape.and_then(|s| s.loop_circle(l));
        let mut refined = Vec::with_capacity(2 * lp.len());
        for i in 0..lp.len() {
            let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
            let m = mid(a, b);
            if let Some((c, r)) = circle {
                let d = vertices[m] - c;
                vertices[m] = c + d * (r / d.norm());
            }
            refined.push(a);
            refined.push(m);
        }
        boundary.push(refined);
    }

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut out = Mesh::new(vertices, triangles, boundary, mesh.h / 2.0)?;
    out.shape = mesh.shape;
    Ok(out)
}

/// Uniform bucket grid over triangle bounding boxes for point location.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    min: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &mesh.vertices {
            min = Point2::new(min.x1.min(p.x1), min.x2.min(p.x2));
            max = Point2::new(max.x1.max(p.x1), max.x2.max(p.x2));
        }
        let cell = mesh.max_edge_length().max(f64::MIN_POSITIVE);
        let nx = (((max.x1 - min.x1) / cell).floor() as usize + 1).max(1);
        let ny = (((max.x2 - min.x2) / cell).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corners(t);
            let (i0, j0) = Self::cell_of(
                min,
                cell,
                nx,
                ny,
                Point2::new(a.x1.min(b.x1).min(c.x1), a.x2.min(b.x2).min(c.x2)),
            );
            let (i1, j1) = Self::cell_of(
                min,
                cell,
                nx,
                ny,
                Point2::new(a.x1.max(b.x1).max(c.x1), a.x2.max(b.x2).max(c.x2)),
            );
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        PointLocator {
            mesh,
            min,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(min: Point2, cell: f64, nx: usize, ny: usize, p: Point2) -> (usize, usize) {
        let i = ((p.x1 - min.x1) / cell).floor().max(0.0) as usize;
        let j = ((p.x2 - min.x2) / cell).floor().max(0.0) as usize;
        (i.min(nx - 1), j.min(ny - 1))
    }

    /// Containing triangle and barycentric coordinates, if `p` is in the mesh.
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        let (i, j) = Self::cell_of(self.min, self.cell, self.nx, self.ny, p);
        let tol = -1e-12;
        for &t in &self.buckets[j * self.nx + i] {
            let [a, b, c] = self.mesh.corners(t);
            let area = signed_area(a, b, c);
            let l0 = signed_area(p, b, c) / area;
            let l1 = signed_area(a, p, c) / area;
            let l2 = 1.0 - l0 - l1;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((t, [l0, l1, l2]));
            }
        }
        None
    }
}
