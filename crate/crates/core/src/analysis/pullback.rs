//! Preimages `G = U^{-1}(B_r(w0))` of small disks under a piecewise-linear map.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::MappingField;
use crate::mesh::{polygon_area, Mesh, Point2, PointLocator};

/// A point where the exact preimage of the circle `|w - w0| = r` crosses a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub point: Point2,
    pub image: Point2,
    /// Parent-mesh edge `(a, b)` with `|U(a) - w0| <= r < |U(b) - w0|`.
    pub edge: [usize; 2],
    /// Position along the edge from `a`.
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Pullback {
    /// Triangles of the parent whose vertex images all lie in the closed disk.
    pub mesh: Arc<Mesh>,
    /// Submesh vertex index to parent vertex index.
    pub parent_vertices: Vec<usize>,
    pub parent_triangles: Vec<usize>,
    pub z0: Point2,
    pub w0: Point2,
    pub r: f64,
    /// Counterclockwise loop around `z0` on which the piecewise-linear map
    /// takes values exactly on the circle.
    pub contour: Vec<ContourPoint>,
}

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

fn edge_triangles(mesh: &Mesh) -> HashMap<EdgeKey, Vec<usize>> {
    let mut m: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            m.entry(key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
        }
    }
    m
}

fn component(
    mesh: &Mesh,
    adj: &HashMap<EdgeKey, Vec<usize>>,
    keep: &[bool],
    seed: usize,
) -> Vec<bool> {
    let mut seen = vec![false; keep.len()];
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(t) = queue.pop_front() {
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            for &s in &adj[&key(tri[k], tri[(k + 1) % 3])] {
                if keep[s] && !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }
    seen
}

/// Splits the selected triangles around `v` into groups connected through
/// edges incident to `v`.
fn fans(
    mesh: &Mesh,
    adj: &HashMap<EdgeKey, Vec<usize>>,
    around: &[usize],
    sel: &[bool],
    v: usize,
) -> Vec<Vec<usize>> {
    let mut assigned: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &t0 in around.iter().filter(|&&t| sel[t]) {
        if assigned.contains_key(&t0) {
            continue;
        }
        let id = out.len();
        let mut fan = vec![t0];
        assigned.insert(t0, id);
        let mut stack = vec![t0];
        while let Some(t) = stack.pop() {
            for &w in &mesh.triangles()[t] {
                if w == v {
                    continue;
                }
                for &s in &adj[&key(v, w)] {
                    if sel[s] && !assigned.contains_key(&s) {
                        assigned.insert(s, id);
                        fan.push(s);
                        stack.push(s);
                    }
                }
            }
        }
        out.push(fan);
    }
    out
}

/// Builds the submesh of triangles whose vertex images lie in the closed disk
/// `|w - U(z0)| <= r`, keeping the edge-connected component around `z0` and
/// splitting vertices where it touches itself, plus the exact contour.
pub fn pullback_subdomain(map: &MappingField, z0: Point2, r: f64) -> Result<Pullback> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let mesh = map.mesh();
    let locator = PointLocator::new(mesh);
    let (t0, bary) = locator.locate(z0).ok_or_else(|| {
        Error::invalid(format!("z0 = ({}, {}) is outside the mesh", z0.x1, z0.x2))
    })?;
    let w0 = map.interpolate_in(t0, bary);
    for lp in mesh.boundary_loops() {
        for &v in lp {
            let d = map.image(v).dist(w0);
            if d <= r {
                return Err(Error::invalid(format!(
                    "disk of radius {r} around U(z0) is not inside the image: boundary vertex {v} maps at distance {d:.6}"
                )));
            }
        }
    }

    let nv = mesh.num_vertices();
    let inside: Vec<bool> = (0..nv).map(|v| map.image(v).dist(w0) <= r).collect();
    let cand: Vec<bool> = mesh
        .triangles()
        .iter()
        .map(|t| t.iter().all(|&v| inside[v]))
        .collect();
    let adj = edge_triangles(mesh);

    let seed = if cand[t0] {
        t0
    } else {
        let touching: Vec<usize> = mesh.triangles()[t0]
            .iter()
            .flat_map(|&v| {
                (0..mesh.num_triangles()).filter(move |&t| mesh.triangles()[t].contains(&v))
            })
            .filter(|&t| cand[t])
            .collect();
        *touching
            .iter()
            .min_by(|&&a, &&b| {
                mesh.centroid(a)
                    .dist(z0)
                    .total_cmp(&mesh.centroid(b).dist(z0))
                    .then(a.cmp(&b))
            })
            .ok_or_else(|| {
                Error::invalid(format!(
                    "empty submesh: radius {r} is too small for the mesh resolution"
                ))
            })?
    };

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }

    let mut sel = component(mesh, &adj, &cand, seed);
    loop {
        let mut changed = false;
        for v in 0..nv {
            if !inside[v] {
                continue;
            }
            let groups = fans(mesh, &adj, &incident[v], &sel, v);
            if groups.len() > 1 {
                let keep = groups
                    .iter()
                    .position(|g| g.contains(&seed))
                    .unwrap_or_else(|| {
                        let mut best = 0;
                        for (i, g) in groups.iter().enumerate() {
                            if g.len() > groups[best].len() {
                                best = i;
                            }
                        }
                        best
                    });
                for (i, g) in groups.iter().enumerate() {
                    if i != keep {
                        for &t in g {
                            sel[t] = false;
                        }
                    }
                }
                sel = component(mesh, &adj, &sel, seed);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let parent_triangles: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| sel[t]).collect();
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in &parent_triangles {
        for &v in &mesh.triangles()[t] {
            local.insert(v, 0);
        }
    }
    let parent_vertices: Vec<usize> = local.keys().copied().collect();
    for (i, v) in parent_vertices.iter().enumerate() {
        local.insert(*v, i);
    }
    let triangles: Vec<[usize; 3]> = parent_triangles
        .iter()
        .map(|&t| mesh.triangles()[t].map(|v| local[&v]))
        .collect();
    let vertices: Vec<Point2> = parent_vertices
        .iter()
        .map(|&v| mesh.vertices()[v])
        .collect();
    let boundary = boundary_loops(&vertices, &triangles)?;
    let sub = Mesh::new(vertices, triangles, boundary, mesh.h())?;

    let contour = level_contour(map, w0, r, z0)?;
    Ok(Pullback {
        mesh: Arc::new(sub),
        parent_vertices,
        parent_triangles,
        z0,
        w0,
        r,
        contour,
    })
}

/// Chains one-sided directed edges into loops, largest enclosed area first.
fn boundary_loops(vertices: &[Point2], triangles: &[[usize; 3]]) -> Result<Vec<Vec<usize>>> {
    let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            directed.insert((tri[k], tri[(k + 1) % 3]), ());
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) && next.insert(a, b).is_some() {
            return Err(Error::Numerical(format!(
                "submesh boundary is not a manifold at vertex {a}"
            )));
        }
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().next() {
        let mut lp = vec![start];
        let mut cur = next.remove(&start).expect("present");
        while cur != start {
            lp.push(cur);
            cur = next
                .remove(&cur)
                .ok_or_else(|| Error::Numerical("submesh boundary does not close".into()))?;
        }
        loops.push(lp);
    }
    let area = |lp: &Vec<usize>| polygon_area(&lp.iter().map(|&v| vertices[v]).collect::<Vec<_>>());
    loops.sort_by(|a, b| area(b).total_cmp(&area(a)));
    Ok(loops)
}

/// Exact preimage of the circle under the piecewise-linear map: the loop
/// around `z0` formed by edge crossings, counterclockwise.
fn level_contour(map: &MappingField, w0: Point2, r: f64, z0: Point2) -> Result<Vec<ContourPoint>> {
    let mesh = map.mesh();
    let inside: Vec<bool> = (0..mesh.num_vertices())
        .map(|v| map.image(v).dist(w0) <= r)
        .collect();
    let mut crossings: HashMap<EdgeKey, ContourPoint> = HashMap::new();
    let mut links: HashMap<EdgeKey, Vec<EdgeKey>> = HashMap::new();
    for tri in mesh.triangles() {
        let cut: Vec<EdgeKey> = (0..3)
            .map(|k| (tri[k], tri[(k + 1) % 3]))
            .filter(|&(a, b)| inside[a] != inside[b])
            .map(|(a, b)| key(a, b))
            .collect();
        if cut.is_empty() {
            continue;
        }
        debug_assert_eq!(cut.len(), 2);
        for &e in &cut {
            crossings.entry(e).or_insert_with(|| {
                let (a, b) = if inside[e.0] { e } else { (e.1, e.0) };
                crossing(map, w0, r, a, b)
            });
        }
        links.entry(cut[0]).or_default().push(cut[1]);
        links.entry(cut[1]).or_default().push(cut[0]);
    }

    let mut visited: HashMap<EdgeKey, bool> = HashMap::new();
    let mut starts: Vec<EdgeKey> = links.keys().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if visited.contains_key(&start) {
            continue;
        }
        let mut lp = vec![start];
        visited.insert(start, true);
        let mut prev = start;
        let mut cur = links[&start][0];
        while cur != start {
            visited.insert(cur, true);
            lp.push(cur);
            let ns = &links[&cur];
            let nxt = if ns[0] != prev { ns[0] } else { ns[1] };
            prev = cur;
            cur = nxt;
        }
        let mut pts: Vec<ContourPoint> = lp.iter().map(|e| crossings[e]).collect();
        let poly: Vec<Point2> = pts.iter().map(|c| c.point).collect();
        if winds_around(&poly, z0) {
            if polygon_area(&poly) < 0.0 {
                pts.reverse();
            }
            return Ok(pts);
        }
    }
    Err(Error::Numerical(
        "no contour of the pullback encloses z0".into(),
    ))
}

fn crossing(map: &MappingField, w0: Point2, r: f64, a: usize, b: usize) -> ContourPoint {
    let (pa, pb) = (map.image(a), map.image(b));
    let (q, d) = (pa - w0, pb - pa);
    // |q + t d|^2 = r^2, with |q| <= r < |q + d|
    let (aa, bb, cc) = (d.norm_sq(), q.dot(d), q.norm_sq() - r * r);
    let disc = (bb * bb - aa * cc).max(0.0).sqrt();
    // larger root, in a cancellation-free form
    let t = if bb <= 0.0 {
        (disc - bb) / aa
    } else {
        -cc / (disc + bb)
    };
    let t = t.clamp(0.0, 1.0);
    let (va, vb) = (mesh_point(map, a), mesh_point(map, b));
    ContourPoint {
        point: va.lerp(vb, t),
        image: pa.lerp(pb, t),
        edge: [a, b],
        t,
    }
}

fn mesh_point(map: &MappingField, v: usize) -> Point2 {
    map.mesh().vertices()[v]
}

fn winds_around(poly: &[Point2], p: Point2) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a.x2 > p.x2) != (b.x2 > p.x2) {
            let x = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
            if p.x1 < x {
                inside = !inside;
            }
        }
    }
    inside
}
