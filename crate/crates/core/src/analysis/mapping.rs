//! Jacobians and a discrete injectivity test for piecewise-linear maps.

use serde::Serialize;

use crate::fem::{gradient_field, MappingField};
use crate::mesh::{signed_area, Point2};

/// Violations listed in a verdict beyond this count are only counted.
pub const MAX_LISTED_VIOLATIONS: usize = 1000;

/// Per-triangle `det DU`, rows `grad u1` and `grad u2`.
pub fn jacobian_field(map: &MappingField) -> Vec<f64> {
    let (g1, g2) = (gradient_field(&map.u1), gradient_field(&map.u2));
    g1.gradients()
        .iter()
        .zip(g2.gradients())
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two boundary edges whose images meet. Edges are named by loop and
    /// position of their first vertex in the loop.
    BoundaryCrossing {
        loop_a: usize,
        edge_a: usize,
        loop_b: usize,
        edge_b: usize,
    },
    /// A triangle whose image has the minority orientation or zero area.
    Orientation { triangle: usize, signed_area: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityVerdict {
    pub injective: bool,
    /// `+1` or `-1` for the majority image orientation, `0` if every image is flat.
    pub orientation: i8,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

struct Segment {
    loop_index: usize,
    edge: usize,
    len: usize,
    a: Point2,
    b: Point2,
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let l2 = d.norm_sq();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / l2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn segments_distance(p: &Segment, q: &Segment) -> f64 {
    let (d1, d2) = (orient(p.a, p.b, q.a), orient(p.a, p.b, q.b));
    let (d3, d4) = (orient(q.a, q.b, p.a), orient(q.a, q.b, p.b));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(p.a, q.a, q.b)
        .min(point_segment_distance(p.b, q.a, q.b))
        .min(point_segment_distance(q.a, p.a, p.b))
        .min(point_segment_distance(q.b, p.a, p.b))
}

/// Edges sharing a vertex in the same loop. Returns the shared-vertex
/// configuration `(other_end_of_p, shared, other_end_of_q)` when adjacent.
fn adjacency(p: &Segment, q: &Segment) -> Option<(Point2, Point2, Point2)> {
    if p.loop_index != q.loop_index {
        return None;
    }
    if (p.edge + 1) % p.len == q.edge {
        Some((p.a, p.b, q.b))
    } else if (q.edge + 1) % q.len == p.edge {
        Some((q.a, q.b, p.b))
    } else {
        None
    }
}

/// Sufficient discrete test: the image of every boundary loop is a simple
/// polygon, loops do not meet, and all triangle images share one strict
/// orientation.
pub fn injectivity_check(map: &MappingField) -> InjectivityVerdict {
    let mesh = map.mesh();
    let mut violations = Vec::new();
    let mut count = 0usize;
    let mut push = |v: Violation, list: &mut Vec<Violation>| {
        count += 1;
        if list.len() < MAX_LISTED_VIOLATIONS {
            list.push(v);
        }
    };

    let mut segs = Vec::new();
    let mut scale: f64 = 0.0;
    for (li, lp) in mesh.boundary_loops().iter().enumerate() {
        for (k, &v) in lp.iter().enumerate() {
            let (a, b) = (map.image(v), map.image(lp[(k + 1) % lp.len()]));
            scale = scale.max(a.x1.abs()).max(a.x2.abs());
            segs.push(Segment {
                loop_index: li,
                edge: k,
                len: lp.len(),
                a,
                b,
            });
        }
    }
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    // sweep over segments sorted by their left end
    let lo = |s: &Segment| s.a.x1.min(s.b.x1);
    let hi = |s: &Segment| s.a.x1.max(s.b.x1);
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&i, &j| lo(&segs[i]).total_cmp(&lo(&segs[j])).then(i.cmp(&j)));
    let mut crossings = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let p = &segs[i];
        for &j in &order[pos + 1..] {
            let q = &segs[j];
            if lo(q) > hi(p) + tol {
                break;
            }
            let meets = match adjacency(p, q) {
                Some((x, s, y)) => {
                    // adjacent edges may only share their common vertex
                    let (u, w) = (x - s, y - s);
                    let folded =
                        orient(s, x, y).abs() <= tol * (u.norm() + w.norm()) && u.dot(w) > 0.0;
                    folded || u.norm() <= tol || w.norm() <= tol
                }
                None => segments_distance(p, q) <= tol,
            };
            if meets {
                let (a, b) = if i < j { (p, q) } else { (q, p) };
                crossings.push((a.loop_index, a.edge, b.loop_index, b.edge));
            }
        }
    }
    crossings.sort_unstable();
    for (loop_a, edge_a, loop_b, edge_b) in crossings {
        push(
            Violation::BoundaryCrossing {
                loop_a,
                edge_a,
                loop_b,
                edge_b,
            },
            &mut violations,
        );
    }

    let areas: Vec<f64> = mesh
        .triangles()
        .iter()
        .map(|t| signed_area(map.image(t[0]), map.image(t[1]), map.image(t[2])))
        .collect();
    let pos = areas.iter().filter(|&&a| a > 0.0).count();
    let neg = areas.iter().filter(|&&a| a < 0.0).count();
    let orientation: i8 = if pos == 0 && neg == 0 {
        0
    } else if pos >= neg {
        1
    } else {
        -1
    };
    for (t, &a) in areas.iter().enumerate() {
        if a * orientation as f64 <= 0.0 {
            push(
                Violation::Orientation {
                    triangle: t,
                    signed_area: a,
                },
                &mut violations,
            );
        }
    }
    InjectivityVerdict {
        injective: count == 0,
        orientation,
        violation_count: count,
        violations,
    }
}
