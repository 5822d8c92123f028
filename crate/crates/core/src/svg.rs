//! Deterministic SVG plots: contour lines, gradient quivers and a diverging
//! heat map for per-triangle values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{ScalarField, TriangleGradientField};
use crate::mesh::{Mesh, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Canvas width in pixels; the height follows the aspect ratio.
    pub width: f64,
    pub padding: f64,
    /// Number of contour levels.
    pub levels: usize,
    /// Upper bound on quiver arrows; triangles are subsampled by a fixed stride.
    pub max_arrows: usize,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 600.0,
            padding: 20.0,
            levels: 16,
            max_arrows: 400,
        }
    }
}

struct Frame {
    min: Point2,
    scale: f64,
    height: f64,
    pad: f64,
}

impl Frame {
    fn new(mesh: &Mesh, opts: &SvgOptions) -> Result<Frame> {
        if !(opts.width > 2.0 * opts.padding && opts.padding >= 0.0) {
            return Err(Error::invalid("SVG width must exceed twice the padding"));
        }
        let (mut lo, mut hi) = (mesh.vertices()[0], mesh.vertices()[0]);
        for p in mesh.vertices() {
            lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        let span = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(f64::MIN_POSITIVE);
        let scale = (opts.width - 2.0 * opts.padding) / span;
        Ok(Frame {
            min: lo,
            scale,
            height: (hi.x2 - lo.x2) * scale + 2.0 * opts.padding,
            pad: opts.padding,
        })
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (
            self.pad + (p.x1 - self.min.x1) * self.scale,
            self.height - self.pad - (p.x2 - self.min.x2) * self.scale,
        )
    }

    fn header(&self, width: f64) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            width, self.height, width, self.height
        )
    }
}

fn outline(mesh: &Mesh, frame: &Frame, out: &mut String) {
    for lp in mesh.boundary_loops() {
        out.push_str("<polygon fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"");
        for (k, &v) in lp.iter().enumerate() {
            let (x, y) = frame.map(mesh.vertices()[v]);
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.2},{y:.2}");
        }
        out.push_str("\"/>\n");
    }
}

fn hex(c: [f64; 3]) -> String {
    let b = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", b(c[0]), b(c[1]), b(c[2]))
}

/// Sequential blue-green-yellow ramp for `s` in `[0, 1]`.
fn ramp(s: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 4] = [
        [0.27, 0.00, 0.33],
        [0.19, 0.41, 0.56],
        [0.21, 0.72, 0.47],
        [0.99, 0.91, 0.14],
    ];
    let x = s.clamp(0.0, 1.0) * 3.0;
    let i = (x.floor() as usize).min(2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    [
        a[0] + f * (b[0] - a[0]),
        a[1] + f * (b[1] - a[1]),
        a[2] + f * (b[2] - a[2]),
    ]
}

/// Blue for negative, white at 0, red for positive; `s` in `[-1, 1]`.
fn diverging(s: f64) -> [f64; 3] {
    let s = s.clamp(-1.0, 1.0);
    if s >= 0.0 {
        [1.0, 1.0 - 0.8 * s, 1.0 - 0.8 * s]
    } else {
        [1.0 + 0.8 * s, 1.0 + 0.8 * s, 1.0]
    }
}

/// Level sets of a piecewise-linear field, one path per level, at
/// `min + (k + 1/2)(max - min)/levels`.
pub fn contour_svg(field: &ScalarField, opts: &SvgOptions) -> Result<String> {
    if opts.levels == 0 {
        return Err(Error::invalid("contour plot needs at least one level"));
    }
    let mesh = field.mesh();
    let frame = Frame::new(mesh, opts)?;
    let mut out = frame.header(opts.width);
    let (lo, hi) = field.min_max();
    let vals = field.values();
    for k in 0..opts.levels {
        let level = lo + (k as f64 + 0.5) * (hi - lo) / opts.levels as f64;
        let color = hex(ramp((k as f64 + 0.5) / opts.levels as f64));
        let mut d = String::new();
        for tri in mesh.triangles() {
            let mut pts = Vec::with_capacity(2);
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let (va, vb) = (vals[a], vals[b]);
                if (va > level) != (vb > level) {
                    let t = (level - va) / (vb - va);
                    pts.push(mesh.vertices()[a].lerp(mesh.vertices()[b], t));
                }
            }
            if pts.len() == 2 {
                let ((x0, y0), (x1, y1)) = (frame.map(pts[0]), frame.map(pts[1]));
                let _ = write!(d, "M{x0:.2} {y0:.2}L{x1:.2} {y1:.2}");
            }
        }
        if !d.is_empty() {
            let _ = writeln!(
                out,
                "<path fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" d=\"{d}\"/>"
            );
        }
    }
    outline(mesh, &frame, &mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Arrows along per-triangle gradients at a stride of the triangle list,
/// scaled so the longest arrow spans about two mesh widths.
pub fn quiver_svg(grad: &TriangleGradientField, opts: &SvgOptions) -> Result<String> {
    if opts.max_arrows == 0 {
        return Err(Error::invalid("quiver plot needs at least one arrow"));
    }
    let mesh = grad.mesh();
    let frame = Frame::new(mesh, opts)?;
    let mut out = frame.header(opts.width);
    let stride = mesh.num_triangles().div_ceil(opts.max_arrows).max(1);
    let gmax = grad.magnitudes().into_iter().fold(0.0, f64::max);
    let len = 2.0 * mesh.h() * stride.isqrt().max(1) as f64;
    out.push_str("<g stroke=\"#1f3b73\" stroke-width=\"1\">\n");
    for t in (0..mesh.num_triangles()).step_by(stride) {
        let g = grad.gradients()[t];
        let c = mesh.centroid(t);
        let s = if gmax > 0.0 { len / gmax } else { 0.0 };
        let tip = c + Point2::new(g[0] * s, g[1] * s);
        let ((x0, y0), (x1, y1)) = (frame.map(c), frame.map(tip));
        let _ = writeln!(
            out,
            "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\"/>"
        );
        let (dx, dy) = (x1 - x0, y1 - y0);
        let l = dx.hypot(dy);
        if l > 1e-9 {
            let (ux, uy) = (dx / l, dy / l);
            let head = (0.3 * l).min(6.0);
            let (ax, ay) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
            let (bx, by) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" points=\"{ax:.2},{ay:.2} {x1:.2},{y1:.2} {bx:.2},{by:.2}\"/>"
            );
        }
    }
    out.push_str("</g>\n");
    outline(mesh, &frame, &mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Filled triangles colored by `values` on a diverging scale centered at 0
/// and normalized by `max |value|`.
pub fn heatmap_svg(mesh: &Mesh, values: &[f64], opts: &SvgOptions) -> Result<String> {
    if values.len() != mesh.num_triangles() {
        return Err(Error::invalid("heat map needs one value per triangle"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("heat map values must be finite"));
    }
    let frame = Frame::new(mesh, opts)?;
    let mut out = frame.header(opts.width);
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (t, &v) in values.iter().enumerate() {
        let s = if vmax > 0.0 { v / vmax } else { 0.0 };
        let color = hex(diverging(s));
        let [a, b, c] = mesh.corners(t).map(|p| frame.map(p));
        let _ = writeln!(
            out,
            "<polygon fill=\"{color}\" stroke=\"{color}\" stroke-width=\"0.3\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\"/>",
            a.0, a.1, b.0, b.1, c.0, c.1
        );
    }
    outline(mesh, &frame, &mut out);
    let _ = writeln!(
        out,
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"monospace\" font-size=\"12\">max |value| = {vmax:.4e}</text>",
        frame.pad,
        frame.pad * 0.75
    );
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::gradient_field;
    use crate::mesh::generate_disk;
    use std::sync::Arc;

    fn field() -> ScalarField {
        let mesh = Arc::new(generate_disk(Point2::ORIGIN, 1.0, 0.1).unwrap());
        ScalarField::interpolate(mesh, |p| Ok(p.x1 * p.x1 - p.x2 * p.x2)).unwrap()
    }

    #[test]
    fn contour_output_is_deterministic() {
        let f = field();
        let a = contour_svg(&f, &SvgOptions::default()).unwrap();
        let b = contour_svg(&f, &SvgOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<path").count(), 16);
        assert!(contour_svg(
            &f,
            &SvgOptions {
                levels: 0,
                ..SvgOptions::default()
            }
        )
        .is_err());
    }

    #[test]
    fn quiver_respects_arrow_cap() {
        let f = field();
        let opts = SvgOptions {
            max_arrows: 50,
            ..SvgOptions::default()
        };
        let s = quiver_svg(&gradient_field(&f), &opts).unwrap();
        assert!(s.matches("<line").count() <= 50);
        assert_eq!(s, quiver_svg(&gradient_field(&f), &opts).unwrap());
    }

    #[test]
    fn heatmap_colors_are_centered() {
        let f = field();
        let mesh = f.mesh();
        let vals: Vec<f64> = (0..mesh.num_triangles())
            .map(|t| mesh.centroid(t).x1)
            .collect();
        let s = heatmap_svg(mesh, &vals, &SvgOptions::default()).unwrap();
        assert_eq!(s.matches("<polygon fill=\"#").count(), mesh.num_triangles());
        assert_eq!(hex(diverging(0.0)), "#ffffff");
        assert!(heatmap_svg(mesh, &vals[1..], &SvgOptions::default()).is_err());
    }
}
