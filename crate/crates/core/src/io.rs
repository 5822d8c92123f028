//! Line-oriented text formats: `mesh v1`, `field v1` and `grid v1`.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! reading back a written file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd::{GridDomain, GridField, NodeKind};
use crate::fem::ScalarField;
use crate::mesh::{Mesh, Point2};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    /// Next non-blank line, split on whitespace.
    fn next(&mut self, what: &str) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t.split_whitespace().collect());
            }
        }
        Err(Error::Parse {
            line: self.line + 1,
            msg: format!("unexpected end of input, expected {what}"),
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect_tokens(&mut self, tokens: &[&str]) -> Result<()> {
        let got = self.next(&tokens.join(" "))?;
        if got != tokens {
            return Err(self.err(format!(
                "expected '{}', found '{}'",
                tokens.join(" "),
                got.join(" ")
            )));
        }
        Ok(())
    }

    /// A `keyword N` line.
    fn count(&mut self, keyword: &str) -> Result<usize> {
        let got = self.next(keyword)?;
        if got.len() != 2 || got[0] != keyword {
            return Err(self.err(format!("expected '{keyword} <count>'")));
        }
        self.parse(got[1])
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse '{tok}'")))
    }

    fn finish(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "trailing content".into(),
                });
            }
        }
        Ok(())
    }
}

fn float(tok: &str, lines: &Lines) -> Result<f64> {
    let v: f64 = lines.parse(tok)?;
    if !v.is_finite() {
        return Err(lines.err(format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::from("mesh v1\n");
    let _ = writeln!(s, "vertices {}", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p.x1, p.x2);
    }
    let _ = writeln!(s, "triangles {}", mesh.num_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for lp in mesh.boundary_loops() {
        let _ = write!(s, "boundary {}", lp.len());
        for v in lp {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

/// Parses a mesh; `h` is taken as the longest edge.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    lines.expect_tokens(&["mesh", "v1"])?;
    let nv = lines.count("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let t = lines.next("vertex")?;
        if t.len() != 2 {
            return Err(lines.err("vertex line needs two coordinates"));
        }
        vertices.push(Point2::new(float(t[0], &lines)?, float(t[1], &lines)?));
    }
    let nt = lines.count("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t = lines.next("triangle")?;
        if t.len() != 3 {
            return Err(lines.err("triangle line needs three indices"));
        }
        triangles.push([lines.parse(t[0])?, lines.parse(t[1])?, lines.parse(t[2])?]);
    }
    let mut boundary = Vec::new();
    for (i, l) in lines.inner.by_ref() {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: i + 1, msg };
        if t[0] != "boundary" || t.len() < 2 {
            return Err(perr(format!(
                "expected 'boundary L i0 i1 ...', found '{}'",
                l.trim()
            )));
        }
        let len: usize = t[1]
            .parse()
            .map_err(|_| perr(format!("cannot parse '{}'", t[1])))?;
        if t.len() != len + 2 {
            return Err(perr(format!(
                "boundary loop declares {len} vertices but lists {}",
                t.len() - 2
            )));
        }
        let lp = t[2..]
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| perr(format!("cannot parse '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        boundary.push(lp);
    }
    // provisional h for validation, replaced by the longest edge below
    let probe = Mesh::new(vertices, triangles, boundary, 1.0)?;
    let h = probe.max_edge_length();
    let (v, t, b) = (
        probe.vertices().to_vec(),
        probe.triangles().to_vec(),
        probe.boundary_loops().to_vec(),
    );
    Mesh::new(v, t, b, h)
}

pub fn write_field(field: &ScalarField) -> String {
    let mut s = format!("field v1\nvalues {}\n", field.values().len());
    for v in field.values() {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

pub fn read_field(text: &str, mesh: Arc<Mesh>) -> Result<ScalarField> {
    let mut lines = Lines::new(text);
    lines.expect_tokens(&["field", "v1"])?;
    let n = lines.count("values")?;
    if n != mesh.num_vertices() {
        return Err(lines.err(format!(
            "field has {n} values but the mesh has {} vertices",
            mesh.num_vertices()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let t = lines.next("value")?;
        if t.len() != 1 {
            return Err(lines.err("one value per line expected"));
        }
        values.push(float(t[0], &lines)?);
    }
    lines.finish()?;
    ScalarField::new(mesh, values)
}

/// Writes the grid header and mask, plus values when given.
pub fn write_grid(grid: &GridDomain, values: Option<&[f64]>) -> String {
    let o = grid.origin();
    let mut s = format!(
        "grid v1\norigin {:?} {:?}\nspacing {:?}\nnx {}\nny {}\nmask\n",
        o.x1,
        o.x2,
        grid.spacing(),
        grid.nx(),
        grid.ny()
    );
    for row in grid.kinds().chunks(grid.nx()) {
        let codes: Vec<String> = row.iter().map(|k| k.code().to_string()).collect();
        s.push_str(&codes.join(" "));
        s.push('\n');
    }
    if let Some(values) = values {
        s.push_str("values\n");
        for row in values.chunks(grid.nx()) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&vals.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn write_grid_field(field: &GridField) -> String {
    write_grid(field.grid(), Some(field.values()))
}

/// Parses a grid and its optional values.
pub fn read_grid(text: &str) -> Result<(GridDomain, Option<Vec<f64>>)> {
    let mut lines = Lines::new(text);
    lines.expect_tokens(&["grid", "v1"])?;
    let t = lines.next("origin")?;
    if t.len() != 3 || t[0] != "origin" {
        return Err(lines.err("expected 'origin x1 x2'"));
    }
    let origin = Point2::new(float(t[1], &lines)?, float(t[2], &lines)?);
    let t = lines.next("spacing")?;
    if t.len() != 2 || t[0] != "spacing" {
        return Err(lines.err("expected 'spacing s'"));
    }
    let spacing = float(t[1], &lines)?;
    let nx = lines.count("nx")?;
    let ny = lines.count("ny")?;
    lines.expect_tokens(&["mask"])?;
    let mut kinds = Vec::with_capacity(nx * ny);
    for _ in 0..ny {
        let t = lines.next("mask row")?;
        if t.len() != nx {
            return Err(lines.err(format!("mask row has {} entries, expected {nx}", t.len())));
        }
        for tok in t {
            let code: u8 = lines.parse(tok)?;
            kinds.push(
                NodeKind::from_code(code)
                    .ok_or_else(|| lines.err(format!("unknown node code {code}")))?,
            );
        }
    }
    let grid = GridDomain::from_kinds(origin, spacing, nx, ny, kinds)?;
    let rest = match lines.next("values") {
        Ok(t) if t == ["values"] => {
            let mut values = Vec::with_capacity(nx * ny);
            for _ in 0..ny {
                let t = lines.next("value row")?;
                if t.len() != nx {
                    return Err(
                        lines.err(format!("value row has {} entries, expected {nx}", t.len()))
                    );
                }
                for tok in t {
                    values.push(float(tok, &lines)?);
                }
            }
            lines.finish()?;
            Some(values)
        }
        Ok(_) => return Err(lines.err("expected 'values' or end of input")),
        Err(_) => None,
    };
    Ok((grid, rest))
}

pub fn read_grid_field(text: &str) -> Result<GridField> {
    let (grid, values) = read_grid(text)?;
    let values = values.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "grid file has no values section".into(),
    })?;
    GridField::new(Arc::new(grid), values)
}
