//! One function per command. Each returns its files in memory; nothing
//! touches the disk until the whole command has succeeded.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use sigmalab::analysis::{
    beltrami_residual, complex_derivatives, critical_point_candidates, injectivity_check,
    jacobian_field, lewy_verify, quasiconformal_defect, stream_function, unimodality_check,
    LewyOptions,
};
use sigmalab::coefficients::{dilatation_bound, ellipticity_report};
use sigmalab::descriptor::{self, BoundaryFn, Oracle};
use sigmalab::fd::{solve_nondivergence, to_nondivergence, NodeKind};
use sigmalab::fem::{
    centroids, gradient_field, h1_seminorm_error, l2_error, solve_dirichlet, solve_map,
    DirichletProblem,
};
use sigmalab::io::{write_field, write_grid_field, write_mesh};
use sigmalab::mesh::refine;
use sigmalab::oracles::meyers_jacobian;
use sigmalab::svg::{contour_svg, heatmap_svg, SvgOptions};
use sigmalab::{CoefficientField, Error, MappingField, Mesh, Point2, Result};

use crate::config::RunConfig;
use crate::output::Outputs;

/// Step used to differentiate sigma when converting to nondivergence form.
const DIVERGENCE_STEP: f64 = 1e-5;

/// Jacobian comparison for the Meyers table skips the region near the origin.
const MEYERS_JACOBIAN_MIN_RADIUS: f64 = 0.3;
const MEYERS_RINGS: usize = 8;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 5;

pub struct Run {
    pub outputs: Outputs,
    pub summary: String,
    pub exit: i32,
}

impl Run {
    fn ok(outputs: Outputs, summary: String) -> Self {
        Run {
            outputs,
            summary,
            exit: EXIT_OK,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Run> {
    let mut run = match cfg.command()? {
        "mesh" => cmd_mesh(cfg),
        "solve" if cfg.solver == "fd" => cmd_solve_nd(cfg),
        "solve" => cmd_solve(cfg),
        "solve-nd" => cmd_solve_nd(cfg),
        "map" => cmd_map(cfg),
        "verify" => cmd_verify(cfg),
        "meyers" => cmd_meyers(cfg),
        "beltrami" => cmd_beltrami(cfg),
        "unimodal" => cmd_unimodal(cfg),
        other => Err(Error::invalid(format!("unknown command '{other}'"))),
    }?;
    run.outputs.add("config.json", to_json(cfg)?);
    Ok(run)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn svg_options(cfg: &RunConfig) -> SvgOptions {
    SvgOptions {
        levels: cfg.levels,
        ..SvgOptions::default()
    }
}

fn oracle(cfg: &RunConfig) -> Result<Option<Oracle>> {
    cfg.oracle.as_deref().map(descriptor::oracle).transpose()
}

/// Scalar boundary data; `oracle` reads the configured reference.
fn scalar_data(cfg: &RunConfig) -> Result<BoundaryFn> {
    if cfg.g() == "oracle" {
        let o = oracle(cfg)?.ok_or_else(|| Error::invalid("g=oracle without an oracle"))?;
        return Ok(Arc::new(move |p| o.value(p)));
    }
    descriptor::boundary_data(cfg.g())
}

/// Two-component boundary map; `oracle` needs a map-valued reference.
fn map_data(cfg: &RunConfig) -> Result<(BoundaryFn, BoundaryFn)> {
    if cfg.g() == "oracle" {
        let o = oracle(cfg)?
            .and_then(|o| o.map())
            .ok_or_else(|| Error::invalid("g=oracle for a map needs a two-component oracle"))?;
        return Ok((
            Arc::new(move |p| o.component(0, p)),
            Arc::new(move |p| o.component(1, p)),
        ));
    }
    descriptor::boundary_map(cfg.g())
}

fn mesh(cfg: &RunConfig) -> Result<Arc<Mesh>> {
    cfg.domain()?.mesh(cfg.h())
}

#[derive(Serialize)]
struct Range {
    min: f64,
    max: f64,
    mean: f64,
}

fn range(values: &[f64]) -> Range {
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    Range {
        min,
        max,
        mean: if values.is_empty() {
            0.0
        } else {
            sum / values.len() as f64
        },
    }
}

fn mesh_summary(mesh: &Mesh) -> Value {
    json!({
        "vertices": mesh.num_vertices(),
        "triangles": mesh.num_triangles(),
        "boundary_loops": mesh.boundary_loops().len(),
        "h": mesh.h(),
        "max_edge_length": mesh.max_edge_length(),
        "min_area": mesh.min_area(),
        "total_area": mesh.total_area(),
        "euler_characteristic": mesh.euler_characteristic(),
    })
}

fn cmd_mesh(cfg: &RunConfig) -> Result<Run> {
    let mesh = mesh(cfg)?;
    let mut out = Outputs::default();
    out.add("mesh.txt", write_mesh(&mesh));
    out.add("mesh.json", to_json(&mesh_summary(&mesh))?);
    let summary = format!(
        "mesh: {} vertices, {} triangles, h {:.4}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.h()
    );
    Ok(Run::ok(out, summary))
}

fn cmd_solve(cfg: &RunConfig) -> Result<Run> {
    let mesh = mesh(cfg)?;
    let sigma = descriptor::coefficient(&cfg.sigma)?;
    let g = scalar_data(cfg)?;
    let sol = solve_dirichlet(&DirichletProblem {
        mesh: mesh.clone(),
        sigma: &sigma,
        boundary_data: &*g,
    })?;
    let u = &sol.field;
    let (umin, umax) = u.min_max();
    let mut max_diff_g: f64 = 0.0;
    for (p, &val) in mesh.vertices().iter().zip(u.values()) {
        max_diff_g = max_diff_g.max((val - g(*p)?).abs());
    }
    let grads = gradient_field(u).magnitudes();
    let mut stats = json!({
        "mesh": mesh_summary(&mesh),
        "sigma": cfg.sigma,
        "g": cfg.g(),
        "relative_residual": sol.relative_residual,
        "ellipticity": sol.ellipticity,
        "u_min": umin,
        "u_max": umax,
        "gradient_magnitude": range(&grads),
        "max_abs_u_minus_g": max_diff_g,
    });
    let mut summary = format!(
        "solve: {} vertices, residual {:.3e}, u in [{:.6}, {:.6}], max |u - g| {:.3e}",
        mesh.num_vertices(),
        sol.relative_residual,
        umin,
        umax,
        max_diff_g
    );
    if let Some(o) = oracle(cfg)? {
        let l2 = l2_error(u, |p| o.value(p))?;
        let h1 = h1_seminorm_error(u, |p| o.gradient(p))?;
        stats["oracle"] = json!({
            "descriptor": cfg.oracle,
            "l2": l2,
            "h1_seminorm": h1,
        });
        summary.push_str(&format!(", relative L2 vs oracle {:.3e}", l2.relative_l2));
    }
    let mut out = Outputs::default();
    out.add("mesh.txt", write_mesh(&mesh));
    out.add("u.txt", write_field(u));
    out.add("stats.json", to_json(&stats)?);
    if cfg.svg {
        out.add("u.svg", contour_svg(u, &svg_options(cfg))?);
    }
    Ok(Run::ok(out, summary))
}

fn cmd_solve_nd(cfg: &RunConfig) -> Result<Run> {
    let grid = cfg.domain()?.grid(cfg.spacing)?;
    let sigma = descriptor::coefficient(&cfg.sigma)?;
    let g = scalar_data(cfg)?;
    let (a, b) = to_nondivergence(&sigma, DIVERGENCE_STEP)?;
    let sol = solve_nondivergence(grid.clone(), &a, &b, &*g)?;
    let values = sol.field.values();
    let (mut umin, mut umax, mut max_diff_g) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for (k, &kind) in grid.kinds().iter().enumerate() {
        if kind != NodeKind::Exterior {
            umin = umin.min(values[k]);
            umax = umax.max(values[k]);
            max_diff_g = max_diff_g.max((values[k] - g(grid.node_point(k))?).abs());
        }
    }
    let mut stats = json!({
        "grid": {
            "nx": grid.nx(),
            "ny": grid.ny(),
            "spacing": grid.spacing(),
            "interior_nodes": grid.count(NodeKind::Interior),
            "boundary_nodes": grid.count(NodeKind::Boundary),
        },
        "sigma": cfg.sigma,
        "g": cfg.g(),
        "relative_residual": sol.relative_residual,
        "dominance_margin": sol.dominance_margin,
        "u_min": umin,
        "u_max": umax,
        "max_abs_u_minus_g": max_diff_g,
    });
    let mut summary = format!(
        "solve-nd: {} interior nodes, residual {:.3e}, u in [{:.6}, {:.6}]",
        grid.count(NodeKind::Interior),
        sol.relative_residual,
        umin,
        umax
    );
    if let Some(o) = oracle(cfg)? {
        let rel = sol.field.relative_l2_error(|p| o.value(p))?;
        stats["oracle"] = json!({ "descriptor": cfg.oracle, "relative_l2": rel });
        summary.push_str(&format!(", relative L2 vs oracle {rel:.3e}"));
    }
    let mut out = Outputs::default();
    out.add("grid.txt", write_grid_field(&sol.field));
    out.add("stats.json", to_json(&stats)?);
    Ok(Run::ok(out, summary))
}

fn solve_configured_map(cfg: &RunConfig) -> Result<(CoefficientField, MappingField, f64)> {
    let mesh = mesh(cfg)?;
    let sigma = descriptor::coefficient(&cfg.sigma)?;
    let (g1, g2) = map_data(cfg)?;
    let (map, residual) = solve_map(mesh, &sigma, &*g1, &*g2)?;
    Ok((sigma, map, residual))
}

fn jacobian_stats(jac: &[f64]) -> Value {
    let r = range(jac);
    json!({
        "min": r.min,
        "max": r.max,
        "mean": r.mean,
        "min_abs": jac.iter().fold(f64::INFINITY, |m, j| m.min(j.abs())),
        "negative_triangles": jac.iter().filter(|&&j| j < 0.0).count(),
        "zero_triangles": jac.iter().filter(|&&j| j == 0.0).count(),
    })
}

fn cmd_map(cfg: &RunConfig) -> Result<Run> {
    let (_, map, residual) = solve_configured_map(cfg)?;
    let mesh = map.mesh().clone();
    let verdict = injectivity_check(&map);
    let jac = jacobian_field(&map);
    let report = json!({
        "mesh": mesh_summary(&mesh),
        "sigma": cfg.sigma,
        "g": cfg.g(),
        "relative_residual": residual,
        "jacobian": jacobian_stats(&jac),
        "injectivity": verdict,
    });
    let mut out = Outputs::default();
    out.add("mesh.txt", write_mesh(&mesh));
    out.add("u1.txt", write_field(&map.u1));
    out.add("u2.txt", write_field(&map.u2));
    out.add("map.json", to_json(&report)?);
    if cfg.svg {
        out.add("jacobian.svg", heatmap_svg(&mesh, &jac, &svg_options(cfg))?);
    }
    let summary = format!(
        "map: {} vertices, residual {:.3e}, injective {}, jacobian in [{:.4e}, {:.4e}]",
        mesh.num_vertices(),
        residual,
        verdict.injective,
        report["jacobian"]["min"].as_f64().unwrap_or(f64::NAN),
        report["jacobian"]["max"].as_f64().unwrap_or(f64::NAN)
    );
    Ok(Run::ok(out, summary))
}

fn lewy_options(cfg: &RunConfig) -> LewyOptions {
    LewyOptions {
        directions: cfg.directions,
        margin: cfg.margin,
        probe_points: cfg
            .probe_points
            .as_ref()
            .map(|ps| ps.iter().map(|p| Point2::new(p[0], p[1])).collect()),
        probe_radius: cfg.probe_radius,
        tie_tolerance: cfg.tie_tolerance,
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<Run> {
    let (sigma, map, residual) = solve_configured_map(cfg)?;
    let report = lewy_verify(&map, &sigma, &lewy_options(cfg))?;
    let jac = jacobian_field(&map);
    let doc = json!({
        "sigma": cfg.sigma,
        "g": cfg.g(),
        "relative_residual": residual,
        "degenerate": report.min_abs_det == 0.0,
        "report": report,
    });
    let mut out = Outputs::default();
    out.add("lewy_report.json", to_json(&doc)?);
    if cfg.svg {
        out.add(
            "jacobian.svg",
            heatmap_svg(map.mesh(), &jac, &svg_options(cfg))?,
        );
    }
    let summary = format!(
        "verify: {}, min |det| {:.4e}, {} directions, {} probes, all unimodal {}",
        if report.passes { "pass" } else { "FAIL" },
        report.min_abs_det,
        report.directions_tested,
        report.probes.len(),
        report.all_unimodal
    );
    Ok(Run {
        outputs: out,
        summary,
        exit: if report.passes {
            EXIT_OK
        } else {
            EXIT_VERIFICATION
        },
    })
}

#[derive(Serialize)]
struct MeyersLevel {
    level: usize,
    h: f64,
    vertices: usize,
    relative_l2_u1: f64,
    relative_l2_u2: f64,
    h1_u1: f64,
    h1_u2: f64,
    /// Worst relative Jacobian error over triangles with centroid radius at least the cutoff.
    jacobian_relative_error: f64,
    /// Previous level's L2 error over this one, worst component.
    l2_ratio: Option<f64>,
}

#[derive(Serialize)]
struct Ring {
    r_inner: f64,
    r_outer: f64,
    triangles: usize,
    mean_jacobian: f64,
    mean_analytic: f64,
}

fn meyers_rings(map: &MappingField, alpha: f64, jac: &[f64]) -> Result<Vec<Ring>> {
    let mesh = map.mesh();
    let cs = centroids(mesh);
    let radii: Vec<f64> = cs.iter().map(|c| c.norm()).collect();
    let (rmin, rmax) = radii
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let width = (rmax - rmin) / MEYERS_RINGS as f64;
    let mut acc = [(0usize, 0.0, 0.0); MEYERS_RINGS];
    for t in 0..mesh.num_triangles() {
        let k = (((radii[t] - rmin) / width) as usize).min(MEYERS_RINGS - 1);
        let area = mesh.area(t);
        acc[k].0 += 1;
        acc[k].1 += area * jac[t];
        acc[k].2 += area;
    }
    let mut rings = Vec::new();
    for (k, &(n, weighted, area)) in acc.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let (lo, hi) = (rmin + k as f64 * width, rmin + (k + 1) as f64 * width);
        let mut exact = 0.0;
        for t in (0..mesh.num_triangles()).filter(|&t| {
            let r = radii[t];
            r >= lo && (r < hi || k == MEYERS_RINGS - 1)
        }) {
            exact += mesh.area(t) * meyers_jacobian(alpha, cs[t])?;
        }
        rings.push(Ring {
            r_inner: lo,
            r_outer: hi,
            triangles: n,
            mean_jacobian: weighted / area,
            mean_analytic: exact / area,
        });
    }
    Ok(rings)
}

fn cmd_meyers(cfg: &RunConfig) -> Result<Run> {
    let alpha = cfg.alpha;
    let sigma = descriptor::coefficient(&cfg.sigma)?;
    let o = oracle(cfg)?
        .and_then(|o| o.map())
        .ok_or_else(|| Error::invalid("meyers needs the Meyers oracle"))?;
    let g1 = move |p: Point2| o.component(0, p);
    let g2 = move |p: Point2| o.component(1, p);

    let mut mesh = mesh(cfg)?;
    let mut levels: Vec<MeyersLevel> = Vec::new();
    let mut finest = None;
    for level in 0..=cfg.refinements {
        if level > 0 {
            mesh = Arc::new(refine(&mesh)?);
        }
        let (map, _) = solve_map(mesh.clone(), &sigma, &g1, &g2)?;
        let l1 = l2_error(&map.u1, |p| o.component(0, p))?;
        let l2 = l2_error(&map.u2, |p| o.component(1, p))?;
        let h1a = h1_seminorm_error(&map.u1, |p| Ok(o.gradient(p)?[0]))?;
        let h1b = h1_seminorm_error(&map.u2, |p| Ok(o.gradient(p)?[1]))?;
        let jac = jacobian_field(&map);
        let mut jac_err: f64 = 0.0;
        for (t, &j) in jac.iter().enumerate() {
            let c = mesh.centroid(t);
            if c.norm() >= MEYERS_JACOBIAN_MIN_RADIUS {
                let exact = meyers_jacobian(alpha, c)?;
                jac_err = jac_err.max((j - exact).abs() / exact.abs());
            }
        }
        let worst = l1.relative_l2.max(l2.relative_l2);
        let l2_ratio = levels
            .last()
            .map(|prev| prev.relative_l2_u1.max(prev.relative_l2_u2) / worst);
        levels.push(MeyersLevel {
            level,
            h: mesh.h(),
            vertices: mesh.num_vertices(),
            relative_l2_u1: l1.relative_l2,
            relative_l2_u2: l2.relative_l2,
            h1_u1: h1a,
            h1_u2: h1b,
            jacobian_relative_error: jac_err,
            l2_ratio,
        });
        finest = Some((map, jac));
    }
    let (map, jac) = finest.expect("at least one level");
    let rings = meyers_rings(&map, alpha, &jac)?;

    let mut table = format!(
        "# meyers alpha={alpha} domain={}\n",
        cfg.domain.as_deref().unwrap_or_default()
    );
    table.push_str("level        h  vertices    l2_u1        l2_u2        h1_u1        h1_u2        jac_err      l2_ratio\n");
    for l in &levels {
        table.push_str(&format!(
            "{:>5} {:>8.5} {:>9} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>9}\n",
            l.level,
            l.h,
            l.vertices,
            l.relative_l2_u1,
            l.relative_l2_u2,
            l.h1_u1,
            l.h1_u2,
            l.jacobian_relative_error,
            l.l2_ratio.map_or("-".to_string(), |r| format!("{r:.3}"))
        ));
    }
    table.push_str("\n# finest level, area-weighted mean Jacobian by radius\n");
    table.push_str("r_inner  r_outer  triangles  discrete      analytic\n");
    for r in &rings {
        table.push_str(&format!(
            "{:.4}   {:.4}   {:>9}  {:.6e}  {:.6e}\n",
            r.r_inner, r.r_outer, r.triangles, r.mean_jacobian, r.mean_analytic
        ));
    }
    let doc = json!({
        "alpha": alpha,
        "domain": cfg.domain,
        "jacobian_min_radius": MEYERS_JACOBIAN_MIN_RADIUS,
        "levels": levels,
        "rings": rings,
    });
    let last = levels.last().expect("at least one level");
    let summary = format!(
        "meyers: alpha {alpha}, {} levels, finest relative L2 {:.3e}, last ratio {}",
        levels.len(),
        last.relative_l2_u1.max(last.relative_l2_u2),
        last.l2_ratio.map_or("-".to_string(), |r| format!("{r:.2}"))
    );
    let mut out = Outputs::default();
    out.add("convergence.txt", table);
    out.add("convergence.json", to_json(&doc)?);
    Ok(Run::ok(out, summary))
}

fn cmd_beltrami(cfg: &RunConfig) -> Result<Run> {
    let mesh = mesh(cfg)?;
    let sigma = descriptor::coefficient(&cfg.sigma)?;
    let g = scalar_data(cfg)?;
    let samples = centroids(&mesh);
    let ellipticity = ellipticity_report(&sigma, &samples)?;
    let k_bound = dilatation_bound(&sigma, &samples)?;
    let sol = solve_dirichlet(&DirichletProblem {
        mesh: mesh.clone(),
        sigma: &sigma,
        boundary_data: &*g,
    })?;
    let v = stream_function(&sol.field, &sigma)?;
    let cd = complex_derivatives(&sol.field, &v.field)?;
    let residual = beltrami_residual(&cd, &sigma)?;
    let defect = quasiconformal_defect(&cd, cfg.margin)?;
    let critical = critical_point_candidates(&sol.field, cfg.rel_tol)?;
    let doc = json!({
        "mesh": mesh_summary(&mesh),
        "sigma": cfg.sigma,
        "g": cfg.g(),
        "ellipticity": ellipticity,
        "dilatation_bound": k_bound,
        "solve_residual": sol.relative_residual,
        "stream_function_residual": v.residual,
        "beltrami_residual": residual,
        "quasiconformal_defect": defect,
        "critical_point_candidates": critical,
    });
    let mut out = Outputs::default();
    out.add("mesh.txt", write_mesh(&mesh));
    out.add("u.txt", write_field(&sol.field));
    out.add("v.txt", write_field(&v.field));
    out.add("beltrami.json", to_json(&doc)?);
    if cfg.svg {
        out.add("u.svg", contour_svg(&sol.field, &svg_options(cfg))?);
    }
    let summary = format!(
        "beltrami: |mu|+|nu| <= {k_bound:.6}, residual {residual:.3e}, stream residual {:.3e}, min J_f {:.4e}",
        v.residual, defect.min_jacobian_f
    );
    Ok(Run::ok(out, summary))
}

fn cmd_unimodal(cfg: &RunConfig) -> Result<Run> {
    let (values, source) = match &cfg.values {
        Some(v) => (v.clone(), "values".to_string()),
        None => {
            let mesh = mesh(cfg)?;
            let g = scalar_data(cfg)?;
            let trace = mesh.boundary_trace(0)?;
            let vals = trace
                .iter()
                .map(|&(_, p)| g(p))
                .collect::<Result<Vec<_>>>()?;
            (vals, format!("g={} on boundary loop 0", cfg.g()))
        }
    };
    let verdict = unimodality_check(&values, cfg.tie_tolerance)?;
    let doc = json!({
        "source": source,
        "length": values.len(),
        "tie_tolerance": cfg.tie_tolerance,
        "verdict": verdict,
    });
    let mut out = Outputs::default();
    out.add("unimodal.json", to_json(&doc)?);
    let summary = format!(
        "unimodal: {} ({} values, {} direction changes)",
        verdict.unimodal,
        values.len(),
        verdict.direction_changes
    );
    Ok(Run {
        outputs: out,
        summary,
        exit: if verdict.unimodal {
            EXIT_OK
        } else {
            EXIT_VERIFICATION
        },
    })
}
