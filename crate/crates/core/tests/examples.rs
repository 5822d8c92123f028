//! Worked examples across modules: solves feeding the analysis pipeline.

use std::sync::Arc;

use sigmalab::analysis::{
    beltrami_residual, complex_derivatives, injectivity_check, lewy_verify, pullback_subdomain,
    quasiconformal_defect, stream_function, LewyOptions,
};
use sigmalab::fem::{solve_dirichlet, solve_map, DirichletProblem};
use sigmalab::mesh::{generate_annulus, generate_disk, refine};
use sigmalab::oracles::{brute_force_injectivity, holomorphic_oracle, meyers_solution};
use sigmalab::{CoefficientField, Error, MappingField, Mesh, Point2, Result};

fn disk(h: f64) -> Arc<Mesh> {
    Arc::new(generate_disk(Point2::ORIGIN, 1.0, h).unwrap())
}

fn annulus(h: f64) -> Arc<Mesh> {
    Arc::new(generate_annulus(Point2::ORIGIN, 0.2, 1.0, h).unwrap())
}

fn residual(
    mesh: Arc<Mesh>,
    sigma: &CoefficientField,
    g: &(dyn Fn(Point2) -> Result<f64> + Sync),
) -> f64 {
    let u = solve_dirichlet(&DirichletProblem {
        mesh,
        sigma,
        boundary_data: g,
    })
    .unwrap();
    let v = stream_function(&u.field, sigma).unwrap();
    beltrami_residual(&complex_derivatives(&u.field, &v.field).unwrap(), sigma).unwrap()
}

#[test]
fn saddle_beltrami_residual_halves() {
    let g = |p: Point2| Ok(p.x1 * p.x1 - p.x2 * p.x2);
    let coarse = disk(0.05);
    let fine = Arc::new(refine(&coarse).unwrap());
    let r0 = residual(coarse, &CoefficientField::identity(), &g);
    let r1 = residual(fine, &CoefficientField::identity(), &g);
    assert!(r0 <= 0.05, "{r0}");
    assert!(r0 / r1 >= 1.8, "{r0} -> {r1}");
}

#[test]
fn meyers_beltrami_residual_on_annulus() {
    let o = meyers_solution(2.0).unwrap();
    let r = residual(
        annulus(0.02),
        &CoefficientField::meyers(2.0).unwrap(),
        &move |p| o.component(0, p),
    );
    assert!(r <= 0.05, "{r}");
}

#[test]
fn meyers_defect_matches_analytic_bound() {
    let mesh = annulus(0.02);
    let sigma = CoefficientField::meyers(2.0).unwrap();
    let o = meyers_solution(2.0).unwrap();
    let u = solve_dirichlet(&DirichletProblem {
        mesh: mesh.clone(),
        sigma: &sigma,
        boundary_data: &move |p| o.component(0, p),
    })
    .unwrap();
    let v = stream_function(&u.field, &sigma).unwrap();
    let d = quasiconformal_defect(&complex_derivatives(&u.field, &v.field).unwrap(), 0.1).unwrap();

    // analytic |f_z|^2 - |f_zbar|^2 = det of (grad u, J sigma grad u) = (sigma grad u) . grad u
    let mut analytic = f64::INFINITY;
    for t in mesh.inset_triangles(0.1) {
        let c = mesh.centroid(t);
        let g = o.gradient(c).unwrap()[0];
        let s = sigma.eval(c).unwrap().apply(g);
        analytic = analytic.min(s[0] * g[0] + s[1] * g[1]);
    }
    assert!(
        d.min_jacobian_f >= 0.8 * analytic,
        "{} vs {analytic}",
        d.min_jacobian_f
    );
    assert!(d.sup_ratio.unwrap() < 1.0);
}

#[test]
fn brute_force_examples() {
    assert!(brute_force_injectivity(&MappingField::identity(disk(0.1)), 0.1).unwrap());
    let z2 = MappingField::from_analytic(disk(0.1), &holomorphic_oracle(2).unwrap()).unwrap();
    assert!(!brute_force_injectivity(&z2, 0.1).unwrap());
    let mey = MappingField::from_analytic(annulus(0.05), &meyers_solution(2.0).unwrap()).unwrap();
    assert!(brute_force_injectivity(&mey, 0.05).unwrap());
    assert!(injectivity_check(&mey).injective);
    assert!(matches!(
        brute_force_injectivity(&mey, 0.001),
        Err(Error::ResourceLimit { .. })
    ));
}

#[test]
fn verify_smooth_identity_map() {
    let sigma = CoefficientField::smooth(sigmalab::coefficients::SmoothParams {
        eps: 1.0,
        phi: 0.4,
        center: Point2::new(0.1, 0.2),
        width: 0.5,
    });
    let (map, _) = solve_map(disk(0.05), &sigma, &|p| Ok(p.x1), &|p| Ok(p.x2)).unwrap();
    let rep = lewy_verify(&map, &sigma, &LewyOptions::default()).unwrap();
    assert!(rep.passes && rep.all_unimodal && rep.min_abs_det > 0.0);
}

#[test]
fn solved_square_map_fails_the_hypothesis() {
    let id = CoefficientField::identity();
    let (map, _) = solve_map(disk(0.05), &id, &|p| Ok(p.x1 * p.x1 - p.x2 * p.x2), &|p| {
        Ok(2.0 * p.x1 * p.x2)
    })
    .unwrap();
    assert!(!injectivity_check(&map).injective);
    assert!(matches!(
        lewy_verify(&map, &id, &LewyOptions::default()),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn solved_meyers_map_verifies_with_analytic_determinant() {
    let sigma = CoefficientField::meyers(2.0).unwrap();
    let o = meyers_solution(2.0).unwrap();
    let (map, _) = solve_map(
        annulus(0.02),
        &sigma,
        &move |p| o.component(0, p),
        &move |p| o.component(1, p),
    )
    .unwrap();
    let opts = LewyOptions {
        margin: 0.05,
        ..LewyOptions::default()
    };
    let rep = lewy_verify(&map, &sigma, &opts).unwrap();
    assert!(rep.passes);
    // 2 |x|^2 at the inset inner radius 0.25
    let analytic = 2.0 * 0.25f64.powi(2);
    assert!(
        (rep.min_abs_det - analytic).abs() <= 0.15 * analytic,
        "{}",
        rep.min_abs_det
    );
}

#[test]
fn pullback_of_solved_map_contains_its_centre() {
    let sigma = CoefficientField::anisotropic(2.0, 0.5, 0.3);
    let (map, _) = solve_map(disk(0.05), &sigma, &|p| Ok(p.x1), &|p| Ok(p.x2)).unwrap();
    let z0 = Point2::new(0.2, -0.1);
    let pb = pullback_subdomain(&map, z0, 0.3).unwrap();
    assert!(pb.mesh.num_triangles() > 10);
    assert!(sigmalab::mesh::PointLocator::new(&pb.mesh)
        .locate(z0)
        .is_some());
    for &v in &pb.parent_vertices {
        assert!(map.image(v).dist(pb.w0) <= 0.3);
    }
}
