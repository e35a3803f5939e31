use proptest::prelude::*;
use vkplate::assembly::{element_data, Discretization, PenaltyParams};
use vkplate::mesh::{lshape_mesh, unit_square_mesh};
use vkplate::norms::{dg_norm, problem_errors};
use vkplate::problems::Problem;
use vkplate::quadrature::edge_rule;
use vkplate::solver::{newton_solve, NewtonOptions};
use vkplate::space::{DofMap, Method};

fn setup(method: Method) -> (vkplate::mesh::Mesh, DofMap) {
    let mesh = unit_square_mesh();
    let dofmap = DofMap::new(&mesh, method);
    (mesh, dofmap)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_homogeneous(c in prop::collection::vec(-1.0f64..1.0, 24), s in -10.0f64..10.0) {
        let (mesh, dofmap) = setup(Method::Dg);
        let params = PenaltyParams::default();
        let scaled: Vec<f64> = c.iter().map(|v| s * v).collect();
        let a = dg_norm(&scaled, &mesh, &dofmap, &params).unwrap();
        let b = s.abs() * dg_norm(&c, &mesh, &dofmap, &params).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn norm_satisfies_triangle_inequality(
        x in prop::collection::vec(-1.0f64..1.0, 24),
        y in prop::collection::vec(-1.0f64..1.0, 24),
        ip in any::<bool>(),
    ) {
        let method = if ip { Method::Ip } else { Method::Dg };
        let (mesh, dofmap) = setup(method);
        let n = dofmap.ndof();
        let params = PenaltyParams::default();
        let sum: Vec<f64> = x[..n].iter().zip(&y[..n]).map(|(a, b)| a + b).collect();
        let lhs = dg_norm(&sum, &mesh, &dofmap, &params).unwrap();
        let rhs = dg_norm(&x[..n], &mesh, &dofmap, &params).unwrap() + dg_norm(&y[..n], &mesh, &dofmap, &params).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }
}

#[test]
fn global_quadratic_has_only_boundary_jumps() {
    let params = PenaltyParams::new(7.0, 13.0);
    let q = |p: [f64; 2]| 1.0 + p[0] - 2.0 * p[1] + 0.5 * p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1];
    let grad = |p: [f64; 2]| [1.0 + p[0] + 3.0 * p[1], -2.0 + 3.0 * p[0] - 2.0 * p[1]];
    // |D²q|² = 1 + 2·9 + 4
    let hess_sq = 23.0;
    let rule = edge_rule(5).unwrap();
    for mesh in [unit_square_mesh().uniform_refine(), lshape_mesh().uniform_refine()] {
        let dofmap = DofMap::new(&mesh, Method::Dg);
        let field = dofmap.interpolate(q);
        let mut expect = hess_sq * mesh.total_area();
        for e in mesh.edges().iter().filter(|e| e.is_boundary()) {
            let a = mesh.vertices()[e.vertices[0]];
            let b = mesh.vertices()[e.vertices[1]];
            let h = e.length;
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let g = grad(x);
                let gn = g[0] * e.normal[0] + g[1] * e.normal[1];
                expect += w * h * (params.sigma1 / h.powi(3) * q(x).powi(2) + params.sigma2 / h * gn * gn);
            }
        }
        let got = dg_norm(&field, &mesh, &dofmap, &params).unwrap().powi(2);
        assert!((got - expect).abs() <= 1e-11 * expect, "{got} vs {expect}");
    }
}

#[test]
fn square_error_decreases_under_refinement() {
    let problem = Problem::square();
    let params = PenaltyParams::default();
    let mut mesh = problem.initial_mesh();
    let mut last = f64::INFINITY;
    for _ in 0..4 {
        let disc = Discretization::for_problem(&mesh, Method::Dg, params, &problem).unwrap();
        let (psi, _) = newton_solve(&disc, &NewtonOptions::default()).unwrap();
        let (eu, ev) = problem_errors(&problem, &psi, &mesh, &element_data(&mesh), disc.dofmap(), &params).unwrap();
        let e = eu.hypot(ev);
        assert!(e < last, "{e} !< {last}");
        last = e;
        mesh = mesh.uniform_refine();
    }
}
