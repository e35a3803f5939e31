use vkplate::assembly::{Discretization, PenaltyParams};
use vkplate::mesh::unit_square_mesh;
use vkplate::problems::Problem;
use vkplate::solver::{initial_guess, newton_solve, solve_linear, NewtonOptions};
use vkplate::space::{FieldPair, Method};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn biharmonic_solve_is_accurate() {
    let problem = Problem::square();
    let mesh = problem.initial_mesh().uniform_refine();
    for method in [Method::Dg, Method::Ip] {
        let disc = Discretization::for_problem(&mesh, method, PenaltyParams::default(), &problem).unwrap();
        let system = disc.biharmonic_system();
        let x = solve_linear(&system).unwrap();
        let ax = system.matrix.matvec(&x);
        let r: Vec<f64> = ax.iter().zip(&system.rhs).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e-10 * norm(&system.rhs), "{method:?}");
    }
}

#[test]
fn zero_data_converges_at_once() {
    let mesh = unit_square_mesh().uniform_refine();
    let disc = Discretization::new(&mesh, Method::Dg, PenaltyParams::default(), |_| (0.0, 0.0)).unwrap();
    let (psi, report) = newton_solve(&disc, &NewtonOptions::default()).unwrap();
    assert_eq!(report.iterations, 1);
    assert!(report.converged);
    assert!(psi.u.iter().chain(&psi.v).all(|&c| c == 0.0));
}

#[test]
fn square_problem_newton() {
    let problem = Problem::square();
    let mut mesh = problem.initial_mesh();
    for level in 0..3 {
        for method in [Method::Dg, Method::Ip] {
            let disc = Discretization::for_problem(&mesh, method, PenaltyParams::default(), &problem).unwrap();
            let (psi, report) = newton_solve(&disc, &NewtonOptions::default()).unwrap();
            assert!(report.converged && report.iterations <= 5, "{method:?} level {level}: {report:?}");
            // further iterations leave the solution in place
            assert!(report.extra_change.unwrap() < 1e-12, "{:?}", report.extra_change);
            if level == 2 {
                let load = norm(&disc.load_f().iter().chain(disc.load_g()).copied().collect::<Vec<_>>());
                let res = norm(&disc.residual(&psi).unwrap());
                assert!(res <= 1e-8 * load, "{res} vs {load}");
            }
        }
        mesh = mesh.uniform_refine();
    }
}

#[test]
fn initial_guess_without_second_load() {
    let problem = Problem::constant_load();
    let mesh = problem.initial_mesh();
    let disc = Discretization::for_problem(&mesh, Method::Ip, PenaltyParams::default(), &problem).unwrap();
    let FieldPair { u, v } = initial_guess(&disc).unwrap();
    assert!(v.iter().all(|&c| c == 0.0));
    assert!(norm(&u) > 0.0);
}
