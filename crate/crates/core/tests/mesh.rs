use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vkplate::mesh::{lshape_mesh, unit_square_mesh, Mesh};

/// Every vertex lying on an edge must be one of its endpoints.
fn no_hanging_nodes(mesh: &Mesh) {
    let v = mesh.vertices();
    for e in mesh.edges() {
        let (a, b) = (v[e.vertices[0]], v[e.vertices[1]]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        assert!(
            !v.iter().any(|p| (p[0] - mid[0]).abs() < 1e-14 && (p[1] - mid[1]).abs() < 1e-14),
            "hanging midpoint on edge {:?}",
            e.vertices
        );
    }
}

fn check(mesh: &Mesh, area: f64) {
    mesh.audit().unwrap();
    no_hanging_nodes(mesh);
    assert!((mesh.total_area() - area).abs() < 1e-12);
    let mut uses: HashMap<[usize; 2], usize> = HashMap::new();
    for t in mesh.triangles() {
        for i in 0..3 {
            let (a, b) = (t.vertices[i], t.vertices[(i + 1) % 3]);
            *uses.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let boundary = uses.values().filter(|&&n| n == 1).count();
    assert!(uses.values().all(|&n| n <= 2));
    assert_eq!(boundary, mesh.num_boundary_edges());
}

#[test]
fn random_bisection_rounds_stay_conforming() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (mut mesh, area) in [(unit_square_mesh(), 1.0), (lshape_mesh(), 3.0)] {
        let angle = mesh.min_angle();
        for _ in 0..10 {
            let nt = mesh.num_triangles();
            let k = rng.gen_range(1..=nt.min(8));
            let marked: Vec<usize> = (0..k).map(|_| rng.gen_range(0..nt)).collect();
            let next = mesh.bisect(&marked).unwrap();
            assert!(next.num_triangles() > nt);
            check(&next, area);
            mesh = next;
        }
        // newest vertex bisection keeps a fixed set of shapes
        assert!(mesh.min_angle() >= angle / 2.0 - 1e-12);
    }
}

#[test]
fn uniform_refinement_quadruples() {
    let mesh = lshape_mesh();
    let fine = mesh.uniform_refine();
    assert_eq!(fine.num_triangles(), 4 * mesh.num_triangles());
    check(&fine, 3.0);
    assert!((fine.max_diameter() - 0.5 * mesh.max_diameter()).abs() < 1e-14);
}
