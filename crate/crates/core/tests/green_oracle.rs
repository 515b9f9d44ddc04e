//! Green functions against grid solves of the point-source problem, and the
//! Kirchhoff–Routh function against scans and finite differences.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use spikelab::green::{kr_critical, kr_gradient, kr_hamiltonian, GreenError, KrSearch};
use spikelab::{GreenFn, GridDomain, KrConfig, Shape};
use std::f64::consts::PI;

/// Exact solution of the 5-point problem `−Δ_h u = δ_h` on an `nx × ny`
/// cell grid of spacing `h`, by its discrete sine expansion. Nodes are
/// given as integer indices.
fn discrete_green_rect(nx: usize, ny: usize, h: f64, x: (usize, usize), y: (usize, usize)) -> f64 {
    let (lx, ly) = (nx as f64 * h, ny as f64 * h);
    let mut total = 0.0;
    for k in 1..nx {
        let kx = k as f64 * PI / nx as f64;
        let ex = (kx * x.0 as f64).sin() * (kx * y.0 as f64).sin();
        let lam_x = 4.0 / (h * h) * (kx / 2.0).sin().powi(2);
        for l in 1..ny {
            let ky = l as f64 * PI / ny as f64;
            let ey = (ky * x.1 as f64).sin() * (ky * y.1 as f64).sin();
            let lam_y = 4.0 / (h * h) * (ky / 2.0).sin().powi(2);
            total += ex * ey / (lam_x + lam_y);
        }
    }
    4.0 / (lx * ly) * total
}

#[test]
fn square_matches_sine_transform_oracle() {
    let g = GreenFn::for_shape(Shape::Rect { lx: 1.0, ly: 1.0 }).unwrap();
    let series = g.green([0.3, 0.4], [0.6, 0.7]).unwrap();
    let n = 640;
    let h = 1.0 / n as f64;
    let grid = discrete_green_rect(n, n, h, (192, 256), (384, 448));
    assert!((series - grid).abs() < 1e-4, "{series} vs {grid}");
    // Frozen from the oracle.
    assert!((grid - 0.059_374_918_8).abs() < 1e-9, "{grid}");
}

#[test]
fn long_rectangle_matches_sine_transform_oracle() {
    let g = GreenFn::for_shape(Shape::Rect { lx: 2.0, ly: 1.0 }).unwrap();
    let n = 320;
    let h = 1.0 / n as f64;
    for (x, y) in [((64, 96), (448, 224)), ((320, 160), (352, 192)), ((32, 32), (600, 300))] {
        let xc = [x.0 as f64 * h, x.1 as f64 * h];
        let yc = [y.0 as f64 * h, y.1 as f64 * h];
        let series = g.green(xc, yc).unwrap();
        let grid = discrete_green_rect(2 * n, n, h, x, y);
        assert!((series - grid).abs() < 1e-4, "{xc:?} {yc:?}: {series} vs {grid}");
    }
}

/// Shortley–Weller point-source solve on the disk grid.
fn discrete_green_disk(radius: f64, n: usize, source: [f64; 2]) -> (GridDomain, Vec<f64>) {
    let d = GridDomain::disk(radius, n).unwrap();
    let m = d.n_unknowns();
    let mut trips = Vec::new();
    for u in 0..m {
        let st = d.stencil(u);
        trips.push(Triplet::new(u, u, st.diag));
        for (v, c) in st.neighbours {
            trips.push(Triplet::new(u, v, c));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &trips).unwrap();
    let sym = SymbolicLu::try_new(a.symbolic()).unwrap();
    let lu = Lu::try_new_with_symbolic(sym, a.as_ref()).unwrap();
    let mut b = Col::<f64>::zeros(m);
    let k = (0..d.len())
        .min_by(|&i, &j| {
            let di = (d.coords(i)[0] - source[0]).hypot(d.coords(i)[1] - source[1]);
            let dj = (d.coords(j)[0] - source[0]).hypot(d.coords(j)[1] - source[1]);
            di.total_cmp(&dj)
        })
        .unwrap();
    let u = d.unknown_of[k].expect("source is interior");
    // The stencil is Δ_h, so −Δ_h u = δ_h means a negative source.
    b[u] = -1.0 / (d.h * d.h);
    let sol = lu.solve(&b);
    let mut v = vec![0.0; d.len()];
    for (i, &node) in d.interior.iter().enumerate() {
        v[node] = sol[i];
    }
    (d, v)
}

#[test]
fn disk_matches_grid_oracle() {
    // Both points are nodes of the h = 1/400 grid.
    let (d, v) = discrete_green_disk(1.0, 400, [0.2, 0.1]);
    let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
    for x in [[-0.3, 0.35], [0.5, -0.5], [0.0, 0.8]] {
        let grid = d.interpolate(&v, x).unwrap();
        let exact = g.green(x, [0.2, 0.1]).unwrap();
        assert!((grid - exact).abs() < 1e-4, "{x:?}: {grid} vs {exact}");
    }
}

#[test]
fn symmetric_disk_pair_has_no_interior_critical_point() {
    let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
    let slice = |d: f64| kr_hamiltonian(&g, &KrConfig::new(vec![[-d, 0.0], [d, 0.0]], vec![1.0, 1.0])).unwrap();
    // Brute-force scan of the symmetric slice: strictly decreasing, so no
    // symmetric pair is critical.
    let values: Vec<f64> = (1..1000).map(|i| slice(i as f64 * 1e-3)).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    // Closed form on the slice: π ℋ = ln(1 − d²) + ln((1 + d²)/(2d)).
    for d in [0.1f64, 0.4, 0.8] {
        let closed = ((1.0 - d * d).ln() + ((1.0 + d * d) / (2.0 * d)).ln()) / PI;
        assert!((slice(d) - closed).abs() < 1e-13);
    }
    let search = kr_critical(&g, &KrConfig::new(vec![[-0.3, 0.0], [0.3, 0.0]], vec![1.0, 1.0]), &KrSearch::default());
    assert!(
        matches!(
            search,
            Err(GreenError::BoundaryEscape { .. }
                | GreenError::CollisionDetected { .. }
                | GreenError::NonConvergence { .. })
        ),
        "{search:?}"
    );
}

#[test]
fn symmetric_pair_gradient_is_horizontal() {
    let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
    let grad = kr_gradient(&g, &KrConfig::new(vec![[-0.4, 0.0], [0.4, 0.0]], vec![1.3, 1.3])).unwrap();
    assert!(grad[0][1].abs() < 1e-14 && grad[1][1].abs() < 1e-14);
    assert!((grad[0][0] + grad[1][0]).abs() < 1e-13);
}

#[test]
fn single_point_at_centre_is_critical() {
    let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
    let grad = kr_gradient(&g, &KrConfig::new(vec![[0.0, 0.0]], vec![1.0])).unwrap();
    assert_eq!(grad[0], [0.0, 0.0]);
    let rect = GreenFn::for_shape(Shape::Rect { lx: 2.0, ly: 1.0 }).unwrap();
    let found = kr_critical(&rect, &KrConfig::new(vec![[0.3, 0.8]], vec![1.0]), &KrSearch::default()).unwrap();
    let q = found.config.points[0];
    assert!((q[0] - 1.0).abs() < 1e-8 && (q[1] - 0.5).abs() < 1e-8, "{q:?}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
    let same = KrConfig::new(vec![[0.1, 0.1], [0.1, 0.1]], vec![1.0, 1.0]);
    assert!(matches!(kr_hamiltonian(&g, &same), Err(GreenError::CoincidentPoints(..))));
    let outside = KrConfig::new(vec![[1.5, 0.0]], vec![1.0]);
    assert!(matches!(kr_gradient(&g, &outside), Err(GreenError::ExteriorPoint(..))));
    let mismatched = KrConfig::new(vec![[0.1, 0.1]], vec![1.0, 2.0]);
    assert!(matches!(kr_hamiltonian(&g, &mismatched), Err(GreenError::InvalidConfig(_))));
}
