//! Independent checks: brute-force Delaunay, dense covariance PCA, warp
//! round trips and the spring-solver properties.

mod common;

use std::collections::BTreeSet;

use common::{brute_force_delaunay, hull_size, point_set};
use exprclone_core::eigenface::train_basis;
use exprclone_core::elastic::{NeighborSpring, PointSprings, SpringSystem, GRID_STEP};
use exprclone_core::geom::{incircle, orient2d};
use exprclone_core::mesh::piecewise_affine_warp;
use exprclone_core::{delaunay_triangulate, Point, RasterImage};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
        .collect()
}

#[test]
fn delaunay_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let n = rng.gen_range(3..13);
        let pts = random_points(&mut rng, n, 100.0);
        let mesh = delaunay_triangulate(&point_set(&pts, 101)).unwrap();
        let ours: BTreeSet<[usize; 3]> = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort();
                s
            })
            .collect();
        assert_eq!(ours, brute_force_delaunay(&pts));
    }
}

#[test]
fn delaunay_worked_examples() {
    let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(x, y)| Point::new(x, y));
    let mesh = delaunay_triangulate(&point_set(&square, 2)).unwrap();
    assert_eq!(mesh.triangles().len(), 2);
    for t in mesh.triangles() {
        for d in 0..4 {
            if !t.contains(&d) {
                let [a, b, c] = t.map(|v| square[v]);
                assert!(incircle(a, b, c, square[d]) <= 1e-9);
            }
        }
    }

    let five = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (4.0, 6.0)].map(|(x, y)| Point::new(x, y));
    let mesh = delaunay_triangulate(&point_set(&five, 11)).unwrap();
    assert_eq!(mesh.triangles().len(), 2 * 5 - 2 - 4);
    let brute = brute_force_delaunay(&five);
    assert_eq!(brute.len(), 4);
}

#[test]
fn neighbors_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts = random_points(&mut rng, 40, 200.0);
    let mesh = delaunay_triangulate(&point_set(&pts, 201)).unwrap();
    for v in 0..pts.len() {
        let nv = mesh.neighbors_of(v).unwrap();
        assert!(!nv.contains(&v));
        for &u in &nv {
            assert!(mesh.neighbors_of(u).unwrap().contains(&v));
        }
    }
}

#[test]
fn delaunay_large_random_sets_pass_circle_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let pts = random_points(&mut rng, 50, 255.0);
        let mesh = delaunay_triangulate(&point_set(&pts, 256)).unwrap();
        assert_eq!(mesh.triangles().len(), 2 * 50 - 2 - hull_size(&pts));
        for t in mesh.triangles() {
            let [a, b, c] = t.map(|v| pts[v]);
            assert!(orient2d(a, b, c) > 0.0);
            for (d, &p) in pts.iter().enumerate() {
                if !t.contains(&d) {
                    assert!(incircle(a, b, c, p) <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn grid_points_with_cocircular_ties_are_deterministic() {
    let pts: Vec<Point> = (0..5)
        .flat_map(|y| (0..5).map(move |x| Point::new(f64::from(x) * 10.0, f64::from(y) * 10.0)))
        .collect();
    let a = delaunay_triangulate(&point_set(&pts, 41)).unwrap();
    let b = delaunay_triangulate(&point_set(&pts, 41)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.triangles().len(), 2 * 25 - 2 - 16);
    // every square cell is split along its smaller-id diagonal
    for t in a.triangles() {
        let [p, q, r] = t.map(|v| pts[v]);
        assert!((orient2d(p, q, r) - 100.0).abs() < 1e-9);
    }
}

fn psnr(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    10.0 * (255.0 * 255.0 / mse).log10()
}

#[test]
fn warp_round_trip_psnr() {
    let size = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut base = vec![
        Point::new(0.0, 0.0),
        Point::new(127.0, 0.0),
        Point::new(0.0, 127.0),
        Point::new(127.0, 127.0),
    ];
    base.extend(
        random_points(&mut rng, 16, 100.0)
            .into_iter()
            .map(|p| p + Point::new(14.0, 14.0)),
    );
    let a = point_set(&base, size);
    let moved: Vec<Point> = base
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if i < 4 {
                p
            } else {
                p + Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
            }
        })
        .collect();
    let mesh_a = delaunay_triangulate(&a).unwrap();
    let mesh_b = mesh_a.with_vertices(a.with_positions(&moved).unwrap()).unwrap();
    // smooth content so bilinear resampling loss stays small
    let img = RasterImage::from_fn(size, size, 1, |x, y, _| {
        128.0 + 60.0 * (f64::from(x) * 0.07).sin() * (f64::from(y) * 0.05).cos()
    });
    let there = piecewise_affine_warp(&img, &mesh_a, &mesh_b).unwrap();
    let back = piecewise_affine_warp(&there, &mesh_b, &mesh_a).unwrap();
    let p = psnr(img.samples(), back.samples());
    assert!(p > 35.0, "psnr {p}");
}

/// Six random 5x5 images; oracle is a dense eigendecomposition of the
/// 25x25 sample covariance.
#[test]
fn pca_matches_dense_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let images: Vec<RasterImage> = (0..6)
        .map(|_| RasterImage::from_fn(5, 5, 1, |_, _, _| rng.gen_range(0.0..255.0)))
        .collect();
    let basis = train_basis(&images, Some(5)).unwrap();
    assert_eq!(basis.len(), 5);

    let data = DMatrix::from_fn(6, 25, |i, j| images[i].samples()[j]);
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(6, 25, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / 5.0;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..25).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    for (k, &idx) in order.iter().take(5).enumerate() {
        let expected = eig.eigenvalues[idx];
        let got = basis.eigenvalues()[k];
        assert!(
            ((got - expected) / expected).abs() < 1e-8,
            "eigenvalue {k}: {got} vs {expected}"
        );
        let oracle = eig.eigenvectors.column(idx);
        let comp = &basis.components()[k];
        let dot: f64 = comp.iter().zip(oracle.iter()).map(|(a, b)| a * b).sum();
        let sign = dot.signum();
        let max_diff = comp
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - sign * b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-8, "component {k} differs by {max_diff}");
    }
}

#[test]
fn pca_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let images: Vec<RasterImage> = (0..8)
        .map(|_| RasterImage::from_fn(6, 4, 3, |_, _, _| rng.gen_range(0.0..255.0)))
        .collect();
    let basis = train_basis(&images, None).unwrap();
    assert_eq!(basis.len(), 7);
    let comps = basis.components();
    for (i, a) in comps.iter().enumerate() {
        let max = a
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(max >= 0.0);
        for (j, b) in comps.iter().enumerate() {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((d - expected).abs() < 1e-8);
        }
    }
    assert!(basis.eigenvalues().windows(2).all(|w| w[0] >= w[1]));

    for img in &images {
        let gray = img.luminance();
        let centered: Vec<f64> = gray.samples().iter().zip(basis.mean()).map(|(v, m)| v - m).collect();
        let coeffs = basis.project(img).unwrap();
        let rec = basis.reconstruct(&coeffs);
        let rms = (gray
            .samples()
            .iter()
            .zip(&rec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / rec.len() as f64)
            .sqrt();
        assert!(rms < 1e-6, "reconstruction rms {rms}");
        let coeff_norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        let centered_norm = centered.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(coeff_norm <= centered_norm + 1e-9);
    }

    // an unseen image still obeys the bound
    let other = RasterImage::from_fn(6, 4, 3, |x, y, c| f64::from(x * 40 + y * 3 + c as u32));
    let coeffs = basis.project(&other).unwrap();
    let centered_norm = other
        .luminance()
        .samples()
        .iter()
        .zip(basis.mean())
        .map(|(v, m)| (v - m) * (v - m))
        .sum::<f64>()
        .sqrt();
    assert!(coeffs.iter().map(|c| c * c).sum::<f64>().sqrt() <= centered_norm + 1e-9);
}

fn line_system(lambda: f64) -> SpringSystem {
    SpringSystem {
        points: vec![PointSprings {
            global: Point::new(0.0, 0.0),
            local: Point::new(10.0, 0.0),
            neighbors: vec![NeighborSpring {
                anchor: Point::new(-50.0, 0.0),
                rest_length: 50.0,
            }],
        }],
        k_neighbor: 1.0,
        k_local: lambda,
        bounds: None,
    }
}

#[test]
fn pull_toward_local_grows_with_lambda() {
    let mut last = -1.0;
    for lambda in [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 100.0] {
        let s = line_system(lambda).solve_point(0);
        let expected = 10.0 * lambda / (1.0 + lambda);
        assert!((s.position.x - expected).abs() <= GRID_STEP, "lambda {lambda}");
        let d = s.position.x;
        assert!(d >= last);
        last = d;
    }
}

fn arb_system() -> impl Strategy<Value = SpringSystem> {
    // quarter-pixel coordinates keep every difference exact
    let q = || (-200i32..200).prop_map(|v| f64::from(v) * 0.25);
    (
        (q(), q()),
        (-24i32..24, -24i32..24),
        prop::collection::vec((q(), q()), 1..7),
        0u32..6,
    )
        .prop_map(|((ax, ay), (dx, dy), nbrs, lpow)| {
            let global = Point::new(ax, ay);
            let local = global + Point::new(f64::from(dx) * 0.25, f64::from(dy) * 0.25);
            let neighbors = nbrs
                .into_iter()
                .map(|(bx, by)| {
                    let anchor = Point::new(bx, by);
                    NeighborSpring {
                        anchor,
                        rest_length: anchor.distance(global),
                    }
                })
                .collect();
            SpringSystem {
                points: vec![PointSprings {
                    global,
                    local,
                    neighbors,
                }],
                k_neighbor: 1.0,
                k_local: 0.125 * f64::from(1u32 << lpow),
                bounds: None,
            }
        })
}

proptest! {
    #[test]
    fn solution_is_grid_optimal(sys in arb_system()) {
        let sol = sys.solve_point(0);
        prop_assert!(sol.window.contains(sol.position));
        prop_assert!(sol.residual >= 0.0);
        let a = sys.points[0].global;
        let mut x = a.x;
        while x - GRID_STEP >= sol.window.min.x { x -= GRID_STEP; }
        while x <= sol.window.max.x {
            let mut y = a.y;
            while y - GRID_STEP >= sol.window.min.y { y -= GRID_STEP; }
            while y <= sol.window.max.y {
                prop_assert!(sol.residual <= sys.net_force(0, Point::new(x, y)).norm());
                y += GRID_STEP;
            }
            x += GRID_STEP;
        }
    }

    #[test]
    fn solution_translates_exactly(sys in arb_system(), tx in -64i32..64, ty in -64i32..64) {
        let t = Point::new(f64::from(tx) * 0.5, f64::from(ty) * 0.5);
        let mut moved = sys.clone();
        let p = &mut moved.points[0];
        p.global += t;
        p.local += t;
        for n in &mut p.neighbors {
            n.anchor += t;
        }
        let a = sys.solve_point(0).position;
        let b = moved.solve_point(0).position;
        prop_assert_eq!(b, a + t);
    }

    #[test]
    fn solution_ignores_uniform_stiffness_scale(sys in arb_system(), pow in 1u32..8) {
        let c = f64::from(1u32 << pow);
        let mut scaled = sys.clone();
        scaled.k_neighbor *= c;
        scaled.k_local *= c;
        prop_assert_eq!(sys.solve_point(0).position, scaled.solve_point(0).position);
    }
}
