#![allow(dead_code)]

use std::collections::BTreeSet;

use exprclone_core::geom::{incircle, orient2d};
use exprclone_core::{FeaturePointSet, ImageSize, Organ, Point};

pub fn point_set(pts: &[Point], size: u32) -> FeaturePointSet {
    FeaturePointSet::new(pts.iter().map(|&p| (Organ::Contour, p)), ImageSize::new(size, size)).unwrap()
}

/// All triangles whose circumcircle has no other point strictly inside.
pub fn brute_force_delaunay(pts: &[Point]) -> BTreeSet<[usize; 3]> {
    let n = pts.len();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let o = orient2d(pts[a], pts[b], pts[c]);
                if o == 0.0 {
                    continue;
                }
                let (p, q, r) = if o > 0.0 { (a, b, c) } else { (a, c, b) };
                let empty = (0..n)
                    .filter(|&d| d != a && d != b && d != c)
                    .all(|d| incircle(pts[p], pts[q], pts[r], pts[d]) < 0.0);
                if empty {
                    out.insert([a, b, c]);
                }
            }
        }
    }
    out
}

/// Number of points on the convex hull boundary, collinear ones included.
pub fn hull_size(pts: &[Point]) -> usize {
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            (0..n).any(|j| {
                if j == i || pts[j] == pts[i] {
                    return false;
                }
                let sides: Vec<f64> = (0..n).map(|k| orient2d(pts[i], pts[j], pts[k])).collect();
                sides.iter().all(|&s| s >= 0.0) || sides.iter().all(|&s| s <= 0.0)
            })
        })
        .count()
}

/// Largest in-circle violation of any non-member point, or `None` when
/// some triangle is not counter-clockwise.
pub fn worst_incircle(pts: &[Point], triangles: &[[usize; 3]]) -> Option<f64> {
    let mut worst = f64::NEG_INFINITY;
    for t in triangles {
        let [a, b, c] = t.map(|v| pts[v]);
        if orient2d(a, b, c) <= 0.0 {
            return None;
        }
        for (d, &p) in pts.iter().enumerate() {
            if !t.contains(&d) {
                worst = worst.max(incircle(a, b, c, p));
            }
        }
    }
    Some(worst)
}
