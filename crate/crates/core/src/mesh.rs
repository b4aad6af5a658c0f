//! Delaunay triangulation of feature points and piecewise-affine warping
//! between two meshes that share connectivity.
//!
//! Triangles are stored with positive [`orient2d`] orientation in raw pixel
//! coordinates, rotated so the smallest vertex id comes first, and the list
//! is sorted lexicographically.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::face_model::{FeaturePointSet, ImageSize};
use crate::geom::{incircle, orient2d, Point};
use crate::image::RasterImage;

/// Tolerance on the in-circle determinant.
pub const INCIRCLE_EPS: f64 = 1e-9;
/// Minimum triangle area in px².
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

pub type Triangle = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: FeaturePointSet,
    triangles: Vec<Triangle>,
}

impl TriangleMesh {
    pub fn vertices(&self) -> &FeaturePointSet {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Reuses this mesh's connectivity over a new point set with the same
    /// schema. Fails if any triangle collapses.
    pub fn with_vertices(&self, vertices: FeaturePointSet) -> Result<TriangleMesh> {
        self.vertices.check_schema(&vertices)?;
        let mesh = TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
        };
        mesh.check_non_degenerate()?;
        Ok(mesh)
    }

    fn check_non_degenerate(&self) -> Result<()> {
        for &[a, b, c] in &self.triangles {
            let area = 0.5 * orient2d(self.vertices.pos(a), self.vertices.pos(b), self.vertices.pos(c));
            if area.abs() <= MIN_TRIANGLE_AREA {
                return Err(Error::DegenerateTriangle(a, b, c));
            }
        }
        Ok(())
    }

    /// All vertices sharing an edge with `vid`.
    pub fn neighbors_of(&self, vid: usize) -> Result<BTreeSet<usize>> {
        if vid >= self.vertices.len() {
            return Err(Error::UnknownVertex(vid));
        }
        Ok(self
            .triangles
            .iter()
            .filter(|t| t.contains(&vid))
            .flat_map(|t| t.iter().copied())
            .filter(|&v| v != vid)
            .collect())
    }

    /// Edges with exactly one adjacent triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        edge_map(&self.triangles)
            .into_iter()
            .filter(|(_, tris)| tris.len() == 1)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn same_connectivity(&self, other: &TriangleMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.triangles == other.triangles
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn edge_map(triangles: &[Triangle]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (ti, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            map.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(ti);
        }
    }
    map
}

fn canonical(t: Triangle) -> Triangle {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

/// Delaunay triangulation: an incremental sweep over the points sorted by
/// `(x, y)` followed by Lawson edge flips. Cocircular ties keep the diagonal
/// with the lexicographically smaller id pair.
pub fn delaunay_triangulate(set: &FeaturePointSet) -> Result<TriangleMesh> {
    let pts = set.positions();
    let n = pts.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .x
            .total_cmp(&pts[b].x)
            .then(pts[a].y.total_cmp(&pts[b].y))
            .then(a.cmp(&b))
    });

    // Coincident points cannot be triangulated.
    for w in order.windows(2) {
        if pts[w[0]] == pts[w[1]] {
            return Err(Error::DegenerateTriangle(w[0], w[1], w[1]));
        }
    }

    // First point that is not collinear with the leading run.
    let (o0, o1) = (order[0], order[1]);
    let first_off = (2..n)
        .find(|&k| orient2d(pts[o0], pts[o1], pts[order[k]]) != 0.0)
        .ok_or(Error::Collinear)?;

    let mut triangles: Vec<Triangle> = Vec::with_capacity(2 * n);
    let apex = order[first_off];
    let chain = &order[..first_off];
    for w in chain.windows(2) {
        triangles.push(ccw(&pts, w[0], w[1], apex));
    }

    // Hull as a CCW cycle.
    let mut hull: Vec<usize> = if orient2d(pts[chain[0]], pts[chain[chain.len() - 1]], pts[apex]) > 0.0 {
        let mut h = chain.to_vec();
        h.push(apex);
        h
    } else {
        let mut h = vec![apex];
        h.extend(chain.iter().rev());
        h
    };

    for &p in &order[first_off + 1..] {
        let m = hull.len();
        let visible: Vec<bool> = (0..m)
            .map(|i| orient2d(pts[hull[i]], pts[hull[(i + 1) % m]], pts[p]) < 0.0)
            .collect();
        // Visible edges form one contiguous run on the cycle.
        let start = (0..m)
            .find(|&i| visible[i] && !visible[(i + m - 1) % m])
            .expect("a point right of the sweep line sees at least one hull edge");
        let mut count = 0;
        while visible[(start + count) % m] {
            let i = (start + count) % m;
            triangles.push(ccw(&pts, hull[i], hull[(i + 1) % m], p));
            count += 1;
        }
        // Replace the interior vertices of the visible chain with p.
        let first = hull[start];
        let last = hull[(start + count) % m];
        let mut next = Vec::with_capacity(m + 1);
        let mut i = (start + count) % m;
        loop {
            next.push(hull[i]);
            if hull[i] == first {
                break;
            }
            i = (i + 1) % m;
        }
        next.push(p);
        debug_assert_eq!(next[0], last);
        hull = next;
    }

    legalize(&pts, &mut triangles);

    let mut triangles: Vec<Triangle> = triangles.into_iter().map(canonical).collect();
    triangles.sort_unstable();
    let mesh = TriangleMesh {
        vertices: set.clone(),
        triangles,
    };
    mesh.check_non_degenerate()?;
    Ok(mesh)
}

fn ccw(pts: &[Point], a: usize, b: usize, c: usize) -> Triangle {
    if orient2d(pts[a], pts[b], pts[c]) > 0.0 {
        [a, b, c]
    } else {
        [a, c, b]
    }
}

fn opposite(t: &Triangle, a: usize, b: usize) -> usize {
    *t.iter().find(|&&v| v != a && v != b).unwrap()
}

/// Whether edge `(a, b)` with opposite vertices `c` and `d` must be flipped.
fn should_flip(pts: &[Point], a: usize, b: usize, c: usize, d: usize) -> bool {
    // The flipped pair must both be proper triangles.
    let s1 = orient2d(pts[c], pts[d], pts[a]);
    let s2 = orient2d(pts[c], pts[d], pts[b]);
    if s1 == 0.0 || s2 == 0.0 || (s1 > 0.0) == (s2 > 0.0) {
        return false;
    }
    let [x, y, z] = ccw(pts, a, b, c);
    let det = incircle(pts[x], pts[y], pts[z], pts[d]);
    if det > INCIRCLE_EPS {
        return true;
    }
    det >= -INCIRCLE_EPS && edge_key(c, d) < edge_key(a, b)
}

fn legalize(pts: &[Point], triangles: &mut [Triangle]) {
    // Each pass flips every illegal edge whose two triangles were not
    // already changed in that pass, in edge-key order. Each flip either
    // lowers the lifted surface or swaps a cocircular diagonal for a smaller
    // one, so this terminates; the cap guards against tolerance-induced
    // cycling.
    let cap = 10 * triangles.len() * triangles.len() + 100;
    let mut touched = vec![false; triangles.len()];
    for _ in 0..cap {
        touched.fill(false);
        let mut flipped = false;
        for ((a, b), tris) in edge_map(triangles) {
            let [t0, t1] = tris[..] else { continue };
            if touched[t0] || touched[t1] {
                continue;
            }
            let c = opposite(&triangles[t0], a, b);
            let d = opposite(&triangles[t1], a, b);
            if should_flip(pts, a, b, c, d) {
                triangles[t0] = ccw(pts, c, d, a);
                triangles[t1] = ccw(pts, c, d, b);
                touched[t0] = true;
                touched[t1] = true;
                flipped = true;
            }
        }
        if !flipped {
            return;
        }
    }
    log::warn!("delaunay legalization hit its flip cap");
}

/// Per-pixel triangle lookup for a destination mesh. The first triangle in
/// list order that contains the pixel center wins.
pub struct Coverage {
    width: u32,
    owner: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl Coverage {
    pub fn new(mesh: &TriangleMesh, width: u32, height: u32) -> Self {
        let mut owner = vec![NONE; width as usize * height as usize];
        let verts = mesh.vertices();
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let [p0, p1, p2] = t.map(|v| verts.pos(v));
            let min_x = p0.x.min(p1.x).min(p2.x).floor().max(0.0);
            let max_x = p0.x.max(p1.x).max(p2.x).ceil().min(f64::from(width) - 1.0);
            let min_y = p0.y.min(p1.y).min(p2.y).floor().max(0.0);
            let max_y = p0.y.max(p1.y).max(p2.y).ceil().min(f64::from(height) - 1.0);
            if min_x > max_x || min_y > max_y {
                continue;
            }
            for y in min_y as u32..=max_y as u32 {
                for x in min_x as u32..=max_x as u32 {
                    let idx = y as usize * width as usize + x as usize;
                    if owner[idx] != NONE {
                        continue;
                    }
                    let p = Point::new(f64::from(x), f64::from(y));
                    if barycentric(p0, p1, p2, p).is_some() {
                        owner[idx] = ti as u32;
                    }
                }
            }
        }
        Coverage { width, owner }
    }

    pub fn triangle_at(&self, x: u32, y: u32) -> Option<usize> {
        let t = self.owner[y as usize * self.width as usize + x as usize];
        (t != NONE).then_some(t as usize)
    }

    pub fn is_covered(&self, x: u32, y: u32) -> bool {
        self.triangle_at(x, y).is_some()
    }
}

/// Barycentric weights of `p`, or `None` when outside (with a small
/// tolerance so shared edges are covered).
fn barycentric(a: Point, b: Point, c: Point, p: Point) -> Option<[f64; 3]> {
    let area = orient2d(a, b, c);
    if area.abs() <= 2.0 * MIN_TRIANGLE_AREA {
        return None;
    }
    let w0 = orient2d(b, c, p) / area;
    let w1 = orient2d(c, a, p) / area;
    let w2 = orient2d(a, b, p) / area;
    const TOL: f64 = -1e-9;
    (w0 >= TOL && w1 >= TOL && w2 >= TOL).then_some([w0, w1, w2])
}

/// Backward warp: every destination pixel inside a `dst_mesh` triangle
/// samples `src` at the corresponding position in `src_mesh`; everything
/// else copies the source pixel at the same coordinates.
pub fn piecewise_affine_warp(
    src: &RasterImage,
    src_mesh: &TriangleMesh,
    dst_mesh: &TriangleMesh,
) -> Result<RasterImage> {
    warp_to_size(src, src_mesh, dst_mesh, src.size())
}

/// [`piecewise_affine_warp`] onto a canvas of a different size. Uncovered
/// pixels sample the source at the same coordinates, clamped to its edge.
pub fn warp_to_size(
    src: &RasterImage,
    src_mesh: &TriangleMesh,
    dst_mesh: &TriangleMesh,
    size: ImageSize,
) -> Result<RasterImage> {
    if !src_mesh.same_connectivity(dst_mesh) {
        return Err(Error::ConnectivityMismatch);
    }
    let (w, h, ch) = (size.width, size.height, src.channels());
    let coverage = Coverage::new(dst_mesh, w, h);
    let sv = src_mesh.vertices();
    let dv = dst_mesh.vertices();
    let tris = dst_mesh.triangles();

    let mut out = RasterImage::filled(w, h, ch, 0.0);
    out.samples_mut()
        .par_chunks_mut(w as usize * ch)
        .enumerate()
        .for_each(|(y, row)| {
            let y = y as u32;
            for x in 0..w {
                let (sx, sy) = match coverage.triangle_at(x, y) {
                    Some(ti) => {
                        let t = tris[ti];
                        let p = Point::new(f64::from(x), f64::from(y));
                        let [d0, d1, d2] = t.map(|v| dv.pos(v));
                        let wts = barycentric(d0, d1, d2, p).expect("covered pixel has weights");
                        let [s0, s1, s2] = t.map(|v| sv.pos(v));
                        (
                            wts[0] * s0.x + wts[1] * s1.x + wts[2] * s2.x,
                            wts[0] * s0.y + wts[1] * s1.y + wts[2] * s2.y,
                        )
                    }
                    None => (f64::from(x), f64::from(y)),
                };
                for c in 0..ch {
                    row[x as usize * ch + c] = src.sample_bilinear(sx, sy, c);
                }
            }
        });
    Ok(out)
}
