//! Spring equilibrium between the global and the local landmark positions.
//!
//! Each landmark `P` is tied to its mesh neighbors (pinned at their global
//! positions, rest length equal to the global distance) and to its local
//! position `A'`. The solved position minimizes the magnitude of the net
//! Hooke force over a small search grid around `A` and `A'`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::face_model::{FeaturePointSet, ImageSize};
use crate::geom::Point;
use crate::mesh::TriangleMesh;

/// Grid spacing of the equilibrium search, px.
pub const GRID_STEP: f64 = 0.25;
/// Dilation of the `{A, A'}` bounding box, px.
pub const WINDOW_MARGIN: f64 = 1.0;
const UNIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSpring {
    pub anchor: Point,
    pub rest_length: f64,
}

/// Springs acting on one landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSprings {
    /// Global position `A`.
    pub global: Point,
    /// Local position `A'`.
    pub local: Point,
    pub neighbors: Vec<NeighborSpring>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringSystem {
    pub points: Vec<PointSprings>,
    /// Neighbor elasticity `k_N`.
    pub k_neighbor: f64,
    /// Local-anchor elasticity `k_A'`.
    pub k_local: f64,
    /// Search windows are clipped to these bounds when set.
    pub bounds: Option<ImageSize>,
}

/// Axis-aligned search rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub min: Point,
    pub max: Point,
}

impl Window {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSolution {
    pub position: Point,
    pub residual: f64,
    pub window: Window,
}

pub type SolveReport = Vec<PointSolution>;

#[inline]
fn unit_toward(from: Point, to: Point) -> (f64, Point) {
    let d = to - from;
    let len = d.norm();
    if len < UNIT_EPS {
        (len, Point::ZERO)
    } else {
        (len, d * (1.0 / len))
    }
}

impl SpringSystem {
    /// Builds the springs from a reference mesh. `lambda` is `k_A' / k_N`
    /// with `k_N = 1`.
    pub fn from_mesh(
        global_pts: &FeaturePointSet,
        local_pts: &FeaturePointSet,
        mesh: &TriangleMesh,
        lambda: f64,
    ) -> Result<Self> {
        global_pts.check_schema(local_pts)?;
        global_pts.check_schema(mesh.vertices())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "elasticity ratio {lambda} must be finite and >= 0"
            )));
        }
        let points = (0..global_pts.len())
            .map(|i| {
                let a = global_pts.pos(i);
                let neighbors = mesh
                    .neighbors_of(i)?
                    .into_iter()
                    .map(|j| {
                        let b = global_pts.pos(j);
                        NeighborSpring {
                            anchor: b,
                            rest_length: a.distance(b),
                        }
                    })
                    .collect();
                Ok(PointSprings {
                    global: a,
                    local: local_pts.pos(i),
                    neighbors,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SpringSystem {
            points,
            k_neighbor: 1.0,
            k_local: lambda,
            bounds: Some(global_pts.size()),
        })
    }

    /// Net force on point `i` placed at `p`.
    pub fn net_force(&self, i: usize, p: Point) -> Point {
        let springs = &self.points[i];
        let mut f = Point::ZERO;
        for n in &springs.neighbors {
            let (len, e) = unit_toward(p, n.anchor);
            f += e * (self.k_neighbor * (len - n.rest_length));
        }
        let (len, e) = unit_toward(p, springs.local);
        f += e * (self.k_local * len);
        f
    }

    pub fn window(&self, i: usize) -> Window {
        let s = &self.points[i];
        let margin = Point::new(WINDOW_MARGIN, WINDOW_MARGIN);
        let mut min = Point::new(s.global.x.min(s.local.x), s.global.y.min(s.local.y)) - margin;
        let mut max = Point::new(s.global.x.max(s.local.x), s.global.y.max(s.local.y)) + margin;
        if let Some(b) = self.bounds {
            // A and A' come from validated sets, so clipping keeps both inside.
            min.x = min.x.max(0.0);
            min.y = min.y.max(0.0);
            max.x = max.x.min(f64::from(b.width.saturating_sub(1)));
            max.y = max.y.min(f64::from(b.height.saturating_sub(1)));
        }
        Window { min, max }
    }

    /// Grid search for the minimum net-force magnitude. The grid is anchored
    /// at `A` with spacing [`GRID_STEP`]; `A'` is added as an extra
    /// candidate so both limit configurations are reachable exactly. Ties go
    /// to the candidate closer to `A`, then to the smaller `(x, y)`.
    pub fn solve_point(&self, i: usize) -> PointSolution {
        let s = &self.points[i];
        let window = self.window(i);
        let a = s.global;

        let i_lo = ((window.min.x - a.x) / GRID_STEP).ceil() as i64;
        let i_hi = ((window.max.x - a.x) / GRID_STEP).floor() as i64;
        let j_lo = ((window.min.y - a.y) / GRID_STEP).ceil() as i64;
        let j_hi = ((window.max.y - a.y) / GRID_STEP).floor() as i64;

        let mut best: Option<(f64, f64, Point)> = None;
        let mut consider = |p: Point| {
            let residual = self.net_force(i, p).norm();
            let dist = p.distance(a);
            let better = match best {
                None => true,
                Some((r, d, q)) => {
                    residual < r || (residual == r && (dist < d || (dist == d && (p.x, p.y) < (q.x, q.y))))
                }
            };
            if better {
                best = Some((residual, dist, p));
            }
        };
        for gi in i_lo..=i_hi {
            let x = a.x + gi as f64 * GRID_STEP;
            for gj in j_lo..=j_hi {
                consider(Point::new(x, a.y + gj as f64 * GRID_STEP));
            }
        }
        consider(s.local);

        let (residual, _, position) = best.expect("window holds at least A'");
        PointSolution {
            position,
            residual,
            window,
        }
    }
}

/// Solves every landmark independently with neighbors pinned at their
/// global positions. `lambda = k_A' / k_N`.
pub fn solve_all(
    global_pts: &FeaturePointSet,
    local_pts: &FeaturePointSet,
    mesh: &TriangleMesh,
    lambda: f64,
) -> Result<(FeaturePointSet, SolveReport)> {
    let sys = SpringSystem::from_mesh(global_pts, local_pts, mesh, lambda)?;
    let report: SolveReport = (0..sys.points.len())
        .into_par_iter()
        .map(|i| sys.solve_point(i))
        .collect();
    let positions: Vec<Point> = report.iter().map(|s| s.position).collect();
    Ok((global_pts.with_positions(&positions)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One point with a single neighbor on the x axis.
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
    fn force_at_anchors() {
        let sys = line_system(2.0);
        // at A only the local spring pulls
        assert_eq!(sys.net_force(0, Point::new(0.0, 0.0)), Point::new(20.0, 0.0));
        // at A' only the neighbor pulls back toward A
        assert_eq!(sys.net_force(0, Point::new(10.0, 0.0)), Point::new(-10.0, 0.0));
        for x in [0.0, 2.5, 7.0, 10.0] {
            let f = sys.net_force(0, Point::new(x, 0.0));
            assert!((f.x - (2.0 * (10.0 - x) - x)).abs() < 1e-12);
            assert_eq!(f.y, 0.0);
        }
    }

    #[test]
    fn limits() {
        let sys = line_system(0.0);
        let s = sys.solve_point(0);
        assert_eq!((s.position, s.residual), (Point::new(0.0, 0.0), 0.0));

        let mut sys = line_system(1.0);
        sys.k_neighbor = 0.0;
        let s = sys.solve_point(0);
        assert_eq!((s.position, s.residual), (Point::new(10.0, 0.0), 0.0));
    }

    #[test]
    fn symmetric_balance() {
        let s = line_system(1.0).solve_point(0);
        assert!((s.position.x - 5.0).abs() <= GRID_STEP);
        assert!(s.window.contains(s.position));
    }

    #[test]
    fn off_grid_local_anchor_is_reachable() {
        let mut sys = line_system(0.0);
        sys.k_neighbor = 0.0;
        sys.k_local = 1.0;
        sys.points[0].local = Point::new(3.1, -0.7);
        assert_eq!(sys.solve_point(0).position, Point::new(3.1, -0.7));
    }

    #[test]
    fn coincident_anchors() {
        let mut sys = line_system(3.0);
        sys.points[0].local = sys.points[0].global;
        assert_eq!(sys.solve_point(0).position, Point::new(0.0, 0.0));
    }

    #[test]
    fn window_is_clipped_to_image() {
        let mut sys = line_system(1.0);
        sys.bounds = Some(ImageSize::new(100, 100));
        let w = sys.window(0);
        assert_eq!(w.min, Point::new(0.0, 0.0));
        assert_eq!(w.max, Point::new(11.0, 1.0));
    }

    #[test]
    fn rejects_negative_lambda() {
        use crate::face_model::{ImageSize, Organ};
        let set = FeaturePointSet::new(
            [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)].map(|(x, y)| (Organ::Contour, Point::new(x, y))),
            ImageSize::new(20, 20),
        )
        .unwrap();
        let mesh = crate::mesh::delaunay_triangulate(&set).unwrap();
        assert!(solve_all(&set, &set, &mesh, -1.0).is_err());
        assert!(solve_all(&set, &set, &mesh, f64::NAN).is_err());
    }
}
