//! Parametric cartoon faces with landmarks, for demos, tests and benches.
//!
//! Every face uses the same 61-landmark schema:
//!
//! | ids    | organ        |
//! |--------|--------------|
//! | 0–19   | `contour`    |
//! | 20–24  | `left_brow`  |
//! | 25–29  | `right_brow` |
//! | 30–35  | `left_eye`   |
//! | 36–41  | `right_eye`  |
//! | 42–48  | `nose`       |
//! | 49–60  | `mouth`      |
//!
//! "Left" means the left side of the image. Mouth corners are 49 (right)
//! and 55 (left); 52 and 58 are the lowest and highest mouth points.
//! Expressions add shading folds (smile lines, forehead lines, chin
//! shadow) that the ratio-image stage can pick up.

use std::f64::consts::PI;

use crate::face_model::{FeaturePointSet, ImageSize, Organ};
use crate::geom::Point;
use crate::image::RasterImage;
use crate::pipeline::Face;

pub const LANDMARK_COUNT: usize = 61;

/// Muscle areas for the synthetic schema.
pub const DEFAULT_MUSCLE_CONFIG: &str = "\
# key muscle areas for the 61-point synthetic schema
# name        center ids  reference ids  radius            strength
forehead      center=22,27  ref=22,27  radius_scale=0.45  h=0.6
nasolabial_l  center=45,55  ref=45,55  radius_scale=0.6   h=0.8
nasolabial_r  center=46,49  ref=46,49  radius_scale=0.6   h=0.8
mouth         center=52,58  ref=49,55  radius_scale=0.45  h=0.5
crow_l        center=33     ref=30,33  radius_scale=0.6   h=0.4
crow_r        center=36     ref=36,39  radius_scale=0.6   h=0.4
";

/// Person-specific geometry and coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceShape {
    pub center: Point,
    pub half_w: f64,
    pub half_h: f64,
    pub eye_dx: f64,
    /// Eye line relative to the center (negative is up).
    pub eye_dy: f64,
    pub eye_w: f64,
    pub eye_h: f64,
    pub brow_gap: f64,
    pub brow_arch: f64,
    pub nose_len: f64,
    pub nose_w: f64,
    pub mouth_dy: f64,
    pub mouth_w: f64,
    pub mouth_h: f64,
    pub skin: [f64; 3],
}

impl FaceShape {
    /// A reference person sized for a 256x256 canvas.
    pub fn person_a() -> Self {
        FaceShape {
            center: Point::new(128.0, 132.0),
            half_w: 78.0,
            half_h: 100.0,
            eye_dx: 32.0,
            eye_dy: -22.0,
            eye_w: 15.0,
            eye_h: 6.0,
            brow_gap: 9.0,
            brow_arch: 4.0,
            nose_len: 50.0,
            nose_w: 11.0,
            mouth_dy: 50.0,
            mouth_w: 24.0,
            mouth_h: 6.0,
            skin: [224.0, 180.0, 150.0],
        }
    }

    /// A second person with different proportions.
    pub fn person_b() -> Self {
        FaceShape {
            center: Point::new(126.0, 128.0),
            half_w: 88.0,
            half_h: 94.0,
            eye_dx: 36.0,
            eye_dy: -18.0,
            eye_w: 13.0,
            eye_h: 7.0,
            brow_gap: 11.0,
            brow_arch: 3.0,
            nose_len: 44.0,
            nose_w: 13.0,
            mouth_dy: 46.0,
            mouth_w: 28.0,
            mouth_h: 7.0,
            skin: [190.0, 140.0, 110.0],
        }
    }

    /// Uniformly scales the geometry about the canvas origin.
    pub fn scaled(&self, s: f64) -> Self {
        FaceShape {
            center: self.center * s,
            half_w: self.half_w * s,
            half_h: self.half_h * s,
            eye_dx: self.eye_dx * s,
            eye_dy: self.eye_dy * s,
            eye_w: self.eye_w * s,
            eye_h: self.eye_h * s,
            brow_gap: self.brow_gap * s,
            brow_arch: self.brow_arch * s,
            nose_len: self.nose_len * s,
            nose_w: self.nose_w * s,
            mouth_dy: self.mouth_dy * s,
            mouth_w: self.mouth_w * s,
            mouth_h: self.mouth_h * s,
            skin: self.skin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expression {
    /// 0 neutral, 1 broad smile.
    pub smile: f64,
    /// 0 closed, 1 open.
    pub mouth_open: f64,
    /// 0 rest, 1 raised.
    pub brow_raise: f64,
    /// Eye opening multiplier, 1 at rest.
    pub eye_open: f64,
}

impl Expression {
    pub const NEUTRAL: Expression = Expression {
        smile: 0.0,
        mouth_open: 0.0,
        brow_raise: 0.0,
        eye_open: 1.0,
    };

    pub const fn new(smile: f64, mouth_open: f64, brow_raise: f64, eye_open: f64) -> Self {
        Expression {
            smile,
            mouth_open,
            brow_raise,
            eye_open,
        }
    }

    pub fn happy() -> Self {
        Expression::new(1.0, 0.3, 0.2, 0.8)
    }

    pub fn surprised() -> Self {
        Expression::new(0.0, 1.0, 1.0, 1.4)
    }

    /// Twelve expressions for eigenbasis training.
    pub fn training_series() -> Vec<Expression> {
        let mut out = Vec::with_capacity(12);
        for &(smile, open) in &[(0.0, 0.0), (0.5, 0.0), (1.0, 0.2), (0.0, 0.8), (0.6, 0.6), (0.3, 1.0)] {
            for &(brow, eye) in &[(0.0, 1.0), (1.0, 1.3)] {
                out.push(Expression::new(smile, open, brow, eye - 0.2 * smile));
            }
        }
        out
    }
}

struct Layout {
    contour: Vec<Point>,
    brows: [Vec<Point>; 2],
    eyes: [Vec<Point>; 2],
    nose: Vec<Point>,
    mouth: Vec<Point>,
}

fn layout(s: &FaceShape, e: &Expression) -> Layout {
    let c = s.center;
    let jaw = e.mouth_open * 0.12 * s.half_h;
    let contour = (0..20)
        .map(|k| {
            let t = 2.0 * PI * f64::from(k) / 20.0;
            let (sin, cos) = t.sin_cos();
            let drop = if sin > 0.0 { jaw * sin } else { 0.0 };
            Point::new(c.x + s.half_w * cos, c.y + s.half_h * sin + drop)
        })
        .collect();

    let eye_centers = [
        Point::new(c.x - s.eye_dx, c.y + s.eye_dy),
        Point::new(c.x + s.eye_dx, c.y + s.eye_dy),
    ];
    let brows = eye_centers.map(|ec| {
        (0..5)
            .map(|j| {
                let t = -1.0 + 0.5 * f64::from(j);
                Point::new(
                    ec.x + t * s.eye_w * 1.3,
                    ec.y - s.eye_h - s.brow_gap - s.brow_arch * (1.0 - t * t) - e.brow_raise * 8.0,
                )
            })
            .collect()
    });
    let eyes = eye_centers.map(|ec| {
        (0..6)
            .map(|j| {
                let t = 2.0 * PI * f64::from(j) / 6.0;
                Point::new(ec.x + s.eye_w * t.cos(), ec.y + s.eye_h * e.eye_open * t.sin())
            })
            .collect()
    });

    let top = c.y + s.eye_dy + s.eye_h + 4.0;
    let tip = c.y + s.eye_dy + s.nose_len;
    let nw = s.nose_w * (1.0 + 0.15 * e.smile);
    let nose = vec![
        Point::new(c.x, top),
        Point::new(c.x, (top + tip) / 2.0),
        Point::new(c.x, tip),
        Point::new(c.x - nw, tip - 4.0),
        Point::new(c.x + nw, tip - 4.0),
        Point::new(c.x - nw * 0.5, tip + 2.0),
        Point::new(c.x + nw * 0.5, tip + 2.0),
    ];

    let m = Point::new(c.x, c.y + s.mouth_dy + e.mouth_open * 3.0);
    let mw = s.mouth_w * (1.0 + 0.25 * e.smile);
    let mouth = (0..12)
        .map(|k| {
            let t = 2.0 * PI * f64::from(k) / 12.0;
            let (sin, cos) = t.sin_cos();
            let open = if sin > 0.0 { e.mouth_open * 14.0 } else { 0.0 };
            Point::new(
                m.x + mw * cos,
                m.y + (s.mouth_h + open) * sin - e.smile * 7.0 * cos * cos,
            )
        })
        .collect();

    Layout {
        contour,
        brows,
        eyes,
        nose,
        mouth,
    }
}

pub fn landmarks(shape: &FaceShape, expr: &Expression, size: ImageSize) -> FeaturePointSet {
    let l = layout(shape, expr);
    let items = l
        .contour
        .into_iter()
        .map(|p| (Organ::Contour, p))
        .chain(l.brows[0].iter().map(|&p| (Organ::LeftBrow, p)))
        .chain(l.brows[1].iter().map(|&p| (Organ::RightBrow, p)))
        .chain(l.eyes[0].iter().map(|&p| (Organ::LeftEye, p)))
        .chain(l.eyes[1].iter().map(|&p| (Organ::RightEye, p)))
        .chain(l.nose.into_iter().map(|p| (Organ::Nose, p)))
        .chain(l.mouth.into_iter().map(|p| (Organ::Mouth, p)));
    FeaturePointSet::new(items, size).expect("synthetic face fits its canvas")
}

fn inside(poly: &[Point], p: Point) -> bool {
    let mut hit = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            hit = !hit;
        }
    }
    hit
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn polyline_distance(pts: &[Point], p: Point) -> f64 {
    pts.windows(2)
        .map(|w| segment_distance(w[0], w[1], p))
        .fold(f64::INFINITY, f64::min)
}

/// Quadratic Bézier sampled as a polyline.
fn curve(a: Point, ctrl: Point, b: Point) -> Vec<Point> {
    (0..=16)
        .map(|i| {
            let t = f64::from(i) / 16.0;
            a * ((1.0 - t) * (1.0 - t)) + ctrl * (2.0 * t * (1.0 - t)) + b * (t * t)
        })
        .collect()
}

fn soft_line(dist: f64, width: f64) -> f64 {
    (-(dist * dist) / (2.0 * width * width)).exp()
}

pub fn render(shape: &FaceShape, expr: &Expression, size: ImageSize) -> RasterImage {
    let l = layout(shape, expr);
    let c = shape.center;

    let nose_tip = l.nose[2];
    let folds: Vec<Vec<Point>> = [(l.nose[3], l.mouth[6], -1.0), (l.nose[4], l.mouth[0], 1.0)]
        .iter()
        .map(|&(from, to, side)| {
            let a = from + Point::new(side * 4.0, 0.0);
            let b = to + Point::new(side * 5.0, 6.0);
            let ctrl = Point::new((a.x + b.x) / 2.0 + side * 8.0, (a.y + b.y) / 2.0);
            curve(a, ctrl, b)
        })
        .collect();
    let brow_top = l.brows[0]
        .iter()
        .chain(&l.brows[1])
        .map(|p| p.y)
        .fold(f64::INFINITY, f64::min);
    let forehead: Vec<Vec<Point>> = (1..=3)
        .map(|k| {
            let y = brow_top - 7.0 * f64::from(k);
            let half = shape.eye_dx + shape.eye_w;
            curve(
                Point::new(c.x - half, y + 2.0),
                Point::new(c.x, y - 3.0),
                Point::new(c.x + half, y + 2.0),
            )
        })
        .collect();
    let chin = Point::new(c.x, l.mouth[3].y + 16.0);
    let inner_mouth: Vec<Point> = {
        let m = l.mouth.iter().fold(Point::ZERO, |acc, &p| acc + p) * (1.0 / 12.0);
        l.mouth.iter().map(|&p| m + (p - m) * 0.6).collect()
    };

    RasterImage::from_fn(size.width, size.height, 3, |x, y, ch| {
        let p = Point::new(f64::from(x), f64::from(y));
        let fy = f64::from(y) / f64::from(size.height);
        let background = [70.0 + 50.0 * fy, 85.0 + 35.0 * fy, 110.0 + 20.0 * fy][ch];
        if !inside(&l.contour, p) {
            return background;
        }
        let d = p - c;
        let r2 = (d.x / shape.half_w).powi(2) + (d.y / shape.half_h).powi(2);
        let texture = 3.0 * (0.31 * p.x).sin() * (0.23 * p.y).sin();
        let mut v = shape.skin[ch] * (0.72 + 0.28 * (1.0 - r2).max(0.0)) + texture;

        for eye in &l.eyes {
            if inside(eye, p) {
                let ec = eye.iter().fold(Point::ZERO, |acc, &q| acc + q) * (1.0 / 6.0);
                let iris = (shape.eye_h * expr.eye_open).min(shape.eye_w * 0.45);
                v = if p.distance(ec) < iris {
                    [60.0, 45.0, 35.0][ch]
                } else {
                    [240.0, 240.0, 235.0][ch]
                };
            }
        }
        for brow in &l.brows {
            let t = soft_line(polyline_distance(brow, p), 1.8);
            v = v * (1.0 - 0.8 * t) + [70.0, 50.0, 40.0][ch] * 0.8 * t;
        }
        // nose side shading
        let nd = p.distance(l.nose[5]).min(p.distance(l.nose[6]));
        v *= 1.0 - 0.35 * soft_line(nd, 2.5);
        if p.y < nose_tip.y && (p.x - c.x).abs() < shape.nose_w * 0.5 {
            v *= 0.97;
        }
        if inside(&l.mouth, p) {
            v = if expr.mouth_open > 0.05 && inside(&inner_mouth, p) {
                [50.0, 20.0, 25.0][ch]
            } else {
                [180.0, 80.0, 85.0][ch]
            };
        }
        // expression folds
        for fold in &folds {
            v *= 1.0 - 0.35 * expr.smile * soft_line(polyline_distance(fold, p), 2.0);
        }
        for line in &forehead {
            v *= 1.0 - 0.3 * expr.brow_raise * soft_line(polyline_distance(line, p), 1.5);
        }
        v *= 1.0 - 0.25 * expr.mouth_open * soft_line(p.distance(chin), 8.0);
        v.clamp(0.0, 255.0)
    })
}

pub fn face(shape: &FaceShape, expr: &Expression, size: ImageSize) -> Face {
    Face {
        image: render(shape, expr, size),
        points: landmarks(shape, expr, size),
    }
}
