//! Landmark data model and the plain-text points file format.
//!
//! A points file holds one record per line:
//!
//! ```text
//! # comment
//! size 256 256
//! 0 contour 12.5 130.0
//! 1 contour 14.0 150.25
//! ```
//!
//! The `size` line is optional; without it the caller supplies the size of
//! the paired image. Ids must cover `0..n` exactly and may appear in any
//! order.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Organ {
    LeftEye,
    RightEye,
    LeftBrow,
    RightBrow,
    Nose,
    Mouth,
    Contour,
}

impl Organ {
    pub const ALL: [Organ; 7] = [
        Organ::LeftEye,
        Organ::RightEye,
        Organ::LeftBrow,
        Organ::RightBrow,
        Organ::Nose,
        Organ::Mouth,
        Organ::Contour,
    ];

    /// Organs that take part in local re-shaping. The face contour only
    /// follows the global warp.
    pub const RESHAPED: [Organ; 6] = [
        Organ::LeftEye,
        Organ::RightEye,
        Organ::LeftBrow,
        Organ::RightBrow,
        Organ::Nose,
        Organ::Mouth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Organ::LeftEye => "left_eye",
            Organ::RightEye => "right_eye",
            Organ::LeftBrow => "left_brow",
            Organ::RightBrow => "right_brow",
            Organ::Nose => "nose",
            Organ::Mouth => "mouth",
            Organ::Contour => "contour",
        }
    }
}

impl fmt::Display for Organ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Organ {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Organ::ALL
            .into_iter()
            .find(|o| o.label() == s)
            .ok_or_else(|| Error::UnknownOrgan(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const fn new(width: u32, height: u32) -> Self {
        ImageSize { width, height }
    }

    /// Inclusive pixel-coordinate bounds, `0..=width-1` by `0..=height-1`.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= f64::from(self.width.saturating_sub(1))
            && p.y <= f64::from(self.height.saturating_sub(1))
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub id: usize,
    pub organ: Organ,
    pub pos: Point,
}

/// Ordered landmark set; `points[i].id == i` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePointSet {
    points: Vec<FeaturePoint>,
    size: ImageSize,
}

impl FeaturePointSet {
    /// Builds a set from `(organ, position)` pairs; ids are assigned in order.
    pub fn new(points: impl IntoIterator<Item = (Organ, Point)>, size: ImageSize) -> Result<Self> {
        let points: Vec<FeaturePoint> = points
            .into_iter()
            .enumerate()
            .map(|(id, (organ, pos))| FeaturePoint { id, organ, pos })
            .collect();
        let set = FeaturePointSet { points, size };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        if self.points.len() < 3 {
            return Err(Error::TooFewPoints(self.points.len()));
        }
        for p in &self.points {
            if !p.pos.is_finite() {
                return Err(Error::NonFinite(p.id));
            }
            if !self.size.contains(p.pos) {
                return Err(Error::OutOfBounds {
                    id: p.id,
                    x: p.pos.x,
                    y: p.pos.y,
                    width: self.size.width,
                    height: self.size.height,
                });
            }
        }
        Ok(())
    }

    /// Same schema, new positions. Used for every derived set (global,
    /// local, solved).
    pub fn with_positions(&self, positions: &[Point]) -> Result<Self> {
        if positions.len() != self.points.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} positions for {} points",
                positions.len(),
                self.points.len()
            )));
        }
        let points = self
            .points
            .iter()
            .zip(positions)
            .map(|(p, &pos)| FeaturePoint { pos, ..*p })
            .collect();
        let set = FeaturePointSet {
            points,
            size: self.size,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn points(&self) -> &[FeaturePoint] {
        &self.points
    }

    pub fn pos(&self, id: usize) -> Point {
        self.points[id].pos
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.pos).collect()
    }

    pub fn organ_ids(&self, organ: Organ) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().filter(move |p| p.organ == organ).map(|p| p.id)
    }

    /// Checks equal length and identical id→organ mapping.
    pub fn check_schema(&self, other: &FeaturePointSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} points vs {} points",
                self.len(),
                other.len()
            )));
        }
        if let Some((a, b)) = self.points.iter().zip(&other.points).find(|(a, b)| a.organ != b.organ) {
            return Err(Error::SchemaMismatch(format!(
                "point {} is {} in one set and {} in the other",
                a.id, a.organ, b.organ
            )));
        }
        Ok(())
    }

    /// Bounding box of the whole set.
    pub fn bounding_box(&self) -> OrganBox {
        OrganBox::of(self.points.iter().map(|p| p.pos))
    }

    /// Minimum bounding box of one organ's points.
    pub fn organ_bounding_box(&self, organ: Organ) -> Result<OrganBox> {
        let pts: Vec<Point> = self.organ_ids(organ).map(|i| self.pos(i)).collect();
        if pts.len() < 2 {
            return Err(Error::DegenerateOrgan(organ));
        }
        Ok(OrganBox::of(pts))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "size {} {}", self.size.width, self.size.height);
        for p in &self.points {
            let _ = writeln!(out, "{} {} {} {}", p.id, p.organ, p.pos.x, p.pos.y);
        }
        out
    }
}

/// Parses a points file. `default_size` is used when the file carries no
/// `size` line.
pub fn parse_feature_points(text: &str, default_size: Option<ImageSize>) -> Result<FeaturePointSet> {
    let mut size = None;
    let mut records: BTreeMap<usize, (Organ, Point)> = BTreeMap::new();
    let mut seen_record = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "size" {
            if seen_record || size.is_some() {
                return Err(Error::parse(lineno, "`size` must be the first record"));
            }
            if fields.len() != 3 {
                return Err(Error::parse(lineno, "expected `size <width> <height>`"));
            }
            let w = fields[1]
                .parse::<u32>()
                .map_err(|_| Error::parse(lineno, format!("bad width `{}`", fields[1])))?;
            let h = fields[2]
                .parse::<u32>()
                .map_err(|_| Error::parse(lineno, format!("bad height `{}`", fields[2])))?;
            size = Some(ImageSize::new(w, h));
            continue;
        }
        seen_record = true;
        if fields.len() != 4 {
            return Err(Error::parse(lineno, "expected `<id> <organ> <x> <y>`"));
        }
        let id = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(lineno, format!("bad id `{}`", fields[0])))?;
        let organ: Organ = fields[1]
            .parse()
            .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad coordinate `{s}`")))
        };
        let pos = Point::new(coord(fields[2])?, coord(fields[3])?);
        if records.insert(id, (organ, pos)).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }

    let size = size.or(default_size).ok_or(Error::MissingSize)?;
    let n = records.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    if records.keys().enumerate().any(|(i, &id)| i != id) {
        return Err(Error::NonContiguousIds(n));
    }
    FeaturePointSet::new(records.into_values(), size)
}

/// Minimum axis-aligned bounding box with its mid-lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrganBox {
    pub w: f64,
    pub h: f64,
    pub cx: f64,
    pub cy: f64,
}

impl OrganBox {
    fn of(points: impl IntoIterator<Item = Point>) -> Self {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        OrganBox {
            w: max_x - min_x,
            h: max_y - min_y,
            cx: (min_x + max_x) / 2.0,
            cy: (min_y + max_y) / 2.0,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }
}
