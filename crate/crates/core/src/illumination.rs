//! Expression ratio image (ERI), muscle-distribution importance mask and
//! the final multiplicative detail composition.
//!
//! Muscle config format, one area per line:
//!
//! ```text
//! # name   center ids     reference ids  radius scale     strength
//! mouth    center=49,55   ref=49,55      radius_scale=0.6 h=0.5
//! l_eye    center=33      ref=30,33      radius_scale=0.8
//! ```
//!
//! `h` defaults to [`DEFAULT_STRENGTH`].

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::face_model::{FeaturePointSet, ImageSize};
use crate::geom::Point;
use crate::image::RasterImage;
use crate::mesh::{warp_to_size, Coverage, TriangleMesh};

pub const RATIO_MIN: f64 = 0.2;
pub const RATIO_MAX: f64 = 5.0;
/// Denominator floor on the 0..=255 scale.
pub const RATIO_EPS: f64 = 1.0;
pub const DEFAULT_STRENGTH: f64 = 0.5;
/// Gaussian support radius in units of sigma.
pub const MASK_CUTOFF_SIGMAS: f64 = 4.0;

#[inline]
fn clamp_ratio(v: f64) -> f64 {
    v.clamp(RATIO_MIN, RATIO_MAX)
}

/// Per-pixel ratios, always within `[RATIO_MIN, RATIO_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioImage {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl RatioImage {
    /// Clamps every value into range.
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", width as usize * height as usize),
                found: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ratio values must be finite".into()));
        }
        Ok(RatioImage {
            width,
            height,
            values: values.into_iter().map(clamp_ratio).collect(),
        })
    }

    pub fn ones(width: u32, height: u32) -> Self {
        RatioImage {
            width,
            height,
            values: vec![1.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// 3x3 box average; border pixels average their in-bounds neighbors.
    pub fn box_filter_3x3(&self) -> RatioImage {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0.0;
                let mut count = 0u32;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h {
                            sum += self.values[(ny * w + nx) as usize];
                            count += 1;
                        }
                    }
                }
                values.push(clamp_ratio(sum / f64::from(count)));
            }
        }
        RatioImage {
            width: self.width,
            height: self.height,
            values,
        }
    }
}

/// Source-expression over source-neutral luminance, both warped into the
/// FI geometry. Pixels outside the FI mesh get ratio 1.
pub fn compute_eri(
    src_neutral_img: &RasterImage,
    src_exp_img: &RasterImage,
    reference: &TriangleMesh,
    src_neutral_pts: &FeaturePointSet,
    src_exp_pts: &FeaturePointSet,
    fi_pts: &FeaturePointSet,
) -> Result<RatioImage> {
    src_neutral_pts.check_schema(src_exp_pts)?;
    src_neutral_pts.check_schema(fi_pts)?;
    if src_neutral_img.size() != src_exp_img.size() {
        return Err(Error::DimensionMismatch {
            expected: src_neutral_img.size().to_string(),
            found: src_exp_img.size().to_string(),
        });
    }
    let neutral_mesh = reference.with_vertices(src_neutral_pts.clone())?;
    let exp_mesh = reference.with_vertices(src_exp_pts.clone())?;
    let fi_mesh = reference.with_vertices(fi_pts.clone())?;

    let canvas = fi_pts.size();
    let neutral = warp_to_size(&src_neutral_img.luminance(), &neutral_mesh, &fi_mesh, canvas)?;
    let exp = warp_to_size(&src_exp_img.luminance(), &exp_mesh, &fi_mesh, canvas)?;
    let coverage = Coverage::new(&fi_mesh, canvas.width, canvas.height);

    let width = canvas.width;
    let values = (0..canvas.width as usize * canvas.height as usize)
        .map(|i| {
            let (x, y) = ((i % width as usize) as u32, (i / width as usize) as u32);
            if !coverage.is_covered(x, y) {
                return 1.0;
            }
            let num = exp.samples()[i];
            let den = neutral.samples()[i].max(RATIO_EPS);
            clamp_ratio(num / den)
        })
        .collect();
    Ok(RatioImage {
        width: canvas.width,
        height: canvas.height,
        values,
    })
}

/// Where an area's center comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct MuscleAreaSpec {
    pub name: String,
    /// The center is the centroid of these landmarks.
    pub center_ids: Vec<usize>,
    /// The radius is `radius_scale` times the distance between these two.
    pub ref_ids: (usize, usize),
    pub radius_scale: f64,
    pub strength: f64,
}

impl MuscleAreaSpec {
    pub fn to_line(&self) -> String {
        let centers: Vec<String> = self.center_ids.iter().map(usize::to_string).collect();
        format!(
            "{} center={} ref={},{} radius_scale={} h={}",
            self.name,
            centers.join(","),
            self.ref_ids.0,
            self.ref_ids.1,
            self.radius_scale,
            self.strength
        )
    }

    /// Checks that every landmark id exists in a set of `n` points.
    pub fn check_ids(&self, n: usize) -> Result<()> {
        let ids = self.center_ids.iter().chain([&self.ref_ids.0, &self.ref_ids.1]);
        if let Some(id) = ids.into_iter().find(|&&i| i >= n) {
            return Err(Error::InvalidMuscle(format!(
                "area `{}` references landmark {id} but only {n} exist",
                self.name
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, pts: &FeaturePointSet) -> Result<MuscleArea> {
        self.check_ids(pts.len())?;
        let mut c = Point::ZERO;
        for &id in &self.center_ids {
            c += pts.pos(id);
        }
        let center = c * (1.0 / self.center_ids.len() as f64);
        let radius = self.radius_scale * pts.pos(self.ref_ids.0).distance(pts.pos(self.ref_ids.1));
        MuscleArea::new(self.name.clone(), center, radius, self.strength, pts.size())
    }
}

pub fn parse_muscle_config(text: &str) -> Result<Vec<MuscleAreaSpec>> {
    let mut areas = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let name = fields.next().unwrap().to_string();
        let (mut center, mut refs, mut scale, mut strength) = (None, None, None, None);
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got `{field}`")))?;
            let ids = |v: &str| -> Result<Vec<usize>> {
                v.split(',')
                    .map(|s| {
                        s.parse::<usize>()
                            .map_err(|_| Error::parse(lineno, format!("bad id `{s}`")))
                    })
                    .collect()
            };
            let real = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|r| r.is_finite())
                    .ok_or_else(|| Error::parse(lineno, format!("bad number `{v}`")))
            };
            match key {
                "center" => center = Some(ids(value)?),
                "ref" => {
                    let r = ids(value)?;
                    if r.len() != 2 {
                        return Err(Error::parse(lineno, "ref needs exactly two ids"));
                    }
                    refs = Some((r[0], r[1]));
                }
                "radius_scale" => scale = Some(real(value)?),
                "h" => strength = Some(real(value)?),
                other => return Err(Error::parse(lineno, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(lineno, format!("area `{name}` is missing `{k}`"));
        let spec = MuscleAreaSpec {
            center_ids: center.ok_or_else(|| missing("center"))?,
            ref_ids: refs.ok_or_else(|| missing("ref"))?,
            radius_scale: scale.ok_or_else(|| missing("radius_scale"))?,
            strength: strength.unwrap_or(DEFAULT_STRENGTH),
            name,
        };
        if spec.radius_scale <= 0.0 {
            return Err(Error::parse(lineno, "radius_scale must be > 0"));
        }
        if spec.strength < 0.0 {
            return Err(Error::parse(lineno, "h must be >= 0"));
        }
        areas.push(spec);
    }
    Ok(areas)
}

/// A resolved key muscle area.
#[derive(Debug, Clone, PartialEq)]
pub struct MuscleArea {
    pub name: String,
    pub center: Point,
    pub radius: f64,
    pub strength: f64,
}

impl MuscleArea {
    pub fn new(name: String, center: Point, radius: f64, strength: f64, image: ImageSize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidMuscle(format!("area `{name}` has radius {radius}")));
        }
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidMuscle(format!("area `{name}` has strength {strength}")));
        }
        if !image.contains(center) {
            return Err(Error::InvalidMuscle(format!(
                "area `{name}` center ({}, {}) lies outside the image",
                center.x, center.y
            )));
        }
        Ok(MuscleArea {
            name,
            center,
            radius,
            strength,
        })
    }

    /// `sigma = r / sqrt(ln 2)`.
    pub fn sigma(&self) -> f64 {
        self.radius / LN_2.sqrt()
    }

    /// Gaussian boost `h * exp(-d² / 2σ²)`, zero beyond the cutoff.
    pub fn boost(&self, p: Point) -> f64 {
        let sigma = self.sigma();
        let d2 = {
            let d = p - self.center;
            d.x * d.x + d.y * d.y
        };
        let cutoff = MASK_CUTOFF_SIGMAS * sigma;
        if d2 > cutoff * cutoff {
            return 0.0;
        }
        self.strength * (-d2 / (2.0 * sigma * sigma)).exp()
    }
}

/// `M(u, v) >= 1` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMask {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ImportanceMask {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }
}

/// `M = 1 + Σ h_i·exp(-|p - c_i|² / 2σ_i²)` with overlapping areas summed.
pub fn build_mask(areas: &[MuscleArea], width: u32, height: u32) -> ImportanceMask {
    let mut values = vec![1.0; width as usize * height as usize];
    values.par_chunks_mut(width as usize).enumerate().for_each(|(y, row)| {
        for (x, m) in row.iter_mut().enumerate() {
            let p = Point::new(x as f64, y as f64);
            let mut boost = 0.0;
            for a in areas {
                boost += a.boost(p);
            }
            *m = 1.0 + boost;
        }
    });
    ImportanceMask { width, height, values }
}

/// Detail field `1 + M·(ERI - 1)`, re-clamped.
pub fn apply_md(eri: &RatioImage, mask: &ImportanceMask) -> Result<RatioImage> {
    if eri.size() != mask.size() {
        return Err(Error::DimensionMismatch {
            expected: eri.size().to_string(),
            found: mask.size().to_string(),
        });
    }
    // Written as M·e + (1 - M) so that M = 1 returns e unchanged.
    let values = eri
        .values
        .iter()
        .zip(&mask.values)
        .map(|(&e, &m)| clamp_ratio(m * e + (1.0 - m)))
        .collect();
    Ok(RatioImage {
        width: eri.width,
        height: eri.height,
        values,
    })
}

/// Multiplies every channel of `fi` by the luminance-domain detail field.
pub fn compose_final(fi: &RasterImage, detail: &RatioImage) -> Result<RasterImage> {
    if fi.size() != detail.size() {
        return Err(Error::DimensionMismatch {
            expected: fi.size().to_string(),
            found: detail.size().to_string(),
        });
    }
    let ch = fi.channels();
    let samples = fi
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v * detail.values[i / ch]).clamp(0.0, 255.0))
        .collect();
    RasterImage::new(fi.width(), fi.height(), ch, samples)
}

/// Affine map `[lo, hi] -> [0, 255]` used for debug dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpMapping {
    pub lo: f64,
    pub hi: f64,
}

impl std::fmt::Display for DumpMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}] -> [0, 255]", self.lo, self.hi)
    }
}

/// Gray image of arbitrary real values, stretched to 0..=255.
pub fn to_debug_image(width: u32, height: u32, values: &[f64]) -> (RasterImage, DumpMapping) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let samples = values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span * 255.0 } else { 0.0 })
        .collect();
    let img = RasterImage::new(width, height, 1, samples).expect("sizes agree");
    (img, DumpMapping { lo, hi })
}
