//! Raster images and the binary PGM (P5) / PPM (P6) codec.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::face_model::ImageSize;

/// Interleaved image with 1 (gray) or 3 (RGB) channels. Samples are kept as
/// `f64` on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: usize,
    samples: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} samples"),
                found: format!("{} samples", samples.len()),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("sample {i} is not finite")));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, channels: usize, value: f64) -> Self {
        RasterImage {
            width,
            height,
            channels,
            samples: vec![value; width as usize * height as usize * channels],
        }
    }

    pub fn from_fn(width: u32, height: u32, channels: usize, mut f: impl FnMut(u32, u32, usize) -> f64) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c));
                }
            }
        }
        RasterImage {
            width,
            height,
            channels,
            samples,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: usize) -> f64 {
        self.samples[(y as usize * self.width as usize + x as usize) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: usize, v: f64) {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels + c;
        self.samples[idx] = v;
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn expect_size(&self, size: ImageSize) -> Result<()> {
        if self.size() != size {
            return Err(Error::DimensionMismatch {
                expected: size.to_string(),
                found: self.size().to_string(),
            });
        }
        Ok(())
    }

    /// Luminance `0.299 R + 0.587 G + 0.114 B`; gray images are copied.
    pub fn luminance(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            samples,
        }
    }

    /// Bilinear sample of channel `c` at a real position, clamping to the
    /// edge. Positions within 1e-9 of an integer are snapped so that exact
    /// pixel hits return the stored sample bit-for-bit.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let max_x = f64::from(self.width - 1);
        let max_y = f64::from(self.height - 1);
        let x = snap(x).clamp(0.0, max_x);
        let y = snap(y).clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as u32, y0 as u32);
        if fx == 0.0 && fy == 0.0 {
            return self.get(xi, yi, c);
        }
        let xi1 = (xi + 1).min(self.width - 1);
        let yi1 = (yi + 1).min(self.height - 1);
        let top = self.get(xi, yi, c) * (1.0 - fx) + self.get(xi1, yi, c) * fx;
        let bottom = self.get(xi, yi1, c) * (1.0 - fx) + self.get(xi1, yi1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Center-crops, then edge-pads, to `width x height`.
    pub fn fit_to(&self, width: u32, height: u32) -> RasterImage {
        if self.width == width && self.height == height {
            return self.clone();
        }
        let off_x = (i64::from(self.width) - i64::from(width)) / 2;
        let off_y = (i64::from(self.height) - i64::from(height)) / 2;
        let max_x = i64::from(self.width) - 1;
        let max_y = i64::from(self.height) - 1;
        RasterImage::from_fn(width, height, self.channels, |x, y, c| {
            let sx = (i64::from(x) + off_x).clamp(0, max_x) as u32;
            let sy = (i64::from(y) + off_y).clamp(0, max_y) as u32;
            self.get(sx, sy, c)
        })
    }

    /// Rounds and clamps to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.samples.iter().map(|&v| quantize(v)).collect()
    }

    /// Decodes binary PGM (P5) or PPM (P6) with maxval 255.
    pub fn decode_pnm(bytes: &[u8]) -> Result<RasterImage> {
        let mut cur = HeaderCursor { bytes, pos: 0 };
        let magic = cur.token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            m => return Err(Error::Format(format!("unsupported magic `{m}`"))),
        };
        let width = cur.number()?;
        let height = cur.number()?;
        let maxval = cur.number()?;
        if maxval != 255 {
            return Err(Error::Format(format!(
                "only 8-bit maxval 255 is supported, got {maxval}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Format("zero image dimension".into()));
        }
        // exactly one whitespace byte after maxval
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Format("missing whitespace after header".into()));
        }
        let data = &bytes[cur.pos + 1..];
        let len = width as usize * height as usize * channels;
        if data.len() < len {
            return Err(Error::Format(format!(
                "truncated pixel data: {} of {len} bytes",
                data.len()
            )));
        }
        let samples = data[..len].iter().map(|&b| f64::from(b)).collect();
        Ok(RasterImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        RasterImage::decode_pnm(&bytes).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_pnm()).map_err(|e| Error::from(e).in_file(path))
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<u32> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Format(format!("bad header number `{tok}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnm_roundtrip_is_bit_exact() {
        let img = RasterImage::from_fn(7, 5, 3, |x, y, c| ((x * 31 + y * 17 + c as u32 * 5) % 256) as f64);
        let bytes = img.encode_pnm();
        assert!(bytes.starts_with(b"P6\n7 5\n255\n"));
        let back = RasterImage::decode_pnm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.encode_pnm(), bytes);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([3u8, 250]);
        let img = RasterImage::decode_pnm(&bytes).unwrap();
        assert_eq!(img.samples(), &[3.0, 250.0]);
    }

    #[test]
    fn rejects_unsupported() {
        assert!(RasterImage::decode_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(RasterImage::decode_pnm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(RasterImage::decode_pnm(b"P5\n4 4\n255\n\0").is_err());
    }

    #[test]
    fn bilinear_hits_and_midpoints() {
        let img = RasterImage::new(2, 2, 1, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(img.sample_bilinear(1.0, 0.0, 0), 10.0);
        assert_eq!(img.sample_bilinear(0.5, 0.5, 0), 15.0);
        assert_eq!(img.sample_bilinear(1.0 + 1e-12, 1.0, 0), 30.0);
        assert_eq!(img.sample_bilinear(-3.0, 5.0, 0), 20.0);
    }

    #[test]
    fn fit_crops_then_pads() {
        let img = RasterImage::from_fn(4, 2, 1, |x, y, _| f64::from(x + 10 * y));
        let cropped = img.fit_to(2, 2);
        assert_eq!(cropped.samples(), &[1.0, 2.0, 11.0, 12.0]);
        let padded = img.fit_to(6, 2);
        assert_eq!(padded.samples()[..6], [0.0, 0.0, 1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn luminance_weights() {
        let img = RasterImage::new(1, 1, 3, vec![100.0, 200.0, 50.0]).unwrap();
        let l = img.luminance();
        assert!((l.samples()[0] - (29.9 + 117.4 + 5.7)).abs() < 1e-12);
    }
}
