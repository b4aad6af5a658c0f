//! Eigenface features: PCA over flattened luminance images via the
//! small Gram-matrix eigenproblem.
//!
//! Eigenvalues are those of the sample covariance `XᵀX / (m - 1)` of the
//! mean-centered data matrix `X` (one row per image).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::face_model::ImageSize;
use crate::image::RasterImage;

const SIDECAR_MAGIC: &[u8; 5] = b"EIGB1";
/// Components with eigenvalue below this fraction of the largest are dropped.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    size: ImageSize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl EigenBasis {
    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Feature coefficients of `img`.
    pub fn project(&self, img: &RasterImage) -> Result<Vec<f64>> {
        img.expect_size(self.size)?;
        let gray = img.luminance();
        let centered: Vec<f64> = gray.samples().iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.components.iter().map(|c| dot(c, &centered)).collect())
    }

    /// Mean plus the weighted components.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(coefficients) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.mean.len();
        let k = self.components.len();
        let mut out = Vec::with_capacity(5 + 12 + 8 * (p * (k + 1) + k));
        out.extend_from_slice(SIDECAR_MAGIC);
        out.extend_from_slice(&self.size.width.to_le_bytes());
        out.extend_from_slice(&self.size.height.to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        let reals = self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.eigenvalues);
        for v in reals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("eigenbasis sidecar: {m}"));
        if bytes.len() < 17 || &bytes[..5] != SIDECAR_MAGIC {
            return Err(bad("missing EIGB1 header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let size = ImageSize::new(u32_at(5), u32_at(9));
        let k = u32_at(13) as usize;
        let p = size.width as usize * size.height as usize;
        let expected = 17 + 8 * (p * (k + 1) + k);
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut reals = bytes[17..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mean: Vec<f64> = reals.by_ref().take(p).collect();
        let components: Vec<Vec<f64>> = (0..k).map(|_| reals.by_ref().take(p).collect()).collect();
        let eigenvalues: Vec<f64> = reals.collect();
        Ok(EigenBasis {
            size,
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        EigenBasis::from_bytes(&bytes).map_err(|e| e.in_file(path))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains a basis with at most `k` components (`None` means `m - 1`).
pub fn train_basis(images: &[RasterImage], k: Option<usize>) -> Result<EigenBasis> {
    let m = images.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 training images, got {m}"
        )));
    }
    let k = k.unwrap_or(m - 1);
    if k == 0 {
        return Err(Error::InvalidArgument("component count must be >= 1".into()));
    }
    let size = images[0].size();
    for img in images {
        img.expect_size(size)?;
    }
    let rows: Vec<Vec<f64>> = images.iter().map(|i| i.luminance().into_samples()).collect();
    let p = rows[0].len();

    let mut mean = vec![0.0; p];
    for r in &rows {
        for (acc, v) in mean.iter_mut().zip(r) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, mu)| v - mu).collect())
        .collect();

    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = dot(&centered[i], &centered[j]);
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }

    let (values, vectors) = jacobi_eigen(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let max_value = values[order[0]];
    if max_value <= 0.0 || !max_value.is_finite() {
        return Err(Error::DegenerateTraining);
    }
    let cutoff = RELATIVE_EIGEN_FLOOR * max_value;
    let limit = k.min(m - 1).min(p);

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    for &idx in order.iter().take_while(|&&i| values[i] >= cutoff).take(limit) {
        let scale = 1.0 / values[idx].sqrt();
        let mut u = vec![0.0; p];
        for (row, coeff) in centered.iter().zip(vectors.iter().map(|v| v[idx])) {
            for (acc, x) in u.iter_mut().zip(row) {
                *acc += coeff * x;
            }
        }
        for v in &mut u {
            *v *= scale;
        }
        fix_sign(&mut u);
        components.push(u);
        eigenvalues.push(values[idx] / (m - 1) as f64);
    }
    if components.is_empty() {
        return Err(Error::DegenerateTraining);
    }
    Ok(EigenBasis {
        size,
        mean,
        components,
        eigenvalues,
    })
}

/// Flips `v` so its entry of largest magnitude (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvector matrix with eigenvectors as columns.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let frob: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOL * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    (values, v)
}
