//! Distance-based scoring of candidate results in eigenface space and the
//! argmin selection of the elasticity ratio.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::eigenface::EigenBasis;
use crate::error::{Error, Result};
use crate::image::RasterImage;

/// Balancing weight between the two distance terms.
pub const DEFAULT_OMEGA_DB: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbScore {
    /// Feature distance from the candidate to the source expression face.
    pub dist_source: f64,
    /// Feature distance from the candidate to the global-warp result.
    pub dist_global: f64,
    /// `e^dist_source`.
    pub term_source: f64,
    /// `e^dist_global`.
    pub term_global: f64,
    pub omega_db: f64,
    /// `term_source + omega_db * term_global`; saturates to infinity for
    /// large distances.
    pub total: f64,
    /// Natural log of `total`, computed without overflow. Used for ranking.
    pub ln_total: f64,
}

impl DbScore {
    pub fn from_distances(dist_source: f64, dist_global: f64, omega_db: f64) -> Self {
        let term_source = dist_source.exp();
        let term_global = dist_global.exp();
        let ln_total = if omega_db > 0.0 {
            log_add_exp(dist_source, omega_db.ln() + dist_global)
        } else {
            dist_source
        };
        DbScore {
            dist_source,
            dist_global,
            term_source,
            term_global,
            omega_db,
            total: term_source + omega_db * term_global,
            ln_total,
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn db_score(
    basis: &EigenBasis,
    candidate: &RasterImage,
    source_exp: &RasterImage,
    global: &RasterImage,
    omega_db: f64,
) -> Result<DbScore> {
    if !(omega_db >= 0.0 && omega_db.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "omega_db {omega_db} must be finite and >= 0"
        )));
    }
    let e_cand = basis.project(candidate)?;
    let e_src = basis.project(source_exp)?;
    let e_gl = basis.project(global)?;
    Ok(DbScore::from_distances(
        distance(&e_cand, &e_src),
        distance(&e_cand, &e_gl),
        omega_db,
    ))
}

/// Candidate elasticity ratios, strictly increasing and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!("{v} is not a finite non-negative ratio")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("values must be strictly increasing".into()));
        }
        Ok(LambdaGrid(values))
    }

    /// Parses a comma-separated list such as `0,0.5,1,2`.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidGrid(format!("bad value `{}`", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        LambdaGrid::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid(vec![0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// One row per grid value, in grid order.
    pub table: Vec<(f64, DbScore)>,
}

impl LambdaSelection {
    /// Score table as text, one `lambda total term_source term_global
    /// ln_total` row per candidate.
    pub fn report(&self) -> String {
        let mut out = String::from("# lambda total term_source term_global ln_total\n");
        for (lambda, s) in &self.table {
            let _ = writeln!(
                out,
                "{lambda} {} {} {} {}",
                s.total, s.term_source, s.term_global, s.ln_total
            );
        }
        out
    }
}

/// Index of the smallest key; ties go to the earliest entry.
pub fn argmin_first(keys: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, k) in keys.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every grid value and returns the minimizer. Ties resolve to the
/// smallest λ. Evaluations run concurrently; the table keeps grid order.
pub fn select_lambda<F>(grid: &LambdaGrid, score: F) -> Result<LambdaSelection>
where
    F: Fn(f64) -> Result<DbScore> + Sync,
{
    let table: Vec<(f64, DbScore)> = grid
        .values()
        .par_iter()
        .map(|&l| score(l).map(|s| (l, s)))
        .collect::<Result<_>>()?;
    let best = argmin_first(table.iter().map(|(_, s)| s.ln_total)).expect("grid is non-empty");
    Ok(LambdaSelection {
        lambda: table[best].0,
        table,
    })
}
