//! Per-organ re-shaping of the globally warped landmarks so that each
//! organ takes the source expression organ's height-to-width ratio.
//!
//! The vertical offsets from the box mid-line are scaled by `W_t / W_s`,
//! and the horizontal offsets by `H_t' / H_s` where `H_t'` is the height
//! after the vertical step, `H_s * W_t / W_s`. Both steps together are one
//! uniform scale of the source organ about the target box center, so the
//! result has the source ratio exactly and keeps the target width.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::face_model::{FeaturePointSet, Organ, OrganBox};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReshapeRecord {
    pub organ: Organ,
    /// Source expression organ box.
    pub src_box: OrganBox,
    /// Global-warp organ box.
    pub tgt_box: OrganBox,
    /// `W_t / W_s`.
    pub scale: f64,
}

impl ReshapeRecord {
    pub fn to_text_line(&self) -> String {
        format!(
            "{} scale={} src_w={} src_h={} src_cx={} src_cy={} tgt_w={} tgt_h={} tgt_cx={} tgt_cy={}",
            self.organ,
            self.scale,
            self.src_box.w,
            self.src_box.h,
            self.src_box.cx,
            self.src_box.cy,
            self.tgt_box.w,
            self.tgt_box.h,
            self.tgt_box.cx,
            self.tgt_box.cy
        )
    }
}

pub fn records_to_text(records: &[ReshapeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}", r.to_text_line());
    }
    out
}

/// New positions for one organ, as `(id, position)` pairs in id order.
pub fn reshape_organ(
    src_exp_pts: &FeaturePointSet,
    global_pts: &FeaturePointSet,
    organ: Organ,
) -> Result<(Vec<(usize, Point)>, ReshapeRecord)> {
    let src_box = src_exp_pts.organ_bounding_box(organ)?;
    let tgt_box = global_pts.organ_bounding_box(organ)?;
    if src_box.w <= 0.0 || src_box.h <= 0.0 || tgt_box.w <= 0.0 {
        return Err(Error::DegenerateOrgan(organ));
    }
    let ids: Vec<usize> = global_pts.organ_ids(organ).collect();
    if ids != src_exp_pts.organ_ids(organ).collect::<Vec<_>>() {
        return Err(Error::SchemaMismatch(format!("{organ} ids differ between sets")));
    }

    let scale = tgt_box.w / src_box.w;
    let moved = ids
        .into_iter()
        .map(|id| {
            let p = src_exp_pts.pos(id);
            // (d_s2, d_s1): horizontal and vertical offsets from the mid-lines
            let d_s2 = p.x - src_box.cx;
            let d_s1 = p.y - src_box.cy;
            (id, Point::new(tgt_box.cx + d_s2 * scale, tgt_box.cy + d_s1 * scale))
        })
        .collect();
    Ok((
        moved,
        ReshapeRecord {
            organ,
            src_box,
            tgt_box,
            scale,
        },
    ))
}

/// Re-shapes every listed organ independently. Organs absent from both
/// sets are skipped; contour points are never touched.
pub fn reshape_organs(
    src_exp_pts: &FeaturePointSet,
    global_pts: &FeaturePointSet,
    organs: &[Organ],
) -> Result<(FeaturePointSet, Vec<ReshapeRecord>)> {
    src_exp_pts.check_schema(global_pts)?;
    let mut positions = global_pts.positions();
    let mut records = Vec::new();
    for &organ in organs {
        if organ == Organ::Contour || global_pts.organ_ids(organ).next().is_none() {
            continue;
        }
        let (moved, record) = reshape_organ(src_exp_pts, global_pts, organ)?;
        for (id, p) in moved {
            positions[id] = p;
        }
        records.push(record);
    }
    Ok((global_pts.with_positions(&positions)?, records))
}

/// The local-warp set A': every non-contour organ re-shaped.
pub fn reshape_all(
    src_exp_pts: &FeaturePointSet,
    global_pts: &FeaturePointSet,
) -> Result<(FeaturePointSet, Vec<ReshapeRecord>)> {
    reshape_organs(src_exp_pts, global_pts, &Organ::RESHAPED)
}
