//! Global warping: the source person's neutral-to-expression landmark
//! displacements, scaled by face-box ratios, moved onto the target's
//! neutral landmarks; then a mesh warp of the target neutral image (GI).

use crate::error::{Error, Result};
use crate::face_model::FeaturePointSet;
use crate::geom::Point;
use crate::image::RasterImage;
use crate::mesh::{piecewise_affine_warp, TriangleMesh};

#[derive(Debug, Clone)]
pub struct GlobalWarpResult {
    /// Global-warp landmark positions.
    pub positions: FeaturePointSet,
    /// Target neutral image warped onto `positions`.
    pub image: RasterImage,
}

/// Per-axis displacement scale, target face box over source face box.
pub fn displacement_scale(src_neutral: &FeaturePointSet, tgt_neutral: &FeaturePointSet) -> Result<(f64, f64)> {
    let src = src_neutral.bounding_box();
    let tgt = tgt_neutral.bounding_box();
    if src.w <= 0.0 || src.h <= 0.0 {
        return Err(Error::ZeroFaceBox);
    }
    Ok((tgt.w / src.w, tgt.h / src.h))
}

pub fn transfer_displacements(
    src_neutral: &FeaturePointSet,
    src_exp: &FeaturePointSet,
    tgt_neutral: &FeaturePointSet,
) -> Result<FeaturePointSet> {
    src_neutral.check_schema(src_exp)?;
    src_neutral.check_schema(tgt_neutral)?;
    let (sx, sy) = displacement_scale(src_neutral, tgt_neutral)?;
    let moved: Vec<Point> = (0..tgt_neutral.len())
        .map(|i| {
            let d = src_exp.pos(i) - src_neutral.pos(i);
            tgt_neutral.pos(i) + Point::new(sx * d.x, sy * d.y)
        })
        .collect();
    tgt_neutral.with_positions(&moved)
}

/// Renders GI. `reference` supplies connectivity and must be built over
/// `tgt_neutral_pts`.
pub fn render_global(
    tgt_neutral_img: &RasterImage,
    reference: &TriangleMesh,
    global_pts: &FeaturePointSet,
) -> Result<RasterImage> {
    tgt_neutral_img.expect_size(reference.vertices().size())?;
    let dst = reference.with_vertices(global_pts.clone())?;
    piecewise_affine_warp(tgt_neutral_img, reference, &dst)
}

pub fn global_warp(
    src_neutral: &FeaturePointSet,
    src_exp: &FeaturePointSet,
    tgt_neutral_img: &RasterImage,
    reference: &TriangleMesh,
) -> Result<GlobalWarpResult> {
    let positions = transfer_displacements(src_neutral, src_exp, reference.vertices())?;
    let image = render_global(tgt_neutral_img, reference, &positions)?;
    Ok(GlobalWarpResult { positions, image })
}
