//! End-to-end cloning: GI → A' → λ selection → FI → ERI + MD → F_IMG, and
//! the per-frame batch driver.

use rayon::prelude::*;

use crate::db_metric::{db_score, select_lambda, LambdaGrid, LambdaSelection, DEFAULT_OMEGA_DB};
use crate::eigenface::EigenBasis;
use crate::elastic::{solve_all, SolveReport};
use crate::error::{Error, Result, Stage};
use crate::face_model::{FeaturePointSet, Organ};
use crate::global_warp::{render_global, transfer_displacements, GlobalWarpResult};
use crate::illumination::{
    apply_md, build_mask, compose_final, compute_eri, ImportanceMask, MuscleArea, MuscleAreaSpec, RatioImage,
};
use crate::image::RasterImage;
use crate::local_reshape::{reshape_organs, ReshapeRecord};
use crate::mesh::{delaunay_triangulate, TriangleMesh};

/// λ used when no override is given and no eigenbasis is available.
pub const FALLBACK_LAMBDA: f64 = 1.0;

/// An image with its landmarks.
#[derive(Debug, Clone)]
pub struct Face {
    pub image: RasterImage,
    pub points: FeaturePointSet,
}

impl Face {
    pub fn new(image: RasterImage, points: FeaturePointSet) -> Result<Self> {
        image.expect_size(points.size())?;
        Ok(Face { image, points })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CloneInputs<'a> {
    pub src_neutral: &'a Face,
    pub src_exp: &'a Face,
    pub tgt_neutral: &'a Face,
}

#[derive(Debug, Clone)]
pub struct CloneOptions<'a> {
    /// Fixed elasticity ratio; skips the DB metric.
    pub lambda: Option<f64>,
    pub grid: LambdaGrid,
    pub omega_db: f64,
    pub muscles: Vec<MuscleAreaSpec>,
    pub basis: Option<&'a EigenBasis>,
    /// Also render the local-warp image LI.
    pub render_local: bool,
}

impl Default for CloneOptions<'_> {
    fn default() -> Self {
        CloneOptions {
            lambda: None,
            grid: LambdaGrid::default(),
            omega_db: DEFAULT_OMEGA_DB,
            muscles: Vec::new(),
            basis: None,
            render_local: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSource {
    Override,
    Selected,
    Fallback,
}

#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub reference: TriangleMesh,
    pub global: GlobalWarpResult,
    pub local_pts: FeaturePointSet,
    pub reshape_records: Vec<ReshapeRecord>,
    pub local_img: Option<RasterImage>,
    pub lambda: f64,
    pub lambda_source: LambdaSource,
    pub selection: Option<LambdaSelection>,
    pub fi_pts: FeaturePointSet,
    pub solve_report: SolveReport,
    pub fi_img: RasterImage,
    /// ERI before the box pre-filter.
    pub eri: RatioImage,
    pub areas: Vec<MuscleArea>,
    pub mask: ImportanceMask,
    pub detail: RatioImage,
    pub final_img: RasterImage,
}

/// Organs whose source landmarks move between neutral and expression.
pub fn moving_organs(src_neutral: &FeaturePointSet, src_exp: &FeaturePointSet) -> Vec<Organ> {
    Organ::RESHAPED
        .into_iter()
        .filter(|&o| src_neutral.organ_ids(o).any(|i| src_neutral.pos(i) != src_exp.pos(i)))
        .collect()
}

fn validate(inputs: &CloneInputs<'_>) -> Result<()> {
    let (sn, se, tn) = (inputs.src_neutral, inputs.src_exp, inputs.tgt_neutral);
    sn.points.check_schema(&se.points)?;
    sn.points.check_schema(&tn.points)?;
    for f in [sn, se, tn] {
        f.image.expect_size(f.points.size())?;
    }
    if sn.image.size() != se.image.size() {
        return Err(Error::DimensionMismatch {
            expected: sn.image.size().to_string(),
            found: se.image.size().to_string(),
        });
    }
    Ok(())
}

/// FI points and image for one elasticity ratio.
fn elastic_result(
    reference: &TriangleMesh,
    tgt_img: &RasterImage,
    global_pts: &FeaturePointSet,
    local_pts: &FeaturePointSet,
    lambda: f64,
) -> Result<(FeaturePointSet, SolveReport, RasterImage)> {
    let (fi_pts, report) =
        solve_all(global_pts, local_pts, reference, lambda).map_err(|e| e.at_stage(Stage::Elastic))?;
    let fi_img = render_global(tgt_img, reference, &fi_pts).map_err(|e| e.at_stage(Stage::Render))?;
    Ok((fi_pts, report, fi_img))
}

pub fn run_clone(inputs: CloneInputs<'_>, options: &CloneOptions<'_>) -> Result<StageOutputs> {
    validate(&inputs).map_err(|e| e.at_stage(Stage::Load))?;
    let tgt = inputs.tgt_neutral;

    let reference = delaunay_triangulate(&tgt.points).map_err(|e| e.at_stage(Stage::GlobalWarp))?;
    let global = (|| {
        let positions = transfer_displacements(&inputs.src_neutral.points, &inputs.src_exp.points, &tgt.points)?;
        let image = render_global(&tgt.image, &reference, &positions)?;
        Ok(GlobalWarpResult { positions, image })
    })()
    .map_err(|e: Error| e.at_stage(Stage::GlobalWarp))?;

    let organs = moving_organs(&inputs.src_neutral.points, &inputs.src_exp.points);
    let (local_pts, reshape_records) = reshape_organs(&inputs.src_exp.points, &global.positions, &organs)
        .map_err(|e| e.at_stage(Stage::LocalReshape))?;
    let local_img = if options.render_local {
        match render_global(&tgt.image, &reference, &local_pts) {
            Ok(img) => Some(img),
            Err(e) => {
                log::warn!("local-warp image not rendered: {e}");
                None
            }
        }
    } else {
        None
    };

    let (lambda, lambda_source, selection) = match (options.lambda, options.basis) {
        (Some(l), _) => (l, LambdaSource::Override, None),
        (None, Some(basis)) => {
            let size = basis.size();
            let fit = |img: &RasterImage| img.fit_to(size.width, size.height);
            let source_exp = fit(&inputs.src_exp.image);
            let gi = fit(&global.image);
            let sel = select_lambda(&options.grid, |l| {
                let (_, _, fi_img) = elastic_result(&reference, &tgt.image, &global.positions, &local_pts, l)?;
                db_score(basis, &fit(&fi_img), &source_exp, &gi, options.omega_db)
            })
            .map_err(|e| e.at_stage(Stage::LambdaSelection))?;
            (sel.lambda, LambdaSource::Selected, Some(sel))
        }
        (None, None) => {
            log::info!("no eigenbasis available; using elasticity ratio {FALLBACK_LAMBDA}");
            (FALLBACK_LAMBDA, LambdaSource::Fallback, None)
        }
    };

    let (fi_pts, solve_report, fi_img) = elastic_result(&reference, &tgt.image, &global.positions, &local_pts, lambda)?;

    let (eri, areas, mask, detail, final_img) = (|| {
        let eri = compute_eri(
            &inputs.src_neutral.image,
            &inputs.src_exp.image,
            &reference,
            &inputs.src_neutral.points,
            &inputs.src_exp.points,
            &fi_pts,
        )?;
        let filtered = eri.box_filter_3x3();
        let areas = options
            .muscles
            .iter()
            .map(|spec| spec.resolve(&fi_pts))
            .collect::<Result<Vec<_>>>()?;
        let mask = build_mask(&areas, fi_img.width(), fi_img.height());
        let detail = apply_md(&filtered, &mask)?;
        let final_img = compose_final(&fi_img, &detail)?;
        Ok((eri, areas, mask, detail, final_img))
    })()
    .map_err(|e: Error| e.at_stage(Stage::Illumination))?;

    Ok(StageOutputs {
        reference,
        global,
        local_pts,
        reshape_records,
        local_img,
        lambda,
        lambda_source,
        selection,
        fi_pts,
        solve_report,
        fi_img,
        eri,
        areas,
        mask,
        detail,
        final_img,
    })
}

/// One frame of a batch; `face` is `None` when its inputs are missing.
#[derive(Debug, Clone)]
pub struct BatchFrame {
    pub index: usize,
    pub face: Option<Face>,
}

#[derive(Debug)]
pub struct FrameOutcome {
    pub index: usize,
    pub result: Result<StageOutputs>,
}

#[derive(Debug)]
pub struct BatchOutcome {
    /// λ shared by every processed frame; `None` when no frame succeeded.
    pub lambda: Option<f64>,
    pub selection: Option<LambdaSelection>,
    /// Frames that were processed, in index order.
    pub frames: Vec<FrameOutcome>,
    /// Indices of frames whose inputs were missing.
    pub skipped: Vec<usize>,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.skipped.is_empty() && self.frames.iter().all(|f| f.result.is_ok())
    }
}

/// Clones every frame's expression onto one target. λ is chosen on the
/// first frame that succeeds and reused for all others.
pub fn run_batch(
    src_neutral: &Face,
    tgt_neutral: &Face,
    frames: &[BatchFrame],
    options: &CloneOptions<'_>,
) -> BatchOutcome {
    let mut skipped = Vec::new();
    let mut present: Vec<(usize, &Face)> = Vec::new();
    for f in frames {
        match &f.face {
            Some(face) => present.push((f.index, face)),
            None => {
                log::warn!("frame {} skipped: missing inputs", f.index);
                skipped.push(f.index);
            }
        }
    }
    present.sort_by_key(|(i, _)| *i);

    let mut outcomes = Vec::with_capacity(present.len());
    let mut shared = None;
    let mut rest = present.as_slice();
    while let Some((&(index, face), tail)) = rest.split_first() {
        rest = tail;
        let result = run_clone(
            CloneInputs {
                src_neutral,
                src_exp: face,
                tgt_neutral,
            },
            options,
        );
        let done = result.as_ref().ok().map(|o| (o.lambda, o.selection.clone()));
        outcomes.push(FrameOutcome { index, result });
        if let Some(d) = done {
            shared = Some(d);
            break;
        }
    }

    let Some((lambda, selection)) = shared else {
        return BatchOutcome {
            lambda: None,
            selection: None,
            frames: outcomes,
            skipped,
        };
    };
    let fixed = CloneOptions {
        lambda: Some(lambda),
        ..options.clone()
    };
    let others: Vec<FrameOutcome> = rest
        .par_iter()
        .map(|&(index, face)| FrameOutcome {
            index,
            result: run_clone(
                CloneInputs {
                    src_neutral,
                    src_exp: face,
                    tgt_neutral,
                },
                &fixed,
            ),
        })
        .collect();
    outcomes.extend(others);
    BatchOutcome {
        lambda: Some(lambda),
        selection,
        frames: outcomes,
        skipped,
    }
}
