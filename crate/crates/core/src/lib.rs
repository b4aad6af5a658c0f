//! Facial expression cloning on 2D images.
//!
//! Given a source person's neutral and expression faces and a target
//! person's neutral face, each with landmarks, the pipeline
//!
//! 1. moves the target landmarks by the source displacements and mesh-warps
//!    the target image ([`global_warp`]),
//! 2. re-shapes each target organ to the source expression organ's
//!    height-to-width ratio ([`local_reshape`]),
//! 3. balances the two landmark sets with a spring model
//!    ([`elastic`]), optionally choosing the elasticity ratio by an
//!    eigenface distance score ([`eigenface`], [`db_metric`]),
//! 4. transfers illumination detail through an expression ratio image
//!    weighted by a muscle-area mask ([`illumination`]).
//!
//! [`pipeline::run_clone`] runs everything; [`job`] adds file handling.

pub mod db_metric;
pub mod eigenface;
pub mod elastic;
pub mod error;
pub mod face_model;
pub mod geom;
pub mod global_warp;
pub mod illumination;
pub mod image;
pub mod job;
pub mod local_reshape;
pub mod mesh;
pub mod pipeline;
pub mod synthetic;

pub use db_metric::{db_score, select_lambda, DbScore, LambdaGrid, LambdaSelection};
pub use eigenface::{train_basis, EigenBasis};
pub use elastic::{solve_all, SpringSystem};
pub use error::{Error, Result, Stage};
pub use face_model::{parse_feature_points, FeaturePoint, FeaturePointSet, ImageSize, Organ, OrganBox};
pub use geom::Point;
pub use global_warp::{render_global, transfer_displacements, GlobalWarpResult};
pub use illumination::{
    apply_md, build_mask, compose_final, compute_eri, parse_muscle_config, ImportanceMask, MuscleArea, MuscleAreaSpec,
    RatioImage,
};
pub use image::RasterImage;
pub use local_reshape::{reshape_all, reshape_organ, ReshapeRecord};
pub use mesh::{delaunay_triangulate, piecewise_affine_warp, TriangleMesh};
pub use pipeline::{run_batch, run_clone, CloneInputs, CloneOptions, Face, StageOutputs};
