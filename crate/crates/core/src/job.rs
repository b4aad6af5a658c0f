//! File-level jobs: load inputs from disk, run the pipeline, write the
//! result, the optional DB report and per-stage debug dumps.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::db_metric::{LambdaGrid, LambdaSelection, DEFAULT_OMEGA_DB};
use crate::eigenface::{train_basis, EigenBasis};
use crate::error::{Error, Result, Stage};
use crate::face_model::parse_feature_points;
use crate::illumination::{parse_muscle_config, to_debug_image, DumpMapping, MuscleAreaSpec};
use crate::image::RasterImage;
use crate::local_reshape::records_to_text;
use crate::pipeline::{run_batch, run_clone, BatchFrame, CloneInputs, CloneOptions, Face, FrameOutcome, StageOutputs};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacePaths {
    pub image: PathBuf,
    pub points: PathBuf,
}

impl FacePaths {
    pub fn new(image: impl Into<PathBuf>, points: impl Into<PathBuf>) -> Self {
        FacePaths {
            image: image.into(),
            points: points.into(),
        }
    }

    pub fn load(&self) -> Result<Face> {
        let image = RasterImage::read(&self.image)?;
        let text = fs::read_to_string(&self.points).map_err(|e| Error::from(e).in_file(&self.points))?;
        let points = parse_feature_points(&text, Some(image.size())).map_err(|e| e.in_file(&self.points))?;
        Face::new(image, points).map_err(|e| e.in_file(&self.points))
    }
}

/// Options shared by single and batch jobs.
#[derive(Debug, Clone, Default)]
pub struct JobSettings {
    pub muscles: Option<PathBuf>,
    pub train_dir: Option<PathBuf>,
    /// Sidecar file for the trained basis: loaded when present, written
    /// after training otherwise.
    pub basis_cache: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<LambdaGrid>,
    pub omega_db: Option<f64>,
    pub db_report: Option<PathBuf>,
    pub dump_stages: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CloneJob {
    pub src_neutral: FacePaths,
    pub src_exp: FacePaths,
    pub tgt_neutral: FacePaths,
    pub output: PathBuf,
    pub settings: JobSettings,
}

/// Reads every `.pgm`/`.ppm`/`.pnm` file of a directory, in name order.
pub fn load_training_dir(dir: &Path) -> Result<Vec<RasterImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::from(e).in_file(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        })
        .collect();
    paths.sort();
    paths.iter().map(RasterImage::read).collect()
}

pub fn load_basis(settings: &JobSettings) -> Result<Option<EigenBasis>> {
    if let Some(cache) = &settings.basis_cache {
        if cache.exists() {
            log::info!("loading eigenbasis from {}", cache.display());
            return EigenBasis::load(cache).map(Some);
        }
    }
    let Some(dir) = &settings.train_dir else {
        return Ok(None);
    };
    let images = load_training_dir(dir)?;
    let basis = train_basis(&images, None).map_err(|e| e.in_file(dir))?;
    log::info!("trained {} eigenfaces from {} images", basis.len(), images.len());
    if let Some(cache) = &settings.basis_cache {
        basis.save(cache)?;
    }
    Ok(Some(basis))
}

fn load_muscles(settings: &JobSettings, landmarks: usize) -> Result<Vec<MuscleAreaSpec>> {
    let Some(path) = &settings.muscles else {
        return Ok(Vec::new());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let specs = parse_muscle_config(&text).map_err(|e| e.in_file(path))?;
    for s in &specs {
        s.check_ids(landmarks).map_err(|e| e.in_file(path))?;
    }
    Ok(specs)
}

fn options<'a>(
    settings: &JobSettings,
    muscles: Vec<MuscleAreaSpec>,
    basis: Option<&'a EigenBasis>,
) -> CloneOptions<'a> {
    CloneOptions {
        lambda: settings.lambda,
        grid: settings.lambda_grid.clone().unwrap_or_default(),
        omega_db: settings.omega_db.unwrap_or(DEFAULT_OMEGA_DB),
        muscles,
        basis,
        render_local: settings.dump_stages.is_some(),
    }
}

/// Writes the score table when a report path is configured and λ was
/// selected.
fn write_report(settings: &JobSettings, selection: Option<&LambdaSelection>) -> Result<()> {
    let Some(path) = &settings.db_report else {
        return Ok(());
    };
    match selection {
        Some(sel) => fs::write(path, sel.report()).map_err(|e| Error::from(e).in_file(path)),
        None => {
            log::warn!("no lambda selection ran; {} not written", path.display());
            Ok(())
        }
    }
}

fn image_ext(img: &RasterImage) -> &'static str {
    if img.channels() == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

/// Writes every intermediate of `out` into `dir`. Returns the value
/// mappings used for the real-valued fields.
pub fn write_stage_dumps(dir: &Path, out: &StageOutputs) -> Result<Vec<(String, DumpMapping)>> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let write_text = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::from(e).in_file(path))
    };
    let write_img = |stem: &str, img: &RasterImage| img.write(dir.join(format!("{stem}.{}", image_ext(img))));

    write_img("gi", &out.global.image)?;
    if let Some(li) = &out.local_img {
        write_img("li", li)?;
    }
    write_img("fi", &out.fi_img)?;
    write_img("final", &out.final_img)?;
    write_text("global.pts", out.global.positions.to_text())?;
    write_text("local.pts", out.local_pts.to_text())?;
    write_text("fi.pts", out.fi_pts.to_text())?;
    write_text("reshape.txt", records_to_text(&out.reshape_records))?;
    let mut solve = String::from("# id x y residual\n");
    for (i, s) in out.solve_report.iter().enumerate() {
        solve.push_str(&format!("{i} {} {} {}\n", s.position.x, s.position.y, s.residual));
    }
    write_text("solve.txt", solve)?;
    write_text("lambda.txt", format!("{} {:?}\n", out.lambda, out.lambda_source))?;

    let (w, h) = (out.fi_img.width(), out.fi_img.height());
    let fields: [(&str, &[f64]); 3] = [
        ("eri", out.eri.values()),
        ("mask", out.mask.values()),
        ("detail", out.detail.values()),
    ];
    let mut mappings = Vec::new();
    let mut listing = String::new();
    for (name, values) in fields {
        let (img, mapping) = to_debug_image(w, h, values);
        img.write(dir.join(format!("{name}.pgm")))?;
        listing.push_str(&format!("{name}.pgm {mapping}\n"));
        mappings.push((name.to_string(), mapping));
    }
    write_text("mappings.txt", listing)?;
    Ok(mappings)
}

#[derive(Debug)]
pub struct CloneJobOutcome {
    pub outputs: StageOutputs,
    pub dump_mappings: Vec<(String, DumpMapping)>,
}

pub fn run_clone_job(job: &CloneJob) -> Result<CloneJobOutcome> {
    let (src_neutral, src_exp, tgt_neutral, basis, muscles) = (|| {
        let sn = job.src_neutral.load()?;
        let se = job.src_exp.load()?;
        let tn = job.tgt_neutral.load()?;
        let basis = load_basis(&job.settings)?;
        let muscles = load_muscles(&job.settings, tn.points.len())?;
        Ok((sn, se, tn, basis, muscles))
    })()
    .map_err(|e: Error| e.at_stage(Stage::Load))?;

    let opts = options(&job.settings, muscles, basis.as_ref());
    let outputs = run_clone(
        CloneInputs {
            src_neutral: &src_neutral,
            src_exp: &src_exp,
            tgt_neutral: &tgt_neutral,
        },
        &opts,
    )?;

    let dump_mappings = (|| {
        outputs.final_img.write(&job.output)?;
        write_report(&job.settings, outputs.selection.as_ref())?;
        match &job.settings.dump_stages {
            Some(dir) => write_stage_dumps(dir, &outputs),
            None => Ok(Vec::new()),
        }
    })()
    .map_err(|e: Error| e.at_stage(Stage::Output))?;

    Ok(CloneJobOutcome { outputs, dump_mappings })
}

/// A printf-style path pattern with a single `%d` or `%0Nd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    width: usize,
    suffix: String,
}

impl FramePattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("frame pattern `{pattern}` needs exactly one %d or %0Nd"));
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        let d = rest.find('d').ok_or_else(bad)?;
        let spec = &rest[..d];
        let width = if spec.is_empty() {
            0
        } else if spec.starts_with('0') && spec.len() > 1 {
            spec[1..].parse().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        let suffix = rest[d + 1..].to_string();
        if suffix.contains('%') {
            return Err(bad());
        }
        Ok(FramePattern {
            prefix: pattern[..start].to_string(),
            width,
            suffix,
        })
    }

    pub fn format(&self, index: usize) -> PathBuf {
        PathBuf::from(format!(
            "{}{:0width$}{}",
            self.prefix,
            index,
            self.suffix,
            width = self.width
        ))
    }

    /// Indices of existing files that match the pattern.
    pub fn discover(&self) -> Result<BTreeSet<usize>> {
        let full = PathBuf::from(&self.prefix);
        let (dir, file_prefix) = if self.prefix.ends_with('/') {
            (full.clone(), String::new())
        } else {
            (
                full.parent().map(Path::to_path_buf).unwrap_or_default(),
                full.file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        };
        let dir = if dir.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            dir
        };
        if self.suffix.contains('/') {
            return Err(Error::InvalidArgument(
                "the frame number must be in the file name".into(),
            ));
        }
        let mut found = BTreeSet::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(found),
            Err(e) => return Err(Error::from(e).in_file(dir)),
        };
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(mid) = name
                .strip_prefix(file_prefix.as_str())
                .and_then(|r| r.strip_suffix(self.suffix.as_str()))
            else {
                continue;
            };
            if mid.is_empty() || !mid.bytes().all(|b| b.is_ascii_digit()) {
                continue;
            }
            if let Ok(i) = mid.parse::<usize>() {
                if format!("{:0width$}", i, width = self.width) == mid {
                    found.insert(i);
                }
            }
        }
        Ok(found)
    }
}

#[derive(Debug, Clone)]
pub struct BatchJob {
    pub src_neutral: FacePaths,
    pub tgt_neutral: FacePaths,
    /// Source expression images.
    pub frames: FramePattern,
    /// Source expression landmarks.
    pub frame_pts: FramePattern,
    /// Output images.
    pub output: FramePattern,
    pub settings: JobSettings,
}

#[derive(Debug)]
pub struct BatchJobOutcome {
    pub lambda: Option<f64>,
    pub frames: Vec<FrameOutcome>,
    pub skipped: Vec<usize>,
}

impl BatchJobOutcome {
    pub fn is_complete(&self) -> bool {
        self.skipped.is_empty() && self.frames.iter().all(|f| f.result.is_ok())
    }
}

pub fn run_batch_job(job: &BatchJob) -> Result<BatchJobOutcome> {
    let (src_neutral, tgt_neutral, basis, muscles) = (|| {
        let sn = job.src_neutral.load()?;
        let tn = job.tgt_neutral.load()?;
        let basis = load_basis(&job.settings)?;
        let muscles = load_muscles(&job.settings, tn.points.len())?;
        Ok((sn, tn, basis, muscles))
    })()
    .map_err(|e: Error| e.at_stage(Stage::Load))?;

    let indices: BTreeSet<usize> = job
        .frames
        .discover()?
        .union(&job.frame_pts.discover()?)
        .copied()
        .collect();
    if indices.is_empty() {
        return Err(Error::InvalidArgument("no frames match the frame patterns".into()).at_stage(Stage::Load));
    }

    let mut frames = Vec::new();
    let mut load_failures = Vec::new();
    for &index in &indices {
        let paths = FacePaths::new(job.frames.format(index), job.frame_pts.format(index));
        if !paths.image.exists() || !paths.points.exists() {
            frames.push(BatchFrame { index, face: None });
            continue;
        }
        match paths.load() {
            Ok(face) => frames.push(BatchFrame {
                index,
                face: Some(face),
            }),
            Err(e) => load_failures.push(FrameOutcome {
                index,
                result: Err(e.at_stage(Stage::Load)),
            }),
        }
    }

    let opts = options(&job.settings, muscles, basis.as_ref());
    let batch = run_batch(&src_neutral, &tgt_neutral, &frames, &opts);
    write_report(&job.settings, batch.selection.as_ref()).map_err(|e| e.at_stage(Stage::Output))?;

    let mut outcomes = Vec::with_capacity(batch.frames.len() + load_failures.len());
    for mut f in batch.frames {
        if let Ok(out) = &f.result {
            let written = (|| {
                out.final_img.write(job.output.format(f.index))?;
                if let Some(dir) = &job.settings.dump_stages {
                    write_stage_dumps(&dir.join(format!("frame{:05}", f.index)), out)?;
                }
                Ok(())
            })();
            if let Err(e) = written {
                f.result = Err(Error::at_stage(e, Stage::Output));
            }
        }
        outcomes.push(f);
    }
    outcomes.extend(load_failures);
    outcomes.sort_by_key(|f| f.index);

    Ok(BatchJobOutcome {
        lambda: batch.lambda,
        frames: outcomes,
        skipped: batch.skipped,
    })
}
