//! Demo data: two synthetic people, a training set and a short sequence.

use std::fs;
use std::path::Path;

use anyhow::Result;
use exprclone_core::synthetic::{face, Expression, FaceShape, DEFAULT_MUSCLE_CONFIG};
use exprclone_core::ImageSize;

pub fn write_demo(dir: &Path, size: u32, frames: usize) -> Result<()> {
    let canvas = ImageSize::new(size, size);
    let scale = f64::from(size) / 256.0;
    let source = FaceShape::person_a().scaled(scale);
    let target = FaceShape::person_b().scaled(scale);
    fs::create_dir_all(dir.join("train"))?;
    fs::create_dir_all(dir.join("frames"))?;

    let save = |stem: &str, shape: &FaceShape, e: &Expression| -> Result<()> {
        let f = face(shape, e, canvas);
        f.image.write(dir.join(format!("{stem}.ppm")))?;
        fs::write(dir.join(format!("{stem}.pts")), f.points.to_text())?;
        Ok(())
    };
    save("src_neutral", &source, &Expression::NEUTRAL)?;
    save("src_exp", &source, &Expression::happy())?;
    save("tgt_neutral", &target, &Expression::NEUTRAL)?;

    for (i, e) in Expression::training_series().iter().enumerate() {
        face(&target, e, canvas)
            .image
            .write(dir.join(format!("train/{i:02}.ppm")))?;
    }
    for i in 0..frames {
        let t = if frames > 1 {
            i as f64 / (frames - 1) as f64
        } else {
            1.0
        };
        let e = Expression::new(t, 0.4 * t, 0.5 * t, 1.0 - 0.2 * t);
        save(&format!("frames/src_{i:04}"), &source, &e)?;
    }
    fs::write(dir.join("muscles.txt"), DEFAULT_MUSCLE_CONFIG)?;
    println!("demo data written to {}", dir.display());
    Ok(())
}
