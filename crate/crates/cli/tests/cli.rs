use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exprclone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exprclone"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn demo(dir: &Path, frames: usize) {
    let out = exprclone(&[
        "synth",
        "--out-dir",
        dir.to_str().unwrap(),
        "--size",
        "96",
        "--frames",
        &frames.to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn clone_args(dir: &Path) -> Vec<String> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    [
        ("--src-neutral", "src_neutral.ppm"),
        ("--src-neutral-pts", "src_neutral.pts"),
        ("--src-exp", "src_exp.ppm"),
        ("--src-exp-pts", "src_exp.pts"),
        ("--tgt-neutral", "tgt_neutral.ppm"),
        ("--tgt-neutral-pts", "tgt_neutral.pts"),
        ("--muscles", "muscles.txt"),
    ]
    .iter()
    .flat_map(|&(flag, file)| [flag.to_owned(), p(file)])
    .collect()
}

fn run(args: &[String]) -> Output {
    exprclone(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn clone_with_selection_writes_output_report_and_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 1);
    let mut args = vec!["clone".to_owned()];
    args.extend(clone_args(dir));
    for (flag, name) in [
        ("--train-dir", "train"),
        ("--basis-cache", "basis.eig"),
        ("--db-report", "report.txt"),
        ("--dump-stages", "stages"),
        ("-o", "out.ppm"),
    ] {
        args.push(flag.into());
        args.push(dir.join(name).to_str().unwrap().into());
    }
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Selected"), "{stdout}");

    let img = fs::read(dir.join("out.ppm")).unwrap();
    assert!(img.starts_with(b"P6"));
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 8);
    assert!(dir.join("basis.eig").exists());
    for name in [
        "gi.ppm",
        "fi.ppm",
        "final.ppm",
        "eri.pgm",
        "mask.pgm",
        "lambda.txt",
        "reshape.txt",
    ] {
        assert!(dir.join("stages").join(name).exists(), "missing dump {name}");
    }

    // second run reads the cached basis and reproduces the output
    fs::rename(dir.join("out.ppm"), dir.join("first.ppm")).unwrap();
    let out = run(&args);
    assert!(out.status.success());
    assert_eq!(
        fs::read(dir.join("first.ppm")).unwrap(),
        fs::read(dir.join("out.ppm")).unwrap()
    );
}

#[test]
fn fixed_lambda_without_training() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 1);
    let mut args = vec!["clone".to_owned()];
    args.extend(clone_args(dir));
    args.extend([
        "--lambda".into(),
        "0.5".into(),
        "-o".into(),
        dir.join("o.ppm").to_str().unwrap().into(),
    ]);
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda 0.5 (Override)"));

    let mut args = vec!["clone".to_owned()];
    args.extend(clone_args(dir));
    args.extend(["-o".into(), dir.join("f.ppm").to_str().unwrap().into()]);
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda 1 (Fallback)"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("notice"));
}

#[test]
fn bad_inputs_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 1);
    let out_path = dir.join("o.ppm").to_str().unwrap().to_owned();

    let mut missing = vec!["clone".to_owned()];
    missing.extend(
        clone_args(dir)
            .into_iter()
            .map(|a| a.replace("src_exp.ppm", "nope.ppm")),
    );
    missing.extend(["-o".into(), out_path.clone()]);
    let out = run(&missing);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ppm"));

    let pts = fs::read_to_string(dir.join("src_exp.pts")).unwrap();
    fs::write(dir.join("src_exp.pts"), pts.replacen("0 contour", "0 cheek", 1)).unwrap();
    let mut bad_organ = vec!["clone".to_owned()];
    bad_organ.extend(clone_args(dir));
    bad_organ.extend(["-o".into(), out_path.clone()]);
    let out = run(&bad_organ);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let mut bad_lambda = vec!["clone".to_owned()];
    fs::write(dir.join("src_exp.pts"), pts).unwrap();
    bad_lambda.extend(clone_args(dir));
    bad_lambda.extend(["--lambda".into(), "-1".into(), "-o".into(), out_path]);
    assert_eq!(run(&bad_lambda).status.code(), Some(2));
}

#[test]
fn flat_organ_is_a_stage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 1);
    // give the moving left brow zero height in the source expression
    let pts = fs::read_to_string(dir.join("src_exp.pts")).unwrap();
    let flat: String = pts
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.get(1) == Some(&"left_brow") {
                format!("{} {} {} 20\n", f[0], f[1], f[2])
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    fs::write(dir.join("src_exp.pts"), flat).unwrap();
    let mut args = vec!["clone".to_owned()];
    args.extend(clone_args(dir));
    args.extend([
        "--lambda".into(),
        "1".into(),
        "-o".into(),
        dir.join("o.ppm").to_str().unwrap().into(),
    ]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("left_brow"), "{stderr}");
}

#[test]
fn batch_skips_missing_frames_with_partial_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 4);
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    let args: Vec<String> = [
        "batch",
        "--src-neutral",
        &p("src_neutral.ppm"),
        "--src-neutral-pts",
        &p("src_neutral.pts"),
        "--tgt-neutral",
        &p("tgt_neutral.ppm"),
        "--tgt-neutral-pts",
        &p("tgt_neutral.pts"),
        "--frames",
        &p("frames/src_%04d.ppm"),
        "--frame-pts",
        &p("frames/src_%04d.pts"),
        "--muscles",
        &p("muscles.txt"),
        "--train-dir",
        &p("train"),
        "-o",
        &p("out_%04d.ppm"),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..4 {
        assert!(dir.join(format!("out_{i:04}.ppm")).exists());
    }

    fs::remove_file(dir.join("frames/src_0002.pts")).unwrap();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame 2 skipped"));
}

#[test]
fn train_writes_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    demo(dir, 1);
    let out = exprclone(&[
        "train",
        "--train-dir",
        dir.join("train").to_str().unwrap(),
        "-o",
        dir.join("b.eig").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(fs::read(dir.join("b.eig")).unwrap().starts_with(b"EIGB1"));
}
