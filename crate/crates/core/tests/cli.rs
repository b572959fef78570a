use std::path::Path;
use std::process::{Command, Output};

use lvct_core::io::{load_grid, save_grid, Grid};

fn lvct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvct")).args(args).env_remove("LVCT_SEED").output().expect("spawn lvct")
}

fn ok(args: &[&str]) -> String {
    let out = lvct(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Exit code and the single stderr line.
fn failure(args: &[&str]) -> (i32, String) {
    let out = lvct(args);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    (out.status.code().unwrap(), err)
}

#[test]
fn rear_cut_mask_is_120_ones_then_60_zeros() {
    let d = tempfile::tempdir().unwrap();
    ok(&["phantom", "--size", "32", "-o", &p(d.path(), "img.grid")]);
    ok(&["radon", &p(d.path(), "img.grid"), "--angles", "180", "--detectors", "32", "-o", &p(d.path(), "s.grid")]);
    ok(&["cut", &p(d.path(), "s.grid"), "--mode", "rear", "--degrees", "60", "-o", &p(d.path(), "c.grid")]);
    let mask = load_grid(&d.path().join("c.mask.grid")).unwrap();
    assert_eq!(mask.dims(), &[180]);
    assert!(mask.data()[..120].iter().all(|&v| v == 1.0));
    assert!(mask.data()[120..].iter().all(|&v| v == 0.0));
    let cut = load_grid(&d.path().join("c.grid")).unwrap();
    assert!((0..32).all(|r| cut.data()[r * 180 + 150] == 0.0));
}

#[test]
fn merge_fbp_sart_and_eval_format() {
    let d = tempfile::tempdir().unwrap();
    let f = |n| p(d.path(), n);
    ok(&["phantom", "--size", "32", "-o", &f("img.grid")]);
    ok(&["radon", &f("img.grid"), "--angles", "60", "--detectors", "32", "-o", &f("s.grid")]);
    ok(&["cut", &f("s.grid"), "--mode", "middle", "--degrees", "60", "-o", &f("c.grid")]);
    ok(&["merge", &f("c.grid"), "--mask", &f("c.mask.grid"), "-o", &f("m.grid")]);
    ok(&["fbp", &f("m.grid"), "--size", "32", "-o", &f("fbp.grid")]);
    ok(&[
        "sart-tv",
        &f("c.grid"),
        "--mask",
        &f("c.mask.grid"),
        "--size",
        "32",
        "--iterations",
        "3",
        "-o",
        &f("st.grid"),
    ]);
    for out in ["fbp.grid", "st.grid"] {
        let line = ok(&["eval", &f(out), &f("img.grid")]);
        let line = line.trim_end();
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts.len(), 2, "{line}");
        for (part, key) in parts.iter().zip(["PSNR=", "SSIM="]) {
            let v = part.strip_prefix(key).unwrap();
            assert_eq!(v.split('.').nth(1).unwrap().len(), 3, "{line}");
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
    let same = ok(&["eval", &f("img.grid"), &f("img.grid")]);
    assert_eq!(same, "PSNR=200.000 SSIM=1.000\n");
}

#[test]
fn errors_are_one_line_with_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    let (usage, msg) = failure(&["fbp", "--bogus"]);
    assert_eq!(usage, 2);
    assert!(msg.starts_with("error: kind=usage code=2 "), "{msg}");
    let (missing, msg) = failure(&["eval", &p(d.path(), "a.grid"), &p(d.path(), "b.grid")]);
    assert!(msg.starts_with("error: kind=io code=3 "), "{msg}");
    std::fs::write(d.path().join("junk.grid"), b"NOTAGRIDFILE").unwrap();
    let (magic, _) = failure(&["fbp", &p(d.path(), "junk.grid"), "-o", &p(d.path(), "o.grid")]);
    save_grid(&d.path().join("s.grid"), &Grid::new(vec![8, 12], vec![0.0; 96]).unwrap()).unwrap();
    let (invalid, msg) = failure(&["cut", &p(d.path(), "s.grid"), "--degrees", "200", "-o", &p(d.path(), "c.grid")]);
    assert!(msg.contains("kind=invalid_argument"), "{msg}");
    let (ckpt, msg) = failure(&["pipeline"]);
    assert!(msg.contains("kind=config"), "{msg}");
    let mut codes = vec![usage, missing, magic, invalid, ckpt];
    codes.sort();
    codes.dedup();
    assert_eq!(codes.len(), 5);
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let f = |n| p(d.path(), n);
    let args = |out: &str| {
        vec![
            "phantom".to_string(),
            "--kind".into(),
            "volume".into(),
            "--size".into(),
            "32".into(),
            "--slices".into(),
            "6".into(),
            "-o".into(),
            out.to_string(),
        ]
    };
    let run = |extra: &[&str], out: &str, env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_lvct"));
        c.args(extra).args(args(out)).env_remove("LVCT_SEED");
        if let Some(s) = env {
            c.env("LVCT_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let a = run(&["--seed", "5"], &f("a.grid"), None);
    let b = run(&["--seed", "5"], &f("b.grid"), None);
    let c = run(&[], &f("c.grid"), Some("5"));
    let e = run(&["--seed", "6"], &f("e.grid"), Some("5"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, e);
}

#[test]
fn gradcheck_passes_and_lists_every_case() {
    let out = ok(&["gradcheck"]);
    assert_eq!(out.lines().count(), lvct_core::gradsuite::CASES.len());
    assert!(out.lines().all(|l| l.ends_with(" ok")), "{out}");
}

const TINY: &str = r#"
output_dir = "OUT"
[geometry]
size = 32
n_angles = 30
n_detectors = 32
[data]
n_train = 1
n_val = 1
n_test = 1
n_slices = 5
n_ellipsoids = 3
[train.stage1]
epochs = 1
base_width = 2
[train.stage2]
epochs = 1
base_width = 2
[train.stage3]
epochs = 1
base_width = 2
[train.baseline]
epochs = 1
base_width = 2
[sart]
n_iterations = 2
"#;

#[test]
fn staged_training_pipeline_and_compare() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let write_cfg = |extra: &str| {
        let path = d.path().join("cfg.toml");
        let text =
            TINY.replace("OUT", &out.to_string_lossy()).replacen("[geometry]", &format!("{extra}\n[geometry]"), 1);
        std::fs::write(&path, text).unwrap();
        path.to_string_lossy().into_owned()
    };
    let cfg = write_cfg("");
    ok(&["--config", &cfg, "train-stage1"]);
    let first = std::fs::read(out.join("stage1.ckpt")).unwrap();
    ok(&["--config", &cfg, "train-stage1"]);
    assert_eq!(first, std::fs::read(out.join("stage1.ckpt")).unwrap());
    let (code, msg) = failure(&["--config", &cfg, "train-stage2"]);
    assert_eq!(code, 11, "{msg}");

    let s = |n: &str| out.join(n).to_string_lossy().into_owned();
    let ckpts = format!(
        "[checkpoints]\nstage1 = {:?}\nstage2 = {:?}\nstage3 = {:?}",
        s("stage1.ckpt"),
        s("stage2.ckpt"),
        s("stage3.ckpt")
    );
    let cfg = write_cfg(&ckpts);
    ok(&["--config", &cfg, "train-stage2"]);
    ok(&["--config", &cfg, "train-stage3"]);
    let report = ok(&["--config", &cfg, "pipeline"]);
    assert!(report.starts_with("slices=5 PSNR="), "{report}");
    assert!(out.join("metrics.csv").exists());
    let metrics = std::fs::read(out.join("metrics.csv")).unwrap();
    ok(&["--config", &cfg, "pipeline"]);
    assert_eq!(metrics, std::fs::read(out.join("metrics.csv")).unwrap());

    let table = ok(&["--config", &cfg, "compare", "--train"]);
    for label in lvct_core::pipeline::LABELS {
        assert!(table.lines().any(|l| l.starts_with(&format!("{label} "))), "{label}\n{table}");
    }
    assert!(table.contains("ms/slice"));
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);

    let all = format!("{ckpts}\nii = {:?}\nii_mr = {:?}\nsi = {:?}", s("ii.ckpt"), s("ii_mr.ckpt"), s("si.ckpt"));
    let cfg = write_cfg(&all);
    ok(&["--config", &cfg, "compare"]);
    assert_eq!(csv, std::fs::read_to_string(out.join("comparison.csv")).unwrap());
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = lvct_core::pipeline::PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.geometry.size, 64);
    assert_eq!(cfg.train.stage3.seed, 3);
    cfg.validate().unwrap();
}
