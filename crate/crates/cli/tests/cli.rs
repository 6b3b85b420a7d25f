use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use mlgrowth::metrics::wilcoxon_signed_rank;
use mlgrowth::{BinaryMask, Image2D};

const PHANTOM_SPEC: &str = r#"{
  "width": 48, "height": 48, "pixel_spacing": 1.0,
  "brain": {"cx": 24, "cy": 24, "semi_x": 21, "semi_y": 19},
  "background_texture_seed": 5,
  "tumor": {"cx": 21, "cy": 23, "growth_direction": [1.0, 0.2], "eccentricity": 0.4},
  "growth": {"a0": 60, "lambda": 0.03, "survival": 0.7, "lambda_decay": 0.03,
             "delta": 5, "slope": 0.2, "t_rt_start": 20, "decay_form": "gated"},
  "observation_times": [0, 10, 20, 30, 40, 55],
  "intensity": {"brain_mean": 0.3, "tumor_mean": 0.85, "noise_sigma": 0.01, "infiltration": 0.25}
}"#;

fn run(bin: &str, args: &[&str], cwd: &Path) -> Output {
    Command::new(bin).args(args).current_dir(cwd).output().expect("binary runs")
}

fn mlgrowth(args: &[&str], cwd: &Path) -> Output {
    run(env!("CARGO_BIN_EXE_mlgrowth"), args, cwd)
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = mlgrowth(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn with_phantom() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), PHANTOM_SPEC).unwrap();
    ok(&["phantom", "--spec", "spec.json", "--out", "ph", "--seed", "1"], dir.path());
    dir
}

#[test]
fn phantom_writes_the_documented_layout() {
    let dir = with_phantom();
    let manifest = json(&dir.path().join("ph/manifest.json"));
    assert_eq!(manifest["frames"].as_array().unwrap().len(), 6);
    for name in ["brain.img", "frame_000.img", "mask_005.img", "areas.csv", "areas.json"] {
        assert!(dir.path().join("ph").join(name).is_file(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("ph/areas.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn fit_then_predict_reports_ordered_quantiles() {
    let dir = with_phantom();
    let p = dir.path();
    ok(&["fit", "--series", "ph/areas.csv", "--meta", "ph/areas.json", "--bootstrap", "20", "--seed", "3", "--out", "fit.json"], p);
    let fit = json(&p.join("fit.json"));
    assert_eq!(fit["ensemble"]["replicates"].as_array().unwrap().len(), 20);

    let out = ok(&["predict", "--fit", "fit.json", "--time", "60", "--quantiles", "2.5,50,90,97.5"], p);
    let pred: Value = serde_json::from_slice(&out.stdout).unwrap();
    let areas: Vec<f64> =
        pred["quantiles"].as_array().unwrap().iter().map(|q| q["area_mm2"].as_f64().unwrap()).collect();
    assert_eq!(areas.len(), 4);
    assert!(areas.windows(2).all(|w| w[0] <= w[1]), "{areas:?}");
    assert_eq!(pred["n_replicates"], 20);
}

#[test]
fn plugin_backends_match_the_built_in_models() {
    let dir = with_phantom();
    let p = dir.path();
    let plugin = env!("CARGO_BIN_EXE_mlgrowth-plugin");
    let common = ["--image", "ph/frame_004.img", "--mask", "ph/brain.img", "--target", "0.12", "--nl", "40", "--seed", "6"];
    let denoiser = format!("plugin:{plugin} gaussian --mu ph/frame_004.img");
    let regressor = format!("plugin:{plugin} soft-area --brain ph/brain.img");
    ok(&[&["generate"], &common[..], &["--out", "builtin.img"]].concat(), p);
    ok(&[&["generate"], &common[..], &["--denoiser", &denoiser, "--out", "plugin.img"]].concat(), p);
    let a = Image2D::load(p.join("builtin.img")).unwrap();
    let b = Image2D::load(p.join("plugin.img")).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-3, "{}", a.max_abs_diff(&b).unwrap());

    // The plugin regressor sees the noisy sample, so compare without guidance.
    ok(&[&["generate"], &common[..], &["--s-ct", "0", "--out", "plain.img"]].concat(), p);
    ok(&[&["generate"], &common[..], &["--s-ct", "0", "--regressor", &regressor, "--out", "plain_plugin.img"]].concat(), p);
    assert_eq!(Image2D::load(p.join("plain.img")).unwrap(), Image2D::load(p.join("plain_plugin.img")).unwrap());
}

#[test]
fn static_probability_map_and_mask() {
    let dir = with_phantom();
    let p = dir.path();
    ok(
        &[
            "probmap", "--mode", "static", "--image", "ph/frame_004.img", "--mask", "ph/brain.img", "--target", "0.1",
            "--repeats", "4", "--nl", "40", "--out", "map.img", "--mask-out", "pred.img",
        ],
        p,
    );
    let map = Image2D::load(p.join("map.img")).unwrap();
    assert!(map.pixels().iter().all(|&v| [0.0, 0.25, 0.5, 0.75, 1.0].contains(&v)));
    let pred = BinaryMask::from_image(&Image2D::load(p.join("pred.img")).unwrap());
    assert!(!pred.is_empty());
}

#[test]
fn eval_subcommands_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let a = BinaryMask::from_fn(12, 3, |x, y| (x, y) == (1, 1));
    let b = BinaryMask::from_fn(12, 3, |x, y| (x, y) == (6, 1));
    a.to_image(0.5).unwrap().save(p.join("a.img")).unwrap();
    b.to_image(0.5).unwrap().save(p.join("b.img")).unwrap();
    let out = ok(&["eval", "hd95", "--a", "a.img", "--b", "b.img"], p);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 2.5);

    let x = [3.1, 2.0, 4.4, 1.7, 5.0, 2.2, 3.3];
    let y = [2.0, 2.1, 3.0, 1.0, 4.1, 1.9, 2.0];
    let lines = |v: &[f64]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("\n");
    std::fs::write(p.join("x.txt"), lines(&x)).unwrap();
    std::fs::write(p.join("y.txt"), lines(&y)).unwrap();
    ok(&["eval", "wilcoxon", "--x", "x.txt", "--y", "y.txt", "--out", "w.json"], p);
    let got = json(&p.join("w.json"));
    let want = wilcoxon_signed_rank(&x, &y).unwrap();
    assert_eq!(got["p_two_sided"].as_f64().unwrap(), want.p_two_sided);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = with_phantom();
    let p = dir.path();
    let code = |args: &[&str]| mlgrowth(args, p).status.code();
    assert_eq!(code(&["predict", "--fit", "missing.json", "--time", "5"]), Some(2));
    let gen = ["generate", "--image", "ph/frame_004.img", "--mask", "ph/brain.img", "--nl", "10", "--out", "g.img"];
    assert_eq!(code(&[&gen[..], &["--target", "1.5"]].concat()), Some(2));
    assert_eq!(code(&[&gen[..], &["--target", "0.1", "--denoiser", "plugin:/bin/false"]].concat()), Some(4));
    assert_eq!(code(&[&gen[..], &["--target", "0.1", "--nl", "5000"]].concat()), Some(2));
    assert_eq!(code(&["gridsearch", "--nl", "10", "--s-ct", "0", "--out", "g.csv"]), Some(2));
}

#[test]
fn plugin_rejects_requests_it_cannot_answer() {
    let dir = with_phantom();
    let p = dir.path();
    let plugin = env!("CARGO_BIN_EXE_mlgrowth-plugin");
    let wrong = format!("plugin:{plugin} soft-area --brain ph/brain.img");
    let out = mlgrowth(
        &["generate", "--image", "ph/frame_004.img", "--mask", "ph/brain.img", "--target", "0.1", "--nl", "10", "--denoiser", &wrong, "--out", "g.img"],
        p,
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
