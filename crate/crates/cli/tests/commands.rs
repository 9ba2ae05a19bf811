use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bevscene(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bevscene")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bevscene(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn gen_bev_respects_the_object_range_and_seed() {
    let d = tempfile::tempdir().unwrap();
    for seed in 0..6 {
        let dir = format!("s{seed}");
        ok(&["gen-bev", "--seed", &seed.to_string(), "--out", &dir], d.path());
        let n = json(&d.path().join(&dir).join("scene.json"))["objects"].as_array().unwrap().len();
        assert!((3..=8).contains(&n), "seed {seed}: {n} objects");
    }
    ok(&["gen-bev", "--seed", "0", "--out", "again"], d.path());
    assert_eq!(std::fs::read(d.path().join("s0/scene.bev")).unwrap(), std::fs::read(d.path().join("again/scene.bev")).unwrap());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("blocker"), b"").unwrap();
    let out = bevscene(&["gen-bev", "--out", "blocker/sub"], d.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    ok(&["gen-bev", "--out", "b"], d.path());
    let out = bevscene(&["render", "--bev", "b/scene.bev", "--mode", "neural", "--out", "r"], d.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--weights or --init-seed"));

    let out = bevscene(&["eqt", "--bev", "b/scene.bev", "--shifts", "13", "--latents", "1", "--out", "e"], d.path());
    assert!(!out.status.success(), "a shift past the 12 px margin must fail");

    std::fs::write(d.path().join("junk.bev"), b"BEVMAP01 not really").unwrap();
    assert!(!bevscene(&["render", "--bev", "junk.bev", "--out", "j"], d.path()).status.success());
}

#[test]
fn command_line_flags_beat_the_config_file() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen-bev", "--out", "b"], d.path());
    std::fs::write(d.path().join("cfg.json"), r#"{"bev": "b/scene.bev", "width": 20, "height": 10, "samples": 4}"#).unwrap();
    ok(&["--config", "cfg.json", "--out", "r", "render", "--height", "12"], d.path());
    let cfg = &json(&d.path().join("r/manifest.json"))["config"];
    assert_eq!((cfg["width"].as_u64(), cfg["height"].as_u64(), cfg["samples"].as_u64()), (Some(20), Some(12), Some(4)));

    std::fs::write(d.path().join("bad.json"), r#"{"widht": 20}"#).unwrap();
    assert!(!bevscene(&["--config", "bad.json", "render", "--bev", "b/scene.bev"], d.path()).status.success());
    ok(&["--out", "s", "init-weights", "--preset", "tiny"], d.path());
    let out = bevscene(&["--config", "s/manifest.json", "render"], d.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest for `init-weights`"));
}

#[test]
fn eqt_and_ablation_reports() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen-bev", "--out", "b"], d.path());
    ok(&["eqt", "--bev", "b/scene.bev", "--latents", "1", "--shifts", "2,-4", "--samples", "8", "--out", "e"], d.path());
    let r = json(&d.path().join("e/eqt_report.json"));
    assert_eq!(r["fid"], "unavailable");
    assert_eq!(r["eqt"]["capped"], true);
    assert_eq!(r["eqt"]["samples"].as_array().unwrap().len(), 2);

    ok(&["gen-bev", "--seed", "2", "--height", "16", "--width", "16", "--margin", "4", "--n-min", "1", "--n-max", "2", "--out", "t"], d.path());
    let args = [
        "ablate", "--bev", "t/scene.bev", "--preset", "tiny", "--view-margin", "4", "--seeds", "0,1,2", "--latents", "1",
        "--shifts", "1", "--crop", "2", "--samples", "4", "--out", "a",
    ];
    ok(&args, d.path());
    let t = json(&d.path().join("a/ablation.json"));
    assert_eq!(t["table"]["rows"].as_array().unwrap().len(), 12);
    let text = std::fs::read_to_string(d.path().join("a/ablation.txt")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let mut again = args.to_vec();
    *again.last_mut().unwrap() = "a2";
    ok(&again, d.path());
    assert_eq!(text, std::fs::read_to_string(d.path().join("a2/ablation.txt")).unwrap());
}

#[test]
fn stitch_sweep_writes_one_panorama_per_step() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen-bev", "--height", "32", "--width", "96", "--margin", "4", "--out", "b"], d.path());
    ok(
        &["stitch", "--bev", "b/scene.bev", "--n-step", "1,10,20,30,40", "--frame-w", "48", "--frame-h", "8", "--samples", "4", "--out", "s"],
        d.path(),
    );
    for n in [1usize, 10, 20, 30, 40] {
        let r = json(&d.path().join(format!("s/n_step_{n:02}/stitch_report.json")));
        let k = (96 - 32) / n + 1;
        assert_eq!(r["K"].as_u64(), Some(k as u64));
        assert_eq!(r["panorama"][1].as_u64(), Some((k * n) as u64));
        assert!(d.path().join(format!("s/n_step_{n:02}/frames/{:05}.png", k - 1)).exists());
    }
}
