use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "mesh": { "sim_divisions": 48, "recon_divisions": 32 },
  "sweep": {
    "divisions": 32,
    "channel_widths_mm": [4, 10],
    "levels": [2, 5],
    "phantoms": [{ "label": "one", "centers": [[40, 40]], "radius_mm": 10 }]
  },
  "phantoms": [
    { "label": "single", "touches": [{ "shape": "disc", "radius": 10, "center": [50, 50], "level": 5 }] }
  ]
}
"#;

fn eit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eit-tactile"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = eit(&["--config", &config, "--out", out.to_str().unwrap(), "sweep"]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(std::fs::read_to_string(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let lines: Vec<&str> = outputs[0].lines().collect();
    // uniform plus two widths, two levels, one phantom
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[0].starts_with("config,"));
}

#[test]
fn recon_emits_images_and_blob_reports_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = eit(&[
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "recon",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in [
        "single_dv.csv",
        "single_tikhonov.pgm",
        "single_l1.pgm",
        "single_tikhonov_blobs.json",
        "single_l1_blobs.json",
        "report.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["measurements"], 104);
    assert_eq!(report["phantoms"][0]["methods"][0]["blob_count"], 1);
    assert!(std::fs::read_to_string(out.join("single_l1.pgm"))
        .unwrap()
        .starts_with("P2\n64 64\n255\n"));
}

#[test]
fn mesh_export_with_built_in_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = eit(&["--paper-defaults", "--out", out.to_str().unwrap(), "mesh"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in [
        "sim_mesh.json",
        "recon_mesh.json",
        "protocol.json",
        "jacobian.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "{\n  \"mesh\": {\n    \"sim_divisions\": 32,\n    \"recon_divisions\": 32\n  }\n}\n",
    );
    let o = eit(&["--config", &config, "sweep"]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("line 4: mesh.recon_divisions"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_conflicts_with_built_in_defaults() {
    let o = eit(&["--config", "x.json", "--paper-defaults", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_flags_tampered_logs() {
    let dir = tempfile::tempdir().unwrap();
    let state = |i: u64, active: bool| {
        if active {
            format!(r#"{{"frame_index":{i},"active":true,"centroid":[25.0,50.0],"intensity":0.4}}"#)
        } else {
            format!(r#"{{"frame_index":{i},"active":false,"centroid":null,"intensity":0.0}}"#)
        }
    };
    let start =
        r#"{"kind":"press_start","frame_index":1,"centroid":[25.0,50.0],"region_label":"left"}"#;
    let end = r#"{"kind":"press_end","frame_index":3,"centroid":[25.0,50.0],"duration_frames":3,"region_label":"left"}"#;
    let lines = [
        format!(r#"{{"input":"touch_down","state":{}}}"#, state(0, true)),
        format!(
            r#"{{"input":"tick","state":{},"event":{start}}}"#,
            state(1, true)
        ),
        format!(r#"{{"input":"tick","state":{}}}"#, state(2, true)),
        format!(
            r#"{{"input":"touch_up","state":{},"event":{end},"action":{{"name":"advance","amplitude":"low"}}}}"#,
            state(3, false)
        ),
    ];
    let good = dir.path().join("good.jsonl");
    std::fs::write(&good, lines.join("\n") + "\n").unwrap();
    let o = eit(&["replay", good.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["actions"][0]["name"], "advance");

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n").replace("\"low\"", "\"high\"")).unwrap();
    let o = eit(&["replay", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("1 mismatching frames"));
}
