//! End-to-end checks of the command-line interface: exit codes, file
//! layouts, and report shapes, driving the real binary.

use std::fs;
use std::path::Path;
use std::process::Output;

use tempfile::TempDir;

fn dvskit(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_dvskit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).expect("fixture write");
}

const SMALL_CSV: &str = "t_us,x,y,p\n100,1,2,1\n5000,3,1,-1\n12000,0,0,1\n24000,4,4,1\n";

#[test]
fn convert_round_trips_between_formats() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("events.csv");
    let bin = dir.path().join("events.evt1");
    let back = dir.path().join("back.csv");
    write(&csv, SMALL_CSV);

    let out = dvskit(&[
        "convert",
        csv.to_str().unwrap(),
        bin.to_str().unwrap(),
        "--direction",
        "csv-to-evt1",
        "--width",
        "5",
        "--height",
        "5",
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("converted 4 events"));

    let out = dvskit(&[
        "convert",
        bin.to_str().unwrap(),
        back.to_str().unwrap(),
        "--direction",
        "evt1-to-csv",
    ]);
    assert_code(&out, 0);
    assert_eq!(fs::read_to_string(&back).unwrap(), SMALL_CSV);
}

#[test]
fn exit_codes_split_usage_from_data_errors() {
    let out = dvskit(&["--help"]);
    assert_code(&out, 0);

    let out = dvskit(&["no-such-subcommand"]);
    assert_code(&out, 1);

    let out = dvskit(&["--eval-iou", "not-numbers", "demo", "/tmp/unused"]);
    assert_code(&out, 1);

    let dir = TempDir::new().unwrap();
    let out = dvskit(&[
        "convert",
        dir.path().join("missing.csv").to_str().unwrap(),
        dir.path().join("out.evt1").to_str().unwrap(),
        "--direction",
        "csv-to-evt1",
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let bad = dir.path().join("bad.csv");
    write(&bad, "time,x,y,p\n1,0,0,1\n");
    let out = dvskit(&[
        "convert",
        bad.to_str().unwrap(),
        dir.path().join("out.evt1").to_str().unwrap(),
        "--direction",
        "csv-to-evt1",
    ]);
    assert_code(&out, 2);
}

#[test]
fn bin_writes_one_frame_per_window_plus_config_echo() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("drive.csv");
    let frames = dir.path().join("frames");
    write(&csv, SMALL_CSV);

    let out = dvskit(&[
        "bin",
        csv.to_str().unwrap(),
        frames.to_str().unwrap(),
        "--width",
        "5",
        "--height",
        "5",
    ]);
    assert_code(&out, 0);

    // events reach t=24000, so three 10 ms windows
    for t0 in ["000000000000", "000000010000", "000000020000"] {
        let path = frames.join(format!("drive_{t0}.pgm"));
        let data = fs::read(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(data.starts_with(b"P5\n5 5\n255\n"));
        assert_eq!(data.len(), 11 + 25);
    }
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(frames.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["window_duration_us"], 10_000);
    assert_eq!(echo["representation"], "sigmoid");

    // a shorter window via the global override produces more frames
    let frames5 = dir.path().join("frames5");
    let out = dvskit(&[
        "--window-us",
        "5000",
        "bin",
        csv.to_str().unwrap(),
        frames5.to_str().unwrap(),
        "--width",
        "5",
        "--height",
        "5",
    ]);
    assert_code(&out, 0);
    let pgms = fs::read_dir(&frames5)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pgm")
        })
        .count();
    assert_eq!(pgms, 5);
}

#[test]
fn detect_reports_blobs_from_binned_events() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("events.csv");
    // a dense 6x6 block of ON events in the first window
    let mut text = String::from("t_us,x,y,p\n");
    let mut t = 0;
    for y in 10..16 {
        for x in 20..26 {
            t += 10;
            text.push_str(&format!("{t},{x},{y},1\n"));
        }
    }
    write(&csv, &text);

    let detections = dir.path().join("blobs.jsonl");
    let out = dvskit(&[
        "detect",
        csv.to_str().unwrap(),
        detections.to_str().unwrap(),
        "--min-area",
        "10",
        "--width",
        "64",
        "--height",
        "64",
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("detected 1 blobs"));

    let line = fs::read_to_string(&detections).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(rec["frame_id"], "000000000000");
    assert_eq!(rec["class"], "object");
    assert_eq!(rec["conf"], 1.0);
    assert_eq!(
        (rec["x0"].as_f64().unwrap(), rec["y0"].as_f64().unwrap()),
        (20.0, 10.0)
    );
    assert_eq!(
        (rec["x1"].as_f64().unwrap(), rec["y1"].as_f64().unwrap()),
        (26.0, 16.0)
    );
}

#[test]
fn evaluate_emits_one_block_per_threshold() {
    let dir = TempDir::new().unwrap();
    let det = dir.path().join("det.jsonl");
    let gt = dir.path().join("gt.jsonl");
    let boxes = r#"{"frame_id":"w0","t_us":0,"class":"car","conf":0.9,"x0":0.0,"y0":0.0,"x1":40.0,"y1":40.0}"#;
    write(&det, &format!("{boxes}\n"));
    write(&gt, &format!("{boxes}\n"));

    let report_path = dir.path().join("report.json");
    let out = dvskit(&[
        "evaluate",
        det.to_str().unwrap(),
        gt.to_str().unwrap(),
        "--output",
        report_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let stdout = String::from_utf8_lossy(&out.stdout);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let blocks = report["thresholds"].as_array().unwrap();
    assert_eq!(blocks.len(), 2); // default thresholds 0.5 and 0.7
    for (block, iou) in blocks.iter().zip([0.5, 0.7]) {
        assert_eq!(block["iou"], iou);
        assert_eq!(block["ap"], 1.0);
        assert_eq!(block["tp"], 1);
        assert_eq!(block["fp"], 0);
        assert_eq!(block["gt_count"], 1);
        assert!(block["pr_curve"].is_array());
    }
    assert!(report.get("set_analysis").is_none());
    assert_eq!(
        fs::read_to_string(&report_path).unwrap().trim(),
        stdout.trim()
    );

    // a second detector adds the set-analysis block
    let out = dvskit(&[
        "evaluate",
        det.to_str().unwrap(),
        gt.to_str().unwrap(),
        "--detections-b",
        det.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["set_analysis"]["frac_a"], 1.0);
    assert_eq!(report["set_analysis"]["frac_intersection"], 1.0);

    // evaluating against empty ground truth is a data error
    let empty = dir.path().join("empty.jsonl");
    write(&empty, "");
    let out = dvskit(&["evaluate", det.to_str().unwrap(), empty.to_str().unwrap()]);
    assert_code(&out, 2);
}

#[test]
fn pseudolabel_exports_normalized_label_files() {
    let dir = TempDir::new().unwrap();
    let det = dir.path().join("aps.jsonl");
    write(
        &det,
        concat!(
            r#"{"frame_id":"f0","t_us":10000,"class":"car","conf":0.9,"x0":10.0,"y0":20.0,"x1":30.0,"y1":40.0}"#,
            "\n",
            r#"{"frame_id":"f1","t_us":20000,"class":"car","conf":0.3,"x0":0.0,"y0":0.0,"x1":50.0,"y1":50.0}"#,
            "\n",
        ),
    );
    let labels = dir.path().join("labels");

    let out = dvskit(&[
        "pseudolabel",
        det.to_str().unwrap(),
        labels.to_str().unwrap(),
        "--recording",
        "rec",
        "--width",
        "100",
        "--height",
        "100",
    ]);
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["files_written"], 2);
    assert_eq!(report["boxes_written"], 1); // the 0.3-confidence box is filtered

    let first = fs::read_to_string(labels.join("rec_000000000000.txt")).unwrap();
    assert_eq!(first, "car 0.2 0.3 0.2 0.2\n");
    let second = fs::read_to_string(labels.join("rec_000000010000.txt")).unwrap();
    assert_eq!(second, ""); // window exists, its only box was filtered
}

#[test]
fn split_builds_a_manifest() {
    let dir = TempDir::new().unwrap();
    let recordings = dir.path().join("recordings.json");
    write(
        &recordings,
        r#"[
            {"id": "a", "scene": "cty", "condition": "day", "duration_us": 700},
            {"id": "b", "scene": "hwy", "condition": "day", "duration_us": 150},
            {"id": "c", "scene": "fwy", "condition": "night", "duration_us": 140},
            {"id": "d", "scene": "cty", "condition": "day", "duration_us": 10}
        ]"#,
    );
    let manifest = dir.path().join("manifest.json");

    let out = dvskit(&[
        "split",
        recordings.to_str().unwrap(),
        manifest.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Train:"), "summary missing: {stdout}");

    let entries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    assert_eq!(entries[0]["recording_id"], "a");
    assert_eq!(entries[0]["split"], "train");

    // fewer recordings than splits is a data error
    write(
        &recordings,
        r#"[{"id": "a", "scene": "s", "condition": "c", "duration_us": 5}]"#,
    );
    let out = dvskit(&[
        "split",
        recordings.to_str().unwrap(),
        manifest.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn render_draws_boxes_onto_a_frame() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("drive.csv");
    let frames = dir.path().join("frames");
    write(&csv, SMALL_CSV);
    let out = dvskit(&[
        "bin",
        csv.to_str().unwrap(),
        frames.to_str().unwrap(),
        "--width",
        "64",
        "--height",
        "64",
        "--recording",
        "drive",
    ]);
    assert_code(&out, 0);

    let det = dir.path().join("det.jsonl");
    write(
        &det,
        concat!(
            r#"{"frame_id":"drive_000000000000","t_us":0,"class":"car","conf":0.8,"#,
            r#""x0":5.0,"y0":5.0,"x1":20.0,"y1":20.0}"#,
            "\n"
        ),
    );
    let overlay = dir.path().join("overlay.pgm");
    let out = dvskit(&[
        "render",
        frames.join("drive_000000000000.pgm").to_str().unwrap(),
        det.to_str().unwrap(),
        overlay.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("drew 1 boxes"));
    let data = fs::read(&overlay).unwrap();
    assert!(data.starts_with(b"P5\n64 64\n255\n"));

    // Detector output keys on the bare window id; the stem fallback finds it.
    let det_bare = dir.path().join("det_bare.jsonl");
    write(
        &det_bare,
        concat!(
            r#"{"frame_id":"000000000000","t_us":0,"class":"car","conf":0.8,"#,
            r#""x0":5.0,"y0":5.0,"x1":20.0,"y1":20.0}"#,
            "\n"
        ),
    );
    let out = dvskit(&[
        "render",
        frames.join("drive_000000000000.pgm").to_str().unwrap(),
        det_bare.to_str().unwrap(),
        overlay.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("drew 1 boxes"));

    // An explicit id is matched exactly, with no fallback.
    let out = dvskit(&[
        "render",
        frames.join("drive_000000000000.pgm").to_str().unwrap(),
        det_bare.to_str().unwrap(),
        overlay.to_str().unwrap(),
        "--frame-id",
        "drive_000000000000",
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("drew 0 boxes"));
}

#[test]
fn fuse_pools_two_detection_files() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    // same frame, overlapping boxes: NMS keeps the confident one
    write(
        &a,
        r#"{"frame_id":"w0","t_us":0,"class":"car","conf":0.9,"x0":0.0,"y0":0.0,"x1":40.0,"y1":40.0}"#,
    );
    write(
        &b,
        r#"{"frame_id":"w0","t_us":0,"class":"car","conf":0.6,"x0":1.0,"y0":1.0,"x1":41.0,"y1":41.0}"#,
    );
    let fused = dir.path().join("fused.jsonl");

    let out = dvskit(&[
        "fuse",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        fused.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fused into 1 boxes"));
    let text = fs::read_to_string(&fused).unwrap();
    let rec: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(rec["conf"], 0.9);
}

#[test]
fn demo_writes_a_deterministic_report() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");

    for target in [&first, &second] {
        let out = dvskit(&["demo", target.to_str().unwrap()]);
        assert_code(&out, 0);
    }

    let report_a = fs::read_to_string(first.join("report.json")).unwrap();
    let report_b = fs::read_to_string(second.join("report.json")).unwrap();
    assert_eq!(report_a, report_b);

    let report: serde_json::Value = serde_json::from_str(&report_a).unwrap();
    assert_eq!(report["windows"], 100);
    assert_eq!(report["detection_count"], 100);
    assert!(report["ap"].as_f64().unwrap() >= 0.8);
    assert!(report["windows_at_iou"].as_f64().unwrap() >= 0.9);

    for name in [
        "demo_000000000000.pgm",
        "demo_000000500000.pgm",
        "demo_000000990000.pgm",
    ] {
        let data = fs::read(first.join(name)).unwrap_or_else(|_| panic!("missing {name}"));
        assert!(data.starts_with(b"P5\n346 260\n255\n"));
    }
    assert!(first.join("config.json").exists());
}
