use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_avatar-forge"));
    cmd.env_remove("AVATAR_FORGE_CONFIG").env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    out
}

fn full_pipeline(dir: &Path, parallelism: usize, seed: u64) -> Vec<u8> {
    ok(run(&["stats", "gen-fixture", "--seed", "7", "--out-dir", s(dir)]));
    let p = |name: &str| dir.join(name);
    let par = parallelism.to_string();
    let seed = seed.to_string();
    ok(run(&[
        "annotate", "--in", s(&p("records.jsonl")), "--out", s(&p("annotated.jsonl")), "--parallelism", &par, "--seed", &seed,
    ]));
    ok(run(&[
        "validate", "--in", s(&p("annotated.jsonl")), "--clips", s(&p("clips.jsonl")), "--report", s(&p("report.json")), "--out",
        s(&p("accepted.jsonl")),
    ]));
    ok(run(&["sample", "--in", s(&p("accepted.jsonl")), "--profile", "closeup", "--frames", "93", "--seed", &seed, "--out", s(&p("manifest.jsonl"))]));
    fs::read(p("manifest.jsonl")).unwrap()
}

#[test]
fn pipeline_is_byte_reproducible() {
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    let a = full_pipeline(dirs[0].path(), 1, 7);
    let b = full_pipeline(dirs[1].path(), 1, 7);
    let c = full_pipeline(dirs[2].path(), 8, 7);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(a, c);
    let annotated = |d: &TempDir| fs::read(d.path().join("annotated.jsonl")).unwrap();
    assert_eq!(annotated(&dirs[0]), annotated(&dirs[2]));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_on_empty_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let report = dir.path().join("report.json");
    let accepted = dir.path().join("accepted.jsonl");
    ok(run(&["validate", "--in", s(&input), "--clips", s(&input), "--report", s(&report), "--out", s(&accepted)]));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["accepted"], 0);
    let stages = doc["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 7);
    assert!(stages.iter().all(|st| st["entered"] == 0 && st["dropped"] == 0));
    assert_eq!(fs::read(&accepted).unwrap(), b"");
}

#[test]
fn bad_records_exit_one() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.jsonl");
    fs::write(&input, "{\"video_id\": 3}\n").unwrap();
    let out = run(&["annotate", "--in", s(&input), "--out", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));
    assert!(!dir.path().join("o.jsonl").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    ok(run(&["stats", "gen-fixture", "--out-dir", s(dir.path())]));
    let records = dir.path().join("records.jsonl");
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[validate.audio_sync]\nmin_confidense = 0.5\n").unwrap();
    let out_path = dir.path().join("out.jsonl");
    let args = ["annotate", "--in", s(&records), "--out", s(&out_path)];

    let flagged = bin().args(["--config", s(&cfg)]).args(args).output().unwrap();
    assert_eq!(flagged.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&flagged.stderr).contains("min_confidense"));

    let via_env = bin().env("AVATAR_FORGE_CONFIG", &cfg).args(args).output().unwrap();
    assert_eq!(via_env.status.code(), Some(2));

    fs::write(&cfg, "parallelism = 2\n").unwrap();
    ok(bin().env("AVATAR_FORGE_CONFIG", &cfg).args(args).output().unwrap());

    let missing = bin().args(["--config", s(&dir.path().join("nope.toml"))]).args(args).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let graph = dir.path().join("graph.toml");
    fs::write(&graph, "[[annotators]]\nname = \"a\"\nproduces = [\"face\"]\ndepends_on = [\"a\"]\nbackend = { kind = \"builtin\", mock = \"face\" }\n").unwrap();
    let cyclic = run(&["annotate", "--in", s(&records), "--out", s(&out_path), "--graph", s(&graph)]);
    assert_eq!(cyclic.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cyclic.stderr).contains("cycle"));
}

#[test]
fn inputs_are_never_overwritten() {
    let dir = TempDir::new().unwrap();
    ok(run(&["stats", "gen-fixture", "--out-dir", s(dir.path())]));
    let records = dir.path().join("records.jsonl");
    let before = fs::read(&records).unwrap();
    let out = run(&["annotate", "--in", s(&records), "--out", s(&records)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(&records).unwrap(), before);
}

fn shard_report(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn stats_merge_is_order_independent() {
    let dir = TempDir::new().unwrap();
    ok(run(&["stats", "gen-fixture", "--out-dir", s(dir.path())]));
    let d = dir.path();
    ok(run(&["annotate", "--in", s(&d.join("records.jsonl")), "--out", s(&d.join("ann.jsonl"))]));
    let all: Vec<String> = fs::read_to_string(d.join("ann.jsonl")).unwrap().lines().map(String::from).collect();
    let clips = d.join("clips.jsonl");
    let mut reports = Vec::new();
    for (i, chunk) in all.chunks(7).enumerate() {
        let shard = shard_report(d, &format!("shard{i}.jsonl"), &(chunk.join("\n") + "\n"));
        let ids: Vec<String> = chunk.iter().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["video_id"].as_str().unwrap().to_string()).collect();
        let shard_clips: String = fs::read_to_string(&clips)
            .unwrap()
            .lines()
            .filter(|l| ids.iter().any(|id| l.contains(&format!("\"video_id\":\"{id}\""))))
            .map(|l| format!("{l}\n"))
            .collect();
        let sc = shard_report(d, &format!("clips{i}.jsonl"), &shard_clips);
        let rep = d.join(format!("report{i}.json"));
        ok(run(&["validate", "--in", s(&shard), "--clips", s(&sc), "--report", s(&rep), "--out", s(&d.join(format!("acc{i}.jsonl")))]));
        reports.push(rep);
    }
    let serial = d.join("serial.json");
    ok(run(&["validate", "--in", s(&d.join("ann.jsonl")), "--clips", s(&clips), "--report", s(&serial), "--out", s(&d.join("acc.jsonl"))]));

    let forward: Vec<&str> = reports.iter().map(|p| s(p)).collect();
    let mut backward = forward.clone();
    backward.reverse();
    let merged_fwd = ok(run(&[&["stats", "merge"][..], &forward].concat())).stdout;
    let merged_bwd = ok(run(&[&["stats", "merge"][..], &backward].concat())).stdout;
    assert_eq!(merged_fwd, merged_bwd);
    assert_eq!(merged_fwd, fs::read(&serial).unwrap());

    let table = String::from_utf8(ok(run(&[&["stats", "table"][..], &forward].concat())).stdout).unwrap();
    assert!(table.starts_with("stage"));
    assert!(table.contains("AudioSync"));
}

#[test]
fn stats_merge_rejects_other_schema_versions() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let report = dir.path().join("r.json");
    ok(run(&["validate", "--in", s(&input), "--report", s(&report), "--out", s(&dir.path().join("a.jsonl"))]));
    let text = fs::read_to_string(&report).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
    let other = shard_report(dir.path(), "r2.json", &text);
    let out = run(&["stats", "merge", s(&report), s(&other)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn audio_align_reports_shapes() {
    let out = ok(run(&["audio-align", "--duration", "3.72", "--seed", "1"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("encoder_frames 186\n"), "{text}");
    assert!(text.contains("aligned [93, 5, 1280]\n"));
    assert!(text.contains("latent [24, 5, 1280]\n"));
}

#[test]
fn grpo_commands() {
    let dir = TempDir::new().unwrap();
    let plan_a = ok(run(&["grpo", "rollout", "--seed", "11"])).stdout;
    let plan_b = ok(run(&["grpo", "rollout", "--seed", "11"])).stdout;
    assert_eq!(plan_a, plan_b);
    let plan: serde_json::Value = serde_json::from_slice(&plan_a).unwrap();
    assert_eq!(plan["optimized_clip_index"].as_u64().unwrap() + 1, plan["clip_count"].as_u64().unwrap());

    // rewards [1, 2, 3] for one reward model and one partition
    let rewards = dir.path().join("r.bin");
    let bytes: Vec<u8> = [1.0f32, 2.0, 3.0].iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&rewards, bytes).unwrap();
    fs::write(dir.path().join("r.bin.json"), r#"{"dtype":"f32le","schema_version":1,"shape":[3,1,1]}"#).unwrap();
    let weights = shard_report(dir.path(), "w.json", "[1.0]");
    let adv = dir.path().join("adv.bin");
    ok(run(&["grpo", "advantage", "--rewards", s(&rewards), "--weights", s(&weights), "--sigma-mode", "max", "--out", s(&adv)]));
    let raw = fs::read(&adv).unwrap();
    let vals: Vec<f32> = raw.chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(vals.len(), 3);
    assert!((vals[0] + 1.224_744_9).abs() < 1e-5 && vals[1].abs() < 1e-6 && (vals[2] - 1.224_744_9).abs() < 1e-5);

    let bad_weights = shard_report(dir.path(), "w2.json", "[1.0, 2.0]");
    let out = run(&["grpo", "advantage", "--rewards", s(&rewards), "--weights", s(&bad_weights), "--out", s(&adv)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn silent_and_emotion() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let clip = |id: &str, a: &str, b: &str| {
        format!(r#"{{"clip":{{"video_id":"{id}","start_frame":0,"end_frame":100,"fps":25.0}},"model_a":"{a}","model_b":"{b}"}}"#)
    };
    let verdicts = shard_report(
        d,
        "v.jsonl",
        &[clip("q", "NotSpeaking", "NotSpeaking"), clip("q", "NotSpeaking", "NotSpeaking"), clip("t", "NotSpeaking", "Uncertain")].join("\n"),
    );
    let labels = d.join("labels.jsonl");
    ok(run(&["silent", "--verdicts", s(&verdicts), "--out", s(&labels)]));
    assert_eq!(
        fs::read_to_string(&labels).unwrap(),
        "{\"label\":\"Silent\",\"video_id\":\"q\"}\n{\"label\":\"Excluded\",\"video_id\":\"t\"}\n"
    );

    let matrix = shard_report(
        d,
        "m.jsonl",
        r#"{"video_id":"e","class_names":["Neutral","Happy","Sad"],"scores":[[0.9,0.8,0.1],[0.95,0.7,0.1]]}"#,
    );
    let flags = shard_report(
        d,
        "f.jsonl",
        r#"{"video_id":"e","flags":{"synthetic":false,"subject_count":1,"identity_switch":false,"subject_area_fraction":0.4},"candidates":[1,3]}"#,
    );
    let out = d.join("emo.jsonl");
    ok(run(&["emotion", "--matrix", s(&matrix), "--flags", s(&flags), "--n", "2", "--threshold", "0.7", "--out", s(&out)]));
    let v: serde_json::Value = serde_json::from_str(fs::read_to_string(&out).unwrap().trim()).unwrap();
    assert_eq!(v["dominant_class"], "Happy");
    assert_eq!(v["category"], 1);
    assert_eq!(v["retained"], true);
}

#[test]
fn multiperson_segments_and_binding() {
    let dir = TempDir::new().unwrap();
    let track = |id: &str, dx: f64, speak: &str| {
        let boxes: Vec<String> = (0..30).map(|i| format!(r#"{{"x":{},"y":50.0,"w":40.0,"h":80.0}}"#, 10.0 + dx * i as f64)).collect();
        let frames: Vec<String> = (0..30).map(|i| i.to_string()).collect();
        format!(r#"{{"track_id":"{id}","frames":[{}],"boxes":[{}],"speaking_intervals":[{speak}]}}"#, frames.join(","), boxes.join(","))
    };
    let line = format!(
        r#"{{"video_id":"m","width":640,"height":360,"duration_s":10.0,"tracks":[{},{}]}}"#,
        track("a", 3.0, r#"{"start_s":0.0,"end_s":4.0}"#),
        track("b", 0.0, r#"{"start_s":3.0,"end_s":6.0}"#)
    );
    let tracks = shard_report(dir.path(), "t.jsonl", &line);
    let out = dir.path().join("seg.jsonl");
    ok(run(&["multiperson", "--tracks", s(&tracks), "--min-seg", "1.0", "--out", s(&out)]));
    let v: serde_json::Value = serde_json::from_str(fs::read_to_string(&out).unwrap().trim()).unwrap();
    assert_eq!(v["partition"], "single");
    assert_eq!(v["dynamic_tracks"], serde_json::json!(["a"]));
    assert_eq!(
        v["segments"],
        serde_json::json!([{"track_id":"a","start_s":0.0,"end_s":3.0},{"track_id":"b","start_s":4.0,"end_s":6.0}])
    );

    let binding = dir.path().join("bind.json");
    ok(run(&["multiperson", "bind", "--tracks", s(&tracks), "--targets", "b", "--out", s(&binding)]));
    let b: serde_json::Value = serde_json::from_slice(&fs::read(&binding).unwrap()).unwrap();
    let entries = b["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["audio_stream"], "StreamA");
    assert_eq!(entries[1]["audio_stream"], "Silent");
    let bad = run(&["multiperson", "bind", "--tracks", s(&tracks), "--targets", "zz", "--out", s(&binding)]);
    assert_eq!(bad.status.code(), Some(1));
}
