use std::process::{Command, Output};

use tempfile::TempDir;

fn otslkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otslkit"))
        .args(args)
        .env_remove("OTSLKIT_JOBS")
        .output()
        .expect("spawn otslkit")
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SPANNED_HEADER_HTML: &str = "<html><table><tbody><tr><td colspan=2></td></tr><tr><td></td><td></td></tr><tr><td></td><td></td></tr><tr><td></td><td></td></tr><tr><td></td><td></td></tr></tbody></table></html>";

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.otsl", "FLNFFN\nFN\n");
    let out = otslkit(&["validate", &good]);
    assert_eq!(out.status.code(), Some(0));

    let bad = write(&dir, "bad.otsl", "FLNFFN\nUFN\n");
    let out = otslkit(&["validate", &bad, "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[1]["line"], 2);
    assert_eq!(lines[1]["valid"], false);
    assert_eq!(lines[1]["violations"][0]["rule"], "first-row");

    let out = otslkit(&["validate", &dir.path().join("missing").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn otsl2html_golden_and_bad_lines() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.otsl", "FLNFFNFFNFFNFFN\nFN\nLN\n");
    let out = otslkit(&["otsl2html", &input]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SPANNED_HEADER_HTML);
    assert_eq!(
        lines[1],
        "<html><table><tbody><tr><td></td></tr></tbody></table></html>"
    );
    assert_eq!(lines[2], "");

    let html = write(&dir, "in.html", &format!("{SPANNED_HEADER_HTML}\n"));
    let out = otslkit(&["html2otsl", &html]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "FLNFFNFFNFFNFFN\n");
}

#[test]
fn align_with_grid_file_and_log() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "pred.tsv", "a\tFLNFFNFFNFFNFF\nb\tFFFNULLN\nc\tFN\n");
    let grids = write(
        &dir,
        "grids.jsonl",
        "{\"id\":\"a\",\"rows\":5,\"cols\":2}\nb 2 3\n",
    );
    let log = dir.path().join("log.jsonl");
    let out = otslkit(&[
        "align",
        &input,
        "--grid-file",
        &grids,
        "--log",
        &log.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(1), "c has no grid");
    assert_eq!(stdout(&out), "a\tFLNFFNFFNFFNFFN\nb\tFFFNUFLN\nc\t\n");
    let entries: Vec<serde_json::Value> = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(entries[1]["repairs"][0]["action"], "l-to-f");
    assert!(entries[2]["error"].as_str().unwrap().contains("no grid"));

    let empty = write(&dir, "empty.txt", "");
    let out = otslkit(&["align", &empty, "--rows", "2", "--cols", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn teds_scores_and_mismatch() {
    let dir = TempDir::new().unwrap();
    let gt = write(&dir, "gt.txt", "FFN\nFLNFFN\n");
    let pred = write(
        &dir,
        "pred.txt",
        "FN\n<table><tr><td colspan=2></td></tr><tr><td></td><td></td></tr></table>\n",
    );
    let out = otslkit(&["teds", &gt, &pred]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "1\t0.8000\n2\t1.0000\nmean\t0.9000\n");

    let short = write(&dir, "short.txt", "FN\n");
    let out = otslkit(&["teds", &gt, &short]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grid_and_gridmetrics() {
    let dir = TempDir::new().unwrap();
    let dets = dir.path().join("dets");
    std::fs::create_dir(&dets).unwrap();
    let rows = |ys: &[f64]| -> String {
        let items: Vec<String> = ys
            .iter()
            .map(|y| {
                format!(
                    r#"{{"label":"table row","score":0.9,"bbox":[0,{y},100,{}]}}"#,
                    y + 10.0
                )
            })
            .collect();
        format!("[{}]", items.join(","))
    };
    std::fs::write(dets.join("img1.json"), rows(&[0.0, 20.0, 40.0])).unwrap();
    std::fs::write(dets.join("img2.json"), rows(&[0.0, 2.0])).unwrap();
    let out = otslkit(&["grid", &dets.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "img1 3 0\nimg2 1 0\n");

    let pred = write(&dir, "pred", "a 3 4\nb 5 2\n");
    let gt = write(&dir, "gt", "a 3 5\nb 5 2\n");
    let out = otslkit(&["gridmetrics", &pred, &gt, "--format", "json"]);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["exact_match_both"], 50.0);
    assert_eq!(m["l1_cols"], 0.5);
}

fn dataset(dir: &TempDir) -> String {
    let lines = [
        r#"{"id":"r1","gt_otsl":"FLNFFN","pred_otsl":"FLNFFN","gt_grid":[2,2],"language":"hindi","modality":"document","split":"test"}"#,
        r#"{"id":"r2","gt_otsl":"FFNFFN","pred_otsl":"FFNFF","gt_grid":[2,2],"language":"telugu","split":"test","t_model":0.5}"#,
        r#"{"id":"r3","gt_otsl":"FFNFFNFFNFFNFFN","pred_otsl":"FLNFFNFFNFFNFF","gt_grid":[5,2],"language":"hindi"}"#,
        r#"{"id":"r4","gt_otsl":"FN","pred_otsl":"FN","gt_grid":[0,1],"language":"hindi"}"#,
    ];
    write(dir, "data.jsonl", &(lines.join("\n") + "\n"))
}

#[test]
fn eval_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let run = |jobs: &str| {
        let out = otslkit(&[
            "eval",
            &data,
            "--group-by",
            "language",
            "--deterministic",
            "--jobs",
            jobs,
            "--format",
            "json",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let a = run("1");
    assert_eq!(a, run("3"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let overall = &v["report"]["rows"][0]["overall"];
    assert_eq!(overall["n"], 4);
    assert_eq!(overall["failed"], 1);
    assert_eq!(v["timing"]["t_grid"], "external");

    let out = otslkit(&["eval", &data]);
    let text = stdout(&out);
    assert!(text.contains("Simple") && text.contains("Complex") && text.contains("Overall"));
    assert!(text.contains("T_Model"));
}

#[test]
fn eval_records_out_and_bad_config() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let recs = dir.path().join("recs.jsonl");
    let out = otslkit(&[
        "eval",
        &data,
        "--records-out",
        &recs.to_string_lossy(),
        "--deterministic",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = std::fs::read_to_string(&recs).unwrap();
    assert_eq!(body.lines().count(), 4);
    assert!(body.contains("\"failure\":\"empty grid\""));

    let out = otslkit(&["eval", &data, "--group-by", "language,language"]);
    assert_eq!(out.status.code(), Some(1));
    let dup = write(&dir, "dup.jsonl", "{\"id\":\"x\"}\n{\"id\":\"x\"}\n");
    let out = otslkit(&["eval", &dup]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stats_groups_and_warnings() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let extra = write(
        &dir,
        "more.jsonl",
        &format!(
            "{}\n{{\"id\":\"x9\",\"language\":\"hindi\"}}\n",
            std::fs::read_to_string(&data).unwrap().trim_end()
        ),
    );
    let out = otslkit(&[
        "stats",
        &extra,
        "--group-by",
        "language",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x9: missing gt_otsl"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups[0]["group"], "overall");
    assert_eq!(groups[0]["coverage"]["samples"], 4);
    assert_eq!(groups[0]["simple"], 3);
    assert_eq!(groups[0]["complex"], 1);
    assert!(groups.iter().any(|g| g["group"] == "language=telugu"));

    let two = write(&dir, "two.jsonl", "{\"id\":\"a\",\"gt_otsl\":\"FN\"}\n");
    let out = otslkit(&["stats", &two]);
    let text = stdout(&out);
    assert!(text
        .lines()
        .any(|l| l.starts_with('F') && l.contains("50.0000")));
}
