mod common;

use blockspot::model::{parse_document, serialize_document, DocumentKind};
use common::{blockspot, data_path, path_str, synthetic_document};

fn order_text(out_path: &std::path::Path) -> String {
    let doc = parse_document(&std::fs::read(out_path).unwrap(), DocumentKind::Prediction).unwrap();
    doc.blocks()[0].text.clone().unwrap()
}

#[test]
fn order_with_scripted_and_geometric_backends() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let outcomes = dir.path().join("outcomes.json");
    let figure = data_path("figure2.json");
    let scripted = format!("scripted:{}", path_str(&data_path("figure2_replies.json")));

    let r = blockspot(
        &[
            "order",
            path_str(&figure),
            "--backend",
            &scripted,
            "--out",
            path_str(&out),
            "--outcomes",
            path_str(&outcomes),
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(order_text(&out), "20 REASONS TO LOVE CYCLING");
    let o: serde_json::Value = serde_json::from_slice(&std::fs::read(&outcomes).unwrap()).unwrap();
    assert_eq!(o[0]["strategy"], "llm");
    assert_eq!(o[0]["expected_len"], 26);

    let r = blockspot(&["order", path_str(&figure), "--backend", "geometric-only", "--out", path_str(&out)], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(order_text(&out), "TO LOVE CYCLING 20 REASONS");
}

#[test]
fn order_writes_document_to_stdout_by_default() {
    let r = blockspot(&["order", path_str(&data_path("figure2.json")), "--backend", "geometric-only"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = parse_document(r.stdout.as_bytes(), DocumentKind::Prediction).unwrap();
    assert_eq!(doc.blocks()[0].text.as_deref(), Some("TO LOVE CYCLING 20 REASONS"));
    assert_eq!(r.stdout.as_bytes(), serialize_document(&doc));
}

#[test]
fn exit_codes() {
    let figure = data_path("figure2.json");
    let missing = blockspot(&["order", "/nonexistent/doc.json", "--backend", "geometric-only"], &[]);
    assert_eq!(missing.code, 2, "{}", missing.stderr);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"image_width\": 10").unwrap();
    assert_eq!(blockspot(&["order", path_str(&bad), "--backend", "geometric-only"], &[]).code, 2);
    assert_eq!(blockspot(&["prompt", path_str(&figure), "--block", "3"], &[]).code, 2);

    let no_key = blockspot(&["order", path_str(&figure), "--backend", "http"], &[]);
    assert_eq!(no_key.code, 3);
    assert!(no_key.stderr.contains("BLOCKSPOT_API_KEY"), "{}", no_key.stderr);
    assert_eq!(blockspot(&["order", path_str(&figure), "--backend", "scripted:/nonexistent.json"], &[]).code, 3);
    assert_eq!(blockspot(&["order", path_str(&figure), "--backend", "replay:/nonexistent.jsonl"], &[]).code, 3);
}

#[test]
fn settings_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("blockspot.toml");
    let long = dir.path().join("long.json");
    let short = dir.path().join("short.json");
    std::fs::write(&long, r#"{"block-0": "20 REASONS TO LOVE CYCLING"}"#).unwrap();
    std::fs::write(&short, r#"{"block-0": "20 REASONS T"}"#).unwrap();
    std::fs::write(&config, "backend = \"geometric-only\"\n[llm]\nmax_context_tokens = 4096\n").unwrap();
    let figure = data_path("figure2.json");
    let cfg = path_str(&config);
    let outcome = |args: &[&str], env: &[(&str, &str)]| -> String {
        let outcomes = dir.path().join("o.json");
        let mut all = vec!["--config", cfg, "order", path_str(&figure), "--outcomes", path_str(&outcomes)];
        all.extend_from_slice(args);
        let r = blockspot(&all, env);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&outcomes).unwrap()).unwrap();
        v[0]["strategy"].as_str().unwrap().to_owned()
    };
    let env_backend = format!("scripted:{}", path_str(&short));
    let flag_backend = format!("scripted:{}", path_str(&long));
    assert_eq!(outcome(&[], &[]), "geometric_only");
    assert_eq!(outcome(&[], &[("BLOCKSPOT_BACKEND", &env_backend)]), "geometric_fallback_length");
    assert_eq!(outcome(&["--backend", &flag_backend], &[("BLOCKSPOT_BACKEND", &env_backend)]), "llm");
    assert_eq!(
        outcome(&["--backend", &flag_backend, "--max-context-tokens", "600"], &[]),
        "geometric_fallback_context"
    );

    std::fs::write(&config, "backend = \"geometric-only\"\nbogus = 1\n").unwrap();
    assert_eq!(blockspot(&["--config", cfg, "order", path_str(&figure)], &[]).code, 2);
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let doc = synthetic_document(3, 6, DocumentKind::Prediction);
    let input = dir.path().join("doc.json");
    std::fs::write(&input, serialize_document(&doc)).unwrap();
    let replies: serde_json::Map<String, serde_json::Value> =
        (0..6).map(|i| (format!("block-{i}"), serde_json::Value::from(format!("reply for {i} ok")))).collect();
    let scripted = dir.path().join("replies.json");
    std::fs::write(&scripted, serde_json::to_vec(&replies).unwrap()).unwrap();
    let transcript = dir.path().join("t.jsonl");
    let (first, second) = (dir.path().join("a.json"), dir.path().join("b.json"));

    let r = blockspot(
        &[
            "order",
            path_str(&input),
            "--backend",
            &format!("scripted:{}", path_str(&scripted)),
            "--record",
            path_str(&transcript),
            "--out",
            path_str(&first),
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = blockspot(
        &[
            "order",
            path_str(&input),
            "--backend",
            &format!("replay:{}", path_str(&transcript)),
            "--out",
            path_str(&second),
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn prompt_output_is_byte_stable() {
    let figure = data_path("figure2.json");
    let a = blockspot(&["prompt", path_str(&figure)], &[]);
    let b = blockspot(&["prompt", path_str(&figure), "--block", "0"], &[]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stdout.starts_with("=== system ===\n"));
    assert!(a
        .stdout
        .contains("print(your_task([\"TO LOVE CYCLING\", \"20 REASONS\"], [[0, 0, 160, 26], [60, 8, 250, 35]]))"));
}

#[test]
fn fuzzy_prints_the_match() {
    for extra in [&[][..], &["--oracle"][..]] {
        let mut args = vec!["fuzzy", "CYCLNG", "20 REASONS TO LOVE CYCLING"];
        args.extend_from_slice(extra);
        let r = blockspot(&args, &[]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
        assert_eq!(v["substring"], "CYCLING");
        assert_eq!(v["distance"], 1);
        assert_eq!((v["start"].as_u64(), v["end"].as_u64()), (Some(19), Some(26)));
    }
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "20 REASONS TO LOVE CYCLING").unwrap();
    let r = blockspot(&["fuzzy", "REASNS", "--corpus-file", path_str(&corpus)], &[]);
    assert!(r.stdout.contains("\"substring\":\"REASONS\""), "{}", r.stdout);
}

#[test]
fn eval_reports_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    std::fs::write(&gt, serialize_document(&synthetic_document(42, 20, DocumentKind::GroundTruth))).unwrap();
    let report = dir.path().join("report.json");
    let r = blockspot(&["eval", path_str(&gt), path_str(&gt), "--out", path_str(&report), "--min-iou", "0.1"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("Jaro-Winkler Similarity ↑          1.0000"), "{}", r.stdout);
    assert!(r.stdout.contains("matched pairs: 20; unmatched predicted blocks: 0"), "{}", r.stdout);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["mean_nld"], 0.0);
    assert_eq!(v["config"]["min_iou"], 0.1);
    assert_eq!(v["config"]["fuzzy"]["stage_1_factor"], 2.0);
}

#[test]
fn plan_lists_recognizer_parts() {
    let r =
        blockspot(&["plan", path_str(&data_path("figure2.json")), "--input-height", "32", "--input-width", "128"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    // 190 x 27 at aspect 4 needs two parts
    assert_eq!(v[0]["parts"].as_array().unwrap().len(), 2);
}
