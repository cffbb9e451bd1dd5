//! End-to-end subcommand coverage over scripted backends and temp files.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_langbridge"))
}

fn write_corpus(path: &Path, per_class: usize) {
    let mut lines = String::new();
    for i in 0..per_class {
        lines.push_str(&format!(
            "{{\"id\":\"ch{i}\",\"text\":\"dim sum teahouse pearl river {i}\",\"lang\":\"en\",\"label\":\"ch_specific\"}}\n"
        ));
        lines.push_str(&format!(
            "{{\"id\":\"co{i}\",\"text\":\"byte boolean arithmetic logic {i}\",\"lang\":\"en\",\"label\":\"common\"}}\n"
        ));
        lines.push_str(&format!(
            "{{\"id\":\"en{i}\",\"text\":\"thanksgiving baseball turnpike {i}\",\"lang\":\"en\",\"label\":\"en_specific\"}}\n"
        ));
    }
    std::fs::write(path, lines).unwrap();
}

#[test]
fn detector_train_is_deterministic_and_eval_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 40);

    let train = |out: &Path| {
        let output = bin()
            .args(["detector-train", "--lang", "en", "--corpus"])
            .arg(&corpus)
            .arg("--out")
            .arg(out)
            .args(["--seed", "7"])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "train failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let model_a = dir.path().join("a.bin");
    let model_b = dir.path().join("b.bin");
    train(&model_a);
    train(&model_b);
    assert_eq!(
        std::fs::read(&model_a).unwrap(),
        std::fs::read(&model_b).unwrap(),
        "same corpus and seed must give byte-identical models"
    );
    assert!(model_a.with_file_name("a.manifest.json").exists());

    let eval = bin()
        .args(["detector-eval", "--model"])
        .arg(&model_a)
        .arg("--corpus")
        .arg(&corpus)
        .output()
        .unwrap();
    assert!(eval.status.success());
    let metrics: serde_json::Value =
        serde_json::from_slice(&eval.stdout).expect("metrics JSON on stdout");
    assert!(metrics["accuracy"].as_f64().unwrap() > 0.9);
}

fn scripted_config(dir: &Path) -> std::path::PathBuf {
    let script = dir.join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({
            "default": "direct answer",
            "rules": [
                {"substring": "most suitable", "reply": "最适合的语言是中文"},
                {"substring": "@@zh@@", "reply": "target answer ans-zh"},
                {"substring": "融合中英文答案", "reply": "integrated answer"}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let config = dir.join("config.ini");
    std::fs::write(
        &config,
        format!(
            "[backend.chat]\nkind = scripted\nscript = {}\nmodel = scripted-model\n[backend.translate]\nkind = mock\n",
            script.display()
        ),
    )
    .unwrap();
    config
}

#[test]
fn pipeline_run_then_evaluate_with_exact_grader() {
    let dir = tempfile::tempdir().unwrap();
    let config = scripted_config(dir.path());
    let queries = dir.path().join("queries.jsonl");
    std::fs::write(
        &queries,
        concat!(
            "{\"id\":\"q1\",\"text\":\"needs help\",\"lang\":\"en\",\"gold_answer\":\"ans-zh\",\"dataset\":\"d\"}\n",
            "{\"id\":\"q2\",\"text\":\"also needs help\",\"lang\":\"en\",\"gold_answer\":\"ans-zh\",\"dataset\":\"d\"}\n",
        ),
    )
    .unwrap();

    // original: direct answers are wrong (no gold token in "direct answer")
    let original = dir.path().join("original.jsonl");
    let run_original = bin()
        .args(["pipeline-run", "--queries"])
        .arg(&queries)
        .arg("--out")
        .arg(&original)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    // no detector model configured: queries fail without an ablation
    assert!(run_original.status.success());
    let first_line = std::fs::read_to_string(&original).unwrap();
    assert!(first_line.contains("no detector loaded"));

    // with --ablate no_detector the enhanced path runs end to end
    let run_enhanced = |out: &Path| {
        let output = bin()
            .args(["pipeline-run", "--ablate", "no_detector", "--queries"])
            .arg(&queries)
            .arg("--out")
            .arg(out)
            .arg("--config")
            .arg(&config)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let improved = dir.path().join("improved.jsonl");
    run_enhanced(&improved);

    // fabricate the original condition as direct-only traces via a
    // second config without enhancement: reuse improved for both sides
    // to check the evaluate plumbing and table output.
    let report = dir.path().join("report.json");
    let eval = bin()
        .args(["evaluate", "--queries"])
        .arg(&queries)
        .arg("--original")
        .arg(&improved)
        .arg("--improved")
        .arg(&improved)
        .arg("--report")
        .arg(&report)
        .args(["--grader", "exact", "--table"])
        .output()
        .unwrap();
    assert!(
        eval.status.success(),
        "{}",
        String::from_utf8_lossy(&eval.stderr)
    );
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("Dataset"), "table printed: {stdout}");
    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["cells"][0]["original"]["correct"], 2);
    assert_eq!(report_json["error_rate"]["num"], 0);
}

#[test]
fn ablate_compares_conditions_with_trained_detectors() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 40);
    let model = dir.path().join("en.bin");
    assert!(bin()
        .args(["detector-train", "--lang", "en", "--corpus"])
        .arg(&corpus)
        .arg("--out")
        .arg(&model)
        .args(["--seed", "3"])
        .output()
        .unwrap()
        .status
        .success());

    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({
            "default": "plain direct answer",
            "rules": [
                {"substring": "most suitable", "reply": "中文 is the most suitable"},
                {"substring": "@@zh@@", "reply": "routed answer gold-token"}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let config = dir.path().join("config.ini");
    std::fs::write(
        &config,
        format!(
            "[backend.chat]\nkind = scripted\nscript = {}\nmodel = m\n[backend.translate]\nkind = mock\n[detector]\nmodel.en = {}\n",
            script.display(),
            model.display()
        ),
    )
    .unwrap();

    let queries = dir.path().join("queries.jsonl");
    std::fs::write(
        &queries,
        concat!(
            "{\"id\":\"q1\",\"text\":\"dim sum teahouse pearl river question\",\"lang\":\"en\",\"gold_answer\":\"gold-token\",\"dataset\":\"d\"}\n",
            "{\"id\":\"q2\",\"text\":\"byte boolean arithmetic question\",\"lang\":\"en\",\"gold_answer\":\"gold-token\",\"dataset\":\"d\"}\n",
        ),
    )
    .unwrap();

    let report = dir.path().join("ablation.json");
    let output = bin()
        .args(["ablate", "--suite", "full,no_detector", "--queries"])
        .arg(&queries)
        .arg("--report")
        .arg(&report)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let payload: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let conditions = payload["conditions"].as_array().unwrap();
    assert_eq!(conditions.len(), 2);
    // the ch-specific query is rescued in both conditions; the common one
    // only costs more under no_detector
    let full_cost = conditions[0]["cost"]["mean_remote_calls"]["value"].as_f64().unwrap();
    let nodet_cost = conditions[1]["cost"]["mean_remote_calls"]["value"].as_f64().unwrap();
    assert!(nodet_cost > full_cost, "no_detector {nodet_cost} vs full {full_cost}");
}

#[test]
fn datagen_and_label_flow() {
    let dir = tempfile::tempdir().unwrap();
    let generation_reply = serde_json::json!({
        "故宫是哪个朝代建立的？": "Chinese knowledge",
        "Which president is on the two-dollar bill?": "English knowledge",
        "光速是多少？": "Knowledge with no specific language"
    })
    .to_string();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({
            "rules": [
                {"substring": "The topic I provide is", "reply": generation_reply},
                {"substring": "agree", "reply": "Chinese knowledge"},
                {"substring": "conflict", "replies": ["English knowledge", "common"]}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let config = dir.path().join("config.ini");
    std::fs::write(
        &config,
        format!(
            "[backend.chat]\nkind = scripted\nscript = {}\nmodel = gen\n[backend.translate]\nkind = mock\n",
            script.display()
        ),
    )
    .unwrap();

    let generated = dir.path().join("generated.jsonl");
    let output = bin()
        .args(["datagen", "--topic", "History", "--out"])
        .arg(&generated)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert_eq!(std::fs::read_to_string(&generated).unwrap().lines().count(), 3);

    // unknown topic is a validation failure (exit 4)
    let bad = bin()
        .args(["datagen", "--topic", "Cryptozoology", "--out"])
        .arg(dir.path().join("nope.jsonl"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));

    // two-pass labeling: one agreement, one conflict
    let unlabeled = dir.path().join("unlabeled.jsonl");
    std::fs::write(
        &unlabeled,
        concat!(
            "{\"id\":\"a\",\"text\":\"agree on this one\",\"lang\":\"en\"}\n",
            "{\"id\":\"b\",\"text\":\"conflict on this one\",\"lang\":\"en\"}\n",
        ),
    )
    .unwrap();
    let labeled = dir.path().join("labeled.jsonl");
    let queue = dir.path().join("queue.jsonl");
    let output = bin()
        .args(["label", "--in"])
        .arg(&unlabeled)
        .arg("--out")
        .arg(&labeled)
        .arg("--queue")
        .arg(&queue)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert_eq!(std::fs::read_to_string(&labeled).unwrap().lines().count(), 1);
    let queue_text = std::fs::read_to_string(&queue).unwrap();
    assert_eq!(queue_text.lines().count(), 1);
    assert!(queue_text.contains("pending"));

    // resolve the queued item and merge it back
    let resolved = queue_text.replace("\"status\":\"pending\"", "\"status\":\"resolved\"").replace(
        "\"pass2\":\"common\"",
        "\"pass2\":\"common\",\"resolution\":\"en_specific\"",
    );
    let resolved_path = dir.path().join("resolved.jsonl");
    std::fs::write(&resolved_path, resolved).unwrap();
    let merged = dir.path().join("merged.jsonl");
    let output = bin()
        .args(["label", "--in"])
        .arg(&unlabeled)
        .arg("--out")
        .arg(&merged)
        .arg("--queue")
        .arg(&queue)
        .arg("--merge")
        .arg(&resolved_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let merged_text = std::fs::read_to_string(&merged).unwrap();
    assert_eq!(merged_text.lines().count(), 1);
    assert!(merged_text.contains("human_reviewed"));
    assert!(merged_text.contains("en_specific"));
}

#[test]
fn evaluate_with_judge_enforces_the_ambiguity_bound() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::json!({
            "rules": [
                {"substring": "assess the correctness", "reply": "it is right"}
            ],
            "default": "whatever answer"
        })
        .to_string(),
    )
    .unwrap();
    let config = dir.path().join("config.ini");
    std::fs::write(
        &config,
        format!(
            "[backend.chat]\nkind = scripted\nscript = {}\nmodel = judge\n[backend.translate]\nkind = mock\n",
            script.display()
        ),
    )
    .unwrap();
    let queries = dir.path().join("q.jsonl");
    std::fs::write(
        &queries,
        "{\"id\":\"q1\",\"text\":\"ask\",\"lang\":\"en\",\"gold_answer\":\"gold\",\"dataset\":\"d\"}\n",
    )
    .unwrap();
    let traces = dir.path().join("t.jsonl");
    // minimal trace with a final answer
    std::fs::write(
        &traces,
        "{\"query_id\":\"q1\",\"detector_verdict\":0,\"selection_parse_failed\":false,\"answer_final\":{\"text\":\"candidate\",\"lang\":\"en\",\"provenance\":\"direct\"},\"call_ledger\":[]}\n",
    )
    .unwrap();

    // every judge reply is ambiguous -> rate 1.0 > bound -> exit 4
    let output = bin()
        .args(["evaluate", "--queries"])
        .arg(&queries)
        .arg("--original")
        .arg(&traces)
        .arg("--improved")
        .arg(&traces)
        .arg("--report")
        .arg(dir.path().join("r.json"))
        .args(["--grader", "judge", "--max-ambiguous", "0.05"])
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("ambiguous"));
}

#[test]
fn exit_codes_are_distinct() {
    // usage error: unknown subcommand
    let usage = bin().arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));

    // config error: malformed config file
    let dir = tempfile::tempdir().unwrap();
    let bad_config = dir.path().join("bad.ini");
    std::fs::write(&bad_config, "no equals sign here\n").unwrap();
    let queries = dir.path().join("q.jsonl");
    std::fs::write(&queries, "{\"id\":\"a\",\"text\":\"t\",\"lang\":\"en\"}\n").unwrap();
    let config_err = bin()
        .args(["pipeline-run", "--queries"])
        .arg(&queries)
        .arg("--out")
        .arg(dir.path().join("t.jsonl"))
        .arg("--config")
        .arg(&bad_config)
        .output()
        .unwrap();
    assert_eq!(config_err.status.code(), Some(3));

    // validation error: corpus schema violation
    let bad_corpus = dir.path().join("bad.jsonl");
    std::fs::write(&bad_corpus, "{\"id\":\"a\",\"text\":\"t\"}\n").unwrap();
    let validation_err = bin()
        .args(["detector-train", "--lang", "en", "--corpus"])
        .arg(&bad_corpus)
        .arg("--out")
        .arg(dir.path().join("m.bin"))
        .output()
        .unwrap();
    assert_eq!(validation_err.status.code(), Some(4));
}
