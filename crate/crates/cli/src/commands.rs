//! Subcommand implementations.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use langbridge::backends::VirtualClock;
use langbridge::datasets::{
    generate_synthetic, ingest, llm_label, read_queue, resolve_queue, write_jsonl, LabeledRecord,
    DEFAULT_TOPICS,
};
use langbridge::detector::{split_corpus, train, DetectorModel, TrainConfig};
use langbridge::evaluation::{
    compute_report, grade_traces, run_ablation, Condition, ConditionData, Grader, Judge,
};
use langbridge::simlab::{
    build_world, expected_report, sim_pipeline, SimGrader, SimTiming, SimWorldConfig,
};
use langbridge::types::{PipelineTrace, Query};

use crate::config::{CommonArgs, Settings};
use crate::manifest::{now_unix_ms, RunManifest};
use crate::wiring::{build_backends, build_pipeline, load_templates, ExactGrader, JudgeGrader};
use crate::CliError;

fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| {
            CliError::Validation(format!("{}:{}: {what}: {e}", path.display(), idx + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

fn load_queries(path: &Path) -> Result<Vec<Query>, CliError> {
    let queries: Vec<Query> = load_jsonl(path, "query record")?;
    for (idx, q) in queries.iter().enumerate() {
        if q.text.trim().is_empty() || q.id.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: record {} has an empty id or text",
                path.display(),
                idx + 1
            )));
        }
    }
    Ok(queries)
}

fn manifest_path(out: &Path) -> PathBuf {
    match out.file_stem().and_then(|s| s.to_str()) {
        Some(stem) => out.with_file_name(format!("{stem}.manifest.json")),
        None => out.with_extension("manifest.json"),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn detector_train(
    common: &CommonArgs,
    lang: &str,
    corpus_path: &Path,
    out: &Path,
    epochs: u32,
    learning_rate: f64,
    holdout: f64,
) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let registry = settings.registry()?;
    let lang = registry
        .normalize(lang)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let (records, counts) = ingest(corpus_path, &registry)?;
    eprintln!(
        "ingested {} records (ch {} / common {} / en {})",
        counts.total, counts.ch_specific, counts.common, counts.en_specific
    );
    let rows: Vec<(String, langbridge::KnowledgeLabel)> = records
        .iter()
        .filter(|r| r.lang == lang)
        .map(LabeledRecord::training_pair)
        .collect();
    if rows.is_empty() {
        return Err(CliError::Validation(format!(
            "corpus has no records in language {lang}"
        )));
    }
    if !(0.0..1.0).contains(&holdout) {
        return Err(CliError::Validation("holdout must be in [0, 1)".into()));
    }

    let mut config = TrainConfig::with_seed(settings.seed);
    config.epochs = epochs;
    config.learning_rate = learning_rate;

    let (train_rows, test_rows) = split_corpus(rows, holdout, settings.seed);

    let model = train(&train_rows, &lang, &config)?;
    model.save(out).map_err(CliError::from)?;

    if !test_rows.is_empty() {
        let metrics = model.evaluate(&test_rows)?;
        println!(
            "{}",
            serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Runtime(e.to_string()))?
        );
    }

    RunManifest::new("detector-train", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .with_templates(&load_templates(&settings)?)
        .with_model_file(lang.as_str(), out)?
        .write(&manifest_path(out))?;
    eprintln!("model written to {}", out.display());
    Ok(())
}

pub fn detector_eval(
    model_path: &Path,
    corpus_path: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = DetectorModel::load(model_path)?;
    let registry = langbridge::LanguageRegistry::builtin();
    let (records, _) = ingest(corpus_path, &registry)?;
    let rows: Vec<(String, langbridge::KnowledgeLabel)> = records
        .iter()
        .filter(|r| r.lang == model.language)
        .map(LabeledRecord::training_pair)
        .collect();
    let metrics = model.evaluate(&rows)?;
    let json =
        serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Runtime(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::Runtime(e.to_string()))?,
        None => println!("{json}"),
    }
    Ok(())
}

pub fn pipeline_run(common: &CommonArgs, queries_path: &Path, out: &Path) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let queries = load_queries(queries_path)?;
    let backends = build_backends(&settings)?;
    let pipeline = build_pipeline(&settings, &backends, None, false)?;
    let batch = pipeline.run_batch(&queries);

    write_jsonl(&batch.traces, out).map_err(CliError::from)?;
    let failures = batch.traces.iter().filter(|t| t.error.is_some()).count();
    eprintln!(
        "{} queries, mean remote calls {:.2}, mean wall ms {:.1}, {} failures",
        batch.cost.queries,
        batch.cost.mean_remote_calls.to_f64(),
        batch.cost.mean_wall_ms.to_f64(),
        failures
    );
    if let Some(cache) = &backends.cache {
        eprintln!("cache: {} hits, {} misses", cache.hits(), cache.misses());
    }

    let mut manifest = RunManifest::new("pipeline-run", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .with_templates(&load_templates(&settings)?)
        .with_backends(vec![
            format!("chat: {} ({})", backends.chat.identity(), settings.chat_model),
            format!("translate: {}", backends.translator.identity()),
        ]);
    for (lang, path) in &settings.detector_models {
        manifest = manifest.with_model_file(lang, path)?;
    }
    manifest.write(&manifest_path(out))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    common: &CommonArgs,
    queries_path: &Path,
    original_path: &Path,
    improved_path: &Path,
    report_path: &Path,
    grader_kind: &str,
    table: bool,
    max_ambiguous: f64,
) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let queries = load_queries(queries_path)?;
    let original: Vec<PipelineTrace> = load_jsonl(original_path, "trace")?;
    let improved: Vec<PipelineTrace> = load_jsonl(improved_path, "trace")?;

    let backends;
    let templates;
    let judge_state: Option<JudgeGrader> = match grader_kind {
        "exact" => None,
        "judge" => {
            backends = build_backends(&settings)?;
            templates = load_templates(&settings)?;
            Some(JudgeGrader {
                judge: Judge::new(
                    &backends.chat,
                    &templates,
                    settings.chat_model.clone(),
                    settings.pair.0.clone(),
                ),
                ambiguous: AtomicU64::new(0),
                judged: AtomicU64::new(0),
            })
        }
        other => return Err(CliError::Config(format!("unknown grader {other:?}"))),
    };
    let exact_grader = ExactGrader;
    let grader: &dyn Grader = match &judge_state {
        Some(judge) => judge,
        None => &exact_grader,
    };

    let original_verdicts = grade_traces(grader, &queries, &original)?;
    let improved_verdicts = grade_traces(grader, &queries, &improved)?;
    let report = compute_report(
        &queries,
        &ConditionData {
            traces: &original,
            verdicts: &original_verdicts,
        },
        &ConditionData {
            traces: &improved,
            verdicts: &improved_verdicts,
        },
    )?;

    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(report_path, &json).map_err(|e| CliError::Runtime(e.to_string()))?;
    if table {
        println!("{}", report.to_table());
    }

    RunManifest::new("evaluate", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .write(&manifest_path(report_path))?;

    if let Some(judge) = &judge_state {
        let judged = judge.judged.load(Ordering::SeqCst).max(1);
        let ambiguous = judge.ambiguous.load(Ordering::SeqCst);
        let rate = ambiguous as f64 / judged as f64;
        eprintln!("judge: {judged} verdicts, {ambiguous} ambiguous ({rate:.3})");
        if rate > max_ambiguous {
            return Err(CliError::Validation(format!(
                "ambiguous verdict rate {rate:.3} exceeds bound {max_ambiguous:.3}"
            )));
        }
    }
    Ok(())
}

pub fn ablate(
    common: &CommonArgs,
    queries_path: &Path,
    suite_raw: &str,
    report_path: &Path,
    grader_kind: &str,
) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let queries = load_queries(queries_path)?;
    let mut suite = Vec::new();
    for name in suite_raw.split(',').filter(|s| !s.trim().is_empty()) {
        let condition = Condition::parse(name.trim())
            .ok_or_else(|| CliError::Config(format!("unknown condition {name:?}")))?;
        suite.push(condition);
    }
    let backends = build_backends(&settings)?;

    let build = |condition: Condition| {
        let (ablation, forced_direct) = match condition {
            Condition::Direct => (None, true),
            Condition::Full => (None, false),
            Condition::NoDetector => (Some(langbridge::pipeline::Ablation::NoDetector), false),
            Condition::NoSelection => (Some(langbridge::pipeline::Ablation::NoSelection), false),
        };
        build_pipeline(&settings, &backends, ablation, forced_direct).map_err(|e| {
            langbridge::pipeline::PipelineError::InvalidConfig(e.to_string())
        })
    };

    let templates;
    let judge_state: Option<JudgeGrader> = match grader_kind {
        "exact" => None,
        "judge" => {
            templates = load_templates(&settings)?;
            Some(JudgeGrader {
                judge: Judge::new(
                    &backends.chat,
                    &templates,
                    settings.chat_model.clone(),
                    settings.pair.0.clone(),
                ),
                ambiguous: AtomicU64::new(0),
                judged: AtomicU64::new(0),
            })
        }
        other => return Err(CliError::Config(format!("unknown grader {other:?}"))),
    };
    let exact_grader = ExactGrader;
    let grader: &dyn Grader = match &judge_state {
        Some(judge) => judge,
        None => &exact_grader,
    };

    let ablation_report = run_ablation(&suite, &queries, &build, grader)?;
    let mut conditions = Vec::new();
    for outcome in &ablation_report.outcomes {
        conditions.push(serde_json::json!({
            "condition": outcome.condition.as_str(),
            "cost": outcome.cost,
            "report_vs_direct": outcome.versus_direct,
        }));
        println!("== {} ==", outcome.condition);
        println!("{}", outcome.versus_direct.to_table());
    }
    let payload = serde_json::json!({
        "direct_cost": ablation_report.direct_cost,
        "conditions": conditions,
    });
    std::fs::write(
        report_path,
        serde_json::to_string_pretty(&payload).map_err(|e| CliError::Runtime(e.to_string()))?,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    RunManifest::new("ablate", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .with_templates(&load_templates(&settings)?)
        .write(&manifest_path(report_path))?;
    Ok(())
}

pub fn datagen(common: &CommonArgs, topics: &[String], out: &Path) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let backends = build_backends(&settings)?;
    let templates = load_templates(&settings)?;
    let topic_list: Vec<String> = match settings.file.get("datagen.topics") {
        Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
        None => DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect(),
    };
    let mut all = Vec::new();
    for topic in topics {
        let (mut records, stats) = generate_synthetic(
            topic,
            &backends.chat,
            &settings.chat_model,
            &templates,
            &topic_list,
        )?;
        eprintln!(
            "topic {topic}: {} records parsed, {} malformed entries",
            stats.parsed, stats.malformed
        );
        // keep ids unique across topics within one output file
        for record in &mut records {
            record.id = format!("{}-{}", record.id, all.len());
            all.push(record.clone());
        }
    }
    write_jsonl(&all, out).map_err(CliError::from)?;
    RunManifest::new("datagen", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .with_templates(&templates)
        .with_backends(vec![backends.chat.identity()])
        .write(&manifest_path(out))?;
    eprintln!("{} records written to {}", all.len(), out.display());
    Ok(())
}

pub fn label(
    common: &CommonArgs,
    input: &Path,
    out: &Path,
    queue_path: &Path,
    merge: Option<&Path>,
) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let queries = load_queries(input)?;

    if let Some(resolved_path) = merge {
        let queue = read_queue(resolved_path)?;
        let (merged, discarded) = resolve_queue(&queries, &queue);
        write_jsonl(&merged, out).map_err(CliError::from)?;
        eprintln!(
            "merged {} reviewed records, {} discarded",
            merged.len(),
            discarded.len()
        );
        return Ok(());
    }

    let backends = build_backends(&settings)?;
    let templates = load_templates(&settings)?;
    let outcome = llm_label(&queries, &backends.chat, &settings.chat_model, &templates)?;
    assert_eq!(
        outcome.agreed.len() + outcome.queue.len(),
        queries.len(),
        "labeling conservation"
    );
    write_jsonl(&outcome.agreed, out).map_err(CliError::from)?;
    write_jsonl(&outcome.queue, queue_path).map_err(CliError::from)?;
    eprintln!(
        "{} agreed, {} queued for review",
        outcome.agreed.len(),
        outcome.queue.len()
    );
    RunManifest::new("label", settings.seed, now_unix_ms())
        .with_config(settings.file.snapshot())
        .with_templates(&templates)
        .with_backends(vec![backends.chat.identity()])
        .write(&manifest_path(out))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    common: &CommonArgs,
    classes: &str,
    extra: &[String],
    noise: f64,
    conditions_raw: &str,
    out_dir: &Path,
    save_world: bool,
) -> Result<(), CliError> {
    let settings = Settings::resolve(common)?;
    let parts: Vec<&str> = classes.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "--classes must be `en,zh,common` counts, got {classes:?}"
        )));
    }
    let parse_count = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("bad class count {s:?}")))
    };
    let mut world_config = SimWorldConfig::new(
        parse_count(parts[0])?,
        parse_count(parts[1])?,
        parse_count(parts[2])?,
        settings.seed,
    );
    world_config.noise = noise;
    let registry = settings.registry()?;
    for spec in extra {
        let Some((lang, count)) = spec.split_once('=') else {
            return Err(CliError::Config(format!(
                "--extra must be `lang=count`, got {spec:?}"
            )));
        };
        let lang = registry
            .normalize(lang.trim())
            .map_err(|e| CliError::Config(e.to_string()))?;
        world_config.extra.push((lang, parse_count(count)?));
    }

    let mut conditions = Vec::new();
    for name in conditions_raw.split(',').filter(|s| !s.trim().is_empty()) {
        let condition = Condition::parse(name.trim())
            .ok_or_else(|| CliError::Config(format!("unknown condition {name:?}")))?;
        if condition != Condition::Direct {
            conditions.push(condition);
        }
    }
    if conditions.is_empty() {
        return Err(CliError::Validation(
            "simulate needs at least one condition besides direct".into(),
        ));
    }

    let world = Arc::new(build_world(world_config.clone())?);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    if save_world {
        world.save(out_dir)?;
    }

    let (en, zh) = world.pair();
    let mut queries = world.queries(&en);
    queries.extend(world.queries(&zh));
    let grader = SimGrader::new(world.clone());
    let clock = Arc::new(VirtualClock::default());
    let timing = SimTiming::new(clock.clone());

    let run = |condition: Condition| -> Result<
        (Vec<PipelineTrace>, std::collections::HashMap<String, bool>),
        CliError,
    > {
        let pipeline = sim_pipeline(&world, condition, settings.mode, Some(timing.clone()))?;
        let batch = pipeline.run_batch(&queries);
        let verdicts = grade_traces(&grader, &queries, &batch.traces)?;
        Ok((batch.traces, verdicts))
    };

    let (direct_traces, direct_verdicts) = run(Condition::Direct)?;
    let mut condition_reports = Vec::new();
    let mut tables = String::new();
    for &condition in &conditions {
        let (traces, verdicts) = run(condition)?;
        let report = compute_report(
            &queries,
            &ConditionData {
                traces: &direct_traces,
                verdicts: &direct_verdicts,
            },
            &ConditionData {
                traces: &traces,
                verdicts: &verdicts,
            },
        )?;
        let expected = expected_report(&world, condition, settings.mode);
        let expected_direct = expected_report(&world, Condition::Direct, settings.mode);

        // at zero noise the realized cells must equal the enumeration
        let mut matches_expected = true;
        if noise == 0.0 {
            for cell in &report.cells {
                let want = expected
                    .cells
                    .iter()
                    .find(|c| c.lang == cell.lang)
                    .and_then(|c| c.accuracy_exact);
                if want != Some(cell.improved.accuracy) {
                    matches_expected = false;
                }
                let want_direct = expected_direct
                    .cells
                    .iter()
                    .find(|c| c.lang == cell.lang)
                    .and_then(|c| c.accuracy_exact);
                if want_direct != Some(cell.original.accuracy) {
                    matches_expected = false;
                }
            }
        }

        tables.push_str(&format!("== {condition} vs direct ==\n"));
        tables.push_str(&report.to_table());
        tables.push('\n');
        condition_reports.push(serde_json::json!({
            "condition": condition.as_str(),
            "report": report,
            "expected": expected,
            "matches_expected": matches_expected,
        }));
        if !matches_expected {
            std::fs::write(out_dir.join("report.txt"), &tables)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            return Err(CliError::Validation(format!(
                "condition {condition} diverged from the enumeration oracle"
            )));
        }
    }

    let payload = serde_json::json!({
        "world": world_config,
        "mode": settings.mode,
        "conditions": condition_reports,
        "expected_direct": expected_report(&world, Condition::Direct, settings.mode),
    });
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&payload).map_err(|e| CliError::Runtime(e.to_string()))?,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out_dir.join("report.txt"), &tables)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    print!("{tables}");

    // virtual time, so repeated runs with one seed are byte-identical
    RunManifest::new("simulate", settings.seed, clock_now(&clock))
        .with_config(settings.file.snapshot())
        .with_templates(&load_templates(&settings)?)
        .with_backends(vec![
            format!("chat: simlab(seed {}, {} facts)", world.config.seed, world.fact_count()),
            "translate: mock-translator".to_string(),
        ])
        .write(&out_dir.join("manifest.json"))?;
    Ok(())
}

fn clock_now(clock: &Arc<VirtualClock>) -> u64 {
    use langbridge::backends::Clock;
    clock.now_ms()
}
