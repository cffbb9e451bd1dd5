//! The sim world's run-time behavior must match its enumeration oracle:
//! exactly at zero noise, within binomial bounds otherwise.

use std::sync::Arc;

use langbridge::evaluation::{grade_traces, Condition};
use langbridge::pipeline::PipelineMode;
use langbridge::ratio::Ratio;
use langbridge::simlab::{
    build_world, expected_report, sim_pipeline, SimGrader, SimWorld, SimWorldConfig,
};
use langbridge::{LanguageCode, LanguageRegistry};

fn lang(code: &str) -> LanguageCode {
    LanguageRegistry::builtin().normalize(code).unwrap()
}

fn realized_accuracy(
    world: &Arc<SimWorld>,
    condition: Condition,
    mode: PipelineMode,
    l: &LanguageCode,
) -> (Ratio, Ratio) {
    let queries = world.queries(l);
    let pipeline = sim_pipeline(world, condition, mode, None).unwrap();
    let batch = pipeline.run_batch(&queries);
    let grader = SimGrader::new(world.clone());
    let verdicts = grade_traces(&grader, &queries, &batch.traces).unwrap();
    let correct = queries.iter().filter(|q| verdicts[&q.id]).count() as u64;
    (
        Ratio::from_counts(correct, queries.len() as u64),
        batch.cost.mean_remote_calls,
    )
}

#[test]
fn zero_noise_runs_match_enumeration_exactly() {
    let mut config = SimWorldConfig::new(60, 30, 50, 17);
    config.extra.push((lang("ja"), 20));
    let world = Arc::new(build_world(config).unwrap());
    for condition in [
        Condition::Direct,
        Condition::Full,
        Condition::NoDetector,
        Condition::NoSelection,
    ] {
        for mode in [PipelineMode::Replace, PipelineMode::Integrate] {
            let expected = expected_report(&world, condition, mode);
            for cell in &expected.cells {
                let (acc, calls) = realized_accuracy(&world, condition, mode, &cell.lang);
                assert_eq!(
                    acc,
                    cell.accuracy_exact.unwrap(),
                    "{condition} {mode:?} {} accuracy",
                    cell.lang
                );
                assert_eq!(
                    calls, cell.mean_remote_calls,
                    "{condition} {mode:?} {} calls",
                    cell.lang
                );
            }
        }
    }
}

#[test]
fn noisy_runs_stay_within_three_sigma_of_expectation() {
    let mut config = SimWorldConfig::new(800, 400, 800, 23);
    config.noise = 0.1;
    let world = Arc::new(build_world(config).unwrap());
    let expected = expected_report(&world, Condition::Full, PipelineMode::Replace);
    for cell in &expected.cells {
        let (acc, _) = realized_accuracy(&world, Condition::Full, PipelineMode::Replace, &cell.lang);
        let n = world.fact_count() as f64;
        let p = cell.accuracy;
        let sigma = (p * (1.0 - p) / n).sqrt();
        let delta = (acc.to_f64() - p).abs();
        assert!(
            delta <= 3.0 * sigma,
            "{} realized {} expected {p} (3σ = {})",
            cell.lang,
            acc.to_f64(),
            3.0 * sigma
        );
    }
}

#[test]
fn disabling_the_detector_never_changes_low_resource_answers() {
    let world = Arc::new(build_world(SimWorldConfig::new(40, 20, 40, 31)).unwrap());
    let queries = world.queries(&lang("en"));
    let full = sim_pipeline(&world, Condition::Full, PipelineMode::Replace, None)
        .unwrap()
        .run_batch(&queries);
    let no_detector = sim_pipeline(&world, Condition::NoDetector, PipelineMode::Replace, None)
        .unwrap()
        .run_batch(&queries);
    for (f, n) in full.traces.iter().zip(&no_detector.traces) {
        if f.detector_verdict == 1 {
            assert_eq!(
                f.answer_final.as_ref().unwrap().text,
                n.answer_final.as_ref().unwrap().text,
                "query {}",
                f.query_id
            );
        }
    }
    assert!(no_detector.cost.mean_remote_calls > full.cost.mean_remote_calls);
}

#[test]
fn full_beats_no_selection_on_third_language_facts() {
    let mut config = SimWorldConfig::new(30, 30, 30, 41);
    config.extra.push((lang("ja"), 25));
    let world = Arc::new(build_world(config).unwrap());
    let queries = world.queries(&lang("en"));
    let grader = SimGrader::new(world.clone());

    let run = |condition: Condition| {
        let batch = sim_pipeline(&world, condition, PipelineMode::Replace, None)
            .unwrap()
            .run_batch(&queries);
        grade_traces(&grader, &queries, &batch.traces).unwrap()
    };
    let full = run(Condition::Full);
    let no_sel = run(Condition::NoSelection);

    let slice_correct = |verdicts: &std::collections::HashMap<String, bool>| {
        world
            .facts
            .iter()
            .filter(|f| matches!(&f.home, langbridge::simlab::FactHome::Lang(l) if l == &lang("ja")))
            .filter(|f| verdicts[&format!("{}:en", f.id)])
            .count()
    };
    let full_slice = slice_correct(&full);
    let no_sel_slice = slice_correct(&no_sel);
    assert_eq!(full_slice, 25);
    assert_eq!(no_sel_slice, 0);
    assert!(no_sel_slice < full_slice);
}
