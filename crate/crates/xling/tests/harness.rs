//! End-to-end harness behavior on the synthetic language pair: planted
//! rotation recovery through the full file pipeline, retrieval degradation
//! with noise, direction symmetry, and stage-tagged failures.

mod common;

use std::path::Path;

use common::{crosslingual_spec_text, write_pair_files};
use xling::bli_eval::precision_at_k;
use xling::dictionary::build_seed_matrices;
use xling::harness::{
    generate_synthetic_pair, parse_spec_str, run_crosslingual, run_monolingual, ExperimentSpec,
    HarnessError,
};
use xling::textclf::save_dataset;
use xling::transforms::fit_orthogonal;

#[test]
fn noise_free_pair_recovers_rotation_and_perfect_retrieval() {
    let pair = generate_synthetic_pair(200, 10, 42, 0.0, 40, 0.3).unwrap();
    let seeds =
        build_seed_matrices(&pair.dictionary, &pair.src_space, &pair.tgt_space, 20_000).unwrap();
    let map = fit_orthogonal(&seeds).unwrap();
    assert!(
        map.w().max_abs_diff(&pair.rotation) <= 1e-6,
        "rotation difference {}",
        map.w().max_abs_diff(&pair.rotation)
    );
    let report = precision_at_k(
        &map,
        &pair.dictionary,
        &pair.src_space,
        &pair.tgt_space,
        &[1],
    )
    .unwrap();
    assert_eq!(report.precision_at[&1], 1.0);
}

#[test]
fn retrieval_precision_drops_with_target_noise() {
    let clean = generate_synthetic_pair(200, 10, 42, 0.0, 40, 0.3).unwrap();
    let noisy = generate_synthetic_pair(200, 10, 42, 0.5, 40, 0.3).unwrap();
    let p_at_1 = |pair: &xling::harness::SyntheticPair| {
        let seeds =
            build_seed_matrices(&pair.dictionary, &pair.src_space, &pair.tgt_space, 20_000)
                .unwrap();
        let map = fit_orthogonal(&seeds).unwrap();
        precision_at_k(
            &map,
            &pair.dictionary,
            &pair.src_space,
            &pair.tgt_space,
            &[1],
        )
        .unwrap()
        .precision_at[&1]
    };
    assert!(p_at_1(&noisy) < p_at_1(&clean));
}

#[test]
fn direction_symmetry_holds_on_noise_free_data() {
    let pair = generate_synthetic_pair(200, 12, 11, 0.0, 200, 0.3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_pair_files(&pair, dir.path());
    let run = |direction: &str| {
        let text = crosslingual_spec_text(
            &paths,
            "orto",
            direction,
            "classifier = mean_baseline\nlr = 0.05\nrepeats = 3\nseed = 42\n",
        );
        let ExperimentSpec::CrossLingual(spec) =
            parse_spec_str(Path::new("spec"), &text).unwrap()
        else {
            panic!("wrong mode")
        };
        run_crosslingual(&spec).unwrap().mean_accuracy
    };
    let forward = run("source_to_target");
    let backward = run("target_to_source");
    assert!(
        (forward - backward).abs() <= 0.02,
        "asymmetry: {forward} vs {backward}"
    );
}

#[test]
fn crosslingual_result_echoes_spec_and_carries_per_repeat_values() {
    let pair = generate_synthetic_pair(100, 8, 5, 0.1, 60, 0.3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_pair_files(&pair, dir.path());
    let text = crosslingual_spec_text(
        &paths,
        "mse",
        "source_to_target",
        "classifier = mean_baseline\nlr = 0.05\nrepeats = 6\nseed = 9\n",
    );
    let ExperimentSpec::CrossLingual(spec) = parse_spec_str(Path::new("spec"), &text).unwrap()
    else {
        panic!("wrong mode")
    };
    let result = run_crosslingual(&spec).unwrap();
    assert_eq!(result.outcomes.len(), 6);
    assert_eq!(result.outcomes[0].seed, 9);
    assert_eq!(result.outcomes[5].seed, 14);
    assert!(result.ci95_accuracy.is_some());
    // Mean is the exact arithmetic mean of the per-repeat values.
    let sum: f64 = result.outcomes.iter().map(|o| o.accuracy).sum();
    assert_eq!(result.mean_accuracy, sum / 6.0);
    let block = result.to_kv_block();
    assert!(block.contains("spec.method=mse"));
    assert!(block.contains("spec.max_pairs=20000"));
    assert!(block.contains("ci_method=normal_1.96_sample_sd"));
}

#[test]
fn monolingual_run_on_separable_data_is_perfect() {
    // Single-language task: train/dev/test all drawn from the source side.
    let pair = generate_synthetic_pair(120, 10, 21, 0.0, 120, 0.4).unwrap();
    let extra = generate_synthetic_pair(120, 10, 21, 0.0, 40, 0.4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_pair_files(&pair, dir.path());
    let test_path = dir.path().join("mono_test.tsv");
    save_dataset(&extra.src_dev, &test_path).unwrap();
    let text = format!(
        "mode = monolingual\nemb = {}\ntrain = {}\ndev = {}\ntest = {}\n\
         classifier = cnn\nfilters = 32\nrepeats = 6\nseed = 42\n",
        paths["src_emb"].display(),
        paths["src_train"].display(),
        paths["src_dev"].display(),
        test_path.display(),
    );
    let ExperimentSpec::Monolingual(spec) = parse_spec_str(Path::new("spec"), &text).unwrap()
    else {
        panic!("wrong mode")
    };
    let result = run_monolingual(&spec).unwrap();
    assert_eq!(result.outcomes.len(), 6);
    assert!(result.ci95_accuracy.is_some());
    assert!(
        result.mean_accuracy >= 0.95,
        "accuracy {}",
        result.mean_accuracy
    );
}

#[test]
fn failures_carry_their_stage_tag() {
    let pair = generate_synthetic_pair(60, 6, 3, 0.0, 30, 0.3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_pair_files(&pair, dir.path());
    let mut text = crosslingual_spec_text(
        &paths,
        "orto",
        "source_to_target",
        "classifier = mean_baseline\nrepeats = 1\n",
    );
    text = text.replace(
        &format!("src_emb = {}", paths["src_emb"].display()),
        "src_emb = /nonexistent/embeddings.vec",
    );
    let ExperimentSpec::CrossLingual(spec) = parse_spec_str(Path::new("spec"), &text).unwrap()
    else {
        panic!("wrong mode")
    };
    match run_crosslingual(&spec) {
        Err(HarnessError::Stage { stage, .. }) => assert_eq!(stage, "load_src_emb"),
        other => panic!("expected stage error, got {other:?}"),
    }
}
