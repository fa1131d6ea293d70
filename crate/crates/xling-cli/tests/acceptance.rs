//! CLI acceptance: format robustness. A corpus of malformed embedding,
//! dictionary and dataset files must each produce exit code 2 with a
//! line-numbered diagnostic where a specific line is at fault.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xling() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xling"))
}

struct Fixture {
    name: &'static str,
    kind: Kind,
    content: &'static str,
    /// Substring expected in stderr (usually a ":<line>:" marker).
    diagnostic: Option<&'static str>,
}

enum Kind {
    Vec,
    Dict,
    Dataset,
}

const CORPUS: &[Fixture] = &[
    // Malformed .vec embedding files.
    Fixture { name: "vec_empty", kind: Kind::Vec, content: "", diagnostic: Some(":1:") },
    Fixture { name: "vec_header_not_number", kind: Kind::Vec, content: "abc 3\nw 1 2 3\n", diagnostic: Some(":1:") },
    Fixture { name: "vec_header_one_field", kind: Kind::Vec, content: "3\nw 1 2 3\n", diagnostic: Some(":1:") },
    Fixture { name: "vec_header_three_fields", kind: Kind::Vec, content: "1 3 9\nw 1 2 3\n", diagnostic: Some(":1:") },
    Fixture { name: "vec_zero_words", kind: Kind::Vec, content: "0 3\n", diagnostic: None },
    Fixture { name: "vec_fewer_lines_than_header", kind: Kind::Vec, content: "2 3\na 1 2 3\n", diagnostic: Some("count mismatch") },
    Fixture { name: "vec_more_lines_than_header", kind: Kind::Vec, content: "1 3\na 1 2 3\nb 4 5 6\n", diagnostic: Some("count mismatch") },
    Fixture { name: "vec_wrong_arity", kind: Kind::Vec, content: "2 3\na 1 2 3\nb 1 2\n", diagnostic: Some(":3:") },
    Fixture { name: "vec_non_numeric_value", kind: Kind::Vec, content: "2 3\na 1 2 3\nb 1 x 3\n", diagnostic: Some(":3:") },
    Fixture { name: "vec_non_finite_value", kind: Kind::Vec, content: "2 3\na 1 2 inf\nb 1 2 3\n", diagnostic: Some(":2:") },
    Fixture { name: "vec_nan_value", kind: Kind::Vec, content: "2 3\na 1 2 NaN\nb 1 2 3\n", diagnostic: Some(":2:") },
    // Malformed dictionaries.
    Fixture { name: "dict_space_not_tab", kind: Kind::Dict, content: "dog pes\n", diagnostic: Some(":1:") },
    Fixture { name: "dict_two_tabs", kind: Kind::Dict, content: "dog\tpes\textra\n", diagnostic: Some(":1:") },
    Fixture { name: "dict_empty_source", kind: Kind::Dict, content: "\tpes\n", diagnostic: Some(":1:") },
    Fixture { name: "dict_empty_target", kind: Kind::Dict, content: "dog\t\n", diagnostic: Some(":1:") },
    Fixture { name: "dict_bad_second_line", kind: Kind::Dict, content: "alpha\talpha\ncat kocka\n", diagnostic: Some(":2:") },
    Fixture { name: "dict_empty_source_line_two", kind: Kind::Dict, content: "alpha\talpha\n\tx\n", diagnostic: Some(":2:") },
    // Malformed datasets.
    Fixture { name: "data_missing_tab", kind: Kind::Dataset, content: "positive great\n", diagnostic: Some(":1:") },
    Fixture { name: "data_unknown_label", kind: Kind::Dataset, content: "neutral\tmeh\n", diagnostic: Some(":1:") },
    Fixture { name: "data_bad_label_line_two", kind: Kind::Dataset, content: "positive\tfine\nbad\tmeh\n", diagnostic: Some(":2:") },
    Fixture { name: "data_missing_tab_line_two", kind: Kind::Dataset, content: "positive\tfine\nnegative awful\n", diagnostic: Some(":2:") },
    Fixture { name: "data_uppercase_label", kind: Kind::Dataset, content: "POSITIVE\tfine\n", diagnostic: Some(":1:") },
];

fn write_good_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let vec_path = dir.join("good.vec");
    fs::write(
        &vec_path,
        "2 3\nalpha 1 0 0\nbeta 0 1 0\n",
    )
    .unwrap();
    let dict_path = dir.join("good.tsv");
    fs::write(&dict_path, "alpha\talpha\nbeta\tbeta\n").unwrap();
    let train_path = dir.join("good_train.tsv");
    fs::write(
        &train_path,
        "positive\talpha\nnegative\tbeta\npositive\talpha alpha\nnegative\tbeta beta\n",
    )
    .unwrap();
    let dev_path = dir.join("good_dev.tsv");
    fs::write(&dev_path, "positive\talpha\nnegative\tbeta\n").unwrap();
    (vec_path, dict_path, train_path, dev_path)
}

fn exercise(dir: &Path, fixture: &Fixture, bad_path: &Path) -> Output {
    let (vec_path, dict_path, _train_path, dev_path) = write_good_inputs(dir);
    match fixture.kind {
        Kind::Vec => xling()
            .args(["align", "--method", "mse"])
            .arg("--src-emb")
            .arg(bad_path)
            .arg("--tgt-emb")
            .arg(&vec_path)
            .arg("--dict")
            .arg(&dict_path)
            .arg("--out")
            .arg(dir.join("out.map"))
            .output()
            .unwrap(),
        Kind::Dict => xling()
            .args(["align", "--method", "mse"])
            .arg("--src-emb")
            .arg(&vec_path)
            .arg("--tgt-emb")
            .arg(&vec_path)
            .arg("--dict")
            .arg(bad_path)
            .arg("--out")
            .arg(dir.join("out.map"))
            .output()
            .unwrap(),
        Kind::Dataset => xling()
            .args(["train", "--classifier", "mean_baseline", "--epochs", "1"])
            .arg("--dataset")
            .arg(bad_path)
            .arg("--dev")
            .arg(&dev_path)
            .arg("--emb")
            .arg(&vec_path)
            .arg("--model-out")
            .arg(dir.join("m.clf"))
            .output()
            .unwrap(),
    }
}

#[test]
fn acceptance_12_format_robustness() {
    assert!(CORPUS.len() >= 20, "corpus has only {} fixtures", CORPUS.len());
    for fixture in CORPUS {
        let dir = tempfile::tempdir().unwrap();
        let bad_path = dir.path().join(fixture.name);
        fs::write(&bad_path, fixture.content).unwrap();
        let output = exercise(dir.path(), fixture, &bad_path);
        let stderr = String::from_utf8_lossy(&output.stderr);
        assert_eq!(
            output.status.code(),
            Some(2),
            "{}: expected exit 2, got {:?}\nstderr: {stderr}",
            fixture.name,
            output.status.code()
        );
        if let Some(marker) = fixture.diagnostic {
            assert!(
                stderr.contains(marker),
                "{}: diagnostic {marker:?} missing from stderr: {stderr}",
                fixture.name
            );
        }
    }
    println!(
        "ACCEPTANCE 12 pass: {} malformed fixtures all exit 2 with line-numbered diagnostics",
        CORPUS.len()
    );
}

#[test]
fn acceptance_12_exit_code_contract_edges() {
    // Usage errors exit 1, numerical failures exit 3; checked here so the
    // whole contract is visible in one suite.
    let dir = tempfile::tempdir().unwrap();
    let (vec_path, dict_path, train_path, dev_path) = write_good_inputs(dir.path());

    let usage = xling()
        .args(["align", "--method", "wizardry"])
        .arg("--src-emb")
        .arg(&vec_path)
        .arg("--tgt-emb")
        .arg(&vec_path)
        .arg("--dict")
        .arg(&dict_path)
        .arg("--out")
        .arg(dir.path().join("out.map"))
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(1));

    // Contradictory labels guarantee a confidently wrong prediction once
    // the step size explodes, which drives the loss to infinity.
    let contradictory = dir.path().join("contradictory.tsv");
    fs::write(
        &contradictory,
        "positive\talpha\nnegative\talpha\npositive\tbeta\nnegative\tbeta\n",
    )
    .unwrap();
    let _ = &train_path;
    let numeric = xling()
        .args([
            "train",
            "--classifier",
            "mean_baseline",
            "--epochs",
            "4",
            "--lr",
            "1e18",
        ])
        .arg("--dataset")
        .arg(&contradictory)
        .arg("--dev")
        .arg(&dev_path)
        .arg("--emb")
        .arg(&vec_path)
        .arg("--model-out")
        .arg(dir.path().join("m.clf"))
        .output()
        .unwrap();
    assert_eq!(
        numeric.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&numeric.stderr)
    );
    println!("ACCEPTANCE 12 pass: usage errors exit 1 and numerical failures exit 3");
}
