mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use linkpred::pipeline::{run_pipeline, run_stage, run_stages, Stage, StageManifest, DONE_MARKER, RESULTS_FILE};
use linkpred::Error;

/// Every file under `root` keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn result_lines(out: &Path) -> Vec<String> {
    fs::read_to_string(out.join(RESULTS_FILE)).unwrap().lines().map(String::from).collect()
}

#[test]
fn minimal_run_produces_test_and_unseen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::pipeline_fixture(dir.path(), 2, 400, "seed = 3\ndatasets = [\"baseline\"]\nmodels = [\"logreg\"]\n");
    let results = run_pipeline(&cfg).unwrap();
    let lines = result_lines(&cfg.output);
    assert_eq!(results, cfg.output);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("baseline,test,logreg,"));
    assert!(lines[2].starts_with("baseline,unseen,logreg,"));
    let auroc: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(auroc > 0.7, "{auroc}");
    assert!(cfg.output.join(DONE_MARKER).exists());
    for stage in Stage::ALL {
        let text = fs::read_to_string(cfg.output.join(stage.as_str()).join("manifest.json")).unwrap();
        let m: StageManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(m.stage, stage);
        assert_eq!(m.config_hash, cfg.hash());
        assert_eq!(m.seed, linkpred::pipeline::stage_seed(cfg.seed, stage));
        for f in &m.files {
            assert!(cfg.output.join(f).exists(), "{f}");
        }
    }
}

#[test]
fn full_grid_is_reproducible_and_composable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::pipeline_fixture(dir.path(), 2, 400, "seed = 11\n");
    cfg.output = dir.path().join("a");
    run_pipeline(&cfg).unwrap();
    let lines = result_lines(&cfg.output);
    assert_eq!(lines.len(), 25);
    assert_eq!(lines[0], "dataset,partition,model,auroc,f1,accuracy,n_pos,n_neg");
    let first = snapshot(&cfg.output);

    // a second monolithic run into a fresh directory
    cfg.output = dir.path().join("b");
    run_pipeline(&cfg).unwrap();
    assert_eq!(snapshot(&cfg.output), first);

    // stage by stage
    cfg.output = dir.path().join("c");
    for stage in Stage::ALL {
        run_stage(&cfg, stage).unwrap();
    }
    let mut staged = snapshot(&cfg.output);
    assert!(!staged.contains_key(DONE_MARKER));
    staged.insert(DONE_MARKER.into(), first[DONE_MARKER].clone());
    assert_eq!(staged, first);

    // eval alone over existing artifacts reproduces the table
    fs::remove_file(cfg.output.join(RESULTS_FILE)).unwrap();
    run_stage(&cfg, Stage::Eval).unwrap();
    assert_eq!(result_lines(&cfg.output), lines);

    // embeddings are identical when recomputed
    let before: Vec<_> = first.iter().filter(|(k, _)| k.starts_with("embed")).collect();
    assert!(!before.is_empty());
    run_stage(&cfg, Stage::Embed).unwrap();
    let after = snapshot(&cfg.output);
    for (k, v) in before {
        assert_eq!(&after[k], v, "{k}");
    }
}

#[test]
fn missing_artifact_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::pipeline_fixture(dir.path(), 1, 200, "datasets = [\"baseline\"]\nmodels = [\"logreg\"]\n");
    let err = run_stage(&cfg, Stage::Train).unwrap_err();
    let Error::Stage { stage, source } = &err else { panic!("{err:?}") };
    assert_eq!(stage, "train");
    assert!(matches!(**source, Error::Dependency(_)), "{source:?}");
    assert_eq!(err.class(), linkpred::error::ErrorClass::Data);

    let err = run_stages(&cfg, &[Stage::Build, Stage::Train]).unwrap_err();
    assert!(matches!(err, Error::Stage { .. }));
    assert!(!cfg.output.join(DONE_MARKER).exists());
}

#[test]
fn failed_rerun_removes_done_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::pipeline_fixture(dir.path(), 1, 200, "datasets = [\"baseline\"]\nmodels = [\"logreg\"]\n");
    run_pipeline(&cfg).unwrap();
    assert!(cfg.output.join(DONE_MARKER).exists());
    fs::remove_dir_all(cfg.output.join("build")).unwrap();
    assert!(run_stages(&cfg, &[Stage::Train]).is_err());
    assert!(!cfg.output.join(DONE_MARKER).exists());
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::pipeline_fixture(dir.path(), 1, 200, "");
    cfg.networks[0].seen = false;
    assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
    assert!(!cfg.output.exists());
}
