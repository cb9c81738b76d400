use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cogstyle_cli::commands::{
    cmd_effects, cmd_eval, cmd_score, cmd_synth, read_outcomes, EffectsArgs, EvalArgs, ScoreArgs,
    SynthArgs,
};
use cogstyle_cli::{exit_code, EXIT_DATA, EXIT_USAGE};
use cogstyle_core::eval::synthetic_record;
use cogstyle_core::protocol::{write_ndjson, ParticipantRecord};
use cogstyle_core::CognitiveStyleClass;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn synth(dir: &Path, n: usize, seed: u64, spec: Option<PathBuf>) -> PathBuf {
    let out = dir.join(format!("synth-{n}-{seed}"));
    cmd_synth(&SynthArgs {
        n,
        seed,
        spec,
        out_dir: out.clone(),
    })
    .unwrap();
    out
}

fn eval_args(syn: &Path, out: PathBuf, seed: u64) -> EvalArgs {
    EvalArgs {
        features: vec![syn.join("features.csv")],
        outcomes: syn.join("outcomes.csv"),
        k: 5,
        seed,
        lambda: 1.0,
        reduce: None,
        combine: false,
        out_dir: out,
    }
}

#[test]
fn synth_then_score_matches_synth_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), 120, 4, None);
    let scored = dir.path().join("scored");
    let summary = cmd_score(&ScoreArgs {
        records: syn.join("records.ndjson"),
        out_dir: scored.clone(),
        cis_scale: 1.0,
    })
    .unwrap();
    assert_eq!(summary.scored, 120);
    assert_eq!(
        fs::read(syn.join("outcomes.csv")).unwrap(),
        fs::read(scored.join("outcomes.csv")).unwrap()
    );
    assert!(scored.join("manifest.json").exists());
}

#[test]
fn empty_inputs_give_header_only_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), 0, 1, None);
    assert_eq!(fs::read_to_string(syn.join("records.ndjson")).unwrap(), "");
    assert_eq!(fs::read_to_string(syn.join("features.csv")).unwrap().lines().count(), 1);

    let empty = dir.path().join("empty.ndjson");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("scored");
    cmd_score(&ScoreArgs {
        records: empty,
        out_dir: out.clone(),
        cis_scale: 1.0,
    })
    .unwrap();
    assert_eq!(
        fs::read_to_string(out.join("outcomes.csv")).unwrap(),
        "participant_id,choice,loc_plus,cis,cis_scaled,inf,class\n"
    );
}

fn record(id: &str, class: CognitiveStyleClass, seed: u64) -> ParticipantRecord {
    synthetic_record(id, class, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn unchanged_preferences_score_zero_and_scale_applies() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = record("p1", CognitiveStyleClass::UpCisUpInf, 1);
    let mut post = r.pre.clone().unwrap();
    post.phase = cogstyle_core::Phase::Post;
    post.filler_responses.clear();
    r.post = Some(post);
    let o = r.outcome.as_mut().unwrap();
    o.cis = 0;
    o.style = CognitiveStyleClass::UpCisUpInf;
    let path = dir.path().join("r.ndjson");
    write_ndjson(fs::File::create(&path).unwrap(), [&r]).unwrap();
    let out = dir.path().join("o");
    cmd_score(&ScoreArgs {
        records: path,
        out_dir: out.clone(),
        cis_scale: 0.5,
    })
    .unwrap();
    let text = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",0,0.0,true,UpCisUpInf"), "{text}");
}

#[test]
fn bad_rows_are_reported_with_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let good = record("p1", CognitiveStyleClass::DownCisDownInf, 2);
    let mut tampered = record("p2", CognitiveStyleClass::DownCisUpInf, 3);
    tampered.outcome.as_mut().unwrap().cis += 2;
    let path = dir.path().join("r.ndjson");
    let mut buf = Vec::new();
    write_ndjson(&mut buf, [&good, &tampered]).unwrap();
    buf.extend_from_slice(b"{\"participant_id\": 5}\n");
    fs::write(&path, buf).unwrap();
    let out = dir.path().join("o");
    let err = cmd_score(&ScoreArgs {
        records: path,
        out_dir: out.clone(),
        cis_scale: 1.0,
    })
    .unwrap_err();
    assert_eq!(exit_code(&err), EXIT_DATA);
    let report = fs::read_to_string(out.join("score_errors.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
    let line2 = report.lines().nth(1).unwrap();
    assert!(line2.starts_with("2,p2,") && line2.contains("integrity check failed"), "{line2}");
    assert!(report.lines().nth(2).unwrap().starts_with("3,,"));
    // the valid record is still scored
    assert_eq!(fs::read_to_string(out.join("outcomes.csv")).unwrap().lines().count(), 2);
}

#[test]
fn eval_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), 200, 9, None);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_eval(&eval_args(&syn, a.clone(), 1)).unwrap();
    cmd_eval(&eval_args(&syn, b.clone(), 1)).unwrap();
    for f in ["report.json", "report.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    cmd_eval(&eval_args(&syn, c.clone(), 2)).unwrap();
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());
}

#[test]
fn planted_signal_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    let mut text = String::from("n_features = 4\npriors = [0.25, 0.25, 0.25, 0.25]\n");
    for (i, c) in CognitiveStyleClass::ALL.iter().enumerate() {
        text += &format!("[[shifts]]\nfeature = {i}\nclass = \"{c}\"\nd = 2.0\n");
    }
    fs::write(&spec, text).unwrap();
    let syn = synth(dir.path(), 400, 5, Some(spec));
    let reports = cmd_eval(&eval_args(&syn, dir.path().join("e"), 0)).unwrap();
    assert!(reports[0].mean_auc > 0.9, "{}", reports[0].mean_auc);
    assert_eq!(reports[0].k_features, 4);
}

#[test]
fn combine_and_effects() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), 1500, 6, None);
    // split the synthetic features into two files with disjoint columns
    let text = fs::read_to_string(syn.join("features.csv")).unwrap();
    let (mut left, mut right) = (String::new(), String::new());
    for line in text.lines() {
        let cells: Vec<&str> = line.split(',').collect();
        left += &format!("{},{},{}\n", cells[0], cells[1], cells[2]);
        right += &format!("{},{}\n", cells[0], cells[3..].join(","));
    }
    fs::write(dir.path().join("left.csv"), left).unwrap();
    fs::write(dir.path().join("right.csv"), right).unwrap();
    let mut args = eval_args(&syn, dir.path().join("e"), 0);
    args.features = vec![dir.path().join("left.csv"), dir.path().join("right.csv")];
    args.combine = true;
    let reports = cmd_eval(&args).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.feature_set_name.as_str()).collect();
    assert_eq!(names, vec!["left", "right", "left+right"]);
    assert_eq!(reports[2].k_features, 8);

    let eff = cmd_effects(&EffectsArgs {
        features: args.features.clone(),
        outcomes: syn.join("outcomes.csv"),
        out_dir: dir.path().join("fx"),
    })
    .unwrap();
    // the default spec plants d = 0.8 on x1 for the first class
    assert!(eff.get("x1", CognitiveStyleClass::DownCisDownInf).unwrap() > 0.3);
    let csv = fs::read_to_string(dir.path().join("fx/effects.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), 50, 1, None);
    let mut args = eval_args(&syn, dir.path().join("e"), 0);
    args.lambda = -1.0;
    assert_eq!(exit_code(&cmd_eval(&args).unwrap_err()), EXIT_USAGE);
    args.lambda = 1.0;
    args.k = 60;
    // class too small for k is a configuration error
    assert_eq!(exit_code(&cmd_eval(&args).unwrap_err()), EXIT_USAGE);
    let labels = read_outcomes(&syn.join("outcomes.csv")).unwrap();
    assert_eq!(labels.len(), 50);
}

#[test]
fn binary_runs_and_sets_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_cogstyle");
    let ok = Command::new(bin)
        .args(["synth", "--n", "60", "--seed", "2", "--out-dir"])
        .arg(dir.path().join("s"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    let missing = Command::new(bin)
        .args(["score", "--records", "does-not-exist.ndjson", "--out-dir"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad_flag = Command::new(bin).args(["eval", "--bogus"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(2));
}
