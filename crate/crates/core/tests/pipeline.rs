//! Sessions through the engine, export, scoring audit, feature tables and
//! cross-validation, all via the public API.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogstyle_core::features::{read_csv, standardize, write_csv};
use cogstyle_core::protocol::{
    audit_record, read_ndjson, write_ndjson, ExportFilter, ProtocolAssets, ProtocolEngine,
    WritingStage,
};
use cogstyle_core::{
    cross_validate, effect_size_table, join_features, CognitiveStyleClass, Column, CvConfig,
    FeatureTable, Offer, Phase,
};

fn words(n: usize) -> String {
    (0..n).map(|i| format!("w{}", i % 17)).collect::<Vec<_>>().join(" ")
}

/// Runs one session so that it lands in `target`.
fn run_session(engine: &ProtocolEngine, target: CognitiveStyleClass, extra_words: usize) -> String {
    let state = engine.create_session(None).unwrap();
    let id = state.session_id.clone();
    engine.submit_writing(&id, WritingStage::First, &words(30 + extra_words)).unwrap();
    engine.submit_writing(&id, WritingStage::Second, &words(150 + extra_words)).unwrap();

    let answer = |phase: Phase, commute_plus: i32| -> BTreeMap<String, i32> {
        engine
            .questionnaire(&id, phase)
            .unwrap()
            .items
            .into_iter()
            .map(|(item, _)| {
                let v = if item == "commute_18" { commute_plus } else { 1 };
                (item, v)
            })
            .collect()
    };
    let weights: BTreeMap<String, i32> =
        ["commute", "vacation", "office", "salary"].iter().map(|a| (a.to_string(), 4)).collect();

    engine.submit_preferences(&id, Phase::Pre, &answer(Phase::Pre, 1), &weights).unwrap();
    engine.submit_distraction(&id, Some(9)).unwrap();
    engine.render_offers(&id).unwrap();
    engine.confirm_offers(&id).unwrap();

    let loc_plus = state.config.loc_plus;
    let choice = if target.influenced() { loc_plus } else { loc_plus.other() };
    engine.submit_choice(&id, choice.as_str()).unwrap();
    // commute is a plus attribute of offer A, so raising it moves A up and B down
    let raise = target.cis_up() == (choice == Offer::A);
    let post = answer(Phase::Post, if raise { 5 } else { -3 });
    engine.submit_preferences(&id, Phase::Post, &post, &weights).unwrap();
    let record = engine.finalize_session(&id).unwrap();
    assert_eq!(record.outcome.unwrap().style, target);
    record.participant_id
}

#[test]
fn sessions_to_cross_validation() {
    let engine = ProtocolEngine::in_memory(ProtocolAssets::builtin(), Some(21));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut truth = BTreeMap::new();
    for i in 0..60 {
        let class = CognitiveStyleClass::ALL[i % 4];
        let id = run_session(&engine, class, rng.gen_range(0..40));
        truth.insert(id, class);
    }
    // one abandoned session is exported only without the filter
    engine.create_session(None).unwrap();
    assert_eq!(engine.export_records(ExportFilter { complete_only: false }).len(), 61);

    let records = engine.export_records(ExportFilter { complete_only: true });
    let mut buf = Vec::new();
    write_ndjson(&mut buf, &records).unwrap();
    let reread: Vec<_> = read_ndjson(buf.as_slice())
        .unwrap()
        .into_iter()
        .map(|(_, r)| r.unwrap())
        .collect();
    assert_eq!(reread, records);

    let mut labels = BTreeMap::new();
    for r in &reread {
        let outcome = audit_record(r).unwrap();
        assert_eq!(truth[&r.participant_id], outcome.style);
        labels.insert(r.participant_id.clone(), outcome.style);
    }

    // a class-dependent feature and an essay-length feature in separate tables
    let signal = FeatureTable::from_rows(
        vec![Column::new("signal", "test")],
        labels.iter().map(|(id, c)| {
            let v = 3.0 * c.index() as f64 + rng.gen_range(-0.5..0.5);
            (id.clone(), vec![v])
        }),
    )
    .unwrap();
    let length = FeatureTable::from_rows(
        vec![Column::new("essay_words", "test")],
        reread.iter().map(|r| (r.participant_id.clone(), vec![r.essay().split_whitespace().count() as f64])),
    )
    .unwrap();

    let mut csv = Vec::new();
    write_csv(&mut csv, &length).unwrap();
    let length = read_csv(csv.as_slice(), "roundtrip").unwrap();
    let joined = join_features(&[signal, length]).unwrap();
    assert_eq!(joined.width(), 2);
    assert_eq!(joined.len(), 60);

    let ids: Vec<&str> = joined.ids().collect();
    let z = standardize(&joined, &ids).unwrap();
    let mean: f64 = z.column_values("signal").unwrap().iter().sum::<f64>() / 60.0;
    assert!(mean.abs() < 1e-12);

    let report = cross_validate(&joined, &labels, &CvConfig::new("joined")).unwrap();
    assert!(report.mean_auc > 0.95, "{}", report.mean_auc);
    assert_eq!(report.per_fold_auc.len(), 5);
    assert_eq!(report.confusion.iter().flatten().sum::<u64>(), 60);

    let fx = effect_size_table(&joined, &labels).unwrap();
    assert!(fx.get("signal", CognitiveStyleClass::UpCisUpInf).unwrap() > 1.0);
    assert!(fx.get("signal", CognitiveStyleClass::DownCisDownInf).unwrap() < -1.0);
}
