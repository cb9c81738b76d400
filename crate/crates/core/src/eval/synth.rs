//! Seeded synthetic participants: Gaussian features with planted class
//! shifts, plus protocol records whose outcomes reproduce the drawn labels.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Column, FeatureTable};
use crate::protocol::{ParticipantRecord, Stage, WritingResponse, WritingStage};
use crate::scoring::{
    compute_outcome, Attribute, CognitiveStyleClass, Offer, OfferConfiguration, Phase,
    PreferenceSnapshot, Sign,
};

/// Members of `class` get `d` added to `feature` (features have unit
/// within-class variance, so `d` is in Cohen's-d units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedShift {
    pub feature: usize,
    pub class: CognitiveStyleClass,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub n_features: usize,
    #[serde(default)]
    pub shifts: Vec<PlantedShift>,
}

pub fn synthetic_id(i: usize) -> String {
    format!("s{i:06}")
}

fn check_priors(priors: &[f64; 4]) -> Result<()> {
    if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation("class_priors", "must be non-negative"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation("class_priors", format!("sum to {total}, not 1")));
    }
    Ok(())
}

/// Labels are drawn first, then features row by row, from a single ChaCha8
/// stream seeded with `seed`.
pub fn generate_synthetic(
    n: usize,
    seed: u64,
    class_priors: &[f64; 4],
    effects: &EffectSpec,
) -> Result<(FeatureTable, BTreeMap<String, CognitiveStyleClass>)> {
    check_priors(class_priors)?;
    for s in &effects.shifts {
        if s.feature >= effects.n_features {
            return Err(Error::validation(
                "effect_spec.shifts",
                format!("feature {} out of range", s.feature),
            ));
        }
        if !s.d.is_finite() {
            return Err(Error::validation("effect_spec.shifts", "non-finite shift"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(class_priors)
        .map_err(|e| Error::validation("class_priors", e.to_string()))?;
    let classes: Vec<CognitiveStyleClass> = (0..n)
        .map(|_| CognitiveStyleClass::ALL[dist.sample(&mut rng)])
        .collect();

    let mut shift = vec![vec![0.0; effects.n_features]; CognitiveStyleClass::COUNT];
    for s in &effects.shifts {
        shift[s.class.index()][s.feature] += s.d;
    }
    let columns = (1..=effects.n_features)
        .map(|j| Column::new(format!("x{j}"), "synthetic"))
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = BTreeMap::new();
    for (i, class) in classes.into_iter().enumerate() {
        let row = (0..effects.n_features)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + shift[class.index()][j]
            })
            .collect();
        rows.push((synthetic_id(i), row));
        labels.insert(synthetic_id(i), class);
    }
    let table = FeatureTable::from_rows(columns, rows)?
        .with_meta("synthetic.seed", seed.to_string())
        .with_meta("synthetic.n", n.to_string());
    Ok((table, labels))
}

const WORDS: [&str; 24] = [
    "I", "weighed", "the", "options", "for", "a", "long", "time", "and", "then", "chose",
    "what", "felt", "right", "after", "talking", "with", "friends", "about", "cost", "risk",
    "comfort", "future", "plans",
];

fn essay(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A completed record whose scored outcome has the given class.
///
/// Inf is set by choosing (or not) the location-favoured offer; CIS is set
/// by moving one attribute that carries a plus sign in the chosen offer to
/// the top (up) or bottom (down) of its range after the decision.
pub fn synthetic_record(id: &str, class: CognitiveStyleClass, rng: &mut ChaCha8Rng) -> Result<ParticipantRecord> {
    let loc_plus = if rng.gen_bool(0.5) { Offer::A } else { Offer::B };
    let config = OfferConfiguration::new(loc_plus);
    let choice = if class.influenced() { loc_plus } else { loc_plus.other() };

    let mut pre_values = [(0, 0, 1); 4];
    for v in pre_values.iter_mut() {
        *v = (
            *[-3, -1, 1, 3, 5].choose(rng).expect("non-empty"),
            *[-5, -3, -1, 1, 3, 5].choose(rng).expect("non-empty"),
            rng.gen_range(1..=8),
        );
    }
    let favoured: Vec<usize> = Attribute::ALL
        .iter()
        .enumerate()
        .filter(|(_, a)| config.signs(choice)[a] == Sign::Plus)
        .map(|(i, _)| i)
        .collect();
    let moved = *favoured.choose(rng).expect("two plus attributes per offer");
    let mut post_values = pre_values;
    let w = pre_values[moved].2;
    post_values[moved] = if class.cis_up() { (5, -5, w) } else { (-5, 5, w) };

    let pre = PreferenceSnapshot::from_values(Phase::Pre, pre_values)?;
    let post = PreferenceSnapshot::from_values(Phase::Post, post_values)?;
    let outcome = compute_outcome(&pre, &post, choice, &config)?;
    debug_assert_eq!(outcome.style, class);
    Ok(ParticipantRecord {
        participant_id: id.to_string(),
        stage: Stage::Complete,
        config,
        writings: vec![
            WritingResponse::new(WritingStage::First, essay(rng, 40)),
            WritingResponse::new(WritingStage::Second, essay(rng, 150)),
        ],
        pre: Some(pre),
        post: Some(post),
        choice: Some(choice),
        outcome: Some(outcome),
        distraction_score: Some(rng.gen_range(0..=20)),
    })
}

/// Records for every labelled participant, in id order.
pub fn synthetic_records(
    labels: &BTreeMap<String, CognitiveStyleClass>,
    seed: u64,
) -> Result<Vec<ParticipantRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5_eed0_f4ec_04d5);
    labels
        .iter()
        .map(|(id, &c)| synthetic_record(id, c, &mut rng))
        .collect()
}
