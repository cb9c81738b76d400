use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{
    compute_outcome, Attribute, AttributeResponse, AttributeWeight, Offer, OfferConfiguration,
    Phase, PreferenceSnapshot, PreferenceValue,
};

use super::assets::{ItemScoring, Level, ProtocolAssets};
use super::record::{audit_record, ParticipantRecord};
use super::store::SessionLog;
use super::{word_count, Session, SessionState, Stage, WritingResponse, WritingStage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferPresentation {
    pub background: String,
    pub company_names: BTreeMap<Offer, String>,
    pub offer_texts: BTreeMap<Offer, String>,
    /// Offer carrying the favorable location paragraph.
    pub condition: Offer,
    pub choice_prompt: String,
}

/// A questionnaire rendered for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub phase: Phase,
    pub intro: String,
    pub items: Vec<(String, String)>,
    pub weight_prompt: String,
    pub weight_labels: BTreeMap<Attribute, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub complete_only: bool,
}

/// Drives sessions through the protocol. Sessions mutate under their own
/// lock; a mutation is applied to a copy, appended to the log, then swapped in,
/// so readers only ever observe committed stages.
pub struct ProtocolEngine {
    assets: Arc<ProtocolAssets>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    log: SessionLog,
    rng: Mutex<ChaCha8Rng>,
}

impl ProtocolEngine {
    /// `seed` fixes the stream of location draws for sessions created without
    /// an explicit seed; `None` uses OS entropy.
    pub fn new(assets: ProtocolAssets, log: SessionLog, seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_entropy(),
        };
        ProtocolEngine {
            assets: Arc::new(assets),
            sessions: RwLock::new(BTreeMap::new()),
            log,
            rng: Mutex::new(rng),
        }
    }

    /// Opens a persistent engine, restoring every session found in the log.
    pub fn open(
        assets: ProtocolAssets,
        log_path: impl AsRef<std::path::Path>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let (log, sessions) = SessionLog::open(log_path)?;
        let engine = ProtocolEngine::new(assets, log, seed);
        {
            let mut map = engine.sessions.write().expect("session index poisoned");
            for s in sessions {
                map.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(engine)
    }

    pub fn in_memory(assets: ProtocolAssets, seed: Option<u64>) -> Self {
        ProtocolEngine::new(assets, SessionLog::in_memory(), seed)
    }

    pub fn assets(&self) -> &ProtocolAssets {
        &self.assets
    }

    pub fn sync(&self) -> Result<()> {
        self.log.sync()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session index poisoned").len()
    }

    fn cell(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session index poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> Result<T>) -> Result<T> {
        let cell = self.cell(id)?;
        let guard = cell.lock().expect("session poisoned");
        f(&guard)
    }

    fn mutate<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let cell = self.cell(id)?;
        let mut guard = cell.lock().expect("session poisoned");
        let mut next = guard.clone();
        let out = f(&mut next)?;
        next.updated_at = Utc::now();
        self.log.append(&next)?;
        *guard = next;
        Ok(out)
    }

    pub fn create_session(&self, seed: Option<u64>) -> Result<SessionState> {
        let loc_plus = match seed {
            Some(s) => draw_location(&mut ChaCha8Rng::seed_from_u64(s)),
            None => draw_location(&mut *self.rng.lock().expect("rng poisoned")),
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), OfferConfiguration::new(loc_plus), Utc::now());
        self.log.append(&session)?;
        let state = session.state();
        self.sessions
            .write()
            .expect("session index poisoned")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(state)
    }

    pub fn state(&self, id: &str) -> Result<SessionState> {
        self.read(id, |s| Ok(s.state()))
    }

    pub fn submit_writing(&self, id: &str, stage: WritingStage, text: &str) -> Result<SessionState> {
        let prompt = self.assets.writing(stage).clone();
        self.mutate(id, |s| {
            s.require("submit_writing", &[stage.stage()])?;
            let count = word_count(text);
            if count < prompt.min_words || count > prompt.max_words {
                return Err(Error::WordCount {
                    stage: stage.stage().to_string(),
                    count,
                    min: prompt.min_words,
                    max: prompt.max_words,
                });
            }
            s.writings.push(WritingResponse::new(stage, text));
            s.stage = match stage {
                WritingStage::First => Stage::Writing2,
                WritingStage::Second => Stage::PrePrefs,
            };
            Ok(s.state())
        })
    }

    /// Renders the questionnaire for `phase` with company names resolved.
    pub fn questionnaire(&self, id: &str, phase: Phase) -> Result<Questionnaire> {
        let a = &self.assets;
        self.read(id, |s| {
            let items = a
                .items(phase)
                .iter()
                .map(|i| (i.id.clone(), a.render_item(i, &s.config)))
                .collect();
            let intro = match phase {
                Phase::Pre => a.questionnaire_background.clone(),
                Phase::Post => a
                    .post_intro
                    .replace("{company_a}", a.company(Offer::A))
                    .replace("{company_b}", a.company(Offer::B)),
            };
            Ok(Questionnaire {
                phase,
                intro,
                items,
                weight_prompt: a.weight_prompt.clone(),
                weight_labels: a.weight_labels.clone(),
            })
        })
    }

    /// `responses` is keyed by item id, `weights` by attribute name.
    pub fn submit_preferences(
        &self,
        id: &str,
        phase: Phase,
        responses: &BTreeMap<String, i32>,
        weights: &BTreeMap<String, i32>,
    ) -> Result<SessionState> {
        let snapshot = build_snapshot(&self.assets, phase, responses, weights)?;
        self.mutate(id, |s| {
            match phase {
                Phase::Pre => {
                    s.require("submit_preferences(pre)", &[Stage::PrePrefs])?;
                    s.pre = Some(snapshot);
                    s.stage = Stage::Distraction;
                }
                Phase::Post => {
                    s.require("submit_preferences(post)", &[Stage::PostPrefs])?;
                    if s.post.is_some() {
                        return Err(Error::State {
                            operation: "submit_preferences(post)".into(),
                            actual: s.stage,
                        });
                    }
                    s.post = Some(snapshot);
                }
            }
            Ok(s.state())
        })
    }

    /// Records the distraction-task score (if any) and moves on to the offers.
    pub fn submit_distraction(&self, id: &str, score: Option<i32>) -> Result<SessionState> {
        if let Some(v) = score {
            if v < 0 {
                return Err(Error::validation("distraction_score", "must be non-negative"));
            }
        }
        self.mutate(id, |s| {
            s.require("submit_distraction", &[Stage::Distraction])?;
            s.distraction_score = score;
            s.stage = Stage::OfferView;
            Ok(s.state())
        })
    }

    /// Idempotent; available while the offers are on screen.
    pub fn render_offers(&self, id: &str) -> Result<OfferPresentation> {
        let a = &self.assets;
        self.read(id, |s| {
            s.require("render_offers", &[Stage::OfferView, Stage::Choice])?;
            Ok(OfferPresentation {
                background: a.render_offer_background(),
                company_names: a.companies.clone(),
                offer_texts: [Offer::A, Offer::B]
                    .into_iter()
                    .map(|o| (o, a.render_offer(&s.config, o)))
                    .collect(),
                condition: s.config.loc_plus,
                choice_prompt: a.choice_prompt.clone(),
            })
        })
    }

    /// Marks the offers as read; the choice can be submitted afterwards.
    pub fn confirm_offers(&self, id: &str) -> Result<SessionState> {
        self.mutate(id, |s| {
            s.require("confirm_offers", &[Stage::OfferView])?;
            s.stage = Stage::Choice;
            Ok(s.state())
        })
    }

    pub fn submit_choice(&self, id: &str, offer: &str) -> Result<SessionState> {
        self.mutate(id, |s| {
            s.require("submit_choice", &[Stage::Choice])?;
            s.choice = Some(Offer::parse(offer)?);
            s.stage = Stage::PostPrefs;
            Ok(s.state())
        })
    }

    pub fn finalize_session(&self, id: &str) -> Result<ParticipantRecord> {
        self.mutate(id, |s| {
            s.require("finalize_session", &[Stage::PostPrefs])?;
            let (Some(pre), Some(post), Some(choice)) = (&s.pre, &s.post, s.choice) else {
                return Err(Error::State {
                    operation: "finalize_session (post-decision answers missing)".into(),
                    actual: s.stage,
                });
            };
            s.outcome = Some(compute_outcome(pre, post, choice, &s.config)?);
            s.stage = Stage::Complete;
            let record = ParticipantRecord::from(&*s);
            audit_record(&record)?;
            Ok(record)
        })
    }

    pub fn record(&self, id: &str) -> Result<ParticipantRecord> {
        self.read(id, |s| Ok(ParticipantRecord::from(s)))
    }

    /// Records ordered by participant id.
    pub fn export_records(&self, filter: ExportFilter) -> Vec<ParticipantRecord> {
        let cells: Vec<_> = self
            .sessions
            .read()
            .expect("session index poisoned")
            .values()
            .cloned()
            .collect();
        cells
            .iter()
            .map(|c| ParticipantRecord::from(&*c.lock().expect("session poisoned")))
            .filter(|r| !filter.complete_only || r.is_complete())
            .collect()
    }

    /// Loads an exported record. Completed records are audited first.
    pub fn import_record(&self, record: &ParticipantRecord) -> Result<()> {
        record.validate()?;
        if record.is_complete() {
            audit_record(record)?;
        }
        let now = Utc::now();
        let session = Session {
            id: record.participant_id.clone(),
            stage: record.stage,
            config: record.config.clone(),
            created_at: now,
            updated_at: now,
            writings: record.writings.clone(),
            pre: record.pre.clone(),
            distraction_score: record.distraction_score,
            choice: record.choice,
            post: record.post.clone(),
            outcome: record.outcome,
        };
        let mut map = self.sessions.write().expect("session index poisoned");
        if map.contains_key(&session.id) {
            return Err(Error::validation(
                "participant_id",
                format!("{} already exists", session.id),
            ));
        }
        self.log.append(&session)?;
        map.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        Ok(())
    }
}

fn draw_location<R: Rng>(rng: &mut R) -> Offer {
    if rng.gen_bool(0.5) {
        Offer::A
    } else {
        Offer::B
    }
}

fn build_snapshot(
    assets: &ProtocolAssets,
    phase: Phase,
    responses: &BTreeMap<String, i32>,
    weights: &BTreeMap<String, i32>,
) -> Result<PreferenceSnapshot> {
    let items = assets.items(phase);
    for key in responses.keys() {
        if !items.iter().any(|i| &i.id == key) {
            return Err(Error::validation(key.clone(), "unknown questionnaire item"));
        }
    }
    let mut plus = BTreeMap::new();
    let mut minus = BTreeMap::new();
    let mut filler = BTreeMap::new();
    for item in items {
        let raw = *responses
            .get(&item.id)
            .ok_or_else(|| Error::validation(item.id.clone(), "missing response"))?;
        let value = PreferenceValue::checked(raw, &item.id)?;
        match item.scoring {
            ItemScoring::Filler => {
                filler.insert(item.id.clone(), value);
            }
            ItemScoring::Attribute { attribute, level: Level::Plus } => {
                plus.insert(attribute, value);
            }
            ItemScoring::Attribute { attribute, level: Level::Minus } => {
                minus.insert(attribute, value);
            }
        }
    }
    for key in weights.keys() {
        Attribute::parse(key).map_err(|_| Error::validation(format!("weights.{key}"), "unknown attribute"))?;
    }
    let mut resp = BTreeMap::new();
    let mut w = BTreeMap::new();
    for attr in Attribute::ALL {
        let field = format!("weights.{attr}");
        let raw = *weights
            .get(attr.as_str())
            .ok_or_else(|| Error::validation(field.clone(), "missing weight"))?;
        w.insert(attr, AttributeWeight::checked(raw, &field)?);
        resp.insert(
            attr,
            AttributeResponse {
                plus: plus[&attr],
                minus: minus[&attr],
            },
        );
    }
    PreferenceSnapshot::new(phase, resp, w, filler)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        vec!["word"; n].join(" ")
    }

    fn engine() -> ProtocolEngine {
        ProtocolEngine::in_memory(ProtocolAssets::builtin(), Some(7))
    }

    fn answers(phase: Phase, v: i32) -> (BTreeMap<String, i32>, BTreeMap<String, i32>) {
        let a = ProtocolAssets::builtin();
        let r = a.items(phase).iter().map(|i| (i.id.clone(), v)).collect();
        let w = Attribute::ALL.iter().map(|a| (a.to_string(), 4)).collect();
        (r, w)
    }

    fn to_post_prefs(e: &ProtocolEngine, choice: &str) -> String {
        let id = e.create_session(None).unwrap().session_id;
        e.submit_writing(&id, WritingStage::First, &words(60)).unwrap();
        e.submit_writing(&id, WritingStage::Second, &words(150)).unwrap();
        let (r, w) = answers(Phase::Pre, 3);
        e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap();
        e.submit_distraction(&id, Some(12)).unwrap();
        e.render_offers(&id).unwrap();
        e.confirm_offers(&id).unwrap();
        e.submit_choice(&id, choice).unwrap();
        id
    }

    #[test]
    fn seeded_sessions_share_configuration() {
        let e = engine();
        let a = e.create_session(Some(99)).unwrap();
        let b = e.create_session(Some(99)).unwrap();
        assert_eq!(a.config, b.config);
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(a.stage, Stage::Writing1);
    }

    #[test]
    fn writing_bounds() {
        let e = engine();
        let id = e.create_session(None).unwrap().session_id;
        let err = e.submit_writing(&id, WritingStage::First, &words(10)).unwrap_err();
        assert!(matches!(err, Error::WordCount { count: 10, .. }));
        assert_eq!(e.state(&id).unwrap().stage, Stage::Writing1);
        assert!(matches!(
            e.submit_writing(&id, WritingStage::Second, &words(150)),
            Err(Error::State { .. })
        ));
        e.submit_writing(&id, WritingStage::First, &words(20)).unwrap();
        assert_eq!(e.state(&id).unwrap().stage, Stage::Writing2);
        assert!(e.submit_writing(&id, WritingStage::Second, &words(99)).is_err());
        assert!(e.submit_writing(&id, WritingStage::Second, &words(301)).is_err());
        e.submit_writing(&id, WritingStage::Second, &words(300)).unwrap();
    }

    #[test]
    fn preference_validation() {
        let e = engine();
        let id = e.create_session(None).unwrap().session_id;
        e.submit_writing(&id, WritingStage::First, &words(60)).unwrap();
        e.submit_writing(&id, WritingStage::Second, &words(150)).unwrap();

        let (mut r, mut w) = answers(Phase::Pre, 1);
        r.insert("cubicle".into(), 0);
        let err = e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap_err();
        assert!(err.to_string().contains("cubicle"), "{err}");

        let (r, _) = answers(Phase::Pre, 1);
        w.remove("salary");
        let err = e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap_err();
        assert!(err.to_string().contains("weights.salary"), "{err}");

        let (mut r, w) = answers(Phase::Pre, 1);
        r.remove("mobility");
        assert!(e.submit_preferences(&id, Phase::Pre, &r, &w).is_err());

        let (r, mut w) = answers(Phase::Pre, 1);
        w.insert("office".into(), 9);
        assert!(e.submit_preferences(&id, Phase::Pre, &r, &w).is_err());

        let (r, w) = answers(Phase::Pre, 1);
        e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap();
        assert_eq!(e.state(&id).unwrap().stage, Stage::Distraction);
        let rec = e.record(&id).unwrap();
        assert_eq!(rec.pre.unwrap().filler_responses.len(), 3);
    }

    #[test]
    fn render_offers_follows_condition() {
        let e = engine();
        let id = to_post_prefs(&e, "A");
        // offers no longer visible once the choice is made
        assert!(e.render_offers(&id).is_err());

        let id = e.create_session(None).unwrap().session_id;
        e.submit_writing(&id, WritingStage::First, &words(60)).unwrap();
        e.submit_writing(&id, WritingStage::Second, &words(150)).unwrap();
        let (r, w) = answers(Phase::Pre, 3);
        e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap();
        assert!(e.render_offers(&id).is_err());
        e.submit_distraction(&id, None).unwrap();
        let p1 = e.render_offers(&id).unwrap();
        let p2 = e.render_offers(&id).unwrap();
        assert_eq!(
            serde_json::to_vec(&p1).unwrap(),
            serde_json::to_vec(&p2).unwrap()
        );
        let loc = e.state(&id).unwrap().config.loc_plus;
        assert_eq!(p1.condition, loc);
        assert!(p1.offer_texts[&loc].contains("located in a fun part of town"));
        assert!(p1.offer_texts[&loc.other()].contains("dull, sparsely populated industrial area"));
    }

    #[test]
    fn choice_rules() {
        let e = engine();
        let id = e.create_session(None).unwrap().session_id;
        e.submit_writing(&id, WritingStage::First, &words(60)).unwrap();
        e.submit_writing(&id, WritingStage::Second, &words(150)).unwrap();
        let (r, w) = answers(Phase::Pre, 3);
        e.submit_preferences(&id, Phase::Pre, &r, &w).unwrap();
        e.submit_distraction(&id, None).unwrap();
        assert!(matches!(e.submit_choice(&id, "A"), Err(Error::State { .. })));
        e.confirm_offers(&id).unwrap();
        assert!(matches!(e.submit_choice(&id, "C"), Err(Error::Validation { .. })));
        let st = e.submit_choice(&id, "A").unwrap();
        assert_eq!(st.stage, Stage::PostPrefs);
        assert!(matches!(e.submit_choice(&id, "B"), Err(Error::State { .. })));
    }

    #[test]
    fn finalize_computes_outcome() {
        let e = engine();
        let id = to_post_prefs(&e, "A");
        assert!(e.finalize_session(&id).is_err());
        let (r, w) = answers(Phase::Post, 3);
        e.submit_preferences(&id, Phase::Post, &r, &w).unwrap();
        assert!(e.submit_preferences(&id, Phase::Post, &r, &w).is_err());
        let rec = e.finalize_session(&id).unwrap();
        let out = rec.outcome.unwrap();
        assert_eq!(out.cis, 0);
        assert_eq!(out.inf, rec.config.loc_plus == Offer::A);
        assert_eq!(e.state(&id).unwrap().stage, Stage::Complete);
        assert!(e.finalize_session(&id).is_err());
        audit_record(&rec).unwrap();
    }

    #[test]
    fn post_phase_rejects_filler_items() {
        let e = engine();
        let id = to_post_prefs(&e, "B");
        let (mut r, w) = answers(Phase::Post, 3);
        r.insert("mobility".into(), 3);
        assert!(e.submit_preferences(&id, Phase::Post, &r, &w).is_err());
    }

    #[test]
    fn export_filters_and_orders() {
        let e = engine();
        assert!(e.export_records(ExportFilter::default()).is_empty());
        let done = to_post_prefs(&e, "A");
        let (r, w) = answers(Phase::Post, 1);
        e.submit_preferences(&done, Phase::Post, &r, &w).unwrap();
        e.finalize_session(&done).unwrap();
        e.create_session(None).unwrap();
        e.create_session(None).unwrap();
        let all = e.export_records(ExportFilter::default());
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|p| p[0].participant_id < p[1].participant_id));
        let complete = e.export_records(ExportFilter { complete_only: true });
        assert_eq!(complete.len(), 1);
        assert_eq!(complete[0].participant_id, done);
    }

    #[test]
    fn unknown_session() {
        let e = engine();
        assert!(matches!(e.state("nope"), Err(Error::UnknownSession(_))));
    }
}
