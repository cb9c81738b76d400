//! Versioned protocol text: prompts, questionnaire items, offer paragraphs.
//!
//! Item scoring (which attribute level an item measures, or filler) lives in
//! the asset file next to the text, so the engine never hard-codes wording.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{Attribute, Offer, OfferConfiguration, Phase, Sign};

use super::WritingStage;

pub const DEFAULT_ASSETS_JSON: &str = include_str!("../../assets/protocol.v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Plus,
    Minus,
}

impl Level {
    pub fn sign(self) -> Sign {
        match self {
            Level::Plus => Sign::Plus,
            Level::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemScoring {
    Filler,
    Attribute { attribute: Attribute, level: Level },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub text: String,
    pub scoring: ItemScoring,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WritingPrompt {
    pub prompt: String,
    pub min_words: usize,
    pub max_words: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WritingPrompts {
    pub writing_1: WritingPrompt,
    pub writing_2: WritingPrompt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistractionTask {
    pub title: String,
    pub instructions: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationParagraphs {
    pub favorable: String,
    pub unfavorable: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelTexts {
    pub plus: String,
    pub minus: String,
}

impl LevelTexts {
    fn get(&self, sign: Sign) -> &str {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolAssets {
    pub version: String,
    pub companies: BTreeMap<Offer, String>,
    pub writing: WritingPrompts,
    pub questionnaire_background: String,
    pub pre_items: Vec<QuestionItem>,
    pub post_intro: String,
    pub post_items: Vec<QuestionItem>,
    pub weight_prompt: String,
    pub weight_labels: BTreeMap<Attribute, String>,
    pub distraction: DistractionTask,
    pub offer_background: String,
    pub location: LocationParagraphs,
    pub attribute_levels: BTreeMap<Attribute, LevelTexts>,
    pub offer_attribute_order: Vec<Attribute>,
    pub choice_prompt: String,
}

impl ProtocolAssets {
    /// The asset file compiled into the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_ASSETS_JSON).expect("built-in protocol assets are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let assets: ProtocolAssets = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("protocol assets: {e}")))?;
        assets.check()?;
        Ok(assets)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn check(&self) -> Result<()> {
        for offer in [Offer::A, Offer::B] {
            if !self.companies.contains_key(&offer) {
                return Err(Error::Config(format!("missing company name for offer {offer}")));
            }
        }
        for (name, w) in [
            ("writing_1", &self.writing.writing_1),
            ("writing_2", &self.writing.writing_2),
        ] {
            if w.min_words > w.max_words {
                return Err(Error::Config(format!("{name}: min_words > max_words")));
            }
        }
        check_items("pre_items", &self.pre_items)?;
        check_items("post_items", &self.post_items)?;
        for attr in Attribute::ALL {
            if !self.attribute_levels.contains_key(&attr) {
                return Err(Error::Config(format!("attribute_levels missing {attr}")));
            }
            if !self.weight_labels.contains_key(&attr) {
                return Err(Error::Config(format!("weight_labels missing {attr}")));
            }
        }
        let order: BTreeSet<_> = self.offer_attribute_order.iter().collect();
        if order.len() != 4 || self.offer_attribute_order.len() != 4 {
            return Err(Error::Config(
                "offer_attribute_order must list each attribute once".into(),
            ));
        }
        Ok(())
    }

    pub fn writing(&self, stage: WritingStage) -> &WritingPrompt {
        match stage {
            WritingStage::First => &self.writing.writing_1,
            WritingStage::Second => &self.writing.writing_2,
        }
    }

    pub fn items(&self, phase: Phase) -> &[QuestionItem] {
        match phase {
            Phase::Pre => &self.pre_items,
            Phase::Post => &self.post_items,
        }
    }

    pub fn company(&self, offer: Offer) -> &str {
        &self.companies[&offer]
    }

    /// Name of the company whose offer carries `level` of `attribute`.
    pub fn company_with(&self, config: &OfferConfiguration, attribute: Attribute, level: Level) -> &str {
        let offer = if config.offer_a_signs[&attribute] == level.sign() {
            Offer::A
        } else {
            Offer::B
        };
        self.company(offer)
    }

    /// Item text with company placeholders resolved for this configuration.
    pub fn render_item(&self, item: &QuestionItem, config: &OfferConfiguration) -> String {
        match item.scoring {
            ItemScoring::Attribute { attribute, level } => item
                .text
                .replace("{company}", self.company_with(config, attribute, level)),
            ItemScoring::Filler => item.text.clone(),
        }
    }

    pub fn render_offer(&self, config: &OfferConfiguration, offer: Offer) -> String {
        let company = self.company(offer);
        let location = if offer == config.loc_plus {
            &self.location.favorable
        } else {
            &self.location.unfavorable
        };
        let mut parts = vec![location.replace("{company}", company)];
        let signs = config.signs(offer);
        for attr in &self.offer_attribute_order {
            let text = self.attribute_levels[attr].get(signs[attr]);
            parts.push(text.replace("{company}", company));
        }
        parts.join(" ")
    }

    pub fn render_offer_background(&self) -> String {
        self.offer_background
            .replace("{company_a}", self.company(Offer::A))
            .replace("{company_b}", self.company(Offer::B))
    }
}

fn check_items(name: &str, items: &[QuestionItem]) -> Result<()> {
    let mut ids = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for item in items {
        if !ids.insert(item.id.as_str()) {
            return Err(Error::Config(format!("{name}: duplicate item id {:?}", item.id)));
        }
        if let ItemScoring::Attribute { attribute, level } = item.scoring {
            if !seen.insert((attribute, level as u8)) {
                return Err(Error::Config(format!(
                    "{name}: {attribute} {level:?} measured twice"
                )));
            }
        }
    }
    if seen.len() != 8 {
        return Err(Error::Config(format!(
            "{name}: every attribute needs exactly one plus and one minus item"
        )));
    }
    Ok(())
}
