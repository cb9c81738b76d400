//! Preference scores, decision outcomes and cognitive-style classes.
//!
//! Every participant rates a favorable and an unfavorable level of four job
//! attributes on a six-point scale and assigns each attribute a weight. The
//! per-attribute score is `(plus - minus) * weight`; an offer's composite score
//! is the signed sum of those over the offer's attribute pattern. The
//! choice-induced shift is the change in the chosen offer's composite score
//! between the pre- and post-decision questionnaires.
//!
//! Everything here is pure and allocation-light.

use std::collections::BTreeMap;
use std::fmt;

use schemars::gen::SchemaGenerator;
use schemars::schema::{InstanceType, Schema, SchemaObject};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four scored job attributes. Filler items are never attributes.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Commute,
    Vacation,
    Office,
    Salary,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Commute,
        Attribute::Vacation,
        Attribute::Office,
        Attribute::Salary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Commute => "commute",
            Attribute::Vacation => "vacation",
            Attribute::Office => "office",
            Attribute::Salary => "salary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::validation("attribute", format!("unknown attribute {s:?}")))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Desirability rating on the six-point scale {-5, -3, -1, 1, 3, 5}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct PreferenceValue(i8);

impl PreferenceValue {
    pub const SCALE: [i32; 6] = [-5, -3, -1, 1, 3, 5];

    pub fn new(value: i32) -> Result<Self> {
        Self::checked(value, "preference value")
    }

    /// Like [`PreferenceValue::new`], naming `field` in the error.
    pub fn checked(value: i32, field: &str) -> Result<Self> {
        if Self::SCALE.contains(&value) {
            Ok(PreferenceValue(value as i8))
        } else {
            Err(Error::validation(
                field,
                format!("{value} is not on the scale {{-5, -3, -1, 1, 3, 5}}"),
            ))
        }
    }

    pub fn get(self) -> i32 {
        self.0 as i32
    }
}

impl TryFrom<i32> for PreferenceValue {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PreferenceValue> for i32 {
    fn from(v: PreferenceValue) -> i32 {
        v.get()
    }
}

impl JsonSchema for PreferenceValue {
    fn schema_name() -> String {
        "PreferenceValue".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        SchemaObject {
            instance_type: Some(InstanceType::Integer.into()),
            enum_values: Some(Self::SCALE.iter().map(|&v| v.into()).collect()),
            ..Default::default()
        }
        .into()
    }
}

/// Relative importance of an attribute, 1..=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct AttributeWeight(u8);

impl AttributeWeight {
    pub const MIN: i32 = 1;
    pub const MAX: i32 = 8;

    pub fn new(value: i32) -> Result<Self> {
        Self::checked(value, "weight")
    }

    pub fn checked(value: i32, field: &str) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(AttributeWeight(value as u8))
        } else {
            Err(Error::validation(field, format!("{value} is outside 1..=8")))
        }
    }

    pub fn get(self) -> i32 {
        self.0 as i32
    }
}

impl TryFrom<i32> for AttributeWeight {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AttributeWeight> for i32 {
    fn from(v: AttributeWeight) -> i32 {
        v.get()
    }
}

impl JsonSchema for AttributeWeight {
    fn schema_name() -> String {
        "AttributeWeight".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        let mut obj = SchemaObject {
            instance_type: Some(InstanceType::Integer.into()),
            ..Default::default()
        };
        obj.number().minimum = Some(Self::MIN as f64);
        obj.number().maximum = Some(Self::MAX as f64);
        obj.into()
    }
}

/// Ratings of the favorable (`plus`) and unfavorable (`minus`) level of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AttributeResponse {
    pub plus: PreferenceValue,
    pub minus: PreferenceValue,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All scored responses and weights from one questionnaire administration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(try_from = "RawSnapshot")]
pub struct PreferenceSnapshot {
    pub phase: Phase,
    pub responses: BTreeMap<Attribute, AttributeResponse>,
    pub weights: BTreeMap<Attribute, AttributeWeight>,
    /// Filler answers, kept verbatim and never scored.
    #[serde(default)]
    pub filler_responses: BTreeMap<String, PreferenceValue>,
}

#[derive(Deserialize)]
struct RawSnapshot {
    phase: Phase,
    responses: BTreeMap<Attribute, AttributeResponse>,
    weights: BTreeMap<Attribute, AttributeWeight>,
    #[serde(default)]
    filler_responses: BTreeMap<String, PreferenceValue>,
}

impl TryFrom<RawSnapshot> for PreferenceSnapshot {
    type Error = Error;
    fn try_from(raw: RawSnapshot) -> Result<Self> {
        PreferenceSnapshot::new(raw.phase, raw.responses, raw.weights, raw.filler_responses)
    }
}

impl PreferenceSnapshot {
    pub fn new(
        phase: Phase,
        responses: BTreeMap<Attribute, AttributeResponse>,
        weights: BTreeMap<Attribute, AttributeWeight>,
        filler_responses: BTreeMap<String, PreferenceValue>,
    ) -> Result<Self> {
        for attr in Attribute::ALL {
            if !responses.contains_key(&attr) {
                return Err(Error::validation(
                    format!("responses.{attr}"),
                    "missing attribute response",
                ));
            }
            if !weights.contains_key(&attr) {
                return Err(Error::validation(format!("weights.{attr}"), "missing weight"));
            }
        }
        Ok(PreferenceSnapshot {
            phase,
            responses,
            weights,
            filler_responses,
        })
    }

    /// Builds a snapshot from plain integers ordered as [`Attribute::ALL`]:
    /// `(plus, minus, weight)` per attribute.
    pub fn from_values(phase: Phase, values: [(i32, i32, i32); 4]) -> Result<Self> {
        let mut responses = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for (attr, (plus, minus, w)) in Attribute::ALL.into_iter().zip(values) {
            responses.insert(
                attr,
                AttributeResponse {
                    plus: PreferenceValue::checked(plus, &format!("{attr}.plus"))?,
                    minus: PreferenceValue::checked(minus, &format!("{attr}.minus"))?,
                },
            );
            weights.insert(attr, AttributeWeight::checked(w, &format!("{attr}.weight"))?);
        }
        PreferenceSnapshot::new(phase, responses, weights, BTreeMap::new())
    }

    pub fn rho(&self, attribute: Attribute) -> Result<RhoScore> {
        let resp = self.responses.get(&attribute).ok_or_else(|| {
            Error::validation(format!("responses.{attribute}"), "missing attribute response")
        })?;
        let weight = self
            .weights
            .get(&attribute)
            .ok_or_else(|| Error::validation(format!("weights.{attribute}"), "missing weight"))?;
        Ok(RhoScore {
            attribute,
            value: compute_rho(resp.plus, resp.minus, *weight),
        })
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
pub enum Offer {
    A,
    B,
}

impl Offer {
    pub fn other(self) -> Offer {
        match self {
            Offer::A => Offer::B,
            Offer::B => Offer::A,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Offer::A),
            "B" | "b" => Ok(Offer::B),
            other => Err(Error::validation("offer", format!("{other:?} is not A or B"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Offer::A => "A",
            Offer::B => "B",
        }
    }
}

impl fmt::Display for Offer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an offer carries the favorable (+1) or unfavorable (-1) level of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl TryFrom<i32> for Sign {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(Error::validation("sign", format!("{v} is not +1 or -1"))),
        }
    }
}

impl From<Sign> for i32 {
    fn from(s: Sign) -> i32 {
        s.factor()
    }
}

impl JsonSchema for Sign {
    fn schema_name() -> String {
        "Sign".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        SchemaObject {
            instance_type: Some(InstanceType::Integer.into()),
            enum_values: Some(vec![1.into(), (-1).into()]),
            ..Default::default()
        }
        .into()
    }
}

pub type SignPattern = BTreeMap<Attribute, Sign>;

/// The two offers' attribute patterns plus which offer received the favorable
/// location description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(try_from = "RawOfferConfiguration")]
pub struct OfferConfiguration {
    pub offer_a_signs: SignPattern,
    pub offer_b_signs: SignPattern,
    pub loc_plus: Offer,
}

#[derive(Deserialize)]
struct RawOfferConfiguration {
    offer_a_signs: SignPattern,
    offer_b_signs: SignPattern,
    loc_plus: Offer,
}

impl TryFrom<RawOfferConfiguration> for OfferConfiguration {
    type Error = Error;
    fn try_from(raw: RawOfferConfiguration) -> Result<Self> {
        let expected = OfferConfiguration::new(raw.loc_plus);
        if raw.offer_a_signs != expected.offer_a_signs {
            return Err(Error::validation(
                "offer_a_signs",
                "offer A must be {commute:+1, vacation:+1, office:-1, salary:-1}",
            ));
        }
        if raw.offer_b_signs != expected.offer_b_signs {
            return Err(Error::validation(
                "offer_b_signs",
                "offer B must be the negation of offer A",
            ));
        }
        Ok(expected)
    }
}

impl OfferConfiguration {
    pub fn offer_a_pattern() -> SignPattern {
        BTreeMap::from([
            (Attribute::Commute, Sign::Plus),
            (Attribute::Vacation, Sign::Plus),
            (Attribute::Office, Sign::Minus),
            (Attribute::Salary, Sign::Minus),
        ])
    }

    pub fn new(loc_plus: Offer) -> Self {
        let a = Self::offer_a_pattern();
        let b = a.iter().map(|(&k, &s)| (k, s.flip())).collect();
        OfferConfiguration {
            offer_a_signs: a,
            offer_b_signs: b,
            loc_plus,
        }
    }

    pub fn signs(&self, offer: Offer) -> &SignPattern {
        match offer {
            Offer::A => &self.offer_a_signs,
            Offer::B => &self.offer_b_signs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct RhoScore {
    pub attribute: Attribute,
    pub value: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct PsiScore {
    pub offer: Option<Offer>,
    pub value: i32,
}

/// The four decision-making styles: direction of the choice-induced shift
/// crossed with whether the choice followed the favorable location.
///
/// Index order (used by every probability vector in this crate) follows the
/// declaration order below.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
pub enum CognitiveStyleClass {
    DownCisDownInf,
    DownCisUpInf,
    UpCisDownInf,
    UpCisUpInf,
}

impl CognitiveStyleClass {
    pub const ALL: [CognitiveStyleClass; 4] = [
        CognitiveStyleClass::DownCisDownInf,
        CognitiveStyleClass::DownCisUpInf,
        CognitiveStyleClass::UpCisDownInf,
        CognitiveStyleClass::UpCisUpInf,
    ];

    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CognitiveStyleClass::DownCisDownInf => "DownCisDownInf",
            CognitiveStyleClass::DownCisUpInf => "DownCisUpInf",
            CognitiveStyleClass::UpCisDownInf => "UpCisDownInf",
            CognitiveStyleClass::UpCisUpInf => "UpCisUpInf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::validation("class", format!("unknown class {s:?}")))
    }

    pub fn cis_up(self) -> bool {
        matches!(
            self,
            CognitiveStyleClass::UpCisDownInf | CognitiveStyleClass::UpCisUpInf
        )
    }

    pub fn influenced(self) -> bool {
        matches!(
            self,
            CognitiveStyleClass::DownCisUpInf | CognitiveStyleClass::UpCisUpInf
        )
    }

    pub fn from_parts(cis_up: bool, influenced: bool) -> Self {
        match (cis_up, influenced) {
            (false, false) => CognitiveStyleClass::DownCisDownInf,
            (false, true) => CognitiveStyleClass::DownCisUpInf,
            (true, false) => CognitiveStyleClass::UpCisDownInf,
            (true, true) => CognitiveStyleClass::UpCisUpInf,
        }
    }
}

impl fmt::Display for CognitiveStyleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct DecisionOutcome {
    pub choice: Offer,
    pub cis: i32,
    pub inf: bool,
    pub style: CognitiveStyleClass,
}

impl DecisionOutcome {
    pub const CIS_BOUND: i32 = 640;
}

/// Linear rescaling applied to CIS when reporting. The raw integer is always
/// what classification uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CisScale(f64);

impl CisScale {
    pub fn new(factor: f64) -> Result<Self> {
        if factor.is_finite() && factor > 0.0 {
            Ok(CisScale(factor))
        } else {
            Err(Error::validation("cis_scale", "must be finite and positive"))
        }
    }

    pub fn factor(self) -> f64 {
        self.0
    }

    pub fn apply(self, cis: i32) -> f64 {
        cis as f64 * self.0
    }
}

impl Default for CisScale {
    fn default() -> Self {
        CisScale(1.0)
    }
}

pub fn compute_rho(plus: PreferenceValue, minus: PreferenceValue, weight: AttributeWeight) -> i32 {
    (plus.get() - minus.get()) * weight.get()
}

/// Validating variant of [`compute_rho`] for raw integers.
pub fn compute_rho_checked(plus: i32, minus: i32, weight: i32) -> Result<i32> {
    Ok(compute_rho(
        PreferenceValue::checked(plus, "plus")?,
        PreferenceValue::checked(minus, "minus")?,
        AttributeWeight::checked(weight, "weight")?,
    ))
}

pub fn compute_psi(snapshot: &PreferenceSnapshot, signs: &SignPattern) -> Result<PsiScore> {
    let mut total = 0;
    for attr in Attribute::ALL {
        let sign = signs
            .get(&attr)
            .ok_or_else(|| Error::validation(format!("signs.{attr}"), "missing attribute sign"))?;
        total += sign.factor() * snapshot.rho(attr)?.value;
    }
    Ok(PsiScore {
        offer: None,
        value: total,
    })
}

/// Composite score of one offer under a configuration.
pub fn offer_psi(
    snapshot: &PreferenceSnapshot,
    config: &OfferConfiguration,
    offer: Offer,
) -> Result<PsiScore> {
    let mut psi = compute_psi(snapshot, config.signs(offer))?;
    psi.offer = Some(offer);
    Ok(psi)
}

pub fn compute_cis(
    pre: &PreferenceSnapshot,
    post: &PreferenceSnapshot,
    choice: Offer,
    config: &OfferConfiguration,
) -> Result<i32> {
    if pre.phase != Phase::Pre {
        return Err(Error::validation("pre.phase", "expected pre-decision snapshot"));
    }
    if post.phase != Phase::Post {
        return Err(Error::validation("post.phase", "expected post-decision snapshot"));
    }
    let signs = config.signs(choice);
    Ok(compute_psi(post, signs)?.value - compute_psi(pre, signs)?.value)
}

pub fn compute_inf(choice: Offer, config: &OfferConfiguration) -> bool {
    choice == config.loc_plus
}

/// A zero shift counts as upward.
pub fn classify_style(cis: i32, inf: bool) -> CognitiveStyleClass {
    CognitiveStyleClass::from_parts(cis >= 0, inf)
}

pub fn compute_outcome(
    pre: &PreferenceSnapshot,
    post: &PreferenceSnapshot,
    choice: Offer,
    config: &OfferConfiguration,
) -> Result<DecisionOutcome> {
    let cis = compute_cis(pre, post, choice, config)?;
    let inf = compute_inf(choice, config);
    Ok(DecisionOutcome {
        choice,
        cis,
        inf,
        style: classify_style(cis, inf),
    })
}
