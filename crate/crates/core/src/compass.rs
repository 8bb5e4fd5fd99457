//! Statement bank, agreement scale and compass scoring.
//!
//! A questionnaire of 62 propositions is answered on a four-level scale with
//! no neutral option. Each proposition belongs to one of two axes and carries
//! a direction and a weight. Per axis, the score is the weighted mean of
//! `direction * value` rescaled to `[-10, 10]`. Unanswered propositions are
//! dropped from both the numerator and the denominator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of propositions in a complete bank.
pub const STATEMENT_COUNT: u32 = 62;

/// Magnitude of the largest attainable axis score.
pub const SCALE_CAP: f64 = 10.0;

const DEFAULT_BANK_JSON: &str = include_str!("../data/statements.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Axis {
    Economic,
    Social,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::Economic, Axis::Social];

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ECONOMIC" => Some(Axis::Economic),
            "SOCIAL" => Some(Axis::Social),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Axis::Economic => "ECONOMIC",
            Axis::Social => "SOCIAL",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Sign by which agreement moves an axis score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Direction::Positive => 1,
            Direction::Negative => -1,
        }
    }

    fn from_int(v: i64) -> Option<Self> {
        match v {
            1 => Some(Direction::Positive),
            -1 => Some(Direction::Negative),
            _ => None,
        }
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Direction::from_int(v).ok_or_else(|| serde::de::Error::custom(format!("direction must be -1 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: u32,
    pub text: String,
    pub axis: Axis,
    pub direction: Direction,
    pub weight: f64,
    pub page: u8,
}

/// Four-level answer scale. There is deliberately no midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgreementLevel {
    StrongDisagree,
    Disagree,
    Agree,
    StrongAgree,
}

impl AgreementLevel {
    pub const ALL: [AgreementLevel; 4] =
        [AgreementLevel::StrongDisagree, AgreementLevel::Disagree, AgreementLevel::Agree, AgreementLevel::StrongAgree];

    /// Signed numeric surrogate: -2, -1, +1, +2.
    pub fn value(self) -> i8 {
        match self {
            AgreementLevel::StrongDisagree => -2,
            AgreementLevel::Disagree => -1,
            AgreementLevel::Agree => 1,
            AgreementLevel::StrongAgree => 2,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -2 => Some(AgreementLevel::StrongDisagree),
            -1 => Some(AgreementLevel::Disagree),
            1 => Some(AgreementLevel::Agree),
            2 => Some(AgreementLevel::StrongAgree),
            _ => None,
        }
    }

    /// Mirror across the (absent) midpoint: SA <-> SD, A <-> D.
    pub fn flip(self) -> Self {
        match self {
            AgreementLevel::StrongDisagree => AgreementLevel::StrongAgree,
            AgreementLevel::Disagree => AgreementLevel::Agree,
            AgreementLevel::Agree => AgreementLevel::Disagree,
            AgreementLevel::StrongAgree => AgreementLevel::StrongDisagree,
        }
    }

    pub fn is_strong(self) -> bool {
        matches!(self, AgreementLevel::StrongAgree | AgreementLevel::StrongDisagree)
    }

    /// Builds a level from a side (agree or not) and a strength flag.
    pub fn from_side(agree: bool, strong: bool) -> Self {
        match (agree, strong) {
            (true, true) => AgreementLevel::StrongAgree,
            (true, false) => AgreementLevel::Agree,
            (false, false) => AgreementLevel::Disagree,
            (false, true) => AgreementLevel::StrongDisagree,
        }
    }
}

pub fn agreement_value(level: AgreementLevel) -> i8 {
    level.value()
}

#[derive(Debug, Error, PartialEq)]
pub enum BankError {
    #[error("failed to read statement bank {path}: {message}")]
    Io { path: String, message: String },
    #[error("statement bank is not valid JSON: {0}")]
    Parse(String),
    #[error("statement id {0} is missing")]
    MissingId(u32),
    #[error("statement id {0} appears more than once")]
    DuplicateId(u32),
    #[error("statement id {0} is outside 1..=62")]
    IdOutOfRange(i64),
    #[error("statement {id}: unknown axis tag {tag:?}")]
    BadAxisTag { id: i64, tag: String },
    #[error("statement {id}: direction must be -1 or 1, got {value}")]
    BadDirection { id: i64, value: i64 },
    #[error("statement {id}: weight must be positive, got {weight}")]
    NonPositiveWeight { id: i64, weight: f64 },
    #[error("statement {id}: page must be in 1..=6, got {page}")]
    BadPage { id: i64, page: i64 },
    #[error("statement {0}: text is empty")]
    EmptyText(i64),
}

/// One record of the bank file. Kept loose so each validation failure can
/// name the offending record instead of surfacing a generic serde error.
#[derive(Debug, Deserialize)]
struct RawStatement {
    id: i64,
    #[serde(default)]
    text: Option<String>,
    axis: String,
    direction: i64,
    weight: f64,
    #[serde(default)]
    page: Option<i64>,
    #[serde(default)]
    source: Option<String>,
}

struct ValidRecord {
    id: u32,
    text: Option<String>,
    axis: Axis,
    direction: Direction,
    weight: f64,
    page: u8,
    source: Option<String>,
}

fn validate_record(raw: RawStatement, require_text: bool) -> Result<ValidRecord, BankError> {
    if raw.id < 1 || raw.id > STATEMENT_COUNT as i64 {
        return Err(BankError::IdOutOfRange(raw.id));
    }
    let axis = Axis::from_tag(&raw.axis).ok_or_else(|| BankError::BadAxisTag { id: raw.id, tag: raw.axis.clone() })?;
    let direction =
        Direction::from_int(raw.direction).ok_or(BankError::BadDirection { id: raw.id, value: raw.direction })?;
    if raw.weight <= 0.0 || !raw.weight.is_finite() {
        return Err(BankError::NonPositiveWeight { id: raw.id, weight: raw.weight });
    }
    let page = match raw.page {
        Some(p) if (1..=6).contains(&p) => p as u8,
        Some(p) => return Err(BankError::BadPage { id: raw.id, page: p }),
        None if require_text => return Err(BankError::BadPage { id: raw.id, page: 0 }),
        None => 0,
    };
    let text = match raw.text {
        Some(t) if t.trim().is_empty() => return Err(BankError::EmptyText(raw.id)),
        Some(t) => Some(t),
        None if require_text => return Err(BankError::EmptyText(raw.id)),
        None => None,
    };
    Ok(ValidRecord { id: raw.id as u32, text, axis, direction, weight: raw.weight, page, source: raw.source })
}

/// Validates a set of records and returns them keyed by id, checking that
/// ids cover exactly 1..=62.
fn validate_records(json: &str, require_text: bool) -> Result<BTreeMap<u32, ValidRecord>, BankError> {
    let raw: Vec<RawStatement> = serde_json::from_str(json).map_err(|e| BankError::Parse(e.to_string()))?;
    let mut by_id = BTreeMap::new();
    for r in raw {
        let rec = validate_record(r, require_text)?;
        let id = rec.id;
        if by_id.insert(id, rec).is_some() {
            return Err(BankError::DuplicateId(id));
        }
    }
    if let Some(missing) = (1..=STATEMENT_COUNT).find(|id| !by_id.contains_key(id)) {
        return Err(BankError::MissingId(missing));
    }
    Ok(by_id)
}

fn read_file(path: &Path) -> Result<String, BankError> {
    std::fs::read_to_string(path)
        .map_err(|e| BankError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// A validated set of 62 statements, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct StatementBank {
    statements: Vec<Statement>,
    source: Option<String>,
}

impl StatementBank {
    /// The bundled bank. Axis assignments, directions and weights are an
    /// editable surrogate, not the proprietary questionnaire key.
    pub fn default_bank() -> Self {
        Self::from_json(DEFAULT_BANK_JSON).expect("bundled statement bank is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, BankError> {
        let records = validate_records(json, true)?;
        let source = records.values().find_map(|r| r.source.clone());
        let statements = records
            .into_values()
            .map(|r| Statement {
                id: r.id,
                text: r.text.expect("text required"),
                axis: r.axis,
                direction: r.direction,
                weight: r.weight,
                page: r.page,
            })
            .collect();
        Ok(StatementBank { statements, source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        Self::from_json(&read_file(path.as_ref())?)
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn get(&self, id: u32) -> Option<&Statement> {
        self.statements.get(id.checked_sub(1)? as usize).filter(|s| s.id == id)
    }

    /// Paraphrase banks carry a `source` field naming where the wording came from.
    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            statement: &'a Statement,
            #[serde(skip_serializing_if = "Option::is_none")]
            source: Option<&'a str>,
        }
        let rows: Vec<String> = self
            .statements
            .iter()
            .map(|s| {
                serde_json::to_string(&Out { statement: s, source: self.source.as_deref() }).expect("serializable")
            })
            .collect();
        format!("[\n  {}\n]\n", rows.join(",\n  "))
    }
}

pub fn load_statement_bank(path: impl AsRef<Path>) -> Result<StatementBank, BankError> {
    StatementBank::load(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringEntry {
    pub axis: Axis,
    pub direction: Direction,
    pub weight: f64,
}

/// Maps statement ids to their axis, direction and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringTable {
    entries: BTreeMap<u32, ScoringEntry>,
}

impl ScoringTable {
    /// Builds a table from arbitrary entries. Full 1..=62 coverage is only
    /// enforced for tables read from files or banks.
    pub fn new(entries: BTreeMap<u32, ScoringEntry>) -> Self {
        ScoringTable { entries }
    }

    pub fn from_bank(bank: &StatementBank) -> Self {
        let entries = bank
            .statements()
            .iter()
            .map(|s| (s.id, ScoringEntry { axis: s.axis, direction: s.direction, weight: s.weight }))
            .collect();
        ScoringTable { entries }
    }

    /// Reads a scoring override file: the bank format with `text` optional.
    pub fn from_json(json: &str) -> Result<Self, BankError> {
        let records = validate_records(json, false)?;
        let entries = records
            .into_iter()
            .map(|(id, r)| (id, ScoringEntry { axis: r.axis, direction: r.direction, weight: r.weight }))
            .collect();
        Ok(ScoringTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        Self::from_json(&read_file(path.as_ref())?)
    }

    pub fn entries(&self) -> &BTreeMap<u32, ScoringEntry> {
        &self.entries
    }

    pub fn get(&self, id: u32) -> Option<&ScoringEntry> {
        self.entries.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn scale_cap(&self) -> f64 {
        SCALE_CAP
    }

    pub fn axis_ids(&self, axis: Axis) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().filter(move |(_, e)| e.axis == axis).map(|(id, _)| *id)
    }
}

/// A point on the two-axis compass. Negative social is libertarian,
/// negative economic is left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompassPoint {
    pub social: f64,
    pub economic: f64,
}

impl CompassPoint {
    pub const ORIGIN: CompassPoint = CompassPoint { social: 0.0, economic: 0.0 };

    pub fn new(social: f64, economic: f64) -> Self {
        CompassPoint { social, economic }
    }

    pub fn axis(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Economic => self.economic,
            Axis::Social => self.social,
        }
    }

    pub fn is_in_range(&self) -> bool {
        self.social.abs() <= SCALE_CAP && self.economic.abs() <= SCALE_CAP
    }

    pub fn distance(&self, other: &CompassPoint) -> f64 {
        (self.social - other.social).hypot(self.economic - other.economic)
    }
}

/// Answers to a questionnaire. Every id of the universe it was built for is
/// either answered or unanswered, never both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnswerSheet {
    pub answers: BTreeMap<u32, AgreementLevel>,
    pub unanswered: BTreeSet<u32>,
}

impl AnswerSheet {
    /// Builds a sheet over `ids`; ids without an answer become unanswered.
    /// Answers for ids outside the universe are dropped.
    pub fn over(ids: impl IntoIterator<Item = u32>, answers: &BTreeMap<u32, AgreementLevel>) -> Self {
        let mut sheet = AnswerSheet::default();
        for id in ids {
            match answers.get(&id) {
                Some(level) => {
                    sheet.answers.insert(id, *level);
                }
                None => {
                    sheet.unanswered.insert(id);
                }
            }
        }
        sheet
    }

    /// Every id answered with the same level.
    pub fn uniform(ids: impl IntoIterator<Item = u32>, level: AgreementLevel) -> Self {
        AnswerSheet { answers: ids.into_iter().map(|id| (id, level)).collect(), unanswered: BTreeSet::new() }
    }

    pub fn flipped(&self) -> Self {
        AnswerSheet {
            answers: self.answers.iter().map(|(id, l)| (*id, l.flip())).collect(),
            unanswered: self.unanswered.clone(),
        }
    }

    pub fn get(&self, id: u32) -> Option<AgreementLevel> {
        self.answers.get(&id).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no answered statement on the {0} axis")]
    AxisUnanswerable(Axis),
    #[error("answer for statement {0} has no scoring entry")]
    UnknownStatement(u32),
}

/// Scores a single axis: `10 * sum(d*w*v) / (2 * sum(w))` over answered
/// statements of that axis.
pub fn score_axis(sheet: &AnswerSheet, table: &ScoringTable, axis: Axis) -> Result<f64, ScoreError> {
    let mut numerator = 0.0;
    let mut total_weight = 0.0;
    for (id, level) in &sheet.answers {
        let entry = table.get(*id).ok_or(ScoreError::UnknownStatement(*id))?;
        if entry.axis != axis {
            continue;
        }
        numerator += entry.direction.sign() * entry.weight * f64::from(level.value());
        total_weight += entry.weight;
    }
    if total_weight == 0.0 {
        return Err(ScoreError::AxisUnanswerable(axis));
    }
    let score = SCALE_CAP * numerator / (2.0 * total_weight);
    Ok(score.clamp(-SCALE_CAP, SCALE_CAP))
}

pub fn score_compass(sheet: &AnswerSheet, table: &ScoringTable) -> Result<CompassPoint, ScoreError> {
    let economic = score_axis(sheet, table, Axis::Economic)?;
    let social = score_axis(sheet, table, Axis::Social)?;
    Ok(CompassPoint { social, economic })
}
