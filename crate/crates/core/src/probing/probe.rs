//! Runs a full questionnaire against a provider.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ProbeConfig, ProbeMode};
use super::mapping::{aggregate_stances, map_mask_distribution, LexiconSet, MappingError, StanceScore};
use super::prompts::{agree_hypothesis, build_decoder_prompt, build_encoder_prompt, disagree_hypothesis};
use crate::compass::{
    score_compass, AgreementLevel, AnswerSheet, CompassPoint, ScoreError, ScoringTable, Statement, StatementBank,
};
use crate::document::document;
use crate::provider::{CompletionRequest, Provider, ProviderError, TokenProb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbstainReason {
    NoLexiconHit,
    ExactTie,
    AllFiltered,
    ProviderError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapped {
    Answer(AgreementLevel),
    Abstain(AbstainReason),
}

impl Mapped {
    pub fn answer(&self) -> Option<AgreementLevel> {
        match self {
            Mapped::Answer(level) => Some(*level),
            Mapped::Abstain(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedResponse {
    pub seed: u64,
    pub text: String,
    pub stance: StanceScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    MaskFill {
        tokens: Vec<TokenProb>,
    },
    Generations {
        responses: Vec<GeneratedResponse>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        failures: Vec<SampleFailure>,
    },
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        match self {
            Evidence::MaskFill { tokens } => tokens.is_empty(),
            Evidence::Generations { responses, .. } => responses.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub statement_id: u32,
    pub mode: ProbeMode,
    pub prompt: String,
    pub evidence: Evidence,
    pub mapped: Mapped,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub format: String,
    pub model_id: String,
    pub config: ProbeConfig,
    pub records: Vec<ProbeRecord>,
    pub sheet: AnswerSheet,
    pub point: CompassPoint,
}

document!(ProbeResult, "probe-result/1");

impl ProbeResult {
    /// Recomputes the sheet from the records and the point from the sheet.
    pub fn from_records(
        model_id: String,
        config: ProbeConfig,
        records: Vec<ProbeRecord>,
        table: &ScoringTable,
    ) -> Result<Self, (ScoreError, Vec<ProbeRecord>)> {
        let sheet = sheet_from_records(&records, table);
        match score_compass(&sheet, table) {
            Ok(point) => Ok(ProbeResult { format: "probe-result/1".into(), model_id, config, records, sheet, point }),
            Err(e) => Err((e, records)),
        }
    }
}

pub fn sheet_from_records(records: &[ProbeRecord], table: &ScoringTable) -> AnswerSheet {
    let answers: BTreeMap<u32, AgreementLevel> =
        records.iter().filter_map(|r| r.mapped.answer().map(|a| (r.statement_id, a))).collect();
    AnswerSheet::over(table.ids(), &answers)
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid probe configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("statement {0} has no scoring table entry")]
    TableMismatch(u32),
    #[error("provider unavailable after {} completed statements: {source}", partial.len())]
    ProviderUnavailable { source: ProviderError, partial: Vec<ProbeRecord> },
    #[error("probe could not be scored: {source}")]
    Unscorable { source: ScoreError, records: Vec<ProbeRecord> },
}

impl ProbeError {
    /// Records gathered before the failure, in statement order.
    pub fn partial_records(&self) -> &[ProbeRecord] {
        match self {
            ProbeError::ProviderUnavailable { partial, .. } => partial,
            ProbeError::Unscorable { records, .. } => records,
            _ => &[],
        }
    }
}

fn abstain_reason(e: &MappingError) -> AbstainReason {
    match e {
        MappingError::NoLexiconHit | MappingError::BadProbability(_) => AbstainReason::NoLexiconHit,
        MappingError::ExactTie => AbstainReason::ExactTie,
        MappingError::AllFiltered | MappingError::UnnormalizedStance { .. } => AbstainReason::AllFiltered,
    }
}

fn mapped_from(result: Result<AgreementLevel, MappingError>) -> Mapped {
    match result {
        Ok(level) => Mapped::Answer(level),
        Err(e) => Mapped::Abstain(abstain_reason(&e)),
    }
}

fn probe_encoder<P: Provider + ?Sized>(
    provider: &P,
    statement: &Statement,
    lexicon: &LexiconSet,
    config: &ProbeConfig,
) -> Result<ProbeRecord, ProviderError> {
    let prompt = build_encoder_prompt(statement);
    let (evidence, mapped, error) = match provider.fill_mask(&prompt, config.top_k) {
        Ok(tokens) => {
            let mapped = mapped_from(map_mask_distribution(&tokens, lexicon, config));
            (Evidence::MaskFill { tokens }, mapped, None)
        }
        Err(e) if e.is_fatal() => return Err(e),
        Err(e) => {
            (Evidence::MaskFill { tokens: vec![] }, Mapped::Abstain(AbstainReason::ProviderError), Some(e.to_string()))
        }
    };
    Ok(ProbeRecord { statement_id: statement.id, mode: ProbeMode::Encoder, prompt, evidence, mapped, error })
}

fn score_response<P: Provider + ?Sized>(
    provider: &P,
    text: &str,
    agree_hyp: &str,
    disagree_hyp: &str,
) -> Result<StanceScore, ProviderError> {
    let agree = provider.nli(text, agree_hyp)?;
    let disagree = provider.nli(text, disagree_hyp)?;
    Ok(StanceScore::from_entailments(agree.entailment, disagree.entailment))
}

fn probe_decoder<P: Provider + ?Sized>(
    provider: &P,
    statement: &Statement,
    config: &ProbeConfig,
) -> Result<ProbeRecord, ProviderError> {
    let prompt = build_decoder_prompt(statement, config.prompt_template_id)
        .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
    let agree_hyp = agree_hypothesis(statement);
    let disagree_hyp = disagree_hypothesis(statement);
    let mut responses = Vec::new();
    let mut failures = Vec::new();
    for seed in 1..=u64::from(config.n_samples) {
        let request = CompletionRequest {
            prompt: prompt.clone(),
            max_tokens: config.max_tokens,
            temperature: config.temperature,
            seed,
        };
        let outcome = provider
            .complete(&request)
            .and_then(|text| score_response(provider, &text, &agree_hyp, &disagree_hyp).map(|stance| (text, stance)));
        match outcome {
            Ok((text, stance)) => responses.push(GeneratedResponse { seed, text, stance }),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => failures.push(SampleFailure { seed, error: e.to_string() }),
        }
    }
    let (mapped, error) = if responses.is_empty() {
        (Mapped::Abstain(AbstainReason::ProviderError), failures.first().map(|f| f.error.clone()))
    } else {
        let scores: Vec<StanceScore> = responses.iter().map(|r| r.stance).collect();
        (mapped_from(aggregate_stances(&scores, config)), None)
    };
    Ok(ProbeRecord {
        statement_id: statement.id,
        mode: ProbeMode::Decoder,
        prompt,
        evidence: Evidence::Generations { responses, failures },
        mapped,
        error,
    })
}

/// Probes a single statement in the configured mode.
pub fn probe_statement<P: Provider + ?Sized>(
    provider: &P,
    statement: &Statement,
    lexicon: &LexiconSet,
    config: &ProbeConfig,
) -> Result<ProbeRecord, ProviderError> {
    match config.mode {
        ProbeMode::Encoder => probe_encoder(provider, statement, lexicon, config),
        ProbeMode::Decoder => probe_decoder(provider, statement, config),
    }
}

/// Probes every statement of `bank` and scores the answers.
///
/// Up to `config.parallelism` statements are in flight at once. Records are
/// assembled in statement order whatever the completion order, so a
/// deterministic provider gives a deterministic result.
pub fn probe_model<P: Provider + ?Sized>(
    provider: &P,
    bank: &StatementBank,
    lexicon: &LexiconSet,
    table: &ScoringTable,
    config: &ProbeConfig,
) -> Result<ProbeResult, ProbeError> {
    config.validate()?;
    let statements = bank.statements();
    if let Some(s) = statements.iter().find(|s| table.get(s.id).is_none()) {
        return Err(ProbeError::TableMismatch(s.id));
    }

    let slots: Mutex<Vec<Option<ProbeRecord>>> = Mutex::new(vec![None; statements.len()]);
    let fatal: Mutex<Option<ProviderError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = config.parallelism.min(statements.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::Acquire) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::AcqRel);
                let Some(statement) = statements.get(i) else { break };
                match probe_statement(provider, statement, lexicon, config) {
                    Ok(record) => slots.lock().unwrap()[i] = Some(record),
                    Err(e) => {
                        abort.store(true, Ordering::Release);
                        fatal.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    let records: Vec<ProbeRecord> = slots.into_inner().unwrap().into_iter().flatten().collect();
    if let Some(source) = fatal.into_inner().unwrap() {
        log::warn!("probe aborted after {} statements: {source}", records.len());
        return Err(ProbeError::ProviderUnavailable { source, partial: records });
    }
    ProbeResult::from_records(provider.model_id(), config.clone(), records, table)
        .map_err(|(source, records)| ProbeError::Unscorable { source, records })
}
