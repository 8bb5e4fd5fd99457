//! Political-leaning audits for language models.
//!
//! * [`compass`]: statement bank, answer scale and two-axis scoring.
//! * [`probing`]: fill-mask and generation probes mapped onto the scale.
//! * [`provider`]: the model-access trait probes run against.
//! * [`stability`]: dispersion of answers across prompt and wording variants.
//! * [`fairness`]: per-group downstream metrics, significance tests,
//!   annotator agreement and ensembling.
//! * [`report`]: SVG compass plots and report bundles.

pub mod compass;
pub mod document;
pub mod fairness;
pub mod probing;
pub mod provider;
pub mod report;
pub mod stability;

pub use compass::{
    agreement_value, load_statement_bank, score_axis, score_compass, AgreementLevel, AnswerSheet, Axis, BankError,
    CompassPoint, Direction, ScoreError, ScoringEntry, ScoringTable, Statement, StatementBank,
};
pub use document::{Document, DocumentError};
