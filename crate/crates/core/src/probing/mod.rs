//! Prompt construction, evidence mapping and end-to-end probing.

mod config;
mod mapping;
mod probe;
mod prompts;

pub use config::{ConfigError, ProbeConfig, ProbeMode};
pub use mapping::{
    aggregate_stances, map_mask_distribution, mask_mass, normalize_token, stance_margin, LexiconError, LexiconSet,
    MappingError, MaskMass, StanceLabel, StanceScore,
};
pub use probe::{
    probe_model, probe_statement, sheet_from_records, AbstainReason, Evidence, GeneratedResponse, Mapped, ProbeError,
    ProbeRecord, ProbeResult, SampleFailure,
};
pub use prompts::{
    agree_hypothesis, build_decoder_prompt, build_encoder_prompt, disagree_hypothesis, UnknownTemplate,
    DECODER_TEMPLATES, TEMPLATE_COUNT,
};
