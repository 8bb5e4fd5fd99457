//! The `compass-audit` command line.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 provider error.
//! Diagnostics go to standard error; data goes to the named output files or
//! to standard output.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use compass_audit_core::fairness::{
    ensemble_vote, fairness_report, load_predictions, write_predictions, EnsembleMode, FairnessReport, GroupKey,
    PredictionRecord, SignificanceConfig,
};
use compass_audit_core::probing::{probe_model, LexiconSet, ProbeConfig, ProbeError, ProbeMode, ProbeResult};
use compass_audit_core::report::{render_compass_svg, ReportBundle, SvgOptions};
use compass_audit_core::stability::{
    paraphrase_variants, run_variants, stability_report, template_variants, StabilityError, StabilityReport, Variant,
};
use compass_audit_core::{CompassPoint, Document, ScoringTable, StatementBank};
use compass_audit_providers::{
    HttpProvider, MockRespondent, MockRespondentConfig, MockServer, ProviderEndpoint, ServerOptions,
};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Provider(_) => EXIT_PROVIDER,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "compass-audit", version, about = "Political leaning audits for language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe a served model with the questionnaire and score its position.
    Probe(ProbeArgs),
    /// Measure how answers move across prompt templates or reworded banks.
    Stability(StabilityArgs),
    /// Score downstream predictions overall and per group.
    Fairness(FairnessArgs),
    /// Combine several models' predictions into one.
    Ensemble(EnsembleArgs),
    /// Bundle results into Markdown, SVG and JSON.
    Report(ReportArgs),
    /// Serve the deterministic mock respondent over HTTP.
    MockServer(MockServerArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Encoder,
    Decoder,
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// Base URL serving /v1/fill-mask, /v1/completions and /v1/nli.
    #[arg(long)]
    pub endpoint: String,
    /// Name recorded in results; defaults to the endpoint URL.
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    #[arg(long, default_value_t = 250)]
    pub backoff_ms: u64,
}

impl EndpointArgs {
    fn provider(&self) -> Result<HttpProvider, CliError> {
        let endpoint = ProviderEndpoint {
            timeout_ms: self.timeout_ms,
            max_retries: self.retries,
            backoff_base_ms: self.backoff_ms,
            ..ProviderEndpoint::from_env(&self.endpoint)
        };
        let provider = HttpProvider::new(endpoint).map_err(invalid)?;
        Ok(match &self.model_id {
            Some(id) => provider.with_model_id(id),
            None => provider,
        })
    }
}

#[derive(Debug, Args)]
pub struct ProbeOptions {
    #[arg(long, value_enum, default_value = "encoder")]
    pub mode: ModeArg,
    /// Decoder prompt template, 1 to 7.
    #[arg(long)]
    pub template: Option<u8>,
    /// Generations per statement in decoder mode.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub strong_threshold: Option<f64>,
    #[arg(long)]
    pub confidence_floor: Option<f64>,
    #[arg(long)]
    pub stance_boundary: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Statements in flight at once.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

impl ProbeOptions {
    fn config(&self) -> Result<ProbeConfig, CliError> {
        let mut c = match self.mode {
            ModeArg::Encoder => ProbeConfig::encoder(),
            ModeArg::Decoder => ProbeConfig::decoder(),
        };
        if let Some(v) = self.template {
            c.prompt_template_id = v;
        }
        if let Some(v) = self.samples {
            c.n_samples = v;
        }
        if let Some(v) = self.top_k {
            c.top_k = v;
        }
        if let Some(v) = self.strong_threshold {
            c.strong_threshold = v;
        }
        if let Some(v) = self.confidence_floor {
            c.confidence_floor = v;
        }
        if let Some(v) = self.stance_boundary {
            c.strong_stance_boundary = v;
        }
        if let Some(v) = self.temperature {
            c.temperature = v;
        }
        if let Some(v) = self.max_tokens {
            c.max_tokens = v;
        }
        if let Some(v) = self.parallelism {
            c.parallelism = v;
        }
        c.validate().map_err(invalid)?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    /// `default` or a statement-bank JSON file.
    #[arg(long, default_value = "default")]
    pub bank: String,
    /// Scoring-table JSON overriding the bank's axes, directions and weights.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub options: ProbeOptions,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    #[arg(long, default_value = "default")]
    pub bank: String,
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Templates to compare, e.g. `1,2,3`. Defaults to all seven.
    #[arg(long, value_delimiter = ',', conflicts_with = "paraphrase")]
    pub templates: Vec<u8>,
    /// Reworded statement banks to compare instead of templates.
    #[arg(long)]
    pub paraphrase: Vec<PathBuf>,
    #[command(flatten)]
    pub options: ProbeOptions,
    /// Run variants one after another.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupKeyArg {
    Group,
    Leaning,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    /// Prediction CSV files.
    #[arg(long, required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "group")]
    pub group_key: GroupKeyArg,
    /// Model whose per-seed scores the others are tested against.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Allowed labels, e.g. `hate,ok`. Defaults to the gold labels.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// fairness-report/1 JSON output.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// CSV output; standard output when neither output is given.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EnsembleModeArg {
    Majority,
    MeanScore,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long, required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "majority")]
    pub mode: EnsembleModeArg,
    /// Restrict to these models.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Prediction CSV output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// probe-result/1 files.
    #[arg(long)]
    pub probe: Vec<PathBuf>,
    /// stability-report/1 files.
    #[arg(long)]
    pub stability: Vec<PathBuf>,
    /// fairness-report/1 files.
    #[arg(long)]
    pub fairness: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Timestamp to record; nothing time-dependent is written without it.
    #[arg(long)]
    pub generated_at: Option<String>,
    #[arg(long)]
    pub title: Option<String>,
    /// Plot styling as JSON (size, margin, marker_radius, default_color, colors).
    #[arg(long)]
    pub svg_style: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockServerArgs {
    /// Latent position as SOCIAL,ECONOMIC.
    #[arg(long, allow_hyphen_values = true, default_value = "0,0")]
    pub latent: String,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 0)]
    pub port: u16,
    /// Extra reworded banks the server should recognize.
    #[arg(long)]
    pub paraphrase: Vec<PathBuf>,
    /// Answer the first N requests with HTTP 503.
    #[arg(long, default_value_t = 0)]
    pub fail_first: u32,
}

fn load_bank(source: &str) -> Result<StatementBank, CliError> {
    if source == "default" {
        Ok(StatementBank::default_bank())
    } else {
        StatementBank::load(source).map_err(invalid)
    }
}

fn load_table(bank: &StatementBank, path: Option<&Path>) -> Result<ScoringTable, CliError> {
    match path {
        Some(p) => ScoringTable::load(p).map_err(invalid),
        None => Ok(ScoringTable::from_bank(bank)),
    }
}

fn emit(out: Option<&Path>, data: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, data).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(data.as_bytes()).map_err(invalid),
    }
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".partial.json");
    out.with_file_name(name)
}

fn probe(args: &ProbeArgs) -> Result<(), CliError> {
    let config = args.options.config()?;
    let bank = load_bank(&args.bank)?;
    let table = load_table(&bank, args.table.as_deref())?;
    let provider = args.endpoint.provider()?;
    let result = match probe_model(&provider, &bank, &LexiconSet::default(), &table, &config) {
        Ok(r) => r,
        Err(e @ ProbeError::ProviderUnavailable { .. }) => {
            if let Some(out) = &args.out {
                let report = serde_json::json!({ "error": e.to_string(), "records": e.partial_records() });
                let path = partial_path(out);
                let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
                emit(Some(&path), &text)?;
                log::warn!("partial records written to {}", path.display());
            }
            return Err(CliError::Provider(e.to_string()));
        }
        Err(e) => return Err(invalid(e)),
    };
    summarize_probe(&result);
    emit(args.out.as_deref(), &result.to_json())
}

fn summarize_probe(r: &ProbeResult) {
    eprintln!(
        "{}: economic {:.2}, social {:.2} ({} answered, {} unanswered)",
        r.model_id,
        r.point.economic,
        r.point.social,
        r.sheet.answers.len(),
        r.sheet.unanswered.len()
    );
}

fn stability(args: &StabilityArgs) -> Result<(), CliError> {
    let config = args.options.config()?;
    let bank = load_bank(&args.bank)?;
    let table = load_table(&bank, args.table.as_deref())?;
    let variants: Vec<Variant> = if args.paraphrase.is_empty() {
        let templates: Vec<u8> = if args.templates.is_empty() { (1..=7).collect() } else { args.templates.clone() };
        if config.mode == ProbeMode::Encoder {
            log::warn!("encoder probes ignore templates; every variant will be identical");
        }
        template_variants(&bank, &templates)
    } else {
        let mut banks = vec![("original".to_string(), bank.clone())];
        for p in &args.paraphrase {
            let b = StatementBank::load(p).map_err(invalid)?;
            let id = b.source().map(str::to_string).unwrap_or_else(|| p.display().to_string());
            banks.push((id, b));
        }
        paraphrase_variants(banks, config.prompt_template_id)
    };
    let provider = args.endpoint.provider()?;
    let runs = run_variants(&provider, &variants, &LexiconSet::default(), &table, &config, !args.sequential)
        .map_err(invalid)?;
    let report = match stability_report(&runs) {
        Ok(r) => r,
        Err(StabilityError::NoCompletedRuns) => {
            return Err(CliError::Provider("no variant completed; see the warnings above".into()))
        }
        Err(e) => return Err(invalid(e)),
    };
    eprintln!(
        "{}: {} variants, point spread {:.3}, centroid economic {:.2} social {:.2}",
        report.model_id,
        report.variants.len(),
        report.point_spread,
        report.centroid.economic,
        report.centroid.social
    );
    emit(args.out.as_deref(), &report.to_json())
}

fn label_filter(labels: &[String]) -> Option<BTreeSet<String>> {
    (!labels.is_empty()).then(|| labels.iter().cloned().collect())
}

fn read_all(paths: &[PathBuf], labels: Option<&BTreeSet<String>>) -> Result<Vec<PredictionRecord>, CliError> {
    let mut all = Vec::new();
    for p in paths {
        let recs = load_predictions(p, labels).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        all.extend(recs);
    }
    compass_audit_core::fairness::validate_predictions(&all, labels).map_err(invalid)?;
    Ok(all)
}

fn fairness(args: &FairnessArgs) -> Result<(), CliError> {
    let labels = label_filter(&args.labels);
    let records = read_all(&args.predictions, labels.as_ref())?;
    let key = match args.group_key {
        GroupKeyArg::Group => GroupKey::Group,
        GroupKeyArg::Leaning => GroupKey::Leaning,
    };
    let significance = SignificanceConfig { alpha: args.alpha, ..SignificanceConfig::default() };
    let report: FairnessReport =
        fairness_report(&records, key, args.baseline.as_deref(), significance).map_err(invalid)?;
    if let Some(p) = &args.out_json {
        report.write(p).map_err(invalid)?;
    }
    if args.out_csv.is_some() || args.out_json.is_none() {
        emit(args.out_csv.as_deref(), &report.to_csv())?;
    }
    Ok(())
}

fn ensemble(args: &EnsembleArgs) -> Result<(), CliError> {
    let labels = label_filter(&args.labels);
    let mut records = read_all(&args.predictions, labels.as_ref())?;
    if !args.models.is_empty() {
        records.retain(|r| args.models.contains(&r.model_id));
    }
    let mode = match args.mode {
        EnsembleModeArg::Majority => EnsembleMode::Majority,
        EnsembleModeArg::MeanScore => EnsembleMode::MeanScore,
    };
    let combined = ensemble_vote(&records, mode).map_err(invalid)?;
    let mut buf = Vec::new();
    write_predictions(&mut buf, &combined).map_err(invalid)?;
    emit(args.out.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"))
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let mut bundle = ReportBundle::new(env!("CARGO_PKG_VERSION"));
    bundle.generated_at = args.generated_at.clone();
    for p in &args.probe {
        bundle.probes.push(ProbeResult::read(p).map_err(invalid)?);
    }
    for p in &args.stability {
        bundle.stability.push(StabilityReport::read(p).map_err(invalid)?);
    }
    for p in &args.fairness {
        bundle.fairness.push(FairnessReport::read(p).map_err(invalid)?);
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| invalid(format!("{}: {e}", args.out_dir.display())))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = args.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))
    };

    let mut svg_ref = None;
    if !bundle.probes.is_empty() {
        let mut options: SvgOptions = match &args.svg_style {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
            }
            None => SvgOptions::default(),
        };
        options.title = args.title.clone().or(options.title);
        options.timestamp = args.generated_at.clone();
        let svg = render_compass_svg(&bundle.compass_points(), &options).map_err(invalid)?;
        write("compass.svg", &svg)?;
        svg_ref = Some("compass.svg");
    }
    write("report.md", bundle.to_markdown(svg_ref).as_bytes())?;
    write("bundle.json", bundle.to_json().as_bytes())?;
    eprintln!("report written to {}", args.out_dir.display());
    Ok(())
}

fn parse_latent(s: &str) -> Result<CompassPoint, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [social, economic] = parts.as_slice() else {
        return Err(invalid(format!("--latent expects SOCIAL,ECONOMIC, got {s:?}")));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|_| invalid(format!("--latent: {v:?} is not a number")));
    Ok(CompassPoint::new(num(social)?, num(economic)?))
}

fn mock_server(args: &MockServerArgs) -> Result<(), CliError> {
    let config = MockRespondentConfig::new(parse_latent(&args.latent)?, args.noise, args.seed).map_err(invalid)?;
    let mut respondent = MockRespondent::new(config);
    for p in &args.paraphrase {
        respondent = respondent.with_bank(StatementBank::load(p).map_err(invalid)?);
    }
    let options =
        ServerOptions { host: args.host.clone(), port: args.port, fail_first: args.fail_first, fail_status: 503 };
    let server = MockServer::spawn_with(respondent, &options).map_err(|e| invalid(format!("cannot bind: {e}")))?;
    println!("{}", server.port());
    std::io::stdout().flush().map_err(invalid)?;
    eprintln!("mock server listening on {}", server.base_url());
    server.wait().map_err(invalid)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Probe(a) => probe(a),
        Command::Stability(a) => stability(a),
        Command::Fairness(a) => fairness(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Report(a) => report(a),
        Command::MockServer(a) => mock_server(a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
