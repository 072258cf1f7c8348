//! `blockspot` command line.
//!
//! Settings resolve as flags, then `BLOCKSPOT_*` environment variables, then
//! the optional TOML file given with `--config`, then built-in defaults.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 unreadable or invalid input,
//! 3 backend configuration problem.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::eval::{evaluate, render_table, EvalConfig};
use crate::fuzzy::{best_fuzzy_substring, best_fuzzy_substring_bruteforce, FuzzyConfig};
use crate::geometry::RecognizerSpec;
use crate::llm::{self, ApiKey, HttpBackend, LlmBackend, LlmConfig, Recorder, ReplayBackend, ScriptedBackend};
use crate::model::{parse_document, serialize_document, Document, DocumentKind};
use crate::pipeline::{self, plan_recognition, prepare_block, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "blockspot", version, about = "Block-level text from grouped OCR lines")]
pub struct Cli {
    /// TOML settings file (lowest precedence after defaults).
    #[arg(long, global = true, env = "BLOCKSPOT_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order the lines of every block and write block texts.
    Order(OrderArgs),
    /// Score predicted block texts against ground truth.
    Eval(EvalArgs),
    /// Find the best fuzzy substring match of a query in a corpus.
    Fuzzy(FuzzyArgs),
    /// Print the prompt that would be sent for one block.
    Prompt(PromptArgs),
    /// Print the recognizer preprocessing plan (rotation, crop, parts) per line.
    Plan(PlanArgs),
}

#[derive(Debug, Args, Default)]
pub struct LlmArgs {
    /// http | scripted:<file> | replay:<file> | geometric-only
    #[arg(long, env = "BLOCKSPOT_BACKEND")]
    pub backend: Option<BackendKind>,
    #[arg(long, env = "BLOCKSPOT_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "BLOCKSPOT_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_context_tokens: Option<u32>,
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct FuzzyArgs_ {
    #[arg(long = "stage1-factor")]
    pub stage_1_factor: Option<f64>,
    #[arg(long = "stage2-factor")]
    pub stage_2_factor: Option<f64>,
    /// Stage-1 windows explored further by stage 2.
    #[arg(long = "stage1-candidates")]
    pub stage_1_candidates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    /// Recognized prediction document (JSON).
    pub input: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
    /// Blocks processed concurrently.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Output document; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-block outcomes (JSON array).
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Record LLM replies to a transcript for later `replay:` runs.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    #[arg(long)]
    pub min_iou: Option<f64>,
    #[command(flatten)]
    pub fuzzy: FuzzyArgs_,
    /// Report JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzyArgs {
    pub query: String,
    /// Corpus text; use --corpus-file to read it from a file instead.
    #[arg(required_unless_present = "corpus_file")]
    pub corpus: Option<String>,
    #[arg(long, conflicts_with = "corpus")]
    pub corpus_file: Option<PathBuf>,
    /// Exhaustive search instead of the two-stage scan.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub fuzzy: FuzzyArgs_,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    pub input: PathBuf,
    /// Block index.
    #[arg(long, default_value_t = 0)]
    pub block: usize,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub input_height: Option<u32>,
    #[arg(long)]
    pub input_width: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum BackendKind {
    Http,
    Scripted(PathBuf),
    Replay(PathBuf),
    GeometricOnly,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Http => f.write_str("http"),
            Self::Scripted(p) => write!(f, "scripted:{}", p.display()),
            Self::Replay(p) => write!(f, "replay:{}", p.display()),
            Self::GeometricOnly => f.write_str("geometric-only"),
        }
    }
}

impl From<BackendKind> for String {
    fn from(kind: BackendKind) -> Self {
        kind.to_string()
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "http" => Ok(Self::Http),
            _ if s == "geometric-only" => Ok(Self::GeometricOnly),
            Some(("scripted", path)) if !path.is_empty() => Ok(Self::Scripted(path.into())),
            Some(("replay", path)) if !path.is_empty() => Ok(Self::Replay(path.into())),
            _ => Err(format!("unknown backend {s:?}; expected http, scripted:<file>, replay:<file> or geometric-only")),
        }
    }
}

impl<'de> Deserialize<'de> for BackendKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Settings file layout. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub concurrency: Option<usize>,
    pub min_iou: Option<f64>,
    #[serde(default)]
    pub llm: FileLlm,
    #[serde(default)]
    pub fuzzy: FileFuzzy,
    #[serde(default)]
    pub recognizer: FileRecognizer,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileLlm {
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub temperature: Option<f64>,
    pub max_context_tokens: Option<u32>,
    pub max_output_tokens: Option<u32>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileFuzzy {
    pub stage_1_factor: Option<f64>,
    pub stage_2_factor: Option<f64>,
    pub stage_1_candidates: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRecognizer {
    pub input_height: Option<u32>,
    pub input_width: Option<u32>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub llm: LlmConfig,
    pub fuzzy: FuzzyConfig,
    pub recognizer: RecognizerSpec,
    pub min_iou: f64,
    pub concurrency: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Http,
            llm: LlmConfig::default(),
            fuzzy: FuzzyConfig::default(),
            recognizer: RecognizerSpec::default(),
            min_iou: 0.0,
            concurrency: pipeline::DEFAULT_CONCURRENCY,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input. Exit code 2.
    Input(String),
    /// Backend settings unusable. Exit code 3.
    Backend(String),
    /// Anything else. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Backend(_) => 3,
            Self::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) | Self::Backend(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&raw).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
}

fn fuzzy_config(args: &FuzzyArgs_, file: &FileFuzzy) -> Result<FuzzyConfig, CliError> {
    let d = FuzzyConfig::default();
    FuzzyConfig::with_candidates(
        args.stage_1_factor.or(file.stage_1_factor).unwrap_or(d.stage_1_factor),
        args.stage_2_factor.or(file.stage_2_factor).unwrap_or(d.stage_2_factor),
        args.stage_1_candidates.or(file.stage_1_candidates).unwrap_or(d.stage_1_candidates),
    )
    .map_err(|e| CliError::Input(e.to_string()))
}

/// Merges flags (environment already folded in by clap) over the file over defaults.
pub fn resolve_order_config(args: &OrderArgs, file: &FileConfig) -> Result<RunConfig, CliError> {
    let d = RunConfig::default();
    let l = &args.llm;
    let f = &file.llm;
    let timeout = l.timeout.or(f.timeout_secs);
    let llm = LlmConfig {
        model_name: l.model.clone().or_else(|| f.model.clone()).unwrap_or(d.llm.model_name),
        temperature: l.temperature.or(f.temperature).unwrap_or(d.llm.temperature),
        max_context_tokens: l.max_context_tokens.or(f.max_context_tokens).unwrap_or(d.llm.max_context_tokens),
        max_output_tokens: l.max_output_tokens.or(f.max_output_tokens).unwrap_or(d.llm.max_output_tokens),
        request_timeout: match timeout {
            Some(s) if s.is_finite() && s > 0.0 => Duration::from_secs_f64(s),
            Some(s) => return Err(CliError::Backend(format!("timeout must be positive, got {s}"))),
            None => d.llm.request_timeout,
        },
        max_retries: l.max_retries.or(f.max_retries).unwrap_or(d.llm.max_retries),
        retry_backoff: d.llm.retry_backoff,
        endpoint_url: l.endpoint.clone().or_else(|| f.endpoint.clone()).unwrap_or(d.llm.endpoint_url),
        api_key: std::env::var(llm::API_KEY_ENV).ok().filter(|k| !k.is_empty()).map(ApiKey::new),
    };
    let concurrency = args.concurrency.or(file.concurrency).unwrap_or(d.concurrency);
    if concurrency == 0 {
        return Err(CliError::Input("concurrency must be at least 1".into()));
    }
    Ok(RunConfig {
        backend: l.backend.clone().or_else(|| file.backend.clone()).unwrap_or(d.backend),
        llm,
        fuzzy: fuzzy_config(&FuzzyArgs_::default(), &file.fuzzy)?,
        recognizer: d.recognizer,
        min_iou: file.min_iou.unwrap_or(d.min_iou),
        concurrency,
    })
}

fn read_document(path: &Path, kind: DocumentKind) -> Result<Document, CliError> {
    let raw = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&raw, kind).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))
        }
        None => out.write_all(bytes).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn make_backend(config: &RunConfig) -> Result<Option<Box<dyn LlmBackend>>, CliError> {
    let backend: Box<dyn LlmBackend> = match &config.backend {
        BackendKind::GeometricOnly => return Ok(None),
        BackendKind::Http => {
            if config.llm.api_key.is_none() {
                return Err(CliError::Backend(format!("http backend needs {} to be set", llm::API_KEY_ENV)));
            }
            Box::new(HttpBackend::new(&config.llm).map_err(|e| CliError::Backend(e.to_string()))?)
        }
        BackendKind::Scripted(path) => {
            Box::new(ScriptedBackend::from_file(path).map_err(|e| CliError::Backend(e.to_string()))?)
        }
        BackendKind::Replay(path) => {
            Box::new(ReplayBackend::from_file(path).map_err(|e| CliError::Backend(e.to_string()))?)
        }
    };
    config.llm.validate().map_err(|e| CliError::Backend(e.to_string()))?;
    Ok(Some(backend))
}

fn cmd_order(args: &OrderArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = read_document(&args.input, DocumentKind::Prediction)?;
    let config = resolve_order_config(args, file)?;
    tracing::info!(config = %serde_json::to_string(&config).unwrap_or_default(), "effective configuration");
    let backend = make_backend(&config)?;
    let options = RunOptions { concurrency: config.concurrency };

    let (ordered, outcomes, transcript) = match (backend, &args.record) {
        (Some(b), Some(_)) => {
            let recorder = Recorder::new(b);
            let (d, o) = pipeline::run(&doc, Some(&recorder), &config.llm, &options)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            (d, o, Some(recorder.entries()))
        }
        (backend, _) => {
            let (d, o) = pipeline::run(&doc, backend.as_deref(), &config.llm, &options)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            (d, o, None)
        }
    };

    write_output(args.out.as_deref(), &serialize_document(&ordered), out)?;
    if let Some(path) = &args.outcomes {
        write_output(Some(path), &to_json(&outcomes), out)?;
    }
    if let (Some(path), Some(entries)) = (&args.record, transcript) {
        let mut buf = Vec::new();
        llm::write_transcript(&mut buf, &entries).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_output(Some(path), &buf, out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    #[serde(flatten)]
    report: &'a crate::eval::EvalReport,
}

fn cmd_eval(args: &EvalArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let pred = read_document(&args.pred, DocumentKind::Prediction)?;
    let gt = read_document(&args.gt, DocumentKind::GroundTruth)?;
    let config = EvalConfig {
        fuzzy: fuzzy_config(&args.fuzzy, &file.fuzzy)?,
        min_iou: args.min_iou.or(file.min_iou).unwrap_or(0.0),
    };
    let report = evaluate(&pred, &gt, &config).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(path) = &args.out {
        write_output(Some(path), &to_json(&EvalOutput { report: &report }), out)?;
    }
    out.write_all(render_table(&report).as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_fuzzy(args: &FuzzyArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = match (&args.corpus, &args.corpus_file) {
        (Some(c), _) => c.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => return Err(CliError::Input("no corpus given".into())),
    };
    let result = if args.oracle {
        best_fuzzy_substring_bruteforce(&args.query, &corpus)
    } else {
        best_fuzzy_substring(&args.query, &corpus, &fuzzy_config(&args.fuzzy, &file.fuzzy)?)
    };
    let mut line = serde_json::to_vec(&result).expect("serializable");
    line.push(b'\n');
    out.write_all(&line).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Exact bytes printed by `blockspot prompt`.
pub fn format_prompt(prompt: &crate::prompting::ChatPrompt) -> String {
    format!("=== system ===\n{}\n=== user ===\n{}\n", prompt.system, prompt.user)
}

fn cmd_prompt(args: &PromptArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = read_document(&args.input, DocumentKind::Prediction)?;
    let block = doc.blocks().get(args.block).ok_or_else(|| {
        CliError::Input(format!("block index {} out of range ({} blocks)", args.block, doc.blocks().len()))
    })?;
    let (_, prompt) = prepare_block(&doc, block).map_err(|e| CliError::Input(e.to_string()))?;
    out.write_all(format_prompt(&prompt).as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_plan(args: &PlanArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = read_document(&args.input, DocumentKind::Prediction)?;
    let d = RecognizerSpec::default();
    let spec = RecognizerSpec::new(
        args.input_height.or(file.recognizer.input_height).unwrap_or(d.input_height),
        args.input_width.or(file.recognizer.input_width).unwrap_or(d.input_width),
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let plan = plan_recognition(&doc, &spec).map_err(|e| CliError::Input(e.to_string()))?;
    out.write_all(&to_json(&plan)).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = load_file_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Order(args) => cmd_order(args, &file, out),
        Command::Eval(args) => cmd_eval(args, &file, out),
        Command::Fuzzy(args) => cmd_fuzzy(args, &file, out),
        Command::Prompt(args) => cmd_prompt(args, out),
        Command::Plan(args) => cmd_plan(args, &file, out),
    }
}

/// Binary entry point; returns the process exit code.
pub fn main() -> i32 {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
