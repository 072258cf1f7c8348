//! Line-to-block pipeline.
//!
//! Recognition side: [`plan_recognition`] turns each line box into a rotation,
//! a crop and a list of recognizer-sized parts; a [`Recognizer`] reads the
//! parts and [`assemble_line_text`] glues them back into the line text.
//!
//! Ordering side: [`order_block`] produces the text of one block. Lines are put
//! in geometric order, their boxes shifted to the block origin, and the prompt
//! is sent to the LLM. The geometric order is used instead when the prompt does
//! not fit the context window, the call fails, or the answer length is outside
//! `[expected / 2, expected * 2]`. [`run`] does this for every block, several
//! blocks at a time.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::geo_order::geometric_order;
use crate::geometry::{
    crop_rect, snap_rotation, split_for_recognizer, translate_block_boxes, AlignedRect, GeometryError, RecognizerSpec,
};
use crate::llm::{complete, fits_context, LlmBackend, LlmConfig, LlmError};
use crate::model::{Block, Document, DocumentError, Line, LineId};
use crate::prompting::{
    build_prompt, expected_length, length_guard, BlockPromptInput, ChatPrompt, GuardVerdict, PromptEntry,
};

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("line {line_id}: {source}")]
    Geometry { line_id: LineId, source: GeometryError },
    #[error("line {line_id}: recognizer returned {got} parts, expected {expected}")]
    PartCount { line_id: LineId, expected: usize, got: usize },
    #[error("line {line_id}: recognition failed: {message}")]
    Recognizer { line_id: LineId, message: String },
    #[error("invalid LLM configuration: {0}")]
    Config(#[from] LlmError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("block {block}: {message}")]
    Block { block: usize, message: String },
}

/// Preprocessing plan for one line: rotate, crop, split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognizerRequest {
    pub line_id: LineId,
    pub rotation: f64,
    pub crop: AlignedRect,
    pub parts: Vec<AlignedRect>,
}

/// One request per line, in document line order.
pub fn plan_recognition(doc: &Document, spec: &RecognizerSpec) -> Result<Vec<RecognizerRequest>, PipelineError> {
    doc.lines()
        .iter()
        .map(|line| {
            let err = |source| PipelineError::Geometry { line_id: line.id, source };
            let rotation = snap_rotation(&line.quad).map_err(err)?;
            let crop = crop_rect(&line.quad, rotation).map_err(err)?;
            let parts = split_for_recognizer(&crop, spec);
            Ok(RecognizerRequest { line_id: line.id, rotation, crop, parts })
        })
        .collect()
}

/// Texts recognized from the parts of one line, joined without a separator.
pub fn assemble_line_text<S: AsRef<str>>(part_texts: &[S]) -> String {
    part_texts.iter().map(AsRef::as_ref).collect()
}

/// Reads the text of each part of a planned line.
///
/// Implementations receive the line (for access to any existing text or
/// metadata) and the plan; they must return exactly one string per part.
/// A real model adapter rotates the image by `request.rotation`, crops
/// `request.crop` from the rotated image and runs inference on each part.
pub trait Recognizer: Send + Sync {
    fn recognize(&self, line: &Line, request: &RecognizerRequest) -> Result<Vec<String>, String>;
}

/// Stand-in recognizer that hands back the text already on the line, cut into
/// one piece per part.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoRecognizer;

impl Recognizer for EchoRecognizer {
    fn recognize(&self, line: &Line, request: &RecognizerRequest) -> Result<Vec<String>, String> {
        let chars: Vec<char> = line.text.chars().collect();
        let n = request.parts.len();
        Ok((0..n).map(|i| chars[i * chars.len() / n..(i + 1) * chars.len() / n].iter().collect()).collect())
    }
}

/// Fills every line's text by running the recognizer over its planned parts.
pub fn recognize_document(
    doc: &Document,
    spec: &RecognizerSpec,
    recognizer: &dyn Recognizer,
) -> Result<Document, PipelineError> {
    let mut texts = HashMap::new();
    for (line, request) in doc.lines().iter().zip(plan_recognition(doc, spec)?) {
        let parts = recognizer
            .recognize(line, &request)
            .map_err(|message| PipelineError::Recognizer { line_id: line.id, message })?;
        if parts.len() != request.parts.len() {
            return Err(PipelineError::PartCount { line_id: line.id, expected: request.parts.len(), got: parts.len() });
        }
        texts.insert(line.id, assemble_line_text(&parts));
    }
    Ok(doc.with_line_texts(&texts)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The LLM answer passed the length guard.
    Llm,
    /// Prompt did not fit the context window; LLM not called.
    GeometricFallbackContext,
    /// LLM answer was too short or too long.
    GeometricFallbackLength,
    /// LLM call failed.
    GeometricFallbackError,
    /// One-line block; nothing to order.
    SingleLine,
    /// Run without an LLM backend.
    GeometricOnly,
}

impl Strategy {
    pub fn is_geometric(self) -> bool {
        !matches!(self, Self::Llm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingOutcome {
    pub block_ref: usize,
    pub strategy: Strategy,
    pub block_text: String,
    pub expected_len: usize,
    /// Length of the LLM answer, when one was received.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_len: Option<usize>,
    /// Line order behind `block_text`; absent when the LLM chose the text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_order: Option<Vec<LineId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Backend key for a block.
pub fn block_key(index: usize) -> String {
    format!("block-{index}")
}

/// Member lines in geometric order, their translated prompt entries and the prompt.
pub fn prepare_block<'d>(doc: &'d Document, block: &Block) -> Result<(Vec<&'d Line>, ChatPrompt), PipelineError> {
    let lines: Vec<&Line> = doc.block_lines(block).collect();
    let rects: Vec<(LineId, AlignedRect)> = lines.iter().map(|l| (l.id, AlignedRect::of_quad(&l.quad))).collect();
    let by_id: HashMap<LineId, &Line> = lines.iter().map(|l| (l.id, *l)).collect();
    let ordered: Vec<&Line> = geometric_order(&rects).into_iter().map(|id| by_id[&id]).collect();
    let quads: Vec<_> = ordered.iter().map(|l| l.quad).collect();
    let boxes =
        translate_block_boxes(&quads).map_err(|source| PipelineError::Geometry { line_id: ordered[0].id, source })?;
    let entries = ordered.iter().zip(boxes).map(|(l, rect)| PromptEntry { text: l.text.clone(), rect }).collect();
    let input = BlockPromptInput::new(entries).expect("translated boxes start at the origin");
    Ok((ordered, build_prompt(&input)))
}

/// Orders one block. LLM problems never surface as errors; they select a fallback.
pub fn order_block(
    doc: &Document,
    block_index: usize,
    block: &Block,
    backend: Option<&dyn LlmBackend>,
    config: &LlmConfig,
) -> Result<OrderingOutcome, PipelineError> {
    if block.line_ids.is_empty() {
        return Err(PipelineError::Block { block: block_index, message: "block has no lines".into() });
    }
    if block.line_ids.len() == 1 {
        let line = doc
            .line(block.line_ids[0])
            .ok_or_else(|| PipelineError::Block { block: block_index, message: "unknown line".into() })?;
        return Ok(OrderingOutcome {
            block_ref: block_index,
            strategy: Strategy::SingleLine,
            block_text: line.text.clone(),
            expected_len: line.text.chars().count(),
            llm_len: None,
            line_order: Some(vec![line.id]),
            detail: None,
        });
    }

    let (ordered, prompt) = prepare_block(doc, block)?;
    let texts: Vec<&str> = ordered.iter().map(|l| l.text.as_str()).collect();
    let expected_len = expected_length(&texts).expect("block has lines");
    let geometric = |strategy, llm_len, detail| OrderingOutcome {
        block_ref: block_index,
        strategy,
        block_text: texts.join(" "),
        expected_len,
        llm_len,
        line_order: Some(ordered.iter().map(|l| l.id).collect()),
        detail,
    };

    let Some(backend) = backend else {
        return Ok(geometric(Strategy::GeometricOnly, None, None));
    };
    if !fits_context(&prompt, config) {
        return Ok(geometric(Strategy::GeometricFallbackContext, None, None));
    }
    let key = block_key(block_index);
    let reply = match complete(backend, &key, &prompt, config) {
        Ok(reply) => reply,
        Err(err) => {
            tracing::warn!(block = block_index, error = %err, "LLM call failed, using geometric order");
            return Ok(geometric(Strategy::GeometricFallbackError, None, Some(err.to_string())));
        }
    };
    let llm_len = reply.text.chars().count();
    match length_guard(&reply.text, expected_len) {
        GuardVerdict::Accept => Ok(OrderingOutcome {
            block_ref: block_index,
            strategy: Strategy::Llm,
            block_text: reply.text,
            expected_len,
            llm_len: Some(llm_len),
            line_order: None,
            detail: None,
        }),
        GuardVerdict::Reject => Ok(geometric(
            Strategy::GeometricFallbackLength,
            Some(llm_len),
            Some(format!("answer length {llm_len} outside [{expected_len}/2, {expected_len}*2]")),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    /// Blocks processed at once, which also bounds in-flight LLM requests.
    pub concurrency: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { concurrency: DEFAULT_CONCURRENCY }
    }
}

/// Orders every block and returns the document with block texts filled in,
/// plus one outcome per block.
///
/// Lines that belong to no block are appended as one-line blocks first.
/// Results are in block order regardless of the order of completion.
pub fn run(
    doc: &Document,
    backend: Option<&dyn LlmBackend>,
    config: &LlmConfig,
    options: &RunOptions,
) -> Result<(Document, Vec<OrderingOutcome>), PipelineError> {
    if backend.is_some() {
        config.validate()?;
    }
    let mut blocks = doc.blocks().to_vec();
    blocks.extend(doc.ungrouped_line_ids().into_iter().map(|id| Block::new(vec![id])));

    let results: Mutex<Vec<Option<Result<OrderingOutcome, PipelineError>>>> =
        Mutex::new((0..blocks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = options.concurrency.clamp(1, blocks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(block) = blocks.get(i) else { break };
                let outcome = order_block(doc, i, block, backend, config);
                results.lock().expect("poisoned")[i] = Some(outcome);
            });
        }
    });

    let outcomes = results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("every block is processed"))
        .collect::<Result<Vec<_>, _>>()?;
    for (block, outcome) in blocks.iter_mut().zip(&outcomes) {
        block.text = Some(outcome.block_text.clone());
    }
    Ok((doc.with_blocks(blocks)?, outcomes))
}
