//! Block-level text spotting.
//!
//! Turns line-level OCR output (line boxes, line texts, and a grouping of lines
//! into blocks) into one ordered string per block. An LLM chooses the reading
//! order of each block's lines, with a geometric ordering as the fallback. The
//! crate also ships the evaluation harness: IoU matching of predicted to
//! ground-truth blocks, fuzzy substring alignment, and string similarity metrics.

pub mod cli;
pub mod eval;
pub mod fuzzy;
pub mod geo_order;
pub mod geometry;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prompting;
