//! Code-interleaved prompt for ordering the lines of one block, and the
//! output-length guard applied to the model's answer.
//!
//! The user prompt is a Python function definition whose body mixes code with
//! natural-language steps ("if some order reads as meaningful text ... else
//! order by boxes"), followed by a single call of that function on the block's
//! lines and integer boxes. The wording lives in versioned text assets under
//! `assets/`; [`PROMPT_VERSION`] names the revision in use.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::PixelRect;

pub const PROMPT_VERSION: &str = "v1";

const SYSTEM_TEMPLATE: &str = include_str!("../assets/system_prompt_v1.txt");
const USER_TEMPLATE: &str = include_str!("../assets/user_prompt_v1.txt");
const LINES_MARKER: &str = "{{LINES}}";
const BOXES_MARKER: &str = "{{BOXES}}";

/// Name of the function defined and called in the user prompt.
pub const TASK_FUNCTION: &str = "your_task";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("a block prompt needs at least one line")]
    Empty,
    #[error("boxes are not translated: minimum x is {min_x}, minimum y is {min_y}")]
    NotTranslated { min_x: i64, min_y: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptEntry {
    pub text: String,
    pub rect: PixelRect,
}

/// Lines of a block in geometric order, with boxes already shifted to the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPromptInput {
    entries: Vec<PromptEntry>,
}

impl BlockPromptInput {
    pub fn new(entries: Vec<PromptEntry>) -> Result<Self, PromptError> {
        let min_x = entries.iter().map(|e| e.rect.x_min).min().ok_or(PromptError::Empty)?;
        let min_y = entries.iter().map(|e| e.rect.y_min).min().ok_or(PromptError::Empty)?;
        if min_x != 0 || min_y != 0 {
            return Err(PromptError::NotTranslated { min_x, min_y });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PromptEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system: String,
    pub user: String,
}

impl ChatPrompt {
    /// Characters across both messages.
    pub fn char_count(&self) -> usize {
        self.system.chars().count() + self.user.chars().count()
    }

    /// Stable content hash, `sha256:<hex>`, used to key recorded transcripts.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.system.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.user.as_bytes());
        format!("sha256:{}", hex::encode(hasher.finalize()))
    }
}

/// Python double-quoted string literal for `s`.
pub fn python_string_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => out.push_str(&format!("\\x{:02x}", c as u32)),
            c if c.is_control() => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn lines_literal(entries: &[PromptEntry]) -> String {
    let items: Vec<String> = entries.iter().map(|e| python_string_literal(&e.text)).collect();
    format!("[{}]", items.join(", "))
}

fn boxes_literal(entries: &[PromptEntry]) -> String {
    let items: Vec<String> = entries
        .iter()
        .map(|e| {
            let [a, b, c, d] = e.rect.as_array();
            format!("[{a}, {b}, {c}, {d}]")
        })
        .collect();
    format!("[{}]", items.join(", "))
}

/// Builds the system and user messages for one block. Pure and byte-stable.
pub fn build_prompt(input: &BlockPromptInput) -> ChatPrompt {
    // boxes first: line texts are inserted last so they are never rescanned for markers
    let user = USER_TEMPLATE.replacen(BOXES_MARKER, &boxes_literal(&input.entries), 1).replacen(
        LINES_MARKER,
        &lines_literal(&input.entries),
        1,
    );
    ChatPrompt { system: SYSTEM_TEMPLATE.to_owned(), user }
}

/// Length of the texts joined by single spaces, in unicode scalar values.
pub fn expected_length<S: AsRef<str>>(texts: &[S]) -> Result<usize, PromptError> {
    if texts.is_empty() {
        return Err(PromptError::Empty);
    }
    let chars: usize = texts.iter().map(|t| t.as_ref().chars().count()).sum();
    Ok(chars + texts.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardVerdict {
    Accept,
    Reject,
}

/// Rejects an answer shorter than half or longer than double the expected length.
///
/// Both bounds are strict: exactly half or exactly double is accepted.
pub fn length_guard(output: &str, expected: usize) -> GuardVerdict {
    let len = output.chars().count();
    if 2 * len < expected || len > 2 * expected {
        GuardVerdict::Reject
    } else {
        GuardVerdict::Accept
    }
}
