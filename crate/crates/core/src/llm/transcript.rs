use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{FinishReason, LlmBackend, LlmConfig, LlmError, LlmReply, LlmRequest};

/// One recorded exchange. Transcripts are JSON lines of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub prompt_hash: String,
    pub reply: String,
}

pub fn read_transcript(reader: impl BufRead) -> Result<Vec<TranscriptEntry>, LlmError> {
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LlmError::Config(format!("transcript: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry =
            serde_json::from_str(&line).map_err(|e| LlmError::Config(format!("transcript line {}: {e}", n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_transcript(mut writer: impl Write, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    for entry in entries {
        serde_json::to_writer(&mut writer, entry)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Serves recorded replies by prompt hash. A prompt that changed since the
/// recording has no entry and yields [`LlmError::NoReply`].
#[derive(Debug, Default)]
pub struct ReplayBackend {
    by_hash: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self { by_hash: entries.into_iter().map(|e| (e.prompt_hash, e.reply)).collect() }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let file =
            std::fs::File::open(path).map_err(|e| LlmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self::new(read_transcript(std::io::BufReader::new(file))?))
    }
}

impl LlmBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn send(&self, request: LlmRequest<'_>, _config: &LlmConfig) -> Result<LlmReply, LlmError> {
        let hash = request.prompt.hash();
        let text = self.by_hash.get(&hash).ok_or_else(|| LlmError::NoReply(format!("{} ({hash})", request.key)))?;
        Ok(LlmReply { text: text.clone(), finish_reason: FinishReason::Complete, latency: Default::default() })
    }
}

/// Wraps a backend and keeps every complete reply for later replay.
#[derive(Debug)]
pub struct Recorder<B> {
    inner: B,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<B: LlmBackend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded entries sorted by key, so concurrent runs produce identical files.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let mut entries = self.entries.lock().expect("poisoned").clone();
        entries.sort_by(|a, b| a.key.cmp(&b.key).then_with(|| a.prompt_hash.cmp(&b.prompt_hash)));
        entries
    }
}

impl<B: LlmBackend> LlmBackend for Recorder<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn send(&self, request: LlmRequest<'_>, config: &LlmConfig) -> Result<LlmReply, LlmError> {
        let reply = self.inner.send(request, config)?;
        if reply.finish_reason == FinishReason::Complete {
            self.entries.lock().expect("poisoned").push(TranscriptEntry {
                key: request.key.to_owned(),
                prompt_hash: request.prompt.hash(),
                reply: reply.text.clone(),
            });
        }
        Ok(reply)
    }
}
