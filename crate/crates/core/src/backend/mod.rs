//! Chunked chat-model generation.
//!
//! [`ChatBackend`] is the single request primitive. [`generate_chunk`] and
//! [`continue_until_done`] enforce the budget and finish-state contracts on top
//! of it, so every backend implementation gets the same guarantees.

mod openai;
mod prompt;
mod scripted;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::branch::{BranchState, FinishReason, Segment};
use crate::config::SamplingParams;

pub use openai::HttpChatBackend;
pub use prompt::{build_worker_prompt, render_note_lines};
pub use scripted::{
    CallRecord, FingerprintEntry, Script, ScriptedBackend, ScriptedChunk, ScriptedExtraction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// Ordered chat messages sent for one request.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptContext {
    pub messages: Vec<Message>,
}

impl PromptContext {
    /// Stable content hash used by scripted fixtures.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.messages {
            h.update(format!("{:?}", m.role).as_bytes());
            h.update((m.content.len() as u64).to_le_bytes());
            h.update(m.content.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// True when the final message is an assistant continuation prefix.
    pub fn ends_with_assistant(&self) -> bool {
        self.messages.last().is_some_and(|m| m.role == Role::Assistant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationChunk {
    pub text: String,
    pub token_count: u64,
    pub hit_eos: bool,
    pub usage: Usage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Generate,
    Extract,
}

/// Identifies a request within a run. Network backends ignore it; the
/// scripted backend keys its responses on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestTag {
    pub problem_id: String,
    pub branch: usize,
    pub step: usize,
    pub purpose: Purpose,
}

pub struct ChatRequest<'a> {
    pub context: &'a PromptContext,
    pub budget_tokens: u64,
    pub sampling: &'a SamplingParams,
    pub tag: &'a RequestTag,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("script has no entry for {0}")]
    ScriptMiss(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

/// A chat model that can produce up to `budget_tokens` completion tokens.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<GenerationChunk, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<GenerationChunk, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<GenerationChunk, BackendError> {
        (**self).complete(request)
    }
}

/// One generation request of at most `budget_tokens` tokens.
pub fn generate_chunk(
    backend: &dyn ChatBackend,
    context: &PromptContext,
    budget_tokens: u64,
    sampling: &SamplingParams,
    tag: &RequestTag,
) -> Result<GenerationChunk, BackendError> {
    if budget_tokens == 0 {
        return Err(BackendError::Precondition("token budget must be at least 1".into()));
    }
    let chunk = backend.complete(&ChatRequest {
        context,
        budget_tokens,
        sampling,
        tag,
    })?;
    if chunk.token_count != chunk.usage.completion_tokens {
        return Err(BackendError::Protocol(format!(
            "token count {} disagrees with reported usage {}",
            chunk.token_count, chunk.usage.completion_tokens
        )));
    }
    if chunk.token_count == 0 && !chunk.hit_eos {
        return Err(BackendError::Protocol(
            "empty chunk without end of sequence".into(),
        ));
    }
    if chunk.token_count > budget_tokens {
        return Err(BackendError::Protocol(format!(
            "backend returned {} tokens for a budget of {budget_tokens}",
            chunk.token_count
        )));
    }
    Ok(chunk)
}

/// Decode `branch` to completion in a single request with the remaining
/// budget, append the result, and mark the branch finished.
pub fn continue_until_done(
    backend: &dyn ChatBackend,
    context: &PromptContext,
    branch: &mut BranchState,
    sampling: &SamplingParams,
    max_tokens: u64,
    tag: &RequestTag,
) -> Result<GenerationChunk, BackendError> {
    if branch.finished() {
        return Err(BackendError::Precondition(format!(
            "branch {} is already finished",
            branch.branch_id
        )));
    }
    let budget = branch.remaining(max_tokens);
    let chunk = generate_chunk(backend, context, budget, sampling, tag)?;
    branch.append(
        Segment {
            step: tag.step,
            text: chunk.text.clone(),
            tokens: chunk.token_count,
        },
        chunk.hit_eos,
        max_tokens,
    );
    if !branch.finished() {
        // The server stopped short of the cap without signalling EOS.
        branch.force_finish(FinishReason::LengthCap);
    }
    Ok(chunk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(branch: usize, step: usize) -> RequestTag {
        RequestTag {
            problem_id: "p".into(),
            branch,
            step,
            purpose: Purpose::Generate,
        }
    }

    fn script() -> ScriptedBackend {
        ScriptedBackend::new(Script {
            generate: vec![
                ScriptedChunk::new(0, 0, "Let x be the unknown and proceed", 2048, false),
                ScriptedChunk::new(1, 0, "short answer \\boxed{3}", 512, true),
                ScriptedChunk::new(2, 0, "eos early", 100, true),
            ],
            ..Default::default()
        })
    }

    #[test]
    fn scripted_echo() {
        let b = script();
        let ctx = PromptContext::default();
        let s = SamplingParams::default();
        let c = generate_chunk(&b, &ctx, 2048, &s, &tag(0, 0)).unwrap();
        assert_eq!((c.text.as_str(), c.token_count, c.hit_eos), ("Let x be the unknown and proceed", 2048, false));
        let c = generate_chunk(&b, &ctx, 2048, &s, &tag(1, 0)).unwrap();
        assert_eq!((c.token_count, c.hit_eos), (512, true));
    }

    #[test]
    fn budget_truncates_script() {
        let b = script();
        let c = generate_chunk(&b, &PromptContext::default(), 1, &SamplingParams::default(), &tag(0, 0)).unwrap();
        assert_eq!(c.token_count, 1);
        assert!(!c.hit_eos);
        assert_eq!(c.text, "Let");
        assert_eq!(c.usage.completion_tokens, 1);
    }

    #[test]
    fn zero_budget_is_a_precondition_error() {
        let b = script();
        let err = generate_chunk(&b, &PromptContext::default(), 0, &SamplingParams::default(), &tag(0, 0)).unwrap_err();
        assert!(matches!(err, BackendError::Precondition(_)));
        assert!(!err.is_retryable());
    }

    #[test]
    fn continue_uses_remaining_budget() {
        let b = script();
        let mut branch = BranchState::new(0);
        branch.append(
            Segment {
                step: 0,
                text: "x".into(),
                tokens: 36_000,
            },
            false,
            38_000,
        );
        let c = continue_until_done(&b, &PromptContext::default(), &mut branch, &SamplingParams::default(), 38_000, &tag(0, 0)).unwrap();
        assert_eq!(c.token_count, 2000);
        assert_eq!(b.calls()[0].budget_tokens, 2000);
        assert_eq!(branch.finish_reason(), FinishReason::LengthCap);
        assert!(branch.accounting_consistent());
    }

    #[test]
    fn continue_marks_eos() {
        let b = script();
        let mut branch = BranchState::new(2);
        continue_until_done(&b, &PromptContext::default(), &mut branch, &SamplingParams::default(), 38_000, &tag(2, 0)).unwrap();
        assert_eq!(branch.finish_reason(), FinishReason::Eos);
        assert_eq!(branch.generated_tokens(), 100);
        let err = continue_until_done(&b, &PromptContext::default(), &mut branch, &SamplingParams::default(), 38_000, &tag(2, 1)).unwrap_err();
        assert!(matches!(err, BackendError::Precondition(_)));
    }

    #[test]
    fn fingerprint_is_content_sensitive() {
        let a = PromptContext {
            messages: vec![Message::new(Role::User, "ab")],
        };
        let b = PromptContext {
            messages: vec![Message::new(Role::User, "a"), Message::new(Role::User, "b")],
        };
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
