//! Deterministic backend replaying a fixture script.
//!
//! Generation entries are keyed by `(problem?, branch, step)`, extraction
//! entries likewise; an entry without a `problem` matches every problem.
//! Entries keyed by prompt fingerprint take precedence over both.
//!
//! Prompt-token usage is the whitespace word count of all request messages,
//! so context growth (history, broadcasts) shows up in cost accounting.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::harness::ProblemRecord;

use super::{BackendError, ChatBackend, ChatRequest, GenerationChunk, Purpose, RequestTag, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedChunk {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub branch: usize,
    pub step: usize,
    pub text: String,
    pub tokens: u64,
    #[serde(default)]
    pub eos: bool,
}

impl ScriptedChunk {
    pub fn new(branch: usize, step: usize, text: impl Into<String>, tokens: u64, eos: bool) -> Self {
        Self {
            problem: None,
            branch,
            step,
            text: text.into(),
            tokens,
            eos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedExtraction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub branch: usize,
    pub step: usize,
    /// Raw model output, normally a `[BB_WRITE]` block.
    pub raw: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintEntry {
    pub fingerprint: String,
    pub text: String,
    pub tokens: u64,
    #[serde(default)]
    pub eos: bool,
}

/// Fixture file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    /// Problems the fixture was written for; used when no dataset is given.
    #[serde(default)]
    pub problems: Vec<ProblemRecord>,
    #[serde(default)]
    pub generate: Vec<ScriptedChunk>,
    #[serde(default)]
    pub extract: Vec<ScriptedExtraction>,
    #[serde(default)]
    pub fingerprints: Vec<FingerprintEntry>,
    /// Response for extraction calls with no matching entry. Without it such
    /// calls are a script miss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_extraction: Option<String>,
}

impl Script {
    /// Read a fixture from a JSON file, or from `script.json` inside a directory.
    pub fn load(path: &Path) -> Result<Script, String> {
        let file = if path.is_dir() {
            path.join("script.json")
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", file.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: RequestTag,
    pub budget_tokens: u64,
    pub fingerprint: String,
}

type Key = (Option<String>, usize, usize);

struct Entry {
    text: String,
    tokens: u64,
    eos: bool,
}

pub struct ScriptedBackend {
    generate: HashMap<Key, Entry>,
    extract: HashMap<Key, Entry>,
    fingerprints: HashMap<String, Entry>,
    default_extraction: Option<String>,
    calls: Mutex<Vec<CallRecord>>,
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Keep the first `n` whitespace-delimited words, preserving original spacing.
fn truncate_words(text: &str, n: u64) -> String {
    let mut seen = 0u64;
    let mut in_word = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_word {
                seen += 1;
                if seen == n {
                    return text[..i].to_string();
                }
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    text.to_string()
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        let generate = script
            .generate
            .into_iter()
            .map(|c| {
                (
                    (c.problem, c.branch, c.step),
                    Entry {
                        text: c.text,
                        tokens: c.tokens,
                        eos: c.eos,
                    },
                )
            })
            .collect();
        let extract = script
            .extract
            .into_iter()
            .map(|e| {
                (
                    (e.problem, e.branch, e.step),
                    Entry {
                        text: e.raw,
                        tokens: e.tokens,
                        eos: true,
                    },
                )
            })
            .collect();
        let fingerprints = script
            .fingerprints
            .into_iter()
            .map(|f| {
                (
                    f.fingerprint,
                    Entry {
                        text: f.text,
                        tokens: f.tokens,
                        eos: f.eos,
                    },
                )
            })
            .collect();
        Self {
            generate,
            extract,
            fingerprints,
            default_extraction: script.default_extraction,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Every request seen so far, in arrival order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("call log lock").clone()
    }

    fn lookup<'a>(map: &'a HashMap<Key, Entry>, tag: &RequestTag) -> Option<&'a Entry> {
        map.get(&(Some(tag.problem_id.clone()), tag.branch, tag.step))
            .or_else(|| map.get(&(None, tag.branch, tag.step)))
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<GenerationChunk, BackendError> {
        let fingerprint = req.context.fingerprint();
        let mut calls = self.calls.lock().expect("call log lock");
        calls.push(CallRecord {
            tag: req.tag.clone(),
            budget_tokens: req.budget_tokens,
            fingerprint: fingerprint.clone(),
        });
        let fallback;
        let entry = match self.fingerprints.get(&fingerprint) {
            Some(e) => e,
            None => match req.tag.purpose {
                Purpose::Generate => Self::lookup(&self.generate, req.tag),
                Purpose::Extract => match Self::lookup(&self.extract, req.tag) {
                    Some(e) => Some(e),
                    None => {
                        fallback = self.default_extraction.as_ref().map(|raw| Entry {
                            text: raw.clone(),
                            tokens: word_count(raw),
                            eos: true,
                        });
                        fallback.as_ref()
                    }
                },
            }
            .ok_or_else(|| BackendError::ScriptMiss(format!("{:?}", req.tag)))?,
        };
        drop(calls);

        let prompt_tokens = req.context.messages.iter().map(|m| word_count(&m.content)).sum();
        let (text, tokens, eos) = if entry.tokens > req.budget_tokens {
            (truncate_words(&entry.text, req.budget_tokens), req.budget_tokens, false)
        } else {
            (entry.text.clone(), entry.tokens, entry.eos)
        };
        Ok(GenerationChunk {
            text,
            token_count: tokens,
            hit_eos: eos,
            usage: Usage {
                prompt_tokens,
                completion_tokens: tokens,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Message, PromptContext, Role};
    use crate::config::SamplingParams;

    fn req<'a>(ctx: &'a PromptContext, s: &'a SamplingParams, tag: &'a RequestTag, budget: u64) -> ChatRequest<'a> {
        ChatRequest {
            context: ctx,
            budget_tokens: budget,
            sampling: s,
            tag,
        }
    }

    #[test]
    fn truncation_keeps_leading_words() {
        assert_eq!(truncate_words("a  b c", 2), "a  b");
        assert_eq!(truncate_words("a b", 5), "a b");
        assert_eq!(truncate_words("  lead x", 1), "  lead");
    }

    #[test]
    fn problem_specific_entries_take_precedence() {
        let mut specific = ScriptedChunk::new(0, 0, "specific", 3, true);
        specific.problem = Some("p1".into());
        let b = ScriptedBackend::new(Script {
            generate: vec![specific, ScriptedChunk::new(0, 0, "generic", 3, true)],
            ..Default::default()
        });
        let ctx = PromptContext {
            messages: vec![Message::new(Role::User, "one two three")],
        };
        let s = SamplingParams::default();
        let mut tag = RequestTag {
            problem_id: "p1".into(),
            branch: 0,
            step: 0,
            purpose: Purpose::Generate,
        };
        let c = b.complete(&req(&ctx, &s, &tag, 10)).unwrap();
        assert_eq!(c.text, "specific");
        assert_eq!(c.usage.prompt_tokens, 3);
        tag.problem_id = "p2".into();
        assert_eq!(b.complete(&req(&ctx, &s, &tag, 10)).unwrap().text, "generic");
        tag.step = 9;
        assert!(matches!(
            b.complete(&req(&ctx, &s, &tag, 10)),
            Err(BackendError::ScriptMiss(_))
        ));
        assert_eq!(b.calls().len(), 3);
    }

    #[test]
    fn fingerprint_and_default_extraction() {
        let ctx = PromptContext {
            messages: vec![Message::new(Role::User, "hello")],
        };
        let b = ScriptedBackend::new(Script {
            fingerprints: vec![FingerprintEntry {
                fingerprint: ctx.fingerprint(),
                text: "by print".into(),
                tokens: 2,
                eos: true,
            }],
            default_extraction: Some("[BB_WRITE]\n[/BB_WRITE]".into()),
            ..Default::default()
        });
        let s = SamplingParams::default();
        let tag = RequestTag {
            problem_id: "p".into(),
            branch: 3,
            step: 4,
            purpose: Purpose::Extract,
        };
        assert_eq!(b.complete(&req(&ctx, &s, &tag, 10)).unwrap().text, "by print");
        let other = PromptContext::default();
        let c = b.complete(&req(&other, &s, &tag, 10)).unwrap();
        assert_eq!(c.text, "[BB_WRITE]\n[/BB_WRITE]");
        assert_eq!(c.token_count, 2);
    }

    #[test]
    fn repeated_requests_are_identical() {
        let b = ScriptedBackend::new(Script {
            generate: vec![ScriptedChunk::new(1, 2, "same", 1, false)],
            ..Default::default()
        });
        let ctx = PromptContext::default();
        let s = SamplingParams::default();
        let tag = RequestTag {
            problem_id: "p".into(),
            branch: 1,
            step: 2,
            purpose: Purpose::Generate,
        };
        let a = b.complete(&req(&ctx, &s, &tag, 4)).unwrap();
        let c = b.complete(&req(&ctx, &s, &tag, 4)).unwrap();
        assert_eq!(a, c);
    }
}
