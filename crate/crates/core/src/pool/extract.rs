use tracing::warn;

use crate::backend::{render_note_lines, Message, PromptContext, Role};
use crate::branch::BranchState;
use crate::templates::{
    substitute, PromptTemplates, TemplateError, EXTRACTION_USER_FILE, HISTORY_NOTES_SLOT,
    NEW_SEGMENT_SLOT, PRIOR_TRANSCRIPT_SLOT, PROBLEM_SLOT,
};

use super::{Candidate, NoteKind, PoolRecord};

pub const BB_WRITE_OPEN: &str = "[BB_WRITE]";
pub const BB_WRITE_CLOSE: &str = "[/BB_WRITE]";

/// Build the note-extraction request for one branch's newest segment.
///
/// The system message is the blackboard-write prompt. The user message holds
/// the problem, `prior_notes` inside the history block, and the transcript
/// with `new_segment` marked separately. When the branch history already ends
/// with `new_segment` that suffix is not repeated in the prior transcript.
pub fn build_extraction_prompt(
    problem: &str,
    branch: &BranchState,
    new_segment: &str,
    prior_notes: &[PoolRecord],
    templates: &PromptTemplates,
) -> Result<PromptContext, TemplateError> {
    assert!(!new_segment.is_empty(), "extraction needs a nonempty segment");
    let transcript = branch.transcript();
    let prior = transcript.strip_suffix(new_segment).unwrap_or(&transcript);
    let notes = render_note_lines(prior_notes);
    let user = substitute(
        EXTRACTION_USER_FILE,
        &templates.extraction_user,
        &[
            (PROBLEM_SLOT, problem),
            (HISTORY_NOTES_SLOT, notes.as_str()),
            (PRIOR_TRANSCRIPT_SLOT, prior),
            (NEW_SEGMENT_SLOT, new_segment),
        ],
    )?;
    Ok(PromptContext {
        messages: vec![
            Message::new(Role::System, templates.bb_write.trim_end()),
            Message::new(Role::User, user),
        ],
    })
}

fn parse_line(line: &str) -> Option<Candidate> {
    let rest = line.strip_prefix('-')?.trim_start();
    let rest = rest.strip_prefix("(type=")?;
    let close = rest.find(')')?;
    let kind: NoteKind = rest[..close].parse().ok()?;
    let text = rest[close + 1..].trim();
    if text.is_empty() {
        return None;
    }
    Some(Candidate::new(kind, text))
}

/// Parse the last `[BB_WRITE]` block of an extraction response.
///
/// A block without a closing tag runs to the end of the text. Lines that are
/// not `- (type=insight|pitfall) <text>` are skipped with a warning.
pub fn parse_bb_write(raw: &str) -> Vec<Candidate> {
    let Some(open) = raw.rfind(BB_WRITE_OPEN) else {
        return Vec::new();
    };
    let body = &raw[open + BB_WRITE_OPEN.len()..];
    let body = match body.find(BB_WRITE_CLOSE) {
        Some(end) => &body[..end],
        None => {
            warn!("unterminated {BB_WRITE_OPEN} block, reading to end of output");
            body
        }
    };
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .filter_map(|l| {
            let parsed = parse_line(l);
            if parsed.is_none() {
                warn!(line = l, "skipping malformed note line");
            }
            parsed
        })
        .collect()
}

/// Render candidates as a `[BB_WRITE]` block.
pub fn render_bb_write(candidates: &[Candidate]) -> String {
    let mut out = String::from(BB_WRITE_OPEN);
    out.push('\n');
    for c in candidates {
        out.push_str(&format!("- (type={}) {}\n", c.kind.as_str(), c.text));
    }
    out.push_str(BB_WRITE_CLOSE);
    out
}
