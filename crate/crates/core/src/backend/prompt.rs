use crate::branch::BranchState;
use crate::pool::PoolRecord;
use crate::templates::{
    substitute, PromptTemplates, TemplateError, CONTINUATION_SLOT, NOTES_SLOT, PROBLEM_SLOT,
    SERIALIZATION_FILE, WORKER_SLOT,
};

use super::{Message, PromptContext};

/// Render notes one per line as `- (type=<kind>) <text>`.
pub fn render_note_lines<'a>(notes: impl IntoIterator<Item = &'a PoolRecord>) -> String {
    notes
        .into_iter()
        .map(|n| format!("- (type={}) {}", n.kind.as_str(), n.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Assemble the worker request for one branch:
/// `[system: broadcast block] [user: worker instruction] [user: problem] [assistant: history]`.
///
/// The system message is always present (empty body before broadcasting
/// starts). The assistant continuation is omitted while the history is empty.
pub fn build_worker_prompt(
    problem: &str,
    branch: &BranchState,
    broadcast: &[PoolRecord],
    templates: &PromptTemplates,
) -> Result<PromptContext, TemplateError> {
    let sections = templates.serialization_sections()?;
    let notes = render_note_lines(broadcast);
    let instruction = templates.worker_instruction();
    let history = branch.transcript();
    let slots = [
        (NOTES_SLOT, notes.as_str()),
        (WORKER_SLOT, instruction.as_str()),
        (PROBLEM_SLOT, problem),
        (CONTINUATION_SLOT, history.as_str()),
    ];
    let mut messages = Vec::with_capacity(4);
    for (section, (slot, value)) in sections.iter().zip(slots) {
        if slot == CONTINUATION_SLOT && value.is_empty() {
            continue;
        }
        let content = substitute(SERIALIZATION_FILE, &section.body, &[(slot, value)])?;
        messages.push(Message::new(section.role, content));
    }
    Ok(PromptContext { messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Role;
    use crate::branch::Segment;
    use crate::pool::NoteKind;

    fn note(id: u64, kind: NoteKind, text: &str) -> PoolRecord {
        PoolRecord {
            unit_id: id,
            step: 0,
            branch: 0,
            kind,
            text: text.into(),
        }
    }

    #[test]
    fn empty_broadcast_and_history() {
        let t = PromptTemplates::default();
        let ctx = build_worker_prompt("What is 1+1?", &BranchState::new(0), &[], &t).unwrap();
        assert_eq!(ctx.messages.len(), 3);
        assert_eq!(ctx.messages[0].role, Role::System);
        assert_eq!(
            ctx.messages[0].content,
            "[BLACKBOARD BROADCAST]\n\n[/BLACKBOARD BROADCAST]"
        );
        assert_eq!(ctx.messages[1].content, t.worker_instruction());
        assert_eq!(ctx.messages[2].content, "What is 1+1?");
    }

    #[test]
    fn notes_and_history() {
        let t = PromptTemplates::default();
        let mut b = BranchState::new(0);
        b.append(
            Segment {
                step: 0,
                text: "step1".into(),
                tokens: 1,
            },
            false,
            100,
        );
        let notes = [
            note(0, NoteKind::Insight, "a+b is even"),
            note(1, NoteKind::Pitfall, "x may be zero"),
        ];
        let ctx = build_worker_prompt("P", &b, &notes, &t).unwrap();
        assert_eq!(ctx.messages.len(), 4);
        assert_eq!(
            ctx.messages[0].content,
            "[BLACKBOARD BROADCAST]\n- (type=insight) a+b is even\n- (type=pitfall) x may be zero\n[/BLACKBOARD BROADCAST]"
        );
        assert_eq!(ctx.messages[3].role, Role::Assistant);
        assert_eq!(ctx.messages[3].content, "step1");
        let again = build_worker_prompt("P", &b, &notes, &t).unwrap();
        assert_eq!(ctx, again);
    }
}
