use cpt_core::backend::{build_worker_prompt, PromptContext};
use cpt_core::pool::{NoteKind, PoolRecord};
use cpt_core::templates::PromptTemplates;
use cpt_core::{BranchState, Segment};

const PROBLEM: &str = "Let n be the smallest positive integer such that n^2 + 1 is divisible by 5^3. Find n.";

fn notes() -> Vec<PoolRecord> {
    vec![
        PoolRecord {
            unit_id: 3,
            step: 1,
            branch: 2,
            kind: NoteKind::Insight,
            text: "n^2 = -1 mod 125 has exactly two residues".into(),
        },
        PoolRecord {
            unit_id: 7,
            step: 2,
            branch: 0,
            kind: NoteKind::Pitfall,
            text: "lifting from mod 5 to mod 25 fails if you forget the derivative 2n".into(),
        },
    ]
}

fn branch_with_history() -> BranchState {
    let mut b = BranchState::new(1);
    for (step, text) in ["First, n^2 = -1 mod 5 gives n = 2 or 3.", " Lift to mod 25: n = 7 or 18."]
        .into_iter()
        .enumerate()
    {
        b.append(
            Segment {
                step,
                text: text.into(),
                tokens: 12,
            },
            false,
            1000,
        );
    }
    b
}

pub fn cases() -> Vec<(&'static str, PromptContext)> {
    let t = PromptTemplates::default();
    vec![
        ("empty_broadcast", build_worker_prompt(PROBLEM, &BranchState::new(0), &[], &t).unwrap()),
        ("two_notes", build_worker_prompt(PROBLEM, &BranchState::new(0), &notes(), &t).unwrap()),
        ("history", build_worker_prompt(PROBLEM, &branch_with_history(), &notes(), &t).unwrap()),
    ]
}

/// Pretty JSON of the message list, the on-disk golden format.
pub fn serialize(ctx: &PromptContext) -> String {
    serde_json::to_string_pretty(&ctx.messages).unwrap() + "\n"
}

pub fn check_prompt_goldens() -> Result<(), String> {
    for (name, ctx) in cases() {
        let path = super::fixture_dir("prompts").join(format!("{name}.json"));
        super::check_golden(&path, &serialize(&ctx))?;
    }
    Ok(())
}
