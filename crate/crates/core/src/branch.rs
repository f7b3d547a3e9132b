use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    None,
    Eos,
    LengthCap,
}

/// One appended piece of a branch's private trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Search step that produced the segment; FreeRun continuations use the
    /// step index following the last synchronized step.
    pub step: usize,
    pub text: String,
    pub tokens: u64,
}

/// A reasoning branch: private append-only history plus token accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub branch_id: usize,
    history: Vec<Segment>,
    generated_tokens: u64,
    finish_reason: FinishReason,
}

impl BranchState {
    pub fn new(branch_id: usize) -> Self {
        Self {
            branch_id,
            history: Vec::new(),
            generated_tokens: 0,
            finish_reason: FinishReason::None,
        }
    }

    pub fn history(&self) -> &[Segment] {
        &self.history
    }

    pub fn generated_tokens(&self) -> u64 {
        self.generated_tokens
    }

    pub fn finished(&self) -> bool {
        self.finish_reason != FinishReason::None
    }

    pub fn finish_reason(&self) -> FinishReason {
        self.finish_reason
    }

    /// The full private trace.
    pub fn transcript(&self) -> String {
        self.history.iter().map(|s| s.text.as_str()).collect()
    }

    /// The most recently appended segment (Δh).
    pub fn last_segment(&self) -> Option<&Segment> {
        self.history.last()
    }

    pub fn remaining(&self, max_tokens: u64) -> u64 {
        max_tokens.saturating_sub(self.generated_tokens)
    }

    /// Append a generated segment and update the finish state. A branch is
    /// finished by EOS, or by reaching `max_tokens`.
    ///
    /// Panics if the branch is already finished; callers must never generate
    /// for finished branches.
    pub fn append(&mut self, segment: Segment, hit_eos: bool, max_tokens: u64) {
        assert!(
            !self.finished(),
            "branch {} received a segment after finishing",
            self.branch_id
        );
        self.generated_tokens += segment.tokens;
        self.history.push(segment);
        if hit_eos {
            self.finish_reason = FinishReason::Eos;
        } else if self.generated_tokens >= max_tokens {
            self.finish_reason = FinishReason::LengthCap;
        }
    }

    /// Mark finished without a new segment (a continuation that returned no
    /// tokens at all still resolves the branch).
    pub fn force_finish(&mut self, reason: FinishReason) {
        debug_assert!(reason != FinishReason::None);
        self.finish_reason = reason;
    }

    /// `generated_tokens` equals the sum of segment token counts.
    pub fn accounting_consistent(&self) -> bool {
        self.history.iter().map(|s| s.tokens).sum::<u64>() == self.generated_tokens
    }
}
