use serde::{Deserialize, Serialize};

use crate::mode::Mode;
use crate::orchestrator::StepTrace;
use crate::pool::{sample_records, BroadcastSet, PoolRecord};
use crate::rng::Stream;

use super::HarnessError;

/// Counts are reported per this many generated tokens.
pub const NORMALIZATION_TOKENS: f64 = 10_240.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfoStats {
    pub step: usize,
    pub active_branches: usize,
    /// Tokens generated by all active branches during the step.
    pub generated_tokens: u64,
    pub candidates: usize,
    pub new_count: usize,
    pub duplicate_count: usize,
    pub normalized_new: f64,
    pub normalized_duplicate: f64,
}

/// `raw * 10240 / generated_tokens` (0 when nothing was generated).
pub fn normalize_per_tokens(raw: usize, generated_tokens: u64) -> f64 {
    if generated_tokens == 0 {
        0.0
    } else {
        raw as f64 * NORMALIZATION_TOKENS / generated_tokens as f64
    }
}

/// Per-step new / duplicate counts for every step that ran extraction.
///
/// The normalizer is the step's actual generated-token total, which equals
/// `active_branches * chunk_tokens` whenever every chunk is full. Runs without
/// synchronized steps, or whose non-final synchronized steps lack extraction
/// logs, are rejected.
pub fn info_statistics(steps: &[StepTrace]) -> Result<Vec<StepInfoStats>, HarnessError> {
    let synced: Vec<&StepTrace> = steps.iter().filter(|s| s.mode != Mode::FreeRun).collect();
    let Some((_, earlier)) = synced.split_last() else {
        return Err(HarnessError::MissingLogs);
    };
    if earlier.iter().any(|s| s.extraction.is_none()) {
        return Err(HarnessError::MissingLogs);
    }
    Ok(steps
        .iter()
        .filter_map(|s| {
            let x = s.extraction.as_ref()?;
            let tokens = s.generated_tokens();
            Some(StepInfoStats {
                step: s.step,
                active_branches: s.active_branches(),
                generated_tokens: tokens,
                candidates: x.candidates,
                new_count: x.new_count,
                duplicate_count: x.duplicate_count,
                normalized_new: normalize_per_tokens(x.new_count, tokens),
                normalized_duplicate: normalize_per_tokens(x.duplicate_count, tokens),
            })
        })
        .collect())
}

/// Uniform sample of `floor(ratio * |pool| / 100)` entries, ordered by unit id,
/// for use as a static broadcast.
pub fn offline_inject(pool: &[PoolRecord], ratio: u32, rng: &mut Stream) -> Result<BroadcastSet, HarnessError> {
    if ratio > 100 {
        return Err(HarnessError::RatioOutOfRange(ratio));
    }
    let count = ratio as usize * pool.len() / 100;
    Ok(BroadcastSet {
        step_issued: 0,
        entries: sample_records(pool, count, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{BranchChunk, ExtractionTrace};
    use crate::pool::NoteKind;
    use crate::rng::derive_rng;

    fn step(step: usize, active: usize, tokens: u64, new: usize, dup: usize) -> StepTrace {
        StepTrace {
            step,
            mode: Mode::Probe,
            broadcast_ids: vec![],
            chunks: (0..active)
                .map(|b| BranchChunk {
                    branch: b,
                    tokens,
                    hit_eos: false,
                })
                .collect(),
            extraction: Some(ExtractionTrace {
                branches: (0..active).collect(),
                candidates: new + dup,
                new_count: new,
                duplicate_count: dup,
                output_tokens: 0,
            }),
            transition: None,
        }
    }

    #[test]
    fn normalization_rule() {
        let s = info_statistics(&[step(0, 64, 1024, 16, 0), step(1, 64, 1024, 0, 0)]).unwrap();
        assert_eq!(s[0].normalized_new, 2.5);
        assert_eq!((s[1].normalized_new, s[1].normalized_duplicate), (0.0, 0.0));
        assert_eq!(normalize_per_tokens(16, 64 * 1024), 2.5);
    }

    #[test]
    fn missing_logs() {
        let mut a = step(0, 2, 10, 1, 0);
        let mut b = step(1, 2, 10, 1, 0);
        a.extraction = None;
        b.extraction = None;
        assert_eq!(info_statistics(&[a.clone(), b]), Err(HarnessError::MissingLogs));
        assert_eq!(info_statistics(&[a.clone()]), Ok(vec![]));
        a.mode = Mode::FreeRun;
        assert_eq!(info_statistics(&[a]), Err(HarnessError::MissingLogs));
    }

    fn pool(n: u64) -> Vec<PoolRecord> {
        (0..n)
            .map(|i| PoolRecord {
                unit_id: i,
                step: 0,
                branch: 0,
                kind: NoteKind::Insight,
                text: format!("n{i}"),
            })
            .collect()
    }

    #[test]
    fn injection_sizes() {
        let p = pool(10);
        let mut rng = derive_rng(0, "inject");
        assert!(offline_inject(&p, 0, &mut rng).unwrap().entries.is_empty());
        assert_eq!(offline_inject(&p, 100, &mut rng).unwrap().entries, p);
        let half = offline_inject(&p, 50, &mut derive_rng(3, "inject")).unwrap();
        assert_eq!(half.entries.len(), 5);
        assert_eq!(half, offline_inject(&p, 50, &mut derive_rng(3, "inject")).unwrap());
        assert_eq!(offline_inject(&pool(3), 50, &mut rng).unwrap().entries.len(), 1);
        assert!(offline_inject(&p, 101, &mut rng).is_err());
    }
}
