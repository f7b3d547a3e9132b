//! Strategies and property checks shared by the proptest suite and the
//! acceptance runner.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use cpt_core::config::{RawRunConfig, RawSampling, TopK};
use cpt_core::cost::{leap_chain, SQAggregate};
use cpt_core::embedding::{Embedder, MockEmbedder};
use cpt_core::harness::{majority_vote, pass_at_1};
use cpt_core::pool::{parse_bb_write, render_bb_write, sample_broadcast, AdmitResult, Candidate, NoteKind, SharedPool};
use cpt_core::rng::derive_rng;
use cpt_core::scheduler::SchedulerState;
use cpt_core::Mode;

pub fn note_kind() -> impl Strategy<Value = NoteKind> {
    prop_oneof![Just(NoteKind::Insight), Just(NoteKind::Pitfall)]
}

/// Single-line note text without block tags or surrounding whitespace.
pub fn note_text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9+*/=^(),.<>'_-]([a-zA-Z0-9+*/=^(),.<>'_ -]{0,60}[a-zA-Z0-9)])?"
}

pub fn candidates(max: usize) -> impl Strategy<Value = Vec<Candidate>> {
    prop::collection::vec((note_kind(), note_text()).prop_map(|(k, t)| Candidate::new(k, t)), 0..max)
}

pub fn check_bb_write_round_trip(units: Vec<Candidate>) -> Result<(), TestCaseError> {
    let rendered = render_bb_write(&units);
    prop_assert_eq!(parse_bb_write(&rendered), units.clone());
    // Surrounding chatter and an earlier stale block do not change the result.
    let noisy = format!("thinking...\n[BB_WRITE]\n- (type=insight) stale\n[/BB_WRITE]\n{rendered}\ndone");
    prop_assert_eq!(parse_bb_write(&noisy), units);
    Ok(())
}

/// Words drawn from a small vocabulary so that duplicates and near duplicates
/// show up often.
const VOCAB: [&str; 12] = [
    "parity", "modulus", "root", "bound", "prime", "sum", "product", "square", "cycle", "graph", "even", "odd",
];

#[derive(Debug, Clone)]
pub struct AdmissionCase {
    pub steps: Vec<Vec<(usize, Candidate)>>,
    pub threshold: f64,
    pub broadcast_size: usize,
    pub seed: u64,
}

pub fn admission_case() -> impl Strategy<Value = AdmissionCase> {
    let cand = (0usize..4, note_kind(), prop::collection::vec(0..VOCAB.len(), 1..5)).prop_map(|(b, k, words)| {
        let text = words.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" ");
        (b, Candidate::new(k, text))
    });
    (
        prop::collection::vec(prop::collection::vec(cand, 0..8), 1..8),
        0.3f64..=1.0,
        1usize..12,
        any::<u64>(),
    )
        .prop_map(|(steps, threshold, broadcast_size, seed)| AdmissionCase {
            steps,
            threshold,
            broadcast_size,
            seed,
        })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dedup soundness against a brute-force cosine oracle, count conservation
/// and the broadcast size bound.
pub fn check_admission(case: AdmissionCase) -> Result<(), TestCaseError> {
    let e = MockEmbedder::default();
    let mut pool = SharedPool::new();
    let mut rng = derive_rng(case.seed, "broadcast");
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (step, cands) in case.steps.iter().enumerate() {
        let b = sample_broadcast(&pool, case.broadcast_size, &mut rng, step);
        prop_assert_eq!(b.entries.len(), pool.len().min(case.broadcast_size));
        let ids = b.ids();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(ids.iter().all(|&id| (id as usize) < pool.len()));

        pool.begin_step(step);
        for (branch, c) in cands {
            let v = e.embed(&c.text).unwrap().values().to_vec();
            let oracle_max = kept.iter().map(|k| dot(k, &v) / (dot(k, k) * dot(&v, &v)).sqrt()).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
            let expect_admit = oracle_max.is_none_or(|s| s < case.threshold - 1e-12);
            let expect_reject = oracle_max.is_some_and(|s| s >= case.threshold + 1e-12);
            match pool.admit(c, *branch, &e, case.threshold).unwrap() {
                AdmitResult::Admitted(_) => {
                    prop_assert!(!expect_reject, "admitted near-duplicate {:?} ({:?})", c.text, oracle_max);
                    kept.push(v);
                }
                AdmitResult::Duplicate(s) => {
                    prop_assert!(!expect_admit, "rejected novel note {:?} ({:?})", c.text, oracle_max);
                    prop_assert!(s >= case.threshold);
                }
            }
        }
    }
    let total_new: usize = pool.admission_log().iter().map(|c| c.new).sum();
    let total_dup: usize = pool.admission_log().iter().map(|c| c.duplicate).sum();
    prop_assert_eq!(total_new, pool.len());
    prop_assert_eq!(total_new + total_dup, case.steps.iter().map(Vec::len).sum::<usize>());
    prop_assert_eq!(pool.len(), kept.len());
    Ok(())
}

pub fn leap_segments() -> impl Strategy<Value = (u64, Vec<(u64, u64)>)> {
    (0u64..100_000, prop::collection::vec((0u64..5_000, 0u64..5_000), 0..20))
}

/// Each segment costs `x (2 C + x)`, so the chain telescopes to
/// `(C_0 + X)^2 - C_0^2` with `X` the total of `p + o`.
pub fn check_leap_telescoping((c0, segs): (u64, Vec<(u64, u64)>)) -> Result<(), TestCaseError> {
    let x: u128 = segs.iter().map(|&(p, o)| u128::from(p + o)).sum();
    let c0 = u128::from(c0);
    let expected = SQAggregate::new(x, (c0 + x) * (c0 + x) - c0 * c0);
    prop_assert_eq!(leap_chain(c0 as u64, &segs), expected);
    Ok(())
}

pub fn answer_sets() -> impl Strategy<Value = Vec<Option<String>>> {
    prop::collection::vec(prop::option::of(prop::sample::select(vec!["1", "2", "3", "10", "x"]).prop_map(String::from)), 1..12)
}

/// Vote outcome and pass rate do not depend on branch order.
pub fn check_vote_permutation((answers, seed): (Vec<Option<String>>, u64)) -> Result<(), TestCaseError> {
    use rand::seq::SliceRandom;
    let mut shuffled = answers.clone();
    shuffled.shuffle(&mut derive_rng(seed, "shuffle"));
    prop_assert_eq!(majority_vote(&answers), majority_vote(&shuffled));
    prop_assert_eq!(pass_at_1(&answers, "2").unwrap(), pass_at_1(&shuffled, "2").unwrap());
    // The winner has the highest count among present answers.
    if let Some(w) = majority_vote(&answers) {
        let count = |a: &str| answers.iter().filter(|x| x.as_deref() == Some(a)).count();
        prop_assert!(answers.iter().flatten().all(|a| count(a) <= count(&w)));
    } else {
        prop_assert!(answers.iter().all(Option::is_none));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SchedulerCase {
    pub counts: Vec<usize>,
    pub window: usize,
    pub start: f64,
    pub stop: f64,
}

pub fn scheduler_case() -> impl Strategy<Value = SchedulerCase> {
    (prop::collection::vec(0usize..20, 1..40), 1usize..5, 0.05f64..=1.0)
        .prop_flat_map(|(counts, window, start)| (Just(counts), Just(window), Just(start), 0.0..start))
        .prop_map(|(counts, window, start, stop)| SchedulerCase {
            counts,
            window,
            start,
            stop,
        })
}

/// Replays the count sequence through the scheduler and an independent
/// window-by-window reference.
pub fn check_scheduler(case: SchedulerCase) -> Result<(), TestCaseError> {
    let eps = 1e-9;
    let mut s = SchedulerState::new(case.window, case.start, case.stop, eps);
    let mut mode = Mode::Probe;
    let mut g_ref = None;
    for (i, &n) in case.counts.iter().enumerate() {
        if mode == Mode::FreeRun {
            prop_assert!(s.observe(n).is_err());
            break;
        }
        let t = s.observe(n).unwrap();
        let len = i + 1;
        let mut expected = None;
        if len % case.window == 0 {
            let g = case.counts[len - case.window..len].iter().sum::<usize>() as f64 / case.window as f64;
            match g_ref {
                None => g_ref = Some(g),
                Some(r) => {
                    let ratio = g / (r + eps);
                    let next = match mode {
                        Mode::Probe if ratio < case.start => Mode::Broadcast,
                        Mode::Broadcast if ratio < case.stop => Mode::FreeRun,
                        m => m,
                    };
                    if next != mode {
                        expected = Some((mode, next));
                        mode = next;
                    }
                }
            }
        }
        prop_assert_eq!(t.map(|t| (t.from, t.to)), expected);
        if let Some(t) = t {
            prop_assert_eq!(t.step, len);
        }
        prop_assert_eq!(s.mode(), mode);
    }
    Ok(())
}

pub fn raw_config() -> impl Strategy<Value = RawRunConfig> {
    (
        (1u32..=256, 1u64..=4096, 0u64..=60_000, 1usize..=1024, 0.0f64..=1.0, 1usize..=8),
        (0.01f64..=1.0, 0.0f64..1.0, 1e-12f64..1e-3, 1u64..=4096, 0usize..=256, any::<u64>()),
        (0.0f64..2.0, 0.01f64..=1.0, prop::option::of(1u32..100)),
    )
        .prop_map(|((k, c, extra, m, tau, w), (start, stop_frac, eps, xt, hist, seed), (temp, top_p, top_k))| {
            RawRunConfig {
                branch_count: Some(k),
                chunk_tokens: Some(c),
                max_tokens: Some(c + extra),
                broadcast_size: Some(m),
                dedup_threshold: Some(tau),
                window_size: Some(w),
                start_threshold: Some(start),
                stop_threshold: Some(start * stop_frac),
                epsilon: Some(eps),
                extraction_tokens: Some(xt),
                history_notes: Some(hist),
                seed: Some(seed),
                sampling: Some(RawSampling {
                    temperature: Some(temp),
                    top_p: Some(top_p),
                    top_k: Some(top_k.map_or(TopK::Unlimited, TopK::Limited)),
                }),
            }
        })
}
