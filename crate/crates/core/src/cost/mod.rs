//! Analytic compute accounting.
//!
//! Each request reduces to a linear token term `S` and a quadratic attention
//! term `Q`; summed over a request set they feed
//!
//! ```text
//! attn  = 2 N h^2 [ (2G/A + 2) S + Q/h ]
//! mlp   = 2 N h (3 d_ff) S
//! vocab = 2 h V S
//! ```
//!
//! `S` and `Q` are kept as exact integers; only the final FLOPs are floats.

mod registry;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use registry::{ModelRegistry, BUILTIN_REGISTRY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{kind} request is missing `{field}`")]
    MissingField { kind: &'static str, field: &'static str },
    #[error("{kind} request must not set `{field}`")]
    UnexpectedField { kind: &'static str, field: &'static str },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("unknown model spec `{name}` (known: {}){}", known.join(", "), suggestion.as_ref().map(|s| format!("; did you mean `{s}`?")).unwrap_or_default())]
    UnknownModel {
        name: String,
        known: Vec<String>,
        suggestion: Option<String>,
    },
    #[error("request {request}: {source}")]
    InRequest {
        request: String,
        #[source]
        source: Box<CostError>,
    },
    #[error("registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden_size: u64,
    pub num_layers: u64,
    pub num_heads: u64,
    pub num_kv_heads: u64,
    pub vocab_size: u64,
    /// Active FFN width; for mixture-of-experts models already multiplied by
    /// the number of experts active per token.
    pub ffn_active_dim: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("hidden_size", self.hidden_size),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("num_kv_heads", self.num_kv_heads),
            ("vocab_size", self.vocab_size),
            ("ffn_active_dim", self.ffn_active_dim),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(CostError::InvalidSpec(format!("{name} must be positive")));
        }
        if self.num_kv_heads > self.num_heads {
            return Err(CostError::InvalidSpec(format!(
                "num_kv_heads ({}) exceeds num_heads ({})",
                self.num_kv_heads, self.num_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    FullPrefill,
    CptGeneration,
    CptExtraction,
    LeapSegment,
    DeepconfCompletion,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::FullPrefill => "full_prefill",
            RequestKind::CptGeneration => "cpt_generation",
            RequestKind::CptExtraction => "cpt_extraction",
            RequestKind::LeapSegment => "leap_segment",
            RequestKind::DeepconfCompletion => "deepconf_completion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub kind: RequestKind,
    pub prompt_tokens: u64,
    pub output_tokens: u64,
    /// Tokens already in the KV cache (LeaP segments only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cached_tokens: Option<u64>,
    /// Effective processed length (CPT generation only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_length: Option<u64>,
}

impl RequestRecord {
    fn plain(kind: RequestKind, p: u64, o: u64) -> Self {
        Self {
            kind,
            prompt_tokens: p,
            output_tokens: o,
            cached_tokens: None,
            effective_length: None,
        }
    }

    pub fn full_prefill(p: u64, o: u64) -> Self {
        Self::plain(RequestKind::FullPrefill, p, o)
    }

    /// Generation request in the re-prefill model: the whole context is
    /// processed again, so the effective length is `p + o`.
    pub fn cpt_generation(p: u64, o: u64) -> Self {
        Self {
            effective_length: Some(p + o),
            ..Self::plain(RequestKind::CptGeneration, p, o)
        }
    }

    pub fn cpt_extraction(p: u64, o: u64) -> Self {
        Self::plain(RequestKind::CptExtraction, p, o)
    }

    pub fn leap_segment(cached: u64, p: u64, o: u64) -> Self {
        Self {
            cached_tokens: Some(cached),
            ..Self::plain(RequestKind::LeapSegment, p, o)
        }
    }

    pub fn deepconf_completion(p: u64, o: u64) -> Self {
        Self::plain(RequestKind::DeepconfCompletion, p, o)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let kind = self.kind.as_str();
        let needs_cache = self.kind == RequestKind::LeapSegment;
        let needs_length = self.kind == RequestKind::CptGeneration;
        match (needs_cache, self.cached_tokens) {
            (true, None) => return Err(CostError::MissingField { kind, field: "cached_tokens" }),
            (false, Some(_)) => return Err(CostError::UnexpectedField { kind, field: "cached_tokens" }),
            _ => {}
        }
        match (needs_length, self.effective_length) {
            (true, None) => Err(CostError::MissingField { kind, field: "effective_length" }),
            (false, Some(_)) => Err(CostError::UnexpectedField { kind, field: "effective_length" }),
            _ => Ok(()),
        }
    }
}

/// Exact `(S, Q)` totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SQAggregate {
    pub s: u128,
    pub q: u128,
}

impl SQAggregate {
    pub fn new(s: u128, q: u128) -> Self {
        Self { s, q }
    }
}

impl Add for SQAggregate {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            s: self.s + rhs.s,
            q: self.q + rhs.q,
        }
    }
}

impl AddAssign for SQAggregate {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for SQAggregate {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// How generation requests are charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationAccounting {
    /// Every step re-prefills its whole context: `S = L`, `Q = L^2`.
    #[default]
    Reprefill,
    /// The prompt is already cached: `S = o`, `Q = 2po + o^2`.
    Cached,
}

fn full(p: u64, o: u64) -> SQAggregate {
    let x = u128::from(p) + u128::from(o);
    SQAggregate::new(x, x * x)
}

fn cached(p: u64, o: u64) -> SQAggregate {
    let (p, o) = (u128::from(p), u128::from(o));
    SQAggregate::new(o, 2 * p * o + o * o)
}

pub fn sq_of_request(r: &RequestRecord) -> Result<SQAggregate, CostError> {
    sq_of_request_with(r, GenerationAccounting::Reprefill)
}

pub fn sq_of_request_with(r: &RequestRecord, mode: GenerationAccounting) -> Result<SQAggregate, CostError> {
    r.validate()?;
    let (p, o) = (r.prompt_tokens, r.output_tokens);
    Ok(match r.kind {
        RequestKind::FullPrefill | RequestKind::DeepconfCompletion => full(p, o),
        RequestKind::CptGeneration => match mode {
            GenerationAccounting::Reprefill => {
                let l = u128::from(r.effective_length.expect("validated"));
                SQAggregate::new(l, l * l)
            }
            GenerationAccounting::Cached => cached(p, o),
        },
        RequestKind::CptExtraction => cached(p, o),
        RequestKind::LeapSegment => {
            let c = u128::from(r.cached_tokens.expect("validated"));
            let x = u128::from(p) + u128::from(o);
            SQAggregate::new(x, x * (2 * c + x))
        }
    })
}

pub fn sq_total<'a>(
    records: impl IntoIterator<Item = &'a RequestRecord>,
    mode: GenerationAccounting,
) -> Result<SQAggregate, CostError> {
    records.into_iter().map(|r| sq_of_request_with(r, mode)).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlopsBreakdown {
    pub attention: f64,
    pub mlp: f64,
    pub vocab: f64,
    pub total: f64,
}

impl FlopsBreakdown {
    pub fn petaflops(&self) -> f64 {
        self.total / 1e15
    }
}

impl Add for FlopsBreakdown {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            attention: self.attention + rhs.attention,
            mlp: self.mlp + rhs.mlp,
            vocab: self.vocab + rhs.vocab,
            total: self.total + rhs.total,
        }
    }
}

pub fn flops_total(agg: SQAggregate, spec: &ModelSpec) -> FlopsBreakdown {
    let h = spec.hidden_size as f64;
    let n = spec.num_layers as f64;
    let a = spec.num_heads as f64;
    let g = spec.num_kv_heads as f64;
    let v = spec.vocab_size as f64;
    let dff = spec.ffn_active_dim as f64;
    let s = agg.s as f64;
    let q = agg.q as f64;
    let attention = 2.0 * n * h * h * ((2.0 * g / a + 2.0) * s + q / h);
    let mlp = 2.0 * n * h * (3.0 * dff) * s;
    let vocab = 2.0 * h * v * s;
    FlopsBreakdown {
        attention,
        mlp,
        vocab,
        total: attention + mlp + vocab,
    }
}

/// Which stage of a run issued a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sampling,
    Extraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: usize,
    pub branch: usize,
    pub phase: Phase,
    pub record: RequestRecord,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub sampling_s: f64,
    pub extraction_s: f64,
    pub dedup_s: f64,
    pub total_s: f64,
}

impl Add for PhaseTiming {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            sampling_s: self.sampling_s + rhs.sampling_s,
            extraction_s: self.extraction_s + rhs.extraction_s,
            dedup_s: self.dedup_s + rhs.dedup_s,
            total_s: self.total_s + rhs.total_s,
        }
    }
}

/// Every request of one run plus its stage timings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub entries: Vec<LedgerEntry>,
    pub timing: PhaseTiming,
}

impl CostLedger {
    pub fn push(&mut self, step: usize, branch: usize, phase: Phase, record: RequestRecord) {
        self.entries.push(LedgerEntry {
            step,
            branch,
            phase,
            record,
        });
    }

    pub fn total_output_tokens(&self, phase: Phase) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.phase == phase)
            .map(|e| e.record.output_tokens)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentCost {
    pub requests: usize,
    pub sq: SQAggregate,
    pub flops: FlopsBreakdown,
    pub latency_s: f64,
}

impl Add for ComponentCost {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            requests: self.requests + rhs.requests,
            sq: self.sq + rhs.sq,
            flops: self.flops + rhs.flops,
            latency_s: self.latency_s + rhs.latency_s,
        }
    }
}

/// Per-component compute and latency of one or more runs. Deduplication has
/// latency only; its compute is not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub sampling: ComponentCost,
    pub extraction: ComponentCost,
    pub dedup_latency_s: f64,
    pub total_latency_s: f64,
}

impl CostReport {
    pub fn total_flops(&self) -> f64 {
        self.sampling.flops.total + self.extraction.flops.total
    }

    pub fn merge(self, other: CostReport) -> CostReport {
        CostReport {
            sampling: self.sampling + other.sampling,
            extraction: self.extraction + other.extraction,
            dedup_latency_s: self.dedup_latency_s + other.dedup_latency_s,
            total_latency_s: self.total_latency_s + other.total_latency_s,
        }
    }
}

pub fn cost_report(
    ledger: &CostLedger,
    spec: &ModelSpec,
    mode: GenerationAccounting,
) -> Result<CostReport, CostError> {
    let mut sq = [SQAggregate::default(); 2];
    let mut count = [0usize; 2];
    for e in &ledger.entries {
        let v = sq_of_request_with(&e.record, mode).map_err(|source| CostError::InRequest {
            request: format!("step {} branch {} ({:?})", e.step, e.branch, e.phase),
            source: Box::new(source),
        })?;
        let i = match e.phase {
            Phase::Sampling => 0,
            Phase::Extraction => 1,
        };
        sq[i] += v;
        count[i] += 1;
    }
    let component = |i: usize, latency_s: f64| ComponentCost {
        requests: count[i],
        sq: sq[i],
        flops: if count[i] == 0 {
            FlopsBreakdown::default()
        } else {
            flops_total(sq[i], spec)
        },
        latency_s,
    };
    Ok(CostReport {
        sampling: component(0, ledger.timing.sampling_s),
        extraction: component(1, ledger.timing.extraction_s),
        dedup_latency_s: ledger.timing.dedup_s,
        total_latency_s: ledger.timing.total_s,
    })
}

/// Cost of a finished run.
pub fn ledger_from_run(
    result: &crate::orchestrator::RunResult,
    spec: &ModelSpec,
    mode: GenerationAccounting,
) -> Result<CostReport, CostError> {
    cost_report(&result.ledger, spec, mode)
}

/// `S`/`Q` of a chain of LeaP segments where each segment's output joins the
/// cache of the next: `C_{r+1} = C_r + x_r`.
pub fn leap_chain(initial_cache: u64, segments: &[(u64, u64)]) -> SQAggregate {
    let mut cache = initial_cache;
    let mut total = SQAggregate::default();
    for &(p, o) in segments {
        total += sq_of_request(&RequestRecord::leap_segment(cache, p, o)).expect("well-formed leap record");
        cache += p + o;
    }
    total
}
