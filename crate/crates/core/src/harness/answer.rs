use std::collections::BTreeMap;

use super::HarnessError;

const BOXED: &str = "\\boxed{";

/// Contents of every `\boxed{...}` with balanced braces, in order.
fn boxed_contents(trace: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = trace[from..].find(BOXED) {
        let start = from + pos + BOXED.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, ch) in trace[start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                out.push(&trace[start..e]);
                from = e + 1;
            }
            None => break,
        }
    }
    out
}

/// Canonical form of an answer string: trimmed, surrounding `$` removed,
/// `\left` / `\right` dropped, whitespace runs collapsed, and plain integers
/// written without sign `+` or leading zeros.
pub fn normalize_answer(raw: &str) -> String {
    let mut s = raw.trim();
    while let Some(inner) = s.strip_prefix('$').and_then(|x| x.strip_suffix('$')) {
        s = inner.trim();
    }
    let s = s.replace("\\left", "").replace("\\right", "");
    let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    canonical_integer(&s).unwrap_or(s)
}

fn canonical_integer(s: &str) -> Option<String> {
    let (neg, digits) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let trimmed = digits.trim_start_matches('0');
    Some(match (trimmed.is_empty(), neg) {
        (true, _) => "0".to_string(),
        (false, true) => format!("-{trimmed}"),
        (false, false) => trimmed.to_string(),
    })
}

/// Normalized content of the last `\boxed{}` in `trace`, if any.
pub fn extract_answer(trace: &str) -> Option<String> {
    boxed_contents(trace)
        .last()
        .map(|b| normalize_answer(b))
        .filter(|a| !a.is_empty())
}

/// Fraction of answers equal to `gold` after normalization. Absent answers
/// count as wrong.
pub fn pass_at_1(answers: &[Option<String>], gold: &str) -> Result<f64, HarnessError> {
    if answers.is_empty() {
        return Err(HarnessError::EmptyAnswers);
    }
    let gold = normalize_answer(gold);
    let hits = answers.iter().filter(|a| a.as_deref() == Some(gold.as_str())).count();
    Ok(hits as f64 / answers.len() as f64)
}

/// Most frequent present answer; ties go to the lexicographically smallest.
pub fn majority_vote(answers: &[Option<String>]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in answers.iter().flatten() {
        *counts.entry(a.as_str()).or_default() += 1;
    }
    // BTreeMap iterates in ascending key order, so `max_by` with a reversed
    // key comparison on ties keeps the smallest string.
    counts
        .into_iter()
        .max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then_with(|| kb.cmp(ka)))
        .map(|(k, _)| k.to_string())
}
