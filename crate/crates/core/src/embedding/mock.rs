use super::{EmbedError, Embedder, EmbeddingVector};

pub const MOCK_DIMENSION: usize = 256;

/// Offline embedder: hashed bag of words.
///
/// Text is lowercased and split into maximal ASCII-alphanumeric runs; each
/// token adds 1 to bucket `mix(fnv1a64(token)) % dimension`, then the vector is
/// L2-normalized. Word order is ignored. Two distinct tokens colliding in one
/// bucket make their texts look more similar than they are; with 256 buckets
/// this is rare for short notes. Text without any alphanumeric token is
/// embedded as a single token made of the whole trimmed text.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    dimension: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self {
            dimension: MOCK_DIMENSION,
        }
    }
}

// Low bits of raw FNV-1a depend only on the low bits of the running state, so
// a collision on a prefix carries over to every shared suffix. The splitmix64
// finalizer spreads the high bits down before the modulus.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased alphanumeric tokens of `text`.
pub fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bucket(&self, token: &str) -> usize {
        (mix(fnv1a64(token.as_bytes())) % self.dimension as u64) as usize
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut toks = tokens(trimmed);
        if toks.is_empty() {
            toks.push(trimmed.to_string());
        }
        let mut raw = vec![0.0; self.dimension];
        for t in &toks {
            raw[self.bucket(t)] += 1.0;
        }
        EmbeddingVector::from_raw(raw)
    }
}
