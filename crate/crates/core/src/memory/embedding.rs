use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{normalize, BackendError, EmbeddingProvider};

pub const HASH_DIM: usize = 64;

/// Offline embedding: signed feature hashing of character trigrams into a
/// 64-dim vector, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    seed: u64,
}

impl HashEmbedding {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn fnv1a(&self, bytes: &[u8]) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        // final avalanche so the sign bit depends on every input byte
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^ (h >> 33)
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = std::iter::once('^')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once('$'))
            .collect();
        let mut v = vec![0.0; HASH_DIM];
        let mut buf = String::new();
        for gram in chars.windows(3.min(chars.len())) {
            buf.clear();
            buf.extend(gram);
            let h = self.fnv1a(buf.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % HASH_DIM as u64) as usize] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            let h = self.fnv1a(text.as_bytes());
            v[(h % HASH_DIM as u64) as usize] = 1.0;
        }
        normalize(v).expect("nonzero by construction")
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn id(&self) -> String {
        format!("hash{HASH_DIM}:{}", self.seed)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    provider: String,
    digest: String,
    vector: Vec<f64>,
}

/// Wraps a provider with an append-only JSON-lines cache keyed by
/// `(provider id, sha256(text))`.
pub struct CachedEmbedding<P> {
    inner: P,
    path: PathBuf,
    cache: Mutex<HashMap<(String, String), Vec<f64>>>,
}

impl<P: EmbeddingProvider> CachedEmbedding<P> {
    pub fn open(inner: P, path: &Path) -> Result<Self, BackendError> {
        let mut cache = HashMap::new();
        if path.exists() {
            for (i, line) in std::fs::read_to_string(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine =
                    serde_json::from_str(line).map_err(|e| BackendError::Malformed(format!("cache line {}: {e}", i + 1)))?;
                cache.insert((entry.provider, entry.digest), entry.vector);
            }
        }
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            cache: Mutex::new(cache),
        })
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedding<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let provider = self.inner.id();
        let mut cache = self.cache.lock().unwrap();
        let mut missing: Vec<String> = Vec::new();
        for t in texts {
            let key = (provider.clone(), text_digest(t));
            if !cache.contains_key(&key) && !missing.contains(t) {
                missing.push(t.clone());
            }
        }
        if !missing.is_empty() {
            let fresh = self.inner.embed(&missing)?;
            let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&self.path)?;
            for (t, v) in missing.iter().zip(fresh) {
                let line = CacheLine {
                    provider: provider.clone(),
                    digest: text_digest(t),
                    vector: v,
                };
                writeln!(file, "{}", serde_json::to_string(&line).expect("serializable"))?;
                cache.insert((line.provider, line.digest), line.vector);
            }
        }
        Ok(texts.iter().map(|t| cache[&(provider.clone(), text_digest(t))].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashEmbedding::new(0);
        let v = e.embed(&["a".into(), "a".into(), String::new()]).unwrap();
        assert_eq!(v[0], v[1]);
        for x in &v {
            assert_eq!(x.len(), HASH_DIM);
            let n: f64 = x.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert_ne!(HashEmbedding::new(1).embed_one("hello"), e.embed_one("hello"));
    }

    #[test]
    fn cosine_self_one_and_symmetric() {
        let e = HashEmbedding::new(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let texts: Vec<String> = (0..100)
            .map(|_| {
                let len = rng.gen_range(1..40);
                (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
            })
            .collect();
        let v = e.embed(&texts).unwrap();
        for i in 0..v.len() {
            assert!((cosine(&v[i], &v[i]) - 1.0).abs() < 1e-9);
            let j = (i * 7 + 3) % v.len();
            assert_eq!(cosine(&v[i], &v[j]), cosine(&v[j], &v[i]));
        }
    }

    struct Counting {
        inner: HashEmbedding,
        calls: Mutex<usize>,
    }

    impl EmbeddingProvider for Counting {
        fn id(&self) -> String {
            self.inner.id()
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
            *self.calls.lock().unwrap() += texts.len();
            self.inner.embed(texts)
        }
    }

    #[test]
    fn cache_avoids_repeat_calls() {
        let dir = std::env::temp_dir().join(format!("iagents-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("emb.jsonl");
        let _ = std::fs::remove_file(&path);
        let provider = Counting {
            inner: HashEmbedding::new(0),
            calls: Mutex::new(0),
        };
        let cached = CachedEmbedding::open(provider, &path).unwrap();
        let a = cached.embed(&["x".into(), "y".into(), "x".into()]).unwrap();
        let b = cached.embed(&["y".into()]).unwrap();
        assert_eq!(a[1], b[0]);
        assert_eq!(*cached.inner.calls.lock().unwrap(), 2);
        let reopened = CachedEmbedding::open(HashEmbedding::new(0), &path).unwrap();
        assert_eq!(reopened.cached_len(), 2);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
