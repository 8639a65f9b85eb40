use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Provider, ProviderKind};
use crate::error::Result;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    fn next_signed_unit(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deterministic bag-of-tokens embedding.
///
/// Each lowercased alphanumeric token seeds a splitmix64 stream through its
/// FNV-1a hash; the text vector is the normalized mean of the token vectors.
/// Texts without tokens map to the first basis vector.
pub fn mock_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 2, "mock embedding needs dim >= 2");
    let seed_mix = SplitMix64(seed).next_u64();
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for tok in tokens(text) {
        let mut rng = SplitMix64(fnv1a(tok.as_bytes()) ^ seed_mix);
        acc.iter_mut().for_each(|a| *a += rng.next_signed_unit());
        count += 1;
    }
    if count == 0 || !crate::vector::normalize(&mut acc) {
        let mut basis = vec![0.0; dim];
        basis[0] = 1.0;
        return basis;
    }
    acc
}

const COPULAS: [&str; 4] = ["is", "are", "was", "were"];
const PREPOSITIONS: [&str; 9] = ["in", "at", "on", "of", "by", "for", "to", "from", "with"];

fn join(words: &[&str]) -> String {
    words.join(" ")
}

/// Template questions built from the fact's own tokens.
///
/// Declaratives of the form `<subject> <copula> <predicate>` get a subject
/// question ("Where is X located?"), an object question ("What is located in
/// Y?") and a confirmation question. Other sentences fall back to
/// confirmation-style templates. Output length is exactly `n`.
pub fn template_questions(fact: &str, n: usize) -> Vec<String> {
    let trimmed = fact.trim().trim_end_matches(['.', '!', '?']);
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    let mut out = Vec::new();

    let copula = words
        .iter()
        .position(|w| COPULAS.contains(&w.to_lowercase().as_str()))
        .filter(|&c| c > 0 && c + 1 < words.len());

    let body = match words.first() {
        Some(first) if matches!(*first, "The" | "A" | "An") => {
            let mut w = words.clone();
            let lowered = first.to_lowercase();
            w[0] = &lowered;
            join(&w)
        }
        _ => join(&words),
    };

    if let Some(c) = copula {
        let cop = words[c].to_lowercase();
        let mut subject_words = words[..c].to_vec();
        let lowered;
        if matches!(subject_words[0], "The" | "A" | "An") {
            lowered = subject_words[0].to_lowercase();
            subject_words[0] = &lowered;
        }
        let subject = join(&subject_words);
        let predicate = &words[c + 1..];
        let prep = predicate
            .iter()
            .position(|w| PREPOSITIONS.contains(&w.to_lowercase().as_str()))
            .filter(|&p| p + 1 < predicate.len());
        match prep {
            Some(p) => {
                let head = join(&predicate[..p]);
                let prep_word = predicate[p].to_lowercase();
                let object = join(&predicate[p + 1..]);
                let spatial = prep_word == "in" || prep_word == "at";
                out.push(match (spatial, head.is_empty()) {
                    (true, false) => format!("Where {cop} {subject} {head}?"),
                    (true, true) => format!("Where {cop} {subject}?"),
                    (false, false) => format!("What {cop} {subject} {head} {prep_word}?"),
                    (false, true) => format!("What {cop} {subject} {prep_word}?"),
                });
                out.push(if head.is_empty() {
                    format!("What {cop} {prep_word} {object}?")
                } else {
                    format!("What {cop} {head} {prep_word} {object}?")
                });
            }
            None => {
                out.push(format!("Who {cop} {subject}?"));
                out.push(format!("What {cop} {}?", join(predicate)));
            }
        }
    } else {
        out.push(format!("What about {body}?"));
    }
    out.push(format!("Is it true that {body}?"));
    out.push(format!("Is it really true that {body}?"));
    out.push(format!("What is known about how {body}?"));

    let base = out.len();
    let mut i = 0;
    while out.len() < n {
        out.push(format!("Is it true that {body} (variant {})?", i + 2));
        i += 1;
        if i > n + base {
            break;
        }
    }
    out.truncate(n);
    out
}

/// Offline provider: hashing embedder plus template questions.
#[derive(Debug)]
pub struct MockProvider {
    dim: usize,
    seed: u64,
    generate_calls: AtomicUsize,
    embed_calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            generate_calls: AtomicUsize::new(0),
            embed_calls: AtomicUsize::new(0),
        }
    }

    pub fn generate_calls(&self) -> usize {
        self.generate_calls.load(Ordering::Relaxed)
    }

    pub fn embed_calls(&self) -> usize {
        self.embed_calls.load(Ordering::Relaxed)
    }
}

impl Provider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::BuiltinMock
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        Ok(texts
            .iter()
            .map(|t| mock_embed(t, self.dim, self.seed))
            .collect())
    }

    fn generate_raw(&self, fact: &str, n: usize) -> Result<Vec<String>> {
        self.generate_calls.fetch_add(1, Ordering::Relaxed);
        Ok(template_questions(fact, n))
    }
}
