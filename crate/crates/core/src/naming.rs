//! Entity naming: symbolic tokens, curated name lists, and generated nonce
//! words.
//!
//! Names are what make two instances with the same geometry look different,
//! and substituting one scheme for another must never change an answer. Four
//! list-free or list-backed schemes are supported:
//!
//! * `symbolic` — `X` followed by one to three capital letters (`XU`, `XJX`),
//!   generated on demand;
//! * `male` / `female` / `city` — curated CSV pools shipped with the crate,
//!   replaceable by any file with one name per row (first column used);
//! * `nonce` — pronounceable non-words sampled from a character-trigram model
//!   trained on an English corpus, filtered to a fixed length and to a
//!   minimum edit distance from every dictionary word, so they carry no
//!   lexical meaning a model could latch onto.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Built-in anglophone male first names (one per row, header tolerated).
pub const MALE_NAMES_CSV: &str = include_str!("../assets/data/names_male.csv");
/// Built-in anglophone female first names.
pub const FEMALE_NAMES_CSV: &str = include_str!("../assets/data/names_female.csv");
/// Built-in UK city and town names.
pub const CITY_NAMES_CSV: &str = include_str!("../assets/data/cities_uk.csv");
/// Default trigram training corpus (English prose excerpt).
pub const DEFAULT_CORPUS: &str = include_str!("../assets/data/corpus.txt");
/// Default dictionary for the nonce-word distance filter (one word per line).
pub const DEFAULT_DICTIONARY: &str = include_str!("../assets/data/dictionary.txt");

/// Which kind of entity names an instance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameScheme {
    /// `X` plus one to three capital letters.
    Symbolic,
    /// Anglophone male first names.
    Male,
    /// Anglophone female first names.
    Female,
    /// UK city and town names.
    City,
    /// Generated pronounceable non-words.
    Nonce,
}

impl NameScheme {
    /// Stable lower-case identifier (used in configs and instance metadata).
    pub fn as_str(self) -> &'static str {
        match self {
            NameScheme::Symbolic => "symbolic",
            NameScheme::Male => "male",
            NameScheme::Female => "female",
            NameScheme::City => "city",
            NameScheme::Nonce => "nonce",
        }
    }

    /// Inverse of [`as_str`](Self::as_str).
    pub fn parse(s: &str) -> Option<NameScheme> {
        [
            NameScheme::Symbolic,
            NameScheme::Male,
            NameScheme::Female,
            NameScheme::City,
            NameScheme::Nonce,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
    }
}

/// A source of entity names. List-backed schemes carry their entries;
/// `symbolic` pools generate names on demand and keep `entries` empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePool {
    /// Scheme this pool serves.
    pub scheme: NameScheme,
    /// Unique entries, in source order (empty for `symbolic`).
    pub entries: Vec<String>,
    /// Where the entries came from (file path or "builtin").
    pub source: String,
    /// How many duplicate rows were collapsed while loading.
    pub duplicates_removed: usize,
}

/// Naming failures.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NamingError {
    /// A list pool is smaller than the number of nodes to name.
    #[error("{scheme} pool has {available} entries but {needed} names were requested")]
    PoolExhausted {
        /// Scheme of the exhausted pool.
        scheme: &'static str,
        /// Names requested.
        needed: usize,
        /// Entries available.
        available: usize,
    },
    /// Nonce sampling could not produce enough accepted words in budget.
    #[error("nonce generation produced {produced} of {requested} words before exhausting its budget")]
    GenerationExhausted {
        /// Words requested.
        requested: usize,
        /// Words accepted before giving up.
        produced: usize,
    },
    /// The trigram corpus contained no usable tokens.
    #[error("corpus contains no alphabetic tokens to train on")]
    EmptyCorpus,
}

impl NamePool {
    /// An on-demand symbolic pool.
    pub fn symbolic() -> NamePool {
        NamePool {
            scheme: NameScheme::Symbolic,
            entries: Vec::new(),
            source: "generated".to_string(),
            duplicates_removed: 0,
        }
    }

    /// Wraps pre-generated nonce words as a pool.
    pub fn nonce(words: Vec<String>) -> NamePool {
        NamePool {
            scheme: NameScheme::Nonce,
            entries: words,
            source: "generated".to_string(),
            duplicates_removed: 0,
        }
    }

    /// Parses a CSV body: one name per row, first column, surrounding quotes
    /// and whitespace stripped. A leading header row (a first field like
    /// "name" or "city") is skipped, duplicates collapse.
    pub fn from_csv(scheme: NameScheme, text: &str, source: &str) -> NamePool {
        const HEADER_WORDS: [&str; 8] =
            ["name", "names", "first_name", "forename", "city", "town", "label", "entry"];
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        let mut duplicates_removed = 0;
        for (i, line) in text.lines().enumerate() {
            let first = line.split(',').next().unwrap_or("").trim().trim_matches('"').trim();
            if first.is_empty() {
                continue;
            }
            if i == 0 && HEADER_WORDS.contains(&first.to_lowercase().as_str()) {
                continue;
            }
            if seen.insert(first.to_string()) {
                entries.push(first.to_string());
            } else {
                duplicates_removed += 1;
            }
        }
        NamePool { scheme, entries, source: source.to_string(), duplicates_removed }
    }

    /// The pool shipped with the crate for a list scheme; `None` for `nonce`
    /// (nonce pools must be generated, see [`gen_nonce_words`]).
    pub fn builtin(scheme: NameScheme) -> Option<NamePool> {
        match scheme {
            NameScheme::Symbolic => Some(NamePool::symbolic()),
            NameScheme::Male => Some(NamePool::from_csv(scheme, MALE_NAMES_CSV, "builtin")),
            NameScheme::Female => Some(NamePool::from_csv(scheme, FEMALE_NAMES_CSV, "builtin")),
            NameScheme::City => Some(NamePool::from_csv(scheme, CITY_NAMES_CSV, "builtin")),
            NameScheme::Nonce => None,
        }
    }
}

/// Draws `count` distinct names from the pool, indexed by node id.
///
/// List pools sample without replacement; symbolic pools generate fresh
/// tokens (suffixes of one or two letters, stretching to three only when the
/// short space is crowded).
pub fn assign_names(
    count: usize,
    pool: &NamePool,
    rng: &mut impl RngCore,
) -> Result<Vec<String>, NamingError> {
    match pool.scheme {
        NameScheme::Symbolic => {
            let mut taken = BTreeSet::new();
            let mut out = Vec::with_capacity(count);
            let mut attempts = 0u32;
            while out.len() < count {
                attempts += 1;
                // 1–2 letters matches the reference look; fall back to three
                // once collisions suggest the short space is filling up.
                let len = if attempts > 200 + 40 * count as u32 {
                    3
                } else {
                    1 + rng::uniform(rng, 2) as usize
                };
                let mut name = String::from("X");
                for _ in 0..len {
                    name.push((b'A' + rng::uniform(rng, 26) as u8) as char);
                }
                if taken.insert(name.clone()) {
                    out.push(name);
                }
            }
            Ok(out)
        }
        _ => {
            if pool.entries.len() < count {
                return Err(NamingError::PoolExhausted {
                    scheme: pool.scheme.as_str(),
                    needed: count,
                    available: pool.entries.len(),
                });
            }
            // Partial Fisher–Yates over indices: the first `count` slots end
            // up holding a uniform sample without replacement.
            let mut idx: Vec<usize> = (0..pool.entries.len()).collect();
            for i in 0..count {
                let j = i + rng::index(rng, idx.len() - i);
                idx.swap(i, j);
            }
            Ok(idx[..count].iter().map(|&i| pool.entries[i].clone()).collect())
        }
    }
}

/// Classic edit distance (insertions, deletions, substitutions), on chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Parameters for nonce-word generation. `Default` wires in the shipped
/// corpus and dictionary, length 7, minimum distance 2, and reserves the
/// shipped nonce direction vocabulary so entity names can never collide with
/// direction words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonceSpec {
    /// Trigram training text.
    pub corpus: String,
    /// Newline-delimited word list the outputs must keep their distance from.
    pub dictionary: String,
    /// Exact word length, in letters.
    pub length: usize,
    /// Minimum Levenshtein distance to every dictionary word.
    pub min_distance: usize,
    /// Words the generator must never emit (exact match, lowercase).
    pub reserved: Vec<String>,
}

impl Default for NonceSpec {
    fn default() -> Self {
        NonceSpec {
            corpus: DEFAULT_CORPUS.to_string(),
            dictionary: DEFAULT_DICTIONARY.to_string(),
            length: 7,
            min_distance: 2,
            reserved: crate::lingo::NONCE_DIRECTION_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

// Sentinels for the trigram chain; control characters never occur in tokens.
const START: char = '\u{2}';
const END: char = '\u{3}';

/// Character-trigram Markov model: `(c1, c2) -> distribution over c3`.
struct TrigramModel {
    table: BTreeMap<(char, char), (Vec<(char, u32)>, u32)>,
}

impl TrigramModel {
    fn train(corpus: &str) -> Result<TrigramModel, NamingError> {
        let mut counts: BTreeMap<(char, char), BTreeMap<char, u32>> = BTreeMap::new();
        let mut tokens = 0usize;
        for raw in corpus.split(|c: char| !c.is_ascii_alphabetic()) {
            if raw.len() < 2 {
                continue;
            }
            tokens += 1;
            let word: Vec<char> = raw.chars().map(|c| c.to_ascii_lowercase()).collect();
            let mut c1 = START;
            let mut c2 = START;
            for &c3 in word.iter().chain(core::iter::once(&END)) {
                *counts.entry((c1, c2)).or_default().entry(c3).or_default() += 1;
                c1 = c2;
                c2 = c3;
            }
        }
        if tokens == 0 {
            return Err(NamingError::EmptyCorpus);
        }
        let table = counts
            .into_iter()
            .map(|(state, dist)| {
                let items: Vec<(char, u32)> = dist.into_iter().collect();
                let total = items.iter().map(|&(_, n)| n).sum();
                (state, (items, total))
            })
            .collect();
        Ok(TrigramModel { table })
    }

    /// Samples one word, rejecting as soon as it overruns `max_len`. Returns
    /// `None` when the chain dead-ends or the length misses.
    fn sample(&self, max_len: usize, rng: &mut impl RngCore) -> Option<String> {
        let mut word = String::new();
        let mut state = (START, START);
        loop {
            let (items, total) = self.table.get(&state)?;
            let mut t = rng::uniform(rng, *total);
            let mut picked = END;
            for &(c, n) in items {
                if t < n {
                    picked = c;
                    break;
                }
                t -= n;
            }
            if picked == END {
                return Some(word);
            }
            word.push(picked);
            if word.len() > max_len {
                return None;
            }
            state = (state.1, picked);
        }
    }
}

/// Generates `n` distinct nonce words passing every [`NonceSpec`] filter:
/// exactly `length` letters, Levenshtein at least `min_distance` from every
/// dictionary word, and not on the reserved list.
pub fn gen_nonce_words(
    n: usize,
    spec: &NonceSpec,
    rng: &mut impl RngCore,
) -> Result<Vec<String>, NamingError> {
    let model = TrigramModel::train(&spec.corpus)?;
    // Only dictionary words within min_distance-1 of the target length can
    // fall below the distance bound (distance >= length difference).
    let near: Vec<&str> = spec
        .dictionary
        .lines()
        .map(str::trim)
        .filter(|w| {
            !w.is_empty() && w.len().abs_diff(spec.length) < spec.min_distance
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let budget = 10_000 + 2_000 * n as u64;
    let mut attempts = 0u64;
    while out.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(NamingError::GenerationExhausted { requested: n, produced: out.len() });
        }
        let Some(word) = model.sample(spec.length, rng) else { continue };
        if word.len() != spec.length {
            continue;
        }
        if spec.reserved.iter().any(|r| r == &word) || seen.contains(&word) {
            continue;
        }
        let too_close = near
            .iter()
            .any(|w| levenshtein(&word, &w.to_lowercase()) < spec.min_distance);
        if too_close {
            continue;
        }
        seen.insert(word.clone());
        out.push(word);
    }
    Ok(out)
}
