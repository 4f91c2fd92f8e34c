//! Subword vocabularies, greedy longest-match tokenization and fertility.
//!
//! Vocabulary construction: rare characters are removed, whole words
//! meeting the frequency threshold enter first (most frequent first), and
//! the remaining capacity is filled with BPE-style pair merges over the
//! words that are not whole tokens. Tokenization is WordPiece-style greedy
//! longest-prefix matching with a continuation prefix for non-initial pieces.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabConfig {
    /// Characters occurring fewer times than this corpus-wide are removed.
    pub min_char_freq: u64,
    /// Words need at least this many occurrences to become whole-word tokens.
    pub min_word_freq: u64,
    pub vocab_size: usize,
    pub special_tokens: Vec<String>,
    pub continuation_prefix: String,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_char_freq: 3,
            min_word_freq: 20,
            vocab_size: 30_000,
            special_tokens: default_special_tokens(),
            continuation_prefix: "##".into(),
        }
    }
}

pub fn default_special_tokens() -> Vec<String> {
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        .map(String::from)
        .to_vec()
}

const UNK: &str = "[UNK]";

impl VocabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_char_freq == 0 || self.min_word_freq == 0 {
            return Err(Error::Config(
                "frequency thresholds must be at least 1".into(),
            ));
        }
        if !self.special_tokens.iter().any(|t| t == UNK) {
            return Err(Error::Config("special tokens must include [UNK]".into()));
        }
        if self.continuation_prefix.is_empty() {
            return Err(Error::Config(
                "continuation prefix must not be empty".into(),
            ));
        }
        let unique: HashSet<&String> = self.special_tokens.iter().collect();
        if unique.len() != self.special_tokens.len() {
            return Err(Error::Config("duplicate special token".into()));
        }
        Ok(())
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits text into words: whitespace-separated runs with leading and
/// trailing punctuation split off, one character per punctuation word.
///
/// `"(Lunge)."` gives `["(", "Lunge", ")", "."]`; inner punctuation such as
/// `"z.B"` stays attached.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let Some(core_start) = chunk.find(|c: char| !is_punct(c)) else {
            out.extend(
                chunk
                    .char_indices()
                    .map(|(i, c)| &chunk[i..i + c.len_utf8()]),
            );
            continue;
        };
        let core_end = chunk
            .char_indices()
            .rev()
            .find(|&(_, c)| !is_punct(c))
            .map(|(i, c)| i + c.len_utf8())
            .expect("chunk has a non-punctuation char");
        let lead = &chunk[..core_start];
        out.extend(lead.char_indices().map(|(i, c)| &lead[i..i + c.len_utf8()]));
        out.push(&chunk[core_start..core_end]);
        let trail = &chunk[core_end..];
        out.extend(
            trail
                .char_indices()
                .map(|(i, c)| &trail[i..i + c.len_utf8()]),
        );
    }
    out
}

/// Deletes every non-whitespace character that occurs fewer than
/// `min_char_freq` times across the corpus. Returns the filtered texts and
/// the removed characters.
pub fn filter_rare_chars<S: AsRef<str>>(
    corpus: &[S],
    min_char_freq: u64,
) -> Result<(Vec<String>, BTreeSet<char>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<char, u64> = HashMap::new();
    for text in corpus {
        for c in text.as_ref().chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let removed: BTreeSet<char> = counts
        .into_iter()
        .filter(|&(c, n)| n < min_char_freq && !c.is_whitespace())
        .map(|(c, _)| c)
        .collect();
    let filtered = corpus
        .iter()
        .map(|t| {
            let t = t.as_ref();
            if removed.is_empty() {
                t.to_string()
            } else {
                t.chars().filter(|c| !removed.contains(c)).collect()
            }
        })
        .collect();
    Ok((filtered, removed))
}

/// Token inventory; the line index in `vocab.txt` is the token id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    n_special: usize,
    unk_id: u32,
    continuation_prefix: String,
    word_freqs: BTreeMap<String, u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from an ordered token list. Leading tokens that
    /// appear in `special_tokens` count as specials; `[UNK]` is required.
    pub fn from_tokens(
        tokens: Vec<String>,
        special_tokens: &[String],
        continuation_prefix: &str,
    ) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "empty token at line {}",
                    i + 1
                )));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token `{t}`")));
            }
        }
        let unk_id = *ids
            .get(UNK)
            .ok_or_else(|| Error::InvalidInput("vocabulary has no [UNK] token".into()))?;
        let n_special = tokens
            .iter()
            .take_while(|t| special_tokens.contains(t))
            .count();
        Ok(Vocabulary {
            tokens,
            ids,
            n_special,
            unk_id,
            continuation_prefix: continuation_prefix.to_string(),
            word_freqs: BTreeMap::new(),
        })
    }

    /// Parses `vocab.txt` (one token per line).
    pub fn from_vocab_txt(contents: &str) -> Result<Self> {
        let tokens = contents.lines().map(str::to_string).collect();
        Self::from_tokens(tokens, &default_special_tokens(), "##")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab_txt(&contents)
    }

    pub fn to_vocab_txt(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_vocab_txt()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn n_special(&self) -> usize {
        self.n_special
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    /// Word counts of the training corpus (empty for loaded vocabularies).
    pub fn word_freqs(&self) -> &BTreeMap<String, u64> {
        &self.word_freqs
    }

    fn push(&mut self, token: String) -> bool {
        if self.ids.contains_key(&token) {
            return false;
        }
        self.ids.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
        true
    }

    /// Greedy longest-match-first segmentation of one word. A word with any
    /// unmatched position becomes a single `[UNK]`.
    pub fn tokenize_word(&self, word: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        let mut start = 0;
        let mut probe = String::new();
        while start < word.len() {
            let rest = &word[start..];
            let mut ends: Vec<usize> = rest.char_indices().map(|(i, c)| i + c.len_utf8()).collect();
            ends.reverse();
            let hit = ends.into_iter().find_map(|end| {
                probe.clear();
                if start > 0 {
                    probe.push_str(&self.continuation_prefix);
                }
                probe.push_str(&rest[..end]);
                self.ids.get(probe.as_str()).map(|&id| (id, end))
            });
            match hit {
                Some((id, end)) => {
                    ids.push(id);
                    start += end;
                }
                None => return vec![self.unk_id],
            }
        }
        ids
    }

    /// Tokenizes running text word by word (see [`pre_tokenize`]).
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text)
            .into_iter()
            .flat_map(|w| self.tokenize_word(w))
            .collect()
    }

    /// Joins the surfaces of a word's pieces, dropping continuation prefixes.
    pub fn decode_word(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter_map(|&id| self.token(id))
            .enumerate()
            .map(|(i, t)| {
                if i > 0 {
                    t.strip_prefix(self.continuation_prefix.as_str())
                        .unwrap_or(t)
                } else {
                    t
                }
            })
            .collect()
    }
}

pub fn tokenize_word(word: &str, vocab: &Vocabulary) -> Vec<u32> {
    vocab.tokenize_word(word)
}

#[derive(Debug, PartialEq, Eq)]
struct MergeCandidate {
    count: u64,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for MergeCandidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct MergeState {
    symbols: Vec<String>,
    symbol_ids: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), u64>,
    pair_words: HashMap<(u32, u32), BTreeSet<usize>>,
}

impl MergeState {
    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.symbol_ids.get(&s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbol_ids.insert(s.clone(), id);
        self.symbols.push(s);
        id
    }

    fn candidate(&self, pair: (u32, u32)) -> Option<MergeCandidate> {
        let count = *self.pair_counts.get(&pair)?;
        (count > 0).then(|| MergeCandidate {
            count,
            left: self.symbols[pair.0 as usize].clone(),
            right: self.symbols[pair.1 as usize].clone(),
            pair,
        })
    }

    fn add_word_pairs(&mut self, w: usize, sign_add: bool) -> Vec<(u32, u32)> {
        let (syms, freq) = (&self.words[w].0, self.words[w].1);
        let pairs: Vec<(u32, u32)> = syms.windows(2).map(|p| (p[0], p[1])).collect();
        for &p in &pairs {
            let c = self.pair_counts.entry(p).or_default();
            if sign_add {
                *c += freq;
                self.pair_words.entry(p).or_default().insert(w);
            } else {
                *c -= freq;
            }
        }
        pairs
    }
}

/// Builds a vocabulary; see the module docs for the procedure.
///
/// Ties between equally frequent words or merge pairs are broken
/// lexicographically, so the result depends only on the corpus contents.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], cfg: &VocabConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    let (filtered, _) = filter_rare_chars(corpus, cfg.min_char_freq)?;

    let mut word_freqs: BTreeMap<String, u64> = BTreeMap::new();
    for text in &filtered {
        for w in pre_tokenize(text) {
            *word_freqs.entry(w.to_string()).or_default() += 1;
        }
    }
    if word_freqs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let prefix = cfg.continuation_prefix.as_str();
    let mut initial: BTreeSet<char> = BTreeSet::new();
    let mut inner: BTreeSet<char> = BTreeSet::new();
    for w in word_freqs.keys() {
        let mut chars = w.chars();
        initial.extend(chars.next());
        inner.extend(chars);
    }
    let required = cfg.special_tokens.len() + initial.len() + inner.len();
    if cfg.vocab_size < required {
        return Err(Error::VocabTooSmall {
            vocab_size: cfg.vocab_size,
            required,
        });
    }

    let mut vocab =
        Vocabulary::from_tokens(cfg.special_tokens.clone(), &cfg.special_tokens, prefix)?;
    for c in &initial {
        vocab.push(c.to_string());
    }
    for c in &inner {
        vocab.push(format!("{prefix}{c}"));
    }

    let mut frequent: Vec<(&String, u64)> = word_freqs
        .iter()
        .filter(|(_, &f)| f >= cfg.min_word_freq)
        .map(|(w, &f)| (w, f))
        .collect();
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    for (w, _) in frequent {
        if vocab.len() >= cfg.vocab_size {
            break;
        }
        vocab.push(w.clone());
    }

    if vocab.len() < cfg.vocab_size {
        fill_with_merges(&mut vocab, &word_freqs, cfg);
    }
    vocab.word_freqs = word_freqs;
    Ok(vocab)
}

fn fill_with_merges(vocab: &mut Vocabulary, word_freqs: &BTreeMap<String, u64>, cfg: &VocabConfig) {
    let prefix = cfg.continuation_prefix.as_str();
    // Whole-word tokens for rare words are never created, merges included.
    let forbidden: HashSet<&str> = word_freqs
        .iter()
        .filter(|(_, &f)| f < cfg.min_word_freq)
        .map(|(w, _)| w.as_str())
        .collect();

    let mut state = MergeState {
        symbols: Vec::new(),
        symbol_ids: HashMap::new(),
        words: Vec::new(),
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
    };
    for (w, &f) in word_freqs {
        if vocab.contains(w) {
            continue;
        }
        let syms: Vec<u32> = w
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let s = if i == 0 {
                    c.to_string()
                } else {
                    format!("{prefix}{c}")
                };
                state.intern(s)
            })
            .collect();
        if syms.len() > 1 {
            state.words.push((syms, f));
        }
    }
    for w in 0..state.words.len() {
        state.add_word_pairs(w, true);
    }
    let mut heap: BinaryHeap<MergeCandidate> = state
        .pair_counts
        .keys()
        .filter_map(|&p| state.candidate(p))
        .collect();
    let mut rejected: HashSet<(u32, u32)> = HashSet::new();

    while vocab.len() < cfg.vocab_size {
        let Some(top) = heap.pop() else { break };
        if rejected.contains(&top.pair) {
            continue;
        }
        let current = state.pair_counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            if let Some(c) = state.candidate(top.pair) {
                heap.push(c);
            }
            continue;
        }
        let merged = format!(
            "{}{}",
            top.left,
            top.right.strip_prefix(prefix).unwrap_or(&top.right)
        );
        if forbidden.contains(merged.as_str()) {
            rejected.insert(top.pair);
            continue;
        }
        vocab.push(merged.clone());
        let merged_id = state.intern(merged);

        let affected: Vec<usize> = state
            .pair_words
            .remove(&top.pair)
            .unwrap_or_default()
            .into_iter()
            .collect();
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for w in affected {
            state.add_word_pairs(w, false);
            let old = std::mem::take(&mut state.words[w].0);
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == top.pair {
                    new.push(merged_id);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            state.words[w].0 = new;
            touched.extend(state.add_word_pairs(w, true));
        }
        state.pair_counts.remove(&top.pair);
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if let Some(c) = state.candidate(p) {
                heap.push(c);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentFertility {
    pub n_words: u64,
    pub n_subwords: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityReport {
    pub n_words: u64,
    pub n_subwords: u64,
    /// Subwords per word; `[UNK]` counts as one subword.
    pub fertility: f64,
    pub per_document: Vec<DocumentFertility>,
}

/// Average number of subwords per word over the corpus.
pub fn measure_fertility<S: AsRef<str> + Sync>(
    corpus: &[S],
    vocab: &Vocabulary,
) -> Result<FertilityReport> {
    let per_document: Vec<DocumentFertility> = corpus
        .par_iter()
        .map(|text| {
            let words = pre_tokenize(text.as_ref());
            DocumentFertility {
                n_words: words.len() as u64,
                n_subwords: words
                    .iter()
                    .map(|w| vocab.tokenize_word(w).len() as u64)
                    .sum(),
            }
        })
        .collect();
    let n_words: u64 = per_document.iter().map(|d| d.n_words).sum();
    let n_subwords: u64 = per_document.iter().map(|d| d.n_subwords).sum();
    if n_words == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(FertilityReport {
        n_words,
        n_subwords,
        fertility: n_subwords as f64 / n_words as f64,
        per_document,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        let mut all = default_special_tokens();
        all.extend(tokens.iter().map(|t| t.to_string()));
        Vocabulary::from_tokens(all, &default_special_tokens(), "##").unwrap()
    }

    #[test]
    fn pre_tokenizer_splits_outer_punctuation() {
        assert_eq!(pre_tokenize("Lunge."), vec!["Lunge", "."]);
        assert_eq!(pre_tokenize("(Lunge)."), vec!["(", "Lunge", ")", "."]);
        assert_eq!(pre_tokenize("z.B. --"), vec!["z.B", ".", "-", "-"]);
        assert!(pre_tokenize("  ").is_empty());
    }

    #[test]
    fn rare_chars_removed_at_strict_threshold() {
        let corpus = ["a✚b", "✚ccc", "★★★"];
        let (out, removed) = filter_rare_chars(&corpus, 3).unwrap();
        assert!(removed.contains(&'✚'));
        assert!(!removed.contains(&'★'));
        assert!(!removed.contains(&'c'));
        assert_eq!(out, vec!["", "ccc", "★★★"]);
        let ascii = ["aaa bbb", "aaa bbb"];
        let (out, removed) = filter_rare_chars(&ascii, 3).unwrap();
        assert!(removed.is_empty());
        assert_eq!(out, ascii);
        assert!(matches!(
            filter_rare_chars::<&str>(&[], 3),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn greedy_longest_match() {
        let v = vocab_of(&["a", "ab", "##c", "##cd", "##d", "abcd"]);
        assert_eq!(tokenize_word("abcd", &v), vec![v.id("abcd").unwrap()]);
        let v = vocab_of(&["ab", "##cd"]);
        assert_eq!(
            tokenize_word("abcd", &v),
            vec![v.id("ab").unwrap(), v.id("##cd").unwrap()]
        );
        assert_eq!(tokenize_word("abxd", &v), vec![v.unk_id()]);
        assert!(tokenize_word("", &v).is_empty());
    }

    #[test]
    fn word_threshold_boundary() {
        let mut corpus = vec!["neunzehn"; 19];
        corpus.extend(vec!["zwanzig"; 20]);
        let cfg = VocabConfig {
            vocab_size: 200,
            ..VocabConfig::default()
        };
        let v = build_vocab(&corpus, &cfg).unwrap();
        assert!(v.contains("zwanzig"));
        assert!(!v.contains("neunzehn"));
        assert_eq!(v.word_freqs()["neunzehn"], 19);
    }

    #[test]
    fn repeated_word_is_one_token() {
        let corpus = vec!["abc"; 100];
        let v = build_vocab(
            &corpus,
            &VocabConfig {
                vocab_size: 50,
                ..VocabConfig::default()
            },
        )
        .unwrap();
        assert!(v.contains("abc"));
        assert_eq!(v.tokenize_word("abc").len(), 1);
        assert_eq!(&v.tokens()[..5], &default_special_tokens()[..]);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_vocab::<&str>(&[], &VocabConfig::default()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            build_vocab(&["   "], &VocabConfig::default()),
            Err(Error::EmptyCorpus)
        ));
        let cfg = VocabConfig {
            vocab_size: 6,
            ..VocabConfig::default()
        };
        assert!(matches!(
            build_vocab(&["abc abc abc"], &cfg),
            Err(Error::VocabTooSmall { .. })
        ));
    }

    #[test]
    fn merges_fill_capacity_without_rare_whole_words() {
        let text = "Pneumothorax Pneumonie Pneumologie Thorax Thoraxdrainage Drainage Müller";
        let corpus = vec![text; 5];
        let cfg = VocabConfig {
            vocab_size: 40,
            ..VocabConfig::default()
        };
        let v = build_vocab(&corpus, &cfg).unwrap();
        assert_eq!(v.len(), 40);
        // once every word is a single piece no pair is left to merge
        let big = build_vocab(
            &corpus,
            &VocabConfig {
                vocab_size: 500,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert!(big.len() < 500);
        for w in text.split(' ') {
            assert!(!v.contains(w), "rare word {w} became a token");
            assert_eq!(v.decode_word(&v.tokenize_word(w)), w);
        }
        assert!(v.contains("Pneumo"), "{:?}", v.tokens());
    }

    #[test]
    fn fertility_values() {
        let v = vocab_of(&["a", "b", "c", "##b", "##c", "ab", "abc"]);
        let r = measure_fertility(&["a abc ab"], &v).unwrap();
        assert_eq!(r.fertility, 1.0);
        // 1 + 2 + 3 subwords over 3 words
        let v = vocab_of(&["x", "y", "##y", "z", "##z"]);
        let r = measure_fertility(&["x yy zzz"], &v).unwrap();
        assert_eq!((r.n_words, r.n_subwords), (3, 6));
        assert_eq!(r.fertility, 2.0);
        assert!(measure_fertility(&["  "], &v).is_err());
    }

    #[test]
    fn vocab_txt_roundtrip_is_byte_stable() {
        let corpus = vec!["Erguss rechts basal, Erguss links."; 25];
        let cfg = VocabConfig {
            vocab_size: 120,
            ..VocabConfig::default()
        };
        let a = build_vocab(&corpus, &cfg).unwrap();
        let b = build_vocab(&corpus, &cfg).unwrap();
        assert_eq!(a.to_vocab_txt(), b.to_vocab_txt());
        let loaded = Vocabulary::from_vocab_txt(&a.to_vocab_txt()).unwrap();
        assert_eq!(loaded.tokens(), a.tokens());
        assert_eq!(loaded.n_special(), 5);
        assert!(Vocabulary::from_vocab_txt("a\nb\n").is_err());
    }

    proptest! {
        #[test]
        fn thresholds_hold_on_generated_corpora(
            words in prop::collection::vec(("[a-eä]{1,5}", 1usize..30), 1..12),
            vocab_size in 40usize..120,
        ) {
            let mut corpus = Vec::new();
            for (w, n) in &words {
                for _ in 0..*n {
                    corpus.push(w.clone());
                }
            }
            corpus.push("ÿ".to_string());
            let cfg = VocabConfig { vocab_size, ..VocabConfig::default() };
            let Ok(v) = build_vocab(&corpus, &cfg) else { return Ok(()) };
            let freqs = v.word_freqs();
            for t in &v.tokens()[v.n_special()..] {
                prop_assert!(!t.contains('ÿ'));
                if let Some(&f) = freqs.get(t) {
                    prop_assert!(f >= cfg.min_word_freq || t.chars().count() == 1, "{} has freq {}", t, f);
                }
            }
            for w in freqs.keys() {
                let ids = v.tokenize_word(w);
                prop_assert!(ids != vec![v.unk_id()]);
                prop_assert_eq!(&v.decode_word(&ids), w);
            }
            let r = measure_fertility(&corpus, &v).unwrap();
            prop_assert!(r.fertility >= 1.0);
        }
    }
}
