//! Corpus ingestion: the combined vocabulary over both monolingual corpora,
//! id-encoded sentence streams, frequency subsampling, and the unigram noise
//! distribution that negative examples are drawn from.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense vocabulary id. Ids are contiguous in `[0, |W|)`.
pub type WordId = u32;

/// Which monolingual corpus a sentence (or count) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    E,
    F,
}

impl Lang {
    pub fn other(self) -> Lang {
        match self {
            Lang::E => Lang::F,
            Lang::F => Lang::E,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lang::E => write!(f, "e"),
            Lang::F => write!(f, "f"),
        }
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" => Ok(Lang::E),
            "f" => Ok(Lang::F),
            other => Err(format!("unknown language tag {other:?} (expected 'e' or 'f')")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty vocabulary: no token occurs at least {min_count} times")]
    EmptyVocabulary { min_count: u64 },
    #[error("vocabulary entry {form:?} appears more than once")]
    DuplicateEntry { form: String },
    #[error("vocabulary entry {form:?} has zero total count")]
    ZeroCount { form: String },
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// One vocabulary entry: surface form plus total and per-corpus counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub form: String,
    pub count: u64,
    pub count_e: u64,
    pub count_f: u64,
}

/// Combined word inventory over both corpora. A surface form occurring in
/// both languages gets a single id (one embedding row); the per-language
/// counts record where it was attested.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, WordId>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit `(form, count_e, count_f)` entries,
    /// keeping the given order as id order.
    pub fn from_entries<I, S>(entries: I) -> Result<Vocabulary, CorpusError>
    where
        I: IntoIterator<Item = (S, u64, u64)>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        let mut total = 0u64;
        for (form, count_e, count_f) in entries {
            let form = form.into();
            let count = count_e + count_f;
            if count == 0 {
                return Err(CorpusError::ZeroCount { form });
            }
            if index.insert(form.clone(), out.len() as WordId).is_some() {
                return Err(CorpusError::DuplicateEntry { form });
            }
            total += count;
            out.push(VocabEntry {
                form,
                count,
                count_e,
                count_f,
            });
        }
        if out.is_empty() {
            return Err(CorpusError::EmptyVocabulary { min_count: 0 });
        }
        Ok(Vocabulary {
            entries: out,
            index,
            total_tokens: total,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of in-vocabulary tokens across both corpora.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn id(&self, form: &str) -> Option<WordId> {
        self.index.get(form).copied()
    }

    pub fn entry(&self, id: WordId) -> &VocabEntry {
        &self.entries[id as usize]
    }

    pub fn form(&self, id: WordId) -> &str {
        &self.entries[id as usize].form
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.entries[id as usize].count
    }

    /// Whether the word occurs in the given corpus. Used to restrict
    /// candidate pools to words actually attested in a language.
    pub fn attested(&self, id: WordId, lang: Lang) -> bool {
        let e = &self.entries[id as usize];
        match lang {
            Lang::E => e.count_e > 0,
            Lang::F => e.count_f > 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &VocabEntry)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i as WordId, e))
    }

    /// Writes the vocabulary as `form<TAB>count_e<TAB>count_f`, one entry per
    /// line in id order. This sidecar lets evaluation commands recover
    /// per-language attestation next to an embedding file.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{}", e.form, e.count_e, e.count_f)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<(), CorpusError> {
        let file = File::create(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_tsv(BufWriter::new(file))
            .map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn load_tsv(path: &Path) -> Result<Vocabulary, CorpusError> {
        let err_io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(err_io)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(err_io)?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CorpusError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<u64, CorpusError> {
                s.parse().map_err(|_| CorpusError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("invalid count {s:?}"),
                })
            };
            entries.push((fields[0].to_string(), parse(fields[1])?, parse(fields[2])?));
        }
        Vocabulary::from_entries(entries)
    }
}

/// Incremental counter used to build a [`Vocabulary`] from sentence sources.
#[derive(Debug, Default)]
pub struct VocabBuilder {
    counts: HashMap<String, [u64; 2]>,
}

impl VocabBuilder {
    pub fn new() -> VocabBuilder {
        VocabBuilder::default()
    }

    /// Counts every whitespace-separated token of one sentence.
    pub fn add_sentence(&mut self, sentence: &str, lang: Lang) {
        let slot = match lang {
            Lang::E => 0,
            Lang::F => 1,
        };
        for token in sentence.split_whitespace() {
            match self.counts.get_mut(token) {
                Some(c) => c[slot] += 1,
                None => {
                    let mut c = [0u64; 2];
                    c[slot] = 1;
                    self.counts.insert(token.to_string(), c);
                }
            }
        }
    }

    /// Drops entries below `min_count` and freezes ids. Ids are assigned by
    /// descending total count, ties broken by surface form, so vocabulary
    /// construction is reproducible independent of hash-map iteration order.
    pub fn finish(self, min_count: u64) -> Result<Vocabulary, CorpusError> {
        let mut kept: Vec<(String, u64, u64)> = self
            .counts
            .into_iter()
            .filter(|(_, c)| c[0] + c[1] >= min_count.max(1))
            .map(|(form, c)| (form, c[0], c[1]))
            .collect();
        if kept.is_empty() {
            return Err(CorpusError::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| {
            let ca = a.1 + a.2;
            let cb = b.1 + b.2;
            cb.cmp(&ca).then_with(|| a.0.cmp(&b.0))
        });
        Vocabulary::from_entries(kept)
    }
}

/// Builds the merged vocabulary over both corpora. Identical surface forms
/// from the two corpora share a single id.
pub fn build_vocabulary<'a, I, J>(
    corpus_e: I,
    corpus_f: J,
    min_count: u64,
) -> Result<Vocabulary, CorpusError>
where
    I: IntoIterator<Item = &'a str>,
    J: IntoIterator<Item = &'a str>,
{
    let mut builder = VocabBuilder::new();
    for line in corpus_e {
        builder.add_sentence(line, Lang::E);
    }
    for line in corpus_f {
        builder.add_sentence(line, Lang::F);
    }
    builder.finish(min_count)
}

/// Probability of keeping an occurrence of a word during subsampling:
/// `min(1, sqrt(t/f) + t/f)` with `f = word_count / total_tokens`.
pub fn keep_probability(word_count: u64, total_tokens: u64, t: f64) -> f64 {
    debug_assert!(word_count >= 1 && total_tokens >= word_count && t > 0.0);
    let f = word_count as f64 / total_tokens as f64;
    let ratio = t / f;
    (ratio.sqrt() + ratio).min(1.0)
}

/// Sentence view handed out by [`SentenceStream`].
#[derive(Debug, Clone, Copy)]
pub struct Sentence<'a> {
    pub ids: &'a [WordId],
    pub lang: Lang,
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: u32,
    len: u32,
    lang: Lang,
}

/// Id-encoded corpus held in memory: a flat token buffer plus per-sentence
/// spans. Out-of-vocabulary tokens are dropped at encoding time; they never
/// map to a sentinel id.
#[derive(Debug, Clone, Default)]
pub struct SentenceStream {
    tokens: Vec<WordId>,
    spans: Vec<Span>,
}

impl SentenceStream {
    /// Encodes lines of whitespace-separated tokens against the vocabulary.
    /// Sentences that are empty after OOV dropping are skipped.
    pub fn encode<'a, I>(vocab: &Vocabulary, lines: I, lang: Lang) -> SentenceStream
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut stream = SentenceStream::default();
        for line in lines {
            let start = stream.tokens.len();
            stream
                .tokens
                .extend(line.split_whitespace().filter_map(|t| vocab.id(t)));
            let len = stream.tokens.len() - start;
            if len > 0 {
                stream.spans.push(Span {
                    start: start as u32,
                    len: len as u32,
                    lang,
                });
            }
        }
        stream
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn token_count(&self) -> u64 {
        self.tokens.len() as u64
    }

    pub fn sentence(&self, i: usize) -> Sentence<'_> {
        let span = self.spans[i];
        Sentence {
            ids: &self.tokens[span.start as usize..(span.start + span.len) as usize],
            lang: span.lang,
        }
    }

    pub fn sentences(&self) -> impl Iterator<Item = Sentence<'_>> {
        (0..self.spans.len()).map(move |i| self.sentence(i))
    }
}

/// Noise distribution for negative sampling: `P(w) ∝ count(w)^exponent` over
/// the combined vocabulary, stored as a cumulative table sampled by binary
/// search.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    cumulative: Vec<f64>,
    exponent: f64,
}

/// Builds the sampling table. `exponent` must lie in `(0, 1]`; `1.0` is the
/// plain unigram distribution.
pub fn build_noise_table(vocab: &Vocabulary, exponent: f64) -> NoiseDistribution {
    assert!(
        exponent > 0.0 && exponent <= 1.0,
        "noise exponent must be in (0, 1], got {exponent}"
    );
    assert!(!vocab.is_empty());
    let weights: Vec<f64> = vocab
        .iter()
        .map(|(_, e)| {
            let c = e.count as f64;
            if exponent == 1.0 {
                c
            } else {
                c.powf(exponent)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc / total);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    NoiseDistribution {
        cumulative,
        exponent,
    }
}

impl NoiseDistribution {
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Sampling probability of one word.
    pub fn probability(&self, id: WordId) -> f64 {
        let i = id as usize;
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - lo
    }

    /// Draws one id from the distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WordId {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u) as WordId
    }

    /// Draws `p` negatives i.i.d. from the distribution, resampling any draw
    /// that lands in `exclude` (the centre word and its selected
    /// translation). `exclude` must not cover the whole vocabulary.
    pub fn sample_negatives<R: Rng + ?Sized>(
        &self,
        p: usize,
        rng: &mut R,
        exclude: &[WordId],
    ) -> Vec<WordId> {
        let mut out = Vec::with_capacity(p);
        self.sample_negatives_into(p, rng, exclude, &mut out);
        out
    }

    pub fn sample_negatives_into<R: Rng + ?Sized>(
        &self,
        p: usize,
        rng: &mut R,
        exclude: &[WordId],
        out: &mut Vec<WordId>,
    ) {
        out.clear();
        for _ in 0..p {
            loop {
                let id = self.sample(rng);
                if !exclude.contains(&id) {
                    out.push(id);
                    break;
                }
            }
        }
    }
}

/// Reads a corpus file (UTF-8, one sentence per line), optionally
/// lowercasing each line.
pub fn read_corpus_lines(path: &Path, lowercase: bool) -> Result<Vec<String>, CorpusError> {
    let err_io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(err_io)?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(err_io)?;
        lines.push(if lowercase { line.to_lowercase() } else { line });
    }
    Ok(lines)
}
