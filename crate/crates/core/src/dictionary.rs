//! Bilingual translation lexicon: loads tab-separated word pairs, keeps both
//! directional maps by symmetric closure, and answers `dict(w)` queries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Lang, Vocabulary, WordId};

#[derive(Debug, Error)]
pub enum DictError {
    #[error("{path}:{line}: expected exactly 2 tab-separated fields, found {fields}")]
    Malformed {
        path: String,
        line: usize,
        fields: usize,
    },
    #[error("no usable dictionary pairs ({dropped_oov} dropped as out-of-vocabulary, {dropped_mwe} dropped as multi-word)")]
    NoUsablePairs {
        dropped_oov: usize,
        dropped_mwe: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Load-time bookkeeping: how much of the vocabulary the dictionary covers
/// and how many pairs were dropped on the way in.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CoverageStats {
    pub usable_pairs: usize,
    pub dropped_oov: usize,
    pub dropped_mwe: usize,
    /// Fraction of vocabulary words attested in e that have ≥1 translation.
    pub coverage_e: f64,
    /// Fraction of vocabulary words attested in f that have ≥1 translation.
    pub coverage_f: f64,
    pub mean_translations_e: f64,
    pub mean_translations_f: f64,
}

/// Directional word→translation-set maps over vocabulary ids. Immutable
/// after load and safely shareable across workers.
#[derive(Debug, Clone)]
pub struct BilingualDictionary {
    e_to_f: HashMap<WordId, Box<[WordId]>>,
    f_to_e: HashMap<WordId, Box<[WordId]>>,
    stats: CoverageStats,
}

impl BilingualDictionary {
    /// Builds the dictionary from `(source, target)` surface-form pairs,
    /// where sources are e-words and targets f-words. Pairs with an
    /// out-of-vocabulary side are dropped and counted; multi-word
    /// expressions likewise (the token-level model has no representation
    /// for them). Both directional maps are built by symmetric closure.
    pub fn from_pairs<I, S, T>(pairs: I, vocab: &Vocabulary) -> Result<BilingualDictionary, DictError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut e_to_f: HashMap<WordId, Vec<WordId>> = HashMap::new();
        let mut f_to_e: HashMap<WordId, Vec<WordId>> = HashMap::new();
        let mut usable = 0usize;
        let mut dropped_oov = 0usize;
        let mut dropped_mwe = 0usize;
        for (s, t) in pairs {
            let (s, t) = (s.as_ref().trim(), t.as_ref().trim());
            if s.contains(char::is_whitespace) || t.contains(char::is_whitespace) {
                dropped_mwe += 1;
                continue;
            }
            match (vocab.id(s), vocab.id(t)) {
                (Some(sid), Some(tid)) => {
                    e_to_f.entry(sid).or_default().push(tid);
                    f_to_e.entry(tid).or_default().push(sid);
                    usable += 1;
                }
                _ => dropped_oov += 1,
            }
        }
        if usable == 0 {
            return Err(DictError::NoUsablePairs {
                dropped_oov,
                dropped_mwe,
            });
        }
        let freeze = |m: HashMap<WordId, Vec<WordId>>| -> HashMap<WordId, Box<[WordId]>> {
            m.into_iter()
                .map(|(k, mut v)| {
                    v.sort_unstable();
                    v.dedup();
                    (k, v.into_boxed_slice())
                })
                .collect()
        };
        let e_to_f = freeze(e_to_f);
        let f_to_e = freeze(f_to_e);

        let coverage = |map: &HashMap<WordId, Box<[WordId]>>, lang: Lang| -> (f64, f64) {
            let attested = vocab.iter().filter(|(id, _)| vocab.attested(*id, lang));
            let mut total = 0usize;
            let mut covered = 0usize;
            let mut translations = 0usize;
            for (id, _) in attested {
                total += 1;
                if let Some(t) = map.get(&id) {
                    covered += 1;
                    translations += t.len();
                }
            }
            let frac = if total == 0 {
                0.0
            } else {
                covered as f64 / total as f64
            };
            let mean = if covered == 0 {
                0.0
            } else {
                translations as f64 / covered as f64
            };
            (frac, mean)
        };
        let (coverage_e, mean_translations_e) = coverage(&e_to_f, Lang::E);
        let (coverage_f, mean_translations_f) = coverage(&f_to_e, Lang::F);

        Ok(BilingualDictionary {
            e_to_f,
            f_to_e,
            stats: CoverageStats {
                usable_pairs: usable,
                dropped_oov,
                dropped_mwe,
                coverage_e,
                coverage_f,
                mean_translations_e,
                mean_translations_f,
            },
        })
    }

    /// Loads a dictionary file: UTF-8 lines of `source<TAB>target`, lines
    /// starting with `#` ignored. A line without exactly two fields is an
    /// error carrying its line number.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<BilingualDictionary, DictError> {
        let err_io = |source| DictError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(err_io)?;
        let mut pairs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(err_io)?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(DictError::Malformed {
                    path: path.display().to_string(),
                    line: i + 1,
                    fields: fields.len(),
                });
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        BilingualDictionary::from_pairs(pairs, vocab)
    }

    /// Translation candidates of `word` when it occurs in a `source_lang`
    /// sentence, in ascending id order. The empty slice is a valid answer.
    pub fn translations(&self, word: WordId, source_lang: Lang) -> &[WordId] {
        let map = match source_lang {
            Lang::E => &self.e_to_f,
            Lang::F => &self.f_to_e,
        };
        map.get(&word).map(|t| &t[..]).unwrap_or(&[])
    }

    pub fn stats(&self) -> &CoverageStats {
        &self.stats
    }

    /// All (source, targets) entries of one direction; used by scans and
    /// closure checks.
    pub fn entries(&self, source_lang: Lang) -> impl Iterator<Item = (WordId, &[WordId])> {
        let map = match source_lang {
            Lang::E => &self.e_to_f,
            Lang::F => &self.f_to_e,
        };
        map.iter().map(|(&k, v)| (k, &v[..]))
    }
}
