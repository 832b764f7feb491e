//! Synthetic benchmark generators used by the test suites and benches: a
//! ciphered-bilingual corpus (language f is a token-renamed copy of a
//! Zipfian, topic-structured language e, so gold translations are known by
//! construction) and a planted-cluster document-classification benchmark.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocabulary, Lang, SentenceStream, Vocabulary};
use crate::dictionary::BilingualDictionary;
use crate::eval::LabeledDocumentSet;
use crate::model::DenseMatrix;

/// Cumulative distribution over `0..n` sampled by binary search.
#[derive(Debug, Clone)]
struct Cdf {
    cum: Vec<f64>,
}

impl Cdf {
    fn from_weights(weights: &[f64]) -> Cdf {
        let total: f64 = weights.iter().sum();
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cum.push(acc / total);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Cdf { cum }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cum.partition_point(|&c| c <= u)
    }
}

#[derive(Debug, Clone)]
pub struct CipheredConfig {
    /// Number of ordinary (non-planted) word types in language e.
    pub base_vocab: usize,
    pub topics: usize,
    /// Approximate token count per language.
    pub tokens: usize,
    pub sentence_len: (usize, usize),
    /// Probability that a token is drawn from the sentence topic rather
    /// than the global distribution.
    pub topic_mix: f64,
    pub zipf_exponent: f64,
    /// Wrong translations added to each ordinary word's dictionary entry.
    pub distractors: usize,
    /// Number of two-sense words planted into the corpus.
    pub planted: usize,
    /// Probability of injecting a planted word into a sentence of one of
    /// its topics.
    pub planted_rate: f64,
    pub test_pairs: usize,
    pub min_test_count: u64,
    /// Held-out occurrences generated per planted word and sense.
    pub heldout_per_sense: usize,
    pub seed: u64,
}

impl Default for CipheredConfig {
    fn default() -> CipheredConfig {
        CipheredConfig {
            base_vocab: 2000,
            topics: 20,
            tokens: 1_000_000,
            sentence_len: (15, 25),
            topic_mix: 0.85,
            zipf_exponent: 1.0,
            distractors: 4,
            planted: 20,
            planted_rate: 0.2,
            test_pairs: 200,
            min_test_count: 50,
            heldout_per_sense: 25,
            seed: 1234,
        }
    }
}

/// One held-out occurrence of a planted two-sense word: the sentence, the
/// position of the planted word, and the sense-correct f translation.
#[derive(Debug, Clone)]
pub struct HeldoutOccurrence {
    pub tokens: Vec<String>,
    pub center: usize,
    pub gold: String,
}

#[derive(Debug, Clone)]
pub struct CipheredBenchmark {
    pub corpus_e: Vec<String>,
    pub corpus_f: Vec<String>,
    /// `(e word, f word)` dictionary pairs, gold plus distractors.
    pub dict_pairs: Vec<(String, String)>,
    /// Single-gold BLI pairs over frequent ordinary words.
    pub test_pairs: Vec<(String, String)>,
    pub heldout: Vec<HeldoutOccurrence>,
    pub planted_words: Vec<String>,
}

fn base_form(lang: Lang, i: usize) -> String {
    match lang {
        Lang::E => format!("e{i:04}"),
        Lang::F => format!("f{i:04}"),
    }
}

enum Token {
    Base(usize),
    Planted(usize),
}

struct Generator {
    cfg: CipheredConfig,
    global: Cdf,
    topic_members: Vec<Vec<usize>>,
    topic_cdfs: Vec<Cdf>,
    /// The two sense topics of each planted word.
    planted_topics: Vec<(usize, usize)>,
}

impl Generator {
    fn new(cfg: CipheredConfig) -> Generator {
        assert!(cfg.topics >= 2 && cfg.base_vocab >= cfg.topics);
        let weights: Vec<f64> = (0..cfg.base_vocab)
            .map(|i| 1.0 / ((i + 1) as f64).powf(cfg.zipf_exponent))
            .collect();
        let global = Cdf::from_weights(&weights);
        let mut topic_members: Vec<Vec<usize>> = vec![Vec::new(); cfg.topics];
        for i in 0..cfg.base_vocab {
            topic_members[i % cfg.topics].push(i);
        }
        let topic_cdfs = topic_members
            .iter()
            .map(|members| {
                let w: Vec<f64> = members.iter().map(|&i| weights[i]).collect();
                Cdf::from_weights(&w)
            })
            .collect();
        let planted_topics = (0..cfg.planted)
            .map(|j| ((2 * j) % cfg.topics, (2 * j + 1) % cfg.topics))
            .collect();
        Generator {
            cfg,
            global,
            topic_members,
            topic_cdfs,
            planted_topics,
        }
    }

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R, topic: usize) -> usize {
        if rng.random::<f64>() < self.cfg.topic_mix {
            self.topic_members[topic][self.topic_cdfs[topic].sample(rng)]
        } else {
            self.global.sample(rng)
        }
    }

    /// Generates one sentence of the given topic. When `force_planted` is
    /// set, that planted word is inserted exactly once; otherwise planted
    /// words whose senses match the topic are injected at `planted_rate`.
    fn sentence<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        topic: usize,
        force_planted: Option<usize>,
    ) -> (Vec<Token>, Option<usize>) {
        let (lo, hi) = self.cfg.sentence_len;
        let len = rng.random_range(lo..=hi);
        let mut tokens: Vec<Token> = (0..len).map(|_| Token::Base(self.draw_base(rng, topic))).collect();
        let mut planted_pos = None;
        match force_planted {
            Some(j) => {
                let pos = rng.random_range(0..=tokens.len());
                tokens.insert(pos, Token::Planted(j));
                planted_pos = Some(pos);
            }
            None => {
                for (j, &(ta, tb)) in self.planted_topics.iter().enumerate() {
                    if (ta == topic || tb == topic) && rng.random::<f64>() < self.cfg.planted_rate {
                        let pos = rng.random_range(0..=tokens.len());
                        tokens.insert(pos, Token::Planted(j));
                    }
                }
            }
        }
        (tokens, planted_pos)
    }

    fn planted_translation(&self, j: usize, topic: usize) -> String {
        let (ta, _tb) = self.planted_topics[j];
        if topic == ta {
            format!("fa{j:02}")
        } else {
            format!("fb{j:02}")
        }
    }

    fn render_e(&self, tokens: &[Token]) -> String {
        tokens
            .iter()
            .map(|t| match t {
                Token::Base(i) => base_form(Lang::E, *i),
                Token::Planted(j) => format!("p{j:02}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn render_f(&self, tokens: &[Token], topic: usize) -> String {
        tokens
            .iter()
            .map(|t| match t {
                Token::Base(i) => base_form(Lang::F, *i),
                Token::Planted(j) => self.planted_translation(*j, topic),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Builds the ciphered-bilingual benchmark: corpus f is a token-renamed copy
/// of corpus e; the dictionary maps each ordinary e word to its true f word
/// plus random distractors, and each planted two-sense word to its two
/// sense-dependent translations.
pub fn ciphered_benchmark(cfg: &CipheredConfig) -> CipheredBenchmark {
    let generator = Generator::new(cfg.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut corpus_e = Vec::new();
    let mut corpus_f = Vec::new();
    let mut base_counts = vec![0u64; cfg.base_vocab];
    let mut emitted = 0usize;
    while emitted < cfg.tokens {
        let topic = rng.random_range(0..cfg.topics);
        let (tokens, _) = generator.sentence(&mut rng, topic, None);
        for t in &tokens {
            if let Token::Base(i) = t {
                base_counts[*i] += 1;
            }
        }
        emitted += tokens.len();
        corpus_e.push(generator.render_e(&tokens));
        corpus_f.push(generator.render_f(&tokens, topic));
    }

    let mut dict_pairs = Vec::new();
    for i in 0..cfg.base_vocab {
        let e = base_form(Lang::E, i);
        dict_pairs.push((e.clone(), base_form(Lang::F, i)));
        let mut seen = vec![i];
        while seen.len() < cfg.distractors + 1 {
            let d = rng.random_range(0..cfg.base_vocab);
            if !seen.contains(&d) {
                seen.push(d);
                dict_pairs.push((e.clone(), base_form(Lang::F, d)));
            }
        }
    }
    let mut planted_words = Vec::new();
    for j in 0..cfg.planted {
        let p = format!("p{j:02}");
        dict_pairs.push((p.clone(), format!("fa{j:02}")));
        dict_pairs.push((p.clone(), format!("fb{j:02}")));
        planted_words.push(p);
    }

    let mut eligible: Vec<usize> = (0..cfg.base_vocab)
        .filter(|&i| base_counts[i] >= cfg.min_test_count)
        .collect();
    eligible.shuffle(&mut rng);
    eligible.truncate(cfg.test_pairs);
    let test_pairs: Vec<(String, String)> = eligible
        .into_iter()
        .map(|i| (base_form(Lang::E, i), base_form(Lang::F, i)))
        .collect();

    let mut heldout = Vec::new();
    for j in 0..cfg.planted {
        let (ta, tb) = generator.planted_topics[j];
        for &topic in &[ta, tb] {
            for _ in 0..cfg.heldout_per_sense {
                let (tokens, pos) = generator.sentence(&mut rng, topic, Some(j));
                let rendered: Vec<String> = generator
                    .render_e(&tokens)
                    .split_whitespace()
                    .map(str::to_string)
                    .collect();
                heldout.push(HeldoutOccurrence {
                    tokens: rendered,
                    center: pos.expect("forced planted position"),
                    gold: generator.planted_translation(j, topic),
                });
            }
        }
    }

    CipheredBenchmark {
        corpus_e,
        corpus_f,
        dict_pairs,
        test_pairs,
        heldout,
        planted_words,
    }
}

impl CipheredBenchmark {
    /// Encodes the benchmark into training inputs: merged vocabulary, the
    /// two sentence streams, and the loaded dictionary.
    pub fn prepare(
        &self,
        min_count: u64,
    ) -> (Vocabulary, Vec<SentenceStream>, BilingualDictionary) {
        let vocab = build_vocabulary(
            self.corpus_e.iter().map(String::as_str),
            self.corpus_f.iter().map(String::as_str),
            min_count,
        )
        .expect("benchmark corpus is nonempty");
        let stream_e =
            SentenceStream::encode(&vocab, self.corpus_e.iter().map(String::as_str), Lang::E);
        let stream_f =
            SentenceStream::encode(&vocab, self.corpus_f.iter().map(String::as_str), Lang::F);
        let dict = BilingualDictionary::from_pairs(
            self.dict_pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())),
            &vocab,
        )
        .expect("benchmark dictionary is usable");
        (vocab, vec![stream_e, stream_f], dict)
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCldcConfig {
    pub classes: usize,
    /// Embedding dimension; must be at least `classes` so each class gets
    /// its own orthogonal axis.
    pub dim: usize,
    /// Word types per class per language.
    pub words_per_class: usize,
    pub doc_len: usize,
    pub train_docs: usize,
    pub test_docs: usize,
    /// Uniform coordinate noise added to every embedding entry.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub struct PlantedCldc {
    pub vocab: Vocabulary,
    pub emb: DenseMatrix,
    /// Source-language (e) documents.
    pub train_docs: LabeledDocumentSet,
    /// Target-language (f) documents with the same label inventory.
    pub test_docs: LabeledDocumentSet,
}

/// Document benchmark with one orthogonal direction per class, shared
/// across the two languages: class-c words of either language embed near
/// axis c, so a classifier trained on language e transfers to language f.
pub fn planted_cldc(cfg: &PlantedCldcConfig) -> PlantedCldc {
    assert!(cfg.dim >= cfg.classes, "need dim >= classes");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for lang in [Lang::E, Lang::F] {
        for c in 0..cfg.classes {
            for k in 0..cfg.words_per_class {
                let form = match lang {
                    Lang::E => format!("e_c{c}w{k}"),
                    Lang::F => format!("f_c{c}w{k}"),
                };
                entries.push(match lang {
                    Lang::E => (form, 1u64, 0u64),
                    Lang::F => (form, 0u64, 1u64),
                });
                let mut row: Vec<f64> = (0..cfg.dim)
                    .map(|_| rng.random_range(-cfg.noise..cfg.noise))
                    .collect();
                row[c] += 1.0;
                rows.push(row);
            }
        }
    }
    let vocab = Vocabulary::from_entries(entries).unwrap();
    let emb = DenseMatrix::from_rows(&rows);

    let mut gen_docs = |lang: Lang, n: usize| -> LabeledDocumentSet {
        let docs = (0..n)
            .map(|i| {
                let class = i % cfg.classes;
                let tokens: Vec<String> = (0..cfg.doc_len)
                    .map(|_| {
                        // 10% noise words from any class keep idf informative
                        let c = if rng.random::<f64>() < 0.1 {
                            rng.random_range(0..cfg.classes)
                        } else {
                            class
                        };
                        let k = rng.random_range(0..cfg.words_per_class);
                        match lang {
                            Lang::E => format!("e_c{c}w{k}"),
                            Lang::F => format!("f_c{c}w{k}"),
                        }
                    })
                    .collect();
                (format!("class{class}"), tokens)
            })
            .collect();
        LabeledDocumentSet { docs }
    };
    let train_docs = gen_docs(Lang::E, cfg.train_docs);
    let test_docs = gen_docs(Lang::F, cfg.test_docs);

    PlantedCldc {
        vocab,
        emb,
        train_docs,
        test_docs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> CipheredConfig {
        CipheredConfig {
            base_vocab: 100,
            topics: 5,
            tokens: 5_000,
            distractors: 2,
            planted: 4,
            test_pairs: 10,
            min_test_count: 5,
            heldout_per_sense: 3,
            seed: 7,
            ..CipheredConfig::default()
        }
    }

    #[test]
    fn ciphered_corpora_are_aligned_copies() {
        let b = ciphered_benchmark(&small_cfg());
        assert_eq!(b.corpus_e.len(), b.corpus_f.len());
        for (e, f) in b.corpus_e.iter().zip(&b.corpus_f) {
            let et: Vec<&str> = e.split_whitespace().collect();
            let ft: Vec<&str> = f.split_whitespace().collect();
            assert_eq!(et.len(), ft.len());
            for (ew, fw) in et.iter().zip(&ft) {
                if let Some(idx) = ew.strip_prefix('e') {
                    assert_eq!(*fw, format!("f{idx}"));
                } else {
                    assert!(ew.starts_with('p'));
                    assert!(fw.starts_with("fa") || fw.starts_with("fb"));
                }
            }
        }
    }

    #[test]
    fn dictionary_has_gold_plus_distractors() {
        let cfg = small_cfg();
        let b = ciphered_benchmark(&cfg);
        let entries: Vec<&(String, String)> =
            b.dict_pairs.iter().filter(|(s, _)| s == "e0000").collect();
        assert_eq!(entries.len(), cfg.distractors + 1);
        assert!(entries.iter().any(|(_, t)| t == "f0000"));
        let planted: Vec<&(String, String)> =
            b.dict_pairs.iter().filter(|(s, _)| s == "p00").collect();
        assert_eq!(planted.len(), 2);
    }

    #[test]
    fn benchmark_is_deterministic_given_seed() {
        let a = ciphered_benchmark(&small_cfg());
        let b = ciphered_benchmark(&small_cfg());
        assert_eq!(a.corpus_e, b.corpus_e);
        assert_eq!(a.dict_pairs, b.dict_pairs);
        assert_eq!(a.test_pairs, b.test_pairs);
    }

    #[test]
    fn heldout_occurrences_point_at_planted_words() {
        let b = ciphered_benchmark(&small_cfg());
        assert!(!b.heldout.is_empty());
        for h in &b.heldout {
            assert!(h.tokens[h.center].starts_with('p'));
            assert!(h.gold.starts_with("fa") || h.gold.starts_with("fb"));
        }
    }

    #[test]
    fn prepare_builds_consistent_inputs() {
        let b = ciphered_benchmark(&small_cfg());
        let (vocab, streams, dict) = b.prepare(1);
        assert_eq!(streams.len(), 2);
        assert!(vocab.id("e0000").is_some());
        assert!(vocab.id("f0000").is_some());
        let p0 = vocab.id("p00").unwrap();
        assert_eq!(dict.translations(p0, Lang::E).len(), 2);
    }

    #[test]
    fn planted_cldc_shapes() {
        let s = planted_cldc(&PlantedCldcConfig {
            classes: 4,
            dim: 8,
            words_per_class: 5,
            doc_len: 10,
            train_docs: 20,
            test_docs: 12,
            noise: 0.1,
            seed: 3,
        });
        assert_eq!(s.vocab.len(), 2 * 4 * 5);
        assert_eq!(s.emb.rows(), s.vocab.len());
        assert_eq!(s.train_docs.docs.len(), 20);
        assert_eq!(s.test_docs.docs.len(), 12);
    }
}
