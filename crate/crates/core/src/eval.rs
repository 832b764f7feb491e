//! Evaluation protocols over a trained embedding space: bilingual lexicon
//! induction (recall@k), monolingual word similarity (Spearman ρ),
//! crosslingual document classification (tf-idf weighted embedding bags +
//! averaged perceptron), and exact nearest-neighbour inspection.
//!
//! Everything here is read-only over the embeddings; test items are scored
//! in parallel when the `parallel` feature is on, with identical results
//! either way.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::{Lang, Vocabulary, WordId};
use crate::model::{cosine, DenseMatrix};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query word {0:?} is not in the vocabulary")]
    OovQuery(String),
    #[error("empty effective test set ({excluded} items excluded as out-of-vocabulary)")]
    EmptyTestSet { excluded: usize },
    #[error("need at least {needed} usable items, found {found}")]
    TooFewItems { needed: usize, found: usize },
    #[error("correlation undefined: all {side} scores are identical")]
    DegenerateScores { side: &'static str },
    #[error("document has no in-vocabulary tokens")]
    EmptyDocument,
    #[error("document tf-idf weights sum to a non-positive value")]
    ZeroWeight,
    #[error("training documents contain {0} class(es); at least 2 are required")]
    TooFewClasses(usize),
    #[error("recall cutoffs must be nonempty")]
    NoCutoffs,
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

fn map_items<T: Sync, U: Send, F: Fn(&T) -> U + Sync>(items: &[T], f: F) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(|t| f(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(|t| f(t)).collect()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, EvalError> {
    let err_io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(err_io)?;
    BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(err_io)
}

/// Bilingual lexicon induction test set: each source word has a single gold
/// translation.
#[derive(Debug, Clone)]
pub struct BliTestSet {
    pub pairs: Vec<(String, String)>,
    pub source_lang: Lang,
    pub target_lang: Lang,
}

impl BliTestSet {
    /// Loads lines of `source<TAB>gold`.
    pub fn load(path: &Path, source_lang: Lang, target_lang: Lang) -> Result<BliTestSet, EvalError> {
        let mut pairs = Vec::new();
        for (i, line) in read_lines(path)?.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(EvalError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected \"source<TAB>gold\", got {line:?}"),
                });
            }
            pairs.push((fields[0].trim().to_string(), fields[1].trim().to_string()));
        }
        Ok(BliTestSet {
            pairs,
            source_lang,
            target_lang,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BliReport {
    pub recalls: BTreeMap<usize, f64>,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Exact nearest-neighbour ranking of `query` by cosine over all words
/// passing the language filter (attestation in that corpus), the query
/// itself excluded.
pub fn nearest_neighbors(
    emb: &DenseMatrix,
    vocab: &Vocabulary,
    query: &str,
    n: usize,
    filter: Option<Lang>,
) -> Result<Vec<(String, f64)>, EvalError> {
    let qid = vocab
        .id(query)
        .ok_or_else(|| EvalError::OovQuery(query.to_string()))?;
    let qrow = emb.row(qid as usize);
    let ids: Vec<WordId> = (0..vocab.len() as WordId)
        .filter(|&id| id != qid && filter.map_or(true, |l| vocab.attested(id, l)))
        .collect();
    let mut scored: Vec<(WordId, f64)> = map_items(&ids, |&id| {
        (id, cosine(qrow, emb.row(id as usize)))
    });
    scored.sort_unstable_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored
        .into_iter()
        .map(|(id, s)| (vocab.form(id).to_string(), s))
        .collect())
}

/// Recall@k over the test pairs. For each pair the gold target is ranked by
/// cosine among all vocabulary words attested in the target corpus; pairs
/// with an out-of-vocabulary side are excluded from the denominator.
pub fn bli_recall(
    emb: &DenseMatrix,
    vocab: &Vocabulary,
    test: &BliTestSet,
    ks: &[usize],
) -> Result<BliReport, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::NoCutoffs);
    }
    let pool: Vec<WordId> = (0..vocab.len() as WordId)
        .filter(|&id| vocab.attested(id, test.target_lang))
        .collect();

    let resolved: Vec<Option<(WordId, WordId)>> = test
        .pairs
        .iter()
        .map(|(s, g)| Some((vocab.id(s)?, vocab.id(g)?)))
        .collect();
    let usable: Vec<(WordId, WordId)> = resolved.iter().flatten().copied().collect();
    let excluded = resolved.len() - usable.len();
    if usable.is_empty() {
        return Err(EvalError::EmptyTestSet { excluded });
    }

    // Rank of the gold among the pool: 1 + number of candidates strictly
    // better, ties resolved by lower id. None when the gold is not even in
    // the pool (never retrievable).
    let ranks: Vec<Option<usize>> = map_items(&usable, |&(src, gold)| {
        if !vocab.attested(gold, test.target_lang) {
            return None;
        }
        let srow = emb.row(src as usize);
        let gold_score = cosine(srow, emb.row(gold as usize));
        let mut better = 0usize;
        for &c in &pool {
            if c == gold {
                continue;
            }
            let s = cosine(srow, emb.row(c as usize));
            if s > gold_score || (s == gold_score && c < gold) {
                better += 1;
            }
        }
        Some(better + 1)
    });

    let mut recalls = BTreeMap::new();
    for &k in ks {
        let hits = ranks
            .iter()
            .filter(|r| r.map_or(false, |rank| rank <= k))
            .count();
        recalls.insert(k, hits as f64 / usable.len() as f64);
    }
    Ok(BliReport {
        recalls,
        evaluated: usable.len(),
        excluded,
    })
}

/// Word-similarity test set: `(w1, w2, human score)` tuples.
#[derive(Debug, Clone)]
pub struct SimilarityTestSet {
    pub items: Vec<(String, String, f64)>,
}

impl SimilarityTestSet {
    /// Loads lines of `w1<TAB>w2<TAB>score`.
    pub fn load(path: &Path) -> Result<SimilarityTestSet, EvalError> {
        let mut items = Vec::new();
        for (i, line) in read_lines(path)?.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = if fields.len() == 3 {
                fields[2].trim().parse::<f64>().ok()
            } else {
                None
            };
            match parsed {
                Some(score) => {
                    items.push((fields[0].trim().to_string(), fields[1].trim().to_string(), score))
                }
                None => {
                    return Err(EvalError::Format {
                        path: path.display().to_string(),
                        line: i + 1,
                        msg: format!("expected \"w1<TAB>w2<TAB>score\", got {line:?}"),
                    })
                }
            }
        }
        Ok(SimilarityTestSet { items })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpearmanReport {
    pub rho: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Fractional (tie-averaged) ranks, 1-based.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx.sqrt() * vy.sqrt()))
}

/// Spearman's ρ between model cosines and human scores, with fractional
/// ranks on both sides. Pairs with an out-of-vocabulary word are excluded.
pub fn spearman(
    emb: &DenseMatrix,
    vocab: &Vocabulary,
    test: &SimilarityTestSet,
) -> Result<SpearmanReport, EvalError> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    let mut excluded = 0usize;
    for (w1, w2, score) in &test.items {
        match (vocab.id(w1), vocab.id(w2)) {
            (Some(a), Some(b)) => {
                model.push(cosine(emb.row(a as usize), emb.row(b as usize)));
                human.push(*score);
            }
            _ => excluded += 1,
        }
    }
    if model.len() < 2 {
        return Err(EvalError::TooFewItems {
            needed: 2,
            found: model.len(),
        });
    }
    let rm = fractional_ranks(&model);
    let rh = fractional_ranks(&human);
    match pearson(&rm, &rh) {
        Some(rho) => Ok(SpearmanReport {
            rho,
            evaluated: model.len(),
            excluded,
        }),
        None => {
            let side = if rm.iter().all(|&r| r == rm[0]) {
                "model"
            } else {
                "human"
            };
            Err(EvalError::DegenerateScores { side })
        }
    }
}

/// Labeled documents: `(label, tokens)` rows.
#[derive(Debug, Clone)]
pub struct LabeledDocumentSet {
    pub docs: Vec<(String, Vec<String>)>,
}

impl LabeledDocumentSet {
    /// Loads lines of `label<TAB>space-separated tokens`.
    pub fn load(path: &Path) -> Result<LabeledDocumentSet, EvalError> {
        let mut docs = Vec::new();
        for (i, line) in read_lines(path)?.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((label, rest)) = line.split_once('\t') else {
                return Err(EvalError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected \"label<TAB>tokens\", got {line:?}"),
                });
            };
            docs.push((
                label.trim().to_string(),
                rest.split_whitespace().map(str::to_string).collect(),
            ));
        }
        Ok(LabeledDocumentSet { docs })
    }
}

/// Inverse document frequencies from a training split:
/// `idf(w) = ln(N / (df(w) + 1))`, falling back to `ln(N)` for words never
/// seen in the split.
#[derive(Debug, Clone)]
pub struct IdfTable {
    idf: HashMap<WordId, f64>,
    ln_n: f64,
}

impl IdfTable {
    pub fn from_docs(docs: &[Vec<WordId>]) -> IdfTable {
        assert!(!docs.is_empty(), "idf needs at least one document");
        let n = docs.len() as f64;
        let mut df: HashMap<WordId, u64> = HashMap::new();
        let mut seen: Vec<WordId> = Vec::new();
        for doc in docs {
            seen.clear();
            seen.extend_from_slice(doc);
            seen.sort_unstable();
            seen.dedup();
            for &w in &seen {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(w, d)| (w, (n / (d as f64 + 1.0)).ln()))
            .collect();
        IdfTable {
            idf,
            ln_n: n.ln(),
        }
    }

    pub fn get(&self, w: WordId) -> f64 {
        self.idf.get(&w).copied().unwrap_or(self.ln_n)
    }
}

/// tf-idf weighted mean of the document's embedding rows:
/// `Σ tf·idf·emb_w / Σ tf·idf` over in-vocabulary tokens.
pub fn doc_vector(
    tokens: &[WordId],
    emb: &DenseMatrix,
    idf: &IdfTable,
) -> Result<Vec<f64>, EvalError> {
    if tokens.is_empty() {
        return Err(EvalError::EmptyDocument);
    }
    let mut tf: HashMap<WordId, f64> = HashMap::new();
    for &t in tokens {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    let mut out = vec![0.0; emb.dim()];
    let mut total = 0.0;
    let mut entries: Vec<(WordId, f64)> = tf.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    for (w, count) in entries {
        let weight = count * idf.get(w);
        total += weight;
        for (o, v) in out.iter_mut().zip(emb.row(w as usize)) {
            *o += weight * v;
        }
    }
    if total <= 0.0 {
        return Err(EvalError::ZeroWeight);
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(out)
}

/// Multiclass averaged perceptron: one weight vector per class, argmax
/// score, loser/winner updates on mistakes, weights averaged over every
/// training step. Example order is shuffled each epoch under the seed.
#[derive(Debug, Clone)]
pub struct AveragedPerceptron {
    weights: DenseMatrix,
}

impl AveragedPerceptron {
    pub fn train(
        xs: &[Vec<f64>],
        ys: &[usize],
        n_classes: usize,
        epochs: usize,
        seed: u64,
    ) -> AveragedPerceptron {
        assert_eq!(xs.len(), ys.len());
        assert!(n_classes >= 2, "need at least two classes");
        assert!(!xs.is_empty());
        let dim = xs[0].len();
        let mut w = DenseMatrix::zeros(n_classes, dim);
        let mut acc = DenseMatrix::zeros(n_classes, dim);
        let mut step = 1.0f64;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &xs[i];
                let truth = ys[i];
                let guess = argmax_class(&w, x);
                if guess != truth {
                    for (j, &v) in x.iter().enumerate() {
                        w.row_mut(truth)[j] += v;
                        w.row_mut(guess)[j] -= v;
                        acc.row_mut(truth)[j] += step * v;
                        acc.row_mut(guess)[j] -= step * v;
                    }
                }
                step += 1.0;
            }
        }
        // averaged weights: w − acc/step
        let mut averaged = w.clone();
        for r in 0..n_classes {
            for j in 0..dim {
                averaged.row_mut(r)[j] -= acc.get(r, j) / step;
            }
        }
        AveragedPerceptron { weights: averaged }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_class(&self.weights, x)
    }

    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }
}

/// Argmax over class scores; ties go to the lowest class index.
fn argmax_class(w: &DenseMatrix, x: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..w.rows() {
        let score: f64 = w.row(c).iter().zip(x).map(|(a, b)| a * b).sum();
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct CldcReport {
    pub accuracy: f64,
    pub train_used: usize,
    pub test_used: usize,
    pub excluded_train: usize,
    pub excluded_test: usize,
    /// Test documents whose label never occurred in training; counted as
    /// automatic misses.
    pub missing_label_misses: usize,
}

/// Crosslingual document classification: tf-idf weighted document vectors
/// (idf from the source-language training split), an averaged perceptron
/// trained on the source documents, accuracy measured on the target
/// documents in the shared space.
#[allow(clippy::too_many_arguments)]
pub fn cldc_run(
    emb: &DenseMatrix,
    vocab: &Vocabulary,
    train_docs: &LabeledDocumentSet,
    test_docs: &LabeledDocumentSet,
    n_train: usize,
    n_test: usize,
    epochs: usize,
    seed: u64,
) -> Result<CldcReport, EvalError> {
    let encode = |set: &LabeledDocumentSet, cap: usize| -> (Vec<(String, Vec<WordId>)>, usize) {
        let mut out = Vec::new();
        let mut excluded = 0usize;
        for (label, tokens) in set.docs.iter().take(cap) {
            let ids: Vec<WordId> = tokens.iter().filter_map(|t| vocab.id(t)).collect();
            if ids.is_empty() {
                excluded += 1;
            } else {
                out.push((label.clone(), ids));
            }
        }
        (out, excluded)
    };
    let (train, excluded_train) = encode(train_docs, n_train);
    let (test, excluded_test) = encode(test_docs, n_test);
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::EmptyTestSet {
            excluded: excluded_train + excluded_test,
        });
    }

    let mut labels: Vec<String> = train.iter().map(|(l, _)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(EvalError::TooFewClasses(labels.len()));
    }
    let class_of: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let train_ids: Vec<Vec<WordId>> = train.iter().map(|(_, ids)| ids.clone()).collect();
    let idf = IdfTable::from_docs(&train_ids);

    let mut xs = Vec::with_capacity(train.len());
    let mut ys = Vec::with_capacity(train.len());
    for (label, ids) in &train {
        match doc_vector(ids, emb, &idf) {
            Ok(v) => {
                xs.push(v);
                ys.push(class_of[label.as_str()]);
            }
            Err(EvalError::ZeroWeight) => continue,
            Err(e) => return Err(e),
        }
    }
    if ys.iter().collect::<std::collections::BTreeSet<_>>().len() < 2 {
        return Err(EvalError::TooFewClasses(1));
    }
    let model = AveragedPerceptron::train(&xs, &ys, labels.len(), epochs, seed);

    let test_vecs: Vec<(Option<usize>, Option<Vec<f64>>)> = map_items(&test, |(label, ids)| {
        let class = class_of.get(label.as_str()).copied();
        let vec = doc_vector(ids, emb, &idf).ok();
        (class, vec)
    });
    let mut correct = 0usize;
    let mut evaluated = 0usize;
    let mut missing_label_misses = 0usize;
    for (class, vec) in test_vecs {
        let Some(vec) = vec else {
            continue; // zero-weight document, excluded
        };
        evaluated += 1;
        match class {
            Some(c) => {
                if model.predict(&vec) == c {
                    correct += 1;
                }
            }
            None => missing_label_misses += 1,
        }
    }
    if evaluated == 0 {
        return Err(EvalError::EmptyTestSet {
            excluded: excluded_test,
        });
    }
    Ok(CldcReport {
        accuracy: correct as f64 / evaluated as f64,
        train_used: xs.len(),
        test_used: evaluated,
        excluded_train,
        excluded_test,
        missing_label_misses,
    })
}
