//! Embedding parameters and pure vector operations: the context matrix V and
//! word matrix U, context-vector construction, cosine similarity, the
//! combination schemes that merge the two spaces after training, and the
//! text embedding-file format.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Vocabulary, WordId};
use crate::derive_seed;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("context vector over an empty context")]
    EmptyContext,
}

#[derive(Debug, Error)]
pub enum EmbeddingIoError {
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("word {form:?} contains whitespace and cannot be written to the embedding format")]
    WordWithWhitespace { form: String },
    #[error("matrix has {rows} rows but the vocabulary has {vocab} entries")]
    RowCountMismatch { rows: usize, vocab: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// f64 cell with relaxed atomic access. Training workers update rows without
/// synchronization (asynchronous SGD; lost updates are tolerated as noise),
/// which requires the storage itself to be data-race free.
#[derive(Debug, Default)]
pub struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub fn new(v: f64) -> AtomicF64 {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }

    /// Unsynchronized read-modify-write; racing adds may drop an update.
    #[inline]
    pub fn add(&self, d: f64) {
        self.set(self.get() + d);
    }
}

/// Row-major `rows × dim` parameter matrix of [`AtomicF64`] cells.
#[derive(Debug)]
pub struct ParamMatrix {
    data: Box<[AtomicF64]>,
    rows: usize,
    dim: usize,
}

impl ParamMatrix {
    pub fn zeros(rows: usize, dim: usize) -> ParamMatrix {
        let data: Vec<AtomicF64> = (0..rows * dim).map(|_| AtomicF64::new(0.0)).collect();
        ParamMatrix {
            data: data.into_boxed_slice(),
            rows,
            dim,
        }
    }

    pub fn from_dense(dense: &DenseMatrix) -> ParamMatrix {
        let data: Vec<AtomicF64> = dense.data.iter().map(|&v| AtomicF64::new(v)).collect();
        ParamMatrix {
            data: data.into_boxed_slice(),
            rows: dense.rows,
            dim: dense.dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[AtomicF64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn read_row_into(&self, r: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.row(r)) {
            *o = c.get();
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c].get()
    }

    pub fn set(&self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c].set(v);
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            data: self.data.iter().map(AtomicF64::get).collect(),
            rows: self.rows,
            dim: self.dim,
        }
    }
}

/// Plain row-major matrix used for evaluation-time (read-only) work.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, dim: usize) -> DenseMatrix {
        DenseMatrix {
            data: vec![0.0; rows * dim],
            rows,
            dim,
        }
    }

    pub fn from_vec(data: Vec<f64>, rows: usize, dim: usize) -> DenseMatrix {
        assert_eq!(data.len(), rows * dim, "shape mismatch");
        DenseMatrix { data, rows, dim }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> DenseMatrix {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix {
            data,
            rows: rows.len(),
            dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }
}

/// The two trainable matrices: V holds words-as-context, U words-as-targets.
#[derive(Debug)]
pub struct EmbeddingMatrices {
    pub v: ParamMatrix,
    pub u: ParamMatrix,
}

impl EmbeddingMatrices {
    /// Random initialization: V entries i.i.d. uniform in `[-0.5/d, 0.5/d)`,
    /// U all zero (so first-epoch translation selection depends only on V).
    /// Reproducible from the seed.
    pub fn init(vocab_size: usize, dim: usize, seed: u64) -> EmbeddingMatrices {
        assert!(dim >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0));
        let bound = 0.5 / dim as f64;
        let v = ParamMatrix::zeros(vocab_size, dim);
        for cell in v.data.iter() {
            cell.set(rng.random_range(-bound..bound));
        }
        let u = ParamMatrix::zeros(vocab_size, dim);
        EmbeddingMatrices { v, u }
    }

    pub fn from_dense(v: &DenseMatrix, u: &DenseMatrix) -> EmbeddingMatrices {
        assert_eq!((v.rows, v.dim), (u.rows, u.dim), "V and U shapes differ");
        EmbeddingMatrices {
            v: ParamMatrix::from_dense(v),
            u: ParamMatrix::from_dense(u),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.v.rows()
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }
}

/// Mean of the context rows of V. The divisor is the number of context
/// tokens actually present, so truncated windows at sentence edges are not
/// downweighted.
pub fn context_vector(v: &ParamMatrix, context: &[WordId]) -> Result<Vec<f64>, ModelError> {
    let mut out = vec![0.0; v.dim()];
    context_vector_into(v, context, &mut out)?;
    Ok(out)
}

pub fn context_vector_into(
    v: &ParamMatrix,
    context: &[WordId],
    out: &mut [f64],
) -> Result<(), ModelError> {
    if context.is_empty() {
        return Err(ModelError::EmptyContext);
    }
    out.fill(0.0);
    for &c in context {
        for (o, cell) in out.iter_mut().zip(v.row(c as usize)) {
            *o += cell.get();
        }
    }
    let inv = 1.0 / context.len() as f64;
    for o in out.iter_mut() {
        *o *= inv;
    }
    Ok(())
}

/// Cosine similarity. A zero-norm side yields `-inf` so that such vectors
/// rank last (zero U rows exist before a word's first update).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return f64::NEG_INFINITY;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Cosine between a plain vector and one row of a parameter matrix, without
/// materializing the row.
pub(crate) fn cosine_vs_row(a: &[f64], row: &[AtomicF64]) -> f64 {
    debug_assert_eq!(a.len(), row.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, cell) in a.iter().zip(row) {
        let y = cell.get();
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return f64::NEG_INFINITY;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Where a combined embedding came from; fixes the expected shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    U,
    V,
    Interpolate(f64),
    Concat,
    RegularizedU,
    RegularizedV,
    RegularizedMean,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::U => write!(f, "U"),
            Provenance::V => write!(f, "V"),
            Provenance::Interpolate(g) => write!(f, "interpolate({g})"),
            Provenance::Concat => write!(f, "concat"),
            Provenance::RegularizedU => write!(f, "regularized+U"),
            Provenance::RegularizedV => write!(f, "regularized+V"),
            Provenance::RegularizedMean => write!(f, "regularized+mean"),
        }
    }
}

/// Output embedding produced by one of the combination schemes.
#[derive(Debug, Clone)]
pub struct CombinedEmbedding {
    pub matrix: DenseMatrix,
    pub provenance: Provenance,
}

/// Which matrix to emit after a regularized (δ > 0) training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegOutput {
    U,
    V,
    Mean,
}

pub fn pick_u(m: &EmbeddingMatrices) -> CombinedEmbedding {
    CombinedEmbedding {
        matrix: m.u.to_dense(),
        provenance: Provenance::U,
    }
}

pub fn pick_v(m: &EmbeddingMatrices) -> CombinedEmbedding {
    CombinedEmbedding {
        matrix: m.v.to_dense(),
        provenance: Provenance::V,
    }
}

/// `γ·V + (1−γ)·U`. The endpoints are returned exactly: γ=0 is U and γ=1 is
/// V, with no interpolation arithmetic applied.
pub fn combine_interpolate(m: &EmbeddingMatrices, gamma: f64) -> CombinedEmbedding {
    assert!((0.0..=1.0).contains(&gamma), "gamma must be in [0,1]");
    let matrix = if gamma == 0.0 {
        m.u.to_dense()
    } else if gamma == 1.0 {
        m.v.to_dense()
    } else {
        let rows = m.vocab_size();
        let dim = m.dim();
        let mut out = DenseMatrix::zeros(rows, dim);
        for r in 0..rows {
            let vr = m.v.row(r);
            let ur = m.u.row(r);
            let o = out.row_mut(r);
            for c in 0..dim {
                o[c] = gamma * vr[c].get() + (1.0 - gamma) * ur[c].get();
            }
        }
        out
    };
    CombinedEmbedding {
        matrix,
        provenance: Provenance::Interpolate(gamma),
    }
}

/// Row-wise concatenation `[V_w ; U_w]`, shape `|W| × 2d`.
pub fn combine_concat(m: &EmbeddingMatrices) -> CombinedEmbedding {
    let rows = m.vocab_size();
    let dim = m.dim();
    let mut out = DenseMatrix::zeros(rows, 2 * dim);
    for r in 0..rows {
        let o = out.row_mut(r);
        for (c, cell) in m.v.row(r).iter().enumerate() {
            o[c] = cell.get();
        }
        for (c, cell) in m.u.row(r).iter().enumerate() {
            o[dim + c] = cell.get();
        }
    }
    CombinedEmbedding {
        matrix: out,
        provenance: Provenance::Concat,
    }
}

/// Output of a training run where the two spaces were fused by the δ
/// penalty; the combination itself already happened during training.
pub fn regularized_output(m: &EmbeddingMatrices, which: RegOutput) -> CombinedEmbedding {
    match which {
        RegOutput::U => CombinedEmbedding {
            matrix: m.u.to_dense(),
            provenance: Provenance::RegularizedU,
        },
        RegOutput::V => CombinedEmbedding {
            matrix: m.v.to_dense(),
            provenance: Provenance::RegularizedV,
        },
        RegOutput::Mean => CombinedEmbedding {
            matrix: combine_interpolate(m, 0.5).matrix,
            provenance: Provenance::RegularizedMean,
        },
    }
}

/// Writes the text embedding format: a `"<count> <dim>"` header, then one
/// line per word, `"<surface> v1 ... vdim"` with 6-decimal fixed-point
/// values, in vocabulary id order.
pub fn write_embeddings<W: Write>(
    matrix: &DenseMatrix,
    vocab: &Vocabulary,
    mut w: W,
) -> Result<(), EmbeddingIoError> {
    if matrix.rows() != vocab.len() {
        return Err(EmbeddingIoError::RowCountMismatch {
            rows: matrix.rows(),
            vocab: vocab.len(),
        });
    }
    let io_err = |source| EmbeddingIoError::Io {
        path: "<writer>".to_string(),
        source,
    };
    writeln!(w, "{} {}", matrix.rows(), matrix.dim()).map_err(io_err)?;
    for (id, entry) in vocab.iter() {
        if entry.form.contains(char::is_whitespace) {
            return Err(EmbeddingIoError::WordWithWhitespace {
                form: entry.form.clone(),
            });
        }
        w.write_all(entry.form.as_bytes()).map_err(io_err)?;
        for v in matrix.row(id as usize) {
            write!(w, " {v:.6}").map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn save_embeddings(
    matrix: &DenseMatrix,
    vocab: &Vocabulary,
    path: &Path,
) -> Result<(), EmbeddingIoError> {
    let file = File::create(path).map_err(|source| EmbeddingIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_embeddings(matrix, vocab, &mut w)?;
    w.flush().map_err(|source| EmbeddingIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl CombinedEmbedding {
    pub fn save(&self, vocab: &Vocabulary, path: &Path) -> Result<(), EmbeddingIoError> {
        save_embeddings(&self.matrix, vocab, path)
    }
}

/// Loads the text embedding format back as surface forms plus a matrix.
/// Header or row-length problems are reported with 1-based line numbers.
pub fn load_embeddings(path: &Path) -> Result<(Vec<String>, DenseMatrix), EmbeddingIoError> {
    let p = path.display().to_string();
    let err_io = |source| EmbeddingIoError::Io {
        path: p.clone(),
        source,
    };
    let file = File::open(path).map_err(err_io)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| EmbeddingIoError::Format {
        path: p.clone(),
        line: 1,
        msg: "missing header".to_string(),
    })?;
    let header = header.map_err(err_io)?;
    let mut it = header.split_whitespace();
    let parse_header = |s: Option<&str>| -> Result<usize, EmbeddingIoError> {
        s.and_then(|x| x.parse().ok())
            .ok_or_else(|| EmbeddingIoError::Format {
                path: p.clone(),
                line: 1,
                msg: format!("header must be \"<count> <dim>\", got {header:?}"),
            })
    };
    let count = parse_header(it.next())?;
    let dim = parse_header(it.next())?;
    if it.next().is_some() || dim == 0 {
        return Err(EmbeddingIoError::Format {
            path: p,
            line: 1,
            msg: format!("header must be \"<count> <dim>\", got {header:?}"),
        });
    }

    let mut forms = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines {
        let line = line.map_err(err_io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let form = fields.next().unwrap_or_default().to_string();
        let before = data.len();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| EmbeddingIoError::Format {
                path: p.clone(),
                line: i + 1,
                msg: format!("invalid value {field:?}"),
            })?;
            data.push(value);
        }
        if data.len() - before != dim {
            return Err(EmbeddingIoError::Format {
                path: p,
                line: i + 1,
                msg: format!("expected {dim} values, found {}", data.len() - before),
            });
        }
        forms.push(form);
        if forms.len() > count {
            return Err(EmbeddingIoError::Format {
                path: p,
                line: i + 1,
                msg: format!("more rows than the header count {count}"),
            });
        }
    }
    if forms.len() != count {
        return Err(EmbeddingIoError::Format {
            path: p,
            line: forms.len() + 1,
            msg: format!("header promised {count} rows, found {}", forms.len()),
        });
    }
    Ok((forms, DenseMatrix::from_vec(data, count, dim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use proptest::prelude::*;

    #[test]
    fn init_bounds_and_zero_u() {
        let m = EmbeddingMatrices::init(50, 200, 42);
        let bound = 0.5 / 200.0;
        for r in 0..50 {
            for c in 0..200 {
                assert!(m.v.get(r, c).abs() <= bound);
                assert_eq!(m.u.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = EmbeddingMatrices::init(10, 8, 7);
        let b = EmbeddingMatrices::init(10, 8, 7);
        assert_eq!(a.v.to_dense(), b.v.to_dense());
        assert_eq!(a.u.to_dense(), b.u.to_dense());
    }

    #[test]
    fn context_vector_mean_of_two() {
        let v = ParamMatrix::from_dense(&DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ]));
        let h = context_vector(&v, &[0, 1]).unwrap();
        assert_eq!(h, vec![0.5, 0.5]);
    }

    #[test]
    fn context_vector_single_row_is_identity() {
        let v = ParamMatrix::from_dense(&DenseMatrix::from_rows(&[vec![0.3, -0.7, 2.0]]));
        let h = context_vector(&v, &[0]).unwrap();
        assert_eq!(h, vec![0.3, -0.7, 2.0]);
    }

    #[test]
    fn context_vector_matches_brute_force_mean() {
        let mut rows = Vec::new();
        let mut state = 1u64;
        for _ in 0..5 {
            let row: Vec<f64> = (0..7)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            rows.push(row);
        }
        let v = ParamMatrix::from_dense(&DenseMatrix::from_rows(&rows));
        let ctx: Vec<WordId> = vec![0, 1, 2, 3, 4];
        let h = context_vector(&v, &ctx).unwrap();
        for c in 0..7 {
            let expected: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / 5.0;
            assert!((h[c] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn context_vector_empty_errors() {
        let v = ParamMatrix::zeros(1, 2);
        assert!(matches!(
            context_vector(&v, &[]),
            Err(ModelError::EmptyContext)
        ));
    }

    #[test]
    fn cosine_basics() {
        let x = [0.2, -0.4, 1.5];
        assert!((cosine(&x, &x) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let expected = 32.0 / (14.0f64.sqrt() * 77.0f64.sqrt());
        assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]) - expected).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), f64::NEG_INFINITY);
    }

    fn toy_matrices() -> EmbeddingMatrices {
        let v = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 3.0]]);
        let u = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![-1.0, 1.0]]);
        EmbeddingMatrices::from_dense(&v, &u)
    }

    #[test]
    fn interpolate_endpoints_are_exact() {
        let m = toy_matrices();
        assert_eq!(combine_interpolate(&m, 1.0).matrix, m.v.to_dense());
        assert_eq!(combine_interpolate(&m, 0.0).matrix, m.u.to_dense());
    }

    #[test]
    fn interpolate_midpoint() {
        let m = toy_matrices();
        let c = combine_interpolate(&m, 0.5);
        assert_eq!(c.matrix.row(0), &[1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn interpolate_matches_entrywise_oracle(seed in 0u64..200) {
            let m = EmbeddingMatrices::init(6, 5, seed);
            for cell in m.u.row(3) {
                cell.set(0.25);
            }
            let gamma = 0.3;
            let c = combine_interpolate(&m, gamma);
            for r in 0..6 {
                for col in 0..5 {
                    let expected = gamma * m.v.get(r, col) + (1.0 - gamma) * m.u.get(r, col);
                    prop_assert!((c.matrix.get(r, col) - expected).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn interpolate_half_is_symmetric_in_v_and_u(seed in 0u64..200) {
            let m = EmbeddingMatrices::init(4, 3, seed);
            let swapped = EmbeddingMatrices {
                v: ParamMatrix::from_dense(&m.u.to_dense()),
                u: ParamMatrix::from_dense(&m.v.to_dense()),
            };
            let a = combine_interpolate(&m, 0.5);
            let b = combine_interpolate(&swapped, 0.5);
            for r in 0..4 {
                for c in 0..3 {
                    prop_assert!((a.matrix.get(r, c) - b.matrix.get(r, c)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn concat_layout_and_shape() {
        let m = EmbeddingMatrices::from_dense(
            &DenseMatrix::from_rows(&[vec![1.0, 2.0]]),
            &DenseMatrix::from_rows(&[vec![3.0, 4.0]]),
        );
        let c = combine_concat(&m);
        assert_eq!(c.matrix.dim(), 4);
        assert_eq!(c.matrix.row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn concat_zero_padding_preserves_cosine() {
        let x = [0.4, -1.0, 0.3];
        let y = [2.0, 0.5, -0.2];
        let xp = [0.4, -1.0, 0.3, 0.0, 0.0];
        let yp = [2.0, 0.5, -0.2, 0.0, 0.0];
        assert!((cosine(&x, &y) - cosine(&xp, &yp)).abs() < 1e-15);
    }

    #[test]
    fn concat_width_for_d200() {
        let m = EmbeddingMatrices::init(3, 200, 1);
        assert_eq!(combine_concat(&m).matrix.dim(), 400);
    }

    #[test]
    fn combinations_leave_inputs_unmodified() {
        let m = toy_matrices();
        let v_before = m.v.to_dense();
        let u_before = m.u.to_dense();
        let _ = combine_interpolate(&m, 0.3);
        let _ = combine_concat(&m);
        let _ = regularized_output(&m, RegOutput::Mean);
        assert_eq!(m.v.to_dense(), v_before);
        assert_eq!(m.u.to_dense(), u_before);
    }

    fn tiny_vocab(n: usize) -> Vocabulary {
        Vocabulary::from_entries((0..n).map(|i| (format!("w{i}"), 1, 1))).unwrap()
    }

    #[test]
    fn embedding_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let vocab = tiny_vocab(3);
        let m = DenseMatrix::from_rows(&[
            vec![0.123456789, -1.5],
            vec![2.0, 0.000001],
            vec![-0.5, 123.25],
        ]);
        save_embeddings(&m, &vocab, &path).unwrap();
        let (forms, loaded) = load_embeddings(&path).unwrap();
        assert_eq!(forms, vec!["w0", "w1", "w2"]);
        for r in 0..3 {
            for c in 0..2 {
                assert!((loaded.get(r, c) - m.get(r, c)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn load_rejects_row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "3 2\na 1 2\nb 3 4\nc 5 6\nd 7 8\n").unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(matches!(err, EmbeddingIoError::Format { line: 5, .. }));
    }

    #[test]
    fn load_rejects_row_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "2 3\na 1 2 3\nb 4 5\n").unwrap();
        let err = load_embeddings(&path).unwrap_err();
        match err {
            EmbeddingIoError::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_rejects_word_with_space() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let vocab = Vocabulary::from_entries([("two words", 1, 0)]).unwrap();
        let m = DenseMatrix::zeros(1, 2);
        let err = save_embeddings(&m, &vocab, &path).unwrap_err();
        assert!(matches!(err, EmbeddingIoError::WordWithWhitespace { .. }));
    }

    proptest! {
        #[test]
        fn round_trip_error_within_printed_precision(values in proptest::collection::vec(-100.0f64..100.0, 8)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("emb.txt");
            let vocab = tiny_vocab(2);
            let m = DenseMatrix::from_vec(values.clone(), 2, 4);
            save_embeddings(&m, &vocab, &path).unwrap();
            let (_, loaded) = load_embeddings(&path).unwrap();
            for r in 0..2 {
                for c in 0..4 {
                    prop_assert!((loaded.get(r, c) - m.get(r, c)).abs() <= 1e-6);
                }
            }
        }
    }
}
