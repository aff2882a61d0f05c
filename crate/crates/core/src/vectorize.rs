//! Sparse term-document matrices, tf-idf weighting and cosine geometry.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phrasing::Vocabulary;

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Duplicate
    /// columns are summed and zeros dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let col = row[i].0;
                assert!(col < n_cols, "column {col} out of range {n_cols}");
                let mut v = 0.0;
                while i < row.len() && row[i].0 == col {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    col_idx.push(col);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n_rows: row_ptr.len() - 1,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        SparseMatrix::from_rows(
            n_cols,
            rows.iter()
                .map(|r| r.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = i;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `y = A x`, parallel over rows; each entry is summed in a fixed order.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut row = vec![0.0; self.n_cols];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {c} {v:e}")?;
            }
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfIdfOptions {
    /// Scale every nonzero row to unit Euclidean norm.
    pub row_normalize: bool,
    /// Use `1 + ln(tf)` instead of the raw count.
    pub log_tf: bool,
}

impl Default for TfIdfOptions {
    fn default() -> Self {
        TfIdfOptions {
            row_normalize: true,
            log_tf: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub vocabulary: Vocabulary,
    /// `1 + ln(N / df)` per phrasing id; `0` for excluded ids.
    pub idf: Vec<f64>,
    /// Vocabulary ids that never occur in the fitting documents.
    pub excluded: Vec<usize>,
    pub options: TfIdfOptions,
}

/// Fits idf weights on bags of vocabulary ids.
pub fn fit_tfidf(documents: &[Vec<usize>], mut vocabulary: Vocabulary, options: TfIdfOptions) -> Result<TfIdfModel> {
    if documents.is_empty() {
        return Err(Error::Config("tf-idf needs at least one document".into()));
    }
    let v = vocabulary.len();
    let df = documents
        .par_iter()
        .fold(
            || vec![0usize; v],
            |mut acc, doc| {
                let mut seen: Vec<usize> = doc.clone();
                seen.sort_unstable();
                seen.dedup();
                for id in seen {
                    acc[id] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; v],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = documents.len() as f64;
    let mut excluded = Vec::new();
    let idf = df
        .iter()
        .enumerate()
        .map(|(id, &d)| {
            if d == 0 {
                excluded.push(id);
                0.0
            } else {
                1.0 + (n / d as f64).ln()
            }
        })
        .collect();
    if !excluded.is_empty() {
        log::warn!(
            "{} {} phrasings do not occur in the tf-idf documents and are excluded",
            excluded.len(),
            vocabulary.role
        );
    }
    vocabulary.doc_frequency = df;
    vocabulary.total_docs = documents.len();
    Ok(TfIdfModel {
        vocabulary,
        idf,
        excluded,
        options,
    })
}

impl TfIdfModel {
    pub fn tf_weight(&self, count: usize) -> f64 {
        if self.options.log_tf {
            1.0 + (count as f64).ln()
        } else {
            count as f64
        }
    }

    /// Sparse tf-idf vector of one bag of ids, sorted by id.
    pub fn vector(&self, doc: &[usize]) -> Vec<(usize, f64)> {
        let mut ids = doc.to_vec();
        ids.sort_unstable();
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut i = 0;
        while i < ids.len() {
            let id = ids[i];
            let mut count = 0;
            while i < ids.len() && ids[i] == id {
                count += 1;
                i += 1;
            }
            let w = self.tf_weight(count) * self.idf[id];
            if w != 0.0 {
                out.push((id, w));
            }
        }
        if self.options.row_normalize {
            let norm = out.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|e| e.1 /= norm);
            }
        }
        out
    }

    /// Rows are documents, columns vocabulary ids. Also returns the indices
    /// of all-zero rows.
    pub fn transform(&self, documents: &[Vec<usize>]) -> (SparseMatrix, Vec<usize>) {
        let rows: Vec<Vec<(usize, f64)>> = documents.par_iter().map(|d| self.vector(d)).collect();
        let zero_rows = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect();
        (SparseMatrix::from_rows(self.vocabulary.len(), rows), zero_rows)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `1 − cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    assert_eq!(u.len(), v.len(), "dimension mismatch");
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine distance of a zero vector".into()));
    }
    Ok((1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0))
}

/// Cosine distance between two sparse vectors sorted by index.
pub fn sparse_cosine_distance(u: &[(usize, f64)], v: &[(usize, f64)]) -> Result<f64> {
    let nu = u.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let nv = v.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine distance of a zero vector".into()));
    }
    let (mut i, mut j, mut d) = (0, 0, 0.0);
    while i < u.len() && j < v.len() {
        match u[i].0.cmp(&v[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                d += u[i].1 * v[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok((1.0 - d / (nu * nv)).clamp(0.0, 2.0))
}
