//! Truncated SVD of the client term-document matrix and the latent space
//! built from it.
//!
//! The SVD is computed by Golub–Kahan–Lanczos bidiagonalization with full
//! reorthogonalization, started from a seeded Gaussian vector. Ritz triplets
//! are accepted once every requested one has residual
//! `‖Aᵀu − σv‖ ≤ tolerance · σ₁`. All reductions run in a fixed order, so
//! the result does not depend on the number of threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{dot, norm, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdOptions {
    /// Relative residual required of every returned triplet.
    pub tolerance: f64,
    /// Upper bound on Lanczos steps; `None` means `min(n, m)`.
    pub max_steps: Option<usize>,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            tolerance: 1e-10,
            max_steps: None,
        }
    }
}

/// Rank-k factorization `X ≈ U S Vᵀ`; `u` is n×k and `v` m×k, both row-major.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub k: usize,
    pub steps: usize,
    pub max_residual: f64,
}

impl TruncatedSvd {
    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.k..(i + 1) * self.k]
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        &self.v[i * self.k..(i + 1) * self.k]
    }
}

struct Basis {
    vectors: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Basis { vectors: Vec::new() }
    }

    /// Two passes of classical Gram–Schmidt.
    fn orthogonalize(&self, p: &mut [f64]) {
        if self.vectors.is_empty() {
            return;
        }
        for _ in 0..2 {
            let coefs: Vec<f64> = self.vectors.par_iter().map(|q| dot(q, p)).collect();
            p.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
                let start = chunk * 1024;
                for (off, x) in out.iter_mut().enumerate() {
                    let i = start + off;
                    let mut acc = 0.0;
                    for (q, c) in self.vectors.iter().zip(&coefs) {
                        acc += c * q[i];
                    }
                    *x -= acc;
                }
            });
        }
    }

    /// A random unit vector orthogonal to the basis, or `None` when the
    /// basis already spans the space.
    fn random_complement(&self, dim: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        if self.vectors.len() >= dim {
            return None;
        }
        for _ in 0..8 {
            let mut p = gaussian(dim, rng);
            self.orthogonalize(&mut p);
            let nrm = norm(&p);
            if nrm > 1e-8 {
                p.iter_mut().for_each(|x| *x /= nrm);
                return Some(p);
            }
        }
        None
    }
}

fn gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn bidiagonal_svd(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let j = alphas.len();
    let mut b = DMatrix::<f64>::zeros(j, j);
    for i in 0..j {
        b[(i, i)] = alphas[i];
        if i + 1 < j {
            b[(i, i + 1)] = betas[i];
        }
    }
    let svd = b.svd(true, true);
    let x = svd.u.expect("requested U");
    let yt = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &c| {
        svd.singular_values[c]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&c))
    });
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let x = DMatrix::from_fn(j, j, |r, c| x[(r, order[c])]);
    let y = DMatrix::from_fn(j, j, |r, c| yt[(order[c], r)]);
    (s, x, y)
}

/// Seeded truncated SVD of a sparse matrix.
pub fn truncated_svd(x: &SparseMatrix, k: usize, seed: u64, options: &SvdOptions) -> Result<TruncatedSvd> {
    let (n, m) = (x.n_rows(), x.n_cols());
    if k == 0 || k > n.min(m) {
        return Err(Error::Config(format!(
            "cannot compute {k} singular triplets of a {n}×{m} matrix"
        )));
    }
    if !x.values_finite() {
        return Err(Error::Config("matrix has non-finite entries".into()));
    }
    // Iterate on the orientation with the shorter right vectors.
    let transposed = n < m;
    let at = x.transpose();
    let (a, a_t) = if transposed { (&at, x) } else { (x, &at) };
    let (rows, cols) = (a.n_rows(), a.n_cols());
    let limit = options.max_steps.unwrap_or(cols).clamp(k, cols);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut us = Basis::new();
    let mut vs = Basis::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut v = gaussian(cols, &mut rng);
    let nv = norm(&v);
    v.iter_mut().for_each(|e| *e /= nv);

    let mut scale = 0.0f64;
    let mut restart_at = 0usize;
    let mut next_check = k.max(10);
    let mut last_residual = f64::INFINITY;

    loop {
        // α_j u_j = A v_j − β_{j−1} u_{j−1}
        let mut p = a.mul_vec(&v);
        if let (Some(&beta), Some(prev)) = (betas.last(), us.vectors.last()) {
            p.iter_mut().zip(prev).for_each(|(e, q)| *e -= beta * q);
        }
        us.orthogonalize(&mut p);
        let mut alpha = norm(&p);
        scale = scale.max(alpha);
        if alpha <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            alpha = 0.0;
            p = match us.random_complement(rows, &mut rng) {
                Some(q) => q,
                None => vec![0.0; rows],
            };
        } else {
            p.iter_mut().for_each(|e| *e /= alpha);
        }
        alphas.push(alpha);
        vs.vectors.push(std::mem::take(&mut v));
        us.vectors.push(p);
        let j = alphas.len();

        // β_j v_{j+1} = Aᵀ u_j − α_j v_j
        let mut r = a_t.mul_vec(us.vectors.last().expect("just pushed"));
        let last_v = vs.vectors.last().expect("just pushed");
        r.iter_mut().zip(last_v).for_each(|(e, q)| *e -= alpha * q);
        vs.orthogonalize(&mut r);
        let mut beta = norm(&r);
        scale = scale.max(beta);
        let complete = j >= cols;
        let breakdown = !complete && beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);

        if scale == 0.0 {
            return Err(Error::Degenerate("matrix is identically zero".into()));
        }

        if breakdown {
            // Invariant subspace found: continue from a fresh direction.
            beta = 0.0;
            betas.push(beta);
            match vs.random_complement(cols, &mut rng) {
                Some(fresh) => v = fresh,
                None => unreachable!("basis is incomplete"),
            }
            restart_at = j;
            continue;
        }
        betas.push(beta);

        let ready = j >= k && j >= restart_at + k.min(cols - restart_at);
        if ready && (j >= next_check || complete || j >= limit) {
            let (s, xl, yr) = bidiagonal_svd(&alphas, &betas[..j - 1]);
            let sigma1 = s[0].max(f64::MIN_POSITIVE);
            let residual = (0..k)
                .map(|i| if complete { 0.0 } else { beta * xl[(j - 1, i)].abs() })
                .fold(0.0f64, f64::max)
                / sigma1;
            last_residual = residual;
            if residual <= options.tolerance || complete {
                let out_u = combine(&us.vectors, &xl, k);
                let out_v = combine(&vs.vectors, &yr, k);
                let s = s[..k].to_vec();
                let (u, v, n_rows, n_cols) = if transposed {
                    (out_v, out_u, cols, rows)
                } else {
                    (out_u, out_v, rows, cols)
                };
                return Ok(TruncatedSvd {
                    u,
                    s,
                    v,
                    n_rows,
                    n_cols,
                    k,
                    steps: j,
                    max_residual: residual,
                });
            }
            next_check = j + (j / 10).max(10);
        }
        if j >= limit {
            return Err(Error::NoConvergence {
                steps: j,
                residual: last_residual,
                tolerance: options.tolerance,
            });
        }
        r.iter_mut().for_each(|e| *e /= beta);
        v = r;
    }
}

/// Row-major `basisᵀ · coefs[:, :k]`, i.e. the first `k` Ritz vectors.
fn combine(basis: &[Vec<f64>], coefs: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let dim = basis[0].len();
    let j = basis.len();
    let mut out = vec![0.0; dim * k];
    out.par_chunks_mut(k).enumerate().for_each(|(row, o)| {
        for (c, oc) in o.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, b) in basis.iter().enumerate().take(j) {
                acc += b[row] * coefs[(t, c)];
            }
            *oc = acc;
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CentralPointMode {
    /// Weighted sum of member rows divided coordinate-wise by the singular
    /// values.
    #[default]
    #[serde(rename = "paper", alias = "inverse_scaled")]
    InverseScaled,
    /// Weighted sum of member rows, no singular-value scaling.
    PlainMean,
}

/// Client utterance embeddings in the reduced space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpace {
    /// n×k row-major; rows are unit length except flagged rows.
    pub row_embeddings: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub k: usize,
    pub dropped_first: bool,
    /// Rows whose embedding vanished; sorted.
    pub zero_rows: Vec<usize>,
    /// Row norms before renormalization.
    pub raw_row_norms: Vec<f64>,
    #[serde(skip)]
    flagged: Vec<bool>,
}

impl LatentSpace {
    pub fn n_rows(&self) -> usize {
        self.raw_row_norms.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.row_embeddings[i * self.k..(i + 1) * self.k]
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        if self.flagged.is_empty() {
            self.zero_rows.binary_search(&i).is_ok()
        } else {
            self.flagged[i]
        }
    }

    /// Builds the flag table after deserialization.
    pub fn reindex(&mut self) {
        let mut flagged = vec![false; self.n_rows()];
        for &i in &self.zero_rows {
            flagged[i] = true;
        }
        self.flagged = flagged;
    }
}

/// Keeps `k_keep` columns of `U` (dropping column 0 when `drop_first`) and
/// renormalizes each row; rows with norm below 1e-12 are flagged.
pub fn strip_first_component(svd: &TruncatedSvd, k_keep: usize, drop_first: bool) -> Result<LatentSpace> {
    let offset = usize::from(drop_first);
    if k_keep == 0 || svd.k < k_keep + offset {
        return Err(Error::Config(format!(
            "need {} SVD columns to keep {k_keep}, have {}",
            k_keep + offset,
            svd.k
        )));
    }
    let singular_values = svd.s[offset..offset + k_keep].to_vec();
    let top = svd.s[0];
    if let Some(j) = singular_values.iter().position(|&s| s <= 1e-12 * top) {
        return Err(Error::Degenerate(format!(
            "retained singular value {} is zero; the matrix has rank below {}",
            j + offset,
            k_keep + offset
        )));
    }
    let n = svd.n_rows;
    let mut row_embeddings = Vec::with_capacity(n * k_keep);
    let mut raw_row_norms = Vec::with_capacity(n);
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let row = &svd.u_row(i)[offset..offset + k_keep];
        let nrm = norm(row);
        raw_row_norms.push(nrm);
        if nrm < 1e-12 {
            zero_rows.push(i);
            row_embeddings.extend(std::iter::repeat_n(0.0, k_keep));
        } else {
            row_embeddings.extend(row.iter().map(|x| x / nrm));
        }
    }
    let mut space = LatentSpace {
        row_embeddings,
        singular_values,
        k: k_keep,
        dropped_first: drop_first,
        zero_rows,
        raw_row_norms,
        flagged: Vec::new(),
    };
    space.reindex();
    Ok(space)
}

/// `Σᵢ wᵢ uᵢ`, divided coordinate-wise by the singular values in `InverseScaled`
/// mode. Flagged rows are skipped.
pub fn project_weighted_bag(weights: &[(usize, f64)], space: &LatentSpace, mode: CentralPointMode) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; space.k];
    let mut used = false;
    for &(row, w) in weights {
        if w <= 0.0 || space.is_flagged(row) {
            continue;
        }
        used = true;
        for (a, x) in acc.iter_mut().zip(space.row(row)) {
            *a += w * x;
        }
    }
    if !used {
        return Err(Error::Degenerate("no positive weight on an embedded row".into()));
    }
    if mode == CentralPointMode::InverseScaled {
        for (a, s) in acc.iter_mut().zip(&space.singular_values) {
            *a /= s;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn svd(rows: &[Vec<f64>], k: usize) -> TruncatedSvd {
        truncated_svd(&SparseMatrix::from_dense(rows), k, 7, &SvdOptions::default()).unwrap()
    }

    #[test]
    fn rank_one_example() {
        let s = svd(&[vec![1.0, 0.0], vec![1.0, 0.0]], 1);
        assert!((s.s[0] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identity_example() {
        let s = svd(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2);
        assert!((s.s[0] - 1.0).abs() < 1e-14 && (s.s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn repeated_values_found_after_breakdown() {
        let d = |i: usize, x: f64| (0..4).map(|j| if i == j { x } else { 0.0 }).collect::<Vec<_>>();
        let s = svd(&[d(0, 3.0), d(1, 2.0), d(2, 2.0), d(3, 1.0)], 3);
        for (a, b) in s.s.iter().zip([3.0, 2.0, 2.0]) {
            assert!((a - b).abs() < 1e-12, "{:?}", s.s);
        }
    }

    #[test]
    fn wide_matrix_factors_consistently() {
        let rows = vec![vec![1.0, 2.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 3.0, 1.0, 0.0]];
        let s = svd(&rows, 2);
        assert_eq!((s.n_rows, s.n_cols), (2, 5));
        for i in 0..2 {
            for j in 0..5 {
                let rec: f64 = (0..2).map(|t| s.u_row(i)[t] * s.s[t] * s.v_row(j)[t]).sum();
                assert!((rec - rows[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_rank_rejected() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            truncated_svd(&x, 3, 1, &SvdOptions::default()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            truncated_svd(&x, 0, 1, &SvdOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn seeded_determinism() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..12).map(|j| (((i * 7 + j * 3) % 5) as f64 - 1.0).max(0.0)).collect())
            .collect();
        let x = SparseMatrix::from_dense(&rows);
        let a = truncated_svd(&x, 4, 11, &SvdOptions::default()).unwrap();
        let b = truncated_svd(&x, 4, 11, &SvdOptions::default()).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.s, b.s);
    }

    fn manual_space(rows: Vec<Vec<f64>>, s: Vec<f64>) -> LatentSpace {
        let k = s.len();
        let svd = TruncatedSvd {
            n_rows: rows.len(),
            n_cols: 0,
            u: rows.concat(),
            s,
            v: Vec::new(),
            k,
            steps: 0,
            max_residual: 0.0,
        };
        strip_first_component(&svd, k - 1, true).unwrap()
    }

    #[test]
    fn strip_examples() {
        let space = manual_space(vec![vec![0.9, 0.6, 0.8], vec![0.5, 0.0, 0.0]], vec![3.0, 2.0, 1.0]);
        assert_eq!(space.k, 2);
        assert_eq!(space.row(0), [0.6, 0.8]);
        assert_eq!(space.zero_rows, [1]);
        assert!(space.is_flagged(1));
        assert_eq!(space.singular_values, [2.0, 1.0]);
    }

    #[test]
    fn projection_examples() {
        let space = manual_space(
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            vec![5.0, 2.0, 3.0],
        );
        let c = project_weighted_bag(&[(1, 0.7)], &space, CentralPointMode::InverseScaled).unwrap();
        assert_eq!(c[0], 0.0);
        assert!(c[1] > 0.0);

        let id = manual_space(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![5.0, 1.0, 1.0]);
        let c = project_weighted_bag(&[(0, 0.5), (1, 0.5)], &id, CentralPointMode::InverseScaled).unwrap();
        let n = norm(&c);
        assert!((c[0] / n - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((c[1] / n - 1.0 / 2f64.sqrt()).abs() < 1e-15);

        assert!(project_weighted_bag(&[(2, 1.0)], &space, CentralPointMode::InverseScaled).is_err());
        let plain = project_weighted_bag(&[(0, 2.0), (1, 1.0)], &space, CentralPointMode::PlainMean).unwrap();
        assert_eq!(plain, [2.0, 1.0]);
    }
}
