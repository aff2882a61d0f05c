//! Dense one-sided Jacobi SVD.

pub type Matrix = Vec<Vec<f64>>;

pub struct DenseSvd {
    /// n × r, columns are left singular vectors.
    pub u: Matrix,
    /// Descending.
    pub s: Vec<f64>,
    /// m × r.
    pub v: Matrix,
}

pub fn transpose(a: &Matrix) -> Matrix {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

/// Thin SVD `A = U diag(s) Vᵀ` with `r = min(n, m)` components.
pub fn svd(a: &Matrix) -> DenseSvd {
    let n = a.len();
    let m = a[0].len();
    if n < m {
        let t = svd(&transpose(a));
        return DenseSvd { u: t.v, s: t.s, v: t.u };
    }
    // Work on columns: w[j] is column j of A.
    let mut w: Matrix = transpose(a);
    let mut v: Matrix = (0..m)
        .map(|j| (0..m).map(|i| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    alpha += w[p][i] * w[p][i];
                    beta += w[q][i] * w[q][i];
                    gamma += w[p][i] * w[q][i];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (x, y) = (w[p][i], w[q][i]);
                    w[p][i] = c * x - s * y;
                    w[q][i] = s * x + c * y;
                }
                for i in 0..m {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = w.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u_cols: Matrix = order
        .iter()
        .map(|&j| {
            let sj = norms[j];
            w[j].iter().map(|x| if sj > 0.0 { x / sj } else { 0.0 }).collect()
        })
        .collect();
    let v_cols: Matrix = order.iter().map(|&j| v[j].clone()).collect();
    DenseSvd {
        u: transpose(&u_cols),
        s,
        v: transpose(&v_cols),
    }
}

/// Frobenius norm of `A − U_k S_k V_kᵀ`.
pub fn truncation_error(a: &Matrix, u: &Matrix, s: &[f64], v: &Matrix, k: usize) -> f64 {
    let mut total = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            let mut approx = 0.0;
            for c in 0..k {
                approx += u[i][c] * s[c] * v[j][c];
            }
            total += (x - approx).powi(2);
        }
    }
    total.sqrt()
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs() {
        let a = vec![
            vec![3.0, 1.0, 0.5],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 4.0],
            vec![2.0, 0.0, 1.0],
        ];
        let d = svd(&a);
        assert!(truncation_error(&a, &d.u, &d.s, &d.v, 3) < 1e-12);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let t = svd(&transpose(&a));
        for (x, y) in d.s.iter().zip(&t.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
