//! Dense helpers for the small matrices (at most (m+n)×(m+n), m+n ≤ 6) used
//! per grid point. Matrices are row-major slices.

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &[f64], k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {
            let mut w = a[..k * k].to_vec();
            let mut d = 1.0;
            for c in 0..k {
                let piv = (c..k)
                    .max_by(|&i, &j| w[i * k + c].abs().total_cmp(&w[j * k + c].abs()))
                    .unwrap();
                if w[piv * k + c] == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    for j in 0..k {
                        w.swap(piv * k + j, c * k + j);
                    }
                    d = -d;
                }
                let p = w[c * k + c];
                d *= p;
                for i in c + 1..k {
                    let f = w[i * k + c] / p;
                    for j in c..k {
                        w[i * k + j] -= f * w[c * k + j];
                    }
                }
            }
            d
        }
    }
}

/// Solves `a x = b` in place of `b`; `None` when `a` is singular.
pub fn solve(a: &[f64], b: &mut [f64], k: usize) -> Option<()> {
    let mut w = a[..k * k].to_vec();
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&i, &j| w[i * k + c].abs().total_cmp(&w[j * k + c].abs()))
            .unwrap();
        if w[piv * k + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for j in 0..k {
                w.swap(piv * k + j, c * k + j);
            }
            b.swap(piv, c);
        }
        let p = w[c * k + c];
        for i in c + 1..k {
            let f = w[i * k + c] / p;
            if f != 0.0 {
                for j in c..k {
                    w[i * k + j] -= f * w[c * k + j];
                }
                b[i] -= f * b[c];
            }
        }
    }
    for c in (0..k).rev() {
        let mut s = b[c];
        for j in c + 1..k {
            s -= w[c * k + j] * b[j];
        }
        b[c] = s / w[c * k + c];
    }
    Some(())
}

/// Inverse of a k×k matrix.
pub fn inverse(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; k * k];
    let mut col = vec![0.0; k];
    for j in 0..k {
        col.iter_mut().enumerate().for_each(|(i, v)| *v = if i == j { 1.0 } else { 0.0 });
        solve(a, &mut col, k)?;
        for i in 0..k {
            out[i * k + j] = col[i];
        }
    }
    Some(out)
}

/// (r×k)·(k×c).
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for l in 0..k {
            let av = a[i * k + l];
            if av != 0.0 {
                for j in 0..c {
                    out[i * c + j] += av * b[l * c + j];
                }
            }
        }
    }
    out
}

/// aᵀ·b for a (r×p) and b (r×q).
pub fn tmatmul(a: &[f64], b: &[f64], r: usize, p: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * q];
    for l in 0..r {
        for i in 0..p {
            let av = a[l * p + i];
            for j in 0..q {
                out[i * q + j] += av * b[l * q + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

pub fn fro_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Orthonormalizes the columns of a (rows×cols) matrix in index order
/// (modified Gram–Schmidt, two passes).
pub fn gram_schmidt(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut q = a.to_vec();
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let d: f64 = (0..rows).map(|r| q[r * cols + i] * q[r * cols + j]).sum();
                for r in 0..rows {
                    q[r * cols + j] -= d * q[r * cols + i];
                }
            }
        }
        let nrm: f64 = (0..rows).map(|r| q[r * cols + j].powi(2)).sum::<f64>().sqrt();
        for r in 0..rows {
            q[r * cols + j] /= nrm;
        }
    }
    q
}

/// All k-subsets of 0..n in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Determinant of the submatrix of a (rows×cols) matrix on the given rows and columns.
pub fn minor(a: &[f64], cols: usize, rsel: &[usize], csel: &[usize]) -> f64 {
    let k = rsel.len();
    let mut buf = [0.0; 36];
    for (i, &r) in rsel.iter().enumerate() {
        for (j, &c) in csel.iter().enumerate() {
            buf[i * k + j] = a[r * cols + c];
        }
    }
    det(&buf[..k * k], k)
}
