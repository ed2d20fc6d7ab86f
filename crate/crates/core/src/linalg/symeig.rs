//! Dense symmetric eigensolvers: cyclic Jacobi for small matrices,
//! Householder tridiagonalization followed by implicit QL otherwise.

use crate::error::{Error, Result};

/// Sizes up to this use Jacobi rotations.
pub const JACOBI_MAX: usize = 64;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                self.data[r * self.n..(r + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n + c]
    }
}

/// Eigen-decomposition with eigenvalues sorted descending.
/// `vectors[k]` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
}

impl SymmetricEigen {
    /// Largest `‖Mx − νx‖` over the returned pairs.
    pub fn max_residual(&self, m: &DenseMatrix) -> Option<f64> {
        let vecs = self.vectors.as_ref()?;
        let worst = self
            .values
            .iter()
            .zip(vecs)
            .map(|(&nu, x)| {
                let mx = m.mul_vec(x);
                mx.iter()
                    .zip(x)
                    .map(|(a, b)| (a - nu * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        Some(worst)
    }
}

/// Dispatch on size. Only the lower triangle of `m` is trusted.
pub fn symmetric_eigen(m: &DenseMatrix, want_vectors: bool) -> Result<SymmetricEigen> {
    if m.n() <= JACOBI_MAX {
        jacobi(m, want_vectors)
    } else {
        householder_ql(m, want_vectors)
    }
}

fn sort_desc(values: Vec<f64>, vectors: Option<Vec<Vec<f64>>>) -> SymmetricEigen {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_vals = order.iter().map(|&k| values[k]).collect();
    let sorted_vecs = vectors.map(|v| order.iter().map(|&k| v[k].clone()).collect());
    SymmetricEigen {
        values: sorted_vals,
        vectors: sorted_vecs,
    }
}

pub fn jacobi(m: &DenseMatrix, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = m.n();
    let mut a = DenseMatrix::from_fn(n, |r, c| if r >= c { m[(r, c)] } else { m[(c, r)] });
    let mut v = DenseMatrix::identity(n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    const SWEEPS: usize = 100;
    let mut off = 0.0;
    for _ in 0..SWEEPS {
        off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            let vectors = want_vectors
                .then(|| (0..n).map(|k| (0..n).map(|r| v[(r, k)]).collect()).collect());
            return Ok(sort_desc(values, vectors));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(Error::NotConverged {
        what: "Jacobi eigensolver",
        iterations: SWEEPS,
        residual: off.sqrt(),
    })
}

/// Householder reduction to tridiagonal form (diagonal `d`, subdiagonal `e`
/// with `e[0] = 0`). On return `a` holds the accumulated orthogonal
/// transform when `want_vectors`.
fn tridiagonalize(a: &mut DenseMatrix, want_vectors: bool) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let u: Vec<f64> = a.data[i * n..i * n + l + 1].to_vec();
                // p = (lower triangle, mirrored) · u, sweeping rows only
                let mut p = vec![0.0; l + 1];
                for j in 0..=l {
                    a[(j, i)] = u[j] / h;
                    let row = &a.data[j * n..j * n + j + 1];
                    let uj = u[j];
                    let mut g = row[j] * uj;
                    for ((r, uk), pk) in row[..j].iter().zip(&u[..j]).zip(&mut p[..j]) {
                        g += r * uk;
                        *pk += r * uj;
                    }
                    p[j] += g;
                }
                let mut f = 0.0;
                for j in 0..=l {
                    e[j] = p[j] / h;
                    f += e[j] * u[j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    e[j] -= hh * u[j];
                }
                for j in 0..=l {
                    let (f, g) = (u[j], e[j]);
                    let row = &mut a.data[j * n..j * n + j + 1];
                    for ((r, ek), uk) in row.iter_mut().zip(&e[..=j]).zip(&u[..=j]) {
                        *r -= f * ek + g * uk;
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if want_vectors {
            if d[i] != 0.0 {
                for j in 0..i {
                    let g: f64 = (0..i).map(|k| a[(i, k)] * a[(k, j)]).sum();
                    for k in 0..i {
                        a[(k, j)] -= g * a[(k, i)];
                    }
                }
            }
            d[i] = a[(i, i)];
            a[(i, i)] = 1.0;
            for j in 0..i {
                a[(j, i)] = 0.0;
                a[(i, j)] = 0.0;
            }
        } else {
            d[i] = a[(i, i)];
        }
    }
    (d, e)
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal
/// matrix; `z` (if given) accumulates the rotations column-wise.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DenseMatrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::NotConverged {
                    what: "tridiagonal QL",
                    iterations: MAX_ITER,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

pub fn householder_ql(m: &DenseMatrix, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = m.n();
    let mut a = DenseMatrix::from_fn(n, |r, c| if r >= c { m[(r, c)] } else { m[(c, r)] });
    let (mut d, mut e) = tridiagonalize(&mut a, want_vectors);
    tridiagonal_ql(&mut d, &mut e, want_vectors.then_some(&mut a))?;
    let vectors =
        want_vectors.then(|| (0..n).map(|k| (0..n).map(|r| a[(r, k)]).collect()).collect());
    Ok(sort_desc(d, vectors))
}

/// Eigenvalues of a symmetric tridiagonal matrix given its diagonal and
/// off-diagonal (length n−1).
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[1..n].copy_from_slice(&off[..n.saturating_sub(1)]);
    tridiagonal_ql(&mut d, &mut e, None)?;
    Ok(sort_desc(d, None).values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DenseMatrix {
        // small LCG keeps the test free of RNG plumbing
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = DenseMatrix::zeros(n);
        for r in 0..n {
            for c in 0..=r {
                let v = next();
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }

    fn check(m: &DenseMatrix, eig: &SymmetricEigen) {
        let n = m.n();
        let res = eig.max_residual(m).unwrap();
        assert!(res <= 1e-11 * m.norm().max(1.0), "residual {res}");
        assert!((eig.values.iter().sum::<f64>() - m.trace()).abs() < 1e-10 * n as f64);
        let vecs = eig.vectors.as_ref().unwrap();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn jacobi_and_ql_agree() {
        for &n in &[1, 2, 3, 7, 20, 64] {
            let m = random_sym(n, n as u64);
            let j = jacobi(&m, true).unwrap();
            let q = householder_ql(&m, true).unwrap();
            check(&m, &j);
            check(&m, &q);
            for (a, b) in j.values.iter().zip(&q.values) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn large_ql_residual() {
        let m = random_sym(150, 9);
        let q = symmetric_eigen(&m, true).unwrap();
        check(&m, &q);
        let vals_only = symmetric_eigen(&m, false).unwrap();
        for (a, b) in q.values.iter().zip(&vals_only.values) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn second_difference_operator_spectrum() {
        // eigenvalues of tridiag(-1, 2, -1) of size m are 2 - 2cos(k*pi/(m+1))
        let m = 99;
        let vals = tridiagonal_eigenvalues(&vec![2.0; m], &vec![-1.0; m - 1]).unwrap();
        let mut want: Vec<f64> = (1..=m)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (m + 1) as f64).cos())
            .collect();
        want.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in vals.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
