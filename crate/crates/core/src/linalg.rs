//! Dense matrices, exact row reduction, SVD-based numeric rank, and a
//! generic pivoted solver over any [`Arith`] element type.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::scalar::{Arith, CRational, Scalar};

/// Default relative tolerance for numeric rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Matrix::from_fn(idx.len(), self.cols, |i, j| self.get(idx[i], j).clone())
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]).clone())
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Stacks `other` below `self`. Column counts must agree.
    pub fn vstack(&self, other: &Matrix<T>) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }
}

impl<T: Arith> Matrix<T> {
    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = self.get(i, 0).zero_like();
            for k in 0..self.cols {
                acc = acc.plus(&self.get(i, k).times(other.get(k, j)));
            }
            acc
        })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = self.get(i, 0).zero_like();
                for (k, x) in v.iter().enumerate() {
                    acc = acc.plus(&self.get(i, k).times(x));
                }
                acc
            })
            .collect()
    }
}

/// Outcome of a rank computation.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RankInfo {
    pub rank: usize,
    /// Set when a singular value falls within a factor 10 of the cut.
    pub inconclusive: bool,
    /// Singular values (numeric mode only), descending.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<Vec<f64>>,
}

/// Kernel basis with the accompanying rank information.
#[derive(Clone, Debug)]
pub struct KernelInfo<T> {
    pub basis: Vec<Vec<T>>,
    pub rank: RankInfo,
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref_exact(m: &mut Matrix<CRational>) -> Vec<usize> {
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m.get(i, c).is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..cols {
                m.data.swap(p * cols + j, r * cols + j);
            }
        }
        let inv = m.get(r, c).recip().expect("nonzero pivot");
        for j in c..cols {
            let v = m.get(r, j) * &inv;
            m.set(r, j, v);
        }
        for i in 0..rows {
            if i == r || m.get(i, c).is_zero() {
                continue;
            }
            let factor = m.get(i, c).clone();
            for j in c..cols {
                if m.get(r, j).is_zero() {
                    continue;
                }
                let v = m.get(i, j) - &(&factor * m.get(r, j));
                m.set(i, j, v);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

// A prime p ≡ 1 (mod 4) and a square root of −1 modulo p.
const MOD_P: u64 = 4_611_686_018_427_387_817;
const MOD_I: u64 = 120_863_620_846_201_794;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MOD_P as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a);
        }
        a = mul_mod(a, a);
        e >>= 1;
    }
    acc
}

fn rational_mod(q: &BigRational) -> Option<u64> {
    let p = BigInt::from(MOD_P);
    let num = q.numer().mod_floor(&p).to_u64()?;
    let den = q.denom().mod_floor(&p).to_u64()?;
    (den != 0).then(|| mul_mod(num, pow_mod(den, MOD_P - 2)))
}

/// Image under `ℤ[i]_(p) → F_p`, `i ↦ √−1`; `None` if a denominator vanishes mod p.
fn complex_rational_mod(x: &CRational) -> Option<u64> {
    let re = rational_mod(&x.re)?;
    let im = rational_mod(&x.im)?;
    Some((re + mul_mod(im, MOD_I)) % MOD_P)
}

/// Rank of the reduction mod p, a lower bound for the rank over `ℚ(i)`.
fn rank_mod_p(m: &Matrix<CRational>) -> Option<usize> {
    let (rows, cols) = (m.rows, m.cols);
    let mut a: Vec<u64> = m.data.iter().map(complex_rational_mod).collect::<Option<_>>()?;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| a[i * cols + c] != 0) else {
            continue;
        };
        for j in 0..cols {
            a.swap(piv * cols + j, r * cols + j);
        }
        let inv = pow_mod(a[r * cols + c], MOD_P - 2);
        for i in r + 1..rows {
            let f = mul_mod(a[i * cols + c], inv);
            if f == 0 {
                continue;
            }
            for j in c..cols {
                let sub = mul_mod(f, a[r * cols + j]);
                a[i * cols + j] = (a[i * cols + j] + MOD_P - sub) % MOD_P;
            }
        }
        r += 1;
    }
    Some(r)
}

/// Exact rank. A full rank modulo a prime certifies full rank over `ℚ(i)`;
/// otherwise the matrix is row reduced exactly.
pub fn exact_rank(m: &Matrix<CRational>) -> RankInfo {
    if let Some(r) = rank_mod_p(m) {
        if r == m.rows.min(m.cols) {
            return RankInfo {
                rank: r,
                inconclusive: false,
                singular_values: None,
            };
        }
    }
    let mut work = m.clone();
    RankInfo {
        rank: rref_exact(&mut work).len(),
        inconclusive: false,
        singular_values: None,
    }
}

pub fn exact_kernel(m: &Matrix<CRational>) -> KernelInfo<CRational> {
    let mut work = m.clone();
    let pivots = rref_exact(&mut work);
    let mut is_pivot = vec![false; m.cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..m.cols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![CRational::zero(); m.cols];
        v[free] = CRational::one();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -work.get(r, free);
        }
        basis.push(v);
    }
    KernelInfo {
        basis,
        rank: RankInfo {
            rank: pivots.len(),
            inconclusive: false,
            singular_values: None,
        },
    }
}

fn to_dmatrix<S: Scalar>(m: &Matrix<S>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows, m.cols, |i, j| m.get(i, j).to_complex())
}

fn classify(sv: &[f64], tol: f64) -> (usize, bool) {
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return (0, false);
    }
    let cut = tol * smax;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let inconclusive = sv.iter().any(|&s| s > cut / 10.0 && s <= cut * 10.0 && s != smax);
    (rank, inconclusive)
}

/// Numeric rank: singular values above `tol · σ_max`.
pub fn numeric_rank<S: Scalar>(m: &Matrix<S>, tol: f64) -> RankInfo {
    if m.rows == 0 || m.cols == 0 {
        return RankInfo {
            rank: 0,
            inconclusive: false,
            singular_values: Some(Vec::new()),
        };
    }
    let mut sv: Vec<f64> = to_dmatrix(m).singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let (rank, inconclusive) = classify(&sv, tol);
    RankInfo {
        rank,
        inconclusive,
        singular_values: Some(sv),
    }
}

/// Numeric kernel from the right singular vectors below the cut.
pub fn numeric_kernel(m: &Matrix<Complex64>, tol: f64) -> KernelInfo<Complex64> {
    let cols = m.cols;
    if cols == 0 {
        return KernelInfo {
            basis: Vec::new(),
            rank: numeric_rank(m, tol),
        };
    }
    // Pad with zero rows so the SVD yields a full right basis.
    let rows = m.rows.max(cols);
    let padded = DMatrix::from_fn(rows, cols, |i, j| {
        if i < m.rows {
            *m.get(i, j)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let (rank, inconclusive) = classify(&sv, tol);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let cut = tol * smax;
    let mut basis = Vec::new();
    for (k, &s) in sv.iter().enumerate() {
        if smax == 0.0 || s <= cut {
            basis.push((0..cols).map(|j| v_t[(k, j)].conj()).collect());
        }
    }
    let mut sorted = sv;
    sorted.sort_by(|a, b| b.total_cmp(a));
    KernelInfo {
        basis,
        rank: RankInfo {
            rank,
            inconclusive,
            singular_values: Some(sorted),
        },
    }
}

/// Error from [`solve_pivoted`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("matrix is singular at column {column}")]
pub struct SingularMatrix {
    pub column: usize,
}

/// Solves `A X = B` for square `A` by Gauss–Jordan elimination.
///
/// `score` ranks candidate pivots; a score of `0.0` marks an element as
/// unusable (zero). This is what lets the same routine run over truncated
/// series (score = size of the constant term) and symbolic expressions
/// (score = magnitude at a base point).
pub fn solve_pivoted<T: Arith>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    score: impl Fn(&T) -> f64,
) -> Result<Matrix<T>, SingularMatrix> {
    let n = a.rows;
    assert_eq!(a.cols, n, "solve_pivoted needs a square matrix");
    assert_eq!(b.rows, n);
    let m = b.cols;
    let mut a = a.clone();
    let mut b = b.clone();
    for k in 0..n {
        let (best, best_score) = (k..n)
            .map(|i| (i, score(a.get(i, k))))
            .fold((k, 0.0_f64), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_score <= 0.0 {
            return Err(SingularMatrix { column: k });
        }
        if best != k {
            for j in 0..n {
                a.data.swap(best * n + j, k * n + j);
            }
            for j in 0..m {
                b.data.swap(best * m + j, k * m + j);
            }
        }
        let inv = a.get(k, k).recip().ok_or(SingularMatrix { column: k })?;
        for j in 0..n {
            let v = a.get(k, j).times(&inv);
            a.set(k, j, v);
        }
        for j in 0..m {
            let v = b.get(k, j).times(&inv);
            b.set(k, j, v);
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            // A zero score does not imply a zero element (series with a
            // vanishing constant term), so every row is eliminated.
            let factor = a.get(i, k).clone();
            for j in 0..n {
                let v = a.get(i, j).minus(&factor.times(a.get(k, j)));
                a.set(i, j, v);
            }
            for j in 0..m {
                let v = b.get(i, j).minus(&factor.times(b.get(k, j)));
                b.set(i, j, v);
            }
        }
    }
    Ok(b)
}

/// Solves the square exact system `A x = b`.
pub fn solve_exact(a: &Matrix<CRational>, b: &[CRational]) -> Result<Vec<CRational>, SingularMatrix> {
    let rhs = Matrix::from_fn(b.len(), 1, |i, _| b[i].clone());
    let x = solve_pivoted(a, &rhs, |v| if v.is_zero() { 0.0 } else { 1.0 })?;
    Ok((0..b.len()).map(|i| x.get(i, 0).clone()).collect())
}

/// Determinant by exact elimination.
pub fn det_exact(a: &Matrix<CRational>) -> CRational {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut det = CRational::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !m.get(i, k).is_zero()) else {
            return CRational::zero();
        };
        if p != k {
            for j in 0..n {
                m.data.swap(p * n + j, k * n + j);
            }
            det = -det;
        }
        let pivot = m.get(k, k).clone();
        det = &det * &pivot;
        let inv = pivot.recip().expect("nonzero pivot");
        for i in k + 1..n {
            if m.get(i, k).is_zero() {
                continue;
            }
            let f = m.get(i, k) * &inv;
            for j in k..n {
                let v = m.get(i, j) - &(&f * m.get(k, j));
                m.set(i, j, v);
            }
        }
    }
    det
}
