//! Derivative reduction and the prolonged linear systems of formal abelian
//! relations.
//!
//! Jet coordinates are `f_i^{(t)} = (f_i)'_{n^t}`; every mixed derivative is
//! rewritten in terms of them using `(f_i)'_α = −(f_i p_{iα})'_n`. A jet of
//! order `k+1` is stored layer by layer: column `t·d + i` holds `f_i^{(t)}`.
//! The constraint `E_H` is the `(H − 1_λ)`-derivative of the trace equation
//! `Σ_i p_{iλ} f_i = 0`.

use std::collections::HashMap;

use serde::Serialize;

use crate::combinatorics::{c, enumerate_partitions, k0, CombinatoricsError, MultiIndex};
use crate::diff::{Differential, FunctionContext, SeriesContext};
use crate::expr::{Expr, ExprError, Point};
use crate::linalg::Matrix;
use crate::moments::{self, balanced, MomentsError};
use crate::scalar::{CRational, Scalar};
use crate::web::Web;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetsError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("point lies in the singular locus S")]
    PointInS,
    #[error("numeric rank of the order-{k} system is inconclusive")]
    Inconclusive { k: i32 },
    #[error("lower jet violates E_{h} (residual {residual:e})")]
    InconsistentLowerJet { h: MultiIndex, residual: f64 },
    #[error("lower jet has {got} coordinates, expected {expected}")]
    LowerJetLength { got: usize, expected: usize },
    #[error("ordinariness check failed: {0}")]
    Moments(String),
}

impl From<MomentsError> for JetsError {
    fn from(e: MomentsError) -> Self {
        match e {
            MomentsError::Expr(e) => JetsError::Expr(e),
            other => JetsError::Moments(other.to_string()),
        }
    }
}

/// Rewrites derivatives of `f_i` in jet coordinates over any differential ring.
pub struct Reducer<R: Differential> {
    n: usize,
    /// `d × n`, last column the constant `−1`.
    slopes: Vec<Vec<R>>,
    derivs: HashMap<(usize, usize, MultiIndex), R>,
    red: HashMap<(usize, usize, usize), Vec<R>>,
    memo: HashMap<(usize, MultiIndex), Vec<R>>,
    preference: Vec<usize>,
}

impl<R: Differential> Reducer<R> {
    pub fn from_slopes(n: usize, slopes: Vec<Vec<R>>) -> Self {
        Reducer {
            n,
            slopes,
            derivs: HashMap::new(),
            red: HashMap::new(),
            memo: HashMap::new(),
            preference: (0..n).collect(),
        }
    }

    pub fn new<C: FunctionContext<R = R>>(w: &Web, ctx: &C) -> Result<Self, ExprError> {
        let mut slopes = Vec::with_capacity(w.d());
        for i in 0..w.d() {
            let mut row = Vec::with_capacity(w.n());
            for l in 0..w.n() {
                row.push(ctx.lift(&w.slope(i, l))?);
            }
            slopes.push(row);
        }
        Ok(Reducer::from_slopes(w.n(), slopes))
    }

    /// Order in which α-derivatives are peeled off (default `0, 1, …`).
    pub fn with_preference(mut self, preference: Vec<usize>) -> Self {
        self.preference = preference;
        self.memo.clear();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.slopes.len()
    }

    fn zero(&self) -> R {
        self.slopes[0][0].zero_like()
    }

    fn constant(&self, v: i64) -> R {
        self.slopes[0][0].constant_like(&CRational::from_int(v))
    }

    /// `(p_{iλ})'_M`.
    pub fn slope_derivative(&mut self, i: usize, lambda: usize, m: &MultiIndex) -> R {
        if m.height() == 0 {
            return self.slopes[i][lambda].clone();
        }
        if lambda == self.n - 1 {
            return self.zero();
        }
        let key = (i, lambda, m.clone());
        if let Some(v) = self.derivs.get(&key) {
            return v.clone();
        }
        let s = m.support()[0];
        let prev = self.slope_derivative(i, lambda, &m.minus_unit(s).expect("s in support"));
        let v = prev.derivative(s).tidy();
        self.derivs.insert(key, v.clone());
        v
    }

    // Coefficients of (f^{(k)})'_α in terms of f^{(0..=k+1)}.
    fn red(&mut self, i: usize, alpha: usize, k: usize) -> Vec<R> {
        if let Some(v) = self.red.get(&(i, alpha, k)) {
            return v.clone();
        }
        let mut out = vec![self.zero(); k + 2];
        let last = self.n - 1;
        for j in 0..=k {
            let b = self.constant(binomial(k, j));
            let pj = self.slope_derivative(i, alpha, &MultiIndex::pure(self.n, last, j as u32));
            let pj1 = self.slope_derivative(i, alpha, &MultiIndex::pure(self.n, last, j as u32 + 1));
            out[k - j + 1] = out[k - j + 1].minus(&b.times(&pj));
            out[k - j] = out[k - j].minus(&b.times(&pj1));
        }
        let out: Vec<R> = out.into_iter().map(Differential::tidy).collect();
        self.red.insert((i, alpha, k), out.clone());
        out
    }

    /// `D^{(0..=|L|)}` with `(f_i)'_L = Σ_k D^{(k)} f_i^{(k)}`.
    pub fn reduce(&mut self, i: usize, l: &MultiIndex) -> Vec<R> {
        if let Some(v) = self.memo.get(&(i, l.clone())) {
            return v.clone();
        }
        let last = self.n - 1;
        let height = l.height() as usize;
        let alpha = self
            .preference
            .iter()
            .copied()
            .find(|&a| a != last && l.get(a) > 0);
        let out = match alpha {
            None => {
                let mut v = vec![self.zero(); height + 1];
                v[height] = self.constant(1);
                v
            }
            Some(a) => {
                let prev = self.reduce(i, &l.minus_unit(a).expect("α in support"));
                let mut out = vec![self.zero(); height + 1];
                for (m, coef) in prev.iter().enumerate() {
                    out[m] = out[m].plus(&coef.derivative(a));
                }
                for (k, coef) in prev.iter().enumerate() {
                    for (t, r) in self.red(i, a, k).iter().enumerate() {
                        out[t] = out[t].plus(&coef.times(r));
                    }
                }
                out.into_iter().map(Differential::tidy).collect()
            }
        };
        self.memo.insert((i, l.clone()), out.clone());
        out
    }

    /// `E_H` split at `λ ∈ supp H`: entry `[i][t]` is the coefficient of `f_i^{(t)}`.
    pub fn constraint(&mut self, h: &MultiIndex, lambda: usize) -> Vec<Vec<R>> {
        let l = h.minus_unit(lambda).expect("λ must lie in the support of H");
        let height = h.height() as usize;
        let mut rows = Vec::with_capacity(self.d());
        for i in 0..self.d() {
            let mut row = vec![self.zero(); height];
            for m in l.sub_indices() {
                let diff = l.minus(&m).expect("M ≤ L");
                let p = self.slope_derivative(i, lambda, &diff);
                let coef = self.constant(l.binomial(&m) as i64).times(&p);
                for (t, r) in self.reduce(i, &m).iter().enumerate() {
                    row[t] = row[t].plus(&coef.times(r));
                }
            }
            rows.push(row.into_iter().map(Differential::tidy).collect());
        }
        rows
    }

    /// `E_H` signed so that the coefficient of `f_i^{(|H|−1)}` is `C_{iH}`.
    pub fn normalized_constraint(&mut self, h: &MultiIndex) -> Vec<Vec<R>> {
        let lambda = default_split(h);
        let rows = self.constraint(h, lambda);
        if h.height() % 2 == 1 {
            rows
        } else {
            rows.into_iter()
                .map(|r| r.into_iter().map(|x| x.negated()).collect())
                .collect()
        }
    }
}

/// Prefers splitting off `x_n`, whose slope is constant.
pub fn default_split(h: &MultiIndex) -> usize {
    let last = h.dim() - 1;
    if h.get(last) > 0 {
        last
    } else {
        h.support()[0]
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let mut acc: i64 = 1;
    for j in 0..k {
        acc = acc * (n - j) as i64 / (j + 1) as i64;
    }
    acc
}

/// Symbolic result of [`reduce`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDerivative {
    pub i: usize,
    pub l: MultiIndex,
    pub coeffs: Vec<Expr>,
}

/// Symbolic reduction of `(f_i)'_L`.
pub fn reduce(w: &Web, i: usize, l: &MultiIndex) -> ReducedDerivative {
    let slopes = (0..w.d())
        .map(|j| (0..w.n()).map(|lam| w.slope(j, lam)).collect())
        .collect();
    let mut r = Reducer::<Expr>::from_slopes(w.n(), slopes);
    ReducedDerivative {
        i,
        l: l.clone(),
        coeffs: r.reduce(i, l),
    }
}

/// One normalized constraint evaluated at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct JetRow<S> {
    pub h: MultiIndex,
    /// Column `t·d + i`, `t < |H|`.
    pub coeffs: Vec<S>,
}

/// All normalized constraints `E_H`, `1 ≤ |H| ≤ max_height`, at `p`.
pub fn constraint_rows<S: Scalar>(w: &Web, p: &[S], max_height: usize) -> Result<Vec<JetRow<S>>, ExprError> {
    if max_height == 0 {
        return Ok(Vec::new());
    }
    let ctx = SeriesContext::new(p.to_vec(), max_height - 1);
    let mut red = Reducer::new(w, &ctx)?;
    let d = w.d();
    let mut rows = Vec::new();
    for h in 1..=max_height {
        for hh in enumerate_partitions(w.n(), h as u32) {
            let e = red.normalized_constraint(&hh);
            let mut coeffs = vec![S::zero(); d * h];
            for (i, row) in e.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    coeffs[t * d + i] = v.value().clone();
                }
            }
            rows.push(JetRow { h: hh, coeffs });
        }
    }
    Ok(rows)
}

/// Constraints with `|H| ≤ height` as a matrix on layers `0..height`.
pub fn stacked<S: Scalar>(rows: &[JetRow<S>], d: usize, height: usize) -> Matrix<S> {
    let kept: Vec<&JetRow<S>> = rows.iter().filter(|r| r.h.height() as usize <= height).collect();
    Matrix::from_fn(kept.len(), d * height, |r, col| {
        kept[r].coeffs.get(col).cloned().unwrap_or_else(S::zero)
    })
}

/// `Σ_{h=1}^{k+2} (d − c(n,h))`, the fiber dimension of `R_k` off `S` for
/// `k ≤ k₀ − 2`.
pub fn expected_dimension(n: usize, d: usize, k: i32) -> Result<usize, CombinatoricsError> {
    let mut total = 0;
    for h in 1..=(k + 2) as usize {
        total += d - c(n, h)? as usize;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimRecord {
    pub k: i32,
    pub dim: usize,
    /// Predicted value when `k ≤ k₀ − 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<usize>,
    pub inconclusive: bool,
}

/// Dimensions of `R_{−1}, …, R_{k_max}` at `p`, with no check that `p ∉ S`.
pub fn fiber_dimensions_at<S: Scalar>(w: &Web, p: &[S], k_max: i32, tol: f64) -> Result<Vec<DimRecord>, JetsError> {
    let (n, d) = (w.n(), w.d());
    let top = k0(n, d)? as i32;
    let max_height = (k_max + 2).max(1) as usize;
    let rows = constraint_rows(w, p, max_height)?;
    let mut out = Vec::new();
    for k in -1..=k_max {
        let height = (k + 2) as usize;
        let m = stacked(&rows, d, height);
        let info = moments::rank_of(&m, tol);
        out.push(DimRecord {
            k,
            dim: d * height - info.rank,
            expected: if k <= top - 2 {
                Some(expected_dimension(n, d, k)?)
            } else {
                None
            },
            inconclusive: info.inconclusive,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberLadder {
    pub point: Point,
    pub dims: Vec<DimRecord>,
}

fn ensure_outside_s(w: &Web, p: &Point, tol: f64) -> Result<(), JetsError> {
    if moments::ordinariness(w, p, tol)?.in_s {
        Err(JetsError::PointInS)
    } else {
        Ok(())
    }
}

/// Dimension ladder of `R_{−1}..R_{k_max}`; errors when `p ∈ S` or a
/// numeric rank is borderline.
pub fn fiber_dimensions(w: &Web, p: &Point, k_max: i32, tol: f64) -> Result<FiberLadder, JetsError> {
    ensure_outside_s(w, p, tol)?;
    let dims = match p {
        Point::Exact(v) if w.is_exp_free() => fiber_dimensions_at(w, v, k_max, tol)?,
        _ => fiber_dimensions_at(w, &p.to_float(), k_max, tol)?,
    };
    if let Some(bad) = dims.iter().find(|r| r.inconclusive) {
        return Err(JetsError::Inconclusive { k: bad.k });
    }
    Ok(FiberLadder {
        point: p.clone(),
        dims,
    })
}

/// Solution space of the stacked system for `R_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetFiber<S> {
    pub k: i32,
    pub dim: usize,
    /// Vectors of length `d(k+2)`, layer-major.
    pub basis: Vec<Vec<S>>,
}

pub fn jet_fiber_at<S: Scalar>(w: &Web, p: &[S], k: i32, tol: f64) -> Result<JetFiber<S>, JetsError> {
    let height = (k + 2) as usize;
    let rows = constraint_rows(w, p, height)?;
    let m = stacked(&rows, w.d(), height);
    let ker = S::kernel_of(&balanced(&m), tol);
    if ker.rank.inconclusive {
        return Err(JetsError::Inconclusive { k });
    }
    Ok(JetFiber {
        k,
        dim: ker.basis.len(),
        basis: ker.basis,
    })
}

/// `Σ_k`: `P_{k+2}ᵀ w = Φ`, one equation per `H` with `|H| = k+2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSystem<S> {
    pub equations: Vec<MultiIndex>,
    /// `c(n,k+2) × d`; the transpose of the moment matrix `P_{k+2}`.
    pub matrix: Matrix<S>,
    pub rhs: Vec<S>,
}

/// Assembles `Σ_k` for the unknowns `w_i = f_i^{(k+1)}` above a lower jet
/// (layers `0..=k`, layer-major).
pub fn build_sigma_at<S: Scalar>(w: &Web, p: &[S], k: usize, lower: &[S], tol: f64) -> Result<SigmaSystem<S>, JetsError> {
    let d = w.d();
    let expected = d * (k + 1);
    if lower.len() != expected {
        return Err(JetsError::LowerJetLength {
            got: lower.len(),
            expected,
        });
    }
    let rows = constraint_rows(w, p, k + 2)?;
    let scale = lower.iter().map(Scalar::magnitude).fold(1.0, f64::max);
    let mut equations = Vec::new();
    let mut matrix_rows = Vec::new();
    let mut rhs = Vec::new();
    for row in &rows {
        let height = row.h.height() as usize;
        let lower_part = row.coeffs.len().min(d * (k + 1));
        let mut acc = S::zero();
        for (c, l) in row.coeffs[..lower_part].iter().zip(lower) {
            acc = acc.plus(&c.times(l));
        }
        if height <= k + 1 {
            let size = acc.magnitude();
            let row_scale = row.coeffs.iter().map(Scalar::magnitude).fold(1.0, f64::max);
            let bad = if S::EXACT {
                !acc.is_zero()
            } else {
                size > tol * row_scale * scale
            };
            if bad {
                return Err(JetsError::InconsistentLowerJet {
                    h: row.h.clone(),
                    residual: size,
                });
            }
        } else {
            equations.push(row.h.clone());
            matrix_rows.push(row.coeffs[(k + 1) * d..].to_vec());
            rhs.push(acc.negated());
        }
    }
    Ok(SigmaSystem {
        equations,
        matrix: Matrix::from_rows(matrix_rows),
        rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormalRankReport {
    pub k0: usize,
    /// Order whose fiber dimension is the estimate.
    pub estimate_order: i32,
    pub estimate: usize,
    pub ladder: Vec<DimRecord>,
    /// Dimensions stay equal to the estimate up to `k₀ + 2`.
    pub stable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_drop: Option<i32>,
}

/// Upper bound for the rank from the jet ladder, with prolongation up to
/// `k₀ + 2` as evidence of stabilization or of a drop.
pub fn formal_rank_estimate(w: &Web, p: &Point, tol: f64) -> Result<FormalRankReport, JetsError> {
    let top = k0(w.n(), w.d())?;
    // With k₀ = 1 ordinariness already forces R_0 = 0.
    let estimate_order = (top as i32 - 2).max(0);
    let ladder = fiber_dimensions(w, p, top as i32 + 2, tol)?.dims;
    let estimate = ladder
        .iter()
        .find(|r| r.k == estimate_order)
        .expect("ladder covers the estimate order")
        .dim;
    let tail: Vec<&DimRecord> = ladder.iter().filter(|r| r.k >= estimate_order).collect();
    let first_drop = tail.windows(2).find(|w| w[1].dim < w[0].dim).map(|w| w[1].k);
    Ok(FormalRankReport {
        k0: top,
        estimate_order,
        estimate,
        stable: first_drop.is_none(),
        first_drop,
        ladder,
    })
}
