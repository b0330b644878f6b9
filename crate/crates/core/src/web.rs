//! The web data model.
//!
//! Leaf `i` is the kernel of `η_i = dx_n − Σ_α p_{iα} dx_α`; the slope table
//! stores `p_{iα}` for `α < n` and the convention `p_{in} = −1` is implicit.
//! Indices are zero-based throughout.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::{Expr, ExprError, Point, Value};
use crate::linalg::{det_exact, Matrix, DEFAULT_RANK_TOL};
use crate::sampling::{sample_points, SamplingConfig, SamplingError};
use crate::scalar::{CRational, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WebError {
    #[error("a web needs n ≥ 2 and d > n (got n = {n}, d = {d})")]
    BadShape { n: usize, d: usize },
    #[error("slope row {row} has {got} entries, expected n − 1 = {expected}")]
    SlopeArity {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("expression uses x{var} but the web lives in dimension {n}", var = .var + 1)]
    VariableOutOfRange { var: usize, n: usize },
    #[error("first integral {index} has vanishing ∂/∂x_n at every sampled point; apply a coordinate change", index = .index + 1)]
    DegenerateIntegral { index: usize },
    #[error("no admissible coordinate change found after {attempts} attempts")]
    NoCoordinateChange { attempts: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Linear change `x = A x'` applied before building slopes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateChange {
    pub seed: u64,
    pub matrix: Vec<Vec<CRational>>,
}

impl CoordinateChange {
    /// Images of the old coordinates in terms of the new ones.
    pub fn images(&self) -> Vec<Expr> {
        self.matrix
            .iter()
            .map(|row| {
                Expr::sum(
                    row.iter()
                        .enumerate()
                        .map(|(k, a)| Expr::constant(a.clone()).mul(&Expr::var(k))),
                )
            })
            .collect()
    }
}

/// A web given by first integrals `u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstIntegralWeb {
    pub n: usize,
    pub integrals: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Web {
    n: usize,
    slopes: Vec<Vec<Expr>>,
    change: Option<CoordinateChange>,
}

fn check_vars(e: &Expr, n: usize) -> Result<(), WebError> {
    match e.max_var() {
        Some(var) if var >= n => Err(WebError::VariableOutOfRange { var, n }),
        _ => Ok(()),
    }
}

impl Web {
    pub fn new(n: usize, slopes: Vec<Vec<Expr>>) -> Result<Self, WebError> {
        let d = slopes.len();
        if n < 2 || d <= n {
            return Err(WebError::BadShape { n, d });
        }
        for (row, s) in slopes.iter().enumerate() {
            if s.len() != n - 1 {
                return Err(WebError::SlopeArity {
                    row,
                    got: s.len(),
                    expected: n - 1,
                });
            }
            for e in s {
                check_vars(e, n)?;
            }
        }
        Ok(Web {
            n,
            slopes,
            change: None,
        })
    }

    /// Slopes `p_{iα} = −(u_i)'_α / (u_i)'_n`, with degeneracy detected at
    /// sampled points.
    pub fn from_first_integrals(fw: &FirstIntegralWeb, cfg: &SamplingConfig) -> Result<Self, WebError> {
        let n = fw.n;
        if n < 2 || fw.integrals.len() <= n {
            return Err(WebError::BadShape {
                n,
                d: fw.integrals.len(),
            });
        }
        for u in &fw.integrals {
            check_vars(u, n)?;
        }
        let mut slopes = Vec::with_capacity(fw.integrals.len());
        for (index, u) in fw.integrals.iter().enumerate() {
            let un = u.differentiate(n - 1);
            if integral_degenerate(&un, n, cfg)? {
                return Err(WebError::DegenerateIntegral { index });
            }
            let row = (0..n - 1)
                .map(|a| u.differentiate(a).neg().div(&un).simplify())
                .collect();
            slopes.push(row);
        }
        Web::new(n, slopes)
    }

    /// Like [`Web::from_first_integrals`], but on degeneracy retries after
    /// seeded random rational linear coordinate changes.
    pub fn from_first_integrals_with_change(
        fw: &FirstIntegralWeb,
        cfg: &SamplingConfig,
    ) -> Result<Self, WebError> {
        match Web::from_first_integrals(fw, cfg) {
            Err(WebError::DegenerateIntegral { .. }) => {}
            other => return other,
        }
        const ATTEMPTS: usize = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c0de);
        for _ in 0..ATTEMPTS {
            let matrix: Vec<Vec<CRational>> = (0..fw.n)
                .map(|_| (0..fw.n).map(|_| CRational::from_int(rng.random_range(-3..=3))).collect())
                .collect();
            if det_exact(&Matrix::from_rows(matrix.clone())).is_zero() {
                continue;
            }
            let change = CoordinateChange {
                seed: cfg.seed,
                matrix,
            };
            let images = change.images();
            let moved = FirstIntegralWeb {
                n: fw.n,
                integrals: fw.integrals.iter().map(|u| u.substitute_vars(&images)).collect(),
            };
            match Web::from_first_integrals(&moved, cfg) {
                Ok(mut w) => {
                    w.change = Some(change);
                    return Ok(w);
                }
                Err(WebError::DegenerateIntegral { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(WebError::NoCoordinateChange { attempts: ATTEMPTS })
    }

    /// Constant-slope web from linear forms `l_i = Σ a_{iλ} x_λ` (`a_{in} ≠ 0`).
    pub fn from_linear_forms(forms: &[Vec<CRational>]) -> Result<Self, WebError> {
        let n = forms.first().map_or(0, Vec::len);
        let mut slopes = Vec::new();
        for (index, l) in forms.iter().enumerate() {
            let an = l[n - 1].recip().ok_or(WebError::DegenerateIntegral { index })?;
            slopes.push(
                l[..n - 1]
                    .iter()
                    .map(|a| Expr::constant(-(a * &an)))
                    .collect(),
            );
        }
        Web::new(n, slopes)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.slopes.len()
    }

    /// The `d × (n−1)` table of free slopes.
    pub fn slopes(&self) -> &[Vec<Expr>] {
        &self.slopes
    }

    /// `p_{iλ}` including the normalized last entry `−1`.
    pub fn slope(&self, i: usize, lambda: usize) -> Expr {
        if lambda == self.n - 1 {
            Expr::int(-1)
        } else {
            self.slopes[i][lambda].clone()
        }
    }

    pub fn coordinate_change(&self) -> Option<&CoordinateChange> {
        self.change.as_ref()
    }

    pub fn is_exp_free(&self) -> bool {
        self.slopes.iter().flatten().all(|e| !e.contains_exp())
    }

    /// Whether evaluation at `p` stays in exact arithmetic.
    pub fn exact_at(&self, p: &Point) -> bool {
        p.is_exact() && self.is_exp_free()
    }

    pub fn bind(&self, params: &BTreeMap<String, CRational>) -> Web {
        Web {
            n: self.n,
            slopes: self
                .slopes
                .iter()
                .map(|r| r.iter().map(|e| e.bind(params)).collect())
                .collect(),
            change: self.change.clone(),
        }
    }

    /// Normal covectors `(p_{i1}, …, p_{i,n−1}, −1)` at a point, one per row.
    pub fn normals<S: Scalar>(&self, p: &[S]) -> Result<Matrix<S>, ExprError> {
        let mut rows = Vec::with_capacity(self.d());
        for s in &self.slopes {
            let mut row = Vec::with_capacity(self.n);
            for e in s {
                row.push(e.eval(p)?);
            }
            row.push(S::from_int(-1));
            rows.push(row);
        }
        Ok(Matrix::from_rows(rows))
    }

    /// `(p_λ)'_μ − (p_μ)'_λ + p_μ (p_λ)'_n − p_λ (p_μ)'_n` for leaf `i`.
    pub fn integrability_expr(&self, i: usize, lambda: usize, mu: usize) -> Expr {
        let last = self.n - 1;
        let pl = self.slope(i, lambda);
        let pm = self.slope(i, mu);
        pl.differentiate(mu)
            .sub(&pm.differentiate(lambda))
            .add(&pm.mul(&pl.differentiate(last)))
            .sub(&pl.mul(&pm.differentiate(last)))
    }

    pub fn integrability_residual(&self, i: usize, lambda: usize, mu: usize, p: &Point) -> Result<Value, WebError> {
        Ok(self.integrability_expr(i, lambda, mu).evaluate(p)?)
    }

    /// Certifies integrability symbolically when possible, else at sampled points.
    pub fn integrability(&self, cfg: &SamplingConfig) -> Result<IntegrabilityReport, WebError> {
        let mut residuals = Vec::new();
        for i in 0..self.d() {
            for l in 0..self.n {
                for m in l + 1..self.n {
                    residuals.push(self.integrability_expr(i, l, m).simplify());
                }
            }
        }
        if self.is_exp_free() && residuals.iter().all(Expr::is_zero) {
            return Ok(IntegrabilityReport {
                symbolic: true,
                points: 0,
                max_residual: 0.0,
                integrable: true,
            });
        }
        let exact = self.is_exp_free();
        let samples = sample_points(self.n, cfg, exact, |p| {
            let mut worst = 0.0_f64;
            for r in &residuals {
                match r.evaluate(p) {
                    Ok(v) => worst = worst.max(v.to_complex().norm()),
                    Err(ExprError::PoleAtPoint) => return Ok(None),
                    Err(e) => return Err(WebError::from(e)),
                }
            }
            Ok(Some(worst))
        })?;
        let max_residual = samples.results.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let integrable = if exact {
            max_residual == 0.0
        } else {
            max_residual < DEFAULT_RANK_TOL
        };
        Ok(IntegrabilityReport {
            symbolic: false,
            points: samples.results.len(),
            max_residual,
            integrable,
        })
    }

    pub fn position_check(&self, p: &Point) -> Result<PositionReport, WebError> {
        Ok(match p {
            Point::Exact(v) if self.is_exp_free() => position_at(&self.normals(v)?),
            _ => position_at(&self.normals(&p.to_float())?),
        })
    }
}

fn integral_degenerate(un: &Expr, n: usize, cfg: &SamplingConfig) -> Result<bool, WebError> {
    if un.is_zero() {
        return Ok(true);
    }
    let probe_cfg = SamplingConfig {
        trials: 5,
        ..cfg.clone()
    };
    let exact = !un.contains_exp();
    let samples = sample_points(n, &probe_cfg, exact, |p| match un.evaluate(p) {
        Ok(v) => Ok(Some(v.is_zero())),
        Err(ExprError::PoleAtPoint) => Ok(None),
        Err(e) => Err(WebError::from(e)),
    })?;
    Ok(samples.results.iter().all(|(_, z)| *z))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    /// All residuals simplified to zero.
    pub symbolic: bool,
    pub points: usize,
    pub max_residual: f64,
    pub integrable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PositionReport {
    pub weak: bool,
    pub strong: bool,
    pub distinguishable: bool,
}

fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    rec(0, d, k, &mut cur, &mut out);
    out
}

pub(crate) fn position_at<S: Scalar>(normals: &Matrix<S>) -> PositionReport {
    let (d, n) = (normals.rows(), normals.cols());
    let weak = S::rank_of(normals, DEFAULT_RANK_TOL).rank == n;
    let strong = combinations(d, n)
        .iter()
        .all(|rows| S::rank_of(&normals.select_rows(rows), DEFAULT_RANK_TOL).rank == n);
    let distinct = |a: &[S], b: &[S]| {
        if S::EXACT {
            a != b
        } else {
            let diff: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x.to_complex() - y.to_complex()).norm())
                .fold(0.0, f64::max);
            let scale: f64 = a.iter().chain(b).map(|x| x.magnitude()).fold(1.0, f64::max);
            diff > DEFAULT_RANK_TOL * scale
        }
    };
    let distinguishable = (0..d).all(|i| (i + 1..d).all(|j| distinct(normals.row(i), normals.row(j))));
    PositionReport {
        weak,
        strong,
        distinguishable,
    }
}
