//! Affine webs: `d` pencils of parallel hyperplanes `l_i = const`.
//!
//! Ranks here are exact. Abelian relations of an affine web can be taken
//! as `ω_i = g_i(l_i) dl_i` with univariate polynomials `g_i`, which turns
//! the relation solver into plain linear algebra over the rationals.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::combinatorics::{c, enumerate_partitions, k0, pi_prime, CombinatoricsError};
use crate::linalg::{exact_kernel, exact_rank, Matrix};
use crate::moments::moment_matrix_from_normals;
use crate::scalar::CRational;
use crate::web::position_at;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AffineError {
    #[error("an affine web needs n ≥ 2 and at least one form")]
    Empty,
    #[error("form {index} has {got} coefficients, expected {expected}", index = .index + 1)]
    Arity { index: usize, got: usize, expected: usize },
    #[error("form {index} is zero", index = .index + 1)]
    ZeroForm { index: usize },
    #[error("forms {first} and {second} are proportional", first = .first + 1, second = .second + 1)]
    Duplicate { first: usize, second: usize },
    #[error("the forms are not in strong general position (some {n} of them are dependent)")]
    NotStrongGeneralPosition { n: usize },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// `d` rational linear forms in `n` variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineWeb {
    n: usize,
    forms: Vec<Vec<CRational>>,
}

impl AffineWeb {
    pub fn new(forms: Vec<Vec<CRational>>) -> Result<Self, AffineError> {
        let n = forms.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(AffineError::Empty);
        }
        for (index, l) in forms.iter().enumerate() {
            if l.len() != n {
                return Err(AffineError::Arity {
                    index,
                    got: l.len(),
                    expected: n,
                });
            }
            if l.iter().all(CRational::is_zero) {
                return Err(AffineError::ZeroForm { index });
            }
        }
        for first in 0..forms.len() {
            for second in first + 1..forms.len() {
                let pair = Matrix::from_rows(vec![forms[first].clone(), forms[second].clone()]);
                if exact_rank(&pair).rank < 2 {
                    return Err(AffineError::Duplicate { first, second });
                }
            }
        }
        Ok(AffineWeb { n, forms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[Vec<CRational>] {
        &self.forms
    }

    fn coefficient_matrix(&self) -> Matrix<CRational> {
        Matrix::from_rows(self.forms.clone())
    }

    /// Every `n` of the forms are linearly independent.
    pub fn is_strong_general_position(&self) -> bool {
        position_at(&self.coefficient_matrix()).strong
    }
}

/// `r_h`: dimension of the span of `l_1^h, …, l_d^h`.
///
/// Rows are the monomials `a^L`; the multinomial factors in the expansion
/// of `l^h` only rescale columns and are left out.
pub fn veronese_rank(aw: &AffineWeb, h: u32) -> usize {
    exact_rank(&moment_matrix_from_normals(&aw.coefficient_matrix(), h).entries).rank
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineRankReport {
    pub n: usize,
    pub d: usize,
    pub k0: usize,
    /// `(h, r_h, min(d, c(n,h)))` for `h = 1..=k₀`.
    pub ranks: Vec<(u32, usize, usize)>,
    pub rank: usize,
    pub pi_prime: u64,
    pub ordinary: bool,
}

/// `Σ_{h=1}^{k₀} (d − r_h)`, valid in strong general position.
pub fn affine_rank(aw: &AffineWeb) -> Result<usize, AffineError> {
    Ok(affine_rank_report(aw)?.rank)
}

pub fn affine_rank_report(aw: &AffineWeb) -> Result<AffineRankReport, AffineError> {
    let (n, d) = (aw.n(), aw.d());
    let top = k0(n, d)?;
    if !aw.is_strong_general_position() {
        return Err(AffineError::NotStrongGeneralPosition { n });
    }
    let mut ranks = Vec::with_capacity(top);
    let mut rank = 0;
    for h in 1..=top as u32 {
        let r = veronese_rank(aw, h);
        ranks.push((h, r, d.min(c(n, h as usize)? as usize)));
        rank += d - r;
    }
    let ordinary = ranks.iter().all(|&(h, r, e)| h < 2 || r == e);
    Ok(AffineRankReport {
        n,
        d,
        k0: top,
        ranks,
        rank,
        pi_prime: pi_prime(n, d)?.0,
        ordinary,
    })
}

/// `r_h = min(d, c(n,h))` for `h = 2..=k₀`: no degree-`h` hypersurface
/// contains the dual points.
pub fn is_ordinary_affine(aw: &AffineWeb) -> Result<bool, AffineError> {
    let (n, d) = (aw.n(), aw.d());
    let top = k0(n, d)? as u32;
    for h in 2..=top {
        if veronese_rank(aw, h) < d.min(c(n, h as usize)? as usize) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Basis of abelian relations `(g_1, …, g_d)` with `deg g_i ≤ D`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbelianRelationBasis {
    pub degree_cap: u32,
    /// `basis[r][i][k]` is the coefficient of `t^k` in `g_i` of relation `r`.
    pub basis: Vec<Vec<Vec<CRational>>>,
    pub dimension: usize,
}

type Poly = BTreeMap<Vec<u32>, CRational>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let slot = out.entry(e).or_insert_with(CRational::zero);
            *slot = &*slot + &(ca * cb);
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn linear_poly(l: &[CRational]) -> Poly {
    let n = l.len();
    let mut p = Poly::new();
    for (lambda, a) in l.iter().enumerate() {
        if !a.is_zero() {
            let mut e = vec![0; n];
            e[lambda] = 1;
            p.insert(e, a.clone());
        }
    }
    p
}

/// Kernel of `Σ_i g_i(l_i(x)) a_{iλ} ≡ 0` over the coefficients of the
/// `g_i`, with `l_i^k` expanded by repeated polynomial multiplication.
pub fn solve_abelian_relations(aw: &AffineWeb, degree_cap: u32) -> AbelianRelationBasis {
    let (n, d) = (aw.n(), aw.d());
    let per = degree_cap as usize + 1;
    // powers[i][k] = l_i^k
    let powers: Vec<Vec<Poly>> = aw
        .forms
        .iter()
        .map(|l| {
            let lin = linear_poly(l);
            let mut acc = Poly::from([(vec![0; n], CRational::one())]);
            let mut out = Vec::with_capacity(per);
            for _ in 0..per {
                out.push(acc.clone());
                acc = poly_mul(&acc, &lin);
            }
            out
        })
        .collect();
    let mut rows = Vec::new();
    for k in 0..=degree_cap {
        for m in enumerate_partitions(n, k) {
            for lambda in 0..n {
                let mut row = vec![CRational::zero(); d * per];
                for i in 0..d {
                    if let Some(coef) = powers[i][k as usize].get(m.exponents()) {
                        row[i * per + k as usize] = coef * &aw.forms[i][lambda];
                    }
                }
                rows.push(row);
            }
        }
    }
    let kernel = exact_kernel(&Matrix::from_rows(rows));
    let basis: Vec<Vec<Vec<CRational>>> = kernel
        .basis
        .iter()
        .map(|v| v.chunks(per).map(<[CRational]>::to_vec).collect())
        .collect();
    AbelianRelationBasis {
        degree_cap,
        dimension: basis.len(),
        basis,
    }
}

/// Default cap `k₀ − 1`.
pub fn default_degree_cap(aw: &AffineWeb) -> Result<u32, AffineError> {
    Ok(k0(aw.n(), aw.d())? as u32 - 1)
}

impl AbelianRelationBasis {
    /// `Σ_i g_i(l_i(x)) a_{iλ}` for relation `r` at `x`, one entry per `λ`.
    pub fn residuals_at(&self, aw: &AffineWeb, r: usize, x: &[CRational]) -> Vec<CRational> {
        let values: Vec<CRational> = aw
            .forms()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let t = l.iter().zip(x).fold(CRational::zero(), |s, (a, v)| &s + &(a * v));
                self.basis[r][i].iter().rev().fold(CRational::zero(), |g, coef| &(&g * &t) + coef)
            })
            .collect();
        (0..aw.n())
            .map(|lambda| {
                aw.forms()
                    .iter()
                    .zip(&values)
                    .fold(CRational::zero(), |acc, (l, g)| &acc + &(g * &l[lambda]))
            })
            .collect()
    }
}
