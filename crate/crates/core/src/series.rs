//! Truncated multivariate Taylor series at a point.
//!
//! A `Series` stores normalized coefficients `c_M = f^{(M)}(p) / M!` for all
//! monomials of degree at most its truncation order. Differentiation lowers
//! the order by one, products keep the smaller order, so a value whose
//! order drops below zero is known to carry no information; reading it
//! panics. This gives exact derivatives of rational data at a point without
//! ever building large symbolic expressions.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::combinatorics::{enumerate_partitions, MultiIndex};
use crate::diff::Differential;
use crate::expr::{Expr, ExprError, Node};
use crate::scalar::{Arith, CRational, Scalar};

/// Monomials of degree `≤ max_order` in `n` variables with lookup tables.
pub struct MonomialBasis {
    n: usize,
    max_order: usize,
    monomials: Vec<MultiIndex>,
    degree: Vec<usize>,
    index: HashMap<MultiIndex, usize>,
    /// `prefix[k]` = number of monomials of degree `≤ k`.
    prefix: Vec<usize>,
    /// `mul[i][j]` = index of `m_i + m_j` whenever the sum fits.
    mul: Vec<Vec<usize>>,
    /// `up[λ][i]` = index of `m_i + e_λ` when it fits.
    up: Vec<Vec<Option<usize>>>,
}

impl MonomialBasis {
    fn build(n: usize, max_order: usize) -> Self {
        let mut monomials = Vec::new();
        let mut degree = Vec::new();
        let mut prefix = Vec::new();
        for h in 0..=max_order {
            for m in enumerate_partitions(n, h as u32) {
                monomials.push(m);
                degree.push(h);
            }
            prefix.push(monomials.len());
        }
        let index: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mul = monomials
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let room = max_order - degree[i];
                monomials[..prefix[room]]
                    .iter()
                    .map(|b| index[&a.plus(b)])
                    .collect()
            })
            .collect();
        let up = (0..n)
            .map(|l| {
                monomials
                    .iter()
                    .map(|m| index.get(&m.plus_unit(l)).copied())
                    .collect()
            })
            .collect();
        MonomialBasis {
            n,
            max_order,
            monomials,
            degree,
            index,
            prefix,
            mul,
            up,
        }
    }

    /// Shared basis for `(n, max_order)`; built once per process.
    pub fn shared(n: usize, max_order: usize) -> Arc<MonomialBasis> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((n, max_order))
            .or_insert_with(|| Arc::new(MonomialBasis::build(n, max_order)))
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    fn len_for(&self, order: i32) -> usize {
        if order < 0 {
            0
        } else {
            self.prefix[order as usize]
        }
    }
}

impl fmt::Debug for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonomialBasis(n={}, order={})", self.n, self.max_order)
    }
}

#[derive(Clone)]
pub struct Series<S> {
    basis: Arc<MonomialBasis>,
    order: i32,
    coeffs: Vec<S>,
}

impl<S: fmt::Debug> fmt::Debug for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series(order={}, {:?})", self.order, self.coeffs)
    }
}

impl<S: Scalar> Series<S> {
    pub fn constant(basis: &Arc<MonomialBasis>, c: S) -> Self {
        let order = basis.max_order as i32;
        let mut coeffs = vec![S::zero(); basis.len_for(order)];
        coeffs[0] = c;
        Series {
            basis: basis.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `x_k` expanded at a point with `x_k = value`.
    pub fn variable(basis: &Arc<MonomialBasis>, k: usize, value: S) -> Self {
        let mut s = Self::constant(basis, value);
        if basis.max_order >= 1 {
            let idx = basis.index[&MultiIndex::unit(basis.n, k)];
            s.coeffs[idx] = S::one();
        }
        s
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    /// Value at the expansion point, if still known.
    pub fn try_value(&self) -> Option<&S> {
        self.coeffs.first()
    }

    /// Value at the expansion point.
    ///
    /// # Panics
    /// When the truncation order has been exhausted; callers size the order.
    pub fn value(&self) -> &S {
        self.try_value()
            .expect("series truncation order exhausted; increase the working order")
    }

    /// Normalized Taylor coefficient of the monomial `m`.
    pub fn coefficient(&self, m: &MultiIndex) -> Option<&S> {
        let idx = *self.basis.index.get(m)?;
        self.coeffs.get(idx)
    }

    /// Derivative `(f)'_M` at the point: `M! · c_M`.
    pub fn derivative_value(&self, m: &MultiIndex) -> Option<S> {
        let c = self.coefficient(m)?;
        Some(S::from_int(m.factorial() as i64).times(c))
    }

    fn with_order(&self, order: i32) -> Self {
        let len = self.basis.len_for(order);
        Series {
            basis: self.basis.clone(),
            order,
            coeffs: self.coeffs[..len].to_vec(),
        }
    }

    fn without_constant(&self) -> Self {
        let mut s = self.clone();
        if let Some(c) = s.coeffs.first_mut() {
            *c = S::zero();
        }
        s
    }

    fn scaled(&self, c: &S) -> Self {
        Series {
            basis: self.basis.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|x| x.times(c)).collect(),
        }
    }

    /// Multiplicative inverse; `None` when the constant term vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let c0 = self.try_value()?;
        let inv0 = c0.recip()?;
        let v = self.without_constant().scaled(&inv0.negated());
        let mut term = self.one_like().with_order(self.order);
        let mut sum = term.clone();
        for _ in 0..self.order.max(0) {
            term = term.times(&v);
            sum = sum.plus(&term);
        }
        Some(sum.scaled(&inv0))
    }

    pub fn powi(&self, k: i32) -> Option<Self> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut result = self.one_like();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                result = result.times(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.times(&sq);
            }
        }
        Some(result)
    }

    /// `exp(c + u) = e^c Σ u^k / k!`; `None` if `e^c` leaves the field.
    pub fn exp(&self) -> Option<Self> {
        let e0 = self.try_value()?.exp()?;
        let u = self.without_constant();
        let mut term = self.one_like().with_order(self.order);
        let mut sum = term.clone();
        for k in 1..=self.order.max(0) {
            let inv_k = S::from_int(k as i64).recip()?;
            term = term.times(&u).scaled(&inv_k);
            sum = sum.plus(&term);
        }
        Some(sum.scaled(&e0))
    }

    /// Expands `e` at `point` up to the basis order.
    pub fn from_expr(e: &Expr, point: &[S], basis: &Arc<MonomialBasis>) -> Result<Self, ExprError> {
        let mut memo = HashMap::new();
        Self::expand(e, point, basis, &mut memo)
    }

    fn expand(
        e: &Expr,
        point: &[S],
        basis: &Arc<MonomialBasis>,
        memo: &mut HashMap<*const Node, Series<S>>,
    ) -> Result<Self, ExprError> {
        let key: *const Node = e.node();
        if let Some(s) = memo.get(&key) {
            return Ok(s.clone());
        }
        let s = match e.node() {
            Node::Const(q) => Series::constant(basis, S::from_exact(q)),
            Node::Var(k) => {
                let v = point.get(*k).cloned().ok_or(ExprError::DimensionMismatch {
                    var: *k,
                    dim: point.len(),
                })?;
                Series::variable(basis, *k, v)
            }
            Node::Param(p) => return Err(ExprError::UnboundParameter(p.clone())),
            Node::Add(ts) => {
                let mut acc = Series::constant(basis, S::zero());
                for t in ts {
                    acc = acc.plus(&Self::expand(t, point, basis, memo)?);
                }
                acc
            }
            Node::Mul(fs) => {
                let mut acc = Series::constant(basis, S::one());
                for f in fs {
                    acc = acc.times(&Self::expand(f, point, basis, memo)?);
                }
                acc
            }
            Node::Div(a, b) => {
                let den = Self::expand(b, point, basis, memo)?;
                let inv = den.inverse().ok_or(ExprError::PoleAtPoint)?;
                Self::expand(a, point, basis, memo)?.times(&inv)
            }
            Node::Pow(a, k) => Self::expand(a, point, basis, memo)?
                .powi(*k)
                .ok_or(ExprError::PoleAtPoint)?,
            Node::Exp(a) => Self::expand(a, point, basis, memo)?
                .exp()
                .ok_or(ExprError::NonExact)?,
        };
        memo.insert(key, s.clone());
        Ok(s)
    }
}

impl<S: Scalar> Arith for Series<S> {
    fn zero_like(&self) -> Self {
        Series::constant(&self.basis, S::zero())
    }

    fn one_like(&self) -> Self {
        Series::constant(&self.basis, S::one())
    }

    fn plus(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let len = self.basis.len_for(order);
        let coeffs = (0..len).map(|i| self.coeffs[i].plus(&o.coeffs[i])).collect();
        Series {
            basis: self.basis.clone(),
            order,
            coeffs,
        }
    }

    fn minus(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let len = self.basis.len_for(order);
        let coeffs = (0..len).map(|i| self.coeffs[i].minus(&o.coeffs[i])).collect();
        Series {
            basis: self.basis.clone(),
            order,
            coeffs,
        }
    }

    fn times(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let basis = &self.basis;
        let len = basis.len_for(order);
        let mut coeffs = vec![S::zero(); len];
        for i in 0..len {
            let a = &self.coeffs[i];
            if a.is_zero() {
                continue;
            }
            let room = order as usize - basis.degree[i];
            let targets = &basis.mul[i];
            for (j, b) in o.coeffs[..basis.prefix[room]].iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let t = targets[j];
                coeffs[t] = coeffs[t].plus(&a.times(b));
            }
        }
        Series {
            basis: basis.clone(),
            order,
            coeffs,
        }
    }

    fn negated(&self) -> Self {
        Series {
            basis: self.basis.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(Arith::negated).collect(),
        }
    }

    fn recip(&self) -> Option<Self> {
        self.inverse()
    }
}

impl<S: Scalar> Differential for Series<S> {
    fn derivative(&self, var: usize) -> Self {
        let order = self.order - 1;
        let basis = &self.basis;
        let len = basis.len_for(order);
        let coeffs = (0..len)
            .map(|t| {
                let src = basis.up[var][t].expect("monomial within basis");
                let factor = basis.monomials[t].get(var) as i64 + 1;
                S::from_int(factor).times(&self.coeffs[src])
            })
            .collect();
        Series {
            basis: basis.clone(),
            order,
            coeffs,
        }
    }

    fn constant_like(&self, q: &CRational) -> Self {
        Series::constant(&self.basis, S::from_exact(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use num_complex::Complex64;

    fn q(a: i64, b: i64) -> CRational {
        CRational::from_frac(a, b)
    }

    #[test]
    fn expansion_matches_symbolic_derivatives() {
        let e = parse("z/(z-y) + x^3*y - 2/(1+x*z)", 3).unwrap();
        let p = vec![q(1, 2), q(-3, 1), q(2, 7)];
        let basis = MonomialBasis::shared(3, 4);
        let s = Series::from_expr(&e, &p, &basis).unwrap();
        for h in 0..=4u32 {
            for m in enumerate_partitions(3, h) {
                let symbolic = e.derivative_multi(m.exponents()).eval(&p).unwrap();
                assert_eq!(s.derivative_value(&m).unwrap(), symbolic, "{m}");
            }
        }
    }

    #[test]
    fn derivative_lowers_order() {
        let e = parse("x*y^2", 2).unwrap();
        let basis = MonomialBasis::shared(2, 3);
        let s = Series::from_expr(&e, &[q(2, 1), q(3, 1)], &basis).unwrap();
        let d = s.derivative(1).derivative(1);
        assert_eq!(d.order(), 1);
        assert_eq!(*d.value(), CRational::from_int(4));
        let dddd = d.derivative(0).derivative(0);
        assert!(dddd.try_value().is_none());
    }

    #[test]
    fn pole_and_exp() {
        let basis = MonomialBasis::shared(2, 2);
        let e = parse("1/(x-y)", 2).unwrap();
        assert!(matches!(
            Series::from_expr(&e, &[q(1, 1), q(1, 1)], &basis),
            Err(ExprError::PoleAtPoint)
        ));
        let e = parse("exp(2*y)", 2).unwrap();
        let p = [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)];
        let s = Series::from_expr(&e, &p, &basis).unwrap();
        let m = MultiIndex::new(vec![0, 2]);
        let expected = 4.0 * 1f64.exp();
        assert!((s.derivative_value(&m).unwrap().re - expected).abs() < 1e-12);
        assert!(matches!(
            Series::from_expr(&e, &[q(0, 1), q(1, 1)], &basis),
            Err(ExprError::NonExact)
        ));
    }
}
