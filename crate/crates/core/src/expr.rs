//! Symbolic scalar functions of the coordinates.
//!
//! The node set is deliberately small: rational constants, coordinates,
//! named parameters, sums, products, quotients, integer powers and `exp`.
//! Differentiation is closed on it; `simplify` folds constants, flattens,
//! and collects like terms and factors, but promises no canonical form.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::diff::Differential;
use crate::scalar::{Arith, CRational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("pole at evaluation point")]
    PoleAtPoint,
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("variable x{var} outside a {dim}-dimensional point", var = .var + 1)]
    DimensionMismatch { var: usize, dim: usize },
    #[error("expression leaves exact arithmetic (exp of a nonzero value)")]
    NonExact,
}

/// Immutable, cheaply clonable expression.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Const(CRational),
    /// Zero-based coordinate index.
    Var(usize),
    Param(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Exp(Expr),
}

/// A point of the coordinate domain, exact or floating.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Exact(Vec<CRational>),
    Float(Vec<Complex64>),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Exact(v) => v.len(),
            Point::Float(v) => v.len(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Point::Exact(_))
    }

    pub fn to_float(&self) -> Vec<Complex64> {
        match self {
            Point::Exact(v) => v.iter().map(CRational::to_complex).collect(),
            Point::Float(v) => v.clone(),
        }
    }

    pub fn coords_as_strings(&self) -> Vec<String> {
        match self {
            Point::Exact(v) => v.iter().map(ToString::to_string).collect(),
            Point::Float(v) => v.iter().map(|z| format_complex(*z)).collect(),
        }
    }
}

pub(crate) fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:e}", z.re)
    } else {
        format!("{:e}{:+e}*I", z.re, z.im)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords_as_strings().serialize(s)
    }
}

/// Result of evaluating at a [`Point`].
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(CRational),
    Float(Complex64),
}

impl Value {
    pub fn to_complex(&self) -> Complex64 {
        match self {
            Value::Exact(q) => q.to_complex(),
            Value::Float(z) => *z,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(q) => q.is_zero(),
            Value::Float(z) => z.norm() == 0.0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(q) => write!(f, "{q}"),
            Value::Float(z) => f.write_str(&format_complex(*z)),
        }
    }
}

impl Expr {
    fn wrap(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(q: CRational) -> Self {
        Self::wrap(Node::Const(q))
    }

    pub fn int(v: i64) -> Self {
        Self::constant(CRational::from_int(v))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Self::constant(CRational::from_frac(num, den))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    /// Coordinate `x_{k+1}` (zero-based `k`).
    pub fn var(k: usize) -> Self {
        Self::wrap(Node::Var(k))
    }

    pub fn param(name: impl Into<String>) -> Self {
        Self::wrap(Node::Param(name.into()))
    }

    pub fn as_const(&self) -> Option<&CRational> {
        match self.node() {
            Node::Const(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(CRational::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(CRational::is_one)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Expr::constant(a + b);
        }
        let mut terms = Vec::new();
        for e in [self, other] {
            match e.node() {
                Node::Add(ts) => terms.extend(ts.iter().cloned()),
                _ => terms.push(e.clone()),
            }
        }
        Self::wrap(Node::Add(terms))
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(&t))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Expr::constant(a * b);
        }
        let mut factors = Vec::new();
        for e in [self, other] {
            match e.node() {
                Node::Mul(fs) => factors.extend(fs.iter().cloned()),
                _ => factors.push(e.clone()),
            }
        }
        Self::wrap(Node::Mul(factors))
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        factors.into_iter().fold(Expr::one(), |acc, f| acc.mul(&f))
    }

    pub fn neg(&self) -> Expr {
        Expr::int(-1).mul(self)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    /// Quotient. Constant folding is skipped when the divisor is zero so the
    /// pole survives to evaluation time.
    pub fn div(&self, other: &Expr) -> Expr {
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            if let Some(inv) = b.recip() {
                return Expr::constant(a * &inv);
            }
        }
        if self.is_zero() && !other.is_zero() {
            return Expr::zero();
        }
        Self::wrap(Node::Div(self.clone(), other.clone()))
    }

    pub fn powi(&self, k: i32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        if k == 1 {
            return self.clone();
        }
        if let Some(q) = self.as_const() {
            if let Some(v) = q.powi(k) {
                return Expr::constant(v);
            }
        }
        if let Node::Pow(base, j) = self.node() {
            if let Some(jk) = j.checked_mul(k) {
                return base.powi(jk);
            }
        }
        Self::wrap(Node::Pow(self.clone(), k))
    }

    pub fn exp(&self) -> Expr {
        if self.is_zero() {
            return Expr::one();
        }
        Self::wrap(Node::Exp(self.clone()))
    }

    /// Exact partial derivative with respect to zero-based coordinate `k`.
    pub fn differentiate(&self, k: usize) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(k, &mut memo)
    }

    fn diff_memo(&self, k: usize, memo: &mut HashMap<*const Node, Expr>) -> Expr {
        let key = Arc::as_ptr(&self.0);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Const(_) | Node::Param(_) => Expr::zero(),
            Node::Var(j) => {
                if *j == k {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(ts) => Expr::sum(ts.iter().map(|t| t.diff_memo(k, memo))),
            Node::Mul(fs) => {
                let ds: Vec<Expr> = fs.iter().map(|f| f.diff_memo(k, memo)).collect();
                let mut terms = Vec::new();
                for (i, di) in ds.iter().enumerate() {
                    if di.is_zero() {
                        continue;
                    }
                    let mut term = di.clone();
                    for (j, f) in fs.iter().enumerate() {
                        if j != i {
                            term = term.mul(f);
                        }
                    }
                    terms.push(term);
                }
                Expr::sum(terms)
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(k, memo);
                let db = b.diff_memo(k, memo);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                }
            }
            Node::Pow(a, j) => {
                let da = a.diff_memo(k, memo);
                Expr::int(*j as i64).mul(&a.powi(j - 1)).mul(&da)
            }
            Node::Exp(a) => {
                let da = a.diff_memo(k, memo);
                self.mul(&da)
            }
        };
        memo.insert(key, out.clone());
        out
    }

    /// `(e)'_L` for an exponent vector `L`.
    pub fn derivative_multi(&self, exponents: &[u32]) -> Expr {
        let mut e = self.clone();
        for (k, &times) in exponents.iter().enumerate() {
            for _ in 0..times {
                e = e.differentiate(k);
            }
        }
        e
    }

    /// Evaluates over any scalar field.
    pub fn eval<S: Scalar>(&self, point: &[S]) -> Result<S, ExprError> {
        let mut memo = HashMap::new();
        self.eval_memo(point, &mut memo)
    }

    fn eval_memo<S: Scalar>(
        &self,
        point: &[S],
        memo: &mut HashMap<*const Node, S>,
    ) -> Result<S, ExprError> {
        let key = Arc::as_ptr(&self.0);
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let v = match self.node() {
            Node::Const(q) => S::from_exact(q),
            Node::Var(k) => point
                .get(*k)
                .cloned()
                .ok_or(ExprError::DimensionMismatch {
                    var: *k,
                    dim: point.len(),
                })?,
            Node::Param(name) => return Err(ExprError::UnboundParameter(name.clone())),
            Node::Add(ts) => {
                let mut acc = S::zero();
                for t in ts {
                    acc = acc.plus(&t.eval_memo(point, memo)?);
                }
                acc
            }
            Node::Mul(fs) => {
                let mut acc = S::one();
                for f in fs {
                    acc = acc.times(&f.eval_memo(point, memo)?);
                }
                acc
            }
            Node::Div(a, b) => {
                let den = b.eval_memo(point, memo)?;
                let inv = den.recip().ok_or(ExprError::PoleAtPoint)?;
                a.eval_memo(point, memo)?.times(&inv)
            }
            Node::Pow(a, k) => {
                let base = a.eval_memo(point, memo)?;
                pow_scalar(&base, *k).ok_or(ExprError::PoleAtPoint)?
            }
            Node::Exp(a) => a.eval_memo(point, memo)?.exp().ok_or(ExprError::NonExact)?,
        };
        memo.insert(key, v.clone());
        Ok(v)
    }

    /// Exact on exact points without `exp`; floating otherwise.
    pub fn evaluate(&self, p: &Point) -> Result<Value, ExprError> {
        match p {
            Point::Exact(v) if !self.contains_exp() => self.eval(v).map(Value::Exact),
            _ => self.eval(&p.to_float()).map(Value::Float),
        }
    }

    pub fn contains_exp(&self) -> bool {
        self.any_node(&mut |n| matches!(n, Node::Exp(_)))
    }

    fn any_node(&self, pred: &mut impl FnMut(&Node) -> bool) -> bool {
        if pred(self.node()) {
            return true;
        }
        match self.node() {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => false,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().any(|x| x.any_node(pred)),
            Node::Div(a, b) => a.any_node(pred) || b.any_node(pred),
            Node::Pow(a, _) | Node::Exp(a) => a.any_node(pred),
        }
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.any_node(&mut |n| {
            if let Node::Param(p) = n {
                out.insert(p.clone());
            }
            false
        });
        out
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut best = None;
        self.any_node(&mut |n| {
            if let Node::Var(k) = n {
                best = Some(best.map_or(*k, |b: usize| b.max(*k)));
            }
            false
        });
        best
    }

    /// Rebuilds the tree bottom-up through `f` applied at leaves.
    fn map_leaves(&self, f: &impl Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self.node()) {
            return e;
        }
        match self.node() {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => self.clone(),
            Node::Add(ts) => Expr::sum(ts.iter().map(|t| t.map_leaves(f))),
            Node::Mul(fs) => Expr::product(fs.iter().map(|t| t.map_leaves(f))),
            Node::Div(a, b) => a.map_leaves(f).div(&b.map_leaves(f)),
            Node::Pow(a, k) => a.map_leaves(f).powi(*k),
            Node::Exp(a) => a.map_leaves(f).exp(),
        }
    }

    /// Substitutes bound parameter values.
    pub fn bind(&self, params: &BTreeMap<String, CRational>) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Param(p) => params.get(p).cloned().map(Expr::constant),
            _ => None,
        })
    }

    /// Replaces every coordinate `x_k` by `images[k]`.
    pub fn substitute_vars(&self, images: &[Expr]) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Var(k) => Some(images[*k].clone()),
            _ => None,
        })
    }

    /// Semantics-preserving cleanup, iterated to a fixed point.
    pub fn simplify(&self) -> Expr {
        let mut cur = self.clone();
        for _ in 0..16 {
            let next = simplify_once(&cur);
            if next == cur {
                return next;
            }
            cur = next;
        }
        cur
    }

    /// Renders with `x, y, z` when `n ≤ 3`, `x1..xn` otherwise.
    pub fn display_with(&self, n: usize) -> String {
        let mut s = String::new();
        write_expr(self, n, 0, &mut s);
        s
    }
}

fn pow_scalar<S: Scalar>(base: &S, k: i32) -> Option<S> {
    let b = if k < 0 { base.recip()? } else { base.clone() };
    let mut e = k.unsigned_abs();
    let mut result = S::one();
    let mut sq = b;
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

// Splits a term into `coefficient × rest`.
fn split_coefficient(e: &Expr) -> (CRational, Expr) {
    match e.node() {
        Node::Const(q) => (q.clone(), Expr::one()),
        Node::Mul(fs) => {
            let mut coef = CRational::one();
            let mut rest = Vec::new();
            for f in fs {
                match f.as_const() {
                    Some(q) => coef = &coef * q,
                    None => rest.push(f.clone()),
                }
            }
            let rest = match rest.len() {
                0 => Expr::one(),
                1 => rest.pop().unwrap(),
                _ => Expr::wrap(Node::Mul(rest)),
            };
            (coef, rest)
        }
        _ => (CRational::one(), e.clone()),
    }
}

fn simplify_once(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(_) | Node::Var(_) | Node::Param(_) => e.clone(),
        Node::Add(ts) => {
            let mut flat = Vec::new();
            for t in ts {
                let s = simplify_once(t);
                match s.node() {
                    Node::Add(inner) => flat.extend(inner.iter().cloned()),
                    _ => flat.push(s),
                }
            }
            collect_sum(flat)
        }
        Node::Mul(fs) => {
            let parts: Vec<Expr> = fs.iter().map(simplify_once).collect();
            collect_product(parts)
        }
        Node::Div(a, b) => {
            let a = simplify_once(a);
            let b = simplify_once(b);
            if b.is_zero() {
                return a.div(&b);
            }
            collect_product(vec![a, b.powi(-1)])
        }
        Node::Pow(a, k) => {
            let a = simplify_once(a);
            match a.node() {
                Node::Mul(fs) => collect_product(fs.iter().map(|f| f.powi(*k)).collect()),
                _ => {
                    if *k < 0 && a.is_zero() {
                        Expr::wrap(Node::Pow(a, *k))
                    } else {
                        a.powi(*k)
                    }
                }
            }
        }
        Node::Exp(a) => simplify_once(a).exp(),
    }
}

fn collect_sum(terms: Vec<Expr>) -> Expr {
    let mut constant = CRational::zero();
    let mut buckets: BTreeMap<Expr, CRational> = BTreeMap::new();
    let mut push = |coef: CRational, rest: Expr, constant: &mut CRational| {
        if rest.is_one() {
            *constant = &*constant + &coef;
        } else {
            let slot = buckets.entry(rest).or_insert_with(CRational::zero);
            *slot = &*slot + &coef;
        }
    };
    for t in terms {
        let (coef, rest) = split_coefficient(&t);
        // Distribute a constant factor over an inner sum.
        if let Node::Add(inner) = rest.node() {
            for it in inner {
                let (c2, r2) = split_coefficient(it);
                push(&coef * &c2, r2, &mut constant);
            }
            continue;
        }
        push(coef, rest, &mut constant);
    }
    let mut out = Vec::new();
    if !constant.is_zero() {
        out.push(Expr::constant(constant));
    }
    for (rest, coef) in buckets {
        if coef.is_zero() {
            continue;
        }
        if coef.is_one() {
            out.push(rest);
        } else {
            let mut fs = vec![Expr::constant(coef)];
            match rest.node() {
                Node::Mul(inner) => fs.extend(inner.iter().cloned()),
                _ => fs.push(rest),
            }
            out.push(Expr::wrap(Node::Mul(fs)));
        }
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::wrap(Node::Add(out)),
    }
}

fn collect_product(factors: Vec<Expr>) -> Expr {
    let mut coef = CRational::one();
    let mut powers: BTreeMap<Expr, i32> = BTreeMap::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Const(q) => coef = &coef * q,
            Node::Mul(inner) => stack.extend(inner.iter().cloned()),
            Node::Div(a, b) => {
                stack.push(a.clone());
                stack.push(b.powi(-1));
            }
            Node::Pow(base, k) => {
                if base.as_const().is_some() {
                    // Constant base with an exponent that could not fold: a pole.
                    *powers.entry(f.clone()).or_insert(0) += 1;
                } else {
                    *powers.entry(base.clone()).or_insert(0) += k;
                }
            }
            _ => *powers.entry(f.clone()).or_insert(0) += 1,
        }
    }
    if coef.is_zero() {
        return Expr::zero();
    }
    let mut out = Vec::new();
    if !coef.is_one() {
        out.push(Expr::constant(coef));
    }
    for (base, k) in powers {
        match k {
            0 => {}
            1 => out.push(base),
            _ => out.push(Expr::wrap(Node::Pow(base, k))),
        }
    }
    match out.len() {
        0 => Expr::one(),
        1 => out.pop().unwrap(),
        _ => Expr::wrap(Node::Mul(out)),
    }
}

fn var_name(k: usize, n: usize) -> String {
    if n <= 3 {
        ["x", "y", "z"][k].to_string()
    } else {
        format!("x{}", k + 1)
    }
}

// Precedence: 0 sum, 1 product, 2 unary, 3 power/atom.
fn write_expr(e: &Expr, n: usize, ctx: u8, out: &mut String) {
    let paren = |prec: u8, out: &mut String, body: &dyn Fn(&mut String)| {
        if prec < ctx {
            out.push('(');
            body(out);
            out.push(')');
        } else {
            body(out);
        }
    };
    match e.node() {
        Node::Const(q) => {
            let s = q.to_string();
            let simple = q.is_real() && q.re.is_integer() && !s.starts_with('-');
            if simple {
                out.push_str(&s);
            } else {
                paren(1, out, &|o: &mut String| {
                    if q.is_real() {
                        o.push_str(&s)
                    } else {
                        o.push('(');
                        o.push_str(&s);
                        o.push(')');
                    }
                });
            }
        }
        Node::Var(k) => out.push_str(&var_name(*k, n.max(k + 1))),
        Node::Param(p) => out.push_str(p),
        Node::Add(ts) => paren(0, out, &|o: &mut String| {
            for (i, t) in ts.iter().enumerate() {
                let (coef, rest) = split_coefficient(t);
                let negative = coef.is_real() && coef.re < num_rational::BigRational::from_integer(0.into());
                if i > 0 {
                    o.push_str(if negative { " - " } else { " + " });
                } else if negative {
                    o.push('-');
                }
                let shown = if negative {
                    let c = -&coef;
                    if rest.is_one() {
                        Expr::constant(c)
                    } else if c.is_one() {
                        rest
                    } else {
                        Expr::wrap(Node::Mul(vec![Expr::constant(c), rest]))
                    }
                } else {
                    t.clone()
                };
                write_expr(&shown, n, if negative { 2 } else { 1 }, o);
            }
        }),
        Node::Mul(fs) => paren(1, out, &|o: &mut String| {
            for (i, f) in fs.iter().enumerate() {
                if i > 0 {
                    o.push('*');
                }
                write_expr(f, n, 2, o);
            }
        }),
        Node::Div(a, b) => paren(1, out, &|o: &mut String| {
            write_expr(a, n, 1, o);
            o.push('/');
            write_expr(b, n, 3, o);
        }),
        Node::Pow(a, k) => paren(3, out, &|o: &mut String| {
            write_expr(a, n, 4, o);
            if *k < 0 {
                o.push_str(&format!("^({k})"));
            } else {
                o.push_str(&format!("^{k}"));
            }
        }),
        Node::Exp(a) => {
            out.push_str("exp(");
            write_expr(a, n, 0, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.max_var().map_or(0, |k| k + 1).max(4);
        f.write_str(&self.display_with(n))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Arith for Expr {
    fn zero_like(&self) -> Self {
        Expr::zero()
    }
    fn one_like(&self) -> Self {
        Expr::one()
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn minus(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Expr::one().div(self))
        }
    }
}

impl Differential for Expr {
    fn tidy(self) -> Self {
        self.simplify()
    }
    fn derivative(&self, var: usize) -> Self {
        self.differentiate(var)
    }
    fn constant_like(&self, q: &CRational) -> Self {
        Expr::constant(q.clone())
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// One-based column in the expression text.
    pub column: usize,
    pub message: String,
}

/// Parses infix text: `+ - * / ^`, `exp(...)`, `x1..xn` (or `x, y, z`
/// when `n ≤ 3`), integers, `I` for the imaginary unit; any other
/// identifier is a named parameter.
pub fn parse(text: &str, n: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        n,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn error(&self, message: String) -> ParseError {
        ParseError {
            column: self.pos + 1,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                acc = acc.div(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let k = self.exponent()?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let parens = self.eat('(');
        let neg = self.eat('-');
        if !neg {
            self.eat('+');
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent".into()));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let mut k: i32 = digits
            .parse()
            .map_err(|_| self.error(format!("exponent `{digits}` out of range")))?;
        if neg {
            k = -k;
        }
        if parens && !self.eat(')') {
            return Err(self.error("expected `)`".into()));
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression".into())),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`".into()));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                let q: CRational = digits.parse().map_err(|_| ParseError {
                    column: start + 1,
                    message: format!("bad number `{digits}`"),
                })?;
                Ok(Expr::constant(q))
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
                {
                    self.pos += 1;
                }
                let ident: String = self.chars[start..self.pos].iter().collect();
                self.identifier(ident, start)
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn identifier(&mut self, ident: String, start: usize) -> Result<Expr, ParseError> {
        let at = |message: String| ParseError {
            column: start + 1,
            message,
        };
        if ident == "exp" {
            if !self.eat('(') {
                return Err(self.error("expected `(` after exp".into()));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected `)`".into()));
            }
            return Ok(arg.exp());
        }
        if ident == "I" {
            return Ok(Expr::constant(CRational::imag_unit()));
        }
        let alias = ["x", "y", "z"].iter().position(|a| *a == ident);
        if let Some(k) = alias {
            if self.n <= 3 {
                if k >= self.n {
                    return Err(at(format!("variable `{ident}` needs n ≥ {}", k + 1)));
                }
                return Ok(Expr::var(k));
            }
        }
        if let Some(rest) = ident.strip_prefix('x') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                let k: usize = rest.parse().map_err(|_| at(format!("bad variable `{ident}`")))?;
                if k == 0 || k > self.n {
                    return Err(at(format!("variable `{ident}` outside 1..={}", self.n)));
                }
                return Ok(Expr::var(k - 1));
            }
        }
        Ok(Expr::param(ident))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(num: i64, den: i64) -> CRational {
        CRational::from_frac(num, den)
    }

    fn exact_point(v: &[(i64, i64)]) -> Vec<CRational> {
        v.iter().map(|&(a, b)| q(a, b)).collect()
    }

    #[test]
    fn parse_basic() {
        let e = parse("z/(z-y)", 3).unwrap();
        let v = e.eval(&exact_point(&[(1, 1), (2, 1), (3, 1)])).unwrap();
        assert_eq!(v, CRational::from_int(3));
        let e = parse("-x^2 + 3/4*x1", 3).unwrap();
        let v = e.eval(&exact_point(&[(2, 1), (0, 1), (0, 1)])).unwrap();
        assert_eq!(v, q(-4, 1) + q(3, 2));
        assert_eq!(parse("x2^(-2)", 4).unwrap().eval(&exact_point(&[(1, 1), (2, 1), (1, 1), (1, 1)])).unwrap(), q(1, 4));
    }

    #[test]
    fn parse_errors_carry_columns() {
        let err = parse("x + * y", 3).unwrap_err();
        assert_eq!(err.column, 5);
        let err = parse("x4", 3).unwrap_err();
        assert_eq!(err.column, 1);
        assert!(parse("z", 2).is_err());
        assert!(parse("(x+y", 2).is_err());
        assert!(parse("x^y", 2).is_err());
    }

    #[test]
    fn parameters_and_binding() {
        let e = parse("a*x + b^2", 2).unwrap();
        assert_eq!(
            e.parameters().into_iter().collect::<Vec<_>>(),
            vec!["a".to_string(), "b".to_string()]
        );
        assert_eq!(
            e.eval(&[CRational::one(), CRational::one()]),
            Err(ExprError::UnboundParameter("a".into()))
        );
        let mut bind = BTreeMap::new();
        bind.insert("a".to_string(), CRational::from_int(2));
        bind.insert("b".to_string(), CRational::from_int(3));
        let v = e.bind(&bind).eval(&[CRational::from_int(5), CRational::one()]).unwrap();
        assert_eq!(v, CRational::from_int(19));
    }

    #[test]
    fn pole_detection() {
        let e = parse("1/(z-y)", 3).unwrap();
        let p = exact_point(&[(0, 1), (2, 1), (2, 1)]);
        assert_eq!(e.eval(&p), Err(ExprError::PoleAtPoint));
        let e = parse("(z-y)^(-3)", 3).unwrap();
        assert_eq!(e.eval(&p), Err(ExprError::PoleAtPoint));
    }

    #[test]
    fn derivative_examples() {
        let e = parse("z/(z-y)", 3).unwrap();
        let d = e.differentiate(1);
        let expected = parse("z/(z-y)^2", 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let p: Vec<Complex64> = (0..3).map(|_| Complex64::new(rng.random_range(-3.0..3.0), 0.0)).collect();
            let (Ok(a), Ok(b)) = (d.eval(&p), expected.eval(&p)) else { continue };
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
            // Central finite difference oracle.
            let h = 1e-6;
            let mut pp = p.clone();
            pp[1] += h;
            let mut pm = p.clone();
            pm[1] -= h;
            let fd = (e.eval(&pp).unwrap() - e.eval(&pm).unwrap()) / (2.0 * h);
            assert!((fd - a).norm() <= 1e-7 * a.norm().max(1.0));
        }
        assert!(Expr::int(7).differentiate(0).is_zero());
        let ex = parse("exp(D*y)", 3).unwrap();
        let dex = ex.differentiate(1).simplify();
        let expected = parse("D*exp(D*y)", 3).unwrap().simplify();
        assert_eq!(dex, expected);
    }

    #[test]
    fn simplify_examples() {
        let e = parse("0*x + y", 2).unwrap();
        assert_eq!(e.simplify(), Expr::var(1));
        let e = Expr::wrap(Node::Pow(Expr::var(0), 1));
        assert_eq!(e.simplify(), Expr::var(0));
        let e = parse("x*y - y*x + 2*(x+1) - 2*x", 2).unwrap();
        assert_eq!(e.simplify(), Expr::int(2));
        let e = parse("x/x", 2).unwrap();
        assert_eq!(e.simplify(), Expr::one());
    }

    #[test]
    fn exp_forces_float_evaluation() {
        let e = parse("exp(y)", 2).unwrap();
        let v = e.evaluate(&Point::Exact(vec![CRational::zero(), CRational::one()])).unwrap();
        match v {
            Value::Float(z) => assert!((z.re - std::f64::consts::E).abs() < 1e-15),
            Value::Exact(_) => panic!("exp must evaluate in floating mode"),
        }
        assert_eq!(e.eval(&[CRational::zero(), CRational::one()]), Err(ExprError::NonExact));
    }

    #[test]
    fn display_roundtrip() {
        for src in ["z/(z-y)", "-x^2 + 3/4*y", "exp(2*y)*(h - y)", "(1-z)*(y-x)/((1-x)*(y-z))", "x^(-2) - 1/2"] {
            let e = parse(src, 3).unwrap();
            let shown = e.display_with(3);
            let back = parse(&shown, 3).unwrap();
            let p: Vec<Complex64> = vec![Complex64::new(0.3, 0.0), Complex64::new(1.7, 0.0), Complex64::new(-0.9, 0.0)];
            let mut bind = BTreeMap::new();
            bind.insert("h".to_string(), CRational::from_int(3));
            let a = e.bind(&bind).eval(&p).unwrap();
            let b = back.bind(&bind).eval(&p).unwrap();
            assert!((a - b).norm() < 1e-12, "{src} -> {shown}");
        }
    }
}
