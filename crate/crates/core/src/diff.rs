//! Rings with partial derivatives.

use std::sync::Arc;

use num_complex::Complex64;

use crate::expr::{Expr, ExprError};
use crate::scalar::{Arith, CRational, Scalar};
use crate::series::{MonomialBasis, Series};

/// A commutative ring of functions of the coordinates, closed under `∂/∂x_k`.
///
/// Implemented symbolically by [`crate::expr::Expr`] and pointwise by
/// [`crate::series::Series`]; the reduction and connection code is written
/// once against this trait.
pub trait Differential: Arith {
    fn derivative(&self, var: usize) -> Self;
    fn constant_like(&self, q: &CRational) -> Self;
    /// Optional normalization after a batch of operations.
    fn tidy(self) -> Self {
        self
    }
}

/// Where functions of the coordinates live during a computation: either
/// symbolically, or as truncated Taylor series at one point.
pub trait FunctionContext: Sync {
    type R: Differential + Send + Sync;

    fn n(&self) -> usize;
    fn lift(&self, e: &Expr) -> Result<Self::R, ExprError>;
    /// Floating value at the working point (the base point for symbolic
    /// contexts); `None` when unknown. Used for pivot decisions only.
    fn value(&self, r: &Self::R) -> Option<Complex64>;
}

/// Series expansions at `point` up to a fixed order.
pub struct SeriesContext<S: Scalar> {
    point: Vec<S>,
    basis: Arc<MonomialBasis>,
}

impl<S: Scalar> SeriesContext<S> {
    pub fn new(point: Vec<S>, order: usize) -> Self {
        let basis = MonomialBasis::shared(point.len(), order);
        SeriesContext { point, basis }
    }

    pub fn point(&self) -> &[S] {
        &self.point
    }
}

impl<S: Scalar> FunctionContext for SeriesContext<S> {
    type R = Series<S>;

    fn n(&self) -> usize {
        self.point.len()
    }

    fn lift(&self, e: &Expr) -> Result<Series<S>, ExprError> {
        Series::from_expr(e, &self.point, &self.basis)
    }

    fn value(&self, r: &Series<S>) -> Option<Complex64> {
        r.try_value().map(Scalar::to_complex)
    }
}

/// Exact symbolic computation; pivots are chosen by magnitude at `base`.
pub struct SymbolicContext {
    base: Vec<Complex64>,
}

impl SymbolicContext {
    pub fn new(base: Vec<Complex64>) -> Self {
        SymbolicContext { base }
    }
}

impl FunctionContext for SymbolicContext {
    type R = Expr;

    fn n(&self) -> usize {
        self.base.len()
    }

    fn lift(&self, e: &Expr) -> Result<Expr, ExprError> {
        Ok(e.clone())
    }

    fn value(&self, r: &Expr) -> Option<Complex64> {
        r.eval(&self.base).ok()
    }
}
