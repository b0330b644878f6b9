//! The adapted connection on `E = R_{k₀−3}` when `d = c(n,k₀)`, and its
//! curvature.
//!
//! A frame of `E` is fixed by its free jet coordinates: at a base point the
//! stacked constraints of `E` are row reduced column by column, pivot
//! columns become dependent and the rest are free. Section `σ_a` has free
//! coordinates equal to column `a` of the gauge matrix `G` (the identity for
//! the canonical frame); its dependent coordinates come from the
//! constraints and its unique lift from the square system `Σ_{k₀−2}`.
//! Then `∇σ_a = dσ_a − (differential predicted by the lift)` and, with
//! `∇σ_a = Σ_b σ_b ω_{ba}`, `ω = G⁻¹ (dG − predicted)` on free coordinates.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combinatorics::{c, k0, pi_prime, CombinatoricsError, MultiIndex};
use crate::diff::{Differential, FunctionContext, SeriesContext, SymbolicContext};
use crate::expr::{format_complex, Expr, ExprError, Point};
use crate::jets::{JetsError, Reducer};
use crate::combinatorics::enumerate_partitions;
use crate::linalg::{numeric_rank, solve_pivoted, Matrix, DEFAULT_RANK_TOL};
use crate::sampling::{sample_points, SamplingConfig, SamplingError};
use crate::scalar::{Arith, CRational, Scalar};
use crate::web::Web;

/// Default flatness tolerance on the normalized curvature.
pub const DEFAULT_FLAT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConnectionError {
    #[error("the adapted connection needs d = c(n,k₀); here n = {n}, d = {d}, c(n,k₀) = {c_k0}")]
    NotSquareCase { n: usize, d: usize, c_k0: usize },
    #[error("moment matrix P_k₀ is singular at the working point (point in S)")]
    SingularAtPoint,
    #[error("frame has {found} free coordinates, expected {expected}")]
    FrameRank { expected: usize, found: usize },
    #[error("gauge matrix must be {expected}×{expected}")]
    GaugeShape { expected: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Jets(#[from] JetsError),
}

/// Choice of frame for `E`.
#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    /// Free coordinates are unit vectors.
    Canonical,
    /// `σ'_a` has free coordinates `G[·][a]`.
    Gauge(Vec<Vec<Expr>>),
}

/// A jet coordinate `f_leaf^{(layer)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct JetCoordinate {
    pub leaf: usize,
    pub layer: usize,
}

/// Connection matrices `ω_λ` (entry `[b][a]`), one per coordinate.
#[derive(Clone, Debug)]
pub struct Connection<R> {
    pub free: Vec<JetCoordinate>,
    pub omega: Vec<Matrix<R>>,
}

/// Curvature `Ω_{λμ}` for `λ < μ`.
#[derive(Clone, Debug)]
pub struct Curvature<R> {
    pub pairs: Vec<(usize, usize)>,
    pub omega2: Vec<Matrix<R>>,
}

fn check_square_case(w: &Web) -> Result<usize, ConnectionError> {
    let (n, d) = (w.n(), w.d());
    let top = k0(n, d)?;
    let c_k0 = c(n, top)? as usize;
    if c_k0 != d {
        return Err(ConnectionError::NotSquareCase { n, d, c_k0 });
    }
    Ok(top)
}

/// Rows of all constraints with `|H|` in `heights`, over the ring.
fn constraint_matrix<R: Differential>(red: &mut Reducer<R>, heights: std::ops::RangeInclusive<usize>, width: usize) -> Vec<Vec<R>> {
    let (n, d) = (red.n(), red.d());
    let mut rows = Vec::new();
    for h in heights {
        for hh in enumerate_partitions(n, h as u32) {
            let e = red.normalized_constraint(&hh);
            let zero = e[0][0].zero_like();
            let mut row = vec![zero; width];
            for (i, r) in e.iter().enumerate() {
                for (t, v) in r.iter().enumerate() {
                    row[t * d + i] = v.clone();
                }
            }
            rows.push(row);
        }
    }
    rows
}

// Greedy independent columns (then rows) of a floating matrix.
fn greedy_columns(m: &Matrix<Complex64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for col in 0..m.cols() {
        let mut trial = kept.clone();
        trial.push(col);
        if numeric_rank(&m.select_cols(&trial), DEFAULT_RANK_TOL).rank == trial.len() {
            kept = trial;
        }
    }
    kept
}

/// Builds the connection in any function context.
pub fn connection_in<C: FunctionContext>(w: &Web, ctx: &C, frame: &Frame) -> Result<Connection<C::R>, ConnectionError> {
    let top = check_square_case(w)?;
    let (n, d) = (w.n(), w.d());
    let layers = top - 1;
    let width = d * layers;
    let mut red = Reducer::new(w, ctx)?;

    let a_rows = constraint_matrix(&mut red, 1..=layers, width);
    let a = Matrix::from_rows(a_rows);
    let value = |r: &C::R| ctx.value(r).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let a_val = a.map(value);
    if a_val.to_rows().iter().flatten().any(|z| !z.is_finite()) {
        return Err(ConnectionError::SingularAtPoint);
    }
    let dep = greedy_columns(&a_val);
    let free_cols: Vec<usize> = (0..width).filter(|c| !dep.contains(c)).collect();
    let expected = pi_prime(n, d)?.0 as usize;
    if free_cols.len() != expected {
        return Err(ConnectionError::FrameRank {
            expected,
            found: free_cols.len(),
        });
    }
    let rows = greedy_columns(&a_val.select_cols(&dep).transpose());
    let r = free_cols.len();
    let one = red_one(&a);

    let g: Matrix<C::R> = match frame {
        Frame::Canonical => Matrix::from_fn(r, r, |i, j| if i == j { one.clone() } else { one.zero_like() }),
        Frame::Gauge(rows_g) => {
            if rows_g.len() != r || rows_g.iter().any(|row| row.len() != r) {
                return Err(ConnectionError::GaugeShape { expected: r });
            }
            let mut lifted = Vec::with_capacity(r);
            for row in rows_g {
                let mut out = Vec::with_capacity(r);
                for e in row {
                    out.push(ctx.lift(e)?);
                }
                lifted.push(out);
            }
            Matrix::from_rows(lifted)
        }
    };
    let score = |x: &C::R| ctx.value(x).map_or(0.0, |z| if z.is_finite() { z.norm() } else { 0.0 });

    // Dependent coordinates of every section.
    let a_sq = a.select_rows(&rows).select_cols(&dep);
    let a_free = a.select_rows(&rows).select_cols(&free_cols);
    let rhs = a_free.mul(&g).map(|x| x.negated());
    let x = solve_pivoted(&a_sq, &rhs, score).map_err(|_| ConnectionError::SingularAtPoint)?;
    let mut sections = Matrix::filled(width, r, one.zero_like());
    for (k, &col) in free_cols.iter().enumerate() {
        for a_idx in 0..r {
            sections.set(col, a_idx, g.get(k, a_idx).clone());
        }
    }
    for (k, &col) in dep.iter().enumerate() {
        for a_idx in 0..r {
            sections.set(col, a_idx, x.get(k, a_idx).clone().tidy());
        }
    }

    // Unique lift through Σ_{k₀−2}.
    let b = Matrix::from_rows(constraint_matrix(&mut red, top..=top, d * top));
    let lower_cols: Vec<usize> = (0..width).collect();
    let top_cols: Vec<usize> = (width..d * top).collect();
    let pt = b.select_cols(&top_cols);
    let lift_rhs = b.select_cols(&lower_cols).mul(&sections).map(|x| x.negated());
    let lift = solve_pivoted(&pt, &lift_rhs, score).map_err(|_| ConnectionError::SingularAtPoint)?;
    let coordinate = |leaf: usize, layer: usize, a_idx: usize| -> C::R {
        if layer == layers {
            lift.get(leaf, a_idx).clone()
        } else {
            sections.get(layer * d + leaf, a_idx).clone()
        }
    };

    let g_inv = solve_pivoted(
        &g,
        &Matrix::from_fn(r, r, |i, j| if i == j { one.clone() } else { one.zero_like() }),
        score,
    )
    .map_err(|_| ConnectionError::SingularAtPoint)?;

    let free: Vec<JetCoordinate> = free_cols
        .iter()
        .map(|&col| JetCoordinate {
            leaf: col % d,
            layer: col / d,
        })
        .collect();
    let mut omega = Vec::with_capacity(n);
    for lambda in 0..n {
        let mut nabla = Matrix::filled(r, r, one.zero_like());
        for (bi, fc) in free.iter().enumerate() {
            let target = MultiIndex::pure(n, n - 1, fc.layer as u32).plus_unit(lambda);
            let dcoef = red.reduce(fc.leaf, &target);
            for a_idx in 0..r {
                let mut predicted = one.zero_like();
                for (m, coef) in dcoef.iter().enumerate() {
                    predicted = predicted.plus(&coef.times(&coordinate(fc.leaf, m, a_idx)));
                }
                let v = g.get(bi, a_idx).derivative(lambda).minus(&predicted);
                nabla.set(bi, a_idx, v);
            }
        }
        omega.push(g_inv.mul(&nabla).map(|x| x.clone().tidy()));
    }
    Ok(Connection { free, omega })
}

fn red_one<R: Differential>(a: &Matrix<R>) -> R {
    a.get(0, 0).one_like()
}

/// `Ω_{λμ} = ∂_λ ω_μ − ∂_μ ω_λ + ω_λ ω_μ − ω_μ ω_λ`.
pub fn curvature<R: Differential>(conn: &Connection<R>) -> Curvature<R> {
    let n = conn.omega.len();
    let mut pairs = Vec::new();
    let mut omega2 = Vec::new();
    for l in 0..n {
        for m in l + 1..n {
            let (wl, wm) = (&conn.omega[l], &conn.omega[m]);
            let r = wl.rows();
            let lm = wl.mul(wm);
            let ml = wm.mul(wl);
            let entry = Matrix::from_fn(r, r, |i, j| {
                wm.get(i, j)
                    .derivative(l)
                    .minus(&wl.get(i, j).derivative(m))
                    .plus(lm.get(i, j))
                    .minus(ml.get(i, j))
                    .tidy()
            });
            pairs.push((l, m));
            omega2.push(entry);
        }
    }
    Curvature { pairs, omega2 }
}

/// Symbolic connection; pivots are chosen at a seeded random base point.
pub fn connection_symbolic(w: &Web, frame: &Frame, seed: u64) -> Result<Connection<Expr>, ConnectionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Complex64> = (0..w.n())
        .map(|_| Complex64::new(rng.random_range(-2.0..2.0), 0.0))
        .collect();
    connection_in(w, &SymbolicContext::new(base), frame)
}

/// Connection and curvature values at one point.
#[derive(Clone, Debug)]
pub struct PointConnection<S> {
    pub free: Vec<JetCoordinate>,
    pub omega: Vec<Matrix<S>>,
    pub pairs: Vec<(usize, usize)>,
    pub curvature: Vec<Matrix<S>>,
}

fn working_order(top: usize) -> usize {
    top + 1
}

pub fn connection_at<S: Scalar>(w: &Web, p: &[S], frame: &Frame) -> Result<PointConnection<S>, ConnectionError> {
    let top = check_square_case(w)?;
    let ctx = SeriesContext::new(p.to_vec(), working_order(top));
    let conn = connection_in(w, &ctx, frame)?;
    let curv = curvature(&conn);
    let values = |m: &Matrix<crate::series::Series<S>>| m.map(|s| s.value().clone());
    Ok(PointConnection {
        free: conn.free.clone(),
        omega: conn.omega.iter().map(values).collect(),
        pairs: curv.pairs.clone(),
        curvature: curv.omega2.iter().map(values).collect(),
    })
}

fn max_entry<S: Scalar>(ms: &[Matrix<S>]) -> f64 {
    ms.iter()
        .flat_map(|m| m.to_rows().into_iter().flatten())
        .map(|x| x.magnitude())
        .fold(0.0, f64::max)
}

fn render<S: Scalar + std::fmt::Display>(ms: &[Matrix<S>]) -> Vec<Vec<Vec<String>>> {
    ms.iter()
        .map(|m| m.to_rows().iter().map(|r| r.iter().map(ToString::to_string).collect()).collect())
        .collect()
}

fn render_complex(ms: &[Matrix<Complex64>]) -> Vec<Vec<Vec<String>>> {
    ms.iter()
        .map(|m| m.to_rows().iter().map(|r| r.iter().map(|z| format_complex(*z)).collect()).collect())
        .collect()
}

/// Per-point summary used by flatness tests and reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointFlatness {
    pub point: Point,
    pub free: Vec<JetCoordinate>,
    /// `ω_λ` entries, rendered exactly when possible.
    pub omega: Vec<Vec<Vec<String>>>,
    pub pairs: Vec<(usize, usize)>,
    pub curvature: Vec<Vec<Vec<String>>>,
    pub max_omega: f64,
    pub max_curvature: f64,
    /// `max|Ω| / max(1, max|ω|)`.
    pub normalized: f64,
    pub exact_zero: bool,
}

pub fn point_flatness(w: &Web, p: &Point, frame: &Frame) -> Result<PointFlatness, ConnectionError> {
    fn build<S: Scalar>(pc: &PointConnection<S>, p: &Point, omega: Vec<Vec<Vec<String>>>, curvature: Vec<Vec<Vec<String>>>) -> PointFlatness {
        let max_omega = max_entry(&pc.omega);
        let max_curvature = max_entry(&pc.curvature);
        let exact_zero = S::EXACT && pc.curvature.iter().all(|m| m.to_rows().iter().flatten().all(Scalar::is_zero));
        PointFlatness {
            point: p.clone(),
            free: pc.free.clone(),
            omega,
            pairs: pc.pairs.clone(),
            curvature,
            max_omega,
            max_curvature,
            normalized: max_curvature / max_omega.max(1.0),
            exact_zero,
        }
    }
    match p {
        Point::Exact(v) if w.is_exp_free() => {
            let pc = connection_at::<CRational>(w, v, frame)?;
            Ok(build(&pc, p, render(&pc.omega), render(&pc.curvature)))
        }
        _ => {
            let pc = connection_at::<Complex64>(w, &p.to_float(), frame)?;
            Ok(build(&pc, p, render_complex(&pc.omega), render_complex(&pc.curvature)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub flat: bool,
    pub tolerance: f64,
    pub seed: u64,
    pub resamples: usize,
    /// Every curvature entry simplified to zero symbolically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic_zero: Option<bool>,
    pub points: Vec<PointFlatness>,
}

/// Pointwise flatness at seeded sample points (resampling poles and
/// points of `S`). With `symbolic`, the curvature is also simplified
/// symbolically and an exact zero is reported.
pub fn flatness_test(w: &Web, cfg: &SamplingConfig, tol: f64, frame: &Frame, symbolic: bool) -> Result<FlatnessReport, ConnectionError> {
    check_square_case(w)?;
    let symbolic_zero = if symbolic {
        let conn = connection_symbolic(w, frame, cfg.seed)?;
        let curv = curvature(&conn);
        Some(curv.omega2.iter().all(|m| m.to_rows().iter().flatten().all(|e| e.simplify().is_zero())))
    } else {
        None
    };
    let samples = sample_points(w.n(), cfg, w.is_exp_free(), |p| match point_flatness(w, p, frame) {
        Ok(v) => Ok(Some(v)),
        Err(ConnectionError::SingularAtPoint)
        | Err(ConnectionError::FrameRank { .. })
        | Err(ConnectionError::Expr(ExprError::PoleAtPoint)) => Ok(None),
        Err(e) => Err(e),
    })?;
    let points: Vec<PointFlatness> = samples.results.into_iter().map(|(_, v)| v).collect();
    let flat = symbolic_zero == Some(true) || points.iter().all(|p| p.exact_zero || p.normalized < tol);
    Ok(FlatnessReport {
        flat,
        tolerance: tol,
        seed: cfg.seed,
        resamples: samples.resamples,
        symbolic_zero,
        points,
    })
}

/// Residuals of the gauge law at one point: `ω' − (G⁻¹ωG + G⁻¹dG)` and
/// `Ω' − G⁻¹ΩG`, where the primed objects are built directly in the gauged
/// frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeCheck {
    pub omega_residual: f64,
    pub curvature_residual: f64,
    pub flat_canonical: bool,
    pub flat_gauged: bool,
}

pub fn gauge_check<S: Scalar>(w: &Web, p: &[S], gauge: &[Vec<Expr>], tol: f64) -> Result<GaugeCheck, ConnectionError> {
    let top = check_square_case(w)?;
    let base = connection_at(w, p, &Frame::Canonical)?;
    let moved = connection_at(w, p, &Frame::Gauge(gauge.to_vec()))?;
    let ctx = SeriesContext::new(p.to_vec(), working_order(top));
    let r = gauge.len();
    let g_series = Matrix::from_rows(
        gauge
            .iter()
            .map(|row| row.iter().map(|e| ctx.lift(e)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?,
    );
    let g = g_series.map(|s| s.value().clone());
    let id = Matrix::from_fn(r, r, |i, j| if i == j { S::one() } else { S::zero() });
    let g_inv = solve_pivoted(&g, &id, |x: &S| x.magnitude()).map_err(|_| ConnectionError::SingularAtPoint)?;
    let mut omega_residual = 0.0_f64;
    for (lambda, wl) in base.omega.iter().enumerate() {
        let dg = g_series.map(|s| s.derivative(lambda).value().clone());
        let predicted = g_inv.mul(&wl.mul(&g)).plus_matrix(&g_inv.mul(&dg));
        omega_residual = omega_residual.max(max_diff(&predicted, &moved.omega[lambda]));
    }
    let mut curvature_residual = 0.0_f64;
    for (k, om) in base.curvature.iter().enumerate() {
        let predicted = g_inv.mul(&om.mul(&g));
        curvature_residual = curvature_residual.max(max_diff(&predicted, &moved.curvature[k]));
    }
    let flat = |pc: &PointConnection<S>| max_entry(&pc.curvature) / max_entry(&pc.omega).max(1.0) < tol;
    Ok(GaugeCheck {
        omega_residual,
        curvature_residual,
        flat_canonical: flat(&base),
        flat_gauged: flat(&moved),
    })
}

fn max_diff<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> f64 {
    a.to_rows()
        .iter()
        .flatten()
        .zip(b.to_rows().iter().flatten())
        .map(|(x, y)| x.minus(y).magnitude())
        .fold(0.0, f64::max)
}

trait PlusMatrix {
    fn plus_matrix(&self, other: &Self) -> Self;
}

impl<T: Arith> PlusMatrix for Matrix<T> {
    fn plus_matrix(&self, other: &Self) -> Self {
        Matrix::from_fn(self.rows(), self.cols(), |i, j| self.get(i, j).plus(other.get(i, j)))
    }
}
