//! Moment matrices `P_h`, their ranks, and pointwise detection of the
//! singular locus `S`.

use serde::Serialize;

use crate::combinatorics::{c, enumerate_partitions, k0, CombinatoricsError, MultiIndex};
use crate::expr::{ExprError, Point};
use crate::jets::{self, JetsError};
use crate::linalg::{Matrix, RankInfo};
use crate::sampling::{sample_points, SamplingConfig, SamplingError};
use crate::scalar::Scalar;
use crate::web::Web;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MomentsError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("jet system: {0}")]
    Jets(String),
}

impl From<JetsError> for MomentsError {
    fn from(e: JetsError) -> Self {
        match e {
            JetsError::Expr(e) => MomentsError::Expr(e),
            other => MomentsError::Jets(other.to_string()),
        }
    }
}

/// `P_h`: row `i` is the degree-`h` Veronese image of the normal of leaf `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix<S> {
    pub h: u32,
    pub columns: Vec<MultiIndex>,
    pub entries: Matrix<S>,
}

fn monomial<S: Scalar>(v: &[S], m: &MultiIndex) -> S {
    let mut acc = S::one();
    for (x, &e) in v.iter().zip(m.exponents()) {
        for _ in 0..e {
            acc = acc.times(x);
        }
    }
    acc
}

/// Moment matrix from precomputed normal covectors (`d × n`).
pub fn moment_matrix_from_normals<S: Scalar>(normals: &Matrix<S>, h: u32) -> MomentMatrix<S> {
    let columns = enumerate_partitions(normals.cols(), h);
    let entries = Matrix::from_fn(normals.rows(), columns.len(), |i, j| monomial(normals.row(i), &columns[j]));
    MomentMatrix { h, columns, entries }
}

pub fn moment_matrix<S: Scalar>(w: &Web, h: u32, p: &[S]) -> Result<MomentMatrix<S>, ExprError> {
    Ok(moment_matrix_from_normals(&w.normals(p)?, h))
}

/// Rescales rows to unit max-norm; rank is unchanged, numeric cuts get fairer.
pub(crate) fn balanced<S: Scalar>(m: &Matrix<S>) -> Matrix<S> {
    if S::EXACT {
        return m.clone();
    }
    let mut out = m.clone();
    for r in 0..m.rows() {
        let scale = m.row(r).iter().map(Scalar::magnitude).fold(0.0, f64::max);
        if scale > 0.0 {
            let inv = S::from_f64(1.0 / scale);
            for c in 0..m.cols() {
                out.set(r, c, m.get(r, c).times(&inv));
            }
        }
    }
    out
}

/// Rank in exact mode, or singular values above `tol · σ_max`.
pub fn rank_of<S: Scalar>(m: &Matrix<S>, tol: f64) -> RankInfo {
    S::rank_of(&balanced(m), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `n < d < c(n,2)`: `S` is where the order-0 jet system has solutions.
    SmallD,
    /// `d ≥ c(n,2)`: `S` is where some `P_h`, `2 ≤ h ≤ k₀`, drops rank.
    LargeD,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankRecord {
    pub h: u32,
    pub rank: usize,
    pub expected: usize,
    pub inconclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrdinarinessVerdict {
    pub point: Point,
    pub regime: Regime,
    pub ranks: Vec<RankRecord>,
    /// Dimension of the order-0 jet fiber (small-d regime only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0_dim: Option<usize>,
    pub in_s: bool,
    pub inconclusive: bool,
}

pub fn regime(n: usize, d: usize) -> Result<Regime, CombinatoricsError> {
    Ok(if (d as u64) < c(n, 2)? {
        Regime::SmallD
    } else {
        Regime::LargeD
    })
}

/// Tests whether `p` lies in `S`.
pub fn ordinariness(w: &Web, p: &Point, tol: f64) -> Result<OrdinarinessVerdict, MomentsError> {
    match p {
        Point::Exact(v) if w.is_exp_free() => ordinariness_at(w, v, p, tol),
        _ => ordinariness_at(w, &p.to_float(), p, tol),
    }
}

/// Generic form of [`ordinariness`]; `point` is only echoed in the verdict.
pub fn ordinariness_at<S: Scalar>(w: &Web, v: &[S], point: &Point, tol: f64) -> Result<OrdinarinessVerdict, MomentsError> {
    let (n, d) = (w.n(), w.d());
    let regime = regime(n, d)?;
    let normals = w.normals(v)?;
    let mut ranks = Vec::new();
    let top = match regime {
        Regime::LargeD => k0(n, d)? as u32,
        Regime::SmallD => 2,
    };
    for h in 1..=top {
        let m = moment_matrix_from_normals(&normals, h);
        let info = rank_of(&m.entries, tol);
        let expected = d.min(c(n, h as usize)? as usize);
        ranks.push(RankRecord {
            h,
            rank: info.rank,
            expected,
            inconclusive: info.inconclusive,
        });
    }
    let mut inconclusive = ranks.iter().any(|r| r.inconclusive);
    let (in_s, r0_dim) = match regime {
        Regime::LargeD => (ranks.iter().any(|r| r.h >= 2 && r.rank < r.expected), None),
        Regime::SmallD => {
            let ladder = jets::fiber_dimensions_at(w, v, 0, tol)?;
            let r0 = ladder.last().expect("ladder includes R_0");
            inconclusive |= r0.inconclusive;
            (r0.dim >= 1, Some(r0.dim))
        }
    };
    Ok(OrdinarinessVerdict {
        point: point.clone(),
        regime,
        ranks,
        r0_dim,
        in_s,
        inconclusive,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleVerdict {
    /// At least one sampled point lies outside `S`.
    pub ordinary: bool,
    /// Every sampled point lies outside `S`.
    pub all_outside: bool,
    pub seed: u64,
    pub tolerance: f64,
    pub resamples: usize,
    pub witnesses: Vec<OrdinarinessVerdict>,
}

/// Ordinariness at seeded random points; poles are resampled.
pub fn sample_ordinariness(w: &Web, cfg: &SamplingConfig, tol: f64) -> Result<SampleVerdict, MomentsError> {
    let samples = sample_points(w.n(), cfg, w.is_exp_free(), |p| match ordinariness(w, p, tol) {
        Ok(v) => Ok(Some(v)),
        Err(MomentsError::Expr(ExprError::PoleAtPoint)) => Ok(None),
        Err(e) => Err(e),
    })?;
    let witnesses: Vec<OrdinarinessVerdict> = samples.results.into_iter().map(|(_, v)| v).collect();
    Ok(SampleVerdict {
        ordinary: witnesses.iter().any(|v| !v.in_s),
        all_outside: witnesses.iter().all(|v| !v.in_s),
        seed: cfg.seed,
        tolerance: tol,
        resamples: samples.resamples,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::linalg::DEFAULT_RANK_TOL;
    use crate::scalar::CRational;
    use num_complex::Complex64;

    fn q(v: i64) -> CRational {
        CRational::from_int(v)
    }

    fn planar(slopes: &[i64]) -> Web {
        Web::new(2, slopes.iter().map(|&s| vec![Expr::int(s)]).collect()).unwrap()
    }

    #[test]
    fn monomial_rows() {
        let w = Web::new(
            3,
            vec![
                vec![Expr::int(0), Expr::int(0)],
                vec![Expr::int(2), Expr::int(4)],
                vec![Expr::int(3), Expr::int(9)],
                vec![Expr::int(5), Expr::int(25)],
            ],
        )
        .unwrap();
        let m = moment_matrix(&w, 2, &[q(0), q(0), q(0)]).unwrap();
        // Columns: x², xy, xz, y², yz, z² on (2, 4, −1).
        let expected: Vec<CRational> = [4, 8, -2, 16, -4, 1].iter().map(|&v| q(v)).collect();
        assert_eq!(m.entries.row(1), expected.as_slice());
        assert_eq!(rank_of(&moment_matrix(&w, 1, &[q(0), q(0), q(0)]).unwrap().entries, 0.0).rank, 3);
    }

    #[test]
    fn planar_vandermonde_ranks() {
        let w = planar(&[0, 1, 2, 3, 5]);
        let p = [q(0), q(0)];
        for h in 1..6 {
            let r = rank_of(&moment_matrix(&w, h, &p).unwrap().entries, 0.0).rank;
            assert_eq!(r, 5.min(h as usize + 1));
        }
        let v = ordinariness(&w, &Point::Exact(p.to_vec()), DEFAULT_RANK_TOL).unwrap();
        assert!(!v.in_s);
    }

    #[test]
    fn exact_and_numeric_agree() {
        let w = Web::new(
            3,
            vec![
                vec![Expr::int(0), Expr::int(0)],
                vec![parse("x", 3).unwrap(), parse("y^2", 3).unwrap()],
                vec![Expr::int(3), Expr::int(9)],
                vec![Expr::int(5), Expr::int(25)],
                vec![Expr::int(7), Expr::int(49)],
                vec![Expr::int(11), parse("z", 3).unwrap()],
            ],
        )
        .unwrap();
        let p = [q(2), q(2), q(121)];
        let exact = rank_of(&moment_matrix(&w, 2, &p).unwrap().entries, 0.0).rank;
        let fl: Vec<Complex64> = p.iter().map(CRational::to_complex).collect();
        let numeric = rank_of(&moment_matrix(&w, 2, &fl).unwrap().entries, DEFAULT_RANK_TOL).rank;
        assert_eq!(exact, 5);
        assert_eq!(exact, numeric);
    }
}
