//! Strategies and property checks shared by the integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use webrank_core::combinatorics::{c, enumerate_partitions, k0, MultiIndex};
use webrank_core::diff::SeriesContext;
use webrank_core::jets::{self, Reducer};
use webrank_core::linalg::{exact_rank, DEFAULT_RANK_TOL};
use webrank_core::moments::{moment_matrix, ordinariness};
use webrank_core::web::FirstIntegralWeb;
use webrank_core::{affine_rank, parse, solve_abelian_relations, AffineWeb, CRational, Expr, Point, SamplingConfig, Web};

pub fn q(num: i64, den: i64) -> CRational {
    CRational::from_frac(num, den)
}

pub fn rational() -> impl Strategy<Value = CRational> {
    (-40i64..=40, 1i64..=9).prop_map(|(a, b)| q(a, b))
}

pub fn rational_point(n: usize) -> impl Strategy<Value = Vec<CRational>> {
    prop::collection::vec(rational(), n)
}

/// Polynomial slopes `a + b·x₁ + c·x₂ + e·x₁x₂` (or in the only variable).
pub fn slope_expr(n: usize, coeffs: &[i64]) -> Expr {
    let x = Expr::var(0);
    let y = Expr::var(1.min(n - 1));
    Expr::sum([
        Expr::int(coeffs[0]),
        Expr::int(coeffs[1]).mul(&x),
        Expr::int(coeffs[2]).mul(&y),
        Expr::int(coeffs[3]).mul(&x).mul(&y),
    ])
    .simplify()
}

/// `(n, slope coefficients per leaf, point)`.
pub fn polynomial_web(n_range: std::ops::RangeInclusive<usize>, max_extra: usize) -> impl Strategy<Value = (usize, Vec<Vec<[i64; 4]>>, Vec<CRational>)> {
    n_range.prop_flat_map(move |n| {
        (1..=max_extra).prop_flat_map(move |extra| {
            let d = n + extra;
            (
                Just(n),
                prop::collection::vec(prop::collection::vec(prop::array::uniform4(-3i64..=3), n - 1), d),
                rational_point(n),
            )
        })
    })
}

pub fn build_polynomial_web(n: usize, coeffs: &[Vec<[i64; 4]>]) -> Web {
    Web::new(n, coeffs.iter().map(|row| row.iter().map(|c| slope_expr(n, c)).collect()).collect()).unwrap()
}

/// Curved integrable 3-web family: `u_i = z + t_i z² + Q_i(x, y)` with `Q_i` quadratic.
pub fn curved_integrals() -> impl Strategy<Value = Vec<[i64; 6]>> {
    prop::collection::vec(prop::array::uniform6(-3i64..=3), 4..=6)
}

pub fn build_curved_web(coeffs: &[[i64; 6]]) -> Option<Web> {
    let integrals: Vec<Expr> = coeffs
        .iter()
        .map(|k| {
            let text = format!(
                "z + ({t})*z^2 + ({a})*x + ({b})*y + ({c})*x^2 + ({e})*x*y + ({f})*y^2",
                t = k[0].rem_euclid(2),
                a = k[1],
                b = k[2],
                c = k[3],
                e = k[4],
                f = k[5]
            );
            parse(&text, 3).unwrap()
        })
        .collect();
    Web::from_first_integrals(&FirstIntegralWeb { n: 3, integrals }, &SamplingConfig::default()).ok()
}

/// `(n, forms)` with integer coefficients and nonzero last coefficient.
pub fn integer_forms(n_choices: Vec<usize>, max_d: usize) -> impl Strategy<Value = (usize, Vec<Vec<i64>>)> {
    prop::sample::select(n_choices).prop_flat_map(move |n| {
        ((n + 1)..=max_d).prop_flat_map(move |d| {
            let form = (prop::collection::vec(-4i64..=4, n - 1), prop::sample::select(vec![-3i64, -2, -1, 1, 2, 3]))
                .prop_map(|(mut head, last)| {
                    head.push(last);
                    head
                });
            (Just(n), prop::collection::vec(form, d))
        })
    })
}

pub fn to_rationals(forms: &[Vec<i64>]) -> Vec<Vec<CRational>> {
    forms.iter().map(|r| r.iter().map(|&v| CRational::from_int(v)).collect()).collect()
}

// ------------------------------------------------------------ properties

/// `r_h ≤ min(d, c(n,h))` at every sampled point.
pub fn check_rank_bound(n: usize, coeffs: &[Vec<[i64; 4]>], p: &[CRational], h: u32) -> Result<(), TestCaseError> {
    let w = build_polynomial_web(n, coeffs);
    let m = moment_matrix(&w, h, p).map_err(|e| TestCaseError::reject(e.to_string()))?;
    let r = exact_rank(&m.entries).rank;
    let bound = w.d().min(c(n, h as usize).unwrap() as usize);
    prop_assert!(r <= bound, "r_{} = {} > {}", h, r, bound);
    Ok(())
}

fn monomial_of_slopes(w: &Web, i: usize, l: &MultiIndex) -> Expr {
    Expr::product(l.exponents().iter().enumerate().map(|(lam, &e)| w.slope(i, lam).powi(e as i32)))
}

/// Top coefficient `D^{(|L|)}_{iL} = (−1)^{|L|} C_{iL}`, checked exactly at a point.
pub fn check_top_coefficient(w: &Web, leaf: usize, l: &MultiIndex, p: &[CRational]) -> Result<(), TestCaseError> {
    let r = jets::reduce(w, leaf, l);
    let h = l.height() as usize;
    let top = r.coeffs[h].eval(p);
    let c_il = monomial_of_slopes(w, leaf, l).eval(p);
    match (top, c_il) {
        (Ok(top), Ok(c_il)) => {
            let expected = if h.is_multiple_of(2) { c_il } else { -&c_il };
            prop_assert_eq!(top, expected);
            Ok(())
        }
        _ => Err(TestCaseError::reject("pole")),
    }
}

/// Every split `λ ∈ supp H` gives the same assembled row of `E_H`.
pub fn check_split_invariance(w: &Web, p: &[CRational], max_h: u32) -> Result<(), TestCaseError> {
    let ctx = SeriesContext::new(p.to_vec(), max_h as usize);
    let mut r = Reducer::new(w, &ctx).map_err(|e| TestCaseError::reject(e.to_string()))?;
    for h in 1..=max_h {
        for hh in enumerate_partitions(w.n(), h) {
            let rows: Vec<Vec<Vec<CRational>>> = hh
                .support()
                .into_iter()
                .map(|lam| {
                    r.constraint(&hh, lam)
                        .iter()
                        .map(|row| row.iter().map(|s| s.value().clone()).collect())
                        .collect()
                })
                .collect();
            prop_assert!(rows.windows(2).all(|x| x[0] == x[1]), "split dependence at H = {}", hh);
        }
    }
    Ok(())
}

/// Random expressions in `x, y, z` built from sums, products, quotients,
/// integer powers and `exp`.
pub fn expression() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::var),
        (-5i64..=5).prop_map(Expr::int),
        (1i64..=5, 2i64..=7).prop_map(|(a, b)| Expr::frac(a, b)),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            // Shifted denominators keep poles away from the sampling box.
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.div(&b.mul(&b).add(&Expr::int(2)))),
            (inner.clone(), -2i32..=3).prop_map(|(a, k)| a.powi(k)),
            inner.prop_map(|a| a.mul(&Expr::frac(1, 4)).exp()),
        ]
    })
}

/// Central differences with one Richardson step against `differentiate`.
pub fn check_finite_difference(e: &Expr, var: usize, p: [f64; 3], rel_tol: f64) -> Result<(), TestCaseError> {
    let at = |shift: f64| -> Option<Complex64> {
        let mut v: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        v[var] += shift;
        e.eval(&v).ok().filter(|z| z.is_finite() && z.norm() < 1e3)
    };
    let h = 1e-3;
    let (Some(a1), Some(b1), Some(a2), Some(b2)) = (at(h), at(-h), at(h / 2.0), at(-h / 2.0)) else {
        return Err(TestCaseError::reject("outside the evaluation domain"));
    };
    let d1 = (a1 - b1) / (2.0 * h);
    let d2 = (a2 - b2) / h;
    let fd = (4.0 * d2 - d1) / 3.0;
    let v: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let exact = e
        .differentiate(var)
        .eval(&v)
        .map_err(|_| TestCaseError::reject("derivative pole"))?;
    let rel = (fd - exact).norm() / exact.norm().max(1.0);
    prop_assert!(rel < rel_tol, "∂{} of {}: fd {} vs {} (rel {:e})", var, e, fd, exact, rel);
    Ok(())
}

/// Relation solver dimension (cap `k₀ − 1`) equals the rank formula in
/// strong general position.
pub fn check_affine_oracle(forms: &[Vec<i64>]) -> Result<(), TestCaseError> {
    let aw = AffineWeb::new(to_rationals(forms)).map_err(|_| TestCaseError::reject("degenerate forms"))?;
    if !aw.is_strong_general_position() {
        return Err(TestCaseError::reject("not in strong general position"));
    }
    let cap = k0(aw.n(), aw.d()).unwrap() as u32 - 1;
    let solved = solve_abelian_relations(&aw, cap).dimension;
    prop_assert_eq!(solved, affine_rank(&aw).unwrap());
    Ok(())
}

/// Planar webs with pairwise distinct slopes at `p` are ordinary there.
pub fn check_planar_ordinary(coeffs: &[Vec<[i64; 4]>], p: &[CRational]) -> Result<(), TestCaseError> {
    let w = build_polynomial_web(2, coeffs);
    let values: Vec<CRational> = match w.slopes().iter().map(|r| r[0].eval(p)).collect() {
        Ok(v) => v,
        Err(_) => return Err(TestCaseError::reject("pole")),
    };
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if values[i] == values[j] {
                return Err(TestCaseError::reject("repeated slope"));
            }
        }
    }
    let v = ordinariness(&w, &Point::Exact(p.to_vec()), DEFAULT_RANK_TOL).unwrap();
    prop_assert!(!v.in_s);
    Ok(())
}

/// Off `S`, `dim R_k = Σ_{h=1}^{k+2} (d − c(n,h))` for `k ≤ k₀ − 2`.
pub fn check_dimension_formula(forms: &[Vec<i64>]) -> Result<(), TestCaseError> {
    let w = Web::from_linear_forms(&to_rationals(forms)).map_err(|_| TestCaseError::reject("degenerate"))?;
    let p = Point::Exact(vec![CRational::zero(); w.n()]);
    if ordinariness(&w, &p, DEFAULT_RANK_TOL).unwrap().in_s {
        return Err(TestCaseError::reject("point in S"));
    }
    let top = k0(w.n(), w.d()).unwrap() as i32;
    let ladder = jets::fiber_dimensions(&w, &p, (top - 2).max(-1), DEFAULT_RANK_TOL).unwrap();
    for r in &ladder.dims {
        let expected = jets::expected_dimension(w.n(), w.d(), r.k).unwrap();
        prop_assert_eq!(r.dim, expected, "k = {}", r.k);
    }
    Ok(())
}
