//! Built-in example webs.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::connection::{connection_at, ConnectionError, Frame};
use crate::document::{RationalText, WebDocument};
use crate::expr::{parse, Expr, ExprError, Point};
use crate::sampling::{sample_points, SamplingConfig};
use crate::scalar::CRational;
use crate::web::Web;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExampleError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown example `{0}` (expected six_web, fifteen_web or conic_affine)")]
    Unknown(String),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
}

/// The five constants `a, b, c, e, h` of the six-web.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SixWebConstants {
    pub a: CRational,
    pub b: CRational,
    pub c: CRational,
    pub e: CRational,
    pub h: CRational,
}

impl Default for SixWebConstants {
    fn default() -> Self {
        let q = CRational::from_int;
        SixWebConstants {
            a: q(2),
            b: q(3),
            c: q(5),
            e: q(7),
            h: q(11),
        }
    }
}

impl SixWebConstants {
    fn list(&self) -> [&CRational; 5] {
        [&self.a, &self.b, &self.c, &self.e, &self.h]
    }

    pub fn validate(&self) -> Result<(), ExampleError> {
        let v = self.list();
        if v.iter().any(|x| x.is_zero()) {
            return Err(ExampleError::InvalidParameters("a, b, c, e, h must be nonzero".into()));
        }
        for i in 0..5 {
            for j in i + 1..5 {
                if v[i] == v[j] {
                    return Err(ExampleError::InvalidParameters("a, b, c, e, h must be distinct".into()));
                }
            }
        }
        Ok(())
    }

    /// Overrides from `name=value` bindings.
    pub fn with_bindings(mut self, bindings: &BTreeMap<String, CRational>) -> Result<Self, ExampleError> {
        for (name, v) in bindings {
            let slot = match name.as_str() {
                "a" => &mut self.a,
                "b" => &mut self.b,
                "c" => &mut self.c,
                "e" => &mut self.e,
                "h" => &mut self.h,
                "psi" | "g" | "off_conic" => continue,
                other => return Err(ExampleError::InvalidParameters(format!("unknown parameter `{other}`"))),
            };
            *slot = v.clone();
        }
        Ok(self)
    }
}

fn document(n: usize) -> WebDocument {
    WebDocument {
        n,
        parameters: BTreeMap::new(),
        first_integrals: None,
        slopes: None,
        affine_forms: None,
        sampling: SamplingConfig::default(),
    }
}

/// Six-web in 3-space with slopes `(0,0), (a,a²), (b,b²), (c,c²), (e,e²), (h, ψ(y))`.
pub fn six_web(k: &SixWebConstants, psi: &str) -> Result<WebDocument, ExampleError> {
    k.validate()?;
    let psi_expr = parse(psi, 3).map_err(|e| ExampleError::InvalidParameters(format!("psi: {e}")))?;
    if psi_expr.max_var().is_some_and(|v| v != 1) || !psi_expr.parameters().is_empty() {
        return Err(ExampleError::InvalidParameters("psi must depend on y only".into()));
    }
    let mut slopes = vec![vec!["0".to_string(), "0".to_string()]];
    for t in [&k.a, &k.b, &k.c, &k.e] {
        slopes.push(vec![t.to_string(), (t * t).to_string()]);
    }
    slopes.push(vec![k.h.to_string(), psi.trim().to_string()]);
    let mut doc = document(3);
    doc.slopes = Some(slopes);
    Ok(doc)
}

/// The fifteen first integrals of the 15-web in 3-space.
pub const FIFTEEN_WEB_INTEGRALS: [&str; 15] = [
    "x",
    "y",
    "z",
    "z/(z-y)",
    "z/(z-x)",
    "y/(y-x)",
    "(1-z)/(y-z)",
    "(1-z)/(z-x)",
    "(1-y)/(y-x)",
    "(x-y)/(z-y)",
    "z*(1-y)/(z-y)",
    "z*(1-x)/(z-x)",
    "y*(1-x)/(y-x)",
    "z*(x-y)/(x*(z-y))",
    "(1-z)*(y-x)/((1-x)*(y-z))",
];

pub fn fifteen_web() -> WebDocument {
    let mut doc = document(3);
    doc.first_integrals = Some(FIFTEEN_WEB_INTEGRALS.iter().map(|s| s.to_string()).collect());
    doc
}

/// Affine six-web `z − t x − t² y` for `t = 0, a, b, c, e` and a sixth form
/// for `h`: on the conic `q = p²`, or through `(h, g)` when `off_conic`.
pub fn conic_affine(k: &SixWebConstants, off_conic: Option<&CRational>) -> Result<WebDocument, ExampleError> {
    k.validate()?;
    let form = |p: &CRational, q: &CRational| {
        vec![
            RationalText::Text((-p).to_string()),
            RationalText::Text((-q).to_string()),
            RationalText::Int(1),
        ]
    };
    let zero = CRational::zero();
    let mut forms = vec![form(&zero, &zero)];
    for t in [&k.a, &k.b, &k.c, &k.e] {
        forms.push(form(t, &(t * t)));
    }
    let h2 = &k.h * &k.h;
    match off_conic {
        Some(g) if *g == h2 => return Err(ExampleError::InvalidParameters("g = h² puts the sixth point on the conic".into())),
        Some(g) => forms.push(form(&k.h, g)),
        None => forms.push(form(&k.h, &h2)),
    }
    let mut doc = document(3);
    doc.affine_forms = Some(forms);
    Ok(doc)
}

/// Default off-conic second coordinate of the sixth point.
pub fn default_off_conic() -> CRational {
    CRational::from_int(13)
}

/// Dispatch by name; `bindings` may set `a, b, c, e, h`, `psi` (six_web),
/// and `off_conic`, `g` (conic_affine).
pub fn by_name(name: &str, bindings: &BTreeMap<String, String>) -> Result<WebDocument, ExampleError> {
    let mut rationals = BTreeMap::new();
    for (k, v) in bindings {
        if k == "psi" {
            continue;
        }
        let q: CRational = v
            .parse()
            .map_err(|_| ExampleError::InvalidParameters(format!("{k}: `{v}` is not a rational")))?;
        rationals.insert(k.clone(), q);
    }
    let consts = || SixWebConstants::default().with_bindings(&rationals);
    match name {
        "six_web" => six_web(&consts()?, bindings.get("psi").map_or("13", String::as_str)),
        "fifteen_web" => {
            if let Some(k) = bindings.keys().next() {
                return Err(ExampleError::InvalidParameters(format!("fifteen_web takes no parameter `{k}`")));
            }
            Ok(fifteen_web())
        }
        "conic_affine" => {
            let off = rationals.get("off_conic").is_some_and(|v| !v.is_zero());
            let g = rationals.get("g").cloned().unwrap_or_else(default_off_conic);
            conic_affine(&consts()?, off.then_some(&g))
        }
        other => Err(ExampleError::Unknown(other.to_string())),
    }
}

/// Comparison of the six-web connection with the reference form
/// `ω_{46} = ψ′ (Δ₄/Δ′) η₄ / (h²−ψ)^m`, `ω_{56} = −ψ′ (Δ₅/Δ′) η₅ / (h²−ψ)^m`,
/// where `Δ′ = abce·Π(t_j − t_i)` over `a, b, c, e`,
/// `Δ₄ = abe(b−a)(e−a)(e−b)` and `Δ₅ = abc(b−a)(c−a)(c−b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceComparison {
    pub delta4_ratio: CRational,
    pub delta5_ratio: CRational,
    /// Exponents `m` tried, with the worst relative residual for each.
    pub residuals: Vec<(i32, f64)>,
    /// The exponent whose residual is below tolerance, if any.
    pub exponent: Option<i32>,
    pub points: Vec<Point>,
}

pub fn delta_ratios(k: &SixWebConstants) -> (CRational, CRational) {
    let (a, b, c, e) = (&k.a, &k.b, &k.c, &k.e);
    let prod = |xs: &[CRational]| xs.iter().fold(CRational::one(), |acc, x| &acc * x);
    let prime = prod(&[a.clone(), b.clone(), c.clone(), e.clone(), b - a, c - a, e - a, c - b, e - b, e - c]);
    let d4 = prod(&[a.clone(), b.clone(), e.clone(), b - a, e - a, e - b]);
    let d5 = prod(&[a.clone(), b.clone(), c.clone(), b - a, c - a, c - b]);
    let inv = prime.recip().expect("distinct nonzero constants");
    (&d4 * &inv, &d5 * &inv)
}

pub fn compare_with_reference(
    k: &SixWebConstants,
    psi: &str,
    exponents: &[i32],
    cfg: &SamplingConfig,
    tol: f64,
) -> Result<ReferenceComparison, ExampleError> {
    let doc = six_web(k, psi)?;
    let slopes: Vec<Vec<Expr>> = doc
        .slopes
        .expect("six_web emits slopes")
        .iter()
        .map(|r| r.iter().map(|s| parse(s, 3).expect("emitted slopes parse")).collect())
        .collect();
    let w = Web::new(3, slopes).expect("six slopes in 3-space");
    let psi_e = parse(psi, 3).expect("validated");
    let dpsi = psi_e.differentiate(1);
    let (r4, r5) = delta_ratios(k);
    let (r4c, r5c) = (r4.to_complex(), r5.to_complex());
    let h2 = (&k.h * &k.h).to_complex();
    let eta = |t: &CRational| {
        let t = t.to_complex();
        [-t, -t * t, Complex64::new(1.0, 0.0)]
    };
    let (eta4, eta5) = (eta(&k.c), eta(&k.e));
    let samples = sample_points(3, cfg, false, |p| {
        let v = p.to_float();
        match connection_at::<Complex64>(&w, &v, &Frame::Canonical) {
            Ok(pc) => {
                let psi_v = psi_e.eval(&v).map_err(ConnectionError::from)?;
                let dpsi_v = dpsi.eval(&v).map_err(ConnectionError::from)?;
                Ok(Some((pc, psi_v, dpsi_v)))
            }
            Err(ConnectionError::SingularAtPoint) | Err(ConnectionError::Expr(ExprError::PoleAtPoint)) => Ok(None),
            Err(e) => Err(e),
        }
    })
    .map_err(|e: ConnectionError| e)?;
    let mut residuals = Vec::new();
    for &m in exponents {
        let mut worst = 0.0_f64;
        for (_, (pc, psi_v, dpsi_v)) in &samples.results {
            let scale = dpsi_v / (h2 - psi_v).powi(m);
            for l in 0..3 {
                let want4 = scale * r4c * eta4[l];
                let want5 = -scale * r5c * eta5[l];
                let got4 = *pc.omega[l].get(0, 2);
                let got5 = *pc.omega[l].get(1, 2);
                for (got, want) in [(got4, want4), (got5, want5)] {
                    let rel = (got - want).norm() / want.norm().max(got.norm()).max(1e-300);
                    worst = worst.max(rel);
                }
            }
        }
        residuals.push((m, worst));
    }
    let exponent = residuals.iter().find(|(_, r)| *r < tol).map(|(m, _)| *m);
    Ok(ReferenceComparison {
        delta4_ratio: r4,
        delta5_ratio: r5,
        residuals,
        exponent,
        points: samples.results.into_iter().map(|(p, _)| p).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{affine_rank, solve_abelian_relations};
    use crate::document::LoadedDocument;

    #[test]
    fn six_web_document() {
        let doc = six_web(&SixWebConstants::default(), "13").unwrap();
        let slopes = doc.slopes.as_ref().unwrap();
        assert_eq!(slopes[1], vec!["2", "4"]);
        assert_eq!(slopes[5], vec!["11", "13"]);
        let mut bad = SixWebConstants {
            e: CRational::from_int(2),
            ..SixWebConstants::default()
        };
        assert!(matches!(six_web(&bad, "y"), Err(ExampleError::InvalidParameters(_))));
        bad.e = CRational::zero();
        assert!(matches!(six_web(&bad, "y"), Err(ExampleError::InvalidParameters(_))));
        assert!(six_web(&SixWebConstants::default(), "x").is_err());
    }

    #[test]
    fn fifteen_web_is_verbatim() {
        let doc = fifteen_web();
        let us = doc.first_integrals.unwrap();
        assert_eq!(us.len(), 15);
        assert_eq!(us[14], "(1-z)*(y-x)/((1-x)*(y-z))");
    }

    #[test]
    fn conic_dichotomy() {
        let k = SixWebConstants::default();
        let on = LoadedDocument::from_document(conic_affine(&k, None).unwrap()).build().unwrap();
        let off = LoadedDocument::from_document(conic_affine(&k, Some(&default_off_conic())).unwrap())
            .build()
            .unwrap();
        let (on, off) = (on.affine().unwrap(), off.affine().unwrap());
        assert_eq!(affine_rank(on).unwrap(), 4);
        assert_eq!(solve_abelian_relations(on, 1).dimension, 4);
        assert_eq!(affine_rank(off).unwrap(), 3);
        assert_eq!(solve_abelian_relations(off, 1).dimension, 3);
    }

    #[test]
    fn by_name_bindings() {
        let mut b = BTreeMap::new();
        b.insert("psi".to_string(), "y^2".to_string());
        b.insert("h".to_string(), "13".to_string());
        let doc = by_name("six_web", &b).unwrap();
        assert_eq!(doc.slopes.unwrap()[5], vec!["13", "y^2"]);
        assert!(matches!(by_name("nine_web", &BTreeMap::new()), Err(ExampleError::Unknown(_))));
    }

    #[test]
    fn delta_ratios_at_default_constants() {
        let (r4, r5) = delta_ratios(&SixWebConstants::default());
        assert_eq!(r4, CRational::from_frac(1, 60));
        assert_eq!(r5, CRational::from_frac(1, 280));
    }

    #[test]
    fn reference_exponent_is_zero() {
        let cfg = SamplingConfig::with_seed(5).trials(4);
        let k = SixWebConstants::default();
        let cmp = compare_with_reference(&k, "y", &[0, 1, 2], &cfg, 1e-9).unwrap();
        assert_eq!(cmp.exponent, Some(0));
        assert!(cmp.residuals[2].1 > 1e-3);
        let q = CRational::from_int;
        let other = SixWebConstants {
            a: q(-1),
            b: q(4),
            c: CRational::from_frac(1, 2),
            e: q(3),
            h: q(-2),
        };
        let cmp = compare_with_reference(&other, "y^3 + 2*y", &[0, 2], &cfg, 1e-9).unwrap();
        assert_eq!(cmp.exponent, Some(0));
    }
}
