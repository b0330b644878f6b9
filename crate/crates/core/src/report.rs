//! Structured, deterministic reports for the command-line steps.
//!
//! A report is a JSON tree with a schema tag, the digest of the input
//! document, the sampling configuration and tolerance actually used, and one
//! entry per step. Timings are deliberately absent so that reports are
//! byte-identical for fixed input and seed.

use serde::Serialize;
use serde_json::{json, Value};

use crate::affine::{affine_rank_report, default_degree_cap, solve_abelian_relations, AffineError};
use crate::combinatorics::{bounds, k0, CombinatoricsError};
use crate::connection::{connection_symbolic, curvature, flatness_test, ConnectionError, Frame, DEFAULT_FLAT_TOL};
use crate::document::{DocumentError, LoadedDocument, WebSource};
use crate::expr::Point;
use crate::jets::{fiber_dimensions, JetsError};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::moments::{sample_ordinariness, MomentsError};
use crate::sampling::{sample_points, SamplingConfig, SamplingError};
use crate::web::{Web, WebError};

pub const SCHEMA: &str = "webrank-report/1";

/// Exit status of a run: positive verdicts, a negative verdict, or an error.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NEGATIVE: i32 = 1;
    pub const ERROR: i32 = 2;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Jets(#[from] JetsError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("step `{step}` needs {needs}")]
    Unsupported { step: &'static str, needs: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Check,
    AffineRank,
    Abelian,
    Jets,
    Curvature,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Check => "check",
            Step::AffineRank => "affine-rank",
            Step::Abelian => "abelian",
            Step::Jets => "jets",
            Step::Curvature => "curvature",
        }
    }

    pub fn parse(s: &str) -> Option<Step> {
        [Step::Check, Step::AffineRank, Step::Abelian, Step::Jets, Step::Curvature]
            .into_iter()
            .find(|st| st.name() == s)
    }
}

/// Overrides applied on top of the document's sampling block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    /// Highest jet order `k` for `jets` (default `max(k₀ − 2, 0)`).
    pub order: Option<i32>,
    /// Degree cap for `abelian` (default `k₀ − 1`).
    pub degree_cap: Option<u32>,
    /// Include the exact relation basis in `abelian` output.
    pub basis: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: Step,
    /// `true` for the affirmative verdict of the step (ordinary, flat, …).
    pub verdict: bool,
    pub result: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub input_digest: String,
    pub sampling: SamplingConfig,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coordinate_change: Option<Value>,
    pub steps: Vec<StepReport>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.steps.iter().all(|s| s.verdict) {
            exit::OK
        } else {
            exit::NEGATIVE
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// `c`-table, `k₀`, `π` and `π′`.
pub fn bounds_report(command: &str, n: usize, d: usize) -> Result<Value, PipelineError> {
    let b = bounds(n, d)?;
    Ok(json!({
        "schema": SCHEMA,
        "command": command,
        "bounds": b,
    }))
}

fn require_web<'a>(src: &'a WebSource, step: &'static str) -> Result<&'a Web, PipelineError> {
    src.web().ok_or(PipelineError::Unsupported {
        step,
        needs: "a web with slopes (every form must involve the last variable)",
    })
}

fn check_step(w: &Web, cfg: &SamplingConfig, tol: f64) -> Result<StepReport, PipelineError> {
    let verdict = sample_ordinariness(w, cfg, tol)?;
    let integrability = w.integrability(cfg)?;
    let position = match verdict.witnesses.first() {
        Some(v) => Some(w.position_check(&v.point)?),
        None => None,
    };
    Ok(StepReport {
        step: Step::Check,
        verdict: verdict.ordinary && integrability.integrable,
        result: json!({
            "n": w.n(),
            "d": w.d(),
            "integrability": integrability,
            "position": position,
            "ordinariness": verdict,
        }),
    })
}

#[derive(Serialize)]
struct JetPoint {
    point: Point,
    dims: Vec<crate::jets::DimRecord>,
    matches_expected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_drop: Option<i32>,
}

fn jets_step(w: &Web, cfg: &SamplingConfig, tol: f64, order: Option<i32>) -> Result<StepReport, PipelineError> {
    let top = k0(w.n(), w.d())? as i32;
    let base = (top - 2).max(0);
    let order = order.unwrap_or(base).max(-1);
    let samples = sample_points(w.n(), cfg, w.is_exp_free(), |p| match fiber_dimensions(w, p, order, tol) {
        Ok(ladder) => Ok(Some(ladder)),
        Err(JetsError::PointInS) | Err(JetsError::Inconclusive { .. }) | Err(JetsError::Expr(crate::expr::ExprError::PoleAtPoint)) => {
            Ok(None)
        }
        Err(e) => Err(PipelineError::from(e)),
    })?;
    let mut points = Vec::new();
    for (_, ladder) in samples.results {
        let matches_expected = ladder.dims.iter().all(|r| r.expected.is_none_or(|e| e == r.dim));
        let tail: Vec<_> = ladder.dims.iter().filter(|r| r.k >= base).collect();
        let first_drop = tail.windows(2).find(|w| w[1].dim < w[0].dim).map(|w| w[1].k);
        points.push(JetPoint {
            point: ladder.point,
            dims: ladder.dims,
            matches_expected,
            first_drop,
        });
    }
    let verdict = points.iter().all(|p| p.matches_expected && p.first_drop.is_none());
    Ok(StepReport {
        step: Step::Jets,
        verdict,
        result: json!({
            "k0": top,
            "order": order,
            "estimate_order": base,
            "resamples": samples.resamples,
            "stable": points.iter().all(|p| p.first_drop.is_none()),
            "points": points,
        }),
    })
}

/// Symbolic curvature is attempted only at desk scale.
fn symbolic_feasible(w: &Web) -> bool {
    k0(w.n(), w.d()).is_ok_and(|k| k <= 3) && w.d() <= 10
}

fn curvature_step(w: &Web, cfg: &SamplingConfig, tol: f64) -> Result<StepReport, PipelineError> {
    let symbolic = symbolic_feasible(w);
    let report = flatness_test(w, cfg, tol, &Frame::Canonical, symbolic)?;
    let mut result = json!({
        "frame": "canonical",
        "free_coordinates": report.points.first().map(|p| p.free.clone()),
        "flatness": report,
    });
    if symbolic {
        let conn = connection_symbolic(w, &Frame::Canonical, cfg.seed)?;
        let curv = curvature(&conn);
        let render = |m: &crate::linalg::Matrix<crate::expr::Expr>| -> Vec<Vec<String>> {
            m.to_rows().iter().map(|r| r.iter().map(|e| e.simplify().display_with(w.n())).collect()).collect()
        };
        result["symbolic"] = json!({
            "omega": conn.omega.iter().map(render).collect::<Vec<_>>(),
            "curvature": curv.pairs.iter().zip(&curv.omega2).map(|(pair, m)| json!({"pair": pair, "entries": render(m)})).collect::<Vec<_>>(),
        });
    }
    let flat = result["flatness"]["flat"].as_bool().unwrap_or(false);
    Ok(StepReport {
        step: Step::Curvature,
        verdict: flat,
        result,
    })
}

fn affine_rank_step(src: &WebSource) -> Result<StepReport, PipelineError> {
    let aw = src.affine().ok_or(PipelineError::Unsupported {
        step: "affine-rank",
        needs: "an affine_forms document",
    })?;
    let r = affine_rank_report(aw)?;
    Ok(StepReport {
        step: Step::AffineRank,
        verdict: r.ordinary,
        result: serde_json::to_value(&r).expect("serializable"),
    })
}

fn abelian_step(src: &WebSource, cap: Option<u32>, with_basis: bool) -> Result<StepReport, PipelineError> {
    let aw = src.affine().ok_or(PipelineError::Unsupported {
        step: "abelian",
        needs: "an affine_forms document",
    })?;
    let cap = match cap {
        Some(c) => c,
        None => default_degree_cap(aw)?,
    };
    let basis = solve_abelian_relations(aw, cap);
    let formula = match affine_rank_report(aw) {
        Ok(r) => Some(r.rank),
        Err(AffineError::NotStrongGeneralPosition { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut result = json!({
        "degree_cap": cap,
        "dimension": basis.dimension,
        "affine_rank": formula,
    });
    if with_basis {
        result["basis"] = serde_json::to_value(&basis.basis).expect("serializable");
    }
    Ok(StepReport {
        step: Step::Abelian,
        verdict: formula.is_none_or(|r| r == basis.dimension),
        result,
    })
}

/// Runs `steps` on a loaded document.
pub fn run(command: &str, doc: &LoadedDocument, steps: &[Step], opts: &RunOptions) -> Result<Report, PipelineError> {
    let mut cfg = doc.document.sampling.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = opts.trials {
        cfg.trials = trials;
    }
    let src = doc.build()?;
    let rank_tol = opts.tol.unwrap_or(DEFAULT_RANK_TOL);
    let mut reports = Vec::with_capacity(steps.len());
    let mut tolerance = rank_tol;
    for &step in steps {
        let r = match step {
            Step::Check => check_step(require_web(&src, "check")?, &cfg, rank_tol)?,
            Step::Jets => jets_step(require_web(&src, "jets")?, &cfg, rank_tol, opts.order)?,
            Step::Curvature => {
                tolerance = opts.tol.unwrap_or(DEFAULT_FLAT_TOL);
                curvature_step(require_web(&src, "curvature")?, &cfg, tolerance)?
            }
            Step::AffineRank => affine_rank_step(&src)?,
            Step::Abelian => abelian_step(&src, opts.degree_cap, opts.basis)?,
        };
        reports.push(r);
    }
    let coordinate_change = src
        .web()
        .and_then(Web::coordinate_change)
        .map(|c| serde_json::to_value(c).expect("serializable"));
    Ok(Report {
        schema: SCHEMA,
        command: command.to_string(),
        input_digest: doc.digest(),
        sampling: cfg,
        tolerance,
        coordinate_change,
        steps: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{conic_affine, six_web, SixWebConstants};

    #[test]
    fn six_web_constant_pipeline() {
        let doc = LoadedDocument::from_document(six_web(&SixWebConstants::default(), "13").unwrap());
        let opts = RunOptions {
            trials: Some(3),
            ..RunOptions::default()
        };
        let r = run("pipeline", &doc, &[Step::Check, Step::Jets, Step::Curvature], &opts).unwrap();
        assert_eq!(r.exit_code(), exit::OK);
        let jets = &r.steps[1].result;
        let dims: Vec<u64> = jets["points"][0]["dims"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d["dim"].as_u64().unwrap())
            .collect();
        assert_eq!(dims, vec![3, 3]);
        assert_eq!(r.to_json(), run("pipeline", &doc, &[Step::Check, Step::Jets, Step::Curvature], &opts).unwrap().to_json());
    }

    #[test]
    fn conic_pipeline_is_negative() {
        let doc = LoadedDocument::from_document(conic_affine(&SixWebConstants::default(), None).unwrap());
        let r = run("pipeline", &doc, &[Step::AffineRank, Step::Abelian], &RunOptions::default()).unwrap();
        assert_eq!(r.steps[0].result["rank"], 4);
        assert_eq!(r.steps[1].result["dimension"], 4);
        assert!(!r.steps[0].verdict && r.steps[1].verdict);
        assert_eq!(r.exit_code(), exit::NEGATIVE);
    }

    #[test]
    fn affine_steps_need_affine_input() {
        let doc = LoadedDocument::from_document(six_web(&SixWebConstants::default(), "13").unwrap());
        assert!(matches!(
            run("x", &doc, &[Step::AffineRank], &RunOptions::default()),
            Err(PipelineError::Unsupported { .. })
        ));
    }
}
