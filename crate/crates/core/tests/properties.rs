mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use webrank_core::linalg::{exact_rank, numeric_rank, rref_exact, Matrix, DEFAULT_RANK_TOL};
use webrank_core::report::{self, RunOptions, Step};
use webrank_core::{affine_rank, solve_abelian_relations, veronese_rank, AffineWeb, CRational, LoadedDocument, WebDocument};

use common::{integer_forms, to_rationals};

fn int_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, cols), rows)
}

/// Low-rank products `A·B` exercise the fallback path of the rank shortcut.
fn product_matrix() -> impl Strategy<Value = Matrix<CRational>> {
    (1usize..=6, 1usize..=6, 1usize..=4).prop_flat_map(|(r, c, k)| {
        (int_matrix(r, k), int_matrix(k, c)).prop_map(|(a, b)| {
            let a = Matrix::from_rows(a.iter().map(|r| r.iter().map(|&v| CRational::from_int(v)).collect()).collect());
            let b = Matrix::from_rows(b.iter().map(|r| r.iter().map(|&v| CRational::from_int(v)).collect()).collect());
            a.mul(&b)
        })
    })
}

fn invertible_3x3() -> impl Strategy<Value = Vec<Vec<i64>>> {
    int_matrix(3, 3).prop_filter("singular", |m| {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        det != 0
    })
}

fn affine_doc(forms: &[Vec<i64>]) -> WebDocument {
    let json = serde_json::json!({ "n": forms[0].len(), "affine_forms": forms });
    serde_json::from_value(json).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rank_shortcut_matches_row_reduction(m in product_matrix()) {
        let mut reduced = m.clone();
        prop_assert_eq!(exact_rank(&m).rank, rref_exact(&mut reduced).len());
    }

    #[test]
    fn exact_and_numeric_rank_agree(m in product_matrix()) {
        let f = m.map(CRational::to_complex);
        let info = numeric_rank::<Complex64>(&f, DEFAULT_RANK_TOL);
        prop_assume!(!info.inconclusive);
        prop_assert_eq!(info.rank, exact_rank(&m).rank);
    }

    #[test]
    fn veronese_rank_is_linearly_invariant((_, forms) in integer_forms(vec![3], 9), g in invertible_3x3(), h in 1u32..=3) {
        let aw = AffineWeb::new(to_rationals(&forms));
        prop_assume!(aw.is_ok());
        let moved: Vec<Vec<i64>> = forms
            .iter()
            .map(|f| (0..3).map(|j| (0..3).map(|k| f[k] * g[k][j]).sum()).collect())
            .collect();
        let aw = aw.unwrap();
        let moved = AffineWeb::new(to_rationals(&moved)).unwrap();
        prop_assert_eq!(veronese_rank(&aw, h), veronese_rank(&moved, h));
    }

    #[test]
    fn rank_ignores_form_scaling((_, forms) in integer_forms(vec![2, 3], 8), scale in prop::sample::select(vec![-5i64, -2, 3, 7])) {
        let aw = AffineWeb::new(to_rationals(&forms));
        prop_assume!(aw.is_ok());
        let scaled: Vec<Vec<i64>> = forms.iter().map(|f| f.iter().map(|v| v * scale).collect()).collect();
        let scaled = AffineWeb::new(to_rationals(&scaled)).unwrap();
        prop_assert_eq!(affine_rank(&aw.unwrap()).ok(), affine_rank(&scaled).ok());
    }

    #[test]
    fn solved_relations_vanish((_, forms) in integer_forms(vec![2, 3], 7), x in common::rational_point(3), cap in 0u32..=2) {
        let aw = AffineWeb::new(to_rationals(&forms));
        prop_assume!(aw.is_ok());
        let aw = aw.unwrap();
        let basis = solve_abelian_relations(&aw, cap);
        for r in 0..basis.dimension {
            let res = basis.residuals_at(&aw, r, &x[..aw.n()]);
            prop_assert!(res.iter().all(CRational::is_zero));
        }
    }

    #[test]
    fn reports_are_deterministic((_, forms) in integer_forms(vec![2, 3], 6), seed in any::<u64>()) {
        let doc = LoadedDocument::from_document(affine_doc(&forms));
        prop_assume!(doc.build().is_ok());
        let opts = RunOptions { seed: Some(seed), trials: Some(3), ..RunOptions::default() };
        let steps = [Step::Check, Step::AffineRank, Step::Abelian];
        let go = || report::run("webrank pipeline", &doc, &steps, &opts).map(|r| r.to_json()).map_err(|e| e.to_string());
        let (a, b) = (go(), go());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn document_digest_survives_round_trip((_, forms) in integer_forms(vec![2, 3], 6)) {
        let doc = LoadedDocument::from_document(affine_doc(&forms));
        let again = LoadedDocument::parse(&doc.text).unwrap();
        prop_assert_eq!(doc.digest(), again.digest());
    }
}
