//! Shared inputs for the criterion benches.

use webrank_core::examples::{self, SixWebConstants};
use webrank_core::linalg::Matrix;
use webrank_core::{AffineWeb, CRational, LoadedDocument, Web, WebDocument};

fn source(doc: WebDocument) -> webrank_core::document::WebSource {
    LoadedDocument::from_document(doc).build().expect("built-in example builds")
}

pub fn six_web(psi: &str) -> Web {
    source(examples::six_web(&SixWebConstants::default(), psi).expect("valid psi"))
        .web()
        .expect("general web")
        .clone()
}

pub fn fifteen_web() -> Web {
    source(examples::fifteen_web()).web().expect("general web").clone()
}

pub fn conic(off: bool) -> AffineWeb {
    let g = examples::default_off_conic();
    source(examples::conic_affine(&SixWebConstants::default(), off.then_some(&g)).expect("valid constants"))
        .affine()
        .expect("affine web")
        .clone()
}

/// Dense rational matrix with entries `((7i + 3j) mod 11 − 5) / (1 + (i + j) mod 4)`.
pub fn dense_rational(rows: usize, cols: usize) -> Matrix<CRational> {
    Matrix::from_fn(rows, cols, |i, j| {
        CRational::from_frac(((7 * i + 3 * j) % 11) as i64 - 5, 1 + ((i + j) % 4) as i64)
    })
}

pub fn point(coords: &[(i64, i64)]) -> Vec<CRational> {
    coords.iter().map(|&(n, d)| CRational::from_frac(n, d)).collect()
}
