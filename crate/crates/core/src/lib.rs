//! Codimension-one webs in complex n-space: rank bounds, ordinariness,
//! jet prolongation of abelian relations, affine webs, and the adapted
//! connection with its curvature.

pub mod affine;
pub mod combinatorics;
pub mod connection;
pub mod diff;
pub mod document;
pub mod examples;
pub mod expr;
pub mod jets;
pub mod linalg;
pub mod moments;
pub mod report;
pub mod scalar;
pub mod sampling;
pub mod series;
pub mod web;

pub use affine::{affine_rank, is_ordinary_affine, solve_abelian_relations, veronese_rank, AbelianRelationBasis, AffineWeb};
pub use combinatorics::{bounds, c, enumerate_partitions, pi_castelnuovo, pi_prime, BoundsReport, MultiIndex};
pub use connection::{curvature, flatness_test, Frame};
pub use document::{LoadedDocument, WebDocument};
pub use expr::{parse, Expr, ExprError, Point, Value};
pub use moments::{moment_matrix, ordinariness};
pub use sampling::SamplingConfig;
pub use scalar::{CRational, Scalar};
pub use web::Web;
