//! Web description documents (JSON).
//!
//! ```json
//! {
//!   "n": 3,
//!   "parameters": { "h": 11 },
//!   "slopes": [["0", "0"], ["2", "4"], ["h", "y"]],
//!   "sampling": { "seed": 7, "trials": 10 }
//! }
//! ```
//!
//! Exactly one of `first_integrals`, `slopes` or `affine_forms` must be
//! present. Parameter values are integers or rational strings such as
//! `"3/2"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affine::{AffineError, AffineWeb};
use crate::expr::{parse, Expr};
use crate::sampling::SamplingConfig;
use crate::scalar::CRational;
use crate::web::{FirstIntegralWeb, Web, WebError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DocumentError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: in {field}: {message}")]
    Expression {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("document must contain exactly one of first_integrals, slopes, affine_forms (found {found})")]
    Source { found: usize },
    #[error("parameter `{name}`: invalid rational `{value}`")]
    Parameter { name: String, value: String },
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// A rational written as a JSON integer or string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Int(i64),
    Text(String),
}

impl RationalText {
    fn parse(&self) -> Option<CRational> {
        match self {
            RationalText::Int(v) => Some(CRational::from_int(*v)),
            RationalText::Text(s) => s.parse().ok(),
        }
    }
}

impl std::fmt::Display for RationalText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RationalText::Int(v) => write!(f, "{v}"),
            RationalText::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebDocument {
    pub n: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, RationalText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_integrals: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine_forms: Option<Vec<Vec<RationalText>>>,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

/// What a document describes once parsed and bound.
#[derive(Clone, Debug)]
pub enum WebSource {
    General(Web),
    /// The `Web` view is absent when some form has no `x_n` term.
    Affine(AffineWeb, Option<Web>),
}

impl WebSource {
    pub fn web(&self) -> Option<&Web> {
        match self {
            WebSource::General(w) => Some(w),
            WebSource::Affine(_, w) => w.as_ref(),
        }
    }

    pub fn affine(&self) -> Option<&AffineWeb> {
        match self {
            WebSource::Affine(a, _) => Some(a),
            WebSource::General(_) => None,
        }
    }
}

/// A parsed document with its raw text, kept for diagnostics and digests.
#[derive(Clone, Debug)]
pub struct LoadedDocument {
    pub document: WebDocument,
    pub text: String,
}

// 1-based (line, column) of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl LoadedDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let document: WebDocument = serde_json::from_str(text).map_err(|e| DocumentError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(LoadedDocument {
            document,
            text: text.to_string(),
        })
    }

    pub fn from_document(document: WebDocument) -> Self {
        let text = serde_json::to_string_pretty(&document).expect("documents serialize");
        LoadedDocument { document, text }
    }

    /// SHA-256 of the raw text, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn expression(&self, field: String, source: &str) -> Result<Expr, DocumentError> {
        parse(source, self.document.n).map_err(|e| {
            let quoted = serde_json::to_string(source).expect("strings serialize");
            let (line, column) = match self.text.find(&quoted) {
                Some(at) => {
                    let (l, c) = line_column(&self.text, at);
                    (l, c + e.column)
                }
                None => (0, e.column),
            };
            DocumentError::Expression {
                field,
                line,
                column,
                message: e.message,
            }
        })
    }

    pub fn parameters(&self) -> Result<BTreeMap<String, CRational>, DocumentError> {
        self.document
            .parameters
            .iter()
            .map(|(name, v)| {
                v.parse().map(|q| (name.clone(), q)).ok_or_else(|| DocumentError::Parameter {
                    name: name.clone(),
                    value: v.to_string(),
                })
            })
            .collect()
    }

    fn bound(&self, e: Expr, params: &BTreeMap<String, CRational>) -> Result<Expr, DocumentError> {
        let e = e.bind(params).simplify();
        match e.parameters().into_iter().next() {
            Some(name) => Err(DocumentError::Unbound(name)),
            None => Ok(e),
        }
    }

    /// Parses every expression, binds parameters and builds the web.
    pub fn build(&self) -> Result<WebSource, DocumentError> {
        let doc = &self.document;
        let found = [doc.first_integrals.is_some(), doc.slopes.is_some(), doc.affine_forms.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if found != 1 {
            return Err(DocumentError::Source { found });
        }
        let params = self.parameters()?;
        if let Some(us) = &doc.first_integrals {
            let integrals = us
                .iter()
                .enumerate()
                .map(|(i, u)| self.bound(self.expression(format!("first_integrals[{i}]"), u)?, &params))
                .collect::<Result<Vec<_>, _>>()?;
            let fw = FirstIntegralWeb { n: doc.n, integrals };
            return Ok(WebSource::General(Web::from_first_integrals_with_change(&fw, &doc.sampling)?));
        }
        if let Some(rows) = &doc.slopes {
            let mut slopes = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for (j, s) in row.iter().enumerate() {
                    out.push(self.bound(self.expression(format!("slopes[{i}][{j}]"), s)?, &params)?);
                }
                slopes.push(out);
            }
            return Ok(WebSource::General(Web::new(doc.n, slopes)?));
        }
        let rows = doc.affine_forms.as_ref().expect("one source present");
        let mut forms = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (j, v) in row.iter().enumerate() {
                let q = match v {
                    RationalText::Text(s) => params.get(s.trim()).cloned().or_else(|| v.parse()),
                    RationalText::Int(_) => v.parse(),
                };
                out.push(q.ok_or_else(|| DocumentError::Parameter {
                    name: format!("affine_forms[{i}][{j}]"),
                    value: v.to_string(),
                })?);
            }
            forms.push(out);
        }
        let aw = AffineWeb::new(forms)?;
        let web = if aw.d() > aw.n() {
            Web::from_linear_forms(aw.forms()).ok()
        } else {
            None
        };
        Ok(WebSource::Affine(aw, web))
    }
}
