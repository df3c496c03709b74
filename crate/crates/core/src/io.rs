//! JSON input documents, report records and CSV output.
//!
//! Complex numbers travel as `[re, im]` arrays and matrices as row-major
//! nested arrays of them.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::backward::{BackwardError, MatrixPolynomial, Structure};
use crate::linalg::{ComplexMatrix, HermitianMatrix, LinalgError, SymmetricMatrix};
use crate::rayleigh::ConstraintSystem;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: malformed document: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: field `{field}`: {message}")]
    Shape {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: field `{field}`: {source}")]
    Invalid {
        path: PathBuf,
        field: String,
        #[source]
        source: LinalgError,
    },
    #[error("{path}: {source}")]
    Structure {
        path: PathBuf,
        #[source]
        source: BackwardError,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type WireMatrix = Vec<Vec<Complex64>>;

/// `{ "n", "k", "H", "constraints" }` with `k + 1` constraint matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "H")]
    pub h: WireMatrix,
    pub constraints: Vec<WireMatrix>,
}

/// `{ "degree", "n", "structure", "coefficients" }` with `degree + 1` matrices `A_0, …, A_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialFile {
    pub degree: usize,
    pub n: usize,
    pub structure: Structure,
    pub coefficients: Vec<WireMatrix>,
}

/// `{ "n", "M" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: WireMatrix,
}

pub fn to_wire(a: &ComplexMatrix) -> WireMatrix {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

fn from_wire(path: &Path, field: &str, w: &WireMatrix, n: usize) -> Result<ComplexMatrix, IoError> {
    let shape = |message: String| IoError::Shape {
        path: path.to_path_buf(),
        field: field.to_string(),
        message,
    };
    if w.len() != n {
        return Err(shape(format!("has {} rows, expected {n}", w.len())));
    }
    for (i, row) in w.iter().enumerate() {
        if row.len() != n {
            return Err(shape(format!("row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(shape(format!("entry ({i}, {j}) is not finite")));
            }
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| w[i][j]))
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_system_str(path: &Path, text: &str) -> Result<ConstraintSystem, IoError> {
    let doc: SystemFile = parse_json(path, text)?;
    system_from_file(path, &doc)
}

pub fn parse_system(path: &Path) -> Result<ConstraintSystem, IoError> {
    parse_system_str(path, &read(path)?)
}

pub fn system_from_file(path: &Path, doc: &SystemFile) -> Result<ConstraintSystem, IoError> {
    let shape = |field: &str, message: String| IoError::Shape {
        path: path.to_path_buf(),
        field: field.to_string(),
        message,
    };
    if doc.n == 0 {
        return Err(shape("n", "must be at least 1".into()));
    }
    if doc.constraints.len() != doc.k + 1 {
        return Err(shape(
            "constraints",
            format!("has {} matrices, expected k + 1 = {}", doc.constraints.len(), doc.k + 1),
        ));
    }
    let invalid = |field: String, source: LinalgError| IoError::Invalid {
        path: path.to_path_buf(),
        field,
        source,
    };
    let h = HermitianMatrix::new(from_wire(path, "H", &doc.h, doc.n)?).map_err(|e| invalid("H".into(), e))?;
    let mut cs = Vec::with_capacity(doc.constraints.len());
    for (j, w) in doc.constraints.iter().enumerate() {
        let field = format!("constraints[{j}]");
        let s = SymmetricMatrix::new(from_wire(path, &field, w, doc.n)?).map_err(|e| invalid(field, e))?;
        cs.push(s);
    }
    ConstraintSystem::new(h, cs).map_err(|e| shape("constraints", e.to_string()))
}

pub fn system_to_file(sys: &ConstraintSystem) -> SystemFile {
    SystemFile {
        n: sys.dim(),
        k: sys.k(),
        h: to_wire(sys.h().as_matrix()),
        constraints: sys.constraints().iter().map(|s| to_wire(s.as_matrix())).collect(),
    }
}

pub fn emit_system(sys: &ConstraintSystem) -> String {
    serde_json::to_string_pretty(&system_to_file(sys)).expect("system serializes")
}

pub fn parse_polynomial_str(path: &Path, text: &str) -> Result<MatrixPolynomial, IoError> {
    let doc: PolynomialFile = parse_json(path, text)?;
    polynomial_from_file(path, &doc)
}

pub fn parse_polynomial(path: &Path) -> Result<MatrixPolynomial, IoError> {
    parse_polynomial_str(path, &read(path)?)
}

pub fn polynomial_from_file(path: &Path, doc: &PolynomialFile) -> Result<MatrixPolynomial, IoError> {
    let shape = |field: &str, message: String| IoError::Shape {
        path: path.to_path_buf(),
        field: field.to_string(),
        message,
    };
    if doc.n == 0 {
        return Err(shape("n", "must be at least 1".into()));
    }
    if doc.degree == 0 {
        return Err(shape("degree", "must be at least 1".into()));
    }
    if doc.coefficients.len() != doc.degree + 1 {
        return Err(shape(
            "coefficients",
            format!("has {} matrices, expected degree + 1 = {}", doc.coefficients.len(), doc.degree + 1),
        ));
    }
    let coeffs = doc
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, w)| from_wire(path, &format!("coefficients[{j}]"), w, doc.n))
        .collect::<Result<Vec<_>, _>>()?;
    MatrixPolynomial::new(coeffs, doc.structure).map_err(|source| IoError::Structure {
        path: path.to_path_buf(),
        source,
    })
}

pub fn polynomial_to_file(p: &MatrixPolynomial) -> PolynomialFile {
    PolynomialFile {
        degree: p.degree(),
        n: p.size(),
        structure: p.structure(),
        coefficients: p.coefficients().iter().map(to_wire).collect(),
    }
}

pub fn emit_polynomial(p: &MatrixPolynomial) -> String {
    serde_json::to_string_pretty(&polynomial_to_file(p)).expect("polynomial serializes")
}

pub fn parse_matrix(path: &Path) -> Result<ComplexMatrix, IoError> {
    let doc: MatrixFile = parse_json(path, &read(path)?)?;
    if doc.n == 0 {
        return Err(IoError::Shape {
            path: path.to_path_buf(),
            field: "n".into(),
            message: "must be at least 1".into(),
        });
    }
    from_wire(path, "M", &doc.m, doc.n)
}

pub fn emit_matrix(m: &ComplexMatrix) -> String {
    serde_json::to_string_pretty(&MatrixFile {
        n: m.nrows(),
        m: to_wire(m),
    })
    .expect("matrix serializes")
}

/// Parses `"a+bi"`, `"a-bi"`, `"bi"`, `"a"` or `"a,b"`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse complex number '{s}' (use a+bi or a,b)");
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((a, b)) = t.split_once(',') {
        return Ok(Complex64::new(num(a)?, num(b)?));
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(Complex64::new(num(&t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (num(&body[..i])?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => num(x)?,
    };
    Ok(Complex64::new(re, im))
}

/// One evaluated point of a backward-error study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub lambda: Complex64,
    pub eta_unstructured: f64,
    pub eta_structured: f64,
    pub status: String,
    pub m_value: f64,
    pub t_hat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
}

pub const CSV_HEADER: [&str; 5] = ["lambda_re", "lambda_im", "eta_unstructured", "eta_structured", "status"];

/// 15 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.14e}")
    }
}

pub fn parse_float(s: &str) -> Result<f64, String> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| format!("bad number '{s}'")),
    }
}

pub fn records_to_csv(records: &[ReportRecord]) -> Result<String, IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            format_float(r.lambda.re),
            format_float(r.lambda.im),
            format_float(r.eta_unstructured),
            format_float(r.eta_structured),
            r.status.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `(λ, η, η^S, status)` rows of a CSV document written by [`records_to_csv`].
pub fn csv_rows(text: &str) -> Result<Vec<(Complex64, f64, f64, String)>, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let f = |i: usize| parse_float(&rec[i]);
        out.push((Complex64::new(f(0)?, f(1)?), f(2)?, f(3)?, rec[4].to_string()));
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}
