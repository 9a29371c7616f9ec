//! JSON system specifications and CSV exports.
//!
//! A specification document looks like
//!
//! ```json
//! {"dimension": 2, "kind": "periodic", "period": 6.283185307179586,
//!  "samples": [{"t": 0.0, "matrix": [[-1, 1], [[-1, 0], -1]]}, ...]}
//! ```
//!
//! Entries are numbers or `[re, im]` pairs. Periodic systems may give
//! `"fourier": [{"k": 0, "cos": M, "sin": M}, ...]` instead of samples, meaning
//! `A(t) = Σ cos_k cos(2πkt/T) + sin_k sin(2πkt/T)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dichotomy::ProjectionFamily;
use crate::linalg::CMatrix;
use crate::propagator::{FourierTerm, PeriodicTable, SampleTable, SystemKind, SystemSpec};
use crate::serde_util::{fmt_complex, fmt_f64};
use crate::suite::EquivalenceTable;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed specification: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] crate::Error),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    fn from_value(z: Complex64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

type RawMatrix = Vec<Vec<Entry>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Constant,
    Periodic,
    Sampled,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    t: f64,
    matrix: RawMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFourier {
    k: u32,
    cos: RawMatrix,
    sin: RawMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    dimension: usize,
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<RawSample>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fourier: Option<Vec<RawFourier>>,
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(crate::Error::InvalidSpec(msg.into()))
}

fn to_matrix(raw: &RawMatrix, d: usize, what: &str) -> Result<CMatrix, SpecError> {
    if raw.len() != d || raw.iter().any(|row| row.len() != d) {
        return Err(invalid(format!("{what} must be {d}x{d}")));
    }
    let m = CMatrix::from_fn(d, d, |i, j| raw[i][j].value());
    if !crate::linalg::is_finite(&m) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    Ok(m)
}

fn from_matrix(m: &CMatrix) -> RawMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry::from_value(m[(i, j)])).collect())
        .collect()
}

fn sample_table(raw: &[RawSample], d: usize) -> Result<SampleTable, SpecError> {
    let times = raw.iter().map(|s| s.t).collect();
    let matrices = raw
        .iter()
        .enumerate()
        .map(|(k, s)| to_matrix(&s.matrix, d, &format!("samples[{k}].matrix")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleTable::new(times, matrices)?)
}

/// Parses a JSON specification; parse errors carry line and column.
pub fn parse_spec(text: &str) -> Result<SystemSpec, SpecError> {
    let raw: RawSpec = serde_json::from_str(text)?;
    let d = raw.dimension;
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let unexpected = |field: &str| invalid(format!("field \"{field}\" does not apply to this kind"));
    let spec = match raw.kind {
        RawKind::Constant => {
            if raw.period.is_some() {
                return Err(unexpected("period"));
            }
            if raw.samples.is_some() {
                return Err(unexpected("samples"));
            }
            if raw.fourier.is_some() {
                return Err(unexpected("fourier"));
            }
            let m = raw
                .matrix
                .as_ref()
                .ok_or_else(|| invalid("constant kind needs \"matrix\""))?;
            SystemSpec::constant(to_matrix(m, d, "matrix")?)?
        }
        RawKind::Periodic => {
            if raw.matrix.is_some() {
                return Err(unexpected("matrix"));
            }
            let period = raw.period.ok_or_else(|| invalid("periodic kind needs \"period\""))?;
            match (&raw.samples, &raw.fourier) {
                (Some(samples), None) => SystemSpec::periodic_samples(period, sample_table(samples, d)?)?,
                (None, Some(terms)) => {
                    let terms = terms
                        .iter()
                        .enumerate()
                        .map(|(k, t)| {
                            Ok(FourierTerm {
                                harmonic: t.k,
                                cos: to_matrix(&t.cos, d, &format!("fourier[{k}].cos"))?,
                                sin: to_matrix(&t.sin, d, &format!("fourier[{k}].sin"))?,
                            })
                        })
                        .collect::<Result<Vec<_>, SpecError>>()?;
                    SystemSpec::periodic_fourier(period, terms)?
                }
                _ => {
                    return Err(invalid(
                        "periodic kind needs exactly one of \"samples\" and \"fourier\"",
                    ))
                }
            }
        }
        RawKind::Sampled => {
            if raw.matrix.is_some() {
                return Err(unexpected("matrix"));
            }
            if raw.period.is_some() {
                return Err(unexpected("period"));
            }
            if raw.fourier.is_some() {
                return Err(unexpected("fourier"));
            }
            let samples = raw
                .samples
                .as_ref()
                .ok_or_else(|| invalid("sampled kind needs \"samples\""))?;
            SystemSpec::sampled(sample_table(samples, d)?)?
        }
    };
    Ok(spec)
}

/// Inverse of [`parse_spec`].
pub fn spec_to_json(spec: &SystemSpec) -> String {
    let d = spec.dimension();
    let samples = |t: &SampleTable| {
        t.times()
            .iter()
            .zip(t.matrices())
            .map(|(&t, m)| RawSample {
                t,
                matrix: from_matrix(m),
            })
            .collect()
    };
    let mut raw = RawSpec {
        dimension: d,
        kind: RawKind::Constant,
        matrix: None,
        period: None,
        samples: None,
        fourier: None,
    };
    match spec.kind() {
        SystemKind::Constant(a) => raw.matrix = Some(from_matrix(a)),
        SystemKind::Periodic { period, table } => {
            raw.kind = RawKind::Periodic;
            raw.period = Some(*period);
            match table {
                PeriodicTable::Samples(t) => raw.samples = Some(samples(t)),
                PeriodicTable::Fourier(terms) => {
                    raw.fourier = Some(
                        terms
                            .iter()
                            .map(|t| RawFourier {
                                k: t.harmonic,
                                cos: from_matrix(&t.cos),
                                sin: from_matrix(&t.sin),
                            })
                            .collect(),
                    )
                }
            }
        }
        SystemKind::Sampled(t) => {
            raw.kind = RawKind::Sampled;
            raw.samples = Some(samples(t));
        }
    }
    crate::serde_util::to_json(&raw).expect("specification serializes")
}

/// `re,im` rows.
pub fn eigenvalues_csv(eigs: &[Complex64]) -> String {
    let mut out = String::from("re,im\n");
    for z in eigs {
        let _ = writeln!(out, "{},{}", fmt_f64(z.re), fmt_f64(z.im));
    }
    out
}

/// Dense matrix, row-major, entries as `re+imj`.
pub fn matrix_csv(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_complex(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per block entry: `j,x,row,col,re,im`.
pub fn projection_family_csv(pf: &ProjectionFamily) -> String {
    let mut out = String::from("j,x,row,col,re,im\n");
    for (j, p) in pf.blocks.iter().enumerate() {
        let x = pf.x0 + j as f64 * pf.step;
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                let _ = writeln!(
                    out,
                    "{j},{},{r},{c},{},{}",
                    fmt_f64(x),
                    fmt_f64(p[(r, c)].re),
                    fmt_f64(p[(r, c)].im)
                );
            }
        }
    }
    out
}

/// `system,theorem,condition,verdict,margin` with verdict `true`, `false` or `degenerate`.
pub fn summary_csv(tables: &[EquivalenceTable]) -> String {
    let mut out = String::from("system,theorem,condition,verdict,margin\n");
    for t in tables {
        if let Some(err) = &t.error {
            let _ = writeln!(
                out,
                "{},{},error,failed,{:?}",
                t.system,
                t.theorem,
                err.replace(',', ";")
            );
            continue;
        }
        for c in &t.conditions {
            let verdict = if c.degenerate {
                "degenerate"
            } else if c.holds {
                "true"
            } else {
                "false"
            };
            let _ = writeln!(
                out,
                "{},{},{},{verdict},{}",
                t.system,
                t.theorem,
                c.label,
                fmt_f64(c.margin)
            );
        }
    }
    out
}
