//! JSON model files and the small text formats used on the command line.
//!
//! System file: `{"J": [[...]]}` or `{"A": .., "B": .., "C": .., "D": ..}`.
//! Model file: `{"J0": [[...]], "params": [{"name", "M", "lo", "hi"}, ...]}`.
//! Matrices are row-major arrays of rows; every entry must be finite.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::{reduce, DescriptorSystem, Mode, ParametricJacobian};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum SystemJson {
    Reduced {
        #[serde(rename = "J")]
        j: Rows,
    },
    Descriptor {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B")]
        b: Rows,
        #[serde(rename = "C")]
        c: Rows,
        #[serde(rename = "D")]
        d: Rows,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemModel {
    Reduced(DMatrix<f64>),
    Descriptor(DescriptorSystem),
}

impl SystemModel {
    /// The state Jacobian, reducing a descriptor system if needed.
    pub fn jacobian(&self) -> Result<DMatrix<f64>> {
        match self {
            SystemModel::Reduced(j) => Ok(j.clone()),
            SystemModel::Descriptor(sys) => reduce(sys),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeJson {
    name: String,
    #[serde(rename = "M")]
    m: Rows,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    #[serde(rename = "J0")]
    j0: Rows,
    params: Vec<ModeJson>,
}

/// Builds a matrix from rows, rejecting ragged rows and non-finite entries.
/// An empty list of rows is the 0×0 matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse(format!(
                "{what}: row {r} has {} entries, row 0 has {ncols}",
                row.len()
            )));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("{what}: entry ({r}, {c}) is not finite")));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let m = matrix_from_rows(rows, what)?;
    if m.nrows() == 0 || !m.is_square() {
        return Err(Error::Parse(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

pub fn parse_system(text: &str) -> Result<SystemModel> {
    let raw: SystemJson = serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!(
            "system file: expected {{\"J\"}} or {{\"A\",\"B\",\"C\",\"D\"}}: {e}"
        ))
    })?;
    match raw {
        SystemJson::Reduced { j } => Ok(SystemModel::Reduced(square(&j, "J")?)),
        SystemJson::Descriptor { a, b, c, d } => {
            let a = square(&a, "A")?;
            let d = matrix_from_rows(&d, "D")?;
            let ny = d.nrows();
            // Zero algebraic variables leave B and C with no columns or rows,
            // which JSON can only spell as lists of empty rows.
            let b = if ny == 0 {
                DMatrix::zeros(a.nrows(), 0)
            } else {
                matrix_from_rows(&b, "B")?
            };
            let c = if ny == 0 {
                DMatrix::zeros(0, a.nrows())
            } else {
                matrix_from_rows(&c, "C")?
            };
            Ok(SystemModel::Descriptor(DescriptorSystem::new(a, b, c, d)?))
        }
    }
}

pub fn parse_model(text: &str) -> Result<ParametricJacobian> {
    let raw: ModelJson = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let j0 = square(&raw.j0, "J0")?;
    let mut modes = Vec::with_capacity(raw.params.len());
    for p in raw.params {
        if !p.lo.is_finite() || !p.hi.is_finite() || p.lo > p.hi {
            return Err(Error::Parse(format!(
                "parameter {:?}: bounds [{}, {}] are invalid",
                p.name, p.lo, p.hi
            )));
        }
        if modes.iter().any(|m: &Mode| m.name == p.name) {
            return Err(Error::Parse(format!("parameter {:?} is declared twice", p.name)));
        }
        let m = matrix_from_rows(&p.m, &format!("M of {:?}", p.name))?;
        modes.push(Mode {
            name: p.name,
            m,
            lo: p.lo,
            hi: p.hi,
        });
    }
    ParametricJacobian::new(j0, modes)
}

pub fn system_to_json(j: &DMatrix<f64>) -> String {
    serde_json::to_string_pretty(&SystemJson::Reduced { j: matrix_to_rows(j) }).expect("plain data serializes")
}

pub fn model_to_json(pj: &ParametricJacobian) -> String {
    let raw = ModelJson {
        j0: matrix_to_rows(pj.j0()),
        params: pj
            .modes()
            .iter()
            .map(|m| ModeJson {
                name: m.name.clone(),
                m: matrix_to_rows(&m.m),
                lo: m.lo,
                hi: m.hi,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("plain data serializes")
}

/// A comma-separated list of finite numbers, e.g. `0.5,1e-3,-2`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty number list".into()));
    }
    text.split(',')
        .map(|t| {
            let t = t.trim();
            let v: f64 = t.parse().map_err(|_| Error::Parse(format!("{t:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("{t:?} is not finite")))
            }
        })
        .collect()
}

/// A 0-based matrix entry written `i,j`.
pub fn parse_entry(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [i, j] => {
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("{s:?} is not an index")))
            };
            Ok((idx(i)?, idx(j)?))
        }
        _ => Err(Error::Parse(format!("entry must be written i,j, got {text:?}"))),
    }
}

/// An initial state: a JSON array of finite numbers.
pub fn parse_state(text: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("state file: entries must be finite".into()));
    }
    Ok(v)
}
