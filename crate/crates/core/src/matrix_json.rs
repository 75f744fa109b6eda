//! JSON encoding of complex matrices: row-major nested arrays of `[re, im]`
//! pairs, e.g. `[[[1,0],[0,-1]],[[0,1],[2,0]]]`.
//!
//! Decoding rejects ragged rows, empty or non-square matrices and non-finite
//! entries.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::operator::{validate_square, CMatrix};

pub type Rows = Vec<Vec<[f64; 2]>>;

pub fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, Error> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    for row in rows {
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
    }
    let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
    validate_square(&m)?;
    Ok(m)
}

/// Matrix wrapper with the shared JSON representation.
#[derive(Clone, Debug, PartialEq)]
pub struct JsonMatrix(pub CMatrix);

impl Serialize for JsonMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        to_rows(&self.0).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JsonMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Rows::deserialize(deserializer)?;
        from_rows(&rows).map(JsonMatrix).map_err(D::Error::custom)
    }
}

/// For `#[serde(with = "matrix_json")]` on `CMatrix` fields.
pub fn serialize<S: Serializer>(m: &CMatrix, serializer: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(serializer)
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<CMatrix, D::Error> {
    JsonMatrix::deserialize(deserializer).map(|m| m.0)
}
