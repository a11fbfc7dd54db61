//! Small dense-matrix helpers shared by the numeric modules.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// JSON form of a dense matrix: explicit dimensions plus row-major values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<MatrixJson> for DMatrix<f64> {
    type Error = String;

    fn try_from(m: MatrixJson) -> Result<Self, String> {
        if m.rows * m.cols != m.data.len() {
            return Err(format!(
                "matrix declares {}x{} but holds {} values",
                m.rows,
                m.cols,
                m.data.len()
            ));
        }
        Ok(DMatrix::from_row_slice(m.rows, m.cols, &m.data))
    }
}

/// `#[serde(with = "crate::matrix::row_major")]` for `DMatrix<f64>` fields.
pub mod row_major {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        DMatrix::try_from(m).map_err(serde::de::Error::custom)
    }
}

/// Population (1/N) covariance of the rows of a variables × samples matrix
/// that is already centered.
pub(crate) fn covariance_centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols() as f64;
    (x * x.transpose()) / n
}

pub(crate) fn row_means(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.ncols() as f64;
    (0..x.nrows()).map(|i| x.row(i).sum() / n).collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}
