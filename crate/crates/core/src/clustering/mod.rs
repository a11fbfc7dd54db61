//! Unsupervised grouping of factor summaries.
//!
//! Rows are projected into a numeric space ([`ObservationMatrix`]): numeric
//! attributes z-scored, selected categorical attributes one-hot encoded.
//! [`em`] fits Gaussian mixtures; [`hierarchy`] builds divisive and
//! agglomerative taxonomies that can be cut into ontology classes.

pub mod em;
pub mod hierarchy;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{NofError, Result};
use crate::features::{attribute_kind, AttrKind, AttrValue, FactorSummary};
use crate::matrix::row_major;

pub use em::{em_fit, em_predict, select_k_bic, ClusterModel, CovarianceType, EmConfig, Prediction};
pub use hierarchy::{
    agglomerative_hierarchy, divisive_hierarchy, taxonomy_to_classes, ClassAssignment, Cut,
    DivisiveConfig, Linkage, OntologyClass, Taxonomy, TaxonomyNode,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
    pub categorical_weight: f64,
    /// Z-score numeric columns.
    pub standardize: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            numeric: ["IN_min", "IN_max", "IN_mean", "SP_cor", "TI_max"]
                .map(String::from)
                .to_vec(),
            categorical: ["SP_max_ROI", "SP_min_ROI", "ROI"].map(String::from).to_vec(),
            categorical_weight: 1.0,
            standardize: true,
        }
    }
}

/// Rows × columns numeric observations with the per-column affine scaling
/// that produced them (`encoded = (raw - offset) / scale`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    pub columns: Vec<String>,
    #[serde(with = "row_major")]
    pub data: DMatrix<f64>,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ObservationMatrix {
    /// Unscaled observations.
    pub fn from_matrix(data: DMatrix<f64>) -> Self {
        let d = data.ncols();
        ObservationMatrix {
            columns: (0..d).map(|j| format!("x{j}")).collect(),
            data,
            offset: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(NofError::invalid("ragged observation rows"));
        }
        Ok(Self::from_matrix(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])))
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Column-wise z-scoring of the current data. Constant columns are left
    /// centered with unit scale.
    pub fn standardized(&self) -> Self {
        let (n, d) = self.data.shape();
        let mut out = self.clone();
        for j in 0..d {
            let col = self.data.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..n {
                out.data[(i, j)] = (self.data[(i, j)] - mean) / sd;
            }
            out.offset[j] = self.offset[j] + mean * self.scale[j];
            out.scale[j] = self.scale[j] * sd;
        }
        out
    }

    pub fn from_summaries(rows: &[FactorSummary], cfg: &EncodingConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(NofError::invalid("no summary rows to encode"));
        }
        let n = rows.len();
        let mut columns = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut offset = Vec::new();
        let mut scale = Vec::new();

        for name in &cfg.numeric {
            if attribute_kind(name) != Some(AttrKind::Numeric) {
                return Err(NofError::config(format!("`{name}` is not a numeric attribute")));
            }
            let vals: Vec<f64> = rows
                .iter()
                .map(|r| match r.value(name) {
                    Some(AttrValue::Num(v)) => v,
                    _ => unreachable!("checked numeric attribute"),
                })
                .collect();
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(NofError::invalid(format!("non-finite value in `{name}`")));
            }
            let (o, s) = if cfg.standardize {
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                if var == 0.0 {
                    // Carries no information and has no invertible scaling.
                    continue;
                }
                (mean, var.sqrt())
            } else {
                (0.0, 1.0)
            };
            columns.push(name.clone());
            cols.push(vals.iter().map(|v| (v - o) / s).collect());
            offset.push(o);
            scale.push(s);
        }

        for name in &cfg.categorical {
            if attribute_kind(name) != Some(AttrKind::Categorical) {
                return Err(NofError::config(format!("`{name}` is not a categorical attribute")));
            }
            let vals: Vec<&str> = rows
                .iter()
                .map(|r| match r.value(name) {
                    Some(AttrValue::Cat(v)) => v,
                    _ => unreachable!("checked categorical attribute"),
                })
                .collect();
            let mut levels: Vec<&str> = vals.clone();
            levels.sort_unstable();
            levels.dedup();
            for level in levels {
                columns.push(format!("{name}={level}"));
                cols.push(
                    vals.iter()
                        .map(|v| if *v == level { cfg.categorical_weight } else { 0.0 })
                        .collect(),
                );
                offset.push(0.0);
                scale.push(1.0);
            }
        }

        let d = cols.len();
        Ok(ObservationMatrix {
            columns,
            data: DMatrix::from_fn(n, d, |i, j| cols[j][i]),
            offset,
            scale,
        })
    }

    /// Projects onto the top `k` principal axes of the (centered) data.
    pub fn pca(&self, k: usize) -> Result<Self> {
        let (n, d) = self.data.shape();
        if k == 0 || k > d {
            return Err(NofError::config(format!("PCA needs 1..={d} components, got {k}")));
        }
        let means: Vec<f64> = (0..d).map(|j| self.data.column(j).sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, d, |i, j| self.data[(i, j)] - means[j]);
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut basis = DMatrix::zeros(d, k);
        for (c, &src) in order.iter().take(k).enumerate() {
            let mut v = eig.eigenvectors.column(src).clone_owned();
            // Deterministic sign: largest-magnitude loading positive.
            if v[v.iamax()] < 0.0 {
                v = -v;
            }
            basis.set_column(c, &v);
        }
        Ok(ObservationMatrix {
            columns: (1..=k).map(|i| format!("PC{i}")).collect(),
            data: centered * basis,
            offset: vec![0.0; k],
            scale: vec![1.0; k],
        })
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}
