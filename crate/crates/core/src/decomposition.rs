//! PCA whitening followed by FastICA.
//!
//! Trials are concatenated along time and unmixed spatially: each factor is
//! a (channel topography, activation time course) pair. Activations have
//! unit variance; scale lives in the topography (mixing column).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NofError, Result};
use crate::matrix::{covariance_centered, row_major, row_means};
use crate::testbed::EpochTensor;

/// How many principal components survive whitening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSelection {
    All,
    Count(usize),
    /// Smallest number of components whose eigenvalues reach this fraction
    /// of total variance.
    Variance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenedData {
    /// components × samples
    #[serde(with = "row_major")]
    pub whitened: DMatrix<f64>,
    /// components × channels
    #[serde(with = "row_major")]
    pub whitening: DMatrix<f64>,
    /// channels × components
    #[serde(with = "row_major")]
    pub dewhitening: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub retained_variance: f64,
    pub channels: Vec<String>,
}

impl WhitenedData {
    pub fn n_components(&self) -> usize {
        self.whitened.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.whitened.ncols()
    }

    /// Centered input projected onto the retained principal subspace, in
    /// channel space.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.dewhitening * &self.whitened
    }
}

pub fn center_and_whiten(epochs: &EpochTensor, selection: ComponentSelection) -> Result<WhitenedData> {
    whiten_matrix(&epochs.concatenated(), epochs.montage.channels(), selection)
}

/// Whitens a channels × samples matrix.
pub fn whiten_matrix(
    x: &DMatrix<f64>,
    channels: &[String],
    selection: ComponentSelection,
) -> Result<WhitenedData> {
    let (n_ch, n_s) = x.shape();
    if channels.len() != n_ch {
        return Err(NofError::invalid(format!(
            "{} channel names for {} rows",
            channels.len(),
            n_ch
        )));
    }
    if n_s <= n_ch {
        return Err(NofError::invalid(format!(
            "need more samples than channels ({n_s} samples, {n_ch} channels)"
        )));
    }
    let mean = row_means(x);
    let mut centered = x.clone();
    for (i, m) in mean.iter().enumerate() {
        centered.row_mut(i).add_scalar_mut(-m);
    }
    let cov = covariance_centered(&centered);
    let max_var = (0..n_ch).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    for i in 0..n_ch {
        if cov[(i, i)] <= max_var * 1e-14 {
            return Err(NofError::ZeroVarianceChannel(channels[i].clone()));
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n_ch).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let rank = values.iter().filter(|&&v| v > values[0] * 1e-10).count();

    let k = match selection {
        ComponentSelection::All => rank,
        ComponentSelection::Count(k) => {
            if k == 0 {
                return Err(NofError::invalid("n_components must be >= 1"));
            }
            if k > n_ch {
                return Err(NofError::invalid(format!(
                    "requested {k} components from {n_ch} channels"
                )));
            }
            if k > rank {
                return Err(NofError::invalid(format!(
                    "requested {k} components but the data has rank {rank}"
                )));
            }
            k
        }
        ComponentSelection::Variance(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(NofError::invalid(format!("variance fraction {f} outside (0, 1]")));
            }
            let mut acc = 0.0;
            let mut k = 0;
            while k < rank {
                acc += values[k];
                k += 1;
                if acc >= f * total {
                    break;
                }
            }
            k
        }
    };

    let mut whitening = DMatrix::zeros(k, n_ch);
    let mut dewhitening = DMatrix::zeros(n_ch, k);
    for (r, &src) in order.iter().take(k).enumerate() {
        let s = values[r].sqrt();
        let v = eig.eigenvectors.column(src);
        for c in 0..n_ch {
            whitening[(r, c)] = v[c] / s;
            dewhitening[(c, r)] = v[c] * s;
        }
    }
    let whitened = &whitening * &centered;
    let retained: f64 = values[..k].iter().sum();
    Ok(WhitenedData {
        whitened,
        whitening,
        dewhitening,
        mean,
        eigenvalues: values[..k].to_vec(),
        retained_variance: if total > 0.0 { retained / total } else { 0.0 },
        channels: channels.to_vec(),
    })
}

/// Nonlinearity used in the negentropy approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// G(u) = log cosh(αu) / α, g(u) = tanh(αu).
    LogCosh { alpha: f64 },
    /// G(u) = u⁴/4, g(u) = u³.
    Cube,
}

impl Contrast {
    fn apply(&self, u: f64) -> (f64, f64) {
        match *self {
            Contrast::LogCosh { alpha } => {
                let t = (alpha * u).tanh();
                (t, alpha * (1.0 - t * t))
            }
            Contrast::Cube => (u * u * u, 3.0 * u * u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastIcaConfig {
    pub contrast: Contrast,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Number of factors; defaults to all whitened components.
    pub n_factors: Option<usize>,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        FastIcaConfig {
            contrast: Contrast::LogCosh { alpha: 1.0 },
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
            n_factors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorDecomposition {
    /// `FA1`..`FAk`, ordered by descending channel-space variance.
    pub ids: Vec<String>,
    pub channels: Vec<String>,
    /// factors × channels
    #[serde(with = "row_major")]
    pub unmixing: DMatrix<f64>,
    /// channels × factors; columns are factor topographies.
    #[serde(with = "row_major")]
    pub mixing: DMatrix<f64>,
    /// Orthonormal rotation applied in whitened space (factors × components).
    #[serde(with = "row_major")]
    pub rotation: DMatrix<f64>,
    /// Channel means removed before unmixing.
    pub mean: Vec<f64>,
    /// factors × samples, unit variance per row.
    #[serde(with = "row_major")]
    pub activations: DMatrix<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl FactorDecomposition {
    pub fn n_factors(&self) -> usize {
        self.ids.len()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|f| f == id)
            .ok_or_else(|| NofError::UnknownFactor(id.to_string()))
    }

    pub fn topography(&self, factor: usize) -> Vec<f64> {
        self.mixing.column(factor).iter().copied().collect()
    }

    /// Factor activations for arbitrary channels × samples data.
    pub fn activations_for(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.channels.len() {
            return Err(NofError::invalid(format!(
                "data has {} channels, decomposition expects {}",
                x.nrows(),
                self.channels.len()
            )));
        }
        let mut centered = x.clone();
        for (i, m) in self.mean.iter().enumerate() {
            centered.row_mut(i).add_scalar_mut(-m);
        }
        Ok(&self.unmixing * centered)
    }
}

/// Symmetric decorrelation: W ← (W Wᵀ)^{-1/2} W.
fn sym_decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.max(1e-300).sqrt()));
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

pub fn fastica(white: &WhitenedData, cfg: &FastIcaConfig) -> Result<FactorDecomposition> {
    let k = white.n_components();
    let n = white.n_samples();
    let m = cfg.n_factors.unwrap_or(k);
    if k == 0 || m == 0 {
        return Err(NofError::invalid("need at least one component"));
    }
    if m > k {
        return Err(NofError::invalid(format!(
            "requested {m} factors but only {k} whitened components"
        )));
    }
    if n < k {
        return Err(NofError::invalid(format!(
            "fewer samples ({n}) than components ({k})"
        )));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(NofError::config("FastICA needs tol > 0 and max_iter >= 1"));
    }

    let z = &white.whitened;
    let zt = z.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = DMatrix::from_fn(m, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = sym_decorrelate(&init);

    let mut converged = false;
    let mut n_iter = 0;
    let inv_n = 1.0 / n as f64;
    while n_iter < cfg.max_iter {
        n_iter += 1;
        let y = &w * z;
        let mut g = DMatrix::zeros(m, n);
        let mut gprime_mean = vec![0.0; m];
        for j in 0..n {
            for i in 0..m {
                let (gv, dv) = cfg.contrast.apply(y[(i, j)]);
                g[(i, j)] = gv;
                gprime_mean[i] += dv;
            }
        }
        let mut w_new = (&g * &zt) * inv_n;
        for i in 0..m {
            let d = gprime_mean[i] * inv_n;
            for c in 0..k {
                w_new[(i, c)] -= d * w[(i, c)];
            }
        }
        let w_new = sym_decorrelate(&w_new);
        let lim = (&w_new * w.transpose())
            .diagonal()
            .iter()
            .map(|d| (1.0 - d.abs()).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if lim < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {} iterations", cfg.max_iter);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(NofError::numerical("FastICA produced non-finite weights"));
    }

    let mut mixing = &white.dewhitening * w.transpose();
    // Order by channel-space variance, then fix signs.
    let norms: Vec<f64> = (0..m).map(|f| mixing.column(f).norm_squared()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut rot = DMatrix::zeros(m, k);
    for (dst, &src) in order.iter().enumerate() {
        let col = mixing.column(src);
        let mut best = 0;
        for c in 1..col.len() {
            if col[c].abs() > col[best].abs() {
                best = c;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        rot.row_mut(dst).copy_from(&(w.row(src) * sign));
    }
    mixing = &white.dewhitening * rot.transpose();
    let unmixing = &rot * &white.whitening;
    let activations = &rot * z;

    Ok(FactorDecomposition {
        ids: (1..=m).map(|i| format!("FA{i}")).collect(),
        channels: white.channels.clone(),
        unmixing,
        mixing,
        rotation: rot,
        mean: white.mean.clone(),
        activations,
        converged,
        n_iter,
    })
}

/// Channel-space contribution (channels × samples) of the chosen factors.
pub fn backproject<S: AsRef<str>>(
    dec: &FactorDecomposition,
    factor_subset: &[S],
    white: &WhitenedData,
) -> Result<DMatrix<f64>> {
    if factor_subset.is_empty() {
        return Err(NofError::invalid("factor subset is empty"));
    }
    if white.n_samples() != dec.activations.ncols() || white.channels != dec.channels {
        return Err(NofError::invalid(
            "whitened data does not match the decomposition",
        ));
    }
    let mut out = DMatrix::zeros(dec.channels.len(), dec.activations.ncols());
    for id in factor_subset {
        let f = dec.index_of(id.as_ref())?;
        out += dec.mixing.column(f) * dec.activations.row(f);
    }
    Ok(out)
}
