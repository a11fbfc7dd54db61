//! Gaussian mixture fitting by expectation-maximization.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ObservationMatrix;
use crate::error::{NofError, Result};
use crate::matrix::row_major;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceType {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub seed: u64,
    /// Stop once the log-likelihood gain of an iteration drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub covariance: CovarianceType,
    /// Eigenvalue floor relative to the mean per-dimension variance of the
    /// whole data set (trace / d).
    pub cov_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            seed: 0,
            tol: 1e-8,
            max_iter: 300,
            n_restarts: 5,
            covariance: CovarianceType::Diagonal,
            cov_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub covariance: CovarianceType,
    pub weights: Vec<f64>,
    /// k × d
    #[serde(with = "row_major")]
    pub means: DMatrix<f64>,
    pub covariances: Vec<CovJson>,
    /// Absolute eigenvalue floor applied to every covariance.
    pub floor: f64,
    pub assignments: Vec<usize>,
    pub log_likelihood: f64,
    /// Log-likelihood of the parameters entering each iteration, ending
    /// with the returned parameters.
    pub ll_history: Vec<f64>,
    pub n_iter: usize,
    pub restart: usize,
}

/// Serialized d × d covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CovJson(#[serde(with = "row_major")] pub DMatrix<f64>);

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn covariance(&self, c: usize) -> &DMatrix<f64> {
        &self.covariances[c].0
    }

    /// Number of free parameters, for information criteria.
    pub fn n_params(&self) -> usize {
        let d = self.dim();
        let cov = match self.covariance {
            CovarianceType::Diagonal => d,
            CovarianceType::Full => d * (d + 1) / 2,
        };
        self.k * (d + cov) + self.k - 1
    }

    pub fn bic(&self, n: usize) -> f64 {
        -2.0 * self.log_likelihood + self.n_params() as f64 * (n as f64).ln()
    }
}

struct Components {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

struct Factorized {
    log_norm: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

fn factorize(c: &Components) -> Result<Vec<Factorized>> {
    let d = c.means.first().map_or(0, |m| m.len());
    c.covs
        .iter()
        .enumerate()
        .map(|(k, cov)| {
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
                NofError::numerical(format!("covariance of cluster {k} is not positive definite"))
            })?;
            let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            Ok(Factorized {
                log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
                chol,
            })
        })
        .collect()
}

/// Responsibilities (n × k) and total log-likelihood.
fn e_step(x: &DMatrix<f64>, c: &Components) -> Result<(DMatrix<f64>, f64)> {
    let f = factorize(c)?;
    let (n, _) = x.shape();
    let k = c.weights.len();
    let mut resp = DMatrix::zeros(n, k);
    let mut ll = 0.0;
    let mut logp = vec![f64::NEG_INFINITY; k];
    for i in 0..n {
        let xi = x.row(i).transpose();
        for j in 0..k {
            if c.weights[j] <= 0.0 {
                logp[j] = f64::NEG_INFINITY;
                continue;
            }
            let diff = &xi - &c.means[j];
            let sol = f[j].chol.l().solve_lower_triangular(&diff).expect("triangular factor");
            logp[j] = c.weights[j].ln() + f[j].log_norm - 0.5 * sol.norm_squared();
        }
        let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logp.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        ll += lse;
        for j in 0..k {
            resp[(i, j)] = (logp[j] - lse).exp();
        }
    }
    if !ll.is_finite() {
        return Err(NofError::numerical("non-finite log-likelihood"));
    }
    Ok((resp, ll))
}

fn floor_covariance(mut cov: DMatrix<f64>, kind: CovarianceType, floor: f64) -> DMatrix<f64> {
    match kind {
        CovarianceType::Diagonal => {
            let d = cov.nrows();
            let diag: Vec<f64> = (0..d).map(|i| cov[(i, i)].max(floor)).collect();
            cov = DMatrix::from_diagonal(&DVector::from_vec(diag));
            cov
        }
        CovarianceType::Full => {
            let eig = SymmetricEigen::new(cov);
            let vals = eig.eigenvalues.map(|v| v.max(floor));
            let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
            // Restore exact symmetry lost to rounding.
            let t = out.transpose();
            out = (out + t) * 0.5;
            out
        }
    }
}

fn m_step(
    x: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    prev: Option<&Components>,
    kind: CovarianceType,
    floor: f64,
) -> Components {
    let (n, d) = x.shape();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp.column(j).sum();
        if nk < 1e-12 {
            // Empty component keeps its parameters at zero weight.
            weights.push(0.0);
            match prev {
                Some(p) => {
                    means.push(p.means[j].clone());
                    covs.push(p.covs[j].clone());
                }
                None => {
                    means.push(DVector::zeros(d));
                    covs.push(DMatrix::identity(d, d) * floor.max(1.0));
                }
            }
            continue;
        }
        let mut mu = DVector::zeros(d);
        for i in 0..n {
            mu += x.row(i).transpose() * resp[(i, j)];
        }
        mu /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            let diff = x.row(i).transpose() - &mu;
            cov += &diff * diff.transpose() * resp[(i, j)];
        }
        cov /= nk;
        weights.push(nk / n as f64);
        means.push(mu);
        covs.push(floor_covariance(cov, kind, floor));
    }
    Components { weights, means, covs }
}

fn argmax_rows(resp: &DMatrix<f64>) -> Vec<usize> {
    (0..resp.nrows())
        .map(|i| {
            let row = resp.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// k-means++ seeding, then one hard-assignment M-step.
fn init_components(
    x: &DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
    kind: CovarianceType,
    floor: f64,
) -> Components {
    let n = x.nrows();
    let mut centers = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| (x.row(i) - x.row(centers[0])).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if u < *v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.push(next);
        for i in 0..n {
            d2[i] = d2[i].min((x.row(i) - x.row(next)).norm_squared());
        }
    }
    let mut resp = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &c) in centers.iter().enumerate() {
            let d = (x.row(i) - x.row(c)).norm_squared();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        resp[(i, best)] = 1.0;
    }
    // Centers are data rows, so each hard cluster is non-empty unless rows
    // coincide; fall back to the center itself then.
    let mut comps = m_step(x, &resp, None, kind, floor);
    for (j, &c) in centers.iter().enumerate() {
        if comps.weights[j] == 0.0 {
            comps.means[j] = x.row(c).transpose();
            comps.weights[j] = 1.0 / n as f64;
        }
    }
    let s: f64 = comps.weights.iter().sum();
    for w in comps.weights.iter_mut() {
        *w /= s;
    }
    comps
}

fn absolute_floor(x: &DMatrix<f64>, rel: f64) -> f64 {
    let (n, d) = x.shape();
    let mut trace = 0.0;
    for j in 0..d {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        trace += col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    }
    let base = if trace > 0.0 { trace / d as f64 } else { 1.0 };
    rel * base
}

pub fn em_fit(x: &ObservationMatrix, k: usize, cfg: &EmConfig) -> Result<ClusterModel> {
    let data = &x.data;
    let n = data.nrows();
    if k == 0 {
        return Err(NofError::invalid("k must be >= 1"));
    }
    if k > n {
        return Err(NofError::invalid(format!("k = {k} exceeds the {n} observations")));
    }
    if data.ncols() == 0 {
        return Err(NofError::invalid("observations have no columns"));
    }
    if !(cfg.cov_floor > 0.0) || !(cfg.tol >= 0.0) || cfg.max_iter == 0 {
        return Err(NofError::config("EM needs cov_floor > 0, tol >= 0, max_iter >= 1"));
    }
    let floor = absolute_floor(data, cfg.cov_floor);
    let restarts = cfg.n_restarts.max(1);

    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts {
        let seed = cfg.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comps = init_components(data, k, &mut rng, cfg.covariance, floor);
        let mut history = Vec::new();
        let mut n_iter = 0;
        let (resp, ll) = loop {
            let (resp, ll) = e_step(data, &comps)?;
            let done = match history.last() {
                Some(&prev) => ll - prev < cfg.tol,
                None => false,
            };
            history.push(ll);
            if done || n_iter >= cfg.max_iter {
                break (resp, ll);
            }
            comps = m_step(data, &resp, Some(&comps), cfg.covariance, floor);
            n_iter += 1;
        };
        let model = ClusterModel {
            k,
            covariance: cfg.covariance,
            weights: comps.weights,
            means: DMatrix::from_fn(k, data.ncols(), |j, c| comps.means[j][c]),
            covariances: comps.covs.into_iter().map(CovJson).collect(),
            floor,
            assignments: argmax_rows(&resp),
            log_likelihood: ll,
            ll_history: history,
            n_iter,
            restart: r,
        };
        let better = match &best {
            None => true,
            Some(b) => model.log_likelihood > b.log_likelihood,
        };
        if better {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub assignments: Vec<usize>,
    /// n × k, rows sum to one.
    pub responsibilities: DMatrix<f64>,
}

pub fn em_predict(model: &ClusterModel, x: &ObservationMatrix) -> Result<Prediction> {
    if x.dim() != model.dim() {
        return Err(NofError::invalid(format!(
            "observations have {} columns, model expects {}",
            x.dim(),
            model.dim()
        )));
    }
    let comps = Components {
        weights: model.weights.clone(),
        means: (0..model.k).map(|j| model.means.row(j).transpose()).collect(),
        covs: model.covariances.iter().map(|c| c.0.clone()).collect(),
    };
    let (resp, _) = e_step(&x.data, &comps)?;
    Ok(Prediction {
        assignments: argmax_rows(&resp),
        responsibilities: resp,
    })
}

/// Fits k = 1..=k_max (capped at the row count) and keeps the lowest BIC.
/// Returns the chosen model and every (k, BIC) pair evaluated.
pub fn select_k_bic(
    x: &ObservationMatrix,
    k_max: usize,
    cfg: &EmConfig,
) -> Result<(ClusterModel, Vec<(usize, f64)>)> {
    let n = x.n_rows();
    let k_max = k_max.min(n);
    if k_max == 0 {
        return Err(NofError::invalid("k_max must be >= 1"));
    }
    let mut scores = Vec::with_capacity(k_max);
    let mut best: Option<(f64, ClusterModel)> = None;
    for k in 1..=k_max {
        let m = em_fit(x, k, cfg)?;
        let bic = m.bic(n);
        scores.push((k, bic));
        if best.as_ref().map_or(true, |(b, _)| bic < *b) {
            best = Some((bic, m));
        }
    }
    Ok((best.expect("k_max >= 1").1, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use rand_distr::{Distribution, StandardNormal};

    fn two_blobs(seed: u64) -> (ObservationMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in [(0usize, 0.0), (1, 10.0)] {
            for _ in 0..100 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![c + a, c + b]);
                labels.push(label);
            }
        }
        (ObservationMatrix::from_rows(&rows).unwrap(), labels)
    }

    fn assert_monotone(m: &ClusterModel) {
        for w in m.ll_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "log-likelihood decreased: {:?}", w);
        }
    }

    #[test]
    fn single_component_is_closed_form() {
        let (x, _) = two_blobs(1);
        let cfg = EmConfig {
            covariance: CovarianceType::Full,
            ..Default::default()
        };
        let m = em_fit(&x, 1, &cfg).unwrap();
        assert_monotone(&m);
        let n = x.n_rows() as f64;
        let mean: Vec<f64> = (0..2).map(|j| x.data.column(j).sum() / n).collect();
        for j in 0..2 {
            assert!((m.means[(0, j)] - mean[j]).abs() < 1e-10);
        }
        for a in 0..2 {
            for b in 0..2 {
                let c = (0..x.n_rows())
                    .map(|i| (x.data[(i, a)] - mean[a]) * (x.data[(i, b)] - mean[b]))
                    .sum::<f64>()
                    / n;
                assert!((m.covariance(0)[(a, b)] - c).abs() < 1e-10);
            }
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (x, labels) = two_blobs(2);
        for kind in [CovarianceType::Diagonal, CovarianceType::Full] {
            let m = em_fit(&x, 2, &EmConfig { covariance: kind, ..Default::default() }).unwrap();
            assert_monotone(&m);
            assert!(adjusted_rand_index(&m.assignments, &labels) >= 0.99);
            assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for c in 0..2 {
                let eig = SymmetricEigen::new(m.covariance(c).clone());
                assert!(eig.eigenvalues.min() >= m.floor * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn too_many_clusters() {
        let x = ObservationMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(em_fit(&x, 3, &EmConfig::default()).is_err());
        assert!(em_fit(&x, 0, &EmConfig::default()).is_err());
    }

    #[test]
    fn fitting_is_deterministic() {
        let (x, _) = two_blobs(3);
        let cfg = EmConfig { seed: 9, ..Default::default() };
        assert_eq!(em_fit(&x, 3, &cfg).unwrap(), em_fit(&x, 3, &cfg).unwrap());
    }

    #[test]
    fn prediction_matches_fit_and_is_normalized() {
        let (x, _) = two_blobs(4);
        let m = em_fit(&x, 2, &EmConfig::default()).unwrap();
        let p = em_predict(&m, &x).unwrap();
        assert_eq!(p.assignments, m.assignments);
        for i in 0..x.n_rows() {
            assert!((p.responsibilities.row(i).sum() - 1.0).abs() < 1e-12);
        }
        // A cluster mean is assigned to its own cluster.
        let c0 = ObservationMatrix::from_matrix(m.means.rows(0, 1).clone_owned());
        assert_eq!(em_predict(&m, &c0).unwrap().assignments, vec![0]);
        let bad = ObservationMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(em_predict(&m, &bad).is_err());
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let model = ClusterModel {
            k: 2,
            covariance: CovarianceType::Diagonal,
            weights: vec![0.5, 0.5],
            means: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]),
            covariances: vec![CovJson(DMatrix::identity(2, 2)), CovJson(DMatrix::identity(2, 2))],
            floor: 1e-6,
            assignments: vec![],
            log_likelihood: 0.0,
            ll_history: vec![],
            n_iter: 0,
            restart: 0,
        };
        let x = ObservationMatrix::from_rows(&[vec![0.0, 3.0]]).unwrap();
        let p = em_predict(&model, &x).unwrap();
        assert!((p.responsibilities[(0, 0)] - 0.5).abs() < 1e-9);
        assert!((p.responsibilities[(0, 1)] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bic_prefers_two_blobs() {
        let (x, _) = two_blobs(5);
        let (m, scores) = select_k_bic(&x, 4, &EmConfig::default()).unwrap();
        assert_eq!(m.k, 2, "scores {scores:?}");
        assert_eq!(scores.len(), 4);
    }

    #[test]
    fn model_json_round_trip() {
        let (x, _) = two_blobs(6);
        let m = em_fit(&x, 2, &EmConfig::default()).unwrap();
        let back: ClusterModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
