//! Online adaptation of the horizontal proposal location and scale from the
//! pooled chain history, and the clustered per-component variant for the
//! mixture proposal.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Recursive pooled mean/covariance accumulator. Publishes the initial
/// `(mu_0, Lambda_0)` until `count > n * t_train` points have been seen, then
/// the pooled mean and the second moment about `mu_0` plus the SPD floor.
///
/// Anchoring the scale at `mu_0` (instead of the running mean) keeps the
/// proposal wide enough to reach back across everything between the starting
/// region and the visited modes. Centering the scatter on the running mean
/// instead lets the proposal shrink onto whatever subset of modes the chains
/// happen to occupy, after which the remaining modes are never proposed
/// again; in that regime the interaction actively hurts the estimates.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    dim: usize,
    n_chains: usize,
    t_train: usize,
    mu0: DVector<f64>,
    floor: DMatrix<f64>,
    sum: DVector<f64>,
    raw_scatter: DMatrix<f64>,
    count: usize,
}

impl AdaptationState {
    pub fn new(
        mu0: DVector<f64>,
        floor: DMatrix<f64>,
        n_chains: usize,
        t_train: usize,
    ) -> Result<Self> {
        let dim = mu0.len();
        if Cholesky::new(floor.clone()).is_none() {
            return Err(Error::Covariance);
        }
        Ok(Self {
            dim,
            n_chains,
            t_train,
            mu0,
            floor,
            sum: DVector::zeros(dim),
            raw_scatter: DMatrix::zeros(dim, dim),
            count: 0,
        })
    }

    /// Feed the population generated at one iteration.
    pub fn update(&mut self, samples: &[DVector<f64>]) -> Result<()> {
        for x in samples {
            if x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: x.len(),
                });
            }
            self.sum += x;
            self.raw_scatter += x * x.transpose();
            self.count += 1;
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn trained(&self) -> bool {
        self.count > self.n_chains * self.t_train
    }

    /// Published location parameter mu_t.
    pub fn mean(&self) -> DVector<f64> {
        if !self.trained() {
            return self.mu0.clone();
        }
        &self.sum / self.count as f64
    }

    /// Published scale parameter: the mean of (x - mu_0)(x - mu_0)^T over the
    /// history, plus the floor. Equals the batch covariance plus the drift
    /// term (mu_t - mu_0)(mu_t - mu_0)^T.
    pub fn covariance(&self) -> DMatrix<f64> {
        if !self.trained() {
            return self.floor.clone();
        }
        let mu = &self.sum / self.count as f64;
        &self.raw_scatter / self.count as f64 - &mu * self.mu0.transpose()
            - &self.mu0 * mu.transpose()
            + &self.mu0 * self.mu0.transpose()
            + &self.floor
    }
}

/// Cluster the history by nearest mixture-component location (ties go to the
/// lower index) and return one covariance per component: cluster covariance
/// plus the floor, or the previous covariance for empty clusters.
pub fn adapt_mixture_covs(
    locations: &[DVector<f64>],
    previous_covs: &[DMatrix<f64>],
    history: &[DVector<f64>],
    floor: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let n = locations.len();
    let dim = floor.nrows();
    let mut sums = vec![DVector::zeros(dim); n];
    let mut raws = vec![DMatrix::zeros(dim, dim); n];
    let mut counts = vec![0usize; n];
    for x in history {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, loc) in locations.iter().enumerate() {
            let d = (x - loc).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        sums[best] += x;
        raws[best] += x * x.transpose();
        counts[best] += 1;
    }
    (0..n)
        .map(|i| {
            if counts[i] == 0 {
                previous_covs[i].clone()
            } else {
                let c = counts[i] as f64;
                let mu = &sums[i] / c;
                &raws[i] / c - &mu * mu.transpose() + floor
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_points(rng: &mut RngStream, n: usize, center: &[f64], spread: f64) -> Vec<DVector<f64>> {
        (0..n)
            .map(|_| {
                DVector::from_fn(center.len(), |i, _| {
                    center[i] + rng.gen_range(-spread..spread)
                })
            })
            .collect()
    }

    // Independent two-pass batch estimator.
    fn batch_mean_cov(points: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let d = points[0].len();
        let mut mu = DVector::zeros(d);
        for p in points {
            mu += p;
        }
        mu /= points.len() as f64;
        let mut cov = DMatrix::zeros(d, d);
        for p in points {
            let c = p - &mu;
            cov += &c * c.transpose();
        }
        cov /= points.len() as f64;
        (mu, cov)
    }

    #[test]
    fn published_params_frozen_during_training() {
        let mu0 = DVector::from_row_slice(&[1.0, 2.0]);
        let floor = DMatrix::identity(2, 2) * 4.0;
        let mut a = AdaptationState::new(mu0.clone(), floor.clone(), 3, 5).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..5 {
            a.update(&random_points(&mut rng, 3, &[10.0, -10.0], 1.0)).unwrap();
            assert_eq!(a.mean(), mu0);
            assert_eq!(a.covariance(), floor);
        }
        a.update(&random_points(&mut rng, 3, &[10.0, -10.0], 1.0)).unwrap();
        assert_ne!(a.mean(), mu0);
    }

    #[test]
    fn recursive_mean_equals_batch_mean() {
        let mut rng = RngStream::new(2, 0);
        let mut a = AdaptationState::new(DVector::zeros(2), DMatrix::identity(2, 2), 2, 0).unwrap();
        let mut all = Vec::new();
        for _ in 0..50 {
            let pts = random_points(&mut rng, 2, &[3.0, -1.0], 5.0);
            a.update(&pts).unwrap();
            all.extend(pts);
        }
        let (mu, _) = batch_mean_cov(&all);
        let got = a.mean();
        for i in 0..2 {
            assert_relative_eq!(got[i], mu[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn recursive_cov_equals_two_pass_batch_plus_drift_plus_floor() {
        let mut rng = RngStream::new(3, 0);
        let floor = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]);
        let mu0 = DVector::from_row_slice(&[1.0, -2.0]);
        let mut a = AdaptationState::new(mu0.clone(), floor.clone(), 4, 0).unwrap();
        let mut all = Vec::new();
        for _ in 0..100 {
            let pts = random_points(&mut rng, 4, &[-2.0, 7.0], 3.0);
            a.update(&pts).unwrap();
            all.extend(pts);
        }
        let (mu, cov) = batch_mean_cov(&all);
        let drift = &mu - &mu0;
        let expected = cov + &drift * drift.transpose() + &floor;
        let got = a.covariance();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(got[(i, j)], expected[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut a = AdaptationState::new(DVector::zeros(2), DMatrix::identity(2, 2), 1, 0).unwrap();
        assert!(a.update(&[DVector::zeros(3)]).is_err());
    }

    #[test]
    fn non_spd_floor_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(AdaptationState::new(DVector::zeros(2), bad, 1, 0).is_err());
    }

    #[test]
    fn published_cov_stays_spd() {
        // Feed an adversarial stream (collinear points); floor keeps Lambda SPD.
        let floor = DMatrix::identity(2, 2) * 0.1;
        let mut a = AdaptationState::new(DVector::zeros(2), floor, 1, 0).unwrap();
        for i in 0..200 {
            let v = i as f64;
            a.update(&[DVector::from_row_slice(&[v, 2.0 * v])]).unwrap();
            assert!(Cholesky::new(a.covariance()).is_some());
        }
    }

    #[test]
    fn diminishing_adaptation_surrogate() {
        // Relative Lambda changes in the last decile are smaller than in the
        // first decile for a bounded sample stream.
        let mut rng = RngStream::new(4, 0);
        let mut a = AdaptationState::new(DVector::zeros(2), DMatrix::identity(2, 2), 1, 0).unwrap();
        let mut rel_changes = Vec::new();
        let mut prev = a.covariance();
        for _ in 0..500 {
            a.update(&random_points(&mut rng, 1, &[0.0, 0.0], 2.0)).unwrap();
            let cur = a.covariance();
            rel_changes.push((&cur - &prev).norm() / prev.norm());
            prev = cur;
        }
        let decile = rel_changes.len() / 10;
        let first: f64 = rel_changes[..decile].iter().sum::<f64>() / decile as f64;
        let last: f64 = rel_changes[rel_changes.len() - decile..]
            .iter()
            .sum::<f64>()
            / decile as f64;
        assert!(last < first);
    }

    #[test]
    fn single_cluster_reduces_to_pooled_covariance() {
        let mut rng = RngStream::new(5, 0);
        let floor = DMatrix::identity(2, 2) * 0.3;
        let history = random_points(&mut rng, 200, &[1.0, 1.0], 2.0);
        let locs = vec![DVector::zeros(2)];
        let covs = adapt_mixture_covs(&locs, &[DMatrix::identity(2, 2)], &history, &floor);
        let (_, batch) = batch_mean_cov(&history);
        let expected = batch + &floor;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(covs[0][(i, j)], expected[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn two_separated_clusters_recovered() {
        let mut rng = RngStream::new(6, 0);
        let floor = DMatrix::identity(2, 2) * 0.2;
        let a = random_points(&mut rng, 150, &[-20.0, 0.0], 1.5);
        let b = random_points(&mut rng, 150, &[20.0, 0.0], 3.0);
        let mut history = a.clone();
        history.extend(b.clone());
        let locs = vec![
            DVector::from_row_slice(&[-20.0, 0.0]),
            DVector::from_row_slice(&[20.0, 0.0]),
        ];
        let prev = vec![DMatrix::identity(2, 2); 2];
        let covs = adapt_mixture_covs(&locs, &prev, &history, &floor);
        for (cluster, cov) in [(&a, &covs[0]), (&b, &covs[1])] {
            let (_, batch) = batch_mean_cov(cluster);
            let expected = batch + &floor;
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(cov[(i, j)], expected[(i, j)], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn equidistant_points_go_to_lower_index() {
        let locs = vec![
            DVector::from_row_slice(&[-1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0]),
        ];
        let history = vec![DVector::from_row_slice(&[0.0, 5.0]); 10];
        let prev = vec![DMatrix::identity(2, 2) * 9.0; 2];
        let floor = DMatrix::identity(2, 2) * 0.1;
        let covs = adapt_mixture_covs(&locs, &prev, &history, &floor);
        // cluster 1 stayed empty, so it keeps its previous covariance
        assert_eq!(covs[1], prev[1]);
        assert_ne!(covs[0], prev[0]);
    }
}
