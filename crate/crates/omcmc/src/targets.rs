//! Unnormalized target densities, with the built-in benchmark targets and
//! tempering wrappers.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::rng::RngStream;

/// Evaluator contract for an unnormalized target pi(x).
///
/// `log_density` returns `-inf` outside the support; kernels treat such
/// candidates as automatic rejections.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &DVector<f64>) -> f64;
    /// Gradient of the log-density, when available.
    fn gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

impl<T: Target + ?Sized> Target for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        (**self).log_density(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).gradient(x)
    }
}

/// Equal-weight mixture of Gaussians with analytical gradient.
pub struct GaussianMixture {
    dim: usize,
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    comp_log_norm: Vec<f64>,
    log_weight: f64,
    chols: Vec<Cholesky<f64, Dyn>>,
}

const LN_2PI: f64 = 1.8378770664093453;

impl GaussianMixture {
    pub fn new(means: Vec<DVector<f64>>, covs: Vec<DMatrix<f64>>) -> Result<Self> {
        if means.is_empty() || means.len() != covs.len() {
            return Err(Error::Config(
                "mixture needs matching, non-empty means and covariances".into(),
            ));
        }
        let dim = means[0].len();
        let mut precisions = Vec::new();
        let mut comp_log_norm = Vec::new();
        let mut chols = Vec::new();
        for cov in &covs {
            let chol = Cholesky::new(cov.clone()).ok_or(Error::Covariance)?;
            let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
            comp_log_norm.push(-0.5 * (dim as f64 * LN_2PI + log_det));
            precisions.push(chol.inverse());
            chols.push(chol);
        }
        let log_weight = -(means.len() as f64).ln();
        Ok(Self {
            dim,
            means,
            precisions,
            comp_log_norm,
            log_weight,
            chols,
        })
    }

    fn comp_logpdfs(&self, x: &DVector<f64>) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.precisions)
            .zip(&self.comp_log_norm)
            .map(|((mu, prec), ln)| {
                let d = x - mu;
                ln - 0.5 * (prec * &d).dot(&d)
            })
            .collect()
    }

    /// Draw directly from the mixture (used by estimator oracles, not by the
    /// samplers).
    pub fn direct_sample(&self, rng: &mut RngStream) -> DVector<f64> {
        use rand::Rng;
        let k = rng.gen_range(0..self.means.len());
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        &self.means[k] + self.chols[k].l() * z
    }

    pub fn component_means(&self) -> &[DVector<f64>] {
        &self.means
    }

    /// E[X] of the mixture (equal weights).
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for mu in &self.means {
            m += mu;
        }
        m / self.means.len() as f64
    }
}

impl Target for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let lps: Vec<f64> = self.comp_logpdfs(x);
        self.log_weight + log_sum_exp(&lps).expect("non-empty mixture")
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let lps = self.comp_logpdfs(x);
        let lse = log_sum_exp(&lps).expect("non-empty mixture");
        let mut g = DVector::zeros(self.dim);
        for ((mu, prec), lp) in self.means.iter().zip(&self.precisions).zip(&lps) {
            let resp = (lp - lse).exp();
            g += (prec * (mu - x)) * resp;
        }
        Some(g)
    }
}

/// The 5-component bivariate mixture benchmark: modes at
/// (-10,-10), (0,16), (13,8), (-9,7), (14,-14), equal weights.
pub fn gaussian_mixture_5() -> GaussianMixture {
    let means = vec![
        DVector::from_row_slice(&[-10.0, -10.0]),
        DVector::from_row_slice(&[0.0, 16.0]),
        DVector::from_row_slice(&[13.0, 8.0]),
        DVector::from_row_slice(&[-9.0, 7.0]),
        DVector::from_row_slice(&[14.0, -14.0]),
    ];
    let covs = vec![
        DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]),
        DMatrix::from_row_slice(2, 2, &[2.0, -0.4, -0.4, 2.0]),
        DMatrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 2.0]),
        DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]),
        DMatrix::from_row_slice(2, 2, &[2.0, -0.1, -0.1, 2.0]),
    ];
    GaussianMixture::new(means, covs).expect("hard-coded covariances are SPD")
}

/// Parameters of the noisy multi-sinusoid observation model
/// y[k] = A0 + sum_i A_i cos(2 pi x_i k + phi_i) + noise.
#[derive(Debug, Clone)]
pub struct SinusoidModel {
    pub s: usize,
    pub sigma_w2: f64,
    pub a0: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl SinusoidModel {
    pub fn standard(s: usize, sigma_w2: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::Config("S must be positive".into()));
        }
        if sigma_w2 <= 0.0 {
            return Err(Error::Config("noise variance must be positive".into()));
        }
        Ok(Self {
            s,
            sigma_w2,
            a0: 0.0,
            amplitudes: vec![1.0; s],
            phases: vec![0.0; s],
        })
    }

    fn signal(&self, freqs: &DVector<f64>, k: usize) -> f64 {
        let mut v = self.a0;
        for i in 0..self.s {
            v += self.amplitudes[i]
                * (2.0 * std::f64::consts::PI * freqs[i] * k as f64 + self.phases[i]).cos();
        }
        v
    }

    /// Generate K noisy observations at the true frequency vector.
    pub fn generate(&self, freqs: &[f64], k: usize, rng: &mut RngStream) -> Vec<f64> {
        let f = DVector::from_row_slice(freqs);
        (1..=k)
            .map(|j| {
                let z: f64 = StandardNormal.sample(rng);
                self.signal(&f, j) + self.sigma_w2.sqrt() * z
            })
            .collect()
    }
}

/// Posterior over the normalized frequencies x in [0, 1/2]^S given the
/// observations: log pi(x) = -V(x) inside the box, -inf outside.
pub struct SinusoidPosterior {
    model: SinusoidModel,
    obs: Vec<f64>,
}

impl SinusoidPosterior {
    pub fn new(model: SinusoidModel, obs: Vec<f64>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::Config("need at least one observation".into()));
        }
        Ok(Self { model, obs })
    }

    pub fn in_support(&self, x: &DVector<f64>) -> bool {
        x.iter().all(|&v| (0.0..=0.5).contains(&v))
    }

    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    pub fn model(&self) -> &SinusoidModel {
        &self.model
    }
}

impl Target for SinusoidPosterior {
    fn dim(&self) -> usize {
        self.model.s
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        let mut v = 0.0;
        for (k, &y) in self.obs.iter().enumerate() {
            let r = y - self.model.signal(x, k + 1);
            v += r * r;
        }
        -v / (2.0 * self.model.sigma_w2)
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        if !self.in_support(x) {
            return None;
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut g = DVector::zeros(self.model.s);
        for (idx, &y) in self.obs.iter().enumerate() {
            let k = (idx + 1) as f64;
            let r = y - self.model.signal(x, idx + 1);
            for i in 0..self.model.s {
                let arg = two_pi * x[i] * k + self.model.phases[i];
                // d(-V)/dx_i picks up -A_i sin(arg) * 2 pi k from the model term
                g[i] -= r * self.model.amplitudes[i] * arg.sin() * two_pi * k / self.model.sigma_w2;
            }
        }
        Some(g)
    }
}

/// pi(x)^(1/gamma): log-density scaled by 1/gamma, support unchanged.
pub struct Tempered<T> {
    base: T,
    inv_gamma: f64,
}

impl<T: Target> Tempered<T> {
    pub fn new(base: T, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::Config("temperature gamma must be positive".into()));
        }
        Ok(Self {
            base,
            inv_gamma: 1.0 / gamma,
        })
    }
}

impl<T: Target> Target for Tempered<T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        // -inf * positive stays -inf
        self.base.log_density(x) * self.inv_gamma
    }
    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.base.gradient(x).map(|g| g * self.inv_gamma)
    }
}

/// Product target on the N-fold space with per-chain temperatures:
/// log pi_g(x_1..x_N) = sum_n (1/gamma_n) log pi(x_n).
pub struct ExtendedTarget<T> {
    pub base: T,
    pub inv_gammas: Vec<f64>,
}

impl<T: Target> ExtendedTarget<T> {
    pub fn uniform(base: T, n: usize) -> Self {
        Self {
            base,
            inv_gammas: vec![1.0; n],
        }
    }

    pub fn log_density(&self, population: &[DVector<f64>]) -> f64 {
        population
            .iter()
            .zip(&self.inv_gammas)
            .map(|(x, ig)| self.base.log_density(x) * ig)
            .sum()
    }
}

/// Ordered sequence of targets for data tempering, with per-stage shares of
/// the epoch budget.
pub struct TemperedSequence {
    pub stages: Vec<Arc<dyn Target>>,
    pub budget_fractions: Vec<f64>,
}

impl TemperedSequence {
    pub fn uniform(stages: Vec<Arc<dyn Target>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("need at least one stage".into()));
        }
        let f = 1.0 / stages.len() as f64;
        let budget_fractions = vec![f; stages.len()];
        Ok(Self {
            stages,
            budget_fractions,
        })
    }
}

/// Data-tempered sequence for the sinusoid model: stage i uses the first
/// k_min + i - 1 observations, the last stage all of them.
pub fn sinusoid_data_tempered(
    model: &SinusoidModel,
    obs: &[f64],
    k_min: usize,
) -> Result<TemperedSequence> {
    if k_min == 0 || k_min > obs.len() {
        return Err(Error::Config("k_min must be in 1..=K".into()));
    }
    let stages: Vec<Arc<dyn Target>> = (k_min..=obs.len())
        .map(|k| {
            Arc::new(SinusoidPosterior::new(model.clone(), obs[..k].to_vec()).unwrap())
                as Arc<dyn Target>
        })
        .collect();
    TemperedSequence::uniform(stages)
}

/// Partial posteriors for N chains: the observation vector split into N
/// contiguous disjoint blocks, one sinusoid posterior per block.
pub fn sinusoid_partial_posteriors(
    model: &SinusoidModel,
    obs: &[f64],
    n: usize,
) -> Result<Vec<SinusoidPosterior>> {
    if n == 0 || n > obs.len() {
        return Err(Error::Config("chain count must be in 1..=K".into()));
    }
    let mut out = Vec::with_capacity(n);
    let base = obs.len() / n;
    let rem = obs.len() % n;
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < rem);
        out.push(SinusoidPosterior::new(
            model.clone(),
            obs[start..start + len].to_vec(),
        )?);
        start += len;
    }
    Ok(out)
}

/// Posterior mean by midpoint quadrature over the box [lower, upper] with
/// `points_per_axis` cells per axis. Serves as the ground-truth oracle for
/// bounded-support targets.
pub fn grid_mean(
    target: &dyn Target,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    points_per_axis: usize,
) -> Result<DVector<f64>> {
    grid_moments(target, lower, upper, points_per_axis, 1)
}

/// Non-central posterior moments `E[x_i^p]` for `p = 1..=max_order`, by the
/// same midpoint quadrature as [`grid_mean`]. The result stacks the orders:
/// entry `(p - 1) * d + i` holds `E[x_i^p]`.
pub fn grid_moments(
    target: &dyn Target,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    points_per_axis: usize,
    max_order: usize,
) -> Result<DVector<f64>> {
    let d = target.dim();
    if lower.len() != d || upper.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: lower.len(),
        });
    }
    if points_per_axis == 0 || max_order == 0 || (0..d).any(|i| upper[i] <= lower[i]) {
        return Err(Error::Config("degenerate integration box".into()));
    }
    let steps: Vec<f64> = (0..d)
        .map(|i| (upper[i] - lower[i]) / points_per_axis as f64)
        .collect();
    // first pass: the maximum log-density over the grid, for stable weights
    let mut idx = vec![0usize; d];
    let mut max_lp = f64::NEG_INFINITY;
    loop {
        let x = DVector::from_fn(d, |i, _| lower[i] + (idx[i] as f64 + 0.5) * steps[i]);
        max_lp = max_lp.max(target.log_density(&x));
        if !advance(&mut idx, points_per_axis) {
            break;
        }
    }
    if max_lp == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let mut mass = 0.0;
    let mut moments = DVector::zeros(d * max_order);
    let mut idx = vec![0usize; d];
    loop {
        let x = DVector::from_fn(d, |i, _| lower[i] + (idx[i] as f64 + 0.5) * steps[i]);
        let w = (target.log_density(&x) - max_lp).exp();
        mass += w;
        for i in 0..d {
            let mut pow = 1.0;
            for p in 0..max_order {
                pow *= x[i];
                moments[p * d + i] += pow * w;
            }
        }
        if !advance(&mut idx, points_per_axis) {
            break;
        }
    }
    Ok(moments / mass)
}

/// Stack the per-sample non-central moments of a sample set in the same layout
/// as [`grid_moments`]: entry `(p - 1) * d + i` holds the average of `x_i^p`.
pub fn sample_moments(samples: &[DVector<f64>], max_order: usize) -> DVector<f64> {
    let d = samples.first().map_or(0, |x| x.len());
    let mut moments = DVector::zeros(d * max_order);
    for x in samples {
        for i in 0..d {
            let mut pow = 1.0;
            for p in 0..max_order {
                pow *= x[i];
                moments[p * d + i] += pow;
            }
        }
    }
    moments / samples.len().max(1) as f64
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for v in idx.iter_mut() {
        *v += 1;
        if *v < base {
            return true;
        }
        *v = 0;
    }
    false
}

/// Write observations as CSV, one value per line under a `y` header.
pub fn write_observations_csv(path: &Path, obs: &[f64]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "y")?;
    for v in obs {
        writeln!(f, "{v}")?;
    }
    Ok(())
}

/// Read observations written by [`write_observations_csv`].
pub fn read_observations_csv(path: &Path) -> std::io::Result<Vec<f64>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 {
            if line != "y" {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    "expected header 'y'",
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad value: {e}"))
        })?);
    }
    Ok(out)
}
