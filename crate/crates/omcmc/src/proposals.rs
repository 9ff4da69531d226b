//! Vertical random-walk/MALA proposals and the horizontal independent
//! mixture built on the current population.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::mvn::MvNormal;
use crate::rng::RngStream;
use crate::targets::Target;

/// A proposal that does not depend on the current chain state. Horizontal
/// kernels are generic over this so discrete instantiations can be plugged in
/// for the enumeration tests.
pub trait IndepProposal: Send + Sync {
    fn logpdf(&self, x: &DVector<f64>) -> f64;
    fn sample(&self, rng: &mut RngStream) -> DVector<f64>;
}

impl IndepProposal for MvNormal {
    fn logpdf(&self, x: &DVector<f64>) -> f64 {
        MvNormal::logpdf(self, x)
    }
    fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        MvNormal::sample(self, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomWalkKind {
    Rw,
    Mala,
}

/// Random-walk (symmetric Gaussian increment) or MALA proposal for the
/// vertical chains.
#[derive(Debug, Clone)]
pub struct RandomWalkProposal {
    kind: RandomWalkKind,
    noise: MvNormal,
    /// MALA step size epsilon; unused for plain RW.
    step: f64,
}

impl RandomWalkProposal {
    pub fn random_walk(cov: DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        Ok(Self {
            kind: RandomWalkKind::Rw,
            noise: MvNormal::new(DVector::zeros(d), cov)?,
            step: 0.0,
        })
    }

    pub fn isotropic_random_walk(dim: usize, sigma: f64) -> Result<Self> {
        Self::random_walk(DMatrix::identity(dim, dim) * sigma * sigma)
    }

    pub fn mala(dim: usize, step: f64) -> Result<Self> {
        if step <= 0.0 {
            return Err(Error::Config("MALA step must be positive".into()));
        }
        Ok(Self {
            kind: RandomWalkKind::Mala,
            noise: MvNormal::new(DVector::zeros(dim), DMatrix::identity(dim, dim) * step)?,
            step,
        })
    }

    pub fn kind(&self) -> RandomWalkKind {
        self.kind
    }

    fn drifted_mean(&self, x: &DVector<f64>, target: &dyn Target) -> Result<DVector<f64>> {
        let grad = target
            .gradient(x)
            .ok_or_else(|| Error::Config("MALA requires a target gradient".into()))?;
        Ok(x + grad * (self.step / 2.0))
    }

    /// Draw a candidate and return it together with the log proposal-density
    /// ratio log q(x|x') - log q(x'|x). Exactly zero for the symmetric RW.
    pub fn propose(
        &self,
        x: &DVector<f64>,
        target: &dyn Target,
        rng: &mut RngStream,
    ) -> Result<(DVector<f64>, f64)> {
        match self.kind {
            RandomWalkKind::Rw => {
                let candidate = x + self.noise.sample(rng);
                Ok((candidate, 0.0))
            }
            RandomWalkKind::Mala => {
                let mean_fwd = self.drifted_mean(x, target)?;
                let candidate = &mean_fwd + self.noise.sample(rng);
                let mean_rev = self.drifted_mean(&candidate, target)?;
                let log_fwd = self.noise.logpdf(&(&candidate - mean_fwd));
                let log_rev = self.noise.logpdf(&(x - mean_rev));
                Ok((candidate, log_rev - log_fwd))
            }
        }
    }
}

/// Equal-weight Gaussian mixture located at the current population states,
/// frozen within one horizontal period.
pub struct MixtureProposal {
    components: Vec<MvNormal>,
    log_weight: f64,
}

impl MixtureProposal {
    pub fn build(locations: &[DVector<f64>], covs: &[DMatrix<f64>]) -> Result<Self> {
        if locations.is_empty() || locations.len() != covs.len() {
            return Err(Error::Config(
                "mixture needs matching, non-empty locations and covariances".into(),
            ));
        }
        let components = locations
            .iter()
            .zip(covs)
            .map(|(loc, cov)| MvNormal::new(loc.clone(), cov.clone()))
            .collect::<Result<Vec<_>>>()?;
        let log_weight = -(locations.len() as f64).ln();
        Ok(Self {
            components,
            log_weight,
        })
    }

    /// All components share one covariance matrix.
    pub fn build_shared(locations: &[DVector<f64>], cov: &DMatrix<f64>) -> Result<Self> {
        let covs = vec![cov.clone(); locations.len()];
        Self::build(locations, &covs)
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, n: usize) -> &MvNormal {
        &self.components[n]
    }
}

impl IndepProposal for MixtureProposal {
    fn logpdf(&self, x: &DVector<f64>) -> f64 {
        let lps: Vec<f64> = self.components.iter().map(|c| c.logpdf(x)).collect();
        self.log_weight + log_sum_exp(&lps).expect("non-empty mixture")
    }

    fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        use rand::Rng;
        let k = rng.gen_range(0..self.components.len());
        self.components[k].sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::gaussian_mixture_5;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn rw_degenerate_spread_stays_put() {
        let q = RandomWalkProposal::isotropic_random_walk(2, 1e-12).unwrap();
        let t = gaussian_mixture_5();
        let x = DVector::from_row_slice(&[3.0, -4.0]);
        let mut rng = RngStream::new(1, 0);
        let (cand, ratio) = q.propose(&x, &t, &mut rng).unwrap();
        assert!((cand - &x).norm() < 1e-9);
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn rw_log_ratio_exactly_zero() {
        let q = RandomWalkProposal::isotropic_random_walk(2, 5.0).unwrap();
        let t = gaussian_mixture_5();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-10.0..10.0));
            let (_, ratio) = q.propose(&x, &t, &mut rng).unwrap();
            assert_eq!(ratio, 0.0);
        }
    }

    #[test]
    fn mala_requires_gradient() {
        struct NoGrad;
        impl Target for NoGrad {
            fn dim(&self) -> usize {
                2
            }
            fn log_density(&self, _x: &DVector<f64>) -> f64 {
                0.0
            }
        }
        let q = RandomWalkProposal::mala(2, 0.1).unwrap();
        let mut rng = RngStream::new(3, 0);
        assert!(q.propose(&DVector::zeros(2), &NoGrad, &mut rng).is_err());
    }

    #[test]
    fn mala_drift_vanishes_at_stationary_point() {
        // At a mode of the target the finite-difference gradient is ~0, so the
        // candidate mean equals x.
        let t = gaussian_mixture_5();
        // argmax near a component mean; refine by gradient ascent
        let mut x = DVector::from_row_slice(&[0.0, 16.0]);
        for _ in 0..200 {
            x += t.gradient(&x).unwrap() * 0.1;
        }
        let fd = DVector::from_fn(2, |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            (t.log_density(&xp) - t.log_density(&xm)) / 2e-6
        });
        assert!(fd.norm() < 1e-6, "not at a stationary point: {fd:?}");

        let q = RandomWalkProposal::mala(2, 0.01).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 20_000;
        let mut acc = DVector::zeros(2);
        for _ in 0..n {
            let (cand, _) = q.propose(&x, &t, &mut rng).unwrap();
            acc += cand;
        }
        acc /= n as f64;
        // mean of candidates = x + (eps/2) grad = x, within MC error
        let tol = 4.0 * (0.01f64).sqrt() / (n as f64).sqrt();
        assert!((acc - &x).norm() < 3.0 * tol);
    }

    #[test]
    fn mala_ratio_is_consistent_with_drifted_gaussians() {
        let t = gaussian_mixture_5();
        let q = RandomWalkProposal::mala(2, 0.3).unwrap();
        let mut rng = RngStream::new(5, 0);
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let (cand, ratio) = q.propose(&x, &t, &mut rng).unwrap();
        let eps = 0.3;
        let mean_fwd = &x + t.gradient(&x).unwrap() * (eps / 2.0);
        let mean_rev = &cand + t.gradient(&cand).unwrap() * (eps / 2.0);
        let g = MvNormal::isotropic(DVector::zeros(2), eps).unwrap();
        let expect = g.logpdf(&(&x - mean_rev)) - g.logpdf(&(&cand - mean_fwd));
        assert_relative_eq!(ratio, expect, epsilon = 1e-12);
    }

    #[test]
    fn mixture_single_component_equals_component() {
        let loc = vec![DVector::from_row_slice(&[1.0, -2.0])];
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let psi = MixtureProposal::build_shared(&loc, &cov).unwrap();
        let phi = MvNormal::new(loc[0].clone(), cov).unwrap();
        let mut rng = RngStream::new(6, 0);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-8.0..8.0));
            assert_relative_eq!(psi.logpdf(&x), phi.logpdf(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_identical_components_degenerate() {
        let loc = vec![DVector::from_row_slice(&[0.5, 0.5]); 4];
        let cov = DMatrix::identity(2, 2);
        let psi = MixtureProposal::build_shared(&loc, &cov).unwrap();
        let phi = MvNormal::new(loc[0].clone(), cov).unwrap();
        let x = DVector::from_row_slice(&[1.0, 1.5]);
        assert_relative_eq!(psi.logpdf(&x), phi.logpdf(&x), epsilon = 1e-12);
    }

    #[test]
    fn mixture_logpdf_matches_direct_mean_of_densities() {
        let locs = vec![
            DVector::from_row_slice(&[-3.0, 0.0]),
            DVector::from_row_slice(&[2.0, 1.0]),
            DVector::from_row_slice(&[0.0, -4.0]),
        ];
        let cov = DMatrix::from_row_slice(2, 2, &[1.5, -0.2, -0.2, 0.8]);
        let psi = MixtureProposal::build_shared(&locs, &cov).unwrap();
        let comps: Vec<MvNormal> = locs
            .iter()
            .map(|l| MvNormal::new(l.clone(), cov.clone()))
            .collect::<Result<_>>()
            .unwrap();
        let mut rng = RngStream::new(7, 0);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-8.0..8.0));
            let mean_density: f64 =
                comps.iter().map(|c| c.logpdf(&x).exp()).sum::<f64>() / comps.len() as f64;
            assert_relative_eq!(psi.logpdf(&x), mean_density.ln(), epsilon = 1e-10);
        }
    }

    #[test]
    fn mixture_non_spd_rejected() {
        let loc = vec![DVector::zeros(2)];
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(
            MixtureProposal::build_shared(&loc, &cov),
            Err(Error::Covariance)
        ));
    }

    #[test]
    fn mixture_self_importance_weights_are_unity() {
        // psi integrates to 1: importance weights of psi against itself.
        let locs = vec![
            DVector::from_row_slice(&[-1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0]),
        ];
        let psi = MixtureProposal::build_shared(&locs, &DMatrix::identity(2, 2)).unwrap();
        let mut rng = RngStream::new(8, 0);
        for _ in 0..1000 {
            let z = psi.sample(&mut rng);
            let w = psi.logpdf(&z) - psi.logpdf(&z);
            assert_eq!(w, 0.0);
        }
    }
}
