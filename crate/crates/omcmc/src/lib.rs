//! Orthogonal parallel MCMC: N independent "vertical" chains that
//! periodically interact through population-level "horizontal" kernels, with
//! exact cost accounting, an annealed optimization mode, and the
//! independent-chains and population-Monte-Carlo baselines.

pub mod adaptation;
pub mod cost;
pub mod error;
pub mod horizontal;
pub mod math;
pub mod mvn;
pub mod orchestrator;
pub mod proposals;
pub mod rng;
pub mod targets;
pub mod vertical;

pub use cost::{cost_closed_forms, CostCounters, Schedule, Scheme};
pub use error::{Error, Result};
pub use mvn::MvNormal;
pub use orchestrator::{
    estimate_mean, mse, relative_error, run_ipc, run_omcmc, run_omcmc_staged, run_pmc,
    run_sa_optimize, uniform_init, OmcmcSpec, Phase, SampleRecord, SampleStore,
};
pub use proposals::{IndepProposal, MixtureProposal, RandomWalkProposal};
pub use rng::{RngStream, HORIZONTAL_STREAM};
pub use targets::{
    gaussian_mixture_5, grid_mean, GaussianMixture, SinusoidModel, SinusoidPosterior, Target,
    Tempered, TemperedSequence,
};
pub use vertical::{ChainState, CoolingSchedule};
