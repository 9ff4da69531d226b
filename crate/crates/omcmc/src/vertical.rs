//! One-step vertical transitions: Metropolis-Hastings (plain or MALA) and
//! simulated annealing.

use nalgebra::DVector;
use rand::Rng;

use crate::cost::CostCounters;
use crate::error::{Error, Result};
use crate::proposals::RandomWalkProposal;
use crate::rng::RngStream;
use crate::targets::Target;

/// State of one vertical chain, with the target log-density cached.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: DVector<f64>,
    pub log_pi: f64,
    pub chain_id: usize,
    pub accept_count: u64,
    pub step_count: u64,
}

impl ChainState {
    pub fn new(x: DVector<f64>, target: &dyn Target, chain_id: usize) -> Self {
        let log_pi = target.log_density(&x);
        Self {
            x,
            log_pi,
            chain_id,
            accept_count: 0,
            step_count: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.step_count as f64
        }
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.step_count += 1;
        if accepted {
            self.accept_count += 1;
        }
    }
}

/// Cooling schedule for simulated annealing: positive, non-increasing,
/// vanishing as t grows.
#[derive(Debug, Clone)]
pub enum CoolingSchedule {
    /// gamma_t = gamma0 * r^t with 0 < r < 1.
    Geometric { gamma0: f64, rate: f64 },
    /// gamma_t = c / ln(t + e), the classical logarithmic schedule.
    Logarithmic { c: f64 },
    /// Explicit per-iteration table; the last value persists afterwards.
    Table(Vec<f64>),
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            CoolingSchedule::Geometric { gamma0, rate } => {
                *gamma0 > 0.0 && *rate > 0.0 && *rate < 1.0
            }
            CoolingSchedule::Logarithmic { c } => *c > 0.0,
            CoolingSchedule::Table(v) => {
                !v.is_empty() && v.iter().all(|&g| g > 0.0) && v.windows(2).all(|w| w[0] >= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid cooling schedule".into()))
        }
    }

    pub fn gamma(&self, t: usize) -> f64 {
        match self {
            CoolingSchedule::Geometric { gamma0, rate } => gamma0 * rate.powi(t as i32),
            CoolingSchedule::Logarithmic { c } => c / ((t as f64) + std::f64::consts::E).ln(),
            CoolingSchedule::Table(v) => v[t.min(v.len() - 1)],
        }
    }
}

impl Default for CoolingSchedule {
    fn default() -> Self {
        CoolingSchedule::Geometric {
            gamma0: 1.0,
            rate: 0.99,
        }
    }
}

/// Log acceptance probability of the MH rule, capped at 0.
pub fn mh_log_accept(log_pi_new: f64, log_pi_old: f64, log_q_ratio: f64) -> f64 {
    if log_pi_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (log_pi_new - log_pi_old + log_q_ratio).min(0.0)
}

/// Log acceptance probability of the annealed rule with temperature gamma:
/// uphill moves are certain, downhill ones accepted with the tempered ratio.
pub fn sa_log_accept(log_pi_new: f64, log_pi_old: f64, gamma: f64) -> f64 {
    if log_pi_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    ((log_pi_new - log_pi_old) / gamma).min(0.0)
}

// Always consumes one uniform draw so that algebraically equivalent kernels
// stay trace-identical even when their log-alphas differ in the last ulp.
pub(crate) fn accept(log_alpha: f64, rng: &mut RngStream) -> bool {
    let u: f64 = rng.gen();
    if log_alpha >= 0.0 {
        return true;
    }
    if log_alpha == f64::NEG_INFINITY {
        return false;
    }
    u.ln() < log_alpha
}

/// One MH update of a single chain. Exactly one new target evaluation.
pub fn mh_step(
    state: &mut ChainState,
    q: &RandomWalkProposal,
    target: &dyn Target,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    let (candidate, log_q_ratio) = q.propose(&state.x, target, rng)?;
    let log_pi_new = target.log_density(&candidate);
    counters.target_evals += 1;
    counters.acceptance_tests += 1;
    let accepted = accept(mh_log_accept(log_pi_new, state.log_pi, log_q_ratio), rng);
    if accepted {
        state.x = candidate;
        state.log_pi = log_pi_new;
    }
    state.record(accepted);
    Ok(())
}

/// One simulated-annealing update at temperature gamma (symmetric proposal).
pub fn sa_step(
    state: &mut ChainState,
    q: &RandomWalkProposal,
    target: &dyn Target,
    gamma: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    if gamma <= 0.0 {
        return Err(Error::Config("gamma must be positive".into()));
    }
    let (candidate, log_q_ratio) = q.propose(&state.x, target, rng)?;
    debug_assert_eq!(log_q_ratio, 0.0, "SA requires a symmetric proposal");
    let log_pi_new = target.log_density(&candidate);
    counters.target_evals += 1;
    counters.acceptance_tests += 1;
    let accepted = accept(sa_log_accept(log_pi_new, state.log_pi, gamma), rng);
    if accepted {
        state.x = candidate;
        state.log_pi = log_pi_new;
    }
    state.record(accepted);
    Ok(())
}
