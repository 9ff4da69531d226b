//! The run scheduler: M cycles of a vertical period followed by a horizontal
//! period, plus the independent-chains and population-Monte-Carlo baselines,
//! the annealed optimization mode, and the estimators.
//!
//! Vertical periods fan out one rayon task per chain; each chain owns its own
//! RNG stream and the horizontal kernel its own dedicated stream, so results
//! are identical for any worker count.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptationState;
use crate::cost::{CostCounters, Schedule, Scheme};
use crate::error::{Error, Result};
use crate::math::{multinomial_draw, LogWeights};
use crate::mvn::MvNormal;
use crate::proposals::{MixtureProposal, RandomWalkProposal};
use crate::rng::{RngStream, HORIZONTAL_STREAM};
use crate::targets::{Target, TemperedSequence};
use crate::vertical::{mh_step, sa_step, ChainState, CoolingSchedule};
use crate::horizontal::{
    basic_mixture_step, bimtm_block, penm_step, pmtm_step, smh_step, variant_mixture_step,
};

/// Which period produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    V,
    H,
}

#[derive(Debug, Clone)]
pub struct SampleRecord {
    /// 1-based iteration index within the chain, 1..=T.
    pub t: usize,
    pub chain: usize,
    pub x: DVector<f64>,
    pub log_pi: f64,
    pub phase: Phase,
}

/// All N*T produced states in wall-clock order, plus run metadata.
#[derive(Debug, Clone)]
pub struct SampleStore {
    pub dim: usize,
    pub n_chains: usize,
    pub records: Vec<SampleRecord>,
    pub acceptance_rates: Vec<f64>,
    pub seed: u64,
    pub config_digest: u64,
}

impl SampleStore {
    fn new(dim: usize, n_chains: usize, seed: u64, config_digest: u64) -> Self {
        Self {
            dim,
            n_chains,
            records: Vec::new(),
            acceptance_rates: vec![0.0; n_chains],
            seed,
            config_digest,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Full specification of one O-MCMC run.
#[derive(Clone)]
pub struct OmcmcSpec {
    pub scheme: Scheme,
    pub schedule: Schedule,
    pub vertical: RandomWalkProposal,
    /// Location of the SMH independent proposal before any adaptation.
    pub phi_mean: DVector<f64>,
    /// Scale of the horizontal proposal(s); also the adaptation floor.
    pub lambda0: DMatrix<f64>,
    pub adapt: bool,
    /// Training horizon in per-chain iterations; published parameters stay at
    /// their initial values until N * t_train samples have been seen.
    pub t_train: usize,
    pub init: Vec<DVector<f64>>,
    /// Some(schedule) switches the run to annealed (optimization) mode.
    pub cooling: Option<CoolingSchedule>,
}

impl OmcmcSpec {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate_for(self.scheme)?;
        if self.init.len() != self.schedule.n {
            return Err(Error::Config(format!(
                "expected {} initial points, got {}",
                self.schedule.n,
                self.init.len()
            )));
        }
        if let Some(c) = &self.cooling {
            c.validate()?;
        }
        Ok(())
    }

    fn digest(&self, seed: u64) -> u64 {
        let mut h = DefaultHasher::new();
        format!(
            "{:?}|{:?}|{:?}|{:?}|{}|{}|{:?}|{}",
            self.scheme,
            self.schedule,
            self.phi_mean.as_slice(),
            self.lambda0.as_slice(),
            self.adapt,
            self.t_train,
            self.init.iter().map(|v| v.as_slice()).collect::<Vec<_>>(),
            seed
        )
        .hash(&mut h);
        h.finish()
    }
}

/// Uniform initial population on a centered box, e.g. U([-4,4]^2).
pub fn uniform_init(
    n: usize,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    rng: &mut RngStream,
) -> Vec<DVector<f64>> {
    use rand::Rng;
    (0..n)
        .map(|_| DVector::from_fn(lower.len(), |i, _| rng.gen_range(lower[i]..upper[i])))
        .collect()
}

fn record_population(
    store: &mut SampleStore,
    counters: &mut CostCounters,
    pop: &[ChainState],
    t: usize,
    phase: Phase,
    adapt: Option<&mut AdaptationState>,
) -> Result<()> {
    for s in pop {
        store.records.push(SampleRecord {
            t,
            chain: s.chain_id,
            x: s.x.clone(),
            log_pi: s.log_pi,
            phase,
        });
        counters.samples_generated += 1;
    }
    if let Some(a) = adapt {
        let xs: Vec<DVector<f64>> = pop.iter().map(|s| s.x.clone()).collect();
        a.update(&xs)?;
    }
    Ok(())
}

/// Run the full O-MCMC scheduler: M cycles of T_V vertical steps per chain
/// followed by T_H horizontal steps, recording every produced state.
pub fn run_omcmc(
    target: &dyn Target,
    spec: &OmcmcSpec,
    seed: u64,
) -> Result<(SampleStore, CostCounters)> {
    spec.validate()?;
    let sched = spec.schedule;
    let (n, dim) = (sched.n, target.dim());
    let mut store = SampleStore::new(dim, n, seed, spec.digest(seed));
    let mut counters = CostCounters::default();

    let mut chains: Vec<(ChainState, RngStream)> = spec
        .init
        .iter()
        .enumerate()
        .map(|(i, x)| {
            (
                ChainState::new(x.clone(), target, i),
                RngStream::new(seed, i as u64),
            )
        })
        .collect();
    let mut h_rng = RngStream::new(seed, HORIZONTAL_STREAM);
    let mut adapt = spec
        .adapt
        .then(|| AdaptationState::new(spec.phi_mean.clone(), spec.lambda0.clone(), n, spec.t_train))
        .transpose()?;

    let mut t = 0usize; // completed per-chain iterations
    for _ in 0..sched.m {
        // vertical period: fan out one task per chain
        let cooling = spec.cooling.clone();
        let t_base = t;
        let results: Vec<Result<(ChainState, RngStream, CostCounters, Vec<(DVector<f64>, f64)>)>> =
            chains
                .par_drain(..)
                .map(|(mut state, mut rng)| {
                    let mut local = CostCounters::default();
                    let mut path = Vec::with_capacity(sched.t_v);
                    for step in 0..sched.t_v {
                        match &cooling {
                            Some(c) => {
                                let gamma = c.gamma(t_base + step);
                                sa_step(&mut state, &spec.vertical, target, gamma, &mut rng, &mut local)?;
                            }
                            None => {
                                mh_step(&mut state, &spec.vertical, target, &mut rng, &mut local)?
                            }
                        }
                        path.push((state.x.clone(), state.log_pi));
                    }
                    Ok((state, rng, local, path))
                })
                .collect();
        let mut paths = Vec::with_capacity(n);
        for r in results {
            let (state, rng, local, path) = r?;
            counters.add(&local);
            paths.push(path);
            chains.push((state, rng));
        }
        chains.sort_by_key(|(s, _)| s.chain_id);
        // record the vertical samples in wall-clock order (time-major)
        for step in 0..sched.t_v {
            for (chain, path) in paths.iter().enumerate() {
                let (x, log_pi) = path[step].clone();
                store.records.push(SampleRecord {
                    t: t + step + 1,
                    chain,
                    x,
                    log_pi,
                    phase: Phase::V,
                });
                counters.samples_generated += 1;
            }
        }
        if let Some(a) = adapt.as_mut() {
            for path in &paths {
                let xs: Vec<DVector<f64>> = path.iter().map(|(x, _)| x.clone()).collect();
                a.update(&xs)?;
            }
        }
        t += sched.t_v;

        // barrier: freeze the horizontal proposal for this period
        let inv_temp = match &spec.cooling {
            Some(c) => 1.0 / c.gamma(t),
            None => 1.0,
        };
        let pop: Vec<ChainState> = chains.iter().map(|(s, _)| s.clone()).collect();
        let mut pop: Vec<ChainState> = pop;
        match spec.scheme {
            Scheme::Smh => {
                let (mu, cov) = match adapt.as_ref() {
                    Some(a) => (a.mean(), a.covariance()),
                    None => (spec.phi_mean.clone(), spec.lambda0.clone()),
                };
                let phi = MvNormal::new(mu, cov)?;
                for step in 0..sched.t_h {
                    smh_step(&mut pop, &phi, target, inv_temp, &mut h_rng, &mut counters)?;
                    record_population(
                        &mut store,
                        &mut counters,
                        &pop,
                        t + step + 1,
                        Phase::H,
                        adapt.as_mut(),
                    )?;
                }
            }
            _ => {
                let locations: Vec<DVector<f64>> = pop.iter().map(|s| s.x.clone()).collect();
                let cov = match adapt.as_ref() {
                    Some(a) => a.covariance(),
                    None => spec.lambda0.clone(),
                };
                let psi = MixtureProposal::build_shared(&locations, &cov)?;
                match spec.scheme {
                    Scheme::BasicMixture => {
                        for step in 0..sched.t_h {
                            basic_mixture_step(&mut pop, &psi, target, inv_temp, &mut h_rng, &mut counters)?;
                            record_population(&mut store, &mut counters, &pop, t + step + 1, Phase::H, adapt.as_mut())?;
                        }
                    }
                    Scheme::VariantMixture => {
                        for step in 0..sched.t_h {
                            variant_mixture_step(&mut pop, &psi, target, inv_temp, &mut h_rng, &mut counters)?;
                            record_population(&mut store, &mut counters, &pop, t + step + 1, Phase::H, adapt.as_mut())?;
                        }
                    }
                    Scheme::PEnM => {
                        for step in 0..sched.t_h {
                            penm_step(&mut pop, &psi, target, sched.l, inv_temp, &mut h_rng, &mut counters)?;
                            record_population(&mut store, &mut counters, &pop, t + step + 1, Phase::H, adapt.as_mut())?;
                        }
                    }
                    Scheme::Pmtm => {
                        for step in 0..sched.t_h {
                            pmtm_step(&mut pop, &psi, target, sched.l, inv_temp, &mut h_rng, &mut counters)?;
                            record_population(&mut store, &mut counters, &pop, t + step + 1, Phase::H, adapt.as_mut())?;
                        }
                    }
                    Scheme::BiMtm => {
                        for block in 0..sched.t_h / sched.n {
                            let snaps = bimtm_block(&mut pop, &psi, target, sched.l, inv_temp, &mut h_rng, &mut counters)?;
                            for (j, snap) in snaps.iter().enumerate() {
                                record_population(
                                    &mut store,
                                    &mut counters,
                                    snap,
                                    t + block * sched.n + j + 1,
                                    Phase::H,
                                    adapt.as_mut(),
                                )?;
                            }
                        }
                    }
                    Scheme::Smh => unreachable!(),
                }
            }
        }
        t += sched.t_h;
        for (i, s) in pop.into_iter().enumerate() {
            chains[i].0 = s;
        }
    }

    for (i, (s, _)) in chains.iter().enumerate() {
        store.acceptance_rates[i] = s.acceptance_rate();
    }
    debug_assert_eq!(store.len(), n * sched.t_total);
    Ok((store, counters))
}

/// Independent parallel chains: N plain MH chains of length t_prime each,
/// no interaction.
pub fn run_ipc(
    target: &dyn Target,
    vertical: &RandomWalkProposal,
    init: &[DVector<f64>],
    t_prime: usize,
    seed: u64,
) -> Result<(SampleStore, CostCounters)> {
    let n = init.len();
    if n == 0 || t_prime == 0 {
        return Err(Error::Config("need at least one chain and one step".into()));
    }
    let mut store = SampleStore::new(target.dim(), n, seed, 0);
    let mut counters = CostCounters::default();
    let results: Vec<Result<(ChainState, CostCounters, Vec<SampleRecord>)>> = init
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut rng = RngStream::new(seed, i as u64);
            let mut state = ChainState::new(x0.clone(), target, i);
            let mut local = CostCounters::default();
            let mut recs = Vec::with_capacity(t_prime);
            for step in 0..t_prime {
                mh_step(&mut state, vertical, target, &mut rng, &mut local)?;
                local.samples_generated += 1;
                recs.push(SampleRecord {
                    t: step + 1,
                    chain: i,
                    x: state.x.clone(),
                    log_pi: state.log_pi,
                    phase: Phase::V,
                });
            }
            Ok((state, local, recs))
        })
        .collect();
    let mut per_chain = Vec::with_capacity(n);
    for r in results {
        let (state, local, recs) = r?;
        counters.add(&local);
        per_chain.push((state, recs));
    }
    per_chain.sort_by_key(|(s, _)| s.chain_id);
    // interleave time-major so the store is in wall-clock order
    for step in 0..t_prime {
        for (_, recs) in &per_chain {
            store.records.push(recs[step].clone());
        }
    }
    for (i, (s, _)) in per_chain.iter().enumerate() {
        store.acceptance_rates[i] = s.acceptance_rate();
    }
    Ok((store, counters))
}

/// Normalized PMC importance log-weights beta_n = pi(x_n)/q_n(x_n).
pub fn pmc_log_weights(log_pis: &[f64], log_qs: &[f64]) -> LogWeights {
    LogWeights(
        log_pis
            .iter()
            .zip(log_qs)
            .map(|(lp, lq)| {
                if *lp == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    lp - lq
                }
            })
            .collect(),
    )
}

/// One PMC iteration: propagate each member through a Gaussian random walk,
/// weight by pi/q, then resample the population N times with replacement.
pub fn pmc_step(
    pop: &mut Vec<DVector<f64>>,
    noise: &MvNormal,
    target: &dyn Target,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    let n = pop.len();
    let mut proposed = Vec::with_capacity(n);
    let mut log_pis = Vec::with_capacity(n);
    let mut log_qs = Vec::with_capacity(n);
    for x in pop.iter() {
        let step = noise.sample(rng);
        let z = x + &step;
        log_pis.push(target.log_density(&z));
        counters.target_evals += 1;
        log_qs.push(noise.logpdf(&step));
        proposed.push(z);
    }
    let weights = pmc_log_weights(&log_pis, &log_qs);
    let mut next = Vec::with_capacity(n);
    for _ in 0..n {
        counters.multinomial_steps += 1;
        let k = multinomial_draw(&weights, rng)?;
        next.push(proposed[k].clone());
    }
    *pop = next;
    Ok(())
}

/// The basic PMC baseline: T iterations of propagate/weight/resample.
pub fn run_pmc(
    target: &dyn Target,
    noise_cov: &DMatrix<f64>,
    init: &[DVector<f64>],
    t_total: usize,
    seed: u64,
) -> Result<(SampleStore, CostCounters)> {
    let n = init.len();
    if n == 0 || t_total == 0 {
        return Err(Error::Config("need at least one member and one step".into()));
    }
    let noise = MvNormal::new(DVector::zeros(target.dim()), noise_cov.clone())?;
    let mut rng = RngStream::new(seed, HORIZONTAL_STREAM);
    let mut store = SampleStore::new(target.dim(), n, seed, 0);
    let mut counters = CostCounters::default();
    let mut pop: Vec<DVector<f64>> = init.to_vec();
    for t in 0..t_total {
        pmc_step(&mut pop, &noise, target, &mut rng, &mut counters)?;
        for (i, x) in pop.iter().enumerate() {
            store.records.push(SampleRecord {
                t: t + 1,
                chain: i,
                x: x.clone(),
                log_pi: f64::NAN,
                phase: Phase::H,
            });
            counters.samples_generated += 1;
        }
    }
    Ok((store, counters))
}

/// Annealed optimization: the O-MCMC machinery with SA vertical kernels and
/// tempered horizontal weights. Returns the best visited point under the
/// untempered target.
pub fn run_sa_optimize(
    target: &dyn Target,
    spec: &OmcmcSpec,
    seed: u64,
) -> Result<(DVector<f64>, f64, SampleStore, CostCounters)> {
    if spec.cooling.is_none() {
        return Err(Error::Config("optimization mode needs a cooling schedule".into()));
    }
    let (store, counters) = run_omcmc(target, spec, seed)?;
    let mut best_x = spec.init[0].clone();
    let mut best_lp = target.log_density(&best_x);
    for r in &store.records {
        let lp = if r.log_pi.is_nan() {
            target.log_density(&r.x)
        } else {
            r.log_pi
        };
        if lp > best_lp {
            best_lp = lp;
            best_x = r.x.clone();
        }
    }
    Ok((best_x, best_lp, store, counters))
}

/// Run a sequence of targets (data tempering), carrying the population across
/// stage boundaries; the epoch budget is split by the stage fractions.
pub fn run_omcmc_staged(
    seq: &TemperedSequence,
    spec: &OmcmcSpec,
    seed: u64,
) -> Result<(SampleStore, CostCounters)> {
    spec.validate()?;
    let sched = spec.schedule;
    let k = seq.stages.len();
    // split the M cycles by the budget fractions; remainders go to the last
    let mut cycles: Vec<usize> = seq
        .budget_fractions
        .iter()
        .map(|f| (f * sched.m as f64).floor() as usize)
        .collect();
    let spent: usize = cycles.iter().sum();
    cycles[k - 1] += sched.m - spent;

    let mut init = spec.init.clone();
    let mut total = CostCounters::default();
    let mut store = SampleStore::new(seq.stages[0].dim(), sched.n, seed, spec.digest(seed));
    let mut t_offset = 0usize;
    for (stage, m_i) in seq.stages.iter().zip(&cycles) {
        if *m_i == 0 {
            continue;
        }
        let stage_spec = OmcmcSpec {
            schedule: Schedule::new(
                m_i * (sched.t_v + sched.t_h),
                sched.t_v,
                sched.t_h,
                sched.n,
                sched.l,
            )?,
            init: init.clone(),
            ..spec.clone()
        };
        let (s, c) = run_omcmc(stage.as_ref(), &stage_spec, seed.wrapping_add(t_offset as u64))?;
        // carry the final population into the next stage
        for chain in 0..sched.n {
            init[chain] = s
                .records
                .iter()
                .rev()
                .find(|r| r.chain == chain)
                .expect("non-empty stage")
                .x
                .clone();
        }
        for mut r in s.records {
            r.t += t_offset;
            store.records.push(r);
        }
        store.acceptance_rates = s.acceptance_rates;
        total.add(&c);
        t_offset += m_i * (sched.t_v + sched.t_h);
    }
    Ok((store, total))
}

/// Mean over all stored samples.
pub fn estimate_mean(store: &SampleStore) -> Result<DVector<f64>> {
    if store.is_empty() {
        return Err(Error::Config("empty sample store".into()));
    }
    let mut acc = DVector::zeros(store.dim);
    for r in &store.records {
        acc += &r.x;
    }
    Ok(acc / store.len() as f64)
}

/// MSE of a set of per-run estimates against the truth, averaged over runs
/// and dimensions.
pub fn mse(estimates: &[DVector<f64>], truth: &DVector<f64>) -> f64 {
    let d = truth.len();
    estimates
        .iter()
        .map(|e| (e - truth).norm_squared())
        .sum::<f64>()
        / (estimates.len() * d) as f64
}

/// Relative error ||est - truth|| / ||truth||.
pub fn relative_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (estimate - truth).norm() / truth.norm()
}
