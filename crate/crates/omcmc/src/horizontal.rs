//! Population-interaction kernels: SMH, the basic mixture scheme and its
//! per-chain variant, P-EnM, P-MTM and BI-MTM.
//!
//! All randomness comes from the dedicated horizontal stream, so changing the
//! chain count never perturbs the vertical streams. Importance weights are
//! kept in log domain throughout; `inv_temp` tempers the target side of each
//! weight (`inv_temp = 1` for plain sampling), which is how the annealed
//! horizontal transitions reuse the same kernels.

use nalgebra::DVector;

use crate::cost::CostCounters;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, multinomial_draw, LogWeights};
use crate::proposals::IndepProposal;
use crate::rng::RngStream;
use crate::targets::Target;
use crate::vertical::{accept, ChainState};

/// log of the SMH acceptance probability, from the inverse log-weights
/// log phi(x) - log pi(x) of the candidate and the N current members.
///
/// An out-of-support candidate carries an infinite inverse weight and is
/// rejected outright, the limit of the printed formula.
pub fn smh_log_accept(candidate_inv_lw: f64, member_inv_lws: &[f64]) -> f64 {
    if candidate_inv_lw == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    let numerator = log_sum_exp(member_inv_lws).expect("non-empty population");
    let mut all: Vec<f64> = Vec::with_capacity(member_inv_lws.len() + 1);
    all.push(candidate_inv_lw);
    all.extend_from_slice(member_inv_lws);
    // denominator: sum over all N+1 inverse weights minus the smallest one
    let min_idx = all
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let rest: Vec<f64> = all
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != min_idx)
        .map(|(_, &v)| v)
        .collect();
    let denominator = log_sum_exp(&rest).expect("non-empty");
    (numerator - denominator).min(0.0)
}

/// log acceptance of the independent-MH test on mixture importance weights
/// w(x) = pi(x)/psi(x): min[1, w(new)/w(old)].
pub fn mixture_log_accept(lw_new: f64, lw_old: f64) -> f64 {
    if lw_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (lw_new - lw_old).min(0.0)
}

/// Selection log-weights of the P-EnM move: the L candidate weights plus the
/// current state's weight as item L+1. Normalizing these yields the selection
/// probabilities, which sum to one by construction.
pub fn penm_selection(candidate_lws: &[f64], lw_current: f64) -> LogWeights {
    let mut v = candidate_lws.to_vec();
    v.push(lw_current);
    LogWeights(v)
}

/// log of the P-MTM acceptance probability for selected try k:
/// min[1, sum_l w_l / (sum_l w_l - w_k + w(x))].
pub fn pmtm_log_accept(candidate_lws: &[f64], k: usize, lw_current: f64) -> f64 {
    if candidate_lws[k] == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let numerator = log_sum_exp(candidate_lws).expect("non-empty tries");
    let mut rest: Vec<f64> = candidate_lws
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, &v)| v)
        .collect();
    rest.push(lw_current);
    let denominator = log_sum_exp(&rest).expect("non-empty");
    (numerator - denominator).min(0.0)
}

/// log of the BI-MTM acceptance for a tested try `lw_try` against the weight
/// sum `log_sum_j` of the j-th candidate set. The tested try need not belong
/// to that set, so the subtraction is done in shifted linear domain.
pub fn bimtm_log_accept(log_sum_j: f64, lw_try: f64, lw_current: f64) -> f64 {
    if lw_try == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let c = log_sum_j.max(lw_try).max(lw_current);
    let d = (log_sum_j - c).exp() - (lw_try - c).exp() + (lw_current - c).exp();
    if d <= 0.0 {
        return 0.0;
    }
    (log_sum_j - (c + d.ln())).min(0.0)
}

/// Zero-based index into the resampled set for chain `n` at block iteration
/// `j`: the j-th circular shift places z_{k_{(n-j) mod N}} on chain n.
pub fn circular_permutation_index(n_chains: usize, chain: usize, iteration: usize) -> usize {
    (chain + n_chains - iteration % n_chains) % n_chains
}

fn weight(log_pi: f64, log_psi: f64, inv_temp: f64) -> f64 {
    if log_pi == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        inv_temp * log_pi - log_psi
    }
}

/// One SMH transition: propose from the independent proposal, select the
/// member to replace by inverse importance weight, accept or keep the old
/// population. Changes at most one member.
pub fn smh_step(
    pop: &mut [ChainState],
    phi: &dyn IndepProposal,
    target: &dyn Target,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    let candidate = phi.sample(rng);
    let cand_log_pi = target.log_density(&candidate);
    counters.target_evals += 1;

    let inv_lws: Vec<f64> = pop
        .iter()
        .map(|s| phi.logpdf(&s.x) - inv_temp * s.log_pi)
        .collect();
    let k = multinomial_draw(&LogWeights(inv_lws.clone()), rng)?;
    counters.multinomial_steps += 1;

    let cand_inv_lw = if cand_log_pi == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        phi.logpdf(&candidate) - inv_temp * cand_log_pi
    };
    let log_alpha = smh_log_accept(cand_inv_lw, &inv_lws);
    counters.acceptance_tests += 1;
    let accepted = accept(log_alpha, rng);
    if accepted {
        pop[k].x = candidate;
        pop[k].log_pi = cand_log_pi;
    }
    pop[k].record(accepted);
    Ok(())
}

/// One basic-mixture transition: a single shared candidate from psi tested
/// independently by every chain.
pub fn basic_mixture_step(
    pop: &mut [ChainState],
    psi: &dyn IndepProposal,
    target: &dyn Target,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    let candidate = psi.sample(rng);
    let cand_log_pi = target.log_density(&candidate);
    counters.target_evals += 1;
    let cand_lw = weight(cand_log_pi, psi.logpdf(&candidate), inv_temp);
    for s in pop.iter_mut() {
        let lw_old = weight(s.log_pi, psi.logpdf(&s.x), inv_temp);
        counters.acceptance_tests += 1;
        let accepted = accept(mixture_log_accept(cand_lw, lw_old), rng);
        if accepted {
            s.x = candidate.clone();
            s.log_pi = cand_log_pi;
        }
        s.record(accepted);
    }
    Ok(())
}

/// The per-chain variant: each chain draws and tests its own candidate, so
/// the chains stay independent given psi.
pub fn variant_mixture_step(
    pop: &mut [ChainState],
    psi: &dyn IndepProposal,
    target: &dyn Target,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    for s in pop.iter_mut() {
        let candidate = psi.sample(rng);
        let cand_log_pi = target.log_density(&candidate);
        counters.target_evals += 1;
        let cand_lw = weight(cand_log_pi, psi.logpdf(&candidate), inv_temp);
        let lw_old = weight(s.log_pi, psi.logpdf(&s.x), inv_temp);
        counters.acceptance_tests += 1;
        let accepted = accept(mixture_log_accept(cand_lw, lw_old), rng);
        if accepted {
            s.x = candidate;
            s.log_pi = cand_log_pi;
        }
        s.record(accepted);
    }
    Ok(())
}

fn draw_tries(
    psi: &dyn IndepProposal,
    target: &dyn Target,
    l: usize,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> (Vec<DVector<f64>>, Vec<f64>, Vec<f64>) {
    let mut tries = Vec::with_capacity(l);
    let mut log_pis = Vec::with_capacity(l);
    let mut lws = Vec::with_capacity(l);
    for _ in 0..l {
        let z = psi.sample(rng);
        let lp = target.log_density(&z);
        counters.target_evals += 1;
        lws.push(weight(lp, psi.logpdf(&z), inv_temp));
        log_pis.push(lp);
        tries.push(z);
    }
    (tries, log_pis, lws)
}

/// One P-EnM transition: L shared candidates; each chain selects among the
/// candidates and its own current state with importance-weight probabilities.
pub fn penm_step(
    pop: &mut [ChainState],
    psi: &dyn IndepProposal,
    target: &dyn Target,
    l: usize,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("L must be at least 1".into()));
    }
    let (tries, log_pis, lws) = draw_tries(psi, target, l, inv_temp, rng, counters);
    for s in pop.iter_mut() {
        let lw_current = weight(s.log_pi, psi.logpdf(&s.x), inv_temp);
        let selection = penm_selection(&lws, lw_current);
        let choice = multinomial_draw(&selection, rng)?;
        counters.multinomial_steps += 1;
        let moved = choice < l;
        if moved {
            s.x = tries[choice].clone();
            s.log_pi = log_pis[choice];
        }
        s.record(moved);
    }
    Ok(())
}

/// One P-MTM transition: L shared candidates; each chain resamples one and
/// runs an accept/reject test against its current state.
pub fn pmtm_step(
    pop: &mut [ChainState],
    psi: &dyn IndepProposal,
    target: &dyn Target,
    l: usize,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("L must be at least 1".into()));
    }
    let (tries, log_pis, lws) = draw_tries(psi, target, l, inv_temp, rng, counters);
    let degenerate = log_sum_exp(&lws)? == f64::NEG_INFINITY;
    for s in pop.iter_mut() {
        counters.multinomial_steps += 1;
        counters.acceptance_tests += 1;
        if degenerate {
            s.record(false);
            continue;
        }
        let k = multinomial_draw(&LogWeights(lws.clone()), rng)?;
        let lw_current = weight(s.log_pi, psi.logpdf(&s.x), inv_temp);
        let accepted = accept(pmtm_log_accept(&lws, k, lw_current), rng);
        if accepted {
            s.x = tries[k].clone();
            s.log_pi = log_pis[k];
        }
        s.record(accepted);
    }
    Ok(())
}

/// One BI-MTM block: N*L candidates in N sets, one resample per set, then N
/// iterations testing the circular permutations. Returns the population
/// snapshot after each of the N iterations.
pub fn bimtm_block(
    pop: &mut Vec<ChainState>,
    psi: &dyn IndepProposal,
    target: &dyn Target,
    l: usize,
    inv_temp: f64,
    rng: &mut RngStream,
    counters: &mut CostCounters,
) -> Result<Vec<Vec<ChainState>>> {
    if l == 0 {
        return Err(Error::Config("L must be at least 1".into()));
    }
    let n = pop.len();
    let mut set_log_sums = Vec::with_capacity(n);
    // resampled try per set: (point, base log pi, weight); None if the whole
    // set is out of support
    let mut resampled: Vec<Option<(DVector<f64>, f64, f64)>> = Vec::with_capacity(n);
    for _ in 0..n {
        let (tries, log_pis, lws) = draw_tries(psi, target, l, inv_temp, rng, counters);
        let log_sum = log_sum_exp(&lws)?;
        counters.multinomial_steps += 1;
        if log_sum == f64::NEG_INFINITY {
            resampled.push(None);
        } else {
            let k = multinomial_draw(&LogWeights(lws.clone()), rng)?;
            resampled.push(Some((tries[k].clone(), log_pis[k], lws[k])));
        }
        set_log_sums.push(log_sum);
    }

    let mut snapshots = Vec::with_capacity(n);
    for j in 0..n {
        for i in 0..n {
            counters.acceptance_tests += 1;
            let h = circular_permutation_index(n, i, j);
            let s = &mut pop[i];
            // the tested try was resampled from set h, so the MTM acceptance
            // uses that set's weight sum: each chain sees every set exactly
            // once per block and each transition is a plain MTM step
            let accepted = match (&resampled[h], set_log_sums[h]) {
                (Some((try_x, try_log_pi, try_lw)), log_sum_h)
                    if log_sum_h > f64::NEG_INFINITY =>
                {
                    let lw_current = weight(s.log_pi, psi.logpdf(&s.x), inv_temp);
                    let ok = accept(bimtm_log_accept(log_sum_h, *try_lw, lw_current), rng);
                    if ok {
                        s.x = try_x.clone();
                        s.log_pi = *try_log_pi;
                    }
                    ok
                }
                _ => false,
            };
            s.record(accepted);
        }
        snapshots.push(pop.clone());
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::MvNormal;
    use crate::targets::gaussian_mixture_5;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn smh_all_equal_weights_always_accepts() {
        // all inverse weights equal (candidate included) => alpha = 1
        let w = -2.5;
        assert_eq!(smh_log_accept(w, &[w, w, w, w]), 0.0);
    }

    #[test]
    fn smh_out_of_support_candidate_rejected() {
        assert_eq!(
            smh_log_accept(f64::INFINITY, &[-1.0, 0.5]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn smh_n1_reduces_to_independent_mh() {
        // SMH with N=1 equals min[1, pi(x0) phi(x1) / (pi(x1) phi(x0))] on
        // 1000 random weight pairs.
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            // inverse weights log(phi/pi)
            let cand: f64 = rng.gen_range(-10.0..10.0);
            let member: f64 = rng.gen_range(-10.0..10.0);
            let smh = smh_log_accept(cand, &[member]);
            // log min[1, pi(x0) phi(x1) / (pi(x1) phi(x0))] in inverse-weight
            // terms: member inverse weight over candidate inverse weight
            let mh = (member - cand).min(0.0);
            assert_relative_eq!(smh, mh, epsilon = 1e-12);
        }
    }

    #[test]
    fn smh_changes_at_most_one_member() {
        let t = gaussian_mixture_5();
        let phi = MvNormal::isotropic(DVector::zeros(2), 25.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let mut pop: Vec<ChainState> = (0..5)
            .map(|i| {
                ChainState::new(
                    DVector::from_fn(2, |_, _| rng.gen_range(-4.0..4.0)),
                    &t,
                    i,
                )
            })
            .collect();
        let mut counters = CostCounters::default();
        for _ in 0..200 {
            let before: Vec<DVector<f64>> = pop.iter().map(|s| s.x.clone()).collect();
            smh_step(&mut pop, &phi, &t, 1.0, &mut rng, &mut counters).unwrap();
            let changed = pop
                .iter()
                .zip(&before)
                .filter(|(s, b)| &s.x != *b)
                .count();
            assert!(changed <= 1);
        }
        assert_eq!(counters.target_evals, 200);
        assert_eq!(counters.multinomial_steps, 200);
        assert_eq!(counters.acceptance_tests, 200);
    }

    #[test]
    fn basic_mixture_unit_ratio_accepts_all() {
        assert_eq!(mixture_log_accept(-1.3, -1.3), 0.0);
    }

    #[test]
    fn basic_mixture_out_of_support_moves_nobody() {
        struct Boxed;
        impl Target for Boxed {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, x: &DVector<f64>) -> f64 {
                if x[0].abs() <= 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        // proposal far outside the box so the candidate is always rejected
        let psi = MvNormal::isotropic(DVector::from_row_slice(&[100.0]), 0.01).unwrap();
        let t = Boxed;
        let mut rng = RngStream::new(3, 0);
        let mut pop: Vec<ChainState> = (0..3)
            .map(|i| ChainState::new(DVector::from_row_slice(&[0.1 * i as f64]), &t, i))
            .collect();
        let before: Vec<DVector<f64>> = pop.iter().map(|s| s.x.clone()).collect();
        let mut counters = CostCounters::default();
        basic_mixture_step(&mut pop, &psi, &t, 1.0, &mut rng, &mut counters).unwrap();
        for (s, b) in pop.iter().zip(&before) {
            assert_eq!(&s.x, b);
        }
        assert_eq!(counters.target_evals, 1);
        assert_eq!(counters.acceptance_tests, 3);
    }

    #[test]
    fn variant_counts_n_target_evals() {
        let t = gaussian_mixture_5();
        let psi = MvNormal::isotropic(DVector::zeros(2), 4.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let mut pop: Vec<ChainState> = (0..7)
            .map(|i| ChainState::new(DVector::zeros(2), &t, i))
            .collect();
        let mut counters = CostCounters::default();
        variant_mixture_step(&mut pop, &psi, &t, 1.0, &mut rng, &mut counters).unwrap();
        assert_eq!(counters.target_evals, 7);
        assert_eq!(counters.acceptance_tests, 7);
    }

    #[test]
    fn variant_n1_trace_identical_to_basic() {
        let t = gaussian_mixture_5();
        let psi = MvNormal::isotropic(DVector::zeros(2), 9.0).unwrap();
        let mut pop_a = vec![ChainState::new(DVector::zeros(2), &t, 0)];
        let mut pop_b = vec![ChainState::new(DVector::zeros(2), &t, 0)];
        let mut rng_a = RngStream::new(5, 0);
        let mut rng_b = RngStream::new(5, 0);
        let mut ca = CostCounters::default();
        let mut cb = CostCounters::default();
        for _ in 0..200 {
            basic_mixture_step(&mut pop_a, &psi, &t, 1.0, &mut rng_a, &mut ca).unwrap();
            variant_mixture_step(&mut pop_b, &psi, &t, 1.0, &mut rng_b, &mut cb).unwrap();
            assert_eq!(pop_a[0].x, pop_b[0].x);
        }
    }

    #[test]
    fn penm_probabilities_sum_to_one() {
        let mut rng = RngStream::new(6, 0);
        for _ in 0..100 {
            let lws: Vec<f64> = (0..5).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let lw_x: f64 = rng.gen_range(-8.0..8.0);
            let sel = penm_selection(&lws, lw_x);
            let lse = log_sum_exp(&sel.0).unwrap();
            let total: f64 = sel.0.iter().map(|w| (w - lse).exp()).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn penm_l1_is_barker_rule() {
        // move probability w(z) / (w(z) + w(x))
        let mut rng = RngStream::new(7, 0);
        for _ in 0..1000 {
            let lz: f64 = rng.gen_range(-6.0..6.0);
            let lx: f64 = rng.gen_range(-6.0..6.0);
            let sel = penm_selection(&[lz], lx);
            let lse = log_sum_exp(&sel.0).unwrap();
            let p_move = (sel.0[0] - lse).exp();
            let barker = lz.exp() / (lz.exp() + lx.exp());
            assert_relative_eq!(p_move, barker, epsilon = 1e-12);
        }
    }

    #[test]
    fn penm_equal_weights_uniform_selection() {
        let sel = penm_selection(&[-1.0; 4], -1.0);
        let lse = log_sum_exp(&sel.0).unwrap();
        for w in &sel.0 {
            assert_relative_eq!((w - lse).exp(), 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn pmtm_l1_matches_basic_mixture_acceptance() {
        let mut rng = RngStream::new(8, 0);
        for _ in 0..1000 {
            let lz: f64 = rng.gen_range(-9.0..9.0);
            let lx: f64 = rng.gen_range(-9.0..9.0);
            assert_relative_eq!(
                pmtm_log_accept(&[lz], 0, lx),
                mixture_log_accept(lz, lx),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn pmtm_matching_weight_cancels() {
        // selected weight equals the current state's weight => alpha = 1
        let mut rng = RngStream::new(9, 0);
        for _ in 0..100 {
            let w: f64 = rng.gen_range(-5.0..5.0);
            let others: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut lws = others.clone();
            lws.push(w);
            assert_relative_eq!(pmtm_log_accept(&lws, 4, w), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bimtm_permutation_layout_n3() {
        // V_1 = (k1,k2,k3), V_2 = (k3,k1,k2), V_3 = (k2,k3,k1)
        let expect = [[0, 1, 2], [2, 0, 1], [1, 2, 0]];
        for j in 0..3 {
            for n in 0..3 {
                assert_eq!(circular_permutation_index(3, n, j), expect[j][n]);
            }
        }
    }

    #[test]
    fn bimtm_block_counters() {
        let t = gaussian_mixture_5();
        let psi = MvNormal::isotropic(DVector::zeros(2), 16.0).unwrap();
        let mut rng = RngStream::new(10, 0);
        let (n, l) = (4, 3);
        let mut pop: Vec<ChainState> = (0..n)
            .map(|i| ChainState::new(DVector::zeros(2), &t, i))
            .collect();
        let mut counters = CostCounters::default();
        let snaps = bimtm_block(&mut pop, &psi, &t, l, 1.0, &mut rng, &mut counters).unwrap();
        assert_eq!(snaps.len(), n);
        assert_eq!(counters.target_evals, (n * l) as u64);
        assert_eq!(counters.multinomial_steps, n as u64);
        assert_eq!(counters.acceptance_tests, (n * n) as u64);
    }

    #[test]
    fn bimtm_n1_trace_identical_to_pmtm() {
        let t = gaussian_mixture_5();
        let psi = MvNormal::isotropic(DVector::zeros(2), 16.0).unwrap();
        let l = 4;
        let mut pop_a = vec![ChainState::new(DVector::zeros(2), &t, 0)];
        let mut pop_b = vec![ChainState::new(DVector::zeros(2), &t, 0)];
        let mut rng_a = RngStream::new(11, 0);
        let mut rng_b = RngStream::new(11, 0);
        let mut ca = CostCounters::default();
        let mut cb = CostCounters::default();
        for _ in 0..100 {
            bimtm_block(&mut pop_a, &psi, &t, l, 1.0, &mut rng_a, &mut ca).unwrap();
            pmtm_step(&mut pop_b, &psi, &t, l, 1.0, &mut rng_b, &mut cb).unwrap();
            assert_eq!(pop_a[0].x, pop_b[0].x);
        }
        assert_eq!(ca.target_evals, cb.target_evals);
        assert_eq!(ca.multinomial_steps, cb.multinomial_steps);
    }
}
