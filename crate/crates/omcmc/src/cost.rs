//! Exact accounting of target evaluations, multinomial steps and acceptance
//! tests, plus the closed forms they must equal for each scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Smh,
    BasicMixture,
    VariantMixture,
    PEnM,
    Pmtm,
    BiMtm,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Smh,
        Scheme::BasicMixture,
        Scheme::VariantMixture,
        Scheme::PEnM,
        Scheme::Pmtm,
        Scheme::BiMtm,
    ];

    pub fn uses_mixture_proposal(self) -> bool {
        !matches!(self, Scheme::Smh)
    }

    pub fn uses_tries(self) -> bool {
        matches!(self, Scheme::PEnM | Scheme::Pmtm | Scheme::BiMtm)
    }
}

/// Schedule (T, T_V, T_H, M, N, L) with M(T_V + T_H) = T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_total: usize,
    pub t_v: usize,
    pub t_h: usize,
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

impl Schedule {
    pub fn new(t_total: usize, t_v: usize, t_h: usize, n: usize, l: usize) -> Result<Self> {
        if t_total == 0 || t_v == 0 || t_h == 0 || n == 0 || l == 0 {
            return Err(Error::Config(
                "T, T_V, T_H, N and L must all be positive".into(),
            ));
        }
        if t_total % (t_v + t_h) != 0 {
            return Err(Error::Config(format!(
                "M(T_V + T_H) = T violated: {t_total} is not a multiple of {}",
                t_v + t_h
            )));
        }
        Ok(Self {
            t_total,
            t_v,
            t_h,
            m: t_total / (t_v + t_h),
            n,
            l,
        })
    }

    /// BI-MTM works in blocks of N iterations, so T_H must divide into them.
    pub fn validate_for(&self, scheme: Scheme) -> Result<()> {
        if scheme == Scheme::BiMtm && self.t_h % self.n != 0 {
            return Err(Error::Config(format!(
                "BI-MTM requires T_H divisible by N ({} mod {} != 0)",
                self.t_h, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub target_evals: u64,
    pub multinomial_steps: u64,
    pub acceptance_tests: u64,
    pub samples_generated: u64,
}

impl CostCounters {
    pub fn add(&mut self, other: &CostCounters) {
        self.target_evals += other.target_evals;
        self.multinomial_steps += other.multinomial_steps;
        self.acceptance_tests += other.acceptance_tests;
        self.samples_generated += other.samples_generated;
    }
}

/// Closed forms per scheme: SMH costs E_T = M(N T_V + T_H) with M T_H
/// multinomial steps; the multi-candidate schemes cost M(N T_V + L T_H),
/// with M N T_H multinomial steps for P-EnM/P-MTM but only M T_H for BI-MTM.
pub fn cost_closed_forms(s: &Schedule, scheme: Scheme) -> CostCounters {
    let (m, n, tv, th, l) = (
        s.m as u64,
        s.n as u64,
        s.t_v as u64,
        s.t_h as u64,
        s.l as u64,
    );
    let vertical = m * n * tv;
    let (e_h, multinomial, acc_h) = match scheme {
        Scheme::Smh => (th, th, th),
        Scheme::BasicMixture => (th, 0, n * th),
        Scheme::VariantMixture => (n * th, 0, n * th),
        // P-EnM's move decision is the multinomial selection itself
        Scheme::PEnM => (l * th, n * th, 0),
        Scheme::Pmtm => (l * th, n * th, n * th),
        Scheme::BiMtm => (l * th, th, n * th),
    };
    CostCounters {
        target_evals: vertical + m * e_h,
        multinomial_steps: m * multinomial,
        acceptance_tests: vertical + m * acc_h,
        samples_generated: n * (m * (tv + th)),
    }
}

/// The reference columns of the cost comparison: horizontal target
/// evaluations and multinomial steps per scheme over a whole run, including
/// the standard (non-recycling) parallel MTM.
pub fn horizontal_eval_count(s: &Schedule, scheme: Scheme, standard_parallel: bool) -> u64 {
    let (m, n, th, l) = (s.m as u64, s.n as u64, s.t_h as u64, s.l as u64);
    if standard_parallel {
        return m * n * l * th;
    }
    match scheme {
        Scheme::Smh | Scheme::BasicMixture => m * th,
        Scheme::VariantMixture => m * n * th,
        Scheme::PEnM | Scheme::Pmtm | Scheme::BiMtm => m * l * th,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_divisibility() {
        assert!(Schedule::new(4000, 1, 1, 5, 1).is_ok());
        assert_eq!(Schedule::new(4000, 1, 1, 5, 1).unwrap().m, 2000);
        assert!(Schedule::new(4000, 3, 2, 5, 1).is_ok()); // 4000 mod 5 == 0
        assert!(Schedule::new(4001, 1, 1, 5, 1).is_err());
        assert!(Schedule::new(4000, 3, 1, 5, 1).is_ok()); // 4000 mod 4 == 0
    }

    #[test]
    fn bimtm_block_constraint() {
        let s = Schedule::new(4004, 4, 10, 4, 2).unwrap();
        assert!(s.validate_for(Scheme::BiMtm).is_err());
        let s = Schedule::new(4800, 4, 8, 4, 2).unwrap();
        assert!(s.validate_for(Scheme::BiMtm).is_ok());
    }

    #[test]
    fn smh_table_footer_value() {
        // N=5, T=4000, T_V=T_H=1 => E_T = (T/2)(N+1) = 12000
        let s = Schedule::new(4000, 1, 1, 5, 1).unwrap();
        let c = cost_closed_forms(&s, Scheme::Smh);
        assert_eq!(c.target_evals, 12_000);
        assert_eq!(c.samples_generated, 5 * 4000);
    }

    #[test]
    fn pmtm_table_footer_value() {
        // N=5, L=50, T=4000, T_V=T_H=1 => E_T = (T/2)(N+L) = 110000
        let s = Schedule::new(4000, 1, 1, 5, 50).unwrap();
        let c = cost_closed_forms(&s, Scheme::Pmtm);
        assert_eq!(c.target_evals, 110_000);
    }

    #[test]
    fn bimtm_multinomial_reduction() {
        let s = Schedule::new(4800, 4, 8, 4, 6).unwrap();
        let pmtm = cost_closed_forms(&s, Scheme::Pmtm);
        let bimtm = cost_closed_forms(&s, Scheme::BiMtm);
        assert_eq!(bimtm.multinomial_steps * s.n as u64, pmtm.multinomial_steps);
        assert_eq!(bimtm.target_evals, pmtm.target_evals);
    }

    #[test]
    fn standard_parallel_mtm_reference() {
        let s = Schedule::new(100, 1, 1, 3, 7).unwrap();
        assert_eq!(
            horizontal_eval_count(&s, Scheme::Pmtm, true),
            (s.m * s.n * s.l * s.t_h) as u64
        );
        assert_eq!(
            horizontal_eval_count(&s, Scheme::Pmtm, false),
            (s.m * s.l * s.t_h) as u64
        );
    }
}
