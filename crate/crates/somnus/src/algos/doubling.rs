//! Anytime SB-EXP3 via a two-level doubling trick: geometric guesses
//! `2^C ≥ ln G` and `2^b ≥ Σ A_t` drive the learning rate
//! `η = √(2^{C+1}/2^b)`, with the inner accumulators reset whenever either
//! guess is raised.

use std::collections::BTreeSet;

use crate::core::{ActiveRound, ArmId, Distribution, Learner};
use crate::{Error, Result};

use super::SbExp3;

#[derive(Debug, Clone)]
pub struct DoublingSbExp3 {
    /// First-level exponent C: current bound ln|𝕍| ≤ 2^C.
    level_c: u32,
    /// Second-level exponent b: current bound U ≤ 2^b.
    level_b: u32,
    /// U: sum of A_t admitted in the current inner block.
    admitted: u64,
    /// 𝕍: arms seen during the current episode.
    seen: BTreeSet<ArmId>,
    inner: SbExp3,
}

impl DoublingSbExp3 {
    pub fn new(gamma: f64) -> Result<Self> {
        Ok(Self {
            level_c: 1,
            level_b: 1,
            admitted: 0,
            seen: BTreeSet::new(),
            // η is recomputed before every round; the initial value is a
            // placeholder.
            inner: SbExp3::new(1.0, gamma)?,
        })
    }

    pub fn level_c(&self) -> u32 {
        self.level_c
    }

    pub fn level_b(&self) -> u32 {
        self.level_b
    }

    pub fn admitted_sum(&self) -> u64 {
        self.admitted
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    pub fn current_eta(&self) -> f64 {
        self.inner.eta()
    }

    pub fn inner(&self) -> &SbExp3 {
        &self.inner
    }

    /// Run the admission logic for the revealed round, set η, and return the
    /// sampling distribution.
    pub fn step_distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        if !round.is_binary() {
            return Err(Error::ProtocolViolation(
                "doubling wrapper is defined for binary activity only".into(),
            ));
        }
        let a_t = round.active_count() as u64;
        let merged = {
            let extra = round
                .active_set()
                .iter()
                .filter(|a| !self.seen.contains(a))
                .count();
            (self.seen.len() + extra) as f64
        };

        // First level: new episode when ln|𝕍 ∪ A_t| outgrows 2^C.
        if merged.ln() > pow2(self.level_c) {
            self.level_c += 1;
            while (a_t as f64).ln() > pow2(self.level_c) {
                self.level_c += 1;
            }
            self.seen.clear();
            self.admitted = 0;
            self.level_b = 1;
            self.inner.reset_accumulators();
        }

        // Second level: new inner block when U + A_t outgrows 2^b.
        if (self.admitted + a_t) as f64 > pow2(self.level_b) {
            self.level_b += 1;
            while a_t as f64 > pow2(self.level_b) {
                self.level_b += 1;
            }
            self.admitted = 0;
            self.inner.reset_accumulators();
        }

        self.seen.extend(round.active_set().iter().copied());
        self.admitted += a_t;
        self.inner
            .set_eta((pow2(self.level_c + 1) / pow2(self.level_b)).sqrt());
        self.inner.sampling_distribution(round)
    }
}

fn pow2(e: u32) -> f64 {
    2f64.powi(e as i32)
}

impl Learner for DoublingSbExp3 {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        self.step_distribution(round)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        self.inner.absorb(round, dist, chosen, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn episode_persists_up_to_seven_seen_arms() {
        // 2^C = 2 with C=1; ln 7 < 2 < ln 8, so the 8th distinct arm starts
        // a new episode.
        let mut algo = DoublingSbExp3::new(0.0).unwrap();
        for arm in 0..7usize {
            let round = ActiveRound::binary(16, &[arm]).unwrap();
            let dist = algo.step_distribution(&round).unwrap();
            algo.update(&round, &dist, ArmId(arm), 0.5).unwrap();
            assert_eq!(algo.level_c(), 1, "after arm {arm}");
        }
        assert_eq!(algo.seen_count(), 7);
        let round = ActiveRound::binary(16, &[7]).unwrap();
        algo.step_distribution(&round).unwrap();
        assert_eq!(algo.level_c(), 2);
        assert_eq!(algo.seen_count(), 1);
    }

    #[test]
    fn second_level_trace() {
        // b=1, U=0, A_t=3: 0+3 > 2 raises b to 2 and admits with U=3.
        let mut algo = DoublingSbExp3::new(0.0).unwrap();
        let round = ActiveRound::binary(8, &[0, 1, 2]).unwrap();
        algo.step_distribution(&round).unwrap();
        assert_eq!(algo.level_b(), 2);
        assert_eq!(algo.admitted_sum(), 3);
        // η = √(2^{C+1}/2^b) = √(4/4) = 1 with C=1, b=2.
        assert!((algo.current_eta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distribution_after_reset_is_uniform() {
        let mut algo = DoublingSbExp3::new(0.0).unwrap();
        // Play a skewing round first.
        let r = ActiveRound::binary(16, &[0, 1]).unwrap();
        let d = algo.step_distribution(&r).unwrap();
        algo.update(&r, &d, ArmId(0), 1.0).unwrap();
        // 9 fresh arms force a first-level reset (ln 11 > 2).
        let wide = ActiveRound::binary(16, &(2..11).collect::<Vec<_>>()).unwrap();
        let d = algo.step_distribution(&wide).unwrap();
        for &a in wide.active_set() {
            assert!((d.prob(a) - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_hold_along_random_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut algo = DoublingSbExp3::new(0.0).unwrap();
        for _ in 0..500 {
            let a = rng.gen_range(1..=6usize);
            let mut arms: Vec<usize> = (0..20).collect();
            for i in 0..a {
                let j = rng.gen_range(i..20);
                arms.swap(i, j);
            }
            let round = ActiveRound::binary(20, &arms[..a]).unwrap();
            let dist = algo.step_distribution(&round).unwrap();
            // ln|𝕍| ≤ 2^C and U ≤ 2^b after every admission.
            assert!((algo.seen_count() as f64).ln() <= pow2(algo.level_c()) + 1e-12);
            assert!(algo.admitted_sum() as f64 <= pow2(algo.level_b()) + 1e-12);
            let chosen = crate::core::sample(&dist, &mut rng).unwrap();
            let loss: f64 = rng.gen();
            algo.update(&round, &dist, chosen, loss).unwrap();
        }
    }
}
