//! Exponential weights over estimated per-action regrets, restricted each
//! round to the active arms.
//!
//! Per-arm accumulators are stored raw and the learning rate is applied at
//! sampling time, so rate changes and resets (used by the doubling wrapper)
//! are trivial and the weights never overflow. State grows lazily with the
//! arms seen so far; the total arm count is never needed.

use std::collections::BTreeMap;

use crate::core::{ActiveRound, ArmId, Distribution, Learner};
use crate::estimators::ix_estimate;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SbExp3 {
    eta: f64,
    gamma: f64,
    /// Z_i = Σ_s I_{i,s}(ℓ̂_s − ℓ̃_{i,s} − γ·Σ_j I_{j,s}ℓ̃_{j,s}); absent ⇒ 0.
    acc: BTreeMap<ArmId, f64>,
}

impl SbExp3 {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "learning rate eta {eta} must be positive"
            )));
        }
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "exploration gamma {gamma} must be nonnegative"
            )));
        }
        Ok(Self {
            eta,
            gamma,
            acc: BTreeMap::new(),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Raw accumulator Z of `arm` (0 if the arm was never active).
    pub fn accumulator(&self, arm: ArmId) -> f64 {
        self.acc.get(&arm).copied().unwrap_or(0.0)
    }

    /// Log-scale weight η·Z of `arm`.
    pub fn weight_exponent(&self, arm: ArmId) -> f64 {
        self.eta * self.accumulator(arm)
    }

    pub(crate) fn set_eta(&mut self, eta: f64) {
        self.eta = eta;
    }

    pub(crate) fn reset_accumulators(&mut self) {
        self.acc.clear();
    }

    /// Test hook: perturb one accumulator to make the potential-growth
    /// monitor fire.
    #[doc(hidden)]
    pub fn nudge_accumulator(&mut self, arm: ArmId, delta: f64) {
        *self.acc.entry(arm).or_insert(0.0) += delta;
    }

    /// Sampling distribution `p_i ∝ I_i·exp(η·Z_i)` over the active set,
    /// computed in log space.
    pub fn sampling_distribution(&self, round: &ActiveRound) -> Result<Distribution> {
        let active = round.active_set();
        if active.is_empty() {
            return Err(Error::ProtocolViolation("empty active set".into()));
        }
        let max_exp = active
            .iter()
            .map(|&a| self.weight_exponent(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = vec![0.0; round.num_arms()];
        let mut total = 0.0;
        for &a in active {
            let w = round.confidence(a) * (self.weight_exponent(a) - max_exp).exp();
            probs[a.index()] = w;
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::DegenerateWeights(
                "all active confidences are zero".into(),
            ));
        }
        for p in &mut probs {
            *p /= total;
        }
        Distribution::new(probs)
    }

    /// Absorb one round: every arm with positive confidence gets
    /// `ΔZ_i = I_i·(ℓ̂ − ℓ̃_i − γ·Σ_j I_j·ℓ̃_j)`.
    pub fn absorb(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        let est = ix_estimate(round, dist, chosen, loss, self.gamma)?;
        let weighted_sum = est.confidence_weighted_sum(round);
        for &a in round.active_set() {
            let conf = round.confidence(a);
            let delta = conf * (loss - est.value(a) - self.gamma * weighted_sum);
            *self.acc.entry(a).or_insert(0.0) += delta;
        }
        Ok(())
    }
}

impl Learner for SbExp3 {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        self.sampling_distribution(round)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        self.absorb(round, dist, chosen, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_round_is_uniform() {
        let algo = SbExp3::new(0.1, 0.0).unwrap();
        let round = ActiveRound::binary(3, &[0, 1, 2]).unwrap();
        let dist = algo.sampling_distribution(&round).unwrap();
        for &a in round.active_set() {
            assert!((dist.prob(a) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inactive_arm_gets_zero_probability() {
        let algo = SbExp3::new(0.1, 0.0).unwrap();
        let round = ActiveRound::binary(4, &[1, 3]).unwrap();
        let dist = algo.sampling_distribution(&round).unwrap();
        assert_eq!(dist.prob(ArmId(0)), 0.0);
        assert_eq!(dist.prob(ArmId(2)), 0.0);
        assert!(dist.supported_on(&round));
    }

    #[test]
    fn two_round_hand_trace() {
        // η=0.1, γ=0: after A={0,1}, chosen=0, loss=0.5 the accumulators are
        // Z=(−0.5, +0.5) and the next distribution is (0.4750, 0.5250).
        let mut algo = SbExp3::new(0.1, 0.0).unwrap();
        let round = ActiveRound::binary(2, &[0, 1]).unwrap();
        let dist = algo.sampling_distribution(&round).unwrap();
        algo.absorb(&round, &dist, ArmId(0), 0.5).unwrap();
        assert!((algo.accumulator(ArmId(0)) + 0.5).abs() < 1e-15);
        assert!((algo.accumulator(ArmId(1)) - 0.5).abs() < 1e-15);
        let next = algo.sampling_distribution(&round).unwrap();
        assert!((next.prob(ArmId(0)) - 0.4750).abs() < 5e-5);
        assert!((next.prob(ArmId(1)) - 0.5250).abs() < 5e-5);
    }

    #[test]
    fn confidence_weights_scale_probabilities() {
        // Confidences (1.0, 0.5, 0.0) with all Z=0 give p = (2/3, 1/3, 0).
        let algo = SbExp3::new(0.2, 0.1).unwrap();
        let round = ActiveRound::from_confidences(vec![1.0, 0.5, 0.0]).unwrap();
        let dist = algo.sampling_distribution(&round).unwrap();
        assert!((dist.prob(ArmId(0)) - 2.0 / 3.0).abs() < 1e-12);
        assert!((dist.prob(ArmId(1)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(dist.prob(ArmId(2)), 0.0);
    }

    #[test]
    fn inactive_accumulator_untouched() {
        let mut algo = SbExp3::new(0.1, 0.05).unwrap();
        let r1 = ActiveRound::binary(3, &[0, 1, 2]).unwrap();
        let d1 = algo.sampling_distribution(&r1).unwrap();
        algo.absorb(&r1, &d1, ArmId(0), 1.0).unwrap();
        let z2_before = algo.accumulator(ArmId(2));
        let r2 = ActiveRound::binary(3, &[0, 1]).unwrap();
        let d2 = algo.sampling_distribution(&r2).unwrap();
        algo.absorb(&r2, &d2, ArmId(1), 0.3).unwrap();
        assert_eq!(algo.accumulator(ArmId(2)), z2_before);
    }

    #[test]
    fn zero_loss_leaves_all_accumulators_unchanged() {
        let mut algo = SbExp3::new(0.1, 0.0).unwrap();
        let round = ActiveRound::binary(3, &[0, 1, 2]).unwrap();
        let dist = algo.sampling_distribution(&round).unwrap();
        algo.absorb(&round, &dist, ArmId(1), 0.0).unwrap();
        for a in 0..3 {
            assert_eq!(algo.accumulator(ArmId(a)), 0.0);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        // Adding a constant to every active accumulator leaves the
        // distribution unchanged (log-space stability), shift 1e4.
        let mut a = SbExp3::new(0.1, 0.0).unwrap();
        let mut b = SbExp3::new(0.1, 0.0).unwrap();
        for (arm, z) in [(0usize, 1.3), (1, -2.0), (2, 0.4)] {
            a.nudge_accumulator(ArmId(arm), z);
            b.nudge_accumulator(ArmId(arm), z + 1e4);
        }
        let round = ActiveRound::binary(3, &[0, 1, 2]).unwrap();
        let da = a.sampling_distribution(&round).unwrap();
        let db = b.sampling_distribution(&round).unwrap();
        for i in 0..3 {
            assert!((da.probs()[i] - db.probs()[i]).abs() < 1e-12);
        }
    }
}
