//! Follow-the-active-and-regularized-leader: an FTRL step over the full
//! simplex, restricted and renormalized to the round's active arms.
//!
//! Active arms take the IX estimate, inactive arms the fill value
//! `ℓ̂ − γ·Σ ℓ̃`, which keeps the cumulative loss vector nonnegative and
//! nondecreasing per coordinate. The arm count K is required up front.

use crate::core::{ActiveRound, ArmId, Distribution, Learner};
use crate::estimators::{inactive_fill, ix_estimate};
use crate::{Error, Result};

/// Regularization function for the FTRL step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// Negative Shannon entropy `(1/η)·Σ q ln q`; closed-form softmax step.
    Shannon,
    /// Tsallis entropy `(1 − Σ q^β)/(η(1−β))` with exponent `β ∈ (0,1)`.
    Tsallis { beta: f64 },
}

impl Regularizer {
    fn validate(self) -> Result<()> {
        if let Regularizer::Tsallis { beta } = self {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidParameters(format!(
                    "Tsallis exponent beta {beta} must lie in (0,1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ftarl {
    eta: f64,
    gamma: f64,
    regularizer: Regularizer,
    cum_loss: Vec<f64>,
}

impl Ftarl {
    pub fn new(num_arms: usize, eta: f64, gamma: f64, regularizer: Regularizer) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::InvalidParameters("zero arms".into()));
        }
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
        regularizer.validate()?;
        Ok(Self {
            eta,
            gamma,
            regularizer,
            cum_loss: vec![0.0; num_arms],
        })
    }

    pub fn num_arms(&self) -> usize {
        self.cum_loss.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    /// Full-support FTRL weights `q = argmin ψ(q) + ⟨q, L̃⟩` over the simplex.
    pub fn weights(&self) -> Result<Vec<f64>> {
        solve_weights(self.eta, self.regularizer, &self.cum_loss)
    }

    /// Restriction of the FTRL weights to the active set: `p_i = I_i·q_i / Σ_A q`.
    pub fn sampling_distribution(&self, round: &ActiveRound) -> Result<Distribution> {
        if round.num_arms() != self.num_arms() {
            return Err(Error::ProtocolViolation(format!(
                "round has {} arms, state has {}",
                round.num_arms(),
                self.num_arms()
            )));
        }
        if !round.is_binary() {
            return Err(Error::ProtocolViolation(
                "FTARL is defined for binary activity only".into(),
            ));
        }
        let q = self.weights()?;
        let total: f64 = round.active_set().iter().map(|&a| q[a.index()]).sum();
        let mut probs = vec![0.0; self.num_arms()];
        for &a in round.active_set() {
            probs[a.index()] = q[a.index()] / total;
        }
        Distribution::new(probs)
    }

    /// Absorb one round: active arms add the IX estimate, inactive arms the
    /// fill value; every increment is nonnegative.
    pub fn absorb(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        let est = ix_estimate(round, dist, chosen, loss, self.gamma)?;
        let fill = inactive_fill(loss, &est, round, self.gamma);
        for i in 0..self.num_arms() {
            let arm = ArmId(i);
            self.cum_loss[i] += if round.is_active(arm) {
                est.value(arm)
            } else {
                fill
            };
        }
        Ok(())
    }
}

impl Learner for Ftarl {
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

/// The FTRL objective `ψ(q) + ⟨q, L̃⟩` (reference for the solver and tests).
pub fn ftrl_objective(regularizer: Regularizer, eta: f64, cum_loss: &[f64], q: &[f64]) -> f64 {
    let linear: f64 = q.iter().zip(cum_loss).map(|(&x, &l)| x * l).sum();
    let reg = match regularizer {
        Regularizer::Shannon => {
            q.iter()
                .map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 })
                .sum::<f64>()
                / eta
        }
        Regularizer::Tsallis { beta } => {
            (1.0 - q.iter().map(|&x| x.powf(beta)).sum::<f64>()) / (eta * (1.0 - beta))
        }
    };
    reg + linear
}

/// Solve `argmin_{q ∈ Δ_K} ψ(q) + ⟨q, L̃⟩` to full support.
///
/// Shannon is the closed-form softmax of `−η·L̃`. Tsallis solves the
/// stationarity system via its scalar dual: `q_i(λ) = (c/(L̃_i − λ))^{1/(1−β)}`
/// with `c = β/(η(1−β))` and `λ` bracketed analytically below `min L̃`,
/// then located by bisection plus a Newton polish on `Σ q(λ) = 1`.
pub fn solve_weights(eta: f64, regularizer: Regularizer, cum_loss: &[f64]) -> Result<Vec<f64>> {
    let k = cum_loss.len();
    if k == 0 {
        return Err(Error::InvalidParameters("zero arms".into()));
    }
    if cum_loss.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidParameters(
            "cumulative losses must be finite and nonnegative".into(),
        ));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    match regularizer {
        Regularizer::Shannon => {
            let min_l = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
            let mut q: Vec<f64> = cum_loss.iter().map(|&l| (-eta * (l - min_l)).exp()).collect();
            let total: f64 = q.iter().sum();
            for x in &mut q {
                *x /= total;
            }
            Ok(q)
        }
        Regularizer::Tsallis { beta } => solve_tsallis(eta, beta, cum_loss),
    }
}

fn solve_tsallis(eta: f64, beta: f64, cum_loss: &[f64]) -> Result<Vec<f64>> {
    let k = cum_loss.len() as f64;
    let c = beta / (eta * (1.0 - beta));
    let min_l = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let expo = 1.0 / (1.0 - beta);

    let q_of = |lambda: f64| -> Vec<f64> {
        cum_loss
            .iter()
            .map(|&l| (c / (l - lambda)).powf(expo))
            .collect()
    };
    let mass = |lambda: f64| -> f64 { q_of(lambda).iter().sum() };

    // Analytic bracket: mass(lo) ≤ 1 ≤ mass(hi).
    let mut lo = min_l - c * k.powf(1.0 - beta);
    let mut hi = min_l - c;
    let (lo0, hi0) = (lo, hi);

    let mut lambda = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..200 {
        lambda = 0.5 * (lo + hi);
        let m = mass(lambda);
        if (m - 1.0).abs() <= 1e-13 {
            converged = true;
            break;
        }
        if m >= 1.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        if hi - lo <= 1e-15 * (1.0 + lambda.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure(format!(
            "dual bisection did not bracket Σq=1 (K={}, beta={beta}, eta={eta})",
            cum_loss.len()
        )));
    }

    // Newton polish on the monotone normalization equation.
    for _ in 0..8 {
        let q = q_of(lambda);
        let m: f64 = q.iter().sum();
        if (m - 1.0).abs() <= 1e-15 {
            break;
        }
        let slope: f64 = q
            .iter()
            .zip(cum_loss)
            .map(|(&qi, &l)| qi / ((1.0 - beta) * (l - lambda)))
            .sum();
        let next = lambda - (m - 1.0) / slope;
        if next.is_finite() && next > lo0 && next < hi0 {
            lambda = next;
        } else {
            break;
        }
    }

    let mut q = q_of(lambda);
    let total: f64 = q.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > 1e-10 {
        return Err(Error::SolverFailure(format!(
            "normalization residual {} after dual solve",
            total - 1.0
        )));
    }
    for x in &mut q {
        *x /= total;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{grid_minimize, GridSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_losses_give_uniform_for_any_beta() {
        for beta in [0.3, 0.5, 0.7] {
            for eta in [0.05, 0.5, 2.0] {
                let q =
                    solve_weights(eta, Regularizer::Tsallis { beta }, &[0.0; 4]).unwrap();
                for &qi in &q {
                    assert!((qi - 0.25).abs() < 1e-12, "beta={beta} eta={eta}: {q:?}");
                }
            }
        }
    }

    #[test]
    fn single_arm_is_a_point() {
        let q = solve_weights(0.5, Regularizer::Tsallis { beta: 0.5 }, &[3.0]).unwrap();
        assert_eq!(q, vec![1.0]);
    }

    #[test]
    fn tsallis_solution_matches_grid_oracle() {
        let eta = 0.5;
        let beta = 0.5;
        let cum = [0.0, 1.0, 2.0];
        let q = solve_weights(eta, Regularizer::Tsallis { beta }, &cum).unwrap();
        let solver_obj = ftrl_objective(Regularizer::Tsallis { beta }, eta, &cum, &q);
        let spec = GridSpec::new(3).unwrap();
        let (_, oracle_obj) = grid_minimize(
            |x| ftrl_objective(Regularizer::Tsallis { beta }, eta, &cum, x),
            &spec,
        );
        assert!(
            solver_obj <= oracle_obj + 1e-6,
            "solver {solver_obj} vs oracle {oracle_obj}"
        );
        assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn shannon_equals_softmax() {
        let eta = 0.7;
        let cum = [0.3, 1.1, 0.0, 2.4];
        let q = solve_weights(eta, Regularizer::Shannon, &cum).unwrap();
        let z: f64 = cum.iter().map(|&l| (-eta * l).exp()).sum();
        for (qi, &l) in q.iter().zip(&cum) {
            assert!((qi - (-eta * l).exp() / z).abs() < 1e-14);
        }
    }

    #[test]
    fn all_arms_active_gives_weights_directly() {
        let state = Ftarl::new(3, 0.5, 0.0, Regularizer::Tsallis { beta: 0.5 }).unwrap();
        let round = ActiveRound::fully_active(3);
        let p = state.sampling_distribution(&round).unwrap();
        let q = state.weights().unwrap();
        for (pi, qi) in p.probs().iter().zip(&q) {
            assert!((pi - qi).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_renormalizes() {
        // Shannon weights engineered to (0.2, 0.3, 0.5); active {0,2} gives
        // (2/7, 0, 5/7).
        let mut state = Ftarl::new(3, 1.0, 0.0, Regularizer::Shannon).unwrap();
        state.cum_loss = vec![-(0.2f64.ln()), -(0.3f64.ln()), -(0.5f64.ln())];
        let round = ActiveRound::binary(3, &[0, 2]).unwrap();
        let p = state.sampling_distribution(&round).unwrap();
        assert!((p.prob(ArmId(0)) - 2.0 / 7.0).abs() < 1e-12);
        assert_eq!(p.prob(ArmId(1)), 0.0);
        assert!((p.prob(ArmId(2)) - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_active_arm_gets_all_mass() {
        let state = Ftarl::new(4, 0.3, 0.1, Regularizer::Tsallis { beta: 0.5 }).unwrap();
        let round = ActiveRound::binary(4, &[2]).unwrap();
        let p = state.sampling_distribution(&round).unwrap();
        assert_eq!(p.prob(ArmId(2)), 1.0);
    }

    #[test]
    fn unexplored_update_fills_inactive_with_observed_loss() {
        // γ=0: every inactive arm's increment equals ℓ̂.
        let mut state = Ftarl::new(4, 0.5, 0.0, Regularizer::Tsallis { beta: 0.5 }).unwrap();
        let round = ActiveRound::binary(4, &[0, 1]).unwrap();
        let dist = state.sampling_distribution(&round).unwrap();
        state.absorb(&round, &dist, ArmId(0), 0.6).unwrap();
        assert!((state.cum_loss()[2] - 0.6).abs() < 1e-15);
        assert!((state.cum_loss()[3] - 0.6).abs() < 1e-15);
        assert_eq!(state.cum_loss()[1], 0.0);
    }

    #[test]
    fn ix_update_hand_values() {
        // γ=0.1, p[chosen]=0.4, loss=0.8: chosen +1.6, other active +0,
        // inactive +0.64.
        let mut state = Ftarl::new(3, 0.5, 0.1, Regularizer::Shannon).unwrap();
        let round = ActiveRound::binary(3, &[0, 1]).unwrap();
        let dist = Distribution::new(vec![0.4, 0.6, 0.0]).unwrap();
        state.absorb(&round, &dist, ArmId(0), 0.8).unwrap();
        assert!((state.cum_loss()[0] - 1.6).abs() < 1e-12);
        assert_eq!(state.cum_loss()[1], 0.0);
        assert!((state.cum_loss()[2] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn increments_nonnegative_on_random_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = Ftarl::new(5, 0.4, 0.05, Regularizer::Tsallis { beta: 0.5 }).unwrap();
        let mut prev = state.cum_loss().to_vec();
        for _ in 0..200 {
            let a0 = rng.gen_range(0..5);
            let a1 = rng.gen_range(0..5);
            let active: Vec<usize> = if a0 == a1 { vec![a0] } else { vec![a0.min(a1), a0.max(a1)] };
            let round = ActiveRound::binary(5, &active).unwrap();
            let dist = state.sampling_distribution(&round).unwrap();
            let chosen = crate::core::sample(&dist, &mut rng).unwrap();
            let loss: f64 = rng.gen();
            state.absorb(&round, &dist, chosen, loss).unwrap();
            for (now, before) in state.cum_loss().iter().zip(&prev) {
                assert!(now >= before);
            }
            prev = state.cum_loss().to_vec();
        }
    }
}
