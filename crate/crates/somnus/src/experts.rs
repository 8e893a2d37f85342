//! Bandits with advice from sleeping experts: SE-EXP4, the virtual-expert
//! construction for adaptive regret, and the restart wrapper for tracking a
//! switching comparator.
//!
//! Experts are treated as augmented sleeping arms: an awake expert's weight
//! exponent accumulates `ℓ̂ − γ·Σ_j ℓ̃_j − x̃_m`, where `x̃_m` is the inner
//! product of its advice with the arm loss estimates. The arm estimator here
//! divides by `p_k + γ` uniformly (no confidence factor), unlike the
//! arm-level IX estimator.

use crate::core::{ActiveRound, ArmId, Distribution, Learner};
use crate::{Error, Result};

/// Default cap on the number of virtual experts (K·T(T+1)/2).
pub const DEFAULT_POOL_CAP: u64 = 5_000_000;

/// One expert's advice: a distribution over the K arms.
#[derive(Debug, Clone, PartialEq)]
pub enum AdviceRow {
    /// Point mass on one arm (virtual experts always advise this way).
    Basis(ArmId),
    Dense(Distribution),
}

impl AdviceRow {
    pub fn value(&self, arm: ArmId, num_arms: usize) -> f64 {
        match self {
            AdviceRow::Basis(a) => {
                debug_assert!(a.index() < num_arms);
                if *a == arm {
                    1.0
                } else {
                    0.0
                }
            }
            AdviceRow::Dense(d) => d.prob(arm),
        }
    }
}

/// The awake experts of one round together with their advice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdviceMatrix {
    num_arms: usize,
    /// (expert id, advice), ascending by id.
    rows: Vec<(u64, AdviceRow)>,
}

impl AdviceMatrix {
    pub fn new(num_arms: usize, rows: Vec<(u64, AdviceRow)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::ProtocolViolation("empty awake set".into()));
        }
        for w in rows.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::ProtocolViolation(
                    "awake experts must be strictly ascending".into(),
                ));
            }
        }
        for (id, row) in &rows {
            match row {
                AdviceRow::Basis(a) if a.index() >= num_arms => {
                    return Err(Error::ProtocolViolation(format!(
                        "expert {id} advises arm {a} beyond {num_arms} arms"
                    )))
                }
                AdviceRow::Dense(d) if d.num_arms() != num_arms => {
                    return Err(Error::ProtocolViolation(format!(
                        "expert {id} advice has {} arms, expected {num_arms}",
                        d.num_arms()
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { num_arms, rows })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn awake_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[(u64, AdviceRow)] {
        &self.rows
    }
}

/// SE-EXP4 state over a fixed roster of M experts.
#[derive(Debug, Clone)]
pub struct SeExp4 {
    eta: f64,
    gamma: f64,
    acc: Vec<f64>,
}

impl SeExp4 {
    pub fn new(num_experts: usize, eta: f64, gamma: f64) -> Result<Self> {
        if num_experts == 0 {
            return Err(Error::InvalidParameters("zero experts".into()));
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
        Ok(Self {
            eta,
            gamma,
            acc: vec![0.0; num_experts],
        })
    }

    pub fn num_experts(&self) -> usize {
        self.acc.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn accumulator(&self, expert: u64) -> f64 {
        self.acc[expert as usize]
    }

    /// Expert weights `z ∝ exp(η·acc)` over the awake set and the induced
    /// arm distribution `p = z·E`.
    pub fn mixture(&self, advice: &AdviceMatrix) -> Result<(Vec<f64>, Distribution)> {
        let max_exp = advice
            .rows()
            .iter()
            .map(|(id, _)| self.eta * self.acc[*id as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z: Vec<f64> = advice
            .rows()
            .iter()
            .map(|(id, _)| (self.eta * self.acc[*id as usize] - max_exp).exp())
            .collect();
        let total: f64 = z.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateWeights("all expert weights zero".into()));
        }
        for w in &mut z {
            *w /= total;
        }
        let mut probs = vec![0.0; advice.num_arms()];
        for ((_, row), &weight) in advice.rows().iter().zip(&z) {
            match row {
                AdviceRow::Basis(a) => probs[a.index()] += weight,
                AdviceRow::Dense(d) => {
                    for (i, &p) in d.probs().iter().enumerate() {
                        probs[i] += weight * p;
                    }
                }
            }
        }
        Ok((z, Distribution::new(probs)?))
    }

    /// Absorb one round's feedback: estimate arm losses with the uniform-γ
    /// estimator, score each awake expert by its advice, and update the
    /// awake accumulators; sleeping experts are untouched.
    pub fn absorb(
        &mut self,
        advice: &AdviceMatrix,
        p: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::ProtocolViolation(format!(
                "observed loss {loss} outside [0,1]"
            )));
        }
        let denom = p.prob(chosen) + self.gamma;
        if p.prob(chosen) <= 0.0 || denom <= 0.0 {
            return Err(Error::DegenerateEstimator(format!(
                "chosen arm {chosen} has probability {}",
                p.prob(chosen)
            )));
        }
        // ℓ̃ has a single nonzero entry at the chosen arm.
        let est = loss / denom;
        let baseline = loss - self.gamma * est;
        for (id, row) in advice.rows() {
            let x = row.value(chosen, advice.num_arms()) * est;
            self.acc[*id as usize] += baseline - x;
        }
        Ok(())
    }
}

/// The implicit pool of virtual experts `(k, t1, t2)`: expert `(k, t1, t2)`
/// is awake exactly on rounds `t1..=t2` and always advises arm `k`. The pool
/// has `K·T(T+1)/2` experts.
#[derive(Debug, Clone)]
pub struct VirtualExpertPool {
    num_arms: usize,
    horizon: u64,
}

impl VirtualExpertPool {
    pub fn new(num_arms: usize, horizon: u64) -> Result<Self> {
        Self::with_cap(num_arms, horizon, DEFAULT_POOL_CAP)
    }

    pub fn with_cap(num_arms: usize, horizon: u64, cap: u64) -> Result<Self> {
        if num_arms == 0 || horizon == 0 {
            return Err(Error::InvalidParameters(
                "virtual pool needs K >= 1 and T >= 1".into(),
            ));
        }
        let size = num_arms as u64 * horizon * (horizon + 1) / 2;
        if size > cap {
            return Err(Error::PoolTooLarge { size, cap });
        }
        Ok(Self { num_arms, horizon })
    }

    pub fn size(&self) -> u64 {
        self.num_arms as u64 * self.horizon * (self.horizon + 1) / 2
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Number of experts awake at round `t` (1-based): `K·t·(T−t+1)`.
    pub fn awake_count(&self, t: u64) -> u64 {
        assert!(t >= 1 && t <= self.horizon);
        self.num_arms as u64 * t * (self.horizon - t + 1)
    }

    /// Flat id of expert `(k, t1, t2)`, `1 ≤ t1 ≤ t2 ≤ T`.
    pub fn expert_id(&self, arm: ArmId, t1: u64, t2: u64) -> u64 {
        debug_assert!(t1 >= 1 && t1 <= t2 && t2 <= self.horizon);
        let t = self.horizon;
        // Intervals ordered lexicographically by (t1, t2); those with a
        // smaller first coordinate number (t1−1)(T+1) − t1(t1−1)/2.
        let interval_rank = (t1 - 1) * (t + 1) - t1 * (t1 - 1) / 2 + (t2 - t1);
        interval_rank * self.num_arms as u64 + arm.index() as u64
    }

    /// Inverse of [`Self::expert_id`].
    pub fn expert_triple(&self, id: u64) -> (ArmId, u64, u64) {
        let k = (id % self.num_arms as u64) as usize;
        let mut rank = id / self.num_arms as u64;
        let t = self.horizon;
        let mut t1 = 1;
        while rank > t - t1 {
            rank -= t - t1 + 1;
            t1 += 1;
        }
        (ArmId(k), t1, t1 + rank)
    }

    /// Advice matrix of the experts awake at round `t` (1-based).
    pub fn advice_at(&self, t: u64) -> AdviceMatrix {
        let mut rows = Vec::with_capacity(self.awake_count(t) as usize);
        for t1 in 1..=t {
            for t2 in t..=self.horizon {
                for k in 0..self.num_arms {
                    rows.push((self.expert_id(ArmId(k), t1, t2), AdviceRow::Basis(ArmId(k))));
                }
            }
        }
        AdviceMatrix::new(self.num_arms, rows).expect("awake set nonempty for 1 <= t <= T")
    }
}

/// SE-EXP4 driven by the virtual-expert pool; requires fully active rounds
/// (virtual experts target the standard non-sleeping setting).
#[derive(Debug, Clone)]
pub struct VirtualSeExp4 {
    pool: VirtualExpertPool,
    state: SeExp4,
    rounds_done: u64,
    current: Option<AdviceMatrix>,
}

impl VirtualSeExp4 {
    pub fn new(num_arms: usize, horizon: u64, eta: f64, gamma: f64) -> Result<Self> {
        let pool = VirtualExpertPool::new(num_arms, horizon)?;
        let state = SeExp4::new(pool.size() as usize, eta, gamma)?;
        Ok(Self {
            pool,
            state,
            rounds_done: 0,
            current: None,
        })
    }

    pub fn pool(&self) -> &VirtualExpertPool {
        &self.pool
    }
}

impl Learner for VirtualSeExp4 {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        if round.num_arms() != self.pool.num_arms() || round.active_count() != round.num_arms() {
            return Err(Error::ProtocolViolation(
                "virtual experts require all arms active".into(),
            ));
        }
        let t = self.rounds_done + 1;
        if t > self.pool.horizon() {
            return Err(Error::ProtocolViolation(format!(
                "round {t} beyond virtual-expert horizon {}",
                self.pool.horizon()
            )));
        }
        let advice = self.pool.advice_at(t);
        let (_, p) = self.state.mixture(&advice)?;
        self.current = Some(advice);
        Ok(p)
    }

    fn update(
        &mut self,
        _round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        let advice = self
            .current
            .take()
            .ok_or_else(|| Error::ProtocolViolation("update before distribution".into()))?;
        self.state.absorb(&advice, dist, chosen, loss)?;
        self.rounds_done += 1;
        Ok(())
    }
}

/// SE-EXP4 over K basis-vector experts, expert `i` awake exactly when arm
/// `i` is active. This is the sleeping reduction: it reproduces SB-EXP3.
#[derive(Debug, Clone)]
pub struct BasisSeExp4 {
    state: SeExp4,
    num_arms: usize,
}

impl BasisSeExp4 {
    pub fn new(num_arms: usize, eta: f64, gamma: f64) -> Result<Self> {
        Ok(Self {
            state: SeExp4::new(num_arms, eta, gamma)?,
            num_arms,
        })
    }

    fn advice_for(&self, round: &ActiveRound) -> Result<AdviceMatrix> {
        let rows = round
            .active_set()
            .iter()
            .map(|&a| (a.index() as u64, AdviceRow::Basis(a)))
            .collect();
        AdviceMatrix::new(self.num_arms, rows)
    }
}

impl Learner for BasisSeExp4 {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        if round.num_arms() != self.num_arms {
            return Err(Error::ProtocolViolation("arm count mismatch".into()));
        }
        if !round.is_binary() {
            return Err(Error::ProtocolViolation(
                "SE-EXP4 expects binary awake sets".into(),
            ));
        }
        let advice = self.advice_for(round)?;
        let (_, p) = self.state.mixture(&advice)?;
        Ok(p)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        let advice = self.advice_for(round)?;
        self.state.absorb(&advice, dist, chosen, loss)
    }
}

/// Restart wrapper: runs a fresh inner learner per episode of `⌈T/S⌉`
/// rounds. When S does not divide T the final episode is shorter.
pub struct Restarted<P, F> {
    factory: F,
    inner: P,
    episode_len: u64,
    rounds_in_episode: u64,
    episode: u64,
}

impl<P: Learner, F: FnMut(u64) -> Result<P>> Restarted<P, F> {
    pub fn new(mut factory: F, horizon: u64, switches: u64) -> Result<Self> {
        if switches == 0 || horizon == 0 {
            return Err(Error::InvalidParameters(
                "restart wrapper needs T >= 1 and S >= 1".into(),
            ));
        }
        let episode_len = horizon.div_ceil(switches);
        let inner = factory(0)?;
        Ok(Self {
            factory,
            inner,
            episode_len,
            rounds_in_episode: 0,
            episode: 0,
        })
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn episode_len(&self) -> u64 {
        self.episode_len
    }
}

impl<P: Learner, F: FnMut(u64) -> Result<P>> Learner for Restarted<P, F> {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        if self.rounds_in_episode == self.episode_len {
            self.episode += 1;
            self.inner = (self.factory)(self.episode)?;
            self.rounds_in_episode = 0;
        }
        self.inner.distribution(round)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        self.inner.update(round, dist, chosen, loss)?;
        self.rounds_in_episode += 1;
        Ok(())
    }

    fn drain_violations(&mut self) -> Vec<crate::core::MonitorViolation> {
        self.inner.drain_violations()
    }
}
