//! Domain types shared by all algorithms: arms, per-round activity, loss
//! assignments, sampling distributions, and the per-action regret ledger.
//!
//! Arms are indexed from 0 internally; every external surface (CSV, JSON,
//! CLI output) reports 1-based indices.

use std::collections::BTreeMap;

use rand::Rng;

use crate::{Error, Result};

/// Tolerance on `sum(probs) == 1` when constructing a [`Distribution`].
const DIST_BUILD_TOL: f64 = 1e-9;
/// Looser tolerance checked again at sampling time.
const DIST_SAMPLE_TOL: f64 = 1e-6;

/// Identifier of an arm, a 0-based index into `[0, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArmId(pub usize);

impl ArmId {
    pub fn index(self) -> usize {
        self.0
    }

    /// 1-based index for external I/O.
    pub fn one_based(self) -> usize {
        self.0 + 1
    }
}

impl std::fmt::Display for ArmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-round activity: a confidence in `[0,1]` for each of the K arms.
///
/// Binary rounds store exactly 0.0/1.0. The active set -- the arms with
/// positive confidence -- is derived at construction and always nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRound {
    confidences: Vec<f64>,
    active: Vec<ArmId>,
}

impl ActiveRound {
    /// Binary round: the listed arms are active with confidence 1.
    pub fn binary(num_arms: usize, active: &[usize]) -> Result<Self> {
        let mut confidences = vec![0.0; num_arms];
        for &i in active {
            if i >= num_arms {
                return Err(Error::ProtocolViolation(format!(
                    "active arm index {i} out of range for {num_arms} arms"
                )));
            }
            confidences[i] = 1.0;
        }
        Self::from_confidences(confidences)
    }

    /// Round with real-valued confidences; at least one must be positive.
    pub fn from_confidences(confidences: Vec<f64>) -> Result<Self> {
        if confidences.is_empty() {
            return Err(Error::ProtocolViolation("round with zero arms".into()));
        }
        for (i, &c) in confidences.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                return Err(Error::ProtocolViolation(format!(
                    "confidence {c} of arm {i} outside [0,1]"
                )));
            }
        }
        let active: Vec<ArmId> = confidences
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(i, _)| ArmId(i))
            .collect();
        if active.is_empty() {
            return Err(Error::ProtocolViolation(
                "round with empty active set".into(),
            ));
        }
        Ok(Self {
            confidences,
            active,
        })
    }

    pub fn fully_active(num_arms: usize) -> Self {
        Self::from_confidences(vec![1.0; num_arms]).expect("num_arms > 0")
    }

    pub fn num_arms(&self) -> usize {
        self.confidences.len()
    }

    /// Arms with positive confidence, in ascending index order.
    pub fn active_set(&self) -> &[ArmId] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn confidence(&self, arm: ArmId) -> f64 {
        self.confidences[arm.index()]
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn is_active(&self, arm: ArmId) -> bool {
        arm.index() < self.confidences.len() && self.confidences[arm.index()] > 0.0
    }

    /// True when every confidence is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.confidences.iter().all(|&c| c == 0.0 || c == 1.0)
    }
}

/// Losses assigned by the adversary to the round's active arms, each in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAssignment {
    losses: BTreeMap<ArmId, f64>,
}

impl LossAssignment {
    pub fn new(entries: impl IntoIterator<Item = (ArmId, f64)>) -> Result<Self> {
        let mut losses = BTreeMap::new();
        for (arm, loss) in entries {
            if !(0.0..=1.0).contains(&loss) || !loss.is_finite() {
                return Err(Error::ProtocolViolation(format!(
                    "loss {loss} of arm {arm} outside [0,1]"
                )));
            }
            losses.insert(arm, loss);
        }
        Ok(Self { losses })
    }

    /// Build from values given in the order of the round's active set.
    pub fn for_round(round: &ActiveRound, values: &[f64]) -> Result<Self> {
        if values.len() != round.active_count() {
            return Err(Error::ProtocolViolation(format!(
                "{} loss values for {} active arms",
                values.len(),
                round.active_count()
            )));
        }
        Self::new(round.active_set().iter().copied().zip(values.iter().copied()))
    }

    pub fn get(&self, arm: ArmId) -> Option<f64> {
        self.losses.get(&arm).copied()
    }

    pub fn arms(&self) -> impl Iterator<Item = ArmId> + '_ {
        self.losses.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// True when the assignment's domain is exactly the round's active set.
    pub fn matches_round(&self, round: &ActiveRound) -> bool {
        self.losses.len() == round.active_count()
            && round.active_set().iter().all(|a| self.losses.contains_key(a))
    }
}

/// A sampling distribution over K arms.
///
/// Sums to one within `1e-9`; support is restricted to the active set of the
/// round it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} of arm {i}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > DIST_BUILD_TOL {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn point_mass(num_arms: usize, arm: ArmId) -> Self {
        let mut probs = vec![0.0; num_arms];
        probs[arm.index()] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, arm: ArmId) -> f64 {
        self.probs[arm.index()]
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    /// True when no inactive arm of `round` carries probability mass.
    pub fn supported_on(&self, round: &ActiveRound) -> bool {
        self.probs.len() == round.num_arms()
            && self
                .probs
                .iter()
                .enumerate()
                .all(|(i, &p)| p == 0.0 || round.confidences()[i] > 0.0)
    }
}

/// Draw an arm from `dist` by inverse CDF over ascending arm index.
///
/// Deterministic given the RNG state; ties at CDF boundaries resolve to the
/// lowest index.
pub fn sample<R: Rng + ?Sized>(dist: &Distribution, rng: &mut R) -> Result<ArmId> {
    sample_at(dist, rng.gen::<f64>())
}

/// Inverse-CDF lookup at a fixed uniform draw `u` in `[0,1)`.
pub fn sample_at(dist: &Distribution, u: f64) -> Result<ArmId> {
    let sum: f64 = dist.probs.iter().sum();
    if (sum - 1.0).abs() > DIST_SAMPLE_TOL {
        return Err(Error::InvalidDistribution(format!(
            "sums to {sum} at sampling time"
        )));
    }
    let mut cum = 0.0;
    let mut last_positive = None;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = Some(ArmId(i));
            if u < cum {
                return Ok(ArmId(i));
            }
        }
    }
    // u landed in the rounding slack past the last positive entry.
    last_positive.ok_or_else(|| Error::InvalidDistribution("all-zero".into()))
}

/// Per-action regret accounting.
///
/// For each arm this tracks the learner's confidence-weighted loss and the
/// arm's own over the rounds in which the arm was active, plus the count of
/// those rounds. `regret(a)` is the difference; arms never active have
/// regret 0 and are absent from storage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    learner_loss: BTreeMap<ArmId, f64>,
    comparator_loss: BTreeMap<ArmId, f64>,
    active_rounds: BTreeMap<ArmId, u64>,
    rounds: u64,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one bandit round: `chosen` must be active and `observed_loss`
    /// must equal its assigned loss.
    pub fn update(
        &mut self,
        round: &ActiveRound,
        losses: &LossAssignment,
        chosen: ArmId,
        observed_loss: f64,
    ) -> Result<()> {
        if !round.is_active(chosen) {
            return Err(Error::ProtocolViolation(format!(
                "chosen arm {chosen} is inactive"
            )));
        }
        match losses.get(chosen) {
            Some(l) if l == observed_loss => {}
            Some(l) => {
                return Err(Error::ProtocolViolation(format!(
                    "observed loss {observed_loss} differs from assigned {l}"
                )))
            }
            None => {
                return Err(Error::ProtocolViolation(format!(
                    "no loss assigned to chosen arm {chosen}"
                )))
            }
        }
        self.record(round, losses, observed_loss)
    }

    /// Generalized form used for expert regret: comparator losses need not
    /// contain the learner's own loss.
    pub fn record(
        &mut self,
        round: &ActiveRound,
        comparator_losses: &LossAssignment,
        learner_loss: f64,
    ) -> Result<()> {
        if !comparator_losses.matches_round(round) {
            return Err(Error::ProtocolViolation(
                "loss assignment domain differs from active set".into(),
            ));
        }
        for &arm in round.active_set() {
            let w = round.confidence(arm);
            *self.learner_loss.entry(arm).or_insert(0.0) += w * learner_loss;
            *self.comparator_loss.entry(arm).or_insert(0.0) +=
                w * comparator_losses.get(arm).expect("domain checked");
            *self.active_rounds.entry(arm).or_insert(0) += 1;
        }
        self.rounds += 1;
        Ok(())
    }

    /// Per-action regret of `arm`; 0 for arms never active.
    pub fn regret(&self, arm: ArmId) -> f64 {
        self.learner_loss.get(&arm).copied().unwrap_or(0.0)
            - self.comparator_loss.get(&arm).copied().unwrap_or(0.0)
    }

    /// `max_a R(a)` over all `num_arms` arms (never-active arms contribute 0).
    pub fn max_regret(&self, num_arms: usize) -> f64 {
        let seen_max = self
            .learner_loss
            .keys()
            .map(|&a| self.regret(a))
            .fold(f64::NEG_INFINITY, f64::max);
        if self.learner_loss.len() < num_arms || self.learner_loss.is_empty() {
            seen_max.max(0.0)
        } else {
            seen_max
        }
    }

    /// Number of rounds in which `arm` was active (T_a).
    pub fn active_rounds(&self, arm: ArmId) -> u64 {
        self.active_rounds.get(&arm).copied().unwrap_or(0)
    }

    /// Arms active at least once so far, ascending.
    pub fn seen(&self) -> impl Iterator<Item = ArmId> + '_ {
        self.active_rounds.keys().copied()
    }

    /// G_t: number of arms active at least once.
    pub fn seen_count(&self) -> usize {
        self.active_rounds.len()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Dense regret vector over `[0, num_arms)`.
    pub fn regrets_dense(&self, num_arms: usize) -> Vec<f64> {
        (0..num_arms).map(|i| self.regret(ArmId(i))).collect()
    }
}

/// A per-round inequality the harness found violated.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MonitorViolation {
    pub round: u64,
    pub monitor: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// The learner side of the round protocol: produce a sampling distribution
/// for the revealed round, then absorb the observed feedback.
pub trait Learner {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution>;

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()>;

    /// Violations recorded by a monitoring wrapper since the last drain.
    fn drain_violations(&mut self) -> Vec<MonitorViolation> {
        Vec::new()
    }
}
