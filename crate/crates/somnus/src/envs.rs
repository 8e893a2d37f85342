//! Environment generators: scripted adversaries with stochastic activity,
//! the always-active-arm vs. interval-arms lower-bound construction,
//! piecewise-stationary switching losses, and confidence-reporting rounds.
//!
//! Scripts are immutable after construction, replayable (equal seeds give
//! byte-identical JSON), and serialize to a versioned JSON document for
//! replay and cross-implementation comparison. Arm indices in the JSON are
//! 1-based.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algos::HorizonInfo;
use crate::core::{ActiveRound, ArmId, LossAssignment};
use crate::{Error, Result};

/// Schema version of the environment-script JSON document.
pub const SCRIPT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvMode {
    Binary,
    Confidence,
}

/// A fully materialized sequence of rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentScript {
    num_arms: usize,
    mode: EnvMode,
    rounds: Vec<(ActiveRound, LossAssignment)>,
}

impl EnvironmentScript {
    pub fn new(
        num_arms: usize,
        mode: EnvMode,
        rounds: Vec<(ActiveRound, LossAssignment)>,
    ) -> Result<Self> {
        let script = Self {
            num_arms,
            mode,
            rounds,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn mode(&self) -> EnvMode {
        self.mode
    }

    pub fn horizon(&self) -> u64 {
        self.rounds.len() as u64
    }

    pub fn rounds(&self) -> &[(ActiveRound, LossAssignment)] {
        &self.rounds
    }

    /// Check every per-round invariant: matching arm counts, nonempty active
    /// sets (guaranteed by construction of `ActiveRound`), loss domains equal
    /// to active sets, and binary confidences in binary mode.
    pub fn validate(&self) -> Result<()> {
        for (t, (round, losses)) in self.rounds.iter().enumerate() {
            let fail = |msg: String| {
                Err(Error::ProtocolViolation(msg).at_round(t as u64 + 1))
            };
            if round.num_arms() != self.num_arms {
                return fail(format!(
                    "round has {} arms, script declares {}",
                    round.num_arms(),
                    self.num_arms
                ));
            }
            if self.mode == EnvMode::Binary && !round.is_binary() {
                return fail("non-binary confidences in a binary script".into());
            }
            if !losses.matches_round(round) {
                return fail("loss domain differs from active set".into());
            }
        }
        Ok(())
    }

    /// Realized horizon quantities (G_T, Σ activations, A, K, T).
    pub fn horizon_info(&self) -> HorizonInfo {
        let mut ever = vec![false; self.num_arms];
        let mut total = 0.0;
        let mut max_active = 0usize;
        for (round, _) in &self.rounds {
            for &a in round.active_set() {
                ever[a.index()] = true;
            }
            total += round.confidences().iter().sum::<f64>();
            max_active = max_active.max(round.active_count());
        }
        HorizonInfo {
            arms_ever_active: ever.iter().filter(|&&b| b).count() as f64,
            total_activations: total,
            horizon: self.horizon(),
            max_active: max_active as f64,
            num_arms: self.num_arms as f64,
        }
    }

    /// Arms active at least once (𝔾_T), ascending.
    pub fn ever_active(&self) -> Vec<ArmId> {
        let mut ever = vec![false; self.num_arms];
        for (round, _) in &self.rounds {
            for &a in round.active_set() {
                ever[a.index()] = true;
            }
        }
        ever.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| ArmId(i))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let rounds = self
            .rounds
            .iter()
            .map(|(round, losses)| {
                let loss_values: Vec<f64> = round
                    .active_set()
                    .iter()
                    .map(|&a| losses.get(a).expect("validated"))
                    .collect();
                match self.mode {
                    EnvMode::Binary => RoundDoc {
                        active: Some(round.active_set().iter().map(|a| a.one_based()).collect()),
                        confidences: None,
                        losses: loss_values,
                    },
                    EnvMode::Confidence => RoundDoc {
                        active: None,
                        confidences: Some(round.confidences().to_vec()),
                        losses: loss_values,
                    },
                }
            })
            .collect();
        let doc = ScriptDoc {
            schema: SCRIPT_SCHEMA,
            t: self.horizon(),
            k: self.num_arms,
            mode: self.mode,
            rounds,
        };
        serde_json::to_string(&doc).expect("script serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScriptDoc = serde_json::from_str(text)?;
        if doc.schema != SCRIPT_SCHEMA {
            return Err(Error::InvalidParameters(format!(
                "unsupported script schema {}",
                doc.schema
            )));
        }
        if doc.rounds.len() as u64 != doc.t {
            return Err(Error::InvalidParameters(format!(
                "declared horizon {} but {} rounds",
                doc.t,
                doc.rounds.len()
            )));
        }
        let mut rounds = Vec::with_capacity(doc.rounds.len());
        for (idx, rd) in doc.rounds.into_iter().enumerate() {
            let round = match (doc.mode, rd.active, rd.confidences) {
                (EnvMode::Binary, Some(active), None) => {
                    let zero_based: Vec<usize> = active
                        .iter()
                        .map(|&a| {
                            a.checked_sub(1).ok_or_else(|| {
                                Error::InvalidParameters("arm index 0 in 1-based list".into())
                            })
                        })
                        .collect::<Result<_>>()?;
                    ActiveRound::binary(doc.k, &zero_based)
                }
                (EnvMode::Confidence, None, Some(confidences)) => {
                    if confidences.len() != doc.k {
                        return Err(Error::InvalidParameters(format!(
                            "round {} has {} confidences, expected {}",
                            idx + 1,
                            confidences.len(),
                            doc.k
                        )));
                    }
                    ActiveRound::from_confidences(confidences)
                }
                _ => Err(Error::InvalidParameters(format!(
                    "round {} fields do not match mode",
                    idx + 1
                ))),
            }
            .map_err(|e| e.at_round(idx as u64 + 1))?;
            let losses = LossAssignment::for_round(&round, &rd.losses)
                .map_err(|e| e.at_round(idx as u64 + 1))?;
            rounds.push((round, losses));
        }
        Self::new(doc.k, doc.mode, rounds)
    }
}

#[derive(Serialize, Deserialize)]
struct ScriptDoc {
    schema: u32,
    t: u64,
    k: usize,
    mode: EnvMode,
    rounds: Vec<RoundDoc>,
}

#[derive(Serialize, Deserialize)]
struct RoundDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    active: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidences: Option<Vec<f64>>,
    losses: Vec<f64>,
}

/// The adversary side of the protocol. Adaptive adversaries see the
/// learner's previous choice (bandit feedback: the chosen arm, not the
/// learner's distribution).
pub trait Environment {
    fn num_arms(&self) -> usize;
    fn horizon(&self) -> u64;
    fn next_round(&mut self, prev_chosen: Option<ArmId>)
        -> Result<(ActiveRound, LossAssignment)>;
}

/// Replays a script; ignores the learner's choices.
#[derive(Debug, Clone)]
pub struct ScriptPlayer {
    script: Arc<EnvironmentScript>,
    pos: usize,
}

impl ScriptPlayer {
    pub fn new(script: Arc<EnvironmentScript>) -> Self {
        Self { script, pos: 0 }
    }
}

impl Environment for ScriptPlayer {
    fn num_arms(&self) -> usize {
        self.script.num_arms()
    }

    fn horizon(&self) -> u64 {
        self.script.horizon()
    }

    fn next_round(
        &mut self,
        _prev_chosen: Option<ArmId>,
    ) -> Result<(ActiveRound, LossAssignment)> {
        let item = self
            .script
            .rounds()
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::ProtocolViolation("script exhausted".into()))?;
        self.pos += 1;
        Ok(item)
    }
}

/// Adaptive adversary defined by a closure of `(t, previous choice)`.
pub struct AdaptiveEnv<F> {
    num_arms: usize,
    horizon: u64,
    t: u64,
    generator: F,
}

impl<F> AdaptiveEnv<F>
where
    F: FnMut(u64, Option<ArmId>) -> Result<(ActiveRound, LossAssignment)>,
{
    pub fn new(num_arms: usize, horizon: u64, generator: F) -> Self {
        Self {
            num_arms,
            horizon,
            t: 0,
            generator,
        }
    }
}

impl<F> Environment for AdaptiveEnv<F>
where
    F: FnMut(u64, Option<ArmId>) -> Result<(ActiveRound, LossAssignment)>,
{
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn horizon(&self) -> u64 {
        self.horizon
    }

    fn next_round(&mut self, prev_chosen: Option<ArmId>)
        -> Result<(ActiveRound, LossAssignment)> {
        self.t += 1;
        (self.generator)(self.t, prev_chosen)
    }
}

/// Uniform random A-subsets of K arms with independent Bernoulli losses.
pub fn stochastic_env(
    num_arms: usize,
    active_per_round: usize,
    horizon: u64,
    loss_means: &[f64],
    seed: u64,
) -> Result<EnvironmentScript> {
    if active_per_round < 1 || active_per_round > num_arms {
        return Err(Error::InvalidParameters(format!(
            "need 1 <= A <= K, got A={active_per_round}, K={num_arms}"
        )));
    }
    if loss_means.len() != num_arms {
        return Err(Error::InvalidParameters(format!(
            "{} loss means for {num_arms} arms",
            loss_means.len()
        )));
    }
    if loss_means.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::InvalidParameters("loss means outside [0,1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::with_capacity(horizon as usize);
    let mut arms: Vec<usize> = (0..num_arms).collect();
    for _ in 0..horizon {
        // Partial Fisher-Yates for a uniform A-subset.
        for i in 0..active_per_round {
            let j = rng.gen_range(i..num_arms);
            arms.swap(i, j);
        }
        let mut active: Vec<usize> = arms[..active_per_round].to_vec();
        active.sort_unstable();
        let round = ActiveRound::binary(num_arms, &active)?;
        let values: Vec<f64> = active
            .iter()
            .map(|&a| if rng.gen::<f64>() < loss_means[a] { 1.0 } else { 0.0 })
            .collect();
        let losses = LossAssignment::for_round(&round, &values)?;
        rounds.push((round, losses));
    }
    EnvironmentScript::new(num_arms, EnvMode::Binary, rounds)
}

/// Which variant of the lower-bound construction to materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundVariant {
    /// All interval arms cost 1 when active; arm 0 always costs 0.5.
    Neutral,
    /// Same activity, but the given interval arm's losses are all 0.
    ZeroLoss(ArmId),
}

/// The hard construction behind the per-action strongly adaptive lower
/// bound: arm 0 is always active with loss 0.5; arms `1..K` (with
/// `K = 1 + 4f`) are active on consecutive disjoint intervals of length
/// `L = T/(4f)` covering the horizon, with loss 1 (or 0 for the
/// distinguished arm of [`LowerBoundVariant::ZeroLoss`]). Every round has
/// exactly two active arms.
pub fn lower_bound_env(
    horizon: u64,
    f: u64,
    variant: LowerBoundVariant,
) -> Result<EnvironmentScript> {
    if f < 1 {
        return Err(Error::InvalidParameters("need f >= 1".into()));
    }
    if horizon == 0 || !horizon.is_multiple_of(4 * f) {
        return Err(Error::InvalidParameters(format!(
            "4f = {} must divide T = {horizon}",
            4 * f
        )));
    }
    let num_arms = (1 + 4 * f) as usize;
    let interval_len = horizon / (4 * f);
    if let LowerBoundVariant::ZeroLoss(arm) = variant {
        if arm.index() == 0 || arm.index() >= num_arms {
            return Err(Error::InvalidParameters(format!(
                "distinguished arm {arm} must be an interval arm in [1, {num_arms})"
            )));
        }
    }
    let mut rounds = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let interval_arm = 1 + ((t - 1) / interval_len) as usize;
        let round = ActiveRound::binary(num_arms, &[0, interval_arm])?;
        let interval_loss = match variant {
            LowerBoundVariant::ZeroLoss(arm) if arm.index() == interval_arm => 0.0,
            _ => 1.0,
        };
        let losses = LossAssignment::new([
            (ArmId(0), 0.5),
            (ArmId(interval_arm), interval_loss),
        ])?;
        rounds.push((round, losses));
    }
    EnvironmentScript::new(num_arms, EnvMode::Binary, rounds)
}

/// Default `f` for the lower-bound experiment: `⌊√(2·T·ln2)⌋` rounded down
/// to a divisor of `T/4`.
pub fn default_lower_bound_f(horizon: u64) -> Result<u64> {
    if horizon == 0 || !horizon.is_multiple_of(4) {
        return Err(Error::InvalidParameters(format!(
            "horizon {horizon} must be a positive multiple of 4"
        )));
    }
    let quarter = horizon / 4;
    let mut f = ((2.0 * horizon as f64 * std::f64::consts::LN_2).sqrt() as u64).min(quarter);
    while f > 1 && !quarter.is_multiple_of(f) {
        f -= 1;
    }
    Ok(f.max(1))
}

/// Piecewise-stationary losses over always-active arms: within each segment
/// the designated arm has Bernoulli mean `0.5 − gap`, all others `0.5 + gap`.
pub fn switching_env(
    num_arms: usize,
    horizon: u64,
    segments: &[(u64, ArmId)],
    gap: f64,
    seed: u64,
) -> Result<EnvironmentScript> {
    if num_arms < 2 {
        return Err(Error::InvalidParameters("need K >= 2".into()));
    }
    if gap.is_nan() || gap <= 0.0 || gap > 0.5 {
        return Err(Error::InvalidParameters(format!(
            "gap {gap} outside (0, 0.5]"
        )));
    }
    let total: u64 = segments.iter().map(|(len, _)| len).sum();
    if segments.is_empty() || total != horizon {
        return Err(Error::InvalidParameters(format!(
            "segments cover {total} of {horizon} rounds"
        )));
    }
    if segments.iter().any(|(len, arm)| *len == 0 || arm.index() >= num_arms) {
        return Err(Error::InvalidParameters(
            "each segment needs positive length and a valid arm".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::with_capacity(horizon as usize);
    for &(len, best) in segments {
        for _ in 0..len {
            let round = ActiveRound::fully_active(num_arms);
            let values: Vec<f64> = (0..num_arms)
                .map(|i| {
                    let mean = if i == best.index() { 0.5 - gap } else { 0.5 + gap };
                    if rng.gen::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let losses = LossAssignment::for_round(&round, &values)?;
            rounds.push((round, losses));
        }
    }
    EnvironmentScript::new(num_arms, EnvMode::Binary, rounds)
}

/// The comparator sequence `j_{1:T}` induced by segment specs.
pub fn comparator_sequence(segments: &[(u64, ArmId)]) -> Vec<ArmId> {
    let mut seq = Vec::new();
    for &(len, arm) in segments {
        seq.extend(std::iter::repeat_n(arm, len as usize));
    }
    seq
}

/// How per-round confidences are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfidenceLaw {
    /// Every arm reports the same fixed confidence.
    Constant(f64),
    /// I.i.d. Uniform[0,1), with one arm clipped below at `floor` so every
    /// round has an active arm.
    UniformWithFloor { floor: f64, floor_arm: ArmId },
    /// Binary confidences: each arm is active independently with
    /// probability `p`. Rounds that come out all-zero are rejected.
    Bernoulli { p: f64 },
}

/// Rounds carry real-valued confidences; arms with positive confidence get
/// Bernoulli losses.
pub fn confidence_env(
    num_arms: usize,
    horizon: u64,
    law: ConfidenceLaw,
    loss_means: &[f64],
    seed: u64,
) -> Result<EnvironmentScript> {
    if loss_means.len() != num_arms {
        return Err(Error::InvalidParameters(format!(
            "{} loss means for {num_arms} arms",
            loss_means.len()
        )));
    }
    match law {
        ConfidenceLaw::Constant(c) if c.is_nan() || c <= 0.0 || c > 1.0 => {
            return Err(Error::InvalidParameters(format!(
                "constant confidence {c} outside (0,1]"
            )))
        }
        ConfidenceLaw::UniformWithFloor { floor, floor_arm } => {
            if floor.is_nan() || floor <= 0.0 || floor > 1.0 || floor_arm.index() >= num_arms {
                return Err(Error::InvalidParameters(
                    "uniform law needs floor in (0,1] and a valid floor arm".into(),
                ));
            }
        }
        ConfidenceLaw::Bernoulli { p } if p.is_nan() || p <= 0.0 || p > 1.0 => {
            return Err(Error::InvalidParameters(format!(
                "activation probability {p} outside (0,1]"
            )))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let confidences: Vec<f64> = (0..num_arms)
            .map(|i| match law {
                ConfidenceLaw::Constant(c) => c,
                ConfidenceLaw::UniformWithFloor { floor, floor_arm } => {
                    let u: f64 = rng.gen();
                    if i == floor_arm.index() {
                        u.max(floor)
                    } else {
                        u
                    }
                }
                ConfidenceLaw::Bernoulli { p } => {
                    if rng.gen::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        if confidences.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidParameters(format!(
                "confidence law produced an all-zero round at t={t}"
            )));
        }
        let round = ActiveRound::from_confidences(confidences)?;
        let values: Vec<f64> = round
            .active_set()
            .iter()
            .map(|&a| if rng.gen::<f64>() < loss_means[a.index()] { 1.0 } else { 0.0 })
            .collect();
        let losses = LossAssignment::for_round(&round, &values)?;
        rounds.push((round, losses));
    }
    EnvironmentScript::new(
        num_arms,
        if matches!(law, ConfidenceLaw::Bernoulli { .. }) {
            EnvMode::Binary
        } else {
            EnvMode::Confidence
        },
        rounds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_activity_when_a_equals_k() {
        let script = stochastic_env(5, 5, 50, &[0.5; 5], 1).unwrap();
        for (round, _) in script.rounds() {
            assert_eq!(round.active_count(), 5);
        }
    }

    #[test]
    fn zero_means_give_zero_losses() {
        let script = stochastic_env(4, 2, 100, &[0.0; 4], 2).unwrap();
        for (round, losses) in script.rounds() {
            for &a in round.active_set() {
                assert_eq!(losses.get(a), Some(0.0));
            }
        }
    }

    #[test]
    fn activation_frequency_near_a_over_k() {
        let (k, a, t) = (10usize, 3usize, 10_000u64);
        let script = stochastic_env(k, a, t, &[0.5; 10], 3).unwrap();
        let expected = a as f64 / k as f64;
        let se = (expected * (1.0 - expected) / t as f64).sqrt();
        for arm in 0..k {
            let count = script
                .rounds()
                .iter()
                .filter(|(r, _)| r.is_active(ArmId(arm)))
                .count();
            let freq = count as f64 / t as f64;
            assert!(
                (freq - expected).abs() <= 4.0 * se,
                "arm {arm}: freq {freq} vs {expected}"
            );
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(stochastic_env(4, 5, 10, &[0.5; 4], 0).is_err());
        assert!(stochastic_env(4, 2, 10, &[0.5; 3], 0).is_err());
        assert!(stochastic_env(4, 2, 10, &[1.5, 0.5, 0.5, 0.5], 0).is_err());
    }

    #[test]
    fn lower_bound_construction_shape() {
        // T=1024, f=64: K=257, L=4, arm 17 active on 1-based rounds 65..=68.
        let script = lower_bound_env(1024, 64, LowerBoundVariant::Neutral).unwrap();
        assert_eq!(script.num_arms(), 257);
        for (t, (round, losses)) in script.rounds().iter().enumerate() {
            let t1 = t as u64 + 1;
            assert_eq!(round.active_count(), 2);
            assert!(round.is_active(ArmId(0)));
            assert_eq!(losses.get(ArmId(0)), Some(0.5));
            let arm17 = round.is_active(ArmId(17));
            assert_eq!(arm17, (65..=68).contains(&t1), "round {t1}");
        }
    }

    #[test]
    fn lower_bound_intervals_partition_horizon() {
        let script = lower_bound_env(1024, 64, LowerBoundVariant::Neutral).unwrap();
        let mut seen = vec![0u64; script.num_arms()];
        for (round, _) in script.rounds() {
            for &a in round.active_set() {
                seen[a.index()] += 1;
            }
        }
        assert_eq!(seen[0], 1024);
        for (arm, &rounds) in seen.iter().enumerate().skip(1) {
            assert_eq!(rounds, 4, "arm {arm} active rounds");
        }
    }

    #[test]
    fn variant_differs_only_on_distinguished_arm() {
        let base = lower_bound_env(64, 4, LowerBoundVariant::Neutral).unwrap();
        let varied = lower_bound_env(64, 4, LowerBoundVariant::ZeroLoss(ArmId(3))).unwrap();
        for ((r0, l0), (r1, l1)) in base.rounds().iter().zip(varied.rounds()) {
            assert_eq!(r0, r1);
            for &a in r0.active_set() {
                if a == ArmId(3) {
                    assert_eq!(l1.get(a), Some(0.0));
                } else {
                    assert_eq!(l0.get(a), l1.get(a));
                }
            }
        }
    }

    #[test]
    fn lower_bound_divisibility_enforced() {
        assert!(lower_bound_env(1000, 64, LowerBoundVariant::Neutral).is_err());
        assert!(lower_bound_env(1024, 64, LowerBoundVariant::ZeroLoss(ArmId(0))).is_err());
    }

    #[test]
    fn default_f_divides() {
        let f = default_lower_bound_f(1024).unwrap();
        assert!(f >= 1 && (1024 / 4) % f == 0);
    }

    #[test]
    fn single_segment_is_plain_stochastic() {
        let script = switching_env(3, 50, &[(50, ArmId(1))], 0.4, 7).unwrap();
        assert_eq!(script.horizon(), 50);
        for (round, _) in script.rounds() {
            assert_eq!(round.active_count(), 3);
        }
    }

    #[test]
    fn comparator_has_declared_switch_points() {
        let segments = [(10, ArmId(0)), (5, ArmId(2)), (15, ArmId(1))];
        let seq = comparator_sequence(&segments);
        assert_eq!(seq.len(), 30);
        let switches = seq.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(switches, 2);
    }

    #[test]
    fn maximal_gap_is_deterministic() {
        let script = switching_env(3, 40, &[(40, ArmId(0))], 0.5, 11).unwrap();
        for (_, losses) in script.rounds() {
            assert_eq!(losses.get(ArmId(0)), Some(0.0));
            assert_eq!(losses.get(ArmId(1)), Some(1.0));
            assert_eq!(losses.get(ArmId(2)), Some(1.0));
        }
    }

    #[test]
    fn segments_must_partition() {
        assert!(switching_env(3, 100, &[(50, ArmId(0))], 0.4, 0).is_err());
    }

    #[test]
    fn constant_law_reduces_to_fully_active() {
        let script = confidence_env(4, 30, ConfidenceLaw::Constant(1.0), &[0.5; 4], 5).unwrap();
        for (round, _) in script.rounds() {
            assert!(round.is_binary());
            assert_eq!(round.active_count(), 4);
        }
    }

    #[test]
    fn uniform_law_total_confidence() {
        // ΣΣI ≈ T·K/2 within 4σ (Var of a U[0,1] sum: T·K/12).
        let (k, t) = (6usize, 5000u64);
        let law = ConfidenceLaw::UniformWithFloor {
            floor: 0.05,
            floor_arm: ArmId(0),
        };
        let script = confidence_env(k, t, law, &[0.5; 6], 9).unwrap();
        let total = script.horizon_info().total_activations;
        let expected = t as f64 * k as f64 / 2.0;
        let sd = (t as f64 * k as f64 / 12.0).sqrt();
        assert!(
            (total - expected).abs() <= 4.0 * sd + 0.01 * expected,
            "ΣΣI = {total}, expected ≈ {expected}"
        );
    }

    #[test]
    fn bernoulli_law_is_binary_mode() {
        let script = confidence_env(
            5,
            100,
            ConfidenceLaw::Bernoulli { p: 0.9 },
            &[0.3; 5],
            13,
        )
        .unwrap();
        assert_eq!(script.mode(), EnvMode::Binary);
        for (round, _) in script.rounds() {
            assert!(round.is_binary());
        }
    }

    #[test]
    fn scripts_replay_byte_for_byte() {
        let a = stochastic_env(6, 2, 200, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 99).unwrap();
        let b = stochastic_env(6, 2, 200, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 99).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = stochastic_env(6, 2, 200, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 100).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn json_roundtrip_binary_and_confidence() {
        let binary = stochastic_env(4, 2, 20, &[0.2; 4], 1).unwrap();
        let parsed = EnvironmentScript::from_json(&binary.to_json()).unwrap();
        assert_eq!(binary, parsed);

        let law = ConfidenceLaw::UniformWithFloor {
            floor: 0.1,
            floor_arm: ArmId(2),
        };
        let conf = confidence_env(3, 20, law, &[0.5; 3], 2).unwrap();
        let parsed = EnvironmentScript::from_json(&conf.to_json()).unwrap();
        assert_eq!(conf, parsed);
    }

    #[test]
    fn generated_scripts_validate() {
        stochastic_env(8, 3, 100, &[0.5; 8], 4)
            .unwrap()
            .validate()
            .unwrap();
        lower_bound_env(64, 4, LowerBoundVariant::Neutral)
            .unwrap()
            .validate()
            .unwrap();
    }
}
