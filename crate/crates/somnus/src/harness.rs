//! Episode runner, replicate orchestration, regret aggregation, per-round
//! inequality monitors, and closed-form bound evaluation.
//!
//! Determinism contract: replicate `r` draws its environment and sampling
//! streams from seeds derived from `(base_seed, r)`, and aggregation is a
//! function of the replicate summaries in replicate order, so serial and
//! parallel runs produce byte-identical reports.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algos::{
    tune, DoublingSbExp3, Ftarl, HorizonInfo, Regularizer, SbExp3, TuneMode, TunedParams,
};
use crate::core::{
    sample, ActiveRound, ArmId, Distribution, Learner, MonitorViolation, RegretLedger,
};
use crate::envs::{
    comparator_sequence, confidence_env, default_lower_bound_f, lower_bound_env, stochastic_env,
    switching_env, ConfidenceLaw, EnvMode, Environment, EnvironmentScript, LowerBoundVariant,
    ScriptPlayer,
};
use crate::estimators::{inactive_fill, ix_estimate};
use crate::experts::{BasisSeExp4, Restarted, VirtualSeExp4};
use crate::{Error, Result};

/// Schema version of the report JSON.
pub const REPORT_SCHEMA: u32 = 1;

// ---------------------------------------------------------------------------
// Episode running
// ---------------------------------------------------------------------------

/// One recorded round of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub active: Vec<ArmId>,
    /// Present only for non-binary rounds.
    pub confidences: Option<Vec<f64>>,
    /// FNV-1a hash of the distribution's bit pattern.
    pub dist_digest: u64,
    pub chosen: ArmId,
    pub observed_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSnapshot {
    pub t: u64,
    pub regret_by_arm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub records: Vec<RoundRecord>,
    pub ledger: RegretLedger,
    pub checkpoints: Vec<CheckpointSnapshot>,
    pub violations: Vec<MonitorViolation>,
}

/// Per-round checks the episode runner itself performs.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeMonitors {
    /// Check `Σ_A p·ℓ̃ = ℓ̂ − γ·Σ I·ℓ̃` each round with this γ.
    pub ix_identity_gamma: Option<f64>,
}

/// Checkpoint times: powers of two up to T, plus T itself.
pub fn checkpoint_times(horizon: u64) -> Vec<u64> {
    let mut v = Vec::new();
    let mut c = 1u64;
    while c <= horizon {
        v.push(c);
        match c.checked_mul(2) {
            Some(next) => c = next,
            None => break,
        }
    }
    if horizon > 0 && v.last() != Some(&horizon) {
        v.push(horizon);
    }
    v
}

/// Run one episode of the reveal → distribution → sample → observe → update
/// protocol. The sampling stream is derived from `seed`; errors carry the
/// offending round index.
pub fn run_episode(
    learner: &mut dyn Learner,
    env: &mut dyn Environment,
    seed: u64,
    monitors: &EpisodeMonitors,
) -> Result<EpisodeTrace> {
    let horizon = env.horizon();
    let num_arms = env.num_arms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checkpoints = checkpoint_times(horizon);
    let mut next_checkpoint = 0usize;

    let mut trace = EpisodeTrace::default();
    let mut ix_violations = Vec::new();
    let mut prev_chosen = None;

    for t in 1..=horizon {
        let fail = |e: Error| e.at_round(t);
        let (round, losses) = env.next_round(prev_chosen).map_err(fail)?;
        if !losses.matches_round(&round) {
            return Err(fail(Error::ProtocolViolation(
                "loss domain differs from active set".into(),
            )));
        }
        let dist = learner.distribution(&round).map_err(fail)?;
        if !dist.supported_on(&round) {
            return Err(fail(Error::ProtocolViolation(
                "distribution puts mass on an inactive arm".into(),
            )));
        }
        let chosen = sample(&dist, &mut rng).map_err(fail)?;
        let observed = losses.get(chosen).ok_or_else(|| {
            fail(Error::ProtocolViolation(format!(
                "no loss assigned to chosen arm {chosen}"
            )))
        })?;

        if let Some(gamma) = monitors.ix_identity_gamma {
            let est = ix_estimate(&round, &dist, chosen, observed, gamma).map_err(fail)?;
            let lhs: f64 = round
                .active_set()
                .iter()
                .map(|&a| dist.prob(a) * est.value(a))
                .sum();
            let rhs = observed - gamma * est.confidence_weighted_sum(&round);
            if (lhs - rhs).abs() > 1e-12 * (1.0 + rhs.abs()) {
                ix_violations.push(MonitorViolation {
                    round: t,
                    monitor: "ix-identity".into(),
                    lhs,
                    rhs,
                });
            }
        }

        learner
            .update(&round, &dist, chosen, observed)
            .map_err(fail)?;
        trace
            .ledger
            .update(&round, &losses, chosen, observed)
            .map_err(fail)?;

        trace.records.push(RoundRecord {
            t,
            active: round.active_set().to_vec(),
            confidences: if round.is_binary() {
                None
            } else {
                Some(round.confidences().to_vec())
            },
            dist_digest: dist_digest(dist.probs()),
            chosen,
            observed_loss: observed,
        });
        if next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == t {
            trace.checkpoints.push(CheckpointSnapshot {
                t,
                regret_by_arm: trace.ledger.regrets_dense(num_arms),
            });
            next_checkpoint += 1;
        }
        prev_chosen = Some(chosen);
    }

    trace.violations = learner.drain_violations();
    trace.violations.extend(ix_violations);
    trace.violations.sort_by_key(|v| v.round);
    Ok(trace)
}

fn dist_digest(probs: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &p in probs {
        for b in p.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

const MONITOR_REL_TOL: f64 = 1e-9;

/// Potential-growth monitor for SB-EXP3 on binary scripted environments:
/// checks `Q̃_{t+1}/Q̃_t ≤ Σ_{i∈A_t} p_i·exp(η(ℓ̂ − ℓ̃_i − γ·Σ_A ℓ̃))` each
/// round, with the potential summed over the script's 𝔾_T (unseen arms
/// carry weight 1).
pub struct MonitoredSbExp3 {
    inner: SbExp3,
    ever_active: Vec<ArmId>,
    violations: Vec<MonitorViolation>,
    t: u64,
    fault_round: Option<u64>,
}

impl MonitoredSbExp3 {
    pub fn new(inner: SbExp3, ever_active: Vec<ArmId>) -> Self {
        Self {
            inner,
            ever_active,
            violations: Vec::new(),
            t: 0,
            fault_round: None,
        }
    }

    /// Test hook: corrupt the state inside the update of the given round.
    pub fn with_fault_at(mut self, round: Option<u64>) -> Self {
        self.fault_round = round;
        self
    }

    pub fn inner(&self) -> &SbExp3 {
        &self.inner
    }

    fn log_potential(&self) -> f64 {
        let max_exp = self
            .ever_active
            .iter()
            .map(|&a| self.inner.weight_exponent(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .ever_active
            .iter()
            .map(|&a| (self.inner.weight_exponent(a) - max_exp).exp())
            .sum();
        max_exp + sum.ln()
    }
}

impl Learner for MonitoredSbExp3 {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        self.inner.sampling_distribution(round)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        if !round.is_binary() {
            return Err(Error::ProtocolViolation(
                "potential-growth monitor needs binary activity".into(),
            ));
        }
        self.t += 1;
        let eta = self.inner.eta();
        let gamma = self.inner.gamma();
        let est = ix_estimate(round, dist, chosen, loss, gamma)?;
        let active_sum = est.active_sum(round);
        let rhs: f64 = round
            .active_set()
            .iter()
            .map(|&a| {
                dist.prob(a) * (eta * (loss - est.value(a) - gamma * active_sum)).exp()
            })
            .sum();

        let pre = self.log_potential();
        self.inner.absorb(round, dist, chosen, loss)?;
        if self.fault_round == Some(self.t) {
            self.inner.nudge_accumulator(chosen, 30.0 / eta);
        }
        let post = self.log_potential();
        let lhs = (post - pre).exp();
        if lhs > rhs * (1.0 + MONITOR_REL_TOL) + 1e-12 {
            self.violations.push(MonitorViolation {
                round: self.t,
                monitor: "potential-growth".into(),
                lhs,
                rhs,
            });
        }
        Ok(())
    }

    fn drain_violations(&mut self) -> Vec<MonitorViolation> {
        std::mem::take(&mut self.violations)
    }
}

/// Local-norm monitor for FTARL: checks
/// `Σ_i ℓ̃²_i·q_i^{2−β} ≤ Σ_{i∈A_t} ℓ̃²_i·p_i^{2−β}` each round.
pub struct MonitoredFtarl {
    inner: Ftarl,
    violations: Vec<MonitorViolation>,
    t: u64,
}

impl MonitoredFtarl {
    pub fn new(inner: Ftarl) -> Self {
        Self {
            inner,
            violations: Vec::new(),
            t: 0,
        }
    }

    pub fn inner(&self) -> &Ftarl {
        &self.inner
    }
}

impl Learner for MonitoredFtarl {
    fn distribution(&mut self, round: &ActiveRound) -> Result<Distribution> {
        self.inner.sampling_distribution(round)
    }

    fn update(
        &mut self,
        round: &ActiveRound,
        dist: &Distribution,
        chosen: ArmId,
        loss: f64,
    ) -> Result<()> {
        self.t += 1;
        let gamma = self.inner.gamma();
        let exponent = match self.inner.regularizer() {
            Regularizer::Tsallis { beta } => 2.0 - beta,
            Regularizer::Shannon => 1.0,
        };
        let q = self.inner.weights()?;
        let est = ix_estimate(round, dist, chosen, loss, gamma)?;
        let fill = inactive_fill(loss, &est, round, gamma);
        let mut lhs = 0.0;
        for (i, &qi) in q.iter().enumerate() {
            let arm = ArmId(i);
            let l = if round.is_active(arm) {
                est.value(arm)
            } else {
                fill
            };
            lhs += l * l * qi.powf(exponent);
        }
        let rhs: f64 = round
            .active_set()
            .iter()
            .map(|&a| {
                let l = est.value(a);
                l * l * dist.prob(a).powf(exponent)
            })
            .sum();
        if lhs > rhs * (1.0 + MONITOR_REL_TOL) + 1e-15 {
            self.violations.push(MonitorViolation {
                round: self.t,
                monitor: "local-norm".into(),
                lhs,
                rhs,
            });
        }
        self.inner.absorb(round, dist, chosen, loss)
    }

    fn drain_violations(&mut self) -> Vec<MonitorViolation> {
        std::mem::take(&mut self.violations)
    }
}

// ---------------------------------------------------------------------------
// Closed-form bounds
// ---------------------------------------------------------------------------

/// Which regret bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// SB-EXP3 pseudo-regret: `ln(G)/η + (η/2)·ΣA`.
    #[serde(rename = "3.1")]
    SbExp3Expectation,
    /// SB-EXP3 high probability: `ln(G)/η + ln(2G/δ)/γ + (η/2+γ)·ΣA`.
    #[serde(rename = "3.2")]
    SbExp3HighProb,
    /// FTARL pseudo-regret: `K^{1−β}/(η(1−β)) + (η/2β)·T·A^β`.
    #[serde(rename = "3.4")]
    FtarlExpectation,
    /// FTARL high-probability expression.
    #[serde(rename = "3.5")]
    FtarlHighProb,
    /// Confidence regret: `3·ln(G/δ)/γ + 3γ·ΣΣI`.
    #[serde(rename = "3.7")]
    ConfidenceHighProb,
    /// Anytime doubling pseudo-regret: `4/(√2−1)²·√(ln(G)·ΣA)`.
    #[serde(rename = "3.8")]
    AnytimeExpectation,
    /// SE-EXP4 high-probability expression.
    #[serde(rename = "4.1")]
    SeExp4HighProb,
    /// Adaptive regret of SE-EXP4 with virtual experts.
    #[serde(rename = "4.2")]
    AdaptiveHighProb,
    /// Tracking regret of restarted SE-EXP4 with known switch count.
    #[serde(rename = "4.3")]
    TrackingHighProb,
}

impl Theorem {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(text.to_string()))
            .map_err(|_| Error::InvalidParameters(format!("unknown theorem id `{text}`")))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Theorem::SbExp3Expectation => "3.1",
            Theorem::SbExp3HighProb => "3.2",
            Theorem::FtarlExpectation => "3.4",
            Theorem::FtarlHighProb => "3.5",
            Theorem::ConfidenceHighProb => "3.7",
            Theorem::AnytimeExpectation => "3.8",
            Theorem::SeExp4HighProb => "4.1",
            Theorem::AdaptiveHighProb => "4.2",
            Theorem::TrackingHighProb => "4.3",
        }
    }
}

/// Inputs for [`theoretical_bound`]; each theorem reads the fields it needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundParams {
    /// G_T.
    pub arms_ever_active: Option<f64>,
    /// Σ_t A_t (binary) or Σ_t Σ_i I (confidence).
    pub sum_activations: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub horizon: Option<f64>,
    /// A.
    pub max_active: Option<f64>,
    /// K.
    pub num_arms: Option<f64>,
    /// M.
    pub num_experts: Option<f64>,
    /// S.
    pub switches: Option<f64>,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingParameter(name))
}

/// Evaluate the stated closed-form bound exactly.
pub fn theoretical_bound(theorem: Theorem, p: &BoundParams) -> Result<f64> {
    match theorem {
        Theorem::SbExp3Expectation => {
            let g = need(p.arms_ever_active, "gt")?;
            let eta = need(p.eta, "eta")?;
            let sa = need(p.sum_activations, "sum-a")?;
            Ok(g.ln() / eta + eta / 2.0 * sa)
        }
        Theorem::SbExp3HighProb => {
            let g = need(p.arms_ever_active, "gt")?;
            let eta = need(p.eta, "eta")?;
            let gamma = need(p.gamma, "gamma")?;
            let delta = need(p.delta, "delta")?;
            let sa = need(p.sum_activations, "sum-a")?;
            Ok(g.ln() / eta + (2.0 * g / delta).ln() / gamma + (eta / 2.0 + gamma) * sa)
        }
        Theorem::FtarlExpectation => {
            let k = need(p.num_arms, "k")?;
            let beta = need(p.beta, "beta")?;
            let eta = need(p.eta, "eta")?;
            let t = need(p.horizon, "t")?;
            let a = need(p.max_active, "a")?;
            Ok(k.powf(1.0 - beta) / (eta * (1.0 - beta)) + eta / (2.0 * beta) * t * a.powf(beta))
        }
        Theorem::FtarlHighProb => {
            let k = need(p.num_arms, "k")?;
            let beta = need(p.beta, "beta")?;
            let eta = need(p.eta, "eta")?;
            let gamma = need(p.gamma, "gamma")?;
            let t = need(p.horizon, "t")?;
            let a = need(p.max_active, "a")?;
            let delta = need(p.delta, "delta")?;
            Ok(k.powf(1.0 - beta) / (eta * (1.0 - beta))
                + eta * a.powf(beta) * t / beta
                + gamma * a * t
                + ((eta + beta) / (2.0 * beta * gamma) + 0.5) * (3.0 / delta).ln())
        }
        Theorem::ConfidenceHighProb => {
            let g = need(p.arms_ever_active, "gt")?;
            let gamma = need(p.gamma, "gamma")?;
            let delta = need(p.delta, "delta")?;
            let sa = need(p.sum_activations, "sum-a")?;
            Ok(3.0 * (g / delta).ln() / gamma + 3.0 * gamma * sa)
        }
        Theorem::AnytimeExpectation => {
            let g = need(p.arms_ever_active, "gt")?;
            let sa = need(p.sum_activations, "sum-a")?;
            let c = 4.0 / (std::f64::consts::SQRT_2 - 1.0).powi(2);
            Ok(c * (g.ln() * sa).sqrt())
        }
        Theorem::SeExp4HighProb => {
            let m = need(p.num_experts, "m")?;
            let eta = need(p.eta, "eta")?;
            let gamma = need(p.gamma, "gamma")?;
            let delta = need(p.delta, "delta")?;
            let t = need(p.horizon, "t")?;
            let k = need(p.num_arms, "k")?;
            Ok(m.ln() / eta
                + (2.0 * m / delta).ln() / (2.0 * gamma)
                + (gamma + eta / 2.0) * t * k
                + (2.0 / delta).ln())
        }
        Theorem::AdaptiveHighProb => {
            let k = need(p.num_arms, "k")?;
            let t = need(p.horizon, "t")?;
            let eta = need(p.eta, "eta")?;
            let gamma = need(p.gamma, "gamma")?;
            let delta = need(p.delta, "delta")?;
            Ok(2.0 * (k * t).ln() / eta
                + (k * t / delta).ln() / gamma
                + (gamma + eta / 2.0) * t * k
                + (2.0 / delta).ln())
        }
        Theorem::TrackingHighProb => {
            let k = need(p.num_arms, "k")?;
            let t = need(p.horizon, "t")?;
            let s = need(p.switches, "s")?;
            let delta = need(p.delta, "delta")?;
            let log_term = (k * t / (s * delta)).ln();
            let eta = match p.eta {
                Some(e) => e,
                None => (2.0 * s * log_term / (t * k)).sqrt(),
            };
            Ok(4.0 * s / eta * log_term + 2.0 * eta * t * k + 2.0 * s * (2.0 * s / delta).ln())
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgoName {
    #[serde(rename = "sb-exp3")]
    SbExp3,
    #[serde(rename = "sb-exp3-confidence")]
    SbExp3Confidence,
    #[serde(rename = "ftarl")]
    Ftarl,
    #[serde(rename = "ftarl-shannon")]
    FtarlShannon,
    #[serde(rename = "sb-exp3-anytime")]
    SbExp3Anytime,
    #[serde(rename = "se-exp4")]
    SeExp4,
    #[serde(rename = "se-exp4-virtual")]
    SeExp4Virtual,
    #[serde(rename = "se-exp4-restart")]
    SeExp4Restart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneModeName {
    Expectation,
    HighProbability,
    Ftarl,
    Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AlgoConfig {
    pub name: AlgoName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_mode: Option<TuneModeName>,
    /// Episode count S for `se-exp4-restart`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switches: Option<u64>,
}

/// Loss means given explicitly or as a linear spread over the arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeansSpec {
    Values(Vec<f64>),
    Linspace { linspace: [f64; 2] },
}

impl MeansSpec {
    pub fn materialize(&self, num_arms: usize) -> Result<Vec<f64>> {
        match self {
            MeansSpec::Values(v) => {
                if v.len() != num_arms {
                    return Err(Error::InvalidParameters(format!(
                        "{} means for {num_arms} arms",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
            MeansSpec::Linspace { linspace: [lo, hi] } => {
                if num_arms == 1 {
                    return Ok(vec![*lo]);
                }
                Ok((0..num_arms)
                    .map(|i| lo + (hi - lo) * i as f64 / (num_arms - 1) as f64)
                    .collect())
            }
        }
    }
}

/// One segment of a switching environment; `arm` is 1-based here, matching
/// all external I/O.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SegmentConfig {
    pub rounds: u64,
    pub arm: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LawConfig {
    Constant { value: f64 },
    /// I.i.d. Uniform with one arm (1-based) floored.
    Uniform { floor: f64, floor_arm: usize },
    Bernoulli { p: f64 },
}

impl LawConfig {
    fn to_law(&self) -> Result<ConfidenceLaw> {
        Ok(match self {
            LawConfig::Constant { value } => ConfidenceLaw::Constant(*value),
            LawConfig::Uniform { floor, floor_arm } => ConfidenceLaw::UniformWithFloor {
                floor: *floor,
                floor_arm: ArmId(floor_arm.checked_sub(1).ok_or_else(|| {
                    Error::InvalidParameters("floorArm is 1-based".into())
                })?),
            },
            LawConfig::Bernoulli { p } => ConfidenceLaw::Bernoulli { p: *p },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvConfig {
    Stochastic {
        k: usize,
        a: usize,
        means: MeansSpec,
    },
    LowerBound {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<u64>,
        /// 1-based index of the arm whose losses are zeroed (the V_k
        /// variant); absent means the neutral V_0.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zero_loss_arm: Option<usize>,
    },
    Switching {
        k: usize,
        segments: Vec<SegmentConfig>,
        gap: f64,
    },
    Confidence {
        k: usize,
        law: LawConfig,
        means: MeansSpec,
    },
    Script {
        path: String,
    },
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Stochastic { .. } => "stochastic",
            EnvConfig::LowerBound { .. } => "lower-bound",
            EnvConfig::Switching { .. } => "switching",
            EnvConfig::Confidence { .. } => "confidence",
            EnvConfig::Script { .. } => "script",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default)]
    pub potential_growth: bool,
    #[serde(default)]
    pub local_norm: bool,
    #[serde(default)]
    pub ix_identity: bool,
    /// Test hook: corrupt the learner state at this round so the
    /// potential-growth monitor fires.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_round: Option<u64>,
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: AlgoConfig,
    pub env: EnvConfig,
    pub horizon: u64,
    pub replicates: u32,
    pub base_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Theorem>,
    #[serde(default)]
    pub collect_traces: bool,
}

/// Parameters actually used by a run (explicit or tuned).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResolvedParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switches: Option<u64>,
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub theorem: Theorem,
    pub value: f64,
    /// mean max-regret divided by the bound.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackingReport {
    pub mean: f64,
    pub stderr: f64,
    pub per_replicate: Vec<f64>,
    /// Tracking bound at the run's (S, η, δ), when S is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RegretReport {
    pub schema: u32,
    pub algo: AlgoName,
    pub env: String,
    pub horizon: u64,
    pub num_arms: usize,
    pub replicates: u32,
    pub base_seed: u64,
    pub delta: f64,
    pub params: ResolvedParams,
    pub mean_max_regret: f64,
    pub stderr_max_regret: f64,
    pub per_replicate_max_regret: Vec<f64>,
    pub checkpoints: Vec<u64>,
    pub mean_max_regret_at_checkpoints: Vec<f64>,
    /// Row per checkpoint, entry per arm (index i is arm i+1 in 1-based
    /// notation).
    pub mean_regret_by_arm_at_checkpoints: Vec<Vec<f64>>,
    pub mean_regret_by_arm: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingReport>,
    pub monitor_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub chosen: ArmId,
    pub observed_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: RegretReport,
    /// Per-replicate light traces when `collect_traces` is set.
    pub traces: Option<Vec<Vec<TraceRow>>>,
}

// ---------------------------------------------------------------------------
// Experiment running
// ---------------------------------------------------------------------------

/// SplitMix finalizer used to derive independent seeds from
/// `(base, replicate, lane)`.
fn derive_seed(base: u64, replicate: u64, lane: u64) -> u64 {
    let mut x = base
        ^ replicate.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ lane.wrapping_mul(0xd1b5_4a32_d192_ed03);
    for _ in 0..2 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

const LANE_ENV: u64 = 0;
const LANE_EPISODE: u64 = 1;

struct Prepared {
    info: HorizonInfo,
    num_arms: usize,
    fixed_script: Option<Arc<EnvironmentScript>>,
    comparator: Option<Vec<ArmId>>,
    resolved: ResolvedParams,
}

struct ReplicateSummary {
    max_regret: f64,
    checkpoint_regrets: Vec<Vec<f64>>,
    tracking: Option<f64>,
    violations: u64,
    trace: Option<Vec<TraceRow>>,
}

/// Validate a configuration without running it.
pub fn validate_config(config: &ExperimentConfig) -> Result<Prechecked> {
    if config.replicates < 1 {
        return Err(Error::InvalidParameters("replicates must be >= 1".into()));
    }
    if config.delta.is_nan() || config.delta <= 0.0 || config.delta >= 1.0 {
        return Err(Error::InvalidParameters(format!(
            "delta {} outside (0,1)",
            config.delta
        )));
    }
    let prepared = prepare(config)?;
    Ok(Prechecked(prepared))
}

/// Opaque token proving a config passed validation.
pub struct Prechecked(Prepared);

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (info, mode, fixed_script) = nominal_env(config)?;
    let num_arms = info.num_arms as usize;

    // Mode compatibility: only the confidence variant accepts real-valued
    // activity.
    if mode == EnvMode::Confidence && config.algo.name != AlgoName::SbExp3Confidence {
        return Err(Error::InvalidParameters(format!(
            "algo {:?} requires a binary environment",
            config.algo.name
        )));
    }

    let resolved = resolve_params(&config.algo, &info, config.delta)?;
    validate_monitors(config)?;

    let comparator = match &config.env {
        EnvConfig::Switching { segments, .. } => {
            let segs: Vec<(u64, ArmId)> = segments
                .iter()
                .map(|s| arm_from_one_based(s.arm, num_arms).map(|a| (s.rounds, a)))
                .collect::<Result<_>>()?;
            Some(comparator_sequence(&segs))
        }
        _ => None,
    };

    Ok(Prepared {
        info,
        num_arms,
        fixed_script,
        comparator,
        resolved,
    })
}

fn arm_from_one_based(arm: usize, num_arms: usize) -> Result<ArmId> {
    if arm == 0 || arm > num_arms {
        return Err(Error::InvalidParameters(format!(
            "arm {arm} outside 1..={num_arms} (arms are 1-based in configs)"
        )));
    }
    Ok(ArmId(arm - 1))
}

fn validate_monitors(config: &ExperimentConfig) -> Result<()> {
    let m = &config.monitors;
    let potential_growth_ok = matches!(
        config.algo.name,
        AlgoName::SbExp3 | AlgoName::SbExp3Confidence
    );
    if m.potential_growth && !potential_growth_ok {
        return Err(Error::InvalidParameters(
            "monitors.potentialGrowth applies to sb-exp3 variants only".into(),
        ));
    }
    if m.local_norm && !matches!(config.algo.name, AlgoName::Ftarl | AlgoName::FtarlShannon) {
        return Err(Error::InvalidParameters(
            "monitors.localNorm applies to ftarl variants only".into(),
        ));
    }
    if m.fault_round.is_some() && !m.potential_growth {
        return Err(Error::InvalidParameters(
            "monitors.faultRound needs monitors.potentialGrowth".into(),
        ));
    }
    Ok(())
}

/// Nominal (declared, seed-independent) horizon info for tuning and bounds.
fn nominal_env(
    config: &ExperimentConfig,
) -> Result<(HorizonInfo, EnvMode, Option<Arc<EnvironmentScript>>)> {
    let t = config.horizon;
    match &config.env {
        EnvConfig::Stochastic { k, a, means } => {
            means.materialize(*k)?;
            if *a < 1 || a > k {
                return Err(Error::InvalidParameters(format!(
                    "need 1 <= a <= k, got a={a}, k={k}"
                )));
            }
            Ok((
                HorizonInfo {
                    arms_ever_active: *k as f64,
                    total_activations: (*a as u64 * t) as f64,
                    horizon: t,
                    max_active: *a as f64,
                    num_arms: *k as f64,
                },
                EnvMode::Binary,
                None,
            ))
        }
        EnvConfig::LowerBound { f, zero_loss_arm } => {
            let f = match f {
                Some(f) => *f,
                None => default_lower_bound_f(t)?,
            };
            let variant = match zero_loss_arm {
                None => LowerBoundVariant::Neutral,
                Some(arm) => {
                    LowerBoundVariant::ZeroLoss(arm_from_one_based(*arm, (1 + 4 * f) as usize)?)
                }
            };
            let script = Arc::new(lower_bound_env(t, f, variant)?);
            let info = script.horizon_info();
            Ok((info, EnvMode::Binary, Some(script)))
        }
        EnvConfig::Switching { k, segments, gap } => {
            if segments.is_empty() {
                return Err(Error::InvalidParameters("no segments".into()));
            }
            let total: u64 = segments.iter().map(|s| s.rounds).sum();
            if total != t {
                return Err(Error::InvalidParameters(format!(
                    "segments cover {total} of {t} rounds"
                )));
            }
            if !(*gap > 0.0 && *gap <= 0.5) {
                return Err(Error::InvalidParameters(format!("gap {gap} outside (0,0.5]")));
            }
            for s in segments {
                arm_from_one_based(s.arm, *k)?;
            }
            Ok((
                HorizonInfo {
                    arms_ever_active: *k as f64,
                    total_activations: (*k as u64 * t) as f64,
                    horizon: t,
                    max_active: *k as f64,
                    num_arms: *k as f64,
                },
                EnvMode::Binary,
                None,
            ))
        }
        EnvConfig::Confidence { k, law, means } => {
            means.materialize(*k)?;
            let parsed = law.to_law()?;
            let per_round = match parsed {
                ConfidenceLaw::Constant(c) => *k as f64 * c,
                ConfidenceLaw::UniformWithFloor { floor, .. } => {
                    (*k as f64 - 1.0) * 0.5 + (1.0 + floor * floor) / 2.0
                }
                ConfidenceLaw::Bernoulli { p } => *k as f64 * p,
            };
            let mode = match parsed {
                ConfidenceLaw::Bernoulli { .. } => EnvMode::Binary,
                _ => EnvMode::Confidence,
            };
            Ok((
                HorizonInfo {
                    arms_ever_active: *k as f64,
                    total_activations: per_round * t as f64,
                    horizon: t,
                    max_active: *k as f64,
                    num_arms: *k as f64,
                },
                mode,
                None,
            ))
        }
        EnvConfig::Script { path } => {
            let text = std::fs::read_to_string(path)?;
            let script = Arc::new(EnvironmentScript::from_json(&text)?);
            if script.horizon() != t {
                return Err(Error::InvalidParameters(format!(
                    "script horizon {} differs from configured {t}",
                    script.horizon()
                )));
            }
            let info = script.horizon_info();
            let mode = script.mode();
            Ok((info, mode, Some(script)))
        }
    }
}

fn resolve_params(
    algo: &AlgoConfig,
    info: &HorizonInfo,
    delta: f64,
) -> Result<ResolvedParams> {
    let explicit = algo.eta.is_some() || algo.gamma.is_some() || algo.beta.is_some();
    if algo.name == AlgoName::SbExp3Anytime {
        if explicit && algo.eta.is_some() {
            return Err(Error::InvalidParameters(
                "field algo.eta: sb-exp3-anytime tunes its own learning rate".into(),
            ));
        }
        if algo.tune_mode.is_some() {
            return Err(Error::InvalidParameters(
                "field algo.tuneMode: sb-exp3-anytime tunes its own learning rate".into(),
            ));
        }
        let gamma = algo.gamma.unwrap_or(0.0);
        if gamma < 0.0 {
            return Err(Error::InvalidParameters("field algo.gamma: negative".into()));
        }
        return Ok(ResolvedParams {
            eta: None,
            gamma,
            beta: None,
            switches: None,
        });
    }

    if explicit == algo.tune_mode.is_some() {
        return Err(Error::InvalidParameters(
            "field algo: give exactly one of explicit eta/gamma/beta or tuneMode".into(),
        ));
    }

    let tuned: TunedParams = if let Some(mode) = algo.tune_mode {
        let mode = match mode {
            TuneModeName::Expectation => TuneMode::Expectation,
            TuneModeName::HighProbability => TuneMode::HighProbability { delta },
            TuneModeName::Ftarl => TuneMode::Ftarl,
            TuneModeName::Confidence => TuneMode::Confidence { delta },
        };
        tune(mode, info)?
    } else {
        let eta = algo
            .eta
            .ok_or_else(|| Error::InvalidParameters("field algo.eta: required".into()))?;
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "field algo.eta: {eta} must be positive"
            )));
        }
        let is_expert = matches!(
            algo.name,
            AlgoName::SeExp4 | AlgoName::SeExp4Virtual | AlgoName::SeExp4Restart
        );
        let gamma = algo.gamma.unwrap_or(if is_expert { eta / 2.0 } else { 0.0 });
        if gamma < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "field algo.gamma: {gamma} must be nonnegative"
            )));
        }
        TunedParams {
            eta,
            gamma,
            beta: algo.beta,
        }
    };

    // Theorem-side constraints, exposed as validation.
    match algo.name {
        AlgoName::SbExp3 | AlgoName::SbExp3Confidence
            if tuned.gamma > 0.0 && tuned.gamma < tuned.eta / 2.0 - 1e-12 =>
        {
            return Err(Error::InvalidParameters(format!(
                "field algo.gamma: {} below eta/2 = {}",
                tuned.gamma,
                tuned.eta / 2.0
            )));
        }
        AlgoName::SeExp4 | AlgoName::SeExp4Virtual | AlgoName::SeExp4Restart
            if tuned.gamma > 0.0 && tuned.eta > 2.0 * tuned.gamma + 1e-12 =>
        {
            return Err(Error::InvalidParameters(format!(
                "field algo.eta: {} above 2·gamma = {}",
                tuned.eta,
                2.0 * tuned.gamma
            )));
        }
        _ => {}
    }

    let beta = match algo.name {
        AlgoName::Ftarl => {
            let beta = tuned.beta.unwrap_or(0.5);
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidParameters(format!(
                    "field algo.beta: {beta} outside (0,1)"
                )));
            }
            Some(beta)
        }
        AlgoName::FtarlShannon => {
            if algo.beta.is_some() {
                return Err(Error::InvalidParameters(
                    "field algo.beta: not applicable to ftarl-shannon".into(),
                ));
            }
            None
        }
        _ => {
            if algo.beta.is_some() {
                return Err(Error::InvalidParameters(
                    "field algo.beta: only ftarl takes a Tsallis exponent".into(),
                ));
            }
            None
        }
    };

    let switches = match algo.name {
        AlgoName::SeExp4Restart => Some(algo.switches.ok_or_else(|| {
            Error::InvalidParameters("field algo.switches: required for se-exp4-restart".into())
        })?),
        _ => {
            if algo.switches.is_some() {
                return Err(Error::InvalidParameters(
                    "field algo.switches: only se-exp4-restart restarts".into(),
                ));
            }
            None
        }
    };
    if switches == Some(0) {
        return Err(Error::InvalidParameters(
            "field algo.switches: must be >= 1".into(),
        ));
    }

    Ok(ResolvedParams {
        eta: Some(tuned.eta),
        gamma: tuned.gamma,
        beta,
        switches,
    })
}

fn build_learner(
    config: &ExperimentConfig,
    prepared: &Prepared,
    script: &Arc<EnvironmentScript>,
) -> Result<Box<dyn Learner>> {
    let p = &prepared.resolved;
    let k = prepared.num_arms;
    let t = config.horizon;
    Ok(match config.algo.name {
        AlgoName::SbExp3 | AlgoName::SbExp3Confidence => {
            let inner = SbExp3::new(p.eta.expect("resolved"), p.gamma)?;
            if config.monitors.potential_growth {
                Box::new(
                    MonitoredSbExp3::new(inner, script.ever_active())
                        .with_fault_at(config.monitors.fault_round),
                )
            } else {
                Box::new(inner)
            }
        }
        AlgoName::Ftarl => {
            let inner = Ftarl::new(
                k,
                p.eta.expect("resolved"),
                p.gamma,
                Regularizer::Tsallis {
                    beta: p.beta.expect("resolved"),
                },
            )?;
            if config.monitors.local_norm {
                Box::new(MonitoredFtarl::new(inner))
            } else {
                Box::new(inner)
            }
        }
        AlgoName::FtarlShannon => {
            let inner = Ftarl::new(k, p.eta.expect("resolved"), p.gamma, Regularizer::Shannon)?;
            if config.monitors.local_norm {
                Box::new(MonitoredFtarl::new(inner))
            } else {
                Box::new(inner)
            }
        }
        AlgoName::SbExp3Anytime => Box::new(DoublingSbExp3::new(p.gamma)?),
        AlgoName::SeExp4 => Box::new(BasisSeExp4::new(k, p.eta.expect("resolved"), p.gamma)?),
        AlgoName::SeExp4Virtual => Box::new(VirtualSeExp4::new(
            k,
            t,
            p.eta.expect("resolved"),
            p.gamma,
        )?),
        AlgoName::SeExp4Restart => {
            let switches = p.switches.expect("resolved");
            let (eta, gamma) = (p.eta.expect("resolved"), p.gamma);
            let episode_len = t.div_ceil(switches);
            Box::new(Restarted::new(
                move |_| VirtualSeExp4::new(k, episode_len, eta, gamma),
                t,
                switches,
            )?)
        }
    })
}

fn materialize_env(
    config: &ExperimentConfig,
    prepared: &Prepared,
    replicate: u32,
) -> Result<Arc<EnvironmentScript>> {
    if let Some(script) = &prepared.fixed_script {
        return Ok(Arc::clone(script));
    }
    let seed = derive_seed(config.base_seed, replicate as u64, LANE_ENV);
    let t = config.horizon;
    let script = match &config.env {
        EnvConfig::Stochastic { k, a, means } => {
            stochastic_env(*k, *a, t, &means.materialize(*k)?, seed)?
        }
        EnvConfig::Switching { k, segments, gap } => {
            let segs: Vec<(u64, ArmId)> = segments
                .iter()
                .map(|s| arm_from_one_based(s.arm, *k).map(|a| (s.rounds, a)))
                .collect::<Result<_>>()?;
            switching_env(*k, t, &segs, *gap, seed)?
        }
        EnvConfig::Confidence { k, law, means } => {
            confidence_env(*k, t, law.to_law()?, &means.materialize(*k)?, seed)?
        }
        EnvConfig::LowerBound { .. } | EnvConfig::Script { .. } => unreachable!("fixed scripts"),
    };
    Ok(Arc::new(script))
}

fn run_replicate(
    config: &ExperimentConfig,
    prepared: &Prepared,
    replicate: u32,
) -> Result<ReplicateSummary> {
    let script = materialize_env(config, prepared, replicate)?;
    let mut learner = build_learner(config, prepared, &script)?;
    let monitors = EpisodeMonitors {
        ix_identity_gamma: config
            .monitors
            .ix_identity
            .then_some(prepared.resolved.gamma),
    };
    let mut env = ScriptPlayer::new(Arc::clone(&script));
    let episode_seed = derive_seed(config.base_seed, replicate as u64, LANE_EPISODE);
    let trace = run_episode(learner.as_mut(), &mut env, episode_seed, &monitors)?;

    let tracking = prepared.comparator.as_ref().map(|seq| {
        trace
            .records
            .iter()
            .zip(script.rounds())
            .zip(seq)
            .map(|((rec, (_, losses)), &j)| {
                rec.observed_loss - losses.get(j).expect("comparator arm always active")
            })
            .sum()
    });

    Ok(ReplicateSummary {
        max_regret: trace.ledger.max_regret(prepared.num_arms),
        checkpoint_regrets: trace
            .checkpoints
            .iter()
            .map(|c| c.regret_by_arm.clone())
            .collect(),
        tracking,
        violations: trace.violations.len() as u64,
        trace: config.collect_traces.then(|| {
            trace
                .records
                .iter()
                .map(|r| TraceRow {
                    t: r.t,
                    chosen: r.chosen,
                    observed_loss: r.observed_loss,
                })
                .collect()
        }),
    })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run every replicate (in parallel), aggregate the summaries in replicate
/// order, and attach the configured bound.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let Prechecked(prepared) = validate_config(config)?;

    let summaries: Vec<Result<ReplicateSummary>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, &prepared, r).map_err(|e| e.at_replicate(r)))
        .collect();
    let mut collected = Vec::with_capacity(summaries.len());
    for s in summaries {
        collected.push(s?);
    }

    let per_replicate_max: Vec<f64> = collected.iter().map(|s| s.max_regret).collect();
    let (mean_max, stderr_max) = mean_and_stderr(&per_replicate_max);

    let checkpoints = checkpoint_times(config.horizon);
    let n = collected.len() as f64;
    let mut mean_by_arm_at: Vec<Vec<f64>> =
        vec![vec![0.0; prepared.num_arms]; checkpoints.len()];
    let mut mean_max_at = vec![0.0; checkpoints.len()];
    for s in &collected {
        for (ci, regrets) in s.checkpoint_regrets.iter().enumerate() {
            let mut worst = 0.0f64;
            for (ai, &r) in regrets.iter().enumerate() {
                mean_by_arm_at[ci][ai] += r / n;
                worst = worst.max(r);
            }
            mean_max_at[ci] += worst / n;
        }
    }
    let mean_by_arm = mean_by_arm_at.last().cloned().unwrap_or_default();

    let tracking = prepared.comparator.is_some().then(|| {
        let per: Vec<f64> = collected.iter().map(|s| s.tracking.unwrap_or(0.0)).collect();
        let (mean, stderr) = mean_and_stderr(&per);
        let bound = prepared.resolved.switches.map(|s| {
            theoretical_bound(
                Theorem::TrackingHighProb,
                &BoundParams {
                    num_arms: Some(prepared.num_arms as f64),
                    horizon: Some(config.horizon as f64),
                    switches: Some(s as f64),
                    delta: Some(config.delta),
                    eta: prepared.resolved.eta,
                    ..BoundParams::default()
                },
            )
            .expect("all tracking parameters present")
        });
        TrackingReport {
            mean,
            stderr,
            per_replicate: per,
            bound,
        }
    });

    let bound = match config.bound {
        Some(theorem) => {
            let value = theoretical_bound(theorem, &bound_params(config, &prepared))?;
            Some(BoundReport {
                theorem,
                value,
                ratio: mean_max / value,
            })
        }
        None => None,
    };

    let monitor_violations = collected.iter().map(|s| s.violations).sum();
    let traces = config
        .collect_traces
        .then(|| collected.into_iter().map(|s| s.trace.unwrap_or_default()).collect());

    Ok(ExperimentOutput {
        report: RegretReport {
            schema: REPORT_SCHEMA,
            algo: config.algo.name,
            env: config.env.name().to_string(),
            horizon: config.horizon,
            num_arms: prepared.num_arms,
            replicates: config.replicates,
            base_seed: config.base_seed,
            delta: config.delta,
            params: prepared.resolved,
            mean_max_regret: mean_max,
            stderr_max_regret: stderr_max,
            per_replicate_max_regret: per_replicate_max,
            checkpoints,
            mean_max_regret_at_checkpoints: mean_max_at,
            mean_regret_by_arm_at_checkpoints: mean_by_arm_at,
            mean_regret_by_arm: mean_by_arm,
            bound,
            tracking,
            monitor_violations,
        },
        traces,
    })
}

fn bound_params(config: &ExperimentConfig, prepared: &Prepared) -> BoundParams {
    let pool_experts = |horizon: u64| {
        prepared.num_arms as f64 * horizon as f64 * (horizon + 1) as f64 / 2.0
    };
    let num_experts = match config.algo.name {
        AlgoName::SeExp4 => Some(prepared.num_arms as f64),
        AlgoName::SeExp4Virtual => Some(pool_experts(config.horizon)),
        AlgoName::SeExp4Restart => {
            let s = prepared.resolved.switches.unwrap_or(1);
            Some(pool_experts(config.horizon.div_ceil(s)))
        }
        _ => None,
    };
    BoundParams {
        arms_ever_active: Some(prepared.info.arms_ever_active),
        sum_activations: Some(prepared.info.total_activations),
        eta: prepared.resolved.eta,
        gamma: Some(prepared.resolved.gamma),
        beta: prepared.resolved.beta,
        delta: Some(config.delta),
        horizon: Some(config.horizon as f64),
        max_active: Some(prepared.info.max_active),
        num_arms: Some(prepared.info.num_arms),
        num_experts,
        switches: prepared.resolved.switches.map(|s| s as f64),
    }
}

// ---------------------------------------------------------------------------
// Equivalence run
// ---------------------------------------------------------------------------

/// Drive SB-EXP3 and Shannon-FTARL in lockstep over a binary script with the
/// same `(η, γ)` and one shared sampling stream; returns the maximum
/// elementwise distribution gap over all rounds.
pub fn shannon_equivalence_gap(
    script: &EnvironmentScript,
    eta: f64,
    gamma: f64,
    seed: u64,
) -> Result<f64> {
    if script.mode() != EnvMode::Binary {
        return Err(Error::InvalidParameters(
            "equivalence run needs a binary script".into(),
        ));
    }
    let mut sb = SbExp3::new(eta, gamma)?;
    let mut ft = Ftarl::new(script.num_arms(), eta, gamma, Regularizer::Shannon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for (t, (round, losses)) in script.rounds().iter().enumerate() {
        let fail = |e: Error| e.at_round(t as u64 + 1);
        let d_sb = sb.sampling_distribution(round).map_err(fail)?;
        let d_ft = ft.sampling_distribution(round).map_err(fail)?;
        for i in 0..script.num_arms() {
            max_gap = max_gap.max((d_sb.probs()[i] - d_ft.probs()[i]).abs());
        }
        let chosen = sample(&d_sb, &mut rng).map_err(fail)?;
        let loss = losses.get(chosen).expect("validated script");
        sb.absorb(round, &d_sb, chosen, loss).map_err(fail)?;
        ft.absorb(round, &d_ft, chosen, loss).map_err(fail)?;
    }
    Ok(max_gap)
}
