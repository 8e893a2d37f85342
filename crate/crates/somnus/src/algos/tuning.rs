//! Closed-form parameter tuning for the regret bounds.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Horizon quantities the tuner works from (exact values or upper bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonInfo {
    /// G_T: arms active at least once over the horizon.
    pub arms_ever_active: f64,
    /// Σ_t A_t in the binary case; Σ_t Σ_i I_{i,t} in the confidence case.
    pub total_activations: f64,
    /// T.
    pub horizon: u64,
    /// A = max_t A_t.
    pub max_active: f64,
    /// K.
    pub num_arms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuneMode {
    /// Pseudo-regret: `η = √(2·ln G_T / Σ A_t)`, `γ = 0`.
    Expectation,
    /// High probability: `γ = η/2` with η minimizing the resulting bound.
    HighProbability { delta: f64 },
    /// FTARL pseudo-regret: `β = 1/2`, `η = √(2√K / (T·√A))`, `γ = 0`.
    Ftarl,
    /// Confidence regret: `γ = η = √(ln(G_T/δ) / ΣΣI)`.
    Confidence { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedParams {
    pub eta: f64,
    pub gamma: f64,
    pub beta: Option<f64>,
}

/// Tune `(η, γ, β)` for the selected mode.
pub fn tune(mode: TuneMode, info: &HorizonInfo) -> Result<TunedParams> {
    let g = info.arms_ever_active;
    let sum_a = info.total_activations;
    if !g.is_finite() || g < 1.0 {
        return Err(Error::InvalidHorizon(format!("arms_ever_active {g}")));
    }
    if !sum_a.is_finite() || sum_a <= 0.0 {
        return Err(Error::InvalidHorizon(format!("total_activations {sum_a}")));
    }
    match mode {
        TuneMode::Expectation => {
            let eta = (2.0 * g.ln() / sum_a).sqrt();
            if eta <= 0.0 {
                return Err(Error::InvalidHorizon(format!(
                    "degenerate tuning: ln G_T = {} gives eta {eta}",
                    g.ln()
                )));
            }
            Ok(TunedParams {
                eta,
                gamma: 0.0,
                beta: None,
            })
        }
        TuneMode::HighProbability { delta } => {
            check_delta(delta)?;
            // With γ = η/2 the bound is (ln G + 2·ln(2G/δ))/η + η·ΣA.
            let numer = g.ln() + 2.0 * (2.0 * g / delta).ln();
            let eta = (numer / sum_a).sqrt();
            if eta <= 0.0 {
                return Err(Error::InvalidHorizon("degenerate tuning".into()));
            }
            Ok(TunedParams {
                eta,
                gamma: eta / 2.0,
                beta: None,
            })
        }
        TuneMode::Ftarl => {
            let t = info.horizon as f64;
            let a = info.max_active;
            let k = info.num_arms;
            if !(t.is_finite() && a.is_finite() && k.is_finite()) || t <= 0.0 || a <= 0.0 || k < 1.0 {
                return Err(Error::InvalidHorizon(format!(
                    "FTARL tuning needs T>0, A>0, K>=1 (got T={t}, A={a}, K={k})"
                )));
            }
            let eta = (2.0 * k.sqrt() / (t * a.sqrt())).sqrt();
            Ok(TunedParams {
                eta,
                gamma: 0.0,
                beta: Some(0.5),
            })
        }
        TuneMode::Confidence { delta } => {
            check_delta(delta)?;
            let eta = ((g / delta).ln() / sum_a).sqrt();
            if eta <= 0.0 {
                return Err(Error::InvalidHorizon("degenerate tuning".into()));
            }
            Ok(TunedParams {
                eta,
                gamma: eta,
                beta: None,
            })
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidHorizon(format!(
            "confidence level delta {delta} outside (0,1)"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(g: f64, sum_a: f64, t: u64, a: f64, k: f64) -> HorizonInfo {
        HorizonInfo {
            arms_ever_active: g,
            total_activations: sum_a,
            horizon: t,
            max_active: a,
            num_arms: k,
        }
    }

    #[test]
    fn expectation_mode_hand_value() {
        // G_T=16, ΣA_t=4096 → η = √(2·ln16/4096) ≈ 0.03679.
        let p = tune(TuneMode::Expectation, &info(16.0, 4096.0, 1024, 4.0, 16.0)).unwrap();
        assert!((p.eta - 0.03679).abs() < 5e-6);
        assert_eq!(p.gamma, 0.0);
    }

    #[test]
    fn expectation_mode_minimizes_bound() {
        // The closed form beats a fine grid over the Theorem 3.1 expression.
        let (g, sum_a) = (12.0f64, 2000.0f64);
        let bound = |eta: f64| g.ln() / eta + eta / 2.0 * sum_a;
        let tuned = tune(TuneMode::Expectation, &info(g, sum_a, 500, 4.0, 12.0)).unwrap();
        let mut best = f64::INFINITY;
        let mut eta = 1e-4;
        while eta < 1.0 {
            best = best.min(bound(eta));
            eta += 1e-4;
        }
        assert!(bound(tuned.eta) <= best + 1e-9);
    }

    #[test]
    fn ftarl_mode_matches_numeric_minimizer() {
        // Non-sleeping case K = A: the closed form minimizes the Theorem 3.4
        // expression at β = 1/2.
        let (k, a, t) = (9.0f64, 9.0f64, 700u64);
        let p = tune(TuneMode::Ftarl, &info(9.0, a * t as f64, t, a, k)).unwrap();
        assert_eq!(p.beta, Some(0.5));
        let beta = 0.5;
        let bound = |eta: f64| {
            k.powf(1.0 - beta) / (eta * (1.0 - beta)) + eta / (2.0 * beta) * t as f64 * a.powf(beta)
        };
        let mut best = f64::INFINITY;
        let mut eta = 1e-4;
        while eta < 1.0 {
            best = best.min(bound(eta));
            eta += 1e-4;
        }
        assert!(bound(p.eta) <= best + 1e-9);
        assert!((p.eta - (2.0 * k.sqrt() / (t as f64 * a.sqrt())).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn high_probability_mode_sets_gamma_half_eta() {
        let p = tune(
            TuneMode::HighProbability { delta: 0.05 },
            &info(16.0, 4096.0, 1024, 4.0, 16.0),
        )
        .unwrap();
        assert!((p.gamma - p.eta / 2.0).abs() < 1e-18);
    }

    #[test]
    fn confidence_mode_sets_gamma_equal_eta() {
        let p = tune(
            TuneMode::Confidence { delta: 0.1 },
            &info(8.0, 1500.0, 500, 8.0, 8.0),
        )
        .unwrap();
        assert_eq!(p.gamma, p.eta);
        assert!((p.eta - ((8.0f64 / 0.1).ln() / 1500.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_horizon_is_an_error() {
        assert!(matches!(
            tune(TuneMode::Expectation, &info(16.0, 0.0, 0, 0.0, 16.0)),
            Err(Error::InvalidHorizon(_))
        ));
        assert!(matches!(
            tune(TuneMode::Expectation, &info(1.0, 100.0, 10, 1.0, 1.0)),
            Err(Error::InvalidHorizon(_))
        ));
    }
}
