//! The FAL composite score: weighted fidelity, accuracy, and latency terms,
//! each on a 0-100 scale.
//!
//! FAL = alpha*F + beta*(1 - (S+I+D)/N)*100 + gamma*latency_term(L).
//! Two latency modes exist because the published latency expression
//! 1 + (L-1)/(M-1)*99 grows with L (slower systems score higher) while the
//! surrounding prose treats latency as a cost. `paper` keeps the expression
//! verbatim; `corrected` flips it to 100 - (L-1)/(M-1)*99. Every report
//! states which mode produced it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EditCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LatencyMode {
    #[default]
    Paper,
    Corrected,
}

impl std::fmt::Display for LatencyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatencyMode::Paper => f.write_str("paper"),
            LatencyMode::Corrected => f.write_str("corrected"),
        }
    }
}

/// Non-negative weights on the three terms; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

const SIMPLEX_TOLERANCE: f64 = 1e-9;

impl FalWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<FalWeights> {
        let w = FalWeights { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "weight {name} must be a non-negative number, got {v}"
                )));
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Config(format!(
                "weights must sum to 1, got alpha+beta+gamma = {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for FalWeights {
    fn default() -> FalWeights {
        FalWeights { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, gamma: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalConfig {
    pub weights: FalWeights,
    /// M, the latency ceiling in seconds. Must exceed 1 whenever the
    /// latency term is active (gamma > 0).
    pub max_latency: f64,
    pub mode: LatencyMode,
}

impl FalConfig {
    pub fn new(weights: FalWeights, max_latency: f64, mode: LatencyMode) -> Result<FalConfig> {
        weights.validate()?;
        if !max_latency.is_finite() || max_latency <= 0.0 {
            return Err(Error::Config(format!(
                "max latency M must be positive, got {max_latency}"
            )));
        }
        Ok(FalConfig { weights, max_latency, mode })
    }
}

/// Fidelity in [0,100] with the judge that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    pub value: f64,
    pub judge: String,
    pub prompt_hash: String,
}

impl FidelityScore {
    pub fn new(value: f64, judge: impl Into<String>, prompt_hash: impl Into<String>) -> Result<FidelityScore> {
        if !value.is_finite() || !(0.0..=100.0).contains(&value) {
            return Err(Error::Validation(format!(
                "fidelity must be within [0, 100], got {value}"
            )));
        }
        Ok(FidelityScore { value, judge: judge.into(), prompt_hash: prompt_hash.into() })
    }
}

/// The composite score with its three pre-weighting terms recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalScore {
    pub total: f64,
    pub fidelity_term: f64,
    pub accuracy_term: f64,
    pub latency_term: f64,
}

/// max(0, 1 - (S+I+D)/N) * 100. The raw expression goes negative when
/// insertions outnumber the reference; clamping keeps FAL within [0,100].
pub fn accuracy_term(counts: &EditCounts) -> Result<f64> {
    match counts.rate() {
        Some(rate) => Ok(((1.0 - rate) * 100.0).max(0.0)),
        None => Err(Error::Usage(
            "accuracy term undefined: reference basis is empty (N = 0)".into(),
        )),
    }
}

/// Maps latency L into [1,100] after clamping L into [1, M]. Direction
/// depends on the mode (see module docs).
pub fn latency_term(latency_s: f64, cfg: &FalConfig) -> Result<f64> {
    if !(cfg.max_latency > 1.0) {
        return Err(Error::Config(format!(
            "max latency M must exceed 1 s for latency scoring (got {}); raise M or disable the term with gamma = 0",
            cfg.max_latency
        )));
    }
    if !latency_s.is_finite() {
        return Err(Error::Validation(format!("latency must be finite, got {latency_s}")));
    }
    let l = latency_s.clamp(1.0, cfg.max_latency);
    let position = (l - 1.0) / (cfg.max_latency - 1.0);
    Ok(match cfg.mode {
        LatencyMode::Paper => 1.0 + position * 99.0,
        LatencyMode::Corrected => 100.0 - position * 99.0,
    })
}

/// Weighted sum of the three terms. With gamma = 0 the latency term is
/// recorded at its floor of 1 and M is not validated.
pub fn compute_fal(
    fidelity: &FidelityScore,
    counts: &EditCounts,
    latency_s: f64,
    cfg: &FalConfig,
) -> Result<FalScore> {
    cfg.weights.validate()?;
    let fidelity_term = fidelity.value;
    let accuracy = accuracy_term(counts)?;
    let latency = if cfg.weights.gamma > 0.0 {
        latency_term(latency_s, cfg)?
    } else {
        1.0
    };
    let total = cfg.weights.alpha * fidelity_term
        + cfg.weights.beta * accuracy
        + cfg.weights.gamma * latency;
    Ok(FalScore { total, fidelity_term, accuracy_term: accuracy, latency_term: latency })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    fn counts(s: usize, i: usize, d: usize, n: usize) -> EditCounts {
        EditCounts {
            substitutions: s,
            insertions: i,
            deletions: d,
            reference_len: n,
            correct: n.saturating_sub(s + d),
        }
    }

    fn cfg(mode: LatencyMode, m: f64) -> FalConfig {
        FalConfig::new(FalWeights::default(), m, mode).unwrap()
    }

    #[test]
    fn accuracy_of_a_perfect_transcript_is_100() {
        assert!((accuracy_term(&counts(0, 0, 0, 10)).unwrap() - 100.0).abs() < EPS);
    }

    #[test]
    fn accuracy_two_substitutions_in_ten() {
        assert!((accuracy_term(&counts(2, 0, 0, 10)).unwrap() - 80.0).abs() < EPS);
    }

    #[test]
    fn accuracy_clamps_at_zero_when_errors_overflow() {
        // raw value would be -50
        assert!((accuracy_term(&counts(10, 5, 0, 10)).unwrap() - 0.0).abs() < EPS);
    }

    #[test]
    fn accuracy_with_empty_reference_is_an_error() {
        assert!(matches!(accuracy_term(&counts(0, 3, 0, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn latency_boundaries_both_modes() {
        assert!((latency_term(1.0, &cfg(LatencyMode::Paper, 10.0)).unwrap() - 1.0).abs() < EPS);
        assert!((latency_term(1.0, &cfg(LatencyMode::Corrected, 10.0)).unwrap() - 100.0).abs() < EPS);
        assert!((latency_term(10.0, &cfg(LatencyMode::Paper, 10.0)).unwrap() - 100.0).abs() < EPS);
        assert!((latency_term(10.0, &cfg(LatencyMode::Corrected, 10.0)).unwrap() - 1.0).abs() < EPS);
    }

    #[test]
    fn latency_midpoint_paper_mode() {
        assert!((latency_term(5.5, &cfg(LatencyMode::Paper, 10.0)).unwrap() - 50.5).abs() < EPS);
    }

    #[test]
    fn latency_clamps_into_the_valid_interval() {
        let c = cfg(LatencyMode::Corrected, 10.0);
        assert_eq!(latency_term(0.2, &c).unwrap(), latency_term(1.0, &c).unwrap());
        assert_eq!(latency_term(400.0, &c).unwrap(), latency_term(10.0, &c).unwrap());
    }

    #[test]
    fn latency_rejects_degenerate_ceiling() {
        let bad = FalConfig { weights: FalWeights::default(), max_latency: 1.0, mode: LatencyMode::Paper };
        let err = latency_term(2.0, &bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn weights_must_lie_on_the_simplex() {
        assert!(FalWeights::new(0.3, 0.3, 0.3).is_err());
        assert!(FalWeights::new(-0.1, 0.6, 0.5).is_err());
        assert!(FalWeights::new(0.2, 0.5, 0.3).is_ok());
    }

    #[test]
    fn perfect_system_paper_mode_totals_67() {
        let f = FidelityScore::new(100.0, "mock", "h").unwrap();
        let score = compute_fal(&f, &counts(0, 0, 0, 10), 1.0, &cfg(LatencyMode::Paper, 10.0)).unwrap();
        // (100 + 100 + 1) / 3
        assert!((score.total - 67.0).abs() < EPS);
        assert!((score.latency_term - 1.0).abs() < EPS);
    }

    #[test]
    fn perfect_system_corrected_mode_totals_100() {
        let f = FidelityScore::new(100.0, "mock", "h").unwrap();
        let score =
            compute_fal(&f, &counts(0, 0, 0, 10), 1.0, &cfg(LatencyMode::Corrected, 10.0)).unwrap();
        assert!((score.total - 100.0).abs() < EPS);
    }

    #[test]
    fn worst_system_corrected_mode_totals_one_third() {
        let f = FidelityScore::new(0.0, "mock", "h").unwrap();
        let score =
            compute_fal(&f, &counts(10, 0, 0, 10), 10.0, &cfg(LatencyMode::Corrected, 10.0)).unwrap();
        assert!((score.total - 1.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn zero_gamma_skips_latency_validation() {
        let f = FidelityScore::new(50.0, "mock", "h").unwrap();
        let c = FalConfig {
            weights: FalWeights::new(0.5, 0.5, 0.0).unwrap(),
            max_latency: 0.5,
            mode: LatencyMode::Paper,
        };
        let score = compute_fal(&f, &counts(0, 0, 0, 4), 3.0, &c).unwrap();
        assert!((score.total - 75.0).abs() < EPS);
    }

    #[test]
    fn fidelity_range_is_enforced() {
        assert!(FidelityScore::new(100.5, "j", "h").is_err());
        assert!(FidelityScore::new(-0.1, "j", "h").is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn weights() -> impl Strategy<Value = FalWeights> {
            (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_filter_map(
                "degenerate weight triple",
                |(a, b, g)| {
                    let sum = a + b + g;
                    (sum > 1e-6).then(|| FalWeights { alpha: a / sum, beta: b / sum, gamma: g / sum })
                },
            )
        }

        fn configs(mode: LatencyMode) -> impl Strategy<Value = FalConfig> {
            (weights(), 1.000001f64..500.0)
                .prop_map(move |(w, m)| FalConfig { weights: w, max_latency: m, mode })
        }

        fn any_mode() -> impl Strategy<Value = LatencyMode> {
            prop_oneof![Just(LatencyMode::Paper), Just(LatencyMode::Corrected)]
        }

        proptest! {
            #[test]
            fn total_stays_in_bounds(
                mode in any_mode(),
                cfg in any_mode().prop_flat_map(configs),
                f in 0.0f64..=100.0,
                errors in 0usize..30,
                n in 1usize..20,
                l in 0.0f64..600.0,
            ) {
                let _ = mode;
                let fid = FidelityScore::new(f, "mock", "h").unwrap();
                let score = compute_fal(&fid, &counts(errors.min(n), errors.saturating_sub(n), 0, n), l, &cfg).unwrap();
                prop_assert!(score.total >= -1e-9 && score.total <= 100.0 + 1e-9);
            }

            #[test]
            fn total_non_decreasing_in_fidelity(
                cfg in any_mode().prop_flat_map(configs),
                f1 in 0.0f64..=100.0,
                f2 in 0.0f64..=100.0,
                l in 0.0f64..60.0,
            ) {
                let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
                let c = counts(1, 0, 0, 5);
                let s_lo = compute_fal(&FidelityScore::new(lo, "m", "h").unwrap(), &c, l, &cfg).unwrap();
                let s_hi = compute_fal(&FidelityScore::new(hi, "m", "h").unwrap(), &c, l, &cfg).unwrap();
                prop_assert!(s_hi.total >= s_lo.total - 1e-9);
            }

            #[test]
            fn total_non_increasing_in_errors(
                cfg in any_mode().prop_flat_map(configs),
                e1 in 0usize..30,
                e2 in 0usize..30,
                n in 1usize..20,
                l in 0.0f64..60.0,
            ) {
                let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                let fid = FidelityScore::new(70.0, "m", "h").unwrap();
                let mk = |e: usize| counts(e.min(n), e.saturating_sub(n), 0, n);
                let s_lo = compute_fal(&fid, &mk(lo), l, &cfg).unwrap();
                let s_hi = compute_fal(&fid, &mk(hi), l, &cfg).unwrap();
                prop_assert!(s_hi.total <= s_lo.total + 1e-9);
            }

            #[test]
            fn latency_direction_matches_the_mode(
                cfg in any_mode().prop_flat_map(configs),
                l1 in 0.0f64..600.0,
                l2 in 0.0f64..600.0,
            ) {
                let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
                let fid = FidelityScore::new(70.0, "m", "h").unwrap();
                let c = counts(1, 0, 0, 5);
                let s_lo = compute_fal(&fid, &c, lo, &cfg).unwrap();
                let s_hi = compute_fal(&fid, &c, hi, &cfg).unwrap();
                match cfg.mode {
                    LatencyMode::Paper => prop_assert!(s_hi.total >= s_lo.total - 1e-9),
                    LatencyMode::Corrected => prop_assert!(s_hi.total <= s_lo.total + 1e-9),
                }
            }
        }
    }
}
