//! Length-conditioned prompting and the length-controlled reward.
//!
//! A query is conditioned on a user-chosen reasoning budget by appending a
//! fixed instruction to the prompt:
//!
//! ```
//! use budgetbench::lengthctl::{augment_prompt, LengthDirective};
//!
//! let p = augment_prompt("What is 2+2?", LengthDirective::new(512).unwrap()).unwrap();
//! assert_eq!(p, "What is 2+2? Think for 512 tokens.");
//! ```
//!
//! Targets for length-conditioned training data are drawn uniformly from
//! `[0, 4000]` with a seeded generator:
//!
//! ```
//! use budgetbench::lengthctl::sample_target_length;
//!
//! let a = sample_target_length(7);
//! let b = sample_target_length(7);
//! assert_eq!(a.tokens(), b.tokens());
//! ```
//!
//! The reward scorer combines a binary task score with a linear penalty on
//! the deviation between the requested and the actually used token count:
//!
//! ```
//! use budgetbench::lengthctl::{lcpo_reward, LcpoRewardParams};
//!
//! let params = LcpoRewardParams::default();
//! let exact = lcpo_reward(1, 1000, 1000, params).unwrap();
//! let off = lcpo_reward(1, 1000, 1500, params).unwrap();
//! assert_eq!(exact, 1.0);
//! assert!((off - 0.85).abs() < 1e-12);
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound of the target-length sampling range, in tokens.
pub const MAX_SAMPLED_TARGET: u32 = 4000;

/// A requested reasoning length in tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthDirective {
    n_target: u32,
}

impl LengthDirective {
    /// Any non-negative target is accepted; only the sampler is bounded
    /// by [`MAX_SAMPLED_TARGET`].
    pub fn new(n_target: u32) -> Result<Self> {
        Ok(LengthDirective { n_target })
    }

    pub fn tokens(&self) -> u32 {
        self.n_target
    }
}

/// Parameters of the combined reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcpoRewardParams {
    /// Length-penalty weight per token of deviation.
    pub alpha: f64,
}

impl LcpoRewardParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha must be a non-negative real, got {alpha}"
            )));
        }
        Ok(LcpoRewardParams { alpha })
    }
}

impl Default for LcpoRewardParams {
    fn default() -> Self {
        LcpoRewardParams { alpha: 0.0003 }
    }
}

/// Appends the length instruction `"Think for {n} tokens."` to a prompt.
///
/// The rendering is fixed (single space separator, decimal count, trailing
/// period) so runs are reproducible. Not idempotent: callers must not
/// augment an already-augmented prompt.
pub fn augment_prompt(prompt: &str, d: LengthDirective) -> Result<String> {
    if prompt.is_empty() {
        return Err(Error::InvalidArgument("prompt must be non-empty".into()));
    }
    Ok(format!("{prompt} Think for {} tokens.", d.tokens()))
}

/// Draws a target length uniformly from `[0, 4000]`, deterministically
/// from the seed.
pub fn sample_target_length(rng_seed: u64) -> LengthDirective {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    LengthDirective {
        n_target: rng.random_range(0..=MAX_SAMPLED_TARGET),
    }
}

/// Combined reward: `score − alpha · |n_target − n_used|`.
///
/// Equals the raw score when the used length hits the target or `alpha`
/// is zero. Unbounded below; no clipping.
pub fn lcpo_reward(
    score: u8,
    n_target: i64,
    n_used: i64,
    params: LcpoRewardParams,
) -> Result<f64> {
    if score > 1 {
        return Err(Error::InvalidArgument(format!(
            "score must be binary, got {score}"
        )));
    }
    if n_target < 0 || n_used < 0 {
        return Err(Error::InvalidArgument(
            "token counts must be non-negative".into(),
        ));
    }
    Ok(f64::from(score) - params.alpha * (n_target - n_used).abs() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn augmentation_surface_form() {
        let cases = [
            ("What is 2+2?", 512, "What is 2+2? Think for 512 tokens."),
            ("Prove P.", 0, "Prove P. Think for 0 tokens."),
            ("q", 4000, "q Think for 4000 tokens."),
        ];
        for (prompt, n, want) in cases {
            let got = augment_prompt(prompt, LengthDirective::new(n).unwrap()).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_prompt_rejected() {
        assert!(augment_prompt("", LengthDirective::new(1).unwrap()).is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        for seed in 0..500u64 {
            let a = sample_target_length(seed);
            let b = sample_target_length(seed);
            assert_eq!(a, b);
            assert!(a.tokens() <= MAX_SAMPLED_TARGET);
        }
    }

    #[test]
    fn sampler_mean_close_to_uniform_center() {
        // Mean of the discrete uniform on [0, 4000] is 2000 with
        // sigma = sqrt((4001^2 - 1) / 12) ~= 1155; 3 sigma / sqrt(100000) ~= 11.
        let n = 100_000u64;
        let sum: u64 = (0..n).map(|s| sample_target_length(s).tokens() as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 2000.0).abs() < 40.0, "mean = {mean}");
    }

    #[test]
    fn reward_examples() {
        let p = |a| LcpoRewardParams::new(a).unwrap();
        assert_eq!(lcpo_reward(1, 512, 512, p(0.001)).unwrap(), 1.0);
        assert_eq!(lcpo_reward(1, 512, 612, p(0.001)).unwrap(), 0.9);
        assert_eq!(lcpo_reward(0, 100, 100, p(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn reward_rejects_negative_counts() {
        assert!(lcpo_reward(1, -1, 5, LcpoRewardParams::default()).is_err());
        assert!(lcpo_reward(1, 5, -1, LcpoRewardParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn reward_symmetry(s in 0u8..=1, a in 0i64..10_000, b in 0i64..10_000, alpha in 0.0f64..1.0) {
            let p = LcpoRewardParams::new(alpha).unwrap();
            prop_assert_eq!(
                lcpo_reward(s, a, b, p).unwrap(),
                lcpo_reward(s, b, a, p).unwrap()
            );
        }

        #[test]
        fn reward_monotone_in_deviation(s in 0u8..=1, t in 0i64..10_000, d1 in 0i64..5_000, d2 in 0i64..5_000, alpha in 0.0f64..1.0) {
            let p = LcpoRewardParams::new(alpha).unwrap();
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let r_near = lcpo_reward(s, t, t + near, p).unwrap();
            let r_far = lcpo_reward(s, t, t + far, p).unwrap();
            prop_assert!(r_near >= r_far);
        }

        #[test]
        fn alpha_zero_is_passthrough(s in 0u8..=1, a in 0i64..10_000, b in 0i64..10_000) {
            let p = LcpoRewardParams::new(0.0).unwrap();
            prop_assert_eq!(lcpo_reward(s, a, b, p).unwrap(), f64::from(s));
        }

        #[test]
        fn augmentation_contains_instruction_once(prompt in "[a-zA-Z0-9 ?.]{1,40}", n in 0u32..=4000) {
            let out = augment_prompt(&prompt, LengthDirective::new(n).unwrap()).unwrap();
            prop_assert!(out.ends_with("tokens."));
            let needle = format!(" Think for {n} tokens.");
            prop_assert_eq!(out.matches(&needle).count(), 1);
        }
    }
}
