//! Tanh-squashed Gaussian policy head.
//!
//! The network emits [mean | log_std]; an action is
//! `center + half_range * tanh(mean + std * noise)` and the log-probability
//! carries the tanh and range change-of-variables corrections. The tanh
//! correction uses the softplus form `log(1 - tanh(u)^2) =
//! 2 (ln 2 - u - softplus(-2u))`, which stays finite for any finite u.

use super::mlp::NnError;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.9189385332046727;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Everything the caller needs to differentiate through the sample.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    /// u = mean + std * noise.
    pub pretanh: Vec<f64>,
    /// tanh(u).
    pub squashed: Vec<f64>,
    pub std: Vec<f64>,
    pub noise: Vec<f64>,
    /// Whether each raw log_std fell inside the clamp range (gradients are
    /// zero through a saturated clamp).
    pub log_std_active: Vec<bool>,
}

fn split_head(head: &[f64]) -> Result<(&[f64], &[f64]), NnError> {
    if !head.len().is_multiple_of(2) {
        return Err(NnError::UpstreamDimension {
            expected: head.len() + 1,
            got: head.len(),
        });
    }
    if head.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("policy head output"));
    }
    Ok(head.split_at(head.len() / 2))
}

/// Draw an action from the squashed Gaussian. `noise` must be standard
/// normal with one entry per action dimension.
pub fn sample_squashed_gaussian(
    head: &[f64],
    noise: &[f64],
    low: &[f64],
    high: &[f64],
) -> Result<SquashedSample, NnError> {
    let (mean, log_std_raw) = split_head(head)?;
    let dim = mean.len();
    if noise.len() != dim || low.len() != dim || high.len() != dim {
        return Err(NnError::InputDimension {
            expected: dim,
            got: noise.len(),
        });
    }
    let mut action = Vec::with_capacity(dim);
    let mut pretanh = Vec::with_capacity(dim);
    let mut squashed = Vec::with_capacity(dim);
    let mut std = Vec::with_capacity(dim);
    let mut log_std_active = Vec::with_capacity(dim);
    let mut log_prob = 0.0;
    for i in 0..dim {
        let ls = log_std_raw[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        log_std_active.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&log_std_raw[i]));
        let s = ls.exp();
        let u = mean[i] + s * noise[i];
        // f64 tanh rounds to exactly 1.0 past |u| ~ 19; keep the action
        // strictly inside the bounds.
        let y = u.tanh().clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        let half_range = 0.5 * (high[i] - low[i]);
        let center = 0.5 * (high[i] + low[i]);
        action.push(center + half_range * y);
        // Gaussian density of u under (mean, std), via the noise value.
        log_prob += -0.5 * noise[i] * noise[i] - ls - HALF_LN_2PI;
        // Change of variables through tanh and the affine range map.
        log_prob -= 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u));
        log_prob -= half_range.ln();
        pretanh.push(u);
        squashed.push(y);
        std.push(s);
    }
    Ok(SquashedSample {
        action,
        log_prob,
        pretanh,
        squashed,
        std,
        noise: noise.to_vec(),
        log_std_active,
    })
}

/// Deterministic action: the squashed mean.
pub fn deterministic_action(head: &[f64], low: &[f64], high: &[f64]) -> Result<Vec<f64>, NnError> {
    let (mean, _) = split_head(head)?;
    Ok(mean
        .iter()
        .zip(low.iter().zip(high))
        .map(|(m, (lo, hi))| {
            let y = m.tanh().clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            0.5 * (hi + lo) + 0.5 * (hi - lo) * y
        })
        .collect())
}
