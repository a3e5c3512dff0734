//! Jointly Gaussian source / private-information model.
//!
//! The pair `(X, θ)` is zero-mean Gaussian with covariance
//!
//! ```text
//! σ_X² · [ 1  ρ ]
//!        [ ρ  r ]
//! ```
//!
//! Every quantity downstream (distortion, privacy MMSE, rate) is a function
//! of second-order statistics of a linear observation of this pair, which is
//! what [`LinearObservation`] and [`SourceModel::mmse`] provide.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on normalized quantities when checking `ρ² ≤ r`.
pub const MODEL_EPS: f64 = 1e-12;

/// Second-order statistics of `(X, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct SourceModel {
    sigma_x2: f64,
    rho: f64,
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    sigma_x2: f64,
    rho: f64,
    r: f64,
}

impl TryFrom<RawModel> for SourceModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        validate_model(raw.sigma_x2, raw.rho, raw.r)
    }
}

impl From<SourceModel> for RawModel {
    fn from(m: SourceModel) -> Self {
        RawModel {
            sigma_x2: m.sigma_x2,
            rho: m.rho,
            r: m.r,
        }
    }
}

/// Validates raw parameters. Checks run in a fixed order so every input
/// maps to exactly one outcome.
pub fn validate_model(sigma_x2: f64, rho: f64, r: f64) -> Result<SourceModel> {
    for (name, v) in [("sigma_x2", sigma_x2), ("rho", rho), ("r", r)] {
        if !v.is_finite() {
            return Err(Error::NonFinite { name });
        }
    }
    if sigma_x2 <= 0.0 {
        return Err(Error::NonPositiveVariance(sigma_x2));
    }
    if rho < 0.0 {
        return Err(Error::NegativeCorrelation(rho));
    }
    let rho_sq = rho * rho;
    if rho_sq > r + MODEL_EPS {
        return Err(Error::CorrelationExceedsVariance { rho_sq, r });
    }
    Ok(SourceModel { sigma_x2, rho, r })
}

impl SourceModel {
    pub fn new(sigma_x2: f64, rho: f64, r: f64) -> Result<Self> {
        validate_model(sigma_x2, rho, r)
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Normalized conditional variance `Var(θ|X)/σ_X² = r − ρ²`, floored at 0.
    pub fn residual(&self) -> f64 {
        (self.r - self.rho * self.rho).max(0.0)
    }

    /// `θ` is (up to the tolerance) a deterministic function of `X`.
    pub fn is_degenerate(&self) -> bool {
        self.residual() <= MODEL_EPS * self.r.max(1.0)
    }

    /// MMSE prediction coefficient of `X` from `θ`, negated: the `α` that makes
    /// `X + αθ` orthogonal to `θ`. Zero when `ρ = 0`.
    pub fn orthogonalizing_alpha(&self) -> f64 {
        if self.rho == 0.0 {
            0.0
        } else {
            -self.rho / self.r
        }
    }

    /// Normalized power of `X + αθ`: `1 + 2αρ + α²r`, evaluated as
    /// `(1+αρ)² + α²(r−ρ²)` so it stays non-negative under rounding.
    pub fn mixed_power(&self, alpha: f64) -> f64 {
        let a = 1.0 + alpha * self.rho;
        a * a + alpha * alpha * self.residual()
    }

    pub fn privacy_bounds(&self) -> PrivacyBounds {
        privacy_bounds(self)
    }

    /// Exact MMSE of `X` and of `θ` from the observation.
    pub fn mmse(&self, obs: &LinearObservation) -> Mmse {
        let s2 = self.sigma_x2;
        let n_s = obs.encoder_noise / s2;
        let den = self.mixed_power(obs.alpha) + n_s;
        let signal = obs.beta * obs.beta * s2 * den;
        let total = signal + obs.channel_noise;
        if den <= 0.0 || total <= 0.0 || signal == 0.0 {
            // Y carries no information about (X, θ).
            return Mmse {
                d_c: s2,
                d_p: s2 * self.r,
            };
        }
        let gamma = signal / total;
        let gamma_c = obs.channel_noise / total;
        let c_x = 1.0 + obs.alpha * self.rho;
        let c_t = self.rho + self.r * obs.alpha;
        let res = self.residual();
        // Cancellation-free forms of σ²(1 − γc_x²/den) and σ²(r − γc_t²/den).
        let d_c = s2 * (gamma_c * c_x * c_x + obs.alpha * obs.alpha * res + n_s) / den;
        let d_p = s2 * (gamma_c * c_t * c_t + res + self.r * n_s) / den;
        debug_assert!(gamma <= 1.0);
        Mmse { d_c, d_p }
    }

    pub fn cov_x_y(&self, obs: &LinearObservation) -> f64 {
        obs.beta * self.sigma_x2 * (1.0 + obs.alpha * self.rho)
    }

    pub fn cov_theta_y(&self, obs: &LinearObservation) -> f64 {
        obs.beta * self.sigma_x2 * (self.rho + self.r * obs.alpha)
    }

    pub fn var_y(&self, obs: &LinearObservation) -> f64 {
        obs.beta * obs.beta * (self.sigma_x2 * self.mixed_power(obs.alpha) + obs.encoder_noise)
            + obs.channel_noise
    }

    /// Linear-MMSE coefficient of `X` on `Y` (the decoder gain).
    pub fn x_gain(&self, obs: &LinearObservation) -> f64 {
        let v = self.var_y(obs);
        if v > 0.0 {
            self.cov_x_y(obs) / v
        } else {
            0.0
        }
    }

    /// Linear-MMSE coefficient of `θ` on `Y` (the inspector's gain).
    pub fn theta_gain(&self, obs: &LinearObservation) -> f64 {
        let v = self.var_y(obs);
        if v > 0.0 {
            self.cov_theta_y(obs) / v
        } else {
            0.0
        }
    }
}

/// Observation `Y = β(X + αθ + S) + Z` with independent `S ~ N(0, encoder_noise)`
/// and `Z ~ N(0, channel_noise)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearObservation {
    pub alpha: f64,
    pub beta: f64,
    pub encoder_noise: f64,
    pub channel_noise: f64,
}

impl LinearObservation {
    pub fn noiseless(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 1.0,
            encoder_noise: 0.0,
            channel_noise: 0.0,
        }
    }
}

/// Distortion `D_C = E(X − E[X|Y])²` and privacy `D_P = E(θ − E[θ|Y])²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mmse {
    pub d_c: f64,
    pub d_p: f64,
}

/// Range of meaningful privacy MMSE targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBounds {
    /// `Var(θ|X)`: revealing `X` exactly.
    pub dp_min: f64,
    /// `Var(θ)`: revealing nothing about `θ`.
    pub dp_max: f64,
}

pub fn privacy_bounds(model: &SourceModel) -> PrivacyBounds {
    PrivacyBounds {
        dp_min: model.sigma_x2 * model.residual(),
        dp_max: model.sigma_x2 * model.r,
    }
}

/// Differential entropy (nats) of a Gaussian with variance `mmse`; for jointly
/// Gaussian variables this is `H(θ|Y)` when `mmse = D_P`.
pub fn gaussian_conditional_entropy(mmse: f64) -> Result<f64> {
    if !mmse.is_finite() {
        return Err(Error::NonFinite { name: "mmse" });
    }
    if mmse <= 0.0 {
        return Err(Error::NonPositiveMmse(mmse));
    }
    Ok(0.5 * (2.0 * PI * E * mmse).ln())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation_examples() {
        assert!(validate_model(1.0, 0.6, 1.0).is_ok());
        assert!(matches!(
            validate_model(1.0, 0.5, 0.2),
            Err(Error::CorrelationExceedsVariance { .. })
        ));
        assert_eq!(
            validate_model(0.0, 0.0, 1.0),
            Err(Error::NonPositiveVariance(0.0))
        );
        assert_eq!(
            validate_model(1.0, -0.1, 1.0),
            Err(Error::NegativeCorrelation(-0.1))
        );
        assert_eq!(
            validate_model(f64::NAN, 0.1, 1.0),
            Err(Error::NonFinite { name: "sigma_x2" })
        );
    }

    #[test]
    fn boundary_model_is_accepted() {
        let m = validate_model(2.0, 0.7, 0.49).unwrap();
        assert!(m.is_degenerate());
        assert!(m.privacy_bounds().dp_min < 1e-15);
    }

    #[test]
    fn bounds_examples() {
        let b = privacy_bounds(&SourceModel::new(1.0, 0.6, 1.0).unwrap());
        assert!((b.dp_min - 0.64).abs() < 1e-15);
        assert_eq!(b.dp_max, 1.0);

        let b = privacy_bounds(&SourceModel::new(1.0, 0.0, 1.0).unwrap());
        assert_eq!((b.dp_min, b.dp_max), (1.0, 1.0));

        let b = privacy_bounds(&SourceModel::new(2.0, 0.5, 0.5).unwrap());
        assert!((b.dp_min - 0.5).abs() < 1e-15);
        assert_eq!(b.dp_max, 1.0);
    }

    #[test]
    fn entropy_examples() {
        let unit = 1.0 / (2.0 * PI * E);
        assert!(gaussian_conditional_entropy(unit).unwrap().abs() < 1e-15);
        // 40-digit reference: ½ln(2πe)
        let h1 = gaussian_conditional_entropy(1.0).unwrap();
        assert!((h1 - 1.418_938_533_204_672_7).abs() < 1e-15);
        assert!(gaussian_conditional_entropy(0.5).unwrap() < h1);
        assert_eq!(
            gaussian_conditional_entropy(0.0),
            Err(Error::NonPositiveMmse(0.0))
        );
    }

    #[test]
    fn noiseless_identity_observation_reveals_x() {
        let m = SourceModel::new(1.5, 0.6, 1.0).unwrap();
        let e = m.mmse(&LinearObservation::noiseless(0.0));
        assert_eq!(e.d_c, 0.0);
        assert!((e.d_p - 1.5 * 0.64).abs() < 1e-14);
    }

    #[test]
    fn silent_observation_returns_priors() {
        // ρ² = r and α = −1/ρ make X + αθ ≡ 0.
        let m = SourceModel::new(1.0, 0.5, 0.25).unwrap();
        let e = m.mmse(&LinearObservation::noiseless(-2.0));
        assert_eq!((e.d_c, e.d_p), (1.0, 0.25));
    }

    fn model_strategy() -> impl Strategy<Value = SourceModel> {
        (0.1f64..10.0, 0.0f64..1.0, 0.0f64..2.0)
            .prop_map(|(s, rho, extra)| SourceModel::new(s, rho, rho * rho + extra).unwrap())
    }

    proptest! {
        #[test]
        fn bounds_are_ordered(m in model_strategy()) {
            let b = m.privacy_bounds();
            prop_assert!(0.0 <= b.dp_min && b.dp_min <= b.dp_max);
            if m.rho() == 0.0 {
                prop_assert_eq!(b.dp_min, b.dp_max);
            } else {
                prop_assert!(b.dp_min < b.dp_max);
            }
        }

        #[test]
        fn entropy_is_strictly_increasing(a in 1e-6f64..1e3, b in 1e-6f64..1e3) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(gaussian_conditional_entropy(lo).unwrap()
                < gaussian_conditional_entropy(hi).unwrap());
        }

        #[test]
        fn validation_is_total(s in -2.0f64..2.0, rho in -1.0f64..1.0, r in -0.5f64..1.5) {
            match validate_model(s, rho, r) {
                Ok(m) => {
                    prop_assert!(m.sigma_x2() > 0.0 && m.rho() >= 0.0);
                    prop_assert!(m.rho() * m.rho() <= m.r() + MODEL_EPS);
                    prop_assert_eq!((m.sigma_x2(), m.rho(), m.r()), (s, rho, r));
                }
                Err(Error::NonPositiveVariance(_)) => prop_assert!(s <= 0.0),
                Err(Error::NegativeCorrelation(_)) => prop_assert!(s > 0.0 && rho < 0.0),
                Err(Error::CorrelationExceedsVariance { .. }) => {
                    prop_assert!(s > 0.0 && rho >= 0.0 && rho * rho > r)
                }
                Err(e) => prop_assert!(false, "unexpected {e:?}"),
            }
        }

        #[test]
        fn mmse_is_bounded_by_priors(m in model_strategy(), alpha in -3.0f64..1.0,
                                     n in 0.0f64..5.0, beta in 0.1f64..3.0, z in 0.0f64..5.0) {
            let e = m.mmse(&LinearObservation { alpha, beta, encoder_noise: n, channel_noise: z });
            let b = m.privacy_bounds();
            let tol = 1e-12 * m.sigma_x2();
            prop_assert!(e.d_c >= -tol && e.d_c <= m.sigma_x2() + tol);
            // Mixing θ into Y can reveal more than X alone, so only 0 bounds D_P below.
            prop_assert!(e.d_p >= -tol && e.d_p <= b.dp_max + tol);
        }
    }
}
