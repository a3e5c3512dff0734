//! Closed-form Stackelberg equilibria for the three communication settings.
//!
//! The encoder (leader) commits to `Y = β(X + αθ) + noise`; the decoder
//! (follower) answers with the MMSE estimate `X̂ = κY`. In every setting an
//! active privacy constraint `D_P(α) = target` reduces to the same quadratic
//! in `α`, solved by [`solve_alpha_quadratic`]. Of its two roots the solver
//! keeps the one with the lower distortion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearObservation, SourceModel};

/// Back-substitution tolerance on normalized privacy values.
pub const SOLVE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Noiseless release of `Y = X + αθ + S`.
    Simple,
    /// Gaussian forward test channel `Y = X + αθ + N` at a given rate.
    Compression,
    /// Power-limited transmission over `Y = U + Z`.
    Channel,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setting::Simple => "simple",
            Setting::Compression => "compression",
            Setting::Channel => "channel",
        })
    }
}

/// Power budget and noise of the additive Gaussian channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    p_t: f64,
    sigma_z2: f64,
}

impl ChannelSpec {
    pub fn new(p_t: f64, sigma_z2: f64) -> Result<Self> {
        if !p_t.is_finite() || !sigma_z2.is_finite() {
            return Err(Error::InvalidChannel("non-finite parameter".into()));
        }
        if p_t <= 0.0 {
            return Err(Error::InvalidChannel(format!("power budget must be positive, got {p_t}")));
        }
        if sigma_z2 < 0.0 {
            return Err(Error::InvalidChannel(format!(
                "noise variance must be non-negative, got {sigma_z2}"
            )));
        }
        Ok(Self { p_t, sigma_z2 })
    }

    pub fn p_t(&self) -> f64 {
        self.p_t
    }

    pub fn sigma_z2(&self) -> f64 {
        self.sigma_z2
    }

    /// Fraction of received power that is signal, `P_T/(P_T + σ_Z²)`.
    pub fn signal_fraction(&self) -> f64 {
        self.p_t / (self.p_t + self.sigma_z2)
    }

    /// `σ_Z²/(P_T + σ_Z²)`, computed directly rather than as `1 − γ`.
    pub fn noise_fraction(&self) -> f64 {
        self.sigma_z2 / (self.p_t + self.sigma_z2)
    }
}

/// A setting together with the parameters it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Simple,
    Compression { sigma_n2: f64 },
    Channel(ChannelSpec),
}

impl Scenario {
    pub fn setting(&self) -> Setting {
        match self {
            Scenario::Simple => Setting::Simple,
            Scenario::Compression { .. } => Setting::Compression,
            Scenario::Channel(_) => Setting::Channel,
        }
    }

    pub fn channel(&self) -> Option<&ChannelSpec> {
        match self {
            Scenario::Channel(c) => Some(c),
            _ => None,
        }
    }

    /// Lowest privacy MMSE the setting delivers with `α = 0`; targets at or
    /// below it leave the constraint inactive.
    pub fn privacy_floor(&self, model: &SourceModel) -> f64 {
        let s2 = model.sigma_x2();
        let rho_sq = model.rho() * model.rho();
        match self {
            Scenario::Simple => s2 * model.residual(),
            Scenario::Compression { sigma_n2 } => {
                let n = sigma_n2 / s2;
                s2 * (model.residual() + model.r() * n) / (1.0 + n)
            }
            Scenario::Channel(ch) => s2 * (model.residual() + rho_sq * ch.noise_fraction()),
        }
    }
}

/// Linear encoder `Y = β(X + αθ) + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderPolicy {
    pub alpha: f64,
    pub beta: f64,
    /// Variance of independent additive encoder noise (`σ_S²` or `σ_N²`).
    pub noise_var: f64,
}

impl EncoderPolicy {
    pub fn noiseless(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 1.0,
            noise_var: 0.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.noise_var.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite parameter".into()));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidPolicy(format!("gain must be positive, got {}", self.beta)));
        }
        if self.noise_var < 0.0 {
            return Err(Error::InvalidPolicy(format!(
                "noise variance must be non-negative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    pub fn observation(&self, channel_noise: f64) -> LinearObservation {
        LinearObservation {
            alpha: self.alpha,
            beta: self.beta,
            encoder_noise: self.noise_var,
            channel_noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub setting: Setting,
    pub policy: EncoderPolicy,
    /// Decoder gain, `X̂ = κY`.
    pub kappa: f64,
    pub d_c: f64,
    pub d_p: f64,
    pub d_p_target: f64,
    pub constraint_active: bool,
    /// Test-channel rate in nats (compression only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

/// Both roots `(α₊, α₋)` of the active privacy constraint
/// `r·d·α² + 2ρ·d·α + (ρ² − r + d − (r−d)·n) = 0`, where `d` is the privacy
/// target normalized by `σ_X²` and `n` the normalized noise variance.
///
/// The discriminant factors as `(1 − ρ²/r + n)(1/d − 1/r)`, so roots are
/// evaluated as `−ρ/r ± √((1 − ρ²/r + n)(1/d − 1/r))`.
pub fn solve_alpha_quadratic(model: &SourceModel, d: f64, n_eff: f64) -> Result<(f64, f64)> {
    if !d.is_finite() || !n_eff.is_finite() {
        return Err(Error::OutOfDomain("non-finite target or noise".into()));
    }
    if n_eff < 0.0 {
        return Err(Error::OutOfDomain(format!("effective noise must be >= 0, got {n_eff}")));
    }
    if d <= 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let r = model.r();
    let infeasible = || Error::InfeasibleTarget {
        target: d * model.sigma_x2(),
        max: r * model.sigma_x2(),
    };
    if r <= 0.0 || d > r * (1.0 + 1e-12) {
        return Err(infeasible());
    }
    Ok(roots_from_gap(model, (1.0 / d - 1.0 / r).max(0.0), n_eff))
}

/// `1/d − 1/r` for a raw target `t`, formed as `(σ²r − t)/(t·r)`.
fn target_gap(model: &SourceModel, target: f64) -> f64 {
    ((model.privacy_bounds().dp_max - target) / (target * model.r())).max(0.0)
}

/// Roots given `gap = 1/d − 1/r`. Near `d = r` the square root amplifies any
/// rounding in `gap`, so callers holding the raw target form it directly.
fn roots_from_gap(model: &SourceModel, gap: f64, n_eff: f64) -> (f64, f64) {
    let offset = ((model.residual() / model.r() + n_eff) * gap).sqrt();
    let center = model.orthogonalizing_alpha();
    (center + offset, center - offset)
}

/// Bisection on the privacy residual `D_P(α, n) − d` over `[−ρ/r, 0]`, where
/// `D_P` decreases monotonically. Returns the root nearest zero.
pub fn solve_alpha_bisection(model: &SourceModel, d: f64, n_eff: f64) -> Result<f64> {
    let s2 = model.sigma_x2();
    let dp = |alpha: f64| {
        model
            .mmse(&LinearObservation {
                alpha,
                beta: 1.0,
                encoder_noise: n_eff * s2,
                channel_noise: 0.0,
            })
            .d_p
            / s2
    };
    let mut lo = model.orthogonalizing_alpha();
    let mut hi = 0.0;
    if dp(lo) < d {
        return Err(Error::InfeasibleTarget {
            target: d * s2,
            max: model.r() * s2,
        });
    }
    if dp(hi) >= d {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dp(mid) >= d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn evaluate_setting1(model: &SourceModel, policy: &EncoderPolicy) -> Result<(f64, f64)> {
    policy.validate()?;
    let e = model.mmse(&LinearObservation {
        beta: 1.0,
        ..policy.observation(0.0)
    });
    Ok((e.d_c, e.d_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionPoint {
    /// Nats per source symbol.
    pub rate: f64,
    pub d_c: f64,
    pub d_p: f64,
}

/// `D_C` written as `σ²(1 − (1+αρ)²/(1 + 2αρ + α²r + n))`.
pub fn distortion_gain_form(model: &SourceModel, alpha: f64, n: f64) -> f64 {
    let (rho, r) = (model.rho(), model.r());
    let den = 1.0 + 2.0 * alpha * rho + alpha * alpha * r + n;
    let c = 1.0 + alpha * rho;
    model.sigma_x2() * (1.0 - c * c / den)
}

/// `D_C` written as `σ²(α²(r − ρ²) + n)/(1 + 2αρ + α²r + n)`.
pub fn distortion_residual_form(model: &SourceModel, alpha: f64, n: f64) -> f64 {
    let (rho, r) = (model.rho(), model.r());
    let den = 1.0 + 2.0 * alpha * rho + alpha * alpha * r + n;
    model.sigma_x2() * (alpha * alpha * (r - rho * rho) + n) / den
}

/// Rate of the Gaussian test channel, `½ ln(1 + σ²(1 + 2αρ + α²r)/σ_N²)`.
pub fn compression_rate(model: &SourceModel, alpha: f64, sigma_n2: f64) -> f64 {
    0.5 * (model.sigma_x2() * model.mixed_power(alpha) / sigma_n2).ln_1p()
}

pub fn evaluate_setting2(model: &SourceModel, policy: &EncoderPolicy) -> Result<CompressionPoint> {
    policy.validate()?;
    if policy.noise_var <= 0.0 {
        return Err(Error::InfiniteRate(policy.noise_var));
    }
    let s2 = model.sigma_x2();
    let n = policy.noise_var / s2;
    let e = model.mmse(&LinearObservation {
        beta: 1.0,
        ..policy.observation(0.0)
    });
    let a = distortion_gain_form(model, policy.alpha, n);
    let b = distortion_residual_form(model, policy.alpha, n);
    if (a - b).abs() > 1e-10 * a.abs().max(b.abs()) + 1e-14 * s2 {
        return Err(Error::Internal(format!(
            "distortion forms disagree: {a} vs {b}"
        )));
    }
    Ok(CompressionPoint {
        rate: compression_rate(model, policy.alpha, policy.noise_var),
        d_c: e.d_c,
        d_p: e.d_p,
    })
}

/// Expected transmit power `E{U²}` of `U = β(X + αθ + S)`.
pub fn transmit_power(model: &SourceModel, policy: &EncoderPolicy) -> f64 {
    policy.beta * policy.beta * (model.sigma_x2() * model.mixed_power(policy.alpha) + policy.noise_var)
}

/// Gain that spends the whole power budget on `X + αθ + S`.
pub fn power_normalizing_gain(
    model: &SourceModel,
    alpha: f64,
    noise_var: f64,
    channel: &ChannelSpec,
) -> f64 {
    let p = model.sigma_x2() * model.mixed_power(alpha) + noise_var;
    if p > 0.0 {
        (channel.p_t() / p).sqrt()
    } else {
        1.0
    }
}

pub fn evaluate_setting3(
    model: &SourceModel,
    policy: &EncoderPolicy,
    channel: &ChannelSpec,
) -> Result<(f64, f64)> {
    policy.validate()?;
    let e = model.mmse(&policy.observation(channel.sigma_z2()));
    Ok((e.d_c, e.d_p))
}

/// Decoder gain `(1+αρ)/(1 + α²r + 2αρ)`, the MMSE gain for `Y = X + αθ`.
/// Over a noisy channel with gain `β` it is not the MMSE gain; see
/// [`solve_setting3`].
pub fn noiseless_decoder_gain(model: &SourceModel, alpha: f64) -> f64 {
    model.x_gain(&LinearObservation::noiseless(alpha))
}

/// Slope `dD_C/dD_P` of the noiseless frontier at the point produced by `α`:
/// `−α(1+αρ)/(ρ+rα)`. Infinite at `α = −ρ/r`.
pub fn frontier_slope(model: &SourceModel, alpha: f64) -> f64 {
    let den = model.rho() + model.r() * alpha;
    if den == 0.0 {
        return f64::INFINITY;
    }
    -alpha * (1.0 + alpha * model.rho()) / den
}

fn check_target(target: f64) -> Result<()> {
    if target.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { name: "d_p_target" })
    }
}

fn check_upper(model: &SourceModel, target: f64) -> Result<()> {
    let max = model.privacy_bounds().dp_max;
    if target > max + 1e-12 * max.max(model.sigma_x2()) {
        return Err(Error::InfeasibleTarget { target, max });
    }
    Ok(())
}

/// Keeps the lower-distortion root; ties go to the root nearer zero.
fn pick_root(roots: (f64, f64), distortion: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = roots;
    let (da, db) = (distortion(a), distortion(b));
    if da < db || (da == db && a.abs() <= b.abs()) {
        a
    } else {
        b
    }
}

fn clamp_alpha(model: &SourceModel, alpha: f64) -> f64 {
    alpha.clamp(model.orthogonalizing_alpha(), 0.0)
}

fn back_substitution(model: &SourceModel, achieved: f64, target: f64) -> Result<()> {
    let resid = (achieved - target).abs();
    if resid <= SOLVE_EPS * model.sigma_x2().max(target) {
        return Ok(());
    }
    if model.is_degenerate() {
        return Err(Error::NoiselessUnattainable { target });
    }
    Err(Error::Internal(format!(
        "back-substitution residual {resid} for target {target}"
    )))
}

/// Noiseless equilibrium: `Y = X + αθ`, `X̂ = κY`.
///
/// Encoder noise is never used. Targets at or below `Var(θ|X)` are met by
/// `Y = X`; the constraint is then reported inactive.
pub fn solve_setting1(model: &SourceModel, d_p_target: f64) -> Result<EquilibriumSolution> {
    check_target(d_p_target)?;
    check_upper(model, d_p_target)?;
    let floor = Scenario::Simple.privacy_floor(model);
    let (alpha, active) = if d_p_target <= floor {
        (0.0, false)
    } else {
        let roots = roots_from_gap(model, target_gap(model, d_p_target), 0.0);
        let alpha = pick_root(roots, |a| model.mmse(&LinearObservation::noiseless(a)).d_c);
        (clamp_alpha(model, alpha), true)
    };
    let obs = LinearObservation::noiseless(alpha);
    let e = model.mmse(&obs);
    if active {
        back_substitution(model, e.d_p, d_p_target)?;
    }
    Ok(EquilibriumSolution {
        setting: Setting::Simple,
        policy: EncoderPolicy::noiseless(alpha),
        kappa: model.x_gain(&obs),
        d_c: e.d_c,
        d_p: e.d_p,
        d_p_target,
        constraint_active: active,
        rate: None,
    })
}

/// Compression through the Gaussian test channel `Y = X + αθ + N`,
/// `N ~ N(0, σ_N²)`.
pub fn solve_setting2(
    model: &SourceModel,
    d_p_target: f64,
    sigma_n2: f64,
) -> Result<EquilibriumSolution> {
    check_target(d_p_target)?;
    if !(sigma_n2.is_finite() && sigma_n2 > 0.0) {
        return Err(Error::InfiniteRate(sigma_n2));
    }
    check_upper(model, d_p_target)?;
    let s2 = model.sigma_x2();
    let n = sigma_n2 / s2;
    let floor = Scenario::Compression { sigma_n2 }.privacy_floor(model);
    let observe = |alpha: f64| LinearObservation {
        alpha,
        beta: 1.0,
        encoder_noise: sigma_n2,
        channel_noise: 0.0,
    };
    let (mut alpha, active) = if d_p_target <= floor {
        (0.0, false)
    } else {
        let roots = roots_from_gap(model, target_gap(model, d_p_target), n);
        let alpha = pick_root(roots, |a| model.mmse(&observe(a)).d_c);
        (clamp_alpha(model, alpha), true)
    };
    let mut e = model.mmse(&observe(alpha));
    if active && back_substitution(model, e.d_p, d_p_target).is_err() {
        alpha = solve_alpha_bisection(model, (d_p_target / s2).min(model.r()), n)?;
        e = model.mmse(&observe(alpha));
        back_substitution(model, e.d_p, d_p_target)?;
    }
    let policy = EncoderPolicy {
        alpha,
        beta: 1.0,
        noise_var: sigma_n2,
    };
    let point = evaluate_setting2(model, &policy)?;
    Ok(EquilibriumSolution {
        setting: Setting::Compression,
        policy,
        kappa: model.x_gain(&observe(alpha)),
        d_c: point.d_c,
        d_p: point.d_p,
        d_p_target,
        constraint_active: active,
        rate: Some(point.rate),
    })
}

/// Transmission of `U = β(X + αθ)` with `E{U²} = P_T` over `Y = U + Z`.
///
/// The channel scales the leaked information by `γ = P_T/(P_T + σ_Z²)`, which
/// maps the target onto the noiseless problem through the effective target
/// `d' = d − (r − d)·σ_Z²/P_T`. The decoder gain is the MMSE gain of the
/// received signal, `βσ²(1+αρ)/(P_T + σ_Z²)`.
pub fn solve_setting3(
    model: &SourceModel,
    d_p_target: f64,
    channel: &ChannelSpec,
) -> Result<EquilibriumSolution> {
    check_target(d_p_target)?;
    check_upper(model, d_p_target)?;
    let r = model.r();
    let floor = Scenario::Channel(*channel).privacy_floor(model);
    let observe = |alpha: f64| {
        let beta = power_normalizing_gain(model, alpha, 0.0, channel);
        LinearObservation {
            alpha,
            beta,
            encoder_noise: 0.0,
            channel_noise: channel.sigma_z2(),
        }
    };
    let (alpha, active) = if d_p_target <= floor {
        (0.0, false)
    } else {
        let snr_inv = channel.sigma_z2() / channel.p_t();
        let slack = (model.privacy_bounds().dp_max - d_p_target).max(0.0);
        let t_eff = d_p_target - slack * snr_inv;
        if t_eff <= 0.0 {
            return Err(Error::DegenerateTarget);
        }
        let roots = roots_from_gap(model, slack * (1.0 + snr_inv) / (t_eff * r), 0.0);
        let alpha = pick_root(roots, |a| model.mmse(&observe(a)).d_c);
        (clamp_alpha(model, alpha), true)
    };
    let obs = observe(alpha);
    let e = model.mmse(&obs);
    if active {
        back_substitution(model, e.d_p, d_p_target)?;
    }
    Ok(EquilibriumSolution {
        setting: Setting::Channel,
        policy: EncoderPolicy {
            alpha,
            beta: obs.beta,
            noise_var: 0.0,
        },
        kappa: model.x_gain(&obs),
        d_c: e.d_c,
        d_p: e.d_p,
        d_p_target,
        constraint_active: active,
        rate: None,
    })
}

pub fn solve(model: &SourceModel, scenario: &Scenario, d_p_target: f64) -> Result<EquilibriumSolution> {
    match scenario {
        Scenario::Simple => solve_setting1(model, d_p_target),
        Scenario::Compression { sigma_n2 } => solve_setting2(model, d_p_target, *sigma_n2),
        Scenario::Channel(ch) => solve_setting3(model, d_p_target, ch),
    }
}

/// `(D_C, D_P)` of an arbitrary policy in the given setting.
pub fn evaluate(model: &SourceModel, scenario: &Scenario, policy: &EncoderPolicy) -> Result<(f64, f64)> {
    match scenario {
        Scenario::Simple => evaluate_setting1(model, policy),
        Scenario::Compression { .. } => {
            let p = evaluate_setting2(model, policy)?;
            Ok((p.d_c, p.d_p))
        }
        Scenario::Channel(ch) => evaluate_setting3(model, policy, ch),
    }
}

/// `(1+αρ)² − λ(ρ+rα)²`. On `λ ∈ [0, 1/ρ²]`, `α ∈ [−ρ/r, 0]` it is
/// non-negative, which makes added encoder noise useless for every
/// Lagrangian weight in that range.
pub fn xi_sign_check(model: &SourceModel, lambda: f64, alpha: f64) -> Result<f64> {
    let (rho, r) = (model.rho(), model.r());
    if rho == 0.0 {
        return Ok(1.0);
    }
    let lambda_max = 1.0 / (rho * rho);
    if !(lambda >= 0.0 && lambda <= lambda_max * (1.0 + 1e-12)) {
        return Err(Error::OutOfDomain(format!(
            "lambda {lambda} outside [0, {lambda_max}]"
        )));
    }
    let alpha_min = -rho / r;
    if !(alpha <= 0.0 && alpha >= alpha_min - 1e-12 * alpha_min.abs()) {
        return Err(Error::OutOfDomain(format!(
            "alpha {alpha} outside [{alpha_min}, 0]"
        )));
    }
    let a = 1.0 + alpha * rho;
    let b = rho + r * alpha;
    Ok(a * a - lambda * b * b)
}
