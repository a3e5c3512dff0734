//! Monte Carlo estimates of distortion, privacy and power for a fixed
//! encoder/decoder pair.
//!
//! Samples are drawn in fixed blocks of [`BLOCK`] draws. Block `b` uses its
//! own ChaCha20 stream (`seed_from_u64(seed)`, stream `b`), so results are
//! bit-identical for a given seed whatever the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{ChannelSpec, EncoderPolicy, Setting};
use crate::error::{Error, Result};
use crate::model::{gaussian_conditional_entropy, LinearObservation, SourceModel};

/// Samples per generator stream.
pub const BLOCK: usize = 1 << 16;

/// Generator identifier recorded with every result.
pub const GENERATOR: &str =
    "chacha20 (rand_chacha 0.9, seed_from_u64, one stream per 65536-sample block) + rand_distr 0.5 StandardNormal";

/// Width of the acceptance band, in standard errors.
pub const Z_BAND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub samples: usize,
    pub seed: u64,
    pub setting: Setting,
}

impl SimConfig {
    pub fn new(samples: usize, seed: u64, setting: Setting) -> Self {
        Self { samples, seed, setting }
    }

    fn validate(&self, channel: Option<&ChannelSpec>) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 samples, got {}", self.samples)));
        }
        match (self.setting, channel) {
            (Setting::Channel, None) => Err(Error::InvalidConfig("channel setting needs a channel".into())),
            (Setting::Simple | Setting::Compression, Some(_)) => Err(Error::InvalidConfig(format!(
                "{} setting takes no channel",
                self.setting
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub d_c_hat: f64,
    /// Inspector error using the analytic conditional-mean coefficient.
    pub d_p_hat: f64,
    /// Inspector error after an on-sample least-squares fit of `θ` on `Y`.
    pub d_p_hat_regression: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr_power: Option<f64>,
    /// `½ ln(2πe·d_p_hat)` in nats.
    pub entropy_hat: f64,
    pub stderr_dc: f64,
    /// Also used for the regression estimate, which shares the samples.
    pub stderr_dp: f64,
    pub samples: usize,
    pub seed: u64,
    pub generator: String,
}

/// Paired draws of `(X, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

/// One sample's four standard normals: source, private residual, encoder
/// noise, channel noise.
type Draw = [f64; 4];

fn block_rng(seed: u64, block: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn blocks(samples: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let count = samples.div_ceil(BLOCK);
    (0..count)
        .into_par_iter()
        .map(move |b| (b, BLOCK.min(samples - b * BLOCK)))
}

fn draws(rng: &mut ChaCha20Rng) -> Draw {
    let mut z = [0.0; 4];
    for v in &mut z {
        *v = StandardNormal.sample(rng);
    }
    z
}

struct Factor {
    sd: f64,
    rho_sd: f64,
    res_sd: f64,
}

impl Factor {
    fn new(model: &SourceModel) -> Self {
        let sd = model.sigma_x2().sqrt();
        Self {
            sd,
            rho_sd: sd * model.rho(),
            res_sd: sd * model.residual().sqrt(),
        }
    }

    fn pair(&self, z: &Draw) -> (f64, f64) {
        (self.sd * z[0], self.rho_sd * z[0] + self.res_sd * z[1])
    }
}

/// Draws `count` pairs from `N(0, σ_X²[[1, ρ], [ρ, r]])` by factoring the
/// covariance: `x = σz₁`, `θ = σ(ρz₁ + √(r−ρ²)z₂)`. These are the same pairs
/// [`simulate_policy`] uses for the same seed.
pub fn sample_joint(model: &SourceModel, count: usize, seed: u64) -> JointSamples {
    let f = Factor::new(model);
    let parts: Vec<Vec<(f64, f64)>> = blocks(count)
        .map(|(b, len)| {
            let mut rng = block_rng(seed, b);
            (0..len).map(|_| f.pair(&draws(&mut rng))).collect()
        })
        .collect();
    let (x, theta) = parts.into_iter().flatten().unzip();
    JointSamples { x, theta }
}

/// Running sums over one block; merged in block order.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    ec2: f64,
    ec4: f64,
    ep2: f64,
    ep4: f64,
    xx: f64,
    xy: f64,
    yy: f64,
    tt: f64,
    ty: f64,
    u2: f64,
    u4: f64,
    y2ec2: f64,
}

impl Sums {
    fn merge(mut self, o: &Sums) -> Sums {
        self.n += o.n;
        self.ec2 += o.ec2;
        self.ec4 += o.ec4;
        self.ep2 += o.ep2;
        self.ep4 += o.ep4;
        self.xx += o.xx;
        self.xy += o.xy;
        self.yy += o.yy;
        self.tt += o.tt;
        self.ty += o.ty;
        self.u2 += o.u2;
        self.u4 += o.u4;
        self.y2ec2 += o.y2ec2;
        self
    }
}

/// Mean of a non-negative per-sample quantity and its standard error, from
/// the sum of its values and of their squares.
fn mean_and_stderr(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

fn accumulate(
    model: &SourceModel,
    obs: &LinearObservation,
    decoder_gain: f64,
    samples: usize,
    seed: u64,
) -> Sums {
    let f = Factor::new(model);
    let enc_sd = obs.encoder_noise.sqrt();
    let ch_sd = obs.channel_noise.sqrt();
    let theta_gain = model.theta_gain(obs);
    let parts: Vec<Sums> = blocks(samples)
        .map(|(b, len)| {
            let mut rng = block_rng(seed, b);
            let mut s = Sums::default();
            for _ in 0..len {
                let z = draws(&mut rng);
                let (x, t) = f.pair(&z);
                let u = obs.beta * (x + obs.alpha * t + enc_sd * z[2]);
                let y = u + ch_sd * z[3];
                let ec = (x - decoder_gain * y).powi(2);
                let ep = (t - theta_gain * y).powi(2);
                s.n += 1.0;
                s.ec2 += ec;
                s.ec4 += ec * ec;
                s.ep2 += ep;
                s.ep4 += ep * ep;
                s.xx += x * x;
                s.xy += x * y;
                s.yy += y * y;
                s.tt += t * t;
                s.ty += t * y;
                s.u2 += u * u;
                s.u4 += u.powi(4);
                s.y2ec2 += y * y * ec;
            }
            s
        })
        .collect();
    parts.iter().fold(Sums::default(), Sums::merge)
}

fn observation(
    policy: &EncoderPolicy,
    channel: Option<&ChannelSpec>,
) -> LinearObservation {
    policy.observation(channel.map_or(0.0, ChannelSpec::sigma_z2))
}

/// Runs the signal chain `Y = β(X + αθ + S) + Z`, decodes `X̂ = κY` with the
/// given gain and estimates the resulting errors.
pub fn simulate_policy(
    model: &SourceModel,
    policy: &EncoderPolicy,
    channel: Option<&ChannelSpec>,
    decoder_gain: f64,
    config: &SimConfig,
) -> Result<SimResult> {
    config.validate(channel)?;
    policy.validate()?;
    if !decoder_gain.is_finite() {
        return Err(Error::NonFinite { name: "decoder_gain" });
    }
    let obs = observation(policy, channel);
    let s = accumulate(model, &obs, decoder_gain, config.samples, config.seed);
    let (d_c_hat, stderr_dc) = mean_and_stderr(s.ec2, s.ec4, s.n);
    let (d_p_hat, stderr_dp) = mean_and_stderr(s.ep2, s.ep4, s.n);
    let d_p_hat_regression = if s.yy > 0.0 {
        (s.tt - s.ty * s.ty / s.yy) / s.n
    } else {
        s.tt / s.n
    };
    let (power_hat, stderr_power) = if config.setting == Setting::Channel {
        let (p, e) = mean_and_stderr(s.u2, s.u4, s.n);
        (Some(p), Some(e))
    } else {
        (None, None)
    };
    Ok(SimResult {
        d_c_hat,
        d_p_hat,
        d_p_hat_regression,
        power_hat,
        stderr_power,
        entropy_hat: gaussian_conditional_entropy(d_p_hat)?,
        stderr_dc,
        stderr_dp,
        samples: config.samples,
        seed: config.seed,
        generator: GENERATOR.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub analytic_gain: f64,
    pub gains: Vec<f64>,
    /// Empirical `D_C` at each gain, on one shared set of samples.
    pub d_c_hat: Vec<f64>,
    pub argmin_gain: f64,
    pub distance_from_analytic: f64,
    /// Vertex of the empirical quadratic `D_C(k)`, i.e. the on-sample
    /// least-squares gain.
    pub fitted_vertex: f64,
    pub vertex_stderr: f64,
    /// Argmin within one grid spacing of the analytic gain, and the fitted
    /// vertex within the acceptance band of it.
    pub passed: bool,
}

/// Empirical `D_C(k) = mean (X − kY)²` over a grid of decoder gains.
pub fn decoder_optimality_probe(
    model: &SourceModel,
    policy: &EncoderPolicy,
    channel: Option<&ChannelSpec>,
    analytic_gain: f64,
    gain_grid: &[f64],
    config: &SimConfig,
) -> Result<ProbeReport> {
    config.validate(channel)?;
    policy.validate()?;
    if gain_grid.len() < 2 || gain_grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidConfig("gain grid needs >= 2 finite values".into()));
    }
    let scale = analytic_gain.abs().max(1.0);
    if !gain_grid.iter().any(|g| (g - analytic_gain).abs() <= 1e-12 * scale) {
        return Err(Error::InvalidConfig(format!("gain grid must contain {analytic_gain}")));
    }
    let mut gains = gain_grid.to_vec();
    gains.sort_by(f64::total_cmp);
    let obs = observation(policy, channel);
    let s = accumulate(model, &obs, analytic_gain, config.samples, config.seed);
    let d_c_hat: Vec<f64> = gains
        .iter()
        .map(|k| (s.xx - 2.0 * k * s.xy + k * k * s.yy) / s.n)
        .collect();
    let best = (0..gains.len())
        .min_by(|&a, &b| d_c_hat[a].total_cmp(&d_c_hat[b]))
        .expect("grid is non-empty");
    let argmin_gain = gains[best];
    let spacing = gains
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max);
    let (fitted_vertex, vertex_stderr) = if s.yy > 0.0 {
        // Delta method around the analytic gain: k̂ − κ = Σ y(x − κy) / Σ y².
        let mean_yy = s.yy / s.n;
        (s.xy / s.yy, (s.y2ec2 / s.n).sqrt() / (mean_yy * s.n.sqrt()))
    } else {
        (0.0, 0.0)
    };
    let distance_from_analytic = (argmin_gain - analytic_gain).abs();
    let passed = distance_from_analytic <= spacing * (1.0 + 1e-12)
        && (fitted_vertex - analytic_gain).abs() <= Z_BAND * vertex_stderr + 1e-12 * scale;
    Ok(ProbeReport {
        analytic_gain,
        gains,
        d_c_hat,
        argmin_gain,
        distance_from_analytic,
        fitted_vertex,
        vertex_stderr,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{noiseless_decoder_gain, solve_setting1, solve_setting3};

    fn m(s: f64, rho: f64, r: f64) -> SourceModel {
        SourceModel::new(s, rho, r).unwrap()
    }

    fn within(hat: f64, truth: f64, se: f64) -> bool {
        (hat - truth).abs() <= Z_BAND * se
    }

    #[test]
    fn degenerate_pair_is_proportional() {
        let s = sample_joint(&m(2.0, 0.5, 0.25), 1000, 3);
        assert!(s.x.iter().zip(&s.theta).all(|(x, t)| (t - 0.5 * x).abs() <= 1e-15 * x.abs()));
    }

    #[test]
    fn sample_covariance_matches_model() {
        let n = 1_000_000;
        let s = sample_joint(&m(1.0, 0.6, 1.0), n, 7);
        let nf = n as f64;
        let pairs: [(&[f64], &[f64], f64); 3] =
            [(&s.x, &s.x, 1.0), (&s.x, &s.theta, 0.6), (&s.theta, &s.theta, 1.0)];
        for (a, b, truth) in pairs {
            let prods: Vec<f64> = a.iter().zip(b).map(|(u, v)| u * v).collect();
            let mean = prods.iter().sum::<f64>() / nf;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            assert!(within(mean, truth, (var / nf).sqrt()), "{mean} vs {truth}");
        }
    }

    #[test]
    fn independent_pair_decorrelates() {
        let s = sample_joint(&m(1.0, 0.0, 1.0), 200_000, 1);
        let c: f64 = s.x.iter().zip(&s.theta).map(|(x, t)| x * t).sum::<f64>() / 200_000.0;
        assert!(c.abs() < 5.0 / 200_000f64.sqrt());
    }

    #[test]
    fn equilibrium_estimates_match_closed_form() {
        let model = m(1.0, 0.6, 1.0);
        let sol = solve_setting1(&model, 0.84).unwrap();
        let cfg = SimConfig::new(1_000_000, 11, Setting::Simple);
        let r = simulate_policy(&model, &sol.policy, None, sol.kappa, &cfg).unwrap();
        assert!(within(r.d_c_hat, 0.052_858_186_627_391_49, r.stderr_dc), "{r:?}");
        assert!(within(r.d_p_hat, 0.84, r.stderr_dp), "{r:?}");
        let combined = (2.0_f64).sqrt() * r.stderr_dp;
        assert!(within(r.d_p_hat, r.d_p_hat_regression, combined));
        assert_eq!(r.entropy_hat, gaussian_conditional_entropy(r.d_p_hat).unwrap());
        assert!(r.power_hat.is_none());
    }

    #[test]
    fn identity_chain_is_exact() {
        let model = m(1.3, 0.6, 1.0);
        let cfg = SimConfig::new(10_000, 2, Setting::Simple);
        let r = simulate_policy(&model, &EncoderPolicy::noiseless(0.0), None, 1.0, &cfg).unwrap();
        assert_eq!(r.d_c_hat, 0.0);
    }

    #[test]
    fn channel_power_meets_budget() {
        let model = m(1.0, 0.6, 1.0);
        let ch = ChannelSpec::new(1.0, 1.0).unwrap();
        let sol = solve_setting3(&model, 0.92, &ch).unwrap();
        let cfg = SimConfig::new(1_000_000, 5, Setting::Channel);
        let r = simulate_policy(&model, &sol.policy, Some(&ch), sol.kappa, &cfg).unwrap();
        assert!(within(r.power_hat.unwrap(), 1.0, r.stderr_power.unwrap()), "{r:?}");
        assert!(within(r.d_c_hat, sol.d_c, r.stderr_dc));
        assert!(within(r.d_p_hat, sol.d_p, r.stderr_dp));
    }

    #[test]
    fn results_are_deterministic() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = SimConfig::new(150_000, 99, Setting::Simple);
        let p = EncoderPolicy::noiseless(-0.3);
        let a = simulate_policy(&model, &p, None, 0.9, &cfg).unwrap();
        let b = simulate_policy(&model, &p, None, 0.9, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_policy(&model, &p, None, 0.9, &SimConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.d_c_hat, c.d_c_hat);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = SimConfig::new(3 * BLOCK + 17, 4, Setting::Simple);
        let p = EncoderPolicy::noiseless(-0.3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_policy(&model, &p, None, 0.9, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn stderr_halves_with_four_times_the_samples() {
        let model = m(1.0, 0.6, 1.0);
        let p = EncoderPolicy::noiseless(-0.25);
        let k = noiseless_decoder_gain(&model, -0.25);
        for seed in 0..4 {
            let small = simulate_policy(&model, &p, None, k, &SimConfig::new(50_000, seed, Setting::Simple)).unwrap();
            let big = simulate_policy(&model, &p, None, k, &SimConfig::new(200_000, seed, Setting::Simple)).unwrap();
            let ratio = big.stderr_dc / small.stderr_dc;
            assert!((0.5 / 1.5..=0.5 * 1.5).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn config_validation() {
        let model = m(1.0, 0.6, 1.0);
        let p = EncoderPolicy::noiseless(0.0);
        let ch = ChannelSpec::new(1.0, 1.0).unwrap();
        assert!(simulate_policy(&model, &p, None, 1.0, &SimConfig::new(1, 0, Setting::Simple)).is_err());
        assert!(simulate_policy(&model, &p, None, 1.0, &SimConfig::new(10, 0, Setting::Channel)).is_err());
        assert!(simulate_policy(&model, &p, Some(&ch), 1.0, &SimConfig::new(10, 0, Setting::Simple)).is_err());
    }

    #[test]
    fn probe_finds_analytic_gain() {
        let model = m(1.0, 0.6, 1.0);
        let sol = solve_setting1(&model, 0.84).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| sol.kappa * (0.8 + 0.04 * i as f64)).collect();
        let cfg = SimConfig::new(1_000_000, 8, Setting::Simple);
        let rep = decoder_optimality_probe(&model, &sol.policy, None, sol.kappa, &grid, &cfg).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.argmin_gain, grid[5]);
        let missing = [sol.kappa * 0.5, sol.kappa * 2.0];
        assert!(decoder_optimality_probe(&model, &sol.policy, None, sol.kappa, &missing, &cfg).is_err());
    }

    #[test]
    fn probe_prefers_mmse_gain_over_noiseless_gain_on_a_noisy_channel() {
        let model = m(1.0, 0.6, 1.0);
        let ch = ChannelSpec::new(1.0, 1.0).unwrap();
        let sol = solve_setting3(&model, 0.92, &ch).unwrap();
        let printed = noiseless_decoder_gain(&model, sol.policy.alpha);
        let cfg = SimConfig::new(1_000_000, 21, Setting::Channel);
        let rep =
            decoder_optimality_probe(&model, &sol.policy, Some(&ch), sol.kappa, &[printed, sol.kappa], &cfg).unwrap();
        let at = |k: f64| rep.d_c_hat[rep.gains.iter().position(|&g| g == k).unwrap()];
        assert!(at(sol.kappa) < at(printed));
        assert_eq!(rep.argmin_gain, sol.kappa);
    }
}
