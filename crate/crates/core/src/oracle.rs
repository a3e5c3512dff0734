//! Brute-force verification of the closed-form equilibria.
//!
//! The search runs over the linear-Gaussian encoder family
//! `Y = β(X + αθ + S) + Z`, scanning `(α, Var S)` on a grid with a one-cell
//! feasibility slack and then refining with golden-section search. The
//! objective and constraint come from [`SourceModel::mmse`], the same
//! evaluator the solvers use; [`covariance_mmse`] re-derives those values
//! from an explicit covariance matrix so the formulas are checked as well.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, EquilibriumSolution, Scenario, Setting};
use crate::error::{Error, Result};
use crate::model::{LinearObservation, Mmse, SourceModel};

/// Oracle/closed-form agreement threshold, in units of `σ_X²`.
pub const ORACLE_TOL: f64 = 1e-5;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_GOLDEN_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub alpha_range: (f64, f64),
    /// Range for the added encoder noise variance (absolute units).
    pub noise_range: (f64, f64),
    /// Points per axis.
    pub grid: usize,
    /// Refinement tolerance on `α`; on the noise axis it is scaled by `σ_X²`.
    pub refine_tol: f64,
}

impl OracleConfig {
    /// `α ∈ [−2ρ/r − 0.5, 0.5]`, noise `∈ [0, 4σ_X²]`, 401 points per axis.
    pub fn for_model(model: &SourceModel) -> Self {
        Self {
            alpha_range: (2.0 * model.orthogonalizing_alpha() - 0.5, 0.5),
            noise_range: (0.0, 4.0 * model.sigma_x2()),
            grid: 401,
            refine_tol: 1e-7,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        let (a0, a1) = self.alpha_range;
        let (n0, n1) = self.noise_range;
        if !(a0.is_finite() && a1.is_finite() && a0 < a1) {
            return Err(Error::InvalidConfig(format!("degenerate alpha range {a0}..{a1}")));
        }
        if !(n0.is_finite() && n1.is_finite() && 0.0 <= n0 && n0 < n1) {
            return Err(Error::InvalidConfig(format!("degenerate noise range {n0}..{n1}")));
        }
        if self.grid < 3 {
            return Err(Error::InvalidConfig(format!("grid must be >= 3, got {}", self.grid)));
        }
        if self.refine_tol.is_nan() || self.refine_tol <= 0.0 {
            return Err(Error::InvalidConfig("refine_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptimum {
    pub alpha: f64,
    /// Added encoder noise variance. In the compression setting the test
    /// channel noise is given, so this axis is pinned at zero.
    pub noise_var: f64,
    pub d_c: f64,
    pub d_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub setting: Setting,
    pub d_p_target: f64,
    pub oracle_optimum: OracleOptimum,
    pub closed_form: EquilibriumSolution,
    /// Oracle `D_C` minus closed-form `D_C`.
    pub dc_gap: f64,
    pub noise_at_optimum: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Observation produced by encoder parameters `(α, added noise)` in a setting.
pub fn observation(
    model: &SourceModel,
    scenario: &Scenario,
    alpha: f64,
    noise: f64,
) -> LinearObservation {
    match scenario {
        Scenario::Simple => LinearObservation {
            alpha,
            beta: 1.0,
            encoder_noise: noise,
            channel_noise: 0.0,
        },
        Scenario::Compression { sigma_n2 } => LinearObservation {
            alpha,
            beta: 1.0,
            encoder_noise: sigma_n2 + noise,
            channel_noise: 0.0,
        },
        Scenario::Channel(ch) => LinearObservation {
            alpha,
            beta: equilibrium::power_normalizing_gain(model, alpha, noise, ch),
            encoder_noise: noise,
            channel_noise: ch.sigma_z2(),
        },
    }
}

/// Test channel `Y = X + αθ + N` whose noise is sized so the rate stays at
/// `rate` nats for every `α`.
pub fn rate_matched_observation(model: &SourceModel, rate: f64, alpha: f64) -> LinearObservation {
    LinearObservation {
        alpha,
        beta: 1.0,
        encoder_noise: model.sigma_x2() * model.mixed_power(alpha) / (2.0 * rate).exp_m1(),
        channel_noise: 0.0,
    }
}

/// Parameter space searched by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchSpace {
    /// `(α, added noise)` with the setting's own noise fixed.
    Encoder(Scenario),
    /// Compression at a fixed rate budget in nats; only `α` is searched and
    /// the test-channel noise follows from the rate.
    RateBudget(f64),
}

impl SearchSpace {
    fn observation(&self, model: &SourceModel, alpha: f64, noise: f64) -> LinearObservation {
        match self {
            SearchSpace::Encoder(s) => observation(model, s, alpha, noise),
            SearchSpace::RateBudget(rate) => rate_matched_observation(model, *rate, alpha),
        }
    }

    fn has_noise_axis(&self) -> bool {
        !matches!(
            self,
            SearchSpace::Encoder(Scenario::Compression { .. }) | SearchSpace::RateBudget(_)
        )
    }

    fn validate(&self) -> Result<()> {
        match self {
            SearchSpace::RateBudget(rate) if !(rate.is_finite() && *rate > 0.0) => {
                Err(Error::OutOfDomain(format!("rate budget must be finite and > 0, got {rate}")))
            }
            _ => Ok(()),
        }
    }
}

/// `D_C` and `D_P` from the 3×3 covariance of `(X, θ, Y)`, built as `M·Mᵀ`
/// for `(X, θ, Y) = M·w` with `w` standard normal, and conditioned on `Y`
/// by Schur complement.
pub fn covariance_mmse(model: &SourceModel, obs: &LinearObservation) -> Mmse {
    let sd = model.sigma_x2().sqrt();
    let res_sd = (model.r() - model.rho() * model.rho()).max(0.0).sqrt();
    let b = obs.beta;
    let rows: [[f64; 4]; 3] = [
        [sd, 0.0, 0.0, 0.0],
        [sd * model.rho(), sd * res_sd, 0.0, 0.0],
        [
            b * sd * (1.0 + obs.alpha * model.rho()),
            b * obs.alpha * sd * res_sd,
            b * obs.encoder_noise.sqrt(),
            obs.channel_noise.sqrt(),
        ],
    ];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = (0..4).map(|k| rows[i][k] * rows[j][k]).sum();
        }
    }
    if cov[2][2] <= 0.0 {
        return Mmse {
            d_c: cov[0][0],
            d_p: cov[1][1],
        };
    }
    Mmse {
        d_c: cov[0][0] - cov[0][2] * cov[0][2] / cov[2][2],
        d_p: cov[1][1] - cov[1][2] * cov[1][2] / cov[2][2],
    }
}

/// Ordering key: feasible points first, then smaller objective; infeasible
/// points rank by constraint violation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    violation: f64,
    objective: f64,
}

impl Key {
    fn better_than(&self, other: &Key) -> bool {
        match self.violation.total_cmp(&other.violation) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.objective < other.objective,
        }
    }
}

/// Golden-section minimization of a key-valued function on `[lo, hi]`. The
/// best point ever evaluated (endpoints included) is returned.
fn golden<F>(mut lo: f64, mut hi: f64, tol: f64, f: F) -> (f64, Key)
where
    F: Fn(f64) -> Key,
{
    let mut best = (lo, f(lo));
    let consider = |x: f64, k: Key, best: &mut (f64, Key)| {
        if k.better_than(&best.1) {
            *best = (x, k);
        }
    };
    let k_hi = f(hi);
    consider(hi, k_hi, &mut best);
    let mut c = hi - GOLDEN * (hi - lo);
    let mut d = lo + GOLDEN * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    for _ in 0..MAX_GOLDEN_ITERS {
        if hi - lo <= tol {
            break;
        }
        if fc.better_than(&fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN * (hi - lo);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN * (hi - lo);
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

/// Widens `[lo, hi]` outward while the neighbouring point beats the endpoint.
fn expand<F>(mut lo: f64, mut hi: f64, step: f64, bounds: (f64, f64), f: &F) -> (f64, f64)
where
    F: Fn(f64) -> Key,
{
    let mut w = step;
    while lo > bounds.0 {
        let next = (lo - w).max(bounds.0);
        if !f(next).better_than(&f(lo)) {
            break;
        }
        lo = next;
        w *= 2.0;
    }
    let mut w = step;
    while hi < bounds.1 {
        let next = (hi + w).min(bounds.1);
        if !f(next).better_than(&f(hi)) {
            break;
        }
        hi = next;
        w *= 2.0;
    }
    (lo, hi)
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / last)
        .collect()
}

struct Search<'a, F> {
    config: &'a OracleConfig,
    scale: f64,
    noise_axis: bool,
    key: F,
}

impl<F> Search<'_, F>
where
    F: Fn(f64, f64) -> Key + Sync,
{
    /// Best `α` at fixed noise near `alpha0`.
    fn inner(&self, noise: f64, alpha0: f64) -> (f64, Key) {
        let cfg = self.config;
        let h = (cfg.alpha_range.1 - cfg.alpha_range.0) / (cfg.grid - 1) as f64;
        let f = |a: f64| (self.key)(a, noise);
        let lo = (alpha0 - 2.0 * h).max(cfg.alpha_range.0);
        let hi = (alpha0 + 2.0 * h).min(cfg.alpha_range.1);
        let (lo, hi) = expand(lo, hi, h, cfg.alpha_range, &f);
        golden(lo, hi, cfg.refine_tol, f)
    }

    /// Nested refinement: golden section over the noise variance, each
    /// evaluation minimizing over `α` at that noise. Alternating single
    /// coordinates stalls on an active constraint, where no single-axis move
    /// stays feasible and improves.
    fn refine(&self, alpha0: f64, noise0: f64) -> (f64, f64, Key) {
        if !self.noise_axis {
            let (a, k) = self.inner(noise0, alpha0);
            return (a, noise0, k);
        }
        let cfg = self.config;
        let h = (cfg.noise_range.1 - cfg.noise_range.0) / (cfg.grid - 1) as f64;
        let f = |n: f64| self.inner(n, alpha0).1;
        let lo = (noise0 - h).max(cfg.noise_range.0);
        let hi = (noise0 + h).min(cfg.noise_range.1);
        let (lo, hi) = expand(lo, hi, h, cfg.noise_range, &f);
        let (n, _) = golden(lo, hi, cfg.refine_tol * self.scale, f);
        let (a, k) = self.inner(n, alpha0);
        (a, n, k)
    }

    fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let alphas = axis(self.config.alpha_range, self.config.grid);
        let noises = if self.noise_axis {
            axis(self.config.noise_range, self.config.grid)
        } else {
            vec![0.0]
        };
        (alphas, noises)
    }
}

/// Minimum-distortion encoder meeting `D_P ≥ target`, found by exhaustive
/// grid search and golden-section refinement.
///
/// In the compression setting the test-channel noise is held at `σ_N²`, so
/// `α > 0` can lower `D_C` by spending more rate; [`grid_search_space`] with
/// [`SearchSpace::RateBudget`] compares encoders at equal rate instead.
pub fn grid_search(
    model: &SourceModel,
    scenario: &Scenario,
    d_p_target: f64,
    config: &OracleConfig,
) -> Result<OracleOptimum> {
    grid_search_space(model, &SearchSpace::Encoder(*scenario), d_p_target, config)
}

pub fn grid_search_space(
    model: &SourceModel,
    space: &SearchSpace,
    d_p_target: f64,
    config: &OracleConfig,
) -> Result<OracleOptimum> {
    config.validate()?;
    space.validate()?;
    let s2 = model.sigma_x2();
    let max = model.privacy_bounds().dp_max;
    if d_p_target.is_nan() || d_p_target > max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTarget { target: d_p_target, max });
    }
    let feas_tol = 1e-12 * s2 * model.r().max(1.0);
    let eval = |a: f64, n: f64| model.mmse(&space.observation(model, a, n));
    let search = Search {
        config,
        scale: s2,
        noise_axis: space.has_noise_axis(),
        key: |a: f64, n: f64| {
            let e = eval(a, n);
            Key {
                violation: (d_p_target - feas_tol - e.d_p).max(0.0),
                objective: e.d_c,
            }
        },
    };

    let (alphas, noises) = search.grid();
    let table: Vec<Vec<Mmse>> = alphas
        .par_iter()
        .map(|&a| noises.iter().map(|&n| eval(a, n)).collect())
        .collect();
    let (na, nn) = (alphas.len(), noises.len());
    let mut best: Option<(usize, usize)> = None;
    for i in 0..na {
        for j in 0..nn {
            let mut reach = table[i][j].d_p;
            if i > 0 {
                reach = reach.max(table[i - 1][j].d_p);
            }
            if i + 1 < na {
                reach = reach.max(table[i + 1][j].d_p);
            }
            if j > 0 {
                reach = reach.max(table[i][j - 1].d_p);
            }
            if j + 1 < nn {
                reach = reach.max(table[i][j + 1].d_p);
            }
            if reach < d_p_target - feas_tol {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj)) => {
                    let (a, b) = (table[i][j].d_c, table[bi][bj].d_c);
                    a.total_cmp(&b)
                        .then(alphas[i].total_cmp(&alphas[bi]))
                        .then(noises[j].total_cmp(&noises[bj]))
                        .is_lt()
                }
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    let (bi, bj) = best.ok_or(Error::EmptyFeasibleSet(d_p_target))?;
    let (alpha, noise, key) = search.refine(alphas[bi], noises[bj]);
    if key.violation > 0.0 {
        return Err(Error::EmptyFeasibleSet(d_p_target));
    }
    let obs = space.observation(model, alpha, noise);
    let e = model.mmse(&obs);
    Ok(OracleOptimum {
        alpha,
        noise_var: match space {
            SearchSpace::RateBudget(_) => obs.encoder_noise,
            SearchSpace::Encoder(_) => noise,
        },
        d_c: e.d_c,
        d_p: e.d_p,
    })
}

/// Compares a candidate solution against the oracle optimum. Compression
/// candidates are compared at their own rate.
pub fn verify_solution(
    model: &SourceModel,
    scenario: &Scenario,
    candidate: &EquilibriumSolution,
    config: &OracleConfig,
) -> Result<VerificationReport> {
    let target = candidate.d_p_target;
    let space = match scenario {
        Scenario::Compression { sigma_n2 } => SearchSpace::RateBudget(
            candidate
                .rate
                .unwrap_or_else(|| equilibrium::compression_rate(model, candidate.policy.alpha, *sigma_n2)),
        ),
        s => SearchSpace::Encoder(*s),
    };
    let opt = grid_search_space(model, &space, target, config)?;
    let s2 = model.sigma_x2();
    let dc_gap = opt.d_c - candidate.d_c;
    // Distortion change produced by an α step of the refinement tolerance.
    let step = config.refine_tol;
    let extra = if space.has_noise_axis() { opt.noise_var } else { 0.0 };
    let dc = |x: f64| model.mmse(&space.observation(model, x, extra)).d_c;
    let refine_bound = 10.0 * (dc(opt.alpha + step) - dc(opt.alpha - step)).abs();
    let tolerance = (ORACLE_TOL * s2).max(refine_bound);
    let noise_ok = !space.has_noise_axis() || opt.noise_var <= ORACLE_TOL * s2;
    Ok(VerificationReport {
        setting: scenario.setting(),
        d_p_target: target,
        oracle_optimum: opt,
        closed_form: *candidate,
        dc_gap,
        noise_at_optimum: opt.noise_var,
        tolerance,
        passed: dc_gap.abs() <= tolerance && noise_ok,
    })
}

/// Solves in closed form and checks the result against the oracle.
pub fn verify_equilibrium(
    model: &SourceModel,
    scenario: &Scenario,
    d_p_target: f64,
    config: &OracleConfig,
) -> Result<VerificationReport> {
    let solution = equilibrium::solve(model, scenario, d_p_target)?;
    verify_solution(model, scenario, &solution, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMargin {
    /// Smallest `D_C` excess over the noiseless optimum.
    pub min_margin: f64,
    /// Noise variance where it occurs.
    pub at_noise: f64,
}

/// For each noise variance `≥ 0.01·σ_X²` on the oracle noise axis, the best
/// encoder meeting the same privacy target with that noise (found by
/// bisection on `α`) is compared to the noiseless closed form.
pub fn noise_suboptimality_margin(
    model: &SourceModel,
    scenario: &Scenario,
    d_p_target: f64,
    config: &OracleConfig,
) -> Result<NoiseMargin> {
    config.validate()?;
    if matches!(scenario, Scenario::Compression { .. }) {
        return Err(Error::InvalidConfig("encoder noise is fixed in the compression setting".into()));
    }
    let reference = equilibrium::solve(model, scenario, d_p_target)?;
    let s2 = model.sigma_x2();
    let eval = |a: f64, n: f64| model.mmse(&observation(model, scenario, a, n));
    let noises: Vec<f64> = axis(config.noise_range, config.grid)
        .into_iter()
        .filter(|&n| n >= 0.01 * s2)
        .collect();
    let margins: Vec<(f64, f64)> = noises
        .par_iter()
        .map(|&n| {
            // D_P(·, n) peaks at −ρ/r and decreases towards 0.
            let (mut lo, mut hi) = (model.orthogonalizing_alpha(), 0.0);
            let alpha = if eval(hi, n).d_p >= d_p_target {
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if eval(mid, n).d_p >= d_p_target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            (eval(alpha, n).d_c - reference.d_c, n)
        })
        .collect();
    let (min_margin, at_noise) = margins
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InvalidConfig("noise range has no point >= 0.01·σ²".into()))?;
    Ok(NoiseMargin { min_margin, at_noise })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Completed,
    /// `ρ = 0`: nothing to trade off.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianPoint {
    pub lambda: f64,
    pub alpha: f64,
    pub noise_var: f64,
    pub d_p: f64,
    pub d_c: f64,
    /// Closed-form frontier distortion at the same `D_P`.
    pub frontier_d_c: f64,
    pub frontier_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianScan {
    pub status: ScanStatus,
    pub points: Vec<LagrangianPoint>,
}

/// Minimizes `J = D_C − λ·D_P` over `(α, σ_S²)` in the noiseless setting for
/// each `λ`, and places each minimizer against the constraint-sweep frontier.
pub fn lagrangian_scan(
    model: &SourceModel,
    lambdas: &[f64],
    config: &OracleConfig,
) -> Result<LagrangianScan> {
    config.validate()?;
    if model.rho() == 0.0 {
        return Ok(LagrangianScan {
            status: ScanStatus::Skipped,
            points: Vec::new(),
        });
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::OutOfDomain(format!("lambda must be finite and >= 0, got {bad}")));
    }
    let scenario = Scenario::Simple;
    let eval = |a: f64, n: f64| model.mmse(&observation(model, &scenario, a, n));
    let bounds = model.privacy_bounds();
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let search = Search {
                config,
                scale: model.sigma_x2(),
                noise_axis: true,
                key: |a: f64, n: f64| {
                    let e = eval(a, n);
                    Key {
                        violation: 0.0,
                        objective: e.d_c - lambda * e.d_p,
                    }
                },
            };
            let (alphas, noises) = search.grid();
            let cells: Vec<(f64, f64, f64)> = alphas
                .par_iter()
                .flat_map_iter(|&a| {
                    let key = &search.key;
                    noises.iter().map(move |&n| (key(a, n).objective, a, n))
                })
                .collect();
            let &(_, a0, n0) = cells
                .iter()
                .min_by(|x, y| {
                    x.0.total_cmp(&y.0)
                        .then(x.1.total_cmp(&y.1))
                        .then(x.2.total_cmp(&y.2))
                })
                .expect("grid is non-empty");
            let (alpha, noise_var, _) = search.refine(a0, n0);
            let e = eval(alpha, noise_var);
            let target = e.d_p.clamp(bounds.dp_min, bounds.dp_max);
            let frontier_d_c = equilibrium::solve_setting1(model, target)?.d_c;
            Ok(LagrangianPoint {
                lambda,
                alpha,
                noise_var,
                d_p: e.d_p,
                d_c: e.d_c,
                frontier_d_c,
                frontier_gap: e.d_c - frontier_d_c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LagrangianScan {
        status: ScanStatus::Completed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_setting1, ChannelSpec};

    fn m(s: f64, rho: f64, r: f64) -> SourceModel {
        SourceModel::new(s, rho, r).unwrap()
    }

    #[test]
    fn covariance_route_matches_formulas() {
        let model = m(1.7, 0.4, 0.9);
        for &(alpha, beta, enc, chan) in &[
            (0.0, 1.0, 0.0, 0.0),
            (-0.3, 1.0, 0.5, 0.0),
            (-0.8, 2.0, 0.1, 1.3),
            (0.4, 0.5, 0.0, 2.0),
        ] {
            let obs = LinearObservation { alpha, beta, encoder_noise: enc, channel_noise: chan };
            let a = model.mmse(&obs);
            let b = covariance_mmse(&model, &obs);
            assert!((a.d_c - b.d_c).abs() < 1e-12, "{a:?} {b:?}");
            assert!((a.d_p - b.d_p).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn oracle_reproduces_reference_point() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let opt = grid_search(&model, &Scenario::Simple, 0.84, &cfg).unwrap();
        assert!((opt.alpha + 0.250_851_375_622_412_2).abs() < 1e-5, "{opt:?}");
        assert!(opt.noise_var < 1e-5);
        assert!((opt.d_c - 0.052_858_186_627_391_49).abs() < 1e-5);
    }

    #[test]
    fn oracle_endpoints() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let top = grid_search(&model, &Scenario::Simple, 1.0, &cfg).unwrap();
        assert!((top.alpha + 0.6).abs() < 1e-5, "{top:?}");
        assert!(top.noise_var < 1e-5, "{top:?}");
        let bottom = grid_search(&model, &Scenario::Simple, 0.64, &cfg).unwrap();
        assert!(bottom.alpha.abs() < 1e-5 && bottom.d_c < 1e-9, "{bottom:?}");
    }

    #[test]
    fn wrong_root_is_rejected() {
        let model = m(1.0, 0.6, 1.0);
        let good = solve_setting1(&model, 0.84).unwrap();
        let (_, other) = equilibrium::solve_alpha_quadratic(&model, 0.84, 0.0).unwrap();
        let (dc, dp) = equilibrium::evaluate_setting1(&model, &equilibrium::EncoderPolicy::noiseless(other)).unwrap();
        let planted = EquilibriumSolution {
            policy: equilibrium::EncoderPolicy::noiseless(other),
            d_c: dc,
            d_p: dp,
            ..good
        };
        let cfg = OracleConfig::for_model(&model);
        let report = verify_solution(&model, &Scenario::Simple, &planted, &cfg).unwrap();
        assert!(!report.passed);
        assert!((report.dc_gap.abs() - (dc - good.d_c)).abs() < 1e-5, "{report:?}");
    }

    #[test]
    fn loose_compression_target_is_inactive() {
        let model = m(1.0, 0.5, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let r = verify_equilibrium(&model, &Scenario::Compression { sigma_n2: 50.0 }, 0.8, &cfg).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(!r.closed_form.constraint_active);
        assert_eq!(r.closed_form.policy.alpha, 0.0);
        assert!(r.oracle_optimum.alpha.abs() < 1e-5);
    }

    #[test]
    fn fixed_noise_search_buys_rate_with_positive_alpha() {
        let model = m(1.0, 0.5, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let sol = equilibrium::solve(&model, &Scenario::Compression { sigma_n2: 50.0 }, 0.8).unwrap();
        let opt = grid_search(&model, &Scenario::Compression { sigma_n2: 50.0 }, 0.8, &cfg).unwrap();
        assert!(opt.alpha > 0.0 && opt.d_c < sol.d_c);
        let spent = equilibrium::compression_rate(&model, opt.alpha, 50.0);
        assert!(spent > sol.rate.unwrap());
    }

    #[test]
    fn compression_active_constraint_verifies() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let r = verify_equilibrium(&model, &Scenario::Compression { sigma_n2: 0.1 }, 0.9, &cfg).unwrap();
        assert!(r.closed_form.constraint_active);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn channel_reduction_example_verifies() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model);
        let ch = Scenario::Channel(ChannelSpec::new(1.0, 1.0).unwrap());
        let r = verify_equilibrium(&model, &ch, 0.92, &cfg).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn noise_is_strictly_worse() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model).with_grid(101);
        for target in [0.7, 0.84, 0.95] {
            let margin = noise_suboptimality_margin(&model, &Scenario::Simple, target, &cfg).unwrap();
            assert!(margin.min_margin > 0.0, "{target}: {margin:?}");
        }
    }

    #[test]
    fn lagrangian_zero_weight_reveals_x() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model).with_grid(101);
        let scan = lagrangian_scan(&model, &[0.0], &cfg).unwrap();
        let p = scan.points[0];
        assert!(p.alpha.abs() < 1e-5 && p.d_c < 1e-9, "{p:?}");
        assert!(p.noise_var < 1e-5);
    }

    #[test]
    fn lagrangian_minimizer_has_slope_lambda() {
        let model = m(1.0, 0.6, 1.0);
        let cfg = OracleConfig::for_model(&model).with_grid(201);
        let lambda = 1.0 / 0.36;
        let scan = lagrangian_scan(&model, &[lambda], &cfg).unwrap();
        let p = scan.points[0];
        assert!(p.noise_var < 1e-5);
        assert!(p.frontier_gap.abs() < 1e-4);
        // The minimizer sits where the frontier slope equals λ, short of the
        // max-privacy end.
        let slope = equilibrium::frontier_slope(&model, p.alpha);
        assert!((slope - lambda).abs() < 1e-3 * lambda, "{slope} vs {lambda}");
        assert!(p.alpha > -0.6 + 0.05);
    }

    #[test]
    fn lagrangian_scan_skips_independent_source() {
        let model = m(1.0, 0.0, 1.0);
        let scan = lagrangian_scan(&model, &[0.5], &OracleConfig::for_model(&model)).unwrap();
        assert_eq!(scan.status, ScanStatus::Skipped);
    }

    #[test]
    fn config_validation() {
        let model = m(1.0, 0.6, 1.0);
        let mut cfg = OracleConfig::for_model(&model);
        cfg.grid = 2;
        assert!(grid_search(&model, &Scenario::Simple, 0.8, &cfg).is_err());
        let mut cfg = OracleConfig::for_model(&model);
        cfg.alpha_range = (0.0, 0.0);
        assert!(grid_search(&model, &Scenario::Simple, 0.8, &cfg).is_err());
    }
}
