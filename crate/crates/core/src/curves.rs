//! Trade-off sweeps and discrete shape checks on the resulting curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, Scenario, Setting};
use crate::error::{Error, Result};
use crate::model::SourceModel;

/// Default tolerance for discrete shape checks, in units of `σ_X²`.
pub const SHAPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPoint {
    pub d_p: f64,
    pub d_c: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub constraint_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub sigma_n2: f64,
    /// Nats.
    pub rate: f64,
    pub d_c: f64,
    pub d_p: f64,
    pub alpha: f64,
    pub constraint_active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurvePoints {
    /// `(D_P, D_C)` samples ordered by `D_P`.
    Privacy(Vec<PrivacyPoint>),
    /// `(σ_N², R, D_C)` samples ordered by `σ_N²` at a fixed privacy target.
    Rate(Vec<RatePoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub scenario: Scenario,
    pub model: SourceModel,
    pub points: CurvePoints,
}

impl TradeoffCurve {
    pub fn setting(&self) -> Setting {
        self.scenario.setting()
    }

    pub fn len(&self) -> usize {
        match &self.points {
            CurvePoints::Privacy(p) => p.len(),
            CurvePoints::Rate(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(x, y)` pairs: `(D_P, D_C)` for privacy curves, `(σ_N², D_C)` for
    /// rate sweeps.
    pub fn xy(&self) -> Vec<(f64, f64)> {
        match &self.points {
            CurvePoints::Privacy(p) => p.iter().map(|p| (p.d_p, p.d_c)).collect(),
            CurvePoints::Rate(p) => p.iter().map(|p| (p.sigma_n2, p.d_c)).collect(),
        }
    }

    pub fn privacy_points(&self) -> Option<&[PrivacyPoint]> {
        match &self.points {
            CurvePoints::Privacy(p) => Some(p),
            CurvePoints::Rate(_) => None,
        }
    }

    pub fn rate_points(&self) -> Option<&[RatePoint]> {
        match &self.points {
            CurvePoints::Rate(p) => Some(p),
            CurvePoints::Privacy(_) => None,
        }
    }
}

/// Privacy targets spaced uniformly over `[floor, dp_max]`, endpoints exact.
/// A collapsed range yields one target.
pub fn privacy_grid(model: &SourceModel, scenario: &Scenario, grid: usize) -> Result<Vec<f64>> {
    if grid < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: grid });
    }
    let lo = scenario.privacy_floor(model);
    let hi = model.privacy_bounds().dp_max;
    if hi <= lo {
        // ρ = 0: the whole range is the single point Var(θ).
        return Ok(vec![hi]);
    }
    let last = grid - 1;
    Ok((0..grid)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => lo + (hi - lo) * i as f64 / last as f64,
        })
        .collect())
}

/// Solves the equilibrium on a uniform grid of privacy targets spanning the
/// setting's floor to `Var(θ)`.
pub fn sweep_privacy_distortion(
    model: &SourceModel,
    scenario: &Scenario,
    grid: usize,
) -> Result<TradeoffCurve> {
    let targets = privacy_grid(model, scenario, grid)?;
    let points = targets
        .par_iter()
        .map(|&t| {
            let s = equilibrium::solve(model, scenario, t)?;
            Ok(PrivacyPoint {
                d_p: s.d_p,
                d_c: s.d_c,
                alpha: s.policy.alpha + 0.0,
                kappa: s.kappa,
                constraint_active: s.constraint_active,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffCurve {
        scenario: *scenario,
        model: *model,
        points: CurvePoints::Privacy(points),
    })
}

/// Compression equilibria at a fixed privacy target over a set of test-channel
/// noise variances. The grid is sorted; duplicates are rejected.
pub fn sweep_rate_distortion(
    model: &SourceModel,
    d_p_target: f64,
    noise_grid: &[f64],
) -> Result<TradeoffCurve> {
    if let Some(&bad) = noise_grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InfiniteRate(bad));
    }
    let mut grid = noise_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if grid.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("duplicate noise variance in sweep".into()));
    }
    let points = grid
        .par_iter()
        .map(|&n| {
            let s = equilibrium::solve_setting2(model, d_p_target, n)?;
            Ok(RatePoint {
                sigma_n2: n,
                rate: s.rate.unwrap_or(f64::NAN),
                d_c: s.d_c,
                d_p: s.d_p,
                alpha: s.policy.alpha + 0.0,
                constraint_active: s.constraint_active,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma_n2 = grid.first().copied().unwrap_or(1.0);
    Ok(TradeoffCurve {
        scenario: Scenario::Compression { sigma_n2 },
        model: *model,
        points: CurvePoints::Rate(points),
    })
}

/// Test-channel noise variance whose equilibrium spends exactly `rate` nats
/// at the given privacy target. Bisection in `ln σ_N²`.
pub fn noise_for_rate(model: &SourceModel, d_p_target: f64, rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::OutOfDomain(format!("rate must be positive, got {rate}")));
    }
    let s2 = model.sigma_x2();
    let rate_at = |ln_n: f64| -> Result<f64> {
        let s = equilibrium::solve_setting2(model, d_p_target, s2 * ln_n.exp())?;
        Ok(s.rate.unwrap_or(f64::NAN))
    };
    let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
    if rate_at(lo)? < rate {
        return Err(Error::OutOfDomain(format!("rate {rate} above the sweep range")));
    }
    if rate_at(hi)? > rate {
        return Err(Error::OutOfDomain(format!("rate {rate} below the sweep range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(s2 * (0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Concave,
    Convex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub curvature: Curvature,
    pub tolerance: f64,
    pub monotone: bool,
    /// Largest decrease between consecutive samples (0 if monotone).
    pub max_decrease: f64,
    /// Index of the first point where `y` decreases.
    pub decrease_index: Option<usize>,
    /// Largest second difference of the wrong sign.
    pub max_curvature_violation: f64,
    /// Interior index where the worst curvature violation occurs.
    pub curvature_index: Option<usize>,
    pub passed: bool,
}

/// Non-decreasing `y` and a one-signed discrete second difference. Second
/// differences are scaled to the left spacing so that on a uniform grid they
/// reduce to `y[i+1] − 2y[i] + y[i−1]`.
pub fn check_shape(curve: &TradeoffCurve, curvature: Curvature, tol: f64) -> Result<ShapeReport> {
    check_shape_xy(&curve.xy(), curvature, tol)
}

pub fn check_shape_xy(xy: &[(f64, f64)], curvature: Curvature, tol: f64) -> Result<ShapeReport> {
    if xy.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: xy.len() });
    }
    let mut max_decrease = 0.0;
    let mut decrease_index = None;
    for (i, w) in xy.windows(2).enumerate() {
        let drop = w[0].1 - w[1].1;
        if drop > tol && decrease_index.is_none() {
            decrease_index = Some(i + 1);
        }
        if drop > max_decrease {
            max_decrease = drop;
        }
    }
    let mut worst = 0.0;
    let mut curvature_index = None;
    for (i, w) in xy.windows(3).enumerate() {
        let (h0, h1) = (w[1].0 - w[0].0, w[2].0 - w[1].0);
        if h0 <= 0.0 || h1 <= 0.0 {
            return Err(Error::InvalidConfig("curve abscissae must be strictly increasing".into()));
        }
        let second = (w[2].1 - w[1].1) * h0 / h1 - (w[1].1 - w[0].1);
        let violation = match curvature {
            Curvature::Concave => second,
            Curvature::Convex => -second,
        };
        if violation > worst {
            worst = violation;
            curvature_index = Some(i + 1);
        }
    }
    let monotone = decrease_index.is_none();
    let passed = monotone && worst <= tol;
    Ok(ShapeReport {
        curvature,
        tolerance: tol,
        monotone,
        max_decrease,
        decrease_index,
        max_curvature_violation: worst,
        curvature_index: if worst > tol { curvature_index } else { None },
        passed,
    })
}

/// Monotone, concave `D_C(D_P)` at tolerance `1e-9·σ_X²`.
pub fn check_concavity(curve: &TradeoffCurve) -> Result<ShapeReport> {
    check_shape(curve, Curvature::Concave, SHAPE_TOL * curve.model.sigma_x2())
}

/// Monotone, convex `D_C(D_P)` at tolerance `1e-9·σ_X²`.
pub fn check_convexity(curve: &TradeoffCurve) -> Result<ShapeReport> {
    check_shape(curve, Curvature::Convex, SHAPE_TOL * curve.model.sigma_x2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeStatus {
    Checked,
    /// `ρ = 0`: the multiplier bound `1/ρ²` is undefined.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub status: SlopeStatus,
    /// `(D_P, dD_C/dD_P)` at interior points by central differences.
    pub slopes: Vec<(f64, f64)>,
    pub lower: f64,
    pub upper: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    /// Number of interior slopes outside `[lower, upper]` beyond tolerance.
    pub out_of_bounds: usize,
    pub passed: bool,
}

/// Central-difference slopes of a noiseless privacy curve compared with the
/// multiplier range `[0, 1/ρ²]`.
pub fn lagrangian_slope_check(curve: &TradeoffCurve, model: &SourceModel) -> Result<SlopeReport> {
    if curve.setting() != Setting::Simple || curve.privacy_points().is_none() {
        return Err(Error::InvalidConfig("slope check needs a simple-setting privacy curve".into()));
    }
    let xy = curve.xy();
    if xy.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: xy.len() });
    }
    let slopes: Vec<(f64, f64)> = xy
        .windows(3)
        .map(|w| (w[1].0, (w[2].1 - w[0].1) / (w[2].0 - w[0].0)))
        .collect();
    let min_slope = slopes.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let max_slope = slopes.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if model.rho() == 0.0 {
        return Ok(SlopeReport {
            status: SlopeStatus::Degenerate,
            slopes,
            lower: 0.0,
            upper: f64::INFINITY,
            min_slope,
            max_slope,
            out_of_bounds: 0,
            passed: true,
        });
    }
    let upper = 1.0 / (model.rho() * model.rho());
    // Rounding in a difference quotient of values accurate to ~1e-15·σ².
    let h = xy.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * model.sigma_x2() / h + 1e-9 * upper;
    let out_of_bounds = slopes
        .iter()
        .filter(|(_, s)| *s < -tol || *s > upper + tol)
        .count();
    Ok(SlopeReport {
        status: SlopeStatus::Checked,
        slopes,
        lower: 0.0,
        upper,
        min_slope,
        max_slope,
        out_of_bounds,
        passed: out_of_bounds == 0,
    })
}
