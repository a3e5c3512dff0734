//! Python bindings for `privsit`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use privsit::curves::{self, CurvePoints};
use privsit::model::{gaussian_conditional_entropy, LinearObservation};
use privsit::montecarlo::{simulate_policy, SimConfig};
use privsit::oracle::{verify_equilibrium, OracleConfig};
use privsit::{ChannelSpec, EquilibriumSolution, Scenario};

fn err(e: privsit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "SourceModel", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySourceModel(privsit::SourceModel);

#[pymethods]
impl PySourceModel {
    #[new]
    fn new(sigma_x2: f64, rho: f64, r: f64) -> PyResult<Self> {
        privsit::SourceModel::new(sigma_x2, rho, r).map(Self).map_err(err)
    }

    #[getter]
    fn sigma_x2(&self) -> f64 {
        self.0.sigma_x2()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho()
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }

    /// `(dp_min, dp_max)`.
    fn privacy_bounds(&self) -> (f64, f64) {
        let b = self.0.privacy_bounds();
        (b.dp_min, b.dp_max)
    }

    /// `(D_C, D_P)` for `Y = β(X + αθ + S) + Z`.
    #[pyo3(signature = (alpha, beta = 1.0, encoder_noise = 0.0, channel_noise = 0.0))]
    fn mmse(&self, alpha: f64, beta: f64, encoder_noise: f64, channel_noise: f64) -> (f64, f64) {
        let e = self.0.mmse(&LinearObservation {
            alpha,
            beta,
            encoder_noise,
            channel_noise,
        });
        (e.d_c, e.d_p)
    }

    fn __repr__(&self) -> String {
        format!(
            "SourceModel(sigma_x2={}, rho={}, r={})",
            self.0.sigma_x2(),
            self.0.rho(),
            self.0.r()
        )
    }
}

#[pyclass(name = "Solution", frozen)]
struct PySolution(EquilibriumSolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn setting(&self) -> String {
        self.0.setting.to_string()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.policy.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.policy.beta
    }

    #[getter]
    fn noise_var(&self) -> f64 {
        self.0.policy.noise_var
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }

    #[getter]
    fn d_c(&self) -> f64 {
        self.0.d_c
    }

    #[getter]
    fn d_p(&self) -> f64 {
        self.0.d_p
    }

    #[getter]
    fn d_p_target(&self) -> f64 {
        self.0.d_p_target
    }

    #[getter]
    fn constraint_active(&self) -> bool {
        self.0.constraint_active
    }

    /// Test-channel rate in nats; `None` outside the compression setting.
    #[getter]
    fn rate(&self) -> Option<f64> {
        self.0.rate
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(setting={}, alpha={}, kappa={}, d_c={}, d_p={}, constraint_active={})",
            self.0.setting, self.0.policy.alpha, self.0.kappa, self.0.d_c, self.0.d_p, self.0.constraint_active
        )
    }
}

fn scenario(
    setting: &str,
    sigma_n2: Option<f64>,
    p_t: Option<f64>,
    sigma_z2: Option<f64>,
) -> PyResult<Scenario> {
    match (setting, sigma_n2, p_t, sigma_z2) {
        ("simple", None, None, None) => Ok(Scenario::Simple),
        ("compression", Some(n), None, None) => Ok(Scenario::Compression { sigma_n2: n }),
        ("channel", None, Some(p), Some(z)) => Ok(Scenario::Channel(ChannelSpec::new(p, z).map_err(err)?)),
        ("simple" | "compression" | "channel", ..) => Err(PyValueError::new_err(format!(
            "{setting}: compression takes sigma_n2, channel takes p_t and sigma_z2, simple takes neither"
        ))),
        _ => Err(PyValueError::new_err(format!("unknown setting '{setting}'"))),
    }
}

/// Closed-form equilibrium at privacy target `d_p`.
#[pyfunction]
#[pyo3(signature = (model, d_p, setting = "simple", sigma_n2 = None, p_t = None, sigma_z2 = None))]
fn solve(
    model: PySourceModel,
    d_p: f64,
    setting: &str,
    sigma_n2: Option<f64>,
    p_t: Option<f64>,
    sigma_z2: Option<f64>,
) -> PyResult<PySolution> {
    let sc = scenario(setting, sigma_n2, p_t, sigma_z2)?;
    privsit::solve(&model.0, &sc, d_p).map(PySolution).map_err(err)
}

/// `(d_p, d_c, alpha, kappa)` rows over the privacy range.
#[pyfunction]
#[pyo3(signature = (model, grid = 64, setting = "simple", p_t = None, sigma_z2 = None))]
fn tradeoff(
    model: PySourceModel,
    grid: usize,
    setting: &str,
    p_t: Option<f64>,
    sigma_z2: Option<f64>,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let sc = scenario(setting, None, p_t, sigma_z2)?;
    let curve = curves::sweep_privacy_distortion(&model.0, &sc, grid).map_err(err)?;
    match curve.points {
        CurvePoints::Privacy(p) => Ok(p.iter().map(|p| (p.d_p, p.d_c, p.alpha, p.kappa)).collect()),
        CurvePoints::Rate(_) => unreachable!("privacy sweep yields privacy points"),
    }
}

type RateRow = (f64, f64, f64, f64, f64);

/// `(sigma_n2, rate, d_c, d_p, alpha)` rows at privacy target `d_p`; rate in nats.
#[pyfunction]
fn rate_curve(model: PySourceModel, d_p: f64, sigma_n2: Vec<f64>) -> PyResult<Vec<RateRow>> {
    let curve = curves::sweep_rate_distortion(&model.0, d_p, &sigma_n2).map_err(err)?;
    match curve.points {
        CurvePoints::Rate(p) => Ok(p.iter().map(|p| (p.sigma_n2, p.rate, p.d_c, p.d_p, p.alpha)).collect()),
        CurvePoints::Privacy(_) => unreachable!("rate sweep yields rate points"),
    }
}

/// Oracle check of the closed form; returns a dict.
#[pyfunction]
#[pyo3(signature = (model, d_p, setting = "simple", sigma_n2 = None, p_t = None, sigma_z2 = None, grid = 401))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    model: PySourceModel,
    d_p: f64,
    setting: &str,
    sigma_n2: Option<f64>,
    p_t: Option<f64>,
    sigma_z2: Option<f64>,
    grid: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = scenario(setting, sigma_n2, p_t, sigma_z2)?;
    let cfg = OracleConfig::for_model(&model.0).with_grid(grid);
    let rep = verify_equilibrium(&model.0, &sc, d_p, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("passed", rep.passed)?;
    d.set_item("dc_gap", rep.dc_gap)?;
    d.set_item("tolerance", rep.tolerance)?;
    d.set_item("noise_at_optimum", rep.noise_at_optimum)?;
    d.set_item("oracle_alpha", rep.oracle_optimum.alpha)?;
    d.set_item("oracle_d_c", rep.oracle_optimum.d_c)?;
    d.set_item("closed_form", PySolution(rep.closed_form))?;
    Ok(d)
}

/// Monte Carlo run at the closed-form equilibrium; returns a dict.
#[pyfunction]
#[pyo3(signature = (model, d_p, samples = 1_000_000, seed = 1, setting = "simple", sigma_n2 = None, p_t = None, sigma_z2 = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    model: PySourceModel,
    d_p: f64,
    samples: usize,
    seed: u64,
    setting: &str,
    sigma_n2: Option<f64>,
    p_t: Option<f64>,
    sigma_z2: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = scenario(setting, sigma_n2, p_t, sigma_z2)?;
    let sol = privsit::solve(&model.0, &sc, d_p).map_err(err)?;
    let cfg = SimConfig::new(samples, seed, sc.setting());
    let sim = py
        .detach(|| simulate_policy(&model.0, &sol.policy, sc.channel(), sol.kappa, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("d_c_hat", sim.d_c_hat)?;
    d.set_item("d_p_hat", sim.d_p_hat)?;
    d.set_item("d_p_hat_regression", sim.d_p_hat_regression)?;
    d.set_item("stderr_dc", sim.stderr_dc)?;
    d.set_item("stderr_dp", sim.stderr_dp)?;
    d.set_item("entropy_hat", sim.entropy_hat)?;
    d.set_item("power_hat", sim.power_hat)?;
    d.set_item("generator", sim.generator)?;
    d.set_item("closed_form", PySolution(sol))?;
    Ok(d)
}

/// `½ ln(2πe·mmse)` in nats.
#[pyfunction]
fn conditional_entropy(mmse: f64) -> PyResult<f64> {
    gaussian_conditional_entropy(mmse).map_err(err)
}

#[pymodule]
fn pyprivsit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySourceModel>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(tradeoff, m)?)?;
    m.add_function(wrap_pyfunction!(rate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_entropy, m)?)?;
    Ok(())
}
