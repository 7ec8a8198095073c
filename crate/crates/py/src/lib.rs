//! Python bindings over the core types and operations: SPD matrices and
//! the F-distribution kernels, NIW evidence and its Student-t predictive,
//! isotonic recalibration and prediction sets, and the unicycle/fusion
//! planner primitives.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stairnav::calibrate;
use stairnav::evidential;
use stairnav::numerics;
use stairnav::planner;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Symmetric positive definite matrix held by its lower Cholesky factor.
#[pyclass(name = "SpdMatrix", from_py_object)]
#[derive(Clone)]
struct PySpdMatrix {
    inner: numerics::SpdMatrix,
}

#[pymethods]
impl PySpdMatrix {
    /// Factor a dense symmetric matrix given as nested rows.
    #[new]
    fn new(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = matrix.len();
        let flat: Vec<f64> = matrix.into_iter().flatten().collect();
        Ok(Self {
            inner: numerics::SpdMatrix::cholesky(&flat, dim).map_err(err)?,
        })
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        Self {
            inner: numerics::SpdMatrix::identity(dim),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn lower_chol(&self) -> Vec<Vec<f64>> {
        rows(self.inner.lower_chol(), self.inner.dim())
    }

    fn dense(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.reconstruct(), self.inner.dim())
    }

    fn solve(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.solve(&v).map_err(err)
    }

    fn log_det(&self) -> f64 {
        self.inner.log_det()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn __repr__(&self) -> String {
        format!("SpdMatrix(dim={})", self.inner.dim())
    }
}

fn rows(flat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    flat.chunks(dim).map(|r| r.to_vec()).collect()
}

/// Normal-Inverse-Wishart evidence over one waypoint.
#[pyclass(name = "NIWParams", from_py_object)]
#[derive(Clone)]
struct PyNIWParams {
    inner: evidential::NIWParams,
}

#[pymethods]
impl PyNIWParams {
    #[new]
    fn new(mu: Vec<f64>, kappa: f64, psi: PySpdMatrix, nu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: evidential::NIWParams::new(mu, kappa, psi.inner, nu).map_err(err)?,
        })
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().to_vec()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    /// The induced Student-t posterior predictive.
    fn predictive(&self) -> PyResult<PyStudentT> {
        Ok(PyStudentT {
            inner: evidential::predictive(&self.inner).map_err(err)?,
        })
    }

    fn nll(&self, y: Vec<f64>) -> PyResult<f64> {
        evidential::nll(&self.inner, &y).map_err(err)
    }

    fn evidential_loss(&self, y: Vec<f64>, lambda_reg: f64) -> PyResult<f64> {
        evidential::evidential_loss(&self.inner, &y, lambda_reg).map_err(err)
    }
}

/// Multivariate Student-t predictive distribution.
#[pyclass(name = "StudentTPredictive", from_py_object)]
#[derive(Clone)]
struct PyStudentT {
    inner: evidential::StudentTPredictive,
}

#[pymethods]
impl PyStudentT {
    #[new]
    fn new(loc: Vec<f64>, scale: PySpdMatrix, dof: f64) -> PyResult<Self> {
        Ok(Self {
            inner: evidential::StudentTPredictive::new(loc, scale.inner, dof).map_err(err)?,
        })
    }

    #[getter]
    fn loc(&self) -> Vec<f64> {
        self.inner.loc().to_vec()
    }

    #[getter]
    fn dof(&self) -> f64 {
        self.inner.dof()
    }

    #[getter]
    fn scale(&self) -> PySpdMatrix {
        PySpdMatrix {
            inner: self.inner.scale().clone(),
        }
    }

    fn log_pdf(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.log_pdf(&y).map_err(err)
    }

    fn mahalanobis_sq(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.mahalanobis_sq(&y).map_err(err)
    }

    fn pit(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.pit(&y).map_err(err)
    }

    /// Draw `n` samples with a seeded generator.
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.inner.sample(&mut rng)).collect()
    }
}

/// Monotone recalibration map fitted on PIT values.
#[pyclass(name = "IsotonicMap", from_py_object)]
#[derive(Clone)]
struct PyIsotonicMap {
    inner: calibrate::IsotonicMap,
}

#[pymethods]
impl PyIsotonicMap {
    /// Fit by pool-adjacent-violators on (sorted PIT, empirical CDF) pairs.
    #[staticmethod]
    fn fit(pits: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: calibrate::fit_pav(&pits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: calibrate::IsotonicMap::identity(),
        }
    }

    #[getter]
    fn knots(&self) -> Vec<f64> {
        self.inner.knots_u.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values_v.clone()
    }

    fn eval(&self, u: f64) -> f64 {
        self.inner.eval(u)
    }

    /// Smallest u with map(u) >= p; returns (u_star, attainable).
    fn recalibrated_level(&self, p: f64) -> (f64, bool) {
        let r = self.inner.recalibrated_level(p);
        (r.u_star, r.attainable)
    }
}

/// Ellipsoidal prediction set at a nominal mass level.
#[pyclass(name = "PredictionSet")]
struct PyPredictionSet {
    inner: calibrate::PredictionSet,
}

#[pymethods]
impl PyPredictionSet {
    #[getter]
    fn center(&self) -> Vec<f64> {
        self.inner.center.clone()
    }

    #[getter]
    fn radius_sq(&self) -> f64 {
        self.inner.radius_sq
    }

    fn contains(&self, y: Vec<f64>) -> PyResult<bool> {
        self.inner.contains(&y).map_err(err)
    }
}

#[pyfunction]
fn prediction_set(t: &PyStudentT, u_star: f64) -> PyResult<PyPredictionSet> {
    Ok(PyPredictionSet {
        inner: calibrate::prediction_set(&t.inner, u_star).map_err(err)?,
    })
}

/// Per-level empirical coverage of paired (predictive, truth) lists.
/// Returns (list of (level, coverage), mean absolute calibration error).
#[pyfunction]
#[pyo3(signature = (predictives, truths, levels, map=None))]
fn coverage_report(
    predictives: Vec<PyStudentT>,
    truths: Vec<Vec<f64>>,
    levels: Vec<f64>,
    map: Option<&PyIsotonicMap>,
) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let preds: Vec<evidential::StudentTPredictive> =
        predictives.into_iter().map(|p| p.inner).collect();
    let report =
        calibrate::coverage_report(&preds, &truths, map.map(|m| &m.inner), &levels).map_err(err)?;
    Ok((
        report.rows.iter().map(|r| (r.level, r.coverage)).collect(),
        report.mean_abs_calibration_error,
    ))
}

/// L2-optimal nondecreasing fit to targets under weights.
#[pyfunction]
fn pav(targets: Vec<f64>, weights: Vec<f64>) -> PyResult<Vec<f64>> {
    if targets.len() != weights.len() {
        return Err(PyValueError::new_err("targets and weights differ in length"));
    }
    Ok(calibrate::pav(&targets, &weights))
}

#[pyfunction]
fn log_gamma(x: f64) -> PyResult<f64> {
    numerics::log_gamma(x).map_err(err)
}

#[pyfunction]
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> PyResult<f64> {
    numerics::regularized_incomplete_beta(a, b, x).map_err(err)
}

#[pyfunction]
fn f_cdf(d1: u32, d2: f64, x: f64) -> PyResult<f64> {
    numerics::f_cdf(d1, d2, x).map_err(err)
}

#[pyfunction]
fn f_quantile(d1: u32, d2: f64, p: f64) -> PyResult<f64> {
    numerics::f_quantile(d1, d2, p).map_err(err)
}

/// Integrate unicycle kinematics: state (x, y, theta, v), controls
/// [(v_cmd, omega), ...]; returns the visited states.
#[pyfunction]
fn unicycle_rollout(
    state: (f64, f64, f64, f64),
    controls: Vec<(f64, f64)>,
    dt: f64,
    v_max: f64,
    omega_max: f64,
) -> Vec<(f64, f64, f64, f64)> {
    let start = planner::RobotState {
        x: state.0,
        y: state.1,
        theta: state.2,
        v: state.3,
    };
    let controls: Vec<planner::Control> = controls
        .into_iter()
        .map(|(v, omega)| planner::Control { v, omega })
        .collect();
    planner::rollout(&start, &controls, dt, v_max, omega_max)
        .into_iter()
        .map(|s| (s.x, s.y, s.theta, s.v))
        .collect()
}

/// Precision-weighted fusion of waypoint estimates. `belief` and `preds`
/// are lists of (mean, covariance); ages decay the buffered precision by
/// gamma^age. Returns the fused (mean, covariance, age) triples.
#[pyfunction]
fn fuse_waypoints(
    belief: Vec<(Vec<f64>, Vec<Vec<f64>>, u32)>,
    preds: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    gamma: f64,
) -> PyResult<Vec<(Vec<f64>, Vec<Vec<f64>>, u32)>> {
    let slots = belief
        .into_iter()
        .map(|(mean, cov, age)| {
            Ok(planner::BeliefSlot {
                mean: [mean[0], mean[1]],
                cov: spd_from_rows(cov)?,
                age,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let new_preds = preds
        .into_iter()
        .map(|(mean, cov)| Ok(([mean[0], mean[1]], spd_from_rows(cov)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let fused = planner::fuse(&planner::WaypointBelief { slots }, &new_preds, gamma).map_err(err)?;
    Ok(fused
        .slots
        .into_iter()
        .map(|s| (s.mean.to_vec(), rows(&s.cov.reconstruct(), 2), s.age))
        .collect())
}

fn spd_from_rows(rows: Vec<Vec<f64>>) -> PyResult<numerics::SpdMatrix> {
    let dim = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    numerics::SpdMatrix::cholesky(&flat, dim).map_err(err)
}

#[pymodule]
fn stairnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpdMatrix>()?;
    m.add_class::<PyNIWParams>()?;
    m.add_class::<PyStudentT>()?;
    m.add_class::<PyIsotonicMap>()?;
    m.add_class::<PyPredictionSet>()?;
    m.add_function(wrap_pyfunction!(prediction_set, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_report, m)?)?;
    m.add_function(wrap_pyfunction!(pav, m)?)?;
    m.add_function(wrap_pyfunction!(log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(regularized_incomplete_beta, m)?)?;
    m.add_function(wrap_pyfunction!(f_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(f_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(unicycle_rollout, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_waypoints, m)?)?;
    Ok(())
}
