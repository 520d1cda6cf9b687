//! Python bindings. Numbers given as strings (`"1/4"`) stay exact.

use fractal_sumset::angle;
use fractal_sumset::experiment::{self, CurveConfig, ExperimentConfig, SetSpec};
use fractal_sumset::geometry::Point;
use fractal_sumset::ifs::{self, IfsSystem};
use fractal_sumset::projection;
use fractal_sumset::rational::Real;
use fractal_sumset::scaling::{self, UniformInterval};
use fractal_sumset::slice::{self, AdmissiblePair, Branch, PolarAboutX};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: fractal_sumset::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum Num {
    Text(String),
    Float(f64),
}

impl Num {
    fn real(&self) -> PyResult<Real> {
        match self {
            Num::Text(s) => Real::parse(s).ok_or_else(|| PyValueError::new_err(format!("cannot parse {s:?}"))),
            Num::Float(v) => Ok(Real::Float(*v)),
        }
    }

    fn text(&self) -> String {
        match self {
            Num::Text(s) => s.clone(),
            Num::Float(v) => format!("{v:?}"),
        }
    }
}

#[pyclass(name = "Ifs", module = "fractal_sumset_py")]
struct PyIfs {
    inner: IfsSystem,
}

#[pymethods]
impl PyIfs {
    #[staticmethod]
    fn four_corner(gamma: Num) -> PyResult<Self> {
        Ok(PyIfs { inner: IfsSystem::four_corner(gamma.real()?).map_err(err)? })
    }

    #[staticmethod]
    fn symmetric_cantor(gamma: Num) -> PyResult<Self> {
        Ok(PyIfs { inner: IfsSystem::symmetric_cantor(gamma.real()?).map_err(err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyIfs { inner: IfsSystem::from_text(text).map_err(err)? })
    }

    /// Counterexample system with one shared-projection pair per angle.
    #[staticmethod]
    #[pyo3(signature = (angles, lam, mode="a-prime", maps=None, seed=1))]
    fn counterexample(angles: Vec<String>, lam: Num, mode: &str, maps: Option<usize>, seed: u64) -> PyResult<Self> {
        let angles = angles.iter().map(|a| experiment::parse_angle(a)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let mode = experiment::parse_mode(mode).map_err(err)?;
        let opts = ifs::CounterexampleOptions { maps, seed, ..Default::default() };
        let ce = ifs::theorem084_ifs(&angles, lam.real()?, mode, &opts).map_err(err)?;
        Ok(PyIfs { inner: ce.system })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn similarity_dimension(&self) -> PyResult<f64> {
        ifs::similarity_dimension(&self.inner).map_err(err)
    }

    fn verify_ssc(&self, depth: u32) -> PyResult<bool> {
        ifs::verify_ssc(&self.inner, depth).map_err(err)
    }

    /// Lower-left corners and the common side of the depth-`depth` cover.
    fn cover(&self, depth: u32) -> PyResult<(Vec<(f64, f64)>, f64)> {
        let c = ifs::ifs_cover(&self.inner, depth).map_err(err)?;
        Ok((c.corners().iter().map(|p| (p.x, p.y)).collect(), c.side()))
    }

    /// `(total_length, interval_count)` of the projected depth-`depth` cover.
    fn project(&self, angle: &str, depth: u32) -> PyResult<(f64, usize)> {
        let a = experiment::parse_angle(angle).map_err(err)?;
        let c = ifs::ifs_cover(&self.inner, depth).map_err(err)?;
        let u = projection::project_cover(&c, a);
        Ok((u.total_length(), u.len()))
    }

    fn __repr__(&self) -> String {
        format!("Ifs(maps={})", self.inner.len())
    }
}

#[pyclass(name = "SumsetResult", module = "fractal_sumset_py", get_all)]
struct SumsetResult {
    eps: Vec<f64>,
    box_counts: Vec<u64>,
    areas: Vec<f64>,
    depths: Vec<u32>,
    slope: f64,
    verdict: String,
    last_change: f64,
    beta: f64,
    prediction: String,
}

/// Rasterizes `C(gamma) + curve` over a halving eps ladder. `curve` is
/// `"circle"` or `"ntheta:<angle>"`.
#[pyfunction]
#[pyo3(signature = (gamma, eps_start=0.0625, eps_stop=0.0009765625, eps_factor=2.0, curve="circle"))]
fn sumset_ladder(gamma: Num, eps_start: f64, eps_stop: f64, eps_factor: f64, curve: &str) -> PyResult<SumsetResult> {
    let mut cfg = ExperimentConfig::default();
    cfg.set = SetSpec::FourCorner { gamma: gamma.text() };
    cfg.curve = match curve.strip_prefix("ntheta:") {
        Some(a) => CurveConfig::Ntheta { angle: a.to_string() },
        None if curve == "circle" => CurveConfig::default(),
        None => return Err(PyValueError::new_err(format!("unknown curve {curve:?}"))),
    };
    cfg.ladder.eps_start = eps_start;
    cfg.ladder.eps_stop = eps_stop;
    cfg.ladder.eps_factor = eps_factor;
    let (o, _) = experiment::sumset_ladder(&cfg).map_err(err)?;
    let rows = o.ladder.rows();
    Ok(SumsetResult {
        eps: rows.iter().map(|r| r.eps).collect(),
        box_counts: rows.iter().map(|r| r.box_count).collect(),
        areas: rows.iter().map(|r| r.area).collect(),
        depths: o.depths,
        slope: o.fit.slope,
        verdict: o.verdict.verdict.to_string(),
        last_change: o.verdict.last_change,
        beta: o.verdict.beta,
        prediction: o.prediction,
    })
}

/// `(depth, total_length, interval_count)` for depths `1..=max_depth`.
#[pyfunction]
fn projection_ladder(gamma: Num, angle: &str, max_depth: u32) -> PyResult<Vec<(u32, f64, usize)>> {
    let a = experiment::parse_angle(angle).map_err(err)?;
    let rungs = projection::projection_ladder(gamma.real()?, a, max_depth).map_err(err)?;
    Ok(rungs.iter().map(|r| (r.depth, r.total_length, r.interval_count)).collect())
}

#[pyfunction]
fn star(m: u64) -> PyResult<u8> {
    angle::star(m).map_err(err)
}

/// `(p_star, q_star, class, prediction)`.
#[pyfunction]
fn classify_angle(p: i64, q: i64) -> PyResult<(u8, u8, String, String)> {
    let c = angle::classify_angle(p, q).map_err(err)?;
    let pred = angle::predict_sumset(angle::ThetaSpec::Rational { p, q }).map_err(err)?;
    Ok((c.p_star, c.q_star, c.kind.to_string(), pred.summary().to_string()))
}

#[pyfunction]
fn phi_alpha(x: (f64, f64), alpha: f64) -> PyResult<(f64, f64)> {
    let p = AdmissiblePair::new(Point::new(x.0, x.1), alpha).map_err(err)?;
    let v = slice::phi_alpha(&p);
    Ok((v.x, v.y))
}

#[pyfunction]
fn theta_of(x: (f64, f64), alpha: f64) -> PyResult<f64> {
    let p = AdmissiblePair::new(Point::new(x.0, x.1), alpha).map_err(err)?;
    Ok(slice::theta_of(&p))
}

/// `Psi_x` in polar coordinates about `x`; returns `(r, phi)`.
#[pyfunction]
fn psi(x: (f64, f64), r: f64, phi: f64) -> PyResult<(f64, f64)> {
    let u = PolarAboutX { center: Point::new(x.0, x.1), r, phi: slice::normalize_angle(phi) };
    let v = slice::psi_x(&u).map_err(err)?;
    Ok((v.r, v.phi))
}

/// Violation count of the `Psi_x` distance-ratio bound on one branch.
#[pyfunction]
#[pyo3(signature = (branch, samples=100_000, seed=1, slack=1e-9))]
fn lipschitz_audit(branch: &str, samples: u64, seed: u64, slack: f64) -> PyResult<u64> {
    let b = match branch {
        "plus" => Branch::Plus,
        "minus" => Branch::Minus,
        "inverse-plus" => Branch::InversePlus,
        "inverse-minus" => Branch::InverseMinus,
        _ => return Err(PyValueError::new_err(format!("unknown branch {branch:?}"))),
    };
    Ok(slice::lipschitz_audit(b, samples, seed, slack).violations)
}

/// Monte Carlo Riesz energy of the uniform measure on `[a, b]`.
#[pyfunction]
#[pyo3(signature = (s, pairs, seed=1, a=0.0, b=1.0))]
fn riesz_energy_uniform(s: f64, pairs: u64, seed: u64, a: f64, b: f64) -> PyResult<f64> {
    scaling::riesz_energy_mc(&UniformInterval { a, b }, s, pairs, seed).map_err(err)
}

#[pymodule]
fn fractal_sumset_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIfs>()?;
    m.add_class::<SumsetResult>()?;
    m.add_function(wrap_pyfunction!(sumset_ladder, m)?)?;
    m.add_function(wrap_pyfunction!(projection_ladder, m)?)?;
    m.add_function(wrap_pyfunction!(star, m)?)?;
    m.add_function(wrap_pyfunction!(classify_angle, m)?)?;
    m.add_function(wrap_pyfunction!(phi_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(theta_of, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_audit, m)?)?;
    m.add_function(wrap_pyfunction!(riesz_energy_uniform, m)?)?;
    Ok(())
}
