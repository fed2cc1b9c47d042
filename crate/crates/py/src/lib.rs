//! Python bindings: parameters, the solved equilibrium, rollouts, the
//! impulse bound and grid verification.

use impulse_core::simulate::{self, RolloutOptions};
use impulse_core::verify::{self, GridSpec, Tolerances};
use impulse_core::{Error, GameParams, StateBox};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(impulse_game, ModelError, PyRuntimeError, "Numeric or model violation.");

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidParams(_) | Error::DegenerateBox { .. } | Error::InvalidArgument(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => ModelError::new_err(err.to_string()),
    }
}

/// Game constants. Defaults are the reference parameterization.
#[pyclass(name = "Params", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyParams {
    inner: GameParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[allow(non_snake_case, clippy::too_many_arguments)]
    #[pyo3(signature = (
        a=0.1, b=-0.3, w1=1.0, r1=1.0, z1=2.0, s1=1.0, rho1=2.5,
        w2=4.0, s2=1.0, rho2=5.0, C=3.0, D=5.0, c=2.0, d=3.0, T=1.0
    ))]
    fn new(
        a: f64,
        b: f64,
        w1: f64,
        r1: f64,
        z1: f64,
        s1: f64,
        rho1: f64,
        w2: f64,
        s2: f64,
        rho2: f64,
        C: f64,
        D: f64,
        c: f64,
        d: f64,
        T: f64,
    ) -> PyResult<Self> {
        let inner = GameParams {
            drift: a,
            control_gain: b,
            p1_state_weight: w1,
            p1_control_weight: r1,
            p1_impulse_weight: z1,
            p1_terminal_weight: s1,
            p1_target: rho1,
            p2_state_weight: w2,
            p2_terminal_weight: s2,
            p2_target: rho2,
            fixed_cost_up: C,
            fixed_cost_down: D,
            marginal_cost_up: c,
            marginal_cost_down: d,
            horizon: T,
        }
        .validate()
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (k, v) in self.inner.named_fields() {
            out.set_item(k, v)?;
        }
        Ok(out)
    }

    /// Player 2's intervention cost for an impulse of size `xi`.
    fn impulse_cost(&self, xi: f64) -> f64 {
        self.inner.p2_impulse_cost(xi)
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = self
            .inner
            .named_fields()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("Params({})", fields.join(", "))
    }
}

/// The solved feedback equilibrium.
#[pyclass(name = "Equilibrium", frozen)]
struct PyEquilibrium {
    inner: impulse_core::Equilibrium,
}

#[pymethods]
impl PyEquilibrium {
    #[new]
    #[pyo3(signature = (params, n_steps=impulse_core::DEFAULT_STEPS))]
    fn new(params: &PyParams, n_steps: usize) -> PyResult<Self> {
        let inner = impulse_core::Equilibrium::solve(&params.inner, n_steps).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams {
            inner: *self.inner.params(),
        }
    }

    /// `(ell1, alpha, beta, ell2)` at time `t`.
    fn thresholds(&self, t: f64) -> (f64, f64, f64, f64) {
        let th = self.inner.thresholds(t);
        (th.ell1, th.alpha, th.beta, th.ell2)
    }

    fn coefficients<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let k = self.inner.coefficients(t);
        let out = PyDict::new(py);
        for (name, v) in [
            ("p1", k.p1),
            ("q1", k.q1),
            ("n1", k.n1),
            ("p2", k.p2),
            ("q2", k.q2),
            ("n2", k.n2),
            ("a_x", k.a_x),
        ] {
            out.set_item(name, v)?;
        }
        Ok(out)
    }

    fn gamma_star(&self, t: f64, x: f64) -> f64 {
        self.inner.gamma_star(t, x)
    }

    /// `(target, xi)` if Player 2 intervenes at `(t, x)`, else `None`.
    fn impulse_map(&self, t: f64, x: f64) -> Option<(f64, f64)> {
        self.inner.impulse_map(t, x).map(|i| (i.target, i.xi))
    }

    fn region(&self, t: f64, x: f64) -> &'static str {
        self.inner.region(t, x).as_str()
    }

    fn value_v2(&self, t: f64, x: f64) -> f64 {
        self.inner.value_v2(t, x)
    }

    #[pyo3(signature = (t, x, step=None))]
    fn value_v1(&self, py: Python<'_>, t: f64, x: f64, step: Option<f64>) -> PyResult<f64> {
        let step = step.unwrap_or_else(|| self.inner.default_step());
        py.detach(|| self.inner.value_v1(t, x, step)).map_err(to_py)
    }

    /// Forward rollout; returns a dict with sample lists, events and costs.
    #[pyo3(signature = (x0, t0=0.0, step=None, max_events=None))]
    fn rollout<'py>(
        &self,
        py: Python<'py>,
        x0: f64,
        t0: f64,
        step: Option<f64>,
        max_events: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = RolloutOptions {
            step: step.unwrap_or_else(|| self.inner.default_step()),
            max_events: max_events.unwrap_or_else(|| self.inner.default_budget(x0)),
        };
        let traj = py
            .detach(|| simulate::rollout(&self.inner, t0, x0, &opts))
            .map_err(to_py)?;
        let (mut ts, mut xs, mut us) = (Vec::new(), Vec::new(), Vec::new());
        for (t, x, u) in traj.samples() {
            ts.push(t);
            xs.push(x);
            us.push(u);
        }
        let events = traj
            .events
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("tau", e.tau)?;
                d.set_item("x_minus", e.x_minus)?;
                d.set_item("x_plus", e.x_plus)?;
                d.set_item("xi", e.xi)?;
                d.set_item("cost_p1", e.cost_p1)?;
                d.set_item("cost_p2", e.cost_p2)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let out = PyDict::new(py);
        out.set_item("t", ts)?;
        out.set_item("x", xs)?;
        out.set_item("u", us)?;
        out.set_item("events", events)?;
        out.set_item("j1", traj.j1)?;
        out.set_item("j2", traj.j2)?;
        Ok(out)
    }

    /// Runs the grid checks over `[0, T] x [x_lo, x_hi]`.
    #[pyo3(signature = (x_lo, x_hi, nt=200, nx=200, oracle=true))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        x_lo: f64,
        x_hi: f64,
        nt: usize,
        nx: usize,
        oracle: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let grid = GridSpec {
            nt,
            nx,
            state_box: StateBox::new(x_lo, x_hi).map_err(to_py)?,
        };
        let report = py
            .detach(|| verify::verify(&self.inner, grid, Tolerances::default(), oracle))
            .map_err(to_py)?;
        let conditions = report
            .summary
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("name", c.name)?;
                d.set_item("passed", c.passed)?;
                d.set_item("worst", c.worst)?;
                d.set_item("bound", c.bound)?;
                d.set_item("t", c.at_t)?;
                d.set_item("x", c.at_x)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let out = PyDict::new(py);
        out.set_item("passed", report.passed())?;
        out.set_item("conditions", conditions)?;
        Ok(out)
    }
}

/// Bound on the number of equilibrium impulses over `[x_lo, x_hi]`.
#[pyfunction]
fn impulse_bound<'py>(py: Python<'py>, params: &PyParams, x_lo: f64, x_hi: f64) -> PyResult<Bound<'py, PyDict>> {
    let b = simulate::impulse_bound(&params.inner, &StateBox::new(x_lo, x_hi).map_err(to_py)?);
    let out = PyDict::new(py);
    out.set_item("k", b.k)?;
    out.set_item("running_cost_sup", b.running_sup)?;
    out.set_item("terminal_cost_sup", b.terminal_sup)?;
    out.set_item("mu", b.mu)?;
    Ok(out)
}

#[pymodule]
fn impulse_game(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_function(wrap_pyfunction!(impulse_bound, m)?)?;
    m.add("ModelError", m.py().get_type::<ModelError>())?;
    Ok(())
}
