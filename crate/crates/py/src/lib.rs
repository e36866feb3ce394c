//! Python bindings: the simulator's main types (configurations, run
//! histories, batched experiments) and the aerosol/statistics operations,
//! driven in-process from Python.
//!
//! Build the extension with `cargo build -p iaqsim-py` and load the
//! produced `libiaqsim_py.so` as module `iaqsim_py`
//! (`python/smoke_test.py` shows the import dance).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use iaqsim::config::AerosolConstants;
use iaqsim::metrics::ExclusionMode;

/// A parsed, validated simulation configuration.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Config {
    inner: iaqsim::SimulationConfig,
}

#[pymethods]
impl Config {
    /// Parse a configuration document.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Config> {
        let inner = iaqsim::parse_config(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Config { inner })
    }

    /// Read and parse a configuration file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Config::parse(&text)
    }

    fn to_json(&self) -> String {
        iaqsim::serialize_config(&self.inner)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn n_events(&self) -> usize {
        self.inner.events.len()
    }

    #[getter]
    fn n_places(&self) -> usize {
        self.inner.places.len()
    }

    #[getter]
    fn n_people(&self) -> usize {
        self.inner.people.len()
    }

    #[getter]
    fn departments(&self) -> Vec<String> {
        self.inner.departments()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(events={}, places={}, people={})",
            self.inner.events.len(),
            self.inner.places.len(),
            self.inner.people.len()
        )
    }
}

/// The complete record of one simulated day.
#[pyclass]
struct History {
    inner: iaqsim::RunHistory,
    places: Vec<iaqsim::config::Place>,
}

#[pymethods]
impl History {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn places_csv(&self) -> String {
        self.inner.places_csv()
    }

    fn persons_csv(&self) -> String {
        self.inner.persons_csv()
    }

    /// Outcome metrics of the run as a JSON document.
    fn metrics_json(&self) -> String {
        let outcome = iaqsim::metrics::compute(&self.inner, &self.places);
        serde_json::to_string_pretty(&outcome).expect("metrics serialize")
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn infected(&self) -> Vec<String> {
        self.inner.infected.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "History(seed={}, place_snapshots={}, person_snapshots={})",
            self.inner.seed,
            self.inner.places.len(),
            self.inner.persons.len()
        )
    }
}

/// A batched Monte Carlo experiment.
#[pyclass]
struct Experiment {
    inner: iaqsim::batch::ExperimentResult,
}

#[pymethods]
impl Experiment {
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn s_run(&self) -> u32 {
        self.inner.s_run
    }

    /// Samples of one assembled distribution, e.g.
    /// `distribution("building", "building", "volume_weighted_max_co2")`.
    fn distribution(&self, kind: &str, entity: &str, parameter: &str) -> PyResult<Vec<f64>> {
        let kind = parse_kind(kind)?;
        self.inner
            .distribution(kind, entity, parameter)
            .map(|set| set.samples.clone())
            .ok_or_else(|| {
                PyValueError::new_err(format!("no distribution {entity}/{parameter}"))
            })
    }

    fn __repr__(&self) -> String {
        format!(
            "Experiment(name={:?}, s_run={})",
            self.inner.experiment, self.inner.s_run
        )
    }
}

fn parse_kind(kind: &str) -> PyResult<iaqsim::batch::EntityKind> {
    match kind {
        "place" => Ok(iaqsim::batch::EntityKind::Place),
        "department" => Ok(iaqsim::batch::EntityKind::Department),
        "building" => Ok(iaqsim::batch::EntityKind::Building),
        other => Err(PyValueError::new_err(format!(
            "unknown entity kind `{other}` (place|department|building)"
        ))),
    }
}

/// Simulate one day; identical (config, seed) pairs are bit-identical.
#[pyfunction]
fn run_day(config: &Config, seed: u64) -> History {
    History {
        inner: iaqsim::run_day(&config.inner, seed),
        places: config.inner.places.clone(),
    }
}

/// Run a seeded Monte Carlo batch. The result is independent of
/// `parallelism` (0 = one worker per core).
#[pyfunction]
#[pyo3(signature = (config, name, s_run, base_seed, parallelism = 0))]
fn run_batch(config: &Config, name: &str, s_run: u32, base_seed: u64, parallelism: usize) -> Experiment {
    Experiment {
        inner: iaqsim::batch::run_batch(
            &config.inner,
            name,
            s_run,
            base_seed,
            parallelism,
            ExclusionMode::PerPlace,
        ),
    }
}

/// Statistical comparison report (JSON) of an experiment against baseline.
#[pyfunction]
#[pyo3(signature = (baseline, experiment, intersect = false))]
fn compare(baseline: &Experiment, experiment: &Experiment, intersect: bool) -> PyResult<String> {
    iaqsim::stats::compare_experiments(&baseline.inner, &experiment.inner, intersect)
        .map(|report| report.to_json())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Seed of run `index` within a batch rooted at `base`.
#[pyfunction]
fn split_seed(base: u64, index: u64) -> u64 {
    iaqsim::batch::split_seed(base, index)
}

/// Piecewise-linear activity priority weight.
#[pyfunction]
#[pyo3(signature = (e, r, rmax = None, alpha = 0.5))]
fn priority(e: u32, r: u32, rmax: Option<u32>, alpha: f64) -> f64 {
    iaqsim::behavior::priority(e, r, rmax, alpha)
}

/// CO₂ emission of `n_people` in L/s under the default building constants.
#[pyfunction]
fn co2_emission(n_people: u32) -> f64 {
    iaqsim::aerosol::co2_emission(n_people, &AerosolConstants::default())
}

/// Net quanta emission rate (quanta/h) of `n_infected` emitters.
#[pyfunction]
fn quanta_emission(n_infected: u32, mask_efficiency: f64) -> f64 {
    iaqsim::aerosol::quanta_emission(n_infected, mask_efficiency, &AerosolConstants::default())
}

/// Total quanta loss rate λ = λa + λr + λdep + k under default constants.
#[pyfunction]
fn total_loss_rate(lambda_a: f64, lambda_r: f64) -> f64 {
    iaqsim::aerosol::total_loss_rate(lambda_a, lambda_r, &AerosolConstants::default())
}

/// Advance an average quanta concentration over `tau_hours`.
#[pyfunction]
fn advance_quanta(c_avg: f64, tau_hours: f64, emission: f64, lambda: f64, volume: f64) -> f64 {
    iaqsim::aerosol::advance_quanta(c_avg, tau_hours, emission, lambda, volume)
}

/// Advance a CO₂ mixing ratio over `tau_hours`.
#[pyfunction]
#[pyo3(signature = (co2, tau_hours, emission_l_s, lambda_a, volume, background = 415.0))]
fn advance_co2(
    co2: f64,
    tau_hours: f64,
    emission_l_s: f64,
    lambda_a: f64,
    volume: f64,
    background: f64,
) -> f64 {
    iaqsim::aerosol::advance_co2(co2, tau_hours, emission_l_s, lambda_a, volume, background)
}

/// Quanta inhaled over an exposure interval.
#[pyfunction]
fn inhaled_quanta(c_avg: f64, tau_hours: f64, mask_efficiency: f64) -> f64 {
    iaqsim::aerosol::inhaled_quanta(c_avg, tau_hours, mask_efficiency, &AerosolConstants::default())
}

/// Wells-Riley infection probability `1 − e^{−n}` (interpretive helper).
#[pyfunction]
fn infection_probability(n: f64) -> f64 {
    iaqsim::aerosol::infection_probability(n)
}

/// Welch's t-test: `(t, df, p)` or None when untestable.
#[pyfunction]
fn welch_t(a: Vec<f64>, b: Vec<f64>) -> Option<(f64, f64, f64)> {
    iaqsim::stats::welch_t(&a, &b).map(|w| (w.t, w.df, w.p))
}

/// Mann-Whitney U test: `(u, p, z)` or None when untestable.
#[pyfunction]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>) -> Option<(f64, f64, f64)> {
    iaqsim::stats::mann_whitney_u(&a, &b).map(|m| (m.u, m.p, m.z))
}

#[pyfunction]
fn cohens_d(a: Vec<f64>, b: Vec<f64>) -> Option<f64> {
    iaqsim::stats::cohens_d(&a, &b)
}

#[pyfunction]
fn rank_effect_size(a: Vec<f64>, b: Vec<f64>) -> Option<f64> {
    iaqsim::stats::rank_effect_size(&a, &b)
}

/// The scripted two-person office CO₂ trace as `(minute, co2_ppm,
/// occupants)` tuples.
#[pyfunction]
#[pyo3(signature = (scenario_json = None))]
fn validation_trace(scenario_json: Option<&str>) -> PyResult<Vec<(u32, f64, u32)>> {
    let text = scenario_json.unwrap_or(iaqsim::scenario::DEFAULT_SCENARIO);
    let scenario = iaqsim::scenario::parse_scenario(text)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let points = iaqsim::scenario::run_scenario(&scenario, &AerosolConstants::default());
    Ok(points.iter().map(|p| (p.minute, p.co2_ppm, p.occupants)).collect())
}

#[pymodule]
fn iaqsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<History>()?;
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(run_day, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(split_seed, m)?)?;
    m.add_function(wrap_pyfunction!(priority, m)?)?;
    m.add_function(wrap_pyfunction!(co2_emission, m)?)?;
    m.add_function(wrap_pyfunction!(quanta_emission, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss_rate, m)?)?;
    m.add_function(wrap_pyfunction!(advance_quanta, m)?)?;
    m.add_function(wrap_pyfunction!(advance_co2, m)?)?;
    m.add_function(wrap_pyfunction!(inhaled_quanta, m)?)?;
    m.add_function(wrap_pyfunction!(infection_probability, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(rank_effect_size, m)?)?;
    m.add_function(wrap_pyfunction!(validation_trace, m)?)?;
    Ok(())
}
