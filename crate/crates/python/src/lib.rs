//! Python surface for the allocation library. Wrappers stay thin: they
//! hold the core types, convert errors to Python exceptions, and hand
//! back plain lists and floats so the results drop straight into numpy.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hynoma_core::channel::{
    sample_rayleigh_gains as core_sample_gains, wavelength_for_carrier, NearFieldGeometry,
    SisoScenario, UserPosition,
};
use hynoma_core::error::Error;
use hynoma_core::experiments::{
    build_config, parse_raw, run_miso_det, run_miso_sweep, run_siso_det, run_siso_sweep,
    run_verify, ExperimentKind,
};
use hynoma_core::miso::{solve_miso_hybrid_sca, solve_miso_oma, ScaOptions};
use hynoma_core::nearfield::{
    assign_beams, build_beams, dbm_to_linear, effective_gains, rates_hybrid, BeamMode,
    EffectiveGains, MisoScenario,
};
use hynoma_core::siso::{
    hybrid_closed_form, oma_allocation, successive_allocation, uplink_two_user as core_uplink,
    waterfill_user, AllocationSchedule,
};

/// Invalid inputs become ValueError; solver and conditioning failures
/// become RuntimeError.
fn to_py(err: Error) -> PyErr {
    match err {
        Error::Scenario(_) | Error::Domain(_) | Error::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Single-antenna downlink scenario: per-user channel gains and a
/// common rate target.
#[pyclass(module = "hynoma_py")]
struct Scenario {
    inner: SisoScenario,
}

#[pymethods]
impl Scenario {
    /// With `ordered=True` the gains are taken as already sorted from
    /// strongest to weakest and the constructor enforces it.
    #[new]
    #[pyo3(signature = (gains, target_rate, *, ordered = false, slot_duration = 1.0))]
    fn new(gains: Vec<f64>, target_rate: f64, ordered: bool, slot_duration: f64) -> PyResult<Self> {
        let base = if ordered {
            SisoScenario::ordered(gains, target_rate)
        } else {
            SisoScenario::new(gains, target_rate)
        };
        let inner = base
            .and_then(|s| s.with_slot_duration(slot_duration))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        self.inner.gains().to_vec()
    }

    #[getter]
    fn target_rate(&self) -> f64 {
        self.inner.target_rate()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    /// Closed-form hybrid schedule (minimum total energy).
    fn hybrid(&self) -> PyResult<Schedule> {
        hybrid_closed_form(&self.inner)
            .map(Schedule::from)
            .map_err(to_py)
    }

    /// One-slot-per-user baseline schedule.
    fn oma(&self) -> Schedule {
        Schedule::from(oma_allocation(&self.inner))
    }

    /// Slot-by-slot elimination route; agrees with `hybrid()` to
    /// machine precision and exists as an independent cross-check.
    fn successive(&self) -> PyResult<Schedule> {
        successive_allocation(&self.inner)
            .map(Schedule::from)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(gains={:?}, target_rate={})",
            self.inner.gains(),
            self.inner.target_rate()
        )
    }
}

/// Lower-triangular power schedule: `rows()[m][i]` is user m's transmit
/// power in slot i, for i <= m.
#[pyclass(module = "hynoma_py")]
struct Schedule {
    inner: AllocationSchedule,
}

impl From<AllocationSchedule> for Schedule {
    fn from(inner: AllocationSchedule) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl Schedule {
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().to_vec()
    }

    #[getter]
    fn total_energy(&self) -> f64 {
        self.inner.total_energy()
    }

    fn per_user_energy(&self, m: usize) -> f64 {
        self.inner.per_user_energy(m)
    }

    fn per_user_energies(&self) -> Vec<f64> {
        self.inner.per_user_energies()
    }

    /// Interference user m's decoder has to absorb in slot i plus the
    /// user's own power there, summed over the scheduled slots i..=m.
    fn accumulated_interference(&self, m: usize, i: usize) -> f64 {
        self.inner.accumulated_interference(m, i)
    }

    fn __repr__(&self) -> String {
        format!("Schedule(total_energy={})", self.inner.total_energy())
    }
}

/// Near-field two-group scenario: a uniform linear array serving
/// `len(g1_positions)` near users in phase one, with `len(g2_positions)`
/// far users overlaid via superposition and finished in dedicated slots.
#[pyclass(module = "hynoma_py")]
struct NearFieldScenario {
    inner: MisoScenario,
    gains: EffectiveGains,
}

#[pymethods]
impl NearFieldScenario {
    /// Positions are `(angle_rad, range_m)` pairs measured from the
    /// array center. `beam_mode` is `"beamfocusing"` or
    /// `"zero_forcing"` (alias `"bf"`/`"zf"`).
    #[new]
    #[pyo3(signature = (
        n_antennas,
        g1_positions,
        g2_positions,
        target_rate,
        *,
        p_g1_dbm = 10.0,
        beam_mode = "beamfocusing",
        carrier_hz = 28e9,
        gain_scale = 1.0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_antennas: usize,
        g1_positions: Vec<(f64, f64)>,
        g2_positions: Vec<(f64, f64)>,
        target_rate: f64,
        p_g1_dbm: f64,
        beam_mode: &str,
        carrier_hz: f64,
        gain_scale: f64,
    ) -> PyResult<Self> {
        let mode: BeamMode = beam_mode.parse().map_err(to_py)?;
        let positions = |pairs: Vec<(f64, f64)>| -> Result<Vec<UserPosition>, Error> {
            pairs
                .into_iter()
                .map(|(angle, range)| UserPosition::new(angle, range))
                .collect()
        };
        let geometry = NearFieldGeometry::ula(n_antennas, wavelength_for_carrier(carrier_hz))
            .map_err(to_py)?;
        let inner = MisoScenario::new(
            geometry,
            positions(g1_positions).map_err(to_py)?,
            positions(g2_positions).map_err(to_py)?,
            dbm_to_linear(p_g1_dbm),
            target_rate,
            mode,
        )
        .and_then(|s| s.with_gain_scale(gain_scale))
        .map_err(to_py)?;

        let beams = build_beams(&inner).map_err(to_py)?;
        let assignment = assign_beams(&inner, &beams).map_err(to_py)?;
        let gains = effective_gains(&inner, &beams, &assignment).map_err(to_py)?;
        Ok(Self { inner, gains })
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.inner.geometry().wavelength()
    }

    #[getter]
    fn aperture(&self) -> f64 {
        self.inner.geometry().aperture()
    }

    #[getter]
    fn rayleigh_distance(&self) -> f64 {
        self.inner.geometry().rayleigh_distance()
    }

    /// Far user k's beam assignment: index of the group-1 beam it rides
    /// in phase one.
    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.gains.assignment.clone()
    }

    /// Minimum-energy overlay allocation; returns first-phase add-on
    /// powers, the dedicated-slot powers, and solve diagnostics.
    fn solve_hybrid(&self) -> PyResult<Allocation> {
        let result = solve_miso_hybrid_sca(
            &self.gains,
            self.inner.m_users(),
            self.inner.target_rate(),
            &ScaOptions::default(),
        )
        .map_err(to_py)?;
        Ok(Allocation {
            first_phase: result.p,
            second_phase: result.e,
            energy: result.energy,
            feasible: result.energy.is_finite(),
            kkt_residual: result.kkt_residual,
            sca_trace: result.sca_trace,
        })
    }

    /// Dedicated-slots-only baseline at the same rate target.
    fn solve_oma(&self) -> PyResult<Allocation> {
        let result = solve_miso_oma(&self.gains, self.inner.target_rate()).map_err(to_py)?;
        Ok(Allocation {
            first_phase: result.p,
            second_phase: result.e,
            energy: result.energy,
            feasible: result.energy.is_finite(),
            kkt_residual: result.kkt_residual,
            sca_trace: result.sca_trace,
        })
    }

    /// Achieved `(first_phase, second_phase)` rate vectors at the given
    /// powers, using the scenario's effective gain tables.
    fn rates(&self, first_phase: Vec<f64>, second_phase: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let rates = rates_hybrid(&self.gains, &first_phase, &second_phase).map_err(to_py)?;
        Ok((rates.first_phase, rates.second_phase))
    }
}

/// Result of a two-group solve. `energy == inf` (and `feasible ==
/// False`) marks an unreachable rate target; the power vectors are then
/// empty.
#[pyclass(module = "hynoma_py")]
struct Allocation {
    #[pyo3(get)]
    first_phase: Vec<f64>,
    #[pyo3(get)]
    second_phase: Vec<f64>,
    #[pyo3(get)]
    energy: f64,
    #[pyo3(get)]
    feasible: bool,
    #[pyo3(get)]
    kkt_residual: f64,
    #[pyo3(get)]
    sca_trace: Vec<f64>,
}

#[pymethods]
impl Allocation {
    fn __repr__(&self) -> String {
        format!(
            "Allocation(energy={}, feasible={})",
            self.energy, self.feasible
        )
    }
}

/// Minimum-energy powers for one user's uplink-style subproblem: slot
/// interference levels and effective gains per available slot.
#[pyfunction]
fn waterfill(
    slot_interference: Vec<f64>,
    effective_gains: Vec<f64>,
    target_rate: f64,
) -> PyResult<Vec<f64>> {
    waterfill_user(&slot_interference, &effective_gains, target_rate).map_err(to_py)
}

/// Two-user uplink split `(shared_slot_power, own_slot_power)` for the
/// stronger user; the shared-slot component is always zero.
#[pyfunction]
fn uplink_two_user(gain_1: f64, gain_2: f64, target_rate: f64) -> PyResult<(f64, f64)> {
    core_uplink(gain_1, gain_2, target_rate).map_err(to_py)
}

/// Unit-mean exponential magnitude-squared gains, resampled onto the
/// floor, deterministic in `seed`.
#[pyfunction]
fn rayleigh_gains(m_users: usize, gain_floor: f64, seed: u64) -> Vec<f64> {
    core_sample_gains(m_users, gain_floor, seed)
}

/// Runs one experiment kind (`siso-sweep`, `siso-det`, `miso-sweep`,
/// `miso-det`, `verify`) from config text in the CLI's `key = value`
/// format and returns the CSV document.
#[pyfunction]
#[pyo3(signature = (kind, config = ""))]
fn run_experiment(kind: &str, config: &str) -> PyResult<String> {
    let kind: ExperimentKind = kind.parse().map_err(to_py)?;
    let entries = parse_raw(config).map_err(to_py)?;
    let cfg = build_config(kind, &entries).map_err(to_py)?;
    match kind {
        ExperimentKind::SisoSweep => run_siso_sweep(&cfg),
        ExperimentKind::SisoDet => run_siso_det(&cfg),
        ExperimentKind::MisoSweep => run_miso_sweep(&cfg),
        ExperimentKind::MisoDet => run_miso_det(&cfg),
        ExperimentKind::Verify => run_verify(&cfg).map(|report| report.to_csv()),
    }
    .map_err(to_py)
}

#[pymodule]
fn hynoma_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<NearFieldScenario>()?;
    m.add_class::<Allocation>()?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(uplink_two_user, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_gains, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
