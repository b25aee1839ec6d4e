//! Channel synthesis: SISO fading gains and near-field array geometry.
//!
//! The SISO side is a flat Rayleigh model: per-user power gains are
//! unit-mean exponentials, optionally resampled above a floor to keep the
//! OMA baseline finite. The MISO side is geometric: a uniform linear array
//! with spherical-wavefront steering, so a steering vector depends on the
//! exact element-to-point distances rather than on the angle alone. That
//! range dependence is what makes beamfocusing (and near-field beam
//! sharing) possible in the first place.

use nalgebra::{Complex, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier frequency (Hz) to wavelength (m).
pub fn wavelength_for_carrier(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Margin below which two "ordered" gains count as tied; ties are routed to
/// the general (unordered) solver rather than the closed form.
pub const ORDER_MARGIN: f64 = 1e-12;

/// A single-antenna multi-user downlink scenario: per-user channel power
/// gains, a common target rate, and the slot duration.
///
/// Gains are noise-normalized linear power gains |h_m|^2. Rates are in nats
/// per channel use. The `ordered` flag asserts strictly decreasing gains,
/// which is what the closed-form allocation requires; construct through
/// [`SisoScenario::ordered`] to get it checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SisoScenario {
    gains: Vec<f64>,
    target_rate: f64,
    slot_duration: f64,
    ordered: bool,
}

impl SisoScenario {
    /// Scenario with gains in arbitrary order.
    pub fn new(gains: Vec<f64>, target_rate: f64) -> Result<Self> {
        Self::build(gains, target_rate, 1.0, false)
    }

    /// Scenario asserting strictly decreasing gains (strongest user first).
    ///
    /// Gains closer than [`ORDER_MARGIN`] are rejected: the closed form is
    /// only claimed for strict ordering, and near-ties belong to the
    /// general solver.
    pub fn ordered(gains: Vec<f64>, target_rate: f64) -> Result<Self> {
        Self::build(gains, target_rate, 1.0, true)
    }

    /// Replaces the slot duration (default 1 s). Duration scales every
    /// energy identically, so comparisons are unaffected.
    pub fn with_slot_duration(mut self, slot_duration: f64) -> Result<Self> {
        if !(slot_duration > 0.0) || !slot_duration.is_finite() {
            return Err(Error::Scenario(format!(
                "slot_duration must be positive and finite, got {slot_duration}"
            )));
        }
        self.slot_duration = slot_duration;
        Ok(self)
    }

    fn build(gains: Vec<f64>, target_rate: f64, slot_duration: f64, ordered: bool) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::Scenario("need at least one user".into()));
        }
        for (m, &g) in gains.iter().enumerate() {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Scenario(format!(
                    "gain of user {} must be positive and finite, got {g}",
                    m + 1
                )));
            }
        }
        if ordered {
            for w in gains.windows(2) {
                if !(w[0] - w[1] > ORDER_MARGIN) {
                    return Err(Error::Scenario(format!(
                        "ordered scenario requires strictly decreasing gains \
                         (margin {ORDER_MARGIN:e}); found {} then {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        // Zero is allowed: every solver returns the all-zero schedule there.
        if !target_rate.is_finite() || target_rate < 0.0 {
            return Err(Error::Scenario(format!(
                "target_rate must be finite and nonnegative, got {target_rate}"
            )));
        }
        Ok(Self {
            gains,
            target_rate,
            slot_duration,
            ordered,
        })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn n_users(&self) -> usize {
        self.gains.len()
    }
}

/// Draws `m_users` i.i.d. Rayleigh power gains |h|^2 with h standard
/// circularly-symmetric complex Gaussian, i.e. unit-mean exponentials.
///
/// Samples below `gain_floor` are redrawn (not clamped), so the output has
/// no point mass at the floor. Deterministic in `seed`.
///
/// # Panics
/// If `gain_floor` is negative or non-finite. Large floors only slow the
/// resampling down (acceptance probability e^-floor); they stay correct.
pub fn sample_rayleigh_gains(m_users: usize, gain_floor: f64, seed: u64) -> Vec<f64> {
    assert!(
        gain_floor >= 0.0 && gain_floor.is_finite(),
        "gain_floor must be finite and nonnegative"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m_users)
        .map(|_| loop {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            // Unit-variance complex Gaussian: each quadrature has variance 1/2.
            let gain = (re * re + im * im) / 2.0;
            if gain >= gain_floor {
                break gain;
            }
        })
        .collect()
}

/// Uniform linear array along the x-axis, centered on the origin.
///
/// Element `n` (1-based) sits at `((n - (N+1)/2) * spacing, 0)`, so the
/// layout is symmetric about the array center for any `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldGeometry {
    n_antennas: usize,
    wavelength: f64,
    element_spacing: f64,
    element_positions: Vec<[f64; 2]>,
}

impl NearFieldGeometry {
    /// Half-wavelength-spaced array.
    pub fn ula(n_antennas: usize, wavelength: f64) -> Result<Self> {
        Self::with_spacing(n_antennas, wavelength, wavelength / 2.0)
    }

    pub fn with_spacing(n_antennas: usize, wavelength: f64, element_spacing: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::Scenario("array needs at least one element".into()));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::Scenario(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(element_spacing > 0.0) || !element_spacing.is_finite() {
            return Err(Error::Scenario(format!(
                "element_spacing must be positive, got {element_spacing}"
            )));
        }
        let mid = (n_antennas as f64 + 1.0) / 2.0;
        let element_positions = (1..=n_antennas)
            .map(|n| [(n as f64 - mid) * element_spacing, 0.0])
            .collect();
        Ok(Self {
            n_antennas,
            wavelength,
            element_spacing,
            element_positions,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }

    pub fn element_positions(&self) -> &[[f64; 2]] {
        &self.element_positions
    }

    /// Physical array length end to end.
    pub fn aperture(&self) -> f64 {
        (self.n_antennas as f64 - 1.0) * self.element_spacing
    }

    /// Near-field/far-field boundary 2 D^2 / lambda (D = aperture).
    /// Points closer than this see spherical wavefronts.
    pub fn rayleigh_distance(&self) -> f64 {
        2.0 * self.aperture() * self.aperture() / self.wavelength
    }
}

/// Polar user position: `angle` from array broadside, `range` from the
/// array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPosition {
    angle: f64,
    range: f64,
}

impl UserPosition {
    pub fn new(angle: f64, range: f64) -> Result<Self> {
        if !angle.is_finite() || angle.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Scenario(format!(
                "user angle must satisfy |angle| < pi/2, got {angle}"
            )));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::Scenario(format!(
                "user range must be positive, got {range}"
            )));
        }
        Ok(Self { angle, range })
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Cartesian position with the array along x and broadside along y:
    /// `(r sin(theta), r cos(theta))`.
    pub fn cartesian(&self) -> [f64; 2] {
        [
            self.range * self.angle.sin(),
            self.range * self.angle.cos(),
        ]
    }
}

/// A length-N complex vector tied to the point that generated it: either a
/// unit-norm steering vector or a full channel (steering vector scaled by
/// the path gain).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    entries: DVector<Complex<f64>>,
    origin: [f64; 2],
}

impl ChannelVector {
    pub fn entries(&self) -> &DVector<Complex<f64>> {
        &self.entries
    }

    pub fn into_entries(self) -> DVector<Complex<f64>> {
        self.entries
    }

    /// The point this vector was generated for.
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Spherical-wavefront steering vector: entry n is
/// `(1/sqrt(N)) * exp(-j 2 pi |point - element_n| / lambda)`.
///
/// Always unit-norm. Fails if the point coincides with an array element
/// (the wavefront model has a singularity there).
pub fn steering_vector(geometry: &NearFieldGeometry, point: [f64; 2]) -> Result<ChannelVector> {
    if !point[0].is_finite() || !point[1].is_finite() {
        return Err(Error::Domain("steering point must be finite".into()));
    }
    let n = geometry.n_antennas();
    let scale = 1.0 / (n as f64).sqrt();
    let k = 2.0 * std::f64::consts::PI / geometry.wavelength();
    let mut entries = DVector::from_element(n, Complex::new(0.0, 0.0));
    for (idx, &el) in geometry.element_positions().iter().enumerate() {
        let d = dist(point, el);
        if d < 1e-9 {
            return Err(Error::Domain(format!(
                "point ({}, {}) coincides with array element {}",
                point[0],
                point[1],
                idx + 1
            )));
        }
        let phase = -k * d;
        entries[idx] = Complex::new(scale * phase.cos(), scale * phase.sin());
    }
    Ok(ChannelVector {
        entries,
        origin: point,
    })
}

/// Free-space spherical channel `h = sqrt(N) * alpha * b(point)` with path
/// gain `alpha = lambda / (4 pi r)`, r the range from the array center.
///
/// Consequently `||h||^2 = N * alpha^2`.
pub fn spherical_channel(geometry: &NearFieldGeometry, point: [f64; 2]) -> Result<ChannelVector> {
    let r = dist(point, [0.0, 0.0]);
    if r < 1e-9 {
        return Err(Error::Domain(
            "spherical channel undefined at the array center".into(),
        ));
    }
    let alpha = geometry.wavelength() / (4.0 * std::f64::consts::PI * r);
    let amp = (geometry.n_antennas() as f64).sqrt() * alpha;
    let mut v = steering_vector(geometry, point)?;
    v.entries *= Complex::new(amp, 0.0);
    Ok(v)
}
