//! Two-group near-field MISO systems on a shared beam set.
//!
//! Group 1 (near users) owns the legacy beams and the first transmission
//! phase; group 2 (far users) gets a dedicated second phase and may, under
//! hybrid operation, additionally ride on one group-1 beam during the
//! first phase. Everything downstream of beam construction works on scalar
//! effective gains, so this module's job is to reduce the vector channel
//! model to those tables exactly once.
//!
//! `beam_mode` selects the construction for both groups: beamfocusing
//! points a steering vector at each user (fine angle and range selectivity
//! inside the Rayleigh distance, but nonzero cross-talk), zero-forcing
//! nulls intra-group interference by pseudo-inverse at the cost of array
//! gain. The OMA baseline inherits the cross-talk structure of whichever
//! mode is active, which is what makes the two modes genuinely different
//! regimes to compare.

use nalgebra::{Complex, DMatrix, DVector};

use crate::channel::{spherical_channel, steering_vector, NearFieldGeometry, UserPosition};
use crate::error::{Error, Result};

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamMode {
    Beamfocusing,
    ZeroForcing,
}

impl BeamMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BeamMode::Beamfocusing => "beamfocusing",
            BeamMode::ZeroForcing => "zero_forcing",
        }
    }
}

impl std::str::FromStr for BeamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beamfocusing" | "bf" => Ok(BeamMode::Beamfocusing),
            "zero_forcing" | "zf" => Ok(BeamMode::ZeroForcing),
            other => Err(Error::Scenario(format!(
                "unknown beam mode {other:?} (expected beamfocusing|zero_forcing)"
            ))),
        }
    }
}

/// Converts a dBm figure to the noise-normalized linear power used
/// throughout (noise power is 1 by convention).
pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// A two-group MISO scenario: array geometry, M near (group-1) users, K
/// far (group-2) users, the fixed legacy per-beam power, the common target
/// rate, and the beam construction mode.
///
/// `gain_scale` multiplies every channel power gain; it compensates for
/// whatever link-budget normalization puts receive SNRs into a workable
/// range and defaults to 1 (strict free-space gains).
#[derive(Debug, Clone, PartialEq)]
pub struct MisoScenario {
    geometry: NearFieldGeometry,
    g1_positions: Vec<UserPosition>,
    g2_positions: Vec<UserPosition>,
    p_g1: f64,
    target_rate: f64,
    beam_mode: BeamMode,
    gain_scale: f64,
}

impl MisoScenario {
    pub fn new(
        geometry: NearFieldGeometry,
        g1_positions: Vec<UserPosition>,
        g2_positions: Vec<UserPosition>,
        p_g1: f64,
        target_rate: f64,
        beam_mode: BeamMode,
    ) -> Result<Self> {
        let (m, k) = (g1_positions.len(), g2_positions.len());
        if k < 1 || m <= k {
            return Err(Error::Scenario(format!(
                "need more group-1 than group-2 users and at least one far user, \
                 got M={m}, K={k}"
            )));
        }
        if !(p_g1 > 0.0) || !p_g1.is_finite() {
            return Err(Error::Scenario(format!(
                "legacy power must be positive, got {p_g1}"
            )));
        }
        if !target_rate.is_finite() || target_rate < 0.0 {
            return Err(Error::Scenario(format!(
                "target_rate must be finite and nonnegative, got {target_rate}"
            )));
        }
        Ok(Self {
            geometry,
            g1_positions,
            g2_positions,
            p_g1,
            target_rate,
            beam_mode,
            gain_scale: 1.0,
        })
    }

    pub fn with_gain_scale(mut self, gain_scale: f64) -> Result<Self> {
        if !(gain_scale > 0.0) || !gain_scale.is_finite() {
            return Err(Error::Scenario(format!(
                "gain_scale must be positive, got {gain_scale}"
            )));
        }
        self.gain_scale = gain_scale;
        Ok(self)
    }

    pub fn geometry(&self) -> &NearFieldGeometry {
        &self.geometry
    }

    pub fn g1_positions(&self) -> &[UserPosition] {
        &self.g1_positions
    }

    pub fn g2_positions(&self) -> &[UserPosition] {
        &self.g2_positions
    }

    pub fn p_g1(&self) -> f64 {
        self.p_g1
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn beam_mode(&self) -> BeamMode {
        self.beam_mode
    }

    pub fn gain_scale(&self) -> f64 {
        self.gain_scale
    }

    pub fn m_users(&self) -> usize {
        self.g1_positions.len()
    }

    pub fn k_users(&self) -> usize {
        self.g2_positions.len()
    }

    /// Spherical channels of one group, scaled by sqrt(gain_scale) so all
    /// derived power gains carry the configured normalization.
    fn channels(&self, positions: &[UserPosition]) -> Result<Vec<DVector<C64>>> {
        let amp = Complex::new(self.gain_scale.sqrt(), 0.0);
        positions
            .iter()
            .map(|p| {
                let v = spherical_channel(&self.geometry, p.cartesian())?;
                Ok(v.into_entries() * amp)
            })
            .collect()
    }

    pub fn g1_channels(&self) -> Result<Vec<DVector<C64>>> {
        self.channels(&self.g1_positions)
    }

    pub fn g2_channels(&self) -> Result<Vec<DVector<C64>>> {
        self.channels(&self.g2_positions)
    }
}

/// Unit-norm transmit beams for both groups.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    g1: Vec<DVector<C64>>,
    g2: Vec<DVector<C64>>,
}

impl BeamSet {
    pub fn g1(&self) -> &[DVector<C64>] {
        &self.g1
    }

    pub fn g2(&self) -> &[DVector<C64>] {
        &self.g2
    }
}

/// Zero-forcing beams for a stacked channel matrix: the columns of
/// `H (H^H H)^-1`, rescaled to unit norm. Row `i` of `H^H W` is then a
/// multiple of the `i`-th unit vector, so intra-group cross-talk vanishes.
fn zero_forcing_beams(channels: &[DVector<C64>], group: &'static str) -> Result<Vec<DVector<C64>>> {
    let n = channels[0].len();
    let m = channels.len();
    let h = DMatrix::<C64>::from_fn(n, m, |r, c| channels[c][r]);
    let gram = h.adjoint() * &h;
    let inv = gram
        .cholesky()
        .ok_or(Error::RankDeficient { group })?
        .inverse();
    let w = &h * inv;
    Ok((0..m)
        .map(|c| {
            let col = w.column(c).into_owned();
            let norm = col.norm();
            col / Complex::new(norm, 0.0)
        })
        .collect())
}

/// Builds the beam sets of both groups according to `beam_mode`.
pub fn build_beams(scenario: &MisoScenario) -> Result<BeamSet> {
    match scenario.beam_mode() {
        BeamMode::Beamfocusing => {
            let focus = |positions: &[UserPosition]| -> Result<Vec<DVector<C64>>> {
                positions
                    .iter()
                    .map(|p| Ok(steering_vector(scenario.geometry(), p.cartesian())?.into_entries()))
                    .collect()
            };
            Ok(BeamSet {
                g1: focus(scenario.g1_positions())?,
                g2: focus(scenario.g2_positions())?,
            })
        }
        BeamMode::ZeroForcing => Ok(BeamSet {
            g1: zero_forcing_beams(&scenario.g1_channels()?, "G1")?,
            g2: zero_forcing_beams(&scenario.g2_channels()?, "G2")?,
        }),
    }
}

/// Picks the group-1 beam that far user `k` rides during the first phase.
///
/// Beamfocusing mode matches by departure angle (the beam pointing closest
/// to the user's angle); zero-forcing mode picks the beam with the largest
/// effective channel gain, since ZF beam shapes have no simple angular
/// reading. Ties resolve to the lowest index.
pub fn select_beam(scenario: &MisoScenario, beams: &BeamSet, k: usize) -> Result<usize> {
    if k >= scenario.k_users() {
        return Err(Error::Domain(format!(
            "far-user index {k} out of range (K = {})",
            scenario.k_users()
        )));
    }
    match scenario.beam_mode() {
        BeamMode::Beamfocusing => {
            let target = scenario.g2_positions()[k].angle();
            let mut best = 0;
            let mut best_gap = f64::INFINITY;
            for (m, p) in scenario.g1_positions().iter().enumerate() {
                let gap = (p.angle() - target).abs();
                if gap < best_gap {
                    best_gap = gap;
                    best = m;
                }
            }
            Ok(best)
        }
        BeamMode::ZeroForcing => {
            let g_k = &scenario.g2_channels()?[k];
            let mut best = 0;
            let mut best_gain = f64::NEG_INFINITY;
            for (m, w) in beams.g1().iter().enumerate() {
                let gain = g_k.dotc(w).norm_sqr();
                if gain > best_gain {
                    best_gain = gain;
                    best = m;
                }
            }
            Ok(best)
        }
    }
}

/// Runs [`select_beam`] for every far user. Duplicate selections are legal
/// (the rate formulas handle them) but unusual for sane geometries, so
/// they are logged.
pub fn assign_beams(scenario: &MisoScenario, beams: &BeamSet) -> Result<Vec<usize>> {
    let assignment: Vec<usize> = (0..scenario.k_users())
        .map(|k| select_beam(scenario, beams, k))
        .collect::<Result<_>>()?;
    let mut seen = vec![false; scenario.m_users()];
    for &m in &assignment {
        if seen[m] {
            log::warn!("multiple far users selected group-1 beam {m}");
        }
        seen[m] = true;
    }
    Ok(assignment)
}

/// The scalar gain tables that close over the vector channel model.
///
/// With `i^j` the assigned group-1 beam of far user `j`:
/// - `g[(k, j)]`: far user k's gain of beam `i^j`,
/// - `h[(k, j)]`: near user `i^k`'s gain of beam `i^j`,
/// - `c[(k, i)]`: far user k's gain of the group-2 beam serving user i,
/// - `b[k]`, `d[k]`: legacy-interference-plus-noise floors at far user k
///   and near user `i^k` (legacy power times total beam gain, plus 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub assignment: Vec<usize>,
}

pub fn effective_gains(
    scenario: &MisoScenario,
    beams: &BeamSet,
    assignment: &[usize],
) -> Result<EffectiveGains> {
    let m_users = scenario.m_users();
    let k_users = scenario.k_users();
    if assignment.len() != k_users || assignment.iter().any(|&m| m >= m_users) {
        return Err(Error::Domain(format!(
            "assignment must give one group-1 beam per far user, got {assignment:?}"
        )));
    }
    let g1_ch = scenario.g1_channels()?;
    let g2_ch = scenario.g2_channels()?;
    let p_g1 = scenario.p_g1();

    let gain = |ch: &DVector<C64>, w: &DVector<C64>| ch.dotc(w).norm_sqr();

    let g = DMatrix::from_fn(k_users, k_users, |k, j| {
        gain(&g2_ch[k], &beams.g1()[assignment[j]])
    });
    let h = DMatrix::from_fn(k_users, k_users, |k, j| {
        gain(&g1_ch[assignment[k]], &beams.g1()[assignment[j]])
    });
    let c = DMatrix::from_fn(k_users, k_users, |k, i| gain(&g2_ch[k], &beams.g2()[i]));
    let b = (0..k_users)
        .map(|k| p_g1 * beams.g1().iter().map(|w| gain(&g2_ch[k], w)).sum::<f64>() + 1.0)
        .collect();
    let d = (0..k_users)
        .map(|k| {
            p_g1 * beams.g1().iter().map(|w| gain(&g1_ch[assignment[k]], w)).sum::<f64>() + 1.0
        })
        .collect();
    Ok(EffectiveGains {
        g,
        h,
        c,
        b,
        d,
        assignment: assignment.to_vec(),
    })
}

/// Per-user rates of the hybrid scheme at first-phase powers `p` and
/// second-phase powers `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridRates {
    /// Rate at which near user `i^k` can decode far user k's add-on
    /// signal (it must, to cancel it before its own data).
    pub g1_decode: Vec<f64>,
    /// Rate at which far user k decodes its own add-on signal directly.
    pub g2_direct: Vec<f64>,
    /// First-phase rate that actually counts: the worse of the two
    /// decoders above.
    pub first_phase: Vec<f64>,
    /// Second-phase (dedicated-slot) rate of far user k.
    pub second_phase: Vec<f64>,
}

pub fn rates_hybrid(gains: &EffectiveGains, p: &[f64], e: &[f64]) -> Result<HybridRates> {
    let k_users = gains.b.len();
    if p.len() != k_users || e.len() != k_users {
        return Err(Error::Domain(format!(
            "power vectors must have length {k_users}, got {} and {}",
            p.len(),
            e.len()
        )));
    }
    if p.iter().chain(e).any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Domain("powers must be finite and nonnegative".into()));
    }
    let sinr_rate = |table: &DMatrix<f64>, floor: f64, powers: &[f64], k: usize| {
        let mut interference = floor;
        for (j, &pw) in powers.iter().enumerate() {
            if j != k {
                interference += table[(k, j)] * pw;
            }
        }
        (1.0 + table[(k, k)] * powers[k] / interference).ln()
    };
    let mut rates = HybridRates {
        g1_decode: Vec::with_capacity(k_users),
        g2_direct: Vec::with_capacity(k_users),
        first_phase: Vec::with_capacity(k_users),
        second_phase: Vec::with_capacity(k_users),
    };
    for k in 0..k_users {
        let at_near = sinr_rate(&gains.h, gains.d[k], p, k);
        let at_far = sinr_rate(&gains.g, gains.b[k], p, k);
        rates.g1_decode.push(at_near);
        rates.g2_direct.push(at_far);
        rates.first_phase.push(at_near.min(at_far));
        rates.second_phase.push(sinr_rate(&gains.c, 1.0, e, k));
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::wavelength_for_carrier;

    fn small_scenario(mode: BeamMode) -> MisoScenario {
        let geom = NearFieldGeometry::ula(33, wavelength_for_carrier(28e9)).unwrap();
        let g1 = vec![
            UserPosition::new(-0.5, 20.0).unwrap(),
            UserPosition::new(0.1, 35.0).unwrap(),
            UserPosition::new(0.9, 25.0).unwrap(),
        ];
        let g2 = vec![
            UserPosition::new(0.12, 150.0).unwrap(),
            UserPosition::new(-0.45, 180.0).unwrap(),
        ];
        MisoScenario::new(geom, g1, g2, 10.0, 3.0, mode).unwrap()
    }

    #[test]
    fn beams_are_unit_norm_in_both_modes() {
        for mode in [BeamMode::Beamfocusing, BeamMode::ZeroForcing] {
            let scn = small_scenario(mode);
            let beams = build_beams(&scn).unwrap();
            for w in beams.g1().iter().chain(beams.g2()) {
                assert!((w.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_forcing_nulls_intra_group_crosstalk() {
        let scn = small_scenario(BeamMode::ZeroForcing);
        let beams = build_beams(&scn).unwrap();
        let h = scn.g1_channels().unwrap();
        for (i, ch) in h.iter().enumerate() {
            for (m, w) in beams.g1().iter().enumerate() {
                let cross = ch.dotc(w).norm();
                if i != m {
                    assert!(cross < 1e-9, "|h_{i}^H w_{m}| = {cross}");
                } else {
                    assert!(cross > 0.0);
                }
            }
        }
    }

    #[test]
    fn focused_beam_matched_filter_gain() {
        let scn = small_scenario(BeamMode::Beamfocusing);
        let beams = build_beams(&scn).unwrap();
        let h = scn.g1_channels().unwrap();
        // A steering beam at the user's own point is a matched filter:
        // |h^H w|^2 equals the full channel power N * alpha^2.
        for (ch, w) in h.iter().zip(beams.g1()) {
            let self_gain = ch.dotc(w).norm_sqr();
            let full = ch.norm_squared();
            assert!((self_gain / full - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_angle_match_selects_that_beam() {
        let scn = small_scenario(BeamMode::Beamfocusing);
        let beams = build_beams(&scn).unwrap();
        // User 0 sits at angle 0.12; group-1 user 1 at 0.1 is closest.
        assert_eq!(select_beam(&scn, &beams, 0).unwrap(), 1);
        assert_eq!(select_beam(&scn, &beams, 1).unwrap(), 0);
    }

    #[test]
    fn legacy_power_zero_gives_unit_noise_floors() {
        let geom = NearFieldGeometry::ula(17, 0.0107).unwrap();
        let g1 = vec![
            UserPosition::new(-0.3, 15.0).unwrap(),
            UserPosition::new(0.4, 22.0).unwrap(),
        ];
        let g2 = vec![UserPosition::new(0.0, 90.0).unwrap()];
        // p_g1 must be positive in a real scenario; build the tables from a
        // tiny legacy power and check the floors approach 1.
        let scn = MisoScenario::new(geom, g1, g2, 1e-30, 1.0, BeamMode::Beamfocusing).unwrap();
        let beams = build_beams(&scn).unwrap();
        let assignment = assign_beams(&scn, &beams).unwrap();
        let eg = effective_gains(&scn, &beams, &assignment).unwrap();
        assert!((eg.b[0] - 1.0).abs() < 1e-12);
        assert!((eg.d[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_far_user_gain_matches_direct_inner_product() {
        let scn = small_scenario(BeamMode::Beamfocusing);
        let beams = build_beams(&scn).unwrap();
        let assignment = assign_beams(&scn, &beams).unwrap();
        let eg = effective_gains(&scn, &beams, &assignment).unwrap();
        let g2 = scn.g2_channels().unwrap();
        let direct = g2[0].dotc(&beams.g1()[assignment[0]]).norm_sqr();
        assert!((eg.g[(0, 0)] - direct).abs() <= 1e-15 * direct);
    }
}
