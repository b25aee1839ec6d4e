//! Single-antenna hybrid NOMA allocation.
//!
//! The legacy schedule gives user `m` exclusive use of slot `m`. Hybrid
//! operation lets user `m` additionally spend power in slots `0..m` (all
//! indices 0-based), where it is decoded first and cancelled by every later
//! user sharing the slot. Per-user solving in index order is exact: user
//! `m`'s problem depends only on the fixed powers of users `0..m`, and its
//! KKT system is plain water-filling over the slots.
//!
//! Two solver routes are kept deliberately separate so they can check each
//! other: [`hybrid_closed_form`] evaluates the all-slots-active solution
//! available under strictly decreasing gains, while
//! [`successive_allocation`] runs active-set water-filling per user and
//! works for any gain pattern.

use crate::channel::SisoScenario;
use crate::error::{Error, Result};

/// Lower-triangular power schedule: `power(m, i)` is what user `m` spends
/// in slot `i <= m`. Powers are noise-normalized and linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSchedule {
    scenario: SisoScenario,
    rows: Vec<Vec<f64>>,
}

impl AllocationSchedule {
    /// Builds a schedule from per-user rows; row `m` must hold the `m + 1`
    /// slot powers of user `m`. Entries within `-1e-12` of zero are snapped
    /// to exactly zero; anything more negative is rejected.
    pub fn from_rows(scenario: &SisoScenario, mut rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != scenario.n_users() {
            return Err(Error::Domain(format!(
                "expected {} rows, got {}",
                scenario.n_users(),
                rows.len()
            )));
        }
        for (m, row) in rows.iter_mut().enumerate() {
            if row.len() != m + 1 {
                return Err(Error::Domain(format!(
                    "row {m} must have {} entries, got {}",
                    m + 1,
                    row.len()
                )));
            }
            for p in row.iter_mut() {
                if !p.is_finite() || *p < -1e-12 {
                    return Err(Error::Domain(format!("invalid power {p} in row {m}")));
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            rows,
        })
    }

    /// All-zero schedule (the unique solution at target rate 0).
    pub fn zero(scenario: &SisoScenario) -> Self {
        let rows = (0..scenario.n_users()).map(|m| vec![0.0; m + 1]).collect();
        Self {
            scenario: scenario.clone(),
            rows,
        }
    }

    pub fn scenario(&self) -> &SisoScenario {
        &self.scenario
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    /// Power of user `m` in slot `i`; zero for `i > m` (users never occupy
    /// later slots than their own).
    pub fn power(&self, m: usize, i: usize) -> f64 {
        if i > m {
            0.0
        } else {
            self.rows[m][i]
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Interference user `m` must decode through in slot `i`: the powers of
    /// users `i..m` in that slot (their signals are decoded later in the
    /// SIC order and cannot be cancelled).
    pub fn interference_seen(&self, m: usize, i: usize) -> f64 {
        (i..m).map(|j| self.rows[j][i]).sum()
    }

    /// Total power accumulated in slot `i` by users `i..=m`.
    pub fn accumulated_interference(&self, m: usize, i: usize) -> f64 {
        (i..=m).map(|j| self.rows[j][i]).sum()
    }

    pub fn per_user_energy(&self, m: usize) -> f64 {
        self.scenario.slot_duration() * self.rows[m].iter().sum::<f64>()
    }

    pub fn per_user_energies(&self) -> Vec<f64> {
        (0..self.n_users()).map(|m| self.per_user_energy(m)).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.per_user_energies().iter().sum()
    }
}

/// Rate seen by decoder `k` for user `m`'s signal in slot `i`, requiring
/// `i <= k <= m`:
/// `log(1 + gain_k * P(m,i) / (gain_k * interference + 1))`,
/// where the interference is the slot-`i` power of users `i..m`.
pub fn decode_rate(schedule: &AllocationSchedule, m: usize, i: usize, k: usize) -> Result<f64> {
    if m >= schedule.n_users() || i > k || k > m {
        return Err(Error::Domain(format!(
            "decode_rate needs slot <= decoder <= user < n_users, got (m={m}, i={i}, k={k})"
        )));
    }
    let gain = schedule.scenario().gains()[k];
    let interference = schedule.interference_seen(m, i);
    let p = schedule.power(m, i);
    Ok((1.0 + gain * p / (gain * interference + 1.0)).ln())
}

/// Achievable rate of user `m` in slot `i`: the worst case over every
/// decoder `k` in `i..=m` that must recover this signal before cancelling
/// it. The minimum is attained at the weakest gain among those decoders.
pub fn effective_rate(schedule: &AllocationSchedule, m: usize, i: usize) -> Result<f64> {
    if m >= schedule.n_users() || i > m {
        return Err(Error::Domain(format!(
            "effective_rate needs slot <= user < n_users, got (m={m}, i={i})"
        )));
    }
    let mut worst = f64::INFINITY;
    for k in i..=m {
        worst = worst.min(decode_rate(schedule, m, i, k)?);
    }
    Ok(worst)
}

/// Per-slot achievable rates and per-user totals for a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    /// `per_slot[m][i]` is user `m`'s rate earned in slot `i`.
    pub per_slot: Vec<Vec<f64>>,
    /// Sum over slots per user; feasibility means each total reaches the
    /// scenario's target rate.
    pub totals: Vec<f64>,
}

pub fn rate_breakdown(schedule: &AllocationSchedule) -> RateBreakdown {
    let per_slot: Vec<Vec<f64>> = (0..schedule.n_users())
        .map(|m| {
            (0..=m)
                .map(|i| effective_rate(schedule, m, i).expect("indices in range"))
                .collect()
        })
        .collect();
    let totals = per_slot.iter().map(|r| r.iter().sum()).collect();
    RateBreakdown { per_slot, totals }
}

/// Worst channel gain among the decoders of user `m`'s slot-`i` signal:
/// `min(gains[i..=m])`. Under decreasing gains this is simply the gain of
/// user `m` itself, which is what collapses the per-user problem to a
/// single-gain water-filling instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMinGain {
    values: Vec<Vec<f64>>,
}

impl EffectiveMinGain {
    pub fn from_gains(gains: &[f64]) -> Self {
        let values = (0..gains.len())
            .map(|m| {
                let mut row = Vec::with_capacity(m + 1);
                for i in 0..=m {
                    row.push(gains[i..=m].iter().cloned().fold(f64::INFINITY, f64::min));
                }
                row
            })
            .collect();
        Self { values }
    }

    pub fn value(&self, m: usize, i: usize) -> f64 {
        self.values[m][i]
    }
}

/// Pure-TDMA baseline: each user spends `(e^R - 1) / gain` in its own slot
/// and nothing elsewhere.
pub fn oma_allocation(scenario: &SisoScenario) -> AllocationSchedule {
    let tau = scenario.target_rate().exp() - 1.0;
    let rows = scenario
        .gains()
        .iter()
        .enumerate()
        .map(|(m, &g)| {
            let mut row = vec![0.0; m + 1];
            row[m] = tau / g;
            row
        })
        .collect();
    AllocationSchedule {
        scenario: scenario.clone(),
        rows,
    }
}

/// Exact water-filling for one user's slot powers.
///
/// Slot `i` carries interference `slot_interference[i]` (already committed
/// by earlier users) and effective gain `effective_gains[i]`; the returned
/// powers minimize their sum subject to the total rate meeting
/// `target_rate`. Water-filling structure: `P_i = max(0, level - floor_i)`
/// with `floor_i = interference_i + 1/gain_i` and the water level set by
/// the rate budget over the active slots.
///
/// The active set is found exactly: floors are sorted ascending and each
/// prefix size is tested for a consistent level, which exists for exactly
/// one size. No iteration, no tolerance on the rate.
pub fn waterfill_user(
    slot_interference: &[f64],
    effective_gains: &[f64],
    target_rate: f64,
) -> Result<Vec<f64>> {
    let m = slot_interference.len();
    if m == 0 || effective_gains.len() != m {
        return Err(Error::Domain(format!(
            "need equal-length nonempty inputs, got {} and {}",
            m,
            effective_gains.len()
        )));
    }
    for (&i, &g) in slot_interference.iter().zip(effective_gains) {
        if !i.is_finite() || i < 0.0 || !g.is_finite() || g <= 0.0 {
            return Err(Error::Domain(format!(
                "interference must be >= 0 and gains > 0, got ({i}, {g})"
            )));
        }
    }
    if !target_rate.is_finite() || target_rate < 0.0 {
        return Err(Error::Domain(format!(
            "target_rate must be finite and nonnegative, got {target_rate}"
        )));
    }
    if target_rate == 0.0 {
        return Ok(vec![0.0; m]);
    }

    // floor_i in log domain; the level candidate for an active prefix of
    // size k is exp((R + sum of active log-floors) / k).
    let log_floor: Vec<f64> = slot_interference
        .iter()
        .zip(effective_gains)
        .map(|(&i, &g)| (i + 1.0 / g).ln())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| log_floor[a].partial_cmp(&log_floor[b]).unwrap());

    let mut acc = 0.0;
    for k in 1..=m {
        acc += log_floor[order[k - 1]];
        let log_level = (target_rate + acc) / k as f64;
        // The level must sit strictly above every active floor (all active
        // slots get positive power) and not above the next floor (inactive
        // slots would want power otherwise). The 1e-12 slack admits exact
        // ties between adjacent floors.
        if log_level <= log_floor[order[k - 1]] {
            continue;
        }
        if k < m && log_level > log_floor[order[k]] + 1e-12 {
            continue;
        }
        let level = log_level.exp();
        let mut powers = vec![0.0; m];
        for &idx in &order[..k] {
            powers[idx] = (level - log_floor[idx].exp()).max(0.0);
        }
        return Ok(powers);
    }
    // Unreachable in exact arithmetic: the candidate level is monotone in k
    // and must cross the floor sequence exactly once for a positive rate.
    Err(Error::Solver(
        "water-filling found no consistent active set".into(),
    ))
}

/// All-slots-active allocation for strictly decreasing gains.
///
/// With decreasing gains, user `m`'s effective gain is its own gain in
/// every slot, and the water level lands above every floor, so the
/// active-set search is unnecessary: user `m` fills all of slots `0..=m`
/// with strictly positive power. Users are solved in index order; each
/// solve sees only the committed powers of earlier users.
pub fn hybrid_closed_form(scenario: &SisoScenario) -> Result<AllocationSchedule> {
    if !scenario.is_ordered() {
        return Err(Error::Scenario(
            "closed form requires an order-checked scenario; \
             use successive_allocation for arbitrary gains"
                .into(),
        ));
    }
    let rate = scenario.target_rate();
    if rate == 0.0 {
        return Ok(AllocationSchedule::zero(scenario));
    }
    let gains = scenario.gains();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(gains.len());
    for (m, &gain) in gains.iter().enumerate() {
        let inv_gain = 1.0 / gain;
        // floor_i = interference_i + 1/gain_m; own slot has no interference.
        let floors: Vec<f64> = (0..=m)
            .map(|i| {
                let interference: f64 = (i..m).map(|j| rows[j][i]).sum();
                interference + inv_gain
            })
            .collect();
        let log_level =
            (rate + floors.iter().map(|f| f.ln()).sum::<f64>()) / (m + 1) as f64;
        let level = log_level.exp();
        rows.push(floors.iter().map(|f| level - f).collect());
    }
    AllocationSchedule::from_rows(scenario, rows)
}

/// Per-user successive allocation for arbitrary gain patterns.
///
/// User `m`'s slot-`i` signal must be decodable by every receiver in
/// `i..=m`, so the binding gain is the minimum over that window; with the
/// committed interference of earlier users this is exactly the
/// [`waterfill_user`] problem. Zero powers (users skipping shared slots)
/// come out of the active-set logic naturally.
pub fn successive_allocation(scenario: &SisoScenario) -> Result<AllocationSchedule> {
    let rate = scenario.target_rate();
    if rate == 0.0 {
        return Ok(AllocationSchedule::zero(scenario));
    }
    let min_gain = EffectiveMinGain::from_gains(scenario.gains());
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(scenario.n_users());
    for m in 0..scenario.n_users() {
        let interference: Vec<f64> = (0..=m)
            .map(|i| (i..m).map(|j| rows[j][i]).sum())
            .collect();
        let gains: Vec<f64> = (0..=m).map(|i| min_gain.value(m, i)).collect();
        rows.push(waterfill_user(&interference, &gains, rate)?);
    }
    AllocationSchedule::from_rows(scenario, rows)
}

/// Stationary point of the two-user uplink sharing problem.
///
/// Uplink differs from downlink in one decisive way: the shared slot's
/// interference is user 1's own transmission at full rate, so the
/// interference-plus-noise seen by user 2 equals `e^R` exactly, and the
/// KKT stationary point for user 2's slot-0 power,
/// `(sqrt(e^R * u) - u) / gain_2` with `u = gain_1 * P_1 + 1`,
/// evaluates to zero. Uplink hybrid operation degenerates to TDMA; the
/// second component is the plain OMA power `(e^R - 1) / gain_2`.
pub fn uplink_two_user(gain_1: f64, gain_2: f64, target_rate: f64) -> Result<(f64, f64)> {
    if !(gain_1 > gain_2 && gain_2 > 0.0) || !gain_1.is_finite() {
        return Err(Error::Domain(format!(
            "need gain_1 > gain_2 > 0, got ({gain_1}, {gain_2})"
        )));
    }
    if !target_rate.is_finite() || target_rate < 0.0 {
        return Err(Error::Domain(format!(
            "target_rate must be finite and nonnegative, got {target_rate}"
        )));
    }
    if target_rate == 0.0 {
        return Ok((0.0, 0.0));
    }
    let e_r = target_rate.exp();
    let p_1 = (e_r - 1.0) / gain_1;
    let u = gain_1 * p_1 + 1.0;
    let p_shared = ((e_r * u).sqrt() - u) / gain_2;
    let p_own = (e_r - 1.0) / gain_2;
    Ok((p_shared, p_own))
}

/// Per-user and total transmit energies of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub per_user: Vec<f64>,
    pub total: f64,
}

pub fn energy_report(schedule: &AllocationSchedule) -> EnergyReport {
    let per_user = schedule.per_user_energies();
    let total = per_user.iter().sum();
    EnergyReport { per_user, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_user() -> SisoScenario {
        SisoScenario::ordered(vec![2.0, 1.0], 2.0).unwrap()
    }

    #[test]
    fn oma_is_diagonal_and_rate_tight() {
        let s = oma_allocation(&two_user());
        assert_eq!(s.power(1, 0), 0.0);
        let rb = rate_breakdown(&s);
        for t in rb.totals {
            assert!((t - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn waterfill_single_slot_reduces_to_oma() {
        let p = waterfill_user(&[0.0], &[3.0], 1.5).unwrap();
        assert!((p[0] - (1.5f64.exp() - 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_symmetric_slots_split_equally() {
        let p = waterfill_user(&[0.7, 0.7], &[1.3, 1.3], 2.0).unwrap();
        assert!((p[0] - p[1]).abs() < 1e-12);
        assert!(p[0] > 0.0);
    }

    #[test]
    fn closed_form_rejects_unordered_scenarios() {
        let s = SisoScenario::new(vec![1.0, 2.0], 2.0).unwrap();
        assert!(hybrid_closed_form(&s).is_err());
    }

    #[test]
    fn zero_rate_gives_zero_schedule_everywhere() {
        let s = SisoScenario::ordered(vec![2.0, 1.0], 0.0).unwrap();
        assert_eq!(hybrid_closed_form(&s).unwrap().total_energy(), 0.0);
        assert_eq!(successive_allocation(&s).unwrap().total_energy(), 0.0);
        assert_eq!(oma_allocation(&s).total_energy(), 0.0);
    }
}
