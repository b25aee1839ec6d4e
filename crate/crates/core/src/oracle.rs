//! Brute-force and analytic cross-checks for the allocation solvers.
//!
//! Everything here deliberately avoids the solver code paths it is meant
//! to check. The grid searches recompute decoding rates from raw powers
//! with the literal min-over-decoders form instead of calling into
//! [`crate::siso`], and the spectral feasibility test decides linear
//! power control by Perron root bracketing instead of solving the linear
//! system. Agreement between these routes and the production solvers is
//! what the verification suites assert.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::SisoScenario;
use crate::error::{Error, Result};
use crate::siso::AllocationSchedule;

/// Axis-aligned search grid, at most four dimensions.
///
/// Dimension d samples `lower[d] + j * step[d]` for `j = 0..points(d)`.
/// The guard on total point count keeps accidental huge products from
/// running for hours; callers wanting finer resolution should refine
/// around a coarse optimum instead.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    step: Vec<f64>,
}

impl GridSpec {
    pub const MAX_POINTS: u64 = 100_000_000;

    pub fn new(lower: Vec<f64>, upper: Vec<f64>, step: Vec<f64>) -> Result<Self> {
        let dims = lower.len();
        if dims == 0 || dims > 4 {
            return Err(Error::Grid(format!(
                "grid must have 1 to 4 dimensions, got {dims}"
            )));
        }
        if upper.len() != dims || step.len() != dims {
            return Err(Error::Grid(
                "lower, upper, and step must have equal lengths".into(),
            ));
        }
        for d in 0..dims {
            if !lower[d].is_finite() || !upper[d].is_finite() || !step[d].is_finite() {
                return Err(Error::Grid(format!("dimension {d} has non-finite bounds")));
            }
            if !(step[d] > 0.0) {
                return Err(Error::Grid(format!(
                    "dimension {d} needs a positive step, got {}",
                    step[d]
                )));
            }
            if upper[d] < lower[d] {
                return Err(Error::Grid(format!(
                    "dimension {d} has upper bound {} below lower bound {}",
                    upper[d], lower[d]
                )));
            }
        }
        let spec = Self { lower, upper, step };
        let total = spec.total_points();
        if total > Self::MAX_POINTS {
            return Err(Error::Grid(format!(
                "grid has {total} points (saturated count), limit is {}",
                Self::MAX_POINTS
            )));
        }
        Ok(spec)
    }

    /// Grid over `bounds` with a fixed point count per dimension; the
    /// step is derived so the last point lands on the upper bound.
    pub fn uniform(bounds: &[(f64, f64)], points_per_dim: usize) -> Result<Self> {
        if points_per_dim < 2 {
            return Err(Error::Grid("need at least 2 points per dimension".into()));
        }
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let upper: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        let step = bounds
            .iter()
            .map(|&(lo, hi)| {
                if hi > lo {
                    (hi - lo) / (points_per_dim - 1) as f64
                } else {
                    // Degenerate axis: a single point; any positive step
                    // keeps the invariants satisfied.
                    1.0
                }
            })
            .collect();
        Self::new(lower, upper, step)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn points(&self, dim: usize) -> u64 {
        // The small slack tolerates bounds like upper = lower + n*step
        // computed in floating point.
        ((self.upper[dim] - self.lower[dim]) / self.step[dim] + 1e-9).floor() as u64 + 1
    }

    /// Total point count, saturating on overflow (the constructor
    /// rejects anything near saturation anyway).
    pub fn total_points(&self) -> u64 {
        (0..self.dims()).fold(1u64, |acc, d| acc.saturating_mul(self.points(d)))
    }

    pub fn value(&self, dim: usize, index: u64) -> f64 {
        self.lower[dim] + index as f64 * self.step[dim]
    }

    /// Sum of per-dimension steps: the energy resolution of the grid,
    /// since rounding each coordinate up by one step keeps rate
    /// constraints satisfied and costs at most this much extra power.
    pub fn resolution(&self) -> f64 {
        self.step.iter().sum()
    }

    fn decode(&self, mut flat: u64, out: &mut [f64]) {
        for dim in (0..self.dims()).rev() {
            let n = self.points(dim);
            out[dim] = self.value(dim, flat % n);
            flat /= n;
        }
    }
}

/// Rate of user `m` computed straight from raw powers: per slot, the
/// minimum over all users that must decode the signal, each seeing the
/// interference of stronger users' signals in that slot. Kept local to
/// this module on purpose.
fn min_form_user_rate(gains: &[f64], m: usize, prior_rows: &[Vec<f64>], powers: &[f64]) -> f64 {
    let mut total = 0.0;
    for (slot, &power) in powers.iter().enumerate() {
        let interference: f64 = prior_rows
            .iter()
            .skip(slot)
            .map(|row| row[slot])
            .sum();
        let mut slot_rate = f64::INFINITY;
        for decoder in slot..=m {
            let g = gains[decoder];
            slot_rate = slot_rate.min((1.0 + g * power / (g * interference + 1.0)).ln());
        }
        total += slot_rate;
    }
    total
}

fn validate_prior_rows(user: usize, prior_rows: &[Vec<f64>]) -> Result<()> {
    if prior_rows.len() != user {
        return Err(Error::Grid(format!(
            "need one committed power row per earlier user ({user}), got {}",
            prior_rows.len()
        )));
    }
    for (j, row) in prior_rows.iter().enumerate() {
        if row.len() != j + 1 {
            return Err(Error::Grid(format!(
                "prior row {j} must have {} entries, got {}",
                j + 1,
                row.len()
            )));
        }
        if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::Grid(format!("prior row {j} has invalid powers")));
        }
    }
    Ok(())
}

/// Exhaustive minimum-energy search over user `m`'s slot powers, with
/// the powers of all earlier users fixed.
///
/// Every grid point is checked for feasibility against the exact
/// min-form rate; among feasible points the one with the least energy
/// wins, ties going to the lexicographically first index. Returns the
/// winning powers and their energy (slot duration included).
pub fn grid_search_siso(
    scenario: &SisoScenario,
    user: usize,
    prior_rows: &[Vec<f64>],
    grid: &GridSpec,
) -> Result<(Vec<f64>, f64)> {
    if user >= scenario.n_users() {
        return Err(Error::Grid(format!(
            "user {user} out of range for {} users",
            scenario.n_users()
        )));
    }
    validate_prior_rows(user, prior_rows)?;
    if grid.dims() != user + 1 {
        return Err(Error::Grid(format!(
            "user {user} occupies {} slots but the grid has {} dimensions",
            user + 1,
            grid.dims()
        )));
    }
    let gains = scenario.gains();
    let target = scenario.target_rate();
    let slack = 1e-12 * target.max(1.0);
    let total = grid.total_points();

    // (energy, flat index) pairs combine by lexicographic minimum, so the
    // outcome does not depend on how rayon splits the range.
    let best = (0..total)
        .into_par_iter()
        .fold(
            || (f64::INFINITY, u64::MAX),
            |acc, flat| {
                let mut powers = [0.0; 4];
                grid.decode(flat, &mut powers[..user + 1]);
                let rate = min_form_user_rate(gains, user, prior_rows, &powers[..user + 1]);
                if rate < target - slack {
                    return acc;
                }
                let energy: f64 = powers[..user + 1].iter().sum();
                if (energy, flat) < acc {
                    (energy, flat)
                } else {
                    acc
                }
            },
        )
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if a < b { a } else { b });

    if !best.0.is_finite() {
        return Err(Error::Grid(
            "no feasible point on the grid; widen the bounds".into(),
        ));
    }
    let mut powers = vec![0.0; user + 1];
    grid.decode(best.1, &mut powers);
    Ok((powers, best.0 * scenario.slot_duration()))
}

/// Grid search with step refinement: a coarse pass over
/// `[0, upper]` per slot, then `passes` further grids centered on the
/// incumbent with a window of three coarse steps each way (clamped to
/// nonnegative powers).
pub fn grid_search_siso_refined(
    scenario: &SisoScenario,
    user: usize,
    prior_rows: &[Vec<f64>],
    upper: f64,
    points_per_dim: usize,
    passes: usize,
) -> Result<(Vec<f64>, f64)> {
    if !(upper > 0.0) || !upper.is_finite() {
        return Err(Error::Grid(format!("upper bound must be positive, got {upper}")));
    }
    let dims = user + 1;
    let mut grid = GridSpec::uniform(&vec![(0.0, upper); dims], points_per_dim)?;
    let (mut powers, mut energy) = grid_search_siso(scenario, user, prior_rows, &grid)?;
    // Each pass shrinks the lattice spacing by 6/(points-1) and then
    // rescans several windows centred on the incumbent. The extra
    // rounds shift the lattice phase by an irrational fraction of the
    // fine step: the energy of a near-boundary point depends on how
    // far the lattice rounds it up to feasibility, so a single fixed
    // lattice can systematically miss the continuum minimiser while a
    // handful of phase-shifted rescans cannot. Recentring also lets
    // the window track a shallow valley instead of collapsing onto the
    // first interior point found.
    const ROUNDS_PER_PASS: usize = 6;
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    for _ in 0..passes {
        let scale = grid.step.clone();
        for round in 0..ROUNDS_PER_PASS {
            let bounds: Vec<(f64, f64)> = (0..dims)
                .map(|d| {
                    let half = 3.0 * scale[d];
                    let fine = 6.0 * scale[d] / (points_per_dim - 1).max(1) as f64;
                    let jitter = fine * ((round * (d + 2)) as f64 * GOLDEN).fract();
                    ((powers[d] - half - jitter).max(0.0), powers[d] + half - jitter)
                })
                .collect();
            grid = GridSpec::uniform(&bounds, points_per_dim)?;
            let (p, e) = grid_search_siso(scenario, user, prior_rows, &grid)?;
            if e < energy {
                powers = p;
                energy = e;
            }
        }
    }
    Ok((powers, energy))
}

/// Scans a three-dimensional grid over the two-user power variables
/// (user 1's sole slot power, then user 2's two slot powers) for a
/// feasible schedule that Pareto-dominates `candidate` in per-user
/// energy. Dominance must exceed the grid resolution to count, so a
/// genuinely optimal candidate cannot be flagged by discretization
/// noise.
pub fn pareto_scan_two_user(
    scenario: &SisoScenario,
    candidate: &AllocationSchedule,
    grid: &GridSpec,
) -> Result<bool> {
    if scenario.n_users() != 2 {
        return Err(Error::Grid(format!(
            "dominance scan is for two users, scenario has {}",
            scenario.n_users()
        )));
    }
    if grid.dims() != 3 {
        return Err(Error::Grid(format!(
            "two-user scan needs a 3-dimensional grid, got {}",
            grid.dims()
        )));
    }
    let t = scenario.slot_duration();
    let gains = scenario.gains();
    let target = scenario.target_rate();
    let slack = 1e-12 * target.max(1.0);
    let e1 = candidate.per_user_energy(0);
    let e2 = candidate.per_user_energy(1);
    let tol = t * grid.resolution();
    let total = grid.total_points();

    let dominated = (0..total).into_par_iter().any(|flat| {
        let mut v = [0.0; 3];
        grid.decode(flat, &mut v);
        let cand_e1 = t * v[0];
        let cand_e2 = t * (v[1] + v[2]);
        if cand_e1 > e1 + tol || cand_e2 > e2 + tol {
            return false;
        }
        if cand_e1 >= e1 - tol && cand_e2 >= e2 - tol {
            return false;
        }
        let first = vec![v[0]];
        if min_form_user_rate(gains, 0, &[], &first) < target - slack {
            return false;
        }
        min_form_user_rate(gains, 1, &[first], &v[1..]) >= target - slack
    });
    Ok(dominated)
}

/// Decides feasibility of linear power control at SINR target `tau` by
/// bracketing the Perron root of the interference iteration matrix
/// `tau * D^-1 C_off` with Collatz-Wielandt ratios under power
/// iteration. Feasible iff that root is below 1.
///
/// A small diagonal shift is added before iterating; it breaks the
/// oscillation that pure power iteration exhibits on matrices with
/// periodic structure and moves the root by exactly the shift.
pub fn spectral_feasibility(c: &DMatrix<f64>, tau: f64) -> Result<bool> {
    let k = c.nrows();
    if k == 0 || c.ncols() != k {
        return Err(Error::Domain("gain matrix must be square and nonempty".into()));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "SINR target must be finite and nonnegative, got {tau}"
        )));
    }
    for i in 0..k {
        if !(c[(i, i)] > 0.0) {
            return Err(Error::Domain(format!("diagonal gain {i} must be positive")));
        }
        for j in 0..k {
            if i != j && (!c[(i, j)].is_finite() || c[(i, j)] < 0.0) {
                return Err(Error::Domain(format!(
                    "cross gain ({i},{j}) must be finite and nonnegative"
                )));
            }
        }
    }
    if tau == 0.0 || k == 1 {
        return Ok(true);
    }

    const SHIFT: f64 = 1e-3;
    let b = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            SHIFT
        } else {
            tau * c[(i, j)] / c[(i, i)]
        }
    });
    let mut x = DMatrix::from_element(k, 1, 1.0);
    let mut bracket = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..10_000 {
        let y = &b * &x;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..k {
            let ratio = y[(i, 0)] / x[(i, 0)];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        bracket = (lo - SHIFT, hi - SHIFT);
        // The Perron root sits inside the bracket at every iteration, so
        // a verdict is safe as soon as the whole bracket clears 1.
        if bracket.1 < 1.0 - 1e-12 {
            return Ok(true);
        }
        if bracket.0 > 1.0 + 1e-12 {
            return Ok(false);
        }
        if bracket.1 - bracket.0 <= 1e-10 * bracket.1.abs().max(1.0) {
            break;
        }
        let norm = y.amax();
        x = y / norm;
    }
    let rho = 0.5 * (bracket.0 + bracket.1);
    if bracket.1 - bracket.0 > 1e-10 * bracket.1.abs().max(1.0) {
        log::warn!(
            "Perron bracket did not converge ({:.3e}, {:.3e}); using midpoint",
            bracket.0,
            bracket.1
        );
    }
    Ok(rho < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_grid_lands_on_closed_form() {
        let scenario = SisoScenario::new(vec![1.7], 2.0).unwrap();
        let exact = (2.0f64.exp() - 1.0) / 1.7;
        let grid = GridSpec::uniform(&[(0.0, 2.0 * exact)], 101).unwrap();
        let (powers, energy) = grid_search_siso(&scenario, 0, &[], &grid).unwrap();
        assert!((powers[0] - exact).abs() <= grid.step[0] + 1e-12);
        assert!(energy >= exact - 1e-12);
    }

    #[test]
    fn infeasible_grid_is_an_error() {
        let scenario = SisoScenario::new(vec![1.0], 3.0).unwrap();
        // Needs about 19.1 units of power; bound at 1 has no feasible point.
        let grid = GridSpec::uniform(&[(0.0, 1.0)], 11).unwrap();
        let err = grid_search_siso(&scenario, 0, &[], &grid).unwrap_err();
        assert!(err.to_string().contains("widen"));
    }

    #[test]
    fn grid_guard_rejects_huge_products() {
        let err = GridSpec::new(
            vec![0.0; 4],
            vec![1.0; 4],
            vec![1e-5; 4],
        )
        .unwrap_err();
        assert!(err.to_string().contains("limit"));
    }

    #[test]
    fn refinement_tightens_the_single_user_estimate() {
        let scenario = SisoScenario::new(vec![1.7], 2.0).unwrap();
        let exact = (2.0f64.exp() - 1.0) / 1.7;
        let (_, coarse) =
            grid_search_siso_refined(&scenario, 0, &[], 2.0 * exact, 41, 0).unwrap();
        let (_, fine) = grid_search_siso_refined(&scenario, 0, &[], 2.0 * exact, 41, 2).unwrap();
        assert!(fine <= coarse + 1e-15);
        assert!((fine - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn spectral_verdict_matches_symmetric_two_user_root() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spectral_feasibility(&c, 0.999).unwrap());
        assert!(!spectral_feasibility(&c, 1.001).unwrap());
    }

    #[test]
    fn diagonal_matrix_is_feasible_at_any_target() {
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 1.0]));
        for tau in [0.0, 1.0, 1e6] {
            assert!(spectral_feasibility(&c, tau).unwrap());
        }
    }
}
