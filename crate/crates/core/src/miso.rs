//! Energy-minimal power allocation for the two-group MISO downlink.
//!
//! Both solvers work on the scalar [`EffectiveGains`] tables, so they are
//! agnostic to how the beams were built. The baseline gives every far
//! user its target rate entirely in the dedicated second phase, which is
//! a linear feasibility problem. The hybrid scheme also spends power on
//! first-phase add-on signals and splits the rate target across phases:
//!
//! ```txt
//!     (M/K) R_{k,1} + R_{k,2}  >=  R        for every far user k,
//! ```
//!
//! where the first-phase rate counts only if both the far user and its
//! paired near user can decode, so the constraint is imposed for both
//! receiver families. Minimizing  sum_k (M p_k + K e_k)  under these
//! coupled logarithmic constraints is nonconvex; it is solved by
//! successive convex approximation (SCA) with the standard
//! linearize-the-denominator inner approximation, each inner problem
//! going to [`barrier_newton`]. Every inner iterate is feasible for the
//! true constraints and the objective trace is nonincreasing, which the
//! callers rely on.

use nalgebra::DMatrix;

use crate::convex::{
    barrier_newton, solve_linear_power_control, BarrierOptions, ConcaveConstraintSpec,
    LinearPowerControlProblem, LogTerm, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::nearfield::{rates_hybrid, EffectiveGains};

/// Outcome of a baseline or hybrid power allocation.
///
/// `p` are first-phase add-on powers, `e` second-phase powers, and
/// `energy` the frame total `sum_k (M p_k + K e_k)`. An infeasible
/// instance carries empty power vectors and infinite energy. `sca_trace`
/// records the objective after each accepted SCA round (a single entry
/// for the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct MisoAllocation {
    pub p: Vec<f64>,
    pub e: Vec<f64>,
    pub energy: f64,
    pub status: SolveStatus,
    pub sca_trace: Vec<f64>,
    pub kkt_residual: f64,
}

impl MisoAllocation {
    fn infeasible() -> Self {
        Self {
            p: Vec::new(),
            e: Vec::new(),
            energy: f64::INFINITY,
            status: SolveStatus::Infeasible,
            sca_trace: Vec::new(),
            kkt_residual: 0.0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Knobs for the outer SCA loop. The defaults are what every caller in
/// this crate uses; they were chosen so the loop terminates in a handful
/// of rounds on realistic gain tables.
#[derive(Debug, Clone)]
pub struct ScaOptions {
    /// Maximum number of linearize-and-solve rounds.
    pub max_outer: usize,
    /// Stop once a round improves the objective by less than this
    /// fraction of its magnitude.
    pub rel_improvement: f64,
    /// Stop when the expansion point sits on the true constraint
    /// boundary; the inner problem has an empty interior there.
    pub boundary_tol: f64,
    pub barrier: BarrierOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            rel_improvement: 1e-6,
            boundary_tol: 1e-9,
            barrier: BarrierOptions::default(),
        }
    }
}

fn validate_rate(target_rate: f64) -> Result<()> {
    if !target_rate.is_finite() || target_rate < 0.0 {
        return Err(Error::Domain(format!(
            "target rate must be finite and nonnegative, got {target_rate}"
        )));
    }
    Ok(())
}

/// Baseline allocation: each far user meets the full target in its
/// dedicated slot, first-phase powers all zero. Reduces to linear power
/// control at SINR target `e^R - 1` over the second-phase gain table.
pub fn solve_miso_oma(gains: &EffectiveGains, target_rate: f64) -> Result<MisoAllocation> {
    validate_rate(target_rate)?;
    let k_users = gains.b.len();
    let tau = target_rate.exp_m1();
    let problem = LinearPowerControlProblem::new(gains.c.clone(), tau)?;
    let report = solve_linear_power_control(&problem);
    if report.status != SolveStatus::Optimal {
        return Ok(MisoAllocation::infeasible());
    }
    let energy = k_users as f64 * report.x.iter().sum::<f64>();
    Ok(MisoAllocation {
        p: vec![0.0; k_users],
        e: report.x,
        energy,
        status: SolveStatus::Optimal,
        sca_trace: vec![energy],
        kkt_residual: report.kkt_residual,
    })
}

/// Second-phase powers hitting `rate` exactly, or None if linear power
/// control cannot reach that SINR target. Operates on a bare gain table
/// so the SCA can call it on rescaled copies.
fn second_phase_for_rate(c: &DMatrix<f64>, rate: f64) -> Option<Vec<f64>> {
    let tau = rate.exp_m1();
    let problem = LinearPowerControlProblem::new(c.clone(), tau).ok()?;
    let report = solve_linear_power_control(&problem);
    (report.status == SolveStatus::Optimal).then_some(report.x)
}

/// Worst slack of the true (nonlinear) rate constraints at powers
/// `x = [p, e]`, in nats. Negative means infeasible.
fn min_constraint_slack(
    gains: &EffectiveGains,
    m_users: usize,
    target_rate: f64,
    x: &[f64],
) -> f64 {
    let k_users = gains.b.len();
    let weight = m_users as f64 / k_users as f64;
    let rates = rates_hybrid(gains, &x[..k_users], &x[k_users..])
        .expect("slack evaluation on validated powers");
    let mut worst = f64::INFINITY;
    for k in 0..k_users {
        let far = weight * rates.g2_direct[k] + rates.second_phase[k] - target_rate;
        let near = weight * rates.g1_decode[k] + rates.second_phase[k] - target_rate;
        worst = worst.min(far).min(near);
    }
    worst
}

/// Largest modulus eigenvalue of the second-phase interference iteration
/// matrix `D^-1 C_off`. Governs how much common SINR the dedicated slots
/// can support; used only to pick a sensible relaxed target for the
/// first-phase-heavy start.
fn interference_spectral_radius(c: &DMatrix<f64>) -> f64 {
    let k = c.nrows();
    let mut iter = DMatrix::zeros(k, k);
    for row in 0..k {
        for col in 0..k {
            if row != col {
                iter[(row, col)] = c[(row, col)] / c[(row, row)];
            }
        }
    }
    iter.complex_eigenvalues().iter().map(|ev| ev.norm()).fold(0.0, f64::max)
}

/// Start that leans on the first phase: second-phase powers sized for a
/// deliberately modest rate, first-phase powers doubled from a sliver
/// until the true constraints hold strictly.
fn first_phase_heavy_start(
    gains: &EffectiveGains,
    m_users: usize,
    target_rate: f64,
) -> Option<Vec<f64>> {
    let k_users = gains.b.len();
    let rho = interference_spectral_radius(&gains.c);
    let relaxed = if rho > 0.0 {
        (0.5 * (1.0 + 1.0 / rho).ln()).min(0.5 * target_rate)
    } else {
        0.5 * target_rate
    };
    let e0 = second_phase_for_rate(&gains.c, relaxed)?;
    let mut x = vec![1e-6; 2 * k_users];
    for (slot, e) in x[k_users..].iter_mut().zip(&e0) {
        *slot = e * (1.0 + 1e-6);
    }
    for _ in 0..60 {
        if min_constraint_slack(gains, m_users, target_rate, &x) > 1e-6 {
            return Some(x);
        }
        for p in &mut x[..k_users] {
            *p *= 2.0;
        }
    }
    None
}

/// One SCA descent from `x0`, which must satisfy the true constraints
/// strictly. Returns the final iterate, the objective trace, and the
/// largest KKT residual reported by the inner solves.
fn sca_descent(
    gains: &EffectiveGains,
    m_users: usize,
    target_rate: f64,
    objective: &[f64],
    x0: Vec<f64>,
    options: &ScaOptions,
) -> (Vec<f64>, Vec<f64>, f64) {
    let k_users = gains.b.len();
    let weight = m_users as f64 / k_users as f64;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0;
    let mut trace = vec![dot(objective, &x)];
    let mut max_kkt = 0.0f64;
    for _ in 0..options.max_outer {
        if min_constraint_slack(gains, m_users, target_rate, &x) < options.boundary_tol {
            break;
        }
        let (p_bar, e_bar) = x.split_at(k_users);
        let mut constraints = Vec::with_capacity(2 * k_users);
        for (cross, base) in [(&gains.g, &gains.b), (&gains.h, &gains.d)] {
            for k in 0..k_users {
                let mut a_first = vec![0.0; 2 * k_users];
                let mut a_second = vec![0.0; 2 * k_users];
                for j in 0..k_users {
                    a_first[j] = cross[(k, j)];
                    a_second[k_users + j] = gains.c[(k, j)];
                }
                // Interference seen by the linearized denominators at the
                // expansion point (own-signal terms excluded).
                let mut up = base[k];
                let mut ue = 1.0;
                for j in 0..k_users {
                    if j != k {
                        up += cross[(k, j)] * p_bar[j];
                        ue += gains.c[(k, j)] * e_bar[j];
                    }
                }
                let mut affine = vec![0.0; 2 * k_users];
                for j in 0..k_users {
                    if j != k {
                        affine[j] = -weight * cross[(k, j)] / up;
                        affine[k_users + j] = -gains.c[(k, j)] / ue;
                    }
                }
                let rhs = target_rate + weight * up.ln() + ue.ln()
                    - weight * (up - base[k]) / up
                    - (ue - 1.0) / ue;
                constraints.push(ConcaveConstraintSpec {
                    log_terms: vec![
                        LogTerm { weight, coeffs: a_first, offset: base[k] },
                        LogTerm { weight: 1.0, coeffs: a_second, offset: 1.0 },
                    ],
                    affine,
                    affine_offset: 0.0,
                    rhs,
                });
            }
        }
        let report: SolveReport =
            match barrier_newton(objective, &constraints, &x, &options.barrier) {
                Ok(report) => report,
                Err(err) => {
                    log::warn!("inner solve failed, stopping descent: {err}");
                    break;
                }
            };
        max_kkt = max_kkt.max(report.kkt_residual);
        let obj = dot(objective, &report.x);
        let last = *trace.last().expect("trace starts nonempty");
        if obj > last - options.rel_improvement * last.abs().max(1.0) {
            if obj < last {
                x = report.x;
                trace.push(obj);
            }
            break;
        }
        x = report.x;
        trace.push(obj);
    }
    (x, trace, max_kkt)
}

/// Hybrid allocation by successive convex approximation.
///
/// Two starts are tried (a perturbed baseline point and a
/// first-phase-heavy point) and the cheaper result kept; if the plain
/// baseline beats both, it is returned verbatim, so a feasible baseline
/// guarantees `energy <= baseline energy`. Returns an infeasible
/// allocation only when no start satisfies the constraints.
pub fn solve_miso_hybrid_sca(
    gains: &EffectiveGains,
    m_users: usize,
    target_rate: f64,
    options: &ScaOptions,
) -> Result<MisoAllocation> {
    validate_rate(target_rate)?;
    let k_users = gains.b.len();
    if m_users <= k_users {
        return Err(Error::Domain(format!(
            "need more group-1 beams than far users, got M={m_users}, K={k_users}"
        )));
    }
    if target_rate == 0.0 {
        return Ok(MisoAllocation {
            p: vec![0.0; k_users],
            e: vec![0.0; k_users],
            energy: 0.0,
            status: SolveStatus::Optimal,
            sca_trace: vec![0.0],
            kkt_residual: 0.0,
        });
    }

    // Rescale the gain tables so that powers of interest are O(1); the
    // inner solver's absolute tolerances assume that. Powers scale back
    // by the same factor on the way out.
    let unit = (0..k_users)
        .map(|k| {
            (gains.b[k] / gains.g[(k, k)])
                .max(gains.d[k] / gains.h[(k, k)])
                .max(1.0 / gains.c[(k, k)])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !unit.is_finite() || unit <= 0.0 {
        return Err(Error::Domain(format!(
            "gain tables give no usable power unit (derived scale {unit})"
        )));
    }
    let scaled = EffectiveGains {
        g: &gains.g * unit,
        h: &gains.h * unit,
        c: &gains.c * unit,
        b: gains.b.clone(),
        d: gains.d.clone(),
        assignment: gains.assignment.clone(),
    };

    let e_baseline = second_phase_for_rate(&scaled.c, target_rate);
    let mut starts = Vec::new();
    if let Some(e0) = &e_baseline {
        let mut x = vec![1e-6; 2 * k_users];
        for (slot, e) in x[k_users..].iter_mut().zip(e0) {
            *slot = e * (1.0 + 1e-6);
        }
        starts.push(x);
    }
    if let Some(x) = first_phase_heavy_start(&scaled, m_users, target_rate) {
        starts.push(x);
    }
    if starts.is_empty() {
        return Ok(MisoAllocation::infeasible());
    }

    let mut objective = vec![m_users as f64; 2 * k_users];
    for slot in &mut objective[k_users..] {
        *slot = k_users as f64;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut max_kkt = 0.0f64;
    for x0 in starts {
        let (x, trace, kkt) = sca_descent(&scaled, m_users, target_rate, &objective, x0, options);
        max_kkt = max_kkt.max(kkt);
        if best.as_ref().is_none_or(|(bx, _)| dot(&objective, &x) < dot(&objective, bx)) {
            best = Some((x, trace));
        }
    }
    let (mut x, mut trace) = best.expect("at least one start ran");
    if let Some(e0) = &e_baseline {
        // The baseline point is itself feasible for the hybrid problem;
        // keep it whenever the descent did not beat it.
        let baseline_obj = k_users as f64 * e0.iter().sum::<f64>();
        if baseline_obj < dot(&objective, &x) {
            x = vec![0.0; 2 * k_users];
            x[k_users..].copy_from_slice(e0);
            trace.push(baseline_obj);
        }
    }

    let slack = min_constraint_slack(&scaled, m_users, target_rate, &x);
    if slack < -1e-8 {
        return Err(Error::Solver(format!(
            "descent returned an infeasible point (slack {slack:.3e})"
        )));
    }
    let energy = dot(&objective, &x) * unit;
    Ok(MisoAllocation {
        p: x[..k_users].iter().map(|v| v * unit).collect(),
        e: x[k_users..].iter().map(|v| v * unit).collect(),
        energy,
        status: SolveStatus::Optimal,
        sca_trace: trace.into_iter().map(|t| t * unit).collect(),
        kkt_residual: max_kkt,
    })
}

/// Supremum of the feasible target-rate range of a solver, probed as a
/// black box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeasibilityCeiling {
    /// Feasible at every rate probed, up to a very large cap.
    Unbounded,
    /// Largest rate confirmed feasible; infeasibility starts no more
    /// than the bisection tolerance above it.
    RateLimit(f64),
}

/// Brackets the feasibility boundary of `feasible_at` by doubling from
/// rate 1, then bisects to a relative width of 1e-9. The predicate must
/// be monotone (feasible below some threshold, infeasible above), which
/// holds for both allocation schemes in this crate.
pub fn feasibility_ceiling(
    mut feasible_at: impl FnMut(f64) -> Result<bool>,
) -> Result<FeasibilityCeiling> {
    const CAP: f64 = 1e12;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while feasible_at(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > CAP {
            return Ok(FeasibilityCeiling::Unbounded);
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-9 * lo.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FeasibilityCeiling::RateLimit(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-built gain tables standing in for a small system with M=4
    /// beams and K=2 far users. Diagonals dominate, as any reasonable
    /// beam design gives.
    fn toy_gains() -> EffectiveGains {
        EffectiveGains {
            g: DMatrix::from_row_slice(2, 2, &[5.0, 0.1, 0.2, 4.0]),
            h: DMatrix::from_row_slice(2, 2, &[6.0, 0.15, 0.1, 7.0]),
            c: DMatrix::from_row_slice(2, 2, &[3.0, 0.05, 0.04, 2.5]),
            b: vec![1.2, 1.1],
            d: vec![1.05, 1.3],
            assignment: vec![0, 1],
        }
    }

    #[test]
    fn baseline_single_user_closed_form() {
        let gains = EffectiveGains {
            g: DMatrix::from_element(1, 1, 2.0),
            h: DMatrix::from_element(1, 1, 3.0),
            c: DMatrix::from_element(1, 1, 4.0),
            b: vec![1.5],
            d: vec![1.2],
            assignment: vec![0],
        };
        let alloc = solve_miso_oma(&gains, 2.0).unwrap();
        let expected = (2.0f64.exp() - 1.0) / 4.0;
        assert!((alloc.e[0] - expected).abs() < 1e-12);
        assert!((alloc.energy - expected).abs() < 1e-12);
        assert_eq!(alloc.p, vec![0.0]);
    }

    #[test]
    fn baseline_detects_overtight_coupling() {
        // Off-diagonals as strong as the diagonal: even tau = 1 is out
        // of reach, so a rate of ln 2 must already be infeasible.
        let gains = EffectiveGains {
            g: DMatrix::identity(2, 2),
            h: DMatrix::identity(2, 2),
            c: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            b: vec![1.0, 1.0],
            d: vec![1.0, 1.0],
            assignment: vec![0, 1],
        };
        let alloc = solve_miso_oma(&gains, 0.7).unwrap();
        assert_eq!(alloc.status, SolveStatus::Infeasible);
        assert!(alloc.energy.is_infinite());
    }

    #[test]
    fn zero_rate_costs_nothing() {
        let gains = toy_gains();
        let oma = solve_miso_oma(&gains, 0.0).unwrap();
        let hybrid = solve_miso_hybrid_sca(&gains, 4, 0.0, &ScaOptions::default()).unwrap();
        assert_eq!(oma.energy, 0.0);
        assert_eq!(hybrid.energy, 0.0);
    }

    #[test]
    fn hybrid_feasible_monotone_and_no_worse_than_baseline() {
        let gains = toy_gains();
        let target = 2.0;
        let oma = solve_miso_oma(&gains, target).unwrap();
        let hybrid = solve_miso_hybrid_sca(&gains, 4, target, &ScaOptions::default()).unwrap();
        assert_eq!(hybrid.status, SolveStatus::Optimal);
        assert!(hybrid.energy <= oma.energy + 1e-6);
        for pair in hybrid.sca_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * pair[0].max(1.0));
        }
        let x: Vec<f64> = hybrid.p.iter().chain(&hybrid.e).copied().collect();
        assert!(min_constraint_slack(&gains, 4, target, &x) >= -1e-8);
        assert!(hybrid.kkt_residual < 1e-6);
    }

    #[test]
    fn weak_first_phase_falls_back_to_baseline_point() {
        // First-phase gains so poor that add-on power is wasted; the
        // solver must hand back the exact baseline allocation.
        let mut gains = toy_gains();
        gains.g *= 1e-9;
        gains.h *= 1e-9;
        let target = 1.0;
        let oma = solve_miso_oma(&gains, target).unwrap();
        let hybrid = solve_miso_hybrid_sca(&gains, 4, target, &ScaOptions::default()).unwrap();
        assert!(hybrid.p.iter().all(|&p| p == 0.0));
        assert!((hybrid.energy - oma.energy).abs() <= 1e-9 * oma.energy);
    }

    #[test]
    fn ceiling_brackets_a_step_predicate() {
        let limit = 3.7;
        let ceiling = feasibility_ceiling(|r| Ok(r <= limit)).unwrap();
        match ceiling {
            FeasibilityCeiling::RateLimit(r) => {
                assert!((r - limit).abs() <= 1e-8 * limit, "got {r}");
            }
            FeasibilityCeiling::Unbounded => panic!("expected a finite ceiling"),
        }
        let open = feasibility_ceiling(|_| Ok(true)).unwrap();
        assert_eq!(open, FeasibilityCeiling::Unbounded);
    }
}
