//! In-repo convex solvers for the MISO allocation path.
//!
//! Two problem classes cover everything the allocation pipeline needs, and
//! both are small (a handful of variables), so purpose-built dense solvers
//! beat a general conic dependency:
//!
//! - SINR-target power control with linear coupling, solved exactly by one
//!   linear system ([`solve_linear_power_control`]),
//! - linear objectives under "concave log plus affine" inequalities and
//!   nonnegativity, solved by a log-barrier path-following Newton method
//!   ([`barrier_newton`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Outcome of a solver run. `x` is empty when no point is available
/// (infeasible power control).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// SINR-target problem over a nonnegative gain matrix `c`: find the
/// componentwise-minimal `P >= 0` with
/// `c_kk P_k / (sum_{i != k} c_ki P_i + noise) >= sinr_target` for all k.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPowerControlProblem {
    gain_matrix: DMatrix<f64>,
    sinr_target: f64,
    noise: f64,
}

impl LinearPowerControlProblem {
    pub fn new(gain_matrix: DMatrix<f64>, sinr_target: f64) -> Result<Self> {
        Self::with_noise(gain_matrix, sinr_target, 1.0)
    }

    pub fn with_noise(gain_matrix: DMatrix<f64>, sinr_target: f64, noise: f64) -> Result<Self> {
        let (r, c) = gain_matrix.shape();
        if r == 0 || r != c {
            return Err(Error::Scenario(format!(
                "gain matrix must be square and nonempty, got {r}x{c}"
            )));
        }
        for i in 0..r {
            for j in 0..c {
                let v = gain_matrix[(i, j)];
                if !v.is_finite() || v < 0.0 || (i == j && v <= 0.0) {
                    return Err(Error::Scenario(format!(
                        "gain matrix needs positive diagonal and nonnegative \
                         entries, got {v} at ({i}, {j})"
                    )));
                }
            }
        }
        if !sinr_target.is_finite() || sinr_target < 0.0 {
            return Err(Error::Scenario(format!(
                "sinr_target must be finite and nonnegative, got {sinr_target}"
            )));
        }
        if !(noise > 0.0) || !noise.is_finite() {
            return Err(Error::Scenario(format!(
                "noise must be positive, got {noise}"
            )));
        }
        Ok(Self {
            gain_matrix,
            sinr_target,
            noise,
        })
    }

    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.gain_matrix
    }

    pub fn sinr_target(&self) -> f64 {
        self.sinr_target
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn k_users(&self) -> usize {
        self.gain_matrix.nrows()
    }
}

/// Solves the SINR-target problem exactly.
///
/// At the minimal point every constraint is tight, which turns the problem
/// into `(D - tau C_off) P = tau * noise * 1` with `D` the diagonal and
/// `C_off` the off-diagonal part. That system has a nonnegative solution
/// exactly when the interference iteration is subcritical (spectral radius
/// of `tau D^-1 C_off` below one); otherwise the instance is infeasible and
/// reported as such, never as an error.
pub fn solve_linear_power_control(problem: &LinearPowerControlProblem) -> SolveReport {
    let k = problem.k_users();
    let tau = problem.sinr_target();
    if tau == 0.0 {
        return SolveReport {
            status: SolveStatus::Optimal,
            x: vec![0.0; k],
            objective: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
        };
    }
    let c = problem.gain_matrix();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = if i == j { c[(i, i)] } else { -tau * c[(i, j)] };
        }
    }
    let rhs = DVector::from_element(k, tau * problem.noise());
    let infeasible = SolveReport {
        status: SolveStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
        iterations: 0,
        kkt_residual: f64::INFINITY,
    };
    let Some(p) = a.clone().lu().solve(&rhs) else {
        // Singular system: the spectral radius sits exactly at the boundary.
        return infeasible;
    };
    if p.iter().any(|&v| !v.is_finite() || v < -1e-12) {
        return infeasible;
    }
    let residual = (&a * &p - &rhs).amax() / f64::max(1.0, tau * problem.noise());
    let x: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
    SolveReport {
        status: SolveStatus::Optimal,
        objective: x.iter().sum(),
        x,
        iterations: 1,
        kkt_residual: residual,
    }
}

/// One `weight * log(coeffs . x + offset)` term of a constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    pub weight: f64,
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// Inequality of the form
/// `sum_t w_t log(a_t . x + b_t) + f . x + s >= rhs`,
/// concave in `x` as long as every kept weight is positive (convex pieces
/// are the caller's job to linearize away first).
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveConstraintSpec {
    pub log_terms: Vec<LogTerm>,
    pub affine: Vec<f64>,
    pub affine_offset: f64,
    pub rhs: f64,
}

impl ConcaveConstraintSpec {
    /// Constraint slack at `x`, or `None` when `x` is outside the domain of
    /// some log term.
    pub fn slack(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.affine_offset - self.rhs;
        for (f, xi) in self.affine.iter().zip(x) {
            v += f * xi;
        }
        for term in &self.log_terms {
            let mut u = term.offset;
            for (a, xi) in term.coeffs.iter().zip(x) {
                u += a * xi;
            }
            if u <= 0.0 {
                return None;
            }
            v += term.weight * u.ln();
        }
        Some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Initial barrier weight.
    pub t0: f64,
    /// Barrier weight multiplier per outer stage.
    pub mu: f64,
    /// Total Newton-step budget across all stages.
    pub max_newton: usize,
    /// Duality-gap target for objectives of order one. For larger
    /// objectives the effective target is relative (1e-10 of the start
    /// objective), since an absolute gap below the floating-point noise of
    /// `t * c . x` is not reachable.
    pub gap_tol: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            max_newton: 500,
            gap_tol: 1e-8,
        }
    }
}

/// Internal state for one barrier solve, in coordinates scaled by the
/// start point so Hessian conditioning is independent of the raw power
/// scale.
struct BarrierWork<'a> {
    t: f64,
    cs: DVector<f64>,
    constraints: &'a [ConcaveConstraintSpec],
    scale: &'a [f64],
}

impl BarrierWork<'_> {
    /// Barrier value at `y`, or `None` outside the strictly feasible set.
    fn eval(&self, y: &DVector<f64>) -> Option<f64> {
        if y.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let x: Vec<f64> = y.iter().zip(self.scale).map(|(v, s)| v * s).collect();
        let mut b = self.t * self.cs.dot(y);
        for c in self.constraints {
            let slack = c.slack(&x)?;
            if slack <= 0.0 {
                return None;
            }
            b -= slack.ln();
        }
        for &v in y.iter() {
            b -= v.ln();
        }
        Some(b)
    }

    /// Gradient and Hessian at a strictly feasible `y`.
    fn grad_hess(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = y.len();
        let x: Vec<f64> = y.iter().zip(self.scale).map(|(v, s)| v * s).collect();
        let mut g = self.cs.clone() * self.t;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for c in self.constraints {
            let slack = c.slack(&x).expect("iterate left the domain");
            // Gradient of the constraint in scaled coordinates, plus the
            // curvature of each log term.
            let mut cg = DVector::<f64>::zeros(n);
            for (i, f) in c.affine.iter().enumerate() {
                cg[i] = f * self.scale[i];
            }
            let mut curv: Vec<(f64, DVector<f64>)> = Vec::with_capacity(c.log_terms.len());
            for term in &c.log_terms {
                let mut u = term.offset;
                for (a, xi) in term.coeffs.iter().zip(&x) {
                    u += a * xi;
                }
                let ay =
                    DVector::from_iterator(n, term.coeffs.iter().zip(self.scale).map(|(a, s)| a * s));
                cg.axpy(term.weight / u, &ay, 1.0);
                curv.push((term.weight / (u * u), ay));
            }
            // -log(slack): first-order and rank-one second-order parts.
            g.axpy(-1.0 / slack, &cg, 1.0);
            h.ger(1.0 / (slack * slack), &cg, &cg, 1.0);
            for (w_uu, ay) in &curv {
                h.ger(w_uu / slack, ay, ay, 1.0);
            }
        }
        for i in 0..n {
            g[i] -= 1.0 / y[i];
            h[(i, i)] += 1.0 / (y[i] * y[i]);
        }
        (g, h)
    }
}

/// Path-following barrier method for `min c . x` subject to concave
/// log-affine constraints and `x >= 0`.
///
/// The caller must supply a strictly feasible start (every constraint
/// slack and every coordinate positive); feasibility construction is the
/// caller's problem and an unfeasible start is an error, not a status.
/// Centering is damped Newton with backtracking line search; the reported
/// KKT residual is the final Newton decrement scaled to the objective
/// normal, the natural interior-point stationarity measure.
pub fn barrier_newton(
    objective: &[f64],
    constraints: &[ConcaveConstraintSpec],
    start: &[f64],
    options: &BarrierOptions,
) -> Result<SolveReport> {
    let n = start.len();
    if n == 0 || objective.len() != n {
        return Err(Error::Domain(format!(
            "objective dimension {} does not match start dimension {n}",
            objective.len()
        )));
    }
    for c in constraints {
        if c.affine.len() != n || c.log_terms.iter().any(|t| t.coeffs.len() != n) {
            return Err(Error::Domain(
                "constraint coefficient dimensions do not match the start".into(),
            ));
        }
    }
    if start.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Solver(
            "barrier start must be strictly positive".into(),
        ));
    }

    let scale = start.to_vec();
    let cs = DVector::from_iterator(n, objective.iter().zip(&scale).map(|(c, s)| c * s));
    let obj0: f64 = objective.iter().zip(start).map(|(c, x)| c * x).sum();
    let gap_target = f64::max(options.gap_tol, 1e-10 * obj0.abs());
    let m_total = (constraints.len() + n) as f64;
    let c_norm = objective.iter().fold(0.0f64, |a, &c| a.max(c.abs()));

    let mut work = BarrierWork {
        t: options.t0,
        cs,
        constraints,
        scale: &scale,
    };
    let mut y = DVector::from_element(n, 1.0);
    if work.eval(&y).is_none() {
        return Err(Error::Solver(
            "barrier start is not strictly feasible".into(),
        ));
    }

    let mut steps = 0usize;
    let mut exhausted = false;
    let mut lam2_last = 0.0f64;
    'stages: loop {
        let mut best = f64::INFINITY;
        let mut stale = 0u32;
        loop {
            if steps >= options.max_newton {
                exhausted = true;
                break 'stages;
            }
            let b0 = work.eval(&y).expect("iterate left the feasible set");
            let (g, h) = work.grad_hess(&y);

            // Newton direction, with a diagonal ridge retried on
            // factorization failure (near-singular Hessians show up when
            // the center path hugs the constraint boundary).
            let neg_g = -&g;
            let mut ridge = 0.0f64;
            let dx = loop {
                let mut hm = h.clone();
                if ridge > 0.0 {
                    for i in 0..n {
                        hm[(i, i)] += ridge;
                    }
                }
                match hm.cholesky() {
                    Some(ch) => break ch.solve(&neg_g),
                    None => {
                        let base = 1e-12 * f64::max(1.0, h.trace() / n as f64);
                        ridge = if ridge == 0.0 { base } else { ridge * 100.0 };
                        if ridge > 1e20 {
                            exhausted = true;
                            break 'stages;
                        }
                    }
                }
            };
            let lam2 = -g.dot(&dx);
            if !(lam2 > 0.0) {
                break;
            }
            lam2_last = lam2;
            // Centered when the decrement falls under the numerical noise
            // floor of the barrier value itself.
            if lam2 / 2.0 < f64::max(1e-10, 1e-14 * (1.0 + b0.abs())) {
                break;
            }

            steps += 1;
            let mut alpha = 1.0f64;
            let mut b_new = None;
            for _ in 0..120 {
                let cand = &y + &dx * alpha;
                if let Some(b) = work.eval(&cand) {
                    if b <= b0 - 0.25 * alpha * lam2 {
                        y = cand;
                        b_new = Some(b);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(b1) = b_new else {
                break; // no acceptable step; treat the stage as centered
            };
            if alpha * dx.norm() <= 1e-13 * (1.0 + y.norm()) {
                break;
            }
            if b1 < best - 1e-13 * (1.0 + b1.abs()) {
                best = b1;
                stale = 0;
            } else {
                stale += 1;
                if stale >= 8 {
                    break;
                }
            }
        }
        if m_total / work.t <= gap_target {
            break;
        }
        work.t *= options.mu;
    }

    let x: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();
    let objective_value = objective.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(SolveReport {
        status: if exhausted {
            SolveStatus::MaxIterations
        } else {
            SolveStatus::Optimal
        },
        x,
        objective: objective_value,
        iterations: steps,
        kkt_residual: lam2_last.sqrt() / (work.t * f64::max(1.0, c_norm)),
    })
}
