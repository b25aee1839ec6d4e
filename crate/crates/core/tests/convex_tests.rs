//! The two in-repo solvers checked against each other and against
//! independent routes: linear power control vs. a barrier solve of the
//! same problem written as a linear program, and the barrier method vs.
//! exact water-filling on a separable rate constraint.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hynoma_core::convex::{
    barrier_newton, solve_linear_power_control, BarrierOptions, ConcaveConstraintSpec,
    LinearPowerControlProblem, LogTerm, SolveStatus,
};
use hynoma_core::oracle::spectral_feasibility;
use hynoma_core::siso::waterfill_user;

fn random_gain_matrix(rng: &mut ChaCha8Rng, k: usize, off_hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            rng.random_range(0.5..2.0)
        } else {
            rng.random_range(0.0..off_hi)
        }
    })
}

fn sinr(c: &DMatrix<f64>, e: &[f64], k: usize) -> f64 {
    let mut interference = 1.0;
    for (i, &ei) in e.iter().enumerate() {
        if i != k {
            interference += c[(k, i)] * ei;
        }
    }
    c[(k, k)] * e[k] / interference
}

/// The power-control fixed point is the componentwise-least feasible
/// vector, so it also minimizes the total power linear program. Solving
/// that LP with the barrier method must land on the same point.
#[test]
fn barrier_lp_recast_matches_power_control() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..40 {
        let k = 2 + trial % 3;
        let c = random_gain_matrix(&mut rng, k, 0.15);
        let tau = rng.random_range(0.3..1.2);
        let problem = LinearPowerControlProblem::new(c.clone(), tau).unwrap();
        let direct = solve_linear_power_control(&problem);
        assert_eq!(direct.status, SolveStatus::Optimal, "trial {trial}");

        let constraints: Vec<ConcaveConstraintSpec> = (0..k)
            .map(|row| {
                let affine: Vec<f64> = (0..k)
                    .map(|j| {
                        if j == row {
                            c[(row, row)]
                        } else {
                            -tau * c[(row, j)]
                        }
                    })
                    .collect();
                ConcaveConstraintSpec {
                    log_terms: vec![],
                    affine,
                    affine_offset: 0.0,
                    rhs: tau,
                }
            })
            .collect();
        let start: Vec<f64> = direct.x.iter().map(|&v| 2.0 * v + 1.0).collect();
        let report = barrier_newton(&vec![1.0; k], &constraints, &start, &BarrierOptions::default())
            .unwrap();
        assert_eq!(report.status, SolveStatus::Optimal, "trial {trial}");
        for (a, b) in report.x.iter().zip(&direct.x) {
            assert!(
                (a - b).abs() < 1e-5 * b.max(1.0),
                "trial {trial}: barrier {a} vs direct {b}"
            );
        }
    }
}

#[test]
fn barrier_two_slot_split_matches_waterfilling() {
    let (a1, a2, rate) = (1.8, 0.6, 2.1);
    let exact = waterfill_user(&[0.0, 0.0], &[a1, a2], rate).unwrap();

    let constraint = ConcaveConstraintSpec {
        log_terms: vec![
            LogTerm {
                weight: 1.0,
                coeffs: vec![a1, 0.0],
                offset: 1.0,
            },
            LogTerm {
                weight: 1.0,
                coeffs: vec![0.0, a2],
                offset: 1.0,
            },
        ],
        affine: vec![0.0, 0.0],
        affine_offset: 0.0,
        rhs: rate,
    };
    let tau = rate.exp() - 1.0;
    let start = [1.5 * tau / a1, 1.5 * tau / a2];
    let report =
        barrier_newton(&[1.0, 1.0], &[constraint], &start, &BarrierOptions::default()).unwrap();
    assert_eq!(report.status, SolveStatus::Optimal);
    assert!(report.kkt_residual < 1e-6);
    for (b, w) in report.x.iter().zip(&exact) {
        assert!((b - w).abs() < 1e-5 * w.max(1.0), "{b} vs {w}");
    }
}

#[test]
fn power_control_verdict_matches_spectral_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut feasible_seen = 0;
    for trial in 0..300 {
        let c = random_gain_matrix(&mut rng, 3, 0.45);
        let tau = rng.random_range(0.2..1.2f64.exp() - 1.0);
        let expected = spectral_feasibility(&c, tau).unwrap();
        let report =
            solve_linear_power_control(&LinearPowerControlProblem::new(c.clone(), tau).unwrap());
        let got = report.status == SolveStatus::Optimal;
        assert_eq!(got, expected, "trial {trial}: verdicts disagree");
        if got {
            feasible_seen += 1;
            for k in 0..3 {
                let rel = (sinr(&c, &report.x, k) - tau).abs() / tau;
                assert!(rel < 1e-10, "trial {trial}, user {k}: slack {rel}");
            }
        }
    }
    assert!(feasible_seen > 50, "population degenerated: {feasible_seen}");
}

#[test]
fn power_control_is_monotone_in_the_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let c = random_gain_matrix(&mut rng, 3, 0.1);
        let tau_lo = rng.random_range(0.2..0.6);
        let tau_hi = tau_lo + rng.random_range(0.1..0.5);
        let lo =
            solve_linear_power_control(&LinearPowerControlProblem::new(c.clone(), tau_lo).unwrap());
        let hi =
            solve_linear_power_control(&LinearPowerControlProblem::new(c.clone(), tau_hi).unwrap());
        assert_eq!(lo.status, SolveStatus::Optimal);
        assert_eq!(hi.status, SolveStatus::Optimal);
        for (a, b) in hi.x.iter().zip(&lo.x) {
            assert!(a >= b, "powers must grow with the SINR target");
        }
    }
}

#[test]
fn barrier_keeps_iterates_inside_the_domain() {
    // A nearly-active log term close to the optimum: the solver must
    // approach the boundary without ever stepping through it (an Err or a
    // non-finite report would surface here).
    let constraint = ConcaveConstraintSpec {
        log_terms: vec![LogTerm {
            weight: 1.0,
            coeffs: vec![1.0],
            offset: 1e-6,
        }],
        affine: vec![0.0],
        affine_offset: 0.0,
        rhs: 0.5,
    };
    let report = barrier_newton(&[1.0], &[constraint], &[10.0], &BarrierOptions::default()).unwrap();
    assert!(report.x[0].is_finite());
    let exact = 0.5f64.exp() - 1e-6;
    assert!((report.x[0] - exact).abs() < 1e-5 * exact);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feasible_power_control_is_tight_and_nonnegative(
        seed in 0u64..1 << 32,
        tau in 0.2..1.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Row sums of the off-diagonal stay below 0.2, so the interference
        // iteration is a contraction for every tau below 1 and the
        // instance is guaranteed feasible.
        let c = random_gain_matrix(&mut rng, 3, 0.1);
        let report =
            solve_linear_power_control(&LinearPowerControlProblem::new(c.clone(), tau).unwrap());
        prop_assert_eq!(report.status, SolveStatus::Optimal);
        for k in 0..3 {
            prop_assert!(report.x[k] >= 0.0);
            let rel = (sinr(&c, &report.x, k) - tau).abs() / tau;
            prop_assert!(rel < 1e-10);
        }
    }
}
