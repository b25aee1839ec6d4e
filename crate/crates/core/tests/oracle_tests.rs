//! The brute-force and spectral cross-checks themselves: lattice
//! bookkeeping, sequential grid certification of the closed form, the
//! Pareto dominance scan, and Perron-root feasibility on structured
//! matrices with known roots.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hynoma_core::channel::SisoScenario;
use hynoma_core::oracle::{
    grid_search_siso, grid_search_siso_refined, pareto_scan_two_user, spectral_feasibility,
    GridSpec,
};
use hynoma_core::siso::{hybrid_closed_form, oma_allocation, AllocationSchedule};

fn sequential_grid_total(scenario: &SisoScenario, points: usize, passes: usize) -> f64 {
    let mut prior: Vec<Vec<f64>> = Vec::new();
    let mut total = 0.0;
    for user in 0..scenario.n_users() {
        let oma = (scenario.target_rate().exp() - 1.0) / scenario.gains()[user];
        let (powers, energy) =
            grid_search_siso_refined(scenario, user, &prior, 2.0 * oma, points, passes).unwrap();
        total += energy;
        prior.push(powers);
    }
    total
}

#[test]
fn grid_certifies_the_two_user_reference() {
    let scenario = SisoScenario::ordered(vec![2.0, 1.0], 2.0).unwrap();
    let total = sequential_grid_total(&scenario, 101, 2);
    let rel = (total - 9.134379743126681).abs() / 9.134379743126681;
    assert!(rel < 1e-3, "relative gap {rel}");
    // The grid can only sit above the continuum optimum.
    assert!(total >= 9.134379743126681 - 1e-9);
}

#[test]
fn grid_certifies_random_small_scenarios() {
    for t in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACE ^ t);
        let m = 2 + (t % 2) as usize;
        let rate: f64 = rng.random_range(0.5..4.0);
        let mut gains: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..4.0)).collect();
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let scenario = SisoScenario::ordered(gains, rate).unwrap();
        let closed: f64 = hybrid_closed_form(&scenario).unwrap().total_energy();
        let grid = sequential_grid_total(&scenario, 101, 2);
        let rel = (grid - closed).abs() / closed;
        assert!(rel < 1e-3, "t={t}: relative gap {rel}");
    }
}

#[test]
fn lattice_bookkeeping_is_consistent() {
    let grid = GridSpec::uniform(&[(0.0, 2.0), (1.0, 1.0), (0.5, 3.5)], 11).unwrap();
    assert_eq!(grid.dims(), 3);
    assert_eq!(grid.points(0), 11);
    assert_eq!(grid.points(1), 1, "degenerate axis is a single point");
    assert_eq!(grid.points(2), 11);
    assert_eq!(grid.total_points(), 11 * 11);
    assert_eq!(grid.value(0, 0), 0.0);
    assert!((grid.value(0, 10) - 2.0).abs() < 1e-12);
    assert!((grid.value(2, 5) - 2.0).abs() < 1e-12);
    // Resolution is the cost of rounding one point up in every dimension.
    assert!((grid.resolution() - (0.2 + 1.0 + 0.3)).abs() < 1e-12);
}

#[test]
fn grid_guards_reject_bad_requests() {
    let err = GridSpec::uniform(&vec![(0.0, 1.0); 5], 11).unwrap_err();
    assert!(err.to_string().contains("1 to 4"));

    let err = GridSpec::new(vec![0.0; 4], vec![1.0; 4], vec![1e-5; 4]).unwrap_err();
    assert!(err.to_string().contains("limit"));

    let err = GridSpec::new(vec![0.0], vec![1.0], vec![0.0]).unwrap_err();
    assert!(err.to_string().contains("positive step"));

    // A grid whose bounds cannot reach the rate target reports that the
    // search region is wrong rather than returning a garbage point.
    let scenario = SisoScenario::ordered(vec![1.0], 3.0).unwrap();
    let tiny = GridSpec::uniform(&[(0.0, 0.5)], 11).unwrap();
    let err = grid_search_siso(&scenario, 0, &[], &tiny).unwrap_err();
    assert!(err.to_string().contains("widen"), "got: {err}");
}

#[test]
fn dominance_scan_three_way() {
    let scenario = SisoScenario::ordered(vec![2.0, 1.0], 2.0).unwrap();
    let closed = hybrid_closed_form(&scenario).unwrap();
    let tau = scenario.target_rate().exp() - 1.0;
    let cap_1 = 2.0 * tau / scenario.gains()[0];
    let cap_2 = 2.0 * tau / scenario.gains()[1];
    let grid = GridSpec::uniform(&[(0.0, cap_1), (0.0, cap_2), (0.0, cap_2)], 201).unwrap();

    assert!(!pareto_scan_two_user(&scenario, &closed, &grid).unwrap());

    let mut padded_rows = closed.rows().to_vec();
    padded_rows[1][1] += 0.5;
    let padded = AllocationSchedule::from_rows(&scenario, padded_rows).unwrap();
    assert!(pareto_scan_two_user(&scenario, &padded, &grid).unwrap());

    let oma = oma_allocation(&scenario);
    assert!(pareto_scan_two_user(&scenario, &oma, &grid).unwrap());
}

#[test]
fn spectral_verdicts_on_known_roots() {
    // All-ones coupling between three users: the interference iteration
    // matrix has Perron root 2*tau.
    let ones = DMatrix::from_element(3, 3, 1.0);
    assert!(spectral_feasibility(&ones, 0.4999).unwrap());
    assert!(!spectral_feasibility(&ones, 0.5001).unwrap());

    // Pure cyclic coupling has a periodic iteration matrix, the case the
    // diagonal shift inside the bracketing loop exists for. Root: tau.
    let mut cyclic = DMatrix::from_element(4, 4, 0.0);
    for i in 0..4 {
        cyclic[(i, i)] = 1.0;
        cyclic[(i, (i + 1) % 4)] = 1.0;
    }
    assert!(spectral_feasibility(&cyclic, 0.999).unwrap());
    assert!(!spectral_feasibility(&cyclic, 1.001).unwrap());

    // No coupling at all: any finite target is feasible.
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 2.0, 1.0]));
    assert!(spectral_feasibility(&diag, 1e9).unwrap());
}

#[test]
fn refined_search_is_no_worse_than_its_coarse_pass() {
    let scenario = SisoScenario::ordered(vec![3.0, 1.2], 2.5).unwrap();
    let oma = (2.5f64.exp() - 1.0) / 1.2;
    let prior =
        vec![grid_search_siso_refined(&scenario, 0, &[], 2.0 * (2.5f64.exp() - 1.0) / 3.0, 61, 2)
            .unwrap()
            .0];
    let (_, coarse) = grid_search_siso_refined(&scenario, 1, &prior, 2.0 * oma, 61, 0).unwrap();
    let (_, fine) = grid_search_siso_refined(&scenario, 1, &prior, 2.0 * oma, 61, 2).unwrap();
    assert!(fine <= coarse + 1e-15);
}
