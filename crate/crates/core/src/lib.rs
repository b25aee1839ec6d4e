//! Energy-minimizing power allocation for hybrid NOMA downlinks.
//!
//! Hybrid NOMA layers non-orthogonal transmissions on top of an existing
//! TDMA schedule: user `m` keeps its own slot but may additionally spend
//! power in the slots of earlier users, relying on successive interference
//! cancellation at the receivers. Spreading the same rate budget over more
//! slots is never worse than pure OMA and is strictly cheaper whenever more
//! than one user is scheduled.
//!
//! The crate provides:
//!
//! - [`siso`]: single-antenna allocation: the exact closed form for
//!   gain-ordered users, an active-set water-filling solver for arbitrary
//!   gain patterns, per-slot rate evaluation, and the uplink two-user case
//!   (where the hybrid gain vanishes and the schedule degenerates to TDMA).
//! - [`channel`]: Rayleigh fading gains with a configurable floor, and
//!   near-field array geometry with spherical-wavefront steering vectors.
//! - [`nearfield`]: two-group MISO systems built on a shared beam set:
//!   beamfocusing or zero-forcing beams, beam selection for the far group,
//!   and the effective scalar gain tables that reduce the vector problem to
//!   a small power-control problem.
//! - [`convex`]: the two in-repo solvers backing the MISO path, an exact
//!   linear power-control solve for SINR targets and a log-barrier Newton
//!   method for linear objectives under concave log-affine constraints.
//! - [`miso`]: OMA and hybrid allocation over the effective gains; the
//!   hybrid path runs successive convex approximation with feasible,
//!   monotone iterates.
//! - [`oracle`]: independent brute-force and spectral checks (grid search,
//!   Pareto scan, power-iteration feasibility) used by the verification
//!   suites and the test batteries.
//! - [`experiments`]: deterministic, seeded experiment runners with CSV
//!   emission, driving everything above from flat key-value configs.
//!
//! All rates are natural-log rates (nats per channel use); noise power is
//! normalized to 1, so powers and channel gains are dimensionless linear
//! quantities.

pub mod channel;
pub mod convex;
pub mod error;
pub mod experiments;
pub mod miso;
pub mod nearfield;
pub mod oracle;
pub mod siso;
pub mod stats;

pub use channel::{
    sample_rayleigh_gains, spherical_channel, steering_vector, wavelength_for_carrier,
    ChannelVector, NearFieldGeometry, SisoScenario, UserPosition,
};
pub use convex::{
    barrier_newton, solve_linear_power_control, BarrierOptions, ConcaveConstraintSpec,
    LinearPowerControlProblem, LogTerm, SolveReport, SolveStatus,
};
pub use error::{Error, Result};
pub use miso::{
    feasibility_ceiling, solve_miso_hybrid_sca, solve_miso_oma, FeasibilityCeiling,
    MisoAllocation, ScaOptions,
};
pub use nearfield::{
    assign_beams, build_beams, dbm_to_linear, effective_gains, rates_hybrid, select_beam,
    BeamMode, BeamSet, EffectiveGains, HybridRates, MisoScenario,
};
pub use oracle::{
    grid_search_siso, grid_search_siso_refined, pareto_scan_two_user, spectral_feasibility,
    GridSpec,
};
pub use siso::{
    decode_rate, effective_rate, energy_report, hybrid_closed_form, oma_allocation,
    rate_breakdown, successive_allocation, uplink_two_user, waterfill_user, AllocationSchedule,
    EffectiveMinGain, EnergyReport, RateBreakdown,
};
