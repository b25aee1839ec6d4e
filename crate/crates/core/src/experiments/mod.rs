//! Configuration-driven experiment runners.
//!
//! An experiment is described by a flat `key = value` config (file and/or
//! command-line overrides), validated into an [`ExperimentConfig`], and
//! executed by one of the runners, which produce CSV text. All runners
//! are deterministic for a fixed config: per-trial RNG streams are
//! derived from `seed XOR trial_index`, trials run in parallel but are
//! collected in index order, and floating-point aggregation uses a fixed
//! summation scheme. Running the same config twice yields byte-identical
//! output.
//!
//! The `verify` runner is different in kind: it executes the invariant
//! suites (closed form vs. brute-force oracle, interference
//! equalization, uplink degeneration, Pareto scans, spectral
//! cross-checks) and reports per-check pass/fail rather than experiment
//! data.

pub mod config;
pub mod csvfmt;
pub mod runners;
pub mod verify;

pub use config::{
    build_config, merge_entries, parse_raw, ExperimentConfig, ExperimentKind, Origin, RawEntry,
};
pub use csvfmt::fmt6;
pub use runners::{run_miso_det, run_miso_sweep, run_siso_det, run_siso_sweep};
pub use verify::{run_verify, CheckOutcome, VerifyReport};
