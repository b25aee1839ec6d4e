//! Experiment runners: validated config in, CSV text out.
//!
//! Trial loops are parallel but deterministic: trial `t` draws from a
//! ChaCha stream seeded with `seed XOR t`, results are collected in
//! trial order, and means use pairwise summation. The same channel
//! realizations are reused across every rate (and antenna count) being
//! swept, so curves differ only by the parameter under study, not by
//! sampling noise.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    sample_rayleigh_gains, wavelength_for_carrier, NearFieldGeometry, SisoScenario, UserPosition,
};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::csvfmt::{csv_document, fmt6};
use crate::miso::{solve_miso_hybrid_sca, solve_miso_oma, ScaOptions};
use crate::nearfield::{
    assign_beams, build_beams, dbm_to_linear, effective_gains, BeamMode, EffectiveGains,
    MisoScenario,
};
use crate::siso::{
    energy_report, hybrid_closed_form, oma_allocation, successive_allocation, AllocationSchedule,
};
use crate::stats::{jackknife_se, mean};

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::Config(format!(
            "runner for {} invoked with a {} config",
            kind.as_str(),
            config.kind.as_str()
        )));
    }
    Ok(())
}

/// Hybrid schedule for one gain draw. Ordered mode sorts descending and
/// uses the closed form; if the draw is too close to tied for the strict
/// ordering the general successive solver takes over, which agrees with
/// the closed form wherever both apply.
fn hybrid_schedule(gains: &[f64], rate: f64, ordered: bool) -> Result<AllocationSchedule> {
    if ordered {
        let mut sorted = gains.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
        match SisoScenario::ordered(sorted.clone(), rate) {
            Ok(scenario) => return hybrid_closed_form(&scenario),
            Err(_) => {
                log::debug!("near-tied gains, falling back to successive allocation");
                return successive_allocation(&SisoScenario::new(sorted, rate)?);
            }
        }
    }
    successive_allocation(&SisoScenario::new(gains.to_vec(), rate)?)
}

/// Monte-Carlo sweep over target rates for the single-antenna system.
pub fn run_siso_sweep(config: &ExperimentConfig) -> Result<String> {
    expect_kind(config, ExperimentKind::SisoSweep)?;
    let rates = &config.rates;
    let per_trial: Vec<(Vec<f64>, Vec<f64>)> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<(Vec<f64>, Vec<f64>)> {
            let gains = sample_rayleigh_gains(
                config.m_users,
                config.gain_floor,
                config.seed ^ t as u64,
            );
            let mut oma = Vec::with_capacity(rates.len());
            let mut hybrid = Vec::with_capacity(rates.len());
            for &rate in rates {
                let scenario = SisoScenario::new(gains.clone(), rate)?;
                oma.push(energy_report(&oma_allocation(&scenario)).total);
                let schedule = hybrid_schedule(&gains, rate, config.ordered)?;
                hybrid.push(energy_report(&schedule).total);
            }
            Ok((oma, hybrid))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(rates.len());
    for (idx, &rate) in rates.iter().enumerate() {
        let oma: Vec<f64> = per_trial.iter().map(|t| t.0[idx]).collect();
        let hybrid: Vec<f64> = per_trial.iter().map(|t| t.1[idx]).collect();
        rows.push(vec![
            fmt6(rate)?,
            fmt6(mean(&oma))?,
            fmt6(jackknife_se(&oma))?,
            fmt6(mean(&hybrid))?,
            fmt6(jackknife_se(&hybrid))?,
            config.trials.to_string(),
        ]);
    }
    Ok(csv_document(
        &[
            "rate",
            "mean_energy_oma",
            "se_oma",
            "mean_energy_hybrid",
            "se_hybrid",
            "trials",
        ],
        &rows,
    ))
}

/// Single deterministic allocation table: per-slot powers and
/// accumulated interference for an explicit gain list.
///
/// Users are re-indexed strongest-first for the solve (the closed form
/// needs that ordering); the `orig_user` column maps each row back to
/// the position of its gain in the config.
pub fn run_siso_det(config: &ExperimentConfig) -> Result<String> {
    expect_kind(config, ExperimentKind::SisoDet)?;
    let m = config.gains.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        config.gains[b]
            .partial_cmp(&config.gains[a])
            .expect("finite gains")
    });
    let sorted: Vec<f64> = order.iter().map(|&i| config.gains[i]).collect();
    let scenario = SisoScenario::ordered(sorted.clone(), config.target_rate)?
        .with_slot_duration(config.slot_duration)?;
    let schedule = hybrid_closed_form(&scenario)?;

    let mut header: Vec<String> = vec![
        "user".into(),
        "orig_user".into(),
        "gain".into(),
        "energy".into(),
    ];
    for i in 1..=m {
        header.push(format!("p_{i}"));
    }
    for i in 1..=m {
        header.push(format!("acc_{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut rows = Vec::with_capacity(m);
    for user in 0..m {
        let mut row = vec![
            (user + 1).to_string(),
            (order[user] + 1).to_string(),
            fmt6(sorted[user])?,
            fmt6(schedule.per_user_energy(user))?,
        ];
        for slot in 0..m {
            row.push(fmt6(schedule.power(user, slot))?);
        }
        for slot in 0..m {
            row.push(fmt6(schedule.accumulated_interference(user, slot))?);
        }
        rows.push(row);
    }
    Ok(csv_document(&header_refs, &rows))
}

/// Equally spaced far-user angles spanning [-pi/3, pi/3].
fn g2_angles(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k)
        .map(|i| -FRAC_PI_3 + i as f64 * (2.0 * FRAC_PI_3) / (k - 1) as f64)
        .collect()
}

fn g2_positions(k: usize, radius: f64) -> Result<Vec<UserPosition>> {
    g2_angles(k)
        .into_iter()
        .map(|angle| UserPosition::new(angle, radius))
        .collect()
}

/// Per-(scenario, rate) pair of energies; None marks infeasible.
type EnergyPair = (Option<f64>, Option<f64>);

fn solve_pair(gains: &EffectiveGains, m_users: usize, rate: f64) -> Result<EnergyPair> {
    let oma = solve_miso_oma(gains, rate)?;
    let hybrid = solve_miso_hybrid_sca(gains, m_users, rate, &ScaOptions::default())?;
    Ok((
        oma.is_feasible().then_some(oma.energy),
        hybrid.is_feasible().then_some(hybrid.energy),
    ))
}

fn feasible_stats(samples: &[Option<f64>]) -> Result<(String, String, usize)> {
    let present: Vec<f64> = samples.iter().flatten().copied().collect();
    let infeasible = samples.len() - present.len();
    if present.is_empty() {
        return Ok(("inf".into(), "inf".into(), infeasible));
    }
    Ok((fmt6(mean(&present))?, fmt6(jackknife_se(&present))?, infeasible))
}

/// Monte-Carlo MISO sweep over antenna counts and rates with random
/// near-group placement (area-uniform over the half-annulus sector) and
/// fixed far-group positions.
pub fn run_miso_sweep(config: &ExperimentConfig) -> Result<String> {
    expect_kind(config, ExperimentKind::MisoSweep)?;
    let wavelength = wavelength_for_carrier(config.carrier_hz);
    let p_lin = dbm_to_linear(config.p_g1_dbm);
    let g2 = g2_positions(config.k_users, config.g2_radius)?;
    let combos: Vec<(usize, f64)> = config
        .n_antennas
        .iter()
        .flat_map(|&n| config.rates.iter().map(move |&r| (n, r)))
        .collect();

    let per_trial: Vec<Vec<EnergyPair>> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<EnergyPair>> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ t as u64);
            let mut g1 = Vec::with_capacity(config.m_users);
            for _ in 0..config.m_users {
                let u: f64 = rng.random();
                let radius =
                    (u * (config.r_max * config.r_max - config.r_min * config.r_min)
                        + config.r_min * config.r_min)
                        .sqrt();
                let angle = loop {
                    let a: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
                    if a > -FRAC_PI_2 {
                        break a;
                    }
                };
                g1.push(UserPosition::new(angle, radius)?);
            }
            let mut results = Vec::with_capacity(combos.len());
            for &n in &config.n_antennas {
                let geometry = NearFieldGeometry::ula(n, wavelength)?;
                let scenario = MisoScenario::new(
                    geometry,
                    g1.clone(),
                    g2.clone(),
                    p_lin,
                    config.rates[0],
                    config.beam_mode,
                )?
                .with_gain_scale(config.gain_scale)?;
                let beams = build_beams(&scenario)?;
                let assignment = assign_beams(&scenario, &beams)?;
                let gains = effective_gains(&scenario, &beams, &assignment)?;
                for &rate in &config.rates {
                    results.push(solve_pair(&gains, config.m_users, rate)?);
                }
            }
            Ok(results)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(combos.len());
    for (idx, &(n, rate)) in combos.iter().enumerate() {
        let oma: Vec<Option<f64>> = per_trial.iter().map(|t| t[idx].0).collect();
        let hybrid: Vec<Option<f64>> = per_trial.iter().map(|t| t[idx].1).collect();
        let (oma_mean, oma_se, oma_infeasible) = feasible_stats(&oma)?;
        let (hybrid_mean, hybrid_se, _) = feasible_stats(&hybrid)?;
        rows.push(vec![
            n.to_string(),
            fmt6(rate)?,
            oma_mean,
            oma_se,
            hybrid_mean,
            hybrid_se,
            oma_infeasible.to_string(),
            config.trials.to_string(),
            config.beam_mode.as_str().to_string(),
        ]);
    }
    Ok(csv_document(
        &[
            "n_antennas",
            "rate",
            "mean_energy_oma",
            "se_oma",
            "mean_energy_hybrid",
            "se_hybrid",
            "infeasible_oma",
            "trials",
            "beam_mode",
        ],
        &rows,
    ))
}

/// Near-group angles for the deterministic table: equally spaced by
/// pi/(2M), centered on broadside.
pub fn deterministic_g1_angles(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|i| (i as f64 - (m as f64 + 1.0) / 2.0) * PI / (2.0 * m as f64))
        .collect()
}

/// Deterministic four-column energy table: both beam modes, both
/// schemes, one row per target rate. Far users share the first K
/// near-group angles at their own radius.
pub fn run_miso_det(config: &ExperimentConfig) -> Result<String> {
    expect_kind(config, ExperimentKind::MisoDet)?;
    let wavelength = wavelength_for_carrier(config.carrier_hz);
    let p_lin = dbm_to_linear(config.p_g1_dbm);
    let angles = deterministic_g1_angles(config.m_users);
    let g1: Vec<UserPosition> = angles
        .iter()
        .map(|&a| UserPosition::new(a, config.g1_radius))
        .collect::<Result<_>>()?;
    let g2: Vec<UserPosition> = angles[..config.k_users]
        .iter()
        .map(|&a| UserPosition::new(a, config.g2_radius))
        .collect::<Result<_>>()?;
    let geometry = NearFieldGeometry::ula(config.n_antennas[0], wavelength)?;

    let mut tables = Vec::new();
    for mode in [BeamMode::Beamfocusing, BeamMode::ZeroForcing] {
        let scenario = MisoScenario::new(
            geometry.clone(),
            g1.clone(),
            g2.clone(),
            p_lin,
            config.rates[0],
            mode,
        )?
        .with_gain_scale(config.gain_scale)?;
        let beams = build_beams(&scenario)?;
        let assignment = assign_beams(&scenario, &beams)?;
        tables.push(effective_gains(&scenario, &beams, &assignment)?);
    }

    let results: Vec<(f64, EnergyPair, EnergyPair)> = config
        .rates
        .par_iter()
        .map(|&rate| -> Result<(f64, EnergyPair, EnergyPair)> {
            let bf = solve_pair(&tables[0], config.m_users, rate)?;
            let zf = solve_pair(&tables[1], config.m_users, rate)?;
            Ok((rate, bf, zf))
        })
        .collect::<Result<_>>()?;

    let cell = |v: Option<f64>| -> Result<String> {
        match v {
            Some(e) => fmt6(e),
            None => Ok("inf".into()),
        }
    };
    let mut rows = Vec::with_capacity(results.len());
    for (rate, bf, zf) in results {
        rows.push(vec![
            fmt6(rate)?,
            cell(bf.0)?,
            cell(bf.1)?,
            cell(zf.0)?,
            cell(zf.1)?,
        ]);
    }
    Ok(csv_document(
        &["rate", "oma_bf", "hybrid_bf", "oma_zf", "hybrid_zf"],
        &rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{build_config, parse_raw};

    fn config_for(kind: ExperimentKind, text: &str) -> ExperimentConfig {
        build_config(kind, &parse_raw(text).unwrap()).unwrap()
    }

    #[test]
    fn siso_sweep_is_deterministic_and_well_formed() {
        let cfg = config_for(
            ExperimentKind::SisoSweep,
            "trials = 8\nrates = 1, 2\nm_users = 3\nseed = 4\n",
        );
        let a = run_siso_sweep(&cfg).unwrap();
        let b = run_siso_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("rate,"));
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn siso_det_single_user_is_plain_oma() {
        let cfg = config_for(ExperimentKind::SisoDet, "gains = 2\ntarget_rate = 1\n");
        let csv = run_siso_det(&cfg).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        // Single user: p_1 = (e^R - 1)/gain, energy identical.
        let expected = (1.0f64.exp() - 1.0) / 2.0;
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "1");
        assert_eq!(fields[1], "1");
        let energy: f64 = fields[3].parse().unwrap();
        assert!((energy - expected).abs() < 1e-5);
    }

    #[test]
    fn siso_det_reports_original_labels() {
        // Ascending input gains: strongest (9) is listed third in the
        // config, so row 1 maps back to orig_user 3.
        let cfg = config_for(ExperimentKind::SisoDet, "gains = 1, 4, 9\ntarget_rate = 2\n");
        let csv = run_siso_det(&cfg).unwrap();
        let second_line: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(second_line[0], "1");
        assert_eq!(second_line[1], "3");
        assert_eq!(second_line[2], "9");
    }

    #[test]
    fn miso_det_emits_four_energy_columns() {
        let cfg = config_for(
            ExperimentKind::MisoDet,
            "n_antennas = 33\nm_users = 6\nk_users = 2\nrates = 1, 3\ngain_scale = 1e10\n",
        );
        let csv = run_miso_det(&cfg).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rate,oma_bf,hybrid_bf,oma_zf,hybrid_zf");
        assert_eq!(lines.len(), 3);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 5);
        }
    }

    #[test]
    fn miso_sweep_shares_draws_across_rates() {
        let cfg = config_for(
            ExperimentKind::MisoSweep,
            "trials = 2\nrates = 1, 2\nn_antennas = 17\nm_users = 4\nk_users = 1\n\
             gain_scale = 1e10\nseed = 11\n",
        );
        let a = run_miso_sweep(&cfg).unwrap();
        let b = run_miso_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
    }
}
