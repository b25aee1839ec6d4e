//! Flat key-value experiment configuration.
//!
//! The format is one `key = value` pair per line, `#` starts a comment,
//! blank lines are ignored. Keys are typed and validated against the
//! experiment kind: unknown keys are hard errors (a typoed key must
//! never silently fall back to a default), and every invalid value is
//! reported with its origin (file line or command-line flag) and field
//! name.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::nearfield::BeamMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SisoSweep,
    SisoDet,
    MisoSweep,
    MisoDet,
    Verify,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SisoSweep => "siso-sweep",
            ExperimentKind::SisoDet => "siso-det",
            ExperimentKind::MisoSweep => "miso-sweep",
            ExperimentKind::MisoDet => "miso-det",
            ExperimentKind::Verify => "verify",
        }
    }

    pub fn all() -> [ExperimentKind; 5] {
        [
            ExperimentKind::SisoSweep,
            ExperimentKind::SisoDet,
            ExperimentKind::MisoSweep,
            ExperimentKind::MisoDet,
            ExperimentKind::Verify,
        ]
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::all()
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment kind {s:?} (expected one of siso-sweep, siso-det, \
                     miso-sweep, miso-det, verify)"
                ))
            })
    }
}

/// Where a raw entry came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// 1-based line in the config file.
    Line(usize),
    /// A `--key value` command-line override.
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => write!(f, "command-line flag"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEntry {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

/// Parses config text into raw entries. Only syntax is checked here;
/// keys and values are interpreted later against the experiment kind.
pub fn parse_raw(text: &str) -> Result<Vec<RawEntry>> {
    let mut entries = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {line_no}: expected `key = value`, got {line:?}"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {line_no}: empty key")));
        }
        entries.push(RawEntry {
            key: key.to_string(),
            value: value.to_string(),
            origin: Origin::Line(line_no),
        });
    }
    Ok(entries)
}

/// Overlays command-line entries on file entries. Duplicates within one
/// source are errors; a flag silently replaces the file value of the
/// same key, which is the whole point of flags.
pub fn merge_entries(file: Vec<RawEntry>, flags: Vec<RawEntry>) -> Result<Vec<RawEntry>> {
    for source in [&file, &flags] {
        let mut seen = HashSet::new();
        for entry in source.iter() {
            if !seen.insert(entry.key.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate key {:?} ({})",
                    entry.key, entry.origin
                )));
            }
        }
    }
    let mut merged: Vec<RawEntry> = file
        .into_iter()
        .filter(|e| !flags.iter().any(|f| f.key == e.key))
        .collect();
    merged.extend(flags);
    Ok(merged)
}

/// Fully validated experiment parameters. Field applicability depends on
/// `kind`; fields outside the active kind hold their defaults and are
/// ignored by the runners.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,

    pub rates: Vec<f64>,
    pub m_users: usize,
    pub gain_floor: f64,
    pub ordered: bool,
    pub gains: Vec<f64>,
    pub target_rate: f64,
    pub slot_duration: f64,

    pub n_antennas: Vec<usize>,
    pub k_users: usize,
    pub p_g1_dbm: f64,
    pub beam_mode: BeamMode,
    pub carrier_hz: f64,
    pub gain_scale: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub g1_radius: f64,
    pub g2_radius: f64,

    pub suite: String,
    pub perturb: bool,
}

impl ExperimentConfig {
    /// Baseline parameter set for a kind; raw entries then override
    /// individual fields.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            seed: 7,
            trials: 1000,
            out: None,
            rates: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            m_users: 5,
            gain_floor: 0.01,
            ordered: true,
            gains: Vec::new(),
            target_rate: 2.0,
            slot_duration: 1.0,
            n_antennas: vec![257],
            k_users: 3,
            p_g1_dbm: 10.0,
            beam_mode: BeamMode::Beamfocusing,
            carrier_hz: 28e9,
            gain_scale: 1.0,
            r_min: 10.0,
            r_max: 50.0,
            g1_radius: 50.0,
            g2_radius: 200.0,
            suite: "all".to_string(),
            perturb: false,
        };
        match kind {
            ExperimentKind::MisoSweep => {
                cfg.trials = 100;
                cfg.rates = vec![5.0];
                cfg.m_users = 10;
            }
            ExperimentKind::MisoDet => {
                cfg.rates = (1..=7).map(f64::from).collect();
                cfg.m_users = 20;
            }
            ExperimentKind::Verify => {
                cfg.trials = 400;
            }
            ExperimentKind::SisoSweep | ExperimentKind::SisoDet => {}
        }
        cfg
    }
}

/// Keys every kind accepts.
const COMMON_KEYS: &[&str] = &["kind", "seed", "trials", "out"];

fn accepted_keys(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::SisoSweep => &["rates", "m_users", "gain_floor", "ordered"],
        ExperimentKind::SisoDet => &["gains", "target_rate", "slot_duration"],
        ExperimentKind::MisoSweep => &[
            "rates",
            "n_antennas",
            "m_users",
            "k_users",
            "p_g1_dbm",
            "beam_mode",
            "carrier_hz",
            "gain_scale",
            "r_min",
            "r_max",
            "g2_radius",
        ],
        ExperimentKind::MisoDet => &[
            "rates",
            "n_antennas",
            "m_users",
            "k_users",
            "p_g1_dbm",
            "carrier_hz",
            "gain_scale",
            "g1_radius",
            "g2_radius",
        ],
        ExperimentKind::Verify => &["suite", "perturb"],
    }
}

fn bad_value(entry: &RawEntry, expected: &str) -> Error {
    Error::Config(format!(
        "{}: key {:?} expects {expected}, got {:?}",
        entry.origin, entry.key, entry.value
    ))
}

fn parse_f64(entry: &RawEntry) -> Result<f64> {
    entry
        .value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad_value(entry, "a finite number"))
}

fn parse_u64(entry: &RawEntry) -> Result<u64> {
    entry
        .value
        .parse::<u64>()
        .map_err(|_| bad_value(entry, "an unsigned integer"))
}

fn parse_usize(entry: &RawEntry) -> Result<usize> {
    entry
        .value
        .parse::<usize>()
        .map_err(|_| bad_value(entry, "an unsigned integer"))
}

fn parse_bool(entry: &RawEntry) -> Result<bool> {
    match entry.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad_value(entry, "true or false")),
    }
}

fn parse_f64_list(entry: &RawEntry) -> Result<Vec<f64>> {
    let items: Result<Vec<f64>> = entry
        .value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad_value(entry, "a comma-separated list of finite numbers"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(bad_value(entry, "a nonempty list"));
    }
    Ok(items)
}

fn parse_usize_list(entry: &RawEntry) -> Result<Vec<usize>> {
    let items: Result<Vec<usize>> = entry
        .value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<usize>()
                .map_err(|_| bad_value(entry, "a comma-separated list of unsigned integers"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(bad_value(entry, "a nonempty list"));
    }
    Ok(items)
}

pub const VERIFY_SUITES: &[&str] = &[
    "all",
    "interference",
    "lemma2",
    "oracle",
    "uplink",
    "pareto",
    "spectral",
];

/// Interprets raw entries as a config of the given kind. Applies
/// defaults, rejects unknown keys, and validates every cross-field
/// invariant the runners rely on, so that a config that builds here
/// cannot fail scenario construction later.
pub fn build_config(kind: ExperimentKind, entries: &[RawEntry]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::defaults(kind);
    let accepted = accepted_keys(kind);
    for entry in entries {
        let key = entry.key.as_str();
        if !COMMON_KEYS.contains(&key) && !accepted.contains(&key) {
            return Err(Error::Config(format!(
                "{}: unknown key {:?} for kind {} (accepted: {})",
                entry.origin,
                key,
                kind.as_str(),
                COMMON_KEYS
                    .iter()
                    .chain(accepted)
                    .copied()
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        match key {
            "kind" => {
                let stated: ExperimentKind = entry.value.parse()?;
                if stated != kind {
                    return Err(Error::Config(format!(
                        "{}: config is for kind {} but {} was requested",
                        entry.origin,
                        stated.as_str(),
                        kind.as_str()
                    )));
                }
            }
            "seed" => cfg.seed = parse_u64(entry)?,
            "trials" => cfg.trials = parse_usize(entry)?,
            "out" => cfg.out = Some(PathBuf::from(&entry.value)),
            "rates" => cfg.rates = parse_f64_list(entry)?,
            "m_users" => cfg.m_users = parse_usize(entry)?,
            "gain_floor" => cfg.gain_floor = parse_f64(entry)?,
            "ordered" => cfg.ordered = parse_bool(entry)?,
            "gains" => cfg.gains = parse_f64_list(entry)?,
            "target_rate" => cfg.target_rate = parse_f64(entry)?,
            "slot_duration" => cfg.slot_duration = parse_f64(entry)?,
            "n_antennas" => cfg.n_antennas = parse_usize_list(entry)?,
            "k_users" => cfg.k_users = parse_usize(entry)?,
            "p_g1_dbm" => cfg.p_g1_dbm = parse_f64(entry)?,
            "beam_mode" => {
                cfg.beam_mode = entry
                    .value
                    .parse()
                    .map_err(|_| bad_value(entry, "beamfocusing or zero_forcing"))?
            }
            "carrier_hz" => cfg.carrier_hz = parse_f64(entry)?,
            "gain_scale" => cfg.gain_scale = parse_f64(entry)?,
            "r_min" => cfg.r_min = parse_f64(entry)?,
            "r_max" => cfg.r_max = parse_f64(entry)?,
            "g1_radius" => cfg.g1_radius = parse_f64(entry)?,
            "g2_radius" => cfg.g2_radius = parse_f64(entry)?,
            "suite" => cfg.suite = entry.value.clone(),
            "perturb" => cfg.perturb = parse_bool(entry)?,
            _ => unreachable!("key {key:?} accepted but not handled"),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn check(ok: bool, field: &str, msg: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("field {field:?}: {msg}")))
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    check(cfg.trials >= 1, "trials", "must be at least 1".into())?;
    match cfg.kind {
        ExperimentKind::SisoSweep => {
            check(cfg.m_users >= 1, "m_users", "must be at least 1".into())?;
            check(
                cfg.rates.iter().all(|&r| r >= 0.0),
                "rates",
                "rates must be nonnegative".into(),
            )?;
            check(
                cfg.gain_floor >= 0.0,
                "gain_floor",
                "must be nonnegative".into(),
            )?;
        }
        ExperimentKind::SisoDet => {
            check(
                !cfg.gains.is_empty(),
                "gains",
                "explicit channel gains are required for this kind".into(),
            )?;
            check(
                cfg.gains.iter().all(|&g| g > 0.0),
                "gains",
                "gains must be positive".into(),
            )?;
            let mut sorted = cfg.gains.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
            check(
                sorted.windows(2).all(|w| w[0] - w[1] > 1e-12),
                "gains",
                "gains must be pairwise distinct (the ordered closed form needs a strict \
                 gain ordering)"
                    .into(),
            )?;
            check(
                cfg.target_rate >= 0.0,
                "target_rate",
                "must be nonnegative".into(),
            )?;
            check(
                cfg.slot_duration > 0.0,
                "slot_duration",
                "must be positive".into(),
            )?;
        }
        ExperimentKind::MisoSweep | ExperimentKind::MisoDet => {
            check(
                cfg.rates.iter().all(|&r| r >= 0.0),
                "rates",
                "rates must be nonnegative".into(),
            )?;
            check(
                !cfg.n_antennas.is_empty() && cfg.n_antennas.iter().all(|&n| n >= 2),
                "n_antennas",
                "need at least 2 antennas".into(),
            )?;
            check(cfg.k_users >= 1, "k_users", "must be at least 1".into())?;
            check(
                cfg.m_users > cfg.k_users,
                "m_users",
                format!(
                    "need more group-1 users than far users (m_users={}, k_users={})",
                    cfg.m_users, cfg.k_users
                ),
            )?;
            check(
                cfg.carrier_hz > 0.0,
                "carrier_hz",
                "must be positive".into(),
            )?;
            check(cfg.gain_scale > 0.0, "gain_scale", "must be positive".into())?;
            check(cfg.g2_radius > 0.0, "g2_radius", "must be positive".into())?;
            if cfg.kind == ExperimentKind::MisoSweep {
                check(
                    cfg.r_min > 0.0 && cfg.r_max > cfg.r_min,
                    "r_min",
                    format!(
                        "need 0 < r_min < r_max, got r_min={}, r_max={}",
                        cfg.r_min, cfg.r_max
                    ),
                )?;
            } else {
                check(
                    cfg.g1_radius > 0.0,
                    "g1_radius",
                    "must be positive".into(),
                )?;
                check(
                    cfg.n_antennas.len() == 1,
                    "n_antennas",
                    "the deterministic table uses a single antenna count".into(),
                )?;
            }
        }
        ExperimentKind::Verify => {
            check(
                VERIFY_SUITES.contains(&cfg.suite.as_str()),
                "suite",
                format!(
                    "unknown suite {:?} (available: {})",
                    cfg.suite,
                    VERIFY_SUITES.join(", ")
                ),
            )?;
        }
    }
    Ok(())
}
