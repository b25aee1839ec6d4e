//! `hynoma`: run hybrid NOMA power-allocation experiments from flat
//! key-value configs and emit CSV.
//!
//! Argument handling is deliberately hand-rolled: besides `--config`,
//! every accepted flag is a config key override, and the set of valid
//! keys depends on the subcommand, so the validation already lives in
//! the config layer. The binary only shuttles raw `--key value` pairs
//! into it.

use std::process::ExitCode;

use hynoma_core::error::Error;
use hynoma_core::experiments::{
    build_config, merge_entries, parse_raw, run_miso_det, run_miso_sweep, run_siso_det,
    run_siso_sweep, run_verify, ExperimentKind, Origin, RawEntry,
};

const USAGE: &str = "\
usage: hynoma <subcommand> [--config <path>] [--<key> <value>]...

subcommands:
  siso-sweep   Monte-Carlo rate sweep for the single-antenna system
  siso-det     deterministic power/interference table for explicit gains
  miso-sweep   Monte-Carlo sweep over antenna counts and rates (two-group MISO)
  miso-det     deterministic two-group energy table, both beam modes
  verify       run invariant suites (all|interference|lemma2|oracle|uplink|pareto|spectral)
  help         print this message

Every config key can be given as a --key value flag; flags override the
config file. Common keys: seed, trials, out (CSV path; stdout if absent).
An unknown or misspelled key is rejected with the accepted key list for
the subcommand.

exit codes: 0 success, 1 config error, 2 verification failure, 3 solver failure
";

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) => ExitCode::from(1),
        _ => ExitCode::from(3),
    }
}

/// Writes to the config's `out` path, or stdout when none is set.
fn deliver(out: &Option<std::path::PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| {
            Error::Config(format!("cannot write output file {}: {e}", path.display()))
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(args: &[String]) -> Result<ExitCode, Error> {
    let Some(subcommand) = args.first() else {
        eprint!("{USAGE}");
        return Ok(ExitCode::from(1));
    };
    if matches!(subcommand.as_str(), "help" | "--help" | "-h") {
        print!("{USAGE}");
        return Ok(ExitCode::SUCCESS);
    }
    let kind: ExperimentKind = subcommand.parse()?;

    let mut config_path: Option<String> = None;
    let mut flags: Vec<RawEntry> = Vec::new();
    let mut rest = args[1..].iter();
    while let Some(token) = rest.next() {
        let Some(key) = token.strip_prefix("--") else {
            return Err(Error::Config(format!(
                "unexpected argument {token:?} (flags look like --key value)"
            )));
        };
        let Some(value) = rest.next() else {
            return Err(Error::Config(format!("flag --{key} is missing its value")));
        };
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            flags.push(RawEntry {
                key: key.to_string(),
                value: value.clone(),
                origin: Origin::Flag,
            });
        }
    }

    let file_entries = match &config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config file {path}: {e}")))?;
            parse_raw(&text)?
        }
        None => Vec::new(),
    };
    let entries = merge_entries(file_entries, flags)?;
    let config = build_config(kind, &entries)?;

    match kind {
        ExperimentKind::Verify => {
            let report = run_verify(&config)?;
            print!("{}", report.human_lines());
            if config.out.is_some() {
                deliver(&config.out, &report.to_csv())?;
            }
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        ExperimentKind::SisoSweep => {
            deliver(&config.out, &run_siso_sweep(&config)?)?;
            Ok(ExitCode::SUCCESS)
        }
        ExperimentKind::SisoDet => {
            deliver(&config.out, &run_siso_det(&config)?)?;
            Ok(ExitCode::SUCCESS)
        }
        ExperimentKind::MisoSweep => {
            deliver(&config.out, &run_miso_sweep(&config)?)?;
            Ok(ExitCode::SUCCESS)
        }
        ExperimentKind::MisoDet => {
            deliver(&config.out, &run_miso_det(&config)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    }
}
