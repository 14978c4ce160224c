//! Command-line surface: entropy curves, claim suites and sampling.
//!
//! Exit codes: 0 success, 1 configuration error, 2 enumeration budget
//! exhausted, 3 a verified claim failed. Flags take precedence over `EM_*`
//! environment variables, which take precedence over defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{
    block_entropy, hmu_curve_with, unifilar_entropy_rate, word_table, ExploreOptions, DEFAULT_WORD_CAP,
};
use crate::claims::bc::bc_suite;
use crate::claims::even::even_suite;
use crate::claims::hpm::hpm_suite;
use crate::claims::{ClaimReport, Relation};
use crate::error::{Error, Result};
use crate::machine::Machine;
use crate::processes::bc::{bc_machine, DEFAULT_Q0};
use crate::processes::even::even_machine;
use crate::processes::hpm::hpm_machine;
use crate::sampler::{empirical_block_entropy, sample_stationary_paths, write_atomic, write_trajectories};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_CLAIM_FAILED: i32 = 3;

/// Header of the `curves` CSV output.
pub const CURVES_HEADER: &str =
    "t,H_lower,H_upper,hmu_t_lower,hmu_t_upper,E_partial_lower,E_partial_upper,gap_sum_lower";

/// Header of the `verify` CSV output.
pub const VERIFY_HEADER: &str = "claim,t,value_lower,value_upper,relation,bound,pass,note";

/// Depth of the per-state balance check run by `verify --machine bc`.
const BALANCE_DEPTH: u32 = 12;

#[derive(Debug, Parser)]
#[command(name = "chmm", version, about = "Certified information measures for countable-state HMMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-t block entropy, entropy-rate approximation, excess-entropy partial sum and gap sum.
    Curves(RunConfig),
    /// Run the claim suite that applies to the machine.
    Verify(RunConfig),
    /// Write a stationary trajectory and compare empirical block entropies with exact ones.
    Sample(SampleConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MachineId {
    Even,
    Hpm,
    Bc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, env = "EM_MACHINE", value_enum)]
    pub machine: MachineId,
    /// Even Process parameter.
    #[arg(long, env = "EM_P", default_value_t = 0.5)]
    pub p: f64,
    /// BC root escape probability.
    #[arg(long, env = "EM_Q0", default_value_t = DEFAULT_Q0)]
    pub q0: f64,
    #[arg(long = "mass-tol", env = "EM_MASS_TOL", default_value_t = 1e-10)]
    pub mass_tol: f64,
    #[arg(long = "t-max", env = "EM_T_MAX", default_value_t = 10)]
    pub t_max: usize,
    #[arg(long, env = "EM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, env = "EM_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "EM_FORMAT", value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Cap on live words per level for `curves`.
    #[arg(long = "word-cap", env = "EM_WORD_CAP", default_value_t = DEFAULT_WORD_CAP)]
    pub word_cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SampleConfig {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long, env = "EM_LENGTH", default_value_t = 10_000)]
    pub length: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::Param("--t-max must be at least 1".into()));
        }
        if !(self.mass_tol > 0.0 && self.mass_tol < 1.0) {
            return Err(Error::Param(format!("--mass-tol must lie in (0,1), got {}", self.mass_tol)));
        }
        Ok(())
    }

    pub fn build_machine(&self) -> Result<Box<dyn Machine>> {
        Ok(match self.machine {
            MachineId::Even => Box::new(even_machine(self.p)?),
            MachineId::Hpm => Box::new(hpm_machine()),
            MachineId::Bc => Box::new(bc_machine(self.q0)?),
        })
    }
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } => EXIT_BUDGET,
        _ => EXIT_CONFIG,
    }
}

/// Rendered `curves` output.
pub fn curves_text(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let m = cfg.build_machine()?;
    let rate = unifilar_entropy_rate(m.as_ref(), cfg.mass_tol)?;
    let options = ExploreOptions {
        cap: cfg.word_cap,
        ..ExploreOptions::new(cfg.mass_tol)
    };
    let curve = hmu_curve_with(m.as_ref(), cfg.t_max, options, Some(rate))?;
    let mut text = String::new();
    if cfg.format == Format::Csv {
        text.push_str(CURVES_HEADER);
        text.push('\n');
    }
    for pt in &curve.points {
        let e = pt.excess_sum.expect("rate supplied");
        match cfg.format {
            Format::Csv => {
                let row = [pt.block.lower, pt.block.upper, pt.hmu.lower, pt.hmu.upper, e.lower, e.upper, pt.gap_sum.lower];
                let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
                writeln!(text, "{},{}", pt.t, cells.join(",")).expect("write to string");
            }
            Format::Jsonl => {
                let row = json!({
                    "t": pt.t,
                    "H_lower": pt.block.lower,
                    "H_upper": pt.block.upper,
                    "hmu_t_lower": pt.hmu.lower,
                    "hmu_t_upper": pt.hmu.upper,
                    "E_partial_lower": e.lower,
                    "E_partial_upper": e.upper,
                    "gap_sum_lower": pt.gap_sum.lower,
                });
                writeln!(text, "{row}").expect("write to string");
            }
        }
    }
    Ok(text)
}

pub fn verify_report(cfg: &RunConfig) -> Result<ClaimReport> {
    cfg.validate()?;
    match cfg.machine {
        MachineId::Even => even_suite(&even_machine(cfg.p)?, cfg.t_max, cfg.mass_tol),
        MachineId::Hpm => hpm_suite(&hpm_machine(), cfg.t_max, cfg.mass_tol),
        MachineId::Bc => bc_suite(&bc_machine(cfg.q0)?, cfg.t_max, cfg.mass_tol, BALANCE_DEPTH),
    }
}

pub fn report_text(report: &ClaimReport, format: Format) -> String {
    let mut text = String::new();
    if format == Format::Csv {
        text.push_str(VERIFY_HEADER);
        text.push('\n');
    }
    for c in &report.checks {
        let rel = match c.relation {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        match format {
            Format::Csv => writeln!(
                text,
                "{},{},{},{},{rel},{},{},{}",
                csv_field(&c.claim),
                c.t,
                num(c.value.lower),
                num(c.value.upper),
                num(c.bound),
                c.pass,
                csv_field(&c.note)
            ),
            Format::Jsonl => writeln!(text, "{}", serde_json::to_string(c).expect("serializable check")),
        }
        .expect("write to string");
    }
    text
}

fn cmd_curves(cfg: &RunConfig) -> i32 {
    match curves_text(cfg).and_then(|t| emit(&cfg.out, &t)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_verify(cfg: &RunConfig) -> i32 {
    let report = match verify_report(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(path) = &cfg.out {
        if let Err(e) = write_atomic(path, &report_text(&report, cfg.format)) {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }
    for c in &report.checks {
        println!("{c}");
    }
    let failed = report.failures().count();
    println!("{} checks, {failed} failed", report.checks.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CLAIM_FAILED
    }
}

fn cmd_sample(cfg: &SampleConfig) -> i32 {
    let run = || -> Result<()> {
        let r = &cfg.run;
        r.validate()?;
        let m = r.build_machine()?;
        let paths = sample_stationary_paths(m.as_ref(), r.seed, 1, cfg.length, r.mass_tol)?;
        let path = r
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}-seed{}.txt", m.name(), r.seed)));
        write_trajectories(&path, &paths, m.alphabet())?;
        println!("wrote {} symbols to {}", cfg.length, path.display());
        for t in 1..=r.t_max.min(3) {
            let est = match empirical_block_entropy(&paths, t) {
                Ok(est) => est,
                Err(Error::InsufficientData { samples, distinct }) => {
                    println!("H[X^{t}]: {samples} windows for {distinct} words, too few to estimate");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let exact = block_entropy(&word_table(m.as_ref(), t, r.mass_tol)?);
            let est = est.with_exact(exact);
            println!(
                "H[X^{t}]: empirical {:.6} (se {:.2e}), exact {exact}, z {:.2}",
                est.estimate,
                est.standard_error,
                est.z_score().unwrap_or(f64::NAN)
            );
        }
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parse `args` (program name first) and run the chosen command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Curves(cfg) => cmd_curves(cfg),
        Command::Verify(cfg) => cmd_verify(cfg),
        Command::Sample(cfg) => cmd_sample(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        let mut full = vec!["chmm", "curves"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Curves(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_horizon_is_a_config_error() {
        assert_eq!(run(["chmm", "curves", "--machine", "even", "--t-max", "0"]), EXIT_CONFIG);
        assert_eq!(run(["chmm", "curves", "--t-max", "0"]), EXIT_CONFIG);
    }

    #[test]
    fn bad_parameters() {
        assert_eq!(run(["chmm", "curves", "--machine", "even", "--p", "1.5"]), EXIT_CONFIG);
        assert_eq!(run(["chmm", "curves", "--machine", "even", "--mass-tol", "0"]), EXIT_CONFIG);
        assert_eq!(run(["chmm", "sample", "--length", "10"]), EXIT_CONFIG);
    }

    #[test]
    fn even_curves_csv() {
        let text = curves_text(&cfg(&["--machine", "even", "--t-max", "10"])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CURVES_HEADER);
        assert_eq!(lines.len(), 11);
        let hmu: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        assert!(hmu.windows(2).all(|w| w[1] <= w[0]));
        assert!(hmu[9] > 2.0 / 3.0);
        // 12 significant digits
        assert_eq!(lines[1].split(',').nth(1).unwrap().split('e').next().unwrap().len(), 13);
    }

    #[test]
    fn jsonl_rows_parse() {
        let text = curves_text(&cfg(&["--machine", "even", "--t-max", "3", "--format", "jsonl"])).unwrap();
        let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2]["t"], 3);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn budget_maps_to_exit_two() {
        assert_eq!(exit_code(&Error::Budget { cap: 1, t: 1 }), EXIT_BUDGET);
    }
}
