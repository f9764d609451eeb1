//! Command-line front end: scenario merging, experiment commands and output files.
//!
//! Settings merge as command-line flags over the scenario file over built-in
//! defaults.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridride_core::harness::{compare, sweep_csv, sweep_k, Metric};
use gridride_core::sim::{validate_report_csv, Scenario, Variant};

#[derive(Debug, Parser)]
#[command(name = "gridride", version, about = "Recommendation, learning and auction experiments for EV fleets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate each (variant, seed) and write the round report.
    Run(ExperimentArgs),
    /// Run every (variant, seed) cell and write reports, curves and a summary.
    Compare(ExperimentArgs),
    /// Repeat `compare` over recommendation lengths and write a per-K table.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Recommendation lengths to sweep.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        k_values: Vec<usize>,
    },
    /// Re-derive the cumulative columns of a round report and check them.
    Validate {
        /// Round-report CSV written by `run` or `compare`.
        report: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seeds as a comma list; `a-b` expands to an inclusive range.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma list of variants: PK-OPT, CARS-OPT, PK-BMW, CARS-BMW, BG.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Recommendation length.
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    /// Eligibility radius in km.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Arrival rates as `rideshare,battery_swap,v2g`.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Any scenario key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Everything an experiment command needs after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub out: PathBuf,
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().with_context(|| format!("bad seed range `{part}`"))?,
                    b.trim().parse().with_context(|| format!("bad seed range `{part}`"))?,
                );
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        bail!("--seeds: no seeds given");
    }
    Ok(seeds)
}

pub fn parse_variants(names: &[String]) -> Result<Vec<Variant>> {
    let variants = names
        .iter()
        .map(|n| Variant::parse(n.trim()).with_context(|| format!("--variants: unknown variant `{n}`")))
        .collect::<Result<Vec<_>>>()?;
    if variants.is_empty() {
        bail!("--variants: no variants given");
    }
    Ok(variants)
}

impl ExperimentArgs {
    /// Merges flags over the scenario file over the defaults and validates.
    pub fn config(&self) -> Result<Config> {
        let mut scenario = match &self.scenario {
            Some(path) => Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?,
            None => Scenario::default(),
        };
        for kv in &self.set {
            let (key, value) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            scenario.set(key.trim(), value)?;
        }
        if let Some(k) = self.k {
            scenario.k = k;
        }
        if let Some(lambda) = self.lambda {
            scenario.lambda_km = lambda;
        }
        if let Some(rounds) = self.rounds {
            scenario.rounds = rounds;
        }
        if let Some(rates) = &self.rates {
            if rates.len() != 3 {
                bail!("--rates expects three comma-separated values, got {}", rates.len());
            }
            scenario.rates = [rates[0], rates[1], rates[2]];
        }
        scenario.validate()?;
        for file in [&scenario.workers_file, &scenario.tasks_file].into_iter().flatten() {
            if !file.exists() {
                bail!("data file {} does not exist", file.display());
            }
        }
        let seeds = match &self.seeds {
            Some(s) => parse_seeds(s)?,
            None => vec![scenario.seed],
        };
        let variants = match &self.variants {
            Some(v) => parse_variants(v)?,
            None => vec![scenario.variant],
        };
        Ok(Config {
            scenario,
            seeds,
            variants,
            out: self.out.clone(),
        })
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(contents).and_then(|_| f.sync_all()).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

fn prepare_out(cfg: &Config) -> Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_atomic(&cfg.out.join("scenario.txt"), cfg.scenario.to_text().as_bytes())
}

/// Runs one parsed command and returns the text to print on success.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config()?;
            prepare_out(&cfg)?;
            let cmp = compare(&cfg.scenario, &cfg.variants, &cfg.seeds)?;
            let path = cfg.out.join("rounds.csv");
            write_atomic(&path, cmp.report_csv()?.as_bytes())?;
            Ok(format!("wrote {} ({} runs)\n", path.display(), cmp.reports.len()))
        }
        Command::Compare(args) => {
            let cfg = args.config()?;
            prepare_out(&cfg)?;
            let cmp = compare(&cfg.scenario, &cfg.variants, &cfg.seeds)?;
            write_atomic(&cfg.out.join("rounds.csv"), cmp.report_csv()?.as_bytes())?;
            for m in Metric::ALL {
                write_atomic(&cfg.out.join(format!("{}.csv", m.name())), cmp.curve_csv(m).as_bytes())?;
            }
            let table = cmp.summary_table();
            write_atomic(&cfg.out.join("summary.txt"), table.as_bytes())?;
            Ok(table)
        }
        Command::Sweep { experiment, k_values } => {
            let cfg = experiment.config()?;
            prepare_out(&cfg)?;
            let rows = sweep_k(&cfg.scenario, &cfg.variants, &cfg.seeds, &k_values)?;
            let text = sweep_csv(&rows);
            write_atomic(&cfg.out.join("sweep.csv"), text.as_bytes())?;
            Ok(text)
        }
        Command::Validate { report } => {
            let f = fs::File::open(&report).with_context(|| format!("opening {}", report.display()))?;
            let check = validate_report_csv(f).with_context(|| format!("validating {}", report.display()))?;
            Ok(format!("{}: {} rows across {} runs are consistent\n", report.display(), check.rows, check.runs))
        }
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_with<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli)
}
