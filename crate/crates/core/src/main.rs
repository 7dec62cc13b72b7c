use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use multihop::config::{load_config, parse_config, preset, ExperimentConfig, PARAMETER_KEYS};
use multihop::engine::{draw_topology, RunOptions};
use multihop::outage::{monte_carlo_outage, outage_probability, Interferer, LinkOutageInput};
use multihop::sweep::{run_single, run_sweep, SweepOptions};
use multihop::{Result, SimError};

#[derive(Parser)]
#[command(name = "multihop", version, about = "Multihop routing simulator for ad hoc networks with Nakagami fading")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run one configuration (any [sweep] section is ignored).
    Run(ExperimentArgs),
    /// Run a parameter sweep from a config file or a figure preset.
    Sweep(ExperimentArgs),
    /// Evaluate one link's outage probability next to a Monte Carlo estimate.
    Outage(OutageArgs),
    /// Emit the positions of one topology as CSV.
    Topology(TopologyArgs),
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset: fig1..fig6 (full scale) or desk-fig1..desk-fig6.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: Source,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides [output].dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dump candidate links and paths of every trial of topology 0.
    #[arg(long)]
    dump_trials: bool,
    /// Suppress progress on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct OutageArgs {
    /// Link description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Monte Carlo draws for the side-by-side estimate.
    #[arg(long, default_value_t = 1_000_000)]
    draws: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TopologyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    topology_id: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the shadowing table (i,j,xi_db) to this file.
    #[arg(long)]
    dump_shadowing: Option<PathBuf>,
}

/// One `--<key> <value>` flag per config parameter, named exactly as in the
/// config file.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl FromArgMatches for Overrides {
    fn from_arg_matches(matches: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut out = Overrides::default();
        out.update_from_arg_matches(matches)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, matches: &ArgMatches) -> std::result::Result<(), clap::Error> {
        for key in PARAMETER_KEYS {
            if let Some(v) = matches.get_one::<String>(key) {
                self.0.push((key, v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for Overrides {
    fn augment_args(cmd: Command) -> Command {
        PARAMETER_KEYS.iter().fold(cmd, |cmd, key| {
            cmd.arg(
                Arg::new(*key)
                    .long(*key)
                    .value_name("VALUE")
                    .help_heading("Config overrides")
                    .help(format!("Override `{key}` from the config")),
            )
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        let cfg = match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => parse_config("")?,
            (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
        };
        if self.overrides.0.is_empty() {
            return Ok(cfg);
        }
        let mut file = cfg.file;
        for (key, value) in &self.overrides.0 {
            file.set_str(key, value)?;
        }
        ExperimentConfig::from_file(file)
    }
}

fn out_dir(cfg: &ExperimentConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.file.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undef".to_string(), |x| format!("{x:.4}"))
}

fn print_averages(header: &str, result: &multihop::engine::RunResult) {
    println!("{header}");
    println!("  {:<4} {:>8} {:>8} {:>8} {:>10}", "", "R", "D", "H", "A");
    for protocol in &result.protocols {
        let a = result.averages(*protocol).expect("protocol present");
        println!(
            "  {:<4} {:>8.4} {:>8} {:>8} {:>10.4}",
            protocol,
            a.reliability.mean,
            fmt_opt(a.delay.map(|e| e.mean)),
            fmt_opt(a.hops.map(|e| e.mean)),
            a.ase.mean
        );
    }
}

fn options(args: &ExperimentArgs) -> SweepOptions {
    SweepOptions {
        run: RunOptions {
            threads: args.threads,
            progress: !args.quiet,
        },
        dump_trials: args.dump_trials,
    }
}

fn cmd_run(args: ExperimentArgs) -> Result<()> {
    let cfg = args.source.load()?;
    let dir = out_dir(&cfg, &args.out_dir);
    let (result, files) = run_single(&cfg, &dir, &options(&args))?;
    print_averages(&format!("results written to {}", dir.display()), &result);
    eprintln!("{} files written", files.len());
    Ok(())
}

fn cmd_sweep(args: ExperimentArgs) -> Result<()> {
    let cfg = args.source.load()?;
    let dir = out_dir(&cfg, &args.out_dir);
    let report = run_sweep(&cfg, &dir, &options(&args))?;
    for s in &report.series {
        for p in &s.points {
            let series = match (&report.series_parameter, s.series_value) {
                (Some(k), Some(v)) => format!("{k}={v}, "),
                _ => String::new(),
            };
            print_averages(&format!("{series}{}={}", report.parameter, p.value), &p.result);
        }
    }
    println!("results written to {}", dir.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    desired_omega: f64,
    desired_m: u32,
    #[serde(default = "one")]
    inv_snr: f64,
    threshold: f64,
    #[serde(default, rename = "interferer")]
    interferers: Vec<InterfererEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterfererEntry {
    omega: f64,
    m: u32,
    activity: f64,
}

fn one() -> f64 {
    1.0
}

fn cmd_outage(args: OutageArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let link: LinkFile = toml::from_str(&text).map_err(|e| SimError::Parse(e.to_string()))?;
    let input = LinkOutageInput {
        desired_omega: link.desired_omega,
        desired_m: link.desired_m,
        interferers: link
            .interferers
            .iter()
            .map(|i| Interferer::new(i.omega, i.m, i.activity))
            .collect(),
        inv_snr: link.inv_snr,
        threshold: link.threshold,
    };
    let eps = outage_probability(&input)?;
    let (est, se) = monte_carlo_outage(&input, args.draws, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
    println!("closed_form,monte_carlo,std_error,draws");
    println!("{eps:.16e},{est:.16e},{se:.16e},{}", args.draws);
    Ok(())
}

fn cmd_topology(args: TopologyArgs) -> Result<()> {
    let cfg = args.source.load()?;
    let (topology, realization) = draw_topology(cfg.plan.master_seed, args.topology_id, &cfg.network, &cfg.channel)?;
    match &args.out {
        Some(path) => topology.write_csv(BufWriter::new(fs::File::create(path)?))?,
        None => topology.write_csv(io::stdout().lock())?,
    }
    if let Some(path) = &args.dump_shadowing {
        let mut w = BufWriter::new(fs::File::create(Path::new(path))?);
        realization.shadow().write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Commands::Run(a) => cmd_run(a),
        Commands::Sweep(a) => cmd_sweep(a),
        Commands::Outage(a) => cmd_outage(a),
        Commands::Topology(a) => cmd_topology(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
