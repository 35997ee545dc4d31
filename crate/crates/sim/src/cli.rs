//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use semagg_core::gain_design::stability_report;
use semagg_core::RandomSource;

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::error::{Result, SimError};
use crate::harness::{
    experiment_cpu_vs_dimension, experiment_nmse_vs_sensors, experiment_power_vs_time, run_episode, run_monte_carlo,
    ResultRow,
};
use crate::io;

const STREAM_VALIDATION: u64 = 12;

#[derive(Debug, Parser)]
#[command(
    name = "semagg",
    version,
    about = "Remote state estimation over analog aggregation channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo runs.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design the constant gain and write it with the optimizer trace.
    OptimizeGain(Common),
    /// Monte-Carlo simulation of every configured scheme.
    Simulate(Common),
    /// Reproduce one of the experiment tables.
    Experiment {
        which: Figure,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

/// Parses the process arguments, runs the command, returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Files written by one invocation, removed again if it fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn create(dir: PathBuf) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(&dir).map_err(|source| SimError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Outputs {
            dir,
            created_dir,
            files: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        path
    }

    fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, Vec<u8>)> {
    let bytes = fs::read(&common.config).map_err(|e| {
        SimError::Config(ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", common.config.display()),
        })
    })?;
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok((cfg, bytes))
}

fn execute(command: Command) -> Result<()> {
    let (common, label, figure) = match &command {
        Command::OptimizeGain(c) => (c, "optimize-gain".to_string(), None),
        Command::Simulate(c) => (c, "simulate".to_string(), None),
        Command::Experiment { which, common } => {
            let name = which
                .to_possible_value()
                .map(|v| v.get_name().to_string())
                .unwrap_or_default();
            (common, format!("experiment {name}"), Some(*which))
        }
    };
    let (cfg, bytes) = load(common)?;
    require_keys(&cfg, figure)?;

    // Timing runs sequentially regardless of --threads.
    let threads = match figure {
        Some(Figure::Fig4) => Some(1),
        _ => common.threads.map(usize::from),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::Scenario(format!("cannot start worker threads: {e}")))?;

    let mut out = Outputs::create(cfg.out_dir.clone())?;
    let result = pool.install(|| match figure {
        None if matches!(command, Command::OptimizeGain(_)) => cmd_optimize_gain(&cfg, &mut out),
        None => cmd_simulate(&cfg, &mut out),
        Some(fig) => cmd_experiment(&cfg, fig, &mut out),
    });
    let result = result.and_then(|()| {
        let path = out.file("manifest.txt");
        io::write_manifest(&path, &bytes, cfg.seed, &label)
    });
    if result.is_err() {
        out.discard();
    }
    result
}

fn require_keys(cfg: &RunConfig, figure: Option<Figure>) -> Result<()> {
    let missing = |key: &str, fig: &str| {
        SimError::Config(ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: format!("required for {fig}"),
        })
    };
    match figure {
        Some(Figure::Fig2) if cfg.m_values.is_none() => Err(missing("m_values", "fig2")),
        Some(Figure::Fig4) if cfg.s_values.is_none() => Err(missing("s_values", "fig4")),
        _ => Ok(()),
    }
}

fn cmd_optimize_gain(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let setup = cfg.setup();
    let prepared = setup.prepare(cfg.sensors, true)?;
    let design = prepared.design.as_ref().expect("gain requested");
    io::write_gain(&out.file("gain.txt"), &design.gain)?;
    io::write_optimizer_trace(&out.file("gain_trace.csv"), &design.trace)?;

    let mut rng = RandomSource::new(cfg.seed)
        .substream(STREAM_VALIDATION)
        .substream(cfg.sensors as u64);
    let report = stability_report(
        &design.gain,
        &prepared.plant,
        &prepared.channel,
        &prepared.topology,
        &cfg.activation,
        cfg.validation_samples,
        &mut rng,
    )?;
    let text = format!(
        "tx_scale = {}\ncontraction = {}\nstd_err = {}\nthreshold = {}\nstable = {}\nmse_bound = {}\n",
        io::fmt_f64(prepared.channel.tx_scale()),
        io::fmt_f64(report.contraction),
        io::fmt_f64(report.std_err),
        io::fmt_f64(report.threshold),
        report.stable,
        io::fmt_f64(report.mse_bound),
    );
    write_text(&out.file("stability.txt"), &text)?;
    println!(
        "contraction {:.6} (threshold {:.6}), stable = {}",
        report.contraction, report.threshold, report.stable
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let setup = cfg.setup();
    let with_gain = cfg.schemes.contains(&crate::harness::Scheme::Proposed);
    let prepared = setup.prepare(cfg.sensors, with_gain)?;
    if let Some(design) = &prepared.design {
        io::write_gain(&out.file("gain.txt"), &design.gain)?;
    }
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        let sc = setup.scenario(&prepared, scheme, cfg.horizon);
        let trace = run_episode(&sc)?;
        io::write_episode_trace(&out.file(&format!("trace_{scheme}.csv")), &trace)?;
        let summary = run_monte_carlo(&sc, cfg.n_runs)?;
        let (power_mean, power_se) = (summary.total_power_mean(), summary.power_std_err[cfg.horizon - 1]);
        for (metric, mean, std_err) in [
            ("nmse", summary.nmse_mean, summary.nmse_std_err),
            ("total_power", power_mean, power_se),
        ] {
            rows.push(ResultRow {
                scheme: scheme.to_string(),
                x: cfg.sensors,
                metric: metric.into(),
                mean,
                std_err,
                n_runs: cfg.n_runs,
                seed: cfg.seed,
            });
        }
        println!(
            "{scheme}: nmse {:.6e}, total power {:.6e}",
            summary.nmse_mean, power_mean
        );
    }
    io::write_results(&out.file("simulate.csv"), "M", &rows)
}

fn cmd_experiment(cfg: &RunConfig, fig: Figure, out: &mut Outputs) -> Result<()> {
    let setup = cfg.setup();
    let (name, x_name, rows) = match fig {
        Figure::Fig2 => {
            let m_values = cfg.m_values.as_deref().unwrap_or_default();
            let rows = experiment_nmse_vs_sensors(&setup, m_values, &cfg.schemes, cfg.n_runs)?;
            ("fig2.csv", "M", rows)
        }
        Figure::Fig3 => {
            let rows = experiment_power_vs_time(&setup, cfg.sensors, cfg.horizon, &cfg.schemes, cfg.n_runs)?;
            ("fig3.csv", "t", rows)
        }
        Figure::Fig4 => {
            let cpu = cfg.cpu_experiment(cfg.s_values.clone().unwrap_or_default());
            let rows = experiment_cpu_vs_dimension(&setup, &cpu, &cfg.schemes)?;
            ("fig4.csv", "S", rows)
        }
    };
    io::write_results(&out.file(name), x_name, &rows)?;
    println!("wrote {} rows to {}", rows.len(), out.dir.join(name).display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}
