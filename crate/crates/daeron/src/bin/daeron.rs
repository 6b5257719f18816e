use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use daeron::config::{parse_config, preset, ExperimentConfig, PRESETS};
use daeron::dual::FeasibleSet;
use daeron::error::Error;
use daeron::{experiment, lad, oracle, plot, vecs};

#[derive(Parser)]
#[command(name = "daeron", about = "Decentralized dual averaging over open networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// INI-style experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named recipe instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the checkpoint cadence.
    #[arg(long, value_name = "int")]
    checkpoint_every: Option<u32>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => parse_config(&fs::read_to_string(path)?)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => ExperimentConfig::default(),
            (Some(_), Some(_)) => {
                anyhow::bail!("pass either --config or --preset, not both")
            }
        };
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(c) = self.checkpoint_every {
            cfg.run.checkpoint_every = c;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write metrics.csv, evolution.csv,
    /// dataset.txt and config.ini.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep a gamma' grid, several seeds per point; one seed-averaged
    /// metrics CSV per rate.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated gamma' grid.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.005,0.001")]
        gammas: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Solve the full-population reference problem and print the optimum.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the invariant suite; exits 2 on any violation.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render loss curves from metrics CSVs into one SVG.
    Plot {
        /// Metrics CSV files; legend labels come from the file stems.
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "losses.svg")]
        out: PathBuf,
        /// Column to plot.
        #[arg(long, default_value = "inst_gap")]
        column: String,
    },
    /// List the named presets.
    Presets,
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { cfg, out } => {
            let cfg = cfg.load()?;
            let outcome = experiment::run_experiment(&cfg, &out)?;
            println!("{}", experiment::summary_line(&cfg, &outcome));
            println!("artifacts in {}", out.display());
        }
        Cmd::Sweep {
            cfg,
            out,
            gammas,
            seeds,
        } => {
            let cfg = cfg.load()?;
            let paths = experiment::run_sweep(&cfg, &gammas, &seeds, &out)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Cmd::Oracle { cfg } => {
            let cfg = cfg.load()?;
            let data = lad::generate_synthetic(&cfg.problem, cfg.run.seed)?;
            let objs: Vec<_> = data
                .datasets
                .iter()
                .map(|ds| oracle::WeightedObjective { weight: 1.0, data: ds })
                .collect();
            let radius = oracle::auto_radius(&objs, cfg.problem.d);
            let set = cfg.feasible_set(radius);
            let opt = experiment::full_population_optimum(&data, &set, &cfg)?;
            let r = match &set {
                FeasibleSet::Ball { radius, .. } => *radius,
                _ => radius,
            };
            println!(
                "f_star={:.9} dist0={:.9} radius={:.4} G={:.4} tol={} budget={}",
                opt.f_star,
                vecs::norm(&opt.x_star),
                r,
                experiment::problem_g_bound(&data)?,
                cfg.run.oracle_tol,
                cfg.run.oracle_budget
            );
        }
        Cmd::Verify { cfg } => {
            let cfg = cfg.load()?;
            let report = experiment::verify(&cfg)?;
            for line in &report.passed {
                println!("PASS {line}");
            }
            for line in &report.violations {
                println!("FAIL {line}");
            }
            if !report.ok() {
                std::process::exit(2);
            }
        }
        Cmd::Plot {
            inputs,
            out,
            column,
        } => {
            if inputs.is_empty() {
                anyhow::bail!("plot needs at least one metrics CSV");
            }
            let mut curves = Vec::new();
            for path in &inputs {
                let table = plot::read_metrics_csv(&fs::read_to_string(path)?)?;
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                curves.push(plot::curve_from_table(&table, &column, &label)?);
            }
            fs::write(&out, plot::plot_losses(&curves, &column)?)?;
            println!("{}", out.display());
        }
        Cmd::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.downcast_ref::<Error>() {
                Some(Error::OraclePrecision(_)) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
