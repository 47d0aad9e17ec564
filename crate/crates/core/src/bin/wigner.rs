use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wigner_core::config::{load_config_with, preset_names, preset_text, RunConfig};
use wigner_core::experiments::{
    run_convergence_study, run_eigen_report, run_simulation, run_stability_study,
    write_convergence, write_eigen_report, write_stability,
};
use wigner_core::output::{fmt_g, OutputDir};
use wigner_core::{Error, Result};

/// Hermite-basis Wigner equation solver.
#[derive(Parser)]
#[command(name = "wigner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-evolve the configured state and write snapshots, moments and densities.
    Run(Source),
    /// Error against the exact solution over a grid of dx and basis sizes.
    Converge(Source),
    /// Amplification factors of the forcing propagators.
    Stability(Source),
    /// Convergence of the eigenstate coefficient vectors in the basis size.
    Eigen(Source),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration by name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` assignment applied before validation, e.g. `basis.n_basis=32`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config_with(path, &self.overrides)?,
            (None, Some(name)) => RunConfig::from_toml_with(preset_text(name)?, &self.overrides)?,
            (None, None) => {
                return Err(Error::Config {
                    key: "--config".into(),
                    message: "pass --config PATH or --preset NAME".into(),
                })
            }
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

fn g(x: f64) -> String {
    fmt_g(x, 6)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
        }
        Command::Run(src) => {
            let cfg = src.load()?;
            let dir = cfg.output.dir.clone();
            let result = run_simulation(&cfg, &dir)?;
            println!(
                "steps {}  dt {}  courant {}  mass drift {}  wall clock {:.2} s",
                result.steps,
                g(result.plan.dt),
                g(result.plan.courant),
                g(result.mass_drift()),
                result.elapsed.as_secs_f64()
            );
            for s in &result.snapshots {
                if let Some(d) = s.delta {
                    println!(
                        "t = {:<10} delta {}  max |dW| {}",
                        g(s.time()),
                        g(d),
                        g(s.max_abs_error.unwrap_or(0.0))
                    );
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Converge(src) => {
            let cfg = src.load()?;
            let out = OutputDir::create(&cfg.output.dir, &cfg.to_toml()?)?;
            let result = run_convergence_study(&cfg)?;
            write_convergence(&out, &result)?;
            for p in &result.points {
                println!(
                    "N = {:<3} dx = {:<8} delta {}",
                    p.n_basis,
                    g(p.dx),
                    g(p.delta)
                );
            }
            for (n, s) in &result.slopes {
                println!("N = {n:<3} slope {}", g(*s));
            }
            println!("wrote {}", out.dir().display());
        }
        Command::Stability(src) => {
            let cfg = src.load()?;
            let out = OutputDir::create(&cfg.output.dir, &cfg.to_toml()?)?;
            let result = run_stability_study(&cfg)?;
            write_stability(&out, &result)?;
            for c in &result.curves {
                println!(
                    "{:<7} dx {:<6} dt {:<10} max g {} at x = {}",
                    c.method.name(),
                    g(c.dx),
                    g(c.dt),
                    g(c.max()),
                    g(c.argmax())
                );
            }
            if let Some(d) = &result.demo {
                let last = d.times.len() - 1;
                println!(
                    "asymmetric demo: norm {} -> {}, symmetric {} -> {} over {} steps",
                    g(d.asymmetric[0]),
                    g(d.asymmetric[last]),
                    g(d.symmetric[0]),
                    g(d.symmetric[last]),
                    last
                );
            }
            println!("wrote {}", out.dir().display());
        }
        Command::Eigen(src) => {
            let cfg = src.load()?;
            let out = OutputDir::create(&cfg.output.dir, &cfg.to_toml()?)?;
            let report = run_eigen_report(&cfg)?;
            write_eigen_report(&out, &report)?;
            for (n_b, d) in &report.rows {
                let cols: Vec<String> = d.iter().map(|x| g(*x)).collect();
                println!("N_b = {n_b:<4} {}", cols.join("  "));
            }
            println!("wrote {}", out.dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
