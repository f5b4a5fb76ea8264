use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpat::harness::{self, ExperimentConfig, Method, Outcome};
use qpat::Error;

#[derive(Parser)]
#[command(name = "qpat", version, about = "Direct QPAT experiments: simulate data and reconstruct optical coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the phantom, corrupt the medium and simulate noisy data.
    Generate(Common),
    /// Reconstruct from the data of an earlier `generate` in the same directory.
    Reconstruct(Common),
    /// `generate` followed by `reconstruct`.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed_phantom: Option<u64>,
    #[arg(long)]
    seed_medium: Option<u64>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    /// Worker threads for the per-illumination sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    allow_inverse_crime: bool,
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed_phantom {
        cfg.seeds.phantom = s;
    }
    if let Some(s) = c.seed_medium {
        cfg.seeds.medium = s;
    }
    if let Some(s) = c.seed_data {
        cfg.seeds.data = s;
    }
    if let Some(m) = &c.method {
        cfg.method = m.parse::<Method>()?;
    }
    cfg.allow_inverse_crime |= c.allow_inverse_crime;
    cfg.validate()?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn summary(out: &Outcome) {
    let trace = &out.reconstruction.trace;
    for r in &trace.records {
        println!(
            "k={:<3} eps={:.6e} RE(mu)={:.2}% RE(kappa)={:.2}% inner={} accepted={}",
            r.iteration, r.epsilon, r.re_mu, r.re_kappa, r.inner_iterations, r.accepted
        );
    }
    for w in &trace.warnings {
        println!("warning: {w}");
    }
    println!("{}: RE(mu)={:.2}% RE(kappa)={:.2}%", out.method, out.re_mu, out.re_kappa);
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let g = harness::generate(&cfg)?;
            harness::write_generation(&c.out, &cfg, &g).map_err(|e| e.at_stage("write"))?;
            println!(
                "generated {} data sets, {} detectors, nt={}, dt={:.4e} s in {}",
                g.data.len(),
                g.report.detectors,
                g.nt,
                g.dt,
                c.out.display()
            );
        }
        Command::Reconstruct(c) => {
            let cfg = load(&c)?;
            let (phantom, data) = harness::load_generation(&c.out, &cfg).map_err(|e| e.at_stage("load"))?;
            let out = harness::reconstruct(&cfg, &phantom, data)?;
            harness::write_reconstruction(&c.out, &cfg, &phantom, &out).map_err(|e| e.at_stage("write"))?;
            summary(&out);
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = harness::run_experiment(&cfg, &c.out)?;
            summary(&out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
