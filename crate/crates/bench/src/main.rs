use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpmg_bench::{cmd_baseline, cmd_convergence, cmd_evaluate, cmd_train, BenchError, CampaignConfig, Overrides};
use hpmg_core::fr::MeshKind;
use hpmg_core::multigrid::MultigridMode;

#[derive(Parser)]
#[command(name = "hpmg", version, about = "Multigrid parameter campaigns for flux-reconstruction solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every case with the default V-cycle parameters.
    Baseline(CommonArgs),
    /// Train a policy and write a checkpoint.
    Train(CommonArgs),
    /// Compare a trained checkpoint against the baseline.
    Evaluate(CommonArgs),
    /// Measure the spatial order of accuracy.
    Convergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON campaign file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Polynomial order.
    #[arg(long)]
    p: Option<usize>,
    /// Advection speed for every case.
    #[arg(long)]
    a: Option<f64>,
    /// Viscosity for every case.
    #[arg(long)]
    nu: Option<f64>,
    /// uniform | nonuniform
    #[arg(long)]
    mesh: Option<MeshKind>,
    /// p | hp
    #[arg(long)]
    mode: Option<MultigridMode>,
    /// Number of elements.
    #[arg(long)]
    n: Option<usize>,
    /// Seed for the mesh perturbation and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Charge weighted tendency evaluations instead of measured time.
    #[arg(long)]
    virtual_clock: bool,
}

impl CommonArgs {
    fn config(&self) -> Result<CampaignConfig, BenchError> {
        let mut cfg = match &self.config {
            Some(path) => CampaignConfig::load(path)?,
            None => CampaignConfig::default(),
        };
        cfg.apply(&Overrides {
            order: self.p,
            a: self.a,
            nu: self.nu,
            mesh: self.mesh,
            mode: self.mode,
            n_elements: self.n,
            seed: self.seed,
            episodes: self.episodes,
            out: self.out.clone(),
            checkpoint: self.checkpoint.clone(),
            threads: self.threads,
            virtual_clock: self.virtual_clock,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Baseline(args) => {
            let cfg = args.config()?;
            let report = cmd_baseline(&cfg)?;
            let converged = report.cases.iter().filter(|c| c.converged()).count();
            println!("{converged}/{} cases converged; report in {}", report.cases.len(), cfg.out.display());
        }
        Command::Train(args) => {
            let cfg = args.config()?;
            let total = cfg.training.ppo.episodes;
            let every = (total / 20).max(1);
            let mut progress = |e: &hpmg_ppo::EpisodeLog| {
                if (e.episode + 1) % every == 0 || e.episode + 1 == total {
                    eprintln!(
                        "episode {}/{total}: steps {} mean reward {:.4} residual {:.3e}",
                        e.episode + 1,
                        e.steps,
                        e.mean_reward,
                        e.final_residual
                    );
                }
            };
            let summary = cmd_train(&cfg, Some(&mut progress))?;
            println!("checkpoint written to {}", summary.checkpoint.display());
        }
        Command::Evaluate(args) => {
            let cfg = args.config()?;
            let eval = cmd_evaluate(&cfg)?;
            for w in &eval.warnings {
                eprintln!("warning: {w}");
            }
            let wins = eval
                .baseline
                .cases
                .iter()
                .zip(&eval.agent.cases)
                .filter(|(b, a)| a.converged() && (!b.converged() || a.seconds() < b.seconds()))
                .count();
            println!("agent faster on {wins}/{} cases; report in {}", eval.agent.cases.len(), cfg.out.display());
        }
        Command::Convergence(args) => {
            let cfg = args.config()?;
            let report = cmd_convergence(&cfg)?;
            for (p, s) in &report.slopes {
                println!("P={p}: slope {s:.3}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
