//! The four subcommands as library functions. Each writes its artifacts
//! into the configured output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use hpmg_core::env::EpisodeConfig;
use hpmg_core::fr::MeshKind;
use hpmg_core::multigrid::{MultigridMode, SWEEP_MAX};
use hpmg_ppo::{train, write_training_log, Checkpoint, EpisodeLog, TrainOutcome};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::campaign::{run_campaign, RunReport, Solver};
use crate::config::CampaignConfig;
use crate::convergence::{convergence_study, ConvergenceReport};
use crate::report::{baseline_markdown, comparison_markdown, convergence_csv, convergence_markdown, write_csv};
use crate::BenchError;

fn create(cfg: &CampaignConfig, name: &str) -> Result<BufWriter<File>, BenchError> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(BufWriter::new(File::create(cfg.out.join(name))?))
}

fn write_text(cfg: &CampaignConfig, name: &str, text: &str) -> Result<(), BenchError> {
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join(name), text)?;
    Ok(())
}

/// Baseline parameters over the whole grid; writes `report.csv` and
/// `report.md`.
pub fn cmd_baseline(cfg: &CampaignConfig) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let report = run_campaign(cfg, Solver::Baseline)?;
    write_csv(&[&report], create(cfg, "report.csv")?)?;
    write_text(cfg, "report.md", &baseline_markdown(&report))?;
    if report.all_diverged() {
        return Err(BenchError::AllDiverged);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub outcome: TrainOutcome,
    pub checkpoint: PathBuf,
}

/// Episode configurations for training: coefficients drawn from the
/// configured ranges and, on perturbed meshes, a fresh mesh every episode.
pub fn training_episode(cfg: &CampaignConfig, rng: &mut ChaCha8Rng) -> EpisodeConfig {
    let t = &cfg.training;
    let mut c = EpisodeConfig::new(t.ranges.sample(cfg.equation, rng), cfg.orders[0]);
    c.n_elements = t.n_elements;
    c.mesh_kind = t.mesh_kind;
    c.mesh_seed = if t.mesh_kind == MeshKind::Nonuniform { rng.random() } else { 0 };
    c.mode = t.mode;
    c.tol = cfg.tol;
    c.max_steps = t.max_steps;
    c.sweep_max = SWEEP_MAX;
    c.clock = t.clock;
    c
}

/// Trains one agent for the single configured order; writes
/// `training_log.csv` and the checkpoint.
pub fn cmd_train(
    cfg: &CampaignConfig,
    on_episode: Option<&mut dyn FnMut(&EpisodeLog)>,
) -> Result<TrainSummary, BenchError> {
    cfg.validate()?;
    if cfg.orders.len() != 1 {
        return Err(BenchError::Config(format!("training needs exactly one order, got {:?}", cfg.orders)));
    }
    let mut factory = |_episode: usize, rng: &mut ChaCha8Rng| training_episode(cfg, rng);
    let outcome = train(&mut factory, &cfg.training.ppo, on_episode)?;
    write_training_log(&outcome.log, create(cfg, "training_log.csv")?)?;
    let t = &cfg.training;
    let environment = serde_json::json!({
        "mesh": t.mesh_kind,
        "n_elements": t.n_elements,
        "mode": t.mode,
        "max_steps": t.max_steps,
        "tol": cfg.tol,
        "ranges": t.ranges,
        "clock": t.clock,
    });
    let ckpt = Checkpoint::new(
        outcome.agent.clone(),
        cfg.orders[0],
        cfg.equation,
        t.ppo.clone(),
        outcome.progress,
        environment,
    );
    let path = cfg.checkpoint_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    ckpt.save(&path)?;
    Ok(TrainSummary { outcome, checkpoint: path })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub baseline: RunReport,
    pub agent: RunReport,
    pub warnings: Vec<String>,
}

/// Checks that a checkpoint can drive the configured campaign. Returns
/// non-fatal warnings.
pub fn check_checkpoint(cfg: &CampaignConfig, ckpt: &Checkpoint) -> Result<Vec<String>, BenchError> {
    let h = &ckpt.header;
    if h.equation != cfg.equation {
        return Err(BenchError::CheckpointMismatch(format!(
            "checkpoint was trained on {}, campaign uses {}",
            h.equation.as_str(),
            cfg.equation.as_str()
        )));
    }
    if let Some(&p) = cfg.orders.iter().find(|&&p| p != h.order) {
        return Err(BenchError::CheckpointMismatch(format!(
            "checkpoint was trained for P={}, campaign requests P={p}",
            h.order
        )));
    }
    let mut warnings = Vec::new();
    let trained_mode = h.environment.get("mode").and_then(|m| serde_json::from_value::<MultigridMode>(m.clone()).ok());
    if trained_mode == Some(MultigridMode::P) && cfg.mode == MultigridMode::Hp {
        warnings.push("checkpoint was trained with p-only coarsening and is evaluated on an h/p hierarchy".into());
    }
    Ok(warnings)
}

/// Baseline and agent over the same grid; writes a combined `report.csv`
/// and the side-by-side `report.md`.
pub fn cmd_evaluate(cfg: &CampaignConfig) -> Result<Evaluation, BenchError> {
    cfg.validate()?;
    let ckpt = Checkpoint::load(cfg.checkpoint_path())?;
    let warnings = check_checkpoint(cfg, &ckpt)?;
    let baseline = run_campaign(cfg, Solver::Baseline)?;
    let agent = run_campaign(cfg, Solver::Agent(&ckpt.agent))?;
    write_csv(&[&baseline, &agent], create(cfg, "report.csv")?)?;
    write_text(cfg, "report.md", &comparison_markdown(&baseline, &agent))?;
    if agent.all_diverged() {
        return Err(BenchError::AllDiverged);
    }
    Ok(Evaluation { baseline, agent, warnings })
}

/// Order-of-accuracy study for every configured order.
pub fn cmd_convergence(cfg: &CampaignConfig) -> Result<ConvergenceReport, BenchError> {
    cfg.validate()?;
    if cfg.equation != hpmg_core::fr::EquationKind::LinearAdvectionDiffusion {
        return Err(BenchError::Config("the convergence study needs the linear equation".into()));
    }
    let c = &cfg.convergence;
    let report = convergence_study(&cfg.orders, &c.sizes, c.a, c.nu)?;
    convergence_csv(&report, create(cfg, "report.csv")?)?;
    write_text(cfg, "report.md", &convergence_markdown(&report))?;
    Ok(report)
}
