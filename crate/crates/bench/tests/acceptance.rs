//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line and
//! then asserts it.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hpmg_bench::campaign::{coefficient_of_variation, RunReport};
use hpmg_bench::config::Coefficients;
use hpmg_bench::convergence::convergence_study;
use hpmg_bench::{cmd_evaluate, cmd_train, CampaignConfig};
use hpmg_core::env::{Clock, EpisodeConfig, RawAction, SolverEnv, Termination};
use hpmg_core::fr::steady::solve_steady;
use hpmg_core::fr::{
    initial_condition, Basis, BoundaryCondition, Discretization, EquationKind, EquationSpec, Mesh1D, MeshKind,
    SolutionField, DEFAULT_CFL,
};
use hpmg_core::multigrid::{
    prolong_h, prolong_p, restrict_h, restrict_p, solve_single_grid, v_cycle, MultigridHierarchy, MultigridMode,
    SolveStatus, VCycleParams,
};
use hpmg_ppo::net::{DenseNet, Mode};
use hpmg_ppo::policy::{actor_layers, critic_layers};
use hpmg_ppo::{discounted_returns, ppo_clip_loss, Agent, Checkpoint, EpisodeLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to stdout so the lines survive the test harness's
/// output capture.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn verdict(criterion: u8, title: &str, pass: bool, detail: &str) {
    say(&format!("criterion {criterion} {}: {title} ({detail})", if pass { "PASS" } else { "FAIL" }));
}

fn linear_case(a: f64, nu: f64, order: usize, n: usize, mesh: MeshKind) -> EpisodeConfig {
    let mut c = EpisodeConfig::new(EquationSpec::linear(a, nu), order);
    c.n_elements = n;
    c.mesh_kind = mesh;
    c.mesh_seed = 7;
    c.max_steps = 20_000;
    c
}

fn run_baseline(cfg: EpisodeConfig) -> SolverEnv {
    let (mut env, _) = SolverEnv::reset(cfg).unwrap();
    let params = VCycleParams::baseline(env.hierarchy());
    while !env.is_done() {
        env.step_with_params(params.clone()).unwrap();
    }
    env
}

#[test]
fn criterion_1_spatial_accuracy() {
    let start = Instant::now();
    let report = convergence_study(&[2, 3], &[8, 16, 32, 64], 1.0, 0.1).unwrap();
    let elapsed = start.elapsed();
    let ok_slopes = report.slopes.iter().all(|&(p, s)| s >= p as f64 + 0.5);
    let pass = ok_slopes && elapsed < Duration::from_secs(120);
    let detail = report
        .slopes
        .iter()
        .map(|(p, s)| format!("P={p} slope {s:.3} (need {:.1})", *p as f64 + 0.5))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(1, "steady L2 convergence order", pass, &format!("{detail}; {:.1}s", elapsed.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_2_multigrid_acceleration() {
    let start = Instant::now();
    let cfg = linear_case(1.0, 0.01, 2, 32, MeshKind::Uniform);
    let mg = run_baseline(cfg.clone());
    let h = MultigridHierarchy::build(2, cfg.mesh(), cfg.eq, cfg.eq.default_bc(), MultigridMode::Hp).unwrap();
    let fine = h.finest();
    let single = solve_single_grid(fine, &fine.project_nodal(initial_condition), DEFAULT_CFL, 1e-9, 5_000_000);
    let elapsed = start.elapsed();
    let ratio = single.rhs_evals as f64 / mg.rhs_evals() as f64;
    let pass = mg.residual() <= 1e-9
        && single.status == SolveStatus::Converged
        && ratio >= 2.0
        && elapsed < Duration::from_secs(60);
    verdict(
        2,
        "V-cycle versus single-grid RK4",
        pass,
        &format!(
            "finest-level evaluations: multigrid {} in {} cycles, single grid {} in {} steps, ratio {ratio:.1}; {:.1}s",
            mg.rhs_evals(),
            mg.cycles(),
            single.rhs_evals,
            single.steps,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_baseline_viscosity_trend() {
    let start = Instant::now();
    let cycles: Vec<usize> = [(1.0, 0.01), (0.5, 0.5), (0.2, 0.8)]
        .iter()
        .map(|&(a, nu)| {
            let env = run_baseline(linear_case(a, nu, 2, 64, MeshKind::Nonuniform));
            assert!(env.residual() <= 1e-9, "baseline did not converge at a={a} nu={nu}");
            env.cycles()
        })
        .collect();
    let elapsed = start.elapsed();
    let increasing = cycles.windows(2).all(|w| w[0] < w[1]);
    let span = cycles[2] as f64 / cycles[0] as f64;
    let pass = increasing && span >= 5.0 && elapsed < Duration::from_secs(300);
    verdict(
        3,
        "baseline cycles grow with viscosity",
        pass,
        &format!("cycles {cycles:?}, span {span:.2}; {:.1}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

const SEEDS: [u64; 3] = [1, 2, 3];
const DESK_EPISODES: usize = 2000;

struct Trained {
    seed: u64,
    mode: MultigridMode,
    checkpoint: std::path::PathBuf,
    log: Vec<EpisodeLog>,
    seconds: f64,
}

/// Desk-scale training: P=2, 32 perturbed elements, coefficients drawn
/// from the default ranges, 64 cycles per episode.
fn desk_config(seed: u64, mode: MultigridMode, out: &Path) -> CampaignConfig {
    let mut c = CampaignConfig::default();
    c.orders = vec![2];
    c.training.ppo.episodes = DESK_EPISODES;
    c.training.ppo.seed = seed;
    c.training.n_elements = 32;
    c.training.mesh_kind = MeshKind::Nonuniform;
    c.training.mode = mode;
    c.training.max_steps = 64;
    c.out = out.to_path_buf();
    c
}

fn train_desk(seed: u64, mode: MultigridMode, root: &Path) -> Trained {
    let out = root.join(format!("{mode:?}-{seed}"));
    let start = Instant::now();
    let summary = cmd_train(&desk_config(seed, mode, &out), None).unwrap();
    Trained {
        seed,
        mode,
        checkpoint: summary.checkpoint,
        log: summary.outcome.log,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn workdir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

/// h/p-trained agents, one per seed, shared by criteria 4 and 5.
fn hp_agents() -> &'static [Trained] {
    static AGENTS: OnceLock<Vec<Trained>> = OnceLock::new();
    AGENTS.get_or_init(|| SEEDS.iter().map(|&s| train_desk(s, MultigridMode::Hp, workdir())).collect())
}

fn evaluation_config(coefficients: Vec<Coefficients>, mode: MultigridMode, ckpt: &Path, out: &Path) -> CampaignConfig {
    let mut c = CampaignConfig::default();
    c.orders = vec![2];
    c.coefficients = coefficients;
    c.mesh.kind = MeshKind::Nonuniform;
    c.mesh.n_elements = 32;
    c.mesh.seed = 7;
    c.mode = mode;
    c.virtual_clock = true;
    c.checkpoint = Some(ckpt.to_path_buf());
    c.out = out.to_path_buf();
    c
}

fn costs(r: &RunReport) -> Vec<f64> {
    r.cases.iter().map(|c| c.seconds()).collect()
}

fn decile_means(log: &[EpisodeLog]) -> (f64, f64) {
    let k = (log.len() / 10).max(1);
    let mean = |s: &[EpisodeLog]| s.iter().map(|e| e.mean_reward).sum::<f64>() / s.len() as f64;
    (mean(&log[..k]), mean(&log[log.len() - k..]))
}

#[test]
fn criterion_4_agent_consistency() {
    let nus = [0.01, 0.5, 0.8];
    let coefficients: Vec<Coefficients> = nus.iter().map(|&nu| Coefficients { a: 0.2, nu }).collect();
    let mut passed = 0;
    let mut cpu = 0.0;
    let mut details = Vec::new();
    for t in hp_agents() {
        cpu += t.seconds;
        let out = workdir().join(format!("eval-{}", t.seed));
        let cfg = evaluation_config(coefficients.clone(), MultigridMode::Hp, &t.checkpoint, &out);
        let eval = match cmd_evaluate(&cfg) {
            Ok(e) => e,
            Err(e) => {
                details.push(format!("seed {}: evaluation failed: {e}", t.seed));
                continue;
            }
        };
        let base = costs(&eval.baseline);
        let agent = costs(&eval.agent);
        let all_converged = eval.agent.cases.iter().chain(&eval.baseline.cases).all(|c| c.converged());
        let cv = coefficient_of_variation(&agent);
        let span = base.iter().cloned().fold(f64::MIN, f64::max) / base.iter().cloned().fold(f64::MAX, f64::min);
        let beats_high_nu = agent[1] < base[1] && agent[2] < base[2];
        let ok = all_converged && cv <= 0.3 && span >= 3.0 && beats_high_nu;
        passed += ok as usize;
        details.push(format!(
            "seed {}: {} agent {:.0}/{:.0}/{:.0} cv {cv:.3}, baseline {:.0}/{:.0}/{:.0} span {span:.2}",
            t.seed,
            if ok { "ok" } else { "miss" },
            agent[0],
            agent[1],
            agent[2],
            base[0],
            base[1],
            base[2]
        ));
    }
    let pass = passed >= 2 && cpu <= 3600.0;
    for d in &details {
        say(&format!("  {d}"));
    }
    verdict(
        4,
        "agent cost consistent across viscosity",
        pass,
        &format!("{passed}/{} seeds pass, need 2; training {cpu:.0}s", SEEDS.len()),
    );
    assert!(pass);
}

#[test]
fn desk_training_curve_improves() {
    let mut lines = Vec::new();
    let mut all = true;
    for t in hp_agents() {
        let (first, last) = decile_means(&t.log);
        all &= last > first;
        lines.push(format!("seed {} first decile {first:.3} last decile {last:.3}", t.seed));
    }
    say(&format!("training curve {}: {}", if all { "PASS" } else { "FAIL" }, lines.join("; ")));
    assert!(all);
}

#[test]
fn criterion_5_generalization_to_p_only() {
    let grid = vec![
        Coefficients { a: 1.0, nu: 0.01 },
        Coefficients { a: 0.5, nu: 0.5 },
        Coefficients { a: 0.2, nu: 0.8 },
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for t in hp_agents() {
        let out = workdir().join(format!("p-only-{}", t.seed));
        let mut cfg = evaluation_config(grid.clone(), MultigridMode::P, &t.checkpoint, &out);
        cfg.max_cycles = 100_000;
        let ok = match cmd_evaluate(&cfg) {
            Ok(eval) => {
                details.push(format!(
                    "seed {}: agent cycles {:?}",
                    t.seed,
                    eval.agent.cases.iter().map(|c| (c.cycles(), c.termination())).collect::<Vec<_>>()
                ));
                eval.agent.cases.iter().all(|c| c.converged())
            }
            Err(e) => {
                details.push(format!("seed {}: {e}", t.seed));
                false
            }
        };
        pass &= ok;
    }
    // Reverse direction, reported only.
    let p_trained = train_desk(SEEDS[0], MultigridMode::P, workdir());
    assert_eq!(p_trained.mode, MultigridMode::P);
    let out = workdir().join("hp-from-p");
    let mut cfg = evaluation_config(grid, MultigridMode::Hp, &p_trained.checkpoint, &out);
    cfg.max_cycles = 100_000;
    let reverse = match cmd_evaluate(&cfg) {
        Ok(eval) => format!(
            "p-trained agent on h/p grid: {:?}; {}",
            eval.agent.cases.iter().map(|c| (c.cycles(), c.termination())).collect::<Vec<_>>(),
            eval.warnings.join("; ")
        ),
        Err(e) => format!("p-trained agent on h/p grid: {e}"),
    };
    for d in &details {
        say(&format!("  {d}"));
    }
    say(&format!("  {reverse}"));
    verdict(5, "h/p-trained agents converge on a p-only grid", pass, &format!("{} agents", hp_agents().len()));
    assert!(pass);
}

const H: f64 = 1e-5;

fn fd_error(net: &mut DenseNet, x: &[f64], c: &[f64], masks: Option<&[Vec<f64>]>) -> f64 {
    let loss = |net: &DenseNet| -> f64 {
        let cache = match masks {
            Some(m) => net.forward_masked(x, m).unwrap(),
            None => net.forward(x, Mode::Eval, None).unwrap(),
        };
        cache.output().iter().zip(c).map(|(y, c)| y * c).sum()
    };
    let cache = match masks {
        Some(m) => net.forward_masked(x, m).unwrap(),
        None => net.forward(x, Mode::Eval, None).unwrap(),
    };
    let mut grad = vec![0.0; net.n_params()];
    net.backward(&cache, c, &mut grad).unwrap();
    let stride = (net.n_params() / 1500).max(1);
    let (mut diff, mut gn, mut fn_) = (0.0, 0.0, 0.0);
    for i in (0..net.n_params()).step_by(stride) {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + H;
        let up = loss(net);
        net.params_mut()[i] = orig - H;
        let down = loss(net);
        net.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * H);
        diff += (grad[i] - fd).powi(2);
        gn += grad[i] * grad[i];
        fn_ += fd * fd;
    }
    diff.sqrt() / gn.sqrt().max(fn_.sqrt()).max(1e-300)
}

#[test]
fn criterion_6_ppo_unit_correctness() {
    let start = Instant::now();
    let mut checks = Vec::new();

    let adv = [0.5, -1.0, 2.0];
    let identity = ppo_clip_loss(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3], &adv, 0.2);
    checks.push(("identity ratio", identity == -(0.5 - 1.0 + 2.0) / 3.0));
    let up = ppo_clip_loss(&[1.5f64.ln()], &[0.0], &[2.0], 0.2);
    checks.push(("clipped positive advantage", (up + 2.4).abs() < 1e-12));
    let down = ppo_clip_loss(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2);
    checks.push(("clipped negative advantage", (down - 0.8).abs() < 1e-12));

    checks.push(("returns", discounted_returns(&[1.0, 1.0, 1.0], &[false, false, true], 0.5, 0.0) == vec![1.75, 1.5, 1.0]));
    checks.push(("returns gamma 0", discounted_returns(&[3.0, -2.0], &[false, true], 0.0, 0.0) == vec![3.0, -2.0]));
    checks.push(("single return", discounted_returns(&[4.5], &[true], 0.98, 0.0) == vec![4.5]));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let shapes = actor_layers(4, 4).into_iter().chain(actor_layers(3, 6)).chain(critic_layers(4)).chain(critic_layers(3));
    for spec in shapes {
        let mut single = spec;
        single.dropout = 0.0;
        let mut net = DenseNet::new(vec![single]).unwrap();
        net.init(&mut rng);
        let x: Vec<f64> = (0..spec.inputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..spec.outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(fd_error(&mut net, &x, &c, None));
    }
    for layers in [actor_layers(4, 4), critic_layers(4)] {
        let mut net = DenseNet::new(layers).unwrap();
        net.init(&mut rng);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(fd_error(&mut net, &x, &c, None));
        let masks = net.forward(&x, Mode::Train, Some(&mut rng)).unwrap().into_masks();
        worst = worst.max(fd_error(&mut net, &x, &c, Some(&masks)));
    }
    checks.push(("finite differences", worst <= 1e-4));

    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = failed.is_empty() && elapsed < Duration::from_secs(10);
    verdict(
        6,
        "PPO loss, returns and gradients",
        pass,
        &format!("{} checks, failed {failed:?}, worst gradient error {worst:.2e}; {:.1}s", checks.len(), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_7_solver_invariants() {
    let start = Instant::now();
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let mut free_stream: f64 = 0.0;
    for mesh in [Mesh1D::uniform(16), Mesh1D::perturbed(16, 3), Mesh1D::perturbed(40, 8)] {
        for eq in [EquationSpec::linear(1.0, 0.0), EquationSpec::linear(0.3, 0.7), EquationSpec::linear(-0.4, 0.01)] {
            for p in 0..=4 {
                let c = 0.6;
                let d = Discretization::new(mesh.clone(), Basis::new(p), eq, BoundaryCondition { left: c, right: c });
                free_stream = free_stream.max(d.compute_rhs(&d.project_nodal(|_| c)).unwrap().max_abs());
            }
        }
    }
    checks.push(("free stream", free_stream <= 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut fixed_point: f64 = 0.0;
    for (eq, order, mode) in [
        (EquationSpec::linear(0.5, 0.5), 2, MultigridMode::Hp),
        (EquationSpec::linear(1.0, 0.05), 3, MultigridMode::P),
    ] {
        let h = MultigridHierarchy::build(order, Mesh1D::perturbed(16, 2), eq, eq.default_bc(), mode).unwrap();
        let u = solve_steady(h.finest(), &h.finest().zero_field(), 1e-12, 5).unwrap();
        for _ in 0..4 {
            let params = VCycleParams {
                pre_sweeps: (0..order).map(|_| rng.random_range(1..=10)).collect(),
                post_sweeps: (1..order).map(|_| rng.random_range(1..=10)).collect(),
                alpha_finest: rng.random_range(0.05..=1.0),
            };
            let (out, stats) = v_cycle(&u, &h, &params).unwrap();
            let change = out.values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            fixed_point = fixed_point.max(change).max(stats.residual_after);
        }
    }
    checks.push(("V-cycle fixed point", fixed_point <= 1e-10));

    let mut transfer: f64 = 0.0;
    for p in 0..5 {
        let vals: Vec<f64> = (0..8 * (p + 1)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let coarse = SolutionField::from_values(8, p + 1, vals);
        let back = restrict_p(&prolong_p(&coarse));
        transfer = transfer.max(back.values().iter().zip(coarse.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    for mesh in [Mesh1D::uniform(16), Mesh1D::perturbed(16, 5)] {
        let eq = EquationSpec::linear(1.0, 0.0);
        let d = Discretization::new(mesh.clone(), Basis::new(2), eq, eq.default_bc());
        let u = d.project_nodal(|x| x);
        let back = prolong_h(&restrict_h(&u, &mesh).unwrap(), &mesh).unwrap();
        transfer = transfer.max(back.values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    checks.push(("transfer round trips", transfer <= 1e-12));

    let mut sign_ok = true;
    for (nu, clock_virtual) in [(0.3, true), (0.8, true), (0.05, false)] {
        let mut cfg = linear_case(0.5, nu, 2, 16, MeshKind::Nonuniform);
        cfg.max_steps = 40;
        if !clock_virtual {
            cfg.clock = Clock::Wall;
        }
        let (mut env, _) = SolverEnv::reset(cfg).unwrap();
        while !env.is_done() {
            let before = env.residual();
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let step = env.step(&RawAction::new(raw).unwrap()).unwrap();
            if step.termination != Some(Termination::Diverged) {
                sign_ok &= (step.reward > 0.0) == (step.residual < before);
                sign_ok &= step.elapsed > 0.0;
            }
        }
    }
    checks.push(("reward sign", sign_ok));

    let dir = tempfile::tempdir().unwrap();
    let agent = Agent::new(4, 4, 0.15, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let ckpt = Checkpoint::new(
        agent,
        2,
        EquationKind::LinearAdvectionDiffusion,
        Default::default(),
        Default::default(),
        serde_json::json!({ "mode": "hp" }),
    );
    let (first, second) = (dir.path().join("a.mgrl"), dir.path().join("b.mgrl"));
    ckpt.save(&first).unwrap();
    let loaded = Checkpoint::load(&first).unwrap();
    loaded.save(&second).unwrap();
    let probe = [0.3, 1.0, 0.5, 0.2];
    checks.push((
        "checkpoint round trip",
        loaded == ckpt
            && std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap()
            && loaded.agent.act(&probe).unwrap() == ckpt.agent.act(&probe).unwrap(),
    ));

    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = failed.is_empty() && elapsed < Duration::from_secs(60);
    verdict(
        7,
        "solver invariant suite",
        pass,
        &format!(
            "free stream {free_stream:.1e}, fixed point {fixed_point:.1e}, transfer {transfer:.1e}, failed {failed:?}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}
