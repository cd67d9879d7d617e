//! The end-to-end pipeline: generalist until plateau, specialists on the
//! weakest variations, demonstrations, and consolidation. Every phase
//! persists its outputs and the plan, so an interrupted run resumes at the
//! phase it was in.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ignorance::IgnoranceReport;
use super::learner::{train, Consolidation, Learner, TrainSpec};
use super::plan::{select_lowest_variations, split_into_subsets, GslPlan, Phase, SpecialistRecord, StepLedger};
use super::specialists::{train_specialists, SpecialistJob};
use crate::agents::Actor;
use crate::autodiff::AdamState;
use crate::config::{Backbone, ExperimentConfig, SpecialistInit};
use crate::demo_store::{record_and_filter, DemoInventory, DemoSampler, DemoSource};
use crate::envs::{evaluate_per_variation, make_env, Env, VariationReport};
use crate::error::{GslError, Result};
use crate::lfd::{bc_update, Discriminator, GailHooks, LfdMethod};
use crate::metrics::{MetricsRow, MetricsWriter};
use crate::plateau::detect_plateau;
use crate::rng::rng_for;

pub const CONFIG_FILE: &str = "config.toml";
pub const PLAN_FILE: &str = "plan.json";
pub const REPORT_FILE: &str = "report.json";

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["metrics", "checkpoints", "demos"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.join(CONFIG_FILE).exists() {
            return Err(GslError::Runtime(format!(
                "{} is not a run directory (no {CONFIG_FILE})",
                root.display()
            )));
        }
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn config(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }

    pub fn plan(&self) -> PathBuf {
        self.root.join(PLAN_FILE)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join(REPORT_FILE)
    }

    pub fn metrics(&self, name: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{name}.csv"))
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{name}.ckpt"))
    }

    pub fn demos(&self, name: &str) -> PathBuf {
        self.root.join("demos").join(format!("{name}.gsldemo"))
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().into_owned()
    }
}

/// Per-specialist summary in the final report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistSummary {
    pub id: usize,
    pub variations: Vec<usize>,
    pub best_epoch: Option<usize>,
    pub best_return: Option<f64>,
    pub best_success: Option<f64>,
    /// Plateaued generalist's evaluation return on the same variations.
    pub generalist_return: Option<f64>,
}

/// Machine-readable summary written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `gsl`, `baseline` or `consolidation`.
    pub kind: String,
    pub env: String,
    pub backbone: Backbone,
    pub method: Option<LfdMethod>,
    pub seed: u64,
    pub phase: Phase,
    pub samples_per_epoch: usize,
    pub phase1_epochs: usize,
    pub phase1_budget_epochs: usize,
    pub trigger_epoch: Option<usize>,
    pub early_exit: bool,
    pub steps: StepLedger,
    pub total_steps: u64,
    pub low_variations: Vec<usize>,
    pub before: Option<VariationReport>,
    pub after: Option<VariationReport>,
    pub ignorance_before: Option<IgnoranceReport>,
    pub ignorance_after: Option<IgnoranceReport>,
    pub specialists: Vec<SpecialistSummary>,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn ignorance_of(report: &Option<VariationReport>) -> Option<IgnoranceReport> {
    report.as_ref().and_then(|r| IgnoranceReport::from_evaluation(r).ok())
}

fn evaluate(cfg: &ExperimentConfig, actor: &dyn Actor, env: &dyn Env, label: &str) -> Result<VariationReport> {
    evaluate_per_variation(
        actor,
        env,
        cfg.eval.episodes,
        cfg.eval.deterministic,
        &mut rng_for(cfg.seed, &format!("evaluate/{label}")),
    )
}

/// Which phase a run stops before; `Phase::Done` runs everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub stop_before: Phase,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop_before: Phase::Done,
        }
    }
}

/// Start a fresh pipeline in `out`. An existing plan there is an error; use
/// [`resume_gsl`] to continue it.
pub fn run_gsl(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<GslPlan> {
    cfg.validate()?;
    cfg.gsl.check_budget(cfg.samples_per_epoch())?;
    let dir = RunDir::create(out)?;
    if dir.plan().exists() {
        return Err(GslError::Runtime(format!(
            "{} already holds a run; resume it instead",
            out.display()
        )));
    }
    cfg.save(&dir.config())?;
    let plan = GslPlan::new(cfg.seed);
    plan.save(&dir.plan())?;
    drive(cfg, &dir, plan, opts)
}

/// Continue the run in `dir` from its persisted plan, using the config
/// snapshot stored there.
pub fn resume_gsl(dir: &Path, opts: RunOptions) -> Result<GslPlan> {
    let dir = RunDir::open(dir)?;
    let cfg = ExperimentConfig::from_toml(&fs::read_to_string(dir.config())?)?;
    let plan = GslPlan::load(&dir.plan())?;
    drive(&cfg, &dir, plan, opts)
}

fn drive(cfg: &ExperimentConfig, dir: &RunDir, mut plan: GslPlan, opts: RunOptions) -> Result<GslPlan> {
    let env = make_env(&cfg.env)?;
    while plan.phase < opts.stop_before {
        log::info!("phase {:?}", plan.phase);
        match plan.phase {
            Phase::GeneralistI => phase1(cfg, env.as_ref(), dir, &mut plan)?,
            Phase::Select => select(cfg, env.as_ref(), dir, &mut plan)?,
            Phase::Specialists => specialists(cfg, env.as_ref(), dir, &mut plan)?,
            Phase::Demos => demos(cfg, env.as_ref(), dir, &mut plan)?,
            Phase::GeneralistII => phase2(cfg, env.as_ref(), dir, &mut plan)?,
            Phase::Done => break,
        }
        plan.save(&dir.plan())?;
        write_report(cfg, dir, &plan)?;
    }
    Ok(plan)
}

fn write_report(cfg: &ExperimentConfig, dir: &RunDir, plan: &GslPlan) -> Result<()> {
    let specialists = plan
        .specialists
        .iter()
        .map(|s| SpecialistSummary {
            id: s.id,
            variations: s.variations.clone(),
            best_epoch: s.best_epoch,
            best_return: s.best_return,
            best_success: s.best_success,
            generalist_return: plan.before.as_ref().map(|b| b.mean_return_on(&s.variations)),
        })
        .collect();
    RunReport {
        kind: "gsl".into(),
        env: cfg.env.name.clone(),
        backbone: cfg.backbone,
        method: Some(cfg.lfd.method),
        seed: cfg.seed,
        phase: plan.phase,
        samples_per_epoch: cfg.samples_per_epoch(),
        phase1_epochs: plan.phase1_epochs,
        phase1_budget_epochs: plan.phase1_budget_epochs,
        trigger_epoch: plan.trigger_epoch,
        early_exit: plan.early_exit,
        steps: plan.steps.clone(),
        total_steps: plan.steps.total(),
        low_variations: plan.low_variations.clone(),
        before: plan.before.clone(),
        after: plan.after.clone(),
        ignorance_before: ignorance_of(&plan.before),
        ignorance_after: ignorance_of(&plan.after),
        specialists,
    }
    .save(&dir.report())
}

/// Mean returns per epoch with gaps (epochs without a finished episode)
/// filled by the previous value.
pub fn return_curve(rows: &[MetricsRow]) -> Vec<f64> {
    let mut last = f64::NAN;
    let mut curve: Vec<f64> = rows
        .iter()
        .map(|r| {
            if r.mean_return.is_finite() {
                last = r.mean_return;
            }
            last
        })
        .collect();
    let first = curve.iter().copied().find(|v| v.is_finite()).unwrap_or(0.0);
    for v in curve.iter_mut().take_while(|v| !v.is_finite()) {
        *v = first;
    }
    curve
}

fn phase1(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &mut GslPlan) -> Result<()> {
    let per_epoch = cfg.samples_per_epoch() as u64;
    let cap = cfg.gsl.total_steps - cfg.gsl.reserved_steps(cfg.samples_per_epoch());
    let budget_epochs = (cap / per_epoch) as usize;
    plan.phase1_budget_epochs = budget_epochs;

    let mut learner = Learner::new(cfg, env, &mut rng_for(cfg.seed, "generalist/init"))?;
    let init_path = dir.checkpoint("generalist_init");
    learner.save(&init_path, "generalist_init")?;
    plan.checkpoints
        .insert("generalist_init".into(), dir.relative(&init_path));

    let metrics = dir.metrics("phase1_generalist");
    MetricsWriter::create_empty(&metrics)?;
    let mut writer = MetricsWriter::create(&metrics)?;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut trigger = None;
    let forced = cfg.gsl.trigger_epoch;

    let steps = if forced == Some(0) {
        0
    } else {
        train(
            &mut learner,
            cfg,
            TrainSpec {
                env,
                variations: (0..env.num_variations()).collect(),
                budget: budget_epochs as u64 * per_epoch,
                step_offset: 0,
                seed: cfg.seed,
                label: "generalist-1".into(),
            },
            Consolidation::Plain,
            &mut |_, row| {
                writer.write(row)?;
                rows.push(row.clone());
                let n = rows.len();
                if let Some(e) = forced {
                    return Ok(n >= e);
                }
                if n % cfg.plateau.check_every == 0 {
                    if let Some(t) = detect_plateau(&return_curve(&rows), &cfg.plateau, budget_epochs) {
                        log::info!("plateau at epoch {t}, confirmed after {n} epochs");
                        trigger = Some(t);
                        return Ok(true);
                    }
                }
                Ok(false)
            },
        )?
    };
    plan.steps.phase1 = steps;
    plan.phase1_epochs = rows.len();
    plan.trigger_epoch = trigger;

    let path = dir.checkpoint("generalist_phase1");
    learner.save(&path, "generalist_phase1")?;
    plan.checkpoints.insert("generalist_phase1".into(), dir.relative(&path));

    let before = evaluate(cfg, learner.actor(), env, "phase1")?;
    let bar = cfg.gsl.optimality_bar();
    plan.early_exit = bar.is_some_and(|b| before.mean_return() >= b);
    plan.before = Some(before);
    if plan.early_exit {
        log::info!("generalist is within the optimality bar; skipping specialists");
        plan.checkpoints.insert("generalist_final".into(), dir.relative(&path));
        plan.phase = Phase::Done;
    } else {
        plan.phase = Phase::Select;
    }
    Ok(())
}

fn select(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &mut GslPlan) -> Result<()> {
    let before = plan
        .before
        .as_ref()
        .ok_or_else(|| GslError::Runtime("plan has no phase-I evaluation".into()))?;
    let low = select_lowest_variations(&before.mean_returns, cfg.gsl.num_low_variations)?;
    let subsets = split_into_subsets(&low, cfg.gsl.num_specialists)?;

    plan.steps.low_finetune = 0;
    if cfg.gsl.low_finetune_epochs > 0 {
        let mut learner = Learner::load(cfg, env, &dir.checkpoint("generalist_phase1"))?;
        let metrics = dir.metrics("low_finetune");
        MetricsWriter::create_empty(&metrics)?;
        let mut writer = MetricsWriter::create(&metrics)?;
        let steps = train(
            &mut learner,
            cfg,
            TrainSpec {
                env,
                variations: low.clone(),
                budget: (cfg.gsl.low_finetune_epochs * cfg.samples_per_epoch()) as u64,
                step_offset: plan.steps.total(),
                seed: cfg.seed,
                label: "generalist-low".into(),
            },
            Consolidation::Plain,
            &mut |_, row| {
                writer.write(row)?;
                Ok(false)
            },
        )?;
        plan.steps.low_finetune = steps;
        let path = dir.checkpoint("generalist_low");
        learner.save(&path, "generalist_low")?;
        plan.checkpoints.insert("generalist_low".into(), dir.relative(&path));
    }

    plan.specialists = subsets
        .iter()
        .enumerate()
        .map(|(id, vars)| SpecialistRecord {
            id,
            variations: vars.clone(),
            init: cfg.gsl.specialist_init,
            done: false,
            best_epoch: None,
            best_return: None,
            best_success: None,
        })
        .collect();
    plan.steps.specialists = vec![0; subsets.len()];
    plan.low_variations = low;
    plan.subsets = subsets;
    plan.phase = Phase::Specialists;
    Ok(())
}

fn specialist_init(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &GslPlan) -> Result<Option<Learner>> {
    if cfg.gsl.specialist_init == SpecialistInit::Fresh {
        return Ok(None);
    }
    let name = if plan.checkpoints.contains_key("generalist_low") {
        "generalist_low"
    } else {
        "generalist_phase1"
    };
    Ok(Some(Learner::load(cfg, env, &dir.checkpoint(name))?))
}

fn specialists(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &mut GslPlan) -> Result<()> {
    let init = specialist_init(cfg, env, dir, plan)?;
    let base = plan.steps.phase1 + plan.steps.low_finetune;
    let jobs: Vec<SpecialistJob> = plan
        .specialists
        .iter()
        .filter(|s| !s.done)
        .map(|s| SpecialistJob {
            id: s.id,
            variations: s.variations.clone(),
            init: s.init,
            budget: cfg.gsl.specialist_steps,
            step_offset: base + s.id as u64 * cfg.gsl.specialist_steps,
            metrics_path: Some(dir.metrics(&format!("specialist_{}", s.id))),
        })
        .collect();
    let plan_path = dir.plan();
    train_specialists(cfg, env, jobs, init.as_ref(), cfg.parallelism, &mut |out| {
        let name = format!("specialist_{}_best", out.id);
        let path = dir.checkpoint(&name);
        out.best.save(&path, &name)?;
        plan.checkpoints.insert(name, dir.relative(&path));
        plan.steps.specialists[out.id] = out.steps;
        let rec = &mut plan.specialists[out.id];
        rec.done = true;
        rec.best_epoch = Some(out.best_epoch);
        rec.best_return = Some(out.best_return);
        rec.best_success = Some(out.best_success);
        log::info!(
            "specialist {} on {:?}: best return {:.3} after epoch {}",
            out.id,
            rec.variations,
            out.best_return,
            out.best_epoch
        );
        plan.save(&plan_path)
    })?;
    plan.phase = Phase::Demos;
    Ok(())
}

fn demos(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &mut GslPlan) -> Result<()> {
    let filter = cfg.gsl.demo_filter();
    let per_specialist = cfg.gsl.specialist_demo_steps / cfg.gsl.num_specialists;
    plan.steps.demos = 0;
    plan.demo_files.clear();
    let mut merged = DemoInventory::for_env(env, filter);
    for s in &plan.specialists {
        let name = format!("specialist_{}_best", s.id);
        let learner = Learner::load(cfg, env, &dir.checkpoint(&name))?;
        let rec = record_and_filter(
            learner.actor(),
            env,
            &s.variations,
            per_specialist,
            filter,
            DemoSource::Specialist(s.id),
            &name,
            &mut rng_for(cfg.seed, &format!("demos/specialist-{}", s.id)),
        )?;
        plan.steps.demos += rec.env_steps;
        let path = dir.demos(&format!("specialist_{}", s.id));
        rec.inventory.save(&path)?;
        plan.demo_files.push(dir.relative(&path));
        merged = merged.merge(rec.inventory)?;
    }
    let rest: Vec<usize> = (0..env.num_variations())
        .filter(|v| !plan.low_variations.contains(v))
        .collect();
    if !rest.is_empty() {
        let target = cfg
            .gsl
            .generalist_demo_steps
            .unwrap_or(cfg.gsl.specialist_demo_steps * rest.len() / plan.low_variations.len());
        if target > 0 {
            let learner = Learner::load(cfg, env, &dir.checkpoint("generalist_phase1"))?;
            let rec = record_and_filter(
                learner.actor(),
                env,
                &rest,
                target,
                filter,
                DemoSource::Generalist,
                "generalist_phase1",
                &mut rng_for(cfg.seed, "demos/generalist"),
            )?;
            plan.steps.demos += rec.env_steps;
            let path = dir.demos("generalist");
            rec.inventory.save(&path)?;
            plan.demo_files.push(dir.relative(&path));
            merged = merged.merge(rec.inventory)?;
        }
    }
    plan.demo_counts = merged.counts();
    plan.phase = Phase::GeneralistII;
    Ok(())
}

/// Union of every demo file the plan lists.
pub fn load_demos(dir: &RunDir, plan: &GslPlan, env: &dyn Env, cfg: &ExperimentConfig) -> Result<DemoInventory> {
    let mut inv = DemoInventory::for_env(env, cfg.gsl.demo_filter());
    for f in &plan.demo_files {
        inv = inv.merge(DemoInventory::load(&dir.root.join(f))?)?;
    }
    Ok(inv)
}

fn phase2(cfg: &ExperimentConfig, env: &dyn Env, dir: &RunDir, plan: &mut GslPlan) -> Result<()> {
    let inv = load_demos(dir, plan, env, cfg)?;
    let learner = Learner::load(cfg, env, &dir.checkpoint("generalist_phase1"))?;
    plan.steps.phase2 = 0;
    let used = plan.steps.total();
    let budget = cfg
        .gsl
        .consolidation_steps
        .min(cfg.gsl.total_steps.saturating_sub(used));
    let out = consolidate_with(
        cfg,
        env,
        learner,
        &inv,
        Some(cfg.lfd.method),
        budget,
        used,
        &dir.metrics(&format!("phase2_{}", method_name(Some(cfg.lfd.method)))),
    )?;
    plan.steps.phase2 = out.steps;
    let path = dir.checkpoint("generalist_final");
    out.learner.save(&path, "generalist_final")?;
    plan.checkpoints.insert("generalist_final".into(), dir.relative(&path));
    plan.after = Some(evaluate(cfg, out.learner.actor(), env, "final")?);
    plan.phase = Phase::Done;
    Ok(())
}

pub fn method_name(method: Option<LfdMethod>) -> &'static str {
    match method {
        Some(LfdMethod::Dapg) => "dapg",
        Some(LfdMethod::Gail) => "gail",
        Some(LfdMethod::Bc) => "bc",
        None => "plain",
    }
}

pub struct ConsolidationOutcome {
    pub learner: Learner,
    pub steps: u64,
    pub rows: Vec<MetricsRow>,
}

/// Train `learner` on the demos with `method` (`None`: the plain backbone,
/// ignoring the demos) for `budget` environment steps, writing one metrics
/// row per epoch to `metrics`.
#[allow(clippy::too_many_arguments)]
pub fn consolidate_with(
    cfg: &ExperimentConfig,
    env: &dyn Env,
    mut learner: Learner,
    demos: &DemoInventory,
    method: Option<LfdMethod>,
    budget: u64,
    step_offset: u64,
    metrics: &Path,
) -> Result<ConsolidationOutcome> {
    MetricsWriter::create_empty(metrics)?;
    let mut writer = MetricsWriter::create(metrics)?;
    let mut rows = Vec::new();
    let demo_rng = rng_for(cfg.seed, "generalist-2/demos");
    let spec = TrainSpec {
        env,
        variations: (0..env.num_variations()).collect(),
        budget,
        step_offset,
        seed: cfg.seed,
        label: "generalist-2".into(),
    };
    let mut record = |row: &MetricsRow| -> Result<bool> {
        writer.write(row)?;
        rows.push(row.clone());
        Ok(false)
    };
    let steps = match method {
        None => train(&mut learner, cfg, spec, Consolidation::Plain, &mut |_, r| record(r))?,
        Some(LfdMethod::Dapg) => {
            let mut sampler = DemoSampler::new(demos, demo_rng);
            let mode = Consolidation::Dapg {
                sampler: &mut sampler,
                cfg: &cfg.lfd.dapg,
            };
            train(&mut learner, cfg, spec, mode, &mut |_, r| record(r))?
        }
        Some(LfdMethod::Gail) => {
            let Learner::Sac(agent) = &learner else {
                return Err(GslError::config("gail needs the sac backbone"));
            };
            let disc = Discriminator::new(
                env.obs_dim(),
                agent.action_dim(),
                cfg.lfd.gail.hidden.clone(),
                cfg.lfd.gail.delta,
                &mut rng_for(cfg.seed, "generalist-2/discriminator"),
            );
            let mut hooks = GailHooks::new(cfg.lfd.gail.clone(), disc, demos, demo_rng)?;
            train(&mut learner, cfg, spec, Consolidation::Sac(&mut hooks), &mut |_, r| {
                record(r)
            })?
        }
        Some(LfdMethod::Bc) => {
            let Learner::Ppo(agent) = &mut learner else {
                return Err(GslError::config("bc runs on the ppo backbone"));
            };
            behavior_clone(cfg, env, agent, demos, budget, step_offset, demo_rng, &mut record)?;
            0
        }
    };
    Ok(ConsolidationOutcome { learner, steps, rows })
}

/// Behavior cloning in place of the backbone: as many gradient steps as
/// the backbone would take on `budget` samples, one evaluation row per
/// epoch-equivalent. No environment step is charged.
#[allow(clippy::too_many_arguments)]
fn behavior_clone(
    cfg: &ExperimentConfig,
    env: &dyn Env,
    agent: &mut crate::agents::PpoAgent,
    demos: &DemoInventory,
    budget: u64,
    step_offset: u64,
    demo_rng: crate::rng::JobRng,
    record: &mut dyn FnMut(&MetricsRow) -> Result<bool>,
) -> Result<()> {
    let ppo = &cfg.ppo;
    let per_epoch = ppo.epochs * ppo.samples_per_epoch.div_ceil(ppo.minibatch);
    let epochs = (budget / ppo.samples_per_epoch as u64) as usize;
    let total = cfg.lfd.bc.steps.unwrap_or(epochs * per_epoch);
    let mut sampler = DemoSampler::new(demos, demo_rng);
    let mut opt = AdamState::for_params(&agent.policy.params);
    let mut done = 0usize;
    let mut epoch = 0usize;
    while done < total {
        let n = per_epoch.min(total - done);
        let stats = bc_update(
            &mut agent.policy,
            &mut opt,
            &mut sampler,
            cfg.lfd.bc.batch_size,
            n,
            cfg.lfd.bc.lr,
            ppo.max_grad_norm,
        )?;
        done += n;
        let eval = evaluate(cfg, &agent.policy, env, &format!("bc-{epoch}"))?;
        let row = MetricsRow {
            epoch,
            total_samples: step_offset,
            mean_return: eval.mean_return(),
            std_return: std_dev(&eval.mean_returns),
            success_rate: eval.success_rate(),
            policy_loss: stats.nll,
            demo_loss: Some(stats.nll),
            ..MetricsRow::default()
        };
        record(&row)?;
        epoch += 1;
    }
    Ok(())
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Phase-II consolidation of an existing run's demos into its phase-I
/// generalist, written to a separate directory. Used to compare methods on
/// identical demonstrations.
pub fn consolidate_run(
    source: &Path,
    method: Option<LfdMethod>,
    out: &Path,
    overrides: &[String],
) -> Result<RunReport> {
    let src = RunDir::open(source)?;
    let mut cfg = ExperimentConfig::from_toml(&fs::read_to_string(src.config())?)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(m) = method {
        cfg.lfd.method = m;
    }
    cfg.validate()?;
    let plan = GslPlan::load(&src.plan())?;
    if plan.phase < Phase::GeneralistII {
        return Err(GslError::Runtime(format!(
            "{} has not finished collecting demonstrations",
            source.display()
        )));
    }
    let env = make_env(&cfg.env)?;
    let dir = RunDir::create(out)?;
    cfg.save(&dir.config())?;
    let inv = load_demos(&src, &plan, env.as_ref(), &cfg)?;
    let learner = Learner::load(&cfg, env.as_ref(), &src.checkpoint("generalist_phase1"))?;
    let used = plan.steps.total() - plan.steps.phase2;
    let budget = cfg
        .gsl
        .consolidation_steps
        .min(cfg.gsl.total_steps.saturating_sub(used));
    let outcome = consolidate_with(
        &cfg,
        env.as_ref(),
        learner,
        &inv,
        method,
        budget,
        used,
        &dir.metrics(&format!("phase2_{}", method_name(method))),
    )?;
    let path = dir.checkpoint("generalist_final");
    outcome.learner.save(&path, "generalist_final")?;
    let after = evaluate(&cfg, outcome.learner.actor(), env.as_ref(), "final")?;
    let mut steps = plan.steps.clone();
    steps.phase2 = outcome.steps;
    let report = RunReport {
        kind: "consolidation".into(),
        env: cfg.env.name.clone(),
        backbone: cfg.backbone,
        method,
        seed: cfg.seed,
        phase: Phase::Done,
        samples_per_epoch: cfg.samples_per_epoch(),
        phase1_epochs: plan.phase1_epochs,
        phase1_budget_epochs: plan.phase1_budget_epochs,
        trigger_epoch: plan.trigger_epoch,
        early_exit: false,
        total_steps: steps.total(),
        steps,
        low_variations: plan.low_variations.clone(),
        ignorance_before: ignorance_of(&plan.before),
        ignorance_after: ignorance_of(&Some(after.clone())),
        before: plan.before.clone(),
        after: Some(after),
        specialists: Vec::new(),
    };
    report.save(&dir.report())?;
    Ok(report)
}

/// The generalist alone, trained on every variation for the whole budget
/// with no plateau stop. Uses the same initialization and streams as phase
/// I of [`run_gsl`], so the two curves coincide up to the trigger.
pub fn run_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let env = make_env(&cfg.env)?;
    let dir = RunDir::create(out)?;
    cfg.save(&dir.config())?;
    let mut learner = Learner::new(cfg, env.as_ref(), &mut rng_for(cfg.seed, "generalist/init"))?;
    learner.save(&dir.checkpoint("generalist_init"), "generalist_init")?;
    let metrics = dir.metrics("baseline");
    MetricsWriter::create_empty(&metrics)?;
    let mut writer = MetricsWriter::create(&metrics)?;
    let steps = train(
        &mut learner,
        cfg,
        TrainSpec {
            env: env.as_ref(),
            variations: (0..env.num_variations()).collect(),
            budget: cfg.gsl.total_steps,
            step_offset: 0,
            seed: cfg.seed,
            label: "generalist-1".into(),
        },
        Consolidation::Plain,
        &mut |_, row| {
            writer.write(row)?;
            Ok(false)
        },
    )?;
    if steps > 0 {
        learner.save(&dir.checkpoint("generalist_final"), "generalist_final")?;
    }
    let after = evaluate(cfg, learner.actor(), env.as_ref(), "final")?;
    let report = RunReport {
        kind: "baseline".into(),
        env: cfg.env.name.clone(),
        backbone: cfg.backbone,
        method: None,
        seed: cfg.seed,
        phase: Phase::Done,
        samples_per_epoch: cfg.samples_per_epoch(),
        phase1_epochs: (steps / cfg.samples_per_epoch() as u64) as usize,
        phase1_budget_epochs: (cfg.gsl.total_steps / cfg.samples_per_epoch() as u64) as usize,
        trigger_epoch: None,
        early_exit: false,
        steps: StepLedger {
            phase1: steps,
            ..StepLedger::default()
        },
        total_steps: steps,
        low_variations: Vec::new(),
        before: None,
        ignorance_before: None,
        ignorance_after: ignorance_of(&Some(after.clone())),
        after: Some(after),
        specialists: Vec::new(),
    };
    report.save(&dir.report())?;
    Ok(report)
}
