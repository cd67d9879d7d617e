//! Specialist training: independent jobs, each on its own variation subset,
//! run concurrently up to a fixed parallelism.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};

use super::learner::{train, Consolidation, Learner, TrainSpec};
use crate::config::{ExperimentConfig, SpecialistInit};
use crate::envs::{evaluate_on, Env};
use crate::error::Result;
use crate::metrics::{MetricsRow, MetricsWriter};
use crate::rng::rng_for;

#[derive(Debug, Clone)]
pub struct SpecialistJob {
    pub id: usize,
    pub variations: Vec<usize>,
    pub init: SpecialistInit,
    pub budget: u64,
    /// Added to `total_samples` in the job's metrics rows.
    pub step_offset: u64,
    pub metrics_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SpecialistOutcome {
    pub id: usize,
    pub best: Learner,
    /// Training epoch after which the best checkpoint was taken.
    pub best_epoch: usize,
    pub best_return: f64,
    pub best_success: f64,
    pub steps: u64,
    pub rows: Vec<MetricsRow>,
    /// `(epoch, return)` of every evaluation.
    pub evaluations: Vec<(usize, f64)>,
}

/// Train one specialist for exactly its budget (rounded down to whole
/// epochs), evaluating on its variations every `gsl.specialist_eval_every`
/// epochs and after the last one. The best evaluated checkpoint is kept.
pub fn run_specialist(
    cfg: &ExperimentConfig,
    env: &dyn Env,
    job: &SpecialistJob,
    init: Option<&Learner>,
) -> Result<SpecialistOutcome> {
    let seed = cfg.seed;
    let mut learner = match (job.init, init) {
        (SpecialistInit::Generalist, Some(g)) => g.clone(),
        _ => Learner::new(cfg, env, &mut rng_for(seed, &format!("specialist-{}/init", job.id)))?,
    };
    let mut writer = match &job.metrics_path {
        Some(p) => {
            MetricsWriter::create_empty(p)?;
            Some(MetricsWriter::create(p)?)
        }
        None => None,
    };
    let per_epoch = cfg.samples_per_epoch() as u64;
    let total_epochs = (job.budget / per_epoch) as usize;
    let every = cfg.gsl.specialist_eval_every;
    let mut best: Option<(Learner, usize, f64, f64)> = None;
    let mut rows = Vec::new();
    let mut evaluations = Vec::new();

    let steps = train(
        &mut learner,
        cfg,
        TrainSpec {
            env,
            variations: job.variations.clone(),
            budget: job.budget,
            step_offset: job.step_offset,
            seed,
            label: format!("specialist-{}", job.id),
        },
        Consolidation::Plain,
        &mut |l, row| {
            if let Some(w) = writer.as_mut() {
                w.write(row)?;
            }
            rows.push(row.clone());
            let done = row.epoch + 1;
            if done % every == 0 || done == total_epochs {
                let mut rng = rng_for(seed, &format!("specialist-{}/eval-{done}", job.id));
                let rep = evaluate_on(
                    l.actor(),
                    env,
                    &job.variations,
                    cfg.eval.episodes,
                    cfg.eval.deterministic,
                    &mut rng,
                )?;
                let ret = rep.mean_return_on(&job.variations);
                let succ =
                    job.variations.iter().map(|&v| rep.success_rates[v]).sum::<f64>() / job.variations.len() as f64;
                evaluations.push((done, ret));
                if best.as_ref().map_or(true, |b| ret > b.2) {
                    best = Some((l.to_owned(), done, ret, succ));
                }
            }
            Ok(false)
        },
    )?;

    let (best, best_epoch, best_return, best_success) = match best {
        Some(b) => b,
        None => {
            // budget below one epoch: the initial policy is all there is
            let mut rng = rng_for(seed, &format!("specialist-{}/eval-0", job.id));
            let rep = evaluate_on(
                learner.actor(),
                env,
                &job.variations,
                cfg.eval.episodes,
                cfg.eval.deterministic,
                &mut rng,
            )?;
            let succ = job.variations.iter().map(|&v| rep.success_rates[v]).sum::<f64>() / job.variations.len() as f64;
            let ret = rep.mean_return_on(&job.variations);
            (learner, 0, ret, succ)
        }
    };
    Ok(SpecialistOutcome {
        id: job.id,
        best,
        best_epoch,
        best_return,
        best_success,
        steps,
        rows,
        evaluations,
    })
}

/// Run `jobs` on up to `parallelism` threads. `on_done` runs on the calling
/// thread as each job finishes, in completion order. The first failure stops
/// further jobs from starting and is returned once running jobs end.
pub fn train_specialists(
    cfg: &ExperimentConfig,
    env: &dyn Env,
    jobs: Vec<SpecialistJob>,
    init: Option<&Learner>,
    parallelism: usize,
    on_done: &mut dyn FnMut(SpecialistOutcome) -> Result<()>,
) -> Result<()> {
    let queue: Mutex<Vec<(SpecialistJob, Box<dyn Env>)>> =
        Mutex::new(jobs.into_iter().rev().map(|j| (j, env.boxed_clone())).collect());
    let stop = AtomicBool::new(false);
    let workers = parallelism.max(1);
    let (tx, rx) = mpsc::channel::<Result<SpecialistOutcome>>();
    let mut first_err = None;

    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            let stop = &stop;
            s.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Some((job, env)) = queue.lock().expect("job queue").pop() else {
                    break;
                };
                let out = run_specialist(cfg, env.as_ref(), &job, init);
                if out.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                if tx.send(out).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for out in rx {
            let res = out.and_then(&mut *on_done);
            if let Err(e) = res {
                stop.store(true, Ordering::SeqCst);
                first_err.get_or_insert(e);
            }
        }
    });
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
