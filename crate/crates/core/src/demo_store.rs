//! Demonstration trajectories: recording with a quality filter, merging,
//! sampling, and the binary demo file.
//!
//! File layout (little-endian): magic `GSLDEMO1`; header with the
//! environment name, observation dimension, action kind and dimension,
//! filter kind and threshold, record count; then one length-prefixed
//! record after another; a CRC-32 of everything before it closes the file.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::agents::Actor;
use crate::autodiff::{Action, ActionBatch, Matrix};
use crate::codec::{ByteReader, ByteWriter};
use crate::envs::{ActionSpace, Env, Transition};
use crate::error::{GslError, Result};
use crate::rng::JobRng;

const MAGIC: &[u8; 8] = b"GSLDEMO1";

/// Which trajectories are good enough to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemoFilter {
    /// Keep trajectories whose total return is at least `tau`.
    ReturnAtLeast { tau: f64 },
    /// Keep trajectories that ended by reaching the goal.
    Success,
}

impl DemoFilter {
    pub fn accepts(&self, total_return: f64, success: bool) -> bool {
        match *self {
            DemoFilter::ReturnAtLeast { tau } => total_return >= tau,
            DemoFilter::Success => success,
        }
    }

    fn encode(&self) -> (u8, f64) {
        match *self {
            DemoFilter::ReturnAtLeast { tau } => (0, tau),
            DemoFilter::Success => (1, f64::NAN),
        }
    }

    fn decode(kind: u8, tau: f64) -> Option<Self> {
        match kind {
            0 => Some(DemoFilter::ReturnAtLeast { tau }),
            1 => Some(DemoFilter::Success),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DemoSource {
    Specialist(usize),
    Generalist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub variation: usize,
    pub source: DemoSource,
    pub checkpoint_id: String,
    pub total_return: f64,
    pub success: bool,
    pub steps: Vec<Transition>,
}

impl DemoRecord {
    pub fn resummed_return(&self) -> f64 {
        self.steps.iter().map(|t| t.reward).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoInventory {
    pub env_name: String,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub filter: DemoFilter,
    pub records: Vec<DemoRecord>,
}

impl DemoInventory {
    pub fn new(env_name: impl Into<String>, obs_dim: usize, action_space: ActionSpace, filter: DemoFilter) -> Self {
        DemoInventory {
            env_name: env_name.into(),
            obs_dim,
            action_space,
            filter,
            records: Vec::new(),
        }
    }

    pub fn for_env(env: &dyn Env, filter: DemoFilter) -> Self {
        Self::new(env.name(), env.obs_dim(), env.action_space(), filter)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_steps(&self) -> usize {
        self.records.iter().map(|r| r.steps.len()).sum()
    }

    /// Record count per variation id.
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.variation).or_insert(0) += 1;
        }
        m
    }

    /// Every record passes the stored filter and its return re-sums.
    pub fn verify(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.steps.is_empty() {
                return Err(GslError::contract(format!("demo record {i} is empty")));
            }
            if (r.resummed_return() - r.total_return).abs() > 1e-9 * (1.0 + r.total_return.abs()) {
                return Err(GslError::contract(format!("demo record {i} return does not re-sum")));
            }
            if !self.filter.accepts(r.total_return, r.success) {
                return Err(GslError::contract(format!(
                    "demo record {i} fails the inventory filter"
                )));
            }
        }
        Ok(())
    }

    /// Union with `other`. Both must describe the same environment and filter.
    pub fn merge(mut self, other: DemoInventory) -> Result<Self> {
        if other.records.is_empty() {
            return Ok(self);
        }
        if self.records.is_empty() && self.env_name.is_empty() {
            return Ok(other);
        }
        if self.env_name != other.env_name || self.obs_dim != other.obs_dim || self.action_space != other.action_space {
            return Err(GslError::config("cannot merge demos from different environments"));
        }
        if self.filter.encode().0 != other.filter.encode().0
            || (matches!(self.filter, DemoFilter::ReturnAtLeast { .. }) && self.filter != other.filter)
        {
            return Err(GslError::config("cannot merge demos recorded under different filters"));
        }
        self.records.extend(other.records);
        Ok(self)
    }

    /// All transitions, flattened in record order.
    pub fn transitions(&self) -> Vec<&Transition> {
        self.records.iter().flat_map(|r| r.steps.iter()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.str(&self.env_name);
        w.u64(self.obs_dim as u64);
        let (kind, dim) = match self.action_space {
            ActionSpace::Discrete(n) => (0u8, n),
            ActionSpace::Continuous(d) => (1u8, d),
        };
        w.u8(kind);
        w.u64(dim as u64);
        let (fk, tau) = self.filter.encode();
        w.u8(fk);
        w.f64(tau);
        w.u64(self.records.len() as u64);
        for r in &self.records {
            let body = encode_record(r);
            w.u64(body.len() as u64);
            w.bytes(&body);
        }
        w.finish_with_crc()
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut r = ByteReader::with_crc(bytes, origin)?;
        r.expect_magic(MAGIC)?;
        let env_name = r.str()?;
        let obs_dim = r.u64()? as usize;
        let kind = r.u8()?;
        let dim = r.u64()? as usize;
        let action_space = match kind {
            0 => ActionSpace::Discrete(dim),
            1 => ActionSpace::Continuous(dim),
            k => return Err(r.err(format!("unknown action kind {k}"))),
        };
        let fk = r.u8()?;
        let tau = r.f64()?;
        let filter = DemoFilter::decode(fk, tau).ok_or_else(|| r.err(format!("unknown filter kind {fk}")))?;
        let count = r.u64()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = r.u64()? as usize;
            let body = r.take(len)?;
            let mut br = ByteReader::new(body, origin);
            records.push(decode_record(&mut br, obs_dim)?);
            if !br.is_done() {
                return Err(r.err("trailing bytes inside a record"));
            }
        }
        if !r.is_done() {
            return Err(r.err("trailing bytes after the last record"));
        }
        Ok(DemoInventory {
            env_name,
            obs_dim,
            action_space,
            filter,
            records,
        })
    }

    /// Write to `path` through a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

fn encode_record(r: &DemoRecord) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u64(r.variation as u64);
    match r.source {
        DemoSource::Specialist(id) => {
            w.u8(0);
            w.u64(id as u64);
        }
        DemoSource::Generalist => {
            w.u8(1);
            w.u64(0);
        }
    }
    w.str(&r.checkpoint_id);
    w.f64(r.total_return);
    w.u8(r.success as u8);
    w.u64(r.steps.len() as u64);
    for t in &r.steps {
        w.f64s(&t.obs);
        match &t.action {
            Action::Discrete(i) => {
                w.u8(0);
                w.u64(*i as u64);
            }
            Action::Continuous(a) => {
                w.u8(1);
                w.u64(a.len() as u64);
                w.f64s(a);
            }
        }
        w.f64(t.reward);
        w.f64s(&t.next_obs);
        w.u8(t.done as u8 | (t.truncated as u8) << 1);
    }
    w.buf
}

fn decode_record(r: &mut ByteReader, obs_dim: usize) -> Result<DemoRecord> {
    let variation = r.u64()? as usize;
    let source = match (r.u8()?, r.u64()?) {
        (0, id) => DemoSource::Specialist(id as usize),
        (1, _) => DemoSource::Generalist,
        (k, _) => return Err(r.err(format!("unknown source tag {k}"))),
    };
    let checkpoint_id = r.str()?;
    let total_return = r.f64()?;
    let success = r.u8()? != 0;
    let n = r.u64()? as usize;
    let mut steps = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let obs = r.f64s(obs_dim)?;
        let action = match r.u8()? {
            0 => Action::Discrete(r.u64()? as usize),
            1 => {
                let d = r.u64()? as usize;
                Action::Continuous(r.f64s(d)?)
            }
            k => return Err(r.err(format!("unknown action tag {k}"))),
        };
        let reward = r.f64()?;
        let next_obs = r.f64s(obs_dim)?;
        let flags = r.u8()?;
        steps.push(Transition {
            obs,
            action,
            reward,
            next_obs,
            done: flags & 1 != 0,
            truncated: flags & 2 != 0,
            variation,
        });
    }
    Ok(DemoRecord {
        variation,
        source,
        checkpoint_id,
        total_return,
        success,
        steps,
    })
}

/// Outcome of [`record_and_filter`].
#[derive(Debug, Clone)]
pub struct Recording {
    pub inventory: DemoInventory,
    /// Environment steps spent, kept or not.
    pub env_steps: u64,
    pub attempts: usize,
}

/// Roll out `actor` with sampled actions on `variations` (cycling through
/// them) and keep the trajectories the filter accepts, until the kept steps
/// reach `target_steps`. Gives up after `10 * target_steps` environment
/// steps; any variation left without a kept trajectory is then an error.
#[allow(clippy::too_many_arguments)]
pub fn record_and_filter(
    actor: &dyn Actor,
    env: &dyn Env,
    variations: &[usize],
    target_steps: usize,
    filter: DemoFilter,
    source: DemoSource,
    checkpoint_id: &str,
    rng: &mut JobRng,
) -> Result<Recording> {
    if target_steps == 0 {
        return Err(GslError::contract("demo target step count must be positive"));
    }
    if variations.is_empty() {
        return Err(GslError::contract("no variations to record demos on"));
    }
    let cap = 10 * target_steps as u64;
    let mut inv = DemoInventory::for_env(env, filter);
    let mut env = env.boxed_clone();
    let mut kept_steps = 0usize;
    let mut used = 0u64;
    let mut attempts = 0usize;
    let mut kept_per_variation: BTreeMap<usize, usize> = variations.iter().map(|&v| (v, 0)).collect();

    while kept_steps < target_steps && used < cap {
        let v = variations[attempts % variations.len()];
        attempts += 1;
        let mut obs = env.reset(rng, Some(v))?;
        let mut steps = Vec::new();
        let mut total = 0.0;
        let success = loop {
            let a = actor.act_batch(&Matrix::row_vector(obs.clone()), rng, false)?.remove(0);
            let out = env.step(&a)?;
            used += 1;
            total += out.reward;
            steps.push(Transition {
                obs: std::mem::take(&mut obs),
                action: a,
                reward: out.reward,
                next_obs: out.obs.clone(),
                done: out.done,
                truncated: out.done && !out.success,
                variation: v,
            });
            if out.done {
                break out.success;
            }
            obs = out.obs;
        };
        if filter.accepts(total, success) {
            kept_steps += steps.len();
            *kept_per_variation.get_mut(&v).expect("known variation") += 1;
            inv.records.push(DemoRecord {
                variation: v,
                source: source.clone(),
                checkpoint_id: checkpoint_id.to_string(),
                total_return: total,
                success,
                steps,
            });
        }
    }
    if let Some((&v, _)) = kept_per_variation.iter().find(|(_, &n)| n == 0) {
        return Err(GslError::InsufficientDemos {
            variation: v,
            detail: format!(
                "no trajectory passed the filter {filter:?} within {used} environment steps ({attempts} episodes)"
            ),
        });
    }
    Ok(Recording {
        inventory: inv,
        env_steps: used,
        attempts,
    })
}

/// Draws demo transitions uniformly without replacement within each pass
/// over the store, reshuffling when a pass is exhausted.
#[derive(Debug, Clone)]
pub struct DemoSampler {
    obs: Vec<Vec<f64>>,
    actions: Vec<Action>,
    order: Vec<usize>,
    cursor: usize,
    rng: JobRng,
}

impl DemoSampler {
    pub fn new(inv: &DemoInventory, rng: JobRng) -> Self {
        let ts = inv.transitions();
        let mut s = DemoSampler {
            obs: ts.iter().map(|t| t.obs.clone()).collect(),
            actions: ts.iter().map(|t| t.action.clone()).collect(),
            order: (0..ts.len()).collect(),
            cursor: 0,
            rng,
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Indices of the next `b` transitions.
    pub fn next_indices(&mut self, b: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(b);
        if self.order.is_empty() {
            return out;
        }
        while out.len() < b {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }

    /// `(observations, actions)` for the next `b` transitions.
    pub fn next_batch(&mut self, b: usize) -> Result<(Matrix, ActionBatch)> {
        let idx = self.next_indices(b);
        if idx.is_empty() {
            return Err(GslError::contract("demo batch requested from an empty store"));
        }
        let obs = Matrix::from_rows(&idx.iter().map(|&i| self.obs[i].as_slice()).collect::<Vec<_>>());
        let acts: Vec<Action> = idx.iter().map(|&i| self.actions[i].clone()).collect();
        Ok((obs, ActionBatch::from_actions(&acts)?))
    }
}
