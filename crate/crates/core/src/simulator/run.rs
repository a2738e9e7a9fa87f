//! Independent replicas, sampled at fixed times and aggregated.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{replica_rng, CorrelationEstimate, Sampler};
use crate::configurations::FiniteConfiguration;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::KernelModel;

/// Initial point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// Homogeneous Poisson process of intensity `density`.
    Poisson { density: f64 },
    /// Exactly `count` independent uniform points.
    Binomial { count: usize },
}

impl InitialCondition {
    pub fn sample<R: Rng + ?Sized>(
        &self,
        model: &KernelModel,
        rng: &mut R,
    ) -> Result<FiniteConfiguration> {
        let d = &model.domain;
        let n = match *self {
            InitialCondition::Poisson { density } => {
                if !(density > 0.0 && density.is_finite()) {
                    return Err(Error::param(format!("density must be > 0, got {density}")));
                }
                let p = Poisson::new(density * d.volume())
                    .map_err(|e| Error::param(format!("Poisson intensity: {e}")))?;
                p.sample(rng) as usize
            }
            InitialCondition::Binomial { count } => count,
        };
        let points = (0..n)
            .map(|_| {
                let mut p = [0.0; 2];
                for pk in p.iter_mut().take(d.dimension) {
                    *pk = rng.random::<f64>() * d.length;
                }
                d.wrap(p)
            })
            .collect();
        Ok(FiniteConfiguration::new(points))
    }

    pub fn density(&self, model: &KernelModel) -> f64 {
        match *self {
            InitialCondition::Poisson { density } => density,
            InitialCondition::Binomial { count } => count as f64 / model.domain.volume(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub initial: InitialCondition,
    pub t_end: f64,
    /// Sample times in `(0, t_end]`; `t_end` is always added. Time 0 is
    /// sampled when listed.
    pub sample_times: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// Event budget per replica.
    pub max_events: u64,
    pub bins: usize,
    pub execution: Execution,
}

impl RunOptions {
    pub fn new(initial: InitialCondition, t_end: f64, replicas: usize, seed: u64) -> Self {
        Self {
            initial,
            t_end,
            sample_times: Vec::new(),
            replicas,
            seed,
            max_events: 50_000_000,
            bins: 25,
            execution: Execution::default(),
        }
    }

    fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .sample_times
            .iter()
            .copied()
            .filter(|t| *t >= 0.0 && *t < self.t_end)
            .collect();
        ts.push(self.t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaSummary {
    pub replica: usize,
    pub particles: usize,
    pub events: u64,
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// One estimate per sample time reached by at least one replica.
    pub estimates: Vec<CorrelationEstimate>,
    pub replicas: Vec<ReplicaSummary>,
    pub budget_exceeded: bool,
}

impl RunReport {
    pub fn total_events(&self) -> u64 {
        self.replicas.iter().map(|r| r.events).sum()
    }
}

struct ReplicaOutput {
    snapshots: Vec<Option<FiniteConfiguration>>,
    summary: ReplicaSummary,
}

fn simulate_replica(
    sampler: &Sampler,
    opts: &RunOptions,
    times: &[f64],
    replica: usize,
) -> Result<ReplicaOutput> {
    let mut init_rng = replica_rng(opts.seed, 2 * replica as u64);
    let config = opts.initial.sample(sampler.model, &mut init_rng)?;
    let particles = config.len();
    let mut state = sampler.init_state(config, replica_rng(opts.seed, 2 * replica as u64 + 1));
    let mut snapshots = vec![None; times.len()];
    let mut next = 0;
    let mut budget_exceeded = false;
    while next < times.len() && times[next] <= state.time {
        snapshots[next] = Some(state.config.clone());
        next += 1;
    }
    while next < times.len() {
        if particles == 0 {
            // nothing ever moves
            for s in snapshots.iter_mut().skip(next) {
                *s = Some(state.config.clone());
            }
            break;
        }
        if state.events >= opts.max_events {
            budget_exceeded = true;
            break;
        }
        let event = sampler.step(&mut state)?;
        if state.time > times[next] {
            // the state in force before this event
            let mut before = state.config.clone();
            before.points[event.particle] = event.from;
            while next < times.len() && times[next] < state.time {
                snapshots[next] = Some(before.clone());
                next += 1;
            }
        }
    }
    Ok(ReplicaOutput {
        snapshots,
        summary: ReplicaSummary {
            replica,
            particles,
            events: state.events,
            budget_exceeded,
        },
    })
}

/// Runs `opts.replicas` independent replicas. Replica `r` draws its initial
/// configuration and its dynamics from dedicated streams of `opts.seed`, so
/// results do not depend on scheduling.
pub fn run(model: &KernelModel, opts: &RunOptions) -> Result<RunReport> {
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(Error::param(format!(
            "t_end must be > 0, got {}",
            opts.t_end
        )));
    }
    if opts.replicas == 0 {
        return Err(Error::param("replicas must be >= 1"));
    }
    if opts.bins == 0 {
        return Err(Error::param("bins must be >= 1"));
    }
    let sampler = Sampler::new(model);
    let times = opts.times();
    let outputs = opts
        .execution
        .map(opts.replicas, |r| {
            simulate_replica(&sampler, opts, &times, r)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let estimates = times
        .iter()
        .enumerate()
        .filter_map(|(k, &t)| {
            let samples: Vec<&FiniteConfiguration> = outputs
                .iter()
                .filter_map(|o| o.snapshots[k].as_ref())
                .collect();
            (!samples.is_empty())
                .then(|| CorrelationEstimate::from_samples(&model.domain, t, &samples, opts.bins))
        })
        .collect();
    let replicas: Vec<ReplicaSummary> = outputs.into_iter().map(|o| o.summary).collect();
    let budget_exceeded = replicas.iter().any(|r| r.budget_exceeded);
    Ok(RunReport {
        estimates,
        replicas,
        budget_exceeded,
    })
}
