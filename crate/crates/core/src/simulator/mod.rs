//! Continuous-time kinetic Monte Carlo for the jump process with
//! attraction on the torus.
//!
//! A particle at `x` jumps to `y` at rate `a(x,y)(1 + Σ_{z≠x} b(x,y|z))`.
//! Integrating over `y` gives the per-particle rate `m_a + Σ_z φ₋(x,z)`,
//! which is cached and updated incrementally. Destinations are drawn from
//! the mixture decomposition of the jump density, one component per
//! influencing particle.

mod estimate;
mod run;

pub use estimate::{pair_shell_volume, CorrelationEstimate, HistogramBin, PairHistogram};
pub use run::{run, InitialCondition, ReplicaSummary, RunOptions, RunReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::configurations::FiniteConfiguration;
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::kernels::{Influence, KernelModel};

/// Events between full recomputations of the rate cache.
pub const RECOMPUTE_INTERVAL: u64 = 10_000;
/// Rejection sampling aborts below this expected acceptance.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
/// Hard cap on rejection trials for a single draw.
const MAX_TRIALS: u64 = 100_000_000;

/// Per-replica dynamic state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub config: FiniteConfiguration,
    pub time: f64,
    /// `rates[i] = m_a + Σ_{j≠i} φ₋(x_i, x_j)`.
    pub rates: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub events: u64,
}

/// Which component of the jump-density mixture produced a destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `a(x, y)` alone.
    Free,
    /// `a(x,y) κ₁(x − z)` for particle `z`.
    Kappa1(usize),
    /// `a(x,y) κ₂(y − z)` for particle `z`.
    Kappa2(usize),
    /// `a(x,y) b(x,y|z)` for a tabulated `b`.
    Tabulated(usize),
}

/// Outcome of a single event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub particle: usize,
    pub from: Point,
    pub to: Point,
    pub branch: Branch,
    pub waiting_time: f64,
}

/// Read-only sampling machinery shared across replicas.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    pub model: &'a KernelModel,
    alpha_cdf: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a KernelModel) -> Self {
        Self {
            model,
            alpha_cdf: model.alpha.sampling_cdf(),
        }
    }

    /// `φ₋(x, z)` as used by the rate cache.
    #[inline]
    fn phi_minus(&self, x: Point, z: Point) -> f64 {
        self.model.phi_minus_at(x, z)
    }

    /// Mixture weights `(κ₁(x−z), (α∗κ₂)(x−z))` of the two components
    /// attached to particle `z`, or `(φ₋(x,z), 0)` for tabulated `b`.
    fn component_weights(&self, x: Point, z: Point) -> (f64, f64) {
        let d = &self.model.domain;
        let disp = d.min_image(z, x);
        match &self.model.influence {
            Influence::Factorized {
                kappa1,
                alpha_kappa2,
                ..
            } => (
                d.interpolate(&kappa1.values, disp),
                d.interpolate(alpha_kappa2, disp),
            ),
            Influence::Tabulated { .. } => (self.phi_minus(x, z), 0.0),
        }
    }

    /// `y = x + ξ`, `ξ ~ α`.
    pub fn free_jump<R: Rng + ?Sized>(&self, x: Point, rng: &mut R) -> Point {
        let d = &self.model.domain;
        let xi = self.model.alpha.sample(d, rng, &self.alpha_cdf);
        d.wrap([x[0] + xi[0], x[1] + xi[1]])
    }

    /// Draws from the density `∝ a(x,y) κ₂(y − z)` by rejection against
    /// `κ₂ ≤ max κ₂`. `weight` is the component's total mass, used to
    /// predict the acceptance rate.
    pub fn kappa2_jump<R: Rng + ?Sized>(
        &self,
        x: Point,
        z: Point,
        weight: f64,
        rng: &mut R,
    ) -> Result<Point> {
        let Influence::Factorized { kappa2, .. } = &self.model.influence else {
            return Err(Error::param(
                "κ₂ branch requires a factorized influence kernel",
            ));
        };
        let envelope = kappa2.max_value;
        let d = &self.model.domain;
        self.rejection(x, z, weight / envelope, rng, |y| {
            kappa2.eval(d, d.min_image(z, y)) / envelope
        })
    }

    /// Draws from the density `∝ a(x,y) b(x,y|z)` for a tabulated `b`,
    /// by rejection against `b̄`.
    pub fn tabulated_jump<R: Rng + ?Sized>(
        &self,
        x: Point,
        z: Point,
        weight: f64,
        rng: &mut R,
    ) -> Result<Point> {
        let envelope = self.model.sup_b;
        self.rejection(x, z, weight / envelope, rng, |y| {
            self.model.eval_b(x, y, z) / envelope
        })
    }

    fn rejection<R: Rng + ?Sized>(
        &self,
        x: Point,
        z: Point,
        acceptance: f64,
        rng: &mut R,
        accept: impl Fn(Point) -> f64,
    ) -> Result<Point> {
        if !(acceptance >= MIN_ACCEPTANCE) {
            return Err(Error::PathologicalAcceptance {
                acceptance,
                from: x,
                source_point: z,
            });
        }
        for _ in 0..MAX_TRIALS {
            let y = self.free_jump(x, rng);
            if rng.random::<f64>() < accept(y) {
                return Ok(y);
            }
        }
        Err(Error::PathologicalAcceptance {
            acceptance: 1.0 / MAX_TRIALS as f64,
            from: x,
            source_point: z,
        })
    }

    /// Draws the destination of particle `i` and reports the mixture branch.
    pub fn sample_destination<R: Rng + ?Sized>(
        &self,
        config: &FiniteConfiguration,
        i: usize,
        rate: f64,
        rng: &mut R,
    ) -> Result<(Point, Branch)> {
        let x = config.points[i];
        let mut u = rng.random::<f64>() * rate;
        if u < self.model.m_a || self.model.is_free() {
            return Ok((self.free_jump(x, rng), Branch::Free));
        }
        u -= self.model.m_a;
        let tabulated = !self.model.is_factorized();
        let mut last = None;
        for (j, &z) in config.points.iter().enumerate() {
            if j == i {
                continue;
            }
            let (w1, w2) = self.component_weights(x, z);
            if w1 + w2 > 0.0 {
                last = Some((j, z, w1, w2));
            }
            if u < w1 {
                return if tabulated {
                    Ok((self.tabulated_jump(x, z, w1, rng)?, Branch::Tabulated(j)))
                } else {
                    Ok((self.free_jump(x, rng), Branch::Kappa1(j)))
                };
            }
            u -= w1;
            if u < w2 {
                return Ok((self.kappa2_jump(x, z, w2, rng)?, Branch::Kappa2(j)));
            }
            u -= w2;
        }
        // round-off at the top of the cumulative sum: take the last
        // component with positive mass
        match last {
            None => Ok((self.free_jump(x, rng), Branch::Free)),
            Some((j, z, w1, _)) if tabulated => {
                Ok((self.tabulated_jump(x, z, w1, rng)?, Branch::Tabulated(j)))
            }
            Some((j, z, _, w2)) if w2 > 0.0 => {
                Ok((self.kappa2_jump(x, z, w2, rng)?, Branch::Kappa2(j)))
            }
            Some((j, _, _, _)) => Ok((self.free_jump(x, rng), Branch::Kappa1(j))),
        }
    }

    /// Fresh state with rates computed from scratch.
    pub fn init_state(&self, config: FiniteConfiguration, rng: ChaCha8Rng) -> SimState {
        let rates = self.all_rates(&config);
        SimState {
            config,
            time: 0.0,
            rates,
            rng,
            events: 0,
        }
    }

    /// Full `O(N²)` rate computation.
    pub fn all_rates(&self, config: &FiniteConfiguration) -> Vec<f64> {
        (0..config.len())
            .map(|i| jump_rate(self.model, i, config))
            .collect()
    }

    /// One Gillespie event: exponential waiting time with total rate
    /// `R = Σ rates`, particle chosen `∝ rates[i]`, destination from the
    /// mixture, then an incremental cache update.
    pub fn step(&self, state: &mut SimState) -> Result<Event> {
        let total: f64 = state.rates.iter().sum();
        let e: f64 = Exp1.sample(&mut state.rng);
        let waiting_time = e / total;
        let i = pick(&state.rates, total, state.rng.random::<f64>());
        let (to, branch) =
            self.sample_destination(&state.config, i, state.rates[i], &mut state.rng)?;
        let from = state.config.points[i];
        self.move_particle(state, i, to);
        state.time += waiting_time;
        state.events += 1;
        if state.events % RECOMPUTE_INTERVAL == 0 {
            state.rates = self.all_rates(&state.config);
        }
        Ok(Event {
            particle: i,
            from,
            to,
            branch,
            waiting_time,
        })
    }

    fn move_particle(&self, state: &mut SimState, i: usize, to: Point) {
        let from = state.config.points[i];
        let mut own = self.model.m_a;
        for (j, &p) in state.config.points.iter().enumerate() {
            if j == i {
                continue;
            }
            let new = self.phi_minus(p, to);
            state.rates[j] += new - self.phi_minus(p, from);
            own += new;
        }
        state.rates[i] = own;
        state.config.points[i] = to;
    }
}

/// `r(x_i | γ) = m_a + Σ_{z≠x_i} φ₋(x_i, z)`.
pub fn jump_rate(model: &KernelModel, i: usize, config: &FiniteConfiguration) -> f64 {
    let x = config.points[i];
    model.m_a
        + config
            .points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &z)| model.phi_minus_at(x, z))
            .sum::<f64>()
}

fn pick(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// The seeded stream of replica `replica`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
