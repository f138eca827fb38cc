//! Bootstrap particle filter.
//!
//! Each update propagates every particle through the transition model,
//! reweights by the observation likelihood and resamples systematically
//! back to the original particle count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hvac::{HvacState, Status};
use crate::pomdp::{ModelError, PomdpModel};
use crate::stream::{RandomSource, SeededStream};

/// Re-propagation attempts before a depleted update falls back to
/// [`PomdpModel::state_from_observation`].
pub const DEPLETION_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("belief has no particles")]
    Empty,
    #[error("particle and weight counts differ ({particles} vs {weights})")]
    Mismatch { particles: usize, weights: usize },
    #[error("belief weights are degenerate (sum {0})")]
    Degenerate(f64),
    #[error("no particle explains the observation after {attempts} attempts")]
    Depleted { attempts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Weighted particle approximation of a belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
    weights: Vec<f64>,
}

impl<S: Clone> ParticleBelief<S> {
    /// Weights are normalized; they must be non-negative with a positive sum.
    pub fn new(particles: Vec<S>, weights: Vec<f64>) -> Result<Self, BeliefError> {
        if particles.is_empty() {
            return Err(BeliefError::Empty);
        }
        if particles.len() != weights.len() {
            return Err(BeliefError::Mismatch { particles: particles.len(), weights: weights.len() });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(BeliefError::Degenerate(total));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { particles, weights })
    }

    pub fn uniform(particles: Vec<S>) -> Result<Self, BeliefError> {
        let n = particles.len();
        Self::new(particles, vec![1.0; n])
    }

    /// Approximate an explicit distribution with `count` equally weighted
    /// particles by systematic resampling.
    pub fn from_distribution<R: RandomSource + ?Sized>(
        distribution: &[(S, f64)],
        count: usize,
        rng: &mut R,
    ) -> Result<Self, BeliefError> {
        let (states, weights): (Vec<S>, Vec<f64>) = distribution.iter().cloned().unzip();
        let source = Self::new(states, weights)?;
        let particles = systematic_resample(&source.particles, &source.weights, count, rng);
        Self::uniform(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.particles.iter().zip(self.weights.iter().copied())
    }

    /// Particle selected by inverse CDF at `u ∈ [0, 1)`.
    pub fn index_at(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Weighted mean of a statistic.
    pub fn expectation(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.iter().map(|(s, w)| w * f(s)).sum()
    }
}

/// Systematic resampling: a single uniform offset, `count` evenly spaced
/// pointers through the weight CDF. Consumes one draw.
pub fn systematic_resample<S: Clone, R: RandomSource + ?Sized>(
    particles: &[S],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<S> {
    let total: f64 = weights.iter().sum();
    let step = total / count as f64;
    let mut pointer = rng.next_unit() * step;
    let mut out = Vec::with_capacity(count);
    let mut acc = weights[0];
    let mut i = 0;
    for _ in 0..count {
        while pointer >= acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(particles[i].clone());
        pointer += step;
    }
    out
}

/// What the update had to do to produce a posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOutcome {
    Normal,
    /// Needed this many extra propagation passes.
    Repropagated(usize),
    /// Reinitialized from the observation alone.
    Reinitialized,
}

/// Bayes-filter step `b' ∝ Z(o | a, s') Σ T(s' | s, a) b(s)`.
///
/// Particles are propagated with [`PomdpModel::filter_proposal`], weighted
/// by the observation likelihood and resampled systematically.
pub fn belief_update<M: PomdpModel>(
    model: &M,
    belief: &ParticleBelief<M::State>,
    action: usize,
    observation: &M::Observation,
    rng: &mut SeededStream,
) -> Result<(ParticleBelief<M::State>, UpdateOutcome), BeliefError> {
    model.check_action(action)?;
    let count = belief.len();
    for attempt in 0..=DEPLETION_RETRIES {
        let mut propagated = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for (state, w) in belief.iter() {
            let next = model.filter_proposal(state, action, observation, rng)?;
            let likelihood = if w > 0.0 { model.observation_prob(observation, action, &next)? } else { 0.0 };
            weights.push(w * likelihood);
            propagated.push(next);
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            let particles = systematic_resample(&propagated, &weights, count, rng);
            let outcome = if attempt == 0 { UpdateOutcome::Normal } else { UpdateOutcome::Repropagated(attempt) };
            return Ok((ParticleBelief::uniform(particles)?, outcome));
        }
    }
    match model.state_from_observation(observation) {
        Some(state) => Ok((ParticleBelief::uniform(vec![state; count])?, UpdateOutcome::Reinitialized)),
        None => Err(BeliefError::Depleted { attempts: DEPLETION_RETRIES + 1 }),
    }
}

/// Per-location marginals of an HVAC belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefMarginals {
    /// `status[i][s]`, statuses in `[ok, mech, elec, cool]` order.
    pub status: Vec<[f64; 4]>,
    /// `age[i][k]`: probability location `i` last changed status `k` steps ago.
    pub age: Vec<Vec<f64>>,
}

pub fn belief_marginals(belief: &ParticleBelief<HvacState>) -> BeliefMarginals {
    let first = &belief.particles()[0];
    let n = first.locations.len();
    let max_age = first.timestep;
    let mut status = vec![[0.0; 4]; n];
    let mut age = vec![vec![0.0; max_age]; n];
    for (s, w) in belief.iter() {
        for i in 0..n {
            status[i][s.locations[i].status.index()] += w;
            age[i][s.age(i)] += w;
        }
    }
    BeliefMarginals { status, age }
}

impl BeliefMarginals {
    pub fn probability(&self, location: usize, status: Status) -> f64 {
        self.status[location][status.index()]
    }
}
