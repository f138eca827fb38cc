//! Finite-horizon POMDPs with rewards linear in a weighting vector.
//!
//! A model exposes a reward feature vector `β(s, a)` per state-action pair;
//! the scalar reward under a weighting `φ` is `φᵀβ(s, a)`.

use std::hash::Hash;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::stream::RandomSource;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("weighting entry {index} is negative or not finite")]
    NegativeWeight { index: usize },
    #[error("feature entry {index} is not finite")]
    NonFiniteFeature { index: usize },
    #[error("invalid action index {index} (action count {count})")]
    InvalidAction { index: usize, count: usize },
    #[error("state is terminal at timestep {timestep}")]
    Terminal { timestep: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn check_len(expected: usize, actual: usize) -> Result<(), ModelError> {
    if expected == actual {
        Ok(())
    } else {
        Err(ModelError::Dimension { expected, actual })
    }
}

/// Non-negative multipliers over reward features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weighting<T: Scalar = f64> {
    values: Vec<T>,
}

impl<T: Scalar> Weighting<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ModelError> {
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(ModelError::NegativeWeight { index });
        }
        Ok(Self { values })
    }

    /// Non-negative weighting obtained by clamping each entry at zero.
    pub fn clamped(values: impl IntoIterator<Item = T>) -> Self {
        Self {
            values: values
                .into_iter()
                .map(|v| if v > T::zero() { v } else { T::zero() })
                .collect(),
        }
    }

    pub fn ones(len: usize) -> Self {
        Self { values: vec![T::one(); len] }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Positive rescaling. Negative factors are rejected.
    pub fn scaled(&self, factor: T) -> Result<Self, ModelError> {
        Self::new(self.values.iter().map(|&v| v * factor).collect())
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T, ModelError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum())
    }

    /// Validate that this weighting fits a model with `feature_count` features.
    pub fn check_dim(&self, feature_count: usize) -> Result<(), ModelError> {
        check_len(feature_count, self.len())
    }
}

impl<T: Scalar> Index<usize> for Weighting<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.values[index]
    }
}

/// Per-feature reward terms `β(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<T: Scalar = f64> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ModelError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature { index });
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Convert to another scalar type.
    pub fn cast<U: Scalar>(&self) -> FeatureVector<U> {
        FeatureVector {
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<(), ModelError> {
        check_len(self.len(), other.len())?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + scale * b;
        }
        Ok(())
    }
}

impl<T: Scalar> Index<usize> for FeatureVector<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.values[index]
    }
}

/// `φᵀβ`
pub fn reward<T: Scalar>(features: &FeatureVector<T>, phi: &Weighting<T>) -> Result<T, ModelError> {
    check_len(features.len(), phi.len())?;
    Ok(dot(features.as_slice(), phi.as_slice()))
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// A discrete-time, finite-horizon POMDP with factored reward.
///
/// Actions are addressed by index in `0..action_count()`. Sampling methods
/// consume a fixed number of draws per call, independent of the branch
/// taken, so that scenarios stay draw-aligned across actions.
pub trait PomdpModel: Sync {
    type State: Clone + Send + Sync;
    type Observation: Clone + Eq + Hash + Send + Sync;

    fn feature_count(&self) -> usize;
    fn action_count(&self) -> usize;
    fn discount(&self) -> f64;
    fn horizon(&self) -> usize;

    /// No further actions may be taken from a terminal state.
    fn is_terminal(&self, state: &Self::State) -> bool;

    fn transition_sample<R: RandomSource + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<Self::State, ModelError>;

    fn observation_sample<R: RandomSource + ?Sized>(
        &self,
        action: usize,
        next_state: &Self::State,
        rng: &mut R,
    ) -> Result<Self::Observation, ModelError>;

    fn observation_prob(
        &self,
        observation: &Self::Observation,
        action: usize,
        next_state: &Self::State,
    ) -> Result<f64, ModelError>;

    fn features(&self, state: &Self::State, action: usize) -> Result<FeatureVector, ModelError>;

    /// Successor proposal for the particle filter. A model may fix state
    /// components that `observation` reveals exactly, provided their
    /// likelihood does not depend on the predecessor state (so the weight
    /// correction is a constant that normalization removes). The default
    /// samples the prior.
    fn filter_proposal<R: RandomSource + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        _observation: &Self::Observation,
        rng: &mut R,
    ) -> Result<Self::State, ModelError> {
        self.transition_sample(state, action, rng)
    }

    /// Most plausible state given only an observation. Used to recover a
    /// depleted particle filter; `None` when the model has no such notion.
    fn state_from_observation(&self, _observation: &Self::Observation) -> Option<Self::State> {
        None
    }

    fn check_action(&self, action: usize) -> Result<(), ModelError> {
        let count = self.action_count();
        if action < count {
            Ok(())
        } else {
            Err(ModelError::InvalidAction { index: action, count })
        }
    }
}
