//! One-shot recovery of a user's implied reward weighting.
//!
//! Given the planner's action `a_a` (optimal under `φ_a`) and a user's
//! alternative `a_h`, find `φ ≥ 0` minimizing `‖φ − φ_a‖₁` subject to
//! `Q^φ(b, a_h) ≥ Q^φ(b, a_a)`. The constraint is relaxed into
//!
//! ```text
//! U(φ) = ‖φ − φ_a‖₁ + w · max(Q^φ(b, a_a) − Q^φ(b, a_h), 0)
//! ```
//!
//! and minimized with the cross-entropy method over a diagonal Gaussian.
//! All Q values come from one shared [`ScenarioTree`], so `a_a` and `a_h`
//! are compared on identical scenarios.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{PlannerError, ScenarioTree};
use crate::pomdp::{ModelError, Weighting};
use crate::scalar::Scalar;
use crate::stream::SeededStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconcileError {
    #[error("invalid cross-entropy parameters: {0}")]
    InvalidParams(String),
    #[error("action index {index} out of range ({count} actions)")]
    InvalidAction { index: usize, count: usize },
    #[error("objective is not finite at candidate {0:?}")]
    NonFinite(Vec<f64>),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Constraint-violation term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `max(Q(a_a) − Q(a_h), 0)`
    #[default]
    Hinge,
    /// `−max(|Q(a_a) − Q(a_h)|, 0)`, kept for comparison only. It rewards
    /// any value gap and makes `U` unbounded below.
    Printed,
}

/// How the penalty weight `w` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PenaltyWeight {
    Fixed { w: f64 },
    /// `w = scale / (|Q^{φ_a}(a_a)| + 1)`
    BaselineNormalized { scale: f64 },
    /// `w = scale · max(‖φ_a‖₁, 1) / gap`, where `gap` is the violation at
    /// `φ_a`: staying put costs `scale · ‖φ_a‖₁` L1 units.
    GapNormalized { scale: f64 },
}

impl Default for PenaltyWeight {
    fn default() -> Self {
        PenaltyWeight::GapNormalized { scale: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconcileConfig {
    pub penalty_weight: PenaltyWeight,
    pub penalty_form: PenaltyForm,
    /// Feasibility tolerance relative to `|Q^{φ_a}(a_a)|`.
    pub relative_tolerance: f64,
    /// Bisection steps pulling the returned point back toward `φ_a` along
    /// the segment while the constraint still holds. `0` disables.
    pub boundary_refinement_steps: usize,
}

impl Default for ReconcileConfig {
    fn default() -> Self {
        Self {
            penalty_weight: PenaltyWeight::default(),
            penalty_form: PenaltyForm::Hinge,
            relative_tolerance: 1e-6,
            boundary_refinement_steps: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeParams {
    pub population: usize,
    pub elite_fraction: f64,
    pub max_iterations: usize,
    pub initial_std: f64,
    /// Weight of the new elite statistics in the refit.
    pub smoothing: f64,
    /// Stop once every coordinate's std is below this.
    pub convergence_std: f64,
    /// Fresh runs from `φ_a` when a run ends without satisfying the
    /// constraint.
    pub restarts: usize,
    /// Also line-search each coordinate on its own and keep the best
    /// satisfying point found either way.
    pub axis_probes: bool,
}

impl Default for CeParams {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            max_iterations: 50,
            initial_std: 0.3,
            smoothing: 0.7,
            convergence_std: 1e-3,
            restarts: 3,
            axis_probes: true,
        }
    }
}

impl CeParams {
    pub fn elite_count(&self) -> usize {
        (self.population as f64 * self.elite_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), ReconcileError> {
        let elites = self.elite_count();
        if elites < 1 || self.population < 2 * elites {
            return Err(ReconcileError::InvalidParams(format!(
                "need population ≥ 2·elites ≥ 2 (population {}, elites {elites})",
                self.population
            )));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(ReconcileError::InvalidParams("smoothing must lie in (0, 1]".into()));
        }
        if self.initial_std.is_nan() || self.initial_std <= 0.0 || self.convergence_std.is_nan() || self.convergence_std < 0.0 {
            return Err(ReconcileError::InvalidParams("std parameters must be positive".into()));
        }
        Ok(())
    }
}

/// A single action discrepancy to explain.
#[derive(Debug, Clone)]
pub struct ReconcileProblem<'a, T: Scalar = f64> {
    pub tree: &'a ScenarioTree<T>,
    pub algorithm_action: usize,
    pub user_action: usize,
    pub phi_a: Weighting<T>,
    pub penalty_weight: T,
    pub penalty_form: PenaltyForm,
    pub tolerance: T,
    pub boundary_refinement_steps: usize,
}

impl<'a, T: Scalar> ReconcileProblem<'a, T> {
    /// `a_a` is taken to be the tree's best action under `phi_a`.
    pub fn from_recommendation(
        tree: &'a ScenarioTree<T>,
        phi_a: Weighting<T>,
        user_action: usize,
        config: &ReconcileConfig,
    ) -> Result<Self, ReconcileError> {
        let algorithm_action = tree.best_action(&phi_a)?;
        Self::new(tree, phi_a, algorithm_action, user_action, config)
    }

    pub fn new(
        tree: &'a ScenarioTree<T>,
        phi_a: Weighting<T>,
        algorithm_action: usize,
        user_action: usize,
        config: &ReconcileConfig,
    ) -> Result<Self, ReconcileError> {
        let count = tree.action_count();
        for index in [algorithm_action, user_action] {
            if index >= count {
                return Err(ReconcileError::InvalidAction { index, count });
            }
        }
        let q = tree.evaluate(&phi_a)?;
        let q_a = q.values[algorithm_action];
        let gap = q_a - q.values[user_action];
        let baseline = q_a.abs() + T::one();
        let penalty_weight = match config.penalty_weight {
            PenaltyWeight::Fixed { w } => T::of(w),
            PenaltyWeight::BaselineNormalized { scale } => T::of(scale) / baseline,
            PenaltyWeight::GapNormalized { scale } => {
                let l1 = phi_a.as_slice().iter().copied().sum::<T>().max(T::one());
                if gap > T::zero() { T::of(scale) * l1 / gap } else { T::of(scale) / baseline }
            }
        };
        if !(penalty_weight.is_finite() && penalty_weight >= T::zero()) {
            return Err(ReconcileError::InvalidParams(format!("penalty weight {penalty_weight} is invalid")));
        }
        let tolerance = (T::of(config.relative_tolerance) * q_a.abs()).max(T::of(1e-12));
        Ok(Self {
            tree,
            algorithm_action,
            user_action,
            phi_a,
            penalty_weight,
            penalty_form: config.penalty_form,
            tolerance,
            boundary_refinement_steps: config.boundary_refinement_steps,
        })
    }

    /// `Q^φ(b, a_a) − Q^φ(b, a_h)`; the constraint holds when this is ≤ 0.
    pub fn residual(&self, phi: &Weighting<T>) -> Result<T, ReconcileError> {
        let q = self.tree.evaluate(phi)?;
        Ok(q.values[self.algorithm_action] - q.values[self.user_action])
    }

    pub fn objective(&self, phi: &Weighting<T>) -> Result<T, ReconcileError> {
        Ok(self.score(phi)?.objective)
    }

    fn score(&self, phi: &Weighting<T>) -> Result<Score<T>, ReconcileError> {
        let l1 = phi.l1_distance(&self.phi_a)?;
        let residual = self.residual(phi)?;
        let penalty = match self.penalty_form {
            PenaltyForm::Hinge => residual.max(T::zero()),
            PenaltyForm::Printed => -(residual.abs().max(T::zero())),
        };
        Ok(Score { objective: l1 + self.penalty_weight * penalty, l1, residual })
    }

    fn satisfied(&self, s: &Score<T>) -> bool {
        s.residual <= T::zero()
    }
}

/// `objective_U` as a free function.
pub fn objective_u<T: Scalar>(phi: &Weighting<T>, problem: &ReconcileProblem<'_, T>) -> Result<T, ReconcileError> {
    problem.objective(phi)
}

#[derive(Debug, Clone, Copy)]
struct Score<T> {
    objective: T,
    l1: T,
    residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeIteration {
    pub iteration: usize,
    pub best_objective: f64,
    pub elite_mean_objective: f64,
    pub max_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileResult<T: Scalar = f64> {
    pub phi_hat: Weighting<T>,
    #[serde(rename = "U")]
    pub objective: T,
    pub l1_distance: T,
    /// `Q^φ̂(b, a_a) − Q^φ̂(b, a_h)`
    pub residual: T,
    pub feasible: bool,
    pub penalty_weight: T,
    pub tolerance: T,
    pub trace: Vec<CeIteration>,
}

/// Cross-entropy minimization of `U`.
///
/// Generation 0 contains `φ_a` itself. Samples are clamped at zero. The
/// returned point is the best sample seen that satisfies the constraint
/// (hinge exactly zero) when one scores no worse than `φ_a`, and the best
/// sample overall otherwise. Runs that end without a satisfying sample are
/// restarted. A satisfying result is then pulled toward `φ_a` by bisection,
/// first along the segment and then one coordinate at a time, while the
/// constraint keeps holding.
pub fn cross_entropy_reconcile<T: Scalar>(
    problem: &ReconcileProblem<'_, T>,
    params: &CeParams,
    stream: &mut SeededStream,
) -> Result<ReconcileResult<T>, ReconcileError> {
    params.validate()?;
    let phi_a = &problem.phi_a;

    if problem.algorithm_action == problem.user_action {
        return Ok(ReconcileResult {
            phi_hat: phi_a.clone(),
            objective: T::zero(),
            l1_distance: T::zero(),
            residual: T::zero(),
            feasible: true,
            penalty_weight: problem.penalty_weight,
            tolerance: problem.tolerance,
            trace: Vec::new(),
        });
    }

    let anchor = problem.score(phi_a)?;
    let mut search = Search {
        best: (phi_a.clone(), anchor),
        best_satisfied: problem.satisfied(&anchor).then(|| (phi_a.clone(), anchor)),
        trace: Vec::new(),
    };
    for _ in 0..=params.restarts {
        run_ce(problem, params, stream, &mut search)?;
        if search.best_satisfied.is_some() {
            break;
        }
    }
    if params.axis_probes {
        for probe in axis_probes(problem, &anchor)? {
            if search.best_satisfied.as_ref().is_none_or(|(_, s)| probe.1.objective < s.objective) {
                search.best_satisfied = Some(probe);
            }
        }
    }
    let Search { best, best_satisfied, trace } = search;

    let (mut phi_hat, mut score) = match best_satisfied {
        Some(s) if s.1.objective <= anchor.objective => s,
        _ => best,
    };
    if problem.satisfied(&score) && phi_hat != *phi_a {
        (phi_hat, score) = refine_toward_anchor(problem, phi_hat, score)?;
        (phi_hat, score) = polish_coordinates(problem, phi_hat, score)?;
    }
    Ok(ReconcileResult {
        phi_hat,
        objective: score.objective,
        l1_distance: score.l1,
        residual: score.residual,
        feasible: score.residual <= problem.tolerance,
        penalty_weight: problem.penalty_weight,
        tolerance: problem.tolerance,
        trace,
    })
}

type Candidate<T> = (Weighting<T>, Score<T>);

struct Search<T: Scalar> {
    best: Candidate<T>,
    best_satisfied: Option<Candidate<T>>,
    trace: Vec<CeIteration>,
}

/// One cross-entropy run started at `φ_a`. Iterations are numbered
/// continuously across runs in the trace.
fn run_ce<T: Scalar>(
    problem: &ReconcileProblem<'_, T>,
    params: &CeParams,
    stream: &mut SeededStream,
    search: &mut Search<T>,
) -> Result<(), ReconcileError> {
    let phi_a = &problem.phi_a;
    let dim = phi_a.len();
    let elites = params.elite_count();
    let mut mean: Vec<f64> = phi_a.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let mut std = vec![params.initial_std; dim];

    for iteration in 0..params.max_iterations {
        let candidates: Vec<Weighting<T>> = (0..params.population)
            .map(|i| {
                if iteration == 0 && i == 0 {
                    return phi_a.clone();
                }
                Weighting::clamped((0..dim).map(|j| {
                    let z: f64 = StandardNormal.sample(stream);
                    T::of(mean[j] + std[j] * z)
                }))
            })
            .collect();
        let scores: Vec<Score<T>> = candidates
            .par_iter()
            .map(|phi| problem.score(phi))
            .collect::<Result<_, _>>()?;
        for (phi, s) in candidates.iter().zip(&scores) {
            if !s.objective.is_finite() {
                return Err(ReconcileError::NonFinite(phi.as_slice().iter().map(|v| v.to_f64_lossy()).collect()));
            }
        }

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| scores[a].objective.partial_cmp(&scores[b].objective).unwrap().then(a.cmp(&b)));

        let top = order[0];
        if scores[top].objective < search.best.1.objective {
            search.best = (candidates[top].clone(), scores[top]);
        }
        if let Some(&i) = order.iter().find(|&&i| problem.satisfied(&scores[i])) {
            if search.best_satisfied.as_ref().is_none_or(|(_, s)| scores[i].objective < s.objective) {
                search.best_satisfied = Some((candidates[i].clone(), scores[i]));
            }
        }

        let elite = &order[..elites];
        for j in 0..dim {
            let values: Vec<f64> = elite.iter().map(|&i| candidates[i][j].to_f64_lossy()).collect();
            let m = values.iter().sum::<f64>() / elites as f64;
            let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / elites as f64;
            mean[j] = params.smoothing * m + (1.0 - params.smoothing) * mean[j];
            std[j] = params.smoothing * var.sqrt() + (1.0 - params.smoothing) * std[j];
        }
        let elite_objective = elite.iter().map(|&i| scores[i].objective.to_f64_lossy()).sum::<f64>() / elites as f64;
        let max_std = std.iter().copied().fold(0.0, f64::max);
        search.trace.push(CeIteration {
            iteration: search.trace.len(),
            best_objective: search.best.1.objective.to_f64_lossy(),
            elite_mean_objective: elite_objective,
            max_std,
        });
        if max_std < params.convergence_std {
            break;
        }
    }
    Ok(())
}

/// Smallest single-coordinate moves that satisfy the constraint. Upward
/// moves stop at `U(φ_a)`, past which staying put is cheaper.
fn axis_probes<T: Scalar>(
    problem: &ReconcileProblem<'_, T>,
    anchor: &Score<T>,
) -> Result<Vec<Candidate<T>>, ReconcileError> {
    let phi_a = problem.phi_a.as_slice();
    let mut found = Vec::new();
    for j in 0..phi_a.len() {
        for reach in [-phi_a[j], anchor.objective] {
            if reach == T::zero() {
                continue;
            }
            let at = |t: T| {
                let mut v = phi_a.to_vec();
                v[j] = v[j] + t * reach;
                Weighting::clamped(v)
            };
            let far = at(T::one());
            let far_score = problem.score(&far)?;
            if !problem.satisfied(&far_score) {
                continue;
            }
            let (mut lo, mut hi) = (T::zero(), T::one());
            let mut best = (far, far_score);
            for _ in 0..problem.boundary_refinement_steps {
                let mid = (lo + hi) / T::of(2.0);
                let candidate = at(mid);
                let s = problem.score(&candidate)?;
                if problem.satisfied(&s) {
                    hi = mid;
                    best = (candidate, s);
                } else {
                    lo = mid;
                }
            }
            found.push(best);
        }
    }
    Ok(found)
}

/// Bisection on `t ∈ [0, 1]` for `φ(t) = φ_a + t (φ − φ_a)`, keeping the
/// smallest `t` found at which the constraint holds. The L1 term shrinks
/// linearly in `t`, so the objective never gets worse.
fn refine_toward_anchor<T: Scalar>(
    problem: &ReconcileProblem<'_, T>,
    phi: Weighting<T>,
    score: Score<T>,
) -> Result<Candidate<T>, ReconcileError> {
    let anchor = problem.phi_a.as_slice();
    let at = |t: T| Weighting::clamped(anchor.iter().zip(phi.as_slice()).map(|(&a, &p)| a + t * (p - a)));
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut best = (phi.clone(), score);
    for _ in 0..problem.boundary_refinement_steps {
        let mid = (lo + hi) / T::of(2.0);
        let candidate = at(mid);
        let s = problem.score(&candidate)?;
        if problem.satisfied(&s) {
            hi = mid;
            if s.objective <= best.1.objective {
                best = (candidate, s);
            }
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Per-coordinate version of [`refine_toward_anchor`]: each displaced
/// coordinate in turn is bisected back toward its anchor value.
fn polish_coordinates<T: Scalar>(
    problem: &ReconcileProblem<'_, T>,
    phi: Weighting<T>,
    score: Score<T>,
) -> Result<Candidate<T>, ReconcileError> {
    let anchor = problem.phi_a.as_slice();
    let mut best = (phi, score);
    for j in 0..anchor.len() {
        let start = best.0[j];
        if start == anchor[j] {
            continue;
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..problem.boundary_refinement_steps {
            let mid = (lo + hi) / T::of(2.0);
            let mut values = best.0.as_slice().to_vec();
            values[j] = anchor[j] + mid * (start - anchor[j]);
            let candidate = Weighting::clamped(values);
            let s = problem.score(&candidate)?;
            if problem.satisfied(&s) {
                hi = mid;
                if s.objective <= best.1.objective {
                    best = (candidate, s);
                }
            } else {
                lo = mid;
            }
        }
    }
    Ok(best)
}
