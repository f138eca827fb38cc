//! Interactive reconciliation sessions over the HVAC domain.
//!
//! A session owns the simulated true state, the particle belief and a log
//! of everything that happened. Each random decision draws from a stream
//! derived from the session seed and the timestep, so replaying the logged
//! actions reproduces the session exactly.
//!
//! Call order per timestep: [`Session::recommend`] (builds and caches the
//! scenario tree), any number of [`Session::propose`] calls against that
//! cached tree, then [`Session::step`] with whichever action is executed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{belief_marginals, belief_update, BeliefError, BeliefMarginals, ParticleBelief};
use crate::explain::{generate_explanation, ExplainConfig, ExplainError, Explanation};
use crate::hvac::{Hvac, HvacAction, HvacConfig, HvacObservation, HvacState};
use crate::planner::{build_tree, PlannerError, PlannerParams, ScenarioTree};
use crate::pomdp::{reward, ModelError, PomdpModel, Weighting};
use crate::reconcile::{cross_entropy_reconcile, CeParams, ReconcileConfig, ReconcileError, ReconcileProblem, ReconcileResult};
use crate::stream::SeededStream;

pub const EXPORT_VERSION: u32 = 1;

const INIT: u64 = 0;
const WORLD: u64 = 1;
const FILTER: u64 = 2;
const PLAN: u64 = 3;
const PROPOSE: u64 = 4;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("session is complete at timestep {0}")]
    Complete(usize),
    #[error("out of order: {0}")]
    OutOfOrder(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("replayed session diverges from the log at timestep {0}")]
    ReplayMismatch(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Reconcile(#[from] ReconcileError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub hvac: HvacConfig,
    pub planner: PlannerParams,
    /// Particle count of the belief filter.
    pub belief_particles: usize,
    /// Algorithm weighting; all ones when absent.
    pub phi_a: Option<Vec<f64>>,
    pub ce: CeParams,
    pub reconcile: ReconcileConfig,
    pub explain: ExplainConfig,
    /// Include the true state in the log.
    pub debug: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            hvac: HvacConfig::default(),
            planner: PlannerParams::default(),
            belief_particles: 5000,
            phi_a: None,
            ce: CeParams::default(),
            reconcile: ReconcileConfig::default(),
            explain: ExplainConfig::default(),
            debug: false,
        }
    }
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn phi_a(&self) -> Result<Weighting, SessionError> {
        let f = self.hvac.feature_count();
        let phi = match &self.phi_a {
            Some(v) => Weighting::new(v.clone())?,
            None => Weighting::ones(f),
        };
        phi.check_dim(f)?;
        Ok(phi)
    }

    fn validate(&self) -> Result<(), SessionError> {
        self.hvac.validate()?;
        self.planner.validate()?;
        self.ce.validate()?;
        if self.belief_particles == 0 {
            return Err(SessionError::Config("belief_particles must be ≥ 1".into()));
        }
        self.phi_a()?;
        Ok(())
    }
}

/// One executed timestep, as shown in the episode timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Observation available when the action was chosen.
    pub observation: HvacObservation,
    /// Belief marginals when the action was chosen.
    pub belief_marginals: BeliefMarginals,
    pub action: HvacAction,
    pub features: Vec<f64>,
    /// `φ_aᵀ features`
    pub reward: f64,
    pub penalties: Vec<bool>,
    /// `Σ_{τ ≤ t} γ^{τ-1} reward_τ`
    pub discounted_return: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_state: Option<HvacState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationRecord {
    pub t: usize,
    pub a_a: HvacAction,
    pub a_h: HvacAction,
    pub phi_hat: Vec<f64>,
    #[serde(rename = "U")]
    pub objective: f64,
    pub feasible: bool,
    pub l1_distance: f64,
    pub residual: f64,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub version: u32,
    pub config: SessionConfig,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub reconciliations: Vec<ReconciliationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Timestep the action was executed at.
    pub t: usize,
    pub action: HvacAction,
    pub observation: HvacObservation,
    pub belief_marginals: BeliefMarginals,
    pub features: Vec<f64>,
    pub reward: f64,
    pub penalties: Vec<bool>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub action: HvacAction,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub t: usize,
    pub action: HvacAction,
    pub q_values: Vec<ActionValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub reconcile_result: ReconcileResult,
    pub explanation: Explanation,
}

/// Current-state view for clients.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub id: String,
    pub timestep: usize,
    pub complete: bool,
    pub observation: HvacObservation,
    pub belief_marginals: BeliefMarginals,
    pub recommendation: Option<Recommendation>,
    pub feature_labels: Vec<String>,
    pub phi_a: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_state: Option<HvacState>,
    #[serde(flatten)]
    pub log: SessionExport,
}

#[derive(Debug, Clone)]
struct CachedPlan {
    timestep: usize,
    tree: ScenarioTree,
    recommendation: Recommendation,
    action_index: usize,
    proposals: usize,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    seed: u64,
    model: Hvac,
    phi_a: Weighting,
    root: SeededStream,
    state: HvacState,
    belief: ParticleBelief<HvacState>,
    observation: HvacObservation,
    steps: Vec<StepRecord>,
    reconciliations: Vec<ReconciliationRecord>,
    discounted_return: f64,
    plan: Option<CachedPlan>,
}

impl Session {
    /// Timestep 1, all locations Ok, belief exact.
    pub fn new(id: impl Into<String>, config: SessionConfig, seed: u64) -> Result<Self, SessionError> {
        config.validate()?;
        let model = Hvac::new(config.hvac.clone())?;
        let phi_a = config.phi_a()?;
        let root = SeededStream::new(seed);
        let state = model.initial_state(&mut root.derive(INIT));
        let observation = model.exact_observation(&state);
        let initial = model.initial_belief(&observation.availability);
        let belief = ParticleBelief::from_distribution(&initial, config.belief_particles, &mut root.derive(INIT))?;
        Ok(Self {
            id: id.into(),
            config,
            seed,
            model,
            phi_a,
            root,
            state,
            belief,
            observation,
            steps: Vec::new(),
            reconciliations: Vec::new(),
            discounted_return: 0.0,
            plan: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn model(&self) -> &Hvac {
        &self.model
    }

    pub fn phi_a(&self) -> &Weighting {
        &self.phi_a
    }

    pub fn timestep(&self) -> usize {
        self.state.timestep
    }

    pub fn is_complete(&self) -> bool {
        self.model.is_terminal(&self.state)
    }

    pub fn true_state(&self) -> &HvacState {
        &self.state
    }

    pub fn belief(&self) -> &ParticleBelief<HvacState> {
        &self.belief
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn reconciliations(&self) -> &[ReconciliationRecord] {
        &self.reconciliations
    }

    pub fn discounted_return(&self) -> f64 {
        self.discounted_return
    }

    /// Tree cached by the last [`recommend`](Self::recommend) at this timestep.
    pub fn cached_tree(&self) -> Option<&ScenarioTree> {
        self.plan.as_ref().filter(|p| p.timestep == self.timestep()).map(|p| &p.tree)
    }

    fn stream(&self, purpose: u64, t: usize) -> SeededStream {
        self.root.derive_path(&[purpose, t as u64])
    }

    fn parse_action(&self, action: &HvacAction) -> Result<usize, SessionError> {
        self.model.action_index(action).map_err(|e| SessionError::InvalidAction(e.to_string()))
    }

    /// Plan at the current belief under `φ_a`. Idempotent per timestep.
    pub fn recommend(&mut self) -> Result<Recommendation, SessionError> {
        let t = self.timestep();
        if self.is_complete() {
            return Err(SessionError::Complete(t));
        }
        if let Some(plan) = self.plan.as_ref().filter(|p| p.timestep == t) {
            return Ok(plan.recommendation.clone());
        }
        let tree: ScenarioTree =
            build_tree(&self.model, &self.belief, &self.config.planner, &mut self.stream(PLAN, t))?;
        let q = tree.evaluate(&self.phi_a)?;
        let action_index = q.best_action();
        let recommendation = Recommendation {
            t,
            action: self.model.actions()[action_index].clone(),
            q_values: self
                .model
                .actions()
                .iter()
                .zip(&q.values)
                .map(|(a, &q)| ActionValue { action: a.clone(), q })
                .collect(),
        };
        self.plan = Some(CachedPlan { timestep: t, tree, recommendation: recommendation.clone(), action_index, proposals: 0 });
        Ok(recommendation)
    }

    /// Explain the gap between the recommended action and `user_action`.
    /// Leaves the true state, belief and timestep untouched.
    pub fn propose(&mut self, user_action: &HvacAction) -> Result<Proposal, SessionError> {
        let t = self.timestep();
        let user = self.parse_action(user_action)?;
        let plan = self
            .plan
            .as_mut()
            .filter(|p| p.timestep == t)
            .ok_or_else(|| SessionError::OutOfOrder(format!("propose before recommend at timestep {t}")))?;
        let problem = ReconcileProblem::new(&plan.tree, self.phi_a.clone(), plan.action_index, user, &self.config.reconcile)?;
        let mut stream = self.root.derive_path(&[PROPOSE, t as u64, plan.proposals as u64]);
        let result = cross_entropy_reconcile(&problem, &self.config.ce, &mut stream)?;
        plan.proposals += 1;
        let explanation =
            generate_explanation(&self.phi_a, &result.phi_hat, &self.model.feature_labels(), &self.config.explain)?;
        self.reconciliations.push(ReconciliationRecord {
            t,
            a_a: plan.recommendation.action.clone(),
            a_h: user_action.clone(),
            phi_hat: result.phi_hat.as_slice().to_vec(),
            objective: result.objective,
            feasible: result.feasible,
            l1_distance: result.l1_distance,
            residual: result.residual,
            explanation: explanation.clone(),
        });
        Ok(Proposal { reconcile_result: result, explanation })
    }

    /// Execute `action` in the simulated world and filter the belief.
    pub fn step(&mut self, action: &HvacAction) -> Result<StepReport, SessionError> {
        let t = self.timestep();
        if self.is_complete() {
            return Err(SessionError::Complete(t));
        }
        let index = self.parse_action(action)?;
        let features = self.model.features(&self.state, action)?;
        let reward = reward(&features, &self.phi_a)?;
        let penalties = self.model.penalties(&self.state);

        let mut world = self.stream(WORLD, t);
        let next = self.model.transition_sample(&self.state, action, &mut world)?;
        let observation = self.model.observation_sample(action, &next, &mut world)?;
        let (belief, _) = belief_update(&self.model, &self.belief, index, &observation, &mut self.stream(FILTER, t))?;

        self.discounted_return += self.model.discount().powi(t as i32 - 1) * reward;
        self.steps.push(StepRecord {
            t,
            observation: self.observation.clone(),
            belief_marginals: belief_marginals(&self.belief),
            action: action.clone(),
            features: features.as_slice().to_vec(),
            reward,
            penalties: penalties.clone(),
            discounted_return: self.discounted_return,
            true_state: self.config.debug.then(|| self.state.clone()),
        });
        self.state = next;
        self.belief = belief;
        self.observation = observation.clone();
        self.plan = None;
        Ok(StepReport {
            t,
            action: action.clone(),
            observation,
            belief_marginals: belief_marginals(&self.belief),
            features: features.into_vec(),
            reward,
            penalties,
            complete: self.is_complete(),
        })
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            version: EXPORT_VERSION,
            config: self.config.clone(),
            seed: self.seed,
            steps: self.steps.clone(),
            reconciliations: self.reconciliations.clone(),
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("export serializes")
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            timestep: self.timestep(),
            complete: self.is_complete(),
            observation: self.observation.clone(),
            belief_marginals: belief_marginals(&self.belief),
            recommendation: self.plan.as_ref().filter(|p| p.timestep == self.timestep()).map(|p| p.recommendation.clone()),
            feature_labels: self.model.feature_labels(),
            phi_a: self.phi_a.as_slice().to_vec(),
            true_state: self.config.debug.then(|| self.state.clone()),
            log: self.export(),
        }
    }

    /// Rebuild a session by replaying `actions` from the start.
    pub fn replay(id: impl Into<String>, config: SessionConfig, seed: u64, actions: &[HvacAction]) -> Result<Self, SessionError> {
        let mut session = Self::new(id, config, seed)?;
        for a in actions {
            session.step(a)?;
        }
        Ok(session)
    }

    /// Inverse of [`export`](Self::export): replays the logged actions and
    /// checks that every regenerated step matches the log.
    pub fn import(id: impl Into<String>, export: SessionExport) -> Result<Self, SessionError> {
        if export.version != EXPORT_VERSION {
            return Err(SessionError::Config(format!("unsupported export version {}", export.version)));
        }
        let actions: Vec<HvacAction> = export.steps.iter().map(|s| s.action.clone()).collect();
        let mut session = Self::replay(id, export.config, export.seed, &actions)?;
        if let Some(bad) = session.steps.iter().zip(&export.steps).find(|(a, b)| a != b) {
            return Err(SessionError::ReplayMismatch(bad.1.t));
        }
        session.reconciliations = export.reconciliations;
        Ok(session)
    }

    pub fn import_json(id: impl Into<String>, json: &str) -> Result<Self, SessionError> {
        Self::import(id, serde_json::from_str(json)?)
    }
}
