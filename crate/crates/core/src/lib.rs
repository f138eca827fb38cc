//! Reward-weighting reconciliation for online POMDP planning.
//!
//! A planner recommends an action under its reward weighting `φ_a`; a
//! user proposes a different one. [`reconcile`] searches for the weighting
//! closest to `φ_a` (in L1) under which the user's action is at least as
//! good, using a scenario tree built once by [`planner`] and re-evaluated
//! cheaply per candidate. [`explain`] turns the recovered weighting into
//! short sentences. [`session`] and [`server`] wrap the loop for the HVAC
//! repair-dispatch domain in [`hvac`].

pub mod belief;
pub mod explain;
pub mod hvac;
pub mod planner;
pub mod pomdp;
pub mod reconcile;
pub mod scalar;
pub mod server;
pub mod session;
pub mod stream;

pub use belief::{belief_marginals, belief_update, BeliefMarginals, ParticleBelief};
pub use explain::{generate_explanation, Explanation, ExplanationStatement};
pub use hvac::{Hvac, HvacAction, HvacConfig, HvacObservation, HvacState, Status};
pub use planner::{build_tree, PlannerParams, QEstimate, ScenarioTree};
pub use pomdp::{reward, FeatureVector, ModelError, PomdpModel, Weighting};
pub use reconcile::{cross_entropy_reconcile, CeParams, ReconcileProblem, ReconcileResult};
pub use scalar::Scalar;
pub use session::{Session, SessionConfig};
pub use stream::{RandomSource, SeededStream};

pub type Weighting64 = Weighting<f64>;
pub type Weighting32 = Weighting<f32>;
pub type FeatureVector64 = FeatureVector<f64>;
pub type FeatureVector32 = FeatureVector<f32>;
pub type ScenarioTree64 = ScenarioTree<f64>;
pub type ScenarioTree32 = ScenarioTree<f32>;
pub type QEstimate64 = QEstimate<f64>;
pub type ReconcileResult64 = ReconcileResult<f64>;
