//! HVAC repair-dispatch POMDP.
//!
//! `N` locations may each be Ok or carry a mechanical, electrical or
//! coolant fault. `R` repairpeople are dispatched each step (or stay home).
//! Fault status is observed through a noisy channel; a `V`-step window of
//! customer availability and the timestep are fully observable.
//!
//! Feature layout is `[penalty_1, …, penalty_N, wage_1, …, wage_R]`.
//!
//! Draw budget per call: [`Hvac::transition_sample`] consumes `2·N` draws
//! (one status draw per location, then one availability draw per location
//! for the incoming window row), [`Hvac::observation_sample`] consumes `N`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pomdp::{FeatureVector, ModelError, PomdpModel};
use crate::stream::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Mech,
    Elec,
    Cool,
}

impl Status {
    pub const ALL: [Status; 4] = [Status::Ok, Status::Mech, Status::Elec, Status::Cool];
    pub const FAULTS: [Status; 3] = [Status::Mech, Status::Elec, Status::Cool];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_fault(self) -> bool {
        self != Status::Ok
    }

    /// Column into `p_fix` / `p_fault_onset`.
    fn fault_index(self) -> Option<usize> {
        match self {
            Status::Ok => None,
            s => Some(s.index() - 1),
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Ok => "Ok",
            Status::Mech => "Mech",
            Status::Elec => "Elec",
            Status::Cool => "Cool",
        };
        f.write_str(s)
    }
}

/// Status of one location and the timestep it last changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocationStatus {
    pub status: Status,
    pub onset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HvacState {
    pub locations: Vec<LocationStatus>,
    /// `V × N`; row 0 is the current step.
    pub availability: Vec<Vec<bool>>,
    /// 1-based.
    pub timestep: usize,
}

impl HvacState {
    /// Timesteps since location `i` last changed status.
    pub fn age(&self, i: usize) -> usize {
        self.timestep - self.locations[i].onset
    }

    pub fn available_now(&self, i: usize) -> bool {
        self.availability[0][i]
    }
}

/// Location assignment per worker; `0` keeps the worker home.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HvacAction(pub Vec<usize>);

impl HvacAction {
    pub fn assignments(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for HvacAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for HvacAction {
    type Err = String;

    /// Parses `"2,1"` or `"(2,1)"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        inner
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad action entry {p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(HvacAction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HvacObservation {
    pub status: Vec<Status>,
    pub availability: Vec<Vec<bool>>,
    pub timestep: usize,
}

/// Problem parameters. Field names are the on-disk JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvacConfig {
    pub n_locations: usize,
    pub n_workers: usize,
    pub avail_horizon: usize,
    pub horizon: usize,
    /// Penalty per location, `≤ 0`.
    pub r_l: Vec<f64>,
    /// Fault age at which the penalty starts.
    pub x_l: Vec<usize>,
    /// Wage per worker, `≤ 0`.
    pub r_w: Vec<f64>,
    /// `p_fix[worker][fault]`, fault columns `[mech, elec, cool]`.
    pub p_fix: Vec<[f64; 3]>,
    pub p_ok_stay: f64,
    /// Ok → `[mech, elec, cool]`.
    pub p_fault_onset: [f64; 3],
    /// Observation row for a true Ok location, `[ok, mech, elec, cool]`.
    pub obs_ok: [f64; 4],
    pub obs_fault_correct: f64,
    pub obs_fault_ok: f64,
    pub obs_fault_other: f64,
    pub p_avail: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_discount() -> f64 {
    0.95
}

impl Default for HvacConfig {
    fn default() -> Self {
        Self {
            n_locations: 3,
            n_workers: 2,
            avail_horizon: 5,
            horizon: 16,
            r_l: vec![-250.0, -125.0, -125.0],
            x_l: vec![3, 3, 3],
            r_w: vec![-5.0, -4.0],
            p_fix: vec![[0.8, 0.9, 1.0], [0.9, 0.9, 0.9]],
            p_ok_stay: 0.7,
            p_fault_onset: [0.1, 0.1, 0.1],
            obs_ok: [0.7, 0.1, 0.1, 0.1],
            obs_fault_correct: 0.5,
            obs_fault_ok: 0.1,
            obs_fault_other: 0.2,
            p_avail: 0.8,
            discount: default_discount(),
        }
    }
}

const SUM_TOL: f64 = 1e-12;

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

fn check_prob(name: &str, p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p} is not a probability")))
    }
}

impl HvacConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn feature_count(&self) -> usize {
        self.n_locations + self.n_workers
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (n, r) = (self.n_locations, self.n_workers);
        if n == 0 || r == 0 || self.avail_horizon == 0 || self.horizon == 0 {
            return Err(invalid("n_locations, n_workers, avail_horizon and horizon must be ≥ 1"));
        }
        if self.r_l.len() != n || self.x_l.len() != n {
            return Err(invalid("r_l and x_l need one entry per location"));
        }
        if self.r_w.len() != r || self.p_fix.len() != r {
            return Err(invalid("r_w and p_fix need one entry per worker"));
        }
        if self.r_l.iter().chain(&self.r_w).any(|v| !(v.is_finite() && *v <= 0.0)) {
            return Err(invalid("penalties and wages must be finite and ≤ 0"));
        }
        if self.x_l.iter().any(|&x| x < 1) {
            return Err(invalid("x_l entries must be ≥ 1"));
        }
        for row in &self.p_fix {
            for &p in row {
                check_prob("p_fix", p)?;
            }
        }
        check_prob("p_ok_stay", self.p_ok_stay)?;
        for &p in &self.p_fault_onset {
            check_prob("p_fault_onset", p)?;
        }
        let ok_row = self.p_ok_stay + self.p_fault_onset.iter().sum::<f64>();
        if (ok_row - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("Ok transition row sums to {ok_row}")));
        }
        for &p in &self.obs_ok {
            check_prob("obs_ok", p)?;
        }
        check_prob("obs_fault_correct", self.obs_fault_correct)?;
        check_prob("obs_fault_ok", self.obs_fault_ok)?;
        check_prob("obs_fault_other", self.obs_fault_other)?;
        let obs_row = self.obs_ok.iter().sum::<f64>();
        let fault_row = self.obs_fault_correct + self.obs_fault_ok + 2.0 * self.obs_fault_other;
        if (obs_row - 1.0).abs() > SUM_TOL || (fault_row - 1.0).abs() > SUM_TOL {
            return Err(invalid("observation rows must sum to 1"));
        }
        check_prob("p_avail", self.p_avail)?;
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid(format!("discount {} outside (0, 1]", self.discount)));
        }
        Ok(())
    }

    /// Probability of observing `observed` at a location whose true status is `truth`.
    pub fn observation_likelihood(&self, truth: Status, observed: Status) -> f64 {
        match truth {
            Status::Ok => self.obs_ok[observed.index()],
            fault if fault == observed => self.obs_fault_correct,
            _ if observed == Status::Ok => self.obs_fault_ok,
            _ => self.obs_fault_other,
        }
    }

    /// Probability that a fault at a location is cleared this step, given
    /// the workers sent there. Attempts succeed independently.
    pub fn repair_probability(&self, fault: Status, workers: impl IntoIterator<Item = usize>) -> f64 {
        let Some(col) = fault.fault_index() else {
            return 0.0;
        };
        let attempts: Vec<f64> = workers.into_iter().map(|w| self.p_fix[w][col]).collect();
        match attempts.as_slice() {
            [] => 0.0,
            // a single attempt reports its table entry unmodified
            [p] => *p,
            many => 1.0 - many.iter().map(|p| 1.0 - p).product::<f64>(),
        }
    }
}

/// The dispatch problem as a [`PomdpModel`].
#[derive(Debug, Clone)]
pub struct Hvac {
    config: HvacConfig,
    actions: Vec<HvacAction>,
}

impl Hvac {
    pub fn new(config: HvacConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let base = config.n_locations + 1;
        let count = base
            .checked_pow(config.n_workers as u32)
            .ok_or_else(|| invalid("action space too large"))?;
        let actions = (0..count)
            .map(|mut idx| {
                let mut a = vec![0; config.n_workers];
                for slot in a.iter_mut().rev() {
                    *slot = idx % base;
                    idx /= base;
                }
                HvacAction(a)
            })
            .collect();
        Ok(Self { config, actions })
    }

    pub fn config(&self) -> &HvacConfig {
        &self.config
    }

    /// All actions, in index order. Worker 1 is the most significant digit.
    pub fn actions(&self) -> &[HvacAction] {
        &self.actions
    }

    pub fn action(&self, index: usize) -> Result<&HvacAction, ModelError> {
        self.actions
            .get(index)
            .ok_or(ModelError::InvalidAction { index, count: self.actions.len() })
    }

    pub fn action_index(&self, action: &HvacAction) -> Result<usize, ModelError> {
        self.check_hvac_action(action)?;
        let base = self.config.n_locations + 1;
        Ok(action.0.iter().fold(0, |acc, &a| acc * base + a))
    }

    fn check_hvac_action(&self, action: &HvacAction) -> Result<(), ModelError> {
        if action.0.len() != self.config.n_workers {
            return Err(ModelError::Dimension { expected: self.config.n_workers, actual: action.0.len() });
        }
        if let Some(&bad) = action.0.iter().find(|&&a| a > self.config.n_locations) {
            return Err(invalid(format!("worker assigned to location {bad} > {}", self.config.n_locations)));
        }
        Ok(())
    }

    fn check_state(&self, state: &HvacState) -> Result<(), ModelError> {
        let c = &self.config;
        if state.locations.len() != c.n_locations
            || state.availability.len() != c.avail_horizon
            || state.availability.iter().any(|row| row.len() != c.n_locations)
        {
            return Err(invalid("state dimensions do not match config"));
        }
        if state.timestep < 1 || state.timestep > c.horizon {
            return Err(invalid(format!("timestep {} outside [1, {}]", state.timestep, c.horizon)));
        }
        if state.locations.iter().any(|l| l.onset < 1 || l.onset > state.timestep) {
            return Err(invalid("fault onset lies in the future"));
        }
        Ok(())
    }

    fn check_transition(&self, state: &HvacState, action: &HvacAction) -> Result<(), ModelError> {
        self.check_hvac_action(action)?;
        self.check_state(state)?;
        if state.timestep >= self.config.horizon {
            return Err(ModelError::Terminal { timestep: state.timestep });
        }
        Ok(())
    }

    fn workers_at(action: &HvacAction, location: usize) -> impl Iterator<Item = usize> + '_ {
        action
            .0
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == location + 1)
            .map(|(w, _)| w)
    }

    /// Outcome distribution of one location, in a fixed order that matches
    /// the inverse-CDF used by sampling.
    fn location_outcomes(
        &self,
        state: &HvacState,
        action: &HvacAction,
        i: usize,
    ) -> Vec<(LocationStatus, f64)> {
        let c = &self.config;
        let current = state.locations[i];
        let next_t = state.timestep + 1;
        match current.status {
            Status::Ok => {
                let mut out = vec![(current, c.p_ok_stay)];
                for (fault, &p) in Status::FAULTS.iter().zip(&c.p_fault_onset) {
                    out.push((LocationStatus { status: *fault, onset: next_t }, p));
                }
                out
            }
            fault => {
                let p_repair = if state.available_now(i) {
                    c.repair_probability(fault, Self::workers_at(action, i))
                } else {
                    0.0
                };
                vec![
                    (LocationStatus { status: Status::Ok, onset: next_t }, p_repair),
                    (current, 1.0 - p_repair),
                ]
            }
        }
    }

    fn pick<T: Copy>(outcomes: &[(T, f64)], u: f64) -> T {
        let mut acc = 0.0;
        for &(value, p) in outcomes {
            acc += p;
            if u < acc {
                return value;
            }
        }
        // u landed in rounding slack at the top of the CDF
        outcomes
            .iter()
            .rev()
            .find(|(_, p)| *p > 0.0)
            .map(|&(v, _)| v)
            .expect("outcome distribution has positive mass")
    }

    pub fn transition_sample<R: RandomSource + ?Sized>(
        &self,
        state: &HvacState,
        action: &HvacAction,
        rng: &mut R,
    ) -> Result<HvacState, ModelError> {
        self.check_transition(state, action)?;
        let n = self.config.n_locations;
        let locations = (0..n)
            .map(|i| {
                let u = rng.next_unit();
                Self::pick(&self.location_outcomes(state, action, i), u)
            })
            .collect();
        let fresh_row: Vec<bool> = (0..n).map(|_| rng.next_unit() < self.config.p_avail).collect();
        let mut availability: Vec<Vec<bool>> = state.availability[1..].to_vec();
        availability.push(fresh_row);
        Ok(HvacState { locations, availability, timestep: state.timestep + 1 })
    }

    /// Exact successor distribution, zero-probability outcomes omitted.
    /// Size grows as `4^N · 2^N`; intended for small test instances.
    pub fn transition_support(
        &self,
        state: &HvacState,
        action: &HvacAction,
    ) -> Result<Vec<(HvacState, f64)>, ModelError> {
        self.check_transition(state, action)?;
        let n = self.config.n_locations;
        let mut status_combos: Vec<(Vec<LocationStatus>, f64)> = vec![(Vec::with_capacity(n), 1.0)];
        for i in 0..n {
            let outcomes = self.location_outcomes(state, action, i);
            status_combos = status_combos
                .into_iter()
                .flat_map(|(prefix, p)| {
                    outcomes.iter().filter(|(_, q)| *q > 0.0).map(move |&(loc, q)| {
                        let mut v = prefix.clone();
                        v.push(loc);
                        (v, p * q)
                    })
                })
                .collect();
        }
        let p_avail = self.config.p_avail;
        let mut rows: Vec<(Vec<bool>, f64)> = Vec::new();
        for mask in 0..(1usize << n) {
            let row: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let p: f64 = row.iter().map(|&a| if a { p_avail } else { 1.0 - p_avail }).product();
            if p > 0.0 {
                rows.push((row, p));
            }
        }
        let mut out = Vec::with_capacity(status_combos.len() * rows.len());
        for (locations, p_status) in &status_combos {
            for (row, p_row) in &rows {
                let mut availability = state.availability[1..].to_vec();
                availability.push(row.clone());
                out.push((
                    HvacState { locations: locations.clone(), availability, timestep: state.timestep + 1 },
                    p_status * p_row,
                ));
            }
        }
        Ok(out)
    }

    pub fn observation_sample<R: RandomSource + ?Sized>(
        &self,
        action: &HvacAction,
        next_state: &HvacState,
        rng: &mut R,
    ) -> Result<HvacObservation, ModelError> {
        self.check_hvac_action(action)?;
        self.check_state(next_state)?;
        let status = next_state
            .locations
            .iter()
            .map(|loc| {
                let row: Vec<(Status, f64)> = Status::ALL
                    .iter()
                    .map(|&o| (o, self.config.observation_likelihood(loc.status, o)))
                    .collect();
                Self::pick(&row, rng.next_unit())
            })
            .collect();
        Ok(HvacObservation {
            status,
            availability: next_state.availability.clone(),
            timestep: next_state.timestep,
        })
    }

    pub fn observation_prob(
        &self,
        observation: &HvacObservation,
        action: &HvacAction,
        next_state: &HvacState,
    ) -> Result<f64, ModelError> {
        self.check_hvac_action(action)?;
        if observation.status.len() != self.config.n_locations {
            return Err(ModelError::Dimension {
                expected: self.config.n_locations,
                actual: observation.status.len(),
            });
        }
        if observation.availability != next_state.availability || observation.timestep != next_state.timestep {
            return Ok(0.0);
        }
        Ok(observation
            .status
            .iter()
            .zip(&next_state.locations)
            .map(|(&o, loc)| self.config.observation_likelihood(loc.status, o))
            .product())
    }

    /// Every status observation for `next_state`, with its likelihood.
    pub fn observation_support(&self, next_state: &HvacState) -> Vec<(HvacObservation, f64)> {
        let mut combos: Vec<(Vec<Status>, f64)> = vec![(Vec::new(), 1.0)];
        for loc in &next_state.locations {
            combos = combos
                .into_iter()
                .flat_map(|(prefix, p)| {
                    Status::ALL.iter().map(move |&o| {
                        let mut v = prefix.clone();
                        v.push(o);
                        (v, p * self.config.observation_likelihood(loc.status, o))
                    })
                })
                .filter(|(_, p)| *p > 0.0)
                .collect();
        }
        combos
            .into_iter()
            .map(|(status, p)| {
                (
                    HvacObservation {
                        status,
                        availability: next_state.availability.clone(),
                        timestep: next_state.timestep,
                    },
                    p,
                )
            })
            .collect()
    }

    pub fn features(&self, state: &HvacState, action: &HvacAction) -> Result<FeatureVector, ModelError> {
        self.check_hvac_action(action)?;
        let c = &self.config;
        let penalties = (0..c.n_locations).map(|i| {
            let loc = state.locations[i];
            if loc.status.is_fault() && state.age(i) >= c.x_l[i] {
                c.r_l[i]
            } else {
                0.0
            }
        });
        let wages = action
            .0
            .iter()
            .zip(&c.r_w)
            .map(|(&a, &wage)| if a != 0 { wage } else { 0.0 });
        FeatureVector::new(penalties.chain(wages).collect())
    }

    /// Penalty flags per location, as shown in the episode timeline.
    pub fn penalties(&self, state: &HvacState) -> Vec<bool> {
        (0..self.config.n_locations)
            .map(|i| state.locations[i].status.is_fault() && state.age(i) >= self.config.x_l[i])
            .collect()
    }

    /// All locations Ok with onset 1 at timestep 1; availability drawn
    /// row-major, `V·N` draws.
    pub fn initial_state<R: RandomSource + ?Sized>(&self, rng: &mut R) -> HvacState {
        let c = &self.config;
        let availability = (0..c.avail_horizon)
            .map(|_| (0..c.n_locations).map(|_| rng.next_unit() < c.p_avail).collect())
            .collect();
        HvacState {
            locations: vec![LocationStatus { status: Status::Ok, onset: 1 }; c.n_locations],
            availability,
            timestep: 1,
        }
    }

    /// The exact initial belief: status is known, availability is read off
    /// the observed window.
    pub fn initial_belief(&self, availability: &[Vec<bool>]) -> Vec<(HvacState, f64)> {
        vec![(
            HvacState {
                locations: vec![LocationStatus { status: Status::Ok, onset: 1 }; self.config.n_locations],
                availability: availability.to_vec(),
                timestep: 1,
            },
            1.0,
        )]
    }

    /// Observation of a state with noiseless status, used for the initial
    /// (fully known) state.
    pub fn exact_observation(&self, state: &HvacState) -> HvacObservation {
        HvacObservation {
            status: state.locations.iter().map(|l| l.status).collect(),
            availability: state.availability.clone(),
            timestep: state.timestep,
        }
    }

    /// Feature labels in feature order.
    pub fn feature_labels(&self) -> Vec<String> {
        (1..=self.config.n_locations)
            .map(|n| format!("penalty at Location {n}"))
            .chain((1..=self.config.n_workers).map(|r| format!("wage of Repairperson {r}")))
            .collect()
    }
}

impl PomdpModel for Hvac {
    type State = HvacState;
    type Observation = HvacObservation;

    fn feature_count(&self) -> usize {
        self.config.feature_count()
    }

    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn discount(&self) -> f64 {
        self.config.discount
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn is_terminal(&self, state: &HvacState) -> bool {
        state.timestep >= self.config.horizon
    }

    fn transition_sample<R: RandomSource + ?Sized>(
        &self,
        state: &HvacState,
        action: usize,
        rng: &mut R,
    ) -> Result<HvacState, ModelError> {
        let action = self.action(action)?;
        Hvac::transition_sample(self, state, action, rng)
    }

    fn observation_sample<R: RandomSource + ?Sized>(
        &self,
        action: usize,
        next_state: &HvacState,
        rng: &mut R,
    ) -> Result<HvacObservation, ModelError> {
        let action = self.action(action)?;
        Hvac::observation_sample(self, action, next_state, rng)
    }

    fn observation_prob(
        &self,
        observation: &HvacObservation,
        action: usize,
        next_state: &HvacState,
    ) -> Result<f64, ModelError> {
        let action = self.action(action)?;
        Hvac::observation_prob(self, observation, action, next_state)
    }

    fn features(&self, state: &HvacState, action: usize) -> Result<FeatureVector, ModelError> {
        let action = self.action(action)?;
        Hvac::features(self, state, action)
    }

    /// The newest availability row is drawn independently of the state
    /// and observed without noise, so it is copied from the observation.
    /// Draw usage matches [`Hvac::transition_sample`].
    fn filter_proposal<R: RandomSource + ?Sized>(
        &self,
        state: &HvacState,
        action: usize,
        observation: &HvacObservation,
        rng: &mut R,
    ) -> Result<HvacState, ModelError> {
        let mut next = PomdpModel::transition_sample(self, state, action, rng)?;
        if observation.timestep == next.timestep && observation.availability.len() == next.availability.len() {
            let last = next.availability.len() - 1;
            next.availability[last].clone_from(&observation.availability[last]);
        }
        Ok(next)
    }

    /// Maximum-likelihood status per location, fault age zero.
    fn state_from_observation(&self, observation: &HvacObservation) -> Option<HvacState> {
        let locations = observation
            .status
            .iter()
            .map(|&o| {
                let status = Status::ALL
                    .iter()
                    .copied()
                    .fold((Status::Ok, f64::NEG_INFINITY), |best, s| {
                        let l = self.config.observation_likelihood(s, o);
                        if l > best.1 { (s, l) } else { best }
                    })
                    .0;
                LocationStatus { status, onset: observation.timestep }
            })
            .collect();
        Some(HvacState {
            locations,
            availability: observation.availability.clone(),
            timestep: observation.timestep,
        })
    }
}
