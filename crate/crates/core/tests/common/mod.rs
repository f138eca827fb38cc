//! Independent reference implementations used by the integration tests.
//! None of these call into the planner, filter or optimizer under test;
//! they only use the model's exact distributions.
#![allow(dead_code)]

use std::collections::HashMap;

use reward_reconcile::hvac::{Hvac, HvacAction, HvacConfig, HvacState, LocationStatus, Status};
use reward_reconcile::planner::{Scenario, ScenarioRandomness, ScenarioTree};
use reward_reconcile::reconcile::ReconcileProblem;
use reward_reconcile::stream::RandomSource;
use reward_reconcile::Weighting;

/// One location, one worker, penalties from the first faulty step on.
pub fn single_site(horizon: usize) -> HvacConfig {
    HvacConfig {
        n_locations: 1,
        n_workers: 1,
        horizon,
        r_l: vec![-250.0],
        x_l: vec![1],
        r_w: vec![-5.0],
        p_fix: vec![[0.8, 0.9, 1.0]],
        ..HvacConfig::default()
    }
}

pub fn state(locs: &[(Status, usize)], timestep: usize, n_avail_rows: usize) -> HvacState {
    HvacState {
        locations: locs.iter().map(|&(status, onset)| LocationStatus { status, onset }).collect(),
        availability: vec![vec![true; locs.len()]; n_avail_rows],
        timestep,
    }
}

/// Reward written out case by case: a location pays its penalty once it
/// has been faulty for at least `x_l` steps, and every dispatched worker
/// draws a wage.
#[allow(clippy::needless_range_loop)]
pub fn reward_by_cases(c: &HvacConfig, s: &HvacState, a: &HvacAction, phi: &[f64]) -> f64 {
    let mut total = 0.0;
    for n in 0..c.n_locations {
        let loc = s.locations[n];
        let faulty = loc.status != Status::Ok;
        let faulty_for = s.timestep - loc.onset;
        if faulty && faulty_for >= c.x_l[n] {
            total += phi[n] * c.r_l[n];
        }
    }
    for r in 0..c.n_workers {
        if a.0[r] != 0 {
            total += phi[c.n_locations + r] * c.r_w[r];
        }
    }
    total
}

/// Draws replayed from a fixed list.
pub struct Scripted {
    draws: Vec<f64>,
    next: usize,
}

impl Scripted {
    pub fn new(draws: Vec<f64>) -> Self {
        Self { draws, next: 0 }
    }
}

impl RandomSource for Scripted {
    fn next_unit(&mut self) -> f64 {
        let u = self.draws[self.next];
        self.next += 1;
        u
    }
}

/// Per-depth scripted draws for one scenario.
#[derive(Clone)]
pub struct ScriptedScenario {
    pub per_depth: Vec<Vec<f64>>,
}

impl ScenarioRandomness for ScriptedScenario {
    type Step = Scripted;

    fn step(&self, depth: usize) -> Scripted {
        Scripted::new(self.per_depth[depth].clone())
    }
}

/// Partition of `[0, 1)` at `cuts`, as `(midpoint, length)` cells.
fn cells(mut cuts: Vec<f64>) -> Vec<(f64, f64)> {
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.retain(|c| (0.0..=1.0).contains(c));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts.windows(2).map(|w| ((w[0] + w[1]) / 2.0, w[1] - w[0])).collect()
}

fn cumulative(ps: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    ps.into_iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Every `(status, availability, observation)` draw cell for a single-site
/// model. Inside a cell all three outcomes are constant whatever the state
/// and action, so midpoints weighted by cell length cover the step exactly.
pub fn single_site_step_cells(c: &HvacConfig) -> Vec<(Vec<f64>, f64)> {
    assert_eq!(c.n_locations, 1);
    let mut status_cuts = cumulative(std::iter::once(c.p_ok_stay).chain(c.p_fault_onset));
    for fault in Status::FAULTS {
        for w in 0..c.n_workers {
            status_cuts.push(c.repair_probability(fault, [w]));
        }
    }
    let mut obs_cuts = Vec::new();
    for truth in Status::ALL {
        obs_cuts.extend(cumulative(Status::ALL.iter().map(|&o| c.observation_likelihood(truth, o))));
    }
    let mut out = Vec::new();
    for (us, ws) in cells(status_cuts) {
        for (ua, wa) in cells(vec![c.p_avail]) {
            for (uo, wo) in cells(obs_cuts.clone()) {
                out.push((vec![us, ua, uo], ws * wa * wo));
            }
        }
    }
    out
}

/// All scripted scenarios over `depth` steps from a weighted start set.
pub fn exhaustive_scenarios(
    c: &HvacConfig,
    start: &[(HvacState, f64)],
    depth: usize,
) -> Vec<Scenario<HvacState, ScriptedScenario>> {
    let step = single_site_step_cells(c);
    let mut paths: Vec<(Vec<Vec<f64>>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..depth {
        paths = paths
            .into_iter()
            .flat_map(|(prefix, w)| {
                step.iter().map(move |(draws, p)| {
                    let mut v = prefix.clone();
                    v.push(draws.clone());
                    (v, w * p)
                })
            })
            .collect();
    }
    start
        .iter()
        .flat_map(|(s, ws)| {
            paths.iter().map(move |(per_depth, wp)| Scenario {
                start: s.clone(),
                weight: ws * wp,
                randomness: ScriptedScenario { per_depth: per_depth.clone() },
            })
        })
        .collect()
}

/// `Q(b, a)` for every root action by exhaustive belief-space expectimax
/// over the exact transition and observation tables.
pub fn expectimax_q(m: &Hvac, belief: &[(HvacState, f64)], phi: &[f64]) -> Vec<f64> {
    let mass: f64 = belief.iter().map(|(_, w)| w).sum();
    m.actions().iter().map(|a| q_unnormalized(m, belief, a, phi) / mass).collect()
}

fn q_unnormalized(m: &Hvac, belief: &[(HvacState, f64)], a: &HvacAction, phi: &[f64]) -> f64 {
    let c = m.config();
    let mut immediate = 0.0;
    let mut branches: HashMap<_, Vec<(HvacState, f64)>> = HashMap::new();
    let mut order = Vec::new();
    for (s, w) in belief {
        immediate += w * reward_by_cases(c, s, a, phi);
        for (next, p) in m.transition_support(s, a).unwrap() {
            for (o, z) in m.observation_support(&next) {
                let entry = branches.entry(o.clone()).or_insert_with(|| {
                    order.push(o);
                    Vec::new()
                });
                entry.push((next.clone(), w * p * z));
            }
        }
    }
    let future: f64 = order
        .iter()
        .map(|o| {
            let b = &branches[o];
            if b[0].0.timestep >= c.horizon {
                0.0
            } else {
                m.actions()
                    .iter()
                    .map(|a2| q_unnormalized(m, b, a2, phi))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .sum();
    immediate + c.discount * future
}

/// Bayes filter step on an explicit distribution.
pub fn exact_filter(
    m: &Hvac,
    belief: &[(HvacState, f64)],
    a: &HvacAction,
    o: &reward_reconcile::hvac::HvacObservation,
) -> Vec<(HvacState, f64)> {
    let mut post: HashMap<HvacState, f64> = HashMap::new();
    for (s, w) in belief {
        for (next, p) in m.transition_support(s, a).unwrap() {
            let z = m.observation_prob(o, a, &next).unwrap();
            if z > 0.0 {
                *post.entry(next).or_default() += w * p * z;
            }
        }
    }
    let total: f64 = post.values().sum();
    post.into_iter().map(|(s, w)| (s, w / total)).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Smallest `‖φ − φ_a‖₁` over grid points of `[0, hi]²` at which the user
/// action is at least as good as the algorithm's.
pub fn grid_min_l1(problem: &ReconcileProblem<'_>, tree: &ScenarioTree, hi: f64, step: f64) -> Option<(f64, [f64; 2])> {
    let n = (hi / step).round() as usize;
    let anchor = problem.phi_a.as_slice();
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 0..=n {
        for j in 0..=n {
            let p = [i as f64 * step, j as f64 * step];
            let l1 = (p[0] - anchor[0]).abs() + (p[1] - anchor[1]).abs();
            if best.is_some_and(|(b, _)| l1 >= b) {
                continue;
            }
            let q = tree.evaluate(&Weighting::new(p.to_vec()).unwrap()).unwrap();
            if q.values[problem.user_action] >= q.values[problem.algorithm_action] {
                best = Some((l1, p));
            }
        }
    }
    best
}
