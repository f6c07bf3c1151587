//! Online belief-tree search in the ABT/POMCP family.
//!
//! The solver only sees a [`GenerativeModel`]: it samples a state from the
//! root belief, descends the tree with UCB1, expands one leaf per episode,
//! finishes with a uniform-random rollout and backs the discounted return up
//! the visited path. Between real steps the subtree under the executed
//! action and received observation bin becomes the new root, and the root
//! belief is refilled by rejection with reinvigoration as a fallback.

mod belief;
pub mod toy;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use belief::ParticleBelief;

use crate::error::SolverError;

/// One sampled transition `(s', o, r)`.
#[derive(Debug, Clone)]
pub struct Step<S, O> {
    pub state: S,
    pub observation: O,
    pub reward: f64,
}

/// Black-box simulator the solver plans against.
pub trait GenerativeModel {
    type State: Clone;
    type Observation;
    /// Discretised observation identifying a child node.
    type ObsKey: Ord + Clone;
    /// Per-episode scratch state, e.g. an imagined coverage overlay.
    type Context;

    fn num_actions(&self) -> usize;

    fn discount(&self) -> f64;

    /// Upper bound on `|reward|` for a single step.
    fn max_abs_reward(&self) -> f64;

    fn begin_episode(&self) -> Self::Context;

    fn step<R: Rng + ?Sized>(
        &self,
        ctx: &mut Self::Context,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Step<Self::State, Self::Observation>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Whether `action` may be chosen from `state`. Search and rollouts
    /// only consider legal actions; when none is legal all are allowed.
    fn is_legal(&self, _state: &Self::State, _action: usize) -> bool {
        true
    }

    /// Default policy used beyond the tree frontier; `legal` is never all
    /// false. Uniform over the legal actions unless overridden.
    fn rollout_action<R: Rng + ?Sized>(&self, _state: &Self::State, legal: &[bool], rng: &mut R) -> usize {
        uniform_legal(legal, rng)
    }

    fn observation_key(&self, obs: &Self::Observation) -> Self::ObsKey;

    /// Conditions a simulated successor on a real observation. Returns the
    /// posterior state and an acceptance probability in `[0, 1]`.
    fn assimilate(&self, next: Self::State, action: usize, obs: &Self::Observation) -> (Self::State, f64);

    /// Proposes a fresh state consistent with `obs`, used when too few
    /// particles survive rejection.
    fn reinvigorate<R: Rng + ?Sized>(&self, action: usize, obs: &Self::Observation, rng: &mut R)
        -> Option<Self::State>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub episodes_per_step: usize,
    /// UCB1 exploration constant.
    pub ucb_c: f64,
    pub max_depth: usize,
    pub bootstrap_episodes: usize,
    pub particles: usize,
    /// Surviving fraction below which the belief is reinvigorated.
    pub reinvigoration_threshold: f64,
    /// Proposal attempts per missing particle during reinvigoration.
    pub reinvigoration_attempts: usize,
    /// Optional wall-clock budget per planning call, in seconds. Replaces
    /// the episode budget when set.
    pub time_budget: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            episodes_per_step: 4_000,
            ucb_c: 100.0,
            max_depth: 30,
            bootstrap_episodes: 16_000,
            particles: 2_000,
            reinvigoration_threshold: 0.1,
            reinvigoration_attempts: 20,
            time_budget: None,
        }
    }
}

impl SolverConfig {
    /// Reduced budgets for large simulated batches.
    pub fn desk() -> Self {
        Self {
            episodes_per_step: 300,
            max_depth: 5,
            bootstrap_episodes: 1_200,
            particles: 1_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.episodes_per_step == 0 || self.max_depth == 0 || self.particles == 0 {
            return Err("solver counts must be at least 1".into());
        }
        if !(self.ucb_c >= 0.0 && self.ucb_c.is_finite()) {
            return Err("ucb_c must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.reinvigoration_threshold) {
            return Err("reinvigoration_threshold must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Statistics for one action edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEdge<K> {
    pub visits: u64,
    /// Running mean of discounted returns through this edge.
    pub value: f64,
    pub children: BTreeMap<K, usize>,
}

impl<K> Default for ActionEdge<K> {
    fn default() -> Self {
        Self {
            visits: 0,
            value: 0.0,
            children: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode<S, K> {
    pub visits: u64,
    /// Particles, populated for the root only.
    pub belief: ParticleBelief<S>,
    pub actions: Vec<ActionEdge<K>>,
}

impl<S, K> BeliefNode<S, K> {
    fn new(num_actions: usize) -> Self {
        Self {
            visits: 0,
            belief: ParticleBelief::default(),
            actions: (0..num_actions).map(|_| ActionEdge::default()).collect(),
        }
    }
}

/// What happened when the root moved to the next real step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvanceReport {
    /// The matching child already existed and its statistics were kept.
    pub reused: bool,
    pub survival_fraction: f64,
    pub reinvigorated: usize,
}

/// Arena-backed search tree rooted at the current belief.
#[derive(Debug, Clone)]
pub struct BeliefTree<S, K> {
    nodes: Vec<BeliefNode<S, K>>,
    root: usize,
}

impl<S: Clone, K: Ord + Clone> BeliefTree<S, K> {
    pub fn new(belief: ParticleBelief<S>, num_actions: usize) -> Self {
        let mut root = BeliefNode::new(num_actions);
        root.belief = belief;
        Self {
            nodes: vec![root],
            root: 0,
        }
    }

    pub fn root(&self) -> &BeliefNode<S, K> {
        &self.nodes[self.root]
    }

    pub fn belief(&self) -> &ParticleBelief<S> {
        &self.nodes[self.root].belief
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `Q(a)` at the root, `None` for actions never tried.
    pub fn root_values(&self) -> Vec<Option<f64>> {
        self.root()
            .actions
            .iter()
            .map(|e| (e.visits > 0).then_some(e.value))
            .collect()
    }

    /// Greedy root action; ties go to the lowest index.
    pub fn best_action(&self) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (i, e) in self.root().actions.iter().enumerate() {
            if e.visits > 0 && e.value > best_value {
                best = i;
                best_value = e.value;
            }
        }
        best
    }

    fn select_ucb(&self, node: usize, c: f64, legal: &[bool]) -> usize {
        let n = &self.nodes[node];
        let allowed = |i: usize| legal.get(i).copied().unwrap_or(true);
        if let Some(untried) = (0..n.actions.len()).find(|&i| allowed(i) && n.actions[i].visits == 0) {
            return untried;
        }
        let log_n = (n.visits.max(1) as f64).ln();
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in n.actions.iter().enumerate() {
            if !allowed(i) || e.visits == 0 {
                continue;
            }
            let score = e.value + c * (log_n / e.visits as f64).sqrt();
            if best.is_none() || score > best_score {
                best = Some(i);
                best_score = score;
            }
        }
        best.unwrap_or(0)
    }

    fn simulate<M, R>(
        &mut self,
        node: usize,
        state: &S,
        depth: usize,
        model: &M,
        ctx: &mut M::Context,
        cfg: &SolverConfig,
        rng: &mut R,
    ) -> f64
    where
        M: GenerativeModel<State = S, ObsKey = K>,
        R: Rng + ?Sized,
    {
        if depth >= cfg.max_depth || model.is_terminal(state) {
            return 0.0;
        }
        let legal = legal_mask(model, state);
        let action = self.select_ucb(node, cfg.ucb_c, &legal);
        let step = model.step(ctx, state, action, rng);
        let key = model.observation_key(&step.observation);
        let future = match self.nodes[node].actions[action].children.get(&key).copied() {
            Some(child) => self.simulate(child, &step.state, depth + 1, model, ctx, cfg, rng),
            None => {
                let child = self.nodes.len();
                self.nodes.push(BeliefNode::new(model.num_actions()));
                self.nodes[node].actions[action].children.insert(key, child);
                rollout(model, ctx, step.state, depth + 1, cfg.max_depth, rng)
            }
        };
        let ret = step.reward + model.discount() * future;
        let n = &mut self.nodes[node];
        n.visits += 1;
        let edge = &mut n.actions[action];
        edge.visits += 1;
        edge.value += (ret - edge.value) / edge.visits as f64;
        ret
    }

    /// Runs one simulation from the root. Returns the backed-up return.
    pub fn run_episode<M, R>(&mut self, model: &M, cfg: &SolverConfig, rng: &mut R) -> Result<f64, SolverError>
    where
        M: GenerativeModel<State = S, ObsKey = K>,
        R: Rng + ?Sized,
    {
        let state = self.belief().sample(rng).cloned().ok_or(SolverError::BeliefCollapse)?;
        let mut ctx = model.begin_episode();
        let ret = self.simulate(self.root, &state, 0, model, &mut ctx, cfg, rng);
        let bound = return_bound(model.max_abs_reward(), model.discount(), cfg.max_depth);
        assert!(
            ret.abs() <= bound * (1.0 + 1e-9),
            "backed-up return {ret} exceeds bound {bound}"
        );
        Ok(ret)
    }

    /// Re-roots the tree at `child`, dropping everything outside its subtree.
    fn reroot(&mut self, child: usize) {
        let mut remap = BTreeMap::new();
        let mut order = vec![child];
        let mut i = 0;
        while i < order.len() {
            let id = order[i];
            remap.insert(id, i);
            for edge in &self.nodes[id].actions {
                order.extend(edge.children.values().copied());
            }
            i += 1;
        }
        let mut old: Vec<Option<BeliefNode<S, K>>> = std::mem::take(&mut self.nodes).into_iter().map(Some).collect();
        let mut nodes = Vec::with_capacity(order.len());
        for id in order {
            let mut node = old[id].take().expect("tree nodes form a tree");
            for edge in node.actions.iter_mut() {
                for target in edge.children.values_mut() {
                    *target = remap[target];
                }
            }
            nodes.push(node);
        }
        self.nodes = nodes;
        self.root = 0;
    }
}

/// Uniform draw among the actions marked legal.
pub fn uniform_legal<R: Rng + ?Sized>(legal: &[bool], rng: &mut R) -> usize {
    let count = legal.iter().filter(|&&l| l).count();
    if count == 0 {
        return rng.random_range(0..legal.len());
    }
    let k = rng.random_range(0..count);
    legal
        .iter()
        .enumerate()
        .filter(|(_, &l)| l)
        .nth(k)
        .map(|(i, _)| i)
        .expect("k is below the legal count")
}

/// Legality of every action from `state`; all true when nothing is legal.
fn legal_mask<M: GenerativeModel>(model: &M, state: &M::State) -> Vec<bool> {
    let mask: Vec<bool> = (0..model.num_actions()).map(|a| model.is_legal(state, a)).collect();
    if mask.iter().any(|&l| l) {
        mask
    } else {
        vec![true; mask.len()]
    }
}

/// Largest magnitude a discounted return over `depth` steps can reach.
pub fn return_bound(max_abs_reward: f64, discount: f64, depth: usize) -> f64 {
    if (1.0 - discount).abs() < 1e-12 {
        max_abs_reward * depth as f64
    } else {
        max_abs_reward * (1.0 - discount.powi(depth as i32)) / (1.0 - discount)
    }
}

fn rollout<M, R>(
    model: &M,
    ctx: &mut M::Context,
    mut state: M::State,
    mut depth: usize,
    max_depth: usize,
    rng: &mut R,
) -> f64
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    let gamma = model.discount();
    let mut ret = 0.0;
    let mut weight = 1.0;
    while depth < max_depth && !model.is_terminal(&state) {
        let legal = legal_mask(model, &state);
        let action = model.rollout_action(&state, &legal, rng);
        let step = model.step(ctx, &state, action, rng);
        ret += weight * step.reward;
        weight *= gamma;
        state = step.state;
        depth += 1;
    }
    ret
}

fn run_budget<M, R>(
    tree: &mut BeliefTree<M::State, M::ObsKey>,
    model: &M,
    episodes: usize,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<(), SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    #[cfg(not(target_arch = "wasm32"))]
    if let Some(seconds) = cfg.time_budget {
        let start = std::time::Instant::now();
        while start.elapsed().as_secs_f64() < seconds {
            tree.run_episode(model, cfg, rng)?;
        }
        return Ok(());
    }
    for _ in 0..episodes {
        tree.run_episode(model, cfg, rng)?;
    }
    Ok(())
}

/// Runs `episodes_per_step` simulations from the root and returns the
/// action with the highest estimated value.
pub fn plan_step<M, R>(
    tree: &mut BeliefTree<M::State, M::ObsKey>,
    model: &M,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<usize, SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    if tree.belief().is_empty() {
        return Err(SolverError::BeliefCollapse);
    }
    run_budget(tree, model, cfg.episodes_per_step, cfg, rng)?;
    Ok(tree.best_action())
}

/// Builds a tree over `belief` and warms it with `bootstrap_episodes`.
pub fn bootstrap<M, R>(
    model: &M,
    belief: ParticleBelief<M::State>,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<BeliefTree<M::State, M::ObsKey>, SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    if belief.is_empty() {
        return Err(SolverError::BeliefCollapse);
    }
    let mut tree = BeliefTree::new(belief, model.num_actions());
    run_budget(&mut tree, model, cfg.bootstrap_episodes, cfg, rng)?;
    Ok(tree)
}

/// Moves the root past a real `(action, observation)` pair, reusing the
/// matching subtree when it exists and refilling the belief.
pub fn advance_belief<M, R>(
    tree: &mut BeliefTree<M::State, M::ObsKey>,
    action: usize,
    observation: &M::Observation,
    model: &M,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<AdvanceReport, SolverError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    if action >= model.num_actions() {
        return Err(SolverError::InvalidAction(action));
    }
    let target = cfg.particles;
    let old = std::mem::take(&mut tree.nodes[tree.root].belief);
    let mut survivors = Vec::with_capacity(target);
    if !old.is_empty() {
        for _ in 0..target {
            let state = old.sample(rng).expect("non-empty belief");
            let mut ctx = model.begin_episode();
            let step = model.step(&mut ctx, state, action, rng);
            let (post, w) = model.assimilate(step.state, action, observation);
            if w > 0.0 && rng.random::<f64>() < w {
                survivors.push(post);
            }
        }
    }
    let survival_fraction = survivors.len() as f64 / target as f64;

    let mut reinvigorated = 0;
    if survival_fraction < cfg.reinvigoration_threshold {
        let mut attempts = target * cfg.reinvigoration_attempts.max(1);
        while survivors.len() < target && attempts > 0 {
            attempts -= 1;
            let Some(state) = model.reinvigorate(action, observation, rng) else {
                break;
            };
            let (post, w) = model.assimilate(state, action, observation);
            if w > 0.0 && rng.random::<f64>() < w {
                survivors.push(post);
                reinvigorated += 1;
            }
        }
    }
    if survivors.is_empty() {
        return Err(SolverError::BeliefCollapse);
    }
    let n = survivors.len();
    for _ in n..target {
        let pick = survivors[rng.random_range(0..n)].clone();
        survivors.push(pick);
    }

    let key = model.observation_key(observation);
    let child = tree.nodes[tree.root].actions[action].children.get(&key).copied();
    match child {
        Some(child) => tree.reroot(child),
        None => {
            tree.nodes = vec![BeliefNode::new(model.num_actions())];
            tree.root = 0;
        }
    }
    tree.nodes[tree.root].belief = ParticleBelief::new(survivors);
    Ok(AdvanceReport {
        reused: child.is_some(),
        survival_fraction,
        reinvigorated,
    })
}
