//! Tiny fully-observable models with known optimal policies, used to check
//! the solver in isolation.

use rand::Rng;

use super::{GenerativeModel, Step};

/// Five-cell corridor. Entering `goal` pays `goal_reward` and ends the
/// episode; every other move costs `step_cost`. Actions: 0 = left,
/// 1 = stay, 2 = right.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub cells: usize,
    pub goal: usize,
    pub goal_reward: f64,
    pub step_cost: f64,
    pub discount: f64,
}

impl Default for ChainModel {
    fn default() -> Self {
        Self {
            cells: 5,
            goal: 3,
            goal_reward: 10.0,
            step_cost: -1.0,
            discount: 0.95,
        }
    }
}

impl ChainModel {
    pub const LEFT: usize = 0;
    pub const STAY: usize = 1;
    pub const RIGHT: usize = 2;

    /// Same chain with every reward multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            goal_reward: self.goal_reward * k,
            step_cost: self.step_cost * k,
            ..self.clone()
        }
    }

    pub fn next_cell(&self, cell: usize, action: usize) -> usize {
        match action {
            Self::LEFT => cell.saturating_sub(1),
            Self::RIGHT => (cell + 1).min(self.cells - 1),
            _ => cell,
        }
    }

    pub fn reward(&self, next: usize) -> f64 {
        if next == self.goal {
            self.goal_reward
        } else {
            self.step_cost
        }
    }
}

/// Chain position plus a terminal flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub cell: usize,
    pub done: bool,
}

impl GenerativeModel for ChainModel {
    type State = ChainState;
    type Observation = usize;
    type ObsKey = usize;
    type Context = ();

    fn num_actions(&self) -> usize {
        3
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn max_abs_reward(&self) -> f64 {
        self.goal_reward.abs().max(self.step_cost.abs())
    }

    fn begin_episode(&self) {}

    fn step<R: Rng + ?Sized>(&self, _: &mut (), s: &ChainState, action: usize, _: &mut R) -> Step<ChainState, usize> {
        let cell = self.next_cell(s.cell, action);
        Step {
            state: ChainState {
                cell,
                done: cell == self.goal,
            },
            observation: cell,
            reward: self.reward(cell),
        }
    }

    fn is_terminal(&self, s: &ChainState) -> bool {
        s.done
    }

    fn observation_key(&self, obs: &usize) -> usize {
        *obs
    }

    fn assimilate(&self, next: ChainState, _: usize, obs: &usize) -> (ChainState, f64) {
        let w = if next.cell == *obs { 1.0 } else { 0.0 };
        (next, w)
    }

    fn reinvigorate<R: Rng + ?Sized>(&self, _: usize, obs: &usize, _: &mut R) -> Option<ChainState> {
        Some(ChainState {
            cell: *obs,
            done: *obs == self.goal,
        })
    }
}

/// Single-state bandit. Each action draws its reward from a finite
/// distribution of `(probability, reward)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditModel {
    pub arms: Vec<Vec<(f64, f64)>>,
    pub discount: f64,
}

impl BanditModel {
    pub fn new(arms: Vec<Vec<(f64, f64)>>) -> Self {
        Self { arms, discount: 0.0 }
    }
}

impl GenerativeModel for BanditModel {
    type State = ();
    type Observation = ();
    type ObsKey = ();
    type Context = ();

    fn num_actions(&self) -> usize {
        self.arms.len()
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn max_abs_reward(&self) -> f64 {
        self.arms.iter().flatten().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }

    fn begin_episode(&self) {}

    fn step<R: Rng + ?Sized>(&self, _: &mut (), _: &(), action: usize, rng: &mut R) -> Step<(), ()> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let arm = &self.arms[action];
        let mut reward = arm.last().map(|&(_, r)| r).unwrap_or(0.0);
        for &(p, r) in arm {
            acc += p;
            if u < acc {
                reward = r;
                break;
            }
        }
        Step {
            state: (),
            observation: (),
            reward,
        }
    }

    fn is_terminal(&self, _: &()) -> bool {
        false
    }

    fn observation_key(&self, _: &()) {}

    fn assimilate(&self, next: (), _: usize, _: &()) -> ((), f64) {
        (next, 1.0)
    }

    fn reinvigorate<R: Rng + ?Sized>(&self, _: usize, _: &(), _: &mut R) -> Option<()> {
        Some(())
    }
}
