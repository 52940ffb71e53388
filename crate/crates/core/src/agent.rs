//! Deep-Q learner: replay memory, epsilon-greedy exploration, TD targets
//! and target-network synchronization.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamState, QNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer capacity", "must be >= 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != t.next_state.len() {
            return Err(Error::ShapeMismatch {
                context: "transition next_state",
                expected: t.state.len(),
                actual: t.next_state.len(),
            });
        }
        if !t.reward.is_finite() {
            return Err(Error::invalid("reward", format!("non-finite reward {}", t.reward)));
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `n` distinct transitions chosen uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// `eps(step) = eps_end + (eps_start - eps_end) * exp(-step / chi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub chi: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            eps_start: 0.9,
            eps_end: 0.1,
            chi: 200.0,
        }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(1.0 >= self.eps_start && self.eps_start >= self.eps_end && self.eps_end >= 0.0) {
            return Err(Error::invalid(
                "exploration",
                format!("need 1 >= eps_start >= eps_end >= 0, got ({}, {})", self.eps_start, self.eps_end),
            ));
        }
        if !(self.chi > 0.0) {
            return Err(Error::invalid("chi", format!("must be > 0, got {}", self.chi)));
        }
        Ok(())
    }

    pub fn epsilon(&self, global_step: u64) -> f64 {
        self.eps_end + (self.eps_start - self.eps_end) * (-(global_step as f64) / self.chi).exp()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(net: &QNetwork, state: &[f64]) -> Result<usize> {
    if state.len() != net.input_dim() {
        return Err(Error::ShapeMismatch {
            context: "state width",
            expected: net.input_dim(),
            actual: state.len(),
        });
    }
    Ok(argmax(&net.q_values(state)?))
}

/// Epsilon-greedy choice. Always consumes one uniform draw, plus one more
/// when exploring.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, state: &[f64], eps: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("eps", format!("must be in [0, 1], got {eps}")));
    }
    if rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..net.n_actions()));
    }
    greedy_action(net, state)
}

/// `r + gamma * max_a Q'(s', a)` per transition.
pub fn td_targets(batch: &[&Transition], target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma", format!("must be in [0, 1], got {gamma}")));
    }
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let next: Vec<f64> = batch.iter().flat_map(|t| t.next_state.iter().copied()).collect();
    let q = target.q_values(&next)?;
    Ok(batch
        .iter()
        .zip(q.chunks_exact(target.n_actions()))
        .map(|(t, row)| t.reward + gamma * row[argmax(row)])
        .collect())
}

/// Learning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerParams {
    pub batch_size: usize,
    pub gamma: f64,
    pub lr: f64,
    pub target_sync: u64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            batch_size: 128,
            gamma: 0.999,
            lr: 1e-3,
            target_sync: 3000,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", format!("must be in [0, 1], got {}", self.gamma)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr", format!("must be > 0, got {}", self.lr)));
        }
        if self.target_sync == 0 {
            return Err(Error::invalid("target_sync", "must be >= 1"));
        }
        Ok(())
    }
}

/// One gradient step on a uniformly sampled mini-batch. Returns `None`
/// without touching anything when the buffer holds fewer than
/// `batch_size` transitions.
#[allow(clippy::too_many_arguments)]
pub fn train_step<R: Rng + ?Sized>(
    policy: &mut QNetwork,
    target: &QNetwork,
    adam: &mut AdamState,
    buffer: &ReplayBuffer,
    batch_size: usize,
    gamma: f64,
    lr: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    if buffer.len() < batch_size || batch_size == 0 {
        return Ok(None);
    }
    let batch = buffer.sample(batch_size, rng);
    let targets = td_targets(&batch, target, gamma)?;
    let states: Vec<f64> = batch.iter().flat_map(|t| t.state.iter().copied()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (loss, grads) = policy.td_loss_and_gradients(&states, &actions, &targets)?;
    adam.step(policy.params_mut(), &grads, lr)?;
    Ok(Some(loss))
}

/// Copies the policy into the target when `global_step` is a multiple of
/// `delta`. Returns whether a copy happened.
pub fn maybe_sync_target(policy: &QNetwork, target: &mut QNetwork, global_step: u64, delta: u64) -> bool {
    if delta > 0 && global_step.is_multiple_of(delta) {
        target.clone_from(policy);
        true
    } else {
        false
    }
}

/// Policy and target networks with their optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: QNetwork,
    pub target: QNetwork,
    pub adam: AdamState,
    pub buffer: ReplayBuffer,
    pub schedule: ExplorationSchedule,
    pub learner: LearnerParams,
}

impl Agent {
    pub fn new(
        policy: QNetwork,
        buffer_capacity: usize,
        schedule: ExplorationSchedule,
        learner: LearnerParams,
    ) -> Result<Self> {
        schedule.validate()?;
        learner.validate()?;
        Ok(Agent {
            target: policy.clone(),
            adam: AdamState::new(policy.params().len()),
            buffer: ReplayBuffer::new(buffer_capacity)?,
            policy,
            schedule,
            learner,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], global_step: u64, rng: &mut R) -> Result<usize> {
        select_action(&self.policy, state, self.schedule.epsilon(global_step), rng)
    }

    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let p = self.learner;
        train_step(
            &mut self.policy,
            &self.target,
            &mut self.adam,
            &self.buffer,
            p.batch_size,
            p.gamma,
            p.lr,
            rng,
        )
    }

    pub fn maybe_sync_target(&mut self, global_step: u64) -> bool {
        maybe_sync_target(&self.policy, &mut self.target, global_step, self.learner.target_sync)
    }
}
