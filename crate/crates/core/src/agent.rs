//! Per-agent learning state: the goal-conditioned state encoding, the
//! experience buffer, and the actor-critic pair with its target networks.
//!
//! The actor maps a state encoding to five action logits; the critic scores
//! a state paired with a one-hot action. Updates follow the usual deep
//! deterministic-style recipe — sample a minibatch, regress the critic on
//! bootstrapped targets from the target networks, push the policy along the
//! advantage-weighted log-likelihood with an entropy bonus, then Polyak-blend
//! the targets.

use std::collections::VecDeque;

use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{ActionKind, Position};
use crate::nn::{self, Adam, DenseNet, NnError, ParamVector, Workspace};

/// Width of both hidden layers in every actor and critic.
pub const HIDDEN_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("networks disagree with the expected shapes: {0}")]
    BadArchitecture(String),
    #[error(transparent)]
    Net(#[from] NnError),
}

/// Learning hyperparameters for one agent.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgentConfig {
    /// Discount factor.
    pub gamma: f64,
    /// Entropy bonus coefficient in the actor loss.
    pub beta: f64,
    /// Polyak rate for target-network updates.
    pub tau: f64,
    /// Minibatch size drawn from the replay buffer each step.
    pub batch_size: usize,
    /// Replay buffer capacity; the oldest transitions fall out first.
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            beta: 0.01,
            tau: 0.01,
            batch_size: 64,
            buffer_capacity: 100_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |msg: String| Err(AgentError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} outside [0, 1]", self.gamma));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta = {} is negative", self.beta));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau = {} outside (0, 1]", self.tau));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be positive".into());
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }
}

/// Encodes a position and goal identity as network input: the coordinates
/// normalized to `[0, 1]`, then a one-hot goal indicator.
pub fn encode_state(
    pos: Position,
    width: u32,
    height: u32,
    goal_id: usize,
    goal_count: usize,
) -> Vec<f64> {
    debug_assert!(goal_id < goal_count);
    let norm = |v: u32, extent: u32| {
        if extent > 1 {
            v as f64 / (extent - 1) as f64
        } else {
            0.0
        }
    };
    let mut s = Vec::with_capacity(2 + goal_count);
    s.push(norm(pos.x, width));
    s.push(norm(pos.y, height));
    for g in 0..goal_count {
        s.push(if g == goal_id { 1.0 } else { 0.0 });
    }
    s
}

/// One experienced step. `terminal` marks goal arrival, the only absorbing
/// outcome; running out of episode budget is not terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: ActionKind,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO experience store.
#[derive(Clone, Debug, Default)]
pub struct ReplayBuffer {
    data: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay buffer needs positive capacity");
        ReplayBuffer {
            data: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Appends a transition, evicting the oldest one once full.
    pub fn push(&mut self, t: Transition) {
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(t);
    }

    /// Indices for a minibatch of size `n`: drawn with replacement while the
    /// buffer holds fewer than `n` transitions, without replacement once it
    /// can supply distinct ones.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>, AgentError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.data.is_empty() {
            return Err(AgentError::EmptyBuffer);
        }
        if self.data.len() < n {
            Ok((0..n).map(|_| rng.gen_range(0..self.data.len())).collect())
        } else {
            Ok(rand::seq::index::sample(rng, self.data.len(), n).into_vec())
        }
    }

    /// Clones out a minibatch; see [`ReplayBuffer::sample_indices`].
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Transition>, AgentError> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| self.data[i].clone())
            .collect())
    }
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    ws: Workspace,
    target_ws: Workspace,
    critic_in: Vec<f64>,
    targets: Vec<f64>,
    grad: Vec<f64>,
    out_grad: Vec<f64>,
    probs: Vec<f64>,
}

/// A single agent's four networks, optimizers, and hyperparameters.
///
/// The online actor/critic learn every step; their target copies trail via
/// Polyak averaging and supply the bootstrap targets.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    goal_id: usize,
    cfg: AgentConfig,
    actor: DenseNet,
    critic: DenseNet,
    target_actor: DenseNet,
    target_critic: DenseNet,
    actor_opt: Adam,
    critic_opt: Adam,
    scratch: Scratch,
}

impl ActorCritic {
    /// Fresh agent for `state_dim`-dimensional encodings. The actor is
    /// `[state_dim, 64, 64, 5]`, the critic `[state_dim + 5, 64, 64, 1]`
    /// (state features concatenated with a one-hot action). Targets start as
    /// exact copies of the online networks.
    pub fn new(
        state_dim: usize,
        goal_id: usize,
        cfg: AgentConfig,
        seed: u64,
    ) -> Result<ActorCritic, AgentError> {
        cfg.validate()?;
        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let actor_seed = seeder.next_u64();
        let critic_seed = seeder.next_u64();
        let actor = DenseNet::init(
            &[state_dim, HIDDEN_DIM, HIDDEN_DIM, ActionKind::COUNT],
            actor_seed,
        )?;
        let critic = DenseNet::init(
            &[state_dim + ActionKind::COUNT, HIDDEN_DIM, HIDDEN_DIM, 1],
            critic_seed,
        )?;
        Self::from_nets(actor.clone(), critic.clone(), actor, critic, goal_id, cfg)
    }

    /// Assembles an agent from explicit networks (used by evaluation and by
    /// tests that need crafted weights). Shape consistency is enforced.
    pub fn from_nets(
        actor: DenseNet,
        critic: DenseNet,
        target_actor: DenseNet,
        target_critic: DenseNet,
        goal_id: usize,
        cfg: AgentConfig,
    ) -> Result<ActorCritic, AgentError> {
        cfg.validate()?;
        let arch = |msg: String| Err(AgentError::BadArchitecture(msg));
        if actor.output_dim() != ActionKind::COUNT {
            return arch(format!("actor outputs {}", actor.output_dim()));
        }
        if critic.output_dim() != 1 {
            return arch(format!("critic outputs {}", critic.output_dim()));
        }
        if critic.input_dim() != actor.input_dim() + ActionKind::COUNT {
            return arch(format!(
                "critic consumes {} inputs, expected state {} + one-hot action {}",
                critic.input_dim(),
                actor.input_dim(),
                ActionKind::COUNT
            ));
        }
        if target_actor.dims() != actor.dims() || target_critic.dims() != critic.dims() {
            return arch("target networks must mirror the online shapes".into());
        }
        let actor_opt = Adam::new(cfg.actor_lr, actor.param_count());
        let critic_opt = Adam::new(cfg.critic_lr, critic.param_count());
        Ok(ActorCritic {
            goal_id,
            cfg,
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            scratch: Scratch::default(),
        })
    }

    pub fn goal_id(&self) -> usize {
        self.goal_id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNet {
        &self.critic
    }

    pub fn target_actor(&self) -> &DenseNet {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &DenseNet {
        &self.target_critic
    }

    /// Snapshot of all four parameter vectors, in the order actor, critic,
    /// target actor, target critic.
    pub fn all_params(&self) -> [ParamVector; 4] {
        [
            self.actor.flatten(),
            self.critic.flatten(),
            self.target_actor.flatten(),
            self.target_critic.flatten(),
        ]
    }

    /// Replaces all four parameter vectors (same order as
    /// [`ActorCritic::all_params`]).
    pub fn set_all_params(&mut self, params: [&[f64]; 4]) -> Result<(), AgentError> {
        self.actor.set_params(params[0])?;
        self.critic.set_params(params[1])?;
        self.target_actor.set_params(params[2])?;
        self.target_critic.set_params(params[3])?;
        Ok(())
    }

    /// The policy distribution over the five actions at `state`.
    pub fn policy(&self, state: &[f64]) -> Vec<f64> {
        nn::softmax(&self.actor.forward(state))
    }

    /// Samples an action from the softmax policy.
    pub fn select_action(&mut self, state: &[f64], rng: &mut impl Rng) -> ActionKind {
        let logits = self.actor.forward_ws(state, &mut self.scratch.ws);
        self.scratch.probs.resize(logits.len(), 0.0);
        nn::softmax_into(logits, &mut self.scratch.probs);
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (i, &p) in self.scratch.probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return ActionKind::from_index(i).unwrap();
            }
        }
        ActionKind::from_index(ActionKind::COUNT - 1).unwrap()
    }

    /// The argmax policy action; ties resolve to the lowest action index.
    pub fn greedy_action(&self, state: &[f64]) -> ActionKind {
        ActionKind::from_index(nn::argmax(&self.actor.forward(state))).unwrap()
    }

    fn critic_input(state: &[f64], action: ActionKind, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(state);
        for i in 0..ActionKind::COUNT {
            buf.push(if i == action.index() { 1.0 } else { 0.0 });
        }
    }

    /// Bootstrap target for one transition: the reward alone when terminal,
    /// otherwise `r + gamma * Q'(s', a*)` where `a*` is the target actor's
    /// greedy action at `s'` and `Q'` the target critic.
    pub fn td_target(&self, reward: f64, next_state: &[f64], terminal: bool) -> f64 {
        if terminal {
            return reward;
        }
        let probs = nn::softmax(&self.target_actor.forward(next_state));
        let a_star = ActionKind::from_index(nn::argmax(&probs)).unwrap();
        let mut input = Vec::new();
        Self::critic_input(next_state, a_star, &mut input);
        let q = self.target_critic.forward(&input)[0];
        reward + self.cfg.gamma * q
    }

    /// Fills `scratch.targets` with TD targets for the whole batch. Targets
    /// depend only on the target networks, so they remain valid across the
    /// critic and actor updates of the same step.
    fn compute_targets(&mut self, batch: &[&Transition]) {
        let scratch = &mut self.scratch;
        scratch.targets.clear();
        for tr in batch {
            let y = if tr.terminal {
                tr.reward
            } else {
                let logits = self
                    .target_actor
                    .forward_ws(&tr.next_state, &mut scratch.target_ws);
                scratch.probs.resize(logits.len(), 0.0);
                nn::softmax_into(logits, &mut scratch.probs);
                let a_star = ActionKind::from_index(nn::argmax(&scratch.probs)).unwrap();
                Self::critic_input(&tr.next_state, a_star, &mut scratch.critic_in);
                let q = self
                    .target_critic
                    .forward_ws(&scratch.critic_in, &mut scratch.target_ws)[0];
                tr.reward + self.cfg.gamma * q
            };
            scratch.targets.push(y);
        }
    }

    /// Computes the critic loss and accumulates its parameter gradient into
    /// `scratch.grad`, assuming `scratch.targets` is current.
    fn critic_loss_grad(&mut self, batch: &[&Transition]) -> f64 {
        let n = batch.len() as f64;
        let scratch = &mut self.scratch;
        scratch.grad.clear();
        scratch.grad.resize(self.critic.param_count(), 0.0);
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(&scratch.targets) {
            Self::critic_input(&tr.state, tr.action, &mut scratch.critic_in);
            let q = self.critic.forward_ws(&scratch.critic_in, &mut scratch.ws)[0];
            let err = y - q;
            loss += err * err / n;
            // d/dq of (y - q)^2 / n.
            let out_grad = [-2.0 * err / n];
            self.critic
                .backprop_ws(&mut scratch.ws, &out_grad, 1.0, &mut scratch.grad);
        }
        loss
    }

    fn critic_update_inner(&mut self, batch: &[&Transition]) -> f64 {
        let loss = self.critic_loss_grad(batch);
        self.critic_opt
            .step(self.critic.params_mut(), &self.scratch.grad);
        loss
    }

    /// Computes the entropy-regularized policy loss and accumulates its
    /// parameter gradient into `scratch.grad`, assuming `scratch.targets`
    /// is current.
    fn actor_loss_grad(&mut self, batch: &[&Transition]) -> f64 {
        let n = batch.len() as f64;
        let beta = self.cfg.beta;
        let scratch = &mut self.scratch;
        scratch.grad.clear();
        scratch.grad.resize(self.actor.param_count(), 0.0);
        scratch.out_grad.resize(ActionKind::COUNT, 0.0);
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(&scratch.targets) {
            Self::critic_input(&tr.state, tr.action, &mut scratch.critic_in);
            let q = self
                .critic
                .forward_ws(&scratch.critic_in, &mut scratch.target_ws)[0];
            // The advantage estimate is treated as a constant for the
            // gradient; only the log-policy and entropy terms carry it.
            let adv = y - q;
            let logits = self.actor.forward_ws(&tr.state, &mut scratch.ws);
            scratch.probs.resize(logits.len(), 0.0);
            nn::softmax_into(logits, &mut scratch.probs);
            let p = &scratch.probs;
            let h = nn::entropy(p);
            let a = tr.action.index();
            loss += -(p[a].max(f64::MIN_POSITIVE).ln() * adv + beta * h) / n;
            for (k, og) in scratch.out_grad.iter_mut().enumerate() {
                let indicator = if k == a { 1.0 } else { 0.0 };
                let ent_term = if p[k] > 0.0 {
                    p[k] * (p[k].ln() + h)
                } else {
                    0.0
                };
                *og = (-adv * (indicator - p[k]) + beta * ent_term) / n;
            }
            self.actor
                .backprop_ws(&mut scratch.ws, &scratch.out_grad, 1.0, &mut scratch.grad);
        }
        loss
    }

    fn actor_update_inner(&mut self, batch: &[&Transition]) -> f64 {
        let loss = self.actor_loss_grad(batch);
        self.actor_opt
            .step(self.actor.params_mut(), &self.scratch.grad);
        loss
    }

    /// Critic loss and its analytic gradient at the current parameters,
    /// without taking an optimizer step. The gradient is laid out in the
    /// critic network's flattened parameter order.
    pub fn critic_loss_and_grad(&mut self, batch: &[&Transition]) -> (f64, Vec<f64>) {
        assert!(!batch.is_empty(), "empty minibatch");
        self.compute_targets(batch);
        let loss = self.critic_loss_grad(batch);
        (loss, self.scratch.grad.clone())
    }

    /// Entropy-regularized policy loss and its analytic gradient at the
    /// current parameters, without taking an optimizer step. The gradient is
    /// laid out in the actor network's flattened parameter order.
    pub fn actor_loss_and_grad(&mut self, batch: &[&Transition]) -> (f64, Vec<f64>) {
        assert!(!batch.is_empty(), "empty minibatch");
        self.compute_targets(batch);
        let loss = self.actor_loss_grad(batch);
        (loss, self.scratch.grad.clone())
    }

    /// One critic regression step on `batch`; returns the loss *before* the
    /// optimizer step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> f64 {
        assert!(!batch.is_empty(), "empty minibatch");
        self.compute_targets(batch);
        self.critic_update_inner(batch)
    }

    /// One policy-gradient step on `batch`; returns the entropy-regularized
    /// loss *before* the optimizer step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> f64 {
        assert!(!batch.is_empty(), "empty minibatch");
        self.compute_targets(batch);
        self.actor_update_inner(batch)
    }

    /// Critic update followed by actor update on the same minibatch,
    /// computing the shared TD targets once. Bit-for-bit equivalent to
    /// calling [`ActorCritic::critic_update`] then
    /// [`ActorCritic::actor_update`].
    pub fn learn_step(&mut self, batch: &[&Transition]) -> (f64, f64) {
        assert!(!batch.is_empty(), "empty minibatch");
        self.compute_targets(batch);
        let critic_loss = self.critic_update_inner(batch);
        let actor_loss = self.actor_update_inner(batch);
        (critic_loss, actor_loss)
    }

    /// Polyak update of both target networks toward their online twins.
    pub fn soft_update_targets(&mut self) {
        nn::soft_update(&mut self.target_actor, &self.actor, self.cfg.tau);
        nn::soft_update(&mut self.target_critic, &self.critic, self.cfg.tau);
    }
}
