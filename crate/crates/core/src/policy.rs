//! The ask-or-recommend decision: dialogue-state encoding, a two-layer
//! Q-network over exactly two actions, rewards, and deep Q-learning with
//! experience replay and a periodically synced target network.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// The policy's action space. It has exactly two members.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Action {
    Ask = 0,
    Recommend = 1,
}

pub const ACTION_COUNT: usize = 2;

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [Action::Ask, Action::Recommend];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Ask => "ask",
            Action::Recommend => "recommend",
        }
    }
}

/// What happened in one turn, from the system's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TurnEvent {
    AskAccepted,
    AskRejected,
    RecAccepted,
    RecRejected,
}

impl TurnEvent {
    /// Position of the event inside a history slot. Offset 0 is the
    /// "empty" category; unfilled slots stay all-zero.
    fn slot_offset(self) -> usize {
        match self {
            TurnEvent::AskAccepted => 1,
            TurnEvent::AskRejected => 2,
            TurnEvent::RecRejected => 3,
            // ends the session, so never part of a non-terminal state
            TurnEvent::RecAccepted => 0,
        }
    }

    pub fn action(self) -> Action {
        match self {
            TurnEvent::AskAccepted | TurnEvent::AskRejected => Action::Ask,
            TurnEvent::RecAccepted | TurnEvent::RecRejected => Action::Recommend,
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, TurnEvent::AskRejected | TurnEvent::RecRejected)
    }
}

pub const HISTORY_CATEGORIES: usize = 4;

/// Upper bounds of the candidate-count bins; the last bin is open-ended.
pub const SIZE_BIN_UPPER: [usize; 7] = [1, 4, 8, 16, 32, 64, 256];
pub const SIZE_BINS: usize = SIZE_BIN_UPPER.len() + 1;

/// Bin index for a candidate-set size, or `None` for an empty set.
pub fn size_bin(candidates: usize) -> Option<usize> {
    if candidates == 0 {
        return None;
    }
    Some(SIZE_BIN_UPPER.iter().position(|&hi| candidates <= hi).unwrap_or(SIZE_BINS - 1))
}

pub fn state_dim(max_turns: u32) -> usize {
    HISTORY_CATEGORIES * max_turns as usize + SIZE_BINS
}

/// History one-hots (one slot per turn) followed by the candidate-size one-hot.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encode_state(candidate_count: usize, history: &[TurnEvent], max_turns: u32) -> Result<StateVector> {
    let t = max_turns as usize;
    if history.len() > t {
        return Err(Error::HistoryTooLong { len: history.len(), max: t });
    }
    let mut s = vec![0.0; state_dim(max_turns)];
    for (i, ev) in history.iter().enumerate() {
        s[i * HISTORY_CATEGORIES + ev.slot_offset()] = 1.0;
    }
    if let Some(bin) = size_bin(candidate_count) {
        s[HISTORY_CATEGORIES * t + bin] = 1.0;
    }
    Ok(StateVector(s))
}

/// `input → hidden (ReLU) → 2` feed-forward value network.
///
/// Parameters are stored flat in the order `w1, b1, w2, b2`; `w1` is laid
/// out input-major (`w1[j * hidden + h]`) so sparse one-hot inputs touch
/// contiguous columns.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    q: [f64; ACTION_COUNT],
}

impl QNetwork {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        input * hidden + hidden + ACTION_COUNT * hidden + ACTION_COUNT
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { input, hidden, params: vec![0.0; Self::param_count(input, hidden)] }
    }

    /// Each layer uniform in `±1/sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input, hidden);
        let b_in = 1.0 / libm::sqrt(input as f64);
        let b_hid = 1.0 / libm::sqrt(hidden as f64);
        let first = input * hidden + hidden;
        for (i, w) in net.params.iter_mut().enumerate() {
            let b = if i < first { b_in } else { b_hid };
            *w = rng.random_range(-b..=b);
        }
        net
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(input, hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self { input, hidden, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        ACTION_COUNT
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.input * self.hidden);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(ACTION_COUNT * self.hidden);
        (w1, b1, w2, b2)
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.input * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + ACTION_COUNT * self.hidden;
        (b1, w2, b2)
    }

    fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.input {
            return Err(Error::DimensionMismatch { expected: self.input, got: x.len() });
        }
        let (w1, b1, w2, b2) = self.split();
        let hd = self.hidden;
        let mut pre = b1.to_vec();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (z, w) in pre.iter_mut().zip(&w1[j * hd..(j + 1) * hd]) {
                *z += w * xj;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
        let mut q = [0.0; ACTION_COUNT];
        for (a, qa) in q.iter_mut().enumerate() {
            *qa = b2[a] + crate::math::dot(&w2[a * hd..(a + 1) * hd], &hidden);
        }
        Ok(Forward { pre, hidden, q })
    }

    /// `(Q(s, ask), Q(s, recommend))`.
    pub fn q_values(&self, s: &StateVector) -> Result<[f64; ACTION_COUNT]> {
        Ok(self.forward(s.as_slice())?.q)
    }

    /// Copies `other`'s parameters into `self`.
    pub fn sync_from(&mut self, other: &QNetwork) {
        self.input = other.input;
        self.hidden = other.hidden;
        self.params.clone_from(&other.params);
    }
}

/// Highest-valued action; ties go to asking.
pub fn greedy_action(q: [f64; ACTION_COUNT]) -> Action {
    if q[Action::Recommend.index()] > q[Action::Ask.index()] {
        Action::Recommend
    } else {
        Action::Ask
    }
}

/// ε-greedy selection. With `epsilon == 0` the RNG is not touched.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, s: &StateVector, epsilon: f64, rng: &mut R) -> Result<Action> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(Action::ALL[rng.random_range(0..ACTION_COUNT)]);
    }
    Ok(greedy_action(net.q_values(s)?))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Rewards {
    pub rec_success: f64,
    pub rec_fail: f64,
    pub ask_success: f64,
    pub ask_fail: f64,
    pub quit: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            rec_success: 1.0,
            rec_fail: -0.1,
            ask_success: 0.01,
            ask_fail: -0.1,
            quit: -0.3,
        }
    }
}

impl Rewards {
    /// Reward for one turn. When the turn also exhausts the budget
    /// (`quit`), the quit penalty is added to the turn's own reward.
    pub fn reward_for(&self, event: TurnEvent, quit: bool) -> f64 {
        let base = match event {
            TurnEvent::RecAccepted => self.rec_success,
            TurnEvent::RecRejected => self.rec_fail,
            TurnEvent::AskAccepted => self.ask_success,
            TurnEvent::AskRejected => self.ask_fail,
        };
        if quit {
            base + self.quit
        } else {
            base
        }
    }
}

/// γ-discounted sum of a reward sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DqnConfig {
    pub batch: usize,
    pub gamma: f64,
    pub target_sync_every: usize,
    pub replay_capacity: usize,
    pub hidden: usize,
    pub lr: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Decay constant of the exploration schedule, in decisions.
    pub epsilon_decay: f64,
    pub rewards: Rewards,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            batch: 128,
            gamma: 0.999,
            target_sync_every: 20,
            replay_capacity: 50_000,
            hidden: 64,
            lr: 1e-4,
            rms_decay: 0.99,
            rms_eps: 1e-8,
            epsilon_start: 0.9,
            epsilon_end: 0.1,
            epsilon_decay: 1000.0,
            rewards: Rewards::default(),
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1]".into()));
        }
        if self.batch == 0 || self.batch > self.replay_capacity {
            return Err(Error::InvalidConfig("batch must be in 1..=replay_capacity".into()));
        }
        if self.hidden == 0 || self.target_sync_every == 0 {
            return Err(Error::InvalidConfig("hidden and target_sync_every must be positive".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }

    /// Exploration rate after `steps` decisions.
    pub fn epsilon(&self, steps: u64) -> f64 {
        self.epsilon_end
            + (self.epsilon_start - self.epsilon_end) * libm::exp(-(steps as f64) / self.epsilon_decay)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    /// `None` marks a terminal transition.
    pub next: Option<StateVector>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.next.is_none()
    }
}

/// Fixed-capacity FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)) }
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

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Mean squared TD error of a batch and its gradient with respect to the
/// online network's parameters. The target network is held fixed.
pub fn td_loss_grad(
    net: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let (_, _, w2, _) = net.split();
    let (o_b1, o_w2, o_b2) = net.offsets();
    let hd = net.hidden;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; net.params.len()];
    let mut loss = 0.0;

    for t in batch {
        let y = match &t.next {
            Some(next) => {
                let q = target.q_values(next)?;
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            None => t.reward,
        };
        let x = t.state.as_slice();
        let fwd = net.forward(x)?;
        let a = t.action.index();
        let err = fwd.q[a] - y;
        loss += err * err * scale;

        let g = 2.0 * err * scale;
        grad[o_b2 + a] += g;
        for h in 0..hd {
            grad[o_w2 + a * hd + h] += g * fwd.hidden[h];
        }
        for h in 0..hd {
            if fwd.pre[h] <= 0.0 {
                continue;
            }
            let dz = g * w2[a * hd + h];
            grad[o_b1 + h] += dz;
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    grad[j * hd + h] += dz * xj;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// RMSprop: `v ← ρv + (1−ρ)g²`, `θ ← θ − lr·g/(√v + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    sq: Vec<f64>,
}

impl RmsProp {
    pub fn new(params: usize) -> Self {
        Self { sq: vec![0.0; params] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &DqnConfig) {
        for ((p, g), v) in params.iter_mut().zip(grad).zip(self.sq.iter_mut()) {
            *v = cfg.rms_decay * *v + (1.0 - cfg.rms_decay) * g * g;
            *p -= cfg.lr * g / (libm::sqrt(*v) + cfg.rms_eps);
        }
    }
}

/// One optimizer step on the TD loss. Returns the pre-step loss.
pub fn td_update(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    cfg: &DqnConfig,
    opt: &mut RmsProp,
) -> Result<f64> {
    let (loss, grad) = td_loss_grad(net, target, batch, cfg.gamma)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("td loss"));
    }
    opt.step(&mut net.params, &grad, cfg);
    Ok(loss)
}

/// Online network, target network, optimizer state and replay memory,
/// owned by a single training loop.
#[derive(Clone, Debug)]
pub struct DqnLearner {
    pub net: QNetwork,
    pub target: QNetwork,
    pub buffer: ReplayBuffer,
    opt: RmsProp,
    cfg: DqnConfig,
    decisions: u64,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(input: usize, cfg: DqnConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let net = QNetwork::random(input, cfg.hidden, rng);
        Ok(Self::from_network(net, cfg))
    }

    pub fn from_network(net: QNetwork, cfg: DqnConfig) -> Self {
        assert_eq!(net.output_dim(), ACTION_COUNT);
        Self {
            target: net.clone(),
            opt: RmsProp::new(net.params.len()),
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            net,
            cfg,
            decisions: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon(self.decisions)
    }

    /// ε-greedy choice on the online network; advances the schedule.
    pub fn act<R: Rng + ?Sized>(&mut self, s: &StateVector, rng: &mut R) -> Result<Action> {
        let eps = self.epsilon();
        self.decisions += 1;
        select_action(&self.net, s, eps, rng)
    }

    /// Samples a batch and takes one step, if the buffer holds a full batch.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch, rng);
        let loss = td_update(&mut self.net, &self.target, &batch, &self.cfg, &mut self.opt)?;
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target.sync_from(&self.net);
    }
}
