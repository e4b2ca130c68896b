//! Multi-round conversation sessions.
//!
//! [`Conversation`] is the turn-by-turn state machine: a policy proposes a
//! move, a responder answers it, the session state is updated. The batch
//! driver [`run_episode`], the policy trainer and the live session service
//! all step the same machine.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::ids::{AttributeId, ItemId, UserId};
use crate::policy::{
    discounted_return, encode_state, state_dim, Action, DqnConfig, DqnLearner, QNetwork,
    Rewards, StateVector, Transition, TurnEvent,
};
use crate::reasoner::{count_entropy, rank_attributes, rank_items, SessionState};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_MAX_TURNS: u32 = 15;

/// A system move awaiting the user's answer.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "ids", rename_all = "snake_case"))]
pub enum Move {
    Ask(AttributeId),
    Recommend(Vec<ItemId>),
}

impl Move {
    pub fn action(&self) -> Action {
        match self {
            Move::Ask(_) => Action::Ask,
            Move::Recommend(_) => Action::Recommend,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Answer {
    Accept,
    Reject,
}

impl Answer {
    pub fn from_bool(accept: bool) -> Self {
        if accept {
            Answer::Accept
        } else {
            Answer::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Answer::Accept
    }
}

/// A responder's reply; `Quit` ends the session as a failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reply {
    Answer(Answer),
    Quit,
}

/// Whoever answers the system: a simulator or a person.
pub trait Responder {
    fn answer_attribute(&mut self, p: AttributeId) -> Reply;
    fn answer_recommendation(&mut self, items: &[ItemId]) -> Reply;
}

/// One simulated session: user `user` wants `target` and opens with `initial`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeSpec {
    pub user: UserId,
    pub target: ItemId,
    pub initial: AttributeId,
    pub k: usize,
    pub max_turns: u32,
}

impl EpisodeSpec {
    pub fn new(user: UserId, target: ItemId, initial: AttributeId) -> Self {
        Self { user, target, initial, k: DEFAULT_TOP_K, max_turns: DEFAULT_MAX_TURNS }
    }

    pub fn validate(&self, g: &HeteroGraph) -> Result<()> {
        g.check_user(self.user)?;
        if !g.attributes_of_item(self.target)?.contains(self.initial) {
            return Err(Error::InvalidConfig(alloc::format!(
                "initial attribute {} is not an attribute of target {}",
                self.initial,
                self.target
            )));
        }
        if self.k == 0 || self.max_turns == 0 {
            return Err(Error::InvalidConfig("k and max_turns must be at least 1".into()));
        }
        Ok(())
    }
}

/// Simulated user whose preferences are anchored on one target item: it
/// confirms exactly the target's attributes and accepts exactly the lists
/// containing the target.
#[derive(Clone, Debug)]
pub struct Simulator<'g> {
    graph: &'g HeteroGraph,
    target: ItemId,
    k: usize,
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g HeteroGraph, spec: &EpisodeSpec) -> Self {
        Self { graph, target: spec.target, k: spec.k }
    }

    pub fn simulate_answer_attribute(&self, p: AttributeId) -> Answer {
        let has = self
            .graph
            .attributes_of_item(self.target)
            .map(|attrs| attrs.contains(p))
            .unwrap_or(false);
        Answer::from_bool(has)
    }

    pub fn simulate_answer_recommendation(&self, items: &[ItemId]) -> Result<Answer> {
        if items.len() > self.k {
            return Err(Error::ListTooLong { len: items.len(), k: self.k });
        }
        Ok(Answer::from_bool(items.contains(&self.target)))
    }
}

impl Responder for Simulator<'_> {
    fn answer_attribute(&mut self, p: AttributeId) -> Reply {
        Reply::Answer(self.simulate_answer_attribute(p))
    }

    fn answer_recommendation(&mut self, items: &[ItemId]) -> Reply {
        match self.simulate_answer_recommendation(items) {
            Ok(a) => Reply::Answer(a),
            Err(_) => Reply::Answer(Answer::Reject),
        }
    }
}

/// Everything a policy may look at when choosing a move.
pub struct DecisionContext<'a> {
    pub graph: &'a HeteroGraph,
    pub emb: &'a EmbeddingTable,
    pub state: &'a SessionState,
    pub history: &'a [TurnEvent],
    pub k: usize,
    pub max_turns: u32,
}

impl DecisionContext<'_> {
    pub fn state_vector(&self) -> Result<StateVector> {
        encode_state(self.state.candidate_items().len(), self.history, self.max_turns)
    }

    /// Top-k candidate items by item score.
    pub fn top_items(&self) -> Result<Vec<ItemId>> {
        Ok(rank_items(self.emb, self.state)?.top(self.k))
    }

    /// Turns an ask/recommend decision into a concrete move: ask the
    /// highest-entropy candidate attribute, or recommend the top-k items.
    /// Asking with no candidate attribute left falls back to recommending.
    pub fn realize(&self, action: Action) -> Result<Move> {
        if action == Action::Ask {
            if let Some(p) = rank_attributes(self.graph, self.emb, self.state)?.first() {
                return Ok(Move::Ask(p));
            }
        }
        Ok(Move::Recommend(self.top_items()?))
    }
}

pub trait Policy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move>;
}

/// Greedy Q-network consultation over weighted-entropy attribute ranking.
#[derive(Clone, Copy, Debug)]
pub struct Scpr<'n> {
    pub net: &'n QNetwork,
}

impl Policy for Scpr<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        let q = self.net.q_values(&ctx.state_vector()?)?;
        ctx.realize(crate::policy::greedy_action(q))
    }
}

/// Rule-based baseline: ask the attribute with the highest unweighted
/// entropy over the candidate items (anywhere in the graph), recommend once
/// the candidates fit in one list or nothing informative is left to ask.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxEntropy;

impl MaxEntropy {
    pub fn best_attribute(ctx: &DecisionContext<'_>) -> Result<Option<(AttributeId, f64)>> {
        let mut present = vec![false; ctx.graph.attribute_count()];
        for v in ctx.state.candidate_items().iter() {
            for p in ctx.graph.attributes_of_item(v)?.iter() {
                present[p.index()] = true;
            }
        }
        let mut best: Option<(AttributeId, f64)> = None;
        for (i, _) in present.iter().enumerate().filter(|(_, &m)| m) {
            let p = AttributeId(i as u32);
            if ctx.state.is_asked(p) {
                continue;
            }
            let h = count_entropy(ctx.graph, ctx.state, p)?;
            if h > 0.0 && best.is_none_or(|(_, b)| h > b) {
                best = Some((p, h));
            }
        }
        Ok(best)
    }
}

impl Policy for MaxEntropy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        if ctx.state.candidate_items().len() > ctx.k {
            if let Some((p, _)) = Self::best_attribute(ctx)? {
                return Ok(Move::Ask(p));
            }
        }
        Ok(Move::Recommend(ctx.top_items()?))
    }
}

/// Rule-based baseline that only ever recommends.
#[derive(Clone, Copy, Debug, Default)]
pub struct AbsGreedy;

impl Policy for AbsGreedy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        Ok(Move::Recommend(ctx.top_items()?))
    }
}

/// The policies compared in evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyKind {
    Scpr(QNetwork),
    MaxEntropy,
    AbsGreedy,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Scpr(_) => "scpr",
            PolicyKind::MaxEntropy => "max-entropy",
            PolicyKind::AbsGreedy => "abs-greedy",
        }
    }
}

impl Policy for &PolicyKind {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        match *self {
            PolicyKind::Scpr(net) => Scpr { net }.decide(ctx),
            PolicyKind::MaxEntropy => MaxEntropy.decide(ctx),
            PolicyKind::AbsGreedy => AbsGreedy.decide(ctx),
        }
    }
}

impl Policy for PolicyKind {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        (&*self).decide(ctx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FailureReason {
    /// The turn budget ran out.
    MaxTurns,
    /// Every candidate item was turned down.
    NoCandidates,
    /// The responder walked away.
    Aborted,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::MaxTurns => "max_turns",
            FailureReason::NoCandidates => "no_candidates",
            FailureReason::Aborted => "aborted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum Outcome {
    Success { turn: u32 },
    Failure { reason: FailureReason },
}

impl Outcome {
    pub fn success_turn(&self) -> Option<u32> {
        match self {
            Outcome::Success { turn } => Some(*turn),
            Outcome::Failure { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TurnRecord {
    /// 1-based turn number.
    pub turn: u32,
    #[cfg_attr(feature = "serde", serde(rename = "move"))]
    pub mv: Move,
    pub answer: Answer,
    pub event: TurnEvent,
    pub reward: f64,
    /// Candidate-set sizes after the answer was applied.
    pub candidate_items: usize,
    pub candidate_attributes: usize,
}

impl TurnRecord {
    pub fn action(&self) -> Action {
        self.mv.action()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub user: UserId,
    pub initial: AttributeId,
    pub turns: Vec<TurnRecord>,
    pub outcome: Outcome,
    pub path: Vec<AttributeId>,
    pub final_state: SessionState,
}

impl EpisodeLog {
    pub fn success_turn(&self) -> Option<u32> {
        self.outcome.success_turn()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.turns.iter().map(|t| t.reward).collect()
    }
}

/// The turn-by-turn session state machine.
#[derive(Clone, Debug)]
pub struct Conversation<'a> {
    graph: &'a HeteroGraph,
    emb: &'a EmbeddingTable,
    state: SessionState,
    history: Vec<TurnEvent>,
    turns: Vec<TurnRecord>,
    pending: Option<Move>,
    outcome: Option<Outcome>,
    k: usize,
    max_turns: u32,
    rewards: Rewards,
}

impl<'a> Conversation<'a> {
    pub fn start(
        graph: &'a HeteroGraph,
        emb: &'a EmbeddingTable,
        user: UserId,
        initial: AttributeId,
        k: usize,
        max_turns: u32,
        rewards: Rewards,
    ) -> Result<Self> {
        if k == 0 || max_turns == 0 {
            return Err(Error::InvalidConfig("k and max_turns must be at least 1".into()));
        }
        emb.user(user)?;
        let state = SessionState::init(graph, user, initial)?;
        Ok(Self {
            graph,
            emb,
            state,
            history: Vec::new(),
            turns: Vec::new(),
            pending: None,
            outcome: None,
            k,
            max_turns,
            rewards,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn history(&self) -> &[TurnEvent] {
        &self.history
    }

    pub fn turns(&self) -> &[TurnRecord] {
        &self.turns
    }

    pub fn pending(&self) -> Option<&Move> {
        self.pending.as_ref()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn max_turns(&self) -> u32 {
        self.max_turns
    }

    pub fn context(&self) -> DecisionContext<'_> {
        DecisionContext {
            graph: self.graph,
            emb: self.emb,
            state: &self.state,
            history: &self.history,
            k: self.k,
            max_turns: self.max_turns,
        }
    }

    pub fn state_vector(&self) -> Result<StateVector> {
        self.context().state_vector()
    }

    /// Asks the policy for the next move and holds it until answered.
    pub fn propose(&mut self, policy: &mut dyn Policy) -> Result<&Move> {
        if self.is_finished() {
            return Err(Error::ConversationFinished);
        }
        if self.pending.is_some() {
            return Err(Error::MovePending);
        }
        let mv = policy.decide(&self.context())?;
        self.check_move(&mv)?;
        Ok(self.pending.insert(mv))
    }

    fn check_move(&self, mv: &Move) -> Result<()> {
        match mv {
            Move::Ask(p) => {
                self.graph.check_attribute(*p)?;
                if self.state.is_asked(*p) {
                    return Err(Error::AlreadyAsked(*p));
                }
            }
            Move::Recommend(items) => {
                if items.is_empty() {
                    return Err(Error::EmptyCandidates);
                }
                if items.len() > self.k {
                    return Err(Error::ListTooLong { len: items.len(), k: self.k });
                }
                if let Some(&v) = items.iter().find(|&&v| !self.state.candidate_items().contains(v)) {
                    return Err(Error::NotCandidateItem(v));
                }
            }
        }
        Ok(())
    }

    /// Applies the user's reply to the pending move and closes the turn.
    pub fn answer(&mut self, reply: Reply) -> Result<Option<&TurnRecord>> {
        if self.is_finished() {
            return Err(Error::ConversationFinished);
        }
        let mv = self.pending.take().ok_or(Error::NoPendingMove)?;
        let answer = match reply {
            Reply::Quit => {
                self.outcome = Some(Outcome::Failure { reason: FailureReason::Aborted });
                return Ok(None);
            }
            Reply::Answer(a) => a,
        };

        let event = match (&mv, answer) {
            (Move::Ask(p), Answer::Accept) => {
                if self.state.candidate_attributes().contains(*p) {
                    self.state.accept_attribute(self.graph, *p)?;
                } else {
                    self.state.accept_any_attribute(self.graph, *p)?;
                }
                TurnEvent::AskAccepted
            }
            (Move::Ask(p), Answer::Reject) => {
                if self.state.candidate_attributes().contains(*p) {
                    self.state.reject_attribute(*p)?;
                } else {
                    self.state.reject_any_attribute(self.graph, *p)?;
                }
                TurnEvent::AskRejected
            }
            (Move::Recommend(_), Answer::Accept) => TurnEvent::RecAccepted,
            (Move::Recommend(items), Answer::Reject) => {
                self.state.reject_items(items)?;
                TurnEvent::RecRejected
            }
        };
        self.state.advance_turn();
        self.history.push(event);
        let turn = self.state.turn();

        let outcome = if event == TurnEvent::RecAccepted {
            Some(Outcome::Success { turn })
        } else if self.state.candidate_items().is_empty() {
            Some(Outcome::Failure { reason: FailureReason::NoCandidates })
        } else if turn >= self.max_turns {
            Some(Outcome::Failure { reason: FailureReason::MaxTurns })
        } else {
            None
        };
        let quit = matches!(outcome, Some(Outcome::Failure { .. }));
        self.outcome = outcome;

        self.turns.push(TurnRecord {
            turn,
            mv,
            answer,
            event,
            reward: self.rewards.reward_for(event, quit),
            candidate_items: self.state.candidate_items().len(),
            candidate_attributes: self.state.candidate_attributes().len(),
        });
        Ok(self.turns.last())
    }

    /// Consumes a finished conversation into its log.
    pub fn into_log(self) -> Result<EpisodeLog> {
        let outcome = self.outcome.ok_or(Error::InvalidConfig("conversation not finished".into()))?;
        Ok(EpisodeLog {
            user: self.state.user(),
            initial: self.state.path()[0],
            turns: self.turns,
            outcome,
            path: self.state.path().to_vec(),
            final_state: self.state,
        })
    }
}

fn ask_responder(responder: &mut dyn Responder, mv: &Move) -> Reply {
    match mv {
        Move::Ask(p) => responder.answer_attribute(*p),
        Move::Recommend(items) => responder.answer_recommendation(items),
    }
}

/// Runs one full session. When `record` is given, every turn is also
/// reported as a Q-learning transition.
pub fn run_episode(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policy: &mut dyn Policy,
    spec: &EpisodeSpec,
    responder: &mut dyn Responder,
    rewards: &Rewards,
    record: Option<&mut dyn FnMut(Transition)>,
) -> Result<EpisodeLog> {
    spec.validate(g)?;
    let conv = Conversation::start(g, emb, spec.user, spec.initial, spec.k, spec.max_turns, rewards.clone())?;
    drive(conv, policy, responder, record)
}

/// Steps a started conversation to the end.
pub fn drive(
    mut conv: Conversation<'_>,
    policy: &mut dyn Policy,
    responder: &mut dyn Responder,
    mut record: Option<&mut dyn FnMut(Transition)>,
) -> Result<EpisodeLog> {
    while !conv.is_finished() {
        let before = match record {
            Some(_) => Some(conv.state_vector()?),
            None => None,
        };
        let mv = conv.propose(policy)?.clone();
        let reply = ask_responder(responder, &mv);
        let Some(rec) = conv.answer(reply)? else {
            break;
        };
        if let (Some(sink), Some(state)) = (record.as_deref_mut(), before) {
            let (action, reward) = (rec.action(), rec.reward);
            let next = if conv.is_finished() { None } else { Some(conv.state_vector()?) };
            sink(Transition { state, action, reward, next });
        }
    }
    conv.into_log()
}

/// Simulated episode for `spec` with the anchored simulator.
pub fn simulate_episode(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policy: &mut dyn Policy,
    spec: &EpisodeSpec,
    rewards: &Rewards,
) -> Result<EpisodeLog> {
    let mut sim = Simulator::new(g, spec);
    run_episode(g, emb, policy, spec, &mut sim, rewards, None)
}

/// One episode spec per interaction whose item has attributes, with the
/// opening attribute drawn uniformly from the item's attributes.
pub fn episode_specs<R: Rng + ?Sized>(
    g: &HeteroGraph,
    interactions: &[(UserId, ItemId)],
    k: usize,
    max_turns: u32,
    rng: &mut R,
) -> Result<Vec<EpisodeSpec>> {
    let mut specs = Vec::with_capacity(interactions.len());
    for &(user, target) in interactions {
        let attrs = g.attributes_of_item(target)?;
        if let Some(&initial) = attrs.as_slice().choose(rng) {
            specs.push(EpisodeSpec { user, target, initial, k, max_turns });
        }
    }
    Ok(specs)
}

pub fn evaluate(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policy: &mut dyn Policy,
    specs: &[EpisodeSpec],
    rewards: &Rewards,
) -> Result<Vec<EpisodeLog>> {
    specs.iter().map(|s| simulate_episode(g, emb, policy, s, rewards)).collect()
}

/// ε-greedy consultation driven by a learner during training.
struct Exploring<'l, R: ?Sized> {
    learner: &'l mut DqnLearner,
    rng: &'l mut R,
}

impl<R: Rng + ?Sized> Policy for Exploring<'_, R> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Move> {
        let action = self.learner.act(&ctx.state_vector()?, self.rng)?;
        ctx.realize(action)
    }
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub network: QNetwork,
    /// Discounted return of each training episode.
    pub returns: Vec<f64>,
    /// Mean TD loss of the updates after each episode (`None` before the
    /// buffer first holds a full batch).
    pub losses: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainingSetup {
    pub episodes: usize,
    pub k: usize,
    pub max_turns: u32,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self { episodes: 2000, k: DEFAULT_TOP_K, max_turns: DEFAULT_MAX_TURNS }
    }
}

/// Trains the consultation network by deep Q-learning against the
/// simulator on `interactions` (the validation split).
pub fn train_policy<R: Rng + ?Sized>(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    interactions: &[(UserId, ItemId)],
    cfg: &DqnConfig,
    setup: TrainingSetup,
    rng: &mut R,
) -> Result<TrainingRun> {
    let pool: Vec<(UserId, ItemId)> = interactions
        .iter()
        .copied()
        .filter(|&(_, v)| g.attributes_of_item(v).map(|a| !a.is_empty()).unwrap_or(false))
        .collect();
    if pool.is_empty() {
        return Err(Error::Empty("validation interactions"));
    }
    let mut learner = DqnLearner::new(state_dim(setup.max_turns), cfg.clone(), rng)?;
    let mut returns = Vec::with_capacity(setup.episodes);
    let mut losses = Vec::with_capacity(setup.episodes);

    for episode in 0..setup.episodes {
        let &(user, target) = pool.choose(rng).expect("pool is non-empty");
        let initial = *g.attributes_of_item(target)?.as_slice().choose(rng).expect("item has attributes");
        let spec = EpisodeSpec { user, target, initial, k: setup.k, max_turns: setup.max_turns };

        let mut transitions = Vec::new();
        let log = {
            let mut sim = Simulator::new(g, &spec);
            let mut policy = Exploring { learner: &mut learner, rng: &mut *rng };
            let mut sink = |t: Transition| transitions.push(t);
            run_episode(g, emb, &mut policy, &spec, &mut sim, &cfg.rewards, Some(&mut sink))?
        };
        returns.push(discounted_return(&log.rewards(), cfg.gamma));

        let steps = transitions.len();
        for t in transitions {
            learner.buffer.push(t);
        }
        let mut total = 0.0;
        let mut updates = 0;
        for _ in 0..steps {
            if let Some(loss) = learner.learn(rng)? {
                total += loss;
                updates += 1;
            }
        }
        losses.push((updates > 0).then(|| total / updates as f64));

        if (episode + 1) % cfg.target_sync_every == 0 {
            learner.sync_target();
        }
    }
    Ok(TrainingRun { network: learner.net, returns, losses })
}
