//! User, item and attribute embeddings, the two bilinear scoring functions
//! built on them, and offline pairwise training.
//!
//! Item score: `f(u, v, P) = u·v + Σ_{p∈P} v·p`.
//! Attribute affinity (training objective only): `g(p | u, P) = u·p + Σ_{q∈P} p·q`.
//!
//! Both are trained jointly with a BPR-style loss `-ln σ(score⁺ − score⁻)`
//! over three sample pools: global item negatives, candidate-set item
//! negatives, and attribute negatives.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, VertexCounts};
use crate::ids::{AttributeId, AttributeSet, ItemId, UserId};
use crate::math::{dot, neg_log_sigmoid, sigmoid};

/// One row of the embedding table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmbeddingRow {
    User(UserId),
    Item(ItemId),
    Attribute(AttributeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    users: Vec<f64>,
    items: Vec<f64>,
    attributes: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(dim: usize, counts: VertexCounts) -> Self {
        Self {
            dim,
            users: vec![0.0; dim * counts.users as usize],
            items: vec![0.0; dim * counts.items as usize],
            attributes: vec![0.0; dim * counts.attributes as usize],
        }
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, counts: VertexCounts, scale: f64, rng: &mut R) -> Self {
        let mut table = Self::zeros(dim, counts);
        for x in table
            .users
            .iter_mut()
            .chain(table.items.iter_mut())
            .chain(table.attributes.iter_mut())
        {
            *x = rng.random_range(-scale..=scale);
        }
        table
    }

    /// Builds a table from row-major blocks.
    pub fn from_parts(dim: usize, users: Vec<f64>, items: Vec<f64>, attributes: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        for block in [&users, &items, &attributes] {
            if block.len() % dim != 0 {
                return Err(Error::DimensionMismatch { expected: dim, got: block.len() % dim });
            }
            if block.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding table"));
            }
        }
        Ok(Self { dim, users, items, attributes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user_count(&self) -> usize {
        self.users.len() / self.dim
    }

    pub fn item_count(&self) -> usize {
        self.items.len() / self.dim
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len() / self.dim
    }

    pub fn users_flat(&self) -> &[f64] {
        &self.users
    }

    pub fn items_flat(&self) -> &[f64] {
        &self.items
    }

    pub fn attributes_flat(&self) -> &[f64] {
        &self.attributes
    }

    /// Checks that the table covers every vertex of `g`.
    pub fn check_covers(&self, g: &HeteroGraph) -> Result<()> {
        let pairs = [
            (g.user_count(), self.user_count()),
            (g.item_count(), self.item_count()),
            (g.attribute_count(), self.attribute_count()),
        ];
        for (need, have) in pairs {
            if have < need {
                return Err(Error::DimensionMismatch { expected: need, got: have });
            }
        }
        Ok(())
    }

    pub fn user(&self, u: UserId) -> Result<&[f64]> {
        let d = self.dim;
        self.users.get(u.index() * d..(u.index() + 1) * d).ok_or(Error::UnknownUser(u))
    }

    pub fn item(&self, v: ItemId) -> Result<&[f64]> {
        let d = self.dim;
        self.items.get(v.index() * d..(v.index() + 1) * d).ok_or(Error::UnknownItem(v))
    }

    pub fn attribute(&self, p: AttributeId) -> Result<&[f64]> {
        let d = self.dim;
        self.attributes
            .get(p.index() * d..(p.index() + 1) * d)
            .ok_or(Error::UnknownAttribute(p))
    }

    pub fn row(&self, row: EmbeddingRow) -> Result<&[f64]> {
        match row {
            EmbeddingRow::User(u) => self.user(u),
            EmbeddingRow::Item(v) => self.item(v),
            EmbeddingRow::Attribute(p) => self.attribute(p),
        }
    }

    pub fn row_mut(&mut self, row: EmbeddingRow) -> Result<&mut [f64]> {
        let d = self.dim;
        let (block, i, err) = match row {
            EmbeddingRow::User(u) => (&mut self.users, u.index(), Error::UnknownUser(u)),
            EmbeddingRow::Item(v) => (&mut self.items, v.index(), Error::UnknownItem(v)),
            EmbeddingRow::Attribute(p) => (&mut self.attributes, p.index(), Error::UnknownAttribute(p)),
        };
        block.get_mut(i * d..(i + 1) * d).ok_or(err)
    }

    /// Appends a user row equal to the mean of all existing user rows and
    /// returns its id. Used for users the table has never seen.
    pub fn append_mean_user(&mut self) -> UserId {
        let n = self.user_count();
        let mut mean = vec![0.0; self.dim];
        for row in self.users.chunks_exact(self.dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        if n > 0 {
            mean.iter_mut().for_each(|m| *m /= n as f64);
        }
        self.users.extend_from_slice(&mean);
        UserId(n as u32)
    }

    /// `u·v + Σ_{p∈accepted} v·p`.
    pub fn score_item(&self, u: UserId, v: ItemId, accepted: &AttributeSet) -> Result<f64> {
        let vv = self.item(v)?;
        let mut s = dot(self.user(u)?, vv);
        for p in accepted.iter() {
            s += dot(vv, self.attribute(p)?);
        }
        Ok(s)
    }

    /// `u·p + Σ_{q∈accepted} p·q`. Only used as a training objective.
    pub fn score_attr_affinity(&self, u: UserId, p: AttributeId, accepted: &AttributeSet) -> Result<f64> {
        let pv = self.attribute(p)?;
        let mut s = dot(self.user(u)?, pv);
        for q in accepted.iter() {
            s += dot(pv, self.attribute(q)?);
        }
        Ok(s)
    }

    fn apply(&mut self, grad: &Gradient, lr: f64) -> Result<()> {
        for (row, g) in &grad.rows {
            let dst = self.row_mut(*row)?;
            for (x, gi) in dst.iter_mut().zip(g) {
                *x -= lr * gi;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub dim: usize,
    /// L2 coefficient on touched parameters.
    pub l2: f64,
    pub lr_item: f64,
    pub lr_attr: f64,
    pub epochs: usize,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            l2: 0.001,
            lr_item: 0.01,
            lr_attr: 0.001,
            epochs: 10,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if !(self.lr_item > 0.0 && self.lr_attr > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if self.l2.is_nan() || self.l2 < 0.0 || self.init_scale.is_nan() || self.init_scale < 0.0 {
            return Err(Error::InvalidConfig("l2 and init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Which negative pool an item sample came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemTask {
    /// Negative drawn from all items the user never interacted with.
    Global,
    /// Negative drawn from the current candidate set minus interacted items.
    Candidate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseItemSample {
    pub user: UserId,
    pub positive: ItemId,
    pub negative: ItemId,
    pub accepted: AttributeSet,
    pub task: ItemTask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseAttrSample {
    pub user: UserId,
    pub positive: AttributeId,
    pub negative: AttributeId,
    pub accepted: AttributeSet,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingCorpus {
    pub global: Vec<PairwiseItemSample>,
    pub candidate: Vec<PairwiseItemSample>,
    pub attribute: Vec<PairwiseAttrSample>,
}

impl TrainingCorpus {
    pub fn len(&self) -> usize {
        self.global.len() + self.candidate.len() + self.attribute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusReport {
    pub corpus: TrainingCorpus,
    /// Interactions whose item has no attributes; nothing was collected for them.
    pub skipped: Vec<(UserId, ItemId)>,
}

/// Replays simulated sessions over training interactions and collects
/// pairwise samples.
///
/// For every `(u, v)` and every choice of the opening attribute `p0 ∈ P_v`,
/// the remaining attributes of `v` are confirmed one at a time in a seeded
/// random order. At each confirmed prefix `P_u` this emits one global item
/// negative, one candidate-set item negative (when the pool is non-empty),
/// and one attribute negative per attribute of `v` not yet confirmed.
pub fn collect_training_corpus<R: Rng + ?Sized>(
    g: &HeteroGraph,
    interactions: &[(UserId, ItemId)],
    rng: &mut R,
) -> Result<CorpusReport> {
    let mut report = CorpusReport::default();
    let n_items = g.item_count();
    let n_attrs = g.attribute_count();

    for &(u, v) in interactions {
        let interacted = g.items_of_user(u)?;
        let item_attrs = g.attributes_of_item(v)?;
        if item_attrs.is_empty() {
            report.skipped.push((u, v));
            continue;
        }
        for p0 in item_attrs.iter() {
            let mut order: Vec<AttributeId> = item_attrs.iter().filter(|&p| p != p0).collect();
            order.shuffle(rng);
            order.insert(0, p0);

            let mut accepted = AttributeSet::new();
            for &p in &order {
                accepted.insert(p);

                if interacted.len() < n_items {
                    let negative = loop {
                        let cand = ItemId(rng.random_range(0..n_items as u32));
                        if !interacted.contains(cand) {
                            break cand;
                        }
                    };
                    report.corpus.global.push(PairwiseItemSample {
                        user: u,
                        positive: v,
                        negative,
                        accepted: accepted.clone(),
                        task: ItemTask::Global,
                    });
                }

                let pool = g.candidate_items(&accepted)?.difference(interacted);
                if !pool.is_empty() {
                    let negative = pool.as_slice()[rng.random_range(0..pool.len())];
                    report.corpus.candidate.push(PairwiseItemSample {
                        user: u,
                        positive: v,
                        negative,
                        accepted: accepted.clone(),
                        task: ItemTask::Candidate,
                    });
                }

                if item_attrs.len() < n_attrs {
                    for positive in item_attrs.iter().filter(|&q| !accepted.contains(q)) {
                        let negative = loop {
                            let cand = AttributeId(rng.random_range(0..n_attrs as u32));
                            if !item_attrs.contains(cand) {
                                break cand;
                            }
                        };
                        report.corpus.attribute.push(PairwiseAttrSample {
                            user: u,
                            positive,
                            negative,
                            accepted: accepted.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Sparse gradient over embedding rows; each row appears once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient {
    pub rows: Vec<(EmbeddingRow, Vec<f64>)>,
}

impl Gradient {
    fn add(&mut self, row: EmbeddingRow, scale: f64, v: &[f64]) {
        let slot = match self.rows.iter().position(|(r, _)| *r == row) {
            Some(i) => &mut self.rows[i].1,
            None => {
                self.rows.push((row, vec![0.0; v.len()]));
                &mut self.rows.last_mut().unwrap().1
            }
        };
        for (s, x) in slot.iter_mut().zip(v) {
            *s += scale * x;
        }
    }

    pub fn get(&self, row: EmbeddingRow) -> Option<&[f64]> {
        self.rows.iter().find(|(r, _)| *r == row).map(|(_, g)| g.as_slice())
    }

    fn is_finite(&self) -> bool {
        self.rows.iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }
}

/// Shared shape of both pairwise objectives: the anchor is the user row plus
/// the confirmed attribute rows, and the score difference is
/// `anchor · (pos − neg)`.
fn pairwise_loss_grad(
    emb: &EmbeddingTable,
    user: UserId,
    accepted: &AttributeSet,
    pos: EmbeddingRow,
    neg: EmbeddingRow,
    l2: f64,
    want_grad: bool,
) -> Result<(f64, Gradient)> {
    let d = emb.dim();
    let mut anchor = emb.user(user)?.to_vec();
    for p in accepted.iter() {
        for (a, x) in anchor.iter_mut().zip(emb.attribute(p)?) {
            *a += x;
        }
    }
    let (pv, nv) = (emb.row(pos)?, emb.row(neg)?);
    let diff: Vec<f64> = pv.iter().zip(nv).map(|(a, b)| a - b).collect();
    let delta = dot(&anchor, &diff);
    let mut loss = neg_log_sigmoid(delta);

    let mut touched = Vec::with_capacity(3 + accepted.len());
    touched.push(EmbeddingRow::User(user));
    touched.extend(accepted.iter().map(EmbeddingRow::Attribute));
    touched.push(pos);
    if neg != pos {
        touched.push(neg);
    }
    for &row in &touched {
        let r = emb.row(row)?;
        loss += l2 * dot(r, r);
    }

    let mut grad = Gradient::default();
    if want_grad {
        // d(-ln σ(Δ))/dΔ = -σ(-Δ)
        let g = -sigmoid(-delta);
        grad.add(EmbeddingRow::User(user), g, &diff);
        for p in accepted.iter() {
            grad.add(EmbeddingRow::Attribute(p), g, &diff);
        }
        grad.add(pos, g, &anchor);
        grad.add(neg, -g, &anchor);
        for &row in &touched {
            grad.add(row, 2.0 * l2, emb.row(row)?);
        }
        debug_assert!(grad.rows.iter().all(|(_, v)| v.len() == d));
    }
    Ok((loss, grad))
}

/// Per-sample objective (including the L2 term on the rows it touches)
/// and its gradient.
pub fn item_sample_loss_grad(emb: &EmbeddingTable, s: &PairwiseItemSample, l2: f64) -> Result<(f64, Gradient)> {
    pairwise_loss_grad(
        emb,
        s.user,
        &s.accepted,
        EmbeddingRow::Item(s.positive),
        EmbeddingRow::Item(s.negative),
        l2,
        true,
    )
}

pub fn attr_sample_loss_grad(emb: &EmbeddingTable, s: &PairwiseAttrSample, l2: f64) -> Result<(f64, Gradient)> {
    pairwise_loss_grad(
        emb,
        s.user,
        &s.accepted,
        EmbeddingRow::Attribute(s.positive),
        EmbeddingRow::Attribute(s.negative),
        l2,
        true,
    )
}

/// Total multi-task loss over the corpus: the item-pair terms, the
/// attribute-pair terms, and `l2 · ‖Θ‖²` over every row some sample touches.
pub fn pairwise_loss(emb: &EmbeddingTable, corpus: &TrainingCorpus, l2: f64) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let mut touched_users = vec![false; emb.user_count()];
    let mut touched_items = vec![false; emb.item_count()];
    let mut touched_attrs = vec![false; emb.attribute_count()];
    let mut mark = |row: EmbeddingRow| match row {
        EmbeddingRow::User(u) => touched_users.get_mut(u.index()).map(|m| *m = true),
        EmbeddingRow::Item(v) => touched_items.get_mut(v.index()).map(|m| *m = true),
        EmbeddingRow::Attribute(p) => touched_attrs.get_mut(p.index()).map(|m| *m = true),
    };

    let mut total = 0.0;
    let item_pairs = corpus.global.iter().chain(&corpus.candidate).map(|s| {
        (s.user, &s.accepted, EmbeddingRow::Item(s.positive), EmbeddingRow::Item(s.negative))
    });
    let attr_pairs = corpus.attribute.iter().map(|s| {
        (s.user, &s.accepted, EmbeddingRow::Attribute(s.positive), EmbeddingRow::Attribute(s.negative))
    });
    for (user, accepted, pos, neg) in item_pairs.chain(attr_pairs) {
        let (loss, _) = pairwise_loss_grad(emb, user, accepted, pos, neg, 0.0, false)?;
        total += loss;
        mark(EmbeddingRow::User(user));
        accepted.iter().for_each(|p| {
            mark(EmbeddingRow::Attribute(p));
        });
        mark(pos);
        mark(neg);
    }

    let mut reg = 0.0;
    let d = emb.dim();
    for (flags, block) in [
        (&touched_users, emb.users_flat()),
        (&touched_items, emb.items_flat()),
        (&touched_attrs, emb.attributes_flat()),
    ] {
        for (i, _) in flags.iter().enumerate().filter(|(_, &t)| t) {
            let r = &block[i * d..(i + 1) * d];
            reg += dot(r, r);
        }
    }
    Ok(total + l2 * reg)
}

/// One shuffled SGD pass. Item samples step with `lr_item`, attribute
/// samples with `lr_attr`. Returns the summed per-sample objective measured
/// before each step.
pub fn sgd_epoch<R: Rng + ?Sized>(
    emb: &mut EmbeddingTable,
    corpus: &TrainingCorpus,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let (n1, n2) = (corpus.global.len(), corpus.candidate.len());
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(rng);

    let mut epoch_loss = 0.0;
    for i in order {
        let (loss, grad, lr) = if i < n1 {
            let (l, g) = item_sample_loss_grad(emb, &corpus.global[i], cfg.l2)?;
            (l, g, cfg.lr_item)
        } else if i < n1 + n2 {
            let (l, g) = item_sample_loss_grad(emb, &corpus.candidate[i - n1], cfg.l2)?;
            (l, g, cfg.lr_item)
        } else {
            let (l, g) = attr_sample_loss_grad(emb, &corpus.attribute[i - n1 - n2], cfg.l2)?;
            (l, g, cfg.lr_attr)
        };
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite("pairwise gradient"));
        }
        emb.apply(&grad, lr)?;
        epoch_loss += loss;
    }
    Ok(epoch_loss)
}

/// Initializes a table and runs `cfg.epochs` SGD passes. Returns the table
/// and the per-epoch loss curve.
pub fn train_embeddings<R: Rng + ?Sized>(
    counts: VertexCounts,
    corpus: &TrainingCorpus,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    cfg.validate()?;
    let mut emb = EmbeddingTable::random(cfg.dim, counts, cfg.init_scale, rng);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        curve.push(sgd_epoch(&mut emb, corpus, cfg, rng)?);
    }
    Ok((emb, curve))
}
