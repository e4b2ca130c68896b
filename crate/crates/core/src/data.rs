//! Interaction splits, attribute pruning and the synthetic graph generator.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, HeteroGraph, VertexCounts};
use crate::ids::{AttributeId, ItemId, UserId, VertexId, VertexKind};

pub type Interaction = (UserId, ItemId);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InteractionSplit {
    pub train: Vec<Interaction>,
    pub validation: Vec<Interaction>,
    pub test: Vec<Interaction>,
}

impl InteractionSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [7.0, 1.5, 1.5];

/// Shuffles the interactions and cuts them into train / validation / test.
///
/// The train share is rounded down; the remainder is divided between
/// validation and test by their ratio, rounding validation down. Each part
/// keeps at least one interaction.
pub fn split_interactions<R: Rng + ?Sized>(
    interactions: &[Interaction],
    ratios: [f64; 3],
    rng: &mut R,
) -> Result<InteractionSplit> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidConfig("split ratios must be positive".into()));
    }
    let n = interactions.len();
    if n < 3 {
        return Err(Error::InvalidConfig(alloc::format!("need at least 3 interactions to split, got {n}")));
    }
    let total: f64 = ratios.iter().sum();
    let train = ((n as f64 * ratios[0] / total) as usize).clamp(1, n - 2);
    let rest = n - train;
    let validation = ((rest as f64 * ratios[1] / (ratios[1] + ratios[2])) as usize).clamp(1, rest - 1);

    let mut shuffled = interactions.to_vec();
    shuffled.shuffle(rng);
    let test = shuffled.split_off(train + validation);
    let validation = shuffled.split_off(train);
    Ok(InteractionSplit { train: shuffled, validation, test })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub graph: HeteroGraph,
    /// `kept[new]` is the original id of each surviving attribute.
    pub kept: Vec<AttributeId>,
}

/// Drops attributes carried by fewer than `min_freq` items, together with
/// all of their edges, and renumbers the survivors densely in their
/// original order.
pub fn prune_rare_attributes(g: &HeteroGraph, min_freq: usize) -> Result<Pruned> {
    if min_freq == 0 {
        return Err(Error::InvalidConfig("min_freq must be at least 1".into()));
    }
    let mut remap = vec![None; g.attribute_count()];
    let mut kept = Vec::new();
    for (i, slot) in remap.iter_mut().enumerate() {
        let p = AttributeId(i as u32);
        if g.items_with_attribute(p)?.len() >= min_freq {
            *slot = Some(kept.len() as u32);
            kept.push(p);
        }
    }
    let renumber = |v: VertexId| -> Option<VertexId> {
        match v.kind {
            VertexKind::Attribute => remap[v.index as usize].map(VertexId::attribute),
            _ => Some(v),
        }
    };
    let edges: Vec<EdgeRecord> = g
        .edges()
        .iter()
        .filter_map(|e| Some(EdgeRecord::new(e.relation, renumber(e.head)?, renumber(e.tail)?)))
        .collect();
    let counts = VertexCounts { attributes: kept.len() as u32, ..g.counts() };
    Ok(Pruned { graph: HeteroGraph::build(counts, &edges)?, kept })
}

/// Planted-preference generator settings.
///
/// Attribute popularity follows a power law, so some attributes cover a
/// large share of the catalogue. Every user favors a few attributes; most of
/// their interactions go to items carrying at least one of them.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SyntheticSpec {
    pub users: u32,
    pub items: u32,
    pub attributes: u32,
    pub min_attributes_per_item: u32,
    pub max_attributes_per_item: u32,
    pub interactions_per_user: u32,
    pub favored_per_user: u32,
    /// Probability that an interaction is drawn from the favored items.
    pub preference_bias: f64,
    /// Exponent of the attribute popularity power law; 0 is uniform.
    pub popularity_exponent: f64,
    pub friends_per_user: u32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 500,
            attributes: 60,
            min_attributes_per_item: 3,
            max_attributes_per_item: 6,
            interactions_per_user: 20,
            favored_per_user: 3,
            preference_bias: 0.8,
            popularity_exponent: 1.5,
            friends_per_user: 2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.users == 0 || self.items == 0 || self.attributes == 0 {
            return bad("users, items and attributes must be non-zero");
        }
        if self.min_attributes_per_item == 0 || self.min_attributes_per_item > self.max_attributes_per_item {
            return bad("attributes per item must satisfy 1 <= min <= max");
        }
        if self.max_attributes_per_item > self.attributes {
            return bad("max attributes per item exceeds the attribute count");
        }
        if self.interactions_per_user == 0 || self.interactions_per_user > self.items {
            return bad("interactions per user must be in 1..=items");
        }
        if self.favored_per_user == 0 || self.favored_per_user > self.attributes {
            return bad("favored attributes per user must be in 1..=attributes");
        }
        if !(0.0..=1.0).contains(&self.preference_bias) {
            return bad("preference bias must lie in [0, 1]");
        }
        if !(self.popularity_exponent.is_finite() && self.popularity_exponent >= 0.0) {
            return bad("popularity exponent must be finite and non-negative");
        }
        if self.users > 1 && self.friends_per_user >= self.users {
            return bad("friends per user must be below the user count");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub graph: HeteroGraph,
    pub interactions: Vec<Interaction>,
    /// Hidden favored attributes of each user.
    pub favored: Vec<Vec<AttributeId>>,
}

fn distinct_weighted<R: Rng + ?Sized>(dist: &WeightedIndex<f64>, n: usize, rng: &mut R) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(n);
    while out.len() < n {
        let x = dist.sample(rng) as u32;
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out.sort_unstable();
    out
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let rng = &mut crate::rng::seeded(spec.seed);
    let (nu, ni, na) = (spec.users as usize, spec.items as usize, spec.attributes as usize);
    let weights: Vec<f64> = (0..na).map(|j| libm::pow((j + 1) as f64, -spec.popularity_exponent)).collect();
    let popularity = WeightedIndex::new(&weights).map_err(|_| Error::InvalidConfig("attribute weights".into()))?;

    let mut edges = Vec::new();
    let mut attr_items = vec![Vec::new(); na];
    for v in 0..ni {
        let n = rng.random_range(spec.min_attributes_per_item..=spec.max_attributes_per_item) as usize;
        let attrs = distinct_weighted(&popularity, n, rng);
        for &p in &attrs {
            edges.push(EdgeRecord::belong_to(v as u32, p));
            attr_items[p as usize].push(v as u32);
        }
    }

    let uniform = WeightedIndex::new(vec![1.0; na]).expect("non-empty uniform weights");
    let mut favored = Vec::with_capacity(nu);
    let mut interactions = Vec::new();
    let want = spec.interactions_per_user as usize;
    for u in 0..nu {
        let fav = distinct_weighted(&uniform, spec.favored_per_user as usize, rng);
        let mut pool: Vec<u32> = fav.iter().flat_map(|&p| attr_items[p as usize].iter().copied()).collect();
        pool.sort_unstable();
        pool.dedup();

        let mut chosen: Vec<u32> = Vec::with_capacity(want);
        while chosen.len() < want {
            let from_pool = !pool.is_empty() && rng.random::<f64>() < spec.preference_bias;
            let v = if from_pool { *pool.choose(rng).expect("non-empty") } else { rng.random_range(0..ni as u32) };
            if chosen.contains(&v) {
                // an exhausted pool falls back to the whole catalogue
                if pool.iter().all(|x| chosen.contains(x)) {
                    pool.clear();
                }
                continue;
            }
            chosen.push(v);
        }
        chosen.sort_unstable();
        for &v in &chosen {
            edges.push(EdgeRecord::interact(u as u32, v));
            interactions.push((UserId(u as u32), ItemId(v)));
        }
        for &p in &fav {
            edges.push(EdgeRecord::like(u as u32, p));
        }
        favored.push(fav.into_iter().map(AttributeId).collect());
    }

    if nu > 1 {
        let mut friendships = alloc::collections::BTreeSet::new();
        for u in 0..nu as u32 {
            for _ in 0..spec.friends_per_user {
                let w = rng.random_range(0..nu as u32 - 1);
                let w = if w >= u { w + 1 } else { w };
                friendships.insert((u.min(w), u.max(w)));
            }
        }
        edges.extend(friendships.into_iter().map(|(a, b)| EdgeRecord::friend(a, b)));
    }

    let graph = HeteroGraph::build(VertexCounts::new(spec.users, spec.items, spec.attributes), &edges)?;
    Ok(SyntheticData { graph, interactions, favored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::g0;
    use crate::rng::seeded;

    fn pairs(n: u32) -> Vec<Interaction> {
        (0..n).map(|i| (UserId(i / 10), ItemId(i))).collect()
    }

    #[test]
    fn split_sizes_and_coverage() {
        let all = pairs(100);
        let s = split_interactions(&all, DEFAULT_SPLIT_RATIOS, &mut seeded(4)).unwrap();
        assert_eq!(s.sizes(), (70, 15, 15));
        let mut joined: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        joined.sort();
        assert_eq!(joined, all);
        assert_eq!(s, split_interactions(&all, DEFAULT_SPLIT_RATIOS, &mut seeded(4)).unwrap());
    }

    #[test]
    fn split_edge_cases() {
        assert!(split_interactions(&pairs(2), DEFAULT_SPLIT_RATIOS, &mut seeded(0)).is_err());
        assert!(split_interactions(&pairs(10), [1.0, 0.0, 1.0], &mut seeded(0)).is_err());
        let s = split_interactions(&pairs(3), DEFAULT_SPLIT_RATIOS, &mut seeded(0)).unwrap();
        assert_eq!(s.sizes(), (1, 1, 1));
    }

    #[test]
    fn pruning_g0() {
        let g = g0();
        assert_eq!(prune_rare_attributes(&g, 1).unwrap().graph, g);
        let p = prune_rare_attributes(&g, 2).unwrap();
        assert_eq!(p.kept, vec![AttributeId(0), AttributeId(2)]);
        assert_eq!(p.graph.attribute_count(), 2);
        assert_eq!(p.graph.attributes_of_item(ItemId(0)).unwrap().as_slice(), &[AttributeId(0)]);
        assert_eq!(p.graph.attributes_of_item(ItemId(2)).unwrap().as_slice(), &[AttributeId(1)]);
        assert!(prune_rare_attributes(&g, 0).is_err());
    }

    #[test]
    fn synthetic_counts() {
        let spec = SyntheticSpec { seed: 7, ..SyntheticSpec::default() };
        let d = generate_synthetic(&spec).unwrap();
        assert_eq!(d.interactions.len(), 4000);
        assert_eq!(d.graph.interactions().len(), 4000);
        for v in 0..spec.items {
            let n = d.graph.attributes_of_item(ItemId(v)).unwrap().len();
            assert!((3..=6).contains(&n));
        }
        assert_eq!(d, generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        let bad = SyntheticSpec { attributes: 0, ..SyntheticSpec::default() };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SyntheticSpec { interactions_per_user: 501, ..SyntheticSpec::default() };
        assert!(generate_synthetic(&bad).is_err());
    }
}
