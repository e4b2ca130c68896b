//! Success rate and average-turn metrics over finished episodes.
//!
//! Episodes are summarized by their success turn: `Some(t)` when the target
//! was accepted at turn `t`, `None` for a failure.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Fraction of episodes that succeeded at or before turn `t`.
pub fn success_rate_at(outcomes: &[Option<u32>], t: u32) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("episodes"));
    }
    let hits = outcomes.iter().filter(|o| matches!(o, Some(s) if *s <= t)).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// `SR@1 ..= SR@max_turns`; entry `i` is the success rate at turn `i + 1`.
pub fn success_curve(outcomes: &[Option<u32>], max_turns: u32) -> Result<Vec<f64>> {
    if outcomes.is_empty() {
        return Err(Error::Empty("episodes"));
    }
    let mut at = alloc::vec![0usize; max_turns as usize];
    for &t in outcomes.iter().flatten() {
        if t >= 1 && t <= max_turns {
            at[t as usize - 1] += 1;
        }
    }
    let n = outcomes.len() as f64;
    let mut acc = 0usize;
    Ok(at
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect())
}

/// Mean number of turns; failures count as `max_turns`.
pub fn average_turns(outcomes: &[Option<u32>], max_turns: u32) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("episodes"));
    }
    let total: u64 = outcomes.iter().map(|o| o.unwrap_or(max_turns) as u64).sum();
    Ok(total as f64 / outcomes.len() as f64)
}

/// Pointwise `SR@t(a) - SR@t(reference)`.
pub fn relative_success(curve: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if curve.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: curve.len() });
    }
    Ok(curve.iter().zip(reference).map(|(a, b)| a - b).collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub episodes: usize,
    pub max_turns: u32,
    /// `SR@1 ..= SR@max_turns`.
    pub success: Vec<f64>,
    pub average_turns: f64,
}

impl MetricReport {
    pub fn from_outcomes(outcomes: &[Option<u32>], max_turns: u32) -> Result<Self> {
        Ok(Self {
            episodes: outcomes.len(),
            max_turns,
            success: success_curve(outcomes, max_turns)?,
            average_turns: average_turns(outcomes, max_turns)?,
        })
    }

    pub fn success_at(&self, t: u32) -> Option<f64> {
        match t {
            0 => Some(0.0),
            t => self.success.get(t as usize - 1).copied(),
        }
    }

    pub fn final_success(&self) -> f64 {
        self.success.last().copied().unwrap_or(0.0)
    }
}
