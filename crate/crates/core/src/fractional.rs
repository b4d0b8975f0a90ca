//! Online fractional set cover with a monotone multiplicative update.
//!
//! Sets are registered up front or on the fly; elements arrive one at a time
//! together with the sets that contain them. On each arrival the values of the
//! containing sets are raised in rounds until the element is fractionally
//! covered. Values never decrease.
//!
//! The increment of a set is scaled by `c_min / c_S`, where `c_min` is the
//! cheapest priced set containing the element. With unit costs this is the
//! textbook rule `x ← x(1 + 1/c) + 1/(d·c)`; the normalization keeps the
//! competitive factor independent of the absolute cost scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SetId = usize;
pub type ElementId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractionalError {
    #[error("element {0} has no covering set")]
    Uncoverable(ElementId),
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("unknown set {0}")]
    UnknownSet(SetId),
    #[error("invalid set cost {0}")]
    InvalidCost(f64),
    #[error("element {element} still uncovered after {rounds} rounds")]
    RoundCapExceeded { element: ElementId, rounds: u32 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FractionalCover {
    costs: Vec<f64>,
    members: Vec<Vec<ElementId>>,
    covering: Vec<Vec<SetId>>,
    x: Vec<f64>,
    rounds: Vec<u32>,
}

impl Default for FractionalCover {
    fn default() -> Self {
        Self::new()
    }
}

impl FractionalCover {
    pub fn new() -> Self {
        FractionalCover {
            costs: Vec::new(),
            members: Vec::new(),
            covering: Vec::new(),
            x: Vec::new(),
            rounds: Vec::new(),
        }
    }

    /// Register a set. Zero-cost sets start at `x = 1`.
    pub fn add_set(&mut self, cost: f64) -> Result<SetId, FractionalError> {
        if !cost.is_finite() || cost < 0.0 {
            return Err(FractionalError::InvalidCost(cost));
        }
        self.costs.push(cost);
        self.members.push(Vec::new());
        self.x.push(if cost == 0.0 { 1.0 } else { 0.0 });
        Ok(self.costs.len() - 1)
    }

    /// Register an element contained in `sets`.
    pub fn add_element(&mut self, sets: &[SetId]) -> Result<ElementId, FractionalError> {
        let e = self.covering.len();
        let mut sets = sets.to_vec();
        sets.sort_unstable();
        sets.dedup();
        for &s in &sets {
            if s >= self.costs.len() {
                return Err(FractionalError::UnknownSet(s));
            }
        }
        for &s in &sets {
            self.members[s].push(e);
        }
        self.covering.push(sets);
        self.rounds.push(0);
        Ok(e)
    }

    pub fn num_sets(&self) -> usize {
        self.costs.len()
    }

    pub fn num_elements(&self) -> usize {
        self.covering.len()
    }

    pub fn cost(&self, s: SetId) -> f64 {
        self.costs[s]
    }

    pub fn value(&self, s: SetId) -> f64 {
        self.x[s]
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn is_free(&self, s: SetId) -> bool {
        self.costs[s] == 0.0
    }

    pub fn covering_sets(&self, e: ElementId) -> &[SetId] {
        &self.covering[e]
    }

    pub fn members(&self, s: SetId) -> &[ElementId] {
        &self.members[s]
    }

    /// Rounds spent on each element's arrival so far.
    pub fn round_log(&self) -> &[u32] {
        &self.rounds
    }

    /// Largest number of sets containing one element.
    pub fn max_frequency(&self) -> usize {
        self.covering.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coverage(&self, e: ElementId) -> f64 {
        self.covering[e].iter().map(|&s| self.x[s]).sum()
    }

    /// `Σ c_S · x_S`.
    pub fn fractional_cost(&self) -> f64 {
        self.costs.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    #[cfg(test)]
    pub(crate) fn force_value(&mut self, s: SetId, v: f64) {
        self.x[s] = v;
    }

    /// Raise the values of the sets containing `e` until `coverage(e) ≥ 1`.
    ///
    /// `on_round` is called after every round with the state and the sets
    /// whose value changed. Returns the number of rounds performed.
    pub fn arrive(
        &mut self,
        e: ElementId,
        mut on_round: impl FnMut(&FractionalCover, &[SetId]),
    ) -> Result<u32, FractionalError> {
        if e >= self.covering.len() {
            return Err(FractionalError::UnknownElement(e));
        }
        if self.covering[e].is_empty() {
            return Err(FractionalError::Uncoverable(e));
        }
        if self.covering[e].iter().any(|&s| self.is_free(s)) {
            return Ok(0);
        }
        let sets = self.covering[e].clone();
        let d = sets.len() as f64;
        let c_min = sets.iter().map(|&s| self.costs[s]).fold(f64::INFINITY, f64::min);
        let c_max = sets.iter().map(|&s| self.costs[s]).fold(0.0, f64::max);
        let cap = (4.0 * (1.0 + c_max / c_min) * (1.0 + (1.0 + d).ln())).ceil() as u32;
        let mut rounds = 0;
        let mut changed = Vec::with_capacity(sets.len());
        while self.coverage(e) < 1.0 {
            if rounds >= cap {
                return Err(FractionalError::RoundCapExceeded { element: e, rounds });
            }
            changed.clear();
            for &s in &sets {
                let a = c_min / self.costs[s];
                let next = (self.x[s] * (1.0 + a) + a / d).min(1.0);
                if next > self.x[s] {
                    self.x[s] = next;
                    changed.push(s);
                }
            }
            rounds += 1;
            on_round(self, &changed);
        }
        self.rounds[e] += rounds;
        Ok(rounds)
    }
}
