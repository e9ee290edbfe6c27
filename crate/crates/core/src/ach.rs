//! Away-cluster-head confirmation: elected candidates that sit too close to an
//! already confirmed cluster head are demoted to normal nodes for the round.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::protocol::NodeId;
use crate::radio::{distance, Position};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChCandidate {
    pub node_id: NodeId,
    pub position: Position,
    pub residual_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AchOutcome {
    pub accepted: BTreeSet<NodeId>,
    pub demoted: BTreeSet<NodeId>,
}

/// Greedy confirmation in descending residual energy (ascending id on ties).
///
/// A candidate is demoted iff it lies strictly within `min_dist` of a
/// candidate accepted before it. Demoted candidates do not block others.
pub fn ach_filter(candidates: &[ChCandidate], min_dist: f64) -> AchOutcome {
    debug_assert!(min_dist > 0.0);
    let mut order: Vec<&ChCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.residual_energy.partial_cmp(&a.residual_energy).unwrap_or(Ordering::Equal).then(a.node_id.cmp(&b.node_id))
    });

    let mut confirmed: Vec<&ChCandidate> = Vec::with_capacity(order.len());
    let mut out = AchOutcome::default();
    for c in order {
        let too_close = confirmed.iter().any(|ch| distance(ch.position, c.position) < min_dist);
        if too_close {
            out.demoted.insert(c.node_id);
        } else {
            out.accepted.insert(c.node_id);
            confirmed.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("need at least two positions, got {0}")]
pub struct TooFewPositions(pub usize);

/// Smallest distance over all unordered pairs.
pub fn pairwise_min_distance(positions: &[Position]) -> Result<f64, TooFewPositions> {
    if positions.len() < 2 {
        return Err(TooFewPositions(positions.len()));
    }
    let mut best = f64::INFINITY;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            best = best.min(distance(*a, *b));
        }
    }
    Ok(best)
}
