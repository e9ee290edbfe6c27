//! Cluster-head election for LEACH, SEP, TEEN and DEEC, plus TEEN's
//! hard/soft transmission gate.
//!
//! All four protocols share the rotating threshold `T = p / (1 - p·(r mod P))`
//! with `P = round(1/p)`; they differ only in the per-node probability `p` that
//! feeds it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rng::DrawSource;

pub type NodeId = usize;
pub type Round = u64;

/// Cap on DEEC's per-node probability so the threshold denominator stays positive.
pub const DEEC_MAX_PROBABILITY: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Leach,
    Sep,
    Teen,
    Deec,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [Self::Leach, Self::Sep, Self::Teen, Self::Deec];

    pub fn name(self) -> &'static str {
        match self {
            Self::Leach => "LEACH",
            Self::Sep => "SEP",
            Self::Teen => "TEEN",
            Self::Deec => "DEEC",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown protocol `{0}` (expected LEACH, SEP, TEEN or DEEC, optionally suffixed with -ACH)")]
pub struct UnknownProtocol(pub String);

impl FromStr for ProtocolKind {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LEACH" => Ok(Self::Leach),
            "SEP" => Ok(Self::Sep),
            "TEEN" => Ok(Self::Teen),
            "DEEC" => Ok(Self::Deec),
            _ => Err(UnknownProtocol(s.to_string())),
        }
    }
}

/// One of the eight simulated variants: a baseline kind with ACH on or off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub kind: ProtocolKind,
    pub ach: bool,
}

impl Variant {
    pub const fn new(kind: ProtocolKind, ach: bool) -> Self {
        Self { kind, ach }
    }

    pub fn all() -> Vec<Variant> {
        ProtocolKind::ALL.iter().flat_map(|&k| [Variant::new(k, false), Variant::new(k, true)]).collect()
    }

    pub fn baseline(self) -> Variant {
        Variant::new(self.kind, false)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ach {
            write!(f, "{}-ACH", self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

impl FromStr for Variant {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_uppercase();
        let (base, ach) = match t.strip_suffix("-ACH") {
            Some(b) => (b, true),
            None => (t.as_str(), false),
        };
        let kind = base.parse().map_err(|_| UnknownProtocol(s.to_string()))?;
        Ok(Variant { kind, ach })
    }
}

/// How a past CH term blocks re-election.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EligibilityRule {
    /// Ineligible until `round(1/p)` rounds have passed since the last term.
    #[default]
    Sliding,
    /// Ineligible for the rest of the current `round(1/p)`-round epoch.
    EpochReset,
}

impl EligibilityRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sliding => "sliding",
            Self::EpochReset => "epoch_reset",
        }
    }
}

impl FromStr for EligibilityRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sliding" => Ok(Self::Sliding),
            "epoch_reset" => Ok(Self::EpochReset),
            other => Err(format!("expected `sliding` or `epoch_reset`, got `{other}`")),
        }
    }
}

/// Protocol parameters for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// Desired fraction of cluster heads per round.
    pub popt: f64,
    /// SEP/DEEC extra-energy factor of advanced nodes.
    pub sep_a: f64,
    /// SEP fraction of advanced nodes.
    pub sep_m: f64,
    pub teen_hard: f64,
    pub teen_soft: f64,
    pub ach_enabled: bool,
    /// Minimum separation between confirmed cluster heads, in meters.
    pub ach_min_dist: f64,
    pub eligibility: EligibilityRule,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::Leach,
            popt: 0.05,
            sep_a: 1.0,
            sep_m: 0.1,
            teen_hard: 100.0,
            teen_soft: 2.0,
            ach_enabled: false,
            ach_min_dist: 12.0,
            eligibility: EligibilityRule::Sliding,
        }
    }
}

impl ProtocolSpec {
    pub fn variant(&self) -> Variant {
        Variant::new(self.kind, self.ach_enabled)
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        self.kind = v.kind;
        self.ach_enabled = v.ach;
        self
    }

    /// Returns `(key, reason)` for the first violated parameter constraint.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.popt > 0.0 && self.popt <= 1.0) {
            return Err(("protocol.popt", format!("must be in (0, 1], got {}", self.popt)));
        }
        if !(self.sep_a >= 0.0 && self.sep_a.is_finite()) {
            return Err(("sep.a", format!("must be >= 0, got {}", self.sep_a)));
        }
        if !(0.0..=1.0).contains(&self.sep_m) {
            return Err(("sep.m", format!("must be in [0, 1], got {}", self.sep_m)));
        }
        if !(self.teen_soft > 0.0 && self.teen_soft.is_finite()) {
            return Err(("teen.soft", format!("must be > 0, got {}", self.teen_soft)));
        }
        if !(self.teen_hard > self.teen_soft && self.teen_hard.is_finite()) {
            return Err(("teen.hard", format!("must exceed teen.soft ({}), got {}", self.teen_soft, self.teen_hard)));
        }
        if !(self.ach_min_dist > 0.0 && self.ach_min_dist.is_finite()) {
            return Err(("ach.min_dist", format!("must be > 0, got {}", self.ach_min_dist)));
        }
        Ok(())
    }
}

/// Per-node bookkeeping the election needs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeElectionState {
    pub node_id: NodeId,
    /// Round this node last served as a confirmed cluster head.
    pub last_ch_round: Option<Round>,
    /// DEEC's a_i; zero for homogeneous and normal nodes.
    pub heterogeneity_factor: f64,
    /// SEP node class.
    pub is_advanced: bool,
    pub residual_energy: f64,
    /// TEEN's stored value from the last transmission.
    pub last_sensed_transmitted: Option<f64>,
}

impl NodeElectionState {
    pub fn new(node_id: NodeId, residual_energy: f64) -> Self {
        Self {
            node_id,
            last_ch_round: None,
            heterogeneity_factor: 0.0,
            is_advanced: false,
            residual_energy,
            last_sensed_transmitted: None,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.residual_energy > 0.0
    }
}

/// Rotation period `round(1/p)`, at least one round. Zero probability never rotates.
pub fn epoch_length(p: f64) -> Round {
    if p <= 0.0 {
        return Round::MAX;
    }
    (1.0 / p).round().max(1.0) as Round
}

pub fn is_eligible(state: &NodeElectionState, round: Round, epoch_len: Round) -> bool {
    state.is_alive()
        && match state.last_ch_round {
            None => true,
            Some(last) => round.saturating_sub(last) >= epoch_len,
        }
}

/// Eligibility under the epoch-reset rule: no term since the epoch containing `round` began.
pub fn is_eligible_this_epoch(state: &NodeElectionState, round: Round, epoch_len: Round) -> bool {
    let epoch_start = round - round % epoch_len.max(1);
    state.is_alive() && state.last_ch_round.is_none_or(|last| last < epoch_start)
}

fn rotating_threshold(p: f64, round: Round, eligible: bool) -> f64 {
    if !eligible || p <= 0.0 {
        return 0.0;
    }
    let phase = (round % epoch_length(p)) as f64;
    let denom = 1.0 - p * phase;
    // last round of the rotation: the formula hits (or overshoots) certainty
    if denom <= p * (1.0 + 1e-9) {
        return 1.0;
    }
    (p / denom).min(1.0)
}

/// LEACH's rotating election threshold `T(n)`.
pub fn leach_threshold(p: f64, round: Round, eligible: bool) -> f64 {
    rotating_threshold(p, round, eligible)
}

/// DEEC's threshold `T(s_i)`, driven by the node's own probability.
pub fn deec_threshold(pi: f64, round: Round, eligible: bool) -> f64 {
    rotating_threshold(pi, round, eligible)
}

/// SEP's class probability: `popt/(1+a·m)` for normal nodes, `popt(1+a)/(1+a·m)` for advanced.
pub fn sep_probability(spec: &ProtocolSpec, is_advanced: bool) -> f64 {
    let weight = 1.0 + spec.sep_a * spec.sep_m;
    if is_advanced {
        spec.popt * (1.0 + spec.sep_a) / weight
    } else {
        spec.popt / weight
    }
}

/// Network average energy over all `n_total` deployed nodes; dead nodes count as zero.
pub fn network_average_energy(alive_energies: &[f64], n_total: usize) -> f64 {
    debug_assert!(n_total >= 1);
    alive_energies.iter().sum::<f64>() / n_total as f64
}

/// DEEC's heterogeneous probability
/// `p_i = popt·N·(1+a_i)·E_i / ((N + Σa_j)·Ē)`, capped at [`DEEC_MAX_PROBABILITY`].
///
/// Callers must not pass `avg_energy == 0`; that means the network is dead.
pub fn deec_probability(
    spec: &ProtocolSpec,
    state: &NodeElectionState,
    avg_energy: f64,
    sum_a: f64,
    n_total: usize,
) -> f64 {
    debug_assert!(avg_energy > 0.0);
    let n = n_total as f64;
    let energy = state.residual_energy.max(0.0);
    let pi = spec.popt * n * (1.0 + state.heterogeneity_factor) * energy / ((n + sum_a) * avg_energy);
    pi.clamp(0.0, DEEC_MAX_PROBABILITY)
}

/// TEEN's hard/soft gate. The caller stores `sensed` as the new reference
/// exactly when this returns true.
pub fn teen_should_transmit(sensed: f64, hard: f64, soft: f64, last_sent: Option<f64>) -> bool {
    if sensed < hard {
        return false;
    }
    match last_sent {
        None => true,
        Some(prev) => (sensed - prev).abs() >= soft,
    }
}

/// Network-wide quantities DEEC needs each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectionContext {
    pub avg_energy: f64,
    pub sum_a: f64,
    pub n_total: usize,
}

impl ElectionContext {
    pub fn from_states(states: &[NodeElectionState]) -> Self {
        let alive: Vec<f64> = states.iter().filter(|s| s.is_alive()).map(|s| s.residual_energy).collect();
        Self {
            avg_energy: network_average_energy(&alive, states.len().max(1)),
            sum_a: states.iter().map(|s| s.heterogeneity_factor).sum(),
            n_total: states.len(),
        }
    }
}

/// The probability that feeds this node's threshold this round.
pub fn election_probability(spec: &ProtocolSpec, state: &NodeElectionState, ctx: &ElectionContext) -> f64 {
    match spec.kind {
        ProtocolKind::Leach | ProtocolKind::Teen => spec.popt,
        ProtocolKind::Sep => sep_probability(spec, state.is_advanced),
        ProtocolKind::Deec => {
            if ctx.avg_energy > 0.0 {
                deec_probability(spec, state, ctx.avg_energy, ctx.sum_a, ctx.n_total)
            } else {
                0.0
            }
        }
    }
}

/// Epoch length that gates this node's eligibility this round.
pub fn node_epoch_length(spec: &ProtocolSpec, state: &NodeElectionState, ctx: &ElectionContext) -> Round {
    epoch_length(election_probability(spec, state, ctx))
}

/// Draws one uniform per alive node in ascending id order and returns the
/// eligible nodes whose draw falls strictly below their threshold.
///
/// Ineligible alive nodes still consume a draw, so the stream position after
/// the election depends only on which nodes are alive.
pub fn elect_candidates(
    spec: &ProtocolSpec,
    states: &[NodeElectionState],
    round: Round,
    avg_energy: f64,
    rng: &mut dyn DrawSource,
) -> BTreeSet<NodeId> {
    let ctx = ElectionContext { avg_energy, ..ElectionContext::from_states(states) };
    let mut order: Vec<&NodeElectionState> = states.iter().collect();
    order.sort_by_key(|s| s.node_id);

    let mut elected = BTreeSet::new();
    for state in order.into_iter().filter(|s| s.is_alive()) {
        let draw = rng.uniform();
        let p = election_probability(spec, state, &ctx);
        let eligible = match spec.eligibility {
            EligibilityRule::Sliding => is_eligible(state, round, epoch_length(p)),
            EligibilityRule::EpochReset => is_eligible_this_epoch(state, round, epoch_length(p)),
        };
        let threshold = match spec.kind {
            ProtocolKind::Deec => deec_threshold(p, round, eligible),
            _ => leach_threshold(p, round, eligible),
        };
        if draw < threshold {
            elected.insert(state.node_id);
        }
    }
    elected
}
