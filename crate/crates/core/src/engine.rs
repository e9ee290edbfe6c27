//! Round-based network lifecycle.
//!
//! Each round runs election, optional ACH confirmation, association to the
//! nearest cluster head, the data phase, and energy accounting, in that order.
//! Per round the stream is consumed as: one election draw per alive node, then
//! one sensing draw per alive node, both in ascending node id order.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ach::{ach_filter, ChCandidate};
use crate::protocol::{
    elect_candidates, node_epoch_length, teen_should_transmit, ElectionContext, NodeElectionState, NodeId,
    ProtocolKind, ProtocolSpec, Round,
};
use crate::radio::{distance, EnergyModel, Position};
use crate::rng::{shuffle, DrawSource, SeededStream};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{key}`: {reason}")]
pub struct InvalidConfig {
    pub key: &'static str,
    pub reason: String,
}

impl InvalidConfig {
    fn new(key: &'static str, reason: impl Into<String>) -> Self {
        Self { key, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub field_width: f64,
    pub field_height: f64,
    pub n_nodes: usize,
    pub bs_position: Position,
    pub packet_bits: u64,
    pub max_rounds: u64,
    pub seed: u64,
    pub protocol: ProtocolSpec,
    pub energy: EnergyModel,
    /// Initial energy of normal nodes (E0).
    pub initial_energy_normal: f64,
    /// Upper bound on any node's initial energy.
    pub initial_energy_max: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            field_width: 100.0,
            field_height: 100.0,
            n_nodes: 100,
            bs_position: Position::new(50.0, 50.0),
            packet_bits: 4000,
            max_rounds: 8000,
            seed: 1,
            protocol: ProtocolSpec::default(),
            energy: EnergyModel::default(),
            initial_energy_normal: 0.25,
            initial_energy_max: 0.5,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let positive = |key, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(InvalidConfig::new(key, format!("must be > 0, got {v}")))
            }
        };
        positive("field.width", self.field_width)?;
        positive("field.height", self.field_height)?;
        if self.n_nodes == 0 {
            return Err(InvalidConfig::new("n_nodes", "must be >= 1"));
        }
        if self.packet_bits == 0 {
            return Err(InvalidConfig::new("packet_bits", "must be >= 1"));
        }
        if self.max_rounds == 0 {
            return Err(InvalidConfig::new("max_rounds", "must be >= 1"));
        }
        Position::within_field(self.bs_position.x, self.bs_position.y, self.field_width, self.field_height)
            .map_err(|e| InvalidConfig::new("bs", e.to_string()))?;
        self.protocol.validate().map_err(|(key, reason)| InvalidConfig::new(key, reason))?;
        if let Some(name) = self.energy.invalid_coefficient() {
            let key = match name {
                "e_elec" => "energy.e_elec",
                "eps_fs" => "energy.eps_fs",
                "eps_mp" => "energy.eps_mp",
                _ => "energy.e_da",
            };
            return Err(InvalidConfig::new(key, "must be > 0"));
        }
        positive("energy.initial_normal", self.initial_energy_normal)?;
        positive("energy.initial_max", self.initial_energy_max)?;
        if self.peak_initial_energy() > self.initial_energy_max * (1.0 + 1e-12) {
            return Err(InvalidConfig::new(
                "energy.initial_normal",
                format!("initial energy {} exceeds the {} J cap", self.peak_initial_energy(), self.initial_energy_max),
            ));
        }
        Ok(())
    }

    fn peak_initial_energy(&self) -> f64 {
        match self.protocol.kind {
            ProtocolKind::Sep | ProtocolKind::Deec => self.initial_energy_normal * (1.0 + self.protocol.sep_a),
            ProtocolKind::Leach | ProtocolKind::Teen => self.initial_energy_normal,
        }
    }

    pub fn with_variant(&self, v: crate::protocol::Variant) -> Self {
        Self { protocol: self.protocol.with_variant(v), ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    ClusterHead,
    Member,
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub election: NodeElectionState,
    pub position: Position,
    pub alive: bool,
    pub role: Role,
}

impl Node {
    pub fn new(node_id: NodeId, position: Position, energy: f64) -> Self {
        Self { election: NodeElectionState::new(node_id, energy), position, alive: energy > 0.0, role: Role::Idle }
    }

    pub fn id(&self) -> NodeId {
        self.election.node_id
    }

    pub fn energy(&self) -> f64 {
        self.election.residual_energy
    }
}

/// Drops nodes uniformly on the field and assigns initial energies.
///
/// SEP marks the first `floor(m·n)` ids of a seeded shuffle as advanced with
/// `E0·(1+a)`; DEEC draws each node's energy uniformly from `[E0, E0·(1+a)]`.
pub fn deploy(config: &NetworkConfig, rng: &mut dyn DrawSource) -> Vec<Node> {
    let e0 = config.initial_energy_normal;
    let mut nodes: Vec<Node> = (0..config.n_nodes)
        .map(|id| {
            let x = rng.uniform() * config.field_width;
            let y = rng.uniform() * config.field_height;
            Node::new(id, Position::new(x, y), e0)
        })
        .collect();

    let a = config.protocol.sep_a;
    match config.protocol.kind {
        ProtocolKind::Leach | ProtocolKind::Teen => {}
        ProtocolKind::Sep => {
            let mut ids: Vec<NodeId> = (0..config.n_nodes).collect();
            shuffle(&mut ids, rng);
            let n_adv = (config.protocol.sep_m * config.n_nodes as f64).floor() as usize;
            for &id in &ids[..n_adv] {
                let st = &mut nodes[id].election;
                st.is_advanced = true;
                st.heterogeneity_factor = a;
                st.residual_energy = e0 * (1.0 + a);
            }
        }
        ProtocolKind::Deec => {
            for node in &mut nodes {
                let energy = e0 * (1.0 + a * rng.uniform());
                node.election.residual_energy = energy;
                node.election.heterogeneity_factor = energy / e0 - 1.0;
            }
        }
    }
    nodes
}

/// Member-to-CH mapping for one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Confirmed CH id to its members, ascending.
    pub clusters: BTreeMap<NodeId, Vec<NodeId>>,
    /// Members with no CH to join; they report straight to the BS.
    pub direct_to_bs: Vec<NodeId>,
}

impl ClusterAssignment {
    pub fn head_of(&self, member: NodeId) -> Option<NodeId> {
        self.clusters.iter().find(|(_, m)| m.contains(&member)).map(|(&ch, _)| ch)
    }
}

/// Assigns each member to its nearest CH, lowest CH id on exact ties.
pub fn associate(members: &[(NodeId, Position)], chs: &[(NodeId, Position)]) -> ClusterAssignment {
    let mut heads: Vec<(NodeId, Position)> = chs.to_vec();
    heads.sort_by_key(|(id, _)| *id);

    let mut out = ClusterAssignment::default();
    for &(id, _) in &heads {
        out.clusters.insert(id, Vec::new());
    }
    let mut sorted_members = members.to_vec();
    sorted_members.sort_by_key(|(id, _)| *id);
    for (member, pos) in sorted_members {
        let mut best: Option<(NodeId, f64)> = None;
        for &(ch, ch_pos) in &heads {
            let d = distance(pos, ch_pos);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((ch, d));
            }
        }
        match best {
            Some((ch, _)) => out.clusters.get_mut(&ch).expect("head registered").push(member),
            None => out.direct_to_bs.push(member),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    pub round: Round,
    pub alive: usize,
    pub dead: usize,
    pub ch_count: usize,
    pub packets_to_bs_cum: u64,
    pub packets_to_ch_cum: u64,
    pub total_residual_energy: f64,
}

/// Everything that happened in one round, for tracing and audits.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub metrics: RoundMetrics,
    /// Candidates that survived the election draw.
    pub candidates: BTreeSet<NodeId>,
    /// Candidates demoted by ACH.
    pub demoted: BTreeSet<NodeId>,
    /// Confirmed CHs with the epoch length that gated their eligibility.
    pub ch_epochs: BTreeMap<NodeId, Round>,
    pub assignment: ClusterAssignment,
    /// Non-CH nodes that sent a packet this round.
    pub member_transmitters: BTreeSet<NodeId>,
    /// CHs that uplinked to the BS, with the number of signals they fused.
    pub ch_uplinks: BTreeMap<NodeId, u64>,
    /// Per-node sensed values (only TEEN consults them).
    pub sensed: BTreeMap<NodeId, f64>,
    /// Sum of all radio charges levied this round.
    pub charged: f64,
    /// Charges that exceeded a dying node's remaining energy.
    pub overdraft: f64,
    /// Sum over nodes of energy lost this round.
    pub energy_delta: f64,
    pub newly_dead: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    nodes: Vec<Node>,
    packets_to_bs: u64,
    packets_to_ch: u64,
}

impl Network {
    pub fn deploy(config: &NetworkConfig, rng: &mut dyn DrawSource) -> Result<Self, InvalidConfig> {
        config.validate()?;
        let nodes = deploy(config, rng);
        Ok(Self::from_nodes_unchecked(config.clone(), nodes))
    }

    /// Builds a network from hand-placed nodes; ids must be `0..n`.
    pub fn from_nodes(config: NetworkConfig, nodes: Vec<Node>) -> Result<Self, InvalidConfig> {
        let config = NetworkConfig { n_nodes: nodes.len(), ..config };
        config.validate()?;
        if nodes.iter().enumerate().any(|(i, n)| n.id() != i) {
            return Err(InvalidConfig::new("n_nodes", "node ids must be 0..n in order"));
        }
        Ok(Self::from_nodes_unchecked(config, nodes))
    }

    fn from_nodes_unchecked(config: NetworkConfig, nodes: Vec<Node>) -> Self {
        Self { config, nodes, packets_to_bs: 0, packets_to_ch: 0 }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    pub fn total_energy(&self) -> f64 {
        self.nodes.iter().map(|n| n.energy()).sum()
    }

    /// Runs one full round. The caller must not invoke this once every node is dead.
    pub fn run_round(&mut self, round: Round, rng: &mut dyn DrawSource) -> RoundOutcome {
        debug_assert!(self.alive_count() > 0, "round run on a dead network");
        let spec = self.config.protocol;
        let model = self.config.energy;
        let bits = self.config.packet_bits;
        let bs = self.config.bs_position;

        for node in &mut self.nodes {
            node.role = if node.alive { Role::Member } else { Role::Idle };
        }

        // election
        let states: Vec<NodeElectionState> = self.nodes.iter().map(|n| n.election.clone()).collect();
        let ctx = ElectionContext::from_states(&states);
        let candidates = elect_candidates(&spec, &states, round, ctx.avg_energy, rng);

        // confirmation
        let accepted: BTreeSet<NodeId> = if spec.ach_enabled {
            let pool: Vec<ChCandidate> = candidates
                .iter()
                .map(|&id| ChCandidate {
                    node_id: id,
                    position: self.nodes[id].position,
                    residual_energy: self.nodes[id].energy(),
                })
                .collect();
            ach_filter(&pool, spec.ach_min_dist).accepted
        } else {
            candidates.clone()
        };
        let demoted: BTreeSet<NodeId> = candidates.difference(&accepted).copied().collect();
        let mut ch_epochs = BTreeMap::new();
        for &id in &accepted {
            ch_epochs.insert(id, node_epoch_length(&spec, &states[id], &ctx));
            let node = &mut self.nodes[id];
            node.role = Role::ClusterHead;
            node.election.last_ch_round = Some(round);
        }

        // association
        let heads: Vec<(NodeId, Position)> = accepted.iter().map(|&id| (id, self.nodes[id].position)).collect();
        let members: Vec<(NodeId, Position)> =
            self.nodes.iter().filter(|n| n.alive && n.role == Role::Member).map(|n| (n.id(), n.position)).collect();
        let assignment = associate(&members, &heads);

        // sensing
        let mut sensed = BTreeMap::new();
        for node in self.nodes.iter().filter(|n| n.alive) {
            sensed.insert(node.id(), rng.uniform() * 2.0 * spec.teen_hard);
        }
        let is_teen = spec.kind == ProtocolKind::Teen;
        let gate = |node: &mut Node| -> bool {
            if !is_teen {
                return true;
            }
            let value = sensed[&node.id()];
            let st = &mut node.election;
            let send = teen_should_transmit(value, spec.teen_hard, spec.teen_soft, st.last_sensed_transmitted);
            if send {
                st.last_sensed_transmitted = Some(value);
            }
            send
        };

        // data phase
        let mut charges = vec![0.0f64; self.nodes.len()];
        let mut member_transmitters = BTreeSet::new();
        let mut received: BTreeMap<NodeId, u64> = accepted.iter().map(|&id| (id, 0)).collect();
        let mut to_bs = 0u64;
        let mut to_ch = 0u64;
        for (&ch, cluster) in &assignment.clusters {
            let ch_pos = self.nodes[ch].position;
            for &m in cluster {
                if gate(&mut self.nodes[m]) {
                    charges[m] += model.tx_energy(bits, distance(self.nodes[m].position, ch_pos));
                    *received.get_mut(&ch).expect("head registered") += 1;
                    member_transmitters.insert(m);
                    to_ch += 1;
                }
            }
        }
        for &m in &assignment.direct_to_bs {
            if gate(&mut self.nodes[m]) {
                charges[m] += model.tx_energy(bits, distance(self.nodes[m].position, bs));
                member_transmitters.insert(m);
                to_bs += 1;
            }
        }
        let mut ch_uplinks = BTreeMap::new();
        for (&ch, &got) in &received {
            let own = u64::from(gate(&mut self.nodes[ch]));
            let signals = got + own;
            charges[ch] += model.rx_energy(bits) * got as f64;
            if signals > 0 {
                charges[ch] += model.aggregation_energy(bits, signals);
                charges[ch] += model.tx_energy(bits, distance(self.nodes[ch].position, bs));
                ch_uplinks.insert(ch, signals);
                to_bs += 1;
            }
        }

        // accounting
        let mut charged = 0.0;
        let mut overdraft = 0.0;
        let mut energy_delta = 0.0;
        let mut newly_dead = Vec::new();
        for (node, &charge) in self.nodes.iter_mut().zip(&charges) {
            if charge == 0.0 {
                continue;
            }
            charged += charge;
            let before = node.election.residual_energy;
            let mut after = before - charge;
            if after <= 0.0 {
                overdraft += -after;
                after = 0.0;
                node.alive = false;
                newly_dead.push(node.id());
            }
            node.election.residual_energy = after;
            energy_delta += before - after;
        }
        self.packets_to_bs += to_bs;
        self.packets_to_ch += to_ch;

        let alive = self.alive_count();
        RoundOutcome {
            metrics: RoundMetrics {
                round,
                alive,
                dead: self.nodes.len() - alive,
                ch_count: accepted.len(),
                packets_to_bs_cum: self.packets_to_bs,
                packets_to_ch_cum: self.packets_to_ch,
                total_residual_energy: self.total_energy(),
            },
            candidates,
            demoted,
            ch_epochs,
            assignment,
            member_transmitters,
            ch_uplinks,
            sensed,
            charged,
            overdraft,
            energy_delta,
            newly_dead,
        }
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// Round in which the first node died; end of the stability period.
    pub first_death_round: Option<Round>,
    /// Round in which the last node died.
    pub last_death_round: Option<Round>,
    pub final_packets_to_bs: u64,
    pub final_packets_to_ch: u64,
    pub rounds_run: u64,
}

impl RunSummary {
    pub fn from_metrics(metrics: &[RoundMetrics]) -> Self {
        let last = metrics.last();
        Self {
            first_death_round: metrics.iter().find(|m| m.dead > 0).map(|m| m.round),
            last_death_round: metrics.iter().find(|m| m.alive == 0).map(|m| m.round),
            final_packets_to_bs: last.map_or(0, |m| m.packets_to_bs_cum),
            final_packets_to_ch: last.map_or(0, |m| m.packets_to_ch_cum),
            rounds_run: metrics.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub metrics: Vec<RoundMetrics>,
    pub summary: RunSummary,
}

/// Runs rounds `0..max_rounds`, stopping once every node is dead.
pub fn run_simulation(config: &NetworkConfig) -> Result<SimulationResult, InvalidConfig> {
    run_simulation_observed(config, |_, _| {})
}

/// As [`run_simulation`], calling `observe` after every round.
pub fn run_simulation_observed<F>(config: &NetworkConfig, mut observe: F) -> Result<SimulationResult, InvalidConfig>
where
    F: FnMut(&Network, &RoundOutcome),
{
    let mut rng = SeededStream::new(config.seed);
    let mut network = Network::deploy(config, &mut rng)?;
    let mut metrics = Vec::new();
    for round in 0..config.max_rounds {
        if network.alive_count() == 0 {
            break;
        }
        let outcome = network.run_round(round, &mut rng);
        observe(&network, &outcome);
        metrics.push(outcome.metrics);
    }
    let summary = RunSummary::from_metrics(&metrics);
    Ok(SimulationResult { metrics, summary })
}
