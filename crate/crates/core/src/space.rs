//! The multi-path supernet grid and its architecture encoding.
//!
//! The grid has `L` node layers. Layer 1 holds a single stem node at scale 1,
//! layers `2..=L` hold one node per scale `1..=D`, and an output head gathers
//! the nodes of layer `L`. Connection layer `l` (for `l` in `1..L`) carries the
//! candidate edges from node layer `l` to node layer `l + 1`; the gather edges
//! are addressed as layer `L` with target scale `0`.
//!
//! Every edge slot is either [`EdgeState::Absent`] or present with one
//! operation from the config's alphabet, so a slot has `|alphabet| + 1`
//! states and the unconstrained space has `(|alphabet| + 1)^((L-2)·D² + 2·D)`
//! members.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Operation alphabet used when none is given.
pub const DEFAULT_OPS: [&str; 2] = ["HPM", "identity"];

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("num_layers must be at least 2, got {0}")]
    TooFewLayers(usize),
    #[error("num_scales must be at least 1, got {0}")]
    TooFewScales(usize),
    #[error("operation alphabet is empty")]
    EmptyAlphabet,
    #[error("duplicate operation name {0:?} in alphabet")]
    DuplicateOp(String),
    #[error("architecture does not match the search space: {0}")]
    ShapeMismatch(String),
    #[error("edge {0} is outside the grid")]
    SlotOutOfRange(EdgeSlot),
    #[error("operation index {index} out of range for an alphabet of {len}")]
    OpOutOfRange { index: usize, len: usize },
    #[error("architecture is not valid: {0}")]
    InvalidArchitecture(String),
    #[error("search space has {size} architectures, more than the enumeration limit {limit}")]
    TooLarge { size: BigUint, limit: u64 },
}

/// Dimensions and operation alphabet of the supernet grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SearchSpaceConfig {
    num_layers: usize,
    num_scales: usize,
    op_alphabet: Vec<String>,
}

impl SearchSpaceConfig {
    pub fn new<S: AsRef<str>>(
        num_layers: usize,
        num_scales: usize,
        op_alphabet: &[S],
    ) -> Result<Self, SpaceError> {
        if num_layers < 2 {
            return Err(SpaceError::TooFewLayers(num_layers));
        }
        if num_scales < 1 {
            return Err(SpaceError::TooFewScales(num_scales));
        }
        if op_alphabet.is_empty() {
            return Err(SpaceError::EmptyAlphabet);
        }
        let ops: Vec<String> = op_alphabet.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, op) in ops.iter().enumerate() {
            if ops[..i].contains(op) {
                return Err(SpaceError::DuplicateOp(op.clone()));
            }
        }
        Ok(Self {
            num_layers,
            num_scales,
            op_alphabet: ops,
        })
    }

    /// Grid with the default `{HPM, identity}` alphabet.
    pub fn with_default_ops(num_layers: usize, num_scales: usize) -> Result<Self, SpaceError> {
        Self::new(num_layers, num_scales, &DEFAULT_OPS)
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_scales(&self) -> usize {
        self.num_scales
    }

    pub fn op_alphabet(&self) -> &[String] {
        &self.op_alphabet
    }

    pub fn num_ops(&self) -> usize {
        self.op_alphabet.len()
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        self.op_alphabet.iter().position(|op| op == name)
    }

    /// Number of nodes in node layer `layer` (1-based).
    pub fn nodes_in_layer(&self, layer: usize) -> usize {
        if layer == 1 {
            1
        } else {
            self.num_scales
        }
    }

    /// Number of candidate edge slots: `(L-2)·D² + 2·D`.
    pub fn edge_count(&self) -> usize {
        let d = self.num_scales;
        (self.num_layers - 2) * d * d + 2 * d
    }

    /// States a single slot can take: absent, or present with one operation.
    pub fn states_per_edge(&self) -> usize {
        self.op_alphabet.len() + 1
    }

    /// Exact size of the search space without the validity constraint.
    pub fn space_size_unconstrained(&self) -> BigUint {
        BigUint::from(self.states_per_edge()).pow(self.edge_count() as u32)
    }

    /// Flat index of `slot`, in canonical `(layer, to_scale, from_scale)` order.
    pub fn slot_index(&self, slot: EdgeSlot) -> Option<usize> {
        let (l, d) = (self.num_layers, self.num_scales);
        let EdgeSlot {
            layer,
            from_scale,
            to_scale,
        } = slot;
        let in_scales = |s: usize| (1..=d).contains(&s);
        if layer == 1 {
            (from_scale == 1 && in_scales(to_scale)).then(|| to_scale - 1)
        } else if layer < l {
            (in_scales(from_scale) && in_scales(to_scale))
                .then(|| d + (layer - 2) * d * d + (to_scale - 1) * d + (from_scale - 1))
        } else if layer == l {
            (to_scale == 0 && in_scales(from_scale)).then(|| d + (l - 2) * d * d + from_scale - 1)
        } else {
            None
        }
    }

    /// Inverse of [`slot_index`](Self::slot_index).
    pub fn slot_at(&self, index: usize) -> EdgeSlot {
        let d = self.num_scales;
        assert!(index < self.edge_count(), "slot index {index} out of range");
        if index < d {
            return EdgeSlot::new(1, 1, index + 1);
        }
        let rest = index - d;
        let interior = (self.num_layers - 2) * d * d;
        if rest < interior {
            let layer = rest / (d * d) + 2;
            let within = rest % (d * d);
            EdgeSlot::new(layer, within % d + 1, within / d + 1)
        } else {
            EdgeSlot::new(self.num_layers, rest - interior + 1, 0)
        }
    }

    /// All slots in canonical order.
    pub fn slots(&self) -> impl Iterator<Item = EdgeSlot> + '_ {
        (0..self.edge_count()).map(move |i| self.slot_at(i))
    }

    /// Flat index range of the slots belonging to connection layer `layer`
    /// (`layer == L` is the output gather).
    pub fn layer_slot_range(&self, layer: usize) -> std::ops::Range<usize> {
        let d = self.num_scales;
        match layer {
            1 => 0..d,
            l if l < self.num_layers => {
                let start = d + (l - 2) * d * d;
                start..start + d * d
            }
            l if l == self.num_layers => {
                let start = d + (l - 2) * d * d;
                start..start + d
            }
            _ => 0..0,
        }
    }
}

impl Default for SearchSpaceConfig {
    /// `L = 10`, `D = 4` with the default alphabet.
    fn default() -> Self {
        Self::with_default_ops(10, 4).expect("default config is valid")
    }
}

/// A grid node. Scales and layers are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub layer: usize,
    pub scale: usize,
}

impl NodeId {
    pub const STEM: NodeId = NodeId { layer: 1, scale: 1 };
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}S{}", self.layer, self.scale)
    }
}

/// Address of one candidate edge. `to_scale == 0` denotes the output head and
/// only occurs with `layer == L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeSlot {
    pub layer: usize,
    pub from_scale: usize,
    pub to_scale: usize,
}

impl EdgeSlot {
    pub const fn new(layer: usize, from_scale: usize, to_scale: usize) -> Self {
        Self {
            layer,
            from_scale,
            to_scale,
        }
    }

    pub fn is_gather(&self) -> bool {
        self.to_scale == 0
    }

    pub fn source(&self) -> NodeId {
        NodeId {
            layer: self.layer,
            scale: self.from_scale,
        }
    }

    /// Target node, or `None` for a gather edge.
    pub fn target(&self) -> Option<NodeId> {
        (!self.is_gather()).then_some(NodeId {
            layer: self.layer + 1,
            scale: self.to_scale,
        })
    }
}

impl fmt::Display for EdgeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_gather() {
            write!(
                f,
                "(layer {}, scale {} -> output)",
                self.layer, self.from_scale
            )
        } else {
            write!(
                f,
                "(layer {}, scale {} -> scale {})",
                self.layer, self.from_scale, self.to_scale
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EdgeState {
    #[default]
    Absent,
    /// Present with the operation at this index of the alphabet.
    Present(usize),
}

impl EdgeState {
    pub fn is_present(self) -> bool {
        matches!(self, EdgeState::Present(_))
    }

    pub fn op(self) -> Option<usize> {
        match self {
            EdgeState::Absent => None,
            EdgeState::Present(op) => Some(op),
        }
    }
}

/// Outcome of the activity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub is_valid: bool,
    /// Present edges whose source node is inactive.
    pub dangling_edges: Vec<EdgeSlot>,
    /// No present gather edge leaves an active node.
    pub dead_output: bool,
    /// Active nodes, counting the stem.
    pub active_node_count: usize,
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid={}", self.is_valid)?;
        writeln!(f, "active_nodes={}", self.active_node_count)?;
        writeln!(f, "dead_output={}", self.dead_output)?;
        write!(f, "dangling_edges={}", self.dangling_edges.len())?;
        for slot in &self.dangling_edges {
            write!(f, "\n  dangling {slot}")?;
        }
        Ok(())
    }
}

/// One concrete child network: a state for every edge slot of the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChildArchitecture {
    config: Arc<SearchSpaceConfig>,
    states: Vec<EdgeState>,
}

impl ChildArchitecture {
    /// Architecture with every edge absent.
    pub fn empty(config: Arc<SearchSpaceConfig>) -> Self {
        let states = vec![EdgeState::Absent; config.edge_count()];
        Self { config, states }
    }

    /// Architecture with every edge present using operation `op`.
    pub fn fully_connected(config: Arc<SearchSpaceConfig>, op: usize) -> Result<Self, SpaceError> {
        if op >= config.num_ops() {
            return Err(SpaceError::OpOutOfRange {
                index: op,
                len: config.num_ops(),
            });
        }
        let states = vec![EdgeState::Present(op); config.edge_count()];
        Ok(Self { config, states })
    }

    /// Builds an architecture from states in canonical slot order.
    pub fn from_states(
        config: Arc<SearchSpaceConfig>,
        states: Vec<EdgeState>,
    ) -> Result<Self, SpaceError> {
        if states.len() != config.edge_count() {
            return Err(SpaceError::ShapeMismatch(format!(
                "expected {} edge states, got {}",
                config.edge_count(),
                states.len()
            )));
        }
        if let Some(op) = states
            .iter()
            .filter_map(|s| s.op())
            .find(|&op| op >= config.num_ops())
        {
            return Err(SpaceError::OpOutOfRange {
                index: op,
                len: config.num_ops(),
            });
        }
        Ok(Self { config, states })
    }

    pub fn config(&self) -> &SearchSpaceConfig {
        &self.config
    }

    pub fn shared_config(&self) -> &Arc<SearchSpaceConfig> {
        &self.config
    }

    /// Edge states in canonical slot order.
    pub fn states(&self) -> &[EdgeState] {
        &self.states
    }

    pub fn edge(&self, slot: EdgeSlot) -> Option<EdgeState> {
        self.config.slot_index(slot).map(|i| self.states[i])
    }

    pub fn set_edge(&mut self, slot: EdgeSlot, state: EdgeState) -> Result<(), SpaceError> {
        let index = self
            .config
            .slot_index(slot)
            .ok_or(SpaceError::SlotOutOfRange(slot))?;
        self.set_state(index, state)
    }

    pub fn set_state(&mut self, index: usize, state: EdgeState) -> Result<(), SpaceError> {
        if let EdgeState::Present(op) = state {
            if op >= self.config.num_ops() {
                return Err(SpaceError::OpOutOfRange {
                    index: op,
                    len: self.config.num_ops(),
                });
            }
        }
        match self.states.get_mut(index) {
            Some(s) => {
                *s = state;
                Ok(())
            }
            None => Err(SpaceError::ShapeMismatch(format!(
                "slot index {index} out of range"
            ))),
        }
    }

    /// Matrix of connection layer `layer`, indexed `[source - 1][target - 1]`.
    /// Layer 1 is `1 × D`, interior layers are `D × D`.
    pub fn connection_layer(&self, layer: usize) -> Vec<Vec<EdgeState>> {
        let d = self.config.num_scales;
        let sources = self.config.nodes_in_layer(layer);
        let mut matrix = vec![vec![EdgeState::Absent; d]; sources];
        for (from, row) in matrix.iter_mut().enumerate() {
            for (to, cell) in row.iter_mut().enumerate() {
                *cell = self
                    .edge(EdgeSlot::new(layer, from + 1, to + 1))
                    .unwrap_or_default();
            }
        }
        matrix
    }

    /// Gather edges from the `D` nodes of layer `L` into the output head.
    pub fn output_gather(&self) -> &[EdgeState] {
        &self.states[self.config.layer_slot_range(self.config.num_layers)]
    }

    /// Present edges with their operation index, in canonical order.
    pub fn present_edges(&self) -> impl Iterator<Item = (EdgeSlot, usize)> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.op().map(|op| (self.config.slot_at(i), op)))
    }

    pub fn present_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_present()).count()
    }

    /// Active flags per node layer, computed by forward propagation from the
    /// stem. `active[l - 1][s - 1]` refers to node `(l, s)`.
    pub fn active_nodes(&self) -> Vec<Vec<bool>> {
        let cfg = &*self.config;
        let mut active: Vec<Vec<bool>> = Vec::with_capacity(cfg.num_layers);
        active.push(vec![true]);
        for layer in 1..cfg.num_layers {
            let mut next = vec![false; cfg.num_scales];
            for index in cfg.layer_slot_range(layer) {
                if self.states[index].is_present() {
                    let slot = cfg.slot_at(index);
                    if active[layer - 1][slot.from_scale - 1] {
                        next[slot.to_scale - 1] = true;
                    }
                }
            }
            active.push(next);
        }
        active
    }

    /// Nodes that have a present path to the output head, same indexing as
    /// [`active_nodes`](Self::active_nodes).
    pub fn output_reaching_nodes(&self) -> Vec<Vec<bool>> {
        let cfg = &*self.config;
        let l = cfg.num_layers;
        let mut reach: Vec<Vec<bool>> = (1..=l)
            .map(|k| vec![false; cfg.nodes_in_layer(k)])
            .collect();
        for (from, flag) in reach[l - 1].iter_mut().enumerate() {
            *flag =
                self.states[cfg.slot_index(EdgeSlot::new(l, from + 1, 0)).unwrap()].is_present();
        }
        for layer in (1..l).rev() {
            for index in cfg.layer_slot_range(layer) {
                if self.states[index].is_present() {
                    let slot = cfg.slot_at(index);
                    if reach[layer][slot.to_scale - 1] {
                        reach[layer - 1][slot.from_scale - 1] = true;
                    }
                }
            }
        }
        reach
    }

    /// Checks that every present edge leaves an active node and that the
    /// output head receives at least one active edge.
    pub fn validate(&self) -> ValidityReport {
        let active = self.active_nodes();
        let mut dangling_edges = Vec::new();
        let mut live_gather = false;
        for (slot, _) in self.present_edges() {
            let source_active = active[slot.layer - 1][slot.from_scale - 1];
            if !source_active {
                dangling_edges.push(slot);
            } else if slot.is_gather() {
                live_gather = true;
            }
        }
        let dead_output = !live_gather;
        ValidityReport {
            is_valid: dangling_edges.is_empty() && !dead_output,
            dangling_edges,
            dead_output,
            active_node_count: active.iter().flatten().filter(|&&a| a).count(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid
    }

    /// Removes every edge that lies on no stem-to-output path.
    pub fn prune(&self) -> Result<ChildArchitecture, SpaceError> {
        let report = self.validate();
        if !report.is_valid {
            return Err(SpaceError::InvalidArchitecture(if report.dead_output {
                "output head receives no active edge".to_owned()
            } else {
                format!("dangling edge {}", report.dangling_edges[0])
            }));
        }
        let active = self.active_nodes();
        let reach = self.output_reaching_nodes();
        let cfg = &*self.config;
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(index, &state)| {
                let slot = cfg.slot_at(index);
                let keep = state.is_present()
                    && active[slot.layer - 1][slot.from_scale - 1]
                    && (slot.is_gather() || reach[slot.layer][slot.to_scale - 1]);
                if keep {
                    state
                } else {
                    EdgeState::Absent
                }
            })
            .collect();
        Ok(ChildArchitecture {
            config: Arc::clone(&self.config),
            states,
        })
    }

    /// Number of slots whose state differs from `other`'s.
    pub fn hamming_distance(&self, other: &ChildArchitecture) -> usize {
        self.states
            .iter()
            .zip(&other.states)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Checks `arch` against `config` and reports its validity.
pub fn validate(
    config: &SearchSpaceConfig,
    arch: &ChildArchitecture,
) -> Result<ValidityReport, SpaceError> {
    if arch.config() != config {
        return Err(SpaceError::ShapeMismatch(format!(
            "architecture is for L={} D={} ops={:?}, expected L={} D={} ops={:?}",
            arch.config().num_layers,
            arch.config().num_scales,
            arch.config().op_alphabet,
            config.num_layers,
            config.num_scales,
            config.op_alphabet
        )));
    }
    Ok(arch.validate())
}

/// Iterator over every edge-state assignment of a grid, validity unfiltered.
///
/// Assignments are produced as a mixed-radix counter over the slots in
/// canonical order, the last slot varying fastest.
#[derive(Debug, Clone)]
pub struct Enumeration {
    config: Arc<SearchSpaceConfig>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for Enumeration {
    type Item = ChildArchitecture;

    fn next(&mut self) -> Option<ChildArchitecture> {
        if self.done {
            return None;
        }
        let states = self
            .digits
            .iter()
            .map(|&d| match d {
                0 => EdgeState::Absent,
                op => EdgeState::Present(op - 1),
            })
            .collect();
        let radix = self.config.states_per_edge();
        self.done = true;
        for digit in self.digits.iter_mut().rev() {
            *digit += 1;
            if *digit < radix {
                self.done = false;
                break;
            }
            *digit = 0;
        }
        Some(ChildArchitecture {
            config: Arc::clone(&self.config),
            states,
        })
    }
}

fn check_enumerable(config: &SearchSpaceConfig, limit: u64) -> Result<(), SpaceError> {
    let size = config.space_size_unconstrained();
    if size > BigUint::from(limit) {
        return Err(SpaceError::TooLarge { size, limit });
    }
    Ok(())
}

/// Every edge-state assignment, provided the space has at most `limit` members.
pub fn enumerate_all(config: &SearchSpaceConfig, limit: u64) -> Result<Enumeration, SpaceError> {
    check_enumerable(config, limit)?;
    Ok(Enumeration {
        digits: vec![0; config.edge_count()],
        config: Arc::new(config.clone()),
        done: false,
    })
}

/// The valid members of [`enumerate_all`].
pub fn enumerate_valid(
    config: &SearchSpaceConfig,
    limit: u64,
) -> Result<impl Iterator<Item = ChildArchitecture>, SpaceError> {
    Ok(enumerate_all(config, limit)?.filter(ChildArchitecture::is_valid))
}

/// A random valid architecture, deterministic in `seed`.
///
/// Every node of layers `2..=L` receives exactly one incoming edge with a
/// uniform source and operation (drawn in that order, layer by layer, target
/// scale ascending). Each gather edge is then present with probability 1/2,
/// with one forced when none came up, and the result is pruned.
pub fn random_valid(config: &SearchSpaceConfig, seed: u64) -> ChildArchitecture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = Arc::new(config.clone());
    let mut arch = ChildArchitecture::empty(Arc::clone(&shared));
    let (l, d, ops) = (config.num_layers, config.num_scales, config.num_ops());
    for layer in 1..l {
        let sources = config.nodes_in_layer(layer);
        for to in 1..=d {
            let from = rng.random_range(1..=sources);
            let op = rng.random_range(0..ops);
            let index = config.slot_index(EdgeSlot::new(layer, from, to)).unwrap();
            arch.states[index] = EdgeState::Present(op);
        }
    }
    let gather = config.layer_slot_range(l);
    let mut any = false;
    for index in gather.clone() {
        if rng.random_bool(0.5) {
            arch.states[index] = EdgeState::Present(rng.random_range(0..ops));
            any = true;
        }
    }
    if !any {
        let index = gather.start + rng.random_range(0..d);
        arch.states[index] = EdgeState::Present(rng.random_range(0..ops));
    }
    arch.prune()
        .expect("one incoming edge per node keeps every node active")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l: usize, d: usize) -> SearchSpaceConfig {
        SearchSpaceConfig::with_default_ops(l, d).unwrap()
    }

    #[test]
    fn config_invariants() {
        assert!(matches!(
            SearchSpaceConfig::with_default_ops(1, 2),
            Err(SpaceError::TooFewLayers(1))
        ));
        assert!(matches!(
            SearchSpaceConfig::with_default_ops(3, 0),
            Err(SpaceError::TooFewScales(0))
        ));
        let empty: [&str; 0] = [];
        assert!(matches!(
            SearchSpaceConfig::new(3, 2, &empty),
            Err(SpaceError::EmptyAlphabet)
        ));
        assert!(matches!(
            SearchSpaceConfig::new(3, 2, &["a", "b", "a"]),
            Err(SpaceError::DuplicateOp(op)) if op == "a"
        ));
    }

    #[test]
    fn edge_counts() {
        assert_eq!(cfg(10, 4).edge_count(), 136);
        assert_eq!(cfg(2, 1).edge_count(), 2);
        assert_eq!(cfg(3, 2).edge_count(), 8);
        assert_eq!(cfg(3, 2).space_size_unconstrained(), BigUint::from(6561u32));
        assert_eq!(cfg(2, 1).space_size_unconstrained(), BigUint::from(9u32));
    }

    #[test]
    fn slot_index_round_trips() {
        for (l, d) in [(2, 1), (2, 3), (3, 2), (5, 3), (10, 4)] {
            let c = cfg(l, d);
            let slots: Vec<_> = c.slots().collect();
            assert_eq!(slots.len(), c.edge_count());
            for (i, slot) in slots.iter().enumerate() {
                assert_eq!(c.slot_index(*slot), Some(i), "{slot}");
            }
            // canonical order is (layer, to_scale, from_scale)
            for w in slots.windows(2) {
                let key = |s: &EdgeSlot| (s.layer, s.to_scale, s.from_scale);
                assert!(key(&w[0]) < key(&w[1]));
            }
        }
        let c = cfg(3, 2);
        assert_eq!(c.slot_index(EdgeSlot::new(1, 2, 1)), None);
        assert_eq!(c.slot_index(EdgeSlot::new(2, 1, 0)), None);
        assert_eq!(c.slot_index(EdgeSlot::new(3, 3, 0)), None);
        assert_eq!(c.slot_index(EdgeSlot::new(4, 1, 0)), None);
    }

    #[test]
    fn fully_connected_is_valid() {
        for (l, d) in [(2, 1), (3, 2), (6, 4)] {
            let c = Arc::new(cfg(l, d));
            let a = ChildArchitecture::fully_connected(c, 0).unwrap();
            let r = a.validate();
            assert!(r.is_valid);
            assert_eq!(r.active_node_count, 1 + (l - 1) * d);
        }
    }

    #[test]
    fn all_absent_is_dead() {
        let a = ChildArchitecture::empty(Arc::new(cfg(4, 3)));
        let r = a.validate();
        assert!(!r.is_valid);
        assert!(r.dead_output);
        assert_eq!(r.active_node_count, 1);
    }

    #[test]
    fn dangling_interior_edge_reported() {
        let mut a = ChildArchitecture::empty(Arc::new(cfg(3, 2)));
        a.set_edge(EdgeSlot::new(1, 1, 1), EdgeState::Present(0))
            .unwrap();
        a.set_edge(EdgeSlot::new(2, 1, 1), EdgeState::Present(0))
            .unwrap();
        a.set_edge(EdgeSlot::new(2, 2, 1), EdgeState::Present(1))
            .unwrap();
        a.set_edge(EdgeSlot::new(3, 1, 0), EdgeState::Present(0))
            .unwrap();
        let r = a.validate();
        assert!(!r.is_valid);
        assert!(!r.dead_output);
        assert_eq!(r.dangling_edges, vec![EdgeSlot::new(2, 2, 1)]);
        assert_eq!(r.active_node_count, 3);
    }

    #[test]
    fn prune_removes_dead_end_edge() {
        let c = Arc::new(cfg(3, 2));
        let mut a = ChildArchitecture::empty(Arc::clone(&c));
        a.set_edge(EdgeSlot::new(1, 1, 1), EdgeState::Present(0))
            .unwrap();
        a.set_edge(EdgeSlot::new(2, 1, 1), EdgeState::Present(1))
            .unwrap();
        a.set_edge(EdgeSlot::new(3, 1, 0), EdgeState::Present(0))
            .unwrap();
        let closure = a.clone();
        assert_eq!(a.prune().unwrap(), closure);

        // (2,1) -> (3,2) leads nowhere; so does stem -> (2,2).
        a.set_edge(EdgeSlot::new(2, 1, 2), EdgeState::Present(0))
            .unwrap();
        a.set_edge(EdgeSlot::new(1, 1, 2), EdgeState::Present(0))
            .unwrap();
        assert!(a.is_valid());
        assert_eq!(a.prune().unwrap(), closure);
    }

    #[test]
    fn prune_rejects_invalid() {
        let a = ChildArchitecture::empty(Arc::new(cfg(3, 2)));
        assert!(matches!(a.prune(), Err(SpaceError::InvalidArchitecture(_))));
    }

    #[test]
    fn enumeration_guard_reports_size() {
        let err = enumerate_all(&cfg(3, 2), 10).unwrap_err();
        assert!(err.to_string().contains("6561"), "{err}");
    }

    #[test]
    fn tiny_space_counts() {
        let c = cfg(2, 1);
        assert_eq!(enumerate_all(&c, 100).unwrap().count(), 9);
        assert_eq!(enumerate_valid(&c, 100).unwrap().count(), 4);
    }

    #[test]
    fn random_valid_deterministic_and_valid() {
        let c = cfg(5, 3);
        for seed in 0..200 {
            let a = random_valid(&c, seed);
            assert!(a.is_valid());
            assert_eq!(a, random_valid(&c, seed));
            assert_eq!(a.prune().unwrap(), a);
        }
    }

    #[test]
    fn random_valid_smallest_grid_is_the_chain() {
        let c = cfg(2, 1);
        let mut ops = std::collections::HashSet::new();
        for seed in 0..64 {
            let a = random_valid(&c, seed);
            assert_eq!(a.present_count(), 2);
            ops.insert(a.states().to_vec());
        }
        assert!(ops.len() > 1);
    }

    #[test]
    fn connection_layer_shapes() {
        let a = ChildArchitecture::fully_connected(Arc::new(cfg(4, 3)), 1).unwrap();
        assert_eq!(a.connection_layer(1).len(), 1);
        assert_eq!(a.connection_layer(1)[0].len(), 3);
        assert_eq!(a.connection_layer(2).len(), 3);
        assert_eq!(a.output_gather().len(), 3);
    }
}
