//! Canonical text form of an architecture.
//!
//! An architecture serializes to a single-line JSON record:
//!
//! ```text
//! {"layers":3,"scales":2,"op_alphabet":["HPM","identity"],
//!  "edges":[{"layer":1,"from_scale":1,"to_scale":1,"op":"HPM"}, ...]}
//! ```
//!
//! Only present edges are listed, sorted by `(layer, to_scale, from_scale)`.
//! Gather edges use `layer = L` and `to_scale = 0`. The formal schema lives
//! in `schema/architecture.schema.json`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ChildArchitecture, EdgeSlot, EdgeState, SearchSpaceConfig, SpaceError};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("malformed architecture record: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("field `{field}` is {found}, expected {expected}")]
    ConfigMismatch {
        field: &'static str,
        found: String,
        expected: String,
    },
    #[error("invalid search space in record: {0}")]
    InvalidConfig(SpaceError),
    #[error("edges[{index}].op: unknown operation {op:?}")]
    UnknownOperation { index: usize, op: String },
    #[error("edges[{index}]: {slot} is outside the grid (layer/from_scale/to_scale out of range)")]
    EdgeOutOfRange { index: usize, slot: EdgeSlot },
    #[error("edges[{index}]: duplicate edge {slot}")]
    DuplicateEdge { index: usize, slot: EdgeSlot },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub layer: usize,
    pub from_scale: usize,
    pub to_scale: usize,
    pub op: String,
}

/// Serialized form of a [`ChildArchitecture`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureRecord {
    pub layers: usize,
    pub scales: usize,
    pub op_alphabet: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

impl ArchitectureRecord {
    pub fn from_architecture(arch: &ChildArchitecture) -> Self {
        let cfg = arch.config();
        Self {
            layers: cfg.num_layers(),
            scales: cfg.num_scales(),
            op_alphabet: cfg.op_alphabet().to_vec(),
            edges: arch
                .present_edges()
                .map(|(slot, op)| EdgeRecord {
                    layer: slot.layer,
                    from_scale: slot.from_scale,
                    to_scale: slot.to_scale,
                    op: cfg.op_alphabet()[op].clone(),
                })
                .collect(),
        }
    }

    /// Search space described by the record's own header fields.
    pub fn config(&self) -> Result<SearchSpaceConfig, DecodeError> {
        SearchSpaceConfig::new(self.layers, self.scales, &self.op_alphabet)
            .map_err(DecodeError::InvalidConfig)
    }

    /// Builds the architecture, checking the header against `config`.
    pub fn to_architecture(
        &self,
        config: &Arc<SearchSpaceConfig>,
    ) -> Result<ChildArchitecture, DecodeError> {
        let mismatch = |field, found: String, expected: String| DecodeError::ConfigMismatch {
            field,
            found,
            expected,
        };
        if self.layers != config.num_layers() {
            return Err(mismatch(
                "layers",
                self.layers.to_string(),
                config.num_layers().to_string(),
            ));
        }
        if self.scales != config.num_scales() {
            return Err(mismatch(
                "scales",
                self.scales.to_string(),
                config.num_scales().to_string(),
            ));
        }
        if self.op_alphabet != config.op_alphabet() {
            return Err(mismatch(
                "op_alphabet",
                format!("{:?}", self.op_alphabet),
                format!("{:?}", config.op_alphabet()),
            ));
        }
        let mut states = vec![EdgeState::Absent; config.edge_count()];
        for (index, edge) in self.edges.iter().enumerate() {
            let slot = EdgeSlot::new(edge.layer, edge.from_scale, edge.to_scale);
            let op = config
                .op_index(&edge.op)
                .ok_or_else(|| DecodeError::UnknownOperation {
                    index,
                    op: edge.op.clone(),
                })?;
            let at = config
                .slot_index(slot)
                .ok_or(DecodeError::EdgeOutOfRange { index, slot })?;
            if states[at].is_present() {
                return Err(DecodeError::DuplicateEdge { index, slot });
            }
            states[at] = EdgeState::Present(op);
        }
        Ok(ChildArchitecture::from_states(Arc::clone(config), states)
            .expect("states built against this config"))
    }
}

/// Canonical single-line encoding. Equal architectures give identical bytes.
pub fn encode(arch: &ChildArchitecture) -> String {
    serde_json::to_string(&ArchitectureRecord::from_architecture(arch))
        .expect("architecture records always serialize")
}

/// Parses `text` as an architecture of `config`.
pub fn decode(text: &str, config: &SearchSpaceConfig) -> Result<ChildArchitecture, DecodeError> {
    let record: ArchitectureRecord = serde_json::from_str(text)?;
    record.to_architecture(&Arc::new(config.clone()))
}

/// Parses `text`, taking the search space from the record itself.
pub fn decode_any(text: &str) -> Result<ChildArchitecture, DecodeError> {
    let record: ArchitectureRecord = serde_json::from_str(text)?;
    let config = Arc::new(record.config()?);
    record.to_architecture(&config)
}

/// Identity key of an architecture: the encoding of its pruned form.
pub fn canonical_key(arch: &ChildArchitecture) -> Result<String, SpaceError> {
    Ok(encode(&arch.prune()?))
}
