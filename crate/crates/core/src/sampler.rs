//! Fair batch sampling of child networks.
//!
//! A batch holds `K` children generated jointly so that, within every
//! connection layer, each candidate edge is present in the same number of
//! children, and every child is valid.
//!
//! Each child gives every node of layers `2..=L` exactly one incoming edge,
//! and marks exactly one gather edge. For a fixed target node the `K` source
//! choices are a shuffle of the multiset holding every source `K / D` times,
//! so each interior edge appears `K / D` times per batch. Operations are then
//! assigned per edge by cycling through the alphabet from a random offset,
//! which keeps per-edge operation counts within one of each other.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{ArchitectureRecord, DecodeError};
use crate::space::{ChildArchitecture, EdgeSlot, EdgeState, SearchSpaceConfig};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("batch size K must be at least 1")]
    EmptyBatch,
    #[error(
        "unsatisfiable fairness: K = {k} is not a multiple of D = {scales}; equal per-layer \
         edge counts (connection fairness constraint) need D | K"
    )]
    UnsatisfiableFairness { k: usize, scales: usize },
    #[error("batch stream I/O: {0}")]
    Io(#[from] io::Error),
    #[error("batch stream line {line}: {message}")]
    Stream { line: usize, message: String },
    #[error("batch stream line {line}: {source}")]
    Decode { line: usize, source: DecodeError },
}

/// Per-edge occurrence counts of one connection layer, row-major over
/// `(source, target)`. The gather layer has a single target column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCounts {
    pub layer: usize,
    pub sources: usize,
    pub targets: usize,
    pub counts: Vec<u64>,
}

impl LayerCounts {
    pub fn count(&self, source: usize, target: usize) -> u64 {
        self.counts[(source - 1) * self.targets + (target - 1)]
    }

    fn slot(&self, flat: usize, layers: usize) -> EdgeSlot {
        let from = flat / self.targets + 1;
        let to = flat % self.targets + 1;
        if self.layer == layers {
            EdgeSlot::new(self.layer, from, 0)
        } else {
            EdgeSlot::new(self.layer, from, to)
        }
    }

    fn is_uniform(&self) -> bool {
        self.counts.windows(2).all(|w| w[0] == w[1])
    }
}

/// Present-edge counts over a set of children, one entry per connection
/// layer `1..=L` (layer `L` being the output gather).
pub fn count_edges<'a>(
    config: &SearchSpaceConfig,
    children: impl IntoIterator<Item = &'a ChildArchitecture>,
) -> Vec<LayerCounts> {
    let mut counts: Vec<LayerCounts> = (1..=config.num_layers())
        .map(|layer| {
            let (sources, targets) = if layer == config.num_layers() {
                (config.num_scales(), 1)
            } else {
                (config.nodes_in_layer(layer), config.num_scales())
            };
            LayerCounts {
                layer,
                sources,
                targets,
                counts: vec![0; sources * targets],
            }
        })
        .collect();
    for child in children {
        for (slot, _) in child.present_edges() {
            let lc = &mut counts[slot.layer - 1];
            let to = if slot.is_gather() { 1 } else { slot.to_scale };
            lc.counts[(slot.from_scale - 1) * lc.targets + (to - 1)] += 1;
        }
    }
    counts
}

/// `K` children sampled jointly under the fairness constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSample {
    pub children: Vec<ChildArchitecture>,
    pub fairness_counts: Vec<LayerCounts>,
    pub seed: u64,
}

/// Samples one fair batch of `k` children. Requires `D | k`.
///
/// Random draws happen in this order: for each connection layer `2..L`, for
/// each target scale, one shuffle of the source multiset; then one shuffle of
/// the gather multiset; then one rotation offset per edge slot in canonical
/// order.
pub fn sample_batch(
    config: &SearchSpaceConfig,
    k: usize,
    seed: u64,
) -> Result<BatchSample, SampleError> {
    if k == 0 {
        return Err(SampleError::EmptyBatch);
    }
    let d = config.num_scales();
    if !k.is_multiple_of(d) {
        return Err(SampleError::UnsatisfiableFairness { k, scales: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = Arc::new(config.clone());
    let l = config.num_layers();
    let copies = k / d;
    // topology[child][slot] is true when present
    let mut topology = vec![vec![false; config.edge_count()]; k];

    let balanced = |rng: &mut ChaCha8Rng| {
        let mut pool: Vec<usize> = (1..=d)
            .flat_map(|s| std::iter::repeat_n(s, copies))
            .collect();
        pool.shuffle(rng);
        pool
    };

    for to in 1..=d {
        let index = config.slot_index(EdgeSlot::new(1, 1, to)).unwrap();
        for child in topology.iter_mut() {
            child[index] = true;
        }
    }
    for layer in 2..l {
        for to in 1..=d {
            let sources = balanced(&mut rng);
            for (child, from) in topology.iter_mut().zip(sources) {
                child[config.slot_index(EdgeSlot::new(layer, from, to)).unwrap()] = true;
            }
        }
    }
    let gathers = balanced(&mut rng);
    for (child, from) in topology.iter_mut().zip(gathers) {
        child[config.slot_index(EdgeSlot::new(l, from, 0)).unwrap()] = true;
    }

    let ops = config.num_ops();
    let mut children: Vec<ChildArchitecture> = (0..k)
        .map(|_| ChildArchitecture::empty(Arc::clone(&shared)))
        .collect();
    for index in 0..config.edge_count() {
        let offset = rng.random_range(0..ops);
        let mut seen = 0;
        for (child, present) in children.iter_mut().zip(&topology) {
            if present[index] {
                child
                    .set_state(index, EdgeState::Present((offset + seen) % ops))
                    .expect("op index below alphabet size");
                seen += 1;
            }
        }
    }

    let fairness_counts = count_edges(config, &children);
    Ok(BatchSample {
        children,
        fairness_counts,
        seed,
    })
}

/// Two edges of one layer with unequal counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessViolation {
    pub layer: usize,
    pub first: (EdgeSlot, u64),
    pub second: (EdgeSlot, u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessReport {
    /// First layer whose edge counts are not all equal.
    pub violation: Option<FairnessViolation>,
    /// Indices of children that fail the activity check.
    pub invalid_children: Vec<usize>,
    /// Whether the batch's stored counts agree with a recount.
    pub stored_counts_match: bool,
}

impl FairnessReport {
    pub fn is_fair(&self) -> bool {
        self.violation.is_none() && self.invalid_children.is_empty() && self.stored_counts_match
    }
}

fn first_violation(
    config: &SearchSpaceConfig,
    counts: &[LayerCounts],
) -> Option<FairnessViolation> {
    counts.iter().find_map(|lc| {
        let reference = lc.counts[0];
        lc.counts
            .iter()
            .position(|&c| c != reference)
            .map(|at| FairnessViolation {
                layer: lc.layer,
                first: (lc.slot(0, config.num_layers()), reference),
                second: (lc.slot(at, config.num_layers()), lc.counts[at]),
            })
    })
}

/// Recounts edges from the children and re-checks every child's validity.
pub fn assert_fair(batch: &BatchSample) -> FairnessReport {
    let Some(first) = batch.children.first() else {
        return FairnessReport {
            violation: None,
            invalid_children: Vec::new(),
            stored_counts_match: batch
                .fairness_counts
                .iter()
                .all(|lc| lc.counts.iter().all(|&c| c == 0)),
        };
    };
    let config = first.config();
    let counts = count_edges(config, &batch.children);
    FairnessReport {
        violation: first_violation(config, &counts),
        invalid_children: batch
            .children
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_valid())
            .map(|(i, _)| i)
            .collect(),
        stored_counts_match: counts == batch.fairness_counts,
    }
}

/// One line of the batch stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchRecord {
    pub batch_index: u64,
    pub seed: u64,
    pub children: Vec<ArchitectureRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSummary {
    pub batches: u64,
    /// Aggregate counts over every emitted child.
    pub edge_counts: Vec<LayerCounts>,
    /// Every batch passed [`assert_fair`].
    pub all_fair: bool,
}

impl StreamSummary {
    /// Whether the aggregate counts are uniform within every layer.
    pub fn globally_uniform(&self) -> bool {
        self.edge_counts.iter().all(LayerCounts::is_uniform)
    }
}

fn accumulate(total: &mut [LayerCounts], batch: &[LayerCounts]) {
    for (t, b) in total.iter_mut().zip(batch) {
        for (x, y) in t.counts.iter_mut().zip(&b.counts) {
            *x += y;
        }
    }
}

/// Writes `iterations` batches, one JSON record per line.
///
/// Batch `i` is sampled with the `i`-th `u64` drawn from a ChaCha8 generator
/// seeded with `master_seed`.
pub fn batch_stream<W: Write>(
    config: &SearchSpaceConfig,
    k: usize,
    iterations: u64,
    master_seed: u64,
    sink: &mut W,
) -> Result<StreamSummary, SampleError> {
    if k == 0 {
        return Err(SampleError::EmptyBatch);
    }
    if !k.is_multiple_of(config.num_scales()) {
        return Err(SampleError::UnsatisfiableFairness {
            k,
            scales: config.num_scales(),
        });
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(master_seed);
    let mut edge_counts = count_edges(config, []);
    let mut all_fair = true;
    for batch_index in 0..iterations {
        let seed = seeds.next_u64();
        let batch = sample_batch(config, k, seed)?;
        all_fair &= assert_fair(&batch).is_fair();
        accumulate(&mut edge_counts, &batch.fairness_counts);
        let record = BatchRecord {
            batch_index,
            seed,
            children: batch
                .children
                .iter()
                .map(ArchitectureRecord::from_architecture)
                .collect(),
        };
        serde_json::to_writer(&mut *sink, &record).map_err(io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(StreamSummary {
        batches: iterations,
        edge_counts,
        all_fair,
    })
}

/// Parses a batch stream back into batches, recounting edges.
pub fn read_batch_stream<R: BufRead>(
    config: &SearchSpaceConfig,
    reader: R,
) -> Result<Vec<BatchSample>, SampleError> {
    let shared = Arc::new(config.clone());
    let mut batches = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BatchRecord = serde_json::from_str(&line).map_err(|e| SampleError::Stream {
            line: n + 1,
            message: e.to_string(),
        })?;
        let children = record
            .children
            .iter()
            .map(|c| c.to_architecture(&shared))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| SampleError::Decode {
                line: n + 1,
                source,
            })?;
        batches.push(BatchSample {
            fairness_counts: count_edges(config, &children),
            children,
            seed: record.seed,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l: usize, d: usize) -> SearchSpaceConfig {
        SearchSpaceConfig::with_default_ops(l, d).unwrap()
    }

    #[test]
    fn four_children_cover_each_interior_edge_once() {
        let c = cfg(6, 4);
        let batch = sample_batch(&c, 4, 11).unwrap();
        for lc in &batch.fairness_counts[1..c.num_layers() - 1] {
            assert_eq!(lc.counts.len(), 16);
            assert!(lc.counts.iter().all(|&n| n == 1), "{lc:?}");
        }
        for child in &batch.children {
            assert_eq!(
                child
                    .connection_layer(3)
                    .iter()
                    .flatten()
                    .filter(|e| e.is_present())
                    .count(),
                4
            );
        }
        assert!(assert_fair(&batch).is_fair());
    }

    #[test]
    fn single_child_chain() {
        let c = cfg(2, 1);
        let batch = sample_batch(&c, 1, 0).unwrap();
        assert_eq!(batch.children.len(), 1);
        assert_eq!(batch.children[0].present_count(), 2);
        assert!(assert_fair(&batch).is_fair());
    }

    #[test]
    fn counts_two_per_edge() {
        let c = cfg(4, 2);
        let batch = sample_batch(&c, 4, 3).unwrap();
        let recount = count_edges(&c, &batch.children);
        assert_eq!(recount, batch.fairness_counts);
        for lc in &recount[1..] {
            assert!(lc.counts.iter().all(|&n| n == 2), "{lc:?}");
        }
        assert!(recount[0].counts.iter().all(|&n| n == 4));
    }

    #[test]
    fn argument_errors() {
        let c = cfg(4, 2);
        assert!(matches!(
            sample_batch(&c, 0, 0),
            Err(SampleError::EmptyBatch)
        ));
        let err = sample_batch(&c, 3, 0).unwrap_err();
        assert!(matches!(
            err,
            SampleError::UnsatisfiableFairness { k: 3, scales: 2 }
        ));
        assert!(err.to_string().contains("fairness"));
    }

    #[test]
    fn flipped_edge_is_a_violation() {
        let c = cfg(4, 2);
        let mut batch = sample_batch(&c, 2, 5).unwrap();
        let (slot, _) = batch.children[1]
            .present_edges()
            .find(|(s, _)| s.layer == 2)
            .unwrap();
        batch.children[1].set_edge(slot, EdgeState::Absent).unwrap();
        let report = assert_fair(&batch);
        assert!(!report.is_fair());
        assert_eq!(report.violation.as_ref().unwrap().layer, 2);
        assert!(!report.stored_counts_match);
    }

    #[test]
    fn identical_chains_are_unfair() {
        let c = cfg(4, 2);
        let shared = Arc::new(c.clone());
        let mut chain = ChildArchitecture::empty(shared);
        for slot in [
            EdgeSlot::new(1, 1, 1),
            EdgeSlot::new(2, 1, 1),
            EdgeSlot::new(3, 1, 1),
            EdgeSlot::new(4, 1, 0),
        ] {
            chain.set_edge(slot, EdgeState::Present(0)).unwrap();
        }
        let children = vec![chain; 4];
        let batch = BatchSample {
            fairness_counts: count_edges(&c, &children),
            children,
            seed: 0,
        };
        let report = assert_fair(&batch);
        assert!(report.invalid_children.is_empty());
        let v = report.violation.unwrap();
        assert_eq!(v.layer, 1);
        assert_eq!(v.first.1, 4);
        assert_eq!(v.second.1, 0);
    }

    #[test]
    fn ops_balanced_per_edge() {
        let c = SearchSpaceConfig::new(4, 2, &["a", "b", "c"]).unwrap();
        for seed in 0..20 {
            let batch = sample_batch(&c, 8, seed).unwrap();
            for index in 0..c.edge_count() {
                let mut per_op = [0usize; 3];
                for child in &batch.children {
                    if let Some(op) = child.states()[index].op() {
                        per_op[op] += 1;
                    }
                }
                let (lo, hi) = (per_op.iter().min().unwrap(), per_op.iter().max().unwrap());
                assert!(hi - lo <= 1, "slot {index}: {per_op:?}");
            }
        }
    }

    #[test]
    fn empty_stream() {
        let mut sink = Vec::new();
        let s = batch_stream(&cfg(4, 2), 2, 0, 1, &mut sink).unwrap();
        assert!(sink.is_empty());
        assert_eq!(s.batches, 0);
        assert!(s
            .edge_counts
            .iter()
            .all(|lc| lc.counts.iter().all(|&n| n == 0)));
    }

    #[test]
    fn stream_round_trips_through_reader() {
        let c = cfg(4, 2);
        let mut sink = Vec::new();
        let summary = batch_stream(&c, 2, 10, 9, &mut sink).unwrap();
        assert!(summary.all_fair);
        let batches = read_batch_stream(&c, sink.as_slice()).unwrap();
        assert_eq!(batches.len(), 10);
        let mut total = count_edges(&c, []);
        for b in &batches {
            assert!(assert_fair(b).is_fair());
            accumulate(&mut total, &b.fairness_counts);
        }
        assert_eq!(total, summary.edge_counts);
        for lc in &total[1..3] {
            assert!(lc.counts.iter().all(|&n| n == 10));
        }
    }
}
