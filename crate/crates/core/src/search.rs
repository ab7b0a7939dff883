//! Simulated-annealing search over valid child architectures.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{EvalError, Evaluator, Memoized};
use crate::space::{random_valid, ChildArchitecture, EdgeSlot, EdgeState, SearchSpaceConfig};

/// Mutation attempts before [`neighbor`] gives up.
pub const NEIGHBOR_RETRIES: usize = 100;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("initial temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("decay factor must lie strictly between 0 and 1, got {0}")]
    BadDecay(f64),
    #[error("iteration budget must be at least 1")]
    NoIterations,
    #[error("initial architecture is invalid or belongs to another search space")]
    BadInitial,
    #[error("no valid distinct neighbor found after {0} mutation attempts")]
    NeighborExhausted(usize),
    #[error("evaluator failed: {0}")]
    Evaluator(#[from] EvalError),
    #[error("evaluator returned penalty {0}, expected a finite non-negative number")]
    BadPenalty(f64),
}

/// A search aborted mid-run, with the rounds completed so far.
#[derive(Debug, Error)]
#[error("search aborted after {} rounds: {source}", trace.len())]
pub struct SearchAborted {
    #[source]
    pub source: SearchError,
    pub trace: Vec<SearchTraceEntry>,
}

/// Temperature schedule `T_k = T_0 · ξ^k` with a fixed iteration budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingSchedule {
    initial_temperature: f64,
    decay_factor: f64,
    iterations: usize,
}

impl AnnealingSchedule {
    pub fn new(
        initial_temperature: f64,
        decay_factor: f64,
        iterations: usize,
    ) -> Result<Self, SearchError> {
        if !(initial_temperature.is_finite() && initial_temperature > 0.0) {
            return Err(SearchError::BadTemperature(initial_temperature));
        }
        if !(decay_factor > 0.0 && decay_factor < 1.0) {
            return Err(SearchError::BadDecay(decay_factor));
        }
        if iterations == 0 {
            return Err(SearchError::NoIterations);
        }
        Ok(Self {
            initial_temperature,
            decay_factor,
            iterations,
        })
    }

    pub fn initial_temperature(&self) -> f64 {
        self.initial_temperature
    }

    pub fn decay_factor(&self) -> f64 {
        self.decay_factor
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Temperature used in round `k` (0-based).
    pub fn temperature_at(&self, k: usize) -> f64 {
        self.initial_temperature * self.decay_factor.powi(k as i32)
    }
}

impl Default for AnnealingSchedule {
    /// `T_0 = 2^10`, `ξ = 0.85`, 200 rounds.
    fn default() -> Self {
        Self {
            initial_temperature: 1024.0,
            decay_factor: 0.85,
            iterations: 200,
        }
    }
}

/// Probability of moving to a candidate whose penalty exceeds the current one
/// by `delta_p`: 1 for improvements, `exp(-Δp / T)` otherwise.
pub fn acceptance_probability(delta_p: f64, temperature: f64) -> Result<f64, SearchError> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(SearchError::BadTemperature(temperature));
    }
    if delta_p < 0.0 {
        Ok(1.0)
    } else {
        Ok((-delta_p / temperature).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcceptanceReason {
    Improvement,
    Metropolis,
    Rejected,
}

impl AcceptanceReason {
    pub fn accepted(self) -> bool {
        !matches!(self, AcceptanceReason::Rejected)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AcceptanceReason::Improvement => "improvement",
            AcceptanceReason::Metropolis => "metropolis",
            AcceptanceReason::Rejected => "rejected",
        }
    }
}

impl fmt::Display for AcceptanceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The acceptance rule given a uniform draw `u` in `[0, 1)`.
pub fn decide(delta_p: f64, temperature: f64, u: f64) -> Result<AcceptanceReason, SearchError> {
    let p = acceptance_probability(delta_p, temperature)?;
    Ok(if delta_p < 0.0 {
        AcceptanceReason::Improvement
    } else if u < p {
        AcceptanceReason::Metropolis
    } else {
        AcceptanceReason::Rejected
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTraceEntry {
    pub iteration: usize,
    pub temperature: f64,
    pub candidate_penalty: f64,
    /// Penalty of the current solution after this round's decision.
    pub current_penalty: f64,
    pub best_penalty: f64,
    pub accepted: bool,
    pub acceptance_reason: AcceptanceReason,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_architecture: ChildArchitecture,
    pub best_penalty: f64,
    pub initial_architecture: ChildArchitecture,
    pub initial_penalty: f64,
    pub trace: Vec<SearchTraceEntry>,
    /// Evaluator calls made after memoization.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mutation {
    Add,
    Remove,
    ChangeOp,
}

/// A valid architecture that differs canonically from `arch`.
///
/// One mutation is picked uniformly: add a random absent edge, remove a random
/// present edge, or change the operation of a random present edge. Repair then
/// restores validity: the output head gets a gather edge if it lost all of
/// them, and every inactive node with outgoing edges receives an incoming edge
/// from a random active node of the previous layer (any node if none is
/// active, which is then repaired in turn). The pruned result is returned.
pub fn neighbor<R: Rng + ?Sized>(
    arch: &ChildArchitecture,
    rng: &mut R,
) -> Result<ChildArchitecture, SearchError> {
    let original = arch.prune().map_err(|_| SearchError::BadInitial)?;
    let cfg = arch.config();
    let ops = cfg.num_ops();
    for _ in 0..NEIGHBOR_RETRIES {
        let mut cand = original.clone();
        let (absent, present): (Vec<usize>, Vec<usize>) =
            (0..cfg.edge_count()).partition(|&i| !cand.states()[i].is_present());
        let mutation = match rng.random_range(0..3) {
            0 => Mutation::Add,
            1 => Mutation::Remove,
            _ => Mutation::ChangeOp,
        };
        match mutation {
            Mutation::Add => {
                if absent.is_empty() {
                    continue;
                }
                let index = absent[rng.random_range(0..absent.len())];
                let op = rng.random_range(0..ops);
                cand.set_state(index, EdgeState::Present(op)).unwrap();
            }
            Mutation::Remove => {
                let index = present[rng.random_range(0..present.len())];
                cand.set_state(index, EdgeState::Absent).unwrap();
            }
            Mutation::ChangeOp => {
                if ops < 2 {
                    continue;
                }
                let index = present[rng.random_range(0..present.len())];
                let old = cand.states()[index].op().unwrap();
                let op = (old + rng.random_range(1..ops)) % ops;
                cand.set_state(index, EdgeState::Present(op)).unwrap();
            }
        }
        repair(&mut cand, rng);
        let pruned = cand.prune().expect("repair yields a valid architecture");
        if pruned != original {
            return Ok(pruned);
        }
    }
    Err(SearchError::NeighborExhausted(NEIGHBOR_RETRIES))
}

/// [`neighbor`] driven by a fresh ChaCha8 generator seeded with `seed`.
pub fn neighbor_from_seed(
    arch: &ChildArchitecture,
    seed: u64,
) -> Result<ChildArchitecture, SearchError> {
    neighbor(arch, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn repair<R: Rng + ?Sized>(arch: &mut ChildArchitecture, rng: &mut R) {
    let cfg = arch.config().clone();
    let (l, d, ops) = (cfg.num_layers(), cfg.num_scales(), cfg.num_ops());
    let gather = cfg.layer_slot_range(l);
    if !arch.states()[gather.clone()].iter().any(|s| s.is_present()) {
        let active = arch.active_nodes();
        let live: Vec<usize> = (1..=d).filter(|&s| active[l - 1][s - 1]).collect();
        let from = if live.is_empty() {
            rng.random_range(1..=d)
        } else {
            live[rng.random_range(0..live.len())]
        };
        let op = rng.random_range(0..ops);
        arch.set_edge(EdgeSlot::new(l, from, 0), EdgeState::Present(op))
            .unwrap();
    }
    // Each pass fixes the lowest inactive node that feeds something; either it
    // becomes active or the fix moves one layer down, so this terminates.
    loop {
        let active = arch.active_nodes();
        let mut feeding = vec![vec![false; d]; l];
        for (slot, _) in arch.present_edges() {
            if slot.layer >= 2 {
                feeding[slot.layer - 1][slot.from_scale - 1] = true;
            }
        }
        let stuck = (2..=l).find_map(|layer| {
            (1..=d)
                .find(|&s| feeding[layer - 1][s - 1] && !active[layer - 1][s - 1])
                .map(|s| (layer, s))
        });
        let Some((layer, scale)) = stuck else {
            break;
        };
        let prev = cfg.nodes_in_layer(layer - 1);
        let live: Vec<usize> = (1..=prev).filter(|&s| active[layer - 2][s - 1]).collect();
        let from = if live.is_empty() {
            rng.random_range(1..=prev)
        } else {
            live[rng.random_range(0..live.len())]
        };
        let op = rng.random_range(0..ops);
        arch.set_edge(
            EdgeSlot::new(layer - 1, from, scale),
            EdgeState::Present(op),
        )
        .unwrap();
    }
}

/// Runs the annealing search.
///
/// Randomness comes from a ChaCha8 generator seeded with `seed`. When no
/// initial architecture is given, one `u64` is drawn first and passed to
/// [`random_valid`]. Every round then consumes the neighbor's draws followed
/// by exactly one uniform `f64` for the acceptance test, which is drawn even
/// when the candidate improves. Penalties are memoized by canonical encoding,
/// and the best architecture ever evaluated is returned.
pub fn samos<E: Evaluator + ?Sized>(
    config: &SearchSpaceConfig,
    evaluator: &mut E,
    schedule: &AnnealingSchedule,
    seed: u64,
    initial: Option<&ChildArchitecture>,
) -> Result<SearchResult, SearchAborted> {
    let abort = |source: SearchError, trace: Vec<SearchTraceEntry>| SearchAborted { source, trace };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = match initial {
        Some(a) if a.config() == config && a.is_valid() => a.prune().expect("checked valid"),
        Some(_) => return Err(abort(SearchError::BadInitial, Vec::new())),
        None => random_valid(config, rng.next_u64()),
    };
    let mut memo = Memoized::new(evaluator);
    let score = |memo: &mut Memoized<&mut E>, a: &ChildArchitecture| {
        let p = memo.evaluate(a)?;
        if !p.is_finite() || p < 0.0 {
            return Err(SearchError::BadPenalty(p));
        }
        Ok(p)
    };

    let initial_penalty = score(&mut memo, &start).map_err(|e| abort(e, Vec::new()))?;
    let mut current = start.clone();
    let mut current_penalty = initial_penalty;
    let mut best = start.clone();
    let mut best_penalty = initial_penalty;
    let mut trace = Vec::with_capacity(schedule.iterations());

    for k in 0..schedule.iterations() {
        let temperature = schedule.temperature_at(k);
        let candidate = match neighbor(&current, &mut rng) {
            Ok(c) => c,
            Err(e) => return Err(abort(e, trace)),
        };
        let candidate_penalty = match score(&mut memo, &candidate) {
            Ok(p) => p,
            Err(e) => return Err(abort(e, trace)),
        };
        let u: f64 = rng.random();
        let reason = decide(candidate_penalty - current_penalty, temperature, u)
            .expect("schedule temperatures are positive");
        if reason.accepted() {
            current = candidate.clone();
            current_penalty = candidate_penalty;
        }
        if candidate_penalty < best_penalty {
            best = candidate;
            best_penalty = candidate_penalty;
        }
        trace.push(SearchTraceEntry {
            iteration: k,
            temperature,
            candidate_penalty,
            current_penalty,
            best_penalty,
            accepted: reason.accepted(),
            acceptance_reason: reason,
        });
    }

    Ok(SearchResult {
        best_architecture: best,
        best_penalty,
        initial_architecture: start,
        initial_penalty,
        trace,
        evaluations: memo.misses(),
    })
}

/// Formats `x` with 9 significant digits, in plain or scientific notation
/// whichever `%g` would pick, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

pub const TRACE_HEADER: &str =
    "iteration,temperature,candidate_penalty,current_penalty,best_penalty,accepted,reason";

/// Writes the trace as CSV with [`TRACE_HEADER`].
pub fn write_trace_csv<W: Write>(trace: &[SearchTraceEntry], out: &mut W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.iteration,
            format_sig9(e.temperature),
            format_sig9(e.candidate_penalty),
            format_sig9(e.current_penalty),
            format_sig9(e.best_penalty),
            e.accepted,
            e.acceptance_reason
        )?;
    }
    Ok(())
}
