use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::codec::canonical_key;
use crate::space::ChildArchitecture;

use super::{EvalError, Evaluator};

/// Lookup of precomputed penalties.
///
/// The table file holds one entry per line, `<canonical encoding>\t<penalty>`.
/// Lookups use the canonical encoding of the pruned architecture.
#[derive(Debug, Clone, Default)]
pub struct TableEvaluator {
    entries: HashMap<String, f64>,
}

impl TableEvaluator {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut entries = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| EvalError::Table {
                line: n + 1,
                message,
            };
            let (key, value) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad("expected `<encoding>\\t<penalty>`".to_owned()))?;
            let penalty: f64 = value
                .trim()
                .parse()
                .map_err(|e| bad(format!("penalty {value:?}: {e}")))?;
            if !penalty.is_finite() || penalty < 0.0 {
                return Err(bad(format!(
                    "penalty {penalty} is not a finite non-negative number"
                )));
            }
            if entries.insert(key.to_owned(), penalty).is_some() {
                return Err(bad("duplicate architecture".to_owned()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        let encoding = canonical_key(arch)?;
        self.entries
            .get(&encoding)
            .copied()
            .ok_or(EvalError::MissingEntry { encoding })
    }
}

impl Evaluator for TableEvaluator {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        self.lookup(arch)
    }
}

/// Writes table lines for `archs`, scoring each with `evaluator`. Architectures
/// sharing a canonical form are written once.
pub fn write_table<'a, W, E, I>(
    sink: &mut W,
    evaluator: &mut E,
    archs: I,
) -> Result<usize, EvalError>
where
    W: Write,
    E: Evaluator + ?Sized,
    I: IntoIterator<Item = &'a ChildArchitecture>,
{
    let mut seen = std::collections::HashSet::new();
    for arch in archs {
        let key = canonical_key(arch)?;
        if seen.contains(&key) {
            continue;
        }
        let penalty = evaluator.evaluate(arch)?;
        writeln!(sink, "{key}\t{penalty}")?;
        seen.insert(key);
    }
    Ok(seen.len())
}
