//! Dumps the penalty of every valid architecture of a small grid to a
//! tab-separated table, then searches against that table.

use monas::eval::{write_table, PlantedEvaluator, TableEvaluator};
use monas::{enumerate_valid, samos, AnnealingSchedule, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SearchSpaceConfig::with_default_ops(3, 2)?;
    let mut planted = PlantedEvaluator::new(&config, 11);
    let valid: Vec<_> = enumerate_valid(&config, 10_000)?.collect();

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("penalties.tsv");
    let mut file = std::fs::File::create(&path)?;
    let rows = write_table(&mut file, &mut planted, &valid)?;
    drop(file);
    println!(
        "{} valid assignments, {rows} distinct pruned forms written to {}",
        valid.len(),
        path.display()
    );

    let text = std::fs::read_to_string(&path)?;
    for line in text.lines().take(3) {
        println!("  {line}");
    }

    let mut table = TableEvaluator::open(&path)?;
    let result = samos(&config, &mut table, &AnnealingSchedule::default(), 0, None)?;
    println!("best penalty from table: {}", result.best_penalty);
    Ok(())
}
