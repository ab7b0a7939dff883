//! Simulated annealing against a planted target: the penalty is the Hamming
//! distance to a hidden architecture, so the optimum is known.

use monas::eval::PlantedEvaluator;
use monas::{canonical_key, samos, AnnealingSchedule, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SearchSpaceConfig::with_default_ops(5, 2)?;
    let mut planted = PlantedEvaluator::new(&config, 7);
    let schedule = AnnealingSchedule::new(1024.0, 0.85, 200)?;

    let result = samos(&config, &mut planted, &schedule, 1, None)?;

    for t in result.trace.iter().step_by(20) {
        println!(
            "k={:<3} T={:<12.4} candidate={:.4} current={:.4} best={:.4} {}",
            t.iteration,
            t.temperature,
            t.candidate_penalty,
            t.current_penalty,
            t.best_penalty,
            t.acceptance_reason.as_str()
        );
    }
    println!(
        "initial {:.4} -> best {:.4} after {} evaluations",
        result.initial_penalty, result.best_penalty, result.evaluations
    );
    let hit = canonical_key(&result.best_architecture)? == canonical_key(planted.target())?;
    println!("found the target: {hit}");

    // the same search against twenty other planted targets
    let hits = (0..20)
        .filter(|&s| {
            let mut e = PlantedEvaluator::new(&config, 100 + s);
            samos(&config, &mut e, &schedule, s, None).is_ok_and(|r| r.best_penalty == 0.0)
        })
        .count();
    println!("optimum reached in {hits}/20 runs");
    Ok(())
}
