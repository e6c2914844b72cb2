//! Save mid-run, reload, finish, and confirm the result is bit-identical to
//! an uninterrupted run.

use cao::optimizer::{BatchSchedule, Checkpoint, Optimizer};
use cao::{AnyOptimizer, Cao, CaoConfig, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem =
        ProblemSpec::Logreg { n_features: 20, n_samples: 400, seed: 2, l2: 1e-3, separation: 1.0 }.build()?;
    let batches = BatchSchedule::new(problem.num_samples(), 40, 7).batches(300);
    let fresh =
        AnyOptimizer::Cao(Cao::new(CaoConfig { k: 2, m: 50, alpha: 0.5, eta: 0.5, ..Default::default() }));

    let mut straight = fresh.clone();
    let mut theta = problem.initial_point(7);
    for (_, b) in &batches {
        straight.step(problem.as_ref(), &mut theta, b)?;
    }

    let path = std::env::temp_dir().join("cao-checkpoint-example.json");
    let mut opt = fresh;
    let mut resumed = problem.initial_point(7);
    for (_, b) in &batches[..120] {
        opt.step(problem.as_ref(), &mut resumed, b)?;
    }
    Checkpoint::new(resumed, opt).save(&path)?;
    println!("saved after 120 steps to {}", path.display());

    let Checkpoint { theta: mut resumed, optimizer: mut opt, .. } = Checkpoint::load(&path)?;
    for (_, b) in &batches[opt.steps_taken() as usize..] {
        opt.step(problem.as_ref(), &mut resumed, b)?;
    }
    let same = theta.iter().zip(resumed.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("resumed run bit-identical to uninterrupted run: {same}");
    std::fs::remove_file(&path)?;
    Ok(())
}
