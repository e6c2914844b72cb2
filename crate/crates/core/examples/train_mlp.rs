//! Minibatch training of the synthetic MLP with CAO, driven directly through
//! the optimizer API rather than the harness. Prints the loss curve and sketch
//! diagnostics at some refreshes.
//!
//! ```text
//! cargo run --release --example train_mlp -- configs/mlp_synthetic.toml
//! ```

use cao::harness::ExperimentConfig;
use cao::optimizer::{BatchSchedule, Optimizer};
use cao::{Batch, Cao};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/mlp_synthetic.toml".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let problem = cfg.problem.build()?;
    let (_, cao_cfg) = cfg.base_cao()?;
    let mut opt = Cao::new(cao_cfg.clone());
    let mut theta = problem.initial_point(0);
    let schedule = BatchSchedule::new(problem.num_samples(), cfg.batch_size, 0);

    for (step, (epoch, batch)) in schedule.batches(cfg.steps).into_iter().enumerate() {
        let rec = opt.step(problem.as_ref(), &mut theta, &batch)?;
        if rec.refreshed && step % 200 == 0 {
            println!(
                "step {step:>4} refresh: ritz {:?} clamped {} negative {}",
                rec.sketch_eigvals, rec.clamped, rec.negative_curvature
            );
        }
        if step % 100 == 0 {
            let full = problem.loss(&theta, &Batch::full())?;
            println!("step {step:>4} epoch {epoch:>2} batch loss {:.4} full loss {full:.4}", rec.loss);
        }
    }
    println!(
        "final loss {:.4}, {} refreshes, {} HVPs",
        problem.loss(&theta, &Batch::full())?,
        opt.refreshes(),
        opt.hvp_count()
    );
    Ok(())
}
