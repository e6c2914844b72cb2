//! Damping / refresh-interval grid for the config's first `cao` optimizer,
//! with HVP accounting per cell.
//!
//! ```text
//! cargo run --release --example damping_sweep -- configs/skewed_quadratic.toml
//! ```

use cao::harness::{read_experiment, run_summary, sensitivity_sweep, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/skewed_quadratic.toml".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let grid = cfg.sweep.clone().unwrap_or_default();
    let outcome = sensitivity_sweep(&cfg, &grid)?;
    let logs = read_experiment(&cfg.log_dir.join("logs").join(&outcome.experiment))?;
    println!("{:<22} {:>10} {:>12} {:>9} {:>6}", "cell", "first-hit", "final loss", "hvps", "flag");
    for row in run_summary(&logs, cfg.threshold)? {
        println!(
            "{:<22} {:>10} {:>12} {:>9} {:>6}",
            row.optimizer,
            row.first_hit.steps.map_or("-".into(), |s| format!("{:.1}", s.mean)),
            row.final_loss.map_or("-".into(), |s| format!("{:.3e}", s.mean)),
            row.hvps.first().copied().unwrap_or(0),
            if row.unstable() { "unstable" } else { "" }
        );
    }
    Ok(())
}
