//! Runs a multi-optimizer comparison from a config file and prints the
//! time-to-threshold table.
//!
//! ```text
//! cargo run --release --example compare_optimizers -- configs/skewed_quadratic.toml
//! ```

use cao::harness::{read_experiment, run_comparison, time_to_threshold, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/skewed_quadratic.toml".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let outcome = run_comparison(&cfg)?;
    for run in outcome.runs.iter().filter(|r| r.diverged) {
        println!("diverged: {} seed {}", run.optimizer, run.seed);
    }
    let logs = read_experiment(&cfg.log_dir.join("logs").join(&cfg.name))?;
    let table = time_to_threshold(&logs, cfg.threshold)?;
    print!("{}", table.render());
    println!();
    for row in &table.rows {
        let hits: Vec<String> = row
            .hits
            .iter()
            .map(|(seed, h)| format!("{seed}:{}", h.map_or("-".into(), |s| s.to_string())))
            .collect();
        println!("{:<24} {}", row.optimizer, hits.join(" "));
    }
    for f in &outcome.summaries {
        println!("wrote {}", f.display());
    }
    Ok(())
}
