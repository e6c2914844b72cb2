//! Rank ablation: the config's first `cao` optimizer at each rank in the
//! `[ablation]` grid, every seed.
//!
//! ```text
//! cargo run --release --example rank_ablation -- configs/skewed_quadratic.toml
//! ```

use cao::harness::{k_ablation, read_experiment, run_summary, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/skewed_quadratic.toml".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let grid = cfg.ablation.clone().unwrap_or_default();
    let outcome = k_ablation(&cfg, &grid)?;
    let logs = read_experiment(&cfg.log_dir.join("logs").join(&outcome.experiment))?;
    for row in run_summary(&logs, cfg.threshold)? {
        let hits: Vec<String> = row
            .first_hit
            .hits
            .iter()
            .map(|(seed, h)| format!("{seed}:{}", h.map_or("-".into(), |s| s.to_string())))
            .collect();
        let alphas: Vec<String> = logs
            .iter()
            .filter(|l| l.header.optimizer == row.optimizer)
            .map(|l| match &l.header.optimizer_config {
                cao::optimizer::OptimizerConfig::Cao(c) => format!("{:.4}", c.alpha),
                _ => "-".into(),
            })
            .collect();
        println!("{:<8} first-hit {:<28} alpha {}", row.optimizer, hits.join(" "), alphas.join(" "));
    }
    for f in &outcome.summaries {
        println!("wrote {}", f.display());
    }
    Ok(())
}
