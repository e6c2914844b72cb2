//! Top-k Hessian sketch of Rosenbrock from HVPs alone, compared with the
//! dense Hessian spectrum.
//!
//! ```text
//! cargo run --release --example sketch_hessian
//! ```

use cao::problems::dense_hessian;
use cao::{block_lanczos, Batch, LanczosConfig, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = ProblemSpec::Rosenbrock { n: 10 }.build()?;
    let theta = problem.initial_point(0);
    let batch = Batch::full();

    let mut dense: Vec<f64> = dense_hessian(problem.as_ref(), &theta, &batch)?
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    dense.sort_by(|a, b| b.total_cmp(a));

    for iters in [1, 5, 20] {
        let cfg = LanczosConfig { k: 3, iters, seed: 0, reorth: true };
        let mut hvps = 0;
        let sketch = block_lanczos(
            |v| {
                hvps += 1;
                problem.hvp(&theta, v, &batch).map(|h| h.into_inner())
            },
            problem.dim(),
            &cfg,
        )?;
        let ritz: Vec<String> = sketch.eigvals.iter().map(|l| format!("{l:10.4}")).collect();
        println!("T = {iters:>2} ({hvps:>2} HVPs): {}", ritz.join(" "));
    }
    let top: Vec<String> = dense.iter().take(3).map(|l| format!("{l:10.4}")).collect();
    println!("dense             : {}", top.join(" "));
    Ok(())
}
