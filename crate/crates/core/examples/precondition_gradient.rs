//! What the damped preconditioner does to a gradient on an ill-conditioned
//! quadratic: captured directions are rescaled by 1/(λ+η), the rest by 1/η.

use cao::precondition::{DampedPreconditioner, DEFAULT_FLOOR};
use cao::theory::initial_sketch;
use cao::{Batch, CaoConfig, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = ProblemSpec::skewed_quadratic(&[100.0, 10.0], 1.0, 48, 1).build()?;
    let theta = problem.initial_point(0);
    let g = problem.grad(&theta, &Batch::full())?;
    let f0 = problem.loss(&theta, &Batch::full())?;

    for (k, eta) in [(1, 1.0), (2, 1.0), (2, 0.1)] {
        let cfg = CaoConfig { k, eta, t_pow: 20, ..Default::default() };
        let sketch = initial_sketch(problem.as_ref(), &theta, &cfg)?;
        let pc = DampedPreconditioner::new(&sketch, eta, DEFAULT_FLOOR)?;
        let d = pc.apply(&g)?;
        // exact line search along -d on the quadratic
        let hd = problem.hvp(&theta, &d, &Batch::full())?;
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let dhd: f64 = d.iter().zip(hd.iter()).map(|(a, b)| a * b).sum();
        let step = gd / dhd;
        let moved: Vec<f64> = theta.iter().zip(&d).map(|(t, di)| t - step * di).collect();
        let f1 = problem.loss(&moved, &Batch::full())?;
        println!(
            "k = {k} eta = {eta:<4} ritz {:?}  <g,Pg> = {:.3e}  ‖P‖ ≤ {:.2}  best-step loss {f0:.3} -> {f1:.3}",
            sketch.eigvals.iter().map(|l| (l * 1e3).round() / 1e3).collect::<Vec<_>>(),
            pc.quadratic_form(&g)?,
            pc.operator_norm_bound(),
        );
    }
    let gd_step = g.iter().map(|x| x * x).sum::<f64>()
        / problem.hvp(&theta, &g, &Batch::full())?.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>();
    let moved: Vec<f64> = theta.iter().zip(g.iter()).map(|(t, gi)| t - gd_step * gi).collect();
    println!("plain gradient, best step: loss {f0:.3} -> {:.3}", problem.loss(&moved, &Batch::full())?);
    Ok(())
}
