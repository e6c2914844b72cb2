//! Runs the convergence-theory battery and prints one line per check.
//!
//! ```text
//! cargo run --release --example theory_checks -- [out_dir]
//! ```

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let reports = cao::theory::run_suite(out.as_deref())?;
    for r in &reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("{status} {}", r.check);
        for (k, v) in &r.measured {
            println!("    {k:<32} {v:.6e}");
        }
    }
    Ok(())
}
