//! Maximizes the 1-d sinusoid with the EI policy and prints the trace.

use bayesopt::bench::TestFunction;
use bayesopt::driver::{run_loop, LoopConfig};

fn main() -> bayesopt::Result<()> {
    let f = TestFunction::by_name("sinus-1d")?;
    let mut config = LoopConfig::new(f.bounds.clone(), 4, 15);
    config.seed = 7;
    let trace = run_loop(config, |x| f.value_grad(x).0, None)?;
    println!("{:>3} {:>8} {:>9} {:>9} {:>10}", "n", "x", "y", "best", "EI");
    for r in &trace {
        let ei = r.acq_value.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!("{:>3} {:>8.4} {:>9.5} {:>9.5} {:>10}", r.n, r.x[0], r.y, r.best_observed, ei);
    }
    let oracle = f.oracle_optimum(10_000)?;
    println!("true maximum {:.5} at {:.4}", oracle.value, oracle.x[0]);
    Ok(())
}
