//! EI against uniform random search on the 1-d sinusoid, 20 seeds each.
//! Writes `comparison.csv` and prints median best-so-far per iteration.

use bayesopt::bench::{compare_policies, grid_oracle_optimum, TestFunction, RANDOM_SEARCH};
use bayesopt::driver::LoopConfig;

fn main() -> bayesopt::Result<()> {
    let f = TestFunction::by_name("sinus-1d")?;
    let oracle = grid_oracle_optimum("sinus-1d", 100_000)?;
    let config = LoopConfig::new(f.bounds.clone(), 5, 30);
    let start = std::time::Instant::now();
    let cmp = compare_policies(&[("ei".into(), config)], |x| f.value_grad(x).0, 20, None)?;
    println!("ran in {:.1?}", start.elapsed());

    for policy in ["ei", RANDOM_SEARCH] {
        let s = &cmp.summary[policy];
        println!("{policy}");
        for i in (0..s.n.len()).step_by(5).chain([s.n.len() - 1]) {
            println!("  n={:>2}  median gap {:.2e}", s.n[i], oracle.value - s.median[i]);
        }
    }
    std::fs::write("comparison.csv", cmp.to_csv())?;
    Ok(())
}
