//! A persisted ask-tell campaign: the process "restarts" between every
//! suggestion and observation by reloading from the store.

use bayesopt::driver::LoopConfig;
use bayesopt::gp::Bounds;
use bayesopt::service::{posterior_slice, trace_csv, Campaign, Store};

fn experiment(x: &[f64]) -> f64 {
    -(x[0] - 0.62).powi(2) - 0.5 * (x[1] - 0.2).powi(2)
}

fn main() -> bayesopt::Result<()> {
    let dir = std::env::temp_dir().join("bayesopt-ask-tell");
    let store = Store::open(&dir)?;
    let id = store.save(&Campaign::new(LoopConfig::new(Bounds::unit(2)?, 4, 12))?)?;
    println!("campaign {id} in {}", dir.display());

    loop {
        let mut c = store.load(&id)?;
        let Ok(s) = c.suggest() else { break };
        store.save(&c)?;
        let x = s.x().to_vec();
        let y = experiment(&x);
        store.update(&id, |c| c.tell(x, y))?;
    }

    let c = store.load(&id)?;
    let best = c.summary().best.expect("observations");
    println!("best {:?} -> {:.5}", best.x, best.y);
    print!("{}", trace_csv(c.state.trace(), 2));
    let slice = posterior_slice(&c.state, 0, Some(best.x.clone()), 5)?;
    print!("{}", slice.to_csv());
    store.delete(&id)?;
    Ok(())
}
