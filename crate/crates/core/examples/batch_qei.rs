//! Batches of four from Constant Liar and from joint Monte-Carlo q-EI, with
//! each batch's parallel EI.

use bayesopt::acq::{constant_liar_batch, default_ei_incumbent, parallel_ei, AcquisitionSpec, LieValue, QeiMethod};
use bayesopt::acqopt::AscentConfig;
use bayesopt::driver::{LoopConfig, Optimizer};
use bayesopt::gp::Bounds;
use bayesopt::rng::seeded;

fn objective(x: &[f64]) -> f64 {
    (5.0 * x[0]).sin() * (3.0 * x[1]).cos()
}

fn main() -> bayesopt::Result<()> {
    let bounds = Bounds::unit(2)?;
    let mut config = LoopConfig::new(bounds.clone(), 6, 30);
    config.acquisition = AcquisitionSpec::Qei { q: 4, replications: 2000, method: QeiMethod::JointMc, lie: LieValue::Mean };
    let mut opt = Optimizer::new(config)?;
    for _ in 0..6 {
        let x = opt.suggest()?.x().to_vec();
        opt.ingest(x.clone(), objective(&x))?;
    }
    let state = opt.posteriors()?.pop().expect("one model");
    let f_star = default_ei_incumbent(&state);
    for lie in [LieValue::Min, LieValue::Mean, LieValue::Max] {
        let batch = constant_liar_batch(&state, 4, lie, &bounds, &AscentConfig::default(), &mut seeded(1))?;
        let q = parallel_ei(&state, &batch, f_star, 20_000, &mut seeded(2))?;
        println!("constant liar {lie:?}: q-EI {:.4} +- {:.4}", q.value, q.std_error);
    }
    let s = opt.suggest()?;
    println!("joint Monte Carlo picks {:?} with q-EI {:.4}", s.points, s.acq_value.unwrap_or(f64::NAN));
    for x in s.points {
        opt.ingest(x.clone(), objective(&x))?;
    }
    println!("evaluations so far: {}", opt.data().len());
    Ok(())
}
