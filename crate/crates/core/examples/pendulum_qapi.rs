//! Approximate policy iteration on the cart-pole pendulum with Fourier
//! features and noisy weight solves.
//!
//! cargo run --release --example pendulum_qapi -- [tomography|per-state] [seed]
//!
//! The global strategy needs a finite state space and is rejected here.

use qpi_sim::env::pendulum::{collect_samples, PendulumParams};
use qpi_sim::qapi::{balancing_curve, run_qapi, FeatureMap, QapiConfig, QapiEnvironment, SampleFeatures, Strategy};
use qpi_sim::qpi::Shots;

fn main() -> qpi_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args.next().as_deref().unwrap_or("per-state").parse()?;
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let params = PendulumParams::default();
    let source = collect_samples(&params, 5000, seed)?;
    println!("{} samples, {:.1}% terminal", source.len(), 100.0 * source.terminal_fraction());

    let map = FeatureMap::pendulum(4)?;
    let features = SampleFeatures::new(&source, &map)?;
    let mut config = QapiConfig::new(1e-2, 8, seed, strategy);
    config.shots = Shots::Fixed(100);
    let env = QapiEnvironment::Samples { features: &features, map: &map, discount: 0.95 };
    let trace = run_qapi(&env, &config)?;
    let curve = balancing_curve(&trace, &params, &map, 10, 3000, seed)?;
    for (r, steps) in trace.records.iter().zip(curve) {
        println!("iter {}  mean balancing steps {:>7.1}  fallbacks {}", r.iteration, steps, r.fallback_states);
    }
    Ok(())
}
