//! Collects pendulum transitions under a uniform random policy and writes
//! them as CSV to stdout.
//!
//! cargo run --release --example collect_samples -- [count] [seed] > samples.csv

use qpi_sim::env::pendulum::{collect_samples, PendulumParams};

fn main() -> qpi_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(1000, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let source = collect_samples(&PendulumParams::default(), count, seed)?;
    eprintln!("{} transitions, {:.1}% terminal", source.len(), 100.0 * source.terminal_fraction());
    source.write_csv(std::io::stdout().lock())?;
    Ok(())
}
