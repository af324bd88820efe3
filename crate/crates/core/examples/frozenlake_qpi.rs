//! Quantum policy iteration on the 4x4 lake with simulated solver noise.
//!
//! cargo run --release --example frozenlake_qpi -- [epsilon] [seed]

use qpi_sim::env::frozenlake::{frozenlake_to_mdp, parse_map, MAP_4X4};
use qpi_sim::qpi::{check_suboptimality_bounds, run_qpi, QpiConfig};

fn main() -> qpi_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(1e-2, |s| s.parse().expect("epsilon"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let spec = parse_map(MAP_4X4)?;
    let mdp = frozenlake_to_mdp(&spec, 0.9)?;
    let trace = run_qpi(&mdp, &QpiConfig::new(epsilon, 5, seed))?;
    println!("shots per iteration: {}", trace.shots);
    for r in &trace.records {
        println!(
            "iter {}  tomography err {:.2e}  rho gap {:.2e}  next sup gap {:.2e}",
            r.iteration, r.tomography_error, r.rho_gap, r.next_sup_gap
        );
    }
    for c in check_suboptimality_bounds(&trace)? {
        println!("last {} iterations: {:.3e} <= {:.3e} ({}{})", c.tail, c.lhs, c.rhs, c.holds, if c.vacuous { ", vacuous" } else { "" });
    }

    let policy = trace.final_policy().expect("at least one iteration");
    println!("\nfinal policy, sup gap to Q* {:.1e}", trace.final_sup_gap().unwrap_or(f64::NAN));
    let arrows = ['>', '<', 'v', '^'];
    for y in 0..spec.height {
        let row: String = (0..spec.width)
            .map(|x| {
                let s = spec.state_index((x, y));
                if (x, y) == spec.goal {
                    'G'
                } else if !spec.walkable[s] {
                    'H'
                } else {
                    arrows[policy.action(s)]
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
