//! Noisy linear-solver outputs and the tomography that reads them back.

use nalgebra::DMatrix;
use qpi_sim::quantum::{
    normalized_solution, shots_for, sign_resolution, simulate_solver_state, tomography_estimate, SolverState,
};
use qpi_sim::SystemKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn main() -> qpi_sim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
    let b = [1.0, -2.0, 0.5];
    let exact = normalized_solution(&a, &b, SystemKind::Generic)?;
    println!("exact |x>         {exact:.4?}");
    for eps in [0.2, 0.05, 0.01] {
        let noisy = simulate_solver_state(&a, &b, eps, SystemKind::Generic, &mut rng)?;
        println!("eps {eps:<5} state {noisy:.4?}  dist {:.4}", dist(&noisy, &exact));
    }

    // every shot re-runs the solver, so each one sees fresh noise
    let eps = 0.05;
    let shots = shots_for(3, eps)?;
    let source = SolverState { exact: exact.clone(), epsilon: 0.01 };
    let est = tomography_estimate(&source, shots, true, sign_resolution(eps), &mut rng)?;
    println!("\n{shots} shots -> {:.4?}  sup err {:.4}", est.values, est.values.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    Ok(())
}
