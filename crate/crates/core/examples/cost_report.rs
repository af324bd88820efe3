//! Evaluates the symbolic cost formulas for a few lake sizes.

use qpi_sim::blockenc::{estimate_cost, CostFormula, CostModel, COST_MODEL_NOTE};

fn main() -> qpi_sim::Result<()> {
    println!("{:>6} {}", "S", CostFormula::ALL.map(|f| format!("{:>22}", f.name())).join(""));
    for side in [4usize, 8, 16, 32] {
        let s = (side * side) as f64;
        let k = 4.0 * s;
        let model = CostModel {
            t_p: Some(1.0),
            t_ppi: Some(1.0),
            t_r: Some(1.0),
            t_pi: Some(1.0),
            t_phi: Some(1.0),
            t_phi_tilde: Some(1.0),
            t_r_tilde: Some(1.0),
            num_states: Some(s),
            num_actions: Some(4.0),
            num_features: Some(k),
            num_samples: Some(5000.0),
            discount: Some(0.9),
            epsilon: Some(1e-2),
            mu_ppi: Some(8f64.sqrt()),
            mu_phi: Some(k.sqrt()),
            mu_phi_tilde: Some(k.sqrt()),
            kappa_phi: Some(1.0),
            kappa_phi_tilde: Some(1.0),
            omega: Some(2.373),
        };
        let row: Vec<String> = CostFormula::ALL
            .iter()
            .map(|&f| estimate_cost(&model, f).map(|c| format!("{c:>22.4e}")))
            .collect::<qpi_sim::Result<_>>()?;
        println!("{:>6} {}", s, row.join(""));
    }
    println!("\n{COST_MODEL_NOTE}");
    Ok(())
}
