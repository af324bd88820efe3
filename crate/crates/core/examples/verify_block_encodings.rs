//! Builds the oracle-pair block encodings for the 4x4 lake and checks that
//! each one reconstructs its target matrix.

use qpi_sim::blockenc::{
    build_oracle_pair_p, build_oracle_pair_pi, build_projection_pi, compute_cp, evaluation_matrix_encoding,
    policy_transition_encoding,
};
use qpi_sim::env::frozenlake::{frozenlake_to_mdp, parse_map, MAP_4X4};
use qpi_sim::mdp::{build_policy_transition, Policy};

fn main() -> qpi_sim::Result<()> {
    let mdp = frozenlake_to_mdp(&parse_map(MAP_4X4)?, 0.9)?;
    let policy = Policy::uniform(mdp.num_states(), mdp.num_actions());
    println!("c_P = {}", compute_cp(&mdp));

    let p = build_oracle_pair_p(&mdp)?;
    println!("P:      dim {:>5}  isometry err {:.1e}  {:?}", p.main_dim(), p.isometry_error(), p.encoding().report(&mdp.transition_matrix())?);

    let pi = build_oracle_pair_pi(&policy, mdp.num_states(), mdp.num_actions())?;
    let target = build_projection_pi(&policy, mdp.num_states(), mdp.num_actions())?;
    println!("Pi:     dim {:>5}  isometry err {:.1e}  {:?}", pi.main_dim(), pi.isometry_error(), pi.encoding().report(&target)?);

    let ppi = build_policy_transition(&mdp, &policy)?;
    println!("P^pi:   {:?}", policy_transition_encoding(&mdp, &policy)?.report(&ppi.matrix)?);
    println!("I-gP^pi {:?}", evaluation_matrix_encoding(&mdp, &policy)?.report(&ppi.evaluation_matrix(mdp.discount()))?);
    Ok(())
}
