//! Concrete environments: a grid FrozenLake expressed as an explicit [`Mdp`](crate::mdp::Mdp)
//! and the cart-pole inverted pendulum as a continuous simulator.

pub mod frozenlake;
pub mod pendulum;

pub use frozenlake::{frozenlake_to_mdp, generate_diagonal_map, parse_map, FrozenLakeSpec, ACTIONS};
pub use pendulum::{
    collect_samples, evaluate_balancing, pendulum_step, PendulumParams, PendulumState, SampleSource,
    TransitionSample,
};
