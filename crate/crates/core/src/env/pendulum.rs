//! Inverted pendulum on a cart, integrated with explicit Euler steps.

use std::f64::consts::FRAC_PI_2;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    /// m/s²
    pub gravity: f64,
    /// kg
    pub pendulum_mass: f64,
    /// kg
    pub cart_mass: f64,
    /// m
    pub length: f64,
    /// s
    pub timestep: f64,
    /// Half-width of the uniform force noise, N.
    pub noise_half_width: f64,
    /// Applied forces per action index, N.
    pub forces: [f64; 3],
    /// Half-width of the uniform band the episode start state is drawn from.
    pub start_band: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            pendulum_mass: 2.0,
            cart_mass: 8.0,
            length: 0.5,
            timestep: 0.1,
            noise_half_width: 10.0,
            forces: [-50.0, 0.0, 50.0],
            start_band: 0.2,
        }
    }
}

impl PendulumParams {
    /// `1 / (m + M)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (self.pendulum_mass + self.cart_mass)
    }

    pub fn num_actions(&self) -> usize {
        self.forces.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timestep > 0.0) {
            return Err(Error::InvalidArgument("timestep must be positive".into()));
        }
        if !(self.length > 0.0 && self.pendulum_mass > 0.0 && self.cart_mass >= 0.0) {
            return Err(Error::InvalidArgument("masses and length must be positive".into()));
        }
        Ok(())
    }

    /// Angular acceleration at `state` under total horizontal force `force`.
    pub fn angular_acceleration(&self, state: PendulumState, force: f64) -> f64 {
        let (theta, omega) = (state.theta, state.omega);
        let alpha = self.alpha();
        let (m, l) = (self.pendulum_mass, self.length);
        let num = self.gravity * theta.sin()
            - alpha * m * l * omega * omega * (2.0 * theta).sin() / 2.0
            - alpha * theta.cos() * force;
        let den = 4.0 * l / 3.0 - alpha * m * l * theta.cos().powi(2);
        num / den
    }
}

/// `(θ, θ̇)`: angle from vertical (rad) and angular velocity (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub omega: f64,
}

impl PendulumState {
    pub fn new(theta: f64, omega: f64) -> Self {
        Self { theta, omega }
    }

    pub fn is_terminal(&self) -> bool {
        self.theta.abs() > FRAC_PI_2
    }

    /// Maps the state into `[0, 1]²`: the angle linearly from `[-π/2, π/2]`,
    /// the velocity clipped to `[-1, 1]` first.
    pub fn normalized(&self) -> [f64; 2] {
        let theta = ((self.theta + FRAC_PI_2) / std::f64::consts::PI).clamp(0.0, 1.0);
        let omega = (self.omega.clamp(-1.0, 1.0) + 1.0) / 2.0;
        [theta, omega]
    }
}

/// One Euler step. `noise` is the force perturbation drawn by the caller.
pub fn pendulum_step(
    params: &PendulumParams,
    state: PendulumState,
    force: f64,
    noise: f64,
) -> (PendulumState, bool) {
    debug_assert!(noise.abs() <= params.noise_half_width + 1e-12);
    let acc = params.angular_acceleration(state, force + noise);
    let dt = params.timestep;
    let next = PendulumState {
        theta: state.theta + dt * state.omega,
        omega: state.omega + dt * acc,
    };
    (next, next.is_terminal())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample {
    pub state: PendulumState,
    pub action: usize,
    pub next_state: PendulumState,
    pub reward: f64,
    pub terminal: bool,
}

/// An indexed, ordered memory of transition samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSource {
    samples: Vec<TransitionSample>,
}

impl SampleSource {
    pub fn new(samples: Vec<TransitionSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, i: usize) -> &TransitionSample {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[TransitionSample] {
        &self.samples
    }

    pub fn terminal_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.terminal).count() as f64 / self.samples.len() as f64
    }

    /// One line per sample: `i,θ,θ̇,a,θ',θ̇',r,terminal`, reals with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(
                out,
                "{i},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{}",
                s.state.theta,
                s.state.omega,
                s.action,
                s.next_state.theta,
                s.next_state.omega,
                s.reward,
                u8::from(s.terminal)
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::InvalidArgument(format!("sample line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let real = |i: usize| fields[i].parse::<f64>().map_err(|_| bad("bad number"));
            let index: usize = fields[0].parse().map_err(|_| bad("bad index"))?;
            if index != samples.len() {
                return Err(bad("indices must be consecutive from 0"));
            }
            let action: usize = fields[3].parse().map_err(|_| bad("bad action"))?;
            let terminal = match fields[7] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("terminal flag must be 0 or 1")),
            };
            samples.push(TransitionSample {
                state: PendulumState::new(real(1)?, real(2)?),
                action,
                next_state: PendulumState::new(real(4)?, real(5)?),
                reward: real(6)?,
                terminal,
            });
        }
        Ok(Self { samples })
    }
}

fn start_state<R: Rng>(params: &PendulumParams, rng: &mut R) -> PendulumState {
    let b = params.start_band;
    PendulumState::new(rng.random_range(-b..=b), rng.random_range(-b..=b))
}

fn force_noise<R: Rng>(params: &PendulumParams, rng: &mut R) -> f64 {
    let w = params.noise_half_width;
    if w > 0.0 {
        rng.random_range(-w..=w)
    } else {
        0.0
    }
}

/// Random-policy episodes from near the upright position until `count`
/// transitions are recorded. Reward is 1 for every transition that does not
/// end the episode and 0 for the one that does.
pub fn collect_samples(params: &PendulumParams, count: usize, seed: u64) -> Result<SampleSource> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut state = start_state(params, &mut rng);
    while samples.len() < count {
        let action = rng.random_range(0..params.num_actions());
        let noise = force_noise(params, &mut rng);
        let (next, terminal) = pendulum_step(params, state, params.forces[action], noise);
        samples.push(TransitionSample {
            state,
            action,
            next_state: next,
            reward: if terminal { 0.0 } else { 1.0 },
            terminal,
        });
        state = if terminal { start_state(params, &mut rng) } else { next };
    }
    Ok(SampleSource { samples })
}

/// Mean number of non-terminating steps per episode, capped at `max_steps`.
pub fn evaluate_balancing<F>(
    params: &PendulumParams,
    policy: F,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(PendulumState) -> usize,
{
    if max_steps == 0 || episodes == 0 {
        return Err(Error::InvalidArgument("episodes and max_steps must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0usize;
    for _ in 0..episodes {
        let mut state = start_state(params, &mut rng);
        for _ in 0..max_steps {
            let action = policy(state);
            let noise = force_noise(params, &mut rng);
            let (next, terminal) = pendulum_step(params, state, params.forces[action], noise);
            if terminal {
                break;
            }
            total += 1;
            state = next;
        }
    }
    Ok(total as f64 / episodes as f64)
}
