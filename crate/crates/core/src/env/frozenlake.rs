//! Deterministic FrozenLake grids.
//!
//! Cells are addressed `(x, y)` with `x` the column and `y` the row, and the
//! state index is `y * width + x`. Walkable cells move by the chosen
//! displacement; holes and the goal are absorbing with zero reward. Entering
//! the goal from a walkable cell pays 1.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Action displacements `(dx, dy)`, in action-index order.
pub const ACTIONS: [(i64, i64); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenLakeSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major walkable flags. The goal is never walkable.
    pub walkable: Vec<bool>,
    pub goal: (usize, usize),
    pub start: Option<(usize, usize)>,
}

impl FrozenLakeSpec {
    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn state_index(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    pub fn position(&self, s: usize) -> (usize, usize) {
        (s % self.width, s / self.width)
    }

    pub fn is_walkable(&self, pos: (usize, usize)) -> bool {
        self.walkable[self.state_index(pos)]
    }

    pub fn num_walkable(&self) -> usize {
        self.walkable.iter().filter(|w| **w).count()
    }

    /// `pos + a`, or `None` when the move leaves the grid.
    pub fn shifted(&self, (x, y): (usize, usize), action: usize) -> Option<(usize, usize)> {
        let (dx, dy) = ACTIONS[action];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            None
        } else {
            Some((nx as usize, ny as usize))
        }
    }

    /// Whether the goal can be reached from `from` by walking.
    pub fn goal_reachable(&self, from: (usize, usize)) -> bool {
        if from == self.goal {
            return true;
        }
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([from]);
        seen[self.state_index(from)] = true;
        while let Some(pos) = queue.pop_front() {
            if !self.is_walkable(pos) {
                continue;
            }
            for a in 0..ACTIONS.len() {
                if let Some(next) = self.shifted(pos, a) {
                    if next == self.goal {
                        return true;
                    }
                    let idx = self.state_index(next);
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        false
    }

    /// Renders the grid back to `S/F/H/G` text, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = if (x, y) == self.goal {
                    'G'
                } else if Some((x, y)) == self.start {
                    'S'
                } else if self.is_walkable((x, y)) {
                    'F'
                } else {
                    'H'
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a grid over `{S, F, H, G}`. Rows are separated by newlines or `/`.
pub fn parse_map(text: &str) -> Result<FrozenLakeSpec> {
    let rows: Vec<&str> = text
        .split(['\n', '/'])
        .map(|r| r.trim_end_matches('\r').trim())
        .filter(|r| !r.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(Error::MapParse {
            line: 1,
            column: 1,
            message: "empty map".into(),
        });
    }
    let width = rows[0].chars().count();
    let mut walkable = Vec::with_capacity(width * rows.len());
    let mut goal = None;
    let mut start = None;
    for (y, row) in rows.iter().enumerate() {
        let len = row.chars().count();
        if len != width {
            return Err(Error::MapParse {
                line: y + 1,
                column: len.min(width) + 1,
                message: format!("ragged row: expected {width} cells, found {len}"),
            });
        }
        for (x, c) in row.chars().enumerate() {
            let err = |message: String| Error::MapParse {
                line: y + 1,
                column: x + 1,
                message,
            };
            match c {
                'S' => {
                    if start.is_some() {
                        return Err(err("more than one start cell".into()));
                    }
                    start = Some((x, y));
                    walkable.push(true);
                }
                'F' => walkable.push(true),
                'H' => walkable.push(false),
                'G' => {
                    if goal.is_some() {
                        return Err(err("more than one goal cell".into()));
                    }
                    goal = Some((x, y));
                    walkable.push(false);
                }
                other => return Err(err(format!("unknown cell `{other}`"))),
            }
        }
    }
    let goal = goal.ok_or(Error::MapParse {
        line: rows.len(),
        column: width,
        message: "no goal cell".into(),
    })?;
    Ok(FrozenLakeSpec {
        width,
        height: rows.len(),
        walkable,
        goal,
        start,
    })
}

/// The standard 4×4 map.
pub const MAP_4X4: &str = "SFFF\nFHFH\nFFFH\nHFFG\n";

/// `n × n` grid with a non-walkable border, holes on the diagonal
/// `(1,1) … (n-3,n-3)` and the goal at `(n-2, n-2)`.
pub fn generate_diagonal_map(n: usize) -> Result<FrozenLakeSpec> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "diagonal map needs n >= 4 to contain a walkable path, got {n}"
        )));
    }
    let goal = (n - 2, n - 2);
    let mut walkable = vec![false; n * n];
    for y in 1..n - 1 {
        for x in 1..n - 1 {
            walkable[y * n + x] = x != y;
        }
    }
    let start = (1..n - 1)
        .flat_map(|y| (1..n - 1).map(move |x| (x, y)))
        .find(|&(x, y)| walkable[y * n + x]);
    let spec = FrozenLakeSpec {
        width: n,
        height: n,
        walkable,
        goal,
        start,
    };
    Ok(spec)
}

/// Builds the deterministic MDP of a grid. Moves off the grid from a
/// walkable cell stay in place.
pub fn frozenlake_to_mdp(spec: &FrozenLakeSpec, discount: f64) -> Result<Mdp> {
    let (gx, gy) = spec.goal;
    if gx >= spec.width || gy >= spec.height {
        return Err(Error::InvalidArgument(format!(
            "goal {:?} outside {}x{} grid",
            spec.goal, spec.width, spec.height
        )));
    }
    if spec.walkable.len() != spec.num_states() {
        return Err(Error::DimensionMismatch {
            what: "walkable flags",
            expected: spec.num_states(),
            got: spec.walkable.len(),
        });
    }
    if spec.is_walkable(spec.goal) {
        return Err(Error::InvalidArgument("goal cell cannot be walkable".into()));
    }
    let ns = spec.num_states();
    let na = ACTIONS.len();
    let mut transitions = vec![0.0; ns * na * ns];
    let mut rewards = vec![0.0; ns * na];
    for s in 0..ns {
        let pos = spec.position(s);
        for a in 0..na {
            let row = (s * na + a) * ns;
            if spec.walkable[s] {
                let next = spec.shifted(pos, a).unwrap_or(pos);
                transitions[row + spec.state_index(next)] = 1.0;
                if next == spec.goal {
                    rewards[s * na + a] = 1.0;
                }
            } else {
                transitions[row + s] = 1.0;
            }
        }
    }
    Mdp::new(ns, na, transitions, rewards, discount)
}
