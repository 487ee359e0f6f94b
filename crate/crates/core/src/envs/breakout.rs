//! MinAtar Breakout.
//!
//! The paddle moves first, then the ball. A ball entering a brick cell
//! removes the brick, pays 1 and bounces back vertically. Once all bricks
//! are cleared a new wall of three rows appears when the ball next reaches
//! the paddle row. Missing the ball ends the episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvSpec, Environment, Observation, StepResult};
use crate::error::Result;

const PADDLE: usize = 0;
const BALL: usize = 1;
const TRAIL: usize = 2;
const BRICK: usize = 3;

/// Minimal action set: no-op, left, right.
pub const NOOP: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;

pub struct Breakout {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    ball_x: i32,
    ball_y: i32,
    // 0: up-left, 1: up-right, 2: down-right, 3: down-left
    ball_dir: usize,
    pos: i32,
    bricks: [[bool; 10]; 10],
    strike: bool,
    last_x: i32,
    last_y: i32,
    terminal: bool,
}

impl Default for Breakout {
    fn default() -> Self {
        Self::new()
    }
}

impl Breakout {
    pub fn new() -> Self {
        let mut env = Self {
            spec: EnvSpec {
                name: "breakout".into(),
                actions: 3,
                shape: (10, 10, 4),
                r_max: 1.0,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
            ball_x: 0,
            ball_y: 0,
            ball_dir: 0,
            pos: 0,
            bricks: [[false; 10]; 10],
            strike: false,
            last_x: 0,
            last_y: 0,
            terminal: false,
        };
        env.reset(0);
        env
    }

    fn brick_count(&self) -> usize {
        self.bricks.iter().flatten().filter(|&&b| b).count()
    }

    fn fill_wall(&mut self) {
        for row in &mut self.bricks[1..4] {
            row.fill(true);
        }
    }
}

impl Environment for Breakout {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.ball_y = 3;
        let (x, dir) = if self.rng.gen_range(0..2) == 0 {
            (0, 2)
        } else {
            (9, 3)
        };
        self.ball_x = x;
        self.ball_dir = dir;
        self.pos = 4;
        self.bricks = [[false; 10]; 10];
        self.fill_wall();
        self.strike = false;
        self.last_x = self.ball_x;
        self.last_y = self.ball_y;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(&self.spec, action, self.terminal)?;
        let mut reward = 0.0;
        match action {
            LEFT => self.pos = (self.pos - 1).max(0),
            RIGHT => self.pos = (self.pos + 1).min(9),
            _ => {}
        }

        self.last_x = self.ball_x;
        self.last_y = self.ball_y;
        let (mut new_x, mut new_y) = match self.ball_dir {
            0 => (self.ball_x - 1, self.ball_y - 1),
            1 => (self.ball_x + 1, self.ball_y - 1),
            2 => (self.ball_x + 1, self.ball_y + 1),
            _ => (self.ball_x - 1, self.ball_y + 1),
        };

        let mut strike_toggle = false;
        if !(0..=9).contains(&new_x) {
            new_x = new_x.clamp(0, 9);
            self.ball_dir = [1, 0, 3, 2][self.ball_dir];
        }
        if new_y < 0 {
            new_y = 0;
            self.ball_dir = [3, 2, 1, 0][self.ball_dir];
        } else if self.bricks[new_y as usize][new_x as usize] {
            strike_toggle = true;
            if !self.strike {
                reward += 1.0;
                self.strike = true;
                self.bricks[new_y as usize][new_x as usize] = false;
                new_y = self.last_y;
                self.ball_dir = [3, 2, 1, 0][self.ball_dir];
            }
        } else if new_y == 9 {
            if self.brick_count() == 0 {
                self.fill_wall();
            }
            if self.ball_x == self.pos {
                self.ball_dir = [3, 2, 1, 0][self.ball_dir];
                new_y = self.last_y;
            } else if new_x == self.pos {
                self.ball_dir = [2, 3, 0, 1][self.ball_dir];
                new_y = self.last_y;
            } else {
                self.terminal = true;
            }
        }
        if !strike_toggle {
            self.strike = false;
        }

        self.ball_x = new_x;
        self.ball_y = new_y;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Observation {
        let mut o = Observation::new(10, 10, 4);
        o.set(self.ball_y as usize, self.ball_x as usize, BALL);
        o.set(9, self.pos as usize, PADDLE);
        o.set(self.last_y as usize, self.last_x as usize, TRAIL);
        for (y, row) in self.bricks.iter().enumerate() {
            for (x, &b) in row.iter().enumerate() {
                if b {
                    o.set(y, x, BRICK);
                }
            }
        }
        o
    }
}
