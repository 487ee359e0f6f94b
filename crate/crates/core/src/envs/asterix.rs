//! MinAtar Asterix, without difficulty ramping.
//!
//! The player moves on rows 1-8. Every ten steps an entity spawns at the
//! left or right edge of a free lane; one in three is gold. Entities advance
//! one cell every five steps. Touching gold pays 1, touching an enemy ends
//! the episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvSpec, Environment, Observation, StepResult};
use crate::error::Result;

const PLAYER: usize = 0;
const ENEMY: usize = 1;
const TRAIL: usize = 2;
const GOLD: usize = 3;

const SPAWN_SPEED: i32 = 10;
const MOVE_INTERVAL: i32 = 5;

/// Minimal action set: no-op, left, up, right, down.
pub const NOOP: usize = 0;
pub const LEFT: usize = 1;
pub const UP: usize = 2;
pub const RIGHT: usize = 3;
pub const DOWN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Entity {
    x: i32,
    y: i32,
    moving_right: bool,
    gold: bool,
}

pub struct Asterix {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    player_x: i32,
    player_y: i32,
    entities: [Option<Entity>; 8],
    spawn_timer: i32,
    move_timer: i32,
    terminal: bool,
}

impl Default for Asterix {
    fn default() -> Self {
        Self::new()
    }
}

impl Asterix {
    pub fn new() -> Self {
        let mut env = Self {
            spec: EnvSpec {
                name: "asterix".into(),
                actions: 5,
                shape: (10, 10, 4),
                r_max: 1.0,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
            player_x: 5,
            player_y: 5,
            entities: [None; 8],
            spawn_timer: 0,
            move_timer: 0,
            terminal: false,
        };
        env.reset(0);
        env
    }

    fn spawn_entity(&mut self) {
        let moving_right = self.rng.gen_range(0..2) == 0;
        let gold = self.rng.gen_range(0..3) == 0;
        let free: Vec<usize> = (0..8).filter(|&i| self.entities[i].is_none()).collect();
        if free.is_empty() {
            return;
        }
        let slot = free[self.rng.gen_range(0..free.len())];
        self.entities[slot] = Some(Entity {
            x: if moving_right { 0 } else { 9 },
            y: slot as i32 + 1,
            moving_right,
            gold,
        });
    }

    /// Resolve contact between the player and entity `i`.
    fn touch(&mut self, i: usize, reward: &mut f64) {
        if let Some(e) = self.entities[i] {
            if e.x == self.player_x && e.y == self.player_y {
                if e.gold {
                    self.entities[i] = None;
                    *reward += 1.0;
                } else {
                    self.terminal = true;
                }
            }
        }
    }
}

impl Environment for Asterix {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.player_x = 5;
        self.player_y = 5;
        self.entities = [None; 8];
        self.spawn_timer = SPAWN_SPEED;
        self.move_timer = MOVE_INTERVAL;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(&self.spec, action, self.terminal)?;
        let mut reward = 0.0;
        if self.spawn_timer == 0 {
            self.spawn_entity();
            self.spawn_timer = SPAWN_SPEED;
        }
        match action {
            LEFT => self.player_x = (self.player_x - 1).max(0),
            RIGHT => self.player_x = (self.player_x + 1).min(9),
            UP => self.player_y = (self.player_y - 1).max(1),
            DOWN => self.player_y = (self.player_y + 1).min(8),
            _ => {}
        }
        for i in 0..8 {
            self.touch(i, &mut reward);
        }
        if self.move_timer == 0 {
            self.move_timer = MOVE_INTERVAL;
            for i in 0..8 {
                if let Some(e) = &mut self.entities[i] {
                    e.x += if e.moving_right { 1 } else { -1 };
                    if !(0..=9).contains(&e.x) {
                        self.entities[i] = None;
                    }
                }
                self.touch(i, &mut reward);
            }
        }
        self.spawn_timer -= 1;
        self.move_timer -= 1;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Observation {
        let mut o = Observation::new(10, 10, 4);
        o.set(self.player_y as usize, self.player_x as usize, PLAYER);
        for e in self.entities.iter().flatten() {
            o.set(e.y as usize, e.x as usize, if e.gold { GOLD } else { ENEMY });
            let back_x = if e.moving_right { e.x - 1 } else { e.x + 1 };
            if (0..=9).contains(&back_x) {
                o.set(e.y as usize, back_x as usize, TRAIL);
            }
        }
        o
    }
}
