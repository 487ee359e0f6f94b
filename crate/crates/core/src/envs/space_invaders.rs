//! MinAtar Space Invaders, without difficulty ramping. Fully deterministic.

use super::{check_action, EnvSpec, Environment, Observation, StepResult};
use crate::error::Result;

const CANNON: usize = 0;
const ALIEN: usize = 1;
const ALIEN_LEFT: usize = 2;
const ALIEN_RIGHT: usize = 3;
const FRIENDLY_BULLET: usize = 4;
const ENEMY_BULLET: usize = 5;

const SHOT_COOL_DOWN: i32 = 5;
const ENEMY_MOVE_INTERVAL: i32 = 12;
const ENEMY_SHOT_INTERVAL: i32 = 10;

/// Minimal action set: no-op, left, right, fire.
pub const NOOP: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;
pub const FIRE: usize = 3;

type Grid = [[bool; 10]; 10];

pub struct SpaceInvaders {
    spec: EnvSpec,
    pos: usize,
    friendly: Grid,
    enemy: Grid,
    aliens: Grid,
    alien_dir: i32,
    alien_move_timer: i32,
    alien_shot_timer: i32,
    shot_timer: i32,
    terminal: bool,
}

impl Default for SpaceInvaders {
    fn default() -> Self {
        Self::new()
    }
}

fn alien_block() -> Grid {
    let mut g = [[false; 10]; 10];
    for row in &mut g[0..4] {
        row[2..8].fill(true);
    }
    g
}

fn count(g: &Grid) -> usize {
    g.iter().flatten().filter(|&&b| b).count()
}

fn column_occupied(g: &Grid, x: usize) -> bool {
    g.iter().any(|row| row[x])
}

/// Cyclic shift of rows by `k` (positive moves content down).
fn roll_rows(g: &Grid, k: i32) -> Grid {
    let mut out = [[false; 10]; 10];
    for (y, row) in g.iter().enumerate() {
        out[(y as i32 + k).rem_euclid(10) as usize] = *row;
    }
    out
}

/// Cyclic shift of columns by `k` (positive moves content right).
fn roll_cols(g: &Grid, k: i32) -> Grid {
    let mut out = [[false; 10]; 10];
    for (y, row) in g.iter().enumerate() {
        for (x, &b) in row.iter().enumerate() {
            out[y][(x as i32 + k).rem_euclid(10) as usize] = b;
        }
    }
    out
}

impl SpaceInvaders {
    pub fn new() -> Self {
        let mut env = Self {
            spec: EnvSpec {
                name: "space_invaders".into(),
                actions: 4,
                shape: (10, 10, 6),
                r_max: 1.0,
            },
            pos: 5,
            friendly: [[false; 10]; 10],
            enemy: [[false; 10]; 10],
            aliens: alien_block(),
            alien_dir: -1,
            alien_move_timer: ENEMY_MOVE_INTERVAL,
            alien_shot_timer: ENEMY_SHOT_INTERVAL,
            shot_timer: 0,
            terminal: false,
        };
        env.reset(0);
        env
    }

    /// Lowest alien of the occupied column closest to `pos` (ties go left).
    fn nearest_alien(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by_key(|&x| (x as i32 - self.pos as i32).abs());
        order.into_iter().find_map(|x| {
            (0..10).rev().find(|&y| self.aliens[y][x]).map(|y| (y, x))
        })
    }
}

impl Environment for SpaceInvaders {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.pos = 5;
        self.friendly = [[false; 10]; 10];
        self.enemy = [[false; 10]; 10];
        self.aliens = alien_block();
        self.alien_dir = -1;
        self.alien_move_timer = ENEMY_MOVE_INTERVAL;
        self.alien_shot_timer = ENEMY_SHOT_INTERVAL;
        self.shot_timer = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(&self.spec, action, self.terminal)?;
        let mut reward = 0.0;
        match action {
            FIRE if self.shot_timer == 0 => {
                self.friendly[9][self.pos] = true;
                self.shot_timer = SHOT_COOL_DOWN;
            }
            LEFT => self.pos = self.pos.saturating_sub(1),
            RIGHT => self.pos = (self.pos + 1).min(9),
            _ => {}
        }

        self.friendly = roll_rows(&self.friendly, -1);
        self.friendly[9] = [false; 10];

        self.enemy = roll_rows(&self.enemy, 1);
        self.enemy[0] = [false; 10];
        if self.enemy[9][self.pos] {
            self.terminal = true;
        }

        if self.aliens[9][self.pos] {
            self.terminal = true;
        }
        if self.alien_move_timer == 0 {
            self.alien_move_timer = (count(&self.aliens) as i32).min(ENEMY_MOVE_INTERVAL);
            let at_left = column_occupied(&self.aliens, 0) && self.alien_dir < 0;
            let at_right = column_occupied(&self.aliens, 9) && self.alien_dir > 0;
            if at_left || at_right {
                self.alien_dir = -self.alien_dir;
                if self.aliens[9].iter().any(|&b| b) {
                    self.terminal = true;
                }
                self.aliens = roll_rows(&self.aliens, 1);
            } else {
                self.aliens = roll_cols(&self.aliens, self.alien_dir);
            }
            if self.aliens[9][self.pos] {
                self.terminal = true;
            }
        }
        if self.alien_shot_timer == 0 {
            self.alien_shot_timer = ENEMY_SHOT_INTERVAL;
            if let Some((y, x)) = self.nearest_alien() {
                self.enemy[y][x] = true;
            }
        }

        for y in 0..10 {
            for x in 0..10 {
                if self.aliens[y][x] && self.friendly[y][x] {
                    reward += 1.0;
                    self.aliens[y][x] = false;
                    self.friendly[y][x] = false;
                }
            }
        }

        if self.shot_timer > 0 {
            self.shot_timer -= 1;
        }
        self.alien_move_timer -= 1;
        self.alien_shot_timer -= 1;
        if count(&self.aliens) == 0 {
            self.aliens = alien_block();
        }
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Observation {
        let mut o = Observation::new(10, 10, 6);
        o.set(9, self.pos, CANNON);
        let dir_channel = if self.alien_dir < 0 {
            ALIEN_LEFT
        } else {
            ALIEN_RIGHT
        };
        for y in 0..10 {
            for x in 0..10 {
                if self.aliens[y][x] {
                    o.set(y, x, ALIEN);
                    o.set(y, x, dir_channel);
                }
                if self.friendly[y][x] {
                    o.set(y, x, FRIENDLY_BULLET);
                }
                if self.enemy[y][x] {
                    o.set(y, x, ENEMY_BULLET);
                }
            }
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_layout() {
        let mut env = SpaceInvaders::new();
        let o = env.reset(0);
        assert_eq!(o.count_channel(ALIEN), 24);
        assert_eq!(o.count_channel(ALIEN_LEFT), 24);
        assert_eq!(o.cells(CANNON), vec![(9, 5)]);
    }

    #[test]
    fn shot_travels_up_and_kills() {
        let mut env = SpaceInvaders::new();
        env.reset(0);
        env.pos = 4;
        let mut total = 0.0;
        let mut r = env.step(FIRE).unwrap();
        total += r.reward;
        for _ in 0..10 {
            if r.terminal {
                break;
            }
            r = env.step(NOOP).unwrap();
            total += r.reward;
        }
        assert_eq!(total, 1.0);
        assert_eq!(count(&env.aliens), 23);
    }

    #[test]
    fn fire_respects_cool_down() {
        let mut env = SpaceInvaders::new();
        env.reset(0);
        env.step(FIRE).unwrap();
        env.step(FIRE).unwrap();
        assert_eq!(count(&env.friendly), 1);
    }
}
