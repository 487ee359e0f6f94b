//! MinAtar Freeway.
//!
//! The chicken starts at the bottom of column 4 and must reach row 0. It can
//! move at most once every three steps. Eight cars, one per lane (rows 1-8),
//! move horizontally at random speeds and wrap around; a collision sends the
//! chicken back to the bottom. Reaching the top pays 1, re-randomizes car
//! speeds and restarts the chicken at the bottom. Episodes last 2500 steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvSpec, Environment, Observation, StepResult};
use crate::error::Result;

const CHICKEN: usize = 0;
const CAR: usize = 1;
// channels 2..=6 encode the speed (1..=5) of the car owning a trail cell
const SPEED_BASE: usize = 2;

const PLAYER_SPEED: i32 = 3;
const TIME_LIMIT: i32 = 2500;

/// Minimal action set: no-op, up, down.
pub const NOOP: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Car {
    x: i32,
    y: i32,
    timer: i32,
    // signed: sign is the direction, magnitude the period in steps
    speed: i32,
}

pub struct Freeway {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    cars: Vec<Car>,
    pos: i32,
    move_timer: i32,
    terminate_timer: i32,
    terminal: bool,
}

impl Default for Freeway {
    fn default() -> Self {
        Self::new()
    }
}

impl Freeway {
    pub fn new() -> Self {
        let mut env = Self {
            spec: EnvSpec {
                name: "freeway".into(),
                actions: 3,
                shape: (10, 10, 7),
                r_max: 1.0,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
            cars: Vec::new(),
            pos: 9,
            move_timer: 0,
            terminate_timer: 0,
            terminal: false,
        };
        env.reset(0);
        env
    }

    fn random_speeds(&mut self) -> [i32; 8] {
        let mut speeds = [0; 8];
        for s in &mut speeds {
            *s = self.rng.gen_range(1..6);
        }
        for s in &mut speeds {
            if self.rng.gen_range(0..2) == 0 {
                *s = -*s;
            }
        }
        speeds
    }

    fn randomize_cars(&mut self, initialize: bool) {
        let speeds = self.random_speeds();
        if initialize {
            self.cars = speeds
                .iter()
                .enumerate()
                .map(|(i, &s)| Car {
                    x: 0,
                    y: i as i32 + 1,
                    timer: s.abs(),
                    speed: s,
                })
                .collect();
        } else {
            for (car, &s) in self.cars.iter_mut().zip(&speeds) {
                car.timer = s.abs();
                car.speed = s;
            }
        }
    }
}

impl Environment for Freeway {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.randomize_cars(true);
        self.pos = 9;
        self.move_timer = PLAYER_SPEED;
        self.terminate_timer = TIME_LIMIT;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(&self.spec, action, self.terminal)?;
        let mut reward = 0.0;
        if action == UP && self.move_timer == 0 {
            self.move_timer = PLAYER_SPEED;
            self.pos = (self.pos - 1).max(0);
        } else if action == DOWN && self.move_timer == 0 {
            self.move_timer = PLAYER_SPEED;
            self.pos = (self.pos + 1).min(9);
        }

        if self.pos == 0 {
            reward += 1.0;
            self.randomize_cars(false);
            self.pos = 9;
        }

        for i in 0..self.cars.len() {
            let car = &mut self.cars[i];
            if car.x == 4 && car.y == self.pos {
                self.pos = 9;
            }
            if car.timer == 0 {
                car.timer = car.speed.abs();
                car.x += car.speed.signum();
                if car.x < 0 {
                    car.x = 9;
                } else if car.x > 9 {
                    car.x = 0;
                }
                if car.x == 4 && car.y == self.pos {
                    self.pos = 9;
                }
            } else {
                car.timer -= 1;
            }
        }

        if self.move_timer > 0 {
            self.move_timer -= 1;
        }
        self.terminate_timer -= 1;
        if self.terminate_timer < 0 {
            self.terminal = true;
        }
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Observation {
        let mut o = Observation::new(10, 10, 7);
        o.set(self.pos as usize, 4, CHICKEN);
        for car in &self.cars {
            o.set(car.y as usize, car.x as usize, CAR);
            let mut back_x = if car.speed > 0 { car.x - 1 } else { car.x + 1 };
            if back_x < 0 {
                back_x = 9;
            } else if back_x > 9 {
                back_x = 0;
            }
            let trail = SPEED_BASE + car.speed.unsigned_abs() as usize - 1;
            o.set(car.y as usize, back_x as usize, trail);
        }
        o
    }
}
