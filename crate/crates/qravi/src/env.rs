//! Kinematic reach-avoid simulator: a differential-drive robot in a square
//! arena scattered with hazard discs (traversable, randomly costly), solid
//! square obstacles (impassable), and a goal disc that re-randomizes each
//! time it is reached.
//!
//! Everything is deterministic given the configuration, the episode seed,
//! and the action sequence. Scene entities are drawn uniformly on `[-1, 1]²`
//! at reset (rejection-sampled away from the robot's start disc) and stay
//! fixed for the episode; only the goal moves, immediately upon being
//! reached.
//!
//! Per step, in order: wheel kinematics update the pose; optional additive
//! Gaussian pose noise (off by default, no generator draws when off); heading
//! wraps to `(-π, π]` and the position clamps to the arena; obstacle contact
//! reverts the position (heading keeps its new value) and draws the obstacle
//! contact cost `U[0, 1]`; standing inside a hazard disc draws the hazard
//! cost `U[0, 1]`; the stage cost is the change in goal distance plus a
//! per-step penalty, minus a bonus on goal-reach steps; a reached goal is
//! re-randomized away from the robot's current position. The episode ends
//! exactly when the step counter hits the horizon.
//!
//! Observations are `[cos θ, sin θ, x, y]` followed by a pseudo-lidar image:
//! for each entity category (goal, then hazards, then obstacles) and each of
//! the uniform angular bins in the robot frame, the intensity
//! `max(0, 1 - d/range)` of the nearest category entity whose bearing falls
//! in that bin.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

/// Arena half-width: positions live in `[-ARENA_HALF, ARENA_HALF]²`.
pub const ARENA_HALF: f64 = 1.25;

/// Scene entities are placed uniformly on `[-PLACEMENT_HALF, PLACEMENT_HALF]²`.
pub const PLACEMENT_HALF: f64 = 1.0;

/// Wheel-speed pairs `(v_L, v_R)` of the five discrete actions: forward,
/// spin right, spin left, arc right, arc left.
pub const ACTION_TABLE: [(f64, f64); 5] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];

/// Draw budget for rejection-sampled entity placement.
const MAX_PLACEMENT_DRAWS: usize = 1000;

/// Simulator parameters. The defaults describe the desk-scale task: step
/// displacement about 1% of the arena width, so a few hundred steps suffice
/// to cross it several times.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Episode length T (steps).
    pub horizon: usize,
    /// Wheel radius r in the drive kinematics.
    pub wheel_radius: f64,
    /// Half the axle width d_w.
    pub half_axle: f64,
    /// Robot body radius (placement clearance and obstacle contact).
    pub robot_radius: f64,
    /// Hazard disc radius.
    pub hazard_radius: f64,
    /// Obstacle square half-width.
    pub obstacle_half_width: f64,
    /// Goal disc radius.
    pub goal_radius: f64,
    /// Lidar range: intensity decays linearly to zero at this distance.
    pub lidar_range: f64,
    /// Angular bins per lidar category.
    pub lidar_bins: usize,
    /// Per-step penalty c_g added to every stage cost.
    pub step_penalty: f64,
    /// Bonus subtracted from the stage cost on goal-reach steps.
    pub goal_bonus: f64,
    /// Hazard disc count.
    pub n_hazards: usize,
    /// Obstacle square count.
    pub n_obstacles: usize,
    /// Standard deviation of additive Gaussian pose noise (0 disables it and
    /// consumes no generator draws).
    pub pose_noise_sigma: f64,
    /// Base seed of the run this configuration belongs to (episode seeds are
    /// derived from it by the caller).
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon: 200,
            wheel_radius: 0.02,
            half_axle: 0.05,
            robot_radius: 0.05,
            hazard_radius: 0.1,
            obstacle_half_width: 0.075,
            goal_radius: 0.15,
            lidar_range: 3.0,
            lidar_bins: 16,
            step_penalty: 0.001,
            goal_bonus: 1.0,
            n_hazards: 10,
            n_obstacles: 10,
            pose_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Check the geometric and numeric domains.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        for (name, v) in [
            ("wheel_radius", self.wheel_radius),
            ("half_axle", self.half_axle),
            ("robot_radius", self.robot_radius),
            ("hazard_radius", self.hazard_radius),
            ("obstacle_half_width", self.obstacle_half_width),
            ("goal_radius", self.goal_radius),
            ("lidar_range", self.lidar_range),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lidar_bins == 0 {
            return Err(Error::invalid("lidar_bins must be at least 1"));
        }
        if !self.step_penalty.is_finite() || !self.goal_bonus.is_finite() {
            return Err(Error::invalid("step_penalty and goal_bonus must be finite"));
        }
        if !(self.pose_noise_sigma >= 0.0) || !self.pose_noise_sigma.is_finite() {
            return Err(Error::invalid("pose_noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }

    /// Observation length: 4 proprioceptive channels plus one lidar slot per
    /// category and bin.
    pub fn obs_dim(&self) -> usize {
        4 + 3 * self.lidar_bins
    }
}

/// Robot pose.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, wrapped to `(-π, π]`.
    pub theta: f64,
}

/// Full scene state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub robot: RobotState,
    /// Hazard disc centers.
    pub hazards: Vec<(f64, f64)>,
    /// Obstacle square centers.
    pub obstacles: Vec<(f64, f64)>,
    /// Goal disc center.
    pub goal: (f64, f64),
    /// Steps taken this episode.
    pub step_count: usize,
    /// Goals reached this episode.
    pub goals_reached: usize,
}

/// Everything one step reports.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation after the step.
    pub obs: Vec<f64>,
    /// Stage cost (negative when the step made progress toward the goal).
    pub stage_cost: f64,
    /// Hazard traversal cost, in `[0, 1]`, positive only when the robot
    /// center ends the step inside a hazard disc.
    pub hazard_cost: f64,
    /// Obstacle contact cost, in `[0, 1]`, positive only on collision steps.
    pub obstacle_cost: f64,
    /// Whether the episode ended with this step.
    pub done: bool,
    /// Whether the goal was reached this step.
    pub goal_reached: bool,
    /// Whether the move was reverted by obstacle contact.
    pub collided: bool,
}

impl StepOutcome {
    /// Total safety violation cost of the step.
    pub fn violation_cost(&self) -> f64 {
        self.hazard_cost + self.obstacle_cost
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Whether a disc of `radius` at `p` touches the square of `half_width` at
/// `center` (strict contact: boundary grazing does not count).
fn disc_square_contact(p: (f64, f64), center: (f64, f64), half_width: f64, radius: f64) -> bool {
    let dx = ((p.0 - center.0).abs() - half_width).max(0.0);
    let dy = ((p.1 - center.1).abs() - half_width).max(0.0);
    dx * dx + dy * dy < radius * radius
}

/// One standard normal draw (Box–Muller; consumes two uniforms).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Stage cost of moving from `before` to `after` against `before`'s goal:
/// change in goal distance, plus the per-step penalty, minus the goal bonus
/// when `after` lies within the goal radius. Both states must refer to the
/// same goal (on goal-reach steps, call this before re-randomizing).
pub fn stage_cost(before: &WorldState, after: &WorldState, cfg: &EnvConfig) -> f64 {
    let goal = before.goal;
    let d_before = dist((before.robot.x, before.robot.y), goal);
    let d_after = dist((after.robot.x, after.robot.y), goal);
    let bonus = if d_after <= cfg.goal_radius { cfg.goal_bonus } else { 0.0 };
    (d_after - d_before) + cfg.step_penalty - bonus
}

/// Pseudo-lidar image: categories in the order goal, hazards, obstacles,
/// each spanning `cfg.lidar_bins` slots. A slot holds the intensity
/// `max(0, 1 - d/range)` of the nearest category entity whose bearing (in
/// the robot frame, bin 0 starting dead ahead) falls in that bin.
pub fn lidar(world: &WorldState, cfg: &EnvConfig) -> Vec<f64> {
    let bins = cfg.lidar_bins;
    let bin_width = TAU / bins as f64;
    let mut out = vec![0.0; 3 * bins];
    let mark = |out: &mut [f64], base: usize, center: (f64, f64)| {
        let dx = center.0 - world.robot.x;
        let dy = center.1 - world.robot.y;
        let d = (dx * dx + dy * dy).sqrt();
        let intensity = (1.0 - d / cfg.lidar_range).max(0.0);
        if intensity <= 0.0 {
            return;
        }
        let phi = (dy.atan2(dx) - world.robot.theta).rem_euclid(TAU);
        let bin = ((phi / bin_width) as usize).min(bins - 1);
        let slot = base + bin;
        if intensity > out[slot] {
            out[slot] = intensity;
        }
    };
    mark(&mut out, 0, world.goal);
    for &h in &world.hazards {
        mark(&mut out, bins, h);
    }
    for &o in &world.obstacles {
        mark(&mut out, 2 * bins, o);
    }
    out
}

/// Observation vector: `[cos θ, sin θ, x, y]` followed by the lidar image.
/// Every component lies in `[-ARENA_HALF, ARENA_HALF]`.
pub fn observe(world: &WorldState, cfg: &EnvConfig) -> Vec<f64> {
    let mut v = Vec::with_capacity(cfg.obs_dim());
    v.push(world.robot.theta.cos());
    v.push(world.robot.theta.sin());
    v.push(world.robot.x);
    v.push(world.robot.y);
    v.extend(lidar(world, cfg));
    v
}

/// An episode in progress: configuration, scene, and the private cost/noise
/// stream.
#[derive(Debug, Clone)]
pub struct ReachAvoidEnv {
    cfg: EnvConfig,
    world: WorldState,
    rng: ChaCha8Rng,
}

impl ReachAvoidEnv {
    /// Start an episode: robot at the origin heading 0, entities drawn
    /// uniformly on `[-1, 1]²` from a stream keyed by `episode_seed`
    /// (hazards, then obstacles, then the goal), each rejection-resampled
    /// until clear of the robot's start disc.
    ///
    /// Errors with [`Error::Infeasible`] when an entity cannot be placed
    /// within the draw budget (e.g. entity radii that cover the whole
    /// placement square).
    pub fn reset(cfg: EnvConfig, episode_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let robot = RobotState { x: 0.0, y: 0.0, theta: 0.0 };
        let start = (0.0, 0.0);

        let hazards: Vec<(f64, f64)> = (0..cfg.n_hazards)
            .map(|_| {
                place(&mut rng, "hazard", |p| {
                    dist(p, start) >= cfg.hazard_radius + cfg.robot_radius
                })
            })
            .collect::<Result<_>>()?;
        let obstacles: Vec<(f64, f64)> = (0..cfg.n_obstacles)
            .map(|_| {
                place(&mut rng, "obstacle", |p| {
                    !disc_square_contact(start, p, cfg.obstacle_half_width, cfg.robot_radius)
                })
            })
            .collect::<Result<_>>()?;
        let goal =
            place(&mut rng, "goal", |p| dist(p, start) >= cfg.goal_radius + cfg.robot_radius)?;

        let world = WorldState { robot, hazards, obstacles, goal, step_count: 0, goals_reached: 0 };
        Ok(ReachAvoidEnv { cfg, world, rng })
    }

    /// Assemble an episode from an explicit scene (diagnostics and geometry
    /// tests). `stream_seed` keys the cost/noise stream.
    pub fn from_parts(cfg: EnvConfig, world: WorldState, stream_seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(ReachAvoidEnv { cfg, world, rng: ChaCha8Rng::seed_from_u64(stream_seed) })
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Mutable scene access for diagnostics and tests.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    /// Observation of the current state.
    pub fn observe(&self) -> Vec<f64> {
        observe(&self.world, &self.cfg)
    }

    /// Advance one step. See the module docs for the event order. Errors on
    /// an out-of-range action index and when a reached goal cannot be
    /// re-placed within the draw budget.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= ACTION_TABLE.len() {
            return Err(Error::invalid(format!(
                "action index {action} out of range 0..{}",
                ACTION_TABLE.len()
            )));
        }
        let before = self.world.clone();
        let (vl, vr) = ACTION_TABLE[action];
        let r = self.cfg.wheel_radius;
        let th = before.robot.theta;
        let mut x = before.robot.x + (r / 2.0) * (vr + vl) * th.cos();
        let mut y = before.robot.y + (r / 2.0) * (vr + vl) * th.sin();
        let mut theta = th + (r / (2.0 * self.cfg.half_axle)) * (vr - vl);
        if self.cfg.pose_noise_sigma > 0.0 {
            // Draw order: x, y, theta.
            x += self.cfg.pose_noise_sigma * gaussian(&mut self.rng);
            y += self.cfg.pose_noise_sigma * gaussian(&mut self.rng);
            theta += self.cfg.pose_noise_sigma * gaussian(&mut self.rng);
        }
        theta = wrap_angle(theta);
        x = x.clamp(-ARENA_HALF, ARENA_HALF);
        y = y.clamp(-ARENA_HALF, ARENA_HALF);

        let collided = self.world.obstacles.iter().any(|&c| {
            disc_square_contact((x, y), c, self.cfg.obstacle_half_width, self.cfg.robot_radius)
        });
        let mut obstacle_cost = 0.0;
        if collided {
            // Hard constraint: the move is undone (the heading keeps its new
            // value) and the contact cost is drawn.
            x = before.robot.x;
            y = before.robot.y;
            obstacle_cost = self.rng.random::<f64>();
        }
        self.world.robot = RobotState { x, y, theta };

        let in_hazard =
            self.world.hazards.iter().any(|&c| dist((x, y), c) < self.cfg.hazard_radius);
        let hazard_cost = if in_hazard { self.rng.random::<f64>() } else { 0.0 };

        let g = stage_cost(&before, &self.world, &self.cfg);
        let goal_reached = dist((x, y), self.world.goal) <= self.cfg.goal_radius;
        if goal_reached {
            self.world.goals_reached += 1;
            let here = (x, y);
            let clearance = self.cfg.goal_radius + self.cfg.robot_radius;
            self.world.goal =
                place(&mut self.rng, "goal", |p| dist(p, here) >= clearance)?;
        }
        self.world.step_count += 1;
        let done = self.world.step_count == self.cfg.horizon;

        Ok(StepOutcome {
            obs: observe(&self.world, &self.cfg),
            stage_cost: g,
            hazard_cost,
            obstacle_cost,
            done,
            goal_reached,
            collided,
        })
    }
}

/// Uniform draw on the placement square, rejection-resampled until
/// `accept` holds; errors after the draw budget.
fn place(
    rng: &mut ChaCha8Rng,
    what: &str,
    accept: impl Fn((f64, f64)) -> bool,
) -> Result<(f64, f64)> {
    for _ in 0..MAX_PLACEMENT_DRAWS {
        let p = (
            rng.random_range(-PLACEMENT_HALF..PLACEMENT_HALF),
            rng.random_range(-PLACEMENT_HALF..PLACEMENT_HALF),
        );
        if accept(p) {
            return Ok(p);
        }
    }
    Err(Error::Infeasible(format!(
        "could not place a {what} clear of the robot in {MAX_PLACEMENT_DRAWS} draws"
    )))
}
