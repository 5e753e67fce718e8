//! Discrete-time world: anchor layout, agent mobility with respawn,
//! connectivity, and noisy range generation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::localizer::{Inbox, TemporalSource};
use crate::model::{
    AgentTruth, InternalMeasurement, NodeId, Position2D, RangeMeasurement, StateBelief, Velocity2D,
};
use crate::rng::{self, Purpose, SimRng};
use crate::{Error, Result};

/// How the per-slot speed variation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeedPerturbation {
    /// Independent Gaussian increments on vx and vy.
    #[default]
    Component,
    /// Gaussian increment on the speed magnitude, heading kept.
    Magnitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area_min: f64,
    pub area_max: f64,
    pub agent_area_min: f64,
    pub agent_area_max: f64,
    pub anchor_count: usize,
    pub agent_count: usize,
    pub comm_radius: f64,
    pub delta_t: f64,
    pub initial_speed: f64,
    pub speed_std: f64,
    /// Range noise variance per metre of true distance.
    pub range_noise_coeff: f64,
    /// Travelled-distance noise variance per metre travelled.
    pub internal_noise_coeff: f64,
    pub l_max: usize,
    pub slots: usize,
    pub mc_runs: usize,
    pub seed: u64,
    pub particle_count: usize,
    pub speed_perturbation: SpeedPerturbation,
    pub temporal_source: TemporalSource,
    /// Std (m) of the initial position prior around the true position.
    pub prior_position_std: f64,
    /// Give fresh agents their true velocity with zero variance.
    pub prior_velocity_known: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_min: 0.0,
            area_max: 3000.0,
            agent_area_min: 100.0,
            agent_area_max: 2900.0,
            anchor_count: 13,
            agent_count: 40,
            comm_radius: 600.0,
            delta_t: 1.0,
            initial_speed: 50.0,
            speed_std: 5.0,
            range_noise_coeff: 0.01,
            internal_noise_coeff: 0.01,
            l_max: 30,
            slots: 100,
            mc_runs: 20,
            seed: 2023,
            particle_count: 500,
            speed_perturbation: SpeedPerturbation::Component,
            temporal_source: TemporalSource::Refined,
            prior_position_std: 10.0,
            prior_velocity_known: false,
        }
    }
}

/// Number of positions in the fixed anchor layout.
pub const ANCHOR_LAYOUT_LEN: usize = 13;

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.area_min,
            self.area_max,
            self.agent_area_min,
            self.agent_area_max,
            self.comm_radius,
            self.delta_t,
            self.initial_speed,
            self.speed_std,
            self.range_noise_coeff,
            self.internal_noise_coeff,
            self.prior_position_std,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scenario has non-finite values"));
        }
        if !(self.area_max > self.area_min) {
            return Err(Error::invalid("areaMax must exceed areaMin"));
        }
        if !(self.agent_area_max > self.agent_area_min)
            || self.agent_area_min < self.area_min
            || self.agent_area_max > self.area_max
        {
            return Err(Error::invalid(
                "agent area must be a non-empty subset of the area",
            ));
        }
        if !(self.comm_radius > 0.0) || !(self.delta_t > 0.0) {
            return Err(Error::invalid("commRadius and deltaT must be positive"));
        }
        if self.initial_speed < 0.0 || self.speed_std < 0.0 || self.prior_position_std < 0.0 {
            return Err(Error::invalid(
                "speeds and standard deviations must be non-negative",
            ));
        }
        if !(self.range_noise_coeff > 0.0) || !(self.internal_noise_coeff > 0.0) {
            return Err(Error::invalid("noise coefficients must be positive"));
        }
        if self.anchor_count == 0 || self.anchor_count > ANCHOR_LAYOUT_LEN {
            return Err(Error::invalid(format!(
                "anchorCount must be between 1 and {ANCHOR_LAYOUT_LEN}, got {}",
                self.anchor_count
            )));
        }
        if self.agent_count == 0 || self.mc_runs == 0 || self.l_max == 0 {
            return Err(Error::invalid(
                "agentCount, mcRuns and lMax must be at least 1",
            ));
        }
        if self.particle_count < 2 {
            return Err(Error::invalid("particleCount must be at least 2"));
        }
        Ok(())
    }

    /// Corners, edge midpoints, four inner points, centre, in that order.
    pub fn anchor_layout(&self) -> Vec<Position2D> {
        let (lo, hi) = (self.area_min, self.area_max);
        let span = hi - lo;
        let mid = lo + 0.5 * span;
        let q1 = lo + 0.25 * span;
        let q3 = lo + 0.75 * span;
        let all = [
            (lo, lo),
            (hi, lo),
            (hi, hi),
            (lo, hi),
            (mid, lo),
            (hi, mid),
            (mid, hi),
            (lo, mid),
            (q1, q1),
            (q1, q3),
            (q3, q1),
            (q3, q3),
            (mid, mid),
        ];
        all.iter()
            .take(self.anchor_count)
            .map(|&(x, y)| Position2D::new(x, y))
            .collect()
    }

    fn inside_area(&self, p: &Position2D) -> bool {
        p.x >= self.area_min && p.x <= self.area_max && p.y >= self.area_min && p.y <= self.area_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldAgent {
    pub id: NodeId,
    pub truth: AgentTruth,
    /// Position one slot earlier; `None` right after (re)spawning.
    pub prev_position: Option<Position2D>,
    /// Prior handed to estimators when this agent (re)appeared.
    pub prior: StateBelief,
    pub spawned_at: usize,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub slot: usize,
    pub anchors: Vec<Position2D>,
    pub agents: Vec<WorldAgent>,
    mobility_rng: SimRng,
    sensing_rng: SimRng,
}

impl WorldState {
    /// Agents that were replaced during the latest mobility step.
    pub fn respawned_now(&self) -> impl Iterator<Item = usize> + '_ {
        let slot = self.slot;
        self.agents
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.spawned_at == slot && slot > 0)
            .map(|(i, _)| i)
    }
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

fn fresh_agent(cfg: &ScenarioConfig, rng: &mut SimRng, index: u32, slot: usize) -> WorldAgent {
    let position = Position2D::new(
        rng.random_range(cfg.agent_area_min..=cfg.agent_area_max),
        rng.random_range(cfg.agent_area_min..=cfg.agent_area_max),
    );
    let heading = rng.random_range(0.0..2.0 * PI);
    let velocity = Velocity2D::new(
        cfg.initial_speed * Float::cos(heading),
        cfg.initial_speed * Float::sin(heading),
    );
    let ps = cfg.prior_position_std;
    let mean_pos = [position.x + ps * normal(rng), position.y + ps * normal(rng)];
    let prior = if cfg.prior_velocity_known {
        StateBelief::from_std(
            [mean_pos[0], mean_pos[1], velocity.vx, velocity.vy],
            ps,
            0.0,
        )
    } else {
        StateBelief::from_std(
            [mean_pos[0], mean_pos[1], 0.0, 0.0],
            ps,
            2.0 * cfg.initial_speed,
        )
    };
    WorldAgent {
        id: NodeId::agent(index),
        truth: AgentTruth { position, velocity },
        prev_position: None,
        prior,
        spawned_at: slot,
    }
}

/// Build the slot-0 world for Monte-Carlo run `run`.
pub fn init_world(cfg: &ScenarioConfig, run: u32) -> Result<WorldState> {
    cfg.validate()?;
    let mut mobility_rng = rng::stream(cfg.seed, Purpose::World, run, 0);
    let sensing_rng = rng::stream(cfg.seed, Purpose::Sensing, run, 0);
    let agents = (0..cfg.agent_count as u32)
        .map(|i| fresh_agent(cfg, &mut mobility_rng, i, 0))
        .collect();
    Ok(WorldState {
        slot: 0,
        anchors: cfg.anchor_layout(),
        agents,
        mobility_rng,
        sensing_rng,
    })
}

/// Advance every agent by one slot; agents leaving the area are replaced.
pub fn step_mobility(world: &mut WorldState, cfg: &ScenarioConfig) {
    world.slot += 1;
    let slot = world.slot;
    let rng = &mut world.mobility_rng;
    for agent in &mut world.agents {
        let v = &mut agent.truth.velocity;
        match cfg.speed_perturbation {
            SpeedPerturbation::Component => {
                v.vx += cfg.speed_std * normal(rng);
                v.vy += cfg.speed_std * normal(rng);
            }
            SpeedPerturbation::Magnitude => {
                let speed = v.speed();
                let new_speed = speed + cfg.speed_std * normal(rng);
                let (c, s) = if speed > 0.0 {
                    (v.vx / speed, v.vy / speed)
                } else {
                    (1.0, 0.0)
                };
                v.vx = new_speed * c;
                v.vy = new_speed * s;
            }
        }
        let prev = agent.truth.position;
        agent.truth.position =
            Position2D::new(prev.x + v.vx * cfg.delta_t, prev.y + v.vy * cfg.delta_t);
        agent.prev_position = Some(prev);
        if !cfg.inside_area(&agent.truth.position) {
            *agent = fresh_agent(cfg, rng, agent.id.index, slot);
        }
    }
}

/// Measurements of one slot; `inboxes[i]` belongs to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedSlot {
    pub inboxes: Vec<Inbox>,
    /// Range draws that came out negative and were clamped to zero.
    pub clamped: usize,
}

fn noisy(rng: &mut SimRng, distance: f64, coeff: f64, clamped: &mut usize) -> (f64, f64) {
    let variance = (coeff * distance).max(1e-12);
    let z = distance + Float::sqrt(variance) * normal(rng);
    if z < 0.0 {
        *clamped += 1;
        (0.0, variance)
    } else {
        (z, variance)
    }
}

/// Draw every range inside the communication radius plus the on-board
/// travelled-distance measurement.
pub fn sense(world: &mut WorldState, cfg: &ScenarioConfig) -> SensedSlot {
    let rng = &mut world.sensing_rng;
    let mut clamped = 0;
    let mut inboxes = Vec::with_capacity(world.agents.len());
    for agent in &world.agents {
        let me = agent.truth.position;
        let mut inbox = Inbox::default();
        for (k, anchor) in world.anchors.iter().enumerate() {
            let d = me.distance(anchor);
            if d <= cfg.comm_radius {
                let (value, variance) = noisy(rng, d, cfg.range_noise_coeff, &mut clamped);
                let z = RangeMeasurement {
                    from: NodeId::anchor(k as u32),
                    to: agent.id,
                    value,
                    variance,
                };
                inbox.anchor_obs.push((*anchor, z));
            }
        }
        for other in &world.agents {
            if other.id == agent.id {
                continue;
            }
            let d = me.distance(&other.truth.position);
            if d <= cfg.comm_radius {
                let (value, variance) = noisy(rng, d, cfg.range_noise_coeff, &mut clamped);
                inbox.agent_obs.push((
                    other.id,
                    RangeMeasurement {
                        from: other.id,
                        to: agent.id,
                        value,
                        variance,
                    },
                ));
            }
        }
        if let Some(prev) = agent.prev_position {
            let moved = me.distance(&prev);
            let (value, variance) = noisy(rng, moved, cfg.internal_noise_coeff, &mut clamped);
            inbox.internal = Some(InternalMeasurement {
                agent: agent.id,
                value,
                variance,
            });
        }
        inboxes.push(inbox);
    }
    SensedSlot { inboxes, clamped }
}

impl SensedSlot {
    /// Restrict agent `index` to its first `keep` links (anchors first, then
    /// agents, each by index). Dropped agent links are removed in both
    /// directions.
    pub fn mask_links(&mut self, index: usize, keep: usize) {
        let me = NodeId::agent(index as u32);
        let inbox = &mut self.inboxes[index];
        let anchor_keep = inbox.anchor_obs.len().min(keep);
        inbox.anchor_obs.truncate(anchor_keep);
        let agent_keep = keep - anchor_keep;
        inbox.agent_obs.sort_by_key(|(id, _)| *id);
        let dropped: Vec<NodeId> = inbox
            .agent_obs
            .iter()
            .skip(agent_keep)
            .map(|(id, _)| *id)
            .collect();
        inbox.agent_obs.truncate(agent_keep);
        for id in dropped {
            self.inboxes[id.index as usize]
                .agent_obs
                .retain(|(from, _)| *from != me);
        }
    }
}
