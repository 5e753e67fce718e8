//! Particle-based baselines.
//!
//! * particle-SPAWN (this crate's variant): each agent carries a particle
//!   cloud. Between slots the cloud moves with the finite-difference velocity
//!   of its own mean plus Gaussian jitter; within a slot every iteration
//!   reweights the propagated cloud by the range likelihoods and resamples
//!   systematically.
//! * SPA-EKF: EKF prediction, particle message passing seeded from the
//!   predicted position Gaussian, moment matching, EKF update.
//!
//! Neighbouring agents are summarised by the per-axis Gaussian of their
//! cloud; the likelihood of a range to such a neighbour uses the range
//! variance inflated by the neighbour's spread along the line of sight.
//! This keeps one message evaluation per (particle, neighbour).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::localizer::{AgentRuntime, Inbox};
use crate::messages::PeerBelief;
use crate::model::{
    ekf_predict, ekf_update, AxisGaussian, NodeId, Position2D, PositionBelief, StateBelief,
    TransitionModel, Velocity2D,
};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Log-weight below which the whole cloud is considered to have underflowed.
const LOG_UNDERFLOW: f64 = -690.775_527_898_213_7; // ln(1e-300)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Position2D,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    particles: Vec<Particle>,
}

impl ParticleCloud {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if particles.len() < 2 {
            return Err(Error::invalid(
                "a particle cloud needs at least two particles",
            ));
        }
        if particles
            .iter()
            .any(|p| !(p.weight >= 0.0) || !p.position.is_finite())
        {
            return Err(Error::invalid(
                "particle weights must be non-negative and positions finite",
            ));
        }
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("particle weights must sum to one"));
        }
        Ok(ParticleCloud { particles })
    }

    pub fn uniform(positions: impl IntoIterator<Item = Position2D>) -> Result<Self> {
        let positions: Vec<Position2D> = positions.into_iter().collect();
        let w = 1.0 / positions.len() as f64;
        Self::new(
            positions
                .into_iter()
                .map(|position| Particle {
                    position,
                    weight: w,
                })
                .collect(),
        )
    }

    /// `count` draws from a 2-D Gaussian with covariance `[[sxx, sxy], [sxy, syy]]`.
    pub fn gaussian(
        mean: Position2D,
        sxx: f64,
        sxy: f64,
        syy: f64,
        count: usize,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let l11 = Float::sqrt(sxx.max(0.0));
        let l21 = if l11 > 0.0 { sxy / l11 } else { 0.0 };
        let l22 = Float::sqrt((syy - l21 * l21).max(0.0));
        Self::uniform((0..count).map(|_| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Position2D::new(mean.x + l11 * a, mean.y + l21 * a + l22 * b)
        }))
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn mean(&self) -> Position2D {
        let (mut x, mut y) = (0.0, 0.0);
        for p in &self.particles {
            x += p.weight * p.position.x;
            y += p.weight * p.position.y;
        }
        Position2D::new(x, y)
    }

    /// Weighted covariance `(sxx, sxy, syy)`.
    pub fn covariance(&self) -> (f64, f64, f64) {
        let m = self.mean();
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in &self.particles {
            let dx = p.position.x - m.x;
            let dy = p.position.y - m.y;
            sxx += p.weight * dx * dx;
            sxy += p.weight * dx * dy;
            syy += p.weight * dy * dy;
        }
        (sxx, sxy, syy)
    }

    /// Per-axis Gaussian summary broadcast to neighbours (variances floored
    /// at 1e-6 m^2 so a collapsed cloud still yields a valid belief).
    pub fn summary(&self) -> PeerBelief {
        let m = self.mean();
        let (sxx, _, syy) = self.covariance();
        PeerBelief::new(
            AxisGaussian::new(m.x, sxx.max(1e-6)),
            AxisGaussian::new(m.y, syy.max(1e-6)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpawnStats {
    /// Likelihood evaluations, one per (particle, neighbour, iteration).
    pub evaluations: usize,
    pub diverged: bool,
    pub neighbors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnOptions {
    pub l_max: usize,
    pub comm_radius: f64,
    pub delta_t: f64,
    /// Std (m/s) of the velocity jitter applied between slots.
    pub sigma_v: f64,
}

impl Default for SpawnOptions {
    fn default() -> Self {
        SpawnOptions {
            l_max: 30,
            comm_radius: 600.0,
            delta_t: 1.0,
            sigma_v: 5.0,
        }
    }
}

struct Term {
    center: Position2D,
    z: f64,
    inv_two_var: f64,
}

fn evidence<'a>(
    inbox: &Inbox,
    reference: Position2D,
    peers: impl Fn(&NodeId) -> Option<&'a PeerBelief>,
    out: &mut Vec<Term>,
) {
    out.clear();
    for (pos, z) in &inbox.anchor_obs {
        out.push(Term {
            center: *pos,
            z: z.value,
            inv_two_var: 0.5 / z.variance,
        });
    }
    for (id, z) in &inbox.agent_obs {
        let Some(peer) = peers(id) else { continue };
        let c = peer.mean();
        let (dx, dy) = (reference.x - c.x, reference.y - c.y);
        let d2 = dx * dx + dy * dy;
        let radial = if d2 > 0.0 {
            (dx * dx * peer.x.variance + dy * dy * peer.y.variance) / d2
        } else {
            0.5 * (peer.x.variance + peer.y.variance)
        };
        out.push(Term {
            center: c,
            z: z.value,
            inv_two_var: 0.5 / (z.variance + radial),
        });
    }
}

fn log_likelihood(p: Position2D, terms: &[Term]) -> f64 {
    let mut ll = 0.0;
    for t in terms {
        let r = Float::hypot(p.x - t.center.x, p.y - t.center.y) - t.z;
        ll -= r * r * t.inv_two_var;
    }
    ll
}

/// Systematic resampling to `n` equally weighted particles.
pub fn systematic_resample(cloud: &ParticleCloud, rng: &mut SimRng) -> ParticleCloud {
    let n = cloud.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut iter = cloud.particles.iter();
    let mut current = iter.next().expect("cloud has particles");
    cumulative += current.weight;
    for _ in 0..n {
        while u > cumulative {
            match iter.next() {
                Some(p) => {
                    current = p;
                    cumulative += p.weight;
                }
                None => break,
            }
        }
        out.push(Particle {
            position: current.position,
            weight: step,
        });
        u += step;
    }
    ParticleCloud { particles: out }
}

/// Weight `prior` by the evidence and resample. Returns the new cloud and
/// whether the weights underflowed (the cloud is then re-seeded uniformly
/// on the communication disc around the first neighbour).
fn reweight_resample(
    prior: &ParticleCloud,
    terms: &[Term],
    comm_radius: f64,
    rng: &mut SimRng,
    stats: &mut SpawnStats,
) -> ParticleCloud {
    if terms.is_empty() {
        return systematic_resample(prior, rng);
    }
    let mut weighted = prior.clone();
    let mut log_w: Vec<f64> = weighted
        .particles
        .iter()
        .map(|p| Float::ln(p.weight) + log_likelihood(p.position, terms))
        .collect();
    stats.evaluations += terms.len() * prior.len();
    let mut max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > LOG_UNDERFLOW) {
        stats.diverged = true;
        let centre = terms[0].center;
        let n = prior.len();
        let w = 1.0 / n as f64;
        weighted.particles = (0..n)
            .map(|_| {
                let r = comm_radius * Float::sqrt(rng.random::<f64>());
                let a = rng.random_range(0.0..2.0 * PI);
                Particle {
                    position: Position2D::new(
                        centre.x + r * Float::cos(a),
                        centre.y + r * Float::sin(a),
                    ),
                    weight: w,
                }
            })
            .collect();
        log_w = weighted
            .particles
            .iter()
            .map(|p| Float::ln(w) + log_likelihood(p.position, terms))
            .collect();
        stats.evaluations += terms.len() * n;
        max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > LOG_UNDERFLOW) {
            return weighted;
        }
    }
    let mut total = 0.0;
    for (p, lw) in weighted.particles.iter_mut().zip(&log_w) {
        p.weight = Float::exp(lw - max);
        total += p.weight;
    }
    for p in &mut weighted.particles {
        p.weight /= total;
    }
    systematic_resample(&weighted, rng)
}

/// `l_max` message-passing iterations for one agent whose neighbour beliefs
/// are fixed (`inbox.peer_beliefs`).
pub fn spawn_step(
    cloud: &ParticleCloud,
    inbox: &Inbox,
    opts: &SpawnOptions,
    rng: &mut SimRng,
) -> (ParticleCloud, SpawnStats) {
    let mut stats = SpawnStats {
        neighbors: inbox.neighbor_count(),
        ..Default::default()
    };
    let mut terms = Vec::new();
    evidence(
        inbox,
        cloud.mean(),
        |id| inbox.peer_beliefs.get(id),
        &mut terms,
    );
    let mut belief = cloud.clone();
    for _ in 0..opts.l_max {
        belief = reweight_resample(cloud, &terms, opts.comm_radius, rng, &mut stats);
    }
    (belief, stats)
}

/// Per-agent state of the particle-SPAWN baseline.
#[derive(Debug, Clone)]
pub struct SpawnAgent {
    pub id: NodeId,
    pub cloud: ParticleCloud,
    pub stats: SpawnStats,
    prev_mean: Position2D,
    velocity: Option<Velocity2D>,
    prior_velocity: (Velocity2D, f64, f64),
    rng: SimRng,
}

impl SpawnAgent {
    /// Seed the cloud from the position block of `prior`; until a velocity
    /// has been observed, particles move with draws from the prior velocity.
    pub fn new(id: NodeId, prior: &StateBelief, count: usize, mut rng: SimRng) -> Result<Self> {
        let c = &prior.cov;
        let cloud =
            ParticleCloud::gaussian(prior.position(), c[0][0], c[0][1], c[1][1], count, &mut rng)?;
        let prev_mean = cloud.mean();
        Ok(SpawnAgent {
            id,
            cloud,
            stats: SpawnStats::default(),
            prev_mean,
            velocity: None,
            prior_velocity: (
                prior.velocity(),
                Float::sqrt(c[2][2].max(0.0)),
                Float::sqrt(c[3][3].max(0.0)),
            ),
            rng,
        })
    }

    pub fn estimate(&self) -> Position2D {
        self.cloud.mean()
    }

    pub fn velocity(&self) -> Option<Velocity2D> {
        self.velocity
    }

    fn propagate(&mut self, opts: &SpawnOptions) {
        let dt = opts.delta_t;
        let jitter = opts.sigma_v * dt;
        let (v0, sx, sy) = self.prior_velocity;
        let rng = &mut self.rng;
        for p in &mut self.cloud.particles {
            let (vx, vy) = match self.velocity {
                Some(v) => (v.vx, v.vy),
                None => {
                    let a: f64 = StandardNormal.sample(rng);
                    let b: f64 = StandardNormal.sample(rng);
                    (v0.vx + sx * a, v0.vy + sy * b)
                }
            };
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            p.position.x += vx * dt + jitter * a;
            p.position.y += vy * dt + jitter * b;
        }
    }

    fn close_slot(&mut self, dt: f64) {
        let m = self.cloud.mean();
        self.velocity = Some(Velocity2D::new(
            (m.x - self.prev_mean.x) / dt,
            (m.y - self.prev_mean.y) / dt,
        ));
        self.prev_mean = m;
    }
}

/// One slot of particle-SPAWN for the whole network (synchronous schedule).
pub fn spawn_network_step(agents: &mut [SpawnAgent], inboxes: &[Inbox], opts: &SpawnOptions) {
    assert_eq!(agents.len(), inboxes.len(), "one inbox per agent");
    for a in agents.iter_mut() {
        a.propagate(opts);
        a.stats = SpawnStats {
            neighbors: 0,
            ..Default::default()
        };
    }
    let priors: Vec<ParticleCloud> = agents.iter().map(|a| a.cloud.clone()).collect();
    let mut snapshot: BTreeMap<NodeId, PeerBelief> = BTreeMap::new();
    let mut terms = Vec::new();
    for _ in 0..opts.l_max {
        snapshot.clear();
        snapshot.extend(agents.iter().map(|a| (a.id, a.cloud.summary())));
        for ((agent, inbox), prior) in agents.iter_mut().zip(inboxes).zip(&priors) {
            agent.stats.neighbors = inbox.neighbor_count();
            evidence(inbox, prior.mean(), |id| snapshot.get(id), &mut terms);
            agent.cloud = reweight_resample(
                prior,
                &terms,
                opts.comm_radius,
                &mut agent.rng,
                &mut agent.stats,
            );
        }
    }
    for a in agents.iter_mut() {
        a.close_slot(opts.delta_t);
    }
}

/// Per-agent state of the SPA-EKF baseline.
#[derive(Debug, Clone)]
pub struct SpaEkfAgent {
    pub runtime: AgentRuntime,
    pub cloud: Option<ParticleCloud>,
    pub stats: SpawnStats,
    rng: SimRng,
}

impl SpaEkfAgent {
    pub fn new(id: NodeId, prior: StateBelief, rng: SimRng) -> Self {
        SpaEkfAgent {
            runtime: AgentRuntime::new(id, prior),
            cloud: None,
            stats: SpawnStats::default(),
            rng,
        }
    }

    pub fn estimate(&self) -> Position2D {
        self.runtime.belief.position()
    }
}

fn predicted_cloud(prior: &StateBelief, count: usize, rng: &mut SimRng) -> Result<ParticleCloud> {
    let c = &prior.cov;
    ParticleCloud::gaussian(
        prior.position(),
        c[0][0],
        0.5 * (c[0][1] + c[1][0]),
        c[1][1],
        count,
        rng,
    )
}

fn refine_from_cloud(prior: &StateBelief, cloud: &ParticleCloud) -> Result<StateBelief> {
    let m = cloud.mean();
    let (sxx, _, syy) = cloud.covariance();
    let fused = PositionBelief {
        mean_x: m.x,
        mean_y: m.y,
        var_x: sxx.max(1e-6),
        var_y: syy.max(1e-6),
    };
    ekf_update(prior, &fused)
}

/// One SPA-EKF slot for a single agent with fixed neighbour beliefs.
pub fn spa_ekf_step(
    agent: &SpaEkfAgent,
    inbox: &Inbox,
    model: &TransitionModel,
    opts: &SpawnOptions,
    particle_count: usize,
) -> Result<SpaEkfAgent> {
    let mut out = agent.clone();
    let prior = ekf_predict(&agent.runtime.belief, model)?;
    out.runtime.belief = prior;
    out.stats = SpawnStats {
        neighbors: inbox.neighbor_count(),
        ..Default::default()
    };
    if inbox.neighbor_count() == 0 {
        out.cloud = None;
        sync_marginals(&mut out.runtime);
        return Ok(out);
    }
    let seed_cloud = predicted_cloud(&prior, particle_count, &mut out.rng)?;
    let (cloud, stats) = spawn_step(&seed_cloud, inbox, opts, &mut out.rng);
    out.stats = stats;
    out.runtime.belief = refine_from_cloud(&prior, &cloud)?;
    out.cloud = Some(cloud);
    sync_marginals(&mut out.runtime);
    Ok(out)
}

fn sync_marginals(rt: &mut AgentRuntime) {
    let (x, y) = rt.belief.position_marginals();
    rt.fused_iter = PeerBelief::new(x, y);
    rt.prev_posterior = rt.fused_iter;
}

/// One SPA-EKF slot for the whole network. Agents whose update fails keep
/// their prediction; the failures are returned.
pub fn spa_ekf_network_step(
    agents: &mut [SpaEkfAgent],
    inboxes: &[Inbox],
    model: &TransitionModel,
    opts: &SpawnOptions,
    particle_count: usize,
) -> Result<Vec<Error>> {
    assert_eq!(agents.len(), inboxes.len(), "one inbox per agent");
    let mut priors = Vec::with_capacity(agents.len());
    let mut seeds = Vec::with_capacity(agents.len());
    for (a, inbox) in agents.iter_mut().zip(inboxes) {
        let prior = ekf_predict(&a.runtime.belief, model)?;
        let cloud = predicted_cloud(&prior, particle_count, &mut a.rng)?;
        a.stats = SpawnStats {
            neighbors: inbox.neighbor_count(),
            ..Default::default()
        };
        a.cloud = Some(cloud.clone());
        priors.push(prior);
        seeds.push(cloud);
    }
    let mut snapshot: BTreeMap<NodeId, PeerBelief> = BTreeMap::new();
    let mut terms = Vec::new();
    for _ in 0..opts.l_max {
        snapshot.clear();
        snapshot.extend(agents.iter().map(|a| {
            (
                a.runtime.id,
                a.cloud.as_ref().expect("seeded above").summary(),
            )
        }));
        for ((agent, inbox), seed) in agents.iter_mut().zip(inboxes).zip(&seeds) {
            if inbox.neighbor_count() == 0 {
                continue;
            }
            evidence(inbox, seed.mean(), |id| snapshot.get(id), &mut terms);
            agent.cloud = Some(reweight_resample(
                seed,
                &terms,
                opts.comm_radius,
                &mut agent.rng,
                &mut agent.stats,
            ));
        }
    }
    let mut failures = Vec::new();
    for ((agent, inbox), prior) in agents.iter_mut().zip(inboxes).zip(priors) {
        agent.runtime.belief = if inbox.neighbor_count() == 0 {
            prior
        } else {
            match refine_from_cloud(&prior, agent.cloud.as_ref().expect("seeded above")) {
                Ok(b) => b,
                Err(e) => {
                    failures.push(e.with_context(&alloc::format!("{}", agent.runtime.id)));
                    prior
                }
            }
        };
        sync_marginals(&mut agent.runtime);
    }
    Ok(failures)
}
