//! Monte-Carlo driver. One world is simulated per run and every algorithm
//! consumes the same measurement draws.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use coloc_core::localizer::predict_only;
use coloc_core::rng::{self, Purpose};
use coloc_core::sim::WorldAgent;
use coloc_core::spawn::{spa_ekf_network_step, spawn_network_step, SpawnOptions};
use coloc_core::{
    init_world, make_transition_model, sense, step_mobility, step_network, AgentRuntime,
    LocalizerOptions, Position2D, ScenarioConfig, SensedSlot, SpaEkfAgent, SpawnAgent, StateBelief,
    TransitionModel, Velocity2D,
};

/// Slots after a respawn during which the agent is left out of the records.
pub const WARMUP_SLOTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    EkfStdf,
    Spawn,
    SpaEkf,
    EkfOnly,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::EkfStdf,
        Algorithm::Spawn,
        Algorithm::SpaEkf,
        Algorithm::EkfOnly,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::EkfStdf => "ekf-stdf",
            Algorithm::Spawn => "spawn",
            Algorithm::SpaEkf => "spa-ekf",
            Algorithm::EkfOnly => "ekf-only",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| {
                format!("unknown algorithm {s:?} (expected ekf-stdf, spawn, spa-ekf or ekf-only)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub slot: usize,
    pub agent: u32,
    pub alg: Algorithm,
    pub truth: Position2D,
    pub estimate: Position2D,
    pub neighbors: usize,
}

impl RunRecord {
    pub fn error(&self) -> f64 {
        self.truth.distance(&self.estimate)
    }
}

/// Links of the designated agent kept during `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskWindow {
    pub first: usize,
    pub last: usize,
    pub keep: usize,
}

/// One tracked agent with a fixed start and a deterministic link mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Designation {
    pub agent: usize,
    pub start: Position2D,
    pub heading: f64,
    pub windows: Vec<MaskWindow>,
}

impl Designation {
    pub fn keep_at(&self, slot: usize) -> Option<usize> {
        self.windows
            .iter()
            .find(|w| (w.first..=w.last).contains(&slot))
            .map(|w| w.keep)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub records: Vec<RunRecord>,
    /// Agent-slots left out because of the post-respawn warm-up.
    pub excluded: usize,
    pub respawns: usize,
    pub numerical_failures: usize,
    pub clamped: usize,
    pub particle_divergences: usize,
    /// SHA-256 over every measurement handed to the estimators.
    pub stream_hash: String,
}

enum Estimator {
    Stdf(Vec<AgentRuntime>),
    Only(Vec<AgentRuntime>),
    Spawn(Vec<SpawnAgent>),
    SpaEkf(Vec<SpaEkfAgent>),
}

fn particle_stream(
    cfg: &ScenarioConfig,
    purpose: Purpose,
    run: usize,
    agent: usize,
    slot: usize,
) -> rng::SimRng {
    rng::stream(
        cfg.seed,
        purpose,
        run as u32,
        ((slot as u32) << 16) | agent as u32,
    )
}

impl Estimator {
    fn new(alg: Algorithm, cfg: &ScenarioConfig, run: usize, agents: &[WorldAgent]) -> Self {
        let runtime = |a: &WorldAgent| AgentRuntime::new(a.id, a.prior);
        match alg {
            Algorithm::EkfStdf => Estimator::Stdf(agents.iter().map(runtime).collect()),
            Algorithm::EkfOnly => Estimator::Only(agents.iter().map(runtime).collect()),
            Algorithm::Spawn => Estimator::Spawn(
                agents
                    .iter()
                    .enumerate()
                    .map(|(i, a)| spawn_agent(cfg, run, i, 0, a))
                    .collect(),
            ),
            Algorithm::SpaEkf => Estimator::SpaEkf(
                agents
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        SpaEkfAgent::new(
                            a.id,
                            a.prior,
                            particle_stream(cfg, Purpose::SpaEkf, run, i, 0),
                        )
                    })
                    .collect(),
            ),
        }
    }

    fn reset(&mut self, cfg: &ScenarioConfig, run: usize, slot: usize, i: usize, a: &WorldAgent) {
        match self {
            Estimator::Stdf(v) | Estimator::Only(v) => v[i] = AgentRuntime::new(a.id, a.prior),
            Estimator::Spawn(v) => v[i] = spawn_agent(cfg, run, i, slot, a),
            Estimator::SpaEkf(v) => {
                v[i] = SpaEkfAgent::new(
                    a.id,
                    a.prior,
                    particle_stream(cfg, Purpose::SpaEkf, run, i, slot),
                )
            }
        }
    }

    /// Advance one slot; returns the number of agents whose refinement failed.
    fn step(
        &mut self,
        sensed: &SensedSlot,
        model: &TransitionModel,
        cfg: &ScenarioConfig,
    ) -> (usize, usize) {
        let spawn_opts = SpawnOptions {
            l_max: cfg.l_max,
            comm_radius: cfg.comm_radius,
            delta_t: cfg.delta_t,
            sigma_v: cfg.speed_std,
        };
        match self {
            Estimator::Stdf(v) => {
                let opts = LocalizerOptions {
                    l_max: cfg.l_max,
                    temporal_source: cfg.temporal_source,
                };
                match step_network(v, &sensed.inboxes, model, &opts) {
                    Ok(failures) => (failures.len(), 0),
                    Err(_) => (v.len(), 0),
                }
            }
            Estimator::Only(v) => {
                let failed = v
                    .iter_mut()
                    .map(|rt| predict_only(rt, model))
                    .filter(|r| r.is_err())
                    .count();
                (failed, 0)
            }
            Estimator::Spawn(v) => {
                spawn_network_step(v, &sensed.inboxes, &spawn_opts);
                (0, v.iter().filter(|a| a.stats.diverged).count())
            }
            Estimator::SpaEkf(v) => {
                let failed = match spa_ekf_network_step(
                    v,
                    &sensed.inboxes,
                    model,
                    &spawn_opts,
                    cfg.particle_count,
                ) {
                    Ok(failures) => failures.len(),
                    Err(_) => v.len(),
                };
                (failed, v.iter().filter(|a| a.stats.diverged).count())
            }
        }
    }

    fn estimate(&self, i: usize) -> Position2D {
        match self {
            Estimator::Stdf(v) | Estimator::Only(v) => v[i].belief.position(),
            Estimator::Spawn(v) => v[i].estimate(),
            Estimator::SpaEkf(v) => v[i].estimate(),
        }
    }
}

fn spawn_agent(
    cfg: &ScenarioConfig,
    run: usize,
    i: usize,
    slot: usize,
    a: &WorldAgent,
) -> SpawnAgent {
    SpawnAgent::new(
        a.id,
        &a.prior,
        cfg.particle_count,
        particle_stream(cfg, Purpose::Spawn, run, i, slot),
    )
    .expect("validated particle count")
}

fn hash_slot(hasher: &mut Sha256, slot: usize, sensed: &SensedSlot) {
    hasher.update((slot as u64).to_le_bytes());
    for (i, inbox) in sensed.inboxes.iter().enumerate() {
        hasher.update((i as u64).to_le_bytes());
        for (pos, z) in &inbox.anchor_obs {
            hasher.update(b"a");
            hasher.update(z.from.index.to_le_bytes());
            for v in [pos.x, pos.y, z.value, z.variance] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        for (id, z) in &inbox.agent_obs {
            hasher.update(b"g");
            hasher.update(id.index.to_le_bytes());
            hasher.update(z.value.to_bits().to_le_bytes());
            hasher.update(z.variance.to_bits().to_le_bytes());
        }
        if let Some(int) = &inbox.internal {
            hasher.update(b"i");
            hasher.update(int.value.to_bits().to_le_bytes());
            hasher.update(int.variance.to_bits().to_le_bytes());
        }
    }
}

fn place(agent: &mut WorldAgent, cfg: &ScenarioConfig, d: &Designation) {
    let offset = (
        agent.prior.mean[0] - agent.truth.position.x,
        agent.prior.mean[1] - agent.truth.position.y,
    );
    agent.truth.position = d.start;
    agent.truth.velocity = Velocity2D::new(
        cfg.initial_speed * d.heading.cos(),
        cfg.initial_speed * d.heading.sin(),
    );
    let mut mean = agent.prior.mean;
    mean[0] = d.start.x + offset.0;
    mean[1] = d.start.y + offset.1;
    if cfg.prior_velocity_known {
        mean[2] = agent.truth.velocity.vx;
        mean[3] = agent.truth.velocity.vy;
    }
    agent.prior = StateBelief::new(mean, agent.prior.cov);
}

/// Simulate Monte-Carlo run `run` for every algorithm in `algs`. With a
/// designation, only the designated agent is recorded.
pub fn simulate_run(
    cfg: &ScenarioConfig,
    run: usize,
    algs: &[Algorithm],
    designation: Option<&Designation>,
) -> coloc_core::Result<RunOutcome> {
    let model = make_transition_model(cfg.delta_t, cfg.speed_std)?;
    let mut world = init_world(cfg, run as u32)?;
    if let Some(d) = designation {
        if d.agent >= world.agents.len() {
            return Err(coloc_core::Error::InvalidArgument(format!(
                "designated agent {} does not exist",
                d.agent
            )));
        }
        place(&mut world.agents[d.agent], cfg, d);
    }
    let mut estimators: Vec<(Algorithm, Estimator)> = algs
        .iter()
        .map(|&a| (a, Estimator::new(a, cfg, run, &world.agents)))
        .collect();
    let mut out = RunOutcome {
        run,
        ..Default::default()
    };
    let mut hasher = Sha256::new();
    for slot in 1..=cfg.slots {
        step_mobility(&mut world, cfg);
        let respawned: Vec<usize> = world.respawned_now().collect();
        out.respawns += respawned.len();
        for &i in &respawned {
            for (_, est) in &mut estimators {
                est.reset(cfg, run, slot, i, &world.agents[i]);
            }
        }
        let mut sensed = sense(&mut world, cfg);
        if let Some(keep) = designation.and_then(|d| d.keep_at(slot).map(|k| (d.agent, k))) {
            sensed.mask_links(keep.0, keep.1);
        }
        out.clamped += sensed.clamped;
        hash_slot(&mut hasher, slot, &sensed);

        let recorded: Vec<usize> = match designation {
            Some(d) => vec![d.agent],
            None => (0..world.agents.len()).collect(),
        };
        for (alg, est) in &mut estimators {
            let (failed, diverged) = est.step(&sensed, &model, cfg);
            out.numerical_failures += failed;
            out.particle_divergences += diverged;
            for &i in &recorded {
                let agent = &world.agents[i];
                if agent.spawned_at > 0 && slot < agent.spawned_at + WARMUP_SLOTS {
                    out.excluded += 1;
                    continue;
                }
                out.records.push(RunRecord {
                    run,
                    slot,
                    agent: agent.id.index,
                    alg: *alg,
                    truth: agent.truth.position,
                    estimate: est.estimate(i),
                    neighbors: sensed.inboxes[i].neighbor_count(),
                });
            }
        }
    }
    out.stream_hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(out)
}

/// All Monte-Carlo runs of `cfg`, executed on `threads` workers (0 = rayon
/// default) and returned in run order.
pub fn run_batch(
    cfg: &ScenarioConfig,
    algs: &[Algorithm],
    designation: Option<&Designation>,
    threads: usize,
) -> coloc_core::Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| coloc_core::Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..cfg.mc_runs)
            .into_par_iter()
            .map(|run| simulate_run(cfg, run, algs, designation))
            .collect()
    })
}

/// Records of one algorithm over all runs of `cfg`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    alg: Algorithm,
    threads: usize,
) -> coloc_core::Result<Vec<RunRecord>> {
    Ok(run_batch(cfg, &[alg], None, threads)?
        .into_iter()
        .flat_map(|r| r.records)
        .collect())
}
