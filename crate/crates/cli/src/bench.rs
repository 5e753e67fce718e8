//! Per-slot cost of one agent as a function of its neighbour count.
//!
//! The agent sits at the centre of a ring of neighbours (alternating anchors
//! and agents with fixed Gaussian beliefs). Operation counts come from the
//! estimators' own instrumentation; wall time is the mean over repeated
//! slots.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use coloc_core::rng::{self, Purpose};
use coloc_core::spawn::{spawn_step, ParticleCloud, SpawnOptions};
use coloc_core::{
    count_message_ops, make_transition_model, step_agent, AgentRuntime, AxisGaussian, Inbox,
    LocalizerOptions, NodeId, PeerBelief, Position2D, RangeMeasurement, ScenarioConfig,
    StateBelief,
};

use crate::runner::Algorithm;

pub const NEIGHBOR_COUNTS: [usize; 6] = [1, 2, 4, 8, 12, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub alg: Algorithm,
    pub n_rel: usize,
    pub analytic_ops: usize,
    pub measured_ops: usize,
    pub wall_per_slot: Duration,
}

fn ring_inbox(cfg: &ScenarioConfig, me: NodeId, truth: Position2D, n_rel: usize) -> Inbox {
    let radius = 0.5 * cfg.comm_radius;
    let mut inbox = Inbox::default();
    for k in 0..n_rel {
        let a = std::f64::consts::TAU * k as f64 / n_rel as f64 + 0.3;
        let pos = Position2D::new(truth.x + radius * a.cos(), truth.y + radius * a.sin());
        let d = pos.distance(&truth);
        let variance = cfg.range_noise_coeff * d;
        if k % 2 == 0 {
            let z = RangeMeasurement {
                from: NodeId::anchor(k as u32),
                to: me,
                value: d,
                variance,
            };
            inbox.anchor_obs.push((pos, z));
        } else {
            let id = NodeId::agent(k as u32 + 1);
            let z = RangeMeasurement {
                from: id,
                to: me,
                value: d,
                variance,
            };
            inbox.agent_obs.push((id, z));
            inbox.peer_beliefs.insert(
                id,
                PeerBelief::new(
                    AxisGaussian::new(pos.x, 25.0),
                    AxisGaussian::new(pos.y, 25.0),
                ),
            );
        }
    }
    inbox
}

fn time_per_slot(min_total: Duration, mut slot: impl FnMut()) -> Duration {
    let mut reps = 0u32;
    let start = Instant::now();
    while reps < 3 || start.elapsed() < min_total {
        slot();
        reps += 1;
    }
    start.elapsed() / reps
}

/// One row per (algorithm, neighbour count) for EKF-STDF and particle-SPAWN.
pub fn bench_complexity(
    cfg: &ScenarioConfig,
    neighbor_counts: &[usize],
    min_time: Duration,
) -> coloc_core::Result<Vec<BenchRow>> {
    cfg.validate()?;
    let model = make_transition_model(cfg.delta_t, cfg.speed_std)?;
    let me = NodeId::agent(0);
    let truth = Position2D::new(
        0.5 * (cfg.area_min + cfg.area_max),
        0.5 * (cfg.area_min + cfg.area_max),
    );
    let prior = StateBelief::from_std([truth.x + 5.0, truth.y - 5.0, 0.0, 0.0], 10.0, 1.0);
    let opts = LocalizerOptions {
        l_max: cfg.l_max,
        temporal_source: cfg.temporal_source,
    };
    let spawn_opts = SpawnOptions {
        l_max: cfg.l_max,
        comm_radius: cfg.comm_radius,
        delta_t: cfg.delta_t,
        sigma_v: cfg.speed_std,
    };
    let mut rows = Vec::new();
    for &n_rel in neighbor_counts {
        let inbox = ring_inbox(cfg, me, truth, n_rel);

        let rt = AgentRuntime::new(me, prior);
        let out = step_agent(&rt, &inbox, &model, &opts)?;
        let measured = count_message_ops(&out);
        let wall = time_per_slot(min_time, || {
            std::hint::black_box(step_agent(&rt, &inbox, &model, &opts).ok());
        });
        rows.push(BenchRow {
            alg: Algorithm::EkfStdf,
            n_rel,
            analytic_ops: n_rel * cfg.l_max * 2,
            measured_ops: measured,
            wall_per_slot: wall,
        });

        let mut r = rng::stream(cfg.seed, Purpose::Spawn, 0, n_rel as u32);
        let cloud = ParticleCloud::gaussian(
            prior.position(),
            100.0,
            0.0,
            100.0,
            cfg.particle_count,
            &mut r,
        )?;
        let (_, stats) = spawn_step(&cloud, &inbox, &spawn_opts, &mut r);
        let wall = time_per_slot(min_time, || {
            std::hint::black_box(spawn_step(&cloud, &inbox, &spawn_opts, &mut r));
        });
        rows.push(BenchRow {
            alg: Algorithm::Spawn,
            n_rel,
            analytic_ops: n_rel * cfg.particle_count * cfg.l_max,
            measured_ops: stats.evaluations,
            wall_per_slot: wall,
        });
    }
    Ok(rows)
}

/// SPAWN / EKF-STDF wall-time ratio per neighbour count.
pub fn wall_time_ratios(rows: &[BenchRow]) -> BTreeMap<usize, f64> {
    let mut stdf = BTreeMap::new();
    let mut out = BTreeMap::new();
    for r in rows.iter().filter(|r| r.alg == Algorithm::EkfStdf) {
        stdf.insert(r.n_rel, r.wall_per_slot.as_secs_f64());
    }
    for r in rows.iter().filter(|r| r.alg == Algorithm::Spawn) {
        if let Some(t) = stdf.get(&r.n_rel) {
            out.insert(r.n_rel, r.wall_per_slot.as_secs_f64() / t);
        }
    }
    out
}

pub fn write_bench<W: Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "alg",
        "n_rel",
        "analytic_ops",
        "measured_ops",
        "wall_us_per_slot",
    ])?;
    for r in rows {
        w.write_record([
            r.alg.to_string(),
            r.n_rel.to_string(),
            r.analytic_ops.to_string(),
            r.measured_ops.to_string(),
            format!("{:.3}", r.wall_per_slot.as_secs_f64() * 1e6),
        ])?;
    }
    w.flush()?;
    Ok(())
}
