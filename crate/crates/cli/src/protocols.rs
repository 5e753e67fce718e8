//! The two experiment layouts: a single tracked agent whose links are
//! masked on a schedule, and a sweep over the number of agents.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use coloc_core::{Position2D, ScenarioConfig};

use crate::metrics::{compute_rmse, NeighborBucket, RmsePoint};
use crate::runner::{
    run_batch, Algorithm, Designation, MaskWindow, RunOutcome, RunRecord, WARMUP_SLOTS,
};

pub const FIG3_AGENT_COUNTS: [usize; 4] = [30, 40, 50, 60];

/// Outage used for the headline comparison (at most one link).
pub const OUTAGE: (usize, usize) = (10, 20);

/// The tracked agent starts near one corner heading for the opposite one,
/// which keeps it inside the area for the whole masking schedule.
pub fn fig2_designation(cfg: &ScenarioConfig) -> Designation {
    let span = cfg.area_max - cfg.area_min;
    let start = cfg.area_min + 0.15 * span;
    Designation {
        agent: 0,
        start: Position2D::new(start, start),
        heading: FRAC_PI_4,
        windows: vec![
            MaskWindow {
                first: 10,
                last: 14,
                keep: 1,
            },
            MaskWindow {
                first: 15,
                last: 20,
                keep: 0,
            },
            MaskWindow {
                first: 21,
                last: 30,
                keep: 2,
            },
            MaskWindow {
                first: 31,
                last: 40,
                keep: 3,
            },
        ],
    }
}

/// Run bookkeeping shared by the experiment outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchMeta {
    pub runs: usize,
    pub records: usize,
    pub excluded: usize,
    pub respawns: usize,
    pub numerical_failures: usize,
    pub clamped: usize,
    pub particle_divergences: usize,
    pub stream_hashes: Vec<String>,
}

impl BatchMeta {
    pub fn from_outcomes(outcomes: &[RunOutcome]) -> Self {
        let mut m = BatchMeta::default();
        for o in outcomes {
            m.runs += 1;
            m.records += o.records.len();
            m.excluded += o.excluded;
            m.respawns += o.respawns;
            m.numerical_failures += o.numerical_failures;
            m.clamped += o.clamped;
            m.particle_divergences += o.particle_divergences;
            m.stream_hashes.push(o.stream_hash.clone());
        }
        m
    }

    pub fn merge(&mut self, other: BatchMeta) {
        self.runs += other.runs;
        self.records += other.records;
        self.excluded += other.excluded;
        self.respawns += other.respawns;
        self.numerical_failures += other.numerical_failures;
        self.clamped += other.clamped;
        self.particle_divergences += other.particle_divergences;
        self.stream_hashes.extend(other.stream_hashes);
    }

    pub fn render(
        &self,
        cfg: &ScenarioConfig,
        algs: &[Algorithm],
        extra: &[(&str, String)],
    ) -> String {
        let mut s = String::new();
        let labels: Vec<&str> = algs.iter().map(|a| a.label()).collect();
        let _ = writeln!(s, "algorithms = {}", labels.join(","));
        let _ = writeln!(
            s,
            "spawn_variant = particle-SPAWN (cloud summaries as Gaussian peer beliefs)"
        );
        let _ = writeln!(s, "slots = {}", cfg.slots);
        let _ = writeln!(s, "mcRuns = {}", cfg.mc_runs);
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "lMax = {}", cfg.l_max);
        let _ = writeln!(s, "particleCount = {}", cfg.particle_count);
        let _ = writeln!(s, "warmup_slots_after_respawn = {WARMUP_SLOTS}");
        let _ = writeln!(s, "records = {}", self.records);
        let _ = writeln!(s, "excluded_warmup = {}", self.excluded);
        let _ = writeln!(s, "respawns = {}", self.respawns);
        let _ = writeln!(s, "numerical_failures = {}", self.numerical_failures);
        let _ = writeln!(s, "clamped_ranges = {}", self.clamped);
        let _ = writeln!(s, "particle_divergences = {}", self.particle_divergences);
        for (k, v) in extra {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (i, h) in self.stream_hashes.iter().enumerate() {
            let _ = writeln!(s, "stream_hash[{i}] = {h}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Result {
    pub designation: Designation,
    pub records: Vec<RunRecord>,
    pub by_neighbors: Vec<RmsePoint>,
    /// One group per mask window plus the combined outage.
    pub by_window: Vec<RmsePoint>,
    pub meta: BatchMeta,
}

pub fn fig2_protocol(
    cfg: &ScenarioConfig,
    algs: &[Algorithm],
    threads: usize,
) -> coloc_core::Result<Fig2Result> {
    let designation = fig2_designation(cfg);
    let outcomes = run_batch(cfg, algs, Some(&designation), threads)?;
    let meta = BatchMeta::from_outcomes(&outcomes);
    let records: Vec<RunRecord> = outcomes.into_iter().flat_map(|o| o.records).collect();
    let by_neighbors = compute_rmse(&records, |r| Some(NeighborBucket::of(r.neighbors)));
    let mut windows: Vec<(usize, usize)> = designation
        .windows
        .iter()
        .map(|w| (w.first, w.last))
        .collect();
    windows.push(OUTAGE);
    let mut by_window = Vec::new();
    for (first, last) in windows {
        by_window.extend(compute_rmse(&records, |r| {
            (first..=last)
                .contains(&r.slot)
                .then(|| format!("slots:{first}-{last}"))
        }));
    }
    Ok(Fig2Result {
        designation,
        records,
        by_neighbors,
        by_window,
        meta,
    })
}

#[derive(Debug, Clone)]
pub struct Fig3Result {
    pub points: Vec<RmsePoint>,
    pub meta: BatchMeta,
}

pub fn fig3_protocol(
    cfg: &ScenarioConfig,
    algs: &[Algorithm],
    threads: usize,
) -> coloc_core::Result<Fig3Result> {
    let mut points = Vec::new();
    let mut meta = BatchMeta::default();
    for n in FIG3_AGENT_COUNTS {
        let scenario = ScenarioConfig {
            agent_count: n,
            ..cfg.clone()
        };
        let outcomes = run_batch(&scenario, algs, None, threads)?;
        meta.merge(BatchMeta::from_outcomes(&outcomes));
        let records: Vec<RunRecord> = outcomes.into_iter().flat_map(|o| o.records).collect();
        points.extend(compute_rmse(&records, |_| Some(n)));
    }
    Ok(Fig3Result { points, meta })
}
