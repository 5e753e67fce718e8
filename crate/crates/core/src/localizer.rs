//! Per-slot orchestration: predict, iterate message passing, refine.
//!
//! All agents iterate synchronously: iteration `l` reads only the beliefs
//! broadcast at iteration `l - 1`, so the processing order of agents inside
//! an iteration never changes the result.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::messages::{
    agent_message, anchor_message, fuse_axis, temporal_message, Axis, PeerBelief,
};
use crate::model::{
    ekf_predict, ekf_update, AxisGaussian, InternalMeasurement, NodeId, Position2D, PositionBelief,
    RangeMeasurement, StateBelief, TransitionModel,
};
use crate::Result;

/// Which belief of the previous slot anchors the temporal message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemporalSource {
    /// Position marginals of the refined (stage 3) posterior.
    #[default]
    Refined,
    /// The fused stage-2 belief before refinement.
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerOptions {
    pub l_max: usize,
    pub temporal_source: TemporalSource,
}

impl Default for LocalizerOptions {
    fn default() -> Self {
        LocalizerOptions {
            l_max: 30,
            temporal_source: TemporalSource::Refined,
        }
    }
}

/// Instrumentation for the last slot processed by an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotStats {
    /// Anchor/agent message evaluations, counted per axis and iteration.
    pub spatial_evaluations: usize,
    /// Evaluations that came back rejected (included in the count above).
    pub spatial_rejected: usize,
    pub temporal_fused: usize,
    pub temporal_rejected: usize,
    pub neighbors: usize,
    /// Whether the EKF update ran (false means pure dead reckoning).
    pub refined: bool,
    pub numerical_failure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub id: NodeId,
    pub belief: StateBelief,
    pub fused_iter: PeerBelief,
    pub prev_posterior: PeerBelief,
    pub stats: SlotStats,
}

fn marginals(belief: &StateBelief) -> PeerBelief {
    let (x, y) = belief.position_marginals();
    PeerBelief::new(x, y)
}

impl AgentRuntime {
    pub fn new(id: NodeId, belief: StateBelief) -> Self {
        let m = marginals(&belief);
        AgentRuntime {
            id,
            belief,
            fused_iter: m,
            prev_posterior: m,
            stats: SlotStats::default(),
        }
    }
}

/// Everything an agent receives during one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inbox {
    pub anchor_obs: Vec<(Position2D, RangeMeasurement)>,
    pub agent_obs: Vec<(NodeId, RangeMeasurement)>,
    /// Peer beliefs for a single-agent step; ignored by [`step_network`],
    /// which supplies the live broadcasts of every iteration.
    pub peer_beliefs: BTreeMap<NodeId, PeerBelief>,
    pub internal: Option<InternalMeasurement>,
}

impl Inbox {
    pub fn neighbor_count(&self) -> usize {
        self.anchor_obs.len() + self.agent_obs.len()
    }
}

struct SlotWork {
    prior: StateBelief,
    prior_axes: [AxisGaussian; 2],
    temporal: [Option<AxisGaussian>; 2],
    belief: PeerBelief,
    accepted_last: usize,
    stats: SlotStats,
    messages: Vec<AxisGaussian>,
}

impl SlotWork {
    fn begin(rt: &AgentRuntime, inbox: &Inbox, model: &TransitionModel) -> Result<Self> {
        let prior = ekf_predict(&rt.belief, model)?;
        let (px, py) = prior.position_marginals();
        let mut stats = SlotStats {
            neighbors: inbox.neighbor_count(),
            ..SlotStats::default()
        };
        // Computed once per slot at the predicted mean; never re-linearized.
        let mut temporal = [None, None];
        if let Some(z_int) = &inbox.internal {
            for (slot, axis) in temporal.iter_mut().zip(Axis::BOTH) {
                match temporal_message(axis, prior.position(), &rt.prev_posterior, z_int) {
                    Ok(m) => *slot = Some(m),
                    Err(_) => stats.temporal_rejected += 1,
                }
            }
        }
        Ok(SlotWork {
            prior,
            prior_axes: [px, py],
            temporal,
            belief: PeerBelief::new(px, py),
            accepted_last: 0,
            stats,
            messages: Vec::new(),
        })
    }

    fn iterate<'a>(&mut self, inbox: &Inbox, peers: impl Fn(&NodeId) -> Option<&'a PeerBelief>) {
        let lin = self.belief.mean();
        let mut fused = [self.prior_axes[0]; 2];
        let mut accepted = 0;
        for (k, axis) in Axis::BOTH.into_iter().enumerate() {
            self.messages.clear();
            if let Some(t) = self.temporal[k] {
                self.messages.push(t);
            }
            for (pos, z) in &inbox.anchor_obs {
                self.stats.spatial_evaluations += 1;
                match anchor_message(axis, lin, *pos, z) {
                    Ok(m) => self.messages.push(m),
                    Err(_) => self.stats.spatial_rejected += 1,
                }
            }
            for (peer_id, z) in &inbox.agent_obs {
                self.stats.spatial_evaluations += 1;
                match peers(peer_id).map(|peer| agent_message(axis, lin, peer, z)) {
                    Some(Ok(m)) => self.messages.push(m),
                    _ => self.stats.spatial_rejected += 1,
                }
            }
            accepted += self.messages.len();
            fused[k] = fuse_axis(self.prior_axes[k], &self.messages);
        }
        self.accepted_last = accepted;
        self.belief = PeerBelief::new(fused[0], fused[1]);
    }

    fn finish(mut self, rt: &mut AgentRuntime, opts: &LocalizerOptions) -> Result<()> {
        self.stats.temporal_fused = self.temporal.iter().flatten().count();
        let refined = if self.accepted_last == 0 {
            // Nothing entered the sums: the fused belief is the prior itself.
            self.belief = PeerBelief::new(self.prior_axes[0], self.prior_axes[1]);
            self.prior
        } else {
            self.stats.refined = true;
            let fused = PositionBelief::from_axes(self.belief.x, self.belief.y);
            match ekf_update(&self.prior, &fused) {
                Ok(b) => b,
                Err(e) => {
                    self.stats.numerical_failure = true;
                    self.stats.refined = false;
                    rt.stats = self.stats;
                    return Err(e.with_context(&alloc::format!("{}", rt.id)));
                }
            }
        };
        rt.prev_posterior = match opts.temporal_source {
            TemporalSource::Refined => marginals(&refined),
            TemporalSource::Fused => self.belief,
        };
        rt.fused_iter = self.belief;
        rt.belief = refined;
        rt.stats = self.stats;
        Ok(())
    }
}

/// Run one full slot for a single agent whose neighbours' beliefs are fixed
/// (taken from `inbox.peer_beliefs`) for every iteration.
pub fn step_agent(
    rt: &AgentRuntime,
    inbox: &Inbox,
    model: &TransitionModel,
    opts: &LocalizerOptions,
) -> Result<AgentRuntime> {
    let mut work = SlotWork::begin(rt, inbox, model)?;
    for _ in 0..opts.l_max {
        work.iterate(inbox, |id| inbox.peer_beliefs.get(id));
    }
    let mut out = rt.clone();
    work.finish(&mut out, opts)?;
    Ok(out)
}

/// Run one slot for the whole network under the synchronous schedule.
///
/// `inboxes[i]` belongs to `agents[i]`. An agent whose refinement fails
/// numerically keeps its prediction and gets `stats.numerical_failure` set;
/// the returned vector lists those failures.
pub fn step_network(
    agents: &mut [AgentRuntime],
    inboxes: &[Inbox],
    model: &TransitionModel,
    opts: &LocalizerOptions,
) -> Result<Vec<crate::Error>> {
    assert_eq!(agents.len(), inboxes.len(), "one inbox per agent");
    let mut work = agents
        .iter()
        .zip(inboxes)
        .map(|(rt, inbox)| SlotWork::begin(rt, inbox, model))
        .collect::<Result<Vec<_>>>()?;
    let mut snapshot: BTreeMap<NodeId, PeerBelief> = BTreeMap::new();
    for _ in 0..opts.l_max {
        snapshot.clear();
        snapshot.extend(agents.iter().zip(&work).map(|(rt, w)| (rt.id, w.belief)));
        for (w, inbox) in work.iter_mut().zip(inboxes) {
            w.iterate(inbox, |id| snapshot.get(id));
        }
    }
    let mut failures = Vec::new();
    for (rt, w) in agents.iter_mut().zip(work) {
        let prior = w.prior;
        if let Err(e) = w.finish(rt, opts) {
            rt.belief = prior;
            rt.fused_iter = marginals(&prior);
            rt.prev_posterior = marginals(&prior);
            failures.push(e);
        }
    }
    Ok(failures)
}

/// Prediction only (the dead-reckoning baseline).
pub fn predict_only(rt: &mut AgentRuntime, model: &TransitionModel) -> Result<()> {
    rt.belief = ekf_predict(&rt.belief, model)?;
    rt.fused_iter = marginals(&rt.belief);
    rt.prev_posterior = rt.fused_iter;
    rt.stats = SlotStats::default();
    Ok(())
}

/// The belief an agent broadcasts to its neighbours.
pub fn broadcast_belief(rt: &AgentRuntime) -> PeerBelief {
    rt.fused_iter
}

/// Spatial message evaluations performed by the agent in its last slot.
pub fn count_message_ops(rt: &AgentRuntime) -> usize {
    rt.stats.spatial_evaluations
}
