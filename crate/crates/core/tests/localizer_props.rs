use coloc_core::localizer::predict_only;
use coloc_core::{
    anchor_message, broadcast_belief, ekf_predict, fuse_axis, make_transition_model, step_agent,
    step_network, AgentRuntime, Axis, Inbox, LocalizerOptions, NodeId, PeerBelief, Position2D,
    RangeMeasurement, StateBelief,
};
use proptest::prelude::*;

fn obs(k: u32, pos: Position2D, truth: Position2D, noise: f64) -> (Position2D, RangeMeasurement) {
    let d = pos.distance(&truth);
    (
        pos,
        RangeMeasurement {
            from: NodeId::anchor(k),
            to: NodeId::agent(0),
            value: (d + noise).max(0.0),
            variance: 0.01 * d.max(1.0),
        },
    )
}

fn point(lo: f64, hi: f64) -> impl Strategy<Value = Position2D> {
    (lo..hi, lo..hi).prop_map(|(x, y)| Position2D::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn fused_variance_never_exceeds_prior(
        truth in point(500.0, 2500.0),
        offset in point(-30.0, 30.0),
        anchors in prop::collection::vec((point(-500.0, 500.0), -5.0..5.0f64), 0..6),
    ) {
        let model = make_transition_model(1.0, 5.0).unwrap();
        let rt = AgentRuntime::new(
            NodeId::agent(0),
            StateBelief::from_std([truth.x + offset.x, truth.y + offset.y, 0.0, 0.0], 20.0, 5.0),
        );
        let mut inbox = Inbox::default();
        for (k, (rel, noise)) in anchors.iter().enumerate() {
            let pos = Position2D::new(truth.x + rel.x, truth.y + rel.y);
            inbox.anchor_obs.push(obs(k as u32, pos, truth, *noise));
        }
        let opts = LocalizerOptions { l_max: 10, ..Default::default() };
        let out = step_agent(&rt, &inbox, &model, &opts).unwrap();
        let (px, py) = ekf_predict(&rt.belief, &model).unwrap().position_marginals();
        let fused = broadcast_belief(&out);
        prop_assert!(fused.x.variance <= px.variance * (1.0 + 1e-12));
        prop_assert!(fused.y.variance <= py.variance * (1.0 + 1e-12));
        prop_assert!(out.belief.validate().is_ok());
    }

    #[test]
    fn all_rejected_is_dead_reckoning(m in prop::array::uniform4(-1000.0..1000.0f64), n in 1usize..5, z in 1.0..500.0f64) {
        let model = make_transition_model(1.0, 5.0).unwrap();
        let rt = AgentRuntime::new(NodeId::agent(0), StateBelief::from_std(m, 10.0, 5.0));
        let predicted = ekf_predict(&rt.belief, &model).unwrap();
        let mut inbox = Inbox::default();
        // Every anchor sits on the linearization point: degenerate geometry.
        for k in 0..n {
            inbox.anchor_obs.push((
                predicted.position(),
                RangeMeasurement { from: NodeId::anchor(k as u32), to: rt.id, value: z, variance: 1.0 },
            ));
        }
        let out = step_agent(&rt, &inbox, &model, &LocalizerOptions::default()).unwrap();
        let mut dr = rt.clone();
        predict_only(&mut dr, &model).unwrap();
        prop_assert_eq!(out.belief, dr.belief);
        prop_assert_eq!(out.stats.spatial_rejected, out.stats.spatial_evaluations);
    }

    #[test]
    fn rejected_messages_do_not_enter_fusion(truth in point(500.0, 2500.0), rels in prop::collection::vec(point(-400.0, 400.0), 1..5)) {
        let model = make_transition_model(1.0, 5.0).unwrap();
        let rt = AgentRuntime::new(NodeId::agent(0), StateBelief::from_std([truth.x + 5.0, truth.y - 3.0, 0.0, 0.0], 10.0, 5.0));
        let prior = ekf_predict(&rt.belief, &model).unwrap();
        let lin = prior.position();
        let mut inbox = Inbox::default();
        inbox.anchor_obs.push(obs(0, lin, truth, 0.0));
        for (k, r) in rels.iter().enumerate() {
            inbox.anchor_obs.push(obs(k as u32 + 1, Position2D::new(truth.x + r.x, truth.y + r.y), truth, 0.0));
        }
        let opts = LocalizerOptions { l_max: 1, ..Default::default() };
        let out = step_agent(&rt, &inbox, &model, &opts).unwrap();
        let (px, py) = prior.position_marginals();
        let accepted = |axis| -> Vec<_> {
            inbox.anchor_obs[1..].iter().filter_map(|(a, z)| anchor_message(axis, lin, *a, z).ok()).collect()
        };
        let (ax, ay) = (accepted(Axis::X), accepted(Axis::Y));
        if ax.is_empty() && ay.is_empty() {
            // Nothing accepted at all: the belief is the prior itself.
            prop_assert_eq!(out.fused_iter, PeerBelief::new(px, py));
        } else {
            prop_assert_eq!(out.fused_iter.x, fuse_axis(px, &ax));
            prop_assert_eq!(out.fused_iter.y, fuse_axis(py, &ay));
        }
    }

    #[test]
    fn processing_order_does_not_matter(seed in 0u64..1000, rot in 1usize..6) {
        let (agents, inboxes) = network(seed, 6);
        let model = make_transition_model(1.0, 5.0).unwrap();
        let opts = LocalizerOptions { l_max: 8, ..Default::default() };
        let mut a = agents.clone();
        step_network(&mut a, &inboxes, &model, &opts).unwrap();
        let mut order: Vec<usize> = (0..agents.len()).collect();
        order.rotate_left(rot);
        order.swap(0, agents.len() - 1);
        let mut b: Vec<_> = order.iter().map(|&i| agents[i].clone()).collect();
        let ib: Vec<_> = order.iter().map(|&i| inboxes[i].clone()).collect();
        step_network(&mut b, &ib, &model, &opts).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(&b[k], &a[i]);
        }
    }
}

/// Small connected network: `n` agents in a disc with four corner anchors.
fn network(seed: u64, n: usize) -> (Vec<AgentRuntime>, Vec<Inbox>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let truths: Vec<Position2D> = (0..n)
        .map(|_| Position2D::new(rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)))
        .collect();
    let anchors = [
        Position2D::new(-50.0, -50.0),
        Position2D::new(450.0, -50.0),
        Position2D::new(-50.0, 450.0),
        Position2D::new(450.0, 450.0),
    ];
    let agents = truths
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let b = StateBelief::from_std(
                [
                    t.x + rng.random_range(-10.0..10.0),
                    t.y + rng.random_range(-10.0..10.0),
                    0.0,
                    0.0,
                ],
                10.0,
                2.0,
            );
            AgentRuntime::new(NodeId::agent(i as u32), b)
        })
        .collect();
    let inboxes = truths
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut inbox = Inbox::default();
            for (k, a) in anchors.iter().enumerate().filter(|(k, _)| (k + i) % 2 == 0) {
                inbox
                    .anchor_obs
                    .push(obs(k as u32, *a, *t, rng.random_range(-1.0..1.0)));
            }
            for (j, u) in truths.iter().enumerate().filter(|(j, _)| *j != i) {
                let d = t.distance(u);
                inbox.agent_obs.push((
                    NodeId::agent(j as u32),
                    RangeMeasurement {
                        from: NodeId::agent(j as u32),
                        to: NodeId::agent(i as u32),
                        value: d + rng.random_range(-1.0..1.0),
                        variance: 0.01 * d,
                    },
                ));
            }
            inbox
        })
        .collect();
    (agents, inboxes)
}

#[test]
fn static_fix_iterations_settle() {
    let truth = Position2D::new(1000.0, 1000.0);
    let anchors = [
        Position2D::new(700.0, 900.0),
        Position2D::new(1250.0, 800.0),
        Position2D::new(1050.0, 1400.0),
    ];
    let model = make_transition_model(1.0, 5.0).unwrap();
    for start in [
        Position2D::new(1012.0, 991.0),
        Position2D::new(985.0, 1009.0),
        Position2D::new(1006.0, 1006.0),
    ] {
        let rt = AgentRuntime::new(
            NodeId::agent(0),
            StateBelief::from_std([start.x, start.y, 0.0, 0.0], 10.0, 1.0),
        );
        let mut inbox = Inbox::default();
        for (k, a) in anchors.iter().enumerate() {
            inbox.anchor_obs.push(obs(k as u32, *a, truth, 0.0));
        }
        let means: Vec<Position2D> = (1..=30)
            .map(|l| {
                let opts = LocalizerOptions {
                    l_max: l,
                    ..Default::default()
                };
                step_agent(&rt, &inbox, &model, &opts)
                    .unwrap()
                    .fused_iter
                    .mean()
            })
            .collect();
        // The fixed point is pulled towards the prior mean, so it is not the
        // truth; the iteration still contracts onto it.
        let step = |l: usize| means[l].distance(&means[l - 1]);
        assert!(step(29) < 0.05 * step(2), "{means:?}");
        assert!(means[29].distance(&truth) < start.distance(&truth));
    }
}

#[test]
fn peers_missing_from_snapshot_are_skipped() {
    let model = make_transition_model(1.0, 5.0).unwrap();
    let rt = AgentRuntime::new(
        NodeId::agent(0),
        StateBelief::from_std([0.0, 0.0, 0.0, 0.0], 10.0, 1.0),
    );
    let mut inbox = Inbox::default();
    inbox.agent_obs.push((
        NodeId::agent(3),
        RangeMeasurement {
            from: NodeId::agent(3),
            to: rt.id,
            value: 100.0,
            variance: 1.0,
        },
    ));
    let with_peer = {
        let mut i = inbox.clone();
        i.peer_beliefs.insert(
            NodeId::agent(3),
            PeerBelief::new(
                coloc_core::AxisGaussian::new(100.0, 4.0),
                coloc_core::AxisGaussian::new(0.0, 4.0),
            ),
        );
        i
    };
    let a = step_agent(&rt, &inbox, &model, &LocalizerOptions::default()).unwrap();
    let b = step_agent(&rt, &with_peer, &model, &LocalizerOptions::default()).unwrap();
    assert_eq!(a.stats.spatial_rejected, a.stats.spatial_evaluations);
    assert!(b.stats.spatial_rejected < b.stats.spatial_evaluations);
}
