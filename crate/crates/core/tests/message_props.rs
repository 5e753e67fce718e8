use coloc_core::oracle::{integrate_anchor_message, Bounds, IntegrandMode, QuadratureSpec};
use coloc_core::{
    agent_message, anchor_message, fuse_axis, temporal_message, Axis, AxisGaussian,
    InternalMeasurement, NodeId, PeerBelief, Position2D, RangeMeasurement,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn range(value: f64, variance: f64) -> RangeMeasurement {
    RangeMeasurement {
        from: NodeId::anchor(0),
        to: NodeId::agent(0),
        value,
        variance,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn gaussians() -> impl Strategy<Value = Vec<AxisGaussian>> {
    prop::collection::vec(
        (-1e4..1e4f64, 1e-2..1e4f64).prop_map(|(m, v)| AxisGaussian::new(m, v)),
        1..12,
    )
}

fn point() -> impl Strategy<Value = Position2D> {
    (-3000.0..3000.0f64, -3000.0..3000.0f64).prop_map(|(x, y)| Position2D::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fusion_is_commutative(prior in gaussians(), msgs in gaussians(), rot in 0usize..12) {
        let prior = prior[0];
        let a = fuse_axis(prior, &msgs);
        let mut shuffled = msgs.clone();
        shuffled.rotate_left(rot % msgs.len());
        shuffled.reverse();
        let b = fuse_axis(prior, &shuffled);
        prop_assert!(rel(a.mean, b.mean) < 1e-12 || (a.mean - b.mean).abs() < 1e-9);
        prop_assert!(rel(a.variance, b.variance) < 1e-12);
    }

    #[test]
    fn fusion_is_associative(prior in gaussians(), msgs in gaussians(), split in 0usize..12) {
        let prior = prior[0];
        let k = split % (msgs.len() + 1);
        let whole = fuse_axis(prior, &msgs);
        let staged = fuse_axis(fuse_axis(prior, &msgs[..k]), &msgs[k..]);
        prop_assert!(rel(whole.mean, staged.mean) < 1e-12 || (whole.mean - staged.mean).abs() < 1e-9);
        prop_assert!(rel(whole.variance, staged.variance) < 1e-12);
    }

    #[test]
    fn fusion_precision_is_sum(prior in gaussians(), msgs in gaussians()) {
        let prior = prior[0];
        let f = fuse_axis(prior, &msgs);
        let sum: f64 = prior.precision() + msgs.iter().map(|m| m.precision()).sum::<f64>();
        prop_assert!(rel(f.precision(), sum) < 1e-12);
    }

    #[test]
    fn reflection_swaps_axes(lin in point(), other in point(), z in 1.0..4000.0f64, s2 in 0.01..40.0f64,
                             vx in 0.1..100.0f64, vy in 0.1..100.0f64) {
        let r = range(z, s2);
        let close = |a: Result<AxisGaussian, _>, b: Result<AxisGaussian, _>| match (a, b) {
            (Ok(a), Ok(b)) => rel(a.mean, b.mean) < 1e-9 || (a.mean - b.mean).abs() < 1e-9,
            (Err(a), Err(b)) => a == b,
            _ => false,
        };
        let close_var = |a: Result<AxisGaussian, _>, b: Result<AxisGaussian, _>| match (a, b) {
            (Ok(a), Ok(b)) => rel(a.variance, b.variance) < 1e-9,
            (Err(_), Err(_)) => true,
            _ => false,
        };
        for (axis, mirrored) in [(Axis::X, Axis::Y), (Axis::Y, Axis::X)] {
            let a = anchor_message(axis, lin, other, &r);
            let b = anchor_message(mirrored, lin.swapped(), other.swapped(), &r);
            prop_assert!(close(a, b) && close_var(a, b), "{:?} {:?}", a, b);

            let peer = PeerBelief::new(AxisGaussian::new(other.x, vx), AxisGaussian::new(other.y, vy));
            let flipped = PeerBelief::new(peer.y, peer.x);
            let a = agent_message(axis, lin, &peer, &r);
            let b = agent_message(mirrored, lin.swapped(), &flipped, &r);
            prop_assert!(close(a, b) && close_var(a, b), "{:?} {:?}", a, b);

            let zi = InternalMeasurement { agent: NodeId::agent(0), value: z, variance: s2 };
            let a = temporal_message(axis, lin, &peer, &zi);
            let b = temporal_message(mirrored, lin.swapped(), &flipped, &zi);
            prop_assert!(close(a, b) && close_var(a, b), "{:?} {:?}", a, b);
        }
    }

    #[test]
    fn accepted_messages_are_valid_gaussians(lin in point(), other in point(), z in 0.0..4000.0f64, s2 in 1e-3..40.0f64) {
        if let Ok(m) = anchor_message(Axis::X, lin, other, &range(z, s2)) {
            prop_assert!(m.is_valid());
        }
    }
}

fn kl(p: AxisGaussian, q: AxisGaussian) -> f64 {
    0.5 * (p.variance / q.variance + (q.mean - p.mean).powi(2) / q.variance - 1.0
        + (q.variance / p.variance).ln())
}

#[test]
fn approximation_degrades_with_linearization_offset() {
    let offsets = [1.0, 10.0, 50.0, 100.0, 200.0];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut totals = [0.0; 5];
    let geometries = 50;
    for _ in 0..geometries {
        let truth = Position2D::new(0.0, 0.0);
        let d = rng.random_range(150.0..600.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let anchor = Position2D::new(d * phi.cos(), d * phi.sin());
        let s2 = 0.01 * d;
        let half = 25.0;
        let spec = QuadratureSpec {
            nodes: 256,
            x: Bounds::Fixed {
                lo: -half,
                hi: half,
            },
            y: Bounds::Fixed {
                lo: -half,
                hi: half,
            },
            peer_sigmas: 6.0,
        };
        let exact =
            integrate_anchor_message(Axis::X, truth, anchor, d, s2, &spec, IntegrandMode::Exact)
                .unwrap();
        // Outward direction (positive component away from the anchor) keeps
        // the Taylor point outside the ring.
        let n = ((truth.x - anchor.x) / d, (truth.y - anchor.y) / d);
        let dir = loop {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            if t.cos() * n.0 + t.sin() * n.1 > 0.1 {
                break (t.cos(), t.sin());
            }
        };
        for (k, r) in offsets.iter().enumerate() {
            let lin = Position2D::new(truth.x + r * dir.0, truth.y + r * dir.1);
            // Same window for both integrands, so truncation cancels out.
            let tp =
                integrate_anchor_message(Axis::X, lin, anchor, d, s2, &spec, IntegrandMode::Taylor)
                    .unwrap();
            totals[k] += kl(exact, tp);
        }
    }
    let mean: Vec<f64> = totals.iter().map(|t| t / geometries as f64).collect();
    for w in mean.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-6), "{mean:?}");
    }
}
