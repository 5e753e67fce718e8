use coloc_core::localizer::predict_only;
use coloc_core::rng::{stream, Purpose};
use coloc_core::spawn::{systematic_resample, Particle, SpawnOptions};
use coloc_core::{
    make_transition_model, spa_ekf_step, spawn_step, AgentRuntime, Inbox, NodeId, ParticleCloud,
    Position2D, RangeMeasurement, SpaEkfAgent, StateBelief,
};
use rand::Rng;

fn anchor_inbox(truth: Position2D, anchors: &[Position2D], noiseless: bool, seed: u64) -> Inbox {
    let mut rng = stream(seed, Purpose::Validation, 0, 9);
    let mut inbox = Inbox::default();
    for (k, a) in anchors.iter().enumerate() {
        let d = a.distance(&truth);
        let v = 0.01 * d;
        let z = if noiseless {
            d
        } else {
            d + v.sqrt() * rng.random_range(-1.5..1.5)
        };
        inbox.anchor_obs.push((
            *a,
            RangeMeasurement {
                from: NodeId::anchor(k as u32),
                to: NodeId::agent(0),
                value: z,
                variance: v,
            },
        ));
    }
    inbox
}

fn triangle(truth: Position2D) -> Vec<Position2D> {
    vec![
        Position2D::new(truth.x - 300.0, truth.y - 100.0),
        Position2D::new(truth.x + 250.0, truth.y - 200.0),
        Position2D::new(truth.x + 50.0, truth.y + 400.0),
    ]
}

#[test]
fn resampling_preserves_weighted_mean() {
    let n = 500;
    let mut outside = 0;
    for trial in 0..100u32 {
        let mut rng = stream(5, Purpose::Validation, trial, 0);
        let raw: Vec<(Position2D, f64)> = (0..n)
            .map(|_| {
                let p = Position2D::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-50.0..50.0),
                );
                (p, rng.random_range(0.0..1.0f64).powi(3))
            })
            .collect();
        let total: f64 = raw.iter().map(|r| r.1).sum();
        let cloud = ParticleCloud::new(
            raw.iter()
                .map(|&(position, w)| Particle {
                    position,
                    weight: w / total,
                })
                .collect(),
        )
        .unwrap();
        let m = cloud.mean();
        let (sxx, _, _) = cloud.covariance();
        let ess = 1.0
            / cloud
                .particles()
                .iter()
                .map(|p| p.weight * p.weight)
                .sum::<f64>();
        let out = systematic_resample(&cloud, &mut rng);
        assert_eq!(out.len(), n);
        assert!(out
            .particles()
            .iter()
            .all(|p| (p.weight - 1.0 / n as f64).abs() < 1e-15));
        let se = (sxx / ess.min(n as f64)).sqrt();
        if (out.mean().x - m.x).abs() > 3.0 * se {
            outside += 1;
        }
    }
    // Systematic resampling has lower variance than multinomial; allow the
    // usual 3-sigma tail.
    assert!(
        outside <= 3,
        "{outside} of 100 trials beyond 3 standard errors"
    );
}

/// Posterior mean of prior x likelihood on a dense grid.
fn grid_posterior(prior: &StateBelief, inbox: &Inbox) -> Position2D {
    let (m, s) = (prior.position(), prior.cov[0][0].sqrt());
    let n = 801;
    let half = 6.0 * s;
    let step = 2.0 * half / (n - 1) as f64;
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = Position2D::new(m.x - half + i as f64 * step, m.y - half + j as f64 * step);
            let mut ll = -((p.x - m.x).powi(2) + (p.y - m.y).powi(2)) / (2.0 * s * s);
            for (a, z) in &inbox.anchor_obs {
                ll -= (p.distance(a) - z.value).powi(2) / (2.0 * z.variance);
            }
            logs.push((p, ll));
        }
    }
    let top = logs.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut w, mut x, mut y) = (0.0, 0.0, 0.0);
    for (p, ll) in logs {
        let e = (ll - top).exp();
        w += e;
        x += e * p.x;
        y += e * p.y;
    }
    Position2D::new(x / w, y / w)
}

#[test]
fn more_particles_approach_the_grid_posterior() {
    let opts = SpawnOptions::default();
    let (mut small, mut large) = (0.0, 0.0);
    for seed in 0..20u64 {
        let truth = Position2D::new(1500.0 + 7.0 * seed as f64, 1400.0);
        let inbox = anchor_inbox(truth, &triangle(truth), false, seed);
        let prior = StateBelief::from_std([truth.x + 8.0, truth.y - 6.0, 0.0, 0.0], 15.0, 1.0);
        let oracle = grid_posterior(&prior, &inbox);
        for (count, acc) in [(200, &mut small), (5000, &mut large)] {
            let mut rng = stream(seed, Purpose::Spawn, 0, count as u32);
            let c = &prior.cov;
            let cloud = ParticleCloud::gaussian(
                prior.position(),
                c[0][0],
                c[0][1],
                c[1][1],
                count,
                &mut rng,
            )
            .unwrap();
            let (post, _) = spawn_step(&cloud, &inbox, &opts, &mut rng);
            *acc += post.mean().distance(&oracle);
        }
    }
    assert!(
        large < small,
        "N_s=5000 error {large} vs N_s=200 error {small}"
    );
}

#[test]
fn three_anchor_fix_is_close() {
    let opts = SpawnOptions::default();
    for seed in 0..10u64 {
        let truth = Position2D::new(1000.0 + 50.0 * seed as f64, 1200.0);
        let inbox = anchor_inbox(truth, &triangle(truth), true, seed);
        let mut rng = stream(seed, Purpose::Spawn, 1, 0);
        let cloud = ParticleCloud::gaussian(
            Position2D::new(truth.x + 20.0, truth.y - 15.0),
            900.0,
            0.0,
            900.0,
            2000,
            &mut rng,
        )
        .unwrap();
        let (post, stats) = spawn_step(&cloud, &inbox, &opts, &mut rng);
        assert!(post.mean().distance(&truth) < 3.0, "{:?}", post.mean());
        assert!(!stats.diverged);
    }
}

#[test]
fn evaluation_count_scales_with_neighbours_particles_iterations() {
    let truth = Position2D::new(1000.0, 1000.0);
    for (n_rel, count, l_max) in [(3, 200, 10), (3, 500, 30), (4, 300, 5)] {
        let mut anchors = triangle(truth);
        anchors.truncate(n_rel);
        while anchors.len() < n_rel {
            anchors.push(Position2D::new(truth.x, truth.y - 350.0));
        }
        let inbox = anchor_inbox(truth, &anchors, false, 1);
        let opts = SpawnOptions {
            l_max,
            ..Default::default()
        };
        let mut rng = stream(3, Purpose::Spawn, 0, 0);
        let cloud = ParticleCloud::gaussian(truth, 100.0, 0.0, 100.0, count, &mut rng).unwrap();
        let (_, stats) = spawn_step(&cloud, &inbox, &opts, &mut rng);
        let analytic = (n_rel * count * l_max) as f64;
        assert!(
            (stats.evaluations as f64 - analytic).abs() <= 0.2 * analytic,
            "{} vs {analytic}",
            stats.evaluations
        );
    }
}

#[test]
fn spa_ekf_without_neighbours_is_prediction() {
    let model = make_transition_model(1.0, 5.0).unwrap();
    let prior = StateBelief::from_std([300.0, 400.0, 10.0, -5.0], 10.0, 5.0);
    let agent = SpaEkfAgent::new(NodeId::agent(0), prior, stream(1, Purpose::SpaEkf, 0, 0));
    let out = spa_ekf_step(
        &agent,
        &Inbox::default(),
        &model,
        &SpawnOptions::default(),
        500,
    )
    .unwrap();
    let mut rt = AgentRuntime::new(NodeId::agent(0), prior);
    predict_only(&mut rt, &model).unwrap();
    assert_eq!(out.runtime.belief, rt.belief);
}

#[test]
fn spa_ekf_is_deterministic_and_refines() {
    let model = make_transition_model(1.0, 5.0).unwrap();
    let truth = Position2D::new(1200.0, 900.0);
    let inbox = anchor_inbox(truth, &triangle(truth), false, 4);
    let prior = StateBelief::from_std([truth.x + 12.0, truth.y + 9.0, 0.0, 0.0], 15.0, 1.0);
    let agent = SpaEkfAgent::new(NodeId::agent(0), prior, stream(2, Purpose::SpaEkf, 0, 0));
    let a = spa_ekf_step(&agent, &inbox, &model, &SpawnOptions::default(), 500).unwrap();
    let b = spa_ekf_step(&agent, &inbox, &model, &SpawnOptions::default(), 500).unwrap();
    assert_eq!(a.runtime.belief, b.runtime.belief);
    assert!(a.estimate().distance(&truth) < prior.position().distance(&truth));
    assert!(a.runtime.belief.cov[0][0] < prior.cov[0][0]);
    a.runtime.belief.validate().unwrap();
}
