//! Oracle validation suites: closed-form messages against quadrature, the
//! EKF against exact rational arithmetic, and static three-anchor fixes
//! against least-squares trilateration.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use coloc_core::oracle::{
    ekf_predict_exact, ekf_update_exact, integrate_agent_message, integrate_anchor_message,
    printed_agent_coefficients, printed_anchor_coefficients, trilaterate, IntegrandMode,
    QuadratureSpec,
};
use coloc_core::rng::{self, Purpose, SimRng};
use coloc_core::{
    agent_message, anchor_message, broadcast_belief, ekf_predict, ekf_update,
    make_transition_model, step_agent, temporal_message, AgentRuntime, Axis, AxisGaussian, Inbox,
    InternalMeasurement, LocalizerOptions, MessageCoefficients, NodeId, PeerBelief, Position2D,
    PositionBelief, RangeMeasurement, Rejected, StateBelief,
};

pub const DEFAULT_SEED: u64 = 20_231_113;
pub const MEAN_TOL_SIGMAS: f64 = 0.05;
pub const VAR_REL_TOL: f64 = 0.1;
pub const EKF_REL_TOL: f64 = 1e-9;
pub const FIX_TOL_M: f64 = 1.0;
pub const ORACLE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Anchor,
    Agent,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageCase {
    pub index: usize,
    pub kind: MessageKind,
    pub axis: Axis,
    pub lin: Position2D,
    /// Anchor position, or the peer / previous-posterior belief.
    pub reference: PeerBelief,
    pub z: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Match,
    Mismatch,
    /// Both sides agree the message does not exist.
    BothRejected,
    /// The closed form completes the square formally; the integrand itself
    /// has no finite mass.
    FormalOnly,
    /// The oracle found a message the closed form rejected.
    OracleOnly,
    OracleError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: MessageCase,
    pub closed: Result<AxisGaussian, Rejected>,
    pub oracle: Option<AxisGaussian>,
    pub verdict: Verdict,
    /// |closed mean - oracle mean| / oracle std.
    pub mean_sigmas: f64,
    pub var_rel: f64,
    pub printed: MessageCoefficients,
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

fn in_disc(rng: &mut SimRng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..TAU);
    (r * a.cos(), r * a.sin())
}

/// Case `index` of the randomized suite: separation in [50, 1000] m, range
/// noise variance 1 % of the true distance, linearization point within 10 m
/// of the true position.
pub fn message_case(seed: u64, index: usize) -> MessageCase {
    let mut rng = rng::stream(seed, Purpose::Validation, index as u32, 0);
    let kind = match index % 3 {
        0 => MessageKind::Anchor,
        1 => MessageKind::Agent,
        _ => MessageKind::Temporal,
    };
    let axis = if rng.random::<bool>() {
        Axis::X
    } else {
        Axis::Y
    };
    let centre = Position2D::new(rng.random_range(0.0..3000.0), rng.random_range(0.0..3000.0));
    let sep = rng.random_range(50.0..1000.0);
    let dir = rng.random_range(0.0..TAU);
    let lin = Position2D::new(centre.x + sep * dir.cos(), centre.y + sep * dir.sin());
    let off = in_disc(&mut rng, 10.0);
    let truth = Position2D::new(lin.x + off.0, lin.y + off.1);
    let (reference, other_truth) = match kind {
        MessageKind::Anchor => (
            PeerBelief::new(
                AxisGaussian::new(centre.x, 0.0),
                AxisGaussian::new(centre.y, 0.0),
            ),
            centre,
        ),
        MessageKind::Agent | MessageKind::Temporal => {
            let (lo, hi) = if kind == MessageKind::Agent {
                (1.0, 20.0)
            } else {
                (0.5, 10.0)
            };
            let sx: f64 = rng.random_range(lo..hi);
            let sy: f64 = rng.random_range(lo..hi);
            let t = Position2D::new(
                centre.x + sx * normal(&mut rng),
                centre.y + sy * normal(&mut rng),
            );
            (
                PeerBelief::new(
                    AxisGaussian::new(centre.x, sx * sx),
                    AxisGaussian::new(centre.y, sy * sy),
                ),
                t,
            )
        }
    };
    let d = truth.distance(&other_truth);
    let s2 = 0.01 * d;
    let z = (d + s2.sqrt() * normal(&mut rng)).max(0.0);
    MessageCase {
        index,
        kind,
        axis,
        lin,
        reference,
        z,
        s2,
    }
}

fn closed_form(c: &MessageCase) -> Result<AxisGaussian, Rejected> {
    let id = NodeId::agent(0);
    match c.kind {
        MessageKind::Anchor => anchor_message(
            c.axis,
            c.lin,
            c.reference.mean(),
            &RangeMeasurement {
                from: NodeId::anchor(0),
                to: id,
                value: c.z,
                variance: c.s2,
            },
        ),
        MessageKind::Agent => agent_message(
            c.axis,
            c.lin,
            &c.reference,
            &RangeMeasurement {
                from: NodeId::agent(1),
                to: id,
                value: c.z,
                variance: c.s2,
            },
        ),
        MessageKind::Temporal => temporal_message(
            c.axis,
            c.lin,
            &c.reference,
            &InternalMeasurement {
                agent: id,
                value: c.z,
                variance: c.s2,
            },
        ),
    }
}

pub fn check_message_case(c: &MessageCase) -> CaseReport {
    let closed = closed_form(c);
    let spec = QuadratureSpec::auto(ORACLE_NODES);
    let oracle = match c.kind {
        MessageKind::Anchor => integrate_anchor_message(
            c.axis,
            c.lin,
            c.reference.mean(),
            c.z,
            c.s2,
            &spec,
            IntegrandMode::Taylor,
        ),
        _ => integrate_agent_message(
            c.axis,
            c.lin,
            &c.reference,
            c.z,
            c.s2,
            &spec,
            IntegrandMode::Taylor,
        ),
    };
    let printed = match c.kind {
        MessageKind::Anchor => {
            printed_anchor_coefficients(c.axis, c.lin, c.reference.mean(), c.z, c.s2)
        }
        _ => printed_agent_coefficients(c.axis, c.lin, &c.reference, c.z, c.s2),
    };
    let (mut mean_sigmas, mut var_rel) = (f64::NAN, f64::NAN);
    let verdict = match (&closed, &oracle) {
        (Ok(m), Ok(o)) => {
            mean_sigmas = (m.mean - o.mean).abs() / o.std();
            var_rel = (m.variance - o.variance).abs() / o.variance;
            if mean_sigmas < MEAN_TOL_SIGMAS && var_rel < VAR_REL_TOL {
                Verdict::Match
            } else {
                Verdict::Mismatch
            }
        }
        (Err(_), Err(coloc_core::Error::NotNormalizable(_))) => Verdict::BothRejected,
        (Ok(_), Err(coloc_core::Error::NotNormalizable(_))) => Verdict::FormalOnly,
        (Err(_), Ok(_)) => Verdict::OracleOnly,
        (_, Err(e)) => Verdict::OracleError(e.to_string()),
    };
    CaseReport {
        case: *c,
        closed,
        oracle: oracle.ok(),
        verdict,
        mean_sigmas,
        var_rel,
        printed,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageSuite {
    pub reports: Vec<CaseReport>,
}

impl MessageSuite {
    pub fn count(&self, pred: impl Fn(&Verdict) -> bool) -> usize {
        self.reports.iter().filter(|r| pred(&r.verdict)).count()
    }

    pub fn compared(&self) -> usize {
        self.count(|v| matches!(v, Verdict::Match | Verdict::Mismatch))
    }

    /// No disagreement, no oracle failure, and at least a quarter of the
    /// cases compared numerically.
    pub fn passed(&self) -> bool {
        let bad = self.count(|v| {
            matches!(
                v,
                Verdict::Mismatch | Verdict::OracleOnly | Verdict::OracleError(_)
            )
        });
        bad == 0 && 4 * self.compared() >= self.reports.len()
    }

    pub fn worst(&self) -> (f64, f64) {
        self.reports
            .iter()
            .filter(|r| r.mean_sigmas.is_finite())
            .fold((0.0, 0.0), |(m, v), r| {
                (m.max(r.mean_sigmas), v.max(r.var_rel))
            })
    }
}

pub fn run_message_suite(seed: u64, cases: usize) -> MessageSuite {
    let reports = (0..cases)
        .into_par_iter()
        .map(|i| check_message_case(&message_case(seed, i)))
        .collect();
    MessageSuite { reports }
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn belief_error(a: &StateBelief, b: &StateBelief) -> f64 {
    let mscale = b.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cscale = b.cov.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..4 {
        worst = worst.max(rel_err(a.mean[i], b.mean[i], mscale));
        for j in 0..4 {
            worst = worst.max(rel_err(a.cov[i][j], b.cov[i][j], cscale));
        }
    }
    worst
}

fn random_belief(rng: &mut SimRng) -> StateBelief {
    let mean = [
        rng.random_range(0.0..3000.0),
        rng.random_range(0.0..3000.0),
        rng.random_range(-60.0..60.0),
        rng.random_range(-60.0..60.0),
    ];
    let mut a = [[0.0; 4]; 4];
    for (i, row) in a.iter_mut().enumerate() {
        let scale = if i < 2 {
            rng.random_range(0.5..30.0)
        } else {
            rng.random_range(0.1..10.0)
        };
        for v in row.iter_mut() {
            *v = scale * normal(rng);
        }
    }
    let mut cov = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            cov[i][j] = (0..4).map(|k| a[i][k] * a[j][k]).sum();
        }
    }
    StateBelief::new(mean, cov)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfSuite {
    pub cases: usize,
    pub worst_predict: f64,
    pub worst_update: f64,
    pub failures: usize,
}

impl EkfSuite {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst_predict <= EKF_REL_TOL && self.worst_update <= EKF_REL_TOL
    }
}

/// Random predict/update pairs compared against exact rational evaluation.
/// Errors are relative to the largest magnitude of the compared vector or
/// matrix.
pub fn run_ekf_suite(seed: u64, cases: usize) -> EkfSuite {
    let results: Vec<Option<(f64, f64)>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Purpose::Validation, i as u32, 1);
            let model =
                make_transition_model(rng.random_range(0.1..5.0), rng.random_range(0.0..10.0))
                    .ok()?;
            let prev = random_belief(&mut rng);
            let fused = PositionBelief {
                mean_x: prev.mean[0] + 20.0 * normal(&mut rng),
                mean_y: prev.mean[1] + 20.0 * normal(&mut rng),
                var_x: rng.random_range(0.1..1000.0),
                var_y: rng.random_range(0.1..1000.0),
            };
            let p = ekf_predict(&prev, &model).ok()?;
            let p_ref = ekf_predict_exact(&prev, &model).ok()?;
            let u = ekf_update(&p, &fused).ok()?;
            let u_ref = ekf_update_exact(&p, &fused).ok()?;
            Some((belief_error(&p, &p_ref), belief_error(&u, &u_ref)))
        })
        .collect();
    let mut suite = EkfSuite {
        cases,
        worst_predict: 0.0,
        worst_update: 0.0,
        failures: 0,
    };
    for r in results {
        match r {
            Some((p, u)) => {
                suite.worst_predict = suite.worst_predict.max(p);
                suite.worst_update = suite.worst_update.max(u);
            }
            None => suite.failures += 1,
        }
    }
    suite
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixSuite {
    pub errors: Vec<f64>,
    pub failures: usize,
}

impl FixSuite {
    pub fn worst(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst() < FIX_TOL_M
    }
}

/// Geometry `index`: three anchors on a jittered triangle around a static
/// agent, exact ranges with the standard noise variance, prior within 10 m.
/// Returns (fused fix, trilateration fix).
pub fn static_fix(
    seed: u64,
    index: usize,
    l_max: usize,
) -> coloc_core::Result<(Position2D, Position2D)> {
    let mut rng = rng::stream(seed, Purpose::Validation, index as u32, 2);
    let truth = Position2D::new(
        rng.random_range(500.0..2500.0),
        rng.random_range(500.0..2500.0),
    );
    let base = rng.random_range(0.0..TAU);
    let anchors: Vec<Position2D> = (0..3)
        .map(|k| {
            let a = base + TAU * k as f64 / 3.0 + rng.random_range(-0.4..0.4);
            let r = rng.random_range(150.0..550.0);
            Position2D::new(truth.x + r * a.cos(), truth.y + r * a.sin())
        })
        .collect();
    let ranges: Vec<f64> = anchors.iter().map(|a| a.distance(&truth)).collect();
    let off = in_disc(&mut rng, 10.0);
    let prior = StateBelief::from_std([truth.x + off.0, truth.y + off.1, 0.0, 0.0], 10.0, 1.0);
    let me = NodeId::agent(0);
    let mut inbox = Inbox::default();
    for (k, (a, &d)) in anchors.iter().zip(&ranges).enumerate() {
        inbox.anchor_obs.push((
            *a,
            RangeMeasurement {
                from: NodeId::anchor(k as u32),
                to: me,
                value: d,
                variance: 0.01 * d,
            },
        ));
    }
    let model = make_transition_model(1.0, 5.0)?;
    let opts = LocalizerOptions {
        l_max,
        ..Default::default()
    };
    let out = step_agent(&AgentRuntime::new(me, prior), &inbox, &model, &opts)?;
    let fix = trilaterate(&anchors, &ranges, prior.position())?;
    Ok((broadcast_belief(&out).mean(), fix))
}

pub fn run_fix_suite(seed: u64, geometries: usize, l_max: usize) -> FixSuite {
    let mut suite = FixSuite {
        errors: Vec::new(),
        failures: 0,
    };
    for i in 0..geometries {
        match static_fix(seed, i, l_max) {
            Ok((a, b)) => suite.errors.push(a.distance(&b)),
            Err(_) => suite.failures += 1,
        }
    }
    suite
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

pub fn render_report(msg: &MessageSuite, ekf: &EkfSuite, fix: &FixSuite) -> String {
    let mut s = String::new();
    let n = msg.reports.len();
    let _ = writeln!(s, "closed-form messages vs Taylor-integrand quadrature ({n} cases, {ORACLE_NODES} nodes/axis)");
    let _ = writeln!(
        s,
        "  matched            {}",
        msg.count(|v| *v == Verdict::Match)
    );
    let _ = writeln!(
        s,
        "  mismatched         {}",
        msg.count(|v| *v == Verdict::Mismatch)
    );
    let _ = writeln!(
        s,
        "  both rejected      {}",
        msg.count(|v| *v == Verdict::BothRejected)
    );
    let _ = writeln!(
        s,
        "  formal completion  {}",
        msg.count(|v| *v == Verdict::FormalOnly)
    );
    let _ = writeln!(
        s,
        "  oracle only        {}",
        msg.count(|v| *v == Verdict::OracleOnly)
    );
    let _ = writeln!(
        s,
        "  oracle errors      {}",
        msg.count(|v| matches!(v, Verdict::OracleError(_)))
    );
    let (wm, wv) = msg.worst();
    let _ = writeln!(
        s,
        "  worst |dmean|/std  {wm:.3e} (tol {MEAN_TOL_SIGMAS}), worst var rel err {wv:.3e} (tol {VAR_REL_TOL})"
    );
    for r in &msg.reports {
        if matches!(
            r.verdict,
            Verdict::Mismatch | Verdict::OracleOnly | Verdict::OracleError(_)
        ) {
            let _ = writeln!(
                s,
                "  ! case {} {:?} {:?}: {:?} closed={:?} oracle={:?}",
                r.case.index, r.case.kind, r.case.axis, r.verdict, r.closed, r.oracle
            );
        }
    }
    let mut printed_mean = Vec::new();
    let mut printed_var = Vec::new();
    let mut printed_invalid = 0;
    for r in msg.reports.iter().filter(|r| r.oracle.is_some()) {
        let o = r.oracle.expect("filtered");
        match r.printed.gaussian() {
            Ok(p) => {
                printed_mean.push((p.mean - o.mean).abs() / o.std());
                printed_var.push((p.variance - o.variance).abs() / o.variance);
            }
            Err(_) => printed_invalid += 1,
        }
    }
    let _ = writeln!(
        s,
        "printed coefficient systems on the same cases (where the oracle exists)"
    );
    let _ = writeln!(s, "  invalid Gaussian   {printed_invalid}");
    let _ = writeln!(s, "  median |dmean|/std {:.3e}", median(printed_mean));
    let _ = writeln!(s, "  median var rel err {:.3e}", median(printed_var));
    let _ = writeln!(s, "EKF vs exact rational evaluation ({} cases)", ekf.cases);
    let _ = writeln!(
        s,
        "  worst predict {:.3e}, worst update {:.3e} (tol {EKF_REL_TOL}), failures {}",
        ekf.worst_predict, ekf.worst_update, ekf.failures
    );
    let _ = writeln!(
        s,
        "static three-anchor fixes vs Gauss-Newton ({} geometries)",
        fix.errors.len() + fix.failures
    );
    let _ = writeln!(
        s,
        "  worst distance {:.3e} m (tol {FIX_TOL_M} m), failures {}",
        fix.worst(),
        fix.failures
    );
    let verdict = msg.passed() && ekf.passed() && fix.passed();
    let _ = writeln!(s, "result: {}", if verdict { "PASS" } else { "FAIL" });
    s
}
