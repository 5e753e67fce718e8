//! Domain types and the two EKF stages (prediction and refinement).
//!
//! The state of an agent is `(x, y, vx, vy)` under a constant-velocity
//! transition. The refinement stage observes only the position block, with
//! the fused factor-graph belief acting as the measurement.

use alloc::format;
use num_traits::Float;

use crate::linalg::{self, Mat4, Vec4, ZERO4};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Anchor,
    Agent,
}

/// Identifies an anchor or an agent. Anchors sort before agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: u32,
}

impl NodeId {
    pub const fn anchor(index: u32) -> Self {
        NodeId {
            kind: NodeKind::Anchor,
            index,
        }
    }

    pub const fn agent(index: u32) -> Self {
        NodeId {
            kind: NodeKind::Agent,
            index,
        }
    }

    pub fn is_agent(&self) -> bool {
        self.kind == NodeKind::Agent
    }
}

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.kind {
            NodeKind::Anchor => write!(f, "anchor{}", self.index),
            NodeKind::Agent => write!(f, "agent{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Position2D { x, y }
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        Float::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Reflection across the line `y = x`.
    pub fn swapped(&self) -> Position2D {
        Position2D {
            x: self.y,
            y: self.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity2D {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity2D {
    pub const fn new(vx: f64, vy: f64) -> Self {
        Velocity2D { vx, vy }
    }

    pub fn speed(&self) -> f64 {
        Float::hypot(self.vx, self.vy)
    }
}

/// Ground-truth kinematic state of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentTruth {
    pub position: Position2D,
    pub velocity: Velocity2D,
}

/// Gaussian estimate of `(x, y, vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBelief {
    pub mean: Vec4,
    pub cov: Mat4,
}

impl StateBelief {
    pub fn new(mean: Vec4, cov: Mat4) -> Self {
        StateBelief { mean, cov }
    }

    /// Diagonal covariance from per-component standard deviations.
    pub fn from_std(mean: Vec4, pos_std: f64, vel_std: f64) -> Self {
        let mut cov = ZERO4;
        cov[0][0] = pos_std * pos_std;
        cov[1][1] = pos_std * pos_std;
        cov[2][2] = vel_std * vel_std;
        cov[3][3] = vel_std * vel_std;
        StateBelief { mean, cov }
    }

    pub fn position(&self) -> Position2D {
        Position2D::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Velocity2D {
        Velocity2D::new(self.mean[2], self.mean[3])
    }

    /// Per-axis position marginals `(x, y)`.
    pub fn position_marginals(&self) -> (AxisGaussian, AxisGaussian) {
        (
            AxisGaussian {
                mean: self.mean[0],
                variance: self.cov[0][0],
            },
            AxisGaussian {
                mean: self.mean[1],
                variance: self.cov[1][1],
            },
        )
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().flatten().all(|v| v.is_finite())
    }

    /// Symmetric within 1e-9 relative and PSD within -1e-9 * trace.
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::invalid("state belief has non-finite entries"));
        }
        let scale = self
            .cov
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (self.cov[i][j] - self.cov[j][i]).abs() > 1e-9 * scale {
                    return Err(Error::invalid(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let tr = linalg::trace(&self.cov);
        let min_eig = linalg::sym4_min_eigenvalue(&self.cov);
        if min_eig < -1e-9 * tr.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!(
                "covariance not positive semi-definite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }
}

/// One-dimensional Gaussian; the unit of every factor-graph message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl AxisGaussian {
    pub const fn new(mean: f64, variance: f64) -> Self {
        AxisGaussian { mean, variance }
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }

    pub fn std(&self) -> f64 {
        Float::sqrt(self.variance)
    }

    pub fn is_valid(&self) -> bool {
        self.mean.is_finite() && self.variance.is_finite() && self.variance > 0.0
    }
}

/// Fused position statistics handed to the refinement stage (mean vector and
/// diagonal covariance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBelief {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
}

impl PositionBelief {
    pub fn from_axes(x: AxisGaussian, y: AxisGaussian) -> Self {
        PositionBelief {
            mean_x: x.mean,
            mean_y: y.mean,
            var_x: x.variance,
            var_y: y.variance,
        }
    }
}

/// Noisy external range `z = d + e` observed by agent `to` from node `from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub from: NodeId,
    pub to: NodeId,
    pub value: f64,
    pub variance: f64,
}

/// Distance an agent travelled since the previous slot, as measured on board.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalMeasurement {
    pub agent: NodeId,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    pub delta_t: f64,
    pub f: Mat4,
    pub q: Mat4,
}

/// Constant-velocity transition with random-walk velocity noise:
/// `Q = diag((sv*dt)^2/4, (sv*dt)^2/4, sv^2, sv^2)`.
pub fn make_transition_model(delta_t: f64, sigma_v: f64) -> Result<TransitionModel> {
    if !(delta_t > 0.0) || !delta_t.is_finite() {
        return Err(Error::invalid(format!(
            "deltaT must be positive, got {delta_t}"
        )));
    }
    if !(sigma_v >= 0.0) || !sigma_v.is_finite() {
        return Err(Error::invalid(format!(
            "sigmaV must be non-negative, got {sigma_v}"
        )));
    }
    let mut f = linalg::identity4();
    f[0][2] = delta_t;
    f[1][3] = delta_t;
    let qp = (sigma_v * delta_t) * (sigma_v * delta_t) / 4.0;
    let qv = sigma_v * sigma_v;
    let mut q = ZERO4;
    q[0][0] = qp;
    q[1][1] = qp;
    q[2][2] = qv;
    q[3][3] = qv;
    Ok(TransitionModel { delta_t, f, q })
}

/// Stage 1: `mean' = F mean`, `cov' = F cov F^T + Q`.
pub fn ekf_predict(prev: &StateBelief, model: &TransitionModel) -> Result<StateBelief> {
    if !prev.is_finite() {
        return Err(Error::invalid("ekf_predict: non-finite prior"));
    }
    let mean = linalg::mat_vec(&model.f, &prev.mean);
    let fp = linalg::mat_mul(&model.f, &prev.cov);
    let fpf = linalg::mat_mul(&fp, &linalg::transpose(&model.f));
    let cov = linalg::add(&fpf, &model.q);
    Ok(StateBelief { mean, cov })
}

/// Condition-number ceiling for the 2x2 innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Stage 3: Kalman update with `H = [I2 0]` and `R = diag(var_x, var_y)`.
pub fn ekf_update(prior: &StateBelief, fused: &PositionBelief) -> Result<StateBelief> {
    if !prior.is_finite() {
        return Err(Error::invalid("ekf_update: non-finite prior"));
    }
    if !(fused.var_x > 0.0 && fused.var_y > 0.0)
        || !fused.mean_x.is_finite()
        || !fused.mean_y.is_finite()
    {
        return Err(Error::invalid(
            "ekf_update: fused belief must have positive variances",
        ));
    }
    let p = &prior.cov;
    let residual = [fused.mean_x - prior.mean[0], fused.mean_y - prior.mean[1]];
    let c00 = p[0][0] + fused.var_x;
    let c11 = p[1][1] + fused.var_y;
    let c01 = 0.5 * (p[0][1] + p[1][0]);
    let (lo, hi) = linalg::sym2_eigenvalues(c00, c01, c11);
    if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION || !hi.is_finite() {
        return Err(Error::numerical(
            "ekf_update",
            format!("innovation covariance singular (eigenvalues {lo:e}, {hi:e})"),
        ));
    }
    let det = c00 * c11 - c01 * c01;
    let c_inv = [[c11 / det, -c01 / det], [-c01 / det, c00 / det]];

    // K = P H^T C^-1 (4x2)
    let mut gain = [[0.0; 2]; 4];
    for (i, row) in gain.iter_mut().enumerate() {
        for (j, g) in row.iter_mut().enumerate() {
            *g = p[i][0] * c_inv[0][j] + p[i][1] * c_inv[1][j];
        }
    }
    let mut mean = prior.mean;
    for (m, k) in mean.iter_mut().zip(&gain) {
        *m += k[0] * residual[0] + k[1] * residual[1];
    }
    let c = [[c00, c01], [c01, c11]];
    let mut cov = *p;
    for i in 0..4 {
        for j in 0..4 {
            let mut kck = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    kck += gain[i][a] * c[a][b] * gain[j][b];
                }
            }
            cov[i][j] -= kck;
        }
    }
    Ok(StateBelief {
        mean,
        cov: linalg::symmetrize(&cov),
    })
}
