//! Closed-form Gaussian messages from range factors.
//!
//! A range factor `exp{-(z - |u|)^2 / (2 s2)}` is expanded as
//! `z^2 - 2 z |u| + |u|^2`. The squared norm is already quadratic in the
//! positions, so only the linear occurrence of `|u|` is replaced by its
//! second-order Taylor polynomial around the current linearization offset
//! `e` (with `rho = |e|`, unit vector `n = e / rho`):
//!
//! ```text
//! |e + d| ~ rho + n.d + d^T (I - n n^T) d / (2 rho)
//! ```
//!
//! The exponent becomes `-(d^T M d - 2 c n.d) / (2 s2)` with `c = z - rho`
//! and `M = n n^T + (1 - z/rho) (I - n n^T)`. Completing the square in the
//! orthogonal coordinate and integrating it out leaves a Gaussian in the
//! requested axis with
//!
//! ```text
//! mean     = ref_x + z e1 / rho
//! variance = s2 * (e1^2 / rho^2 + e2^2 / (rho (rho - z)))
//! ```
//!
//! For a peer with Gaussian belief the joint exponent depends only on the
//! position difference, so the peer's variance along the axis simply adds.
//! The Y-axis message is the X-axis message of the configuration reflected
//! across `y = x`.
//!
//! The formal completion can produce a non-positive "variance" (the
//! linearization point sits inside the measured ring and the ring direction
//! is far from the axis). Such messages are [`Rejected`] and must be left out
//! of the fusion sums.

use num_traits::Float;

use crate::model::{AxisGaussian, InternalMeasurement, Position2D, RangeMeasurement};

/// Minimum separation (m) between a linearization point and the reference
/// node; every coefficient divides by powers of that distance.
pub const EPS_DIST: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    fn orient(self, p: Position2D) -> Position2D {
        match self {
            Axis::X => p,
            Axis::Y => p.swapped(),
        }
    }
}

/// Per-axis position belief broadcast by an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerBelief {
    pub x: AxisGaussian,
    pub y: AxisGaussian,
}

impl PeerBelief {
    pub fn new(x: AxisGaussian, y: AxisGaussian) -> Self {
        PeerBelief { x, y }
    }

    pub fn mean(&self) -> Position2D {
        Position2D::new(self.x.mean, self.y.mean)
    }

    pub fn axis(&self, axis: Axis) -> AxisGaussian {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_valid() && self.y.is_valid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejected {
    /// Linearization point closer than [`EPS_DIST`] to the reference node.
    DegenerateGeometry,
    /// Completed square has non-positive or non-finite variance.
    InvalidGaussian,
}

/// `N(beta / (2 alpha), gamma / (2 alpha))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MessageCoefficients {
    pub fn mean(&self) -> f64 {
        self.beta / (2.0 * self.alpha)
    }

    pub fn variance(&self) -> f64 {
        self.gamma / (2.0 * self.alpha)
    }

    pub fn gaussian(&self) -> Result<AxisGaussian, Rejected> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Rejected::InvalidGaussian);
        }
        let g = AxisGaussian::new(self.mean(), self.variance());
        if g.is_valid() {
            Ok(g)
        } else {
            Err(Rejected::InvalidGaussian)
        }
    }

    /// Add an independent Gaussian spread of `extra` (m^2) to the message.
    fn widened(self, extra: f64) -> Self {
        MessageCoefficients {
            gamma: self.gamma + 2.0 * self.alpha * extra,
            ..self
        }
    }
}

/// Coefficients of the message about `axis` of a node linearized at `lin`,
/// from a range `z` (variance `s2`) to a node at `reference`.
pub fn range_coefficients(
    axis: Axis,
    lin: Position2D,
    reference: Position2D,
    z: f64,
    s2: f64,
) -> Result<MessageCoefficients, Rejected> {
    let lin = axis.orient(lin);
    let reference = axis.orient(reference);
    let e1 = lin.x - reference.x;
    let e2 = lin.y - reference.y;
    let rho = Float::hypot(e1, e2);
    if !(rho >= EPS_DIST) {
        return Err(Rejected::DegenerateGeometry);
    }
    let mean = reference.x + z * e1 / rho;
    // Multiplying through by rho^2 (rho - z) keeps alpha, gamma finite on
    // the ring itself; the axis-aligned case has no orthogonal term at all.
    let (alpha, gamma) = if e2 == 0.0 {
        (0.5 * rho * rho, s2 * e1 * e1)
    } else {
        let gap = rho - z;
        (0.5 * rho * rho * gap, s2 * (e1 * e1 * gap + rho * e2 * e2))
    };
    Ok(MessageCoefficients {
        alpha,
        beta: 2.0 * alpha * mean,
        gamma,
    })
}

/// Message from an anchor at an exactly known position.
pub fn anchor_message(
    axis: Axis,
    lin_point: Position2D,
    anchor_pos: Position2D,
    z: &RangeMeasurement,
) -> Result<AxisGaussian, Rejected> {
    range_coefficients(axis, lin_point, anchor_pos, z.value, z.variance)?.gaussian()
}

/// Message from a neighbouring agent whose position belief is `peer`.
pub fn agent_message(
    axis: Axis,
    lin_point_i: Position2D,
    peer: &PeerBelief,
    z: &RangeMeasurement,
) -> Result<AxisGaussian, Rejected> {
    peer_message(axis, lin_point_i, peer, z.value, z.variance)
}

/// Message tying the current position to the previous slot's posterior
/// through the measured travelled distance.
pub fn temporal_message(
    axis: Axis,
    cur_lin_point: Position2D,
    prev_posterior: &PeerBelief,
    z_int: &InternalMeasurement,
) -> Result<AxisGaussian, Rejected> {
    peer_message(
        axis,
        cur_lin_point,
        prev_posterior,
        z_int.value,
        z_int.variance,
    )
}

fn peer_message(
    axis: Axis,
    lin: Position2D,
    peer: &PeerBelief,
    z: f64,
    s2: f64,
) -> Result<AxisGaussian, Rejected> {
    let range_part = range_coefficients(axis, lin, peer.mean(), z, s2)?;
    // The peer spread must not mask an invalid range part.
    range_part.gaussian()?;
    range_part.widened(peer.axis(axis).variance).gaussian()
}

/// Precision-weighted product of the prior with every accepted message.
pub fn fuse_axis(prior: AxisGaussian, messages: &[AxisGaussian]) -> AxisGaussian {
    if messages.is_empty() {
        return prior;
    }
    let mut precision = prior.precision();
    let mut weighted = prior.mean * precision;
    for m in messages {
        let p = m.precision();
        precision += p;
        weighted += m.mean * p;
    }
    AxisGaussian::new(weighted / precision, 1.0 / precision)
}
