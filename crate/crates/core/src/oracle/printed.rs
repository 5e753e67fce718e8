//! Coefficient systems exactly as printed in the original derivation, kept
//! only so the validation report can show how far they are from the
//! quadrature reference. The localizer never uses these.

use num_traits::Float;

use crate::messages::{Axis, MessageCoefficients, PeerBelief};
use crate::model::Position2D;

fn orient(axis: Axis, p: Position2D) -> Position2D {
    match axis {
        Axis::X => p,
        Axis::Y => p.swapped(),
    }
}

pub fn printed_anchor_coefficients(
    axis: Axis,
    lin: Position2D,
    anchor: Position2D,
    z: f64,
    s2: f64,
) -> MessageCoefficients {
    let lin = orient(axis, lin);
    let anchor = orient(axis, anchor);
    let (e1, e2) = (lin.x - anchor.x, lin.y - anchor.y);
    let r = Float::hypot(e1, e2);
    let r3 = r * r * r;
    let alpha = 3.0 * (z * e1 * e1 - r3) * (z * e2 * e2 - r3) - 7.0 * z * z * e1 * e1 * e2 * e2;
    let beta = 6.0
        * (z * e1 * e2 * lin.y + z * e1 * r - z * e2 * e2 * lin.x + anchor.x)
        * (r3 - z * e2 * e2)
        - 14.0 * z * e1 * e2 * (anchor.y + z * e2 * r - z * e1 * e1 * lin.y + z * e1 * e2 * lin.x);
    let gamma = 6.0 * r3 * s2 * (r3 - z * e1 * e1);
    MessageCoefficients { alpha, beta, gamma }
}

/// Also the temporal system, which is printed with the same structure.
pub fn printed_agent_coefficients(
    axis: Axis,
    lin_i: Position2D,
    peer: &PeerBelief,
    z: f64,
    s2: f64,
) -> MessageCoefficients {
    let lin = orient(axis, lin_i);
    let (pm, py) = match axis {
        Axis::X => (peer.mean(), peer.y),
        Axis::Y => (peer.mean().swapped(), peer.x),
    };
    let (g1, g2) = (lin.x - pm.x, lin.y - pm.y);
    let r = Float::hypot(g1, g2);
    let (r2, r3) = (r * r, r * r * r);
    let sy2 = py.variance;
    let m1 = z * g1 * g1 - r3;
    let m2 = 2.0 * z * g1 * g2;
    let n1 = s2 * r3;
    let n2 = -z * g2 * r2;
    let n3 = z * g1 * r2 - z * z * g1 * r;
    let q1 = 3.0 * n1 * sy2 * (3.0 * n1 + 4.0 * m1 * sy2);
    let q2 = 3.0 * m2 * m2 * q1 - 9.0 * r2 * m1 * q1;
    let q3 =
        3.0 * n1 * m1 * m2 * py.mean * s2 * sy2 - 4.0 * m1 * m2 * n2 * s2 * sy2 - 9.0 * q1 * n3;
    let t = 28.0 * m1 * m2 * m2 * n1 * sy2 * sy2;
    MessageCoefficients {
        alpha: -q2 * q2 - t * t,
        beta: t * (q3 - 2.0) + q2 * (q3 + 2.0),
        gamma: 18.0 * m1 * n1 * q1 * (q2 - t),
    }
}
