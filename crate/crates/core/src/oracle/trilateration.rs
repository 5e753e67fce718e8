use alloc::format;

use num_traits::Float;

use crate::model::Position2D;
use crate::{Error, Result};

pub const STEP_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 100;

/// Gauss-Newton minimiser of `sum_k (|x - a_k| - z_k)^2` started at `init`.
pub fn trilaterate(anchors: &[Position2D], ranges: &[f64], init: Position2D) -> Result<Position2D> {
    if anchors.len() != ranges.len() {
        return Err(Error::invalid("one range per anchor"));
    }
    if anchors.len() < 3 {
        return Err(Error::invalid("trilateration needs at least three anchors"));
    }
    let a0 = anchors[0];
    let spread = anchors.iter().map(|a| a.distance(&a0)).fold(0.0, f64::max);
    let area = anchors.iter().enumerate().fold(0.0f64, |best, (i, a)| {
        anchors[i + 1..].iter().fold(best, |best, b| {
            let cross = (a.x - a0.x) * (b.y - a0.y) - (a.y - a0.y) * (b.x - a0.x);
            best.max(cross.abs())
        })
    });
    if !(area > 1e-9 * spread * spread) {
        return Err(Error::invalid("anchors are collinear"));
    }

    let mut x = init;
    for _ in 0..MAX_ITERATIONS {
        // Normal equations J^T J dx = -J^T r.
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, &z) in anchors.iter().zip(ranges) {
            let d = x.distance(a);
            if d == 0.0 {
                continue;
            }
            let (j1, j2) = ((x.x - a.x) / d, (x.y - a.y) / d);
            let r = d - z;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            b1 -= j1 * r;
            b2 -= j2 * r;
        }
        let det = a11 * a22 - a12 * a12;
        if !(det.abs() > 1e-15 * (a11 + a22) * (a11 + a22)) {
            return Err(Error::numerical(
                "trilaterate",
                format!("rank-deficient Jacobian at {x:?}"),
            ));
        }
        let dx = (a22 * b1 - a12 * b2) / det;
        let dy = (a11 * b2 - a12 * b1) / det;
        x = Position2D::new(x.x + dx, x.y + dy);
        if Float::hypot(dx, dy) < STEP_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::numerical(
        "trilaterate",
        format!("no convergence after {MAX_ITERATIONS} iterations"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ranges_recover_truth() {
        let anchors = [
            Position2D::new(0.0, 0.0),
            Position2D::new(100.0, 0.0),
            Position2D::new(0.0, 100.0),
        ];
        let truth = Position2D::new(30.0, 40.0);
        let ranges: alloc::vec::Vec<f64> = anchors.iter().map(|a| a.distance(&truth)).collect();
        let fix = trilaterate(&anchors, &ranges, Position2D::new(50.0, 50.0)).unwrap();
        assert!(fix.distance(&truth) < 1e-6);
    }

    #[test]
    fn collinear_anchors_fail() {
        let anchors = [
            Position2D::new(0.0, 0.0),
            Position2D::new(100.0, 0.0),
            Position2D::new(200.0, 0.0),
        ];
        assert!(trilaterate(&anchors, &[10.0, 90.0, 190.0], Position2D::new(10.0, 5.0)).is_err());
    }
}
