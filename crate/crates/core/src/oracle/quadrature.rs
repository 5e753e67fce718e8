//! Tensor-grid trapezoid quadrature of range-factor messages.
//!
//! All sums run in the log domain. The message about `axis` is tabulated on a
//! grid of the requested coordinate and moment matched.
//!
//! For an agent (or temporal) message the integrand depends on the two
//! positions only through their difference `u = x_i - x_j`. The innermost
//! variable is therefore `w = y_i - y_j`, which makes its window independent
//! of `y_j`; the peer coordinates are integrated against their Gaussian
//! beliefs truncated at `peer_sigmas` standard deviations.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::messages::{Axis, PeerBelief};
use crate::model::{AxisGaussian, Position2D};
use crate::{Error, Result};

pub const MIN_NODES: usize = 64;

/// Half-width of an automatic window, in local standard deviations.
const AUTO_HALF_WIDTH: f64 = 10.0;
/// An edge is negligible when its log-density is this far below the peak.
const EDGE_DROP: f64 = 40.0;
const MAX_SCALE: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds {
    Fixed {
        lo: f64,
        hi: f64,
    },
    /// Locate the mode nearest the linearization point by repeated parabola
    /// fits of the log-density and cover `AUTO_HALF_WIDTH` local standard
    /// deviations; fails with `NotNormalizable` when no concave peak exists
    /// or the edges never become negligible.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrandMode {
    /// `exp{-(z - |u|)^2 / (2 s2)}`.
    Exact,
    /// The linear `|u|` term replaced by its second-order Taylor polynomial
    /// at the linearization offset.
    Taylor,
}

/// Grid description. `x` is the message coordinate (in the frame where the
/// requested axis is X); `y` is the orthogonal coordinate of the receiving
/// node, measured relative to the peer displacement for agent messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub x: Bounds,
    pub y: Bounds,
    pub peer_sigmas: f64,
}

impl QuadratureSpec {
    pub fn auto(nodes: usize) -> Self {
        QuadratureSpec {
            nodes,
            x: Bounds::Auto,
            y: Bounds::Auto,
            peer_sigmas: 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < MIN_NODES {
            return Err(Error::invalid(format!(
                "quadrature needs at least {MIN_NODES} nodes per axis"
            )));
        }
        for b in [self.x, self.y] {
            if let Bounds::Fixed { lo, hi } = b {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid("fixed bounds must be finite with lo < hi"));
                }
            }
        }
        if !(self.peer_sigmas >= 6.0) {
            return Err(Error::invalid("peer dimensions must cover at least 6 std"));
        }
        Ok(())
    }
}

/// Range geometry in the oriented frame, relative to the reference node.
#[derive(Debug, Clone, Copy)]
struct RangeModel {
    mode: IntegrandMode,
    z: f64,
    s2: f64,
    e: (f64, f64),
    rho: f64,
}

impl RangeModel {
    fn new(mode: IntegrandMode, z: f64, s2: f64, e: (f64, f64)) -> Result<Self> {
        if !(s2 > 0.0 && s2.is_finite() && z.is_finite()) {
            return Err(Error::invalid("range variance must be positive"));
        }
        let rho = Float::hypot(e.0, e.1);
        if mode == IntegrandMode::Taylor && !(rho > 0.0) {
            return Err(Error::invalid(
                "Taylor expansion at the reference node itself",
            ));
        }
        Ok(RangeModel {
            mode,
            z,
            s2,
            e,
            rho,
        })
    }

    /// Log of the factor at offset `u` (additive constants dropped).
    fn log_factor(&self, u1: f64, u2: f64) -> f64 {
        match self.mode {
            IntegrandMode::Exact => {
                let r = self.z - Float::hypot(u1, u2);
                -r * r / (2.0 * self.s2)
            }
            IntegrandMode::Taylor => {
                let (d1, d2) = (u1 - self.e.0, u2 - self.e.1);
                let along = (self.e.0 * d1 + self.e.1 * d2) / self.rho;
                let t = self.rho + along + (d1 * d1 + d2 * d2 - along * along) / (2.0 * self.rho);
                -(self.z * self.z - 2.0 * self.z * t + u1 * u1 + u2 * u2) / (2.0 * self.s2)
            }
        }
    }

    fn width(&self) -> f64 {
        Float::sqrt(self.s2)
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |k| {
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        (lo + k as f64 * h, w)
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + Float::ln(values.map(|v| Float::exp(v - max)).sum::<f64>())
}

/// `ln ∫ exp(g(t)) dt` over `[lo, hi]`.
fn log_trapezoid(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let terms: Vec<f64> = grid(lo, hi, n).map(|(t, w)| g(t) + Float::ln(w)).collect();
    log_sum_exp(terms.iter().copied())
}

/// Window for the log-density `g`, starting from `seed` with length scale
/// `scale`. Returns `(lo, hi, local_std)`.
fn auto_window(g: &impl Fn(f64) -> f64, seed: f64, scale: f64) -> Result<(f64, f64, f64)> {
    let mut c = seed;
    let mut h = scale.max(1e-9);
    let mut std = f64::NAN;
    for _ in 0..80 {
        let (gm, g0, gp) = (g(c - h), g(c), g(c + h));
        let curv = (gp - 2.0 * g0 + gm) / (h * h);
        if !g0.is_finite() || !(curv < 0.0) || !curv.is_finite() {
            h *= 4.0;
            if h > MAX_SCALE {
                return Err(Error::NotNormalizable(format!(
                    "no concave peak near {seed} (curvature {curv:e})"
                )));
            }
            continue;
        }
        let s = 1.0 / Float::sqrt(-curv);
        let step = ((gp - gm) / (2.0 * h)) / -curv;
        let step = step.clamp(-4.0 * h.max(s), 4.0 * h.max(s));
        let settled = step.abs() < 1e-6 * s && (h / s - 1.0).abs() < 0.25;
        c += step;
        h = s;
        std = s;
        if settled {
            break;
        }
    }
    if !std.is_finite() {
        return Err(Error::NotNormalizable(format!(
            "window search did not settle near {seed}"
        )));
    }
    let peak = g(c);
    let mut half = AUTO_HALF_WIDTH * std;
    for _ in 0..6 {
        let (lo, hi) = (c - half, c + half);
        let (glo, ghi) = (g(lo), g(hi));
        if glo < peak - EDGE_DROP && ghi < peak - EDGE_DROP {
            return Ok((lo, hi, std));
        }
        half *= 2.0;
    }
    Err(Error::NotNormalizable(format!(
        "mass does not decay away from {c} (std {std:e})"
    )))
}

fn window(
    bounds: Bounds,
    g: &impl Fn(f64) -> f64,
    seed: f64,
    scale: f64,
) -> Result<(f64, f64, f64)> {
    match bounds {
        Bounds::Fixed { lo, hi } => Ok((lo, hi, (hi - lo) / (2.0 * AUTO_HALF_WIDTH))),
        Bounds::Auto => auto_window(g, seed, scale),
    }
}

/// Tabulate `g` over `[lo, hi]` and moment-match `exp(g)`. A `+inf` entry
/// marks an inner integral that diverged.
fn moments(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<AxisGaussian> {
    let mut pts = Vec::with_capacity(n);
    for (t, w) in grid(lo, hi, n) {
        let v = g(t);
        if v == f64::INFINITY {
            return Err(Error::NotNormalizable(format!(
                "inner integral diverges at {t}"
            )));
        }
        pts.push((t, v + Float::ln(w)));
    }
    let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numerical(
            "quadrature",
            format!("no mass on [{lo}, {hi}]"),
        ));
    }
    let (mut m0, mut m1) = (0.0, 0.0);
    for &(t, lw) in &pts {
        let p = Float::exp(lw - max);
        m0 += p;
        m1 += p * t;
    }
    let mean = m1 / m0;
    let var = pts
        .iter()
        .map(|&(t, lw)| Float::exp(lw - max) * (t - mean) * (t - mean))
        .sum::<f64>()
        / m0;
    let out = AxisGaussian::new(mean, var);
    if out.is_valid() {
        Ok(out)
    } else {
        Err(Error::numerical(
            "quadrature",
            format!("degenerate moments mean={mean} var={var}"),
        ))
    }
}

fn orient(axis: Axis, p: Position2D) -> Position2D {
    match axis {
        Axis::X => p,
        Axis::Y => p.swapped(),
    }
}

/// Message about `axis` from an anchor at `anchor_pos`, range `z` with
/// variance `s2`, Taylor point `lin_point`.
pub fn integrate_anchor_message(
    axis: Axis,
    lin_point: Position2D,
    anchor_pos: Position2D,
    z: f64,
    s2: f64,
    spec: &QuadratureSpec,
    mode: IntegrandMode,
) -> Result<AxisGaussian> {
    spec.validate()?;
    let lin = orient(axis, lin_point);
    let a = orient(axis, anchor_pos);
    let model = RangeModel::new(mode, z, s2, (lin.x - a.x, lin.y - a.y))?;
    let n = spec.nodes;
    // Log-marginal in the absolute x coordinate.
    let marginal = |x: f64| -> f64 {
        let u1 = x - a.x;
        let inner = |y: f64| model.log_factor(u1, y - a.y);
        match window(spec.y, &inner, lin.y, model.width()) {
            Ok((lo, hi, _)) => log_trapezoid(&inner, lo, hi, n),
            Err(_) => f64::INFINITY,
        }
    };
    // Surface inner failures with their own diagnostics.
    let probe = |y: f64| model.log_factor(lin.x - a.x, y - a.y);
    window(spec.y, &probe, lin.y, model.width())?;
    let (lo, hi, _) = window(spec.x, &guard(&marginal), lin.x, model.width())?;
    moments(&marginal, lo, hi, n)
}

/// Message about `axis` from a neighbour whose position belief is `peer`
/// (also the temporal message, with the previous posterior as `peer`).
pub fn integrate_agent_message(
    axis: Axis,
    lin_point_i: Position2D,
    peer: &PeerBelief,
    z: f64,
    s2: f64,
    spec: &QuadratureSpec,
    mode: IntegrandMode,
) -> Result<AxisGaussian> {
    spec.validate()?;
    if !peer.is_valid() {
        return Err(Error::invalid("peer belief must have positive variances"));
    }
    let lin = orient(axis, lin_point_i);
    let (px, py) = match axis {
        Axis::X => (peer.x, peer.y),
        Axis::Y => (peer.y, peer.x),
    };
    let model = RangeModel::new(mode, z, s2, (lin.x - px.mean, lin.y - py.mean))?;
    let n = spec.nodes;
    let log_gauss = |t: f64, g: AxisGaussian| {
        let d = t - g.mean;
        -d * d / (2.0 * g.variance) - 0.5 * Float::ln(2.0 * core::f64::consts::PI * g.variance)
    };

    // G(u1) = ∫ f(u1, w) dw
    let seed_w = model.e.1;
    let log_g = |u1: f64| -> f64 {
        let inner = |w: f64| model.log_factor(u1, w);
        let bounds = match spec.y {
            Bounds::Fixed { lo, hi } => Bounds::Fixed {
                lo: lo - py.mean,
                hi: hi - py.mean,
            },
            Bounds::Auto => Bounds::Auto,
        };
        match window(bounds, &inner, seed_w, model.width()) {
            Ok((lo, hi, _)) => log_trapezoid(&inner, lo, hi, n),
            Err(_) => f64::INFINITY,
        }
    };
    let probe = |w: f64| model.log_factor(model.e.0, w);
    window(spec.y, &probe, seed_w, model.width())?;

    // The x_j grid has to resolve G as well as the peer belief.
    let (_, _, g_std) = auto_window(&guard(&log_g), model.e.0, model.width())
        .or_else(|_| Ok::<_, Error>((0.0, 0.0, model.width())))?;
    let sx = spec.peer_sigmas * px.std();
    let nx = n
        .max(((2.0 * sx) / (0.25 * g_std)).ceil() as usize + 1)
        .min(1 << 14);
    let sy = spec.peer_sigmas * py.std();
    let log_y_mass = log_trapezoid(&|t| log_gauss(t, py), py.mean - sy, py.mean + sy, n);

    let marginal = |x: f64| -> f64 {
        let terms: Vec<f64> = grid(px.mean - sx, px.mean + sx, nx)
            .map(|(xj, wj)| log_gauss(xj, px) + log_g(x - xj) + Float::ln(wj))
            .collect();
        log_sum_exp(terms.iter().copied()) + log_y_mass
    };
    let scale = Float::sqrt(model.s2 + px.variance);
    let (lo, hi, _) = window(spec.x, &guard(&marginal), lin.x, scale)?;
    moments(&marginal, lo, hi, n)
}

/// Map the "inner integral diverged" marker (+inf) to NaN so the window
/// search treats it as a non-concave point instead of a peak.
fn guard<'a>(g: &'a impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 + 'a {
    move |t| {
        let v = g(t);
        if v == f64::INFINITY {
            f64::NAN
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        let spec = QuadratureSpec::auto(16);
        let r = integrate_anchor_message(
            Axis::X,
            Position2D::new(100.0, 0.0),
            Position2D::new(0.0, 0.0),
            100.0,
            1.0,
            &spec,
            IntegrandMode::Taylor,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn auto_window_finds_gaussian_peak() {
        let g = |t: f64| -(t - 3.0) * (t - 3.0) / (2.0 * 4.0);
        let (lo, hi, s) = auto_window(&g, 100.0, 1.0).unwrap();
        assert!((s - 2.0).abs() < 1e-6);
        assert!(((lo + hi) / 2.0 - 3.0).abs() < 1e-6);
    }

    #[test]
    fn auto_window_rejects_convex_log_density() {
        let g = |t: f64| t * t;
        assert!(matches!(
            auto_window(&g, 0.0, 1.0),
            Err(Error::NotNormalizable(_))
        ));
    }
}
