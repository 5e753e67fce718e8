//! Filter equations in exact rational arithmetic.
//!
//! Inputs are converted exactly from `f64`; the only rounding happens when
//! the result is converted back.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::linalg::{Mat4, Vec4};
use crate::model::{PositionBelief, StateBelief, TransitionModel};
use crate::{Error, Result};

type Q = BigRational;
type Matrix = Vec<Vec<Q>>;

fn q(v: f64) -> Result<Q> {
    Q::from_float(v).ok_or_else(|| Error::invalid("non-finite value in exact EKF"))
}

fn matrix(a: &Mat4) -> Result<Matrix> {
    a.iter()
        .map(|row| row.iter().map(|&v| q(v)).collect())
        .collect()
}

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, k) = (a.len(), b[0].len(), b.len());
    let mut out = vec![vec![Q::zero(); m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = Q::zero();
            for l in 0..k {
                acc += &a[i][l] * &b[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn transpose(a: &Matrix) -> Matrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].clone()).collect())
        .collect()
}

fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn to_mat4(a: &Matrix) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = to_f64(&a[i][j]);
        }
    }
    out
}

fn half_sum_transpose(a: &Matrix) -> Matrix {
    let half = Q::new(BigInt::one(), BigInt::from(2));
    let t = transpose(a);
    a.iter()
        .zip(&t)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x + y) * &half).collect())
        .collect()
}

/// `F m`, `F P F^T + Q`.
pub fn ekf_predict_exact(prev: &StateBelief, model: &TransitionModel) -> Result<StateBelief> {
    let f = matrix(&model.f)?;
    let p = matrix(&prev.cov)?;
    let qn = matrix(&model.q)?;
    let m: Matrix = prev
        .mean
        .iter()
        .map(|&v| q(v).map(|x| vec![x]))
        .collect::<Result<_>>()?;
    let mean = mul(&f, &m);
    let fp = mul(&f, &p);
    let mut cov = mul(&fp, &transpose(&f));
    for i in 0..4 {
        for j in 0..4 {
            cov[i][j] += &qn[i][j];
        }
    }
    let mut out_mean: Vec4 = [0.0; 4];
    for i in 0..4 {
        out_mean[i] = to_f64(&mean[i][0]);
    }
    Ok(StateBelief::new(out_mean, to_mat4(&cov)))
}

/// Measurement update with `H = [I 0]` and `R = diag(var_x, var_y)`:
/// residual, innovation covariance, gain `P H^T C^-1`, mean `m + K r`,
/// covariance `P - K H P` (then symmetrized).
pub fn ekf_update_exact(prior: &StateBelief, fused: &PositionBelief) -> Result<StateBelief> {
    let p = matrix(&prior.cov)?;
    let m: Vec<Q> = prior.mean.iter().map(|&v| q(v)).collect::<Result<_>>()?;
    let mut h = vec![vec![Q::zero(); 4]; 2];
    h[0][0] = Q::one();
    h[1][1] = Q::one();
    let r = vec![
        vec![q(fused.var_x)?, Q::zero()],
        vec![Q::zero(), q(fused.var_y)?],
    ];
    let residual = [q(fused.mean_x)? - &m[0], q(fused.mean_y)? - &m[1]];

    let ph_t = mul(&p, &transpose(&h));
    let mut c = mul(&h, &ph_t);
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] += &r[i][j];
        }
    }
    let det = &c[0][0] * &c[1][1] - &c[0][1] * &c[1][0];
    if det.is_zero() {
        return Err(Error::numerical(
            "ekf_update_exact",
            "singular innovation covariance",
        ));
    }
    let c_inv = vec![
        vec![&c[1][1] / &det, -(&c[0][1] / &det)],
        vec![-(&c[1][0] / &det), &c[0][0] / &det],
    ];
    let k = mul(&ph_t, &c_inv);
    let mut mean: Vec4 = [0.0; 4];
    for i in 0..4 {
        let v = &m[i] + &k[i][0] * &residual[0] + &k[i][1] * &residual[1];
        mean[i] = to_f64(&v);
    }
    let khp = mul(&mul(&k, &h), &p);
    let diff: Matrix = p
        .iter()
        .zip(&khp)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    Ok(StateBelief::new(mean, to_mat4(&half_sum_transpose(&diff))))
}
