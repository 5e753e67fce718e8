//! Fixed-size matrix helpers for the 4-state constant-velocity filter.

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

pub const ZERO4: Mat4 = [[0.0; 4]; 4];

pub fn identity4() -> Mat4 {
    let mut m = ZERO4;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_vec(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = ZERO4;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] =
                a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j] + a[i][3] * b[3][j];
        }
    }
    out
}

pub fn transpose(a: &Mat4) -> Mat4 {
    let mut out = ZERO4;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn add(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += b[i][j];
        }
    }
    out
}

/// Average with the transpose.
pub fn symmetrize(a: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let m = 0.5 * (a[i][j] + a[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    out
}

pub fn trace(a: &Mat4) -> f64 {
    a[0][0] + a[1][1] + a[2][2] + a[3][3]
}

/// Eigenvalues of a symmetric 2x2 matrix `[[a, b], [b, d]]`, ascending.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    use num_traits::Float;
    let mid = 0.5 * (a + d);
    let rad = Float::sqrt(0.25 * (a - d) * (a - d) + b * b);
    (mid - rad, mid + rad)
}

/// Smallest eigenvalue of a symmetric 4x4 matrix by cyclic Jacobi sweeps.
pub fn sym4_min_eigenvalue(a: &Mat4) -> f64 {
    use num_traits::Float;
    let mut m = symmetrize(a);
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 * (1.0 + trace(&m).abs()) {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + Float::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / Float::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..4 {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..4 {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..4).map(|i| m[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_finds_min_eigenvalue_of_diagonal_and_rotated() {
        let mut d = ZERO4;
        d[0][0] = 3.0;
        d[1][1] = -2.0;
        d[2][2] = 5.0;
        d[3][3] = 1.0;
        assert!((sym4_min_eigenvalue(&d) + 2.0).abs() < 1e-12);

        // [[2,1],[1,2]] block has eigenvalues 1 and 3.
        let mut m = identity4();
        m[0][0] = 2.0;
        m[1][1] = 2.0;
        m[0][1] = 1.0;
        m[1][0] = 1.0;
        m[2][2] = 4.0;
        m[3][3] = 7.0;
        assert!((sym4_min_eigenvalue(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym2_eigs() {
        let (lo, hi) = sym2_eigenvalues(2.0, 1.0, 2.0);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }
}
