//! Small dense helpers for the 3-parameter problem.

use nalgebra::{Matrix3, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Dense third-order tensor over the three model parameters, indexed `[r][j][l]`.
pub type Tensor3 = [[[f64; 3]; 3]; 3];

pub const ZERO_TENSOR: Tensor3 = [[[0.0; 3]; 3]; 3];

/// Reciprocal condition number in the 1-norm; zero when the matrix is singular.
pub fn rcond(m: &Mat3) -> f64 {
    match m.try_inverse() {
        Some(inv) => {
            let c = norm1(m) * norm1(&inv);
            if c.is_finite() && c > 0.0 {
                1.0 / c
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

fn norm1(m: &Mat3) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse guarded by a reciprocal-condition threshold.
pub fn guarded_inverse(m: &Mat3, min_rcond: f64) -> Option<Mat3> {
    if !m.iter().all(|v| v.is_finite()) {
        return None;
    }
    if rcond(m) < min_rcond {
        return None;
    }
    m.try_inverse()
}

pub fn is_positive_definite(m: &Mat3) -> bool {
    m.iter().all(|v| v.is_finite()) && m.symmetric_part().cholesky().is_some()
}

/// `tr(A · T[·][·][s])` for each slice `s` of the tensor's last index.
pub fn trace_contract(a: &Mat3, t: &Tensor3) -> Vec3 {
    let mut out = Vec3::zeros();
    for s in 0..3 {
        let mut acc = 0.0;
        for r in 0..3 {
            for j in 0..3 {
                acc += a[(r, j)] * t[j][r][s];
            }
        }
        out[s] = acc;
    }
    out
}

pub fn tensor_slice(t: &Tensor3, s: usize) -> Mat3 {
    Mat3::from_fn(|r, j| t[r][j][s])
}

pub fn to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(r, j)];
        }
    }
    out
}

pub fn from_rows(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|r, j| rows[r][j])
}

pub fn max_abs(v: &Vec3) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn add_scaled(a: &mut Tensor3, b: &Tensor3, scale: f64) {
    for r in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                a[r][j][l] += scale * b[r][j][l];
            }
        }
    }
}
