//! Small fixed-size vector/matrix helpers used throughout the crate.
//!
//! Everything here operates on plain `[f64; 3]` / `[[f64; 3]; 3]` so callers
//! never pay for a linear-algebra framework on the hot paths.

use num_complex::Complex64;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
/// Complex 3-vector (field values of the electric field and its curl).
pub type CVec3 = [Complex64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    scale(a, 1.0 / n)
}

/// Matrix-vector product `m · v`.
#[inline]
pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Transposed matrix-vector product `mᵀ · v`.
#[inline]
pub fn mat_t_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3×3 matrix via the adjugate; caller guarantees `det != 0`.
pub fn inv3(m: &Mat3) -> Mat3 {
    let d = det3(m);
    let id = 1.0 / d;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id,
        ],
    ]
}

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
pub fn cvec_zero() -> CVec3 {
    [C_ZERO; 3]
}

#[inline]
pub fn cvec_add(a: CVec3, b: CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn cvec_sub(a: CVec3, b: CVec3) -> CVec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn cvec_scale(a: CVec3, s: Complex64) -> CVec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// |a|² = Σ |a_i|² for a complex 3-vector.
#[inline]
pub fn cvec_norm2(a: CVec3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

/// Real 3-vector promoted to a complex one.
#[inline]
pub fn cvec_from_real(a: Vec3) -> CVec3 {
    [a[0].into(), a[1].into(), a[2].into()]
}

/// Tangential component `n × (a × n)` of a complex vector w.r.t. a unit normal.
#[inline]
pub fn tangential_part(a: CVec3, n: Vec3) -> CVec3 {
    // n × (a × n) = a − (a·n) n, componentwise over re/im.
    let an = a[0] * n[0] + a[1] * n[1] + a[2] * n[2];
    [a[0] - an * n[0], a[1] - an * n[1], a[2] - an * n[2]]
}

/// Rotated tangential trace `a × n` of a complex vector w.r.t. a unit normal.
#[inline]
pub fn cross_with_normal(a: CVec3, n: Vec3) -> CVec3 {
    [
        a[1] * n[2] - a[2] * n[1],
        a[2] * n[0] - a[0] * n[2],
        a[0] * n[1] - a[1] * n[0],
    ]
}
