//! Quadrature on the reference triangle and tetrahedron.
//!
//! Rules are conical products of 1D Gauss and Gauss-Jacobi rules under the
//! Duffy (collapsed-coordinate) map. An m-point 1D factor per direction gives
//! m² (triangle) or m³ (tet) points exact for total degree 2m−1, with strictly
//! interior points and positive weights. Rules for degrees ≤ 14 are built once
//! and cached; higher degrees fall back to the same construction on demand.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::AffineMap;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// A quadrature rule on a reference cell.
///
/// For the tetrahedron, points are reference coordinates (x̂, ŷ, ẑ) with
/// x̂+ŷ+ẑ ≤ 1; for the triangle the third coordinate is 0 and x̂+ŷ ≤ 1.
/// Weights sum to the reference measure (1/6 tet, 1/2 triangle).
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub exactness_degree: i32,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights of the m-point Gauss-Legendre rule on [0, 1].
///
/// Newton iteration on the three-term recurrence of the Legendre polynomials;
/// standard and stable for the sizes used here (m ≤ ~60).
pub fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let n = m as f64;
    for i in 0..m {
        // Chebyshev-based initial guess on [-1, 1].
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_m(t) and P'_m(t) by recurrence.
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        // Recompute derivative at the converged node for the weight.
        let (mut p0, mut p1) = (1.0, t);
        for k in 2..=m {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n * (t * p1 - p0) / (t * t - 1.0);
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // Map from [-1, 1] to [0, 1]; emit in ascending order.
        x[m - 1 - i] = 0.5 * (t + 1.0);
        w[m - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Value and derivative of the Jacobi polynomial P_k^{(a,0)} at t ∈ (-1, 1).
fn jacobi_eval(k: usize, a: f64, t: f64) -> (f64, f64) {
    let b = 0.0;
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut pm1 = 1.0; // P_{j-1}
    let mut pm = 0.5 * (a - b + (a + b + 2.0) * t); // P_j starting at j = 1
    for j in 2..=k {
        let jf = j as f64;
        let c1 = 2.0 * jf * (jf + a + b) * (2.0 * jf + a + b - 2.0);
        let c2 = (2.0 * jf + a + b - 1.0) * (a * a - b * b);
        let c3 = (2.0 * jf + a + b - 2.0) * (2.0 * jf + a + b - 1.0) * (2.0 * jf + a + b);
        let c4 = 2.0 * (jf + a - 1.0) * (jf + b - 1.0) * (2.0 * jf + a + b);
        let p2 = ((c2 + c3 * t) * pm - c4 * pm1) / c1;
        pm1 = pm;
        pm = p2;
    }
    let kf = k as f64;
    // (2k+a+b)(1-t²) P'_k = k [a - b - (2k+a+b) t] P_k + 2 (k+a)(k+b) P_{k-1}
    let dp = (kf * (a - b - (2.0 * kf + a + b) * t) * pm + 2.0 * (kf + a) * (kf + b) * pm1)
        / ((2.0 * kf + a + b) * (1.0 - t * t));
    (pm, dp)
}

/// Roots of P_k^{(a,0)} found degree by degree: the roots of consecutive
/// Jacobi polynomials interlace, so each root of P_k is bracketed by known
/// roots of P_{k-1} (plus the interval endpoints) and bisection cannot miss.
fn jacobi_roots(m: usize, a: f64) -> Vec<f64> {
    let mut roots: Vec<f64> = Vec::new();
    for k in 1..=m {
        let mut brackets = Vec::with_capacity(k + 1);
        brackets.push(-1.0 + 1e-14);
        brackets.extend_from_slice(&roots);
        brackets.push(1.0 - 1e-14);
        let mut next = Vec::with_capacity(k);
        for win in brackets.windows(2) {
            let (mut lo, mut hi) = (win[0], win[1]);
            let flo = jacobi_eval(k, a, lo).0;
            // Bisection to a loose tolerance, then Newton polish.
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = jacobi_eval(k, a, mid).0;
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut t = 0.5 * (lo + hi);
            for _ in 0..8 {
                let (p, dp) = jacobi_eval(k, a, t);
                let dt = p / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            next.push(t);
        }
        roots = next;
    }
    roots
}

/// Lanczos log-gamma (g = 7), accurate to ~1e-13 for the arguments used here.
fn ln_gamma(mut z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    z -= 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Nodes and weights of the m-point Gauss-Jacobi rule on [0, 1] with weight
/// function (1−x)^alpha (beta = 0), i.e. ∫₀¹ f(x) (1−x)^α dx ≈ Σ wᵢ f(xᵢ).
///
/// Used with α = 1 and α = 2 for the conical-product factors that absorb the
/// Duffy Jacobian exactly.
pub fn gauss_jacobi_01(m: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let a = alpha;
    let b = 0.0;
    let m_f = m as f64;
    let roots = jacobi_roots(m, a);

    // Weight formula on [-1, 1]:
    // w = C / [(1-t²) P'_m(t)²],
    // C = 2^(a+b+1) Γ(m+a+1) Γ(m+b+1) / (m! Γ(m+a+b+1)).
    let ln_c =
        (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(m_f + a + 1.0) + ln_gamma(m_f + b + 1.0)
            - ln_gamma(m_f + 1.0)
            - ln_gamma(m_f + a + b + 1.0);
    let c = ln_c.exp();

    // Map t ∈ [-1,1] with weight (1-t)^a to x ∈ [0,1] with weight (1-x)^a:
    // t = 2x − 1, (1−t) = 2(1−x), dt = 2 dx → overall weight scale 2^-(a+1).
    let scale = 0.5_f64.powf(a + 1.0);
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for &t in &roots {
        let (_, dp) = jacobi_eval(m, a, t);
        x.push(0.5 * (t + 1.0));
        w.push(c / ((1.0 - t * t) * dp * dp) * scale);
    }
    (x, w)
}

fn points_for_degree(degree: i32) -> usize {
    // 2m - 1 >= degree.
    ((degree.max(0) as usize) / 2) + 1
}

fn build_tet_rule(degree: i32) -> QuadRule {
    let m = points_for_degree(degree);
    let (xa, wa) = gauss_jacobi_01(m, 2.0); // absorbs (1-x)² from the Duffy map
    let (xb, wb) = gauss_jacobi_01(m, 1.0); // absorbs (1-y)
    let (xc, wc) = gauss_legendre_01(m);
    let mut points = Vec::with_capacity(m * m * m);
    let mut weights = Vec::with_capacity(m * m * m);
    for (i, &u) in xa.iter().enumerate() {
        for (j, &v) in xb.iter().enumerate() {
            for (k, &t) in xc.iter().enumerate() {
                // Duffy map of the unit cube onto the reference tet.
                let x = u;
                let y = v * (1.0 - u);
                let z = t * (1.0 - u) * (1.0 - v);
                points.push([x, y, z]);
                weights.push(wa[i] * wb[j] * wc[k]);
            }
        }
    }
    QuadRule {
        points,
        weights,
        exactness_degree: (2 * m as i32) - 1,
    }
}

fn build_tri_rule(degree: i32) -> QuadRule {
    let m = points_for_degree(degree);
    let (xa, wa) = gauss_jacobi_01(m, 1.0);
    let (xb, wb) = gauss_legendre_01(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (i, &u) in xa.iter().enumerate() {
        for (j, &v) in xb.iter().enumerate() {
            let x = u;
            let y = v * (1.0 - u);
            points.push([x, y, 0.0]);
            weights.push(wa[i] * wb[j]);
        }
    }
    QuadRule {
        points,
        weights,
        exactness_degree: (2 * m as i32) - 1,
    }
}

type RuleCache = Mutex<HashMap<(bool, i32), &'static QuadRule>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached_rule(is_tet: bool, degree: i32) -> &'static QuadRule {
    let mut guard = cache().lock().unwrap();
    let entry = guard.entry((is_tet, degree)).or_insert_with(|| {
        let rule = if is_tet {
            build_tet_rule(degree)
        } else {
            build_tri_rule(degree)
        };
        Box::leak(Box::new(rule))
    });
    entry
}

/// Rule on the reference tetrahedron exact for total degree `degree`.
/// Degrees ≤ 14 are served from a cache; higher degrees are built on the fly
/// by the same collapsed-tensor construction.
pub fn tet_rule(degree: i32) -> Result<&'static QuadRule> {
    if degree < 0 {
        return Err(Error::invalid(format!("quadrature degree {degree} < 0")));
    }
    if degree > 1000 {
        return Err(Error::invalid(format!(
            "quadrature degree {degree} unreasonably large"
        )));
    }
    Ok(cached_rule(true, degree))
}

/// Rule on the reference triangle exact for total degree `degree`.
pub fn tri_rule(degree: i32) -> Result<&'static QuadRule> {
    if degree < 0 {
        return Err(Error::invalid(format!("quadrature degree {degree} < 0")));
    }
    if degree > 1000 {
        return Err(Error::invalid(format!(
            "quadrature degree {degree} unreasonably large"
        )));
    }
    Ok(cached_rule(false, degree))
}

/// ∫_K f dx for the tet K = image of the reference tet under `map`:
/// |det B| Σ wᵢ f(F(x̂ᵢ)).
pub fn integrate(
    rule: &QuadRule,
    map: &AffineMap,
    mut f: impl FnMut(Vec3) -> Complex64,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        acc += f(map.apply(*p)) * w;
    }
    acc * map.det.abs()
}

/// Surface integral over the triangle (a, b, c):
/// points x = a + x̂ (b−a) + ŷ (c−a), measure factor ‖(b−a)×(c−a)‖ = 2·area.
pub fn integrate_triangle(
    rule: &QuadRule,
    tri: [Vec3; 3],
    mut f: impl FnMut(Vec3) -> Complex64,
) -> Complex64 {
    let e1 = crate::geometry::sub(tri[1], tri[0]);
    let e2 = crate::geometry::sub(tri[2], tri[0]);
    let gram = crate::geometry::norm(crate::geometry::cross(e1, e2));
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        let x = [
            tri[0][0] + p[0] * e1[0] + p[1] * e2[0],
            tri[0][1] + p[0] * e1[1] + p[1] * e2[1],
            tri[0][2] + p[0] * e1[2] + p[1] * e2[2],
        ];
        acc += f(x) * w;
    }
    acc * gram
}
