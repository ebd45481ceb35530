//! Sparse polynomial algebra in the four barycentric coordinates λ₀..λ₃.
//!
//! Shape functions are stored symbolically as polynomials in λ (plus, for
//! vector-valued functions, a constant barycentric-gradient factor per term).
//! On an affine element the λ-monomials are evaluated at quadrature points and
//! combined with the element's four constant gradient vectors; derivatives are
//! taken symbolically, so curls of gradient fields cancel structurally.

/// Exponents of one monomial λ₀^e0 λ₁^e1 λ₂^e2 λ₃^e3.
pub type Exps = [u8; 4];

/// Sparse polynomial in barycentric coordinates: sorted (exponents, coeff)
/// pairs with nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BaryPoly {
    pub terms: Vec<(Exps, f64)>,
}

impl BaryPoly {
    pub fn zero() -> Self {
        BaryPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        BaryPoly {
            terms: vec![([0, 0, 0, 0], c)],
        }
    }

    /// The coordinate λ_r.
    pub fn lambda(r: usize) -> Self {
        let mut e = [0u8; 4];
        e[r] = 1;
        BaryPoly {
            terms: vec![(e, 1.0)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().map(|&x| x as u32).sum())
            .max()
            .unwrap_or(0)
    }

    fn normalize(mut terms: Vec<(Exps, f64)>) -> Self {
        terms.sort_by_key(|(e, _)| *e);
        let mut out: Vec<(Exps, f64)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match out.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        BaryPoly { terms: out }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Self::normalize(t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().map(|(e, c)| (*e, -c)));
        Self::normalize(t)
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        BaryPoly {
            terms: self.terms.iter().map(|(e, c)| (*e, c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut t = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                t.push((e, ca * cb));
            }
        }
        Self::normalize(t)
    }

    /// Partial derivative ∂/∂λ_r (formal, treating the four λ as independent;
    /// the chain rule onto physical coordinates is applied by the caller via
    /// the constant gradients ∇λ_r).
    pub fn diff(&self, r: usize) -> Self {
        let mut t = Vec::new();
        for (e, c) in &self.terms {
            if e[r] == 0 {
                continue;
            }
            let mut d = *e;
            d[r] -= 1;
            t.push((d, c * e[r] as f64));
        }
        Self::normalize(t)
    }

    pub fn eval(&self, l: [f64; 4]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for r in 0..4 {
                for _ in 0..e[r] {
                    m *= l[r];
                }
            }
            acc += m;
        }
        acc
    }

    /// Drop terms with |coeff| below `tol` times the largest coefficient.
    pub fn prune(mut self, tol: f64) -> Self {
        let maxc = self
            .terms
            .iter()
            .map(|(_, c)| c.abs())
            .fold(0.0_f64, f64::max);
        if maxc == 0.0 {
            return Self::zero();
        }
        self.terms.retain(|(_, c)| c.abs() > tol * maxc);
        self
    }
}

/// Scaled Legendre polynomial ℓ_j(x, t) = t^j P_j(x/t), homogeneous of degree
/// j in (x, t), where x and t are themselves polynomials in λ.
pub fn scaled_legendre(j: usize, x: &BaryPoly, t: &BaryPoly) -> BaryPoly {
    // Recurrence (j+1) ℓ_{j+1} = (2j+1) x ℓ_j − j t² ℓ_{j−1}.
    let mut p0 = BaryPoly::constant(1.0);
    if j == 0 {
        return p0;
    }
    let mut p1 = x.clone();
    let t2 = t.mul(t);
    for m in 1..j {
        let mf = m as f64;
        let p2 = x
            .mul(&p1)
            .scale(2.0 * mf + 1.0)
            .sub(&t2.mul(&p0).scale(mf))
            .scale(1.0 / (mf + 1.0));
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Integrated scaled Legendre L_i(x, t) = t^i ∫_{−1}^{x/t} P_{i−1}, i ≥ 2,
/// computed as L_i = (ℓ_i − t² ℓ_{i−2}) / (2i − 1).
///
/// L_i(x, t) vanishes at x = ±t; in particular with x = λ_b − λ_a and
/// t = λ_a + λ_b it carries the factor λ_a λ_b (L₂ = −2 λ_a λ_b).
pub fn integrated_legendre(i: usize, x: &BaryPoly, t: &BaryPoly) -> BaryPoly {
    assert!(i >= 2, "integrated Legendre defined for i >= 2");
    let li = scaled_legendre(i, x, t);
    let lim2 = scaled_legendre(i - 2, x, t);
    let t2 = t.mul(t);
    li.sub(&t2.mul(&lim2)).scale(1.0 / (2 * i - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(r: usize) -> BaryPoly {
        BaryPoly::lambda(r)
    }

    #[test]
    fn l2_is_minus_two_lambda_product() {
        let x = lam(1).sub(&lam(0));
        let t = lam(0).add(&lam(1));
        let l2 = integrated_legendre(2, &x, &t);
        let expect = lam(0).mul(&lam(1)).scale(-2.0);
        let diff = l2.sub(&expect);
        assert!(diff.is_zero(), "L2 = {l2:?}");
    }

    #[test]
    fn integrated_legendre_vanishes_at_endpoints() {
        // On the edge λ_a + λ_b = 1: at λ_a = 1 (x = -t) and λ_b = 1 (x = t).
        let x = lam(1).sub(&lam(0));
        let t = lam(0).add(&lam(1));
        for i in 2..=5 {
            let li = integrated_legendre(i, &x, &t);
            for ends in [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]] {
                assert!(li.eval(ends).abs() < 1e-14, "L_{i} at {ends:?}");
            }
        }
    }

    #[test]
    fn scaled_legendre_matches_plain_legendre_on_unit_weight() {
        // t = 1: ℓ_j(x, 1) = P_j(x).
        let x = lam(1); // treat λ₁ as the scalar variable
        let one = BaryPoly::constant(1.0);
        let l3 = scaled_legendre(3, &x, &one);
        // P₃(s) = (5 s³ − 3 s) / 2 evaluated at s = 0.7.
        let s = 0.7;
        let expect = 0.5 * (5.0 * s * s * s - 3.0 * s);
        let got = l3.eval([0.0, s, 0.0, 0.0]);
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn derivative_of_product() {
        let p = lam(0).mul(&lam(1)).mul(&lam(1)); // λ0 λ1²
        let d = p.diff(1); // 2 λ0 λ1
        let expect = lam(0).mul(&lam(1)).scale(2.0);
        assert!(d.sub(&expect).is_zero());
    }
}
