//! Pre-evaluated shape tables at quadrature points.
//!
//! A shape's value at a point is a 4-vector of coefficients on the element's
//! physical barycentric gradients, and its curl a 6-vector of coefficients on
//! the pair cross products. Those coefficients depend on the element only
//! through its role permutation, so one table per permutation (at most 24)
//! serves the whole mesh for a fixed rule.

use super::bary_coords;
use super::shapes::VectorShape;
use crate::quadrature::QuadRule;

/// Lexicographic rank of a permutation of {0,1,2,3}.
pub fn perm_id(perm: [u8; 4]) -> usize {
    let mut rank = 0usize;
    let fact = [6usize, 2, 1];
    for i in 0..3 {
        let smaller_later = (i + 1..4).filter(|&j| perm[j] < perm[i]).count();
        rank += smaller_later * fact[i];
    }
    rank
}

/// Inverse of `perm_id`.
pub fn perm_from_id(mut id: usize) -> [u8; 4] {
    assert!(id < 24);
    let mut pool = vec![0u8, 1, 2, 3];
    let mut out = [0u8; 4];
    for (i, f) in [6usize, 2, 1, 1].into_iter().enumerate() {
        let pick = id / f;
        id %= f;
        out[i] = pool.remove(pick);
    }
    out
}

/// Values and curls of a shape list at the points of one rule under one role
/// permutation.
#[derive(Debug)]
pub struct ShapeTables {
    pub nq: usize,
    pub nshape: usize,
    /// nq × nshape × 4 coefficients on the role barycentric gradients.
    pub val: Vec<f64>,
    /// nq × nshape × 6 coefficients on the role pair cross products.
    pub crl: Vec<f64>,
}

impl ShapeTables {
    pub fn build(shapes: &[VectorShape], rule: &QuadRule, perm: [u8; 4]) -> Self {
        let nq = rule.len();
        let nshape = shapes.len();
        let mut val = vec![0.0; nq * nshape * 4];
        let mut crl = vec![0.0; nq * nshape * 6];
        for (q, &pt) in rule.points.iter().enumerate() {
            let lam_loc = bary_coords(pt);
            let lam = [
                lam_loc[perm[0] as usize],
                lam_loc[perm[1] as usize],
                lam_loc[perm[2] as usize],
                lam_loc[perm[3] as usize],
            ];
            for (i, sh) in shapes.iter().enumerate() {
                let vbase = (q * nshape + i) * 4;
                for (poly, r) in &sh.value {
                    val[vbase + r] += poly.eval(lam);
                }
                let cbase = (q * nshape + i) * 6;
                for (poly, pr) in &sh.curl {
                    crl[cbase + pr] += poly.eval(lam);
                }
            }
        }
        ShapeTables {
            nq,
            nshape,
            val,
            crl,
        }
    }

    #[inline]
    pub fn val_at(&self, q: usize, i: usize) -> &[f64] {
        let base = (q * self.nshape + i) * 4;
        &self.val[base..base + 4]
    }

    #[inline]
    pub fn crl_at(&self, q: usize, i: usize) -> &[f64] {
        let base = (q * self.nshape + i) * 6;
        &self.crl[base..base + 6]
    }
}

/// Tables for every permutation actually present in a mesh.
pub struct PermTableSet {
    tables: Vec<Option<Box<ShapeTables>>>,
}

impl PermTableSet {
    pub fn build<'a>(
        shapes: &[VectorShape],
        rule: &QuadRule,
        perms: impl Iterator<Item = &'a [u8; 4]>,
    ) -> Self {
        let mut tables: Vec<Option<Box<ShapeTables>>> = (0..24).map(|_| None).collect();
        for perm in perms {
            let id = perm_id(*perm);
            if tables[id].is_none() {
                tables[id] = Some(Box::new(ShapeTables::build(shapes, rule, *perm)));
            }
        }
        PermTableSet { tables }
    }

    #[inline]
    pub fn get(&self, perm: [u8; 4]) -> &ShapeTables {
        self.tables[perm_id(perm)]
            .as_deref()
            .expect("table built for every mesh permutation")
    }
}
