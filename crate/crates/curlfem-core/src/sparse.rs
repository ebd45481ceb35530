//! Compressed sparse row matrices, real and complex.
//!
//! Small, deterministic building blocks shared by the dof-map, assembly and
//! solver layers. Triplet input is sorted and merged, so assembly order never
//! changes the stored pattern or values.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Real CSR matrix.
#[derive(Debug, Clone)]
pub struct RealCsr {
    pub nrows: usize,
    pub ncols: usize,
    pub rowptr: Vec<usize>,
    pub colind: Vec<u32>,
    pub vals: Vec<f64>,
}

/// Complex CSR matrix.
#[derive(Debug, Clone)]
pub struct ComplexCsr {
    pub nrows: usize,
    pub ncols: usize,
    pub rowptr: Vec<usize>,
    pub colind: Vec<u32>,
    pub vals: Vec<Complex64>,
}

fn build_csr<T: Copy + std::ops::AddAssign>(
    nrows: usize,
    ncols: usize,
    mut triplets: Vec<(u32, u32, T)>,
) -> Result<(Vec<usize>, Vec<u32>, Vec<T>)> {
    for &(r, c, _) in &triplets {
        if r as usize >= nrows || c as usize >= ncols {
            return Err(Error::invalid(format!(
                "triplet ({r}, {c}) outside {nrows} x {ncols}"
            )));
        }
    }
    triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
    let mut rowptr = vec![0usize; nrows + 1];
    let mut colind: Vec<u32> = Vec::with_capacity(triplets.len());
    let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
    let mut last: Option<(u32, u32)> = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *vals.last_mut().expect("entry exists when last is set") += v;
        } else {
            colind.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        rowptr[r as usize + 1] = colind.len();
    }
    // Rows without entries still need cumulative offsets.
    for i in 1..=nrows {
        if rowptr[i] < rowptr[i - 1] {
            rowptr[i] = rowptr[i - 1];
        }
    }
    Ok((rowptr, colind, vals))
}

impl RealCsr {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        let (rowptr, colind, vals) = build_csr(nrows, ncols, triplets)?;
        Ok(RealCsr {
            nrows,
            ncols,
            rowptr,
            colind,
            vals,
        })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.rowptr[i];
        let hi = self.rowptr[i + 1];
        (&self.colind[lo..hi], &self.vals[lo..hi])
    }

    /// y = A x with complex x.
    pub fn mul_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::ZERO; self.nrows];
        for i in 0..self.nrows {
            let mut acc = Complex64::ZERO;
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                acc += x[self.colind[k] as usize] * self.vals[k];
            }
            y[i] = acc;
        }
        y
    }

    /// y = Aᵀ x with complex x (no conjugation: the matrix is real).
    pub fn tr_mul_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![Complex64::ZERO; self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                y[self.colind[k] as usize] += xi * self.vals[k];
            }
        }
        y
    }

    pub fn mul_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                acc += x[self.colind[k] as usize] * self.vals[k];
            }
            y[i] = acc;
        }
        y
    }

    /// Keep the rows and columns where the maps give a new index. Both maps
    /// must be increasing on the kept indices so column order is preserved.
    pub fn restrict(
        &self,
        row_map: &[Option<u32>],
        new_nrows: usize,
        col_map: &[Option<u32>],
        new_ncols: usize,
    ) -> Self {
        assert_eq!(row_map.len(), self.nrows);
        assert_eq!(col_map.len(), self.ncols);
        let mut rowptr = vec![0usize; new_nrows + 1];
        let mut colind = Vec::new();
        let mut vals = Vec::new();
        let mut ordered: Vec<(u32, usize)> = row_map
            .iter()
            .enumerate()
            .filter_map(|(old, m)| m.map(|new| (new, old)))
            .collect();
        ordered.sort_unstable();
        for (new_i, old_i) in ordered {
            for k in self.rowptr[old_i]..self.rowptr[old_i + 1] {
                if let Some(nc) = col_map[self.colind[k] as usize] {
                    colind.push(nc);
                    vals.push(self.vals[k]);
                }
            }
            rowptr[new_i as usize + 1] = colind.len();
        }
        for i in 1..=new_nrows {
            if rowptr[i] < rowptr[i - 1] {
                rowptr[i] = rowptr[i - 1];
            }
        }
        RealCsr {
            nrows: new_nrows,
            ncols: new_ncols,
            rowptr,
            colind,
            vals,
        }
    }
}

impl ComplexCsr {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: Vec<(u32, u32, Complex64)>,
    ) -> Result<Self> {
        let (rowptr, colind, vals) = build_csr(nrows, ncols, triplets)?;
        Ok(ComplexCsr {
            nrows,
            ncols,
            rowptr,
            colind,
            vals,
        })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[Complex64]) {
        let lo = self.rowptr[i];
        let hi = self.rowptr[i + 1];
        (&self.colind[lo..hi], &self.vals[lo..hi])
    }

    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::ZERO; self.nrows];
        for i in 0..self.nrows {
            let mut acc = Complex64::ZERO;
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                acc += self.vals[k] * x[self.colind[k] as usize];
            }
            y[i] = acc;
        }
        y
    }

    /// Largest entry magnitude; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Dense copy, for small cross-checks only.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::ZERO; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                d[i][self.colind[k] as usize] += self.vals[k];
            }
        }
        d
    }

    /// Keep the rows and columns where the maps give a new index. Both maps
    /// must be increasing on the kept indices so column order is preserved.
    pub fn restrict(
        &self,
        row_map: &[Option<u32>],
        new_nrows: usize,
        col_map: &[Option<u32>],
        new_ncols: usize,
    ) -> Self {
        assert_eq!(row_map.len(), self.nrows);
        assert_eq!(col_map.len(), self.ncols);
        let mut rowptr = vec![0usize; new_nrows + 1];
        let mut colind = Vec::new();
        let mut vals = Vec::new();
        let mut ordered: Vec<(u32, usize)> = row_map
            .iter()
            .enumerate()
            .filter_map(|(old, m)| m.map(|new| (new, old)))
            .collect();
        ordered.sort_unstable();
        for (new_i, old_i) in ordered {
            for k in self.rowptr[old_i]..self.rowptr[old_i + 1] {
                if let Some(nc) = col_map[self.colind[k] as usize] {
                    colind.push(nc);
                    vals.push(self.vals[k]);
                }
            }
            rowptr[new_i as usize + 1] = colind.len();
        }
        for i in 1..=new_nrows {
            if rowptr[i] < rowptr[i - 1] {
                rowptr[i] = rowptr[i - 1];
            }
        }
        ComplexCsr {
            nrows: new_nrows,
            ncols: new_ncols,
            rowptr,
            colind,
            vals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_sort() {
        let a = RealCsr::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 3.0), (0, 0, -1.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 3);
        let (cols, vals) = a.row(0);
        assert_eq!(cols, &[0, 1]);
        assert_eq!(vals, &[-1.0, 2.0]);
        let (cols, vals) = a.row(1);
        assert_eq!(cols, &[2]);
        assert_eq!(vals, &[4.0]);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(RealCsr::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_and_transpose_agree_with_dense() {
        let a = RealCsr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let x = vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0)];
        let y = a.mul_complex(&x);
        assert_eq!(y[0], Complex64::new(1.0, -3.0));
        assert_eq!(y[1], Complex64::new(3.0, 3.0));
        let z = a.tr_mul_complex(&y);
        assert_eq!(z[0], y[0] + y[1] * 3.0);
        assert_eq!(z[1], y[0] * 2.0);
    }
}
