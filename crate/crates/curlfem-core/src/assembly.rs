//! System assembly for the impedance Maxwell problem.
//!
//! Everything is built from three real symmetric blocks on one shared
//! sparsity pattern: the curl-curl stiffness S, the mass M, and the boundary
//! mass M_Γ of tangential traces over impedance faces. The complex system
//! variants (standard, good-sign, pairing, impedance Gram) are slot-wise
//! combinations of those blocks, so algebraic identities between the variants
//! hold entrywise up to rounding.
//!
//! Load vectors combine a volume source term with a surface impedance-data
//! term. Both use elevated quadrature, and integrands that oscillate on the
//! scale of an element are additionally integrated on a virtual red subsplit
//! of the element so that coarse high-wavenumber studies do not under-resolve
//! the data.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fespace::shapes::ROLE_EDGES;
use crate::fespace::tables::PermTableSet;
use crate::fespace::{
    bary_coords, eval_vector_values, gradient_cross_products, reference_nedelec_basis,
    renumber_kept, DofMap, SpaceKind,
};
use crate::geometry::{
    cross_with_normal, cvec_zero, dot, scale, sub, tangential_part, CVec3, Vec3, C_ZERO,
};
use crate::mesh::{BoundaryTag, Mesh, LOCAL_FACES};
use crate::quadrature::{tet_rule, tri_rule};
use crate::sparse::{ComplexCsr, RealCsr};
use crate::Complex64;

/// Elements processed per parallel work item; chunks merge in index order so
/// the assembled triplet stream never depends on the worker count.
const ASSEMBLY_CHUNK: usize = 256;

/// Wavenumber and degree bundle shared by solves and studies.
///
/// `p` is the polynomial degree label used throughout the command line and
/// result tables; the conforming space of that label has curls of degree
/// `p - 1`. `sigma` is the unit rotation that maps the good-sign form onto
/// the impedance norm, `exp(i π/4 · sign k)`.
#[derive(Debug, Clone, Copy)]
pub struct WaveParams {
    pub k: f64,
    pub p: usize,
    pub sigma: Complex64,
}

impl WaveParams {
    pub fn new(k: f64, p: usize) -> Result<Self> {
        if !k.is_finite() || k.abs() < 1.0 {
            return Err(Error::invalid(format!(
                "wavenumber k = {k} must be finite with |k| >= 1"
            )));
        }
        if !(1..=4).contains(&p) {
            return Err(Error::invalid(format!(
                "degree label p = {p} outside the supported range 1..=4"
            )));
        }
        Ok(WaveParams {
            k,
            p,
            sigma: Complex64::from_polar(1.0, FRAC_PI_4 * k.signum()),
        })
    }

    /// Index of the underlying curl-conforming family (degree label minus one).
    pub fn nedelec_index(&self) -> usize {
        self.p - 1
    }
}

/// Quadrature degree that integrates every entry of the system blocks exactly
/// for degree label `p`.
pub fn assembly_quad_degree(p: usize) -> usize {
    2 * p + 2
}

/// Elevated quadrature degree for data and error integrands of degree label
/// `p`; pair with the oscillation subsplit for high-wavenumber runs.
pub fn data_quad_degree(p: usize) -> usize {
    2 * p + 6
}

/// The three real symmetric blocks every system variant is built from, all on
/// one shared sparsity pattern.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// (curl u, curl v) over the volume.
    pub s: RealCsr,
    /// (u, v) over the volume.
    pub m: RealCsr,
    /// (u_T, v_T) over impedance-tagged boundary faces.
    pub m_gamma: RealCsr,
}

/// Complex combinations of the real blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemVariant {
    /// S - k²M - ik M_Γ, the impedance problem itself.
    Standard,
    /// S + k²M - ik M_Γ, the coercive companion with the mass sign flipped.
    GoodSign,
    /// k²M + ik M_Γ, the pairing that links the two.
    Pairing,
    /// S + k²M + |k| M_Γ, the Gram matrix of the wavenumber-weighted norm.
    ImpGram,
}

/// Combine the blocks into the requested complex variant.
///
/// The three blocks share one pattern, so this is a slot-wise map; the result
/// reuses the pattern unchanged.
pub fn system_matrix(
    blocks: &SystemMatrices,
    k: f64,
    variant: SystemVariant,
) -> Result<ComplexCsr> {
    if !k.is_finite() || k.abs() < 1.0 {
        return Err(Error::invalid(format!(
            "wavenumber k = {k} must be finite with |k| >= 1"
        )));
    }
    let k2 = k * k;
    let (cs, cm, cg_re, cg_im) = match variant {
        SystemVariant::Standard => (1.0, -k2, 0.0, -k),
        SystemVariant::GoodSign => (1.0, k2, 0.0, -k),
        SystemVariant::Pairing => (0.0, k2, 0.0, k),
        SystemVariant::ImpGram => (1.0, k2, k.abs(), 0.0),
    };
    let s = &blocks.s;
    let vals = s
        .vals
        .iter()
        .zip(&blocks.m.vals)
        .zip(&blocks.m_gamma.vals)
        .map(|((&sv, &mv), &gv)| Complex64::new(cs * sv + cm * mv + cg_re * gv, cg_im * gv))
        .collect();
    Ok(ComplexCsr {
        nrows: s.nrows,
        ncols: s.ncols,
        rowptr: s.rowptr.clone(),
        colind: s.colind.clone(),
        vals,
    })
}

impl SystemMatrices {
    pub fn standard(&self, k: f64) -> Result<ComplexCsr> {
        system_matrix(self, k, SystemVariant::Standard)
    }

    pub fn good_sign(&self, k: f64) -> Result<ComplexCsr> {
        system_matrix(self, k, SystemVariant::GoodSign)
    }

    pub fn pairing(&self, k: f64) -> Result<ComplexCsr> {
        system_matrix(self, k, SystemVariant::Pairing)
    }

    pub fn imp_gram(&self, k: f64) -> Result<ComplexCsr> {
        system_matrix(self, k, SystemVariant::ImpGram)
    }

    /// The impedance Gram matrix S + k²M + |k| M_Γ kept real, for solvers
    /// that exploit its symmetric positive definiteness.
    pub fn imp_gram_real(&self, k: f64) -> Result<RealCsr> {
        if !k.is_finite() || k.abs() < 1.0 {
            return Err(Error::invalid(format!(
                "wavenumber k = {k} must be finite with |k| >= 1"
            )));
        }
        let k2 = k * k;
        let ka = k.abs();
        let vals = self
            .s
            .vals
            .iter()
            .zip(&self.m.vals)
            .zip(&self.m_gamma.vals)
            .map(|((&sv, &mv), &gv)| sv + k2 * mv + ka * gv)
            .collect();
        Ok(RealCsr {
            nrows: self.s.nrows,
            ncols: self.s.ncols,
            rowptr: self.s.rowptr.clone(),
            colind: self.s.colind.clone(),
            vals,
        })
    }
}

#[inline]
fn combine4(c: &[f64], g: &[Vec3; 4]) -> Vec3 {
    [
        c[0] * g[0][0] + c[1] * g[1][0] + c[2] * g[2][0] + c[3] * g[3][0],
        c[0] * g[0][1] + c[1] * g[1][1] + c[2] * g[2][1] + c[3] * g[3][1],
        c[0] * g[0][2] + c[1] * g[1][2] + c[2] * g[2][2] + c[3] * g[3][2],
    ]
}

#[inline]
fn combine6(c: &[f64], g: &[Vec3; 6]) -> Vec3 {
    let mut out = [0.0; 3];
    for (ci, gi) in c.iter().zip(g) {
        out[0] += ci * gi[0];
        out[1] += ci * gi[1];
        out[2] += ci * gi[2];
    }
    out
}

#[inline]
pub(crate) fn role_gradients(map_grads: &[Vec3; 4], perm: [u8; 4]) -> [Vec3; 4] {
    [
        map_grads[perm[0] as usize],
        map_grads[perm[1] as usize],
        map_grads[perm[2] as usize],
        map_grads[perm[3] as usize],
    ]
}

#[inline]
pub(crate) fn role_coords(lam_loc: [f64; 4], perm: [u8; 4]) -> [f64; 4] {
    [
        lam_loc[perm[0] as usize],
        lam_loc[perm[1] as usize],
        lam_loc[perm[2] as usize],
        lam_loc[perm[3] as usize],
    ]
}

/// Component of a vector in the plane with unit normal `n`.
#[inline]
pub(crate) fn real_tangential(v: Vec3, n: Vec3) -> Vec3 {
    sub(v, scale(n, dot(v, n)))
}

/// Local shape indices whose tangential trace is supported on the role face
/// opposite role vertex `r_opp`: the three edge blocks inside that face plus
/// the face's own block. Every other shape has zero tangential trace there,
/// which is what makes the conforming dof coupling automatic.
pub(crate) fn face_support_indices(dofs: &DofMap, r_opp: usize) -> Vec<usize> {
    let dpe = dofs.dofs_per_edge;
    let dpf = dofs.dofs_per_face;
    let mut out = Vec::with_capacity(3 * dpe + dpf);
    for (le, &(s, r)) in ROLE_EDGES.iter().enumerate() {
        if s != r_opp && r != r_opp {
            for m in 0..dpe {
                out.push(le * dpe + m);
            }
        }
    }
    // Role faces are the sorted vertex triples in lexicographic order, so the
    // face omitting role vertex v sits at index 3 - v.
    let role_face = 3 - r_opp;
    for m in 0..dpf {
        out.push(6 * dpe + role_face * dpf + m);
    }
    out
}

/// Copy the pattern of `pattern` and fill it with the given triplets. Every
/// triplet position must already exist in the pattern.
fn scatter_on_pattern(pattern: &RealCsr, triplets: &[(u32, u32, f64)]) -> RealCsr {
    let mut out = RealCsr {
        nrows: pattern.nrows,
        ncols: pattern.ncols,
        rowptr: pattern.rowptr.clone(),
        colind: pattern.colind.clone(),
        vals: vec![0.0; pattern.vals.len()],
    };
    for &(r, c, v) in triplets {
        let lo = out.rowptr[r as usize];
        let hi = out.rowptr[r as usize + 1];
        let k = out.colind[lo..hi]
            .binary_search(&c)
            .expect("boundary dof pair shares an element, so its slot exists");
        out.vals[lo + k] += v;
    }
    out
}

/// Assemble the stiffness, mass, and impedance boundary mass blocks.
///
/// `quad_degree` is the exactness degree of the volume and surface rules; it
/// must reach the curl-curl integrand, and [`assembly_quad_degree`] gives the
/// degree that makes every entry exact.
pub fn assemble_blocks(mesh: &Mesh, dofs: &DofMap, quad_degree: usize) -> Result<SystemMatrices> {
    if dofs.kind != SpaceKind::Hcurl {
        return Err(Error::invalid(
            "system blocks need a curl-conforming dof map",
        ));
    }
    if quad_degree < 2 * dofs.degree {
        return Err(Error::invalid(format!(
            "quadrature degree {quad_degree} cannot integrate the curl-curl term of an \
             index-{} space",
            dofs.degree
        )));
    }
    let degree = i32::try_from(quad_degree)
        .map_err(|_| Error::invalid(format!("quadrature degree {quad_degree} out of range")))?;
    let basis = reference_nedelec_basis(dofs.degree)?;
    let n = basis.shapes.len();
    debug_assert_eq!(n, dofs.n_local);
    let rule = tet_rule(degree)?;
    let tables = PermTableSet::build(&basis.shapes, rule, dofs.role_perm.iter());
    let nq = rule.len();
    let nt = mesh.num_tets();

    let ranges: Vec<(usize, usize)> = (0..nt)
        .step_by(ASSEMBLY_CHUNK)
        .map(|lo| (lo, (lo + ASSEMBLY_CHUNK).min(nt)))
        .collect();
    type Triplets = Vec<(u32, u32, f64)>;
    let chunks: Vec<Result<(Triplets, Triplets)>> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut s_tri: Triplets = Vec::with_capacity((hi - lo) * n * n);
            let mut m_tri: Triplets = Vec::with_capacity((hi - lo) * n * n);
            let mut val = vec![[0.0f64; 3]; n];
            let mut crl = vec![[0.0f64; 3]; n];
            let mut s_loc = vec![0.0f64; n * n];
            let mut m_loc = vec![0.0f64; n * n];
            for t in lo..hi {
                let map = mesh.element_map(t)?;
                let g_role = role_gradients(&map.barycentric_gradients(), dofs.role_perm[t]);
                let crs = gradient_cross_products(&g_role);
                let tab = tables.get(dofs.role_perm[t]);
                s_loc.fill(0.0);
                m_loc.fill(0.0);
                let det_abs = map.det.abs();
                for q in 0..nq {
                    for i in 0..n {
                        val[i] = combine4(tab.val_at(q, i), &g_role);
                        crl[i] = combine6(tab.crl_at(q, i), &crs);
                    }
                    let w = rule.weights[q] * det_abs;
                    for i in 0..n {
                        let (vi, ci) = (val[i], crl[i]);
                        let (sr, mr) = (&mut s_loc[i * n..], &mut m_loc[i * n..]);
                        for j in 0..=i {
                            sr[j] += w * dot(ci, crl[j]);
                            mr[j] += w * dot(vi, val[j]);
                        }
                    }
                }
                let gd = dofs.cell_dofs(t);
                for i in 0..n {
                    for j in 0..=i {
                        let sv = s_loc[i * n + j];
                        let mv = m_loc[i * n + j];
                        s_tri.push((gd[i], gd[j], sv));
                        m_tri.push((gd[i], gd[j], mv));
                        if i != j {
                            s_tri.push((gd[j], gd[i], sv));
                            m_tri.push((gd[j], gd[i], mv));
                        }
                    }
                }
            }
            Ok((s_tri, m_tri))
        })
        .collect();

    let mut s_all: Triplets = Vec::new();
    let mut m_all: Triplets = Vec::new();
    for chunk in chunks {
        let (s_tri, m_tri) = chunk?;
        s_all.extend(s_tri);
        m_all.extend(m_tri);
    }
    let s = RealCsr::from_triplets(dofs.ndof, dofs.ndof, s_all)?;
    let m = RealCsr::from_triplets(dofs.ndof, dofs.ndof, m_all)?;
    debug_assert_eq!(s.colind, m.colind);

    // Boundary mass over impedance faces. The face count is surface-sized, so
    // a sequential loop with direct shape evaluation is plenty.
    let tri = tri_rule(degree)?;
    let mut g_tri: Triplets = Vec::new();
    for bf in &mesh.boundary_faces {
        if bf.tag != BoundaryTag::Impedance {
            continue;
        }
        let t = bf.tet;
        let lf = bf.local_face;
        let map = mesh.element_map(t)?;
        let perm = dofs.role_perm[t];
        let g_role = role_gradients(&map.barycentric_gradients(), perm);
        let (nrm, area) = mesh.face_normal_area(t, lf);
        let fidx = LOCAL_FACES[lf];
        let r_opp = perm
            .iter()
            .position(|&v| v as usize == lf)
            .expect("role permutation covers every local vertex");
        let support = face_support_indices(dofs, r_opp);
        let ns = support.len();
        let mut loc = vec![0.0f64; ns * ns];
        for (q, pt) in tri.points.iter().enumerate() {
            let mu = [1.0 - pt[0] - pt[1], pt[0], pt[1]];
            let mut lam_loc = [0.0f64; 4];
            lam_loc[fidx[0]] = mu[0];
            lam_loc[fidx[1]] = mu[1];
            lam_loc[fidx[2]] = mu[2];
            let vals = eval_vector_values(&basis.shapes, role_coords(lam_loc, perm), &g_role);
            let w = tri.weights[q] * 2.0 * area;
            for (ii, &i) in support.iter().enumerate() {
                let vti = real_tangential(vals[i], nrm);
                for (jj, &j) in support.iter().enumerate().take(ii + 1) {
                    loc[ii * ns + jj] += w * dot(vti, real_tangential(vals[j], nrm));
                }
            }
        }
        let gd = dofs.cell_dofs(t);
        for ii in 0..ns {
            for jj in 0..=ii {
                let v = loc[ii * ns + jj];
                g_tri.push((gd[support[ii]], gd[support[jj]], v));
                if ii != jj {
                    g_tri.push((gd[support[jj]], gd[support[ii]], v));
                }
            }
        }
    }
    let m_gamma = scatter_on_pattern(&s, &g_tri);

    Ok(SystemMatrices { s, m, m_gamma })
}

type FieldFn = Box<dyn Fn(Vec3) -> CVec3 + Send + Sync>;

/// A closed-form solution with the data that reproduces it: the exact field,
/// its curl, the volume source, and the boundary data derived from both.
pub struct ManufacturedCase {
    name: String,
    k: f64,
    pec_inner: bool,
    source_is_zero: bool,
    exact_e: FieldFn,
    exact_curl_e: FieldFn,
    source_f: FieldFn,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("pec_inner", &self.pec_inner)
            .field("source_is_zero", &self.source_is_zero)
            .finish()
    }
}

impl ManufacturedCase {
    /// Assemble a case from raw closures; mainly for tests that need custom
    /// or composed data.
    pub fn from_parts(
        name: impl Into<String>,
        k: f64,
        pec_inner: bool,
        source_is_zero: bool,
        exact_e: FieldFn,
        exact_curl_e: FieldFn,
        source_f: FieldFn,
    ) -> Self {
        ManufacturedCase {
            name: name.into(),
            k,
            pec_inner,
            source_is_zero,
            exact_e,
            exact_curl_e,
            source_f,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    /// Whether the case expects a perfectly conducting inner boundary.
    pub fn pec_inner(&self) -> bool {
        self.pec_inner
    }

    /// Whether the volume source vanishes identically, so the volume term of
    /// the load can be skipped exactly.
    pub fn source_is_zero(&self) -> bool {
        self.source_is_zero
    }

    pub fn exact_e(&self, x: Vec3) -> CVec3 {
        (self.exact_e)(x)
    }

    pub fn exact_curl_e(&self, x: Vec3) -> CVec3 {
        (self.exact_curl_e)(x)
    }

    pub fn source_f(&self, x: Vec3) -> CVec3 {
        (self.source_f)(x)
    }

    /// Impedance data (curl E)×n - ik n×(E×n) at a boundary point with outward
    /// unit normal `n`; tangential by construction.
    pub fn impedance_g_t(&self, x: Vec3, n: Vec3) -> CVec3 {
        let rot = cross_with_normal(self.exact_curl_e(x), n);
        let et = tangential_part(self.exact_e(x), n);
        let ik = Complex64::new(0.0, self.k);
        [
            rot[0] - ik * et[0],
            rot[1] - ik * et[1],
            rot[2] - ik * et[2],
        ]
    }
}

fn real_field(f: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> FieldFn {
    Box::new(move |x| {
        let v = f(x);
        [
            Complex64::new(v[0], 0.0),
            Complex64::new(v[1], 0.0),
            Complex64::new(v[2], 0.0),
        ]
    })
}

/// The named study cases.
///
/// `cube-smooth`: a source-free wave on the cube, smooth at every wavenumber.
/// `cube-hole`: a polynomial-damped wave on the cube with a conducting cubic
/// hole, zero tangential trace on the inner boundary. `const-field`: a
/// constant field whose data exercise every load path with known answers.
pub fn manufactured_case(name: &str, k: f64) -> Result<ManufacturedCase> {
    if !k.is_finite() || k.abs() < 1.0 {
        return Err(Error::invalid(format!(
            "wavenumber k = {k} must be finite with |k| >= 1"
        )));
    }
    match name {
        "cube-smooth" => Ok(ManufacturedCase::from_parts(
            name,
            k,
            false,
            true,
            real_field(move |x| {
                let c = k * (k * x[0]).cos();
                [0.0, -c, c]
            }),
            real_field(move |x| {
                let s = k * k * (k * x[0]).sin();
                [0.0, s, s]
            }),
            Box::new(|_| cvec_zero()),
        )),
        "cube-hole" => {
            let e = real_field(move |x| {
                let g = hole_profile(k, x);
                [0.0, -g, g]
            });
            let curl = real_field(move |x| {
                let d = hole_profile_gradient(k, x);
                [d[1] + d[2], -d[0], -d[0]]
            });
            let src = real_field(move |x| hole_source(k, x));
            Ok(ManufacturedCase::from_parts(
                name, k, true, false, e, curl, src,
            ))
        }
        "const-field" => Ok(ManufacturedCase::from_parts(
            name,
            k,
            false,
            false,
            real_field(|_| [1.0, 0.0, 0.0]),
            real_field(|_| [0.0, 0.0, 0.0]),
            real_field(move |_| [-k * k, 0.0, 0.0]),
        )),
        other => Err(Error::invalid(format!(
            "unknown manufactured case {other:?}"
        ))),
    }
}

/// Scalar profile of the hole case: k cos(k x₁)(x₁²-¼)(x₂²-¼)(x₃²-¼).
fn hole_profile(k: f64, x: Vec3) -> f64 {
    let a = x[0] * x[0] - 0.25;
    let b = x[1] * x[1] - 0.25;
    let c = x[2] * x[2] - 0.25;
    k * (k * x[0]).cos() * a * b * c
}

/// Gradient of [`hole_profile`].
fn hole_profile_gradient(k: f64, x: Vec3) -> Vec3 {
    let a = x[0] * x[0] - 0.25;
    let b = x[1] * x[1] - 0.25;
    let c = x[2] * x[2] - 0.25;
    let (s1, c1) = (k * x[0]).sin_cos();
    let d1 = -k * s1 * a + 2.0 * x[0] * c1;
    [
        k * d1 * b * c,
        k * c1 * a * 2.0 * x[1] * c,
        k * c1 * a * b * 2.0 * x[2],
    ]
}

/// Volume source of the hole case, curl curl E - k²E with E = (0, -g, g),
/// written out from the closed-form second derivatives of the profile.
fn hole_source(k: f64, x: Vec3) -> Vec3 {
    let a = x[0] * x[0] - 0.25;
    let b = x[1] * x[1] - 0.25;
    let c = x[2] * x[2] - 0.25;
    let (s1, c1) = (k * x[0]).sin_cos();
    // First and second x₁-derivatives of cos(k x₁)·(x₁²-¼).
    let d1 = -k * s1 * a + 2.0 * x[0] * c1;
    let d2 = -k * k * c1 * a - 4.0 * k * x[0] * s1 + 2.0 * c1;
    let f1 = k * d1 * (2.0 * x[2] * b - 2.0 * x[1] * c);
    let common = d2 * b * c + 4.0 * x[1] * x[2] * c1 * a + k * k * c1 * a * b * c;
    let f2 = k * (common + 2.0 * c1 * a * b);
    let f3 = -k * (common + 2.0 * c1 * a * c);
    [f1, f2, f3]
}

/// Levels of virtual red subsplitting needed before a rule of fixed degree
/// resolves an integrand oscillating at wavenumber `k` on size `h`: halve
/// until k·h drops under 3, capped at 4 levels.
pub fn oscillation_split_levels(k: f64, h: f64) -> usize {
    let ratio = k.abs() * h / 3.0;
    if ratio <= 1.0 {
        return 0;
    }
    (ratio.log2().ceil() as usize).min(MAX_SPLIT_LEVELS)
}

const MAX_SPLIT_LEVELS: usize = 4;

/// A sub-tet written in the barycentric frame of its parent: row r holds the
/// parent coordinates of vertex r.
pub type LamTet = [[f64; 4]; 4];
/// A sub-triangle in the barycentric frame of its parent.
pub type LamTri = [[f64; 3]; 3];

fn mid4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
        0.5 * (a[3] + b[3]),
    ]
}

/// Red refinement of a tet: four corner children plus four from the inner
/// octahedron, cut along one diagonal. All eight have an eighth of the volume.
fn bey_children(p: &LamTet) -> [LamTet; 8] {
    let m01 = mid4(p[0], p[1]);
    let m02 = mid4(p[0], p[2]);
    let m03 = mid4(p[0], p[3]);
    let m12 = mid4(p[1], p[2]);
    let m13 = mid4(p[1], p[3]);
    let m23 = mid4(p[2], p[3]);
    [
        [p[0], m01, m02, m03],
        [m01, p[1], m12, m13],
        [m02, m12, p[2], m23],
        [m03, m13, m23, p[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}

fn mid3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}

/// Red refinement of a triangle: three corners plus the inverted middle.
fn red_tri_children(p: &LamTri) -> [LamTri; 4] {
    let m01 = mid3(p[0], p[1]);
    let m02 = mid3(p[0], p[2]);
    let m12 = mid3(p[1], p[2]);
    [
        [p[0], m01, m02],
        [m01, p[1], m12],
        [m02, m12, p[2]],
        [m01, m12, m02],
    ]
}

static TET_SUBCELLS: OnceLock<Vec<Vec<LamTet>>> = OnceLock::new();
static TRI_SUBCELLS: OnceLock<Vec<Vec<LamTri>>> = OnceLock::new();

/// The 8^levels sub-tets of `levels` rounds of red refinement, in the parent's
/// barycentric frame.
pub fn tet_subcells(levels: usize) -> &'static [LamTet] {
    let all = TET_SUBCELLS.get_or_init(|| {
        let identity: LamTet = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let mut per = vec![vec![identity]];
        for l in 1..=MAX_SPLIT_LEVELS {
            let next = per[l - 1]
                .iter()
                .flat_map(|c| bey_children(c))
                .collect::<Vec<_>>();
            per.push(next);
        }
        per
    });
    &all[levels.min(MAX_SPLIT_LEVELS)]
}

/// The 4^levels sub-triangles of `levels` rounds of red refinement.
pub fn tri_subcells(levels: usize) -> &'static [LamTri] {
    let all = TRI_SUBCELLS.get_or_init(|| {
        let identity: LamTri = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut per = vec![vec![identity]];
        for l in 1..=MAX_SPLIT_LEVELS {
            let next = per[l - 1]
                .iter()
                .flat_map(|c| red_tri_children(c))
                .collect::<Vec<_>>();
            per.push(next);
        }
        per
    });
    &all[levels.min(MAX_SPLIT_LEVELS)]
}

/// Assemble the load vector: the volume source term plus the impedance data
/// term over tagged boundary faces.
///
/// `k` must match the wavenumber the case was built for; it also steers the
/// oscillation subsplit. Pass [`data_quad_degree`] for `quad_degree` unless a
/// test needs something specific.
pub fn assemble_load(
    mesh: &Mesh,
    dofs: &DofMap,
    case: &ManufacturedCase,
    k: f64,
    quad_degree: usize,
) -> Result<Vec<Complex64>> {
    if dofs.kind != SpaceKind::Hcurl {
        return Err(Error::invalid(
            "load vectors need a curl-conforming dof map",
        ));
    }
    if !k.is_finite() || k.abs() < 1.0 {
        return Err(Error::invalid(format!(
            "wavenumber k = {k} must be finite with |k| >= 1"
        )));
    }
    if (case.wavenumber() - k).abs() > 1e-12 * k.abs() {
        return Err(Error::invalid(format!(
            "case {:?} was built for k = {}, got k = {k}",
            case.name(),
            case.wavenumber()
        )));
    }
    let has_pec = mesh
        .boundary_faces
        .iter()
        .any(|bf| bf.tag == BoundaryTag::Pec);
    if case.pec_inner() != has_pec {
        return Err(Error::invalid(format!(
            "case {:?} expects a mesh {} a conducting inner boundary",
            case.name(),
            if case.pec_inner() { "with" } else { "without" }
        )));
    }
    let degree = i32::try_from(quad_degree)
        .map_err(|_| Error::invalid(format!("quadrature degree {quad_degree} out of range")))?;
    let basis = reference_nedelec_basis(dofs.degree)?;
    let n = basis.shapes.len();
    let mut b = vec![C_ZERO; dofs.ndof];

    if !case.source_is_zero() {
        let rule = tet_rule(degree)?;
        let nt = mesh.num_tets();
        let ranges: Vec<(usize, usize)> = (0..nt)
            .step_by(ASSEMBLY_CHUNK)
            .map(|lo| (lo, (lo + ASSEMBLY_CHUNK).min(nt)))
            .collect();
        let chunks: Vec<Result<Vec<(u32, Complex64)>>> = ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let mut out = Vec::with_capacity((hi - lo) * n);
                let mut acc = vec![C_ZERO; n];
                for t in lo..hi {
                    let map = mesh.element_map(t)?;
                    let perm = dofs.role_perm[t];
                    let g_role = role_gradients(&map.barycentric_gradients(), perm);
                    let levels = oscillation_split_levels(k, mesh.tet_diameter(t));
                    let scale = 0.125f64.powi(levels as i32) * map.det.abs();
                    acc.fill(C_ZERO);
                    for cell in tet_subcells(levels) {
                        for (q, pt) in rule.points.iter().enumerate() {
                            let mu = bary_coords(*pt);
                            let mut lam_loc = [0.0f64; 4];
                            for r in 0..4 {
                                for c in 0..4 {
                                    lam_loc[c] += mu[r] * cell[r][c];
                                }
                            }
                            let x = map.apply([lam_loc[1], lam_loc[2], lam_loc[3]]);
                            let vals = eval_vector_values(
                                &basis.shapes,
                                role_coords(lam_loc, perm),
                                &g_role,
                            );
                            let fv = case.source_f(x);
                            let w = rule.weights[q] * scale;
                            for i in 0..n {
                                let d =
                                    fv[0] * vals[i][0] + fv[1] * vals[i][1] + fv[2] * vals[i][2];
                                acc[i] += d * w;
                            }
                        }
                    }
                    let gd = dofs.cell_dofs(t);
                    for i in 0..n {
                        out.push((gd[i], acc[i]));
                    }
                }
                Ok(out)
            })
            .collect();
        for chunk in chunks {
            for (dof, v) in chunk? {
                b[dof as usize] += v;
            }
        }
    }

    let tri = tri_rule(degree)?;
    for bf in &mesh.boundary_faces {
        if bf.tag != BoundaryTag::Impedance {
            continue;
        }
        let t = bf.tet;
        let lf = bf.local_face;
        let map = mesh.element_map(t)?;
        let perm = dofs.role_perm[t];
        let g_role = role_gradients(&map.barycentric_gradients(), perm);
        let (nrm, area) = mesh.face_normal_area(t, lf);
        let vs = mesh.tet_vertices(t);
        let fidx = LOCAL_FACES[lf];
        let (va, vb, vc) = (vs[fidx[0]], vs[fidx[1]], vs[fidx[2]]);
        let h_f = norm3(sub(vb, va))
            .max(norm3(sub(vc, va)))
            .max(norm3(sub(vc, vb)));
        let levels = oscillation_split_levels(k, h_f);
        let scale = 0.25f64.powi(levels as i32) * 2.0 * area;
        let r_opp = perm
            .iter()
            .position(|&v| v as usize == lf)
            .expect("role permutation covers every local vertex");
        let support = face_support_indices(dofs, r_opp);
        let gd = dofs.cell_dofs(t);
        for cell in tri_subcells(levels) {
            for (q, pt) in tri.points.iter().enumerate() {
                let muc = [1.0 - pt[0] - pt[1], pt[0], pt[1]];
                let mut mu = [0.0f64; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        mu[c] += muc[r] * cell[r][c];
                    }
                }
                let x = [
                    va[0] * mu[0] + vb[0] * mu[1] + vc[0] * mu[2],
                    va[1] * mu[0] + vb[1] * mu[1] + vc[1] * mu[2],
                    va[2] * mu[0] + vb[2] * mu[1] + vc[2] * mu[2],
                ];
                let mut lam_loc = [0.0f64; 4];
                lam_loc[fidx[0]] = mu[0];
                lam_loc[fidx[1]] = mu[1];
                lam_loc[fidx[2]] = mu[2];
                let vals = eval_vector_values(&basis.shapes, role_coords(lam_loc, perm), &g_role);
                let gt = case.impedance_g_t(x, nrm);
                let w = tri.weights[q] * scale;
                for &i in &support {
                    let vt = real_tangential(vals[i], nrm);
                    let d = gt[0] * vt[0] + gt[1] * vt[1] + gt[2] * vt[2];
                    b[gd[i] as usize] += d * w;
                }
            }
        }
    }
    Ok(b)
}

#[inline]
fn norm3(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

/// Index bookkeeping for eliminating dofs pinned by a conducting boundary.
#[derive(Debug, Clone)]
pub struct PecReduction {
    /// Old dof index to new, `None` for eliminated dofs.
    pub keep: Vec<Option<u32>>,
    /// Dimension after elimination.
    pub n_reduced: usize,
}

impl PecReduction {
    /// Identity reduction for meshes without conducting faces.
    pub fn identity(ndof: usize) -> Self {
        PecReduction {
            keep: (0..ndof).map(|i| Some(i as u32)).collect(),
            n_reduced: ndof,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.n_reduced == self.keep.len()
    }

    /// Drop eliminated entries from a full-length vector.
    pub fn restrict_vec(&self, full: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(full.len(), self.keep.len());
        let mut out = vec![C_ZERO; self.n_reduced];
        for (old, m) in self.keep.iter().enumerate() {
            if let Some(new) = m {
                out[*new as usize] = full[old];
            }
        }
        out
    }

    /// Scatter a reduced vector back to full length, zero on eliminated dofs.
    pub fn expand_vec(&self, reduced: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(reduced.len(), self.n_reduced);
        let mut out = vec![C_ZERO; self.keep.len()];
        for (old, m) in self.keep.iter().enumerate() {
            if let Some(new) = m {
                out[old] = reduced[*new as usize];
            }
        }
        out
    }
}

/// Build the elimination map for every dof whose trace sits on a conducting
/// boundary face. Meshes without such faces give the identity.
pub fn pec_reduction(mesh: &Mesh, dofs: &DofMap) -> PecReduction {
    let mask = dofs.boundary_dof_mask(mesh, BoundaryTag::Pec);
    let (keep, n_reduced) = renumber_kept(&mask);
    PecReduction { keep, n_reduced }
}

/// Constrain a system to the conducting boundary: rows and columns of
/// eliminated dofs are removed and their homogeneous values dropped from the
/// load. Returns the reduced pair and the index map.
pub fn apply_pec(
    matrix: &ComplexCsr,
    load: &[Complex64],
    dofs: &DofMap,
    mesh: &Mesh,
) -> Result<(ComplexCsr, Vec<Complex64>, PecReduction)> {
    if matrix.nrows != dofs.ndof || matrix.ncols != dofs.ndof {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, dof map has {} dofs",
            matrix.nrows, matrix.ncols, dofs.ndof
        )));
    }
    if load.len() != dofs.ndof {
        return Err(Error::invalid(format!(
            "load has length {}, dof map has {} dofs",
            load.len(),
            dofs.ndof
        )));
    }
    let red = pec_reduction(mesh, dofs);
    let a = matrix.restrict(&red.keep, red.n_reduced, &red.keep, red.n_reduced);
    let b = red.restrict_vec(load);
    Ok((a, b, red))
}

/// Restrict the real blocks to the kept dofs; the shared pattern survives.
pub fn apply_pec_blocks(blocks: &SystemMatrices, red: &PecReduction) -> SystemMatrices {
    SystemMatrices {
        s: blocks
            .s
            .restrict(&red.keep, red.n_reduced, &red.keep, red.n_reduced),
        m: blocks
            .m
            .restrict(&red.keep, red.n_reduced, &red.keep, red.n_reduced),
        m_gamma: blocks
            .m_gamma
            .restrict(&red.keep, red.n_reduced, &red.keep, red.n_reduced),
    }
}
