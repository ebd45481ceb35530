//! Conforming finite element spaces on tetrahedral meshes.
//!
//! Two families: the Nédélec space of the first kind in H(curl), indexed by
//! the type-I degree p ∈ {0..3}, and the hierarchic H¹ space of degree
//! q ∈ {1..4} whose gradients embed into the Nédélec space one index up.
//!
//! Conformity needs no orientation signs: each element relabels its four
//! vertices into "roles" sorted by global id, and every shared entity is seen
//! with identical role assignments from both sides, so traces match exactly.

pub mod bary;
pub mod shapes;
pub mod tables;

use crate::error::{Error, Result};
use crate::geometry::{cross, mat_t_vec, mat_vec, scale, Vec3};
use crate::mesh::{AffineMap, BoundaryTag, Mesh, LOCAL_FACES};
use crate::sparse::RealCsr;
use shapes::{ScalarShape, VectorShape, ROLE_EDGES, ROLE_FACES};

/// Which conforming space a dof map describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Nédélec space of the first kind; `degree` is the type-I index p.
    Hcurl,
    /// Continuous scalar space; `degree` is the polynomial degree q.
    H1,
}

/// Physical gradients of the reference barycentric coordinates.
pub const REF_GRADIENTS: [Vec3; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Barycentric coordinates of a reference point.
pub fn bary_coords(xhat: Vec3) -> [f64; 4] {
    [1.0 - xhat[0] - xhat[1] - xhat[2], xhat[0], xhat[1], xhat[2]]
}

/// The six cross products ∇λ_s × ∇λ_r over the role pairs, which carry the
/// curl terms of vector shapes.
pub fn gradient_cross_products(g: &[Vec3; 4]) -> [Vec3; 6] {
    let mut out = [[0.0; 3]; 6];
    for (idx, &(s, r)) in ROLE_EDGES.iter().enumerate() {
        out[idx] = cross(g[s], g[r]);
    }
    out
}

/// Values of vector shapes at barycentric point `lam` with barycentric
/// gradients `g` (reference or physical, depending on what `g` is).
pub fn eval_vector_values(shapes: &[VectorShape], lam: [f64; 4], g: &[Vec3; 4]) -> Vec<Vec3> {
    shapes
        .iter()
        .map(|sh| {
            let mut v = [0.0; 3];
            for (poly, r) in &sh.value {
                let c = poly.eval(lam);
                v[0] += c * g[*r][0];
                v[1] += c * g[*r][1];
                v[2] += c * g[*r][2];
            }
            v
        })
        .collect()
}

/// Curls of vector shapes; `crs` are the pair cross products from
/// `gradient_cross_products`.
pub fn eval_vector_curls(shapes: &[VectorShape], lam: [f64; 4], crs: &[Vec3; 6]) -> Vec<Vec3> {
    shapes
        .iter()
        .map(|sh| {
            let mut v = [0.0; 3];
            for (poly, pr) in &sh.curl {
                let c = poly.eval(lam);
                v[0] += c * crs[*pr][0];
                v[1] += c * crs[*pr][1];
                v[2] += c * crs[*pr][2];
            }
            v
        })
        .collect()
}

pub fn eval_scalar_values(shapes: &[ScalarShape], lam: [f64; 4]) -> Vec<f64> {
    shapes.iter().map(|sh| sh.poly.eval(lam)).collect()
}

pub fn eval_scalar_gradients(shapes: &[ScalarShape], lam: [f64; 4], g: &[Vec3; 4]) -> Vec<Vec3> {
    shapes
        .iter()
        .map(|sh| {
            let mut v = [0.0; 3];
            for r in 0..4 {
                let c = sh.grad[r].eval(lam);
                v[0] += c * g[r][0];
                v[1] += c * g[r][1];
                v[2] += c * g[r][2];
            }
            v
        })
        .collect()
}

/// Reference Nédélec basis of type-I index p on the unit tetrahedron.
#[derive(Debug, Clone)]
pub struct NedelecBasis {
    pub p: usize,
    pub shapes: Vec<VectorShape>,
}

impl NedelecBasis {
    pub fn dim(&self) -> usize {
        self.shapes.len()
    }

    /// Shape values at a reference point.
    pub fn eval(&self, xhat: Vec3) -> Vec<Vec3> {
        eval_vector_values(&self.shapes, bary_coords(xhat), &REF_GRADIENTS)
    }

    /// Shape curls at a reference point.
    pub fn curl(&self, xhat: Vec3) -> Vec<Vec3> {
        let crs = gradient_cross_products(&REF_GRADIENTS);
        eval_vector_curls(&self.shapes, bary_coords(xhat), &crs)
    }
}

/// Reference scalar basis of degree q on the unit tetrahedron.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub degree: usize,
    pub shapes: Vec<ScalarShape>,
}

impl ScalarBasis {
    pub fn dim(&self) -> usize {
        self.shapes.len()
    }

    pub fn eval(&self, xhat: Vec3) -> Vec<f64> {
        eval_scalar_values(&self.shapes, bary_coords(xhat))
    }

    pub fn grad(&self, xhat: Vec3) -> Vec<Vec3> {
        eval_scalar_gradients(&self.shapes, bary_coords(xhat), &REF_GRADIENTS)
    }
}

/// Build the reference Nédélec basis; orders above 3 are not wired up.
pub fn reference_nedelec_basis(p: usize) -> Result<NedelecBasis> {
    if p > 3 {
        return Err(Error::NotImplemented(format!(
            "Nedelec type-I index {p} (supported: 0..=3)"
        )));
    }
    Ok(NedelecBasis {
        p,
        shapes: shapes::hcurl_shapes(p),
    })
}

/// Build the reference scalar basis; degrees outside 1..=4 are not wired up.
pub fn reference_scalar_basis(degree: usize) -> Result<ScalarBasis> {
    if !(1..=4).contains(&degree) {
        return Err(Error::NotImplemented(format!(
            "scalar degree {degree} (supported: 1..=4)"
        )));
    }
    Ok(ScalarBasis {
        degree,
        shapes: shapes::scalar_shapes(degree),
    })
}

/// Covariant (H(curl)) push-forward of a reference value/curl pair through an
/// affine element map: value ↦ B⁻ᵀ value, curl ↦ B curl / det B.
pub fn piola_covariant(map: &AffineMap, ref_value: Vec3, ref_curl: Vec3) -> (Vec3, Vec3) {
    let value = mat_t_vec(&map.inverse_jacobian, ref_value);
    let curl = scale(mat_vec(&map.jacobian, ref_curl), 1.0 / map.det);
    (value, curl)
}

/// Global degree-of-freedom layout of a conforming space on a mesh.
///
/// Dofs are blocked by entity class: for H(curl), all edge blocks first
/// (p+1 dofs per edge), then face blocks, then per-element interior blocks;
/// the scalar space puts one dof per vertex in front. Within an element the
/// local order follows the canonical role-space shape list, so
/// `cell_dofs(t)[i]` belongs to the i-th shape of `hcurl_shapes`/
/// `scalar_shapes` evaluated with that element's role permutation.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub degree: usize,
    pub ndof: usize,
    pub n_local: usize,
    /// Flattened n_cells × n_local global dof indices.
    pub cell_dofs: Vec<u32>,
    /// Per cell: role i is local vertex slot `role_perm[t][i]`.
    pub role_perm: Vec<[u8; 4]>,
    /// Global edges as sorted vertex pairs, lexicographic.
    pub edges: Vec<[u32; 2]>,
    /// Global faces as sorted vertex triples, lexicographic.
    pub faces: Vec<[u32; 3]>,
    /// Per cell: global edge ids in role-pair order.
    pub cell_edges: Vec<[u32; 6]>,
    /// Per cell: global face ids in role-triple order.
    pub cell_faces: Vec<[u32; 4]>,
    pub n_vertices: usize,
    pub dofs_per_edge: usize,
    pub dofs_per_face: usize,
    pub dofs_per_cell_interior: usize,
    pub edge_dof_offset: usize,
    pub face_dof_offset: usize,
    pub interior_dof_offset: usize,
}

impl DofMap {
    pub fn num_cells(&self) -> usize {
        self.role_perm.len()
    }

    pub fn cell_dofs(&self, t: usize) -> &[u32] {
        &self.cell_dofs[t * self.n_local..(t + 1) * self.n_local]
    }

    pub fn edge_dof(&self, edge: usize, m: usize) -> u32 {
        debug_assert!(m < self.dofs_per_edge);
        (self.edge_dof_offset + edge * self.dofs_per_edge + m) as u32
    }

    pub fn face_dof(&self, face: usize, m: usize) -> u32 {
        debug_assert!(m < self.dofs_per_face);
        (self.face_dof_offset + face * self.dofs_per_face + m) as u32
    }

    pub fn interior_dof(&self, cell: usize, m: usize) -> u32 {
        debug_assert!(m < self.dofs_per_cell_interior);
        (self.interior_dof_offset + cell * self.dofs_per_cell_interior + m) as u32
    }

    fn edge_id(&self, key: [u32; 2]) -> u32 {
        self.edges.binary_search(&key).expect("edge key present") as u32
    }

    fn face_id(&self, key: [u32; 3]) -> u32 {
        self.faces.binary_search(&key).expect("face key present") as u32
    }

    /// Mask of dofs whose trace lives on a boundary face with the given tag
    /// (true = on that boundary). For H(curl) these are the tangential dofs
    /// of the tagged faces and their edges; the scalar space adds vertices.
    pub fn boundary_dof_mask(&self, mesh: &Mesh, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.ndof];
        for bf in mesh.boundary_faces.iter().filter(|bf| bf.tag == tag) {
            let tet = mesh.tets[bf.tet];
            let mut tri: [u32; 3] = [0; 3];
            for (i, &slot) in LOCAL_FACES[bf.local_face].iter().enumerate() {
                tri[i] = tet[slot] as u32;
            }
            tri.sort_unstable();
            let f = self.face_id(tri) as usize;
            for m in 0..self.dofs_per_face {
                mask[self.face_dof(f, m) as usize] = true;
            }
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                let e = self.edge_id([tri[a], tri[b]]) as usize;
                for m in 0..self.dofs_per_edge {
                    mask[self.edge_dof(e, m) as usize] = true;
                }
            }
            if self.kind == SpaceKind::H1 {
                for v in tri {
                    mask[v as usize] = true;
                }
            }
        }
        mask
    }
}

/// Renumber the dofs not flagged in `eliminate`: old index → new index.
/// The map is increasing on kept dofs.
pub fn renumber_kept(eliminate: &[bool]) -> (Vec<Option<u32>>, usize) {
    let mut map = Vec::with_capacity(eliminate.len());
    let mut next = 0u32;
    for &e in eliminate {
        if e {
            map.push(None);
        } else {
            map.push(Some(next));
            next += 1;
        }
    }
    (map, next as usize)
}

/// Enumerate global entities and lay out dofs for the requested space.
pub fn build_dof_map(mesh: &Mesh, degree: usize, kind: SpaceKind) -> Result<DofMap> {
    match kind {
        SpaceKind::Hcurl if degree > 3 => {
            return Err(Error::NotImplemented(format!(
                "H(curl) dof map for type-I index {degree}"
            )))
        }
        SpaceKind::H1 if !(1..=4).contains(&degree) => {
            return Err(Error::NotImplemented(format!(
                "H1 dof map for degree {degree}"
            )))
        }
        _ => {}
    }
    let nt = mesh.num_tets();
    let nv = mesh.num_vertices();

    let mut role_perm = Vec::with_capacity(nt);
    let mut edge_keys: Vec<[u32; 2]> = Vec::with_capacity(6 * nt);
    let mut face_keys: Vec<[u32; 3]> = Vec::with_capacity(4 * nt);
    let mut cell_gids = Vec::with_capacity(nt);
    for tet in &mesh.tets {
        let mut idx = [0usize, 1, 2, 3];
        idx.sort_unstable_by_key(|&i| tet[i]);
        let perm = [idx[0] as u8, idx[1] as u8, idx[2] as u8, idx[3] as u8];
        let gid = [
            tet[idx[0]] as u32,
            tet[idx[1]] as u32,
            tet[idx[2]] as u32,
            tet[idx[3]] as u32,
        ];
        role_perm.push(perm);
        cell_gids.push(gid);
        for &(a, b) in &ROLE_EDGES {
            edge_keys.push([gid[a], gid[b]]);
        }
        for &(a, b, c) in &ROLE_FACES {
            face_keys.push([gid[a], gid[b], gid[c]]);
        }
    }
    edge_keys.sort_unstable();
    edge_keys.dedup();
    face_keys.sort_unstable();
    face_keys.dedup();
    let edges = edge_keys;
    let faces = face_keys;

    let mut cell_edges = Vec::with_capacity(nt);
    let mut cell_faces = Vec::with_capacity(nt);
    for gid in &cell_gids {
        let mut ce = [0u32; 6];
        for (i, &(a, b)) in ROLE_EDGES.iter().enumerate() {
            ce[i] = edges
                .binary_search(&[gid[a], gid[b]])
                .expect("cell edge enumerated") as u32;
        }
        let mut cf = [0u32; 4];
        for (i, &(a, b, c)) in ROLE_FACES.iter().enumerate() {
            cf[i] = faces
                .binary_search(&[gid[a], gid[b], gid[c]])
                .expect("cell face enumerated") as u32;
        }
        cell_edges.push(ce);
        cell_faces.push(cf);
    }

    let (dofs_per_edge, dofs_per_face, dofs_per_cell_interior, vertex_dofs) = match kind {
        SpaceKind::Hcurl => (
            shapes::hcurl_edge_count(degree),
            shapes::hcurl_face_count(degree),
            shapes::hcurl_interior_count(degree),
            0usize,
        ),
        SpaceKind::H1 => (
            shapes::scalar_edge_count(degree),
            shapes::scalar_face_count(degree),
            shapes::scalar_interior_count(degree),
            nv,
        ),
    };
    let edge_dof_offset = vertex_dofs;
    let face_dof_offset = edge_dof_offset + edges.len() * dofs_per_edge;
    let interior_dof_offset = face_dof_offset + faces.len() * dofs_per_face;
    let ndof = interior_dof_offset + nt * dofs_per_cell_interior;
    if ndof > u32::MAX as usize {
        return Err(Error::SizeCap(format!("{ndof} dofs exceed u32 indexing")));
    }

    let n_local = match kind {
        SpaceKind::Hcurl => shapes::hcurl_total_count(degree),
        SpaceKind::H1 => shapes::scalar_total_count(degree),
    };
    let mut cell_dofs = Vec::with_capacity(nt * n_local);
    for t in 0..nt {
        if kind == SpaceKind::H1 {
            for r in 0..4 {
                cell_dofs.push(cell_gids[t][r]);
            }
        }
        for le in 0..6 {
            let e = cell_edges[t][le] as usize;
            for m in 0..dofs_per_edge {
                cell_dofs.push((edge_dof_offset + e * dofs_per_edge + m) as u32);
            }
        }
        for lf in 0..4 {
            let f = cell_faces[t][lf] as usize;
            for m in 0..dofs_per_face {
                cell_dofs.push((face_dof_offset + f * dofs_per_face + m) as u32);
            }
        }
        for m in 0..dofs_per_cell_interior {
            cell_dofs.push((interior_dof_offset + t * dofs_per_cell_interior + m) as u32);
        }
    }
    debug_assert_eq!(cell_dofs.len(), nt * n_local);

    Ok(DofMap {
        kind,
        degree,
        ndof,
        n_local,
        cell_dofs,
        role_perm,
        edges,
        faces,
        cell_edges,
        cell_faces,
        n_vertices: nv,
        dofs_per_edge,
        dofs_per_face,
        dofs_per_cell_interior,
        edge_dof_offset,
        face_dof_offset,
        interior_dof_offset,
    })
}

/// The discrete gradient: a sparse matrix mapping scalar coefficients of the
/// degree-(p+1) H¹ space into H(curl) coefficients of the index-p Nédélec
/// space, exact at coefficient level (integer entries).
#[derive(Debug, Clone)]
pub struct DiscreteGradient {
    pub matrix: RealCsr,
    pub hcurl: DofMap,
    pub scalar: DofMap,
}

/// Build the coefficient map G with G·φ the coefficients of ∇(scalar field).
///
/// Vertex hats expand over Whitney functions with ±1 on incident edges; the
/// hierarchic edge and face gradients are shared shapes, so their blocks are
/// identity; the quartic interior bubble expands over the twelve interior
/// modes with coefficients +1 and −4.
pub fn discrete_gradient(mesh: &Mesh, p: usize) -> Result<DiscreteGradient> {
    let hcurl = build_dof_map(mesh, p, SpaceKind::Hcurl)?;
    let scalar = build_dof_map(mesh, p + 1, SpaceKind::H1)?;
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();

    for (e, key) in hcurl.edges.iter().enumerate() {
        // Whitney row: ∇(hat_b) picks +1, ∇(hat_a) picks −1 on edge (a, b).
        let row = hcurl.edge_dof(e, 0);
        triplets.push((row, key[0], -1.0));
        triplets.push((row, key[1], 1.0));
        // Gradient modes are shared with the scalar edge hierarchy.
        for m in 1..hcurl.dofs_per_edge {
            triplets.push((hcurl.edge_dof(e, m), scalar.edge_dof(e, m - 1), 1.0));
        }
    }
    let t1 = scalar.dofs_per_face; // scalar face modes = gradient-type face modes
    for f in 0..hcurl.faces.len() {
        for m in 0..t1 {
            triplets.push((hcurl.face_dof(f, m), scalar.face_dof(f, m), 1.0));
        }
    }
    if scalar.dofs_per_cell_interior == 1 {
        for t in 0..mesh.num_tets() {
            let col = scalar.interior_dof(t, 0);
            for fam in 1..=3usize {
                triplets.push((hcurl.interior_dof(t, (fam - 1) * 4), col, 1.0));
                triplets.push((hcurl.interior_dof(t, (fam - 1) * 4 + fam), col, -4.0));
            }
        }
    }

    let matrix = RealCsr::from_triplets(hcurl.ndof, scalar.ndof, triplets)?;
    Ok(DiscreteGradient {
        matrix,
        hcurl,
        scalar,
    })
}
