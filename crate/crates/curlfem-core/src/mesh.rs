//! Tetrahedral meshes of the benchmark domains.
//!
//! Domains are axis-aligned boxes built from hexahedral cells, each split into
//! six tetrahedra by the Kuhn (Freudenthal) subdivision along a globally
//! consistent diagonal, so uniform refinement nests and shape regularity is
//! uniform across levels. Element maps are affine.

use crate::error::{Error, Result};
use crate::geometry::{cross, det3, dot, inv3, norm, sub, Mat3, Vec3};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Boundary condition tag carried by each boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Impedance (absorbing-type) boundary.
    Impedance,
    /// Perfect electric conductor: tangential field pinned to zero.
    Pec,
}

/// One boundary face: owning tet, local face index (the face opposite local
/// vertex `local_face`), and its tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub tet: usize,
    pub local_face: usize,
    pub tag: BoundaryTag,
}

/// Immutable tetrahedral mesh with boundary classification.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// Vertex indices per tet; orientation fixed so the signed volume is positive.
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace>,
}

/// Affine element map `F(x̂) = B x̂ + b` from the reference tetrahedron
/// (vertices 0, e1, e2, e3) onto a mesh tet.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub jacobian: Mat3,
    pub offset: Vec3,
    pub det: f64,
    pub inverse_jacobian: Mat3,
}

impl AffineMap {
    /// Map a reference point to physical coordinates.
    #[inline]
    pub fn apply(&self, xhat: Vec3) -> Vec3 {
        let b = &self.jacobian;
        [
            b[0][0] * xhat[0] + b[0][1] * xhat[1] + b[0][2] * xhat[2] + self.offset[0],
            b[1][0] * xhat[0] + b[1][1] * xhat[1] + b[1][2] * xhat[2] + self.offset[1],
            b[2][0] * xhat[0] + b[2][1] * xhat[1] + b[2][2] * xhat[2] + self.offset[2],
        ]
    }

    /// Physical gradients of the four barycentric coordinates, i.e. the rows of
    /// B⁻ᵀ prepended with the gradient of λ₀ = 1 − x̂ − ŷ − ẑ.
    pub fn barycentric_gradients(&self) -> [Vec3; 4] {
        let bi = &self.inverse_jacobian;
        // ∇λ_i for i=1..3 is the i-th COLUMN of B⁻ᵀ = i-th row of B⁻¹.
        let g1 = bi[0];
        let g2 = bi[1];
        let g3 = bi[2];
        let g0 = [
            -g1[0] - g2[0] - g3[0],
            -g1[1] - g2[1] - g3[1],
            -g1[2] - g2[2] - g3[2],
        ];
        [g0, g1, g2, g3]
    }
}

/// Global mesh size and shape-regularity summary.
#[derive(Debug, Clone, Copy)]
pub struct MeshStats {
    /// Largest element diameter.
    pub h_max: f64,
    /// max over K of diam(K) / inradius(K); ≥ the theoretical minimum for a tet.
    pub shape_regularity: f64,
}

/// Local faces of the reference tet: face `i` is opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Local edges of a tet as index pairs into its vertex 4-tuple.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Kuhn subdivision of the unit cube into 6 tets: tet `p` follows the chain
/// 0 → e_{σ(1)} → e_{σ(1)}+e_{σ(2)} → (1,1,1) over the 6 axis permutations σ.
/// All tets share the main diagonal (0,0,0)-(1,1,1), so neighboring cubes
/// agree on their shared faces.
const KUHN_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn signed_volume(v: &[Vec3; 4]) -> f64 {
    let a = sub(v[1], v[0]);
    let b = sub(v[2], v[0]);
    let c = sub(v[3], v[0]);
    dot(a, cross(b, c)) / 6.0
}

/// Shared builder: tensor grid of hexahedral cells (given by per-axis break
/// points and a cell filter), Kuhn-split into tets.
struct BoxGridBuilder {
    breaks: [Vec<f64>; 3],
    vertices: Vec<Vec3>,
    vertex_ids: HashMap<[usize; 3], usize>,
    tets: Vec<[usize; 4]>,
}

impl BoxGridBuilder {
    fn new(breaks: [Vec<f64>; 3]) -> Self {
        BoxGridBuilder {
            breaks,
            vertices: Vec::new(),
            vertex_ids: HashMap::new(),
            tets: Vec::new(),
        }
    }

    fn vertex(&mut self, idx: [usize; 3]) -> usize {
        if let Some(&id) = self.vertex_ids.get(&idx) {
            return id;
        }
        let p = [
            self.breaks[0][idx[0]],
            self.breaks[1][idx[1]],
            self.breaks[2][idx[2]],
        ];
        let id = self.vertices.len();
        self.vertices.push(p);
        self.vertex_ids.insert(idx, id);
        id
    }

    /// Kuhn-split the cell whose lowest corner sits at grid index `c`.
    fn add_cell(&mut self, c: [usize; 3]) {
        for perm in KUHN_PERMS {
            let mut corner = c;
            let mut chain = [[0usize; 3]; 4];
            chain[0] = corner;
            for (step, &axis) in perm.iter().enumerate() {
                corner[axis] += 1;
                chain[step + 1] = corner;
            }
            let ids = [
                self.vertex(chain[0]),
                self.vertex(chain[1]),
                self.vertex(chain[2]),
                self.vertex(chain[3]),
            ];
            self.tets.push(orient_positive(&self.vertices, ids));
        }
    }

    fn finish(self, classify: impl Fn(Vec3, Vec3) -> Option<BoundaryTag>) -> Result<Mesh> {
        let mut mesh = Mesh {
            vertices: self.vertices,
            tets: self.tets,
            boundary_faces: Vec::new(),
        };
        mesh.classify_boundary(classify)?;
        mesh.audit()?;
        Ok(mesh)
    }
}

/// Swap two vertices if needed so the signed volume is positive.
fn orient_positive(vertices: &[Vec3], mut ids: [usize; 4]) -> [usize; 4] {
    let v = [
        vertices[ids[0]],
        vertices[ids[1]],
        vertices[ids[2]],
        vertices[ids[3]],
    ];
    if signed_volume(&v) < 0.0 {
        ids.swap(2, 3);
    }
    ids
}

fn uniform_breaks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| lo + (hi - lo) * (i as f64) / (n as f64))
        .collect()
}

/// Kuhn tetrahedralization of the cube (−1,1)³ with `n` cells per axis.
/// Every boundary face is tagged [`BoundaryTag::Impedance`].
pub fn build_cube_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("cube mesh needs n >= 1 subdivisions"));
    }
    let mut b = BoxGridBuilder::new([
        uniform_breaks(-1.0, 1.0, n),
        uniform_breaks(-1.0, 1.0, n),
        uniform_breaks(-1.0, 1.0, n),
    ]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                b.add_cell([i, j, k]);
            }
        }
    }
    b.finish(|centroid, _normal| {
        let on_outer = centroid.iter().any(|&c| (c.abs() - 1.0).abs() < 1e-10);
        on_outer.then_some(BoundaryTag::Impedance)
    })
}

/// Cube (−1,1)³ with the concentric cube (−1/2,1/2)³ removed. The grid planes
/// {−1, −1/2, 1/2, 1} per axis give 27 blocks; the center block is omitted and
/// each remaining block is split into n³ cells before Kuhn subdivision. Outer
/// boundary is Impedance, inner boundary (∂(−1/2,1/2)³) is PEC.
pub fn build_cube_with_hole_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid(
            "cube-with-hole mesh needs n >= 1 subdivisions",
        ));
    }
    // One global tensor grid refined n× inside each block keeps neighboring
    // blocks conforming.
    let mut breaks = Vec::new();
    for seg in [[-1.0, -0.5], [-0.5, 0.5], [0.5, 1.0]] {
        let part = uniform_breaks(seg[0], seg[1], n);
        let skip = usize::from(!breaks.is_empty()); // avoid duplicating the shared break
        breaks.extend_from_slice(&part[skip..]);
    }
    let m = breaks.len() - 1; // cells per axis in the global grid
    let b3 = [breaks.clone(), breaks.clone(), breaks];
    let mut b = BoxGridBuilder::new(b3);
    let in_hole = |cell_mid: f64| cell_mid > -0.5 && cell_mid < 0.5;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mid = |breaks: &Vec<f64>, c: usize| 0.5 * (breaks[c] + breaks[c + 1]);
                let mids = [
                    mid(&b.breaks[0], i),
                    mid(&b.breaks[1], j),
                    mid(&b.breaks[2], k),
                ];
                if in_hole(mids[0]) && in_hole(mids[1]) && in_hole(mids[2]) {
                    continue;
                }
                b.add_cell([i, j, k]);
            }
        }
    }
    b.finish(|centroid, _normal| {
        if centroid.iter().any(|&c| (c.abs() - 1.0).abs() < 1e-10) {
            return Some(BoundaryTag::Impedance);
        }
        let on_half_plane = centroid.iter().any(|&c| (c.abs() - 0.5).abs() < 1e-10);
        let within_half_box = centroid.iter().all(|&c| c.abs() < 0.5 + 1e-10);
        (on_half_plane && within_half_box).then_some(BoundaryTag::Pec)
    })
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Affine map of tet `k`: columns of B are the edge vectors from vertex 0.
    pub fn element_map(&self, k: usize) -> Result<AffineMap> {
        let t = self
            .tets
            .get(k)
            .ok_or_else(|| Error::invalid(format!("tet index {k} out of range")))?;
        let v0 = self.vertices[t[0]];
        let e1 = sub(self.vertices[t[1]], v0);
        let e2 = sub(self.vertices[t[2]], v0);
        let e3 = sub(self.vertices[t[3]], v0);
        let jac: Mat3 = [
            [e1[0], e2[0], e3[0]],
            [e1[1], e2[1], e3[1]],
            [e1[2], e2[2], e3[2]],
        ];
        let det = det3(&jac);
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::MeshIntegrity(format!(
                "tet {k} is degenerate (det = {det:e})"
            )));
        }
        Ok(AffineMap {
            jacobian: jac,
            offset: v0,
            det,
            inverse_jacobian: inv3(&jac),
        })
    }

    /// Vertex positions of tet `k`.
    pub fn tet_vertices(&self, k: usize) -> [Vec3; 4] {
        let t = self.tets[k];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
            self.vertices[t[3]],
        ]
    }

    pub fn tet_volume(&self, k: usize) -> f64 {
        signed_volume(&self.tet_vertices(k))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|k| self.tet_volume(k)).sum()
    }

    /// Outward unit normal and area of a tet's local face.
    pub fn face_normal_area(&self, tet: usize, local_face: usize) -> (Vec3, f64) {
        let vs = self.tet_vertices(tet);
        let f = LOCAL_FACES[local_face];
        let a = vs[f[0]];
        let b = vs[f[1]];
        let c = vs[f[2]];
        let n2 = cross(sub(b, a), sub(c, a)); // twice-area normal, sign arbitrary
        let area = 0.5 * norm(n2);
        let mut n = [
            n2[0] / (2.0 * area),
            n2[1] / (2.0 * area),
            n2[2] / (2.0 * area),
        ];
        // Orient outward: away from the opposite vertex.
        let opp = vs[local_face];
        let to_face = sub(a, opp);
        if dot(n, to_face) < 0.0 {
            n = [-n[0], -n[1], -n[2]];
        }
        (n, area)
    }

    /// Element diameter (longest edge, which realizes the diameter of a tet).
    pub fn tet_diameter(&self, k: usize) -> f64 {
        let vs = self.tet_vertices(k);
        let mut h: f64 = 0.0;
        for e in LOCAL_EDGES {
            h = h.max(norm(sub(vs[e[0]], vs[e[1]])));
        }
        h
    }

    pub fn stats(&self) -> MeshStats {
        let mut h_max: f64 = 0.0;
        let mut shape: f64 = 0.0;
        for k in 0..self.num_tets() {
            let h = self.tet_diameter(k);
            h_max = h_max.max(h);
            // inradius = 3 vol / surface area
            let vol = self.tet_volume(k);
            let mut surf = 0.0;
            for lf in 0..4 {
                surf += self.face_normal_area(k, lf).1;
            }
            let inradius = 3.0 * vol / surf;
            shape = shape.max(h / inradius);
        }
        MeshStats {
            h_max,
            shape_regularity: shape,
        }
    }

    /// Build the boundary-face list from face incidence and a geometric
    /// classifier (face centroid, outward normal) → tag.
    fn classify_boundary(
        &mut self,
        classify: impl Fn(Vec3, Vec3) -> Option<BoundaryTag>,
    ) -> Result<()> {
        self.boundary_faces.clear();
        for (tet, face) in self.boundary_face_candidates()? {
            let f = LOCAL_FACES[face];
            let t = self.tets[tet];
            let a = self.vertices[t[f[0]]];
            let b = self.vertices[t[f[1]]];
            let c = self.vertices[t[f[2]]];
            let centroid = [
                (a[0] + b[0] + c[0]) / 3.0,
                (a[1] + b[1] + c[1]) / 3.0,
                (a[2] + b[2] + c[2]) / 3.0,
            ];
            let (normal, _) = self.face_normal_area(tet, face);
            let tag = classify(centroid, normal).ok_or_else(|| {
                Error::MeshIntegrity(format!(
                    "boundary face of tet {tet} at {centroid:?} matched no classifier"
                ))
            })?;
            self.boundary_faces.push(BoundaryFace {
                tet,
                local_face: face,
                tag,
            });
        }
        // Deterministic order regardless of HashMap iteration.
        self.boundary_faces
            .sort_by_key(|bf| (bf.tet, bf.local_face));
        Ok(())
    }

    /// (tet, local_face) pairs whose face is on the boundary (incidence 1).
    fn boundary_face_candidates(&self) -> Result<Vec<(usize, usize)>> {
        let mut incidence: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
        for (k, t) in self.tets.iter().enumerate() {
            for (lf, f) in LOCAL_FACES.iter().enumerate() {
                let mut key = [t[f[0]], t[f[1]], t[f[2]]];
                key.sort_unstable();
                incidence.entry(key).or_default().push((k, lf));
            }
        }
        let mut out = Vec::new();
        for (key, owners) in &incidence {
            match owners.len() {
                1 => out.push(owners[0]),
                2 => {}
                n => {
                    return Err(Error::MeshIntegrity(format!(
                        "face {key:?} shared by {n} tets"
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Structural audit: positive volumes and 1-or-2 face incidence.
    pub fn audit(&self) -> Result<()> {
        for k in 0..self.num_tets() {
            let v = self.tet_volume(k);
            if !(v > 0.0) {
                return Err(Error::MeshIntegrity(format!(
                    "tet {k} has non-positive volume {v:e}"
                )));
            }
        }
        let boundary = self.boundary_face_candidates()?; // errors on incidence > 2
        if boundary.len() != self.boundary_faces.len() {
            return Err(Error::MeshIntegrity(format!(
                "boundary list has {} faces, incidence audit found {}",
                self.boundary_faces.len(),
                boundary.len()
            )));
        }
        Ok(())
    }

    /// Red refinement: each tet split into 8 children through its edge
    /// midpoints. The interior octahedron is split along the diagonal chosen
    /// deterministically from vertex index order, matching the Kuhn structure
    /// so refined cube meshes coincide with finer-built ones. Boundary tags
    /// are inherited by containment in the parent face.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&id) = midpoint.get(&key) {
                return id;
            }
            let pa = vertices[key.0];
            let pb = vertices[key.1];
            let p = [
                0.5 * (pa[0] + pb[0]),
                0.5 * (pa[1] + pb[1]),
                0.5 * (pa[2] + pb[2]),
            ];
            let id = vertices.len();
            vertices.push(p);
            midpoint.insert(key, id);
            id
        };

        let mut tets = Vec::with_capacity(self.num_tets() * 8);
        // Track the parent (tet, local_face) for each child face to inherit tags:
        // keyed by the child face's sorted vertex triple.
        let mut parent_face_tag: HashMap<[usize; 3], BoundaryTag> = HashMap::new();
        for bf in &self.boundary_faces {
            let t = self.tets[bf.tet];
            let f = LOCAL_FACES[bf.local_face];
            let mut key = [t[f[0]], t[f[1]], t[f[2]]];
            key.sort_unstable();
            parent_face_tag.insert(key, bf.tag);
        }

        for t in &self.tets {
            let [v0, v1, v2, v3] = *t;
            let m01 = mid(v0, v1, &mut vertices);
            let m02 = mid(v0, v2, &mut vertices);
            let m03 = mid(v0, v3, &mut vertices);
            let m12 = mid(v1, v2, &mut vertices);
            let m13 = mid(v1, v3, &mut vertices);
            let m23 = mid(v2, v3, &mut vertices);
            // Four corner tets.
            let corners = [
                [v0, m01, m02, m03],
                [m01, v1, m12, m13],
                [m02, m12, v2, m23],
                [m03, m13, m23, v3],
            ];
            // Octahedron {m01,m02,m03,m12,m13,m23} split along diagonal m02–m13
            // (the Bey/Kuhn choice for the [0,1,2,3] index chain).
            let octa = [
                [m02, m13, m01, m03],
                [m02, m13, m03, m23],
                [m02, m13, m23, m12],
                [m02, m13, m12, m01],
            ];
            for ids in corners.into_iter().chain(octa) {
                tets.push(orient_positive(&vertices, ids));
            }
        }

        let mut mesh = Mesh {
            vertices,
            tets,
            boundary_faces: Vec::new(),
        };

        // Inherit tags: a child boundary face lies inside exactly one parent
        // boundary face; identify the parent via the child's vertices (each
        // child vertex is a parent vertex or an edge midpoint of the parent
        // face). Work geometrically: match by the parent face's plane.
        let candidates = mesh.boundary_face_candidates()?;
        let mut faces = Vec::with_capacity(candidates.len());
        for (tet, lf) in candidates {
            let f = LOCAL_FACES[lf];
            let t = mesh.tets[tet];
            // Parent lookup by vertex ancestry is done through geometry:
            // the child face centroid lies strictly inside the parent face.
            let a = mesh.vertices[t[f[0]]];
            let b = mesh.vertices[t[f[1]]];
            let c = mesh.vertices[t[f[2]]];
            let centroid = [
                (a[0] + b[0] + c[0]) / 3.0,
                (a[1] + b[1] + c[1]) / 3.0,
                (a[2] + b[2] + c[2]) / 3.0,
            ];
            let tag = self.find_containing_boundary_tag(centroid).ok_or_else(|| {
                Error::MeshIntegrity(format!(
                    "child boundary face at {centroid:?} has no parent boundary face"
                ))
            })?;
            faces.push(BoundaryFace {
                tet,
                local_face: lf,
                tag,
            });
        }
        faces.sort_by_key(|bf| (bf.tet, bf.local_face));
        mesh.boundary_faces = faces;
        mesh.audit()?;
        Ok(mesh)
    }

    /// Tag of the parent boundary face containing `p` (barycentric containment
    /// with tolerance), if any.
    fn find_containing_boundary_tag(&self, p: Vec3) -> Option<BoundaryTag> {
        for bf in &self.boundary_faces {
            let t = self.tets[bf.tet];
            let f = LOCAL_FACES[bf.local_face];
            let a = self.vertices[t[f[0]]];
            let b = self.vertices[t[f[1]]];
            let c = self.vertices[t[f[2]]];
            // Plane distance check then 2D barycentric containment.
            let n = cross(sub(b, a), sub(c, a));
            let nn = norm(n);
            let dist = dot(sub(p, a), n) / nn;
            if dist.abs() > 1e-9 {
                continue;
            }
            // Solve p − a = s (b − a) + t (c − a) in least squares (in-plane).
            let e1 = sub(b, a);
            let e2 = sub(c, a);
            let d = sub(p, a);
            let m11 = dot(e1, e1);
            let m12 = dot(e1, e2);
            let m22 = dot(e2, e2);
            let r1 = dot(d, e1);
            let r2 = dot(d, e2);
            let det = m11 * m22 - m12 * m12;
            let s = (r1 * m22 - r2 * m12) / det;
            let t2 = (m11 * r2 - m12 * r1) / det;
            let eps = 1e-9;
            if s >= -eps && t2 >= -eps && s + t2 <= 1.0 + eps {
                return Some(bf.tag);
            }
        }
        None
    }

    /// Plain-text dump: `v x y z`, `t i0 i1 i2 i3`, `bf tet localface tag` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.tets {
            let _ = writeln!(out, "t {} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        for bf in &self.boundary_faces {
            let tag = match bf.tag {
                BoundaryTag::Impedance => "impedance",
                BoundaryTag::Pec => "pec",
            };
            let _ = writeln!(out, "bf {} {} {}", bf.tet, bf.local_face, tag);
        }
        out
    }

    /// Parse the [`Mesh::dump`] format back into a mesh (inverse of `dump`).
    pub fn parse_dump(text: &str) -> Result<Mesh> {
        let mut mesh = Mesh {
            vertices: Vec::new(),
            tets: Vec::new(),
            boundary_faces: Vec::new(),
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap();
            let fields: Vec<&str> = parts.collect();
            let bad = || Error::invalid(format!("mesh dump line {}: {line:?}", lineno + 1));
            match kind {
                "v" => {
                    if fields.len() != 3 {
                        return Err(bad());
                    }
                    let mut p = [0.0; 3];
                    for (i, f) in fields.iter().enumerate() {
                        p[i] = f.parse().map_err(|_| bad())?;
                    }
                    mesh.vertices.push(p);
                }
                "t" => {
                    if fields.len() != 4 {
                        return Err(bad());
                    }
                    let mut t = [0usize; 4];
                    for (i, f) in fields.iter().enumerate() {
                        t[i] = f.parse().map_err(|_| bad())?;
                    }
                    mesh.tets.push(t);
                }
                "bf" => {
                    if fields.len() != 3 {
                        return Err(bad());
                    }
                    let tag = match fields[2] {
                        "impedance" => BoundaryTag::Impedance,
                        "pec" => BoundaryTag::Pec,
                        _ => return Err(bad()),
                    };
                    mesh.boundary_faces.push(BoundaryFace {
                        tet: fields[0].parse().map_err(|_| bad())?,
                        local_face: fields[1].parse().map_err(|_| bad())?,
                        tag,
                    });
                }
                _ => return Err(bad()),
            }
        }
        mesh.audit()?;
        Ok(mesh)
    }
}
