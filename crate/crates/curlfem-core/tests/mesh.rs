//! Structural checks of the benchmark meshes against hand-counted values.

use curlfem_core::mesh::{build_cube_mesh, build_cube_with_hole_mesh, BoundaryTag, Mesh};

fn count_tag(mesh: &Mesh, tag: BoundaryTag) -> usize {
    mesh.boundary_faces.iter().filter(|b| b.tag == tag).count()
}

#[test]
fn cube_counts_level_one() {
    let mesh = build_cube_mesh(1).unwrap();
    assert_eq!(mesh.num_vertices(), 8);
    assert_eq!(mesh.num_tets(), 6);
    assert_eq!(mesh.boundary_faces.len(), 12);
    assert_eq!(count_tag(&mesh, BoundaryTag::Impedance), 12);
    assert_eq!(count_tag(&mesh, BoundaryTag::Pec), 0);
    mesh.audit().unwrap();
}

#[test]
fn cube_counts_level_two() {
    let mesh = build_cube_mesh(2).unwrap();
    assert_eq!(mesh.num_vertices(), 27);
    assert_eq!(mesh.num_tets(), 48);
    assert_eq!(mesh.boundary_faces.len(), 48);
    mesh.audit().unwrap();
}

#[test]
fn cube_volume_is_eight() {
    for n in [1, 2, 3, 4] {
        let mesh = build_cube_mesh(n).unwrap();
        let vol = mesh.total_volume();
        assert!((vol - 8.0).abs() < 1e-12 * 8.0, "n = {n}: {vol}");
    }
}

#[test]
fn all_tets_positively_oriented() {
    for mesh in [
        build_cube_mesh(2).unwrap(),
        build_cube_with_hole_mesh(1).unwrap(),
    ] {
        for t in 0..mesh.num_tets() {
            assert!(mesh.tet_volume(t) > 0.0);
        }
    }
}

#[test]
fn cube_mesh_size_halves_per_level() {
    let h1 = build_cube_mesh(1).unwrap().stats().h_max;
    let h2 = build_cube_mesh(2).unwrap().stats().h_max;
    let h4 = build_cube_mesh(4).unwrap().stats().h_max;
    // Cell side 2/n, longest edge is the cell diagonal.
    assert!((h1 - 2.0 * 3.0_f64.sqrt()).abs() < 1e-12);
    assert!((h1 / h2 - 2.0).abs() < 1e-12);
    assert!((h2 / h4 - 2.0).abs() < 1e-12);
}

#[test]
fn shape_regularity_uniform_across_levels() {
    let r1 = build_cube_mesh(1).unwrap().stats().shape_regularity;
    let r4 = build_cube_mesh(4).unwrap().stats().shape_regularity;
    // Kuhn tets are similar across n, so the ratio is level independent.
    assert!((r1 - r4).abs() < 1e-9, "{r1} vs {r4}");
    assert!(r1 < 15.0, "unexpectedly degenerate cells: {r1}");
}

#[test]
fn cube_with_hole_counts() {
    let mesh = build_cube_with_hole_mesh(1).unwrap();
    assert_eq!(mesh.num_tets(), 156); // 26 cells of 6 tets
    assert_eq!(count_tag(&mesh, BoundaryTag::Pec), 12);
    assert_eq!(count_tag(&mesh, BoundaryTag::Impedance), 108);
    let vol = mesh.total_volume();
    assert!((vol - 7.0).abs() < 1e-12 * 7.0, "volume {vol}");
    mesh.audit().unwrap();
}

#[test]
fn cube_with_hole_pec_faces_lie_on_hole_surface() {
    let mesh = build_cube_with_hole_mesh(2).unwrap();
    for bf in mesh.boundary_faces.iter() {
        let verts = curlfem_core::mesh::LOCAL_FACES[bf.local_face]
            .map(|s| mesh.vertices[mesh.tets[bf.tet][s]]);
        let on_hole = verts.iter().all(|v| {
            v.iter().all(|c| c.abs() < 0.5 + 1e-10)
                && v.iter().any(|c| (c.abs() - 0.5).abs() < 1e-10)
        });
        match bf.tag {
            BoundaryTag::Pec => assert!(on_hole, "PEC face off the hole: {verts:?}"),
            BoundaryTag::Impedance => {
                let on_outer = verts
                    .iter()
                    .all(|v| v.iter().any(|c| (c.abs() - 1.0).abs() < 1e-10));
                assert!(on_outer, "impedance face off the outer surface: {verts:?}");
            }
        }
    }
}

#[test]
fn refinement_multiplies_tets_by_eight() {
    let coarse = build_cube_mesh(1).unwrap();
    let fine = coarse.refine_uniform().unwrap();
    assert_eq!(fine.num_tets(), 48);
    assert_eq!(fine.boundary_faces.len(), 48);
    let finer = fine.refine_uniform().unwrap();
    assert_eq!(finer.num_tets(), 384);
    assert_eq!(finer.num_tets(), build_cube_mesh(4).unwrap().num_tets());
    for m in [&fine, &finer] {
        m.audit().unwrap();
        assert!((m.total_volume() - 8.0).abs() < 1e-12 * 8.0);
    }
}

#[test]
fn refinement_preserves_boundary_tags() {
    let coarse = build_cube_with_hole_mesh(1).unwrap();
    let fine = coarse.refine_uniform().unwrap();
    fine.audit().unwrap();
    assert_eq!(
        count_tag(&fine, BoundaryTag::Pec),
        4 * count_tag(&coarse, BoundaryTag::Pec)
    );
    assert_eq!(
        count_tag(&fine, BoundaryTag::Impedance),
        4 * count_tag(&coarse, BoundaryTag::Impedance)
    );
    assert!((fine.total_volume() - 7.0).abs() < 1e-12 * 7.0);
}

#[test]
fn element_map_matches_vertices_and_volume() {
    let mesh = build_cube_mesh(2).unwrap();
    for t in 0..mesh.num_tets() {
        let map = mesh.element_map(t).unwrap();
        let v = mesh.tet_vertices(t);
        let corners = [
            map.apply([0.0, 0.0, 0.0]),
            map.apply([1.0, 0.0, 0.0]),
            map.apply([0.0, 1.0, 0.0]),
            map.apply([0.0, 0.0, 1.0]),
        ];
        for (got, want) in corners.iter().zip(v.iter()) {
            for d in 0..3 {
                assert!((got[d] - want[d]).abs() < 1e-13);
            }
        }
        assert!((map.det.abs() - 6.0 * mesh.tet_volume(t)).abs() < 1e-12);
    }
}

#[test]
fn element_map_out_of_range_is_rejected() {
    let mesh = build_cube_mesh(1).unwrap();
    assert!(mesh.element_map(6).is_err());
}

#[test]
fn zero_resolution_is_rejected() {
    assert!(build_cube_mesh(0).is_err());
    assert!(build_cube_with_hole_mesh(0).is_err());
}

#[test]
fn dump_roundtrip() {
    let mesh = build_cube_with_hole_mesh(1).unwrap();
    let text = mesh.dump();
    let back = Mesh::parse_dump(&text).unwrap();
    assert_eq!(back.num_vertices(), mesh.num_vertices());
    assert_eq!(back.tets, mesh.tets);
    assert_eq!(back.boundary_faces.len(), mesh.boundary_faces.len());
    for (a, b) in back.vertices.iter().zip(mesh.vertices.iter()) {
        for d in 0..3 {
            assert!((a[d] - b[d]).abs() < 1e-15);
        }
    }
    back.audit().unwrap();
}

#[test]
fn face_normals_point_outward_on_boundary() {
    let mesh = build_cube_mesh(2).unwrap();
    for bf in &mesh.boundary_faces {
        let (n, area) = mesh.face_normal_area(bf.tet, bf.local_face);
        assert!(area > 0.0);
        // All boundary faces of the cube are axis aligned with |coord| = 1 on
        // the face plane; the outward normal points along that axis.
        let verts = curlfem_core::mesh::LOCAL_FACES[bf.local_face]
            .map(|s| mesh.vertices[mesh.tets[bf.tet][s]]);
        let axis = (0..3)
            .find(|&d| verts.iter().all(|v| (v[d].abs() - 1.0).abs() < 1e-10))
            .expect("axis-aligned boundary face");
        let sign = verts[0][axis].signum();
        assert!((n[axis] - sign).abs() < 1e-12, "normal {n:?} axis {axis}");
    }
}
