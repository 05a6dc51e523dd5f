import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdwg.mesh import (
    KUHN_TETS,
    VoxelDomainSpec,
    boundary_components,
    build_mesh,
    face_frame,
    face_frames,
    mesh_from_arrays,
)
from pdwg.problems import example

from conftest import UNIT_CUBE

L_SHAPE = VoxelDomainSpec(((0, 0, 0), (2, 2, 1)), (((1, 0, 0), (2, 1, 1)),))
CAVITY = VoxelDomainSpec(((0, 0, 0), (3, 3, 3)), (((1, 1, 1), (2, 2, 2)),))


def test_single_cube_census(cube1):
    assert cube1.n_elements == 6
    assert len(cube1.vertices) == 8
    assert cube1.boundary_faces.size == 12
    assert cube1.interior_faces.size == 6
    np.testing.assert_allclose(cube1.volumes, 1 / 6, rtol=1e-14)


def test_kuhn_tets_share_the_main_diagonal():
    # corner 0 is (0,0,0) and corner 7 is (1,1,1)
    assert all(0 in t and 7 in t for t in KUHN_TETS)


def test_l_shape_has_18_elements():
    assert build_mesh(L_SHAPE, 1).n_elements == 18


@pytest.mark.parametrize("spec", [UNIT_CUBE, L_SHAPE, CAVITY])
@pytest.mark.parametrize("n", [1, 2])
def test_geometric_invariants(spec, n):
    m = build_mesh(spec, n)
    # closed-surface identity per element
    s = np.einsum("ef,efx->ex", m.face_area[m.elem_faces], m.outward_normals())
    assert np.abs(s).max() <= 1e-12
    assert m.volumes.sum() == pytest.approx(spec.volume, rel=1e-12)
    assert np.all(m.volumes > 0)
    np.testing.assert_allclose(m.volumes, (spec.unit / n) ** 3 / 6, rtol=1e-12)
    # one or two neighbours, opposite signs on interior faces
    inner = m.interior_faces
    e0, e1 = m.face_elems[inner].T
    l0, l1 = m.face_local[inner].T
    assert np.all(m.elem_face_sign[e0, l0] == -m.elem_face_sign[e1, l1])
    assert np.all(m.face_elems[m.boundary_faces, 1] == -1)


def test_refinement_multiplies_elements_by_eight():
    assert build_mesh(L_SHAPE, 2).n_elements == 8 * build_mesh(L_SHAPE, 1).n_elements
    assert build_mesh(UNIT_CUBE, 4).n_elements == 8 * build_mesh(UNIT_CUBE, 2).n_elements


def test_diameter_is_longest_edge(cube2):
    np.testing.assert_allclose(cube2.diameters, np.sqrt(3) / 2, rtol=1e-14)
    assert cube2.h == pytest.approx(np.sqrt(3) / 2)


def test_boundary_components_cube(cube1):
    comps = boundary_components(cube1)
    assert len(comps) == 1 and comps[0].exterior


def test_boundary_components_cavity():
    m = build_mesh(CAVITY, 1)
    comps = boundary_components(m)
    assert len(comps) == 2
    assert comps[0].exterior and not comps[1].exterior
    assert comps[1].faces.size == 6 * 2  # the cavity's six squares
    # exterior holds the face with the smallest centroid x
    bf = m.boundary_faces
    assert m.face_component[bf[np.argmin(m.face_centroid[bf, 0])]] == 0
    # partition of boundary faces
    allf = np.sort(np.concatenate([c.faces for c in comps]))
    np.testing.assert_array_equal(allf, bf)


def test_through_hole_has_one_component():
    dom = example(4).domain
    m = build_mesh(dom, 1)
    assert len(boundary_components(m)) == 1


def test_rejects_disconnected_and_empty():
    split = VoxelDomainSpec(((0, 0, 0), (3, 1, 1)), (((1, 0, 0), (2, 1, 1)),))
    with pytest.raises(ValueError):
        build_mesh(split, 1)
    with pytest.raises(ValueError):
        build_mesh(VoxelDomainSpec(((0, 0, 0), (1, 1, 1)), (((0, 0, 0), (1, 1, 1)),)), 1)
    with pytest.raises(ValueError):
        build_mesh(UNIT_CUBE, 0)


def test_refinement_for_lattice():
    assert UNIT_CUBE.refinement_for(4) == 4
    half = VoxelDomainSpec(((0, 0, 0), (1, 1, 1)), unit=0.5)
    assert half.refinement_for(4) == 2
    with pytest.raises(ValueError):
        half.refinement_for(1)
    assert VoxelDomainSpec.from_dict(half.to_dict()) == half


def test_face_frame_examples():
    n, t1, t2 = face_frame([[0, 0, 0], [0, 0, 1], [0, 1, 0]])
    np.testing.assert_allclose(n, [-1, 0, 0])
    assert abs(t1[0]) < 1e-15 and abs(t2[0]) < 1e-15
    assert np.linalg.norm(t1) == pytest.approx(1) and np.linalg.norm(t2) == pytest.approx(1)
    assert abs(t1 @ t2) < 1e-15
    again = face_frame([[0, 0, 0], [0, 0, 1], [0, 1, 0]])
    for a, b in zip((n, t1, t2), again):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        face_frame([[0, 0, 0], [1, 1, 1], [2, 2, 2]])


@settings(max_examples=200, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_face_frames_right_handed(v):
    n = np.array(v) / np.linalg.norm(v)
    t1, t2 = face_frames(n[None])[0]
    F = np.stack([n, t1, t2])
    np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(F) == pytest.approx(1.0)
    np.testing.assert_allclose(np.cross(n, t1), t2, atol=1e-15)


def test_mesh_from_arrays_flips_orientation():
    X = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    m = mesh_from_arrays(X, [[0, 2, 1, 3]])
    assert m.volumes[0] == pytest.approx(1 / 6)
    assert m.boundary_faces.size == 4
