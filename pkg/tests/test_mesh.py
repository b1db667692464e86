import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afemtopo.bench import preset
from afemtopo.mesh import (
    ConsistencyError, GeometryError, TAGS, TaggingError, bisect, build_rect_mesh, mesh_metrics,
    uniform_refine,
)

from conftest import ALL_WALL, channel_spec, single_triangle, unit_square


def element_set(mesh):
    """Elements as a set of sorted coordinate triples (geometry only)."""
    pts = np.round(mesh.vertices[mesh.elements], 12)
    return {tuple(sorted(map(tuple, t))) for t in pts}


def test_smallest_structured_mesh_counts():
    m = unit_square(1)
    assert (m.n_vertices, m.n_elements, m.n_edges) == (4, 2, 5)
    assert np.count_nonzero(m.is_boundary_edge) == 4


def test_two_by_two_counts():
    m = unit_square(2)
    assert (m.n_vertices, m.n_elements) == (9, 8)
    m.check_conforming()


def test_initial_refinement_edge_is_longest():
    m = build_rect_mesh(((0, 2), (0, 1)), 5, 3, ALL_WALL)
    p = m.vertices[m.elements]
    ref = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    for i in range(3):
        other = np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1)
        assert np.all(ref >= other - 1e-12)


def test_degenerate_extents_rejected():
    with pytest.raises(GeometryError):
        build_rect_mesh(((1.0, 1.0), (0.0, 1.0)), 2, 2, ALL_WALL)


def test_untagged_boundary_rejected():
    with pytest.raises(TaggingError):
        build_rect_mesh(((0, 1), (0, 1)), 2, 2, [("inlet", lambda x, y: x < 1e-10)])


def test_first_matching_tag_wins():
    m = build_rect_mesh(((0, 1), (0, 1)), 4, 4, channel_spec())
    mid = m.edge_midpoints[m.is_boundary_edge]
    tags = m.edge_tags[m.is_boundary_edge]
    assert np.all(tags[mid[:, 0] < 1e-12] == TAGS.index("inlet"))
    assert np.all(tags[mid[:, 0] > 1 - 1e-12] == TAGS.index("outlet"))


def test_shared_diagonal_closure():
    m = unit_square(1)
    # the longest edge of both triangles is the diagonal
    r = bisect(m, [0])
    assert r.n_elements == 4 and r.n_vertices == 5
    r.check_conforming()


def test_single_triangle_bisection():
    m = single_triangle()
    r = bisect(m, [0])
    assert r.n_elements == 2 and r.n_vertices == 4
    new = r.n_vertices - 1
    assert all(new in t for t in r.elements)
    assert np.allclose(r.vertices[new], [0.5, 0.5])


def test_mark_all_twice_equals_uniform():
    m = build_rect_mesh(((0, 1), (0, 1)), 3, 2, ALL_WALL)
    twice = bisect(bisect(m, np.arange(m.n_elements)), np.arange(2 * m.n_elements))
    assert element_set(twice) == element_set(uniform_refine(m))


def test_uniform_refine_two_to_eight():
    r = uniform_refine(unit_square(1))
    assert r.n_elements == 8
    r.check_conforming()


def test_uniform_vertex_growth_about_four():
    m = unit_square(8)
    r = uniform_refine(uniform_refine(m))
    ratio = r.n_vertices / uniform_refine(m).n_vertices
    assert 3.5 < ratio < 4.2


def test_metrics_right_triangle_and_bisection():
    m = single_triangle()
    met = mesh_metrics(m)
    assert met["h_elem"][0] == pytest.approx(np.sqrt(0.5))
    legs = np.isclose(met["h_edge"], 1.0)
    assert legs.sum() == 2
    r = bisect(m, [0])
    assert np.allclose(r.h_elem, np.sqrt(0.5) / np.sqrt(2))


def test_normals_unit_and_outward():
    m = unit_square(3)
    n = m.edge_normals
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    b = m.is_boundary_edge
    outward = m.edge_midpoints[b] - 0.5
    assert np.all(np.einsum("ij,ij->i", n[b], outward) > 0)
    # interior normals point from T+ into T-
    t_plus, t_minus = m.edge_elems[~b].T
    d = m.centroids[t_minus] - m.centroids[t_plus]
    assert np.all(np.einsum("ij,ij->i", n[~b], d) > 0)


def test_boundary_halves_inherit_tag():
    m = build_rect_mesh(((0, 1), (0, 1)), 2, 2, channel_spec())
    r = uniform_refine(m)
    mid = r.edge_midpoints[r.is_boundary_edge]
    tags = r.edge_tags[r.is_boundary_edge]
    assert np.all(tags[mid[:, 0] < 1e-12] == TAGS.index("inlet"))


def test_old_vertices_are_prefix():
    m = unit_square(3)
    r = bisect(m, [0, 5, 7])
    assert np.array_equal(r.vertices[: m.n_vertices], m.vertices)
    assert r.lineage.parent is m


def test_corrupted_labels_detected():
    m = unit_square(2)
    with pytest.raises(ConsistencyError):
        from afemtopo.mesh import _closure
        cut = np.zeros(m.n_edges, dtype=bool)
        cut[m.elem_edges[0, 1]] = True
        _closure(m, cut, max_sweeps=0)


def test_left_inflow_initial_mesh_size():
    m = preset("left_inflow").initial_mesh()
    print(f"left_inflow initial mesh: {m.n_vertices} vertices (reference 1441)")
    assert abs(m.n_vertices - 1441) <= 0.15 * 1441
    m.check_conforming()


@settings(max_examples=25)
@given(seed=st.integers(0, 2 ** 32 - 1), frac=st.floats(0.02, 0.5))
def test_random_bisection_rounds_stay_conforming(seed, frac):
    rng = np.random.default_rng(seed)
    m0 = unit_square(2)
    angle0 = m0.min_angle()
    m = m0
    for _ in range(10):
        k = max(1, int(frac * m.n_elements))
        m = bisect(m, rng.choice(m.n_elements, size=k, replace=False))
    m.check_conforming()
    # every edge has one or two neighbours and interior edges exactly two
    assert np.all((m.edge_elems[:, 1] >= 0) | m.is_boundary_edge)
    assert abs(m.area - 1.0) <= 1e-12
    assert m.min_angle() >= 0.5 * angle0
    assert np.all(m.areas > 0)


@settings(max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_children_partition_parent(seed):
    rng = np.random.default_rng(seed)
    m = unit_square(3)
    r = bisect(m, rng.choice(m.n_elements, size=4, replace=False))
    summed = np.bincount(r.lineage.element_parent, weights=r.areas, minlength=m.n_elements)
    assert np.allclose(summed, m.areas, rtol=1e-12, atol=0)
