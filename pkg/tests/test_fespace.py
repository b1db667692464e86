import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afemtopo import fespace as fe
from afemtopo.mesh import bisect, from_arrays, uniform_refine

from conftest import ALL_WALL, channel_spec, unit_square


def random_mesh(rng, n=2, rounds=3):
    m = unit_square(n)
    for _ in range(rounds):
        m = bisect(m, rng.choice(m.n_elements, size=max(1, m.n_elements // 4), replace=False))
    return m


def random_homogeneous_cr(mesh, rng):
    v = rng.standard_normal((mesh.n_edges, 2))
    v[mesh.is_boundary_edge] = 0.0
    return v


# --- boundary interpolation ---------------------------------------------------------

def test_boundary_mean_of_parabola_on_short_edge():
    m = from_arrays([[0, 0.25], [0, 0.5], [1, 0.25]], [[0, 1, 2]], ALL_WALL)
    ids, vals = fe.cr_boundary_values(lambda x, y: np.stack([4 * y * (1 - y), 0 * y], -1), m, ["wall"])
    left = ids[np.isclose(m.edge_midpoints[ids, 0], 0.0)]
    # closed form: mean of 4y - 4y^2 over [1/4, 1/2]
    F = lambda y: 2 * y ** 2 - 4 * y ** 3 / 3
    exact = (F(0.5) - F(0.25)) / 0.25
    assert exact == pytest.approx(0.9166666666666666)
    assert vals[np.searchsorted(ids, left[0]), 0] == pytest.approx(exact, abs=1e-14)


def test_boundary_values_zero_and_constant():
    m = unit_square(3, channel_spec())
    ids, vals = fe.cr_boundary_values(None, m, ["inlet", "wall"])
    assert np.all(vals == 0) and len(ids) == 3 * 3
    ids, vals = fe.cr_boundary_values(lambda x, y: np.array([2.0, -1.0]), m, ["inlet"])
    assert len(ids) == 3 and np.allclose(vals, [2.0, -1.0])


# --- prolongation ------------------------------------------------------------------

def test_prolongation_constant_and_linear(rng):
    m = unit_square(3)
    r = bisect(uniform_refine(m), [0, 3])
    r0 = r.lineage.parent
    phi = np.full(r0.n_vertices, 0.5)
    assert np.all(fe.p1_prolongate(r0, r, phi) == 0.5)
    lin = fe.p1_prolongate(r0, r, r0.vertices[:, 0].copy())
    assert np.allclose(lin, r.vertices[:, 0], atol=1e-15)


def test_prolongation_preserves_integral(rng):
    m = random_mesh(rng)
    r = bisect(m, rng.choice(m.n_elements, 5, replace=False))
    phi = rng.uniform(size=m.n_vertices)
    a, b = fe.p1_integral(m, phi), fe.p1_integral(r, fe.p1_prolongate(m, r, phi))
    assert b == pytest.approx(a, rel=1e-12)


def test_prolongation_requires_lineage():
    from afemtopo.mesh import LineageError
    m = unit_square(2)
    with pytest.raises(LineageError):
        fe.p1_prolongate(unit_square(2), uniform_refine(m), np.zeros(9))


# --- CR fields ---------------------------------------------------------------------

@settings(max_examples=30)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_interior_edge_mean_jump_vanishes(seed):
    rng = np.random.default_rng(seed)
    m = random_mesh(rng)
    v = rng.standard_normal((m.n_edges, 2))
    means = fe.edge_jump_means(m, fe.cr_to_dg(m, v))
    assert np.abs(means).max() <= 1e-12 * max(1.0, np.abs(v).max())


def test_cr_interpolant_reproduces_linear_fields():
    m = uniform_refine(unit_square(2))
    f = lambda x, y: np.stack([1 + 2 * x - y, 3 * y], -1)
    v = fe.cr_interpolate(m, f)
    g = fe.cr_gradient(m, v)
    assert np.allclose(g[:, 0], [2, -1]) and np.allclose(g[:, 1], [0, 3])
    assert np.allclose(fe.cr_divergence(m, v), 5.0)


# --- enrichment into conforming P2 -----------------------------------------------------

def test_enrichment_identity_on_continuous_p1():
    m = uniform_refine(unit_square(2))
    bubble = lambda x, y: np.stack([x * (1 - x) * y * (1 - y)] * 2, -1)
    # a continuous P1 field vanishing on the boundary: its nodal interpolant
    x, y = m.vertices.T
    nodal = bubble(x, y)
    nodal[np.unique(m.edges[m.is_boundary_edge])] = 0.0
    v = 0.5 * (nodal[m.edges[:, 0]] + nodal[m.edges[:, 1]])
    vert, mids = fe.enrich_cr_to_conforming(v, m)
    assert np.allclose(vert, nodal, atol=1e-15)
    assert np.allclose(fe.p2_at(m, vert, mids), fe.cr_at(m, v), atol=1e-15)


def test_enrichment_of_zero():
    m = unit_square(2)
    vert, mids = fe.enrich_cr_to_conforming(np.zeros((m.n_edges, 2)), m)
    assert not vert.any() and not mids.any()


def test_enrichment_ratio_on_eight_triangles(rng):
    m = unit_square(2)
    ratios = [fe.enrichment_ratio(m, random_homogeneous_cr(m, rng)) for _ in range(20)]
    print(f"enrichment constant on the 8-triangle mesh: max ratio {max(ratios):.4f}")
    assert np.isfinite(ratios).all() and max(ratios) < 1.0


def enrichment_max_ratio(mesh, rng, n=100):
    return max(fe.enrichment_ratio(mesh, random_homogeneous_cr(mesh, rng)) for _ in range(n))


def test_enrichment_constant_level_independent():
    rng = np.random.default_rng(7)
    m = random_mesh(rng, n=2, rounds=2)
    ratios = []
    for _ in range(3):
        ratios.append(enrichment_max_ratio(m, rng))
        m = bisect(m, rng.choice(m.n_elements, size=m.n_elements // 3, replace=False))
    print("enrichment max ratios per level:", ", ".join(f"{r:.4f}" for r in ratios))
    for a, b in zip(ratios, ratios[1:]):
        assert b <= 1.2 * a


def test_discrete_sobolev_ratio_bounded():
    rng = np.random.default_rng(3)
    m = unit_square(2)
    ratios = []
    for _ in range(4):
        r = max(fe.cr_lp_norm(m, v, 4) / fe.cr_energy_norm(m, v)
                for v in (random_homogeneous_cr(m, rng) for _ in range(20)))
        ratios.append(r)
        m = uniform_refine(m)
    print("L4 / broken H1 ratios:", ", ".join(f"{r:.4f}" for r in ratios))
    assert max(ratios) <= 2.0 * ratios[0]


def test_p1_mass_and_stiffness_consistency():
    m = unit_square(3)
    M, K = fe.p1_mass(m), fe.p1_stiffness(m)
    one = np.ones(m.n_vertices)
    assert one @ M @ one == pytest.approx(1.0)
    assert np.allclose(K @ one, 0.0, atol=1e-13)
    x = m.vertices[:, 0]
    assert x @ K @ x == pytest.approx(1.0)
