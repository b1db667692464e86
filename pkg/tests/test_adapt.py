import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afemtopo.adapt import AfemConfig, afem_drive, band_fraction, combined_mark, doerfler_mark
from afemtopo.estimator import Indicators
from afemtopo.phasefield import OptParams, OptState, optimize_on_mesh
from afemtopo.problem import ProblemSpec

from conftest import channel_spec


def test_doerfler_examples():
    assert list(doerfler_mark([16, 9, 4, 1], 0.5)) == [0]
    assert list(doerfler_mark([16, 9, 4, 1], 1.0)) == [0, 1, 2, 3]
    assert list(doerfler_mark([0, 3, 0, 2], 1.0)) == [1, 3]
    assert list(doerfler_mark([1, 5, 2, 5], 1e-9)) == [1]


def test_doerfler_ties_prefer_lower_id():
    assert list(doerfler_mark([1, 1, 1, 1], 0.5)) == [0, 1]


def test_doerfler_all_zero_is_singleton():
    assert list(doerfler_mark(np.zeros(5), 0.6)) == [0]


@pytest.mark.parametrize("bad", [([1.0, -1.0], 0.5), ([1.0, np.nan], 0.5), ([1.0], 0.0), ([1.0], 1.5), ([], 0.5)])
def test_doerfler_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        doerfler_mark(*bad)


@settings(max_examples=1000)
@given(
    eta=st.lists(st.floats(0, 1e6, allow_subnormal=False), min_size=1, max_size=60),
    theta=st.floats(1e-6, 1.0),
)
def test_doerfler_postconditions(eta, theta):
    eta = np.asarray(eta)
    marked = doerfler_mark(eta, theta)
    total = math.fsum(eta)
    assert math.fsum(eta[marked]) >= theta * total
    assert np.argmax(eta) in marked
    # minimal along the greedy order: dropping the smallest marked value breaks the bound
    if len(marked) > 1 and total > 0:
        smallest = marked[np.lexsort((-marked, eta[marked]))[0]]
        rest = np.setdiff1d(marked, [smallest])
        assert math.fsum(eta[rest]) < theta * total


def test_combined_mark_examples():
    cfg = AfemConfig(theta1=0.5, theta2=0.5)
    a = Indicators(np.array([10.0, 0, 0, 0]))
    b = Indicators(np.array([0, 0, 0, 10.0]))
    assert list(combined_mark(a, b, cfg)) == [0, 3]
    assert list(combined_mark(a, a, cfg)) == list(doerfler_mark(a.eta_sq, 0.5))
    z = Indicators(np.zeros(4))
    assert list(combined_mark(z, b, cfg)) == [0, 3]
    with pytest.raises(ValueError):
        combined_mark(a, Indicators(np.ones(3)), cfg)


@pytest.mark.parametrize("bad", [dict(K=0), dict(theta1=0), dict(theta2=1.2), dict(strategy="x"),
                                 dict(solver="cg"), dict(eta_tol=-1.0)])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        AfemConfig(**bad)


def small_spec(**opt):
    inflow = lambda x, y: np.stack([4 * y * (1 - y), 0 * y], -1)
    return ProblemSpec(name="channel", extents=((0, 1), (0, 1)), nx=6, ny=6, boundary_spec=channel_spec(),
                       inflow=inflow, opt=OptParams(**{"n_outer": 3, "n_inner": 2, **opt}))


def test_single_level_equals_fixed_mesh_optimization():
    spec = small_spec()
    report = afem_drive(spec, AfemConfig(K=1))
    mesh = spec.initial_mesh()
    phi, u, p, state = optimize_on_mesh(mesh, spec.initial_phi(mesh), OptState.initial(spec.opt),
                                        spec.params, spec.opt, spec.bc())
    assert len(report.levels) == 1
    assert np.array_equal(report.phi, phi) and np.array_equal(report.u, u)
    assert [r["lagrangian"] for r in report.history] == [r["lagrangian"] for r in state.history]


def test_levels_refine_and_carry_multiplier():
    report = afem_drive(small_spec(), AfemConfig(K=3))
    counts = [lv.n_vertices for lv in report.levels]
    assert counts[0] < counts[1] < counts[2]
    assert [r["level"] for r in report.history] == [0] * 3 + [1] * 3 + [2] * 3
    # the multiplier is continued across levels while the penalty restarts
    assert report.history[3]["ell"] != 0.0 and report.history[3]["zeta"] == 100.0
    assert all("eta2" in r and "seconds" in r for r in report.history)


def test_uniform_strategy_quadruples_elements():
    report = afem_drive(small_spec(), AfemConfig(K=2, strategy="uniform"))
    assert report.levels[1].n_elements == 4 * report.levels[0].n_elements


def test_eta_tolerance_stops_early():
    report = afem_drive(small_spec(), AfemConfig(K=4, eta_tol=1e6))
    assert len(report.levels) == 1


def test_level_overrides_are_applied():
    report = afem_drive(small_spec(), AfemConfig(K=2, level_opt=[{"n_outer": 1}, {}]))
    assert [r["level"] for r in report.history] == [0, 1, 1, 1]


def test_band_fraction_counts_straddling_elements():
    spec = small_spec()
    m = spec.initial_mesh()
    phi = (m.vertices[:, 0] > 0.5).astype(float)
    everything = np.arange(m.n_elements)
    frac = band_fraction(m, phi, everything)
    straddle = np.ptp(phi[m.elements], axis=1) > 0
    assert frac == pytest.approx(straddle.mean())
    assert band_fraction(m, np.full(m.n_vertices, 0.5), everything) == 1.0


@pytest.mark.slow
def test_state_estimator_decreases_on_benchmark_a(run_a_adaptive):
    eta2 = [lv.eta2 for lv in run_a_adaptive.levels]
    print("left_inflow eta2 per level:", ", ".join(f"{e:.4e}" for e in eta2))
    assert all(b < a for a, b in zip(eta2, eta2[1:]))


@pytest.mark.slow
def test_marking_concentrates_at_interface(run_a_adaptive):
    fracs = [lv.band_fraction for lv in run_a_adaptive.levels[1:-1]]
    print("left_inflow marked-in-band fraction at levels >= 1:", ", ".join(f"{f:.3f}" for f in fracs))
    assert min(fracs) >= 0.5
