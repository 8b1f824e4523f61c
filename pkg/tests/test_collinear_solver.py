import math
import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

import Model as model
from Central_Config import CCQuery, Ordering, acceptance_tolerance, cc_residual
from Configuration import Configuration
from Collinear_Solver import (solve_collinear_ordering, solve_collinear_all, positions_from_gaps, gaps_of,
                              gap_ratios, euler_collinear_homogeneous, simultaneous_gap)
from Mass_System import MassSystem, PotentialParams
from Util_Errors import NoConvergenceError, DegenerateTermError, ConfigError
from conftest import random_configuration

exponent_pairs = st.sampled_from([(1.0, 2.0), (1.0, 3.0), (0.5, 2.5)])


def test_two_equal_masses():
    res = solve_collinear_ordering(Ordering((1, 2)), CCQuery(MassSystem.equal(2), PotentialParams(a=1.0, b=3.0)))
    assert res.config.positions[:, 0] == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)], abs=1e-14)


def test_three_equal_masses_symmetric():
    res = solve_collinear_ordering(Ordering((1, 2, 3)), CCQuery(MassSystem.equal(3), PotentialParams(a=1.0, b=3.0)))
    x = res.config.positions[:, 0]
    assert x[1] == pytest.approx(0.0, abs=1e-14)
    assert x[0] == pytest.approx(-x[2], abs=1e-14)
    assert res.residual < 1e-12


def test_unequal_masses_match_grid_search():
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    pp = PotentialParams(a=1.0, b=3.0)
    ordering = Ordering((1, 2, 3))
    res = solve_collinear_ordering(ordering, CCQuery(ms, pp))
    assert res.residual < 1e-12 * max(1.0, float(np.max(np.abs(model.grad_U_vector(res.config, ms, pp)))))

    def energy(t):
        return model.potential_U(positions_from_gaps(np.array([t, 1.0 - t]), ordering, ms, 1.0), ms, pp)

    grid = np.linspace(0.01, 0.99, 981)
    coarse = grid[int(np.argmin([energy(t) for t in grid]))]
    best = scipy.optimize.minimize_scalar(energy, bounds=(coarse - 0.002, coarse + 0.002), method="bounded",
                                          options={"xatol": 1e-10})
    expected = gaps_of(Configuration(positions_from_gaps(np.array([best.x, 1.0 - best.x]), ordering, ms, 1.0)),
                       ordering)
    assert gaps_of(res.config, ordering) == pytest.approx(expected, abs=1e-4)


@settings(deadline=None, max_examples=5)
@given(masses=st.lists(st.floats(min_value=0.5, max_value=2.0), min_size=4, max_size=4), ab=exponent_pairs)
def test_moulton_count(masses, ab):
    pp = PotentialParams(a=ab[0], b=ab[1])
    for n, expected in ((2, 1), (3, 3), (4, 12)):
        ms = MassSystem.from_list(masses[:n])
        results = solve_collinear_all(CCQuery(ms, pp))
        assert len(results) == expected
        assert len({r.ordering.perm for r in results}) == expected
        assert all(r.ordering.is_canonical for r in results)
        for r in results:
            assert r.residual < 1e-10
            assert Ordering.of_configuration(r.config).canonical() == r.ordering
            assert model.moment_of_inertia(r.config, ms) == pytest.approx(1.0, rel=1e-12)
            assert np.abs(r.config.center_of_mass(ms)).max() < 1e-12


def test_parallel_and_serial_agree():
    ms = MassSystem.from_list([1.0, 2.0, 3.0, 4.0])
    q = CCQuery(ms, PotentialParams(a=1.0, b=3.0))
    serial = solve_collinear_all(q, workers=1)
    parallel = solve_collinear_all(q, workers=4)
    for a, b in zip(serial, parallel):
        assert a.ordering == b.ordering
        assert np.array_equal(a.config.positions, b.config.positions)


def test_enumeration_cap():
    with pytest.raises(ConfigError):
        solve_collinear_all(CCQuery(MassSystem.equal(7), PotentialParams(a=1.0, b=3.0)))


def test_failures_are_tagged_by_ordering():
    q = CCQuery(MassSystem.from_list([1.0, 2.0, 3.0]), PotentialParams(a=1.0, b=3.0), grad_tol=1e-30, max_iter=1)
    with pytest.raises(NoConvergenceError, match="^ordering 1-2-3") as info:
        solve_collinear_all(q)
    assert info.value.ordering == (1, 2, 3)


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_euler_homogeneous_symmetric_masses(c):
    ordering = Ordering((1, 2, 3))
    cfg = euler_collinear_homogeneous(MassSystem.equal(3), c, ordering)
    assert gap_ratios(cfg, ordering) == pytest.approx([1.0, 1.0], abs=1e-12)


def test_euler_ratio_depends_on_exponent():
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    ordering = Ordering((1, 2, 3))
    newton = gap_ratios(euler_collinear_homogeneous(ms, 1.0, ordering), ordering)
    cubic = gap_ratios(euler_collinear_homogeneous(ms, 3.0, ordering), ordering)
    assert abs(newton[1] - cubic[1]) > 1e-3


def test_gap_ratios_scale_only_for_homogeneous_potentials():
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    ordering = Ordering((1, 2, 3))
    homogeneous = PotentialParams.homogeneous(3.0)
    small = solve_collinear_ordering(ordering, CCQuery(ms, homogeneous, 1.0)).config
    large = solve_collinear_ordering(ordering, CCQuery(ms, homogeneous, 4.0)).config
    assert gap_ratios(small, ordering) == pytest.approx(gap_ratios(large, ordering), rel=1e-10)

    manev = PotentialParams(a=1.0, b=3.0)
    small = solve_collinear_ordering(ordering, CCQuery(ms, manev, 1.0)).config
    large = solve_collinear_ordering(ordering, CCQuery(ms, manev, 4.0)).config
    assert np.max(np.abs(gap_ratios(small, ordering) - gap_ratios(large, ordering))) > 1e-6
    assert cc_residual(large, ms, manev)[1] < 1e-10


@pytest.mark.parametrize("m2", [0.5, 1.0, 2.0, 5.0])
def test_symmetric_masses_have_zero_gap(m2):
    gap = simultaneous_gap(MassSystem.from_list([1.0, m2, 1.0]), PotentialParams(a=1.0, b=3.0), Ordering((1, 2, 3)))
    assert gap < 1e-12


def test_unequal_masses_have_positive_gap():
    gap = simultaneous_gap(MassSystem.from_list([1.0, 2.0, 3.0]), PotentialParams(a=1.0, b=3.0), Ordering((1, 2, 3)))
    assert gap > 1e-3


def test_gap_needs_both_terms():
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateTermError):
        simultaneous_gap(ms, PotentialParams(a=1.0, b=3.0, alpha=0.0), Ordering((1, 2, 3)))
    with pytest.raises(DegenerateTermError):
        simultaneous_gap(ms, PotentialParams(a=0.0, b=3.0), Ordering((1, 2, 3)))


@pytest.mark.parametrize("masses", [[1.0, 2.0, 3.0, 4.0], [100.0, 200.0, 300.0], [0.01, 0.02, 0.05]])
def test_every_accepted_record_meets_its_tolerance(masses):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=1.0, b=3.0)
    q = CCQuery(ms, pp)
    results = solve_collinear_all(q)
    assert len(results) == math.factorial(ms.n) // 2
    for r in results:
        assert r.tolerance == acceptance_tolerance(q.grad_tol, r.config, ms, pp)
        assert r.tolerance >= q.grad_tol
        assert r.residual <= r.tolerance
        assert r.to_dict()["tolerance"] == r.tolerance


def test_tolerance_is_grad_tol_when_gradient_is_small():
    ms = MassSystem.from_list([0.01, 0.02, 0.05])
    pp = PotentialParams(a=1.0, b=3.0)
    res = solve_collinear_ordering(Ordering((1, 2, 3)), CCQuery(ms, pp))
    assert float(np.max(np.abs(model.grad_U_vector(res.config, ms, pp)))) < 1.0
    assert res.tolerance == 1e-12
    assert res.residual <= 1e-12


def test_residual_matches_direct_evaluation(rng, manev3):
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    for _ in range(5):
        cfg = random_configuration(rng, ms)
        sigma, residual = cc_residual(cfg, ms, manev3)
        direct = model.grad_U_vector(cfg, ms, manev3) - sigma * 2.0 * ms.m[:, None] * cfg.positions
        assert residual == pytest.approx(float(np.max(np.abs(direct))), rel=1e-10)
