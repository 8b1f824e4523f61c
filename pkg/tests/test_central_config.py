import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import Util_Config as config
import Model as model
from Central_Config import (CCQuery, CCResult, Ordering, PLANAR, COLLINEAR, cc_residual, simultaneous_residual,
                            is_simultaneous, equilateral_cc, equilateral_side, equilateral_configuration,
                            equilateral_sigma, orientation_of, f_root, f_value, cc_index, restricted_spectrum,
                            restricted_hessian_on_tangent, rescale_to_inertia)
from Collinear_Solver import solve_collinear_ordering
from Configuration import Configuration
from Mass_System import MassSystem, PotentialParams
from Util_Errors import BracketError, ManevOnlyError, NotCentralError, ConfigError, InvalidParamsError
from conftest import random_configuration

mass_triples = st.lists(st.floats(min_value=0.1, max_value=10.0), min_size=3, max_size=3)


def test_equilateral_unit_masses_is_central(unit3):
    for b in (1.5, 2.0, 3.0, 4.5):
        pp = PotentialParams(a=1.0, b=b)
        _, residual = cc_residual(equilateral_configuration(unit3, 1.0), unit3, pp)
        assert residual < 1e-12


def test_random_configuration_is_not_central(rng, unit3, manev3):
    _, residual = cc_residual(random_configuration(rng, unit3), unit3, manev3)
    assert residual > 1e-3


def test_sigma_follows_euler_formula(unit3, manev3):
    cfg = equilateral_configuration(unit3, 1.0)
    sigma, _ = cc_residual(cfg, unit3, manev3)
    W, V = model.potential_terms(cfg, unit3, manev3)
    assert sigma == pytest.approx(-(W + 3.0 * V) / 2.0)


@settings(deadline=None, max_examples=20)
@given(masses=mass_triples)
def test_equilateral_is_simultaneous_for_any_masses(masses):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=1.0, b=3.0)
    sigma1, sigma2, res_W, res_V = simultaneous_residual(equilateral_configuration(ms, 1.0), ms, pp)
    scale = max(1.0, sigma1 * -1.0, sigma2 * -1.0) * max(masses)
    assert res_W < 1e-12 * scale
    assert res_V < 1e-12 * scale
    assert sigma1 < 0.0 and sigma2 < 0.0


@pytest.mark.parametrize("m2", [0.5, 1.0, 2.0, 5.0])
def test_symmetric_collinear_is_simultaneous(m2):
    ms = MassSystem.from_list([1.0, m2, 1.0])
    cfg = rescale_to_inertia(Configuration([[-1.0], [0.0], [1.0]]), ms, 1.0)
    _, _, res_W, res_V = simultaneous_residual(cfg, ms, PotentialParams(a=1.0, b=3.0))
    assert res_W < 1e-12
    assert res_V < 1e-12


def test_collinear_cc_of_U_is_not_simultaneous():
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    pp = PotentialParams(a=1.0, b=3.0)
    cc = solve_collinear_ordering(Ordering((1, 2, 3)), CCQuery(ms, pp))
    _, _, res_W, res_V = simultaneous_residual(cc.config, ms, pp)
    assert max(res_W, res_V) > 1e-4
    assert not is_simultaneous(cc.config, ms, pp)


def test_equilateral_side_examples():
    assert equilateral_side(MassSystem.equal(3), 1.0) == pytest.approx(1.0)
    assert equilateral_side(MassSystem.from_list([1.0, 2.0, 3.0]), 1.0) == pytest.approx(math.sqrt(6.0 / 11.0))


@settings(deadline=None, max_examples=20)
@given(masses=mass_triples, b=st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_equilateral_pair(masses, b):
    ms = MassSystem.from_list(masses)
    q = CCQuery(ms, PotentialParams(a=1.0, b=b))
    plus, minus = equilateral_cc(q)
    side = equilateral_side(ms, 1.0)
    for res in (plus, minus):
        assert res.residual < 1e-10
        assert model.moment_of_inertia(res.config, ms) == pytest.approx(1.0, rel=1e-12)
        i, j = np.triu_indices(3, k=1)
        distances = np.linalg.norm(res.config.positions[i] - res.config.positions[j], axis=1)
        assert distances == pytest.approx(np.full(3, side), rel=1e-12)
    assert orientation_of(plus.config) == 1
    assert orientation_of(minus.config) == -1
    assert minus.config.positions == pytest.approx(plus.config.reflected().positions)


def test_equilateral_requires_manev():
    with pytest.raises(ManevOnlyError):
        equilateral_cc(CCQuery(MassSystem.equal(3), PotentialParams(a=2.0, b=3.0)))
    with pytest.raises(ConfigError):
        equilateral_cc(CCQuery(MassSystem.equal(4), PotentialParams(a=1.0, b=3.0)))


def test_f_root_plug_in_identity():
    mtotal = 3.0
    root = f_root(-mtotal * 3.0 / 2.0, 2.0, mtotal)
    assert root.root == pytest.approx(1.0, rel=1e-13)
    assert root.certificate.unique
    assert root.certificate.f_at_zero == pytest.approx(mtotal * 2.0)
    assert float(f_value(0.0, -4.5, 2.0, mtotal)) == pytest.approx(6.0)


@settings(deadline=None, max_examples=20)
@given(masses=mass_triples, b=st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_f_root_recovers_equilateral_side(masses, b):
    ms = MassSystem.from_list(masses)
    plus, _ = equilateral_cc(CCQuery(ms, PotentialParams(a=1.0, b=b)))
    side = equilateral_side(ms, 1.0)
    assert plus.sigma == pytest.approx(equilateral_sigma(side, b, ms.total_mass), rel=1e-12)
    root = f_root(plus.sigma, b, ms.total_mass)
    assert root.certificate.sign_changes == 1
    assert root.root == pytest.approx(side, rel=1e-10)


def test_f_root_rejects_bad_sigma():
    with pytest.raises(BracketError):
        f_root(0.5, 2.0, 3.0)
    with pytest.raises(InvalidParamsError):
        f_root(-1.0, 1.0, 3.0)


def test_orderings():
    assert len(Ordering.all_canonical(2)) == 1
    assert len(Ordering.all_canonical(3)) == 3
    assert len(Ordering.all_canonical(4)) == 12
    order = Ordering((3, 1, 2))
    assert order.canonical() == Ordering((2, 1, 3))
    assert not order.is_canonical
    assert str(order) == "3-1-2"
    with pytest.raises(ConfigError):
        Ordering((1, 1, 2))


def _fd_restricted_tangent_matrix(cfg, ms, pp, step=1e-5):
    pos = cfg.positions
    flat = pos.reshape(-1)
    hess = np.zeros((flat.size, flat.size))
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = step
        up = model.grad_U_vector(Configuration.from_flat(flat + e, pos.shape[1]), ms, pp).reshape(-1)
        down = model.grad_U_vector(Configuration.from_flat(flat - e, pos.shape[1]), ms, pp).reshape(-1)
        hess[:, k] = (up - down) / (2 * step)
    W, V = model.potential_terms(pos, ms, pp)
    hess = hess + (pp.a * W + pp.b * V) / model.moment_of_inertia(pos, ms) * np.diag(ms.metric(pos.shape[1]))
    basis = model.tangent_basis(pos, ms)
    return basis.T @ (0.5 * (hess + hess.T)) @ basis


def test_equilateral_index_of_V_matches_finite_differences(unit3):
    pp_V = PotentialParams(a=1.0, b=3.0, alpha=0.0, beta=1.0)
    cfg = equilateral_configuration(unit3, 1.0)
    sigma, residual = cc_residual(cfg, unit3, pp_V)
    index = cc_index(CCResult(cfg, sigma, residual, "planar-equilateral"), unit3, pp_V, PLANAR)
    report = restricted_spectrum(cfg, unit3, pp_V, PLANAR)
    fd_eigs = np.linalg.eigvalsh(_fd_restricted_tangent_matrix(cfg, unit3, pp_V))
    assert int(np.sum(fd_eigs < -1e-4 * np.max(np.abs(fd_eigs)))) == index
    assert index == 0
    assert report.zero_modes == 1


def test_collinear_cc_is_a_minimum_on_the_line_and_a_saddle_in_the_plane(unit3, manev3):
    cc = solve_collinear_ordering(Ordering((1, 2, 3)), CCQuery(unit3, manev3))
    line = restricted_spectrum(cc.config, unit3, manev3, COLLINEAR)
    assert line.eigenvalues.size == 1
    assert np.min(line.eigenvalues) > 0.0
    assert cc_index(cc, unit3, manev3, COLLINEAR) == 0
    assert cc_index(cc, unit3, manev3, PLANAR) == 1
    assert cc.index == 1


def test_tangent_matrix_dimensions(unit3, manev3):
    cfg = equilateral_configuration(unit3, 1.0)
    A, basis = restricted_hessian_on_tangent(cfg, unit3, manev3, PLANAR)
    assert A.shape == (3, 3)
    assert basis.shape == (6, 3)


def test_cc_index_rejects_non_central(rng, unit3, manev3):
    cfg = rescale_to_inertia(random_configuration(rng, unit3), unit3, 1.0)
    sigma, residual = cc_residual(cfg, unit3, manev3)
    with pytest.raises(NotCentralError):
        cc_index(CCResult(cfg, sigma, residual, "planar"), unit3, manev3)


@settings(deadline=None, max_examples=25)
@given(masses=mass_triples, seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_central_residual_is_bounded_by_simultaneous_residuals(masses, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=1.0, b=3.0)
    cfg = random_configuration(np.random.default_rng(seed), ms)
    _, residual = cc_residual(cfg, ms, pp)
    _, _, res_W, res_V = simultaneous_residual(cfg, ms, pp)
    round_off = 1e-12 * max(1.0, float(np.max(np.abs(model.grad_U_vector(cfg, ms, pp)))))
    assert residual <= res_W + res_V + round_off


@pytest.mark.parametrize("m2", [0.5, 1.0, 2.0, 5.0])
def test_simultaneous_configuration_is_central(m2):
    ms = MassSystem.from_list([1.0, m2, 1.0])
    pp = PotentialParams(a=1.0, b=3.0)
    ordering = Ordering((1, 2, 3))
    shape = solve_collinear_ordering(ordering, CCQuery(ms, pp.only_b_term())).config
    assert is_simultaneous(shape, ms, pp)
    assert cc_residual(shape, ms, pp)[1] <= config.SIMULTANEOUS_TOL
    solved = solve_collinear_ordering(ordering, CCQuery(ms, pp))
    assert np.sqrt(model.moment_of_inertia(solved.config.positions - shape.positions, ms)) < 1e-10
