import math
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

import Model as model
from Central_Config import equilateral_configuration, rescale_to_inertia
from Configuration import Configuration, PhaseState
from Integrator import integrate
from Mass_System import MassSystem, PotentialParams
from Util_Errors import CollisionError, NotOnSphereError, ConstraintError, InvalidParamsError, InvalidMassError
from conftest import circular_two_body, random_configuration

masses_3 = st.lists(st.floats(min_value=0.2, max_value=5.0), min_size=3, max_size=3)
exponents = st.sampled_from([(1.0, 2.0), (1.0, 3.0), (0.5, 2.5), (1.0, 4.0)])
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def test_two_unit_masses_unit_distance():
    ms = MassSystem.equal(2)
    cfg = Configuration([[-0.5, 0.0], [0.5, 0.0]])
    pp = PotentialParams(a=1.0, b=2.0)
    assert model.potential_W(cfg, ms, pp) == pytest.approx(1.0)
    assert model.potential_V(cfg, ms, pp) == pytest.approx(1.0)
    assert model.potential_U(cfg, ms, pp) == pytest.approx(2.0)


def test_V_at_distance_two():
    ms = MassSystem.equal(2)
    cfg = Configuration([[-1.0, 0.0], [1.0, 0.0]])
    assert model.potential_V(cfg, ms, PotentialParams(a=1.0, b=2.0)) == pytest.approx(0.25)


def test_W_is_constant_for_a_zero(rng):
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    pp = PotentialParams(a=0.0, b=2.0)
    for _ in range(3):
        assert model.potential_W(random_configuration(rng, ms), ms, pp) == pytest.approx(11.0)


def test_equilateral_side_two_W():
    ms = MassSystem.equal(3)
    angles = np.pi / 2 + np.arange(3) * 2 * np.pi / 3
    cfg = Configuration(2 / math.sqrt(3) * np.column_stack([np.cos(angles), np.sin(angles)]))
    assert model.potential_W(cfg, ms, PotentialParams(a=1.0, b=2.0)) == pytest.approx(1.5)


def test_single_term_reductions(rng, unit3):
    cfg = random_configuration(rng, unit3)
    assert model.potential_U(cfg, unit3, PotentialParams(1.0, 3.0, 1.0, 0.0)) == \
        model.potential_W(cfg, unit3, PotentialParams(1.0, 3.0, 1.0, 0.0))
    assert model.potential_U(cfg, unit3, PotentialParams(1.0, 3.0, 0.0, 1.0)) == \
        model.potential_V(cfg, unit3, PotentialParams(1.0, 3.0, 0.0, 1.0))


def test_invalid_inputs_rejected():
    with pytest.raises(InvalidMassError):
        MassSystem.from_list([1.0, -1.0])
    with pytest.raises(InvalidMassError):
        MassSystem.from_list([1.0])
    with pytest.raises(InvalidParamsError):
        PotentialParams(a=2.0, b=2.0)
    with pytest.raises(InvalidParamsError):
        PotentialParams(a=1.0, b=2.0, alpha=0.0, beta=0.0)


def test_collision_guard_rejects_coincident_bodies(unit3, manev3):
    cfg = Configuration([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(CollisionError, match="bodies 1 and 2"):
        model.potential_U(cfg, unit3, manev3)


@settings(deadline=None, max_examples=25)
@given(masses=masses_3, ab=exponents, seed=seeds)
def test_homogeneity(masses, ab, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=ab[0], b=ab[1], alpha=1.3, beta=0.7)
    cfg = random_configuration(np.random.default_rng(seed), ms)
    for lam in (0.5, 2.0, 3.7):
        W, V = model.potential_terms(cfg, ms, pp)
        W_s, V_s = model.potential_terms(cfg.scaled(lam), ms, pp)
        assert W_s == pytest.approx(lam ** -pp.a * W, rel=1e-12)
        assert V_s == pytest.approx(lam ** -pp.b * V, rel=1e-12)


@settings(deadline=None, max_examples=25)
@given(masses=masses_3, ab=exponents, seed=seeds)
def test_euler_identity(masses, ab, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=ab[0], b=ab[1])
    cfg = random_configuration(np.random.default_rng(seed), ms)
    W, V = model.potential_terms(cfg, ms, pp)
    lhs = model.grad_U(cfg, ms, pp, cfg.positions)
    assert lhs == pytest.approx(-pp.a * W - pp.b * V, rel=1e-10)


def test_equal_masses_pull_along_axis():
    ms = MassSystem.equal(2)
    cfg = Configuration([[-0.8, 0.0], [0.8, 0.0]])
    grad = model.grad_U_vector(cfg, ms, PotentialParams(a=1.0, b=3.0))
    assert grad[0, 0] == pytest.approx(-grad[1, 0])
    assert grad[0, 0] > 0.0
    assert grad[:, 1] == pytest.approx([0.0, 0.0], abs=1e-15)


def _fd_gradient(cfg, ms, pp, step=1e-5):
    flat = cfg.positions.reshape(-1)
    grad = np.zeros_like(flat)
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = step
        up = model.potential_U(Configuration.from_flat(flat + e, cfg.dim), ms, pp)
        down = model.potential_U(Configuration.from_flat(flat - e, cfg.dim), ms, pp)
        grad[k] = (up - down) / (2 * step)
    return grad


@settings(deadline=None, max_examples=50)
@given(masses=masses_3, ab=exponents, seed=seeds)
def test_gradient_matches_finite_differences(masses, ab, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=ab[0], b=ab[1])
    cfg = random_configuration(np.random.default_rng(seed), ms)
    exact = model.grad_U_vector(cfg, ms, pp).reshape(-1)
    approx = _fd_gradient(cfg, ms, pp)
    assert np.max(np.abs(exact - approx)) / np.max(np.abs(exact)) < 1e-6


@settings(deadline=None, max_examples=50)
@given(masses=masses_3, ab=exponents, seed=seeds)
def test_hessian_matches_finite_differences(masses, ab, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=ab[0], b=ab[1])
    cfg = random_configuration(np.random.default_rng(seed), ms)
    hess = model.hess_matrix(cfg, ms, pp)
    flat = cfg.positions.reshape(-1)
    step = 1e-5
    approx = np.zeros_like(hess)
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = step
        up = model.grad_U_vector(Configuration.from_flat(flat + e, 2), ms, pp).reshape(-1)
        down = model.grad_U_vector(Configuration.from_flat(flat - e, 2), ms, pp).reshape(-1)
        approx[:, k] = (up - down) / (2 * step)
    assert np.max(np.abs(hess - approx)) / np.max(np.abs(hess)) < 1e-6
    assert hess == pytest.approx(hess.T, abs=1e-12 * np.max(np.abs(hess)))


def test_hess_U_is_symmetric_bilinear(rng, unit3, manev3):
    cfg = random_configuration(rng, unit3)
    v, w = rng.normal(size=(2, 3, 2))
    assert model.hess_U(cfg, unit3, manev3, v, w) == pytest.approx(model.hess_U(cfg, unit3, manev3, w, v), rel=1e-12)


def test_collinear_hessian_positive_on_line(rng):
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    pp = PotentialParams(a=1.0, b=3.0)
    cfg = Configuration.centered([[-1.2], [0.1], [0.9]], ms)
    hess = model.hess_matrix(cfg, ms, pp)
    basis = scipy.linalg.null_space(np.array([[1.0, 1.0, 1.0]]))
    assert np.min(np.linalg.eigvalsh(basis.T @ hess @ basis)) > 0.0


@settings(deadline=None, max_examples=20)
@given(masses=st.lists(st.floats(min_value=0.5, max_value=2.0), min_size=3, max_size=3), seed=seeds)
def test_restricted_hessian_matches_great_circle_second_derivative(masses, seed):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=1.0, b=3.0)
    rng = np.random.default_rng(seed)
    cfg = rescale_to_inertia(random_configuration(rng, ms, min_gap=0.8), ms, 1.0)
    basis = model.tangent_basis(cfg, ms)
    v = basis @ rng.normal(size=basis.shape[1])
    v = v / math.sqrt(model.mass_inner(v.reshape(3, 2), v.reshape(3, 2), ms))
    r = cfg.positions.reshape(-1)
    step = 3e-5

    def along(t):
        return model.potential_U(Configuration.from_flat(math.cos(t) * r + math.sin(t) * v, 2), ms, pp)

    second = (along(step) - 2 * along(0.0) + along(-step)) / step ** 2
    exact = model.hess_U_restricted(cfg, ms, pp, v, v, inertia=1.0)
    scale = max(1.0, abs(exact), along(0.0))
    assert abs(second - exact) < 1e-5 * scale


def test_restricted_hessian_kills_rotation_at_cc(unit3, manev3):
    cfg = equilateral_configuration(unit3, 1.0)
    rotation = np.column_stack([-cfg.positions[:, 1], cfg.positions[:, 0]]).reshape(-1)
    hess = model.restricted_hess_matrix(cfg, unit3, manev3, 1.0)
    assert np.max(np.abs(hess @ rotation)) < 1e-12 * np.max(np.abs(hess))


def test_restricted_hessian_checks_sphere_and_tangency(unit3, manev3):
    cfg = equilateral_configuration(unit3, 1.0)
    tangent = model.tangent_basis(cfg, unit3)[:, 0]
    with pytest.raises(NotOnSphereError):
        model.hess_U_restricted(cfg.scaled(2.0), unit3, manev3, tangent, tangent)
    with pytest.raises(ConstraintError):
        model.hess_U_restricted(cfg, unit3, manev3, cfg.positions, tangent)


def test_rotational_equivariance(rng, unit3, manev3):
    cfg = random_configuration(rng, unit3)
    for theta in rng.uniform(0, 2 * np.pi, size=5):
        rotated = model.grad_U_vector(cfg.rotated(theta), unit3, manev3)
        expected = Configuration(model.grad_U_vector(cfg, unit3, manev3)).rotated(theta).positions
        assert np.max(np.abs(rotated - expected)) < 1e-12


def test_inertia_examples(rng):
    ms = MassSystem.equal(2)
    cfg = Configuration([[-1.0, 0.0], [1.0, 0.0]])
    assert model.moment_of_inertia(cfg, ms) == pytest.approx(2.0)
    ms3 = MassSystem.from_list([1.0, 2.0, 3.0])
    for _ in range(5):
        cfg = random_configuration(rng, ms3)
        assert model.mass_inner(cfg, cfg, ms3) == model.moment_of_inertia(cfg, ms3)
        assert model.inertia_from_distances(cfg, ms3) == pytest.approx(model.moment_of_inertia(cfg, ms3), rel=1e-12)


def test_tangent_basis_is_mass_orthonormal(rng, manev3):
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    cfg = random_configuration(rng, ms)
    basis = model.tangent_basis(cfg, ms)
    metric = ms.metric(2)
    assert basis.shape == (6, 3)
    assert basis.T @ (metric[:, None] * basis) == pytest.approx(np.eye(3), abs=1e-12)
    assert metric * cfg.positions.reshape(-1) @ basis == pytest.approx(np.zeros(3), abs=1e-12)


def test_first_integrals_at_rest(rng, unit3, manev3):
    cfg = random_configuration(rng, unit3)
    ps = PhaseState(cfg, np.zeros((3, 2)))
    assert model.hamiltonian(ps, unit3, manev3) == pytest.approx(-model.potential_U(cfg, unit3, manev3))
    assert model.angular_momentum(ps, unit3) == 0.0
    assert model.kinetic(ps, unit3) == 0.0


def test_relative_equilibrium_matches_circular_two_body():
    ms = MassSystem.equal(2)
    pp = PotentialParams(a=1.0, b=3.0)
    circular = circular_two_body(pp)
    rotating = model.relative_equilibrium(circular.config, ms, pp)
    assert rotating.momenta == pytest.approx(circular.momenta, abs=1e-14)


def test_relative_equilibrium_rotates_rigidly(manev3):
    ms = MassSystem.from_list([1.0, 2.0, 3.0])
    ps = model.relative_equilibrium(equilateral_configuration(ms), ms, manev3)
    omega = model.angular_momentum(ps, ms) / model.moment_of_inertia(ps.config, ms)
    period = 2 * np.pi / omega
    traj = integrate(model.cartesian_rhs(ms, manev3), ps.flat, (0.0, period), rel_tol=1e-12, abs_tol=1e-14,
                     monitors=model.cartesian_monitors(ms, manev3))
    assert traj.final_state == pytest.approx(ps.flat, abs=1e-8)
    assert traj.drift("energy") < 1e-9
    quarter = PhaseState.from_flat(traj.interpolate(0.25 * period), 2)
    rotated = np.column_stack([-ps.config.positions[:, 1], ps.config.positions[:, 0]])
    assert quarter.config.positions == pytest.approx(rotated, abs=1e-8)


def test_relative_equilibrium_needs_planar_shape(manev3):
    ms = MassSystem.equal(2)
    with pytest.raises(ConstraintError):
        model.relative_equilibrium(Configuration([[-0.5], [0.5]]), ms, manev3)


@settings(deadline=None, max_examples=25)
@given(masses=masses_3, ab=exponents, seed=seeds,
       shift=st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=2, max_size=2))
def test_translation_invariance(masses, ab, seed, shift):
    ms = MassSystem.from_list(masses)
    pp = PotentialParams(a=ab[0], b=ab[1], alpha=1.3, beta=0.7)
    cfg = random_configuration(np.random.default_rng(seed), ms)
    moved = Configuration(cfg.positions + np.array(shift))
    U = model.potential_U(cfg, ms, pp)
    assert model.potential_U(moved, ms, pp) == pytest.approx(U, rel=1e-10)
    grad = model.grad_U_vector(cfg, ms, pp)
    assert model.grad_U_vector(moved, ms, pp) == pytest.approx(grad, rel=1e-8, abs=1e-10 * np.max(np.abs(grad)))


def test_reflection_axis():
    line = Configuration([[-1.0], [0.25], [0.75]]).reflected()
    assert line.positions[:, 0] == pytest.approx([1.0, -0.25, -0.75])
    plane = Configuration([[1.0, 2.0], [-3.0, 0.5], [2.0, -2.5]]).reflected()
    assert plane.positions[:, 0] == pytest.approx([1.0, -3.0, 2.0])
    assert plane.positions[:, 1] == pytest.approx([-2.0, -0.5, 2.5])
