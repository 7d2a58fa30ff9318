import numpy as np
import pytest
from hypothesis import given, strategies as st

from vdwpme.assembly import ScalarField
from vdwpme.mesh import build_mesh
from vdwpme.model import (
    AVOGADRO,
    BOLTZMANN,
    CoefficientLaw,
    ModelParams,
    concentration_step,
    diffusion_coefficient,
    from_hat,
    perikinetic_rate,
    phi,
    phi_prime,
    to_hat,
)
from vdwpme.stepper import Discretization, picard_step

BASE = ModelParams()  # d = 1, a = N_A k_b T / 2
LAW = CoefficientLaw("vdw_nonlinear", BASE)
reals = st.floats(-10, 10, allow_nan=False)


def test_default_scaling():
    assert BASE.a == 0.5 * AVOGADRO * BOLTZMANN * BASE.T
    assert BASE.gamma == 1.0
    assert BASE.c_star == 1.0
    assert BASE.gamma * BASE.c_star == 1.0


def test_gamma_from_constants():
    p = ModelParams(d=2.0, a=3.0, T=300.0)
    assert p.gamma == pytest.approx(6.0 / (AVOGADRO * BOLTZMANN * 300.0))
    assert p.gamma * p.c_star == pytest.approx(1.0, rel=1e-15)
    assert ModelParams.with_gamma(2.5).gamma == pytest.approx(2.5, rel=1e-15)


@pytest.mark.parametrize("kw", [{"d": 0.0}, {"a": -1.0}, {"T": 0.0}])
def test_params_must_be_positive(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_diffusion_coefficient_values():
    assert diffusion_coefficient(LAW, 0.0) == 1.0
    assert diffusion_coefficient(LAW, 1.0) == 0.0
    assert diffusion_coefficient(LAW, 1.5) == -0.5
    heat = CoefficientLaw("heat_constant", ModelParams(d=0.3))
    assert np.all(diffusion_coefficient(heat, np.array([0.0, 2.0])) == 0.3)
    with pytest.raises(ValueError):
        CoefficientLaw("cubic")


@given(st.floats(0, 5, allow_nan=False))
def test_regime_classifier(c):
    assert (diffusion_coefficient(LAW, c) < 0) == (c > BASE.c_star)


def test_transform_values():
    assert to_hat(0.0, BASE, "simplified") == 1.0
    assert to_hat(1.0, BASE, "simplified") == 0.0
    assert to_hat(0.0, BASE, "general") == 0.5
    assert from_hat(0.5, BASE, "general") == 0.0
    with pytest.raises(ValueError):
        to_hat(0.0, BASE, "cubic")


def test_block_and_complement_swap():
    c0 = np.array([1.0, 0.0, 1.0])
    assert np.array_equal(to_hat(c0, BASE), [0.0, 1.0, 0.0])


@pytest.mark.parametrize("transform", ["simplified", "general", "identity"])
def test_round_trip(transform):
    rng = np.random.default_rng(7)
    p = ModelParams.with_gamma(1.7, d=0.6)
    c = rng.uniform(-2, 3, 100)
    assert np.allclose(from_hat(to_hat(c, p, transform), p, transform), c, rtol=0, atol=1e-14)
    chat = rng.uniform(-2, 3, 100)
    assert np.allclose(to_hat(from_hat(chat, p, transform), p, transform), chat, rtol=0, atol=1e-14)


def test_transform_keeps_fields():
    mesh = build_mesh(((0, 0), (1, 1)), 2, 2)
    f = ScalarField(mesh, np.linspace(0, 1, 9))
    out = to_hat(f, BASE)
    assert isinstance(out, ScalarField) and np.allclose(out.values, 1 - f.values)


@given(st.floats(0, 5))
def test_bound_correspondence(c):
    p = ModelParams.with_gamma(0.8, d=2.0)
    assert (to_hat(c, p, "general") >= 0) == (c <= p.c_star)


def test_phi_values():
    assert phi(0.0, BASE) == 0.0
    assert phi(1.0, BASE) == 0.5


def test_phi_prime_is_coefficient():
    rng = np.random.default_rng(8)
    p = ModelParams.with_gamma(1.3, d=0.7)
    c = rng.uniform(-3, 3, 100)
    assert np.array_equal(phi_prime(c, p), diffusion_coefficient(CoefficientLaw("vdw_nonlinear", p), c))
    eps = 1e-6
    assert np.allclose((phi(c + eps, p) - phi(c - eps, p)) / (2 * eps), phi_prime(c, p), atol=1e-8)


def test_phi_monotone_below_saturation():
    c = np.linspace(0, BASE.c_star, 101)
    assert (phi_prime(c, BASE) >= 0).all()
    assert (np.diff(phi(c, BASE)) > 0).all()


def test_perikinetic_rate_constant_and_zero_alpha():
    mesh = build_mesh(((0, 0), (1, 2)), 4, 8)
    assert np.allclose(perikinetic_rate(np.full(mesh.n_nodes, 0.4), 0.3, 1.0, mesh).values, 0.0)
    x = mesh.coords[:, 0]
    assert np.all(perikinetic_rate(x, 0.0, 1.0, mesh).values == 0.0)


def test_perikinetic_rate_linear_profile():
    # c = x: <x e1, grad phi_i> = -int phi_i = -h_x h_y on interior nodes
    mesh = build_mesh(((0, 0), (1, 2)), 4, 8)
    alpha, d = 0.3, 2.0
    r = perikinetic_rate(mesh.coords[:, 0], alpha, d, mesh).values
    interior = ~mesh.boundary_nodes
    assert np.allclose(r[interior], -2 * alpha * d * mesh.h_x * mesh.h_y, rtol=1e-13)
    assert np.abs(r).max() > 0


@pytest.mark.parametrize("transform,kappa", [("simplified", 1.0), ("general", 2.0)])
def test_one_step_transform_equivalence(transform, kappa):
    mesh = build_mesh(((0, 0), (1, 2)), 8, 16)
    p = ModelParams.with_gamma(1.0, d=1.0)
    law = CoefficientLaw("vdw_nonlinear", p)
    rng = np.random.default_rng(9)
    c_prev = rng.uniform(0, p.c_star, mesh.n_nodes)
    c_guess = rng.uniform(0, p.c_star, mesh.n_nodes)
    c_prev[mesh.boundary_nodes] = c_guess[mesh.boundary_nodes] = 0.0
    tau = 1e-3
    direct = concentration_step(mesh, c_prev, c_guess, law, tau, boundary_c=0.0)
    disc = Discretization(mesh, tau, kappa=kappa, boundary_value=to_hat(0.0, p, transform))
    hat, _ = picard_step(to_hat(c_prev, p, transform), to_hat(c_guess, p, transform), disc)
    assert np.linalg.norm(from_hat(hat.values, p, transform) - direct.values) <= 1e-10
