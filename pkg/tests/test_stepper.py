import numpy as np
import pytest

from vdwpme.assembly import apply_dirichlet, assemble_mass, assemble_stiffness, l2_project
from vdwpme.config import RunConfig, replace
from vdwpme.linsolve import solve_direct
from vdwpme.mesh import build_mesh
from vdwpme.stepper import (
    BlowUpError,
    Discretization,
    PicardNotConverged,
    PicardSettings,
    TimeGrid,
    advance_time_step,
    picard_step,
    run_simulation,
)


def block(x, y):
    return ((x >= 0.25) & (x <= 0.75) & (y >= 0.5) & (y <= 1.5)).astype(float)


@pytest.fixture(scope="module")
def mesh():
    return build_mesh(((0, 0), (1, 2)), 16, 32)


@pytest.fixture(scope="module")
def chat0(mesh):
    return 1.0 - l2_project(mesh, block, lumped=True).values


def small_config(**kw):
    base = dict(h_exp=3, n_steps=5, tau=1e-3, snapshot_every=1, thetas=(1e-3,))
    base.update(kw)
    return RunConfig(**base).validate()


def test_settings_validation():
    with pytest.raises(ValueError):
        PicardSettings(tol=0.0)
    with pytest.raises(ValueError):
        PicardSettings(iter_max=0)
    with pytest.raises(ValueError):
        PicardSettings(policy="maybe")
    with pytest.raises(ValueError):
        TimeGrid(0.0, 3)
    assert TimeGrid(0.5, 4).time(3) == 1.5


def test_steady_state(mesh):
    disc = Discretization(mesh, 1e-3, boundary_value=0.7)
    u = np.full(mesh.n_nodes, 0.7)
    out, rep = picard_step(u, u, disc)
    assert rep.success
    assert np.allclose(out.values, 0.7, atol=1e-14)


def test_constant_coefficient_is_heat_step(mesh, chat0):
    tau = 1e-3
    disc = Discretization(mesh, tau, kappa=1.0, delta=0.0, coefficient="constant", constant=0.8)
    out, _ = picard_step(chat0, np.zeros(mesh.n_nodes), disc)
    M = assemble_mass(mesh, lumped=True)
    K, b = apply_dirichlet(M + tau * assemble_stiffness(mesh, np.full(mesh.n_nodes, 0.8)), M @ chat0, mesh, 1.0)
    ref, _ = solve_direct(K, b)
    assert np.allclose(out.values, ref, atol=1e-10)


def test_picard_step_linear_in_previous(mesh, chat0):
    disc = Discretization(mesh, 1e-3, boundary_value=0.0)
    rng = np.random.default_rng(0)
    guess = rng.random(mesh.n_nodes)
    p, q = rng.random(mesh.n_nodes), rng.random(mesh.n_nodes)
    for v in (p, q):
        v[mesh.boundary_nodes] = 0.0
    a = picard_step(p, guess, disc)[0].values
    b = picard_step(q, guess, disc)[0].values
    c = picard_step(2 * p - 3 * q, guess, disc)[0].values
    assert np.allclose(c, 2 * a - 3 * b, atol=1e-10)


def test_first_experiment_step_nonnegative():
    mesh = build_mesh(((0, 0), (1, 2)), 128, 256)
    chat0 = 1.0 - l2_project(mesh, block, lumped=True).values
    disc = Discretization(mesh, 1e-4)
    out, rep = picard_step(chat0, chat0, disc)
    assert rep.success and rep.method == "cg"
    assert out.values.min() >= -1e-12


def test_heat_converges_in_two(mesh, chat0):
    disc = Discretization(mesh, 1e-3, coefficient="constant")
    _, iters, converged, err = advance_time_step(chat0, PicardSettings(), disc)
    assert converged and iters == 2 and err < 1e-8


def test_boundary_constant_is_fixed_point(mesh):
    disc = Discretization(mesh, 1e-3, boundary_value=1.0)
    u = np.ones(mesh.n_nodes)
    out, iters, converged, _ = advance_time_step(u, PicardSettings(), disc)
    assert converged and iters <= 2
    assert np.allclose(out.values, u, atol=1e-14)


def test_policies(mesh, chat0):
    disc = Discretization(mesh, 1e-3)
    _, iters, converged, err = advance_time_step(chat0, PicardSettings(iter_max=1), disc)
    assert iters == 1 and not converged and err > 1e-8
    with pytest.raises(PicardNotConverged):
        advance_time_step(chat0, PicardSettings(iter_max=1, policy="strict"), disc, step=4)


def test_fixed_point_residual(mesh, chat0):
    tol = 1e-8
    disc = Discretization(mesh, 1e-3)
    out, _, converged, err = advance_time_step(chat0, PicardSettings(tol=tol), disc)
    assert converged
    res = disc.nonlinear_residual(out, chat0)
    # residual = tau (A(u_k) - A(u_{k-1})) u_k, bounded by a modest multiple of the last update
    assert res <= 1e-2 * tol


def test_blowup_is_reported(mesh, chat0, monkeypatch):
    disc = Discretization(mesh, 1e-3)
    monkeypatch.setattr(disc, "solve", lambda K, b, x0, g: (np.full_like(b, np.nan), None))
    with pytest.raises(BlowUpError) as info:
        advance_time_step(chat0, PicardSettings(), disc, step=7)
    assert info.value.step == 7


def test_zero_step_run_returns_projection():
    cfg = small_config(n_steps=0)
    res = run_simulation(cfg)
    assert res.status == "completed" and len(res.records) == 1
    mesh = cfg.mesh()
    expected = 1.0 - l2_project(mesh, block, lumped=True).values
    assert np.array_equal(res.final.values, expected)
    assert np.array_equal(res.snapshots[0].chat, expected)


def test_constant_initial_data_is_fixed():
    cfg = small_config(initial="constant", initial_value=0.0, n_steps=10)
    res = run_simulation(cfg)
    assert res.status == "completed"
    for rec in res.records:
        assert rec.c_min == pytest.approx(0.0, abs=1e-12) and rec.c_max == pytest.approx(0.0, abs=1e-12)


def test_records_and_snapshots():
    cfg = small_config(n_steps=4, snapshot_every=2)
    seen = []
    res = run_simulation(cfg, on_snapshot=seen.append)
    assert [r.step for r in res.records] == [0, 1, 2, 3, 4]
    assert [s.step for s in res.snapshots] == [0, 2, 4] == [s.step for s in seen]
    assert res.records[2].time == pytest.approx(2e-3)
    assert np.allclose(res.snapshots[-1].c, 1.0 - res.snapshots[-1].chat)


def test_run_rejects_bad_config():
    with pytest.raises(ValueError):
        run_simulation(RunConfig(h_exp=3, tau=-1.0))


def test_implicit_euler_first_order():
    base = small_config(h_exp=3, n_steps=8, tau=2e-3, snapshot_every=0)
    T = base.n_steps * base.tau

    def solve(tau):
        cfg = replace(base, tau=tau, n_steps=int(round(T / tau)))
        return run_simulation(cfg).final.values

    ref = solve(T / 256)
    errs = [np.linalg.norm(solve(T / k) - ref) for k in (8, 16, 32)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(1.6 < r < 2.6 for r in ratios), ratios
