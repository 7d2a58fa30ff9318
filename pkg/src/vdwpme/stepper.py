"""Implicit Euler time stepping with Picard (frozen coefficient) iteration.

Each time step solves

    (M + tau [A(u^{k-1}) + C]) u^k = M u^{n-1},   u^k = g on the boundary,

for k = 1, 2, ... starting from u^0 = u^{n-1}, until the Euclidean norm of
u^k - u^{k-1} drops below the tolerance or the iteration cap is hit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (
    ScalarField,
    apply_dirichlet,
    assemble_convection,
    assemble_mass,
    assemble_stiffness,
    nodal_values,
    quadrature_values,
)
from .linsolve import SingularMatrixError, SolveReport, solve_cg, solve_direct
from .mesh import MeshGrid

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A linear solve failed inside the time loop."""

    def __init__(self, message, step=None, iteration=None):
        where = f" (step {step}, Picard iteration {iteration})" if step is not None else ""
        super().__init__(message + where)
        self.step = step
        self.iteration = iteration


class BlowUpError(RuntimeError):
    def __init__(self, step, iteration=None):
        super().__init__(f"non-finite values at step {step}, Picard iteration {iteration}")
        self.step = step
        self.iteration = iteration


class PicardNotConverged(RuntimeError):
    def __init__(self, step, error):
        super().__init__(f"Picard iteration did not converge at step {step} (error {error:.3e})")
        self.step = step
        self.error = error


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-8
    iter_max: int = 40
    policy: str = "accept"  # accept the last iterate, or "strict": abort

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Picard tol must be positive")
        if self.iter_max < 1:
            raise ValueError("Picard iter_max must be >= 1")
        if self.policy not in ("accept", "strict"):
            raise ValueError(f"unknown nonconvergence policy {self.policy!r}")


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    n_steps: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")

    def time(self, n: int) -> float:
        return n * self.tau


@dataclass
class Discretization:
    """Operators that stay fixed over a run.

    ``coefficient`` selects the frozen diffusivity: ``"pme"`` uses
    kappa*u + delta from the current iterate, ``"constant"`` uses
    ``constant + delta`` everywhere (heat equation, Picard exact in one solve).
    """

    mesh: MeshGrid
    tau: float
    kappa: float = 1.0
    delta: float = 0.0
    boundary_value: float = 1.0
    velocity: object = None
    lumped_mass: bool = True
    solver: str = "auto"
    coefficient: str = "pme"
    constant: float = 1.0
    rtol: float = 1e-12
    M: sp.csr_matrix = field(init=False, repr=False)
    C: sp.csr_matrix | None = field(init=False, repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.solver not in ("auto", "cg", "direct"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.coefficient not in ("pme", "constant"):
            raise ValueError(f"unknown coefficient mode {self.coefficient!r}")
        self.M = assemble_mass(self.mesh, lumped=self.lumped_mass)
        self.C = assemble_convection(self.mesh, self.velocity) if self.velocity is not None else None
        self._A_const = None

    def stiffness(self, u_guess: np.ndarray) -> sp.csr_matrix:
        if self.coefficient == "constant":
            if self._A_const is None:
                self._A_const = assemble_stiffness(
                    self.mesh, np.full(self.mesh.n_nodes, self.constant), 1.0, self.delta
                )
            return self._A_const
        return assemble_stiffness(self.mesh, u_guess, self.kappa, self.delta)

    def min_coefficient(self, u_guess: np.ndarray) -> float:
        if self.coefficient == "constant":
            return self.constant + self.delta
        return float((self.kappa * quadrature_values(self.mesh, u_guess) + self.delta).min())

    def system(self, u_prev: np.ndarray, u_guess: np.ndarray):
        K = self.M + self.tau * self.stiffness(u_guess)
        if self.C is not None:
            K = K + self.tau * self.C
        return apply_dirichlet(K, self.M @ u_prev, self.mesh, self.boundary_value)

    def solve(self, K, b, x0, u_guess) -> tuple[np.ndarray, SolveReport]:
        method = self.solver
        if method == "auto":
            # round-off negatives from 1 - c do not spoil definiteness
            spd = self.C is None and self.min_coefficient(u_guess) >= -1e-12
            method = "cg" if spd else "direct"
        if method == "cg":
            x, report = solve_cg(K, b, x0, rtol=self.rtol, atol=0.0)
            if report.success:
                return x, report
            log.debug("CG failed after %d iterations, falling back to LU", report.iterations)
        return solve_direct(K, b)

    def nonlinear_residual(self, u_next, u_prev) -> float:
        """Euclidean norm over interior nodes of M(u_next - u_prev) + tau A(u_next) u_next."""
        u_next = nodal_values(u_next, self.mesh)
        u_prev = nodal_values(u_prev, self.mesh)
        K = self.tau * self.stiffness(u_next)
        if self.C is not None:
            K = K + self.tau * self.C
        r = self.M @ (u_next - u_prev) + K @ u_next
        return float(np.linalg.norm(r[~self.mesh.boundary_nodes]))


def picard_step(u_prev, u_guess, disc: Discretization, step=None, iteration=None):
    """One frozen-coefficient solve; returns (u_next, SolveReport)."""
    mesh = disc.mesh
    prev = nodal_values(u_prev, mesh)
    guess = nodal_values(u_guess, mesh)
    K, b = disc.system(prev, guess)
    try:
        x, report = disc.solve(K, b, guess, guess)
    except SingularMatrixError as exc:
        raise SolverError(str(exc), step, iteration) from exc
    if not np.all(np.isfinite(x)):
        raise BlowUpError(step, iteration)
    if not report.success:
        raise SolverError(f"linear solve failed: {report}", step, iteration)
    return ScalarField(mesh, x), report


def advance_time_step(u_prev, settings: PicardSettings, disc: Discretization, step=None):
    """Picard loop for one time step: returns (u_next, iterations, converged, error)."""
    prev = nodal_values(u_prev, disc.mesh)
    guess = prev
    error = np.inf
    k = 0
    while k < settings.iter_max and not error < settings.tol:
        k += 1
        sol, _ = picard_step(prev, guess, disc, step, k)
        error = float(np.linalg.norm(sol.values - guess))
        guess = sol.values
    converged = bool(error < settings.tol)
    if not converged and settings.policy == "strict":
        raise PicardNotConverged(step, error)
    return ScalarField(disc.mesh, guess), k, converged, error


@dataclass
class Snapshot:
    step: int
    time: float
    chat: np.ndarray
    c: np.ndarray
    mesh: MeshGrid


@dataclass
class SimulationResult:
    final: ScalarField  # in the PME variable
    records: list
    snapshots: list
    status: str = "completed"  # completed | blowup | solver_failure | picard_failure
    message: str = ""

    @property
    def final_c(self) -> np.ndarray:
        return self.snapshots[-1].c if self.snapshots else None


def run_simulation(config, on_snapshot=None) -> SimulationResult:
    """Project the initial data, then run ``config.n_steps`` implicit Euler steps.

    Diagnostics are recorded every step (step 0 included). Snapshots are taken
    after each step whose index is a multiple of ``config.snapshot_every`` or
    is listed in ``config.snapshot_steps``, plus step 0. A blow-up or solver
    failure ends the run early; everything recorded so far is returned.
    """
    from .config import initial_field
    from .diagnostics import make_record
    from .model import from_hat

    config.validate()
    mesh = config.mesh()
    params = config.params()
    disc = config.discretization(mesh)
    settings = config.picard()

    chat = initial_field(config, mesh)
    to_c = lambda v: from_hat(v, params, config.transform)  # noqa: E731

    records = [make_record(0, 0.0, chat, to_c(chat.values), mesh, config.thetas)]
    snapshots = []

    def snap(n, values):
        if config.wants_snapshot(n):
            s = Snapshot(n, n * config.tau, values.copy(), to_c(values), mesh)
            snapshots.append(s)
            if on_snapshot is not None:
                on_snapshot(s)

    snap(0, chat.values)
    u = chat
    status, message = "completed", ""
    for n in range(1, config.n_steps + 1):
        try:
            u, iters, converged, error = advance_time_step(u, settings, disc, step=n)
        except BlowUpError as exc:
            status, message = "blowup", str(exc)
            records.append(
                make_record(n, n * config.tau, np.full(mesh.n_nodes, np.nan),
                            np.full(mesh.n_nodes, np.nan), mesh, config.thetas, blowup=True)
            )
            break
        except SolverError as exc:
            status, message = "solver_failure", str(exc)
            break
        except PicardNotConverged as exc:
            status, message = "picard_failure", str(exc)
            break
        c = to_c(u.values)
        if not np.all(np.isfinite(c)) or np.abs(c).max() > config.blowup_threshold:
            status, message = "blowup", f"solution exceeded {config.blowup_threshold:g} at step {n}"
            records.append(make_record(n, n * config.tau, u, c, mesh, config.thetas, iters,
                                       converged, error, blowup=True))
            break
        records.append(make_record(n, n * config.tau, u, c, mesh, config.thetas, iters, converged, error))
        if not converged:
            log.warning("step %d: Picard stopped at %d iterations, error %.3e", n, iters, error)
        snap(n, u.values)
    return SimulationResult(u, records, snapshots, status, message)
