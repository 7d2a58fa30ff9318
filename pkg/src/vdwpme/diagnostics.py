"""Per-step measurements and analytic reference solutions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import ScalarField, assemble_mass, nodal_values
from .mesh import MeshGrid

DEFAULT_THETA = 1e-3
THETA_SWEEP = (1e-2, 1e-3, 1e-4)


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    c_min: float
    c_max: float
    chat_min: float
    chat_max: float
    mass: float
    support: dict[float, float] = field(default_factory=dict)
    picard_iterations: int = 0
    converged: bool = True
    picard_error: float = 0.0
    blowup: bool = False

    @property
    def theta(self) -> float:
        return DEFAULT_THETA if DEFAULT_THETA in self.support else next(iter(self.support))

    @property
    def support_area(self) -> float:
        return self.support[self.theta]


def support_measure(field, theta: float = DEFAULT_THETA, mesh: MeshGrid | None = None) -> float:
    """Area of the elements whose four nodal values all exceed theta."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    mesh = mesh or field.mesh
    vals = nodal_values(field, mesh)
    inside = (vals[mesh.connectivity] > theta).all(axis=1)
    return float(np.count_nonzero(inside)) * mesh.element_area


def total_mass(field, mesh: MeshGrid | None = None) -> float:
    """Integral of the Q1 field, 1^T M u."""
    mesh = mesh or field.mesh
    vals = nodal_values(field, mesh)
    return float(np.sum(assemble_mass(mesh) @ vals))


def compare_fields(a, b, mesh: MeshGrid | None = None) -> tuple[float, float]:
    """(L2 norm of a - b, max nodal |a - b|), the L2 norm weighted by the consistent mass."""
    mesh = mesh or a.mesh
    if isinstance(a, ScalarField) and isinstance(b, ScalarField) and not a.mesh.same_as(b.mesh):
        raise ValueError("fields live on different meshes")
    diff = nodal_values(a, mesh) - nodal_values(b, mesh)
    l2 = float(np.sqrt(max(diff @ (assemble_mass(mesh) @ diff), 0.0)))
    return l2, float(np.abs(diff).max()) if diff.size else 0.0


def front_position(field, theta: float, axis: int = 0, coordinate: float = 0.0,
                   mesh: MeshGrid | None = None) -> float:
    """Outermost crossing of theta along the mesh line nearest `coordinate`.

    axis=0 walks along x on the row y ~ coordinate; axis=1 walks along y.
    Crossings are linearly interpolated between nodes. Returns the domain
    minimum along the axis when the trace never exceeds theta.
    """
    mesh = mesh or field.mesh
    g = nodal_values(field, mesh).reshape(mesh.shape)
    if axis == 0:
        j = int(round((coordinate - mesh.domain_min[1]) / mesh.h_y))
        trace, pos = g[min(max(j, 0), mesh.ny), :], mesh.x
    elif axis == 1:
        i = int(round((coordinate - mesh.domain_min[0]) / mesh.h_x))
        trace, pos = g[:, min(max(i, 0), mesh.nx)], mesh.y
    else:
        raise ValueError("axis must be 0 or 1")
    above = np.nonzero(trace > theta)[0]
    if above.size == 0:
        return float(pos[0])
    k = above[-1]
    if k == trace.size - 1:
        return float(pos[-1])
    v0, v1 = trace[k], trace[k + 1]
    s = (v0 - theta) / (v0 - v1)
    return float(pos[k] + s * (pos[k + 1] - pos[k]))


def barenblatt(x, t: float, C: float, kappa: float = 1.0, center=(0.0, 0.0)):
    """Source solution of u_t = div(kappa u grad u) in two dimensions.

    u(x, t) = t^(-1/2) max(0, C - |x|^2 / (8 kappa sqrt(t))).
    The mass 4 pi kappa C^2 does not depend on t; the support radius grows
    like t^(1/4).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    r2 = (x[..., 0] - center[0]) ** 2 + (x[..., 1] - center[1]) ** 2
    return np.maximum(0.0, C - r2 / (8.0 * kappa * np.sqrt(t))) / np.sqrt(t)


def barenblatt_radius(t: float, C: float, kappa: float = 1.0) -> float:
    return float(np.sqrt(8.0 * kappa * C * np.sqrt(t)))


def barenblatt_mass(C: float, kappa: float = 1.0) -> float:
    return 4.0 * np.pi * kappa * C * C


def make_record(step, time, chat, c, mesh, thetas=THETA_SWEEP, iterations=0,
                converged=True, error=0.0, blowup=False) -> DiagnosticsRecord:
    c = nodal_values(c, mesh)
    chat = nodal_values(chat, mesh)
    finite = bool(np.all(np.isfinite(c)))
    return DiagnosticsRecord(
        step=step,
        time=time,
        c_min=float(c.min()),
        c_max=float(c.max()),
        chat_min=float(chat.min()),
        chat_max=float(chat.max()),
        mass=total_mass(c, mesh) if finite else float("nan"),
        support={th: support_measure(c, th, mesh) for th in thetas},
        picard_iterations=iterations,
        converged=converged,
        picard_error=float(error),
        blowup=blowup,
    )
