"""Van der Waals cohesion diffusion: parameters, coefficient law, PME transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ScalarField, apply_dirichlet, assemble_mass, assemble_stiffness, nodal_values
from .linsolve import solve_direct
from .mesh import MeshGrid

# CODATA 2018 exact values.
BOLTZMANN = 1.380649e-23  # J/K
AVOGADRO = 6.02214076e23  # 1/mol

TRANSFORMS = ("simplified", "general", "identity")


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the cohesion model.

    ``gamma = 2a / (N_A k_b T)`` is the saturation scale; ``c_star = 1/gamma``.
    """

    d: float = 1.0
    a: float | None = None
    T: float = 298.15
    k_b: float = BOLTZMANN
    N_A: float = AVOGADRO

    def __post_init__(self):
        if self.a is None:
            # a = N_A k_b T / 2 makes gamma = 1 exactly
            object.__setattr__(self, "a", 0.5 * self.N_A * self.k_b * self.T)
        for name in ("d", "a", "T", "k_b", "N_A"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def gamma(self) -> float:
        return 2.0 * self.a / (self.N_A * self.k_b * self.T)

    @property
    def c_star(self) -> float:
        return (self.N_A * self.k_b * self.T) / (2.0 * self.a)

    @classmethod
    def with_gamma(cls, gamma: float, d: float = 1.0, **kw) -> "ModelParams":
        p = cls(d=d, **kw)
        return cls(d=d, a=gamma * 0.5 * p.N_A * p.k_b * p.T, **kw)


@dataclass(frozen=True)
class CoefficientLaw:
    """``vdw_nonlinear``: D(c) = d (1 - gamma c).  ``heat_constant``: D = d."""

    tag: str = "vdw_nonlinear"
    params: ModelParams = ModelParams()

    def __post_init__(self):
        if self.tag not in ("vdw_nonlinear", "heat_constant"):
            raise ValueError(f"unknown coefficient law {self.tag!r}")


def diffusion_coefficient(law: CoefficientLaw, c):
    """Nonlinear diffusion coefficient; negative values mean dominant cohesion."""
    p = law.params
    c = np.asarray(c, dtype=float)
    if law.tag == "heat_constant":
        out = np.full_like(c, p.d)
    else:
        out = p.d * (1.0 - p.gamma * c)
    return out if out.ndim else float(out)


def _apply(fn, c):
    if isinstance(c, ScalarField):
        return ScalarField(c.mesh, fn(c.values))
    return fn(np.asarray(c, dtype=float)) if np.ndim(c) else float(fn(c))


def to_hat(c, params: ModelParams, transform: str = "simplified"):
    """Concentration to PME variable.

    simplified: 1 - c; general: (d/2)(1 - gamma c); identity: c.
    """
    if transform == "simplified":
        return _apply(lambda v: 1.0 - v, c)
    if transform == "general":
        return _apply(lambda v: 0.5 * params.d * (1.0 - params.gamma * v), c)
    if transform == "identity":
        return _apply(lambda v: v + 0.0, c)
    raise ValueError(f"unknown transform {transform!r}")


def from_hat(chat, params: ModelParams, transform: str = "simplified"):
    if transform == "simplified":
        return _apply(lambda v: 1.0 - v, chat)
    if transform == "general":
        return _apply(lambda v: (1.0 - 2.0 * v / params.d) / params.gamma, chat)
    if transform == "identity":
        return _apply(lambda v: v + 0.0, chat)
    raise ValueError(f"unknown transform {transform!r}")


def phi(c, params: ModelParams):
    """Phi(c) = d c - d (gamma/2) c^2, the antiderivative of D with Phi(0) = 0."""
    c = np.asarray(c, dtype=float) if np.ndim(c) else c
    return params.d * c - 0.5 * params.d * params.gamma * c * c


def phi_prime(c, params: ModelParams):
    c = np.asarray(c, dtype=float) if np.ndim(c) else c
    return params.d * (1.0 - params.gamma * c)


def perikinetic_rate(c_field, alpha: float, d: float, mesh: MeshGrid) -> ScalarField:
    """Weak-form nodal residual r_i = 2 alpha d <c grad c, grad phi_i>.

    Diagnostic only: the solver never adds this term, it is already part of
    the nonlinear flux.
    """
    c = nodal_values(c_field, mesh)
    A = assemble_stiffness(mesh, c, kappa=1.0, delta=0.0)
    return ScalarField(mesh, 2.0 * alpha * d * (A @ c))


def concentration_step(mesh: MeshGrid, c_prev, c_guess, law: CoefficientLaw, tau: float,
                       boundary_c: float = 0.0, lumped_mass: bool = True) -> ScalarField:
    """One frozen-coefficient implicit Euler step of c_t = div(D(c) grad c).

    Works in concentration variables with the coefficient D(c_guess); used to
    cross-check the PME route, which never forms D explicitly.
    """
    prev = nodal_values(c_prev, mesh)
    coef = diffusion_coefficient(law, nodal_values(c_guess, mesh))
    M = assemble_mass(mesh, lumped=lumped_mass)
    K, b = apply_dirichlet(M + tau * assemble_stiffness(mesh, coef), M @ prev, mesh, boundary_c)
    x, _ = solve_direct(K, b)
    return ScalarField(mesh, x)
