"""Run configuration: flat ``section.key = value`` files and initial data.

Example::

    # experiment 1
    mesh.h_exp = 7
    time.tau = 1e-4
    time.n_steps = 600
    initial.kind = block

Floats accept the ``base^exponent`` shorthand, e.g. ``time.tau = 10^-6.5``.
Lists are comma separated. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .assembly import ScalarField, l2_project
from .mesh import MeshGrid, build_mesh

log = logging.getLogger(__name__)

PRESETS = ("experiment1", "experiment2", "heat-reference", "barenblatt")
INITIAL_KINDS = ("block", "complement", "ring", "constant", "barenblatt")

# Jump locations of the indicator initial data, per axis.
BREAKPOINTS = {
    "block": ((0.25, 0.75), (0.5, 1.5)),
    "complement": ((0.25, 0.75), (0.5, 1.5)),
    "ring": ((0.25, 0.4, 0.6, 0.75), (0.5, 0.75, 1.0, 1.5)),
}


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        loc = ""
        if key is not None:
            loc += f" [{key}]"
        if line is not None:
            loc += f" (line {line})"
        super().__init__(message + loc)
        self.key = key
        self.line = line


def parse_float(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return float(base) ** float(exp)
    return float(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(parse_float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


# key -> (RunConfig attribute, converter)
KEYS = {
    "domain.x_min": ("x_min", parse_float),
    "domain.y_min": ("y_min", parse_float),
    "domain.x_max": ("x_max", parse_float),
    "domain.y_max": ("y_max", parse_float),
    "mesh.nx": ("nx", int),
    "mesh.ny": ("ny", int),
    "mesh.h_exp": ("h_exp", int),
    "time.tau": ("tau", parse_float),
    "time.n_steps": ("n_steps", int),
    "picard.tol": ("picard_tol", parse_float),
    "picard.iter_max": ("picard_iter_max", int),
    "picard.policy": ("picard_policy", _str),
    "model.law": ("law", _str),
    "model.d": ("d", parse_float),
    "model.gamma": ("gamma", parse_float),
    "model.temperature": ("temperature", parse_float),
    "model.transform": ("transform", _str),
    "model.velocity": ("velocity", _floats),
    "assembly.kappa": ("kappa", parse_float),
    "assembly.delta": ("delta", parse_float),
    "assembly.lumped_mass": ("lumped_mass", _bool),
    "boundary.value": ("boundary_value", parse_float),
    "initial.kind": ("initial", _str),
    "initial.value": ("initial_value", parse_float),
    "initial.C": ("barenblatt_C", parse_float),
    "initial.t0": ("barenblatt_t0", parse_float),
    "initial.lumped": ("initial_lumped", _bool),
    "initial.subdivisions": ("initial_subdivisions", int),
    "solver.method": ("solver", _str),
    "solver.rtol": ("solver_rtol", parse_float),
    "output.snapshot_every": ("snapshot_every", int),
    "output.snapshot_steps": ("snapshot_steps", _ints),
    "output.dir": ("output_dir", _str),
    "output.vtk": ("write_vtk", _bool),
    "diagnostics.thetas": ("thetas", _floats),
    "run.blowup_threshold": ("blowup_threshold", parse_float),
}


@dataclass
class RunConfig:
    """Scenario description. ``boundary_value`` and the solved variable are in PME (hat) units."""

    name: str = "custom"
    x_min: float = 0.0
    y_min: float = 0.0
    x_max: float = 1.0
    y_max: float = 2.0
    nx: int | None = None
    ny: int | None = None
    h_exp: int | None = 6
    tau: float = 1e-4
    n_steps: int = 600
    picard_tol: float = 1e-8
    picard_iter_max: int = 40
    picard_policy: str = "accept"
    law: str = "vdw_nonlinear"
    d: float = 1.0
    gamma: float = 1.0
    temperature: float = 298.15
    transform: str = "simplified"
    velocity: tuple[float, ...] = ()
    kappa: float = 1.0
    delta: float = 0.0
    lumped_mass: bool = True
    boundary_value: float = 1.0
    initial: str = "block"
    initial_value: float = 0.0
    barenblatt_C: float = 0.1
    barenblatt_t0: float = 0.01
    initial_lumped: bool = True
    initial_subdivisions: int = 1
    solver: str = "auto"
    solver_rtol: float = 1e-12
    snapshot_every: int = 0
    snapshot_steps: tuple[int, ...] = ()
    output_dir: str = "out"
    write_vtk: bool = True
    thetas: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    blowup_threshold: float = 1e6
    warnings: list = field(default_factory=list, repr=False, compare=False)

    # ---- derived objects -------------------------------------------------

    def resolution(self) -> tuple[int, int]:
        if self.nx is not None and self.ny is not None:
            return self.nx, self.ny
        if self.h_exp is None:
            raise ConfigError("either mesh.nx/mesh.ny or mesh.h_exp is required", "mesh.h_exp")
        scale = 2**self.h_exp
        nx = (self.x_max - self.x_min) * scale
        ny = (self.y_max - self.y_min) * scale
        if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
            raise ConfigError("domain edges are not multiples of 2^-h_exp", "mesh.h_exp")
        return int(round(nx)), int(round(ny))

    def mesh(self) -> MeshGrid:
        nx, ny = self.resolution()
        return build_mesh(((self.x_min, self.y_min), (self.x_max, self.y_max)), nx, ny)

    def params(self):
        from .model import ModelParams

        return ModelParams.with_gamma(self.gamma, d=self.d, T=self.temperature)

    def picard(self):
        from .stepper import PicardSettings

        return PicardSettings(self.picard_tol, self.picard_iter_max, self.picard_policy)

    def velocity_field(self):
        if not self.velocity or not any(self.velocity):
            return None
        u1, u2 = self.velocity
        return lambda x, y: (np.full_like(x, u1), np.full_like(y, u2))

    def discretization(self, mesh: MeshGrid | None = None):
        from .stepper import Discretization

        heat = self.law == "heat_constant"
        return Discretization(
            mesh=mesh or self.mesh(),
            tau=self.tau,
            kappa=self.kappa,
            delta=self.delta,
            boundary_value=self.boundary_value,
            velocity=self.velocity_field(),
            lumped_mass=self.lumped_mass,
            solver=self.solver,
            coefficient="constant" if heat else "pme",
            constant=self.d,
            rtol=self.solver_rtol,
        )

    def wants_snapshot(self, n: int) -> bool:
        if n == 0 or n in self.snapshot_steps:
            return True
        return self.snapshot_every > 0 and n % self.snapshot_every == 0

    # ---- validation ------------------------------------------------------

    def validate(self) -> "RunConfig":
        from .model import TRANSFORMS

        checks = [
            (self.tau > 0, "time.tau", "must be positive"),
            (self.n_steps >= 0, "time.n_steps", "must be >= 0"),
            (self.picard_tol > 0, "picard.tol", "must be positive"),
            (self.picard_iter_max >= 1, "picard.iter_max", "must be >= 1"),
            (self.picard_policy in ("accept", "strict"), "picard.policy", "must be accept or strict"),
            (self.law in ("vdw_nonlinear", "heat_constant"), "model.law", "must be vdw_nonlinear or heat_constant"),
            (self.d > 0, "model.d", "must be positive"),
            (self.gamma > 0, "model.gamma", "must be positive"),
            (self.transform in TRANSFORMS, "model.transform", f"must be one of {TRANSFORMS}"),
            (len(self.velocity) in (0, 2), "model.velocity", "needs two components"),
            (self.kappa > 0, "assembly.kappa", "must be positive"),
            (self.delta >= 0, "assembly.delta", "must be >= 0"),
            (self.initial in INITIAL_KINDS, "initial.kind", f"must be one of {INITIAL_KINDS}"),
            (self.initial_subdivisions >= 1, "initial.subdivisions", "must be >= 1"),
            (self.solver in ("auto", "cg", "direct"), "solver.method", "must be auto, cg or direct"),
            (self.solver_rtol > 0, "solver.rtol", "must be positive"),
            (self.snapshot_every >= 0, "output.snapshot_every", "must be >= 0"),
            (all(t > 0 for t in self.thetas) and self.thetas, "diagnostics.thetas", "need positive thresholds"),
            (self.x_max > self.x_min and self.y_max > self.y_min, "domain", "degenerate rectangle"),
        ]
        if self.initial == "barenblatt":
            checks.append((self.barenblatt_C > 0, "initial.C", "must be positive"))
            checks.append((self.barenblatt_t0 > 0, "initial.t0", "must be positive"))
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(msg, key)
        mesh = self.mesh()
        if self.initial in BREAKPOINTS:
            bx, by = BREAKPOINTS[self.initial]
            if not mesh.nodes_aligned(bx, by):
                msg = (f"initial data '{self.initial}' jumps do not fall on mesh lines "
                       f"for nx={mesh.nx}, ny={mesh.ny}; projection is not exact")
                if msg not in self.warnings:
                    self.warnings.append(msg)
                    log.warning(msg)
        return self


def initial_data(config: RunConfig, x, y):
    """Initial concentration c0 at points (x, y), vectorized."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    block = (x >= 0.25) & (x <= 0.75) & (y >= 0.5) & (y <= 1.5)
    kind = config.initial
    if kind == "block":
        return block.astype(float)
    if kind == "complement":
        return 1.0 - block.astype(float)
    if kind == "ring":
        core = (x >= 0.4) & (x <= 0.6) & (y >= 0.75) & (y <= 1.0)
        return np.where(core, 1.5, np.where(block, 1.0, 0.0))
    if kind == "constant":
        return np.full(np.broadcast(x, y).shape, config.initial_value)
    if kind == "barenblatt":
        from .diagnostics import barenblatt

        center = (0.5 * (config.x_min + config.x_max), 0.5 * (config.y_min + config.y_max))
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        return barenblatt(pts, config.barenblatt_t0, config.barenblatt_C, config.kappa, center)
    raise ConfigError(f"unknown initial data {kind!r}", "initial.kind")


def initial_field(config: RunConfig, mesh: MeshGrid | None = None) -> ScalarField:
    """Projected initial data, mapped to the PME variable."""
    from .model import to_hat

    mesh = mesh or config.mesh()
    c0 = l2_project(
        mesh,
        lambda x, y: initial_data(config, x, y),
        lumped=config.initial_lumped,
        subdivisions=config.initial_subdivisions,
    )
    return to_hat(c0, config.params(), config.transform)


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a config file; ``overrides`` maps dotted keys to raw string values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config_text(text, name=path.stem, overrides=overrides)


def parse_config_text(text: str, name: str = "custom", overrides: dict | None = None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        _set(values, key, val, lineno)
    for key, val in (overrides or {}).items():
        _set(values, key, str(val), None)
    cfg = RunConfig(name=name, **values)
    if ("nx" in values or "ny" in values) and "h_exp" not in values:
        cfg.h_exp = None
    return cfg.validate()


def _set(values: dict, key: str, val: str, lineno):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}", key, lineno)
    attr, conv = KEYS[key]
    try:
        values[attr] = conv(val)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value {val!r}: {exc}", key, lineno) from exc
    if attr == "h_exp":
        values.pop("nx", None)
        values.pop("ny", None)


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("vdwpme") / "presets" / f"{name}.cfg"


def load_preset(name: str, overrides: dict | None = None) -> RunConfig:
    text = preset_path(name).read_text()
    return parse_config_text(text, name=name, overrides=overrides)


def replace(config: RunConfig, **changes) -> RunConfig:
    """Copy with changed fields, revalidated."""
    return dataclasses.replace(config, warnings=[], **changes).validate()
