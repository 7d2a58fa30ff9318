"""Structured Q1 quadrilateral meshes of axis-aligned rectangles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Reference corners in counter-clockwise order; local index a sits at REF_CORNERS[a].
REF_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,)

    def integrate(self, f) -> float:
        """Integrate f(xi, eta) over the reference square [-1, 1]^2."""
        return float(np.sum(self.weights * f(self.points[:, 0], self.points[:, 1])))


def gauss_2x2() -> QuadratureRule:
    g = 1.0 / np.sqrt(3.0)
    pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    return QuadratureRule(points=pts, weights=np.ones(4))


def eval_basis(local_index: int, ref_point) -> tuple[float, np.ndarray]:
    """Value and reference gradient of bilinear shape function `local_index`."""
    if local_index not in (0, 1, 2, 3):
        raise ValueError(f"local_index must be 0..3, got {local_index}")
    xi, eta = ref_point
    sx, sy = REF_CORNERS[local_index]
    value = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta)
    grad = np.array([0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi)])
    return value, grad


def basis_tables(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shape values (nq, 4) and reference gradients (nq, 4, 2) at the given points."""
    xi = points[:, 0][:, None]
    eta = points[:, 1][:, None]
    sx = REF_CORNERS[:, 0][None, :]
    sy = REF_CORNERS[:, 1][None, :]
    vals = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta)
    grads = np.stack(
        [0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi)], axis=-1
    )
    return vals, grads


@dataclass(frozen=True)
class MeshGrid:
    """Tensor-product mesh; node (i, j) has index j*(nx+1) + i, element (i, j) index j*nx + i."""

    domain_min: tuple[float, float]
    domain_max: tuple[float, float]
    nx: int
    ny: int

    @property
    def h_x(self) -> float:
        return (self.domain_max[0] - self.domain_min[0]) / self.nx

    @property
    def h_y(self) -> float:
        return (self.domain_max[1] - self.domain_min[1]) / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Node array shape (ny+1, nx+1) for row-major reshaping."""
        return (self.ny + 1, self.nx + 1)

    @property
    def area(self) -> float:
        return (self.domain_max[0] - self.domain_min[0]) * (
            self.domain_max[1] - self.domain_min[1]
        )

    @property
    def element_area(self) -> float:
        return self.h_x * self.h_y

    @cached_property
    def x(self) -> np.ndarray:
        return self.domain_min[0] + self.h_x * np.arange(self.nx + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return self.domain_min[1] + self.h_y * np.arange(self.ny + 1)

    @cached_property
    def coords(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.x, self.y, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def connectivity(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="xy")
        n0 = (j * (self.nx + 1) + i).ravel()
        row = self.nx + 1
        return np.column_stack([n0, n0 + 1, n0 + 1 + row, n0 + row])

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        flags = np.zeros(self.shape, dtype=bool)
        flags[0, :] = flags[-1, :] = True
        flags[:, 0] = flags[:, -1] = True
        return flags.ravel()

    @cached_property
    def jacobian(self) -> np.ndarray:
        """Constant reference-to-physical Jacobian diag(h_x/2, h_y/2)."""
        return np.diag([self.h_x / 2.0, self.h_y / 2.0])

    def element_centers(self) -> np.ndarray:
        return self.coords[self.connectivity].mean(axis=1)

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Physical coordinates (ne, nq, 2) of reference points in every element."""
        origin = self.coords[self.connectivity[:, 0]]
        offset = (np.asarray(ref_points) + 1.0) * 0.5 * np.array([self.h_x, self.h_y])
        return origin[:, None, :] + offset[None, :, :]

    def nodes_aligned(self, breakpoints_x, breakpoints_y, rtol: float = 1e-9) -> bool:
        """True if every breakpoint falls on a mesh line."""
        for pts, lo, h in (
            (breakpoints_x, self.domain_min[0], self.h_x),
            (breakpoints_y, self.domain_min[1], self.h_y),
        ):
            for p in pts:
                k = (p - lo) / h
                if abs(k - round(k)) > rtol * max(1.0, abs(k)):
                    return False
        return True

    def same_as(self, other: "MeshGrid") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and tuple(self.domain_min) == tuple(other.domain_min)
            and tuple(self.domain_max) == tuple(other.domain_max)
        )


def build_mesh(domain, nx: int, ny: int) -> MeshGrid:
    """Mesh of domain ((x_min, y_min), (x_max, y_max)) with nx by ny elements."""
    (x0, y0), (x1, y1) = domain
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive integers, got nx={nx}, ny={ny}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {domain!r}")
    return MeshGrid((float(x0), float(y0)), (float(x1), float(y1)), int(nx), int(ny))
