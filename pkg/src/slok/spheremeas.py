"""Points, symmetric direction grids, and probability measures on S^{n-1}.

Measures come in two flavors: densities with respect to the uniform
probability measure sigma on a symmetric grid (n=2 only), and weighted
atoms (n=2 or n=3).  Both are symmetrized on construction; the antipodal
structure of every grid is stored explicitly so that evenness checks are
exact rather than approximate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import config


def unit_vector(coords) -> np.ndarray:
    """Return coords renormalized to unit length.

    Raises ValueError on (near-)zero input or unsupported dimension.
    """
    v = np.asarray(coords, dtype=float)
    if v.ndim != 1 or v.shape[0] not in (2, 3):
        raise ValueError(f"expected a vector of length 2 or 3, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


@dataclass(frozen=True)
class DirectionGrid:
    """Symmetric discretization of S^{n-1} with quadrature weights for sigma.

    nodes[antipode_index[i]] == -nodes[i] exactly; sigma weights are
    antipode-invariant and sum to 1.
    """

    nodes: np.ndarray            # (M, n)
    sigma_weights: np.ndarray    # (M,)
    antipode_index: np.ndarray   # (M,) permutation

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.sigma_weights.setflags(write=False)
        self.antipode_index.setflags(write=False)
        M = self.nodes.shape[0]
        if not np.array_equal(self.nodes[self.antipode_index], -self.nodes):
            raise ValueError("antipodes must be stored exactly")
        ai = self.antipode_index
        if np.any(ai[ai] != np.arange(M)) or np.any(ai == np.arange(M)):
            raise ValueError("antipode map must be a fixed-point-free involution")
        if not np.array_equal(self.sigma_weights[ai], self.sigma_weights):
            raise ValueError("sigma weights must be antipode-invariant")
        if abs(self.sigma_weights.sum() - 1.0) > config.WEIGHT_SUM_TOL:
            raise ValueError("sigma weights must sum to 1")
        if np.any(self.sigma_weights <= 0):
            raise ValueError("sigma weights must be positive")

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def angles(self) -> np.ndarray:
        """Node angles in [0, 2*pi) (n=2 grids only)."""
        if self.dim != 2:
            raise ValueError("angles are defined for circle grids only")
        return np.mod(np.arctan2(self.nodes[:, 1], self.nodes[:, 0]), 2 * np.pi)


@dataclass(frozen=True)
class GridDensity:
    """Probability density with respect to sigma on a DirectionGrid."""

    grid: DirectionGrid
    rho: np.ndarray
    symmetric: bool = field(default=False)

    def __post_init__(self):
        self.rho.setflags(write=False)
        if self.rho.shape != (self.grid.size,):
            raise ValueError("rho must have one entry per grid node")
        if np.any(self.rho < 0):
            raise ValueError("density values must be nonnegative")
        mass = float(self.rho @ self.grid.sigma_weights)
        if abs(mass - 1.0) > config.MASS_TOL:
            raise ValueError(f"density mass {mass} is not 1")
        if self.symmetric and not np.array_equal(
            self.rho[self.grid.antipode_index], self.rho
        ):
            raise ValueError("symmetric flag requires rho[i] == rho[antipode(i)]")

    @property
    def node_weights(self) -> np.ndarray:
        """Per-node masses rho_i * sigma_i."""
        return self.rho * self.grid.sigma_weights

    def neg_log(self) -> np.ndarray:
        """-log rho, the potential of the density (+inf where rho = 0)."""
        with np.errstate(divide="ignore"):
            return -np.log(self.rho)

    def to_atoms(self) -> "AtomicMeasure":
        keep = self.node_weights > 0
        return AtomicMeasure(
            points=self.grid.nodes[keep].copy(),
            weights=self.node_weights[keep].copy(),
            symmetric=self.symmetric,
        )


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported probability measure on S^{n-1}."""

    points: np.ndarray    # (m, n)
    weights: np.ndarray   # (m,)
    symmetric: bool = field(default=False)

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)
        if self.points.ndim != 2 or self.points.shape[1] not in (2, 3):
            raise ValueError("points must be an (m, 2) or (m, 3) array")
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("one weight per point required")
        if np.any(self.weights <= 0):
            raise ValueError("atom weights must be positive")
        if abs(self.weights.sum() - 1.0) > config.WEIGHT_SUM_TOL:
            raise ValueError("atom weights must sum to 1")
        norms = np.linalg.norm(self.points, axis=1)
        if np.any(np.abs(norms - 1.0) > config.UNIT_TOL):
            raise ValueError("atoms must lie on the unit sphere")
        if self.symmetric and not _is_antipodally_closed(self.points, self.weights):
            raise ValueError("symmetric flag requires antipodal closure")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _is_antipodally_closed(points, weights, tol=config.ATOM_MERGE_TOL):
    for p, w in zip(points, weights):
        d = np.linalg.norm(points + p, axis=1)
        j = int(np.argmin(d))
        if d[j] > tol or abs(weights[j] - w) > config.WEIGHT_SUM_TOL:
            return False
    return True


def make_circle_grid(M: int) -> DirectionGrid:
    """Uniform symmetric grid of M nodes on S^1 (M even, M >= 8)."""
    if M % 2 != 0 or M < 8:
        raise ValueError("M must be an even integer >= 8")
    theta = 2 * np.pi * np.arange(M) / M
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    # store antipodes exactly, not through cos/sin round-off
    half = M // 2
    nodes[half:] = -nodes[:half]
    weights = np.full(M, 1.0 / M)
    antipode = (np.arange(M) + half) % M
    return DirectionGrid(nodes=nodes, sigma_weights=weights, antipode_index=antipode)


def make_sym_directions(points, weights) -> AtomicMeasure:
    """Build a symmetric atomic measure from arbitrary points and weights.

    Each point contributes half of its weight to itself and half to its
    antipode; points within ATOM_MERGE_TOL angular distance are merged and
    the total weight is normalized to 1.
    """
    pts = [unit_vector(p) for p in points]
    ws = np.asarray(weights, dtype=float)
    if len(pts) == 0:
        raise ValueError("at least one point required")
    if ws.shape != (len(pts),) or np.any(ws < 0):
        raise ValueError("weights must be nonnegative, one per point")
    total = ws.sum()
    if total <= 0:
        raise ValueError("total weight must be positive")
    ws = ws / total

    merged_pts: list[np.ndarray] = []
    merged_ws: list[float] = []

    def _add(p, w):
        for i, q in enumerate(merged_pts):
            # chordal distance tolerance matches the angular one at first order
            if np.linalg.norm(q - p) <= config.ATOM_MERGE_TOL:
                merged_ws[i] += w
                return
        merged_pts.append(p)
        merged_ws.append(w)

    for p, w in zip(pts, ws):
        _add(p, w / 2)
        _add(-p, w / 2)

    points_arr = np.array(merged_pts)
    weights_arr = np.array(merged_ws)
    weights_arr /= weights_arr.sum()
    return AtomicMeasure(points=points_arr, weights=weights_arr, symmetric=True)


def uniform_density(grid: DirectionGrid) -> GridDensity:
    """The uniform measure sigma as a density (rho identically 1)."""
    return GridDensity(grid=grid, rho=np.ones(grid.size), symmetric=True)


def make_symmetric_density(grid: DirectionGrid, values) -> GridDensity:
    """Normalize nonnegative node values into a symmetric GridDensity.

    Antipodal pairs are averaged so the evenness invariant holds exactly
    even when the input is only even up to round-off.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.size,):
        raise ValueError("one value per grid node required")
    if np.any(v < 0):
        raise ValueError("density values must be nonnegative")
    v = 0.5 * (v + v[grid.antipode_index])
    mass = v @ grid.sigma_weights
    if mass <= 0:
        raise ValueError("total mass must be positive")
    return GridDensity(grid=grid, rho=v / mass, symmetric=True)


def bin_to_grid(m: AtomicMeasure, grid: DirectionGrid) -> GridDensity:
    """Assign each atom's mass to its nearest grid node (ties to lower index)."""
    if m.dim != grid.dim:
        raise ValueError("measure and grid dimensions differ")
    mass = np.zeros(grid.size)
    dots = m.points @ grid.nodes.T
    for a in range(m.size):
        # argmax returns the lowest index among ties
        mass[int(np.argmax(dots[a]))] += m.weights[a]
    rho = mass / grid.sigma_weights
    return GridDensity(grid=grid, rho=rho, symmetric=m.symmetric)


def measure_to_json(m) -> str:
    """Serialize a measure to the interchange JSON document."""
    if isinstance(m, AtomicMeasure):
        atoms = [[*map(float, p), float(w)] for p, w in zip(m.points, m.weights)]
        return json.dumps({"n": m.dim, "atoms": atoms})
    if isinstance(m, GridDensity):
        if m.grid.dim != 2:
            raise ValueError("grid densities serialize for n=2 only")
        return json.dumps(
            {"n": 2, "grid_M": m.grid.size, "rho": [float(r) for r in m.rho]}
        )
    raise TypeError(f"cannot serialize {type(m).__name__}")


def measure_from_json(text: str):
    """Inverse of measure_to_json; round-trips finite values bit-exactly."""
    doc = json.loads(text)
    n = int(doc["n"])
    if "atoms" in doc:
        arr = np.array(doc["atoms"], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != n + 1:
            raise ValueError("malformed atoms array")
        m = AtomicMeasure(points=arr[:, :n].copy(), weights=arr[:, n].copy())
        if _is_antipodally_closed(m.points, m.weights):
            m = AtomicMeasure(points=m.points, weights=m.weights, symmetric=True)
        return m
    if "rho" in doc:
        grid = make_circle_grid(int(doc["grid_M"]))
        rho = np.array(doc["rho"], dtype=float)
        sym = bool(np.array_equal(rho[grid.antipode_index], rho))
        return GridDensity(grid=grid, rho=rho, symmetric=sym)
    raise ValueError("measure document needs either 'atoms' or 'rho'")
