"""Support and radial functions of symmetric convex bodies.

Two regimes are supported.  On the circle a body is given by positive even
support values on a DirectionGrid, differentiated by periodic central
differences; strict convexity means h + h'' > 0 at every node.  Polytopes
in n=2,3 are given by support numbers over a symmetric direction set and
handled by exact halfspace-intersection geometry (via the dual convex
hull), so volumes and cone measures carry no quadrature error.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import config
from .errors import EmptyInterior, NonConvex
from .spheremeas import (
    AtomicMeasure,
    DirectionGrid,
    make_circle_grid,
    make_symmetric_density,
    unit_vector,
)

SMOOTH = "smooth_circle"
POLYTOPE = "polytope"


@dataclass(frozen=True)
class SupportFn:
    """Support function of a symmetric convex body.

    regime smooth_circle: values on a circle DirectionGrid.
    regime polytope: support numbers over an antipodally closed direction
    set (normals includes both u and -u with equal values).
    """

    regime: str
    values: np.ndarray
    grid: DirectionGrid | None = None         # smooth regime
    normals: np.ndarray | None = None         # polytope regime
    antipode_index: np.ndarray | None = None  # polytope regime

    def __post_init__(self):
        self.values.setflags(write=False)
        if np.any(self.values <= 0):
            raise ValueError("support values must be positive")
        if self.regime == SMOOTH:
            if self.grid is None or self.grid.dim != 2:
                raise ValueError("smooth regime requires a circle grid")
            ai = self.grid.antipode_index
        elif self.regime == POLYTOPE:
            if self.normals is None or self.antipode_index is None:
                raise ValueError("polytope regime requires normals and antipodes")
            self.normals.setflags(write=False)
            self.antipode_index.setflags(write=False)
            ai = self.antipode_index
        else:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not np.array_equal(self.values[ai], self.values):
            raise ValueError("support values must be even (exact antipodal equality)")

    @property
    def directions(self) -> np.ndarray:
        return self.grid.nodes if self.regime == SMOOTH else self.normals

    @property
    def antipodes(self) -> np.ndarray:
        return self.grid.antipode_index if self.regime == SMOOTH else self.antipode_index

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def scaled(self, lam: float) -> "SupportFn":
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        return SupportFn(
            regime=self.regime,
            values=self.values * lam,
            grid=self.grid,
            normals=self.normals,
            antipode_index=self.antipode_index,
        )


@dataclass(frozen=True)
class RadialFn:
    """Radial function of a symmetric star body, same regimes as SupportFn."""

    regime: str
    values: np.ndarray
    grid: DirectionGrid | None = None
    directions_arr: np.ndarray | None = None
    antipode_index: np.ndarray | None = None

    def __post_init__(self):
        self.values.setflags(write=False)
        if np.any(self.values <= 0):
            raise ValueError("radial values must be positive")
        ai = self.grid.antipode_index if self.regime == SMOOTH else self.antipode_index
        if not np.array_equal(self.values[ai], self.values):
            raise ValueError("radial values must be even")

    @property
    def directions(self) -> np.ndarray:
        return self.grid.nodes if self.regime == SMOOTH else self.directions_arr


def _even_exact(values, antipode_index):
    v = np.asarray(values, dtype=float)
    return 0.5 * (v + v[antipode_index])


def smooth_support(grid: DirectionGrid, values) -> SupportFn:
    """Build a smooth-regime support function, symmetrizing exactly."""
    return SupportFn(regime=SMOOTH, values=_even_exact(values, grid.antipode_index), grid=grid)


def polytope_support(normals, values) -> SupportFn:
    """Build a polytope-regime support function from one direction per pair.

    Directions are normalized and mirrored; passing an already antipodally
    closed set (with equal values on pairs) is also accepted.
    """
    dirs = np.array([unit_vector(u) for u in normals])
    h = np.asarray(values, dtype=float)
    if h.shape != (dirs.shape[0],):
        raise ValueError("one support number per direction required")
    # detect whether antipodes are already present
    full_dirs = []
    full_h = []
    for u, hv in zip(dirs, h):
        dup = False
        for i, w in enumerate(full_dirs):
            if np.linalg.norm(w - u) <= config.ATOM_MERGE_TOL:
                dup = True
                break
            if np.linalg.norm(w + u) <= config.ATOM_MERGE_TOL:
                if abs(full_h[i] - hv) > 1e-12:
                    raise ValueError("antipodal directions carry unequal support numbers")
                dup = True
                break
        if not dup:
            full_dirs.append(u)
            full_h.append(float(hv))
    k = len(full_dirs)
    all_dirs = np.vstack([np.array(full_dirs), -np.array(full_dirs)])
    all_h = np.concatenate([full_h, full_h])
    antipode = np.concatenate([np.arange(k) + k, np.arange(k)])
    return SupportFn(
        regime=POLYTOPE, values=all_h, normals=all_dirs, antipode_index=antipode
    )


# ---------------------------------------------------------------------------
# smooth-circle differential operators

def d2h(sf: SupportFn, check: bool = True) -> np.ndarray:
    """h + h'' per node by periodic central second difference.

    With check=True raises NonConvex when any entry is <= 0.
    """
    if sf.regime != SMOOTH:
        raise ValueError("d2h is defined in the smooth regime")
    h = sf.values
    M = sf.grid.size
    dth = 2 * np.pi / M
    second = (np.roll(h, -1) - 2 * h + np.roll(h, 1)) / dth**2
    out = h + second
    if check and np.any(out <= 0):
        raise NonConvex(f"min h + h'' = {out.min():.3e} <= 0")
    return out


def support_gradient(sf: SupportFn) -> np.ndarray:
    """h' per node by periodic central difference."""
    if sf.regime != SMOOTH:
        raise ValueError("gradient is defined in the smooth regime")
    h = sf.values
    dth = 2 * np.pi / sf.grid.size
    return (np.roll(h, -1) - np.roll(h, 1)) / (2 * dth)


def curvature(sf: SupportFn) -> np.ndarray:
    """Boundary curvature k = 1/(h + h'') at each grid node."""
    return 1.0 / d2h(sf)


# ---------------------------------------------------------------------------
# polytope geometry

@dataclass(frozen=True)
class Facet:
    normal_index: int
    vertex_indices: np.ndarray  # ordered along the facet boundary
    area: float


@dataclass(frozen=True)
class Body:
    """A realized convex body: support data plus derived geometry."""

    support: SupportFn
    volume: float
    vertices: np.ndarray | None = None     # polytope regime
    facets: tuple[Facet, ...] | None = None
    dropped_facets: tuple[int, ...] = field(default=())

    @property
    def surface_area(self) -> float:
        if self.facets is None:
            raise ValueError("facet data available in the polytope regime only")
        return float(sum(f.area for f in self.facets))


def _dedup_rows(rows, tol):
    out: list[np.ndarray] = []
    index = []
    for r in rows:
        for i, q in enumerate(out):
            if np.linalg.norm(q - r) <= tol:
                index.append(i)
                break
        else:
            index.append(len(out))
            out.append(r)
    return np.array(out), np.array(index, dtype=int)


def halfspace_intersection(sf: SupportFn):
    """Vertices and facets of {x : <u_j, x> <= h_j}.

    Returns (vertices, facets) where facets maps active normal index to the
    ordered vertex indices on that facet.  Raises EmptyInterior when the
    intersection degenerates.
    """
    if sf.regime != POLYTOPE:
        raise ValueError("halfspace intersection applies to the polytope regime")
    U = sf.normals
    h = sf.values
    n = U.shape[1]
    dual_pts = U / h[:, None]
    try:
        hull = ConvexHull(dual_pts)
    except QhullError as exc:
        raise EmptyInterior(f"degenerate direction set: {exc}") from exc

    scale = float(np.max(h))
    if n == 2:
        order = hull.vertices  # counterclockwise
        k = len(order)
        if k < 3:
            raise EmptyInterior("fewer than 3 active facets")
        verts = []
        for a in range(k):
            i, j = order[a], order[(a + 1) % k]
            A = np.array([U[i], U[j]])
            det = np.linalg.det(A)
            if abs(det) < 1e-14:
                raise EmptyInterior("adjacent facets are parallel")
            verts.append(np.linalg.solve(A, np.array([h[i], h[j]])))
        verts = np.array(verts)
        facets = {}
        for a in range(k):
            j = order[a]
            # facet j runs between the vertices created with its two neighbors
            vprev = (a - 1) % k
            facets[int(j)] = np.array([vprev, a], dtype=int)
        return verts, facets

    # n == 3: each dual hull facet plane <w, x> = 1 is a primal vertex w
    raw = []
    for eq in hull.equations:
        normal, offset = eq[:3], eq[3]
        # plane: <normal, x> + offset = 0 with offset < 0 (origin inside)
        if offset >= -1e-14:
            raise EmptyInterior("origin not interior to the dual body")
        raw.append(normal / (-offset))
    verts, _ = _dedup_rows(raw, 1e-9 * scale)

    facets = {}
    sup = verts @ U.T  # (V, K)
    for j in range(U.shape[0]):
        on = np.nonzero(np.abs(sup[:, j] - h[j]) <= 1e-9 * scale)[0]
        if len(on) < 3:
            continue
        # order the facet polygon by angle around its normal
        u = U[j]
        center = verts[on].mean(axis=0)
        e1 = verts[on[0]] - center
        e1 -= u * (e1 @ u)
        nrm = np.linalg.norm(e1)
        if nrm < 1e-14:
            continue
        e1 /= nrm
        e2 = np.cross(u, e1)
        rel = verts[on] - center
        ang = np.arctan2(rel @ e2, rel @ e1)
        facets[int(j)] = on[np.argsort(ang)]
    if not facets:
        raise EmptyInterior("no facets found")
    return verts, facets


def _facet_area(verts, idx, n):
    if n == 2:
        return float(np.linalg.norm(verts[idx[1]] - verts[idx[0]]))
    pts = verts[idx]
    area = 0.0
    for a in range(1, len(pts) - 1):
        area += 0.5 * np.linalg.norm(
            np.cross(pts[a] - pts[0], pts[a + 1] - pts[0])
        )
    return float(area)


def build_body(sf: SupportFn) -> Body:
    """Realize a support function as a Body with cached volume."""
    if sf.regime == SMOOTH:
        dd = d2h(sf)
        h = sf.values
        vol = 0.5 * float((h * dd) @ sf.grid.sigma_weights) * 2 * np.pi
        return Body(support=sf, volume=vol)

    verts, facet_map = halfspace_intersection(sf)
    n = sf.dim
    facets = []
    vol = 0.0
    for j, idx in facet_map.items():
        area = _facet_area(verts, idx, n)
        facets.append(Facet(normal_index=j, vertex_indices=idx, area=area))
        vol += sf.values[j] * area / n
    if vol <= 0:
        raise EmptyInterior("nonpositive volume")
    rel_floor = config.DEGENERATE_FACET_REL_TOL * vol ** ((n - 1) / n)
    kept = [f for f in facets if f.area >= rel_floor]
    dropped = tuple(f.normal_index for f in facets if f.area < rel_floor)
    if dropped:
        warnings.warn(f"dropped {len(dropped)} degenerate facet(s)", RuntimeWarning)
    return Body(
        support=sf,
        volume=float(vol),
        vertices=verts,
        facets=tuple(kept),
        dropped_facets=dropped,
    )


def body_volume(sf: SupportFn) -> float:
    """|Omega_h|: quadrature of (1/2) int h (h+h'') on the circle, exact cone
    decomposition (1/n) sum h_j area_j for polytopes."""
    return build_body(sf).volume


def cone_measure(sf: SupportFn):
    """The cone measure of Omega_h as a probability measure.

    Smooth regime: GridDensity with rho proportional to h (h + h'').
    Polytope regime: atoms at active facet normals with weights
    h_j area_j / (n |Omega|).
    """
    if sf.regime == SMOOTH:
        return make_symmetric_density(sf.grid, sf.values * d2h(sf))
    body = build_body(sf)
    n = sf.dim
    idx = [f.normal_index for f in body.facets]
    w = np.array([sf.values[f.normal_index] * f.area for f in body.facets])
    w /= n * body.volume
    w /= w.sum()  # exact unit mass; cone volumes already sum to |Omega|
    return AtomicMeasure(points=sf.normals[idx].copy(), weights=w, symmetric=True)


# ---------------------------------------------------------------------------
# support <-> radial transforms

def radial_values(sf: SupportFn, directions: np.ndarray) -> np.ndarray:
    """Radial function of Omega_h at the given directions.

    1/r(y) = max_j <u_j, y> / h_j over the stored direction set; exact for
    polytopes, discretization of the Legendre-type transform otherwise.
    """
    dots = np.asarray(directions) @ sf.directions.T
    inv = np.max(dots / sf.values[None, :], axis=1)
    if np.any(inv <= 0):
        raise ValueError("direction set does not surround some query direction")
    return 1.0 / inv


def support_values(rf: RadialFn, directions: np.ndarray) -> np.ndarray:
    """Support function from radial samples: h(x) = max_j r_j <x, y_j>."""
    dots = np.asarray(directions) @ rf.directions.T
    return np.max(dots * rf.values[None, :], axis=1)


def radial_from_support(sf: SupportFn) -> RadialFn:
    """Discrete Legendre-type transform h -> r on the same direction set."""
    vals = radial_values(sf, sf.directions)
    if sf.regime == SMOOTH:
        return RadialFn(
            regime=SMOOTH, values=_even_exact(vals, sf.grid.antipode_index), grid=sf.grid
        )
    return RadialFn(
        regime=POLYTOPE,
        values=_even_exact(vals, sf.antipode_index),
        directions_arr=sf.normals,
        antipode_index=sf.antipode_index,
    )


def support_from_radial(rf: RadialFn) -> SupportFn:
    """Discrete Legendre-type transform r -> h on the same direction set."""
    vals = support_values(rf, rf.directions)
    if rf.regime == SMOOTH:
        return smooth_support(rf.grid, vals)
    return SupportFn(
        regime=POLYTOPE,
        values=_even_exact(vals, rf.antipode_index),
        normals=rf.directions_arr,
        antipode_index=rf.antipode_index,
    )


def polar_volume(sf: SupportFn) -> float:
    """|Omega^o|: |B| int h^{-n} dsigma on the circle; exact dual-hull volume
    for polytopes."""
    n = sf.dim
    if sf.regime == SMOOTH:
        d2h(sf)  # admissibility gate
        return config.BALL_VOLUME[n] * float(
            (sf.values ** (-n)) @ sf.grid.sigma_weights
        )
    dual_pts = sf.normals / sf.values[:, None]
    try:
        return float(ConvexHull(dual_pts).volume)
    except QhullError as exc:
        raise EmptyInterior(f"degenerate polar body: {exc}") from exc


# ---------------------------------------------------------------------------
# analytic trigonometric bodies (test instruments and random sweeps)

@dataclass(frozen=True)
class TrigSupport:
    """h(theta) = c0 + sum_k a_k cos(2 k theta + phi_k), an even analytic
    support function with closed-form derivatives."""

    c0: float
    harmonics: tuple[tuple[int, float, float], ...]  # (k, amplitude, phase)

    def value(self, theta):
        th = np.asarray(theta, dtype=float)
        out = np.full_like(th, self.c0)
        for k, a, phi in self.harmonics:
            out += a * np.cos(2 * k * th + phi)
        return out

    def d1(self, theta):
        th = np.asarray(theta, dtype=float)
        out = np.zeros_like(th)
        for k, a, phi in self.harmonics:
            out -= 2 * k * a * np.sin(2 * k * th + phi)
        return out

    def d2(self, theta):
        th = np.asarray(theta, dtype=float)
        out = np.zeros_like(th)
        for k, a, phi in self.harmonics:
            out -= (2 * k) ** 2 * a * np.cos(2 * k * th + phi)
        return out

    def min_d2h(self, samples=4096):
        th = np.linspace(0, np.pi, samples, endpoint=False)
        return float(np.min(self.value(th) + self.d2(th)))

    def on_grid(self, grid: DirectionGrid) -> SupportFn:
        return smooth_support(grid, self.value(grid.angles))


def random_trig_support(rng, max_harmonic=6, amplitude=0.3, floor=0.05,
                        max_tries=1000) -> TrigSupport:
    """Draw an even trigonometric support function with min (h + h'') >= floor.

    Harmonic amplitudes decay like 1/k^2; draws violating the convexity
    floor are rejected and redrawn.
    """
    for _ in range(max_tries):
        K = int(rng.integers(1, max_harmonic + 1))
        harmonics = tuple(
            (k, float(rng.uniform(-amplitude, amplitude)) / k**2,
             float(rng.uniform(0, 2 * np.pi)))
            for k in range(1, K + 1)
        )
        cand = TrigSupport(c0=1.0, harmonics=harmonics)
        if cand.min_d2h() >= floor:
            return cand
    raise RuntimeError("could not draw an admissible support function")


# ---------------------------------------------------------------------------
# serialization

def body_to_json(sf: SupportFn) -> str:
    if sf.regime == SMOOTH:
        return json.dumps(
            {"regime": "smooth", "grid_M": sf.grid.size,
             "h": [float(v) for v in sf.values]}
        )
    return json.dumps(
        {"regime": "polytope",
         "normals": [[float(c) for c in u] for u in sf.normals],
         "h": [float(v) for v in sf.values]}
    )


def body_from_json(text: str) -> SupportFn:
    doc = json.loads(text)
    if doc["regime"] == "smooth":
        grid = make_circle_grid(int(doc["grid_M"]))
        return smooth_support(grid, np.array(doc["h"], dtype=float))
    if doc["regime"] == "polytope":
        return polytope_support(np.array(doc["normals"], dtype=float),
                                np.array(doc["h"], dtype=float))
    raise ValueError(f"unknown regime {doc['regime']!r}")


def export_profile_csv(sf: SupportFn) -> str:
    """CSV of (theta, h, h+h'', k) rows for plotting (smooth regime)."""
    dd = d2h(sf)
    lines = ["theta,h,d2h,curvature"]
    for th, h, w in zip(sf.grid.angles, sf.values, dd):
        lines.append(f"{th:.17g},{h:.17g},{w:.17g},{1.0 / w:.17g}")
    return "\n".join(lines) + "\n"
