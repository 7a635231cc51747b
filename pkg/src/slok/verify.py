"""Numerical verification of the transport and convexity inequalities.

Each check returns a margin (nonnegative means the inequality holds) and
a verdict record.  Proved inequalities are asserted by callers against
small negative tolerances; the conjectured trace inequality for general
(f, h) pairs is only logged, never asserted, except in the proved sector
(n = 2 with f constant).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .body import (
    POLYTOPE,
    SMOOTH,
    SupportFn,
    body_volume,
    build_body,
    cone_measure,
    d2h,
    polar_volume,
    random_trig_support,
    smooth_support,
)
from .errors import FanMismatch
from .spheremeas import (
    DirectionGrid,
    GridDensity,
    make_symmetric_density,
    uniform_density,
)
from .functionals import entropy
from .transport import solve_plan


@dataclass(frozen=True)
class Verdict:
    name: str
    margin: float
    passed: bool
    tol: float
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "margin": float(self.margin),
            "passed": bool(self.passed),
            "tol": float(self.tol),
            "extras": {k: (float(v) if isinstance(v, (int, float, np.floating))
                           else v) for k, v in self.extras.items()},
        })


def margins_csv(rows, header_lines=()) -> str:
    """Aggregate sweep CSV: one (seed, margin) row per instance."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("seed,margin")
    for seed, margin in rows:
        lines.append(f"{seed},{margin:.17g}")
    return "\n".join(lines) + "\n"


def random_symmetric_density(rng, grid: DirectionGrid, max_harmonic: int = 6,
                             amplitude: float = 0.5) -> GridDensity:
    """rho = exp of a random even trigonometric polynomial, normalized."""
    th = grid.angles
    logrho = np.zeros(grid.size)
    K = int(rng.integers(1, max_harmonic + 1))
    for k in range(1, K + 1):
        a = float(rng.uniform(-amplitude, amplitude)) / k
        phi = float(rng.uniform(0, 2 * np.pi))
        logrho += a * np.cos(2 * k * th + phi)
    return make_symmetric_density(grid, np.exp(logrho))


# ---------------------------------------------------------------------------
# transport-entropy inequality

def verify_entropy_transport(nu: GridDensity) -> Verdict:
    """Margin of Ent(nu)/n >= K(sigma, nu) with LP-exact K."""
    n = nu.grid.dim
    sigma = uniform_density(nu.grid)
    plan, _ = solve_plan(sigma, nu)
    margin = entropy(nu) / n - plan.value
    return Verdict(name="entropy_transport", margin=float(margin),
                   passed=margin >= -1e-8, tol=-1e-8,
                   extras={"entropy": entropy(nu), "K": plan.value})


# ---------------------------------------------------------------------------
# pointwise support-function inequalities (smooth circle)

def _constant_flag(sf: SupportFn) -> bool:
    return float(np.max(sf.values) - np.min(sf.values)) <= 1e-5


def verify_leblog(sf: SupportFn) -> Verdict:
    """int log((h+h'')/h) dsigma <= 0, equality only at constant h."""
    dd = d2h(sf)
    value = float(np.log(dd / sf.values) @ sf.grid.sigma_weights)
    equality = abs(value) <= 1e-8
    return Verdict(name="leblog", margin=float(-value), passed=value <= 1e-8,
                   tol=1e-8,
                   extras={"value": value, "equality_case": equality,
                           "constant_h": _constant_flag(sf)})


def verify_trace(sf: SupportFn) -> Verdict:
    """int dsigma/(h+h'') >= int dsigma/h on the circle."""
    dd = d2h(sf)
    w = sf.grid.sigma_weights
    lhs = float((1.0 / dd) @ w)
    rhs = float((1.0 / sf.values) @ w)
    margin = lhs - rhs
    return Verdict(name="trace", margin=float(margin), passed=margin >= -1e-8,
                   tol=-1e-8,
                   extras={"lhs": lhs, "rhs": rhs,
                           "equality_case": abs(margin) <= 1e-8,
                           "constant_h": _constant_flag(sf)})


# ---------------------------------------------------------------------------
# the trace inequality for pairs (Proposition trfh) and its conjecture form

def _trfh_smooth(f_sf: SupportFn, h_sf: SupportFn):
    """LHS, the two RHS variants, and mu = cone measure of h (n=2)."""
    dd_f = d2h(f_sf)
    dd_h = d2h(h_sf)
    mu = cone_measure(h_sf)
    w = mu.node_weights
    lhs = float((dd_h / dd_f) @ w)
    ratio = float((h_sf.values / f_sf.values) @ w)
    volr = body_volume(h_sf) / body_volume(f_sf)
    return lhs, volr / ratio, ratio


def _facet_areas_by_normal(sf: SupportFn) -> dict:
    body = build_body(sf)
    return {f.normal_index: f.area for f in body.facets}, body


def _shared_fan_data(f_sf: SupportFn, h_sf: SupportFn):
    """Facet areas of f, h, f+h on a common normal set; FanMismatch if the
    three polytopes have different active facet adjacency."""
    if f_sf.normals.shape != h_sf.normals.shape or not np.allclose(
        f_sf.normals, h_sf.normals, atol=1e-12
    ):
        raise FanMismatch("support functions use different normal sets")
    sum_sf = SupportFn(regime=POLYTOPE, values=f_sf.values + h_sf.values,
                       normals=f_sf.normals, antipode_index=f_sf.antipode_index)
    af, body_f = _facet_areas_by_normal(f_sf)
    ah, body_h = _facet_areas_by_normal(h_sf)
    asum, _ = _facet_areas_by_normal(sum_sf)

    if set(af) != set(ah) or set(af) != set(asum):
        raise FanMismatch("active facet sets differ")
    # adjacency: two normals share an edge iff their facets share 2 vertices
    def adjacency(body):
        pairs = set()
        facets = list(body.facets)
        for a in range(len(facets)):
            va = set(map(int, facets[a].vertex_indices))
            for b in range(a + 1, len(facets)):
                if len(va & set(map(int, facets[b].vertex_indices))) >= 2:
                    pairs.add((facets[a].normal_index, facets[b].normal_index))
        return pairs

    if adjacency(body_f) != adjacency(body_h):
        raise FanMismatch("facet adjacency differs between f and h")
    return af, ah, asum, body_f, body_h


def _trfh_polytope(f_sf: SupportFn, h_sf: SupportFn):
    """Shared-fan n=3 transcription via mixed facet areas.

    area_j is quadratic in the support vector for a fixed fan, so the
    mixed area s_j(f,h) = (area_j(f+h) - area_j(f) - area_j(h))/2 is the
    polarization; s_j/area_j(f) is the discrete (1/(n-1)) Tr (D2f)^{-1} D2h.
    """
    n = 3
    af, ah, asum, body_f, body_h = _shared_fan_data(f_sf, h_sf)
    w = {j: h_sf.values[j] * ah[j] / (n * body_h.volume) for j in ah}
    total = sum(w.values())
    lhs = 0.0
    ratio = 0.0
    for j in ah:
        s_mixed = 0.5 * (asum[j] - af[j] - ah[j])
        lhs += (s_mixed / af[j]) * w[j] / total
        ratio += (h_sf.values[j] / f_sf.values[j]) * w[j] / total
    volr = body_h.volume / body_f.volume
    rhs = volr ** (1.0 / (n - 1)) * ratio ** (-1.0 / (n - 1))
    return lhs, rhs, ratio


def verify_trfh(f_sf: SupportFn, h_sf: SupportFn) -> Verdict:
    """(1/(n-1)) int Tr(D2f)^{-1}(D2h) dmu >= (|O_h|/|O_f|)^{1/(n-1)}
    (int h/f dmu)^{-1/(n-1)}, mu the cone measure of h."""
    if f_sf.regime == SMOOTH:
        lhs, rhs, ratio = _trfh_smooth(f_sf, h_sf)
    else:
        lhs, rhs, ratio = _trfh_polytope(f_sf, h_sf)
    margin = lhs - rhs
    return Verdict(name="trfh", margin=float(margin), passed=margin >= -1e-6,
                   tol=-1e-6, extras={"lhs": lhs, "rhs": rhs,
                                      "mean_ratio": ratio})


def verify_trfh2(f_sf: SupportFn, h_sf: SupportFn) -> Verdict:
    """Conjectured strengthening: LHS >= int (h/f) dmu.

    Only the n = 2, f constant sector is a proved statement; the verdict
    carries asserted=False outside it and callers must not gate on it.
    """
    if f_sf.regime == SMOOTH:
        lhs, _, ratio = _trfh_smooth(f_sf, h_sf)
        proved = _constant_flag(f_sf)
    else:
        lhs, _, ratio = _trfh_polytope(f_sf, h_sf)
        proved = False
    margin = lhs - ratio
    return Verdict(name="trfh2", margin=float(margin),
                   passed=(margin >= -1e-6) if proved else True,
                   tol=-1e-6,
                   extras={"lhs": lhs, "rhs": ratio, "asserted": proved})


_FAN_NORMALS = np.array([
    [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
    [1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [1.0, -1.0, -1.0],
])
_FAN_BASE = np.array([1.0, 1.0, 1.0] + [1.45 / math.sqrt(3.0)] * 4)


def random_shared_fan_pair(rng, spread: float = 0.04, max_tries: int = 50):
    """Two n=3 polytopes on a common simple fan (cube plus corner cuts).

    Small support perturbations of a simple polytope keep its normal fan;
    draws that nevertheless change the fan are rejected and redrawn.
    """
    from .body import polytope_support

    for _ in range(max_tries):
        f_sf = polytope_support(
            _FAN_NORMALS, _FAN_BASE * (1 + rng.uniform(-spread, spread, 7))
        )
        h_sf = polytope_support(
            _FAN_NORMALS, _FAN_BASE * (1 + rng.uniform(-spread, spread, 7))
        )
        try:
            _shared_fan_data(f_sf, h_sf)
        except FanMismatch:
            continue
        return f_sf, h_sf
    raise RuntimeError("could not draw a shared-fan pair")


# ---------------------------------------------------------------------------
# the rectangle counterexample

def rectangle_counterexample(R: float) -> dict:
    """The failed pair inequality on the rectangle [-1,1] x [-R,R].

    Boundary integral of <x, n>^2 is 4R + 4R^2 in closed form; the
    candidate bound is (2/sqrt(pi)) |Omega|^{3/2} = 16 R^{3/2}/sqrt(pi).
    """
    if R <= 0:
        raise ValueError("R must be positive")
    lhs = 4.0 * R + 4.0 * R * R
    rhs = 16.0 * R ** 1.5 / math.sqrt(math.pi)
    return {
        "R": float(R),
        "lhs": lhs,
        "rhs": rhs,
        "violated": lhs > rhs,
    }


def rectangle_threshold(lo: float = 1.0, hi: float = 10.0,
                        tol: float = 1e-10) -> float:
    """Bisection for the R where the rectangle inequality turns false."""
    def gap(R):
        d = rectangle_counterexample(R)
        return d["lhs"] - d["rhs"]

    if gap(lo) >= 0 or gap(hi) <= 0:
        raise ValueError("bracket does not straddle the threshold")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# classical planar inequalities

def verify_gage(sf: SupportFn) -> Verdict:
    """int k^2 ds >= pi |bdry| / |Omega| with ds = (h+h'') dtheta."""
    dd = d2h(sf)
    w = sf.grid.sigma_weights * 2 * np.pi  # dtheta weights
    k2ds = float((1.0 / dd) @ w)
    per = float(dd @ w)
    area = 0.5 * float((sf.values * dd) @ w)
    margin = k2ds - math.pi * per / area
    return Verdict(name="gage", margin=float(margin), passed=margin >= -1e-8,
                   tol=-1e-8,
                   extras={"curvature_integral": k2ds, "perimeter": per,
                           "area": area})


def verify_bonnesen(sf: SupportFn) -> Verdict:
    """Pointwise h P >= A + pi h^2 over the boundary nodes."""
    dd = d2h(sf)
    w = sf.grid.sigma_weights * 2 * np.pi
    per = float(dd @ w)
    area = 0.5 * float((sf.values * dd) @ w)
    margins = sf.values * per - area - math.pi * sf.values**2
    margin = float(np.min(margins))
    return Verdict(name="bonnesen", margin=margin, passed=margin >= -1e-8,
                   tol=-1e-8, extras={"perimeter": per, "area": area})


def verify_santalo(sf: SupportFn) -> Verdict:
    """|B|^2 - |Omega| |Omega^polar| >= 0 for symmetric bodies.

    Near the ball the margin is smaller than the finite-difference volume
    error, so the smooth volume is taken with the spectral h''.
    """
    n = sf.dim
    if sf.regime == SMOOTH:
        from .lmn import _dd_spectral

        vol = math.pi * float((sf.values * _dd_spectral(sf))
                              @ sf.grid.sigma_weights)
    else:
        vol = body_volume(sf)
    prod = vol * polar_volume(sf)
    margin = config.BALL_VOLUME[n] ** 2 - prod
    return Verdict(name="santalo", margin=float(margin),
                   passed=margin >= -1e-8, tol=-1e-8,
                   extras={"volume_product": prod})


# ---------------------------------------------------------------------------
# interpolation derivative (the route to the trace inequality)

def interpolation_derivative(sf: SupportFn, t: float,
                             eps: float = 1e-6) -> float:
    """Central difference of f(t) = int [log(h_t + h_t'') - log h_t] dsigma
    along h_t = 1 - t + t h; nonpositivity of f' underlies the
    entropy-transport inequality."""
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")

    def val(tv):
        h_t = 1.0 - tv + tv * sf.values
        sft = smooth_support(sf.grid, h_t)
        dd = d2h(sft)
        return float(np.log(dd / h_t) @ sf.grid.sigma_weights)

    hi = min(1.0, t + eps)
    lo = t - eps
    return (val(hi) - val(lo)) / (hi - lo)


# ---------------------------------------------------------------------------
# sweep drivers (shared by tests and the CLI)

PROVED_SUITES = ("entropy-transport", "leblog", "trace", "trfh", "trfh2",
                 "gage", "bonnesen", "santalo")


def run_sweep(suite: str, count: int, seed: int, M: int):
    """Yield (instance_seed, Verdict) for a named sweep suite."""
    grid = make_circle_grid_cached(M)
    for i in range(count):
        iseed = seed + i
        rng = np.random.default_rng(iseed)
        if suite == "entropy-transport":
            nu = random_symmetric_density(rng, grid)
            yield iseed, verify_entropy_transport(nu)
        elif suite in ("leblog", "trace", "gage", "bonnesen", "santalo"):
            sf = random_trig_support(rng).on_grid(grid)
            fn = {"leblog": verify_leblog, "trace": verify_trace,
                  "gage": verify_gage, "bonnesen": verify_bonnesen,
                  "santalo": verify_santalo}[suite]
            yield iseed, fn(sf)
        elif suite == "trfh":
            f_sf = random_trig_support(rng).on_grid(grid)
            h_sf = random_trig_support(rng).on_grid(grid)
            yield iseed, verify_trfh(f_sf, h_sf)
        elif suite == "trfh2":
            # proved sector: f constant
            f_sf = smooth_support(grid, np.ones(grid.size))
            h_sf = random_trig_support(rng).on_grid(grid)
            yield iseed, verify_trfh2(f_sf, h_sf)
        else:
            raise ValueError(f"unknown suite {suite!r}")


_GRID_CACHE: dict = {}


def make_circle_grid_cached(M: int) -> DirectionGrid:
    from .spheremeas import make_circle_grid

    if M not in _GRID_CACHE:
        _GRID_CACHE[M] = make_circle_grid(M)
    return _GRID_CACHE[M]
