"""Entropy, the variational functionals F and F0, and exact identities.

Everything here is quadrature over a circle grid plus exact transport
values from the LP solver.  The decomposition of F into F0 + log|B|/n +
a relative entropy term is reproduced numerically, with the relative
entropy taken of the target measure with respect to m = r^n sigma / C.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .body import (
    RadialFn,
    SMOOTH,
    SupportFn,
    body_volume,
    build_body,
    d2h,
)
from .spheremeas import AtomicMeasure, GridDensity
from .transport import lp_transport_value, solve_plan


@dataclass(frozen=True)
class FunctionalReport:
    """Named value with its decomposition terms and checked residuals.

    residuals maps name -> (residual, tolerance it was checked against).
    """

    name: str
    value: float
    terms: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "value": self.value,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "residuals": {
                k: {"residual": float(r), "tol": float(t)}
                for k, (r, t) in self.residuals.items()
            },
        })

    def csv_row(self) -> str:
        cells = [self.name, f"{self.value:.17g}"]
        cells += [f"{float(v):.17g}" for _, v in sorted(self.terms.items())]
        return ",".join(cells)


def entropy(nu) -> float:
    """Ent(nu) = int rho log rho dsigma, with +inf for atomic measures."""
    if isinstance(nu, AtomicMeasure):
        return math.inf
    if not isinstance(nu, GridDensity):
        raise TypeError(f"expected a measure, got {type(nu).__name__}")
    rho = nu.rho
    terms = np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    return float(terms @ nu.grid.sigma_weights)


def F(nu: GridDensity, mu) -> FunctionalReport:
    """F(nu) = Ent(nu)/n - K(mu, nu)."""
    n = nu.grid.dim
    ent = entropy(nu)
    plan, _ = solve_plan(mu, nu)
    value = ent / n - plan.value
    return FunctionalReport(
        name="F",
        value=float(value),
        terms={"entropy_over_n": ent / n, "K": plan.value},
    )


def _log_h_at_atoms(sf: SupportFn, points: np.ndarray) -> np.ndarray:
    """log h evaluated at arbitrary directions (exact via vertices)."""
    body = build_body(sf)
    vals = np.max(np.asarray(points) @ body.vertices.T, axis=1)
    return np.log(vals)


def F0(sf: SupportFn, mu, normalize: bool = True) -> float:
    """int log h dmu under the unit-volume gauge.

    With normalize=True the body is rescaled to |Omega_h| = 1 first; the
    log-scaling identity F0(lam h) = F0(h) + log(lam) makes this a single
    additive shift.
    """
    n = sf.dim
    vol = body_volume(sf)
    shift = -np.log(vol) / n if normalize else 0.0
    if sf.regime == SMOOTH:
        if not isinstance(mu, GridDensity) or mu.grid.size != sf.grid.size:
            raise ValueError("smooth F0 needs mu as a density on the same grid")
        base = float(np.log(sf.values) @ mu.node_weights)
    else:
        if not isinstance(mu, AtomicMeasure):
            raise ValueError("polytope F0 needs an atomic mu")
        base = float(_log_h_at_atoms(sf, mu.points) @ mu.weights)
    return base + shift


def ek_identity_residual(sf: SupportFn, mu: GridDensity, nu: GridDensity) -> float:
    """|F(nu; mu) - (Ent(mu)/n - (1/n) int log((h+h'')/h) dmu)|.

    Meaningful when nu is the pushforward of mu under the map of h; the
    residual is the quadrature gap between the two routes to F.
    """
    if sf.regime != SMOOTH:
        raise ValueError("smooth n=2 regime required")
    n = 2
    direct = F(nu, mu).value
    dd = d2h(sf)
    logdet = np.log(dd / sf.values)
    rhs = entropy(mu) / n - float(logdet @ mu.node_weights) / n
    return abs(direct - rhs)


def duality_decomposition(sf: SupportFn, rf: RadialFn, mu: GridDensity,
                          nu: GridDensity) -> FunctionalReport:
    """F = F0 + (1/n) log|B| + (1/n) Ent_m(nu) for optimal unit-volume duals.

    m is the probability measure r^n sigma / C with C = int r^n dsigma;
    Ent_m(nu) is the relative entropy of nu with respect to m, hence
    nonnegative, and zero exactly when rho_nu is proportional to r^n.
    """
    if sf.regime != SMOOTH or rf.regime != SMOOTH:
        raise ValueError("smooth regime required")
    n = 2
    r = rf.values
    C = float((r ** n) @ sf.grid.sigma_weights)
    vol = config.BALL_VOLUME[n] * C
    if abs(vol - 1.0) > 1e-6:
        raise ValueError(f"unit-volume gauge violated: |Omega_h| = {vol}")
    f0 = float(np.log(sf.values) @ mu.node_weights)
    logB_over_n = np.log(config.BALL_VOLUME[n]) / n
    m_density = (r ** n) / C
    rho = nu.rho
    mask = rho > 0
    rel = np.zeros_like(rho)
    rel[mask] = rho[mask] * np.log(rho[mask] / m_density[mask])
    ent_m = float(rel @ nu.grid.sigma_weights)
    value = f0 + logB_over_n + ent_m / n
    direct = F(nu, mu).value
    return FunctionalReport(
        name="duality_decomposition",
        value=float(value),
        terms={
            "F0": f0,
            "log_ball_volume_over_n": logB_over_n,
            "relative_entropy_over_n": ent_m / n,
            "F_direct": direct,
        },
        residuals={"decomposition_vs_direct": (abs(value - direct), 1e-6)},
    )


def w_bounds(nu: GridDensity) -> dict:
    """Entropy bounds on the comparison transport distances.

    Returns half of the squared-Euclidean transport cost and the geodesic
    W1 cost (both LP-exact) together with their entropy bounds
    1 - exp(-Ent/n) and arccos(exp(-Ent/n)).
    """
    n = nu.grid.dim
    ent = entropy(nu)
    e = math.exp(-ent / n)
    X = nu.grid.nodes
    a = nu.grid.sigma_weights
    b = nu.node_weights
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    geo = np.arccos(np.clip(X @ X.T, -1.0, 1.0))
    w2tilde_sq = lp_transport_value(sq, a, b)
    w1 = lp_transport_value(geo, a, b)
    return {
        "half_w2tilde_sq": 0.5 * w2tilde_sq,
        "w2tilde_bound": 1.0 - e,
        "w1": w1,
        "w1_bound": math.acos(min(1.0, e)),
        "entropy": ent,
    }
