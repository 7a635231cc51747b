"""The Kantorovich problem on the sphere for the cost -log<x, y>.

Pairs with nonpositive inner product carry infinite cost; such arcs are
removed from the LP outright rather than big-M'd, so the exact solver never
sees a non-finite coefficient.  Duals are read from the LP multipliers and
extended off the optimal support by the Legendre-type c-transform, which is
also how bodies are recovered from potentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import config
from .body import (
    RadialFn,
    SupportFn,
    SMOOTH,
    d2h,
    polytope_support,
    radial_from_support,
    smooth_support,
    support_gradient,
)
from .errors import Infeasible
from .spheremeas import AtomicMeasure, DirectionGrid, GridDensity

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def cost(x, y) -> float:
    """c(x, y) = -log<x, y> for positive inner product, +inf otherwise."""
    d = float(np.dot(x, y))
    if d <= config.DOT_FORBIDDEN_TOL:
        return np.inf
    return -np.log(min(d, 1.0))


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost matrix with an explicit mask of allowed (finite) arcs."""

    values: np.ndarray   # +inf on forbidden arcs
    allowed: np.ndarray  # boolean

    @property
    def shape(self):
        return self.values.shape


def cost_matrix(x_points: np.ndarray, y_points: np.ndarray) -> CostMatrix:
    dots = np.asarray(x_points) @ np.asarray(y_points).T
    allowed = dots > config.DOT_FORBIDDEN_TOL
    vals = np.where(allowed, -np.log(np.clip(dots, 1e-300, 1.0)), np.inf)
    return CostMatrix(values=vals, allowed=allowed)


def _as_atoms(m) -> AtomicMeasure:
    if isinstance(m, GridDensity):
        return m.to_atoms()
    if isinstance(m, AtomicMeasure):
        return m
    raise TypeError(f"expected a measure, got {type(m).__name__}")


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    flow_value: float
    witness: dict | None = None


def feasibility_check(mu, nu) -> FeasibilityResult:
    """Max-flow test: can all mass travel along arcs of finite cost?"""
    a, b = _as_atoms(mu), _as_atoms(nu)
    cm = cost_matrix(a.points, b.points)
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    for i in range(a.size):
        G.add_edge("s", ("u", i), capacity=float(a.weights[i]))
    for j in range(b.size):
        G.add_edge(("v", j), "t", capacity=float(b.weights[j]))
    ii, jj = np.nonzero(cm.allowed)
    for i, j in zip(ii, jj):
        G.add_edge(("u", int(i)), ("v", int(j)), capacity=2.0)
    flow_value, _ = nx.maximum_flow(G, "s", "t")
    if flow_value >= 1.0 - config.MASS_TOL:
        return FeasibilityResult(feasible=True, flow_value=float(flow_value))
    cut_value, (S, _) = nx.minimum_cut(G, "s", "t")
    witness = {
        "stranded_mu_indices": sorted(
            i for nd in S if isinstance(nd, tuple) and nd[0] == "u" for i in [nd[1]]
        ),
        "reachable_nu_indices": sorted(
            j for nd in S if isinstance(nd, tuple) and nd[0] == "v" for j in [nd[1]]
        ),
        "cut_capacity": float(cut_value),
    }
    return FeasibilityResult(feasible=False, flow_value=float(flow_value),
                             witness=witness)


@dataclass(frozen=True)
class TransportPlan:
    coupling: np.ndarray
    value: float
    mu: AtomicMeasure
    nu: AtomicMeasure

    def __post_init__(self):
        self.coupling.setflags(write=False)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.coupling > 1e-14))

    def to_csv(self, header_lines=()) -> str:
        lines = [f"# {h}" for h in header_lines]
        lines.append("i,j,mass")
        ii, jj = np.nonzero(self.coupling > 1e-14)
        for i, j in zip(ii, jj):
            lines.append(f"{i},{j},{self.coupling[i, j]:.17g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DualPair:
    """Optimal potentials phi = log h at source atoms, psi = log r at targets."""

    phi: np.ndarray
    psi: np.ndarray
    x_points: np.ndarray
    y_points: np.ndarray
    value: float
    gauge: str = field(default="phi0_zero")

    def __post_init__(self):
        for arr in (self.phi, self.psi, self.x_points, self.y_points):
            arr.setflags(write=False)

    def to_json_dict(self) -> dict:
        return {
            "phi": [float(v) for v in self.phi],
            "psi": [float(v) for v in self.psi],
            "gauge": self.gauge,
            "K": float(self.value),
        }


def solve_plan(mu, nu) -> tuple[TransportPlan, DualPair]:
    """Exact optimal plan and duals by LP over the allowed arcs.

    Requires both marginals symmetric; raises Infeasible (with a max-flow
    cut witness) when every plan has infinite cost.
    """
    a, b = _as_atoms(mu), _as_atoms(nu)
    if not (a.symmetric and b.symmetric):
        raise ValueError("solve_plan requires symmetric marginals")
    feas = feasibility_check(a, b)
    if not feas.feasible:
        raise Infeasible("all transport plans meet an infinite-cost arc",
                         witness=feas.witness)
    value, coupling, alpha, beta = _solve_lp(
        cost_matrix(a.points, b.points), a.weights, b.weights
    )
    plan = TransportPlan(coupling=coupling, value=value, mu=a, nu=b)
    phi = -alpha
    psi = beta
    shift = phi[0]
    duals = DualPair(phi=phi - shift, psi=psi - shift,
                     x_points=a.points.copy(), y_points=b.points.copy(),
                     value=value)
    return plan, duals


def _solve_lp(cm: CostMatrix, a: np.ndarray, b: np.ndarray):
    """Core transportation LP on the allowed arcs.

    Returns (value, coupling, alpha, beta) where alpha, beta are the
    equality multipliers: alpha_i + beta_j <= c_ij with equality on the
    optimal support.
    """
    m, n = cm.shape
    ii, jj = np.nonzero(cm.allowed)
    c = cm.values[ii, jj]
    k = len(c)
    rows = np.concatenate([ii, m + jj])
    cols = np.concatenate([np.arange(k), np.arange(k)])
    A = sparse.csr_matrix((np.ones(2 * k), (rows, cols)), shape=(m + n, k))
    res = linprog(c, A_eq=A, b_eq=np.concatenate([a, b]),
                  method="highs-ds", options=_LP_OPTIONS)
    if res.status != 0:
        raise Infeasible(f"LP solver failed with status {res.status}: {res.message}")
    coupling = np.zeros((m, n))
    coupling[ii, jj] = res.x
    y = res.eqlin.marginals
    return float(res.fun), coupling, y[:m].copy(), y[m:].copy()


def lp_transport_value(C: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Optimal transport value for an arbitrary finite cost matrix.

    Shared LP core used for the comparison distances (squared-Euclidean
    and geodesic costs).
    """
    cm = CostMatrix(values=np.asarray(C, dtype=float),
                    allowed=np.isfinite(np.asarray(C, dtype=float)))
    value, _, _, _ = _solve_lp(cm, np.asarray(a), np.asarray(b))
    return value


# ---------------------------------------------------------------------------
# entropic solver

@dataclass(frozen=True)
class SinkhornResult:
    coupling: np.ndarray
    value: float
    converged: bool
    iterations: int
    marginal_error: float
    lp_gap_guardrail: float


def sinkhorn(mu, nu, eps: float, max_iter: int = 5000) -> SinkhornResult:
    """Log-domain Sinkhorn with kernel <x, y>^(1/eps) on allowed arcs.

    Forbidden arcs carry zero kernel weight, so they never receive mass.
    Non-convergence is reported through the flag, not raised.
    """
    if not (1e-3 <= eps <= 1.0):
        raise ValueError("eps must lie in [1e-3, 1]")
    a, b = _as_atoms(mu), _as_atoms(nu)
    feas = feasibility_check(a, b)
    if not feas.feasible:
        raise Infeasible("instance infeasible", witness=feas.witness)
    cm = cost_matrix(a.points, b.points)
    logK = np.where(cm.allowed, -cm.values / eps, -np.inf)
    loga = np.log(a.weights)
    logb = np.log(b.weights)
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    err = np.inf
    it = 0
    from scipy.special import logsumexp
    for it in range(1, max_iter + 1):
        f = eps * (loga - logsumexp(logK + (g / eps)[None, :], axis=1))
        g = eps * (logb - logsumexp(logK + (f / eps)[:, None], axis=0))
        if it % 10 == 0 or it == max_iter:
            P = np.exp(logK + (f / eps)[:, None] + (g / eps)[None, :])
            err = max(np.abs(P.sum(axis=1) - a.weights).sum(),
                      np.abs(P.sum(axis=0) - b.weights).sum())
            if err <= 1e-8:
                break
    P = np.exp(logK + (f / eps)[:, None] + (g / eps)[None, :])
    err = max(np.abs(P.sum(axis=1) - a.weights).sum(),
              np.abs(P.sum(axis=0) - b.weights).sum())
    value = float(np.sum(P[cm.allowed] * cm.values[cm.allowed]))
    guardrail = a.dim * eps * np.log(max(a.size, b.size))
    return SinkhornResult(coupling=P, value=value, converged=err <= 1e-8,
                          iterations=it, marginal_error=float(err),
                          lp_gap_guardrail=float(guardrail))


# ---------------------------------------------------------------------------
# dual potentials -> bodies

def c_transform_support(psi: np.ndarray, y_points: np.ndarray,
                        directions: np.ndarray) -> np.ndarray:
    """h(x) = max_j r_j <x, y_j> with r_j = exp(psi_j)."""
    dots = np.asarray(directions) @ np.asarray(y_points).T
    vals = np.max(dots * np.exp(psi)[None, :], axis=1)
    if np.any(vals <= 0):
        raise ValueError("c-transform produced a nonpositive support value")
    return vals


def duals_to_body(d: DualPair, gauge: str = "unit_volume",
                  grid: DirectionGrid | None = None):
    """Recover (h, r) from optimal duals.

    With a grid the smooth regime is used: h is the c-transform of psi
    evaluated at the grid nodes, r the Legendre transform of h.  Without a
    grid the source atoms become polytope facet normals with h = exp(phi).
    Gauge 'unit_volume' rescales to |Omega_h| = 1; 'h0_equals_1' pins the
    first support value.
    """
    from .errors import DegenerateBody

    if gauge not in ("unit_volume", "h0_equals_1"):
        raise ValueError(f"unknown gauge {gauge!r}")

    if grid is not None:
        h_vals = c_transform_support(d.psi, d.y_points, grid.nodes)
        sf = smooth_support(grid, h_vals)
        if np.min(d2h(sf, check=False)) < -1e-6 * np.max(h_vals):
            raise DegenerateBody("recovered support function is not convex")
        rf = radial_from_support(sf)
        n = 2
        if gauge == "unit_volume":
            # polar-coordinate volume: exact in r, no derivative needed
            vol = config.BALL_VOLUME[n] * float(
                (rf.values ** n) @ grid.sigma_weights
            )
            lam = vol ** (-1.0 / n)
        else:
            lam = 1.0 / sf.values[0]
        sf = smooth_support(grid, sf.values * lam)
        rf = RadialFn(regime=SMOOTH, values=rf.values * lam, grid=grid)
        return sf, rf

    from .body import build_body

    sf = polytope_support(d.x_points, np.exp(d.phi))
    body = build_body(sf)
    if body.volume <= 0:
        raise DegenerateBody("recovered polytope has nonpositive volume")
    n = sf.dim
    lam = body.volume ** (-1.0 / n) if gauge == "unit_volume" else 1.0 / sf.values[0]
    sf = sf.scaled(lam)
    rf = radial_from_support(sf)
    return sf, rf


# ---------------------------------------------------------------------------
# the explicit map and change-of-variables residual (smooth circle)

def transport_angles(sf: SupportFn) -> np.ndarray:
    """Image angles theta + arctan(h'/h) of the optimal map at the nodes."""
    if sf.regime != SMOOTH:
        raise ValueError("transport map requires the smooth regime")
    d2h(sf)  # admissibility gate
    return sf.grid.angles + np.arctan2(support_gradient(sf), sf.values)


def transport_map(sf: SupportFn) -> np.ndarray:
    """Unit vectors T(x_i) = (h x + grad h)/sqrt(h^2 + |grad h|^2)."""
    th = transport_angles(sf)
    return np.column_stack([np.cos(th), np.sin(th)])


def _periodic_interp(theta_query, theta_nodes, values):
    """Linear interpolation in angle, periodic over 2*pi."""
    tq = np.mod(theta_query, 2 * np.pi)
    tn = np.concatenate([theta_nodes, [theta_nodes[0] + 2 * np.pi]])
    vn = np.concatenate([values, [values[0]]])
    return np.interp(tq, tn, vn)


def ma_residual(sf: SupportFn, rho_mu: GridDensity, rho_nu: GridDensity) -> float:
    """Max-norm residual of rho_mu = rho_nu(T) h (h+h'') / (h^2 + h'^2)."""
    if rho_mu.grid is not sf.grid and rho_mu.grid.size != sf.grid.size:
        raise ValueError("rho_mu must live on the support function's grid")
    dd = d2h(sf)
    h = sf.values
    hp = support_gradient(sf)
    th_T = transport_angles(sf)
    rho_at_T = _periodic_interp(th_T, rho_nu.grid.angles, rho_nu.rho)
    rhs = rho_at_T * h * dd / (h**2 + hp**2)
    return float(np.max(np.abs(rho_mu.rho - rhs)))


# ---------------------------------------------------------------------------
# first variations

@dataclass(frozen=True)
class VariationField:
    """Even zero-mean perturbation attached to a grid and reference measure."""

    grid: DirectionGrid
    values: np.ndarray
    reference: GridDensity
    zero_mean: bool = field(default=True)

    def __post_init__(self):
        self.values.setflags(write=False)
        if self.values.shape != (self.grid.size,):
            raise ValueError("one value per node required")
        if not np.array_equal(self.values[self.grid.antipode_index], self.values):
            raise ValueError("variation fields must be even")
        if self.zero_mean:
            mean = float(self.values @ self.reference.node_weights)
            if abs(mean) > config.MASS_TOL:
                raise ValueError(f"field mean {mean} under the reference is not 0")


def make_variation(grid: DirectionGrid, raw_values, reference: GridDensity) -> VariationField:
    """Symmetrize and center raw node values into a VariationField."""
    v = np.asarray(raw_values, dtype=float)
    v = 0.5 * (v + v[grid.antipode_index])
    v = v - float(v @ reference.node_weights)
    return VariationField(grid=grid, values=v, reference=reference)


def variation_source(sf: SupportFn, v: VariationField) -> float:
    """d/d eps of K((1 + eps v) mu, nu) at 0: equals -int log h . v dmu."""
    w = v.reference.node_weights
    return float(-(np.log(sf.values) * v.values) @ w)


def variation_target(rf: RadialFn, omega: VariationField) -> float:
    """d/d eps of K(mu, (1 + eps omega) nu) at 0: equals int log r . omega dnu."""
    w = omega.reference.node_weights
    return float((np.log(rf.values) * omega.values) @ w)
