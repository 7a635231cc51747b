"""The operator L_{mu,nu} on the circle, its Dirichlet form, and the
infinitesimal uniqueness inequality.

Derivatives here are trigonometric (FFT) rather than finite differences:
the Dirichlet-form identity is an exact integration-by-parts statement,
and verifying it to tight tolerance requires spectral accuracy.  Off-node
values (for compositions with the transport map) come from exact Fourier
interpolation of the grid data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import SMOOTH, SupportFn
from .errors import NonConvex, NonPositiveDensity
from .spheremeas import DirectionGrid, GridDensity


# ---------------------------------------------------------------------------
# spectral helpers

def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative of a periodic grid function by FFT.

    The Nyquist mode is zeroed for odd orders (its derivative is not
    representable on the grid).
    """
    M = len(values)
    c = np.fft.rfft(values)
    k = np.arange(M // 2 + 1)
    c = c * (1j * k) ** order
    if order % 2 == 1:
        c[-1] = 0.0
    return np.fft.irfft(c, n=M)


def fourier_interp(values: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Evaluate the interpolating trigonometric polynomial at theta.

    Exact at the grid nodes; the Nyquist mode is split as a plain cosine.
    """
    M = len(values)
    c = np.fft.rfft(values) / M
    th = np.asarray(theta, dtype=float)
    out = np.full_like(th, c[0].real)
    for k in range(1, M // 2):
        out += 2 * (c[k].real * np.cos(k * th) - c[k].imag * np.sin(k * th))
    out += c[M // 2].real * np.cos((M // 2) * th)
    return out


def _dd_spectral(sf: SupportFn) -> np.ndarray:
    """h + h'' with the spectral second derivative; gates admissibility."""
    if sf.regime != SMOOTH:
        raise ValueError("smooth regime required")
    dd = sf.values + spectral_derivative(sf.values, 2)
    if np.any(dd <= 0):
        raise NonConvex(f"min h + h'' = {dd.min():.3e} <= 0 (spectral)")
    return dd


@dataclass(frozen=True)
class MetricField:
    """The conformal factor g = (h + h'')/h of the transport metric."""

    grid: DirectionGrid
    g: np.ndarray

    def __post_init__(self):
        self.g.setflags(write=False)
        if np.any(self.g <= 0):
            raise NonConvex("metric factor must be positive")


def metric_field(sf: SupportFn) -> MetricField:
    return MetricField(grid=sf.grid, g=_dd_spectral(sf) / sf.values)


def _require_even(grid: DirectionGrid, u: np.ndarray, name: str):
    if not np.allclose(u[grid.antipode_index], u, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be even")


# ---------------------------------------------------------------------------
# the operator

def apply_L_cone(sf: SupportFn, u: np.ndarray) -> np.ndarray:
    """(u + u'')/(h + h'') - u/h, the cone-measure case of the operator."""
    dd = _dd_spectral(sf)
    u = np.asarray(u, dtype=float)
    _require_even(sf.grid, u, "u")
    out = (u + spectral_derivative(u, 2)) / dd - u / sf.values
    return 0.5 * (out + out[sf.grid.antipode_index])


def transport_angles_spectral(sf: SupportFn) -> np.ndarray:
    """theta + arctan(h'/h) with the spectral first derivative."""
    _dd_spectral(sf)
    hp = spectral_derivative(sf.values, 1)
    return sf.grid.angles + np.arctan2(hp, sf.values)


def apply_L_general(sf: SupportFn, W: np.ndarray, u: np.ndarray) -> np.ndarray:
    """L_{mu,nu}(u/h) for a target nu = exp(-W) sigma.

    On the circle the middle term of the operator reduces to
    [W'(theta_T)(u'h - uh') + n(uh + u'h')] / (h^2 + h'^2); W' at the
    image angles comes from Fourier interpolation of W' on the grid.
    """
    h = sf.values
    dd = _dd_spectral(sf)
    W = np.asarray(W, dtype=float)
    u = np.asarray(u, dtype=float)
    _require_even(sf.grid, u, "u")
    if np.any(~np.isfinite(W)):
        raise NonPositiveDensity("W must be finite (nu strictly positive)")
    hp = spectral_derivative(h, 1)
    up = spectral_derivative(u, 1)
    upp = spectral_derivative(u, 2)
    th_T = sf.grid.angles + np.arctan2(hp, h)
    Wp_at_T = fourier_interp(spectral_derivative(W, 1), th_T)
    s2 = h**2 + hp**2
    n = 2
    middle = (Wp_at_T * (up * h - u * hp) + n * (u * h + up * hp)) / s2
    out = (u + upp) / dd - middle + u / h
    return 0.5 * (out + out[sf.grid.antipode_index])


def pushforward_log_density(sf: SupportFn, mu: GridDensity):
    """W values of the pushforward target, parametrized by the source node.

    Returns (q, dtheta_T) where q(theta) = W(theta_T(theta)) =
    -log rho_nu(T(theta)) via the change of variables, and dtheta_T is
    the Jacobian of the angle map.  Chain rule then gives W'(theta_T) =
    q'/dtheta_T without any scattered interpolation.
    """
    h = sf.values
    dd = _dd_spectral(sf)
    hp = spectral_derivative(h, 1)
    if np.any(mu.rho <= 0):
        raise NonPositiveDensity("mu must be strictly positive")
    rho_nu_at_T = mu.rho * (h**2 + hp**2) / (h * dd)
    q = -np.log(rho_nu_at_T)
    dtheta_T = 1.0 + spectral_derivative(np.arctan2(hp, h), 1)
    return q, dtheta_T


def _apply_L_pushforward(sf: SupportFn, mu: GridDensity, u: np.ndarray) -> np.ndarray:
    """L_{mu,nu}(u/h) with nu the pushforward of mu under the map of h."""
    h = sf.values
    dd = _dd_spectral(sf)
    hp = spectral_derivative(h, 1)
    up = spectral_derivative(u, 1)
    upp = spectral_derivative(u, 2)
    q, dtheta_T = pushforward_log_density(sf, mu)
    Wp_at_T = spectral_derivative(q, 1) / dtheta_T
    s2 = h**2 + hp**2
    n = 2
    middle = (Wp_at_T * (up * h - u * hp) + n * (u * h + up * hp)) / s2
    out = (u + upp) / dd - middle + u / h
    return 0.5 * (out + out[sf.grid.antipode_index])


# ---------------------------------------------------------------------------
# Dirichlet form

def dirichlet_form(sf: SupportFn, f: np.ndarray, g: np.ndarray,
                   mu: GridDensity) -> float:
    """E(f, g) = int h (D2h)^{-1} g' f' dmu.

    Both arguments enter as functions in the domain of the operator
    (f plays the role of u/h), making the integrand symmetric in (f, g).
    """
    h = sf.values
    dd = _dd_spectral(sf)
    gp = spectral_derivative(np.asarray(g, dtype=float), 1)
    fp = spectral_derivative(np.asarray(f, dtype=float), 1)
    return float((h * gp * fp / dd) @ mu.node_weights)


def dirichlet_residual(sf: SupportFn, f: np.ndarray, g: np.ndarray,
                       mu: GridDensity) -> float:
    """|E(f, g) + int g L(f) dmu| with nu the pushforward of mu.

    L(f) abbreviates L(u/h) for u = f h.  The integration-by-parts
    identity ties the Dirichlet form to the operator; the residual is
    pure quadrature/differentiation error.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _require_even(sf.grid, f, "f")
    _require_even(sf.grid, g, "g")
    lhs = dirichlet_form(sf, f, g, mu)
    Lf = _apply_L_pushforward(sf, mu, f * sf.values)
    rhs = -float((g * Lf) @ mu.node_weights)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# infinitesimal uniqueness

def infinitesimal_uniqueness_gap(sf: SupportFn, u: np.ndarray,
                                 mu: GridDensity | None = None) -> float:
    """int ((u+u'')/(h+h''))^2 dmu - (n-1) int (u/h)^2 dmu on the circle.

    mu defaults to the cone measure of h.  On S^1 the Hilbert-Schmidt
    norm of the 1x1 matrix (D2h)^{-1} D2u is the plain absolute value.
    """
    from .body import cone_measure

    h = sf.values
    dd = _dd_spectral(sf)
    u = np.asarray(u, dtype=float)
    _require_even(sf.grid, u, "u")
    if mu is None:
        mu = cone_measure(sf)
    w = mu.node_weights
    lhs = float((((u + spectral_derivative(u, 2)) / dd) ** 2) @ w)
    rhs = float(((u / h) ** 2) @ w)
    return lhs - rhs


# ---------------------------------------------------------------------------
# linear solve for the first-variation test

def solve_variation(sf: SupportFn, mu: GridDensity, v: np.ndarray) -> np.ndarray:
    """Solve L_{mu,nu}(u/h) = v for u (nu = pushforward of mu).

    The kernel contains u = h (the scaling direction); the least-squares
    solve pins the component of u along h to zero.
    """
    M = sf.grid.size
    A = np.empty((M, M))
    for j in range(M):
        e = np.zeros(M)
        e[j] = 1.0
        e[sf.grid.antipode_index[j]] = 1.0
        A[:, j] = _apply_L_pushforward(sf, mu, e)
    # symmetrized basis double-counts each pair; halve to recover columns
    A *= 0.5
    v = np.asarray(v, dtype=float)
    # gauge row: <u, h> = 0 removes the scaling kernel direction
    A_aug = np.vstack([A, sf.values[None, :]])
    b_aug = np.concatenate([v, [0.0]])
    u, *_ = np.linalg.lstsq(A_aug, b_aug, rcond=None)
    return 0.5 * (u + u[sf.grid.antipode_index])


def gap_table_csv(rows, header_lines=()) -> str:
    """CSV for (label, gap) sweeps."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("label,gap")
    for label, gap in rows:
        lines.append(f"{label},{gap:.17g}")
    return "\n".join(lines) + "\n"
