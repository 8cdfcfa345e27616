"""Angular stream-function solves: G'' + 4G = M' cos^2(theta).

Three variants are used downstream:

* ``ivp``       -- G(0) = 0, G'(0) = 1 (profile normalization),
* ``bvp``       -- G(0) = G(L) = 0 (evolution),
* ``localized`` -- G(0) = G'(0) = 0 plus a rank-one correction that restores
  G(L) = 0 (operator decomposition).

All variants are quadrature formulas: the running integrals are computed once
by spectral antidifferentiation and shared between G and G', which avoids
ever differentiating a quadrature result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDomainError, DomainError, PreconditionError
from .grid import (
    AngularGrid,
    GridFunction,
    cumulative_integral,
    differentiate,
    taylor_jet,
)

#: L may not approach pi/2: there the two-point problem loses unique solvability.
_DEGENERACY_MARGIN = 1e-9


@dataclass
class StreamSolution:
    """Stream coefficient G and its first derivative, plus the running
    integrals I1 = int_0^theta M' cos^2 cos2 and I2 = int_0^theta M' cos^2 sin2."""

    G: GridFunction
    Gp: GridFunction
    I1: GridFunction
    I2: GridFunction
    variant: str

    @property
    def grid(self) -> AngularGrid:
        return self.G.grid


def _running_integrals(G: GridFunction, Gp: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Recover I1, I2 algebraically from (G, G').

    Inverting G = sin(2t)(1+I1)/2 - cos(2t) I2 / 2 and its derivative gives
    1 + I1 = 2 sin(2t) G + cos(2t) G' and I2 = -2 cos(2t) G + sin(2t) G';
    the exact relations hold for every variant up to I1's additive constant,
    which is removed so that I1(0) = 0.
    """
    t = G.grid.nodes
    i1 = 2.0 * np.sin(2 * t) * G.values + np.cos(2 * t) * Gp.values - 1.0
    i2 = -2.0 * np.cos(2 * t) * G.values + np.sin(2 * t) * Gp.values
    i1 -= i1[0]
    return (
        GridFunction(G.grid, i1, "odd"),
        GridFunction(G.grid, i2, "odd"),
    )


def kernel_k1(theta: np.ndarray) -> np.ndarray:
    """K1 = 2 cos^2 cos2 - sin^2 2 = (cos^2 sin2)'."""
    return 2.0 * np.cos(theta) ** 2 * np.cos(2 * theta) - np.sin(2 * theta) ** 2


def kernel_k2(theta: np.ndarray) -> np.ndarray:
    """K2 = sin2 cos2 + 2 cos^2 sin2 = -(cos^2 cos2)'."""
    return np.sin(2 * theta) * np.cos(2 * theta) + 2.0 * np.cos(theta) ** 2 * np.sin(2 * theta)


def solve_ivp(M: GridFunction) -> StreamSolution:
    """Stream solve with the profile normalization G(0) = 0, G'(0) = 1."""
    grid = M.grid
    t = grid.nodes
    Mp = differentiate(M, 1)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    w = Mp.values * np.cos(t) ** 2
    i1 = cumulative_integral(GridFunction(grid, w * c2, "odd")).values
    i2 = cumulative_integral(GridFunction(grid, w * s2, "even")).values
    g = 0.5 * s2 * (1.0 + i1) - 0.5 * c2 * i2
    gp = c2 * (1.0 + i1) + s2 * i2
    return StreamSolution(
        G=GridFunction(grid, g, "odd"),
        Gp=GridFunction(grid, gp, "even"),
        I1=GridFunction(grid, i1, "odd"),
        I2=GridFunction(grid, i2, "odd"),
        variant="ivp",
    )


def solve_bvp(M: GridFunction, by_parts: bool = True) -> StreamSolution:
    """Stream solve with the evolution boundary conditions G(0) = G(L) = 0.

    The default integrated-by-parts form applies the kernels to M itself, so
    evolution states need not have an accurate M' near the boundary.
    """
    grid = M.grid
    if grid.L >= np.pi / 2 - _DEGENERACY_MARGIN:
        raise DegenerateDomainError(
            "stream recovery degenerates as L -> pi/2; got L = %.17g" % grid.L
        )
    t = grid.nodes
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    cot2L = np.cos(2 * grid.L) / np.sin(2 * grid.L)
    if by_parts:
        j1 = cumulative_integral(GridFunction(grid, M.values * kernel_k1(t), "even")).values
        j2 = cumulative_integral(GridFunction(grid, M.values * kernel_k2(t), "odd")).values
        tail2 = j2[-1] - j2  # int_theta^L M K2
        g = 0.5 * s2 * (-tail2 - cot2L * j1[-1]) + 0.5 * c2 * j1
        gp = M.values * np.cos(t) ** 2 - c2 * (tail2 + cot2L * j1[-1]) - s2 * j1
    else:
        Mp = differentiate(M, 1)
        w = Mp.values * np.cos(t) ** 2
        i1 = cumulative_integral(GridFunction(grid, w * c2, "odd")).values
        i2 = cumulative_integral(GridFunction(grid, w * s2, "even")).values
        tail1 = i1[-1] - i1  # int_theta^L M' cos^2 cos2
        g = 0.5 * s2 * (-tail1 + cot2L * i2[-1]) - 0.5 * c2 * i2
        gp = c2 * (-tail1 + cot2L * i2[-1]) + s2 * i2
    G = GridFunction(grid, g, "odd")
    Gp = GridFunction(grid, gp, "even")
    i1f, i2f = _running_integrals(G, Gp)
    return StreamSolution(G=G, Gp=Gp, I1=i1f, I2=i2f, variant="bvp")


def solve_localized(
    M_tilde: GridFunction,
    wp,
    eta_profile: str = "cubic",
    jet_tol: float = 1e-5,
) -> tuple[StreamSolution, StreamSolution]:
    """Localized stream solve for a jet-free source M_tilde = M - P2 M.

    Returns ``(G_loc, G_corrected)``:  G_loc has G(0) = G'(0) = 0 and solves
    the stream equation outright; G_corrected subtracts the rank-one term
    (G_loc(L)/cos 2L) cos(2 theta) eta((L-theta)/(L-l2)) so that it also
    vanishes at theta = L while remaining untouched on [0, l2].
    """
    grid = M_tilde.grid
    scale = max(1.0, float(np.max(np.abs(M_tilde.values))))
    jet = taylor_jet(M_tilde, 2)
    if np.max(np.abs(jet)) > jet_tol * scale:
        raise PreconditionError(
            f"localized solve needs a vanishing 2-jet; got {jet.tolist()}"
        )
    c2L = np.cos(2 * grid.L)
    if abs(c2L) < 1e-8:
        raise DomainError("correction undefined for L ~ pi/4 (cos 2L ~ 0)")
    t = grid.nodes
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    j1 = cumulative_integral(GridFunction(grid, M_tilde.values * kernel_k1(t), "even")).values
    j2 = cumulative_integral(GridFunction(grid, M_tilde.values * kernel_k2(t), "odd")).values
    g_loc = 0.5 * c2 * j1 + 0.5 * s2 * j2
    gp_loc = M_tilde.values * np.cos(t) ** 2 - s2 * j1 + c2 * j2
    G_loc = GridFunction(grid, g_loc, "odd")
    Gp_loc = GridFunction(grid, gp_loc, "even")
    i1, i2 = _running_integrals(G_loc, Gp_loc)
    loc = StreamSolution(G=G_loc, Gp=Gp_loc, I1=i1, I2=i2, variant="localized")

    width = grid.L - wp.l2
    x = (grid.L - t) / width
    eta = bump_eta(x, eta_profile)
    eta_p = bump_eta_deriv(x, eta_profile)
    amp = g_loc[-1] / c2L
    g_nl = amp * c2 * eta
    gp_nl = amp * (-2.0 * s2 * eta - c2 * eta_p / width)
    G_cor = GridFunction(grid, g_loc - g_nl, "odd")
    Gp_cor = GridFunction(grid, gp_loc - gp_nl, "even")
    i1c, i2c = _running_integrals(G_cor, Gp_cor)
    cor = StreamSolution(G=G_cor, Gp=Gp_cor, I1=i1c, I2=i2c, variant="localized")
    return loc, cor


# ---------------------------------------------------------------------------
# Bump function
# ---------------------------------------------------------------------------

def _mollifier(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _mollifier_deriv(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def bump_eta(x, profile: str = "cubic"):
    """Cutoff eta: exactly 1 on [0, 1/2], exactly 0 on [1, inf), monotone
    nonincreasing in between.

    ``cubic`` is the C^1 smoothstep whose slope peaks at exactly 3;
    ``smooth`` is a C-infinity mollifier quotient for work that takes several
    derivatives of the correction term (its measured max slope is slightly
    above 3).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("bump argument must be nonnegative")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.ones_like(x)
    out[x >= 1.0] = 0.0
    mid = (x > 0.5) & (x < 1.0)
    if profile == "cubic":
        s = 2.0 * x[mid] - 1.0
        out[mid] = 1.0 - s * s * (3.0 - 2.0 * s)
    elif profile == "smooth":
        u = 2.0 * x[mid] - 1.0
        a = _mollifier(1.0 - u)
        b = _mollifier(u)
        out[mid] = a / (a + b)
    else:
        raise DomainError(f"unknown bump profile {profile!r}")
    return float(out[0]) if scalar else out


def bump_eta_deriv(x, profile: str = "cubic"):
    """d(eta)/dx, analytic per profile."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    mid = (x > 0.5) & (x < 1.0)
    if profile == "cubic":
        s = 2.0 * x[mid] - 1.0
        out[mid] = -12.0 * s * (1.0 - s)
    elif profile == "smooth":
        u = 2.0 * x[mid] - 1.0
        a = _mollifier(1.0 - u)
        b = _mollifier(u)
        ap = -_mollifier_deriv(1.0 - u)
        bp = _mollifier_deriv(u)
        out[mid] = 2.0 * (ap * b - a * bp) / (a + b) ** 2
    else:
        raise DomainError(f"unknown bump profile {profile!r}")
    return float(out[0]) if scalar else out


def stream_residual(sol: StreamSolution, M: GridFunction) -> GridFunction:
    """Pointwise residual of G'' + 4G - M' cos^2(theta).

    G'' is taken as the derivative of the stored G' so that each field is
    differentiated once; the two representations of G' are cross-checked
    separately.
    """
    gpp = differentiate(sol.Gp, 1)
    mp = differentiate(M, 1)
    vals = gpp.values + 4.0 * sol.G.values - mp.values * np.cos(sol.grid.nodes) ** 2
    return GridFunction(sol.grid, vals, "odd")
