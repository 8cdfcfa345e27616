"""Collocation grids on [0, L]: differentiation, quadrature, interpolation,
and Taylor jets at theta = 0.

The workhorse is the clustered (Chebyshev--Lobatto mapped to [0, L]) grid.
Functions sampled on it are manipulated through their Chebyshev coefficients:
differentiation and antidifferentiation are coefficient recurrences, point
evaluation is Clenshaw's algorithm, and quadrature is Clenshaw--Curtis.  A
uniform grid with finite-difference derivatives is provided for semi-discrete
time-stepping experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.fft import dct

from .errors import (
    DomainError,
    ParityError,
    ResolutionError,
    UnsupportedOrderError,
)

Array = NDArray[np.float64]
Parity = Literal["even", "odd"]

# Trailing Chebyshev coefficients below this relative level are treated as
# roundoff noise and removed before differentiating.  Keeps repeated
# differentiation from amplifying the coefficient noise floor.
_CHOP_REL = 100.0 * np.finfo(float).eps


# ---------------------------------------------------------------------------
# Chebyshev primitives on [-1, 1] (internal).  Values are indexed so that
# index i corresponds to y_i = cos(pi*i/N): y decreasing, theta increasing.
# ---------------------------------------------------------------------------

def _vals2coeffs(vals: Array) -> Array:
    """Chebyshev coefficients of the Lobatto interpolant (DCT-I)."""
    n = vals.shape[0]
    if n == 1:
        return vals.copy()
    c = dct(vals, type=1, axis=0) / (n - 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def _coeffs2vals(coeffs: Array) -> Array:
    """Inverse of :func:`_vals2coeffs`."""
    n = coeffs.shape[0]
    if n == 1:
        return coeffs.copy()
    c = coeffs.copy()
    c[0] *= 2.0
    c[-1] *= 2.0
    return 0.5 * dct(c, type=1, axis=0)


def _chop_coeffs(coeffs: Array) -> Array:
    """Zero the trailing coefficient plateau that sits at roundoff level."""
    c = coeffs.copy()
    mags = np.abs(c) if c.ndim == 1 else np.abs(c).max(axis=1)
    scale = mags.max()
    if scale == 0.0:
        return c
    tail_max = mags[::-1].cumsum()[::-1]  # running max would do; sum is safer
    keep = np.nonzero(tail_max > _CHOP_REL * scale)[0]
    cutoff = keep[-1] + 1 if keep.size else 1
    cutoff = max(cutoff, 8)
    if cutoff < c.shape[0]:
        c[cutoff:] = 0.0
    return c


def _diff_coeffs(coeffs: Array) -> Array:
    """Coefficients of d/dy of a Chebyshev series (same length, shifted)."""
    n = coeffs.shape[0]
    out = np.zeros_like(coeffs)
    if n < 2:
        return out
    # b_{k-1} = b_{k+1} + 2k c_k, downward recurrence.
    for k in range(n - 1, 0, -1):
        out[k - 1] = (out[k + 1] if k + 1 < n else 0.0) + 2.0 * k * coeffs[k]
    out[0] *= 0.5
    return out


def _antideriv_coeffs(coeffs: Array) -> Array:
    """Coefficients of an antiderivative in y (constant term left 0)."""
    n = coeffs.shape[0]
    shape = (n + 1,) + coeffs.shape[1:]
    out = np.zeros(shape, dtype=coeffs.dtype)
    c = np.zeros(shape, dtype=coeffs.dtype)
    c[:n] = coeffs
    c0 = c[0].copy()
    if n >= 2:
        out[1] = c0 - 0.5 * c[2]
    else:
        out[1] = c0
    for k in range(2, n + 1):
        upper = c[k + 1] if k + 1 <= n else 0.0
        out[k] = (c[k - 1] - upper) / (2.0 * k)
    return out


def _clenshaw(coeffs: Array, y: Array) -> Array:
    """Evaluate a Chebyshev series at points y in [-1, 1]."""
    y = np.asarray(y, dtype=float)
    b1 = np.zeros_like(y)
    b2 = np.zeros_like(y)
    for k in range(coeffs.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * y * b1 - b2 + coeffs[k], b1
    return y * b1 - b2 + coeffs[0]


@lru_cache(maxsize=64)
def _cc_weights(n: int) -> Array:
    """Clenshaw--Curtis weights on the (n)-point Lobatto grid on [-1, 1]."""
    if n == 1:
        return np.array([2.0])
    # integral of T_k over [-1, 1]
    k = np.arange(n)
    moments = np.where(k % 2 == 0, 2.0 / (1.0 - k**2 + (k == 1)), 0.0)
    moments[1] = 0.0
    # w_j = sum_k moments_k * (vals2coeffs)_{kj}; apply transform to basis.
    eye = np.eye(n)
    a = _vals2coeffs(eye)
    return moments @ a


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularGrid:
    """Collocation grid on [0, L], 0 < L < pi/2.

    Parameters
    ----------
    L : float
        Half-angle of the wedge in radians.
    n : int
        Node count; nodes include both endpoints.
    kind : {"clustered", "uniform"}
        "clustered" places Chebyshev--Lobatto nodes mapped to [0, L]
        (required for derivatives of order >= 2); "uniform" is equispaced.
    """

    L: float
    n: int
    kind: str = "clustered"
    nodes: Array = field(init=False, repr=False, compare=False)
    quad_weights: Array = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.L < np.pi / 2):
            raise DomainError(f"half-angle L must lie in (0, pi/2), got {self.L}")
        if self.n < 4:
            raise ResolutionError(f"need at least 4 nodes, got {self.n}")
        if self.kind not in ("clustered", "uniform"):
            raise DomainError(f"unknown grid kind {self.kind!r}")
        if self.kind == "clustered":
            i = np.arange(self.n)
            nodes = 0.5 * self.L * (1.0 - np.cos(np.pi * i / (self.n - 1)))
            weights = 0.5 * self.L * _cc_weights(self.n)
        else:
            nodes = np.linspace(0.0, self.L, self.n)
            weights = _uniform_weights(self.n) * (self.L / (self.n - 1))
        nodes = nodes.copy()
        nodes[0] = 0.0
        nodes[-1] = self.L
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_weights", weights)

    # -- coordinate maps ----------------------------------------------------
    def to_reference(self, theta: Array) -> Array:
        """Map theta in [0, L] to y in [-1, 1] (y = 1 at theta = 0)."""
        return 1.0 - 2.0 * np.asarray(theta, dtype=float) / self.L

    @property
    def spacings(self) -> Array:
        return np.diff(self.nodes)

    def with_n(self, n: int) -> "AngularGrid":
        return AngularGrid(self.L, n, self.kind)


def _uniform_weights(n: int) -> Array:
    """Composite weights (Gregory order 4) in units of the grid spacing."""
    if n < 8:
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        return w
    w = np.ones(n)
    edge = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
    w[:3] = edge
    w[-3:] = edge[::-1]
    return w


@dataclass
class GridFunction:
    """Real function of theta sampled on an :class:`AngularGrid`.

    `parity` records the symmetry about theta = 0 of the underlying function
    on [-L, L]; it flips under differentiation and is consulted by
    :func:`taylor_jet`.
    """

    grid: AngularGrid
    values: Array
    parity: Parity = "even"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise DomainError(
                f"values shape {self.values.shape} does not match grid size {self.grid.n}"
            )
        if self.parity not in ("even", "odd"):
            raise ParityError(f"parity must be 'even' or 'odd', got {self.parity!r}")

    # -- algebra (parity-tracking) -----------------------------------------
    def _like(self, values: Array, parity: Parity) -> "GridFunction":
        return GridFunction(self.grid, values, parity)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            if other.parity != self.parity:
                raise ParityError("cannot add functions of opposite parity")
            return self._like(self.values + other.values, self.parity)
        return self._like(self.values + other, self.parity)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            if other.parity != self.parity:
                raise ParityError("cannot subtract functions of opposite parity")
            return self._like(self.values - other.values, self.parity)
        return self._like(self.values - other, self.parity)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            parity = "even" if self.parity == other.parity else "odd"
            return self._like(self.values * other.values, parity)
        return self._like(self.values * other, self.parity)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values, self.parity)

    # -- spectral machinery --------------------------------------------------
    def coeffs(self) -> Array:
        if self.grid.kind != "clustered":
            raise ResolutionError("Chebyshev coefficients need a clustered grid")
        return _vals2coeffs(self.values)

    def __call__(self, theta) -> Array:
        """Evaluate the grid interpolant at arbitrary theta in [0, L]."""
        theta = np.asarray(theta, dtype=float)
        if self.grid.kind == "clustered":
            return _clenshaw(self.coeffs(), self.grid.to_reference(theta))
        return np.interp(theta, self.grid.nodes, self.values)

    def resample(self, grid: AngularGrid) -> "GridFunction":
        if abs(grid.L - self.grid.L) > 1e-14 * self.grid.L:
            raise DomainError("resample target must share the half-angle L")
        return GridFunction(grid, self(grid.nodes), self.parity)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def differentiate(f: GridFunction, order: int = 1) -> GridFunction:
    """order-th derivative of f, sampled on the same grid.

    Parity flips with each order.  Orders >= 2 require the clustered grid.
    """
    if order < 1 or order > 5:
        raise UnsupportedOrderError(f"derivative order must be 1..5, got {order}")
    if f.grid.n < 2 * order + 4:
        raise ResolutionError(f"n = {f.grid.n} too small for order {order}")
    parity: Parity = f.parity if order % 2 == 0 else ("odd" if f.parity == "even" else "even")
    if f.grid.kind == "uniform":
        if order >= 2:
            raise ResolutionError("order >= 2 requires a clustered grid")
        vals = np.gradient(f.values, f.grid.nodes, edge_order=2)
        return GridFunction(f.grid, vals, parity)
    c = _chop_coeffs(f.coeffs())
    scale = -2.0 / f.grid.L  # d/dtheta = (dy/dtheta) d/dy
    for _ in range(order):
        c = _diff_coeffs(c)
    vals = _coeffs2vals(c) * scale**order
    return GridFunction(f.grid, vals, parity)


def cumulative_integral(f: GridFunction) -> GridFunction:
    """F(theta) = integral of f from 0 to theta, on the same grid."""
    if f.grid.kind != "clustered":
        raise ResolutionError("cumulative integration needs the clustered grid")
    a = _antideriv_coeffs(f.coeffs())
    # theta in [0, theta0] maps to y in [y0, 1]; the antiderivative in theta
    # is -(L/2) * (P(y) - P(1)).
    p_vals = _clenshaw(a, f.grid.to_reference(f.grid.nodes))
    p_one = _clenshaw(a, np.array(1.0))
    vals = -0.5 * f.grid.L * (p_vals - p_one)
    parity: Parity = "odd" if f.parity == "even" else "even"
    return GridFunction(f.grid, vals, parity)


def integrate(f: GridFunction, a: float | None = None, b: float | None = None) -> float:
    """Integral of f over [a, b] (defaults to the whole [0, L]).

    Off-node endpoints use the grid interpolant through the spectral
    antiderivative, so they are endpoint-correct.
    """
    lo = 0.0 if a is None else float(a)
    hi = f.grid.L if b is None else float(b)
    if lo > hi:
        raise DomainError(f"integration bounds reversed: a = {lo} > b = {hi}")
    if lo < -1e-15 or hi > f.grid.L * (1 + 1e-15):
        raise DomainError("integration bounds must lie inside [0, L]")
    if lo == 0.0 and hi == f.grid.L:
        return float(f.grid.quad_weights @ f.values)
    if f.grid.kind != "clustered":
        raise ResolutionError("partial-interval integration needs the clustered grid")
    big_f = cumulative_integral(f)
    return float(big_f(hi) - big_f(lo))


def taylor_jet(f: GridFunction, k: int, with_cond: bool = False):
    """Estimates of f(0), f'(0), ..., f^(k)(0).

    Parity-forbidden entries are exactly zero.  The remaining entries come
    from a least-squares fit of a parity-pure polynomial on the nodes nearest
    the origin; accuracy degrades gracefully with noise, and the fit's
    condition number is available via ``with_cond``.
    """
    if k < 0 or k > 4:
        raise UnsupportedOrderError(f"jet order must be 0..4, got {k}")
    degree = k + 8
    start = 0 if f.parity == "even" else 1
    exps = np.arange(start, degree + 1, 2)
    min_pts = max(10, 2 * exps.size + 2)
    if f.grid.n < min_pts:
        raise ResolutionError("grid too coarse for a stable jet fit")
    nodes = f.grid.nodes
    r = max(nodes[min_pts - 1], 0.25 * f.grid.L)
    mask = nodes <= r * (1 + 1e-12)
    theta = nodes[mask]
    # parity-pure Chebyshev basis T_e(theta/r), well conditioned on [0, r]
    design = np.polynomial.chebyshev.chebvander(theta / r, degree)[:, exps]
    coef, _, _, sv = np.linalg.lstsq(design, f.values[mask], rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    cheb_full = np.zeros(degree + 1)
    cheb_full[exps] = coef
    power = np.polynomial.chebyshev.cheb2poly(cheb_full)
    jet = np.zeros(k + 1)
    fact = 1.0
    for j in range(k + 1):
        if j > 0:
            fact *= j
        allowed = (j % 2 == 0) if f.parity == "even" else (j % 2 == 1)
        if allowed and j < power.size:
            jet[j] = power[j] * fact / r**j
    if with_cond:
        return jet, cond
    return jet


def jet_matrix(grid: AngularGrid, k: int, parity: Parity = "even") -> Array:
    """(k+1, n) matrix J with J @ values == taylor_jet(f, k).

    taylor_jet is linear in the samples; this exposes that linear map for
    vectorized operator assembly.
    """
    out = np.zeros((k + 1, grid.n))
    eye = np.eye(grid.n)
    for j in range(grid.n):
        out[:, j] = taylor_jet(GridFunction(grid, eye[j], parity), k)
    return out


def grid_function(grid: AngularGrid, fn, parity: Parity = "even") -> GridFunction:
    """Sample a callable on the grid."""
    return GridFunction(grid, np.asarray(fn(grid.nodes), dtype=float), parity)
