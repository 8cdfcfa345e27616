"""Picard solver for singular fixed-point problems at the origin.

Solves, componentwise for j = 1..dim with exponents lambda_j > 0,

    y_j(t) = t^2 G_j(y(t), t)
             + t^{-lambda_j} int_0^t s^{lambda_j - 1} (v_j + s^2 F_j(y(s), s)) ds.

The constant part integrates exactly to v_j / lambda_j.  The remainder
integral is evaluated through the substitution s = t * eta, which removes the
t^{-lambda} prefactor analytically, so no cancellation occurs near t = 0.
The domain is shrunk geometrically whenever the iteration fails to contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergenceError
from .grid import _clenshaw, _vals2coeffs


@dataclass
class SingularFixedPointSolution:
    """Converged fixed point on [0, d] with spectral evaluation."""

    d: float
    lambdas: np.ndarray
    v: np.ndarray
    nodes: np.ndarray
    values: np.ndarray  # (dim, n)
    iterations: int
    residual: float
    shrinks: int

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        y = 1.0 - 2.0 * theta / self.d
        coeffs = _vals2coeffs(self.values.T)
        out = np.stack([_clenshaw(coeffs[:, k], y) for k in range(self.values.shape[0])])
        return out

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def _zero_map(y, t):
    return np.zeros_like(y)


def solve_singular_fixed_point(
    dim: int,
    lambda_spectrum,
    v,
    F=None,
    G=None,
    d_hint: float = 0.2,
    *,
    n: int = 64,
    quad_points: int = 32,
    tol: float = 1e-13,
    max_iter: int = 400,
    max_shrinks: int = 12,
) -> SingularFixedPointSolution:
    """Solve the singular fixed-point problem by Picard iteration.

    F and G must be vectorized maps ``(y, t) -> (dim, m)``; ``None`` means
    identically zero.  Raises :class:`NoConvergenceError` once the domain has
    been shrunk ``max_shrinks`` times without the iteration contracting.
    """
    lam = np.asarray(lambda_spectrum, dtype=float)
    v = np.asarray(v, dtype=float)
    if lam.shape != (dim,) or v.shape != (dim,):
        raise DomainError("lambda_spectrum and v must have length dim")
    if np.any(lam <= 0.0):
        raise DomainError("all exponents must be positive")
    F = F or _zero_map
    G = G or _zero_map

    # Gauss-Legendre rule on [0, 1] for the eta integral
    x, w = np.polynomial.legendre.leggauss(quad_points)
    eta = 0.5 * (x + 1.0)
    weta = 0.5 * w
    wmat = weta[None, :] * eta[None, :] ** (lam[:, None] + 1.0)  # (dim, q)

    base = v / lam
    scale = max(1.0, float(np.max(np.abs(base))))

    d = float(d_hint)
    shrinks = 0
    while True:
        i = np.arange(n)
        nodes = 0.5 * d * (1.0 - np.cos(np.pi * i / (n - 1)))
        quad_t = nodes[:, None] * eta[None, :]  # (n, q)
        yref = 1.0 - 2.0 * quad_t / d
        y = np.tile(base[:, None], (1, n))
        prev_delta = np.inf
        ok = False
        for it in range(max_iter):
            coeffs = _vals2coeffs(y.T)  # (n, dim)
            yq = np.stack(
                [_clenshaw(coeffs[:, k], yref.ravel()).reshape(n, quad_points) for k in range(dim)]
            )  # (dim, n, q)
            fq = F(yq.reshape(dim, -1), quad_t.ravel()).reshape(dim, n, quad_points)
            integral = np.einsum("jq,jiq->ji", wmat, fq)
            gnode = G(y, nodes)
            y_new = base[:, None] + nodes[None, :] ** 2 * (integral + gnode)
            delta = float(np.max(np.abs(y_new - y)))
            y = y_new
            if delta <= tol * scale:
                ok = True
                break
            if not np.isfinite(delta) or delta > 1e8 * scale:
                break
            if it >= 6 and delta > 0.97 * prev_delta:
                break  # not contracting
            prev_delta = delta
        if ok:
            # one more sweep for the reported fixed-point residual
            coeffs = _vals2coeffs(y.T)
            yq = np.stack(
                [_clenshaw(coeffs[:, k], yref.ravel()).reshape(n, quad_points) for k in range(dim)]
            )
            fq = F(yq.reshape(dim, -1), quad_t.ravel()).reshape(dim, n, quad_points)
            integral = np.einsum("jq,jiq->ji", wmat, fq)
            phi = base[:, None] + nodes[None, :] ** 2 * (integral + G(y, nodes))
            residual = float(np.max(np.abs(phi - y)))
            return SingularFixedPointSolution(
                d=d,
                lambdas=lam,
                v=v,
                nodes=nodes,
                values=y,
                iterations=it + 1,
                residual=residual,
                shrinks=shrinks,
            )
        shrinks += 1
        if shrinks > max_shrinks:
            raise NoConvergenceError(
                f"Picard iteration failed to contract after {max_shrinks} domain halvings"
            )
        d *= 0.5
