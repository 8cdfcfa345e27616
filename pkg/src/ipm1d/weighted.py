"""Weighted fourth-order inner products and the inequality test bench.

The core object is the inner product

    <f, g> = f(0) g(0) + f''(0) g''(0)
             + B int (f - P2 f)(g - P2 g) phi
             + int f'''' g'''' psi

with the piecewise weights phi ~ theta^-8 near the origin and
psi ~ (L - theta)^{13/2} near the boundary.  The singular phi-integral is
never formed by naive subtraction: near zero the integrand is rewritten as
the product of the jet-subtracted remainders divided by theta^4, whose values
come from a local polynomial fit, which cancels theta^-8 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DomainError, ParityError
from .grid import (
    AngularGrid,
    GridFunction,
    _chop_coeffs,
    _clenshaw,
    _diff_coeffs,
    integrate,
    taylor_jet,
)

_ENDPOINT_EXP = 13.0 / 2.0


# ---------------------------------------------------------------------------
# Parameters and weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightParams:
    """Parameters (L, l1, l2, K, B) of the weighted inner product."""

    L: float
    l1: float
    l2: float
    K: float
    B: float

    def __post_init__(self):
        if not (0.0 < self.l1 < self.l2 < self.L):
            raise DomainError(f"need 0 < l1 < l2 < L, got {self}")
        if self.l1 >= 1.0 or (self.L - self.l2) >= 1.0:
            raise DomainError("need l1 < 1 and L - l2 < 1")
        if self.K <= 10.0:
            raise DomainError(f"need K > 10, got K = {self.K}")
        if self.B <= 0.0:
            raise DomainError("need B > 0")

    @classmethod
    def default_for(cls, L: float, l1: float = 0.3, B: float = 1e4) -> "WeightParams":
        """Linked defaults: L - l2 = l1^2 and K = l1^-4."""
        l1 = min(l1, 0.4 * L)
        return cls(L=L, l1=l1, l2=L - l1 * l1, K=l1 ** (-4.0), B=B)

    def refined(self) -> "WeightParams":
        """One step of the smallness regime: halve l1 and double B.

        K and l2 are kept: relinking K = l1^-4 sends the weights outside the
        numerically evaluable range within a step or two.
        """
        return replace(self, l1=0.5 * self.l1, B=2.0 * self.B)

    def with_B(self, B: float) -> "WeightParams":
        return replace(self, B=B)


def _bulk_decay(theta, l1, K):
    # (l1 / theta)^K computed in log space; equals exactly 1.0 at theta = l1
    return np.exp(-K * np.log(np.asarray(theta, dtype=float) / l1))


def weight_phi(theta, wp: WeightParams):
    """Low-order weight: theta^-8, then l1^{K-8} theta^-K, then constant."""
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    if np.any(theta <= 0.0):
        raise DomainError("phi is singular at theta = 0; need theta > 0")
    if np.any(theta > wp.L * (1 + 1e-12)):
        raise DomainError("theta beyond L")
    out = np.empty_like(theta)
    near = theta <= wp.l1
    bulk = (theta > wp.l1) & (theta <= wp.l2)
    end = theta > wp.l2
    out[near] = theta[near] ** (-8.0)
    out[bulk] = wp.l1 ** (-8.0) * _bulk_decay(theta[bulk], wp.l1, wp.K)
    out[end] = wp.l1 ** (-8.0) * _bulk_decay(wp.l2, wp.l1, wp.K)
    return float(out[0]) if scalar else out


def weight_psi(theta, wp: WeightParams):
    """High-order weight: 1, then l1^K theta^-K, then ~ (L - theta)^{13/2}."""
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    if np.any(theta < 0.0) or np.any(theta > wp.L * (1 + 1e-12)):
        raise DomainError("theta outside [0, L]")
    out = np.empty_like(theta)
    near = theta <= wp.l1
    bulk = (theta > wp.l1) & (theta <= wp.l2)
    end = theta > wp.l2
    out[near] = 1.0
    out[bulk] = _bulk_decay(theta[bulk], wp.l1, wp.K)
    ratio = np.clip((wp.L - theta[end]) / (wp.L - wp.l2), 0.0, None)
    out[end] = _bulk_decay(wp.l2, wp.l1, wp.K) * ratio**_ENDPOINT_EXP
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Jet subtraction and derivative evaluation off the grid
# ---------------------------------------------------------------------------

def taylor_part(f: GridFunction) -> GridFunction:
    """P2 f = f(0) + f''(0) theta^2 / 2 sampled on f's grid."""
    if f.parity != "even":
        raise ParityError("taylor_part expects an even function")
    jet = taylor_jet(f, 2)
    vals = jet[0] + 0.5 * jet[2] * f.grid.nodes**2
    return GridFunction(f.grid, vals, "even")


class _RemainderEval:
    """Stable evaluator of s(theta) = (f - P2 f)/theta^4.

    Below a crossover radius the value comes from the local fit (so both the
    function and its jet cancel analytically); above it the direct
    subtraction is already well conditioned.
    """

    def __init__(self, f: GridFunction, crossover: float | None = None):
        if f.parity != "even":
            raise ParityError("remainder evaluation expects an even function")
        self.f = f
        grid = f.grid
        degree = 12
        exps = np.arange(0, degree + 1, 2)
        r = max(grid.nodes[max(10, 2 * exps.size + 2) - 1], 0.25 * grid.L)
        mask = grid.nodes <= r * (1 + 1e-12)
        design = np.polynomial.chebyshev.chebvander(grid.nodes[mask] / r, degree)[:, exps]
        coef, _, _, _ = np.linalg.lstsq(design, f.values[mask], rcond=None)
        cheb_full = np.zeros(degree + 1)
        cheb_full[exps] = coef
        self._power = np.polynomial.chebyshev.cheb2poly(cheb_full)
        self._r = r
        self.jet0 = float(self._power[0])
        self.jet2 = float(2.0 * self._power[2]) / r**2 if self._power.size > 2 else 0.0
        self.crossover = crossover if crossover is not None else min(0.08, 0.5 * r)

    def remainder_over_theta4(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.empty_like(theta)
        low = theta < self.crossover
        if np.any(low):
            # tail of the local power series starting at theta^4
            x = theta[low] / self._r
            acc = np.zeros_like(x)
            for k in range(self._power.size - 1, 3, -1):
                acc = acc * x + self._power[k]
            out[low] = acc / self._r**4
        high = ~low
        if np.any(high):
            t = theta[high]
            p2 = self.jet0 + 0.5 * self.jet2 * t**2
            out[high] = (self.f(t) - p2) / t**4
        return out

    def remainder(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.remainder_over_theta4(theta) * theta**4


def _fourth_derivative_coeffs(f: GridFunction) -> np.ndarray:
    c = _chop_coeffs(f.coeffs())
    for _ in range(4):
        c = _diff_coeffs(c)
    return c * (2.0 / f.grid.L) ** 4


def _eval_d4(f: GridFunction, d4c: np.ndarray, theta) -> np.ndarray:
    return _clenshaw(d4c, f.grid.to_reference(np.asarray(theta, dtype=float)))


# ---------------------------------------------------------------------------
# Quadrature rules per weight region (cached per parameter set)
# ---------------------------------------------------------------------------

def _gl_panel(a: float, b: float, m: int = 32):
    x, w = np.polynomial.legendre.leggauss(m)
    pts = 0.5 * (b - a) * x + 0.5 * (a + b)
    return pts, 0.5 * (b - a) * w


def _composite(panels, m=32, refine: int = 1):
    pts, wts = [], []
    for a, b in panels:
        if refine > 1:
            sub = np.linspace(a, b, refine + 1)
            for lo, hi in zip(sub[:-1], sub[1:]):
                p, w = _gl_panel(lo, hi, m)
                pts.append(p)
                wts.append(w)
        else:
            p, w = _gl_panel(a, b, m)
            pts.append(p)
            wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


@lru_cache(maxsize=32)
def _phi_rules(L: float, l1: float, l2: float, K: float, refine: int = 1):
    """(points, effective weights) for the three phi regions.

    Region 1 weights are for the *remainder-product* form (phi cancelled);
    regions 2-3 multiply the plain product (f - P2 f)(g - P2 g).
    """
    edges = np.array([0.0, 0.25, 0.5, 0.75, 1.0]) * l1
    p1, w1 = _composite(list(zip(edges[:-1], edges[1:])), refine=refine)
    # bulk: theta = l1 e^u, phi dtheta = l1^-7 e^{-(K-1)u} du
    span = min(np.log(l2 / l1), 80.0 / (K - 1.0))
    delta = 1.0 / (K - 1.0)
    panels, a = [], 0.0
    step = delta
    while a < span:
        b = min(a + step, span)
        panels.append((a, b))
        a, step = b, 2 * step
    u, wu = _composite(panels, m=24, refine=refine)
    p2 = l1 * np.exp(u)
    w2 = l1 ** (-7.0) * np.exp(-(K - 1.0) * u) * wu
    p3, w3raw = _composite([(l2, 0.5 * (l2 + L)), (0.5 * (l2 + L), L)], refine=refine)
    w3 = w3raw * (l1 ** (-8.0) * np.exp(-K * np.log(l2 / l1)))
    return (p1, w1), (p2, w2), (p3, w3)


@lru_cache(maxsize=32)
def _psi_rules(L: float, l1: float, l2: float, K: float, refine: int = 1):
    """(points, effective weights) for the three psi regions (psi included)."""
    edges = np.array([0.0, 0.25, 0.5, 0.75, 1.0]) * l1
    p1, w1 = _composite(list(zip(edges[:-1], edges[1:])), refine=refine)
    span = min(np.log(l2 / l1), 80.0 / (K - 1.0))
    delta = 1.0 / (K - 1.0)
    panels, a = [], 0.0
    step = delta
    while a < span:
        b = min(a + step, span)
        panels.append((a, b))
        a, step = b, 2 * step
    u, wu = _composite(panels, m=24, refine=refine)
    p2 = l1 * np.exp(u)
    w2 = l1 * np.exp(-(K - 1.0) * u) * wu
    # endpoint: w = L - theta, integrand ~ w^{13/2}: grade panels toward w = 0
    width = L - l2
    cuts = [0.0, width / 64, width / 16, width / 4, width]
    wpts, wwts = _composite(list(zip(cuts[:-1], cuts[1:])), refine=refine)
    p3 = L - wpts
    scale = np.exp(-K * np.log(l2 / l1)) * width ** (-_ENDPOINT_EXP)
    w3 = wwts * scale * wpts**_ENDPOINT_EXP
    return (p1, w1), (p2, w2), (p3, w3)


@lru_cache(maxsize=32)
def _plain_endpoint_rule(L: float):
    """Rule for int_0^L u v (L - theta)^{13/2} dtheta (the plain H4 norm)."""
    cuts = [0.0, 0.5 * L, 0.75 * L, 0.875 * L, 0.9375 * L, L]
    pts, wts = _composite(list(zip(cuts[:-1], cuts[1:])))
    return pts, wts * (L - pts) ** _ENDPOINT_EXP


# ---------------------------------------------------------------------------
# Inner products
# ---------------------------------------------------------------------------

def h4tilde_pieces(f: GridFunction, g: GridFunction, wp: WeightParams) -> dict:
    """The four summands of the weighted inner product, separately."""
    if f.parity != "even" or g.parity != "even":
        raise ParityError("weighted inner product is defined for even functions")
    if f.grid is not g.grid and not np.array_equal(f.grid.nodes, g.grid.nodes):
        raise DomainError("f and g must share a grid")
    jet_f = taylor_jet(f, 2)
    jet_g = jet_f if g is f else taylor_jet(g, 2)
    rem_f = _RemainderEval(f)
    rem_g = rem_f if g is f else _RemainderEval(g)
    (p1, w1), (p2, w2), (p3, w3) = _phi_rules(wp.L, wp.l1, wp.l2, wp.K)
    low = float(w1 @ (rem_f.remainder_over_theta4(p1) * rem_g.remainder_over_theta4(p1)))
    low += float(w2 @ (rem_f.remainder(p2) * rem_g.remainder(p2)))
    low += float(w3 @ (rem_f.remainder(p3) * rem_g.remainder(p3)))
    d4f = _fourth_derivative_coeffs(f)
    d4g = d4f if g is f else _fourth_derivative_coeffs(g)
    (q1, v1), (q2, v2), (q3, v3) = _psi_rules(wp.L, wp.l1, wp.l2, wp.K)
    high = float(v1 @ (_eval_d4(f, d4f, q1) * _eval_d4(g, d4g, q1)))
    high += float(v2 @ (_eval_d4(f, d4f, q2) * _eval_d4(g, d4g, q2)))
    high += float(v3 @ (_eval_d4(f, d4f, q3) * _eval_d4(g, d4g, q3)))
    return {
        "value": float(jet_f[0] * jet_g[0]),
        "second_derivative": float(jet_f[2] * jet_g[2]),
        "weighted_low": wp.B * low,
        "weighted_high": high,
    }


def h4tilde_inner(f: GridFunction, g: GridFunction, wp: WeightParams) -> float:
    pieces = h4tilde_pieces(f, g, wp)
    return sum(pieces.values())


def h4_inner(f: GridFunction, g: GridFunction) -> float:
    """Plain equivalent norm: int f g + int f'''' g'''' (L - theta)^{13/2}."""
    if f.grid.n != g.grid.n:
        raise DomainError("f and g must share a grid")
    low = integrate(f * g)
    pts, wts = _plain_endpoint_rule(f.grid.L)
    d4f = _fourth_derivative_coeffs(f)
    d4g = d4f if g is f else _fourth_derivative_coeffs(g)
    high = float(wts @ (_eval_d4(f, d4f, pts) * _eval_d4(g, d4g, pts)))
    return low + high


def h4tilde_norm(f: GridFunction, wp: WeightParams) -> float:
    return float(np.sqrt(max(h4tilde_inner(f, f, wp), 0.0)))


def h4_norm(f: GridFunction) -> float:
    return float(np.sqrt(max(h4_inner(f, f), 0.0)))


class H4TildeForm:
    """Precomputed quadrature workspace for repeated weighted inner products.

    `prepare` extracts everything the bilinear form needs from one function;
    `inner` is then a handful of dot products.  Matches h4tilde_inner.
    """

    def __init__(self, grid: AngularGrid, wp: WeightParams, refine: int = 1):
        self.grid = grid
        self.wp = wp
        self._phi = _phi_rules(wp.L, wp.l1, wp.l2, wp.K, refine)
        self._psi = _psi_rules(wp.L, wp.l1, wp.l2, wp.K, refine)

    def prepare(self, f: GridFunction, skip_end: bool = False) -> dict:
        """Extract the arrays the form needs; ``skip_end`` zeroes the
        endpoint-region entries (used when f is represented on a smooth
        subinterval and the endpoint weight is negligible)."""
        jet = taylor_jet(f, 2)
        rem = _RemainderEval(f)
        (p1, _), (p2, _), (p3, _) = self._phi
        d4 = _fourth_derivative_coeffs(f)
        (q1, _), (q2, _), (q3, _) = self._psi
        return {
            "jet0": jet[0],
            "jet2": jet[2],
            "s1": rem.remainder_over_theta4(p1),
            "r2": rem.remainder(p2),
            "r3": np.zeros_like(p3) if skip_end else rem.remainder(p3),
            "d1": _eval_d4(f, d4, q1),
            "d2": _eval_d4(f, d4, q2),
            "d3": np.zeros_like(q3) if skip_end else _eval_d4(f, d4, q3),
        }

    def inner(self, a: dict, b: dict) -> float:
        (_, w1), (_, w2), (_, w3) = self._phi
        (_, v1), (_, v2), (_, v3) = self._psi
        low = float(w1 @ (a["s1"] * b["s1"]) + w2 @ (a["r2"] * b["r2"]) + w3 @ (a["r3"] * b["r3"]))
        high = float(v1 @ (a["d1"] * b["d1"]) + v2 @ (a["d2"] * b["d2"]) + v3 @ (a["d3"] * b["d3"]))
        return a["jet0"] * b["jet0"] + a["jet2"] * b["jet2"] + self.wp.B * low + high


@dataclass
class NormReport:
    h4tilde: float
    h4: float
    pieces: dict

    @classmethod
    def of(cls, f: GridFunction, wp: WeightParams) -> "NormReport":
        pieces = h4tilde_pieces(f, f, wp)
        return cls(
            h4tilde=float(np.sqrt(max(sum(pieces.values()), 0.0))),
            h4=h4_norm(f),
            pieces=pieces,
        )


# ---------------------------------------------------------------------------
# Inequality test bench
# ---------------------------------------------------------------------------

#: Four iterated sharp Hardy steps take theta^-8 against the jet-free square
#: down to the unweighted fourth derivative.
HARDY_ITERATED_BOUND = (2.0 / 7.0 * 2.0 / 5.0 * 2.0 / 3.0 * 2.0) ** 2


def _weighted_endpoint_integral(f: GridFunction, order: int, power: float, lo: float) -> float:
    """int_lo^L (f^(order))^2 (L - theta)^power dtheta via graded panels."""
    c = _chop_coeffs(f.coeffs())
    for _ in range(order):
        c = _diff_coeffs(c)
    c = c * (2.0 / f.grid.L) ** order
    L = f.grid.L
    width = L - lo
    cuts = [0.0, width / 64, width / 16, width / 4, width]
    pts, wts = _composite(list(zip(cuts[:-1], cuts[1:])))
    theta = L - pts
    vals = _clenshaw(c, f.grid.to_reference(theta))
    return float(wts @ (vals**2 * pts**power))


def verify_inequalities(samples: list[GridFunction], wp: WeightParams) -> dict:
    """Empirical constants for the norm-equivalence, weighted-interpolation,
    sup-embedding, algebra, and iterated-Hardy inequalities.

    Every constant is a ratio that the corresponding inequality bounds; the
    report carries per-sample values so refinement drift can be checked.
    """
    if not samples:
        raise DomainError("need at least one sample")
    report: dict = {}
    tilde = [h4tilde_norm(f, wp) for f in samples]
    plain = [h4_norm(f) for f in samples]
    report["equivalence"] = {
        "tilde_over_plain": [t / p for t, p in zip(tilde, plain)],
        "plain_over_tilde": [p / t for t, p in zip(tilde, plain)],
    }
    report["equivalence"]["constant"] = max(
        max(report["equivalence"]["tilde_over_plain"]),
        max(report["equivalence"]["plain_over_tilde"]),
    )

    interp = []
    for f in samples:
        lhs = _weighted_endpoint_integral(f, 2, 2.0, wp.l2)
        rhs = integrate(f * f, wp.l2, f.grid.L) + _weighted_endpoint_integral(f, 3, 4.0, wp.l2)
        interp.append(lhs / rhs)
    report["interpolation"] = {"per_sample": interp, "constant": max(interp)}

    embed = []
    for f, p in zip(samples, plain):
        dense = np.linspace(0.0, f.grid.L, 2001)
        embed.append(float(np.max(np.abs(f(dense)))) / p)
    report["embedding"] = {"per_sample": embed, "constant": max(embed)}

    algebra = []
    for i in range(len(samples)):
        f = samples[i]
        g = samples[(i + 1) % len(samples)]
        algebra.append(h4_norm(f * g) / (h4_norm(f) * h4_norm(g)))
    report["algebra"] = {"per_sample": algebra, "constant": max(algebra)}

    hardy = []
    for f in samples:
        rem = _RemainderEval(f)
        (p1, w1), _, _ = _phi_rules(wp.L, wp.l1, wp.l2, wp.K)
        lhs = float(w1 @ rem.remainder_over_theta4(p1) ** 2)
        d4 = _fourth_derivative_coeffs(f)
        rhs = float(w1 @ _eval_d4(f, d4, p1) ** 2)
        if rhs > 0:
            hardy.append(lhs / rhs)
    report["hardy"] = {
        "per_sample": hardy,
        "constant": max(hardy) if hardy else 0.0,
        "iterated_bound": HARDY_ITERATED_BOUND,
    }
    return report


def sample_family(grid: AngularGrid, count: int, seed: int, jet_free: bool = False):
    """Seeded even test functions: jet + smooth theta^4-prefixed remainder.

    Chebyshev-style coefficients decay like k^-2 so the family stays tame in
    the fourth-derivative norm; everything is reproducible from the seed.
    """
    rng = np.random.default_rng(seed)
    out = []
    t = grid.nodes
    u = 2.0 * (t / grid.L) ** 2 - 1.0
    for _ in range(count):
        c0, c2 = rng.standard_normal(2)
        if jet_free:
            c0 = c2 = 0.0
        amps = rng.standard_normal(8) / (1.0 + np.arange(8)) ** 2
        rem = np.zeros_like(t)
        for k, a in enumerate(amps):
            rem += a * np.polynomial.chebyshev.chebval(u, np.eye(k + 1)[k])
        vals = c0 + c2 * t**2 + t**4 * rem
        out.append(GridFunction(grid, vals, "even"))
    return out
